//! Deterministic text analysis: lowercase, split on non-alphanumeric runs,
//! optional stopword removal, optional stemming.

use std::collections::HashSet;
use std::sync::{Arc, LazyLock};

use rust_stemmers::{Algorithm, Stemmer};

/// Bundled English stopword list (versioned fixture).
pub const BUNDLED_STOPWORDS: &str = include_str!("../../fixtures/stopwords_en_v1.txt");

static BUNDLED_SET: LazyLock<Arc<HashSet<String>>> =
    LazyLock::new(|| Arc::new(parse_stopwords(BUNDLED_STOPWORDS)));

static ENGLISH_STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

/// Parses a stopword file: one token per line, '#'-prefixed comments allowed.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Default)]
pub enum StopwordFilter {
    /// No stopword removal.
    None,
    /// The bundled English list.
    #[default]
    Bundled,
    /// A caller-supplied list.
    Custom(Arc<HashSet<String>>),
}

impl StopwordFilter {
    fn contains(&self, token: &str) -> bool {
        match self {
            StopwordFilter::None => false,
            StopwordFilter::Bundled => BUNDLED_SET.contains(token),
            StopwordFilter::Custom(set) => set.contains(token),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub stopwords: StopwordFilter,
    pub stemming: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: true,
            stopwords: StopwordFilter::Bundled,
            stemming: false,
        }
    }
}

impl TokenizerConfig {
    /// Lowercase only: no stopword removal, no stemming.
    pub fn plain() -> Self {
        TokenizerConfig {
            lowercase: true,
            stopwords: StopwordFilter::None,
            stemming: false,
        }
    }
}

/// Splits `text` on runs of non-alphanumeric characters and applies the
/// configured normalization. Deterministic; empty input yields an empty list.
pub fn tokenize(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| {
            if cfg.lowercase {
                s.to_lowercase()
            } else {
                s.to_string()
            }
        })
        .filter(|t| !cfg.stopwords.contains(t))
        .map(|t| {
            if cfg.stemming {
                ENGLISH_STEMMER.stem(&t).into_owned()
            } else {
                t
            }
        })
        .collect()
}
