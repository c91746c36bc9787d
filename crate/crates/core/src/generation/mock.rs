//! Deterministic offline generator used as a test double for the whole
//! pipeline.
//!
//! The mock looks at the final non-empty line of the prompt. The text after
//! the last `": "` separator is taken as the query (the whole line when no
//! separator is present). The output is a comma-separated keyword list:
//! the query's content words echoed verbatim, followed by one vocabulary
//! term per content word of the full line, picked by seeded hashing into the
//! bundled vocabulary. Output length is bounded by `max_new_tokens`
//! whitespace tokens.

use std::sync::LazyLock;

use crate::corpus_index::{tokenize, TokenizerConfig};

use super::{GenError, Generator, GeneratorConfig};

/// Bundled expansion-term vocabulary (versioned fixture).
pub const BUNDLED_VOCAB: &str = include_str!("../../fixtures/mock_vocab_v1.txt");

static VOCAB: LazyLock<Vec<String>> = LazyLock::new(|| {
    BUNDLED_VOCAB
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
});

pub fn bundled_vocab() -> &'static [String] {
    &VOCAB
}

// FNV-1a, seed-mixed; stable across platforms and toolchains.
fn seeded_hash(word: &str, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for byte in word.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn content_words(text: &str) -> Vec<String> {
    // Stopword-filtered lowercase tokens; the default tokenizer pipeline.
    tokenize(text, &TokenizerConfig::default())
}

/// Deterministic function of `(prompt, seed)`; see the module docs for the
/// construction.
pub fn mock_complete(prompt: &str, seed: u64, max_new_tokens: usize) -> String {
    let line = prompt
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("");
    let query_part = line.rsplit_once(": ").map_or(line, |(_, q)| q);

    let vocab = bundled_vocab();
    let mut keywords = content_words(query_part);
    for word in content_words(line) {
        let term = &vocab[(seeded_hash(&word, seed) % vocab.len() as u64) as usize];
        keywords.push(term.clone());
    }

    let mut kept: Vec<String> = Vec::new();
    let mut token_budget = max_new_tokens;
    for kw in keywords {
        let words = kw.split_whitespace().count().max(1);
        if words > token_budget {
            break;
        }
        token_budget -= words;
        kept.push(kw);
    }
    kept.join(", ")
}

/// Offline provider backed by [`mock_complete`]; the seed comes from the
/// generator config.
pub struct MockGenerator {
    config: GeneratorConfig,
}

impl MockGenerator {
    pub fn new(config: GeneratorConfig) -> Result<Self, GenError> {
        config.validate()?;
        Ok(MockGenerator { config })
    }

    pub fn with_seed(seed: u64) -> Self {
        MockGenerator {
            config: GeneratorConfig {
                seed,
                ..Default::default()
            },
        }
    }
}

impl Generator for MockGenerator {
    fn complete(&self, prompt: &str) -> Result<String, GenError> {
        if prompt.is_empty() {
            return Err(GenError::EmptyPrompt);
        }
        Ok(mock_complete(
            prompt,
            self.config.seed,
            self.config.max_new_tokens as usize,
        ))
    }
}
