//! Keyword parsing and normalization for generated reformulations.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KeywordMode {
    /// Split on commas; keywords may be multi-word phrases.
    #[default]
    Comma,
    /// Split on whitespace; every keyword is a single token.
    Whitespace,
}

impl KeywordMode {
    pub fn parse(s: &str) -> Option<KeywordMode> {
        match s.trim().to_lowercase().as_str() {
            "comma" => Some(KeywordMode::Comma),
            "whitespace" => Some(KeywordMode::Whitespace),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KeywordMode::Comma => "comma",
            KeywordMode::Whitespace => "whitespace",
        }
    }
}

/// Strips a leading enumeration marker like `1.` or `12)`.
fn strip_numbering(s: &str) -> &str {
    let digits = s.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return s;
    }
    let rest = &s[digits..];
    if let Some(stripped) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
        stripped.trim_start()
    } else {
        s
    }
}

fn trim_punctuation(s: &str) -> &str {
    s.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Splits on the mode delimiter, trims whitespace and surrounding
/// punctuation, strips numbering prefixes, lowercases, drops empties, and
/// deduplicates preserving first occurrence. Garbage in may yield an empty
/// list; idempotent over its own comma-joined output.
pub fn parse_keywords(raw: &str, mode: KeywordMode) -> Vec<String> {
    let pieces: Vec<&str> = match mode {
        KeywordMode::Comma => raw.split(',').collect(),
        KeywordMode::Whitespace => raw.split_whitespace().collect(),
    };
    let mut seen = std::collections::HashSet::new();
    let mut keywords = Vec::new();
    for piece in pieces {
        // Trimming can expose a fresh numbering prefix ("!1. foo"), so clean
        // to a fixed point.
        let mut cleaned = piece.trim();
        loop {
            let next = trim_punctuation(strip_numbering(cleaned));
            if next == cleaned {
                break;
            }
            cleaned = next;
        }
        let cleaned = cleaned.to_lowercase();
        if cleaned.is_empty() {
            continue;
        }
        if seen.insert(cleaned.clone()) {
            keywords.push(cleaned);
        }
    }
    keywords
}
