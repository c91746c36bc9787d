//! Instruction-set management, prompt rendering for every prompt species,
//! keyword parsing, and the filter / interpretability prompt builders.

mod judge;
mod keywords;

pub use judge::{
    build_interpretability_prompt, judge_pair_both_orders, parse_verdict, PairVerdict, Verdict,
};
pub use keywords::{parse_keywords, KeywordMode};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_index::Document;
use crate::generation::{GenError, Generator};

/// Bundled general-purpose instruction set (versioned fixture).
pub const FIG3_GENERAL: &str = include_str!("../../fixtures/instructions/fig3_general.txt");
/// Bundled domain-specific base instruction for argument retrieval.
pub const DOMAIN_ARGUMENT_RETRIEVAL: &str =
    include_str!("../../fixtures/instructions/domain_argument_retrieval.txt");
/// Bundled keyword-filter prompt template (versioned fixture).
pub const FILTER_TEMPLATE: &str = include_str!("../../fixtures/prompts/filter_v1.txt");

/// Prompt sent to bootstrap the instruction set from the base instruction.
pub const PARAPHRASE_PROMPT: &str = "Generate 10 paraphrases for the following instruction:";

/// System preamble for chat-tuned models generating keyword reformulations.
pub const KEYWORD_CHAT_PREAMBLE: &str = "You are a helpful assistant who directly provides comma \
separated keywords or expansion terms. Provide as many expansion terms or keywords as possible \
related to the query. And do not explain yourself.";

/// System preamble for natural-language reformulations.
pub const NATURAL_LANGUAGE_PREAMBLE: &str = "You are a helpful assistant who directly provides a \
natural language reformulated query with novel keywords related to the user's original query. Do \
not explain yourself. Just return a natural language query.";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("instruction set must contain at least one instruction")]
    EmptyInstructionSet,
    #[error("duplicate instruction after whitespace normalization: {0:?}")]
    DuplicateInstruction(String),
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("feedback context requested with no documents")]
    EmptyContext,
    #[error("keyword list must not be empty")]
    EmptyKeywords,
    #[error("reformulations must not be empty")]
    EmptyReformulation,
    #[error("paraphrase count must be at least 1")]
    InvalidParaphraseCount,
    #[error("requested {needed} paraphrases but only {got} could be parsed")]
    TooFewParaphrases { needed: usize, got: usize },
    #[error("instruction file {path}: {reason}")]
    InstructionFile { path: String, reason: String },
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Bundled,
    Paraphrased,
    User,
}

/// An ordered set of reformulation instructions; the first entry is the base
/// instruction. Instructions are pairwise distinct after whitespace
/// normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionSet {
    pub name: String,
    pub instructions: Vec<String>,
    pub provenance: Provenance,
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl InstructionSet {
    pub fn new(
        name: impl Into<String>,
        instructions: Vec<String>,
        provenance: Provenance,
    ) -> Result<Self, PromptError> {
        if instructions.is_empty() {
            return Err(PromptError::EmptyInstructionSet);
        }
        let mut seen = std::collections::HashSet::new();
        for instruction in &instructions {
            if !seen.insert(normalize_ws(instruction)) {
                return Err(PromptError::DuplicateInstruction(instruction.clone()));
            }
        }
        Ok(InstructionSet {
            name: name.into(),
            instructions,
            provenance,
        })
    }

    /// Parses instruction-set text: one instruction per line, '#'-prefixed
    /// comments and blank lines ignored.
    pub fn parse(
        name: impl Into<String>,
        text: &str,
        provenance: Provenance,
    ) -> Result<Self, PromptError> {
        let instructions: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        Self::new(name, instructions, provenance)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "instructions".to_string());
        Self::parse(name, &text, Provenance::User).map_err(|e| PromptError::InstructionFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn to_file(&self, path: impl AsRef<Path>) -> Result<(), PromptError> {
        let mut out = String::new();
        for instruction in &self.instructions {
            out.push_str(instruction);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Looks up a bundled set by name: `fig3_general` or
    /// `domain_argument_retrieval`.
    pub fn bundled(name: &str) -> Option<InstructionSet> {
        let text = match name {
            "fig3_general" => FIG3_GENERAL,
            "domain_argument_retrieval" => DOMAIN_ARGUMENT_RETRIEVAL,
            _ => return None,
        };
        Some(Self::parse(name, text, Provenance::Bundled).expect("bundled fixtures are valid"))
    }

    pub fn base(&self) -> &str {
        &self.instructions[0]
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }
}

/// Per-instruction generation provenance for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReformulationRecord {
    pub qid: String,
    /// 1-based index into the instruction set.
    pub instruction_index: usize,
    pub raw_generation: String,
    pub keywords: Vec<String>,
    /// Post-filter keyword list, recorded verbatim from the filter
    /// generation when filtering is enabled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filtered: Option<Vec<String>>,
}

/// Bootstraps an instruction set by paraphrasing the base instruction once
/// offline: renders the paraphrase prompt, calls the generator, and parses
/// one paraphrase per output line (numbered or plain). Returns the base
/// instruction followed by the first `n - 1` parsed paraphrases.
pub fn paraphrase_instructions(
    base: &str,
    n: usize,
    generator: &dyn Generator,
) -> Result<InstructionSet, PromptError> {
    if n == 0 {
        return Err(PromptError::InvalidParaphraseCount);
    }
    let mut instructions = vec![base.to_string()];
    if n > 1 {
        let prompt = format!("{PARAPHRASE_PROMPT}\n{base}");
        let output = generator.complete(&prompt)?;
        let base_norm = normalize_ws(base);
        let mut seen = std::collections::HashSet::new();
        let mut paraphrases: Vec<String> = Vec::new();
        for line in output.lines() {
            let line = strip_line_numbering(line.trim());
            if line.is_empty() {
                continue;
            }
            let norm = normalize_ws(line);
            if norm == base_norm || !seen.insert(norm) {
                continue;
            }
            paraphrases.push(line.to_string());
        }
        if paraphrases.len() < n - 1 {
            return Err(PromptError::TooFewParaphrases {
                needed: n - 1,
                got: paraphrases.len(),
            });
        }
        instructions.extend(paraphrases.into_iter().take(n - 1));
    }
    InstructionSet::new("paraphrased", instructions, Provenance::Paraphrased)
}

fn strip_line_numbering(line: &str) -> &str {
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(stripped) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return stripped.trim_start();
        }
    }
    line.strip_prefix("- ").unwrap_or(line).trim()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PromptStyle {
    /// `<instruction>: <query>`
    #[default]
    KeywordPlain,
    /// Chat system preamble followed by `<instruction>: <query>`.
    KeywordChat,
    /// Natural-language preamble followed by the query.
    NaturalLanguage,
}

impl PromptStyle {
    pub fn parse(s: &str) -> Option<PromptStyle> {
        match s.trim().to_lowercase().as_str() {
            "keyword_plain" => Some(PromptStyle::KeywordPlain),
            "keyword_chat" => Some(PromptStyle::KeywordChat),
            "natural_language" => Some(PromptStyle::NaturalLanguage),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PromptStyle::KeywordPlain => "keyword_plain",
            PromptStyle::KeywordChat => "keyword_chat",
            PromptStyle::NaturalLanguage => "natural_language",
        }
    }
}

/// Where the feedback-context clause goes. Prepending is the default;
/// appending is exposed for ablation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContextPosition {
    #[default]
    Prepend,
    Append,
}

fn context_clause(context_docs: &[&Document]) -> Result<String, PromptError> {
    if context_docs.is_empty() {
        return Err(PromptError::EmptyContext);
    }
    let joined = context_docs
        .iter()
        .map(|d| d.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Ok(format!("Based on the given context information {joined},"))
}

/// Renders one query-reformulation prompt. With feedback documents present,
/// the instruction (or, for the natural-language style, the query) is
/// prefixed with the context clause built from the space-delimited
/// concatenation of document texts in rank order.
pub fn build_qr_prompt(
    instruction: &str,
    query: &str,
    style: PromptStyle,
    context_docs: Option<&[&Document]>,
    position: ContextPosition,
) -> Result<String, PromptError> {
    if query.is_empty() {
        return Err(PromptError::EmptyQuery);
    }
    let clause = context_docs.map(context_clause).transpose()?;
    let with_context = |text: &str| match (&clause, position) {
        (None, _) => text.to_string(),
        (Some(clause), ContextPosition::Prepend) => format!("{clause} {text}"),
        (Some(clause), ContextPosition::Append) => format!("{text} {clause}"),
    };
    Ok(match style {
        PromptStyle::KeywordPlain => format!("{}: {query}", with_context(instruction)),
        PromptStyle::KeywordChat => {
            format!(
                "{KEYWORD_CHAT_PREAMBLE}\n{}: {query}",
                with_context(instruction)
            )
        }
        PromptStyle::NaturalLanguage => {
            format!("{NATURAL_LANGUAGE_PREAMBLE}\n{}", with_context(query))
        }
    })
}

/// Renders the keyword-filter prompt from the bundled template.
pub fn build_filter_prompt(query: &str, keywords: &[String]) -> Result<String, PromptError> {
    if keywords.is_empty() {
        return Err(PromptError::EmptyKeywords);
    }
    Ok(FILTER_TEMPLATE
        .trim_end()
        .replace("{query}", query)
        .replace("{keywords}", &keywords.join(", ")))
}

/// Asks the generator for the relevant subset of `keywords` and parses the
/// reply as comma-separated terms.
pub fn apply_filter(
    query: &str,
    keywords: &[String],
    generator: &dyn Generator,
) -> Result<Vec<String>, PromptError> {
    let prompt = build_filter_prompt(query, keywords)?;
    let output = generator.complete(&prompt)?;
    Ok(parse_keywords(&output, KeywordMode::Comma))
}
