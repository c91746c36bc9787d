//! End-to-end reformulation methods: ensemble concatenation and N-query
//! fusion, each with optional relevance feedback, from a query to a final
//! ranking plus per-instruction provenance records.

use thiserror::Error;

use crate::corpus_index::{
    tokenize, Bm25Params, Corpus, Document, IndexError, InvertedIndex, Ranking, TokenizerConfig,
    WeightedQuery,
};
use crate::generation::{GenError, Generator};
use crate::ir_eval::Qrels;
use crate::prompts::{
    apply_filter, build_qr_prompt, parse_keywords, ContextPosition, InstructionSet, KeywordMode,
    PromptError, PromptStyle, ReformulationRecord,
};
use crate::rank_fusion::{fuse, FusionError, FusionMethod, RrfOptions, DEFAULT_RRF_K};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("query {qid:?}: empty reformulation (all generations parsed to no keywords)")]
    EmptyReformulation { qid: String },
    #[error("query {qid:?}: oracle feedback requested but no relevant documents are judged")]
    NoRelevantDocs { qid: String },
    #[error("query {qid:?}: first-pass retrieval returned nothing, cannot take feedback")]
    EmptyFirstPass { qid: String },
    #[error("oracle feedback requires qrels")]
    OracleRequiresQrels,
    #[error("feedback document {0:?} is not in the corpus")]
    MissingFeedbackDoc(String),
    #[error("pipeline needs {needed} instructions but the set has {available}")]
    TooFewInstructions { needed: usize, available: usize },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Raw BM25 over the unmodified query; no generation.
    Raw,
    /// One bag-of-words query concatenating all instruction keywords.
    #[default]
    Ensemble,
    /// One search per instruction, results fused into one list.
    Fusion,
}

impl Method {
    pub fn parse(s: &str) -> Option<Method> {
        match s.trim().to_lowercase().as_str() {
            "raw" => Some(Method::Raw),
            "ensemble" => Some(Method::Ensemble),
            "fusion" => Some(Method::Fusion),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Ensemble => "ensemble",
            Method::Fusion => "fusion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeedbackSource {
    #[default]
    None,
    /// Top-m documents of a raw-query first pass.
    Prf,
    /// The m highest-graded judged documents.
    Oracle,
}

impl FeedbackSource {
    pub fn parse(s: &str) -> Option<FeedbackSource> {
        match s.trim().to_lowercase().as_str() {
            "none" => Some(FeedbackSource::None),
            "prf" => Some(FeedbackSource::Prf),
            "oracle" => Some(FeedbackSource::Oracle),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeedbackSource::None => "none",
            FeedbackSource::Prf => "prf",
            FeedbackSource::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub method: Method,
    pub n_instructions: usize,
    /// Weight of generated keyword tokens; original query tokens are fixed
    /// at weight 1. At 1 this is plain concatenation, at 0 the raw query.
    pub beta: f64,
    pub feedback: FeedbackSource,
    pub feedback_depth: usize,
    pub fusion_method: FusionMethod,
    pub rrf_k: f64,
    pub impute_missing: bool,
    pub filter: bool,
    pub keyword_mode: KeywordMode,
    pub style: PromptStyle,
    pub context_position: ContextPosition,
    /// Collapse keyword tokens repeated across instructions to one entry.
    pub dedup_keywords: bool,
    /// On an empty reformulation, fall back to the raw query instead of
    /// failing.
    pub fallback_raw: bool,
    /// Retrieval cutoff.
    pub k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            method: Method::Ensemble,
            n_instructions: 10,
            beta: 1.0,
            feedback: FeedbackSource::None,
            feedback_depth: 5,
            fusion_method: FusionMethod::Rrf,
            rrf_k: DEFAULT_RRF_K,
            impute_missing: false,
            filter: false,
            keyword_mode: KeywordMode::Comma,
            style: PromptStyle::KeywordPlain,
            context_position: ContextPosition::Prepend,
            dedup_keywords: false,
            fallback_raw: false,
            k: 1000,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.beta.is_finite() && (0.0..=1.0).contains(&self.beta)) {
            return Err(PipelineError::Config(format!(
                "beta must be in [0, 1], got {}",
                self.beta
            )));
        }
        if self.feedback != FeedbackSource::None && self.feedback_depth == 0 {
            return Err(PipelineError::Config(
                "feedback requires feedback_depth >= 1".to_string(),
            ));
        }
        if self.method != Method::Raw && self.n_instructions == 0 {
            return Err(PipelineError::Config(
                "n_instructions must be >= 1".to_string(),
            ));
        }
        if self.k == 0 {
            return Err(PipelineError::Config("k must be >= 1".to_string()));
        }
        if !self.rrf_k.is_finite() || self.rrf_k <= 0.0 {
            return Err(PipelineError::Config(format!(
                "rrf_k must be positive, got {}",
                self.rrf_k
            )));
        }
        Ok(())
    }

    fn rrf_options(&self) -> RrfOptions {
        RrfOptions {
            k: self.rrf_k,
            impute_missing: self.impute_missing,
        }
    }
}

/// Shared read-only resources for pipeline execution.
pub struct PipelineResources<'a> {
    pub corpus: &'a Corpus,
    pub index: &'a InvertedIndex,
    pub bm25: &'a Bm25Params,
    pub tokenizer: &'a TokenizerConfig,
    pub instructions: &'a InstructionSet,
    pub generator: &'a dyn Generator,
    pub qrels: Option<&'a Qrels>,
}

/// Picks feedback documents for one query: PRF takes the top-m documents of
/// a raw-query first pass; oracle takes the m judged documents with the
/// highest grade (>= 1), ties broken by ascending doc_id.
pub fn select_feedback<'a>(
    qid: &str,
    query: &str,
    resources: &PipelineResources<'a>,
    cfg: &PipelineConfig,
) -> Result<Vec<&'a Document>, PipelineError> {
    let lookup = |doc_id: &str| {
        resources
            .corpus
            .get(doc_id)
            .ok_or_else(|| PipelineError::MissingFeedbackDoc(doc_id.to_string()))
    };
    match cfg.feedback {
        FeedbackSource::None => Err(PipelineError::Config(
            "select_feedback called with feedback = none".to_string(),
        )),
        FeedbackSource::Prf => {
            let raw = WeightedQuery::from_text(qid, query, resources.tokenizer);
            let first_pass = resources
                .index
                .search(&raw, cfg.feedback_depth, resources.bm25);
            if first_pass.entries.is_empty() {
                return Err(PipelineError::EmptyFirstPass {
                    qid: qid.to_string(),
                });
            }
            first_pass
                .entries
                .iter()
                .map(|e| lookup(&e.doc_id))
                .collect()
        }
        FeedbackSource::Oracle => {
            let qrels = resources.qrels.ok_or(PipelineError::OracleRequiresQrels)?;
            let mut judged: Vec<(&str, u32)> = qrels.judged(qid).filter(|(_, g)| *g >= 1).collect();
            if judged.is_empty() {
                return Err(PipelineError::NoRelevantDocs {
                    qid: qid.to_string(),
                });
            }
            judged.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            judged
                .into_iter()
                .take(cfg.feedback_depth)
                .map(|(doc_id, _)| lookup(doc_id))
                .collect()
        }
    }
}

/// Runs the generation stage once per instruction: render prompt (with the
/// feedback context when configured), generate, parse, optionally filter.
/// Returns the effective keyword list per instruction plus full provenance.
fn generate_keyword_lists(
    qid: &str,
    query: &str,
    resources: &PipelineResources<'_>,
    cfg: &PipelineConfig,
) -> Result<(Vec<Vec<String>>, Vec<ReformulationRecord>), PipelineError> {
    if cfg.n_instructions > resources.instructions.len() {
        return Err(PipelineError::TooFewInstructions {
            needed: cfg.n_instructions,
            available: resources.instructions.len(),
        });
    }
    let context_docs = match cfg.feedback {
        FeedbackSource::None => None,
        _ => Some(select_feedback(qid, query, resources, cfg)?),
    };

    let mut lists = Vec::with_capacity(cfg.n_instructions);
    let mut records = Vec::with_capacity(cfg.n_instructions);
    for i in 0..cfg.n_instructions {
        let instruction = &resources.instructions.instructions[i];
        let prompt = build_qr_prompt(
            instruction,
            query,
            cfg.style,
            context_docs.as_deref(),
            cfg.context_position,
        )?;
        let raw = resources.generator.complete(&prompt)?;
        let keywords = parse_keywords(&raw, cfg.keyword_mode);
        let filtered = if cfg.filter && !keywords.is_empty() {
            Some(apply_filter(query, &keywords, resources.generator)?)
        } else {
            None
        };
        let effective = filtered.clone().unwrap_or_else(|| keywords.clone());
        records.push(ReformulationRecord {
            qid: qid.to_string(),
            instruction_index: i + 1,
            raw_generation: raw,
            keywords,
            filtered,
        });
        lists.push(effective);
    }

    if lists.iter().all(Vec::is_empty) && !cfg.fallback_raw {
        return Err(PipelineError::EmptyReformulation {
            qid: qid.to_string(),
        });
    }
    Ok((lists, records))
}

fn query_tokens(qid: &str, query: &str, resources: &PipelineResources<'_>) -> Vec<(String, f64)> {
    let _ = qid;
    tokenize(query, resources.tokenizer)
        .into_iter()
        .map(|t| (t, 1.0))
        .collect()
}

fn extend_with_keywords(
    terms: &mut Vec<(String, f64)>,
    keywords: &[String],
    beta: f64,
    dedup: bool,
    seen: &mut std::collections::HashSet<String>,
    tokenizer: &TokenizerConfig,
) {
    for keyword in keywords {
        for token in tokenize(keyword, tokenizer) {
            if dedup && !seen.insert(token.clone()) {
                continue;
            }
            terms.push((token, beta));
        }
    }
}

/// The ensemble method: concatenates every instruction's keywords after the
/// original query tokens. Original tokens carry weight 1, keyword tokens
/// weight beta; keyword tokens repeated across instructions keep one entry
/// per occurrence unless deduplication is enabled.
pub fn gen_qr_ensemble(
    qid: &str,
    query: &str,
    resources: &PipelineResources<'_>,
    cfg: &PipelineConfig,
) -> Result<(WeightedQuery, Vec<ReformulationRecord>), PipelineError> {
    let (lists, records) = generate_keyword_lists(qid, query, resources, cfg)?;
    let mut terms = query_tokens(qid, query, resources);
    let mut seen = std::collections::HashSet::new();
    for list in &lists {
        extend_with_keywords(
            &mut terms,
            list,
            cfg.beta,
            cfg.dedup_keywords,
            &mut seen,
            resources.tokenizer,
        );
    }
    Ok((WeightedQuery::new(qid, terms)?, records))
}

/// The fusion method: builds one reformulated query per instruction, searches each,
/// and fuses the per-instruction rankings. Instructions whose search returns
/// nothing contribute no list.
pub fn gen_qr_fusion(
    qid: &str,
    query: &str,
    resources: &PipelineResources<'_>,
    cfg: &PipelineConfig,
) -> Result<(Ranking, Vec<ReformulationRecord>), PipelineError> {
    let (lists, records) = generate_keyword_lists(qid, query, resources, cfg)?;
    let mut rankings = Vec::new();
    for list in &lists {
        let mut terms = query_tokens(qid, query, resources);
        let mut seen = std::collections::HashSet::new();
        extend_with_keywords(
            &mut terms,
            list,
            cfg.beta,
            cfg.dedup_keywords,
            &mut seen,
            resources.tokenizer,
        );
        let wq = WeightedQuery::new(qid, terms)?;
        let ranking = resources.index.search(&wq, cfg.k, resources.bm25);
        if !ranking.entries.is_empty() {
            rankings.push(ranking);
        }
    }
    if rankings.is_empty() {
        return Ok((Ranking::empty(qid, cfg.fusion_method.name()), records));
    }
    let mut fused = fuse(&rankings, cfg.fusion_method, &cfg.rrf_options())?;
    fused.truncate(cfg.k);
    Ok((fused, records))
}

/// Dispatches one query through the configured method and returns the final
/// ranking (cutoff k, tagged `run_tag`) plus provenance records.
pub fn run_method(
    qid: &str,
    query: &str,
    resources: &PipelineResources<'_>,
    cfg: &PipelineConfig,
    run_tag: &str,
) -> Result<(Ranking, Vec<ReformulationRecord>), PipelineError> {
    cfg.validate()?;
    match cfg.method {
        Method::Raw => {
            let wq = WeightedQuery::from_text(qid, query, resources.tokenizer);
            let ranking = resources.index.search(&wq, cfg.k, resources.bm25);
            Ok((ranking.with_tag(run_tag), Vec::new()))
        }
        Method::Ensemble => {
            let (wq, records) = gen_qr_ensemble(qid, query, resources, cfg)?;
            let ranking = resources.index.search(&wq, cfg.k, resources.bm25);
            Ok((ranking.with_tag(run_tag), records))
        }
        Method::Fusion => {
            let (ranking, records) = gen_qr_fusion(qid, query, resources, cfg)?;
            Ok((ranking.with_tag(run_tag), records))
        }
    }
}
