//! Batch experimentation toolkit for ensemble zero-shot query reformulation.
//!
//! The crate is organized around the stages of a reformulation experiment:
//!
//! - [`corpus_index`] — corpus ingestion, tokenization, BM25 inverted index
//!   and search over weighted bag-of-words queries.
//! - [`generation`] — text-generation providers: a remote chat-completion
//!   client, a deterministic offline mock, and a persistent disk cache.
//! - [`prompts`] — instruction sets, prompt rendering, keyword parsing,
//!   filtering and interpretability judging.
//! - [`rank_fusion`] — reciprocal-rank and score fusion of rankings.
//! - [`pipeline`] — the end-to-end reformulation methods (ensemble and
//!   fusion, with optional relevance feedback).
//! - [`ir_eval`] — graded retrieval metrics, significance testing, and
//!   TREC-format file I/O.
//! - [`experiment`] — experiment specs, orchestration, parameter sweeps and
//!   report emission.

pub mod corpus_index;
pub mod experiment;
pub mod generation;
pub mod ir_eval;
pub mod pipeline;
pub mod prompts;
pub mod rank_fusion;

pub use corpus_index::{
    Bm25Params, Corpus, Document, IdfVariant, InvertedIndex, Ranking, TokenizerConfig,
    WeightedQuery,
};
pub use generation::{Generator, GeneratorConfig, MockGenerator};
pub use ir_eval::{Measure, MeasureReport, Qrels};
pub use pipeline::{Method, PipelineConfig, PipelineResources};
pub use prompts::InstructionSet;
