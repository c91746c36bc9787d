//! Experiment specs, orchestration across variants, parameter sweeps, and
//! report emission.

mod report;

pub use report::{
    format_metric, render_comparison_table, render_per_query_csv, render_reference_table,
    render_report_csv,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::warn;
use serde::Deserialize;
use thiserror::Error;

use crate::corpus_index::{
    parse_stopwords, Bm25Params, Corpus, IdfVariant, IndexError, InvertedIndex, Ranking,
    StopwordFilter, TokenizerConfig,
};
use crate::generation::{
    CachedGenerator, GenError, GenerationCache, Generator, GeneratorConfig, MockGenerator,
    ProviderKind, RemoteEndpoint, RemoteGenerator,
};
use crate::ir_eval::{
    evaluate_run, holm_bonferroni, paired_t_test, write_run, EvalError, GainScheme, Measure,
    MeasureReport, Qrels,
};
use crate::pipeline::{
    run_method, FeedbackSource, Method, PipelineConfig, PipelineError, PipelineResources,
};
use crate::prompts::{
    ContextPosition, InstructionSet, KeywordMode, PromptError, PromptStyle, ReformulationRecord,
};
use crate::rank_fusion::FusionMethod;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    Validation(String),
    #[error("{failed} of {total} queries failed (more than 10%); aborting")]
    TooManyFailures { failed: usize, total: usize },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// True for configuration mistakes a user should fix (CLI exit code 2).
    pub fn is_validation(&self) -> bool {
        matches!(self, ExperimentError::Validation(_))
    }
}

// ---------------------------------------------------------------------------
// Spec file schema (TOML). Unknown keys are rejected for misspelling safety.
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    corpus: String,
    topics: String,
    qrels: String,
    instruction_set: Option<String>,
    baseline: String,
    seed: Option<u64>,
    metrics: Option<Vec<String>>,
    out_dir: Option<String>,
    sweep_variant: Option<String>,
    ndcg_gain: Option<String>,
    binary_threshold: Option<u32>,
    alpha: Option<f64>,
    generator: Option<RawGenerator>,
    tokenizer: Option<RawTokenizer>,
    bm25: Option<RawBm25>,
    #[serde(default)]
    variants: Vec<RawVariant>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    provider: Option<String>,
    model_name: Option<String>,
    top_p: Option<f64>,
    top_k: Option<u32>,
    repetition_penalty: Option<f64>,
    max_new_tokens: Option<u32>,
    temperature: Option<f64>,
    endpoint: Option<String>,
    api_key: Option<String>,
    forward_top_k: Option<bool>,
    in_flight: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTokenizer {
    lowercase: Option<bool>,
    stopwords: Option<bool>,
    stopword_file: Option<String>,
    stemming: Option<bool>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBm25 {
    k1: Option<f64>,
    b: Option<f64>,
    idf: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariant {
    name: String,
    method: Option<String>,
    n_instructions: Option<usize>,
    beta: Option<f64>,
    feedback: Option<String>,
    feedback_depth: Option<usize>,
    fusion_method: Option<String>,
    rrf_k: Option<f64>,
    impute_missing: Option<bool>,
    filter: Option<bool>,
    keyword_mode: Option<String>,
    style: Option<String>,
    context_position: Option<String>,
    dedup_keywords: Option<bool>,
    fallback_raw: Option<bool>,
    k: Option<usize>,
}

// ---------------------------------------------------------------------------
// Resolved spec
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct VariantSpec {
    pub name: String,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone)]
pub struct GeneratorSettings {
    pub config: GeneratorConfig,
    pub endpoint: Option<String>,
    /// Bearer token; falls back to the QRW_API_KEY environment variable.
    pub api_key: Option<String>,
    pub forward_top_k: bool,
    pub in_flight: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub corpus: PathBuf,
    pub topics: PathBuf,
    pub qrels: PathBuf,
    /// Bundled instruction-set name or a path relative to the spec file.
    pub instruction_set: String,
    pub base_dir: PathBuf,
    pub baseline: String,
    pub seed: u64,
    pub metrics: Vec<Measure>,
    pub out_dir: Option<PathBuf>,
    pub sweep_variant: Option<String>,
    pub ndcg_gain: GainScheme,
    pub binary_threshold: u32,
    pub alpha: f64,
    pub generator: GeneratorSettings,
    pub tokenizer: TokenizerConfig,
    pub bm25: Bm25Params,
    pub variants: Vec<VariantSpec>,
}

fn validation(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Validation(msg.into())
}

fn parse_enum<T>(
    field: &str,
    value: Option<&str>,
    default: T,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<T, ExperimentError> {
    match value {
        None => Ok(default),
        Some(s) => parse(s).ok_or_else(|| validation(format!("{field}: unknown value {s:?}"))),
    }
}

fn build_variant(raw: &RawVariant) -> Result<VariantSpec, ExperimentError> {
    let name = raw.name.clone();
    let field = |f: &str| format!("variant {name:?}: {f}");
    let config = PipelineConfig {
        method: parse_enum(
            &field("method"),
            raw.method.as_deref(),
            Method::Ensemble,
            Method::parse,
        )?,
        n_instructions: raw.n_instructions.unwrap_or(10),
        beta: raw.beta.unwrap_or(1.0),
        feedback: parse_enum(
            &field("feedback"),
            raw.feedback.as_deref(),
            FeedbackSource::None,
            FeedbackSource::parse,
        )?,
        feedback_depth: raw.feedback_depth.unwrap_or(5),
        fusion_method: parse_enum(
            &field("fusion_method"),
            raw.fusion_method.as_deref(),
            FusionMethod::Rrf,
            FusionMethod::parse,
        )?,
        rrf_k: raw.rrf_k.unwrap_or(crate::rank_fusion::DEFAULT_RRF_K),
        impute_missing: raw.impute_missing.unwrap_or(false),
        filter: raw.filter.unwrap_or(false),
        keyword_mode: parse_enum(
            &field("keyword_mode"),
            raw.keyword_mode.as_deref(),
            KeywordMode::Comma,
            KeywordMode::parse,
        )?,
        style: parse_enum(
            &field("style"),
            raw.style.as_deref(),
            PromptStyle::KeywordPlain,
            PromptStyle::parse,
        )?,
        context_position: parse_enum(
            &field("context_position"),
            raw.context_position.as_deref(),
            ContextPosition::Prepend,
            |s| match s {
                "prepend" => Some(ContextPosition::Prepend),
                "append" => Some(ContextPosition::Append),
                _ => None,
            },
        )?,
        dedup_keywords: raw.dedup_keywords.unwrap_or(false),
        fallback_raw: raw.fallback_raw.unwrap_or(false),
        k: raw.k.unwrap_or(1000),
    };
    config
        .validate()
        .map_err(|e| validation(format!("variant {name:?}: {e}")))?;
    Ok(VariantSpec { name, config })
}

/// Default measures reported by experiments.
pub fn default_measures() -> Vec<Measure> {
    vec![
        Measure::Ndcg { k: 10 },
        Measure::Precision { k: 10 },
        Measure::Map,
        Measure::Rr { rel_threshold: 2 },
        Measure::Recall { k: 10 },
    ]
}

/// Parses and validates an experiment spec file. Relative paths resolve
/// against the spec file's directory; missing paths are reported together.
pub fn load_spec(path: impl AsRef<Path>) -> Result<ExperimentSpec, ExperimentError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| validation(format!("cannot read {}: {e}", path.display())))?;
    let raw: RawSpec = toml::from_str(&text).map_err(|e| validation(e.to_string()))?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let resolve = {
        let base_dir = base_dir.clone();
        move |p: &str| base_dir.join(p)
    };

    let spec_corpus = resolve(&raw.corpus);
    let spec_topics = resolve(&raw.topics);
    let spec_qrels = resolve(&raw.qrels);
    let missing: Vec<String> = [
        ("corpus", &spec_corpus),
        ("topics", &spec_topics),
        ("qrels", &spec_qrels),
    ]
    .iter()
    .filter(|(_, p)| !p.exists())
    .map(|(name, p)| format!("{name}: {}", p.display()))
    .collect();
    if !missing.is_empty() {
        return Err(validation(format!(
            "missing input files: {}",
            missing.join("; ")
        )));
    }

    if raw.variants.is_empty() {
        return Err(validation("spec declares no variants"));
    }
    let variants: Vec<VariantSpec> = raw
        .variants
        .iter()
        .map(build_variant)
        .collect::<Result<_, _>>()?;
    let mut names = std::collections::HashSet::new();
    for v in &variants {
        if !names.insert(v.name.as_str()) {
            return Err(validation(format!("duplicate variant name {:?}", v.name)));
        }
    }
    if !variants.iter().any(|v| v.name == raw.baseline) {
        return Err(validation(format!(
            "baseline {:?} is not among the declared variants",
            raw.baseline
        )));
    }
    if let Some(sweep_variant) = &raw.sweep_variant {
        if !variants.iter().any(|v| &v.name == sweep_variant) {
            return Err(validation(format!(
                "sweep_variant {sweep_variant:?} is not among the declared variants"
            )));
        }
    }

    let metrics = match &raw.metrics {
        None => default_measures(),
        Some(labels) => labels
            .iter()
            .map(|l| Measure::parse(l).map_err(|e| validation(e.to_string())))
            .collect::<Result<_, _>>()?,
    };

    let ndcg_gain = parse_enum(
        "ndcg_gain",
        raw.ndcg_gain.as_deref(),
        GainScheme::Linear,
        |s| match s {
            "linear" => Some(GainScheme::Linear),
            "exponential" => Some(GainScheme::Exponential),
            _ => None,
        },
    )?;

    let raw_generator = raw.generator.unwrap_or_default();
    let provider = parse_enum(
        "generator.provider",
        raw_generator.provider.as_deref(),
        ProviderKind::Mock,
        |s| match s {
            "mock" => Some(ProviderKind::Mock),
            "remote" => Some(ProviderKind::Remote),
            _ => None,
        },
    )?;
    let defaults = GeneratorConfig::default();
    let generator_config = GeneratorConfig {
        provider,
        model_name: raw_generator
            .model_name
            .unwrap_or_else(|| defaults.model_name.clone()),
        top_p: raw_generator.top_p.unwrap_or(defaults.top_p),
        top_k: raw_generator.top_k.unwrap_or(defaults.top_k),
        repetition_penalty: raw_generator
            .repetition_penalty
            .unwrap_or(defaults.repetition_penalty),
        max_new_tokens: raw_generator
            .max_new_tokens
            .unwrap_or(defaults.max_new_tokens),
        seed: raw.seed.unwrap_or(0),
        temperature: raw_generator.temperature.unwrap_or(defaults.temperature),
    };
    generator_config
        .validate()
        .map_err(|e| validation(e.to_string()))?;
    if provider == ProviderKind::Remote && raw_generator.endpoint.is_none() {
        return Err(validation(
            "generator.provider = \"remote\" requires generator.endpoint",
        ));
    }

    let raw_tokenizer = raw.tokenizer.unwrap_or_default();
    let stopwords = match (
        raw_tokenizer.stopwords.unwrap_or(true),
        &raw_tokenizer.stopword_file,
    ) {
        (false, _) => StopwordFilter::None,
        (true, None) => StopwordFilter::Bundled,
        (true, Some(file)) => {
            let p = resolve(file);
            let text = std::fs::read_to_string(&p)
                .map_err(|e| validation(format!("stopword_file {}: {e}", p.display())))?;
            StopwordFilter::Custom(std::sync::Arc::new(parse_stopwords(&text)))
        }
    };
    let tokenizer = TokenizerConfig {
        lowercase: raw_tokenizer.lowercase.unwrap_or(true),
        stopwords,
        stemming: raw_tokenizer.stemming.unwrap_or(false),
    };

    let raw_bm25 = raw.bm25.unwrap_or_default();
    let bm25 = Bm25Params {
        k1: raw_bm25.k1.unwrap_or(1.2),
        b: raw_bm25.b.unwrap_or(0.75),
        idf: parse_enum(
            "bm25.idf",
            raw_bm25.idf.as_deref(),
            IdfVariant::Lucene,
            |s| match s {
                "lucene" => Some(IdfVariant::Lucene),
                "robertson" => Some(IdfVariant::Robertson),
                _ => None,
            },
        )?,
    };

    Ok(ExperimentSpec {
        corpus: spec_corpus,
        topics: spec_topics,
        qrels: spec_qrels,
        instruction_set: raw
            .instruction_set
            .unwrap_or_else(|| "fig3_general".to_string()),
        base_dir,
        baseline: raw.baseline,
        seed: raw.seed.unwrap_or(0),
        metrics,
        out_dir: raw.out_dir.map(|p| resolve(&p)),
        sweep_variant: raw.sweep_variant,
        ndcg_gain,
        binary_threshold: raw.binary_threshold.unwrap_or(1),
        alpha: raw.alpha.unwrap_or(0.05),
        generator: GeneratorSettings {
            config: generator_config,
            endpoint: raw_generator.endpoint,
            api_key: raw_generator.api_key,
            forward_top_k: raw_generator.forward_top_k.unwrap_or(false),
            in_flight: raw_generator.in_flight,
        },
        tokenizer,
        bm25,
        variants,
    })
}

/// Resolves the spec's instruction set: bundled name first, then a path
/// relative to the spec file.
pub fn load_instruction_set(spec: &ExperimentSpec) -> Result<InstructionSet, ExperimentError> {
    if let Some(set) = InstructionSet::bundled(&spec.instruction_set) {
        return Ok(set);
    }
    let path = spec.base_dir.join(&spec.instruction_set);
    if path.exists() {
        return Ok(InstructionSet::from_file(&path)?);
    }
    Err(validation(format!(
        "instruction_set {:?} is neither a bundled set nor an existing file",
        spec.instruction_set
    )))
}

/// Builds the configured generator, wrapping it with the persistent cache
/// when a cache directory is supplied.
pub fn build_generator(
    spec: &ExperimentSpec,
    cache_dir: Option<&Path>,
) -> Result<Box<dyn Generator>, ExperimentError> {
    let settings = &spec.generator;
    let inner: Box<dyn Generator> = match settings.config.provider {
        ProviderKind::Mock => Box::new(MockGenerator::new(settings.config.clone())?),
        ProviderKind::Remote => {
            let endpoint = settings
                .endpoint
                .clone()
                .ok_or_else(|| validation("remote generator requires an endpoint"))?;
            let mut endpoint = RemoteEndpoint::from_env(endpoint);
            if settings.api_key.is_some() {
                endpoint.api_key = settings.api_key.clone();
            }
            let mut remote = RemoteGenerator::new(settings.config.clone(), endpoint)?
                .with_top_k_forwarding(settings.forward_top_k);
            if let Some(bound) = settings.in_flight {
                remote = remote.with_in_flight_bound(bound);
            }
            Box::new(remote)
        }
    };
    Ok(match cache_dir {
        Some(dir) => Box::new(CachedGenerator::new(
            inner,
            GenerationCache::new(dir)?,
            &settings.config,
        )),
        None => inner,
    })
}

/// Loaded inputs shared by experiment executions.
pub struct ExperimentContext {
    pub corpus: Corpus,
    pub index: InvertedIndex,
    pub topics: Vec<(String, String)>,
    pub qrels: Qrels,
    pub instructions: InstructionSet,
    pub generator: Box<dyn Generator>,
}

pub fn prepare(
    spec: &ExperimentSpec,
    cache_dir: Option<&Path>,
) -> Result<ExperimentContext, ExperimentError> {
    let corpus = Corpus::read_jsonl(&spec.corpus, &spec.tokenizer)?;
    let index = InvertedIndex::build(corpus.docs(), &spec.tokenizer)?;
    let topics = crate::ir_eval::read_topics(&spec.topics)?;
    if topics.is_empty() {
        return Err(validation("topics file is empty"));
    }
    let qrels = crate::ir_eval::read_qrels(&spec.qrels)?;
    let instructions = load_instruction_set(spec)?;
    let generator = build_generator(spec, cache_dir)?;
    Ok(ExperimentContext {
        corpus,
        index,
        topics,
        qrels,
        instructions,
        generator,
    })
}

/// One query's ranked output plus its per-instruction provenance.
type QueryOutcome = (Ranking, Vec<ReformulationRecord>);

/// Everything one experiment run produced.
#[derive(Debug)]
pub struct ExperimentRun {
    pub variant_order: Vec<String>,
    pub reports: BTreeMap<String, MeasureReport>,
    pub p_values: BTreeMap<(String, String), f64>,
    pub significant: BTreeMap<(String, String), bool>,
    pub failed_qids: Vec<String>,
    pub table: String,
    pub out_dir: PathBuf,
}

fn execute_variant(
    ctx: &ExperimentContext,
    spec: &ExperimentSpec,
    variant: &VariantSpec,
    failures: &mut BTreeMap<String, Vec<String>>,
) -> BTreeMap<String, QueryOutcome> {
    let resources = PipelineResources {
        corpus: &ctx.corpus,
        index: &ctx.index,
        bm25: &spec.bm25,
        tokenizer: &spec.tokenizer,
        instructions: &ctx.instructions,
        generator: &ctx.generator,
        qrels: Some(&ctx.qrels),
    };
    let mut results = BTreeMap::new();
    for (qid, title) in &ctx.topics {
        match run_method(qid, title, &resources, &variant.config, &variant.name) {
            Ok(outcome) => {
                results.insert(qid.clone(), outcome);
            }
            Err(e) => {
                warn!("variant {:?} failed on query {qid:?}: {e}", variant.name);
                failures
                    .entry(qid.clone())
                    .or_default()
                    .push(format!("{}: {e}", variant.name));
            }
        }
    }
    results
}

/// Runs every variant over every topic, writes one TREC run file and one
/// provenance JSON-lines file per variant, evaluates all configured
/// measures, and tests each non-baseline variant against the baseline with
/// a paired t-test under Holm-Bonferroni correction (per measure).
///
/// A query that fails in any variant is skipped in all variants so that the
/// paired tests stay aligned; the run aborts when more than 10% of queries
/// fail.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    cache_dir: Option<&Path>,
) -> Result<ExperimentRun, ExperimentError> {
    let ctx = prepare(spec, cache_dir)?;
    run_experiment_with_context(spec, &ctx, out_dir)
}

pub fn run_experiment_with_context(
    spec: &ExperimentSpec,
    ctx: &ExperimentContext,
    out_dir: &Path,
) -> Result<ExperimentRun, ExperimentError> {
    std::fs::create_dir_all(out_dir.join("runs"))?;
    std::fs::create_dir_all(out_dir.join("provenance"))?;

    // Variants execute sequentially so cache behavior stays reproducible.
    let mut failures: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut per_variant: Vec<(String, BTreeMap<String, QueryOutcome>)> = Vec::new();
    for variant in &spec.variants {
        let results = execute_variant(ctx, spec, variant, &mut failures);
        per_variant.push((variant.name.clone(), results));
    }

    let total = ctx.topics.len();
    if failures.len() * 10 > total {
        return Err(ExperimentError::TooManyFailures {
            failed: failures.len(),
            total,
        });
    }
    let failed_qids: Vec<String> = failures.keys().cloned().collect();

    let labels: Vec<String> = spec.metrics.iter().map(Measure::label).collect();
    let mut reports: BTreeMap<String, MeasureReport> = BTreeMap::new();
    let variant_order: Vec<String> = spec.variants.iter().map(|v| v.name.clone()).collect();

    for (name, results) in &per_variant {
        let mut rankings: Vec<Ranking> = Vec::new();
        let mut provenance = String::new();
        for (qid, _) in &ctx.topics {
            if failures.contains_key(qid) {
                continue;
            }
            let (ranking, records) = &results[qid];
            rankings.push(ranking.clone());
            for record in records {
                provenance.push_str(&serde_json::to_string(record).expect("record serializes"));
                provenance.push('\n');
            }
        }
        write_run(out_dir.join("runs").join(format!("{name}.run")), &rankings)?;
        std::fs::write(
            out_dir.join("provenance").join(format!("{name}.jsonl")),
            provenance,
        )?;
        let report = evaluate_run(
            &rankings,
            &ctx.qrels,
            &spec.metrics,
            spec.ndcg_gain,
            spec.binary_threshold,
        );
        reports.insert(name.clone(), report);
    }

    // Significance against the baseline, Holm-corrected per measure across
    // the non-baseline variants.
    let mut p_values: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut significant: BTreeMap<(String, String), bool> = BTreeMap::new();
    let baseline_report = reports[&spec.baseline].clone();
    for label in &labels {
        let base_values = baseline_report.values(label);
        let mut family: Vec<(String, f64)> = Vec::new();
        for name in &variant_order {
            if name == &spec.baseline {
                continue;
            }
            let variant_values = reports[name].values(label);
            let base_qids: Vec<&String> = base_values.iter().map(|(q, _)| q).collect();
            let variant_qids: Vec<&String> = variant_values.iter().map(|(q, _)| q).collect();
            if base_qids != variant_qids {
                return Err(validation(format!(
                    "paired test misalignment for {label}: baseline and {name:?} \
                     evaluated different query sets"
                )));
            }
            let a: Vec<f64> = variant_values.iter().map(|(_, v)| *v).collect();
            let b: Vec<f64> = base_values.iter().map(|(_, v)| *v).collect();
            let p = paired_t_test(&a, &b)?;
            family.push((name.clone(), p));
        }
        let flags = holm_bonferroni(
            &family.iter().map(|(_, p)| *p).collect::<Vec<_>>(),
            spec.alpha,
        );
        for ((name, p), rejected) in family.into_iter().zip(flags) {
            p_values.insert((name.clone(), label.clone()), p);
            significant.insert((name, label.clone()), rejected);
        }
    }

    let table = render_comparison_table(
        &variant_order,
        &spec.baseline,
        &reports,
        &labels,
        &significant,
    );
    std::fs::write(out_dir.join("report.txt"), &table)?;
    std::fs::write(
        out_dir.join("report.csv"),
        render_report_csv(
            &variant_order,
            &spec.baseline,
            &reports,
            &labels,
            &p_values,
            &significant,
        ),
    )?;
    std::fs::write(
        out_dir.join("per_query.csv"),
        render_per_query_csv(&variant_order, &reports, &labels),
    )?;

    Ok(ExperimentRun {
        variant_order,
        reports,
        p_values,
        significant,
        failed_qids,
        table,
        out_dir: out_dir.to_path_buf(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Beta,
    NInstructions,
    FeedbackM,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<SweepAxis> {
        match s.trim().to_lowercase().as_str() {
            "beta" => Some(SweepAxis::Beta),
            "n_instructions" | "n" => Some(SweepAxis::NInstructions),
            "feedback_m" | "m" => Some(SweepAxis::FeedbackM),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Beta => "beta",
            SweepAxis::NInstructions => "n_instructions",
            SweepAxis::FeedbackM => "feedback_m",
        }
    }
}

/// Picks the config a sweep varies: the spec's `sweep_variant` when set,
/// otherwise the first non-raw variant, otherwise the first variant.
fn sweep_target(spec: &ExperimentSpec) -> &VariantSpec {
    if let Some(name) = &spec.sweep_variant {
        if let Some(v) = spec.variants.iter().find(|v| &v.name == name) {
            return v;
        }
    }
    spec.variants
        .iter()
        .find(|v| v.config.method != Method::Raw)
        .unwrap_or(&spec.variants[0])
}

fn apply_axis(
    base: &PipelineConfig,
    axis: SweepAxis,
    value: f64,
) -> Result<PipelineConfig, ExperimentError> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::Beta => cfg.beta = value,
        SweepAxis::NInstructions => cfg.n_instructions = value as usize,
        SweepAxis::FeedbackM => {
            let m = value as usize;
            if m == 0 {
                cfg.feedback = FeedbackSource::None;
                cfg.feedback_depth = 5;
            } else {
                if cfg.feedback == FeedbackSource::None {
                    cfg.feedback = FeedbackSource::Prf;
                }
                cfg.feedback_depth = m;
            }
        }
    }
    cfg.validate()
        .map_err(|e| validation(format!("sweep value {value}: {e}")))?;
    Ok(cfg)
}

#[derive(Debug)]
pub struct SweepRun {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub csv: String,
    pub csv_path: PathBuf,
}

/// Runs one pipeline execution per axis value, all else fixed, and emits a
/// CSV of `(value, metric...)` aggregates. The beta axis always includes the
/// endpoints 0 and 1. Queries failing at any value are skipped at every
/// value so rows stay comparable.
pub fn sweep(
    spec: &ExperimentSpec,
    axis: SweepAxis,
    values: &[f64],
    out_dir: &Path,
    cache_dir: Option<&Path>,
) -> Result<SweepRun, ExperimentError> {
    let ctx = prepare(spec, cache_dir)?;
    sweep_with_context(spec, &ctx, axis, values, out_dir)
}

pub fn sweep_with_context(
    spec: &ExperimentSpec,
    ctx: &ExperimentContext,
    axis: SweepAxis,
    values: &[f64],
    out_dir: &Path,
) -> Result<SweepRun, ExperimentError> {
    std::fs::create_dir_all(out_dir)?;
    let mut values: Vec<f64> = values.to_vec();
    if axis == SweepAxis::Beta {
        for endpoint in [0.0, 1.0] {
            if !values.contains(&endpoint) {
                values.push(endpoint);
            }
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite sweep values"));
    values.dedup();
    if values.is_empty() {
        return Err(validation("sweep needs at least one value"));
    }

    let target = sweep_target(spec).clone();
    let configs: Vec<(f64, PipelineConfig)> = values
        .iter()
        .map(|&v| apply_axis(&target.config, axis, v).map(|c| (v, c)))
        .collect::<Result<_, _>>()?;

    let mut failures: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut rows: Vec<(f64, BTreeMap<String, QueryOutcome>)> = Vec::new();
    for (value, config) in &configs {
        let variant = VariantSpec {
            name: format!("{}={}", axis.name(), value),
            config: config.clone(),
        };
        let results = execute_variant(ctx, spec, &variant, &mut failures);
        rows.push((*value, results));
    }
    let total = ctx.topics.len();
    if failures.len() * 10 > total {
        return Err(ExperimentError::TooManyFailures {
            failed: failures.len(),
            total,
        });
    }

    let labels: Vec<String> = spec.metrics.iter().map(Measure::label).collect();
    let mut csv = format!("{},{}\n", axis.name(), labels.join(","));
    for (value, results) in &rows {
        let rankings: Vec<Ranking> = ctx
            .topics
            .iter()
            .filter(|(qid, _)| !failures.contains_key(qid))
            .map(|(qid, _)| results[qid].0.clone())
            .collect();
        let report = evaluate_run(
            &rankings,
            &ctx.qrels,
            &spec.metrics,
            spec.ndcg_gain,
            spec.binary_threshold,
        );
        let cells: Vec<String> = labels
            .iter()
            .map(|l| format!("{:.6}", report.aggregates.get(l).copied().unwrap_or(0.0)))
            .collect();
        csv.push_str(&format!("{value},{}\n", cells.join(",")));
    }

    let csv_path = out_dir.join(format!("sweep_{}.csv", axis.name()));
    std::fs::write(&csv_path, &csv)?;
    Ok(SweepRun {
        axis,
        values,
        csv,
        csv_path,
    })
}
