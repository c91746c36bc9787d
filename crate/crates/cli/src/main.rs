//! qrw: batch query-reformulation experiments from the command line.
//!
//! Exit codes: 0 on success, 2 on validation/configuration errors, 1 on
//! runtime failures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qrw_core::corpus_index::{
    Bm25Params, Corpus, IdfVariant, InvertedIndex, Ranking, StopwordFilter, TokenizerConfig,
    WeightedQuery,
};
use qrw_core::experiment::{
    build_generator, load_spec, prepare, run_experiment_with_context, sweep_with_context,
    ExperimentError, ExperimentSpec, SweepAxis,
};
use qrw_core::generation::{GenerationCache, MockGenerator};
use qrw_core::ir_eval::{evaluate_run, read_qrels, read_run, read_topics, GainScheme, Measure};
use qrw_core::pipeline::PipelineResources;
use qrw_core::prompts::{paraphrase_instructions, InstructionSet};
use qrw_core::rank_fusion::{fuse, FusionMethod, RrfOptions};
use qrw_core::GeneratorConfig;

#[derive(Parser)]
#[command(name = "qrw", version, about = "Query reformulation workbench")]
struct Cli {
    /// Experiment spec file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the spec's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Generation cache directory.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Output directory (overrides the spec's out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TokenizerArgs {
    /// Disable lowercasing.
    #[arg(long)]
    no_lowercase: bool,
    /// Disable the bundled stopword list.
    #[arg(long)]
    no_stopwords: bool,
    /// Enable stemming.
    #[arg(long)]
    stemming: bool,
}

impl TokenizerArgs {
    fn config(&self) -> TokenizerConfig {
        TokenizerConfig {
            lowercase: !self.no_lowercase,
            stopwords: if self.no_stopwords {
                StopwordFilter::None
            } else {
                StopwordFilter::Bundled
            },
            stemming: self.stemming,
        }
    }
}

#[derive(Args)]
struct Bm25Args {
    #[arg(long, default_value_t = 1.2)]
    k1: f64,
    #[arg(long, default_value_t = 0.75)]
    b: f64,
    /// idf variant: lucene or robertson.
    #[arg(long, default_value = "lucene")]
    idf: String,
}

impl Bm25Args {
    fn params(&self) -> Result<Bm25Params, AppError> {
        let idf = match self.idf.as_str() {
            "lucene" => IdfVariant::Lucene,
            "robertson" => IdfVariant::Robertson,
            other => {
                return Err(AppError::validation(format!(
                    "unknown idf variant {other:?}"
                )))
            }
        };
        Ok(Bm25Params {
            k1: self.k1,
            b: self.b,
            idf,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build an index snapshot from a JSON-lines corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        /// Snapshot file to write.
        #[arg(long)]
        snapshot: PathBuf,
        #[command(flatten)]
        tokenizer: TokenizerArgs,
    },
    /// Paraphrase a base instruction into an instruction-set file.
    Paraphrase {
        /// Base instruction text.
        #[arg(long, conflicts_with = "base_file")]
        base: Option<String>,
        /// File holding the base instruction (first instruction line).
        #[arg(long)]
        base_file: Option<PathBuf>,
        /// Total instruction count (base + n-1 paraphrases).
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Instruction-set file to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate reformulations for every topic of one spec variant, writing
    /// provenance records and expanded queries.
    Reformulate {
        /// Variant name from the spec (default: first variant).
        #[arg(long)]
        variant: Option<String>,
        /// Provenance JSON-lines output.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Expanded-query TSV output (qid, term:weight pairs).
        #[arg(long)]
        queries: Option<PathBuf>,
    },
    /// Search an index snapshot with raw topic queries, producing a TREC run.
    Search {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, default_value_t = 1000)]
        k: usize,
        #[arg(long, default_value = "bm25")]
        tag: String,
        /// Run file to write (stdout when omitted).
        #[arg(long)]
        run: Option<PathBuf>,
        #[command(flatten)]
        tokenizer: TokenizerArgs,
        #[command(flatten)]
        bm25: Bm25Args,
    },
    /// Fuse TREC run files into one run.
    Fuse {
        /// rrf, score_sum, or score_max.
        #[arg(long, default_value = "rrf")]
        method: String,
        #[arg(long, default_value_t = 60.0)]
        k_rrf: f64,
        /// Impute rank |list|+1 for documents missing from a list (rrf).
        #[arg(long)]
        impute_missing: bool,
        #[arg(long, default_value = "fused")]
        tag: String,
        /// Fused run file to write (stdout when omitted).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Input run files.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Evaluate a run file against qrels.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// Comma-separated measures, e.g. ndcg@10,p@10,map,mrr(rel=2).
        #[arg(long)]
        metrics: Option<String>,
        /// ndcg gain: linear or exponential.
        #[arg(long, default_value = "linear")]
        gain: String,
        /// Binary relevance threshold for p@k, recall@k, map.
        #[arg(long, default_value_t = 1)]
        threshold: u32,
        /// Per-query CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the full experiment described by the spec.
    Run,
    /// Sweep one parameter axis of the spec's sweep variant.
    Sweep {
        /// beta, n_instructions, or feedback_m.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long)]
        values: String,
        /// Variant to sweep (overrides the spec's sweep_variant).
        #[arg(long)]
        variant: Option<String>,
    },
}

struct AppError {
    message: String,
    validation: bool,
}

impl AppError {
    fn validation(message: impl Into<String>) -> Self {
        AppError {
            message: message.into(),
            validation: true,
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        AppError {
            message: message.into(),
            validation: false,
        }
    }
}

impl From<ExperimentError> for AppError {
    fn from(e: ExperimentError) -> Self {
        AppError {
            validation: e.is_validation(),
            message: e.to_string(),
        }
    }
}

macro_rules! runtime_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for AppError {
            fn from(e: $ty) -> Self {
                AppError::runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    std::io::Error,
    qrw_core::corpus_index::IndexError,
    qrw_core::ir_eval::EvalError,
    qrw_core::generation::GenError,
    qrw_core::prompts::PromptError,
    qrw_core::pipeline::PipelineError,
    qrw_core::rank_fusion::FusionError
);

fn load_cli_spec(cli: &Cli) -> Result<ExperimentSpec, AppError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| AppError::validation("this command requires --config <spec.toml>"))?;
    let mut spec = load_spec(path)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
        spec.generator.config.seed = seed;
    }
    Ok(spec)
}

fn out_dir(cli: &Cli, spec: &ExperimentSpec) -> Result<PathBuf, AppError> {
    cli.out
        .clone()
        .or_else(|| spec.out_dir.clone())
        .ok_or_else(|| {
            AppError::validation("no output directory: pass --out or set out_dir in the spec")
        })
}

fn parse_metrics(spec: &Option<String>) -> Result<Vec<Measure>, AppError> {
    match spec {
        None => Ok(qrw_core::experiment::default_measures()),
        Some(s) => s
            .split(',')
            .map(|m| Measure::parse(m).map_err(|e| AppError::validation(e.to_string())))
            .collect(),
    }
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> Result<(), AppError> {
    match path {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, content)?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn cmd_index(corpus: &Path, snapshot: &Path, tokenizer: &TokenizerArgs) -> Result<(), AppError> {
    let cfg = tokenizer.config();
    let corpus = Corpus::read_jsonl(corpus, &cfg)?;
    let index = InvertedIndex::build(corpus.docs(), &cfg)?;
    index.save(snapshot)?;
    println!(
        "indexed {} documents ({} avg tokens) -> {}",
        index.doc_count(),
        format_args!("{:.1}", index.avg_doc_len()),
        snapshot.display()
    );
    Ok(())
}

fn cmd_paraphrase(
    cli: &Cli,
    base: Option<String>,
    base_file: Option<PathBuf>,
    n: usize,
    output: &Path,
) -> Result<(), AppError> {
    let base = match (base, base_file) {
        (Some(text), None) => text,
        (None, Some(path)) => InstructionSet::from_file(&path)?.base().to_string(),
        _ => {
            return Err(AppError::validation(
                "pass exactly one of --base or --base-file",
            ))
        }
    };
    let generator: Box<dyn qrw_core::Generator> = match &cli.config {
        Some(_) => build_generator(&load_cli_spec(cli)?, cli.cache_dir.as_deref())?,
        None => {
            let config = GeneratorConfig {
                seed: cli.seed.unwrap_or(0),
                ..Default::default()
            };
            match &cli.cache_dir {
                Some(dir) => Box::new(qrw_core::generation::CachedGenerator::new(
                    MockGenerator::new(config.clone())?,
                    GenerationCache::new(dir)?,
                    &config,
                )),
                None => Box::new(MockGenerator::new(config)?),
            }
        }
    };
    let set = paraphrase_instructions(&base, n, &generator)?;
    set.to_file(output)?;
    println!("wrote {} instructions to {}", set.len(), output.display());
    Ok(())
}

fn cmd_reformulate(
    cli: &Cli,
    variant: Option<String>,
    records_out: Option<PathBuf>,
    queries_out: Option<PathBuf>,
) -> Result<(), AppError> {
    let spec = load_cli_spec(cli)?;
    let variant = match variant {
        Some(name) => spec
            .variants
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| AppError::validation(format!("unknown variant {name:?}")))?,
        None => &spec.variants[0],
    };
    let ctx = prepare(&spec, cli.cache_dir.as_deref())?;
    let resources = PipelineResources {
        corpus: &ctx.corpus,
        index: &ctx.index,
        bm25: &spec.bm25,
        tokenizer: &spec.tokenizer,
        instructions: &ctx.instructions,
        generator: &ctx.generator,
        qrels: Some(&ctx.qrels),
    };
    let mut records_text = String::new();
    let mut queries_text = String::new();
    for (qid, title) in &ctx.topics {
        let (query, records) =
            qrw_core::pipeline::gen_qr_ensemble(qid, title, &resources, &variant.config)?;
        for record in &records {
            records_text.push_str(&serde_json::to_string(record).expect("record serializes"));
            records_text.push('\n');
        }
        let terms: Vec<String> = query
            .terms
            .iter()
            .map(|(t, w)| format!("{t}:{w}"))
            .collect();
        queries_text.push_str(&format!("{qid}\t{}\n", terms.join(" ")));
    }
    write_or_print(&records_out, &records_text)?;
    if queries_out.is_some() {
        write_or_print(&queries_out, &queries_text)?;
    }
    Ok(())
}

fn cmd_search(
    snapshot: &Path,
    topics: &Path,
    k: usize,
    tag: &str,
    run_out: &Option<PathBuf>,
    tokenizer: &TokenizerArgs,
    bm25: &Bm25Args,
) -> Result<(), AppError> {
    let index = InvertedIndex::load(snapshot)?;
    let params = bm25.params()?;
    let cfg = tokenizer.config();
    let topics = read_topics(topics)?;
    let rankings: Vec<Ranking> = topics
        .iter()
        .map(|(qid, title)| {
            let query = WeightedQuery::from_text(qid, title, &cfg);
            let mut ranking = index.search(&query, k, &params).with_tag(tag);
            ranking.truncate(k);
            ranking
        })
        .collect();
    let text: String = rankings.iter().map(Ranking::to_trec).collect();
    write_or_print(run_out, &text)?;
    Ok(())
}

fn cmd_fuse(
    method: &str,
    k_rrf: f64,
    impute_missing: bool,
    tag: &str,
    output: &Option<PathBuf>,
    run_paths: &[PathBuf],
) -> Result<(), AppError> {
    let method = FusionMethod::parse(method)
        .ok_or_else(|| AppError::validation(format!("unknown fusion method {method:?}")))?;
    let opts = RrfOptions {
        k: k_rrf,
        impute_missing,
    };
    // Group each input file's rankings by qid, preserving first-seen order.
    let mut qid_order: Vec<String> = Vec::new();
    let mut by_qid: BTreeMap<String, Vec<Ranking>> = BTreeMap::new();
    for path in run_paths {
        for ranking in read_run(path)? {
            if !by_qid.contains_key(&ranking.qid) {
                qid_order.push(ranking.qid.clone());
            }
            by_qid.entry(ranking.qid.clone()).or_default().push(ranking);
        }
    }
    let mut fused_all = Vec::new();
    for qid in &qid_order {
        let inputs = &by_qid[qid];
        let fused = fuse(inputs, method, &opts)?;
        fused_all.push(fused.with_tag(tag));
    }
    let text: String = fused_all.iter().map(Ranking::to_trec).collect();
    write_or_print(output, &text)?;
    Ok(())
}

fn cmd_eval(
    run: &Path,
    qrels: &Path,
    metrics: &Option<String>,
    gain: &str,
    threshold: u32,
    csv: &Option<PathBuf>,
) -> Result<(), AppError> {
    let gain = match gain {
        "linear" => GainScheme::Linear,
        "exponential" => GainScheme::Exponential,
        other => return Err(AppError::validation(format!("unknown gain {other:?}"))),
    };
    let measures = parse_metrics(metrics)?;
    let rankings = read_run(run)?;
    let qrels = read_qrels(qrels)?;
    let report = evaluate_run(&rankings, &qrels, &measures, gain, threshold);

    let mut width = "measure".len();
    for label in &report.labels {
        width = width.max(label.len());
    }
    println!(
        "{:width$}  {:>9}  {:>9}  {:>8}",
        "measure", "mean", "queries", "excluded"
    );
    for label in &report.labels {
        let evaluated = report
            .per_query
            .values()
            .filter(|m| m.contains_key(label))
            .count();
        println!(
            "{:width$}  {:>9.4}  {:>9}  {:>8}",
            label, report.aggregates[label], evaluated, report.excluded[label]
        );
    }
    if let Some(csv_path) = csv {
        let mut text = String::from("qid,measure,value\n");
        for (qid, values) in &report.per_query {
            for label in &report.labels {
                if let Some(v) = values.get(label) {
                    text.push_str(&format!("{qid},{label},{v:.6}\n"));
                }
            }
        }
        write_or_print(&Some(csv_path.clone()), &text)?;
    }
    Ok(())
}

fn cmd_run(cli: &Cli) -> Result<(), AppError> {
    let spec = load_cli_spec(cli)?;
    let out = out_dir(cli, &spec)?;
    let ctx = prepare(&spec, cli.cache_dir.as_deref())?;
    let run = run_experiment_with_context(&spec, &ctx, &out)?;
    print!("{}", run.table);
    if !run.failed_qids.is_empty() {
        eprintln!(
            "skipped {} failed queries: {}",
            run.failed_qids.len(),
            run.failed_qids.join(", ")
        );
    }
    println!("outputs under {}", run.out_dir.display());
    Ok(())
}

fn cmd_sweep(cli: &Cli, axis: &str, values: &str, variant: Option<String>) -> Result<(), AppError> {
    let axis = SweepAxis::parse(axis)
        .ok_or_else(|| AppError::validation(format!("unknown sweep axis {axis:?}")))?;
    let values: Vec<f64> = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| AppError::validation(format!("bad sweep value {v:?}")))
        })
        .collect::<Result<_, _>>()?;
    let mut spec = load_cli_spec(cli)?;
    if let Some(name) = variant {
        if !spec.variants.iter().any(|v| v.name == name) {
            return Err(AppError::validation(format!("unknown variant {name:?}")));
        }
        spec.sweep_variant = Some(name);
    }
    let out = out_dir(cli, &spec)?;
    let ctx = prepare(&spec, cli.cache_dir.as_deref())?;
    let run = sweep_with_context(&spec, &ctx, axis, &values, &out)?;
    print!("{}", run.csv);
    println!("wrote {}", run.csv_path.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), AppError> {
    match &cli.command {
        Command::Index {
            corpus,
            snapshot,
            tokenizer,
        } => cmd_index(corpus, snapshot, tokenizer),
        Command::Paraphrase {
            base,
            base_file,
            n,
            output,
        } => cmd_paraphrase(cli, base.clone(), base_file.clone(), *n, output),
        Command::Reformulate {
            variant,
            records,
            queries,
        } => cmd_reformulate(cli, variant.clone(), records.clone(), queries.clone()),
        Command::Search {
            snapshot,
            topics,
            k,
            tag,
            run,
            tokenizer,
            bm25,
        } => cmd_search(snapshot, topics, *k, tag, run, tokenizer, bm25),
        Command::Fuse {
            method,
            k_rrf,
            impute_missing,
            tag,
            output,
            runs,
        } => cmd_fuse(method, *k_rrf, *impute_missing, tag, output, runs),
        Command::Eval {
            run,
            qrels,
            metrics,
            gain,
            threshold,
            csv,
        } => cmd_eval(run, qrels, metrics, gain, *threshold, csv),
        Command::Run => cmd_run(cli),
        Command::Sweep {
            axis,
            values,
            variant,
        } => cmd_sweep(cli, axis, values, variant.clone()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            if e.validation {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
