//! Regenerates the bundled synthetic benchmark under `fixtures/bench/`:
//! a 120-document corpus, 20 topics, and graded qrels.
//!
//! Half of the topics are "planted": their relevant documents express the
//! topic through the expansion terms the mock generator derives for the
//! query words (seed 42, matching the bundled experiment spec) instead of
//! the query words themselves, while a shared block of distractor documents
//! carries the literal query words. Raw BM25 therefore misses the relevant
//! documents on those topics and keyword expansion finds them, giving the
//! end-to-end smoke test a predictable direction of effect. The other half
//! are "direct": their relevant documents contain the query words, so raw
//! retrieval already handles them.
//!
//! The generator asserts the vocabulary separations the construction relies
//! on and verifies the direction of effect before writing anything.
//!
//! Run: `cargo run -p qrw-core --example make_bench`

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use qrw_core::corpus_index::{tokenize, Bm25Params, Corpus, Document, InvertedIndex};
use qrw_core::experiment::format_metric;
use qrw_core::generation::{bundled_vocab, mock_complete, MockGenerator};
use qrw_core::ir_eval::{evaluate_run, GainScheme, Measure, Qrels};
use qrw_core::pipeline::{run_method, Method, PipelineConfig, PipelineResources};
use qrw_core::prompts::{InstructionSet, Provenance};
use qrw_core::{GeneratorConfig, TokenizerConfig};

const SEED: u64 = 42;

fn planted_count() -> usize {
    TOPICS.iter().filter(|t| t.planted).count()
}

struct Topic {
    qid: &'static str,
    title: &'static str,
    planted: bool,
    filler: [&'static str; 5],
}

const TOPICS: [Topic; 20] = [
    Topic {
        qid: "q01",
        title: "glacier melting",
        planted: true,
        filler: ["fjord", "icefall", "moraine", "crevasse", "firn"],
    },
    Topic {
        qid: "q02",
        title: "lavender pollination",
        planted: true,
        filler: ["greenhouse", "petal", "stamen", "epiphyte", "sepal"],
    },
    Topic {
        qid: "q03",
        title: "submarine sonar",
        planted: true,
        filler: ["periscope", "ballast", "hull", "hydrophone", "torpedo"],
    },
    Topic {
        qid: "q04",
        title: "violin acoustics",
        planted: true,
        filler: ["luthier", "rosin", "fingerboard", "vibrato", "soundpost"],
    },
    Topic {
        qid: "q05",
        title: "beekeeping hives",
        planted: true,
        filler: ["apiary", "honeycomb", "swarm", "propolis", "drone"],
    },
    Topic {
        qid: "q06",
        title: "cider brewing",
        planted: true,
        filler: ["scoby", "teapot", "culture", "bottling", "vinegar"],
    },
    Topic {
        qid: "q07",
        title: "meteor craters",
        planted: true,
        filler: ["impactite", "ejecta", "basin", "shockwave", "tektite"],
    },
    Topic {
        qid: "q08",
        title: "origami tessellation",
        planted: true,
        filler: ["crease", "foldline", "pleat", "papercraft", "vertex"],
    },
    Topic {
        qid: "q09",
        title: "tidepool starfish",
        planted: true,
        filler: ["barnacle", "kelp", "intertidal", "limpet", "surfgrass"],
    },
    Topic {
        qid: "q10",
        title: "kestrel handling",
        planted: true,
        filler: ["jesses", "gauntlet", "raptor", "mews", "tiercel"],
    },
    Topic {
        qid: "q11",
        title: "volcano eruption",
        planted: false,
        filler: ["caldera", "magma", "pumice", "fumarole", "lava"],
    },
    Topic {
        qid: "q12",
        title: "chess openings",
        planted: false,
        filler: ["gambit", "castling", "endgame", "zugzwang", "tempo"],
    },
    Topic {
        qid: "q13",
        title: "marathon pacing",
        planted: false,
        filler: ["splits", "stride", "taper", "hydration", "cadence"],
    },
    Topic {
        qid: "q14",
        title: "pottery glazing",
        planted: false,
        filler: ["kiln", "slip", "bisque", "stoneware", "underglaze"],
    },
    Topic {
        qid: "q15",
        title: "lighthouse lenses",
        planted: false,
        filler: ["fresnel", "beacon", "keeper", "lantern", "prism"],
    },
    Topic {
        qid: "q16",
        title: "banjo tuning",
        planted: false,
        filler: ["fretboard", "resonator", "clawhammer", "capo", "bridge"],
    },
    Topic {
        qid: "q17",
        title: "cactus irrigation",
        planted: false,
        filler: ["succulent", "dripline", "arid", "spines", "rootstock"],
    },
    Topic {
        qid: "q18",
        title: "sailboat rigging",
        planted: false,
        filler: ["halyard", "mainsail", "winch", "shroud", "boom"],
    },
    Topic {
        qid: "q19",
        title: "truffle foraging",
        planted: false,
        filler: ["mycelium", "oakwood", "spore", "terroir", "humus"],
    },
    Topic {
        qid: "q20",
        title: "kite aerodynamics",
        planted: false,
        filler: ["airfoil", "spar", "tether", "windward", "drag"],
    },
];

const DISTRACTOR_FILLER: [&str; 3] = ["archive", "harbor", "meadow"];
const NOISE_POOL: [&str; 12] = [
    "pebble",
    "drizzle",
    "hammock",
    "thimble",
    "walnut",
    "corduroy",
    "saffron",
    "gondola",
    "parchment",
    "mosaic",
    "ember",
    "quill",
];

/// The vocabulary term the mock derives for one word at the bench seed.
fn derived_term(word: &str) -> String {
    // `mock_complete` on a bare word echoes the word, then appends its
    // derived vocabulary term.
    let out = mock_complete(word, SEED, 64);
    out.split(", ").last().expect("derived term").to_string()
}

fn content_words(title: &str) -> Vec<String> {
    tokenize(title, &TokenizerConfig::default())
}

fn main() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out_dir = manifest.join("fixtures/bench");
    std::fs::create_dir_all(&out_dir).expect("create fixtures/bench");

    let vocab: BTreeSet<&str> = bundled_vocab().iter().map(String::as_str).collect();
    let instructions = InstructionSet::bundled("fig3_general").expect("bundled set");

    // Expansion terms the instructions themselves contribute, independent of
    // the query.
    let mut instruction_terms: BTreeSet<String> = BTreeSet::new();
    for instruction in &instructions.instructions {
        for word in content_words(instruction) {
            instruction_terms.insert(derived_term(&word));
        }
    }

    // Per-topic derived terms for the query words.
    let mut planted_terms: BTreeSet<String> = BTreeSet::new();
    let mut direct_terms: BTreeSet<String> = BTreeSet::new();
    let mut topic_words: BTreeSet<String> = BTreeSet::new();
    for topic in &TOPICS {
        for word in content_words(topic.title) {
            let derived = derived_term(&word);
            if topic.planted {
                planted_terms.insert(derived);
            } else {
                direct_terms.insert(derived);
            }
            topic_words.insert(word);
        }
    }

    // Separations the construction relies on.
    for word in &topic_words {
        assert!(
            !vocab.contains(word.as_str()),
            "topic word {word:?} is in the mock vocabulary"
        );
    }
    let mut fillers: BTreeSet<&str> = BTreeSet::new();
    fillers.extend(TOPICS.iter().flat_map(|t| t.filler));
    fillers.extend(DISTRACTOR_FILLER);
    fillers.extend(NOISE_POOL);
    for filler in &fillers {
        assert!(
            !vocab.contains(filler),
            "filler {filler:?} is in the mock vocabulary"
        );
        assert!(
            !topic_words.contains(*filler),
            "filler {filler:?} is a topic word"
        );
    }
    for term in &planted_terms {
        assert!(
            !instruction_terms.contains(term),
            "planted term {term:?} collides with an instruction-derived term"
        );
        assert!(
            !direct_terms.contains(term),
            "planted term {term:?} collides with a direct topic's derived term"
        );
    }
    // Planted terms must be distinct across topics so the planted documents
    // of one topic never match another topic's reformulation.
    assert_eq!(
        planted_terms.len(),
        2 * planted_count(),
        "planted derived terms must be pairwise distinct"
    );

    // ---- corpus ----------------------------------------------------------
    let mut docs: Vec<(String, String)> = Vec::new();
    let mut qrels_lines: Vec<String> = Vec::new();

    let planted: Vec<&Topic> = TOPICS.iter().filter(|t| t.planted).collect();
    for topic in &TOPICS {
        let words = content_words(topic.title);
        let (w1, w2) = (&words[0], &words[1]);
        let f = topic.filler;
        if topic.planted {
            let v1 = derived_term(w1);
            let v2 = derived_term(w2);
            let rel1 = format!(
                "Notes on {v1} and {v2} around the {w1} with more {v1} and {v2} near the {} {}",
                f[0], f[1]
            );
            let rel2 = format!(
                "A report on {v1} and {v2} from the {} {} {}",
                f[1], f[2], f[3]
            );
            let id1 = format!("{}-rel1", topic.qid);
            let id2 = format!("{}-rel2", topic.qid);
            qrels_lines.push(format!("{} 0 {id1} 2", topic.qid));
            qrels_lines.push(format!("{} 0 {id2} 1", topic.qid));
            docs.push((id1, rel1));
            docs.push((id2, rel2));
        } else {
            let rel1 = format!(
                "All about {w1} {w2} where {w1} meets {w2} beside the {} {}",
                f[0], f[1]
            );
            let rel2 = format!(
                "A study of {w1} and {w2} with the {} {} {}",
                f[1], f[2], f[3]
            );
            let rel3 = format!("On {w2} and {w1} near the {} {}", f[2], f[4]);
            // A few judged-nonrelevant documents carry a term that only one
            // instruction derives, so single-instruction runs genuinely
            // differ and fusion has noise to average out.
            let lure = match topic.qid {
                "q12" => " risks sources trends inspection",
                "q15" => " manual results manual results",
                "q18" => " strategies options value strategies options value",
                _ => "",
            };
            let x1 = format!(
                "Only {w1} appears here with {} {} and more{lure}",
                f[0], f[1]
            );
            let x2 = format!("Only {w2} appears here with {} {}", f[2], f[3]);
            let x3 = format!("Again {w1} alone beside {} {}", f[4], f[0]);
            for (suffix, text, grade) in [
                ("rel1", rel1, 3),
                ("rel2", rel2, 2),
                ("rel3", rel3, 1),
                ("x1", x1, 0),
                ("x2", x2, 0),
                ("x3", x3, 0),
            ] {
                let id = format!("{}-{suffix}", topic.qid);
                qrels_lines.push(format!("{} 0 {id} {grade}", topic.qid));
                docs.push((id, text));
            }
        }
    }

    // Shared distractor block: every planted topic's words, with one topic
    // emphasized per document. Judged non-relevant for every planted topic.
    for j in 0..15 {
        let focus = planted[j % planted.len()];
        let focus_words = content_words(focus.title);
        let mut text = String::from("A digest mentioning");
        for topic in &planted {
            let words = content_words(topic.title);
            write!(text, " {} {}", words[0], words[1]).unwrap();
        }
        write!(
            text,
            " and again {} {} {} {} from the {} {}",
            focus_words[0],
            focus_words[1],
            focus_words[0],
            focus_words[1],
            DISTRACTOR_FILLER[j % 3],
            DISTRACTOR_FILLER[(j + 1) % 3],
        )
        .unwrap();
        let id = format!("dist{j:02}");
        for topic in &planted {
            qrels_lines.push(format!("{} 0 {id} 0", topic.qid));
        }
        docs.push((id, text));
    }

    // Unjudged noise documents.
    for j in 0..25 {
        let a = NOISE_POOL[j % NOISE_POOL.len()];
        let b = NOISE_POOL[(j + 3) % NOISE_POOL.len()];
        let c = NOISE_POOL[(j + 7) % NOISE_POOL.len()];
        docs.push((
            format!("noise{j:02}"),
            format!("Miscellaneous notes about {a} {b} and {c} number {j}"),
        ));
    }

    assert_eq!(docs.len(), 120, "corpus must hold exactly 120 documents");

    // ---- verification ----------------------------------------------------
    let tokenizer = TokenizerConfig::default();
    let mut corpus = Corpus::new();
    for (id, text) in &docs {
        corpus
            .push(Document::new(id.clone(), text.clone(), &tokenizer).unwrap())
            .unwrap();
    }
    let index = InvertedIndex::build(corpus.docs(), &tokenizer).unwrap();
    let bm25 = Bm25Params::default();
    let mut qrels = Qrels::new();
    for line in &qrels_lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        qrels.insert(fields[0], fields[2], fields[3].parse().unwrap());
    }
    let generator = MockGenerator::new(GeneratorConfig {
        seed: SEED,
        ..Default::default()
    })
    .unwrap();
    let resources = PipelineResources {
        corpus: &corpus,
        index: &index,
        bm25: &bm25,
        tokenizer: &tokenizer,
        instructions: &instructions,
        generator: &generator,
        qrels: Some(&qrels),
    };

    let run_all = |cfg: &PipelineConfig, tag: &str| -> Vec<qrw_core::Ranking> {
        TOPICS
            .iter()
            .map(|t| run_method(t.qid, t.title, &resources, cfg, tag).unwrap().0)
            .collect()
    };
    let mean = |rankings: &[qrw_core::Ranking], measure: Measure| -> f64 {
        let report = evaluate_run(rankings, &qrels, &[measure], GainScheme::Linear, 1);
        report.aggregates.values().next().copied().unwrap()
    };

    let raw_cfg = PipelineConfig {
        method: Method::Raw,
        k: 100,
        ..Default::default()
    };
    let ensemble_cfg = PipelineConfig {
        n_instructions: 10,
        beta: 1.0,
        k: 100,
        ..Default::default()
    };
    let fusion_cfg = PipelineConfig {
        method: Method::Fusion,
        n_instructions: 10,
        k: 100,
        ..Default::default()
    };

    let recall = Measure::Recall { k: 10 };
    let ndcg = Measure::Ndcg { k: 10 };
    let raw_recall = mean(&run_all(&raw_cfg, "bm25"), recall);
    let ensemble_recall = mean(&run_all(&ensemble_cfg, "ensemble"), recall);
    let fusion_ndcg = mean(&run_all(&fusion_cfg, "fusion"), ndcg);
    let worst_single_ndcg = (0..10)
        .map(|i| {
            let single = InstructionSet::new(
                format!("single-{i}"),
                vec![instructions.instructions[i].clone()],
                Provenance::User,
            )
            .unwrap();
            let mut single_resources = PipelineResources {
                instructions: &single,
                ..resources
            };
            single_resources.instructions = &single;
            let cfg = PipelineConfig {
                n_instructions: 1,
                k: 100,
                ..Default::default()
            };
            let rankings: Vec<_> = TOPICS
                .iter()
                .map(|t| {
                    run_method(t.qid, t.title, &single_resources, &cfg, "single")
                        .unwrap()
                        .0
                })
                .collect();
            mean(&rankings, ndcg)
        })
        .fold(f64::INFINITY, f64::min);

    println!(
        "mean recall@10  raw bm25        {} ({raw_recall:.10})",
        format_metric(raw_recall)
    );
    println!(
        "mean recall@10  ensemble(10,1)  {} ({ensemble_recall:.10})",
        format_metric(ensemble_recall)
    );
    println!(
        "mean ndcg@10    fusion(rrf)     {} ({fusion_ndcg:.10})",
        format_metric(fusion_ndcg)
    );
    println!(
        "mean ndcg@10    worst single    {} ({worst_single_ndcg:.10})",
        format_metric(worst_single_ndcg)
    );
    assert!(
        ensemble_recall > raw_recall,
        "construction must give the ensemble strictly higher mean recall@10"
    );
    assert!(
        fusion_ndcg >= worst_single_ndcg,
        "fused ndcg@10 must not fall below the worst single-instruction run"
    );

    // ---- emission --------------------------------------------------------
    let mut corpus_jsonl = String::new();
    for (id, text) in &docs {
        corpus_jsonl.push_str(&serde_json::json!({"doc_id": id, "text": text}).to_string());
        corpus_jsonl.push('\n');
    }
    let mut topics_tsv =
        String::from("# Synthetic benchmark topics (see fixtures/bench/README).\n");
    for topic in &TOPICS {
        writeln!(topics_tsv, "{}\t{}", topic.qid, topic.title).unwrap();
    }
    let mut qrels_txt = String::new();
    let mut qrels_lines = qrels_lines.clone();
    qrels_lines.sort();
    for line in &qrels_lines {
        qrels_txt.push_str(line);
        qrels_txt.push('\n');
    }

    std::fs::write(out_dir.join("corpus.jsonl"), corpus_jsonl).unwrap();
    std::fs::write(out_dir.join("topics.tsv"), topics_tsv).unwrap();
    std::fs::write(out_dir.join("qrels.txt"), qrels_txt).unwrap();
    println!("wrote fixtures to {}", out_dir.display());
}
