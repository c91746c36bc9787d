//! Graded-relevance evaluation metrics, significance testing, and TREC file
//! formats.

mod metrics;
mod stats;
mod trec;

pub use metrics::{
    average_precision, evaluate_measure, ndcg_at_k, precision_at_k, recall_at_k, reciprocal_rank,
    GainScheme,
};
pub use stats::{holm_bonferroni, paired_t_test, student_t_two_sided_p};
pub use trec::{
    parse_qrels, parse_run, parse_topics, read_qrels, read_run, read_topics, write_qrels, write_run,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus_index::Ranking;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}:{line}: {reason} (line was {excerpt:?})")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
        excerpt: String,
    },
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("paired test needs at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("degenerate paired sample: zero variance with nonzero mean difference")]
    DegeneratePairedSample,
    #[error("unknown measure {0:?}")]
    UnknownMeasure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Graded relevance judgments: one grade per (qid, doc_id).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, qid: impl Into<String>, doc_id: impl Into<String>, grade: u32) {
        self.judgments
            .entry(qid.into())
            .or_default()
            .insert(doc_id.into(), grade);
    }

    pub fn grade(&self, qid: &str, doc_id: &str) -> Option<u32> {
        self.judgments.get(qid).and_then(|m| m.get(doc_id)).copied()
    }

    /// All judged documents for `qid`, in ascending doc_id order.
    pub fn judged(&self, qid: &str) -> impl Iterator<Item = (&str, u32)> {
        self.judgments
            .get(qid)
            .into_iter()
            .flat_map(|m| m.iter().map(|(d, g)| (d.as_str(), *g)))
    }

    /// Number of judged documents with grade >= `threshold`.
    pub fn relevant_count(&self, qid: &str, threshold: u32) -> usize {
        self.judged(qid).filter(|(_, g)| *g >= threshold).count()
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

/// A retrieval-effectiveness measure. Per-query reciprocal rank aggregates
/// to MRR, which is how the measure is labeled in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Ndcg { k: usize },
    Precision { k: usize },
    Recall { k: usize },
    Map,
    Rr { rel_threshold: u32 },
}

impl Measure {
    /// Label used in report tables and CSV headers.
    pub fn label(&self) -> String {
        match self {
            Measure::Ndcg { k } => format!("ndcg@{k}"),
            Measure::Precision { k } => format!("p@{k}"),
            Measure::Recall { k } => format!("recall@{k}"),
            Measure::Map => "map".to_string(),
            Measure::Rr { rel_threshold } => format!("mrr(rel={rel_threshold})"),
        }
    }

    /// Parses labels like `ndcg@10`, `p@10`, `recall@10`, `map`, `mrr`,
    /// `mrr(rel=2)` (alias `rr(rel=2)`).
    pub fn parse(s: &str) -> Result<Measure, EvalError> {
        let s = s.trim().to_lowercase();
        let unknown = || EvalError::UnknownMeasure(s.clone());
        if s == "map" {
            return Ok(Measure::Map);
        }
        if s == "mrr" || s == "rr" {
            return Ok(Measure::Rr { rel_threshold: 1 });
        }
        if let Some(rest) = s
            .strip_prefix("mrr(rel=")
            .or_else(|| s.strip_prefix("rr(rel="))
        {
            let t: u32 = rest
                .strip_suffix(')')
                .and_then(|v| v.parse().ok())
                .ok_or_else(unknown)?;
            return Ok(Measure::Rr { rel_threshold: t });
        }
        if let Some((name, k)) = s.split_once('@') {
            let k: usize = k.parse().map_err(|_| unknown())?;
            if k == 0 {
                return Err(unknown());
            }
            return match name {
                "ndcg" => Ok(Measure::Ndcg { k }),
                "p" | "precision" => Ok(Measure::Precision { k }),
                "recall" => Ok(Measure::Recall { k }),
                _ => Err(unknown()),
            };
        }
        Err(unknown())
    }
}

/// Per-query metric values plus their arithmetic-mean aggregates. Queries on
/// which a measure is undefined (no relevant documents) are excluded from the
/// mean and counted in `excluded`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub labels: Vec<String>,
    /// qid -> measure label -> value (defined values only).
    pub per_query: BTreeMap<String, BTreeMap<String, f64>>,
    /// measure label -> mean over defined queries.
    pub aggregates: BTreeMap<String, f64>,
    /// measure label -> number of queries excluded as undefined.
    pub excluded: BTreeMap<String, usize>,
}

impl MeasureReport {
    /// Per-query values for one measure, in ascending qid order.
    pub fn values(&self, label: &str) -> Vec<(String, f64)> {
        self.per_query
            .iter()
            .filter_map(|(qid, m)| m.get(label).map(|v| (qid.clone(), *v)))
            .collect()
    }
}

/// Evaluates `measures` over one ranking per query.
pub fn evaluate_run(
    rankings: &[Ranking],
    qrels: &Qrels,
    measures: &[Measure],
    gain: GainScheme,
    binary_threshold: u32,
) -> MeasureReport {
    let labels: Vec<String> = measures.iter().map(Measure::label).collect();
    let mut per_query: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut excluded: BTreeMap<String, usize> = BTreeMap::new();
    for label in &labels {
        sums.insert(label.clone(), (0.0, 0));
        excluded.insert(label.clone(), 0);
    }

    for ranking in rankings {
        for (measure, label) in measures.iter().zip(&labels) {
            match evaluate_measure(ranking, qrels, *measure, gain, binary_threshold) {
                Some(v) => {
                    per_query
                        .entry(ranking.qid.clone())
                        .or_default()
                        .insert(label.clone(), v);
                    let s = sums.get_mut(label).expect("label present");
                    s.0 += v;
                    s.1 += 1;
                }
                None => *excluded.get_mut(label).expect("label present") += 1,
            }
        }
    }

    let aggregates = sums
        .into_iter()
        .map(|(label, (sum, n))| (label, if n == 0 { 0.0 } else { sum / n as f64 }))
        .collect();
    MeasureReport {
        labels,
        per_query,
        aggregates,
        excluded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_labels_round_trip() {
        for m in [
            Measure::Ndcg { k: 10 },
            Measure::Precision { k: 5 },
            Measure::Recall { k: 10 },
            Measure::Map,
            Measure::Rr { rel_threshold: 2 },
        ] {
            assert_eq!(Measure::parse(&m.label()).unwrap(), m);
        }
        assert_eq!(
            Measure::parse("rr(rel=2)").unwrap(),
            Measure::Rr { rel_threshold: 2 }
        );
        assert_eq!(
            Measure::parse("mrr").unwrap(),
            Measure::Rr { rel_threshold: 1 }
        );
        assert!(Measure::parse("bogus@3").is_err());
        assert!(Measure::parse("ndcg@0").is_err());
    }

    #[test]
    fn aggregate_is_mean_of_per_query() {
        let mut qrels = Qrels::new();
        qrels.insert("q1", "d1", 1);
        qrels.insert("q2", "d2", 1);
        let r1 = Ranking::from_scores("q1", "t", vec![("d1".into(), 1.0)]).unwrap();
        let r2 = Ranking::from_scores("q2", "t", vec![("d9".into(), 1.0)]).unwrap();
        let report = evaluate_run(
            &[r1, r2],
            &qrels,
            &[Measure::Precision { k: 1 }],
            GainScheme::Linear,
            1,
        );
        let label = "p@1";
        let mean = report.aggregates[label];
        let vals = report.values(label);
        let expected: f64 = vals.iter().map(|(_, v)| v).sum::<f64>() / vals.len() as f64;
        assert!((mean - expected).abs() < 1e-12);
        assert!((mean - 0.5).abs() < 1e-12);
    }
}
