//! Combine multiple rankings for one query into a single ranking via
//! reciprocal-rank fusion or score fusion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_index::Ranking;

/// Literature-standard RRF constant.
pub const DEFAULT_RRF_K: f64 = 60.0;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("no input rankings")]
    EmptyInput,
    #[error("mixed qids in fusion input: {expected:?} and {found:?}")]
    MixedQids { expected: String, found: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FusionMethod {
    #[default]
    Rrf,
    ScoreSum,
    ScoreMax,
}

impl FusionMethod {
    pub fn parse(s: &str) -> Option<FusionMethod> {
        match s.trim().to_lowercase().as_str() {
            "rrf" => Some(FusionMethod::Rrf),
            "score_sum" | "sum" => Some(FusionMethod::ScoreSum),
            "score_max" | "max" => Some(FusionMethod::ScoreMax),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FusionMethod::Rrf => "rrf",
            FusionMethod::ScoreSum => "score_sum",
            FusionMethod::ScoreMax => "score_max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrfOptions {
    pub k: f64,
    /// When set, a document absent from one input list contributes
    /// `1/(k + |list| + 1)` for that list instead of nothing.
    pub impute_missing: bool,
}

impl Default for RrfOptions {
    fn default() -> Self {
        RrfOptions {
            k: DEFAULT_RRF_K,
            impute_missing: false,
        }
    }
}

fn check_inputs(inputs: &[Ranking]) -> Result<&str, FusionError> {
    let first = inputs.first().ok_or(FusionError::EmptyInput)?;
    for r in inputs {
        if r.qid != first.qid {
            return Err(FusionError::MixedQids {
                expected: first.qid.clone(),
                found: r.qid.clone(),
            });
        }
    }
    Ok(&first.qid)
}

/// Union of input documents in ascending doc_id order, with each list's
/// rank and score for the document.
fn doc_table(inputs: &[Ranking]) -> BTreeMap<&str, Vec<Option<(u32, f64)>>> {
    let mut table: BTreeMap<&str, Vec<Option<(u32, f64)>>> = BTreeMap::new();
    for (i, ranking) in inputs.iter().enumerate() {
        for e in &ranking.entries {
            table
                .entry(e.doc_id.as_str())
                .or_insert_with(|| vec![None; inputs.len()])[i] = Some((e.rank, e.score));
        }
    }
    table
}

/// Sum in a canonical order so the result is bitwise independent of the
/// order the contributions were gathered in (input-list permutations).
fn ordered_sum(mut contributions: Vec<f64>) -> f64 {
    contributions.sort_by(f64::total_cmp);
    contributions.into_iter().sum()
}

/// Reciprocal rank fusion: `fused(d) = sum over lists of 1/(k + rank(d))`.
/// Descending fused score, ties by ascending doc_id.
pub fn rrf(inputs: &[Ranking], opts: &RrfOptions) -> Result<Ranking, FusionError> {
    let qid = check_inputs(inputs)?.to_string();
    let lens: Vec<usize> = inputs.iter().map(|r| r.entries.len()).collect();
    let scored: Vec<(String, f64)> = doc_table(inputs)
        .into_iter()
        .map(|(doc_id, per_list)| {
            let mut contributions = Vec::with_capacity(per_list.len());
            for (i, slot) in per_list.iter().enumerate() {
                match slot {
                    Some((rank, _)) => contributions.push(1.0 / (opts.k + *rank as f64)),
                    None if opts.impute_missing => {
                        contributions.push(1.0 / (opts.k + lens[i] as f64 + 1.0));
                    }
                    None => {}
                }
            }
            (doc_id.to_string(), ordered_sum(contributions))
        })
        .collect();
    Ok(Ranking::from_scores(qid, "rrf", scored).expect("finite rrf scores"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreAgg {
    Sum,
    Max,
}

/// Score fusion: aggregates the input scores of each document with `agg`.
/// Lists not containing the document contribute nothing.
pub fn score_fuse(inputs: &[Ranking], agg: ScoreAgg) -> Result<Ranking, FusionError> {
    let qid = check_inputs(inputs)?.to_string();
    let tag = match agg {
        ScoreAgg::Sum => "score_sum",
        ScoreAgg::Max => "score_max",
    };
    let scored: Vec<(String, f64)> = doc_table(inputs)
        .into_iter()
        .map(|(doc_id, per_list)| {
            let scores: Vec<f64> = per_list.iter().flatten().map(|(_, s)| *s).collect();
            let score = match agg {
                ScoreAgg::Sum => ordered_sum(scores),
                ScoreAgg::Max => scores.into_iter().fold(f64::NEG_INFINITY, f64::max),
            };
            (doc_id.to_string(), score)
        })
        .collect();
    Ok(Ranking::from_scores(qid, tag, scored).expect("finite fused scores"))
}

/// Dispatches on the configured fusion method.
pub fn fuse(
    inputs: &[Ranking],
    method: FusionMethod,
    rrf_opts: &RrfOptions,
) -> Result<Ranking, FusionError> {
    match method {
        FusionMethod::Rrf => rrf(inputs, rrf_opts),
        FusionMethod::ScoreSum => score_fuse(inputs, ScoreAgg::Sum),
        FusionMethod::ScoreMax => score_fuse(inputs, ScoreAgg::Max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(qid: &str, ids: &[&str]) -> Ranking {
        let n = ids.len();
        Ranking::from_scores(
            qid,
            "in",
            ids.iter()
                .enumerate()
                .map(|(i, d)| (d.to_string(), (n - i) as f64))
                .collect(),
        )
        .unwrap()
    }

    fn scored_ranking(qid: &str, pairs: &[(&str, f64)]) -> Ranking {
        Ranking::from_scores(
            qid,
            "in",
            pairs.iter().map(|(d, s)| (d.to_string(), *s)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn rrf_hand_computed_two_lists() {
        let l1 = ranking("q", &["a", "b"]);
        let l2 = ranking("q", &["b", "c"]);
        let fused = rrf(&[l1, l2], &RrfOptions::default()).unwrap();
        assert_eq!(fused.doc_ids().collect::<Vec<_>>(), ["b", "a", "c"]);
        let score = |d: &str| fused.entries.iter().find(|e| e.doc_id == d).unwrap().score;
        assert!((score("a") - 1.0 / 61.0).abs() < 1e-12);
        assert!((score("b") - (1.0 / 62.0 + 1.0 / 61.0)).abs() < 1e-12);
        assert!((score("c") - 1.0 / 62.0).abs() < 1e-12);
    }

    #[test]
    fn single_list_keeps_order_for_both_methods() {
        let l = ranking("q", &["x", "a", "m"]);
        let fused = rrf(std::slice::from_ref(&l), &RrfOptions::default()).unwrap();
        assert_eq!(
            fused.doc_ids().collect::<Vec<_>>(),
            l.doc_ids().collect::<Vec<_>>()
        );
        let fused = score_fuse(std::slice::from_ref(&l), ScoreAgg::Sum).unwrap();
        assert_eq!(
            fused.doc_ids().collect::<Vec<_>>(),
            l.doc_ids().collect::<Vec<_>>()
        );
        // Single-list score fusion preserves the scores themselves.
        for (f, o) in fused.entries.iter().zip(&l.entries) {
            assert_eq!(f.score, o.score);
        }
    }

    #[test]
    fn score_sum_and_max_hand_cases() {
        let l1 = scored_ranking("q", &[("a", 2.0)]);
        let l2 = scored_ranking("q", &[("b", 2.5), ("a", 1.0)]);
        let sum = score_fuse(&[l1.clone(), l2.clone()], ScoreAgg::Sum).unwrap();
        assert_eq!(sum.doc_ids().collect::<Vec<_>>(), ["a", "b"]);
        assert!((sum.entries[0].score - 3.0).abs() < 1e-15);
        assert!((sum.entries[1].score - 2.5).abs() < 1e-15);
        let max = score_fuse(&[l1, l2], ScoreAgg::Max).unwrap();
        assert_eq!(max.doc_ids().collect::<Vec<_>>(), ["b", "a"]);
        assert!((max.entries[0].score - 2.5).abs() < 1e-15);
        assert!((max.entries[1].score - 2.0).abs() < 1e-15);
    }

    #[test]
    fn identical_lists_double_scores_keep_order() {
        let l = scored_ranking("q", &[("a", 2.0), ("b", 1.0)]);
        let fused = score_fuse(&[l.clone(), l.clone()], ScoreAgg::Sum).unwrap();
        assert_eq!(
            fused.doc_ids().collect::<Vec<_>>(),
            l.doc_ids().collect::<Vec<_>>()
        );
        for (f, o) in fused.entries.iter().zip(&l.entries) {
            assert!((f.score - 2.0 * o.score).abs() < 1e-15);
        }
    }

    #[test]
    fn mixed_qids_error() {
        let l1 = ranking("q1", &["a"]);
        let l2 = ranking("q2", &["a"]);
        assert!(matches!(
            rrf(&[l1.clone(), l2.clone()], &RrfOptions::default()),
            Err(FusionError::MixedQids { .. })
        ));
        assert!(score_fuse(&[l1, l2], ScoreAgg::Sum).is_err());
    }

    #[test]
    fn empty_input_errors() {
        assert!(matches!(
            rrf(&[], &RrfOptions::default()),
            Err(FusionError::EmptyInput)
        ));
    }

    #[test]
    fn output_is_union_without_duplicates() {
        let l1 = ranking("q", &["a", "b", "c"]);
        let l2 = ranking("q", &["c", "d"]);
        let fused = rrf(&[l1, l2], &RrfOptions::default()).unwrap();
        let mut ids: Vec<_> = fused.doc_ids().collect();
        ids.sort_unstable();
        assert_eq!(ids, ["a", "b", "c", "d"]);
    }

    #[test]
    fn permutation_invariance() {
        let a = ranking("q", &["a", "b", "c"]);
        let b = ranking("q", &["c", "a"]);
        let c = ranking("q", &["d", "b"]);
        let base = rrf(&[a.clone(), b.clone(), c.clone()], &RrfOptions::default()).unwrap();
        let perms: [[&Ranking; 3]; 5] = [
            [&a, &c, &b],
            [&b, &a, &c],
            [&b, &c, &a],
            [&c, &a, &b],
            [&c, &b, &a],
        ];
        for p in perms {
            let fused = rrf(
                &[p[0].clone(), p[1].clone(), p[2].clone()],
                &RrfOptions::default(),
            )
            .unwrap();
            assert_eq!(fused, base);
        }
    }

    #[test]
    fn rrf_score_bound_holds() {
        let a = ranking("q", &["a", "b", "c"]);
        let b = ranking("q", &["c", "a"]);
        let fused = rrf(&[a, b], &RrfOptions::default()).unwrap();
        let bound = 2.0 / (DEFAULT_RRF_K + 1.0);
        for e in &fused.entries {
            assert!(e.score > 0.0 && e.score <= bound);
        }
    }

    #[test]
    fn imputed_rank_contribution() {
        let l1 = ranking("q", &["a", "b"]);
        let l2 = ranking("q", &["b"]);
        let opts = RrfOptions {
            impute_missing: true,
            ..Default::default()
        };
        let fused = rrf(&[l1, l2], &opts).unwrap();
        let a = fused.entries.iter().find(|e| e.doc_id == "a").unwrap();
        // present in l1 at rank 1, imputed in l2 at rank |l2|+1 = 2.
        assert!((a.score - (1.0 / 61.0 + 1.0 / 62.0)).abs() < 1e-12);
    }
}
