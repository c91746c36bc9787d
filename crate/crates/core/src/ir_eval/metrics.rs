//! Graded retrieval metrics. Functions return `None` where a measure is
//! undefined for the query (no relevant documents), so callers can exclude
//! those queries from aggregation.

use crate::corpus_index::Ranking;

use super::{Measure, Qrels};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainScheme {
    /// gain = grade
    #[default]
    Linear,
    /// gain = 2^grade - 1
    Exponential,
}

impl GainScheme {
    fn gain(&self, grade: u32) -> f64 {
        match self {
            GainScheme::Linear => grade as f64,
            GainScheme::Exponential => (2f64).powi(grade as i32) - 1.0,
        }
    }
}

fn grade_of(ranking: &Ranking, qrels: &Qrels, i: usize) -> u32 {
    qrels
        .grade(&ranking.qid, &ranking.entries[i].doc_id)
        .unwrap_or(0)
}

/// nDCG@k with the configured gain. DCG discounts by log2(rank+1); the ideal
/// DCG reorders all judged documents for the query and truncates at k.
/// `None` when the query has no document with grade > 0.
pub fn ndcg_at_k(ranking: &Ranking, qrels: &Qrels, k: usize, gain: GainScheme) -> Option<f64> {
    let mut ideal_gains: Vec<f64> = qrels
        .judged(&ranking.qid)
        .map(|(_, g)| gain.gain(g))
        .filter(|g| *g > 0.0)
        .collect();
    if ideal_gains.is_empty() {
        return None;
    }
    ideal_gains.sort_by(|a, b| b.partial_cmp(a).expect("finite gains"));

    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = (0..k.min(ranking.entries.len()))
        .map(|i| gain.gain(grade_of(ranking, qrels, i)) / discount(i))
        .sum();
    let idcg: f64 = ideal_gains
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| g / discount(i))
        .sum();
    Some(dcg / idcg)
}

/// P@k with binary relevance at `threshold`; the denominator is k even when
/// fewer than k documents were retrieved.
pub fn precision_at_k(ranking: &Ranking, qrels: &Qrels, k: usize, threshold: u32) -> f64 {
    let hits = (0..k.min(ranking.entries.len()))
        .filter(|&i| grade_of(ranking, qrels, i) >= threshold)
        .count();
    hits as f64 / k as f64
}

/// Recall@k; `None` when the query has no relevant documents.
pub fn recall_at_k(ranking: &Ranking, qrels: &Qrels, k: usize, threshold: u32) -> Option<f64> {
    let relevant = qrels.relevant_count(&ranking.qid, threshold);
    if relevant == 0 {
        return None;
    }
    let hits = (0..k.min(ranking.entries.len()))
        .filter(|&i| grade_of(ranking, qrels, i) >= threshold)
        .count();
    Some(hits as f64 / relevant as f64)
}

/// Average precision: mean of P@i over the ranks i of retrieved relevant
/// documents, with the total number of relevant documents as denominator.
/// `None` when the query has no relevant documents.
pub fn average_precision(ranking: &Ranking, qrels: &Qrels, threshold: u32) -> Option<f64> {
    let relevant = qrels.relevant_count(&ranking.qid, threshold);
    if relevant == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for i in 0..ranking.entries.len() {
        if grade_of(ranking, qrels, i) >= threshold {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / relevant as f64)
}

/// Reciprocal rank of the first document with grade >= `threshold`;
/// 0 when none was retrieved.
pub fn reciprocal_rank(ranking: &Ranking, qrels: &Qrels, threshold: u32) -> f64 {
    for i in 0..ranking.entries.len() {
        if grade_of(ranking, qrels, i) >= threshold {
            return 1.0 / (i + 1) as f64;
        }
    }
    0.0
}

/// Dispatches one measure. `binary_threshold` applies to P@k, recall@k and
/// MAP; RR carries its own threshold.
pub fn evaluate_measure(
    ranking: &Ranking,
    qrels: &Qrels,
    measure: Measure,
    gain: GainScheme,
    binary_threshold: u32,
) -> Option<f64> {
    match measure {
        Measure::Ndcg { k } => ndcg_at_k(ranking, qrels, k, gain),
        Measure::Precision { k } => Some(precision_at_k(ranking, qrels, k, binary_threshold)),
        Measure::Recall { k } => recall_at_k(ranking, qrels, k, binary_threshold),
        Measure::Map => average_precision(ranking, qrels, binary_threshold),
        Measure::Rr { rel_threshold } => Some(reciprocal_rank(ranking, qrels, rel_threshold)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(ids: &[&str]) -> Ranking {
        let n = ids.len();
        Ranking::from_scores(
            "q1",
            "t",
            ids.iter()
                .enumerate()
                .map(|(i, d)| (d.to_string(), (n - i) as f64))
                .collect(),
        )
        .unwrap()
    }

    fn qrels(pairs: &[(&str, u32)]) -> Qrels {
        let mut q = Qrels::new();
        for (d, g) in pairs {
            q.insert("q1", *d, *g);
        }
        q
    }

    #[test]
    fn ndcg_perfect_ordering_is_one() {
        let qr = qrels(&[("d1", 3), ("d2", 1), ("d3", 0)]);
        let r = ranking(&["d1", "d2", "d3"]);
        let v = ndcg_at_k(&r, &qr, 10, GainScheme::Linear).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn ndcg_hand_computed_example() {
        let qr = qrels(&[("d1", 3), ("d2", 1), ("d3", 0)]);
        let r = ranking(&["d2", "d1", "d3"]);
        let got = ndcg_at_k(&r, &qr, 10, GainScheme::Linear).unwrap();
        let dcg = 1.0 / 2f64.log2() + 3.0 / 3f64.log2();
        let idcg = 3.0 / 2f64.log2() + 1.0 / 3f64.log2();
        let expected = dcg / idcg;
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.797).abs() < 5e-4, "{got}");
    }

    #[test]
    fn ndcg_only_unjudged_docs_is_zero() {
        let qr = qrels(&[("d1", 2)]);
        let r = ranking(&["x1", "x2"]);
        assert_eq!(ndcg_at_k(&r, &qr, 10, GainScheme::Linear).unwrap(), 0.0);
    }

    #[test]
    fn ndcg_undefined_without_relevant_docs() {
        let qr = qrels(&[("d1", 0)]);
        let r = ranking(&["d1"]);
        assert!(ndcg_at_k(&r, &qr, 10, GainScheme::Linear).is_none());
    }

    #[test]
    fn exponential_gain_differs() {
        let qr = qrels(&[("d1", 3), ("d2", 1)]);
        let r = ranking(&["d2", "d1"]);
        let lin = ndcg_at_k(&r, &qr, 10, GainScheme::Linear).unwrap();
        let exp = ndcg_at_k(&r, &qr, 10, GainScheme::Exponential).unwrap();
        assert!(lin != exp);
    }

    #[test]
    fn precision_counts_top_k_over_k() {
        let qr = qrels(&[("d1", 2), ("d2", 0)]);
        let r = ranking(&["d1", "d2", "d9"]);
        assert!((precision_at_k(&r, &qr, 3, 1) - 1.0 / 3.0).abs() < 1e-12);
        let all = qrels(&[("d1", 1), ("d2", 1), ("d9", 1)]);
        assert_eq!(precision_at_k(&r, &all, 3, 1), 1.0);
    }

    #[test]
    fn recall_uses_relevant_denominator() {
        let qr = qrels(&[("d1", 2), ("d2", 0)]);
        let r = ranking(&["d1", "d2", "d9"]);
        assert_eq!(recall_at_k(&r, &qr, 3, 1).unwrap(), 1.0);
        let none = qrels(&[("d1", 0)]);
        assert!(recall_at_k(&r, &none, 3, 1).is_none());
    }

    #[test]
    fn reciprocal_rank_thresholds() {
        let qr = qrels(&[("d2", 2)]);
        let r = ranking(&["d1", "d2"]);
        assert_eq!(reciprocal_rank(&r, &qr, 2), 0.5);
        let low = qrels(&[("d2", 1)]);
        assert_eq!(reciprocal_rank(&r, &low, 2), 0.0);
        let empty = qrels(&[]);
        assert_eq!(reciprocal_rank(&r, &empty, 1), 0.0);
    }

    #[test]
    fn average_precision_hand_example() {
        let qr = qrels(&[("a", 1), ("b", 1)]);
        let r = ranking(&["a", "x", "b"]);
        let got = average_precision(&r, &qr, 1).unwrap();
        assert!((got - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn metric_at_k_depends_only_on_prefix() {
        let qr = qrels(&[("a", 2), ("b", 1), ("c", 1)]);
        let long = ranking(&["a", "x", "b", "c", "y"]);
        let short = ranking(&["a", "x"]);
        assert_eq!(
            ndcg_at_k(&long, &qr, 2, GainScheme::Linear),
            ndcg_at_k(&short, &qr, 2, GainScheme::Linear)
        );
        assert_eq!(
            precision_at_k(&long, &qr, 2, 1),
            precision_at_k(&short, &qr, 2, 1)
        );
        assert_eq!(
            recall_at_k(&long, &qr, 2, 1),
            recall_at_k(&short, &qr, 2, 1)
        );
    }
}
