//! Inverted index with BM25 scoring.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tokenize, Document, IndexError, Ranking, TokenizerConfig, WeightedQuery};

const SNAPSHOT_FORMAT: &str = "qrw-index";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IdfVariant {
    /// `ln((N - df + 0.5) / (df + 0.5) + 1)`; always nonnegative.
    #[default]
    Lucene,
    /// `ln((N - df + 0.5) / (df + 0.5))`; negative for df > N/2.
    Robertson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub idf: IdfVariant,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 1.2,
            b: 0.75,
            idf: IdfVariant::Lucene,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc_id: String,
    pub term_frequency: u32,
}

/// Immutable postings + statistics structure BM25 scores against.
/// Postings lists are sorted by doc_id; construction is order-independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: BTreeMap<String, u32>,
    doc_count: usize,
    avg_doc_len: f64,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format: String,
    version: u32,
    index: InvertedIndex,
}

impl InvertedIndex {
    /// Builds an index over `docs`, tokenizing each document body with `cfg`.
    /// Rejects duplicate doc_ids naming the offending id.
    pub fn build<'a>(
        docs: impl IntoIterator<Item = &'a Document>,
        cfg: &TokenizerConfig,
    ) -> Result<Self, IndexError> {
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths: BTreeMap<String, u32> = BTreeMap::new();
        let mut total_len: u64 = 0;

        for doc in docs {
            if doc.doc_id.is_empty() {
                return Err(IndexError::EmptyDocId);
            }
            let tokens = tokenize(&doc.text, cfg);
            if doc_lengths
                .insert(doc.doc_id.clone(), tokens.len() as u32)
                .is_some()
            {
                return Err(IndexError::DuplicateDocId(doc.doc_id.clone()));
            }
            total_len += tokens.len() as u64;

            let mut freqs: BTreeMap<String, u32> = BTreeMap::new();
            for token in tokens {
                *freqs.entry(token).or_insert(0) += 1;
            }
            for (term, tf) in freqs {
                postings.entry(term).or_default().push(Posting {
                    doc_id: doc.doc_id.clone(),
                    term_frequency: tf,
                });
            }
        }

        for list in postings.values_mut() {
            list.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        }
        let doc_count = doc_lengths.len();
        let avg_doc_len = if doc_count == 0 {
            0.0
        } else {
            total_len as f64 / doc_count as f64
        };
        Ok(InvertedIndex {
            postings,
            doc_lengths,
            doc_count,
            avg_doc_len,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<u32> {
        self.doc_lengths.get(doc_id).copied()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.doc_lengths.keys().map(String::as_str)
    }

    /// Document frequency of `term`.
    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    fn idf(&self, df: usize, variant: IdfVariant) -> f64 {
        let n = self.doc_count as f64;
        let df = df as f64;
        let ratio = (n - df + 0.5) / (df + 0.5);
        match variant {
            IdfVariant::Lucene => (ratio + 1.0).ln(),
            IdfVariant::Robertson => ratio.ln(),
        }
    }

    fn tf_norm(&self, tf: u32, doc_len: u32, params: &Bm25Params) -> f64 {
        let tf = tf as f64;
        let norm = 1.0 - params.b + params.b * doc_len as f64 / self.avg_doc_len;
        tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
    }

    /// BM25 score of a single document for a weighted query:
    /// sum over query entries of `weight * idf(term) * tf_component`.
    /// Terms absent from the document contribute 0. Errors on unknown doc_id.
    pub fn bm25_score(
        &self,
        query: &WeightedQuery,
        doc_id: &str,
        params: &Bm25Params,
    ) -> Result<f64, IndexError> {
        let doc_len = self
            .doc_len(doc_id)
            .ok_or_else(|| IndexError::UnknownDocId(doc_id.to_string()))?;
        let mut score = 0.0;
        for (term, weight) in &query.terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let Ok(pos) = list.binary_search_by(|p| p.doc_id.as_str().cmp(doc_id)) else {
                continue;
            };
            let idf = self.idf(list.len(), params.idf);
            score += weight * idf * self.tf_norm(list[pos].term_frequency, doc_len, params);
        }
        Ok(score)
    }

    /// Top-k documents by BM25 score, descending, ties broken by ascending
    /// doc_id. Documents scoring exactly 0 are excluded. The per-document
    /// accumulation order matches `bm25_score`, so results agree bit-for-bit
    /// with scoring every document individually.
    pub fn search(&self, query: &WeightedQuery, k: usize, params: &Bm25Params) -> Ranking {
        let mut scores: HashMap<&str, f64> = HashMap::new();
        for (term, weight) in &query.terms {
            if *weight == 0.0 {
                continue;
            }
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(list.len(), params.idf);
            for p in list {
                let doc_len = self.doc_lengths[&p.doc_id];
                let contribution = weight * idf * self.tf_norm(p.term_frequency, doc_len, params);
                *scores.entry(p.doc_id.as_str()).or_insert(0.0) += contribution;
            }
        }
        let scored: Vec<(String, f64)> = scores
            .into_iter()
            .filter(|(_, s)| *s != 0.0)
            .map(|(d, s)| (d.to_string(), s))
            .collect();
        let mut ranking =
            Ranking::from_scores(query.qid.clone(), "bm25", scored).expect("finite BM25 scores");
        ranking.truncate(k);
        ranking
    }

    /// Writes a versioned snapshot of the index.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        let snap = Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            index: self.clone(),
        };
        let json = serde_json::to_string(&snap).expect("index serializes");
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        let path = path.as_ref();
        let data = std::fs::read_to_string(path)?;
        let snap: Snapshot = serde_json::from_str(&data).map_err(|e| IndexError::Snapshot {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        if snap.format != SNAPSHOT_FORMAT || snap.version != SNAPSHOT_VERSION {
            return Err(IndexError::Snapshot {
                path: path.display().to_string(),
                reason: format!(
                    "unsupported snapshot {} v{} (expected {} v{})",
                    snap.format, snap.version, SNAPSHOT_FORMAT, SNAPSHOT_VERSION
                ),
            });
        }
        Ok(snap.index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_index::StopwordFilter;

    fn cfg() -> TokenizerConfig {
        TokenizerConfig {
            lowercase: true,
            stopwords: StopwordFilter::None,
            stemming: false,
        }
    }

    fn docs(pairs: &[(&str, &str)]) -> Vec<Document> {
        pairs
            .iter()
            .map(|(id, text)| Document::new(*id, *text, &cfg()).unwrap())
            .collect()
    }

    #[test]
    fn empty_corpus() {
        let idx = InvertedIndex::build(&[], &cfg()).unwrap();
        assert_eq!(idx.doc_count(), 0);
        assert_eq!(idx.df("a"), 0);
    }

    #[test]
    fn two_doc_postings_and_avg_len() {
        let ds = docs(&[("d1", "a b a"), ("d2", "b c")]);
        let idx = InvertedIndex::build(&ds, &cfg()).unwrap();
        assert_eq!(idx.doc_count(), 2);
        assert_eq!(idx.avg_doc_len(), 2.5);
        let a = idx.postings("a").unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].doc_id, "d1");
        assert_eq!(a[0].term_frequency, 2);
        let b = idx.postings("b").unwrap();
        assert_eq!(
            b.iter()
                .map(|p| (p.doc_id.as_str(), p.term_frequency))
                .collect::<Vec<_>>(),
            vec![("d1", 1), ("d2", 1)]
        );
        assert_eq!(idx.postings("c").unwrap()[0].doc_id, "d2");
    }

    #[test]
    fn duplicate_doc_id_rejected() {
        let ds = docs(&[("d1", "a"), ("d1", "b")]);
        let err = InvertedIndex::build(&ds, &cfg()).unwrap_err();
        assert!(err.to_string().contains("d1"));
    }

    #[test]
    fn build_is_order_independent() {
        let ds = docs(&[("d1", "a b a"), ("d2", "b c"), ("d3", "c c d")]);
        let forward = InvertedIndex::build(&ds, &cfg()).unwrap();
        let reversed: Vec<_> = ds.iter().rev().cloned().collect();
        let backward = InvertedIndex::build(&reversed, &cfg()).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn single_doc_score_matches_hand_formula() {
        let ds = docs(&[("d1", "a")]);
        let idx = InvertedIndex::build(&ds, &cfg()).unwrap();
        let q = WeightedQuery::new("q1", vec![("a".into(), 1.0)]).unwrap();
        let params = Bm25Params::default();
        let got = idx.bm25_score(&q, "d1", &params).unwrap();
        // Hand evaluation: tf=1, df=1, N=1, len=avg_len=1.
        // idf = ln((1 - 1 + 0.5)/(1 + 0.5) + 1) = ln(4/3)
        // tf part = 1*(k1+1)/(1 + k1*(1 - b + b*1)) = 2.2/2.2 = 1
        let expected = (0.5f64 / 1.5 + 1.0).ln();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn absent_term_contributes_zero() {
        let ds = docs(&[("d1", "a b"), ("d2", "b")]);
        let idx = InvertedIndex::build(&ds, &cfg()).unwrap();
        let q = WeightedQuery::new("q1", vec![("zzz".into(), 1.0)]).unwrap();
        assert_eq!(
            idx.bm25_score(&q, "d1", &Bm25Params::default()).unwrap(),
            0.0
        );
        assert!(idx
            .search(&q, 10, &Bm25Params::default())
            .entries
            .is_empty());
    }

    #[test]
    fn unknown_doc_id_errors() {
        let ds = docs(&[("d1", "a")]);
        let idx = InvertedIndex::build(&ds, &cfg()).unwrap();
        let q = WeightedQuery::new("q1", vec![("a".into(), 1.0)]).unwrap();
        let err = idx
            .bm25_score(&q, "nope", &Bm25Params::default())
            .unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn score_is_linear_in_weight() {
        let ds = docs(&[("d1", "a b a"), ("d2", "a c")]);
        let idx = InvertedIndex::build(&ds, &cfg()).unwrap();
        let params = Bm25Params::default();
        let q1 = WeightedQuery::new("q", vec![("a".into(), 1.0)]).unwrap();
        let q2 = WeightedQuery::new("q", vec![("a".into(), 2.0)]).unwrap();
        let s1 = idx.bm25_score(&q1, "d1", &params).unwrap();
        let s2 = idx.bm25_score(&q2, "d1", &params).unwrap();
        assert!((s2 - 2.0 * s1).abs() < 1e-12);
    }

    #[test]
    fn search_ties_break_by_doc_id() {
        let ds = docs(&[("db", "x"), ("da", "x")]);
        let idx = InvertedIndex::build(&ds, &cfg()).unwrap();
        let q = WeightedQuery::new("q", vec![("x".into(), 1.0)]).unwrap();
        let r = idx.search(&q, 10, &Bm25Params::default());
        assert_eq!(r.doc_ids().collect::<Vec<_>>(), ["da", "db"]);
    }

    #[test]
    fn empty_query_yields_empty_ranking() {
        let ds = docs(&[("d1", "a")]);
        let idx = InvertedIndex::build(&ds, &cfg()).unwrap();
        let q = WeightedQuery::new("q", vec![]).unwrap();
        assert!(idx.search(&q, 5, &Bm25Params::default()).entries.is_empty());
    }

    #[test]
    fn snapshot_round_trip() {
        let ds = docs(&[("d1", "a b a"), ("d2", "b c")]);
        let idx = InvertedIndex::build(&ds, &cfg()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        idx.save(&path).unwrap();
        let loaded = InvertedIndex::load(&path).unwrap();
        assert_eq!(idx, loaded);
    }

    #[test]
    fn snapshot_rejects_wrong_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"format":"other","version":9,"index":null}"#).unwrap();
        assert!(InvertedIndex::load(&path).is_err());
    }

    #[test]
    fn adding_query_free_doc_shifts_scores_only_through_global_stats() {
        // Recomputation oracle: after adding a document with no query term,
        // the score of an existing document equals the hand formula with the
        // old tf/df but the new N and avg_doc_len.
        let before = docs(&[("d1", "a b a"), ("d2", "b c")]);
        let mut after = before.clone();
        after.push(Document::new("d3", "x y z x", &cfg()).unwrap());
        let idx_before = InvertedIndex::build(&before, &cfg()).unwrap();
        let idx_after = InvertedIndex::build(&after, &cfg()).unwrap();
        let params = Bm25Params::default();
        let q = WeightedQuery::new("q", vec![("a".into(), 1.0), ("b".into(), 0.5)]).unwrap();

        for doc_id in ["d1", "d2"] {
            let got = idx_after.bm25_score(&q, doc_id, &params).unwrap();
            let mut expected = 0.0;
            for (term, w) in &q.terms {
                // tf and df taken from the pre-insertion index.
                let Some(list) = idx_before.postings(term) else {
                    continue;
                };
                let Some(p) = list.iter().find(|p| p.doc_id == doc_id) else {
                    continue;
                };
                let n = idx_after.doc_count() as f64;
                let df = list.len() as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                let tf = p.term_frequency as f64;
                let len = idx_before.doc_len(doc_id).unwrap() as f64;
                let norm = 1.0 - params.b + params.b * len / idx_after.avg_doc_len();
                expected += w * idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
            }
            assert!(
                (got - expected).abs() < 1e-12,
                "{doc_id}: {got} vs {expected}"
            );
        }
        // The retrieved set itself is unchanged.
        let r_before = idx_before.search(&q, 10, &params);
        let r_after = idx_after.search(&q, 10, &params);
        assert_eq!(
            r_before.doc_ids().collect::<Vec<_>>(),
            r_after.doc_ids().collect::<Vec<_>>()
        );
    }

    #[test]
    fn built_index_is_shareable_across_concurrent_searches() {
        let ds = docs(&[("d1", "a b a"), ("d2", "b c"), ("d3", "a c")]);
        let idx = InvertedIndex::build(&ds, &cfg()).unwrap();
        let params = Bm25Params::default();
        let q = WeightedQuery::new("q", vec![("a".into(), 1.0)]).unwrap();
        let expected = idx.search(&q, 10, &params);
        std::thread::scope(|scope| {
            for _ in 0..4 {
                let (idx, q, params, expected) = (&idx, &q, &params, &expected);
                scope.spawn(move || {
                    assert_eq!(&idx.search(q, 10, params), expected);
                });
            }
        });
    }

    #[test]
    fn robertson_idf_can_go_negative() {
        let ds = docs(&[("d1", "a"), ("d2", "a"), ("d3", "b")]);
        let idx = InvertedIndex::build(&ds, &cfg()).unwrap();
        let q = WeightedQuery::new("q", vec![("a".into(), 1.0)]).unwrap();
        let params = Bm25Params {
            idf: IdfVariant::Robertson,
            ..Default::default()
        };
        let s = idx.bm25_score(&q, "d1", &params).unwrap();
        assert!(s < 0.0);
        let lucene = idx.bm25_score(&q, "d1", &Bm25Params::default()).unwrap();
        assert!(lucene > 0.0);
    }
}
