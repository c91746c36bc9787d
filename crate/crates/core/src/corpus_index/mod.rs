//! Corpus ingestion, tokenization, inverted-index construction, and BM25
//! search over weighted bag-of-words queries.

mod index;
mod tokenizer;

pub use index::{Bm25Params, IdfVariant, InvertedIndex, Posting};
pub use tokenizer::{
    parse_stopwords, tokenize, StopwordFilter, TokenizerConfig, BUNDLED_STOPWORDS,
};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
    #[error("empty doc_id")]
    EmptyDocId,
    #[error("unknown doc_id {0:?}")]
    UnknownDocId(String),
    #[error("{path}:{line}: {reason}")]
    Corpus {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("ranking for {qid:?}: {reason}")]
    InvalidRanking { qid: String, reason: String },
    #[error("query {qid:?}: negative weight {weight} for term {term:?}")]
    NegativeWeight {
        qid: String,
        term: String,
        weight: f64,
    },
    #[error("index snapshot {path}: {reason}")]
    Snapshot { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single corpus document. `length_tokens` is the token count of `text`
/// under the tokenizer configuration the document was ingested with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub length_tokens: usize,
}

impl Document {
    pub fn new(
        doc_id: impl Into<String>,
        text: impl Into<String>,
        cfg: &TokenizerConfig,
    ) -> Result<Self, IndexError> {
        let doc_id = doc_id.into();
        if doc_id.is_empty() {
            return Err(IndexError::EmptyDocId);
        }
        let text = text.into();
        let length_tokens = tokenize(&text, cfg).len();
        Ok(Document {
            doc_id,
            text,
            length_tokens,
        })
    }
}

/// An in-memory corpus with stable document order and id lookup.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct JsonlDoc {
    doc_id: String,
    text: String,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, doc: Document) -> Result<(), IndexError> {
        if self.by_id.contains_key(&doc.doc_id) {
            return Err(IndexError::DuplicateDocId(doc.doc_id));
        }
        self.by_id.insert(doc.doc_id.clone(), self.docs.len());
        self.docs.push(doc);
        Ok(())
    }

    /// Reads a JSON-lines corpus: one object per line with fields
    /// `doc_id` and `text`. Blank lines are skipped.
    pub fn read_jsonl(path: impl AsRef<Path>, cfg: &TokenizerConfig) -> Result<Self, IndexError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        let mut corpus = Corpus::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: JsonlDoc = serde_json::from_str(&line).map_err(|e| IndexError::Corpus {
                path: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })?;
            let doc = Document::new(parsed.doc_id, parsed.text, cfg)?;
            corpus.push(doc).map_err(|e| IndexError::Corpus {
                path: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(corpus)
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i])
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// A bag-of-words query: ordered `(term, weight)` pairs. Duplicate terms are
/// allowed and their contributions accumulate during scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedQuery {
    pub qid: String,
    pub terms: Vec<(String, f64)>,
}

impl WeightedQuery {
    pub fn new(qid: impl Into<String>, terms: Vec<(String, f64)>) -> Result<Self, IndexError> {
        let qid = qid.into();
        for (term, weight) in &terms {
            if !weight.is_finite() || *weight < 0.0 {
                return Err(IndexError::NegativeWeight {
                    qid,
                    term: term.clone(),
                    weight: *weight,
                });
            }
        }
        Ok(WeightedQuery { qid, terms })
    }

    /// Tokenizes `text` and assigns every token weight 1.0.
    pub fn from_text(qid: impl Into<String>, text: &str, cfg: &TokenizerConfig) -> Self {
        let terms = tokenize(text, cfg).into_iter().map(|t| (t, 1.0)).collect();
        WeightedQuery {
            qid: qid.into(),
            terms,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// One entry of a ranked result list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc {
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
}

/// An ordered result list for one query. Ranks are consecutive from 1,
/// scores are nonincreasing, ties are broken by ascending doc_id at
/// construction time, and doc_ids are unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub qid: String,
    pub entries: Vec<RankedDoc>,
    pub run_tag: String,
}

impl Ranking {
    pub fn empty(qid: impl Into<String>, run_tag: impl Into<String>) -> Self {
        Ranking {
            qid: qid.into(),
            entries: Vec::new(),
            run_tag: run_tag.into(),
        }
    }

    /// Builds a ranking from unordered `(doc_id, score)` pairs: sorts by
    /// descending score with ties broken by ascending doc_id, then assigns
    /// ranks 1..n. Rejects NaN scores and duplicate doc_ids.
    pub fn from_scores(
        qid: impl Into<String>,
        run_tag: impl Into<String>,
        mut scored: Vec<(String, f64)>,
    ) -> Result<Self, IndexError> {
        let qid = qid.into();
        for (doc_id, score) in &scored {
            if score.is_nan() {
                return Err(IndexError::InvalidRanking {
                    qid,
                    reason: format!("NaN score for doc {doc_id:?}"),
                });
            }
        }
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores are non-NaN")
                .then_with(|| a.0.cmp(&b.0))
        });
        for pair in scored.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(IndexError::InvalidRanking {
                    qid,
                    reason: format!("duplicate doc_id {:?}", pair[0].0),
                });
            }
        }
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, score))| RankedDoc {
                doc_id,
                rank: (i + 1) as u32,
                score,
            })
            .collect();
        Ok(Ranking {
            qid,
            entries,
            run_tag: run_tag.into(),
        })
    }

    /// Checks the ranking invariants: consecutive ranks from 1,
    /// nonincreasing scores, unique doc_ids.
    pub fn validate(&self) -> Result<(), IndexError> {
        let mut seen = std::collections::HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.rank as usize != i + 1 {
                return Err(IndexError::InvalidRanking {
                    qid: self.qid.clone(),
                    reason: format!("rank {} at position {} (expected {})", e.rank, i, i + 1),
                });
            }
            if e.score.is_nan() {
                return Err(IndexError::InvalidRanking {
                    qid: self.qid.clone(),
                    reason: format!("NaN score for doc {:?}", e.doc_id),
                });
            }
            if !seen.insert(e.doc_id.as_str()) {
                return Err(IndexError::InvalidRanking {
                    qid: self.qid.clone(),
                    reason: format!("duplicate doc_id {:?}", e.doc_id),
                });
            }
        }
        for pair in self.entries.windows(2) {
            if pair[1].score > pair[0].score {
                return Err(IndexError::InvalidRanking {
                    qid: self.qid.clone(),
                    reason: format!(
                        "score increases from rank {} to {}",
                        pair[0].rank, pair[1].rank
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn truncate(&mut self, k: usize) {
        self.entries.truncate(k);
    }

    pub fn with_tag(mut self, run_tag: impl Into<String>) -> Self {
        self.run_tag = run_tag.into();
        self
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    /// Renders the ranking in TREC run format, one line per entry, scores at
    /// fixed 6-decimal precision.
    pub fn to_trec(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            writeln!(
                out,
                "{} Q0 {} {} {:.6} {}",
                self.qid, e.doc_id, e.rank, e.score, self.run_tag
            )
            .expect("string write");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_plain() -> TokenizerConfig {
        TokenizerConfig {
            lowercase: true,
            stopwords: StopwordFilter::None,
            stemming: false,
        }
    }

    #[test]
    fn document_counts_tokens() {
        let d = Document::new("d1", "Do Goldfish grow?", &cfg_plain()).unwrap();
        assert_eq!(d.length_tokens, 3);
    }

    #[test]
    fn corpus_rejects_duplicate_ids() {
        let mut c = Corpus::new();
        c.push(Document::new("d1", "a", &cfg_plain()).unwrap())
            .unwrap();
        let err = c
            .push(Document::new("d1", "b", &cfg_plain()).unwrap())
            .unwrap_err();
        assert!(err.to_string().contains("d1"));
    }

    #[test]
    fn weighted_query_rejects_negative_weight() {
        let err = WeightedQuery::new("q1", vec![("a".into(), -0.5)]).unwrap_err();
        assert!(err.to_string().contains("negative weight"));
    }

    #[test]
    fn ranking_sorts_desc_with_doc_id_ties() {
        let r = Ranking::from_scores(
            "q1",
            "t",
            vec![("b".into(), 1.0), ("a".into(), 1.0), ("c".into(), 2.0)],
        )
        .unwrap();
        let ids: Vec<_> = r.doc_ids().collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert_eq!(r.entries[0].rank, 1);
        r.validate().unwrap();
    }

    #[test]
    fn ranking_rejects_duplicates_and_nan() {
        assert!(
            Ranking::from_scores("q1", "t", vec![("a".into(), 1.0), ("a".into(), 0.5)]).is_err()
        );
        assert!(Ranking::from_scores("q1", "t", vec![("a".into(), f64::NAN)]).is_err());
    }
}
