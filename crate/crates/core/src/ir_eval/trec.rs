//! TREC community text formats: qrels (`qid 0 docid grade`), runs
//! (`qid Q0 docid rank score tag`, scores at fixed 6-decimal precision), and
//! tab-separated topics (`qid<TAB>title`).

use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use crate::corpus_index::{RankedDoc, Ranking};

use super::{EvalError, Qrels};

fn malformed(path: &str, line_no: usize, line: &str, reason: impl Into<String>) -> EvalError {
    let mut excerpt: String = line.chars().take(80).collect();
    if line.chars().count() > 80 {
        excerpt.push('…');
    }
    EvalError::Malformed {
        path: path.to_string(),
        line: line_no,
        reason: reason.into(),
        excerpt,
    }
}

/// Parses qrels text. Grades of -1 (used by some public collections for
/// "judged, not relevant") are clamped to 0 with a warning.
pub fn parse_qrels(text: &str, path: &str) -> Result<Qrels, EvalError> {
    let mut qrels = Qrels::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(malformed(
                path,
                line_no,
                line,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let grade: i64 = fields[3]
            .parse()
            .map_err(|_| malformed(path, line_no, line, "grade is not an integer"))?;
        let grade = if grade < 0 {
            warn!("{path}:{line_no}: clamping negative grade {grade} to 0");
            0
        } else {
            u32::try_from(grade)
                .map_err(|_| malformed(path, line_no, line, "grade out of range"))?
        };
        qrels.insert(fields[0], fields[2], grade);
    }
    Ok(qrels)
}

pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_qrels(&text, &path.display().to_string())
}

/// Renders qrels in ascending (qid, doc_id) order.
pub fn write_qrels(path: impl AsRef<Path>, qrels: &Qrels) -> Result<(), EvalError> {
    let mut out = String::new();
    for qid in qrels.qids() {
        for (doc_id, grade) in qrels.judged(qid) {
            writeln!(out, "{qid} 0 {doc_id} {grade}").expect("string write");
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parses a run file into one `Ranking` per qid, in order of first
/// appearance. Enforces ranking invariants: consecutive ranks from 1 and
/// nonincreasing scores within each qid, no duplicate documents.
pub fn parse_run(text: &str, path: &str) -> Result<Vec<Ranking>, EvalError> {
    let mut rankings: Vec<Ranking> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(malformed(
                path,
                line_no,
                line,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let (qid, literal, doc_id, rank, score, tag) = (
            fields[0], fields[1], fields[2], fields[3], fields[4], fields[5],
        );
        if literal != "Q0" {
            return Err(malformed(path, line_no, line, "second field must be Q0"));
        }
        let rank: u32 = rank
            .parse()
            .map_err(|_| malformed(path, line_no, line, "rank is not an integer"))?;
        let score: f64 = score
            .parse()
            .map_err(|_| malformed(path, line_no, line, "score is not a number"))?;

        let current = match rankings.iter_mut().find(|r| r.qid == qid) {
            Some(r) => r,
            None => {
                rankings.push(Ranking::empty(qid, tag));
                rankings.last_mut().expect("just pushed")
            }
        };
        let expected_rank = current.entries.len() as u32 + 1;
        if rank != expected_rank {
            return Err(malformed(
                path,
                line_no,
                line,
                format!("rank {rank} out of sequence (expected {expected_rank})"),
            ));
        }
        if let Some(prev) = current.entries.last() {
            if score > prev.score {
                return Err(malformed(
                    path,
                    line_no,
                    line,
                    format!("score {score} exceeds previous {}", prev.score),
                ));
            }
        }
        if current.entries.iter().any(|e| e.doc_id == doc_id) {
            return Err(malformed(
                path,
                line_no,
                line,
                format!("duplicate doc_id {doc_id:?} for qid {qid:?}"),
            ));
        }
        current.entries.push(RankedDoc {
            doc_id: doc_id.to_string(),
            rank,
            score,
        });
    }
    Ok(rankings)
}

pub fn read_run(path: impl AsRef<Path>) -> Result<Vec<Ranking>, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_run(&text, &path.display().to_string())
}

pub fn write_run(path: impl AsRef<Path>, rankings: &[Ranking]) -> Result<(), EvalError> {
    let mut out = String::new();
    for r in rankings {
        out.push_str(&r.to_trec());
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parses tab-separated topics: `qid<TAB>title`, one per line,
/// '#'-prefixed comments allowed.
pub fn parse_topics(text: &str, path: &str) -> Result<Vec<(String, String)>, EvalError> {
    let mut topics = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (qid, title) = line
            .split_once('\t')
            .ok_or_else(|| malformed(path, line_no, line, "expected qid<TAB>title"))?;
        let (qid, title) = (qid.trim(), title.trim());
        if qid.is_empty() || title.is_empty() {
            return Err(malformed(path, line_no, line, "empty qid or title"));
        }
        topics.push((qid.to_string(), title.to_string()));
    }
    Ok(topics)
}

pub fn read_topics(path: impl AsRef<Path>) -> Result<Vec<(String, String)>, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_topics(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_file_round_trips_byte_identically() {
        let text = "q1 Q0 d2 1 2.500000 tag\nq1 Q0 d1 2 1.250000 tag\nq2 Q0 d3 1 0.016393 tag\n";
        let rankings = parse_run(text, "mem").unwrap();
        assert_eq!(rankings.len(), 2);
        let rendered: String = rankings.iter().map(Ranking::to_trec).collect();
        assert_eq!(rendered, text);
    }

    #[test]
    fn run_rank_gap_is_rejected_with_line_number() {
        let text = "q1 Q0 d2 1 2.0 tag\nq1 Q0 d1 3 1.0 tag\n";
        let err = parse_run(text, "mem").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mem:2"), "{msg}");
        assert!(msg.contains("rank 3"), "{msg}");
    }

    #[test]
    fn run_increasing_score_is_rejected() {
        let text = "q1 Q0 d2 1 1.0 tag\nq1 Q0 d1 2 2.0 tag\n";
        assert!(parse_run(text, "mem").is_err());
    }

    #[test]
    fn run_duplicate_doc_is_rejected() {
        let text = "q1 Q0 d2 1 2.0 tag\nq1 Q0 d2 2 1.0 tag\n";
        assert!(parse_run(text, "mem").is_err());
    }

    #[test]
    fn run_field_count_errors_carry_excerpt() {
        let err = parse_run("q1 Q0 d2 1 2.0\n", "mem").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 6 fields"), "{msg}");
        assert!(msg.contains("q1 Q0 d2 1 2.0"), "{msg}");
    }

    #[test]
    fn qrels_round_trip() {
        let text = "q1 0 d1 2\nq1 0 d2 0\nq2 0 d1 1\n";
        let qrels = parse_qrels(text, "mem").unwrap();
        assert_eq!(qrels.grade("q1", "d1"), Some(2));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qrels.txt");
        write_qrels(&path, &qrels).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    }

    #[test]
    fn qrels_negative_grade_clamps_to_zero() {
        // Shape of public TREC collections that mark "judged, not relevant"
        // with -1; see the bundled excerpt fixture.
        let fixture = include_str!("../../fixtures/trec/qrels_excerpt.txt");
        let qrels = parse_qrels(fixture, "fixture").unwrap();
        assert_eq!(qrels.grade("351", "FT931-4241"), Some(0));
        assert_eq!(qrels.grade("351", "FT921-3275"), Some(2));
        assert_eq!(qrels.grade("352", "FT921-8844"), Some(0));
    }

    #[test]
    fn qrels_malformed_line_is_reported() {
        let err = parse_qrels("q1 0 d1\n", "mem").unwrap_err();
        assert!(err.to_string().contains("mem:1"));
    }

    #[test]
    fn topics_parse_and_reject_missing_tab() {
        let topics = parse_topics(
            "q1\tdo goldfish grow\n# comment\nq2\tglacier melting\n",
            "mem",
        )
        .unwrap();
        assert_eq!(topics.len(), 2);
        assert_eq!(
            topics[0],
            ("q1".to_string(), "do goldfish grow".to_string())
        );
        assert!(parse_topics("q1 no tab here\n", "mem").is_err());
    }
}
