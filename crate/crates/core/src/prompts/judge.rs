//! Pairwise interpretability judging of query reformulations: prompt
//! construction, verdict parsing, and order-reversed double judging to
//! offset position bias.

use crate::generation::Generator;

use super::PromptError;

/// Renders the pairwise comparison prompt. Both reformulations must be
/// nonempty.
pub fn build_interpretability_prompt(
    original_query: &str,
    reformulation_a: &str,
    reformulation_b: &str,
) -> Result<String, PromptError> {
    if reformulation_a.is_empty() || reformulation_b.is_empty() {
        return Err(PromptError::EmptyReformulation);
    }
    Ok(format!(
        "Which one of the following query reformulations for the original query {original_query} \
         is more interpretable and easy to comprehend and understand for a reader. First analyze \
         both the reformulations and provide a short explanation why one is more interpretable \
         than the other and then specify reformulation A or reformulation B as your final option\n\
         Reformulation A: {reformulation_a}\n\
         Reformulation B: {reformulation_b}\n\
         Specify either A or B."
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    A,
    B,
    Undecided,
}

/// Accepts a final standalone `A` or `B` token (trailing punctuation
/// tolerated); anything else is undecided.
pub fn parse_verdict(text: &str) -> Verdict {
    let last = text
        .split_whitespace()
        .next_back()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()));
    match last {
        Some("A") => Verdict::A,
        Some("B") => Verdict::B,
        _ => Verdict::Undecided,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairVerdict {
    A,
    B,
    /// The two orderings disagreed, or a verdict was unparseable.
    Inconsistent,
}

/// Judges the pair in both presentation orders and maps the swapped verdict
/// back; disagreements are labeled inconsistent.
pub fn judge_pair_both_orders(
    original_query: &str,
    reformulation_a: &str,
    reformulation_b: &str,
    generator: &dyn Generator,
) -> Result<PairVerdict, PromptError> {
    let forward = build_interpretability_prompt(original_query, reformulation_a, reformulation_b)?;
    let reversed = build_interpretability_prompt(original_query, reformulation_b, reformulation_a)?;
    let first = parse_verdict(&generator.complete(&forward)?);
    let second = parse_verdict(&generator.complete(&reversed)?);
    // In the reversed order, slot A holds reformulation_b.
    let second = match second {
        Verdict::A => Verdict::B,
        Verdict::B => Verdict::A,
        Verdict::Undecided => Verdict::Undecided,
    };
    Ok(match (first, second) {
        (Verdict::A, Verdict::A) => PairVerdict::A,
        (Verdict::B, Verdict::B) => PairVerdict::B,
        _ => PairVerdict::Inconsistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::GenError;
    use std::sync::Mutex;

    #[test]
    fn prompt_contains_slots_and_final_line() {
        let p = build_interpretability_prompt("do goldfish grow", "kw one", "nl two").unwrap();
        assert!(p.contains("do goldfish grow"));
        assert!(p.contains("Reformulation A: kw one"));
        assert!(p.contains("Reformulation B: nl two"));
        assert!(p.ends_with("Specify either A or B."));
    }

    #[test]
    fn empty_reformulation_is_rejected() {
        assert!(build_interpretability_prompt("q", "", "b").is_err());
        assert!(build_interpretability_prompt("q", "a", "").is_err());
    }

    #[test]
    fn verdict_parses_final_standalone_token() {
        assert_eq!(parse_verdict("Specify either A or B.\nA"), Verdict::A);
        assert_eq!(parse_verdict("after analysis the answer is B."), Verdict::B);
        assert_eq!(parse_verdict(""), Verdict::Undecided);
        assert_eq!(parse_verdict("no verdict here"), Verdict::Undecided);
    }

    struct ScriptedGenerator {
        outputs: Mutex<Vec<String>>,
    }

    impl ScriptedGenerator {
        fn new(outputs: &[&str]) -> Self {
            ScriptedGenerator {
                outputs: Mutex::new(outputs.iter().rev().map(|s| s.to_string()).collect()),
            }
        }
    }

    impl Generator for ScriptedGenerator {
        fn complete(&self, _prompt: &str) -> Result<String, GenError> {
            Ok(self.outputs.lock().unwrap().pop().unwrap_or_default())
        }
    }

    #[test]
    fn order_swapped_replays_map_to_consistent_winner() {
        // First order says B; reversed order says A, which maps back to B.
        let generator = ScriptedGenerator::new(&["B", "A"]);
        let verdict = judge_pair_both_orders("q", "alpha", "beta", &generator).unwrap();
        assert_eq!(verdict, PairVerdict::B);
    }

    #[test]
    fn position_dependent_answers_are_inconsistent() {
        // Always answers "A" regardless of order: position bias.
        let generator = ScriptedGenerator::new(&["A", "A"]);
        let verdict = judge_pair_both_orders("q", "alpha", "beta", &generator).unwrap();
        assert_eq!(verdict, PairVerdict::Inconsistent);
    }

    #[test]
    fn undecided_verdicts_are_inconsistent() {
        let generator = ScriptedGenerator::new(&["", "A"]);
        let verdict = judge_pair_both_orders("q", "alpha", "beta", &generator).unwrap();
        assert_eq!(verdict, PairVerdict::Inconsistent);
    }
}
