//! Greedy one-to-one fuzzy token matching.
//!
//! A predicted token matches a reference token when their Levenshtein
//! distance is at most `θ` times the reference token length (in Unicode
//! scalar values). Matching walks predicted tokens in order and pairs each
//! with the first still-unmatched reference token that is within threshold;
//! a reference token can be used at most once.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Edit-distance ratio threshold for token matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig<F = f64> {
    /// Maximum Levenshtein distance as a proportion of the reference token
    /// length. `0.2` tolerates roughly one error in five characters.
    pub theta: F,
}

impl<F: Scalar> Default for MatchConfig<F> {
    fn default() -> Self {
        Self {
            theta: F::constant(0.2),
        }
    }
}

impl<F: Scalar> MatchConfig<F> {
    /// Returns an error message when θ is outside `[0, 1]` or non-finite.
    pub fn validate(&self) -> Result<(), String> {
        if !self.theta.is_finite() || self.theta < F::zero() || self.theta > F::one() {
            Err(format!("theta must lie in [0, 1], got {}", self.theta))
        } else {
            Ok(())
        }
    }
}

/// Result of greedy matching of one predicted pool against one reference
/// pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchOutcome {
    /// Number of matched pairs.
    pub tp: usize,
    /// `(gt_index, pred_index)` pairs, in prediction order.
    pub matched_pairs: Vec<(usize, usize)>,
    /// Reference pool size.
    pub gt_count: usize,
    /// Prediction pool size.
    pub pred_count: usize,
}

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    if a == b {
        return 0;
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }

    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diagonal = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            let substitution = diagonal + usize::from(ca != cb);
            row[j + 1] = substitution.min(above + 1).min(row[j] + 1);
            diagonal = above;
        }
    }
    row[b.len()]
}

/// True when `pred_token` is within the θ-proportional edit distance of
/// `gt_token`. The comparison is a plain `≤` with no epsilon.
pub fn is_fuzzy_match<F: Scalar>(gt_token: &str, pred_token: &str, config: &MatchConfig<F>) -> bool {
    let distance = levenshtein(gt_token, pred_token);
    let gt_len = gt_token.chars().count();
    F::from_count(distance) <= config.theta * F::from_count(gt_len)
}

/// Greedy one-to-one matching of predicted tokens against reference tokens.
///
/// Predicted tokens are consumed in order; each takes the first unmatched
/// reference token (in index order) that it fuzzy-matches. Order dependence
/// is intentional and part of the metric definition.
pub fn match_tokens<F: Scalar, S: AsRef<str>>(
    gt: &[S],
    pred: &[S],
    config: &MatchConfig<F>,
) -> MatchOutcome {
    let mut matched_gt = vec![false; gt.len()];
    let mut matched_pairs = Vec::new();
    for (pred_idx, pred_token) in pred.iter().enumerate() {
        for (gt_idx, gt_token) in gt.iter().enumerate() {
            if matched_gt[gt_idx] {
                continue;
            }
            if is_fuzzy_match(gt_token.as_ref(), pred_token.as_ref(), config) {
                matched_gt[gt_idx] = true;
                matched_pairs.push((gt_idx, pred_idx));
                break;
            }
        }
    }
    MatchOutcome {
        tp: matched_pairs.len(),
        matched_pairs,
        gt_count: gt.len(),
        pred_count: pred.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn cfg(theta: f64) -> MatchConfig<f64> {
        MatchConfig { theta }
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("", ""), 0);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("dominus", "dominvs"), 1);
        assert_eq!(levenshtein("ars", "lex"), 3);
        // counted in scalar values, not bytes
        assert_eq!(levenshtein("præ", "prae"), 2);
    }

    #[test]
    fn default_theta_is_two_tenths() {
        assert_eq!(MatchConfig::<f64>::default().theta, 0.2);
        assert_eq!(MatchConfig::<f32>::default().theta, 0.2_f32);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.0).validate().is_ok());
        assert!(cfg(1.0).validate().is_ok());
        assert!(cfg(-0.1).validate().is_err());
        assert!(cfg(1.5).validate().is_err());
        assert!(cfg(f64::NAN).validate().is_err());
    }

    #[test]
    fn fuzzy_match_threshold_cases() {
        assert!(is_fuzzy_match("dominus", "dominus", &cfg(0.2)));
        // distance 1 ≤ 0.2 · 7 = 1.4
        assert!(is_fuzzy_match("dominus", "dominvs", &cfg(0.2)));
        // distance 3 > 0.2 · 3 = 0.6
        assert!(!is_fuzzy_match("ars", "lex", &cfg(0.2)));
        // boundary: distance 1 ≤ 0.25 · 4 exactly
        assert!(is_fuzzy_match("abcd", "abxd", &cfg(0.25)));
        assert!(!is_fuzzy_match("abcd", "abxd", &cfg(0.2)));
        // one error in five characters at the default θ
        assert!(is_fuzzy_match("longa", "longe", &cfg(0.2)));
    }

    #[test]
    fn exact_matching_at_theta_zero() {
        let gt = ["a", "b", "c"].map(str::to_string);
        let pred = ["a", "b", "d"].map(str::to_string);
        let outcome = match_tokens(&gt, &pred, &cfg(0.0));
        assert_eq!(outcome.tp, 2);
        assert_eq!(outcome.matched_pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn empty_reference_matches_nothing() {
        let outcome = match_tokens::<f64, String>(&[], &["x".to_string()], &cfg(0.2));
        assert_eq!(outcome.tp, 0);
        assert_eq!(outcome.pred_count, 1);
    }

    #[test]
    fn greedy_takes_first_admissible_reference() {
        // "abce" is distance 1 from "abcd" (≤ 0.25·4), so the scan stops
        // there instead of at the exact match later in the list.
        let gt = ["abcd", "abce"].map(str::to_string);
        let pred = ["abce"].map(str::to_string);
        let outcome = match_tokens(&gt, &pred, &cfg(0.25));
        assert_eq!(outcome.tp, 1);
        assert_eq!(outcome.matched_pairs, vec![(0, 0)]);
    }

    #[test]
    fn reference_tokens_used_at_most_once() {
        let gt = ["ars"].map(str::to_string);
        let pred = ["ars", "ars"].map(str::to_string);
        let outcome = match_tokens(&gt, &pred, &cfg(0.2));
        assert_eq!(outcome.tp, 1);
        let gt_indices: HashSet<_> = outcome.matched_pairs.iter().map(|p| p.0).collect();
        assert_eq!(gt_indices.len(), outcome.matched_pairs.len());
    }

    #[test]
    fn tp_bounded_by_both_sides() {
        let gt = ["a", "b"].map(str::to_string);
        let pred = ["a", "b", "a", "b"].map(str::to_string);
        let outcome = match_tokens(&gt, &pred, &cfg(0.0));
        assert_eq!(outcome.tp, 2);
        assert!(outcome.tp <= outcome.gt_count.min(outcome.pred_count));
    }
}
