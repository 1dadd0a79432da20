//! Smoothed sentence-level BLEU between two token lists.
//!
//! Modified n-gram precisions `p_1 .. p_max_order` are combined by geometric
//! mean. Unigram precision is left unsmoothed; higher orders use add-one
//! smoothing `(matches + 1) / (possible + 1)`. Orders for which the candidate
//! has no n-grams at all are left out of the mean. The result is scaled by
//! the brevity penalty `exp(min(0, 1 - |ref| / |cand|))` when enabled.

use std::borrow::Cow;
use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::fold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BleuError {
    #[error("BLEU needs a non-empty candidate and reference")]
    EmptyInput,
    #[error("max n-gram order must be at least 1")]
    ZeroOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Smoothing {
    #[default]
    AddOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_order: usize,
    pub smoothing: Smoothing,
    pub brevity_penalty: bool,
    pub case_fold: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_order: 3,
            smoothing: Smoothing::AddOne,
            brevity_penalty: true,
            case_fold: false,
        }
    }
}

impl BleuConfig {
    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }

    pub fn with_brevity_penalty(mut self, on: bool) -> Self {
        self.brevity_penalty = on;
        self
    }

    pub fn with_case_fold(mut self, on: bool) -> Self {
        self.case_fold = on;
        self
    }
}

/// Counts every contiguous n-gram of `tokens`. Panics if `n == 0`.
pub fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    assert!(n >= 1, "n-gram order must be at least 1");
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn folded<S: AsRef<str>>(tokens: &[S], case_fold: bool) -> Vec<Cow<'_, str>> {
    tokens.iter().map(|t| fold(t.as_ref(), case_fold)).collect()
}

/// Clipped n-gram matches of `candidate` against `reference`, and the number
/// of candidate n-grams. Each reference n-gram can be matched once.
fn clipped_matches<T: Eq>(candidate: &[T], reference: &[T], n: usize, used: &mut Vec<bool>) -> (usize, usize) {
    let possible = candidate.len() + 1 - n;
    if reference.len() < n {
        return (0, possible);
    }
    used.clear();
    used.resize(reference.len() + 1 - n, false);
    let mut matches = 0;
    for gram in candidate.windows(n) {
        let hit = reference
            .windows(n)
            .zip(used.iter_mut())
            .find(|(r, u)| !**u && *r == gram);
        if let Some((_, u)) = hit {
            *u = true;
            matches += 1;
        }
    }
    (matches, possible)
}

/// BLEU over tokens that are already normalized for comparison.
pub fn score_tokens<T: Eq>(candidate: &[T], reference: &[T], cfg: &BleuConfig) -> Result<f64, BleuError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(BleuError::EmptyInput);
    }
    if cfg.max_order == 0 {
        return Err(BleuError::ZeroOrder);
    }
    let mut used = Vec::new();
    let mut log_sum = 0.0f64;
    let mut orders = 0usize;
    for n in 1..=cfg.max_order.min(candidate.len()) {
        let (matches, possible) = clipped_matches(candidate, reference, n, &mut used);
        let precision = if n == 1 {
            if matches == 0 {
                return Ok(0.0);
            }
            matches as f64 / possible as f64
        } else {
            match cfg.smoothing {
                Smoothing::AddOne => (matches + 1) as f64 / (possible + 1) as f64,
            }
        };
        log_sum += precision.ln();
        orders += 1;
    }

    let mut score = (log_sum / orders as f64).exp();
    if cfg.brevity_penalty {
        let ratio = reference.len() as f64 / candidate.len() as f64;
        score *= (1.0 - ratio).min(0.0).exp();
    }
    Ok(score.clamp(0.0, 1.0))
}

/// Sentence BLEU of `candidate` scored against the single `reference`.
pub fn sentence_bleu<C, R>(candidate: &[C], reference: &[R], cfg: &BleuConfig) -> Result<f64, BleuError>
where
    C: AsRef<str>,
    R: AsRef<str>,
{
    score_tokens(&folded(candidate, cfg.case_fold), &folded(reference, cfg.case_fold), cfg)
}
