//! Scoring projected relations against human annotations.
//!
//! Each projected relation is joined with the annotation for the same
//! sentence id. Annotations marked invalid only count towards the total; for
//! valid ones the projected relation phrase is scored with sentence BLEU
//! against the annotated phrase (auto = candidate, gold = reference).

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bleu::{sentence_bleu, BleuConfig, BleuError};
use crate::model::{fold, GoldAnnotation, ProjectedRelation};

pub const NUM_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no counterpart for sentence {0:?}")]
    JoinFailure(String),
    #[error("sentence {0:?} appears more than once")]
    DuplicateId(String),
    #[error(transparent)]
    Bleu(#[from] BleuError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_total: usize,
    pub n_valid: usize,
    /// Valid items whose relation could not be projected; scored 0.
    pub n_unprojectable: usize,
    pub pct_valid: Option<f64>,
    pub mean_bleu: Option<f64>,
    /// Counts for `[0, 0.1), [0.1, 0.2), ..., [0.9, 1.0]`.
    pub bins: [usize; NUM_BINS],
    pub avg_len_gold: Option<f64>,
    pub avg_len_auto: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n_pairs: usize,
    pub n_both_valid: usize,
    pub perfect_rate: Option<f64>,
    pub mean_pairwise_bleu: Option<f64>,
}

/// Histogram bin of a score in `[0, 1]`; 1.0 shares the top bin.
pub fn bin_index(score: f64) -> usize {
    ((score * NUM_BINS as f64).floor() as usize).min(NUM_BINS - 1)
}

fn index_unique<T>(items: impl IntoIterator<Item = T>, id: impl Fn(&T) -> &str) -> Result<HashMap<String, T>, EvalError> {
    let mut map = HashMap::new();
    for item in items {
        let key = id(&item).to_owned();
        if map.contains_key(&key) {
            return Err(EvalError::DuplicateId(key));
        }
        map.insert(key, item);
    }
    Ok(map)
}

/// Sum that does not depend on input order.
fn order_free_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.into_iter().sum()
}

fn mean(sum: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| sum / n as f64)
}

/// Joins items of `a` and `b` on sentence id, in ascending id order.
fn join<A, B>(
    a: HashMap<String, A>,
    mut b: HashMap<String, B>,
) -> Result<Vec<(String, A, B)>, EvalError> {
    let mut pairs = Vec::with_capacity(a.len());
    for (id, x) in a {
        let y = b.remove(&id).ok_or_else(|| EvalError::JoinFailure(id.clone()))?;
        pairs.push((id, x, y));
    }
    if let Some(id) = b.into_keys().min() {
        return Err(EvalError::JoinFailure(id));
    }
    pairs.sort_by(|x, y| x.0.cmp(&y.0));
    Ok(pairs)
}

pub fn evaluate(
    projected: impl IntoIterator<Item = ProjectedRelation>,
    gold: impl IntoIterator<Item = GoldAnnotation>,
    cfg: &BleuConfig,
) -> Result<EvalReport, EvalError> {
    let projected = index_unique(projected, |p| &p.sentence_id)?;
    let gold = index_unique(gold, |g| g.sentence_id())?;
    let pairs = join(projected, gold)?;

    let n_total = pairs.len();
    let mut scores = Vec::new();
    let mut bins = [0; NUM_BINS];
    let mut n_unprojectable = 0;
    let (mut gold_words, mut auto_words) = (0usize, 0usize);
    for (_, auto, gold) in &pairs {
        if !gold.is_valid() {
            continue;
        }
        let auto_rel = auto.rel.tokens();
        let score = if auto_rel.is_empty() {
            n_unprojectable += 1;
            0.0
        } else {
            sentence_bleu(auto_rel, gold.gold_rel(), cfg)?
        };
        bins[bin_index(score)] += 1;
        scores.push(score);
        gold_words += gold.gold_rel().len();
        auto_words += auto_rel.len();
    }
    let n_valid = scores.len();
    Ok(EvalReport {
        n_total,
        n_valid,
        n_unprojectable,
        pct_valid: mean(100.0 * n_valid as f64, n_total),
        mean_bleu: mean(order_free_sum(scores), n_valid),
        bins,
        avg_len_gold: mean(gold_words as f64, n_valid),
        avg_len_auto: mean(auto_words as f64, n_valid),
    })
}

/// Agreement between two annotators over the same sentences.
pub fn agreement(
    annotations_a: impl IntoIterator<Item = GoldAnnotation>,
    annotations_b: impl IntoIterator<Item = GoldAnnotation>,
    cfg: &BleuConfig,
) -> Result<AgreementReport, EvalError> {
    let a = index_unique(annotations_a, |g| g.sentence_id())?;
    let b = index_unique(annotations_b, |g| g.sentence_id())?;
    let pairs = join(a, b)?;

    let same_phrase = |x: &[String], y: &[String]| {
        x.len() == y.len() && x.iter().zip(y).all(|(p, q)| fold(p, cfg.case_fold) == fold(q, cfg.case_fold))
    };
    let mut perfect = 0;
    let mut scores = Vec::new();
    for (_, x, y) in &pairs {
        match (x.is_valid(), y.is_valid()) {
            (true, true) => {
                if same_phrase(x.gold_rel(), y.gold_rel()) {
                    perfect += 1;
                }
                scores.push(sentence_bleu(x.gold_rel(), y.gold_rel(), cfg)?);
            }
            (false, false) => perfect += 1,
            _ => {}
        }
    }
    let n_both_valid = scores.len();
    Ok(AgreementReport {
        n_pairs: pairs.len(),
        n_both_valid,
        perfect_rate: mean(100.0 * perfect as f64, pairs.len()),
        mean_pairwise_bleu: mean(order_free_sum(scores), n_both_valid),
    })
}

fn cell(value: Option<f64>, digits: usize, suffix: &str) -> String {
    value.map_or_else(|| "-".to_owned(), |v| format!("{v:.digits$}{suffix}"))
}

impl EvalReport {
    /// One-row results table: valid rate, BLEU, and average relation length.
    pub fn to_table(&self, label: &str) -> String {
        let row = [
            label.to_owned(),
            cell(self.pct_valid, 1, "%"),
            cell(self.mean_bleu, 2, ""),
            cell(self.avg_len_gold, 1, ""),
            cell(self.avg_len_auto, 1, ""),
        ];
        let header = ["Language", "% valid", "BLEU", "Gold len", "Auto len"];
        let widths: Vec<usize> = header
            .iter()
            .zip(&row)
            .map(|(h, r)| h.chars().count().max(r.chars().count()))
            .collect();
        let line = |cells: &[&str]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = line(&header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out += &line(&rule.iter().map(String::as_str).collect::<Vec<_>>());
        out += &line(&row.iter().map(String::as_str).collect::<Vec<_>>());
        out
    }

    /// BLEU histogram, one `lower-upper<TAB>count` line per bin.
    pub fn bins_table(&self) -> String {
        let mut out = String::new();
        for (k, count) in self.bins.iter().enumerate() {
            let close = if k + 1 == NUM_BINS { ']' } else { ')' };
            let _ = writeln!(
                out,
                "[{:.1},{:.1}{close}\t{count}",
                k as f64 / NUM_BINS as f64,
                (k + 1) as f64 / NUM_BINS as f64
            );
        }
        out
    }
}

impl AgreementReport {
    pub fn to_table(&self) -> String {
        format!(
            "pairs\t{}\nboth valid\t{}\nperfect agreement\t{}\nmean BLEU\t{}\n",
            self.n_pairs,
            self.n_both_valid,
            cell(self.perfect_rate, 1, "%"),
            cell(self.mean_pairwise_bleu, 2, ""),
        )
    }
}
