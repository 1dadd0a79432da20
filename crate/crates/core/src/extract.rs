//! Alignment-consistent phrase-pair extraction.
//!
//! A pair of spans is consistent with an alignment when no link has exactly
//! one endpoint inside the pair and at least one link lies inside both spans.
//! Extraction walks every target span, derives the tightest source span
//! covering its links, checks consistency, and then optionally widens the
//! source side across unaligned neighbours.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_alignment, AlignmentSet, ModelError, PhrasePair, Sentence, Span};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Alignment(#[from] ModelError),
    #[error("phrase length limits must be at least 1")]
    ZeroLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractConfig {
    /// `None` means unlimited.
    pub max_src_len: Option<usize>,
    pub max_tgt_len: Option<usize>,
    /// Also emit source spans widened over adjacent unaligned source tokens.
    /// When off, every emitted source span starts and ends on an aligned token.
    pub include_unaligned_extensions: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            max_src_len: None,
            max_tgt_len: None,
            include_unaligned_extensions: true,
        }
    }
}

impl ExtractConfig {
    fn validate(&self) -> Result<(), ExtractError> {
        if self.max_src_len == Some(0) || self.max_tgt_len == Some(0) {
            return Err(ExtractError::ZeroLimit);
        }
        Ok(())
    }

    fn src_ok(&self, span: Span) -> bool {
        self.max_src_len.map_or(true, |m| span.len() <= m)
    }
}

/// True iff no link crosses the pair's boundary and at least one link falls
/// inside both spans.
pub fn is_consistent(pair: &PhrasePair, a: &AlignmentSet) -> bool {
    let mut inside = false;
    for (i, j) in a.links() {
        match (pair.src.contains(i), pair.tgt.contains(j)) {
            (true, true) => inside = true,
            (false, false) => {}
            _ => return false,
        }
    }
    inside
}

/// Extracts every consistent phrase pair of `(s, t, a)` within the configured
/// length limits, ordered by `(tgt.start, tgt.end, src.start, src.end)`.
pub fn phrase_extract(
    s: &Sentence,
    t: &Sentence,
    a: &AlignmentSet,
    cfg: &ExtractConfig,
) -> Result<Vec<PhrasePair>, ExtractError> {
    validate_alignment(a, s, t)?;
    cfg.validate()?;
    Ok(extract_unchecked(a, cfg))
}

pub(crate) fn extract_unchecked(a: &AlignmentSet, cfg: &ExtractConfig) -> Vec<PhrasePair> {
    let by_src = a.by_source();
    let by_tgt = a.by_target();
    let src_len = a.src_len();
    let tgt_len = a.tgt_len();
    let unaligned = |i: usize| by_src[i].is_empty();

    let mut out = Vec::new();
    for tgt_start in 0..tgt_len {
        let mut src_bounds: Option<(usize, usize)> = None;
        let tgt_limit = cfg.max_tgt_len.map_or(tgt_len, |m| (tgt_start + m).min(tgt_len));
        for tgt_end in tgt_start..tgt_limit {
            for &i in &by_tgt[tgt_end] {
                src_bounds = Some(match src_bounds {
                    None => (i, i),
                    Some((lo, hi)) => (lo.min(i), hi.max(i)),
                });
            }
            let Some((src_lo, src_hi)) = src_bounds else {
                continue;
            };
            // Links leaving the source span towards a target outside the span.
            let crosses = (src_lo..=src_hi)
                .flat_map(|i| by_src[i].iter())
                .any(|&j| j < tgt_start || j > tgt_end);
            if crosses {
                continue;
            }

            let tgt = Span { start: tgt_start, end: tgt_end };
            let tight = Span { start: src_lo, end: src_hi };
            if !cfg.src_ok(tight) {
                continue;
            }
            if !cfg.include_unaligned_extensions {
                out.push(PhrasePair::new(tight, tgt));
                continue;
            }
            let mut first = src_lo;
            while first > 0 && unaligned(first - 1) {
                first -= 1;
            }
            let mut last = src_hi;
            while last + 1 < src_len && unaligned(last + 1) {
                last += 1;
            }
            for start in first..=src_lo {
                for end in src_hi..=last {
                    let src = Span { start, end };
                    if cfg.src_ok(src) {
                        out.push(PhrasePair::new(src, tgt));
                    }
                }
            }
        }
    }
    debug_assert!(out.windows(2).all(|w| w[0] < w[1]));
    out
}
