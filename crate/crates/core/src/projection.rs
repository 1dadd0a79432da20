//! Projection of English phrases onto the source sentence.
//!
//! The preferred route picks, among extracted phrase pairs whose target side
//! shares at least one word with the query phrase, the target phrase with the
//! highest BLEU against the query, and returns the shortest source phrase
//! paired with it. When no target phrase overlaps the query at all, every
//! query word is mapped through the raw word alignment instead, which may
//! produce a non-contiguous source phrase.

use std::borrow::Cow;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bleu::{score_tokens, BleuConfig, BleuError};
use crate::extract::{extract_unchecked, ExtractConfig, ExtractError};
use crate::model::{
    fold, validate_alignment, AlignmentSet, ModelError, PhrasePair, ProjectedPhrase,
    ProjectedRelation, ProjectionMethod, RelationTriple, Sentence, SlotProjection, Span,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProjectionError {
    #[error("query phrase is empty")]
    EmptyPhrase,
    #[error("no source token is aligned to the phrase")]
    EmptyProjection,
    #[error("triple belongs to sentence {triple:?} but was paired with sentence {sentence:?}")]
    SentenceMismatch { triple: String, sentence: String },
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Bleu(#[from] BleuError),
}

impl From<ModelError> for ProjectionError {
    fn from(e: ModelError) -> Self {
        ProjectionError::Extract(ExtractError::Alignment(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub bleu: BleuConfig,
    pub extract: ExtractConfig,
}

/// Every occurrence of `phrase` as a contiguous run of `t`.
pub fn locate_in_target<S: AsRef<str>>(t: &Sentence, phrase: &[S]) -> Vec<Span> {
    if phrase.is_empty() || phrase.len() > t.len() {
        return Vec::new();
    }
    t.tokens()
        .windows(phrase.len())
        .enumerate()
        .filter(|(_, w)| w.iter().zip(phrase).all(|(a, b)| a == b.as_ref()))
        .map(|(start, _)| Span {
            start,
            end: start + phrase.len() - 1,
        })
        .collect()
}

/// Maps each word of `phrase` to target positions (leftmost unused match
/// first) and returns every source token linked to those positions, in
/// source order.
pub fn word_alignment_projection<S: AsRef<str>>(
    s: &Sentence,
    t: &Sentence,
    a: &AlignmentSet,
    phrase: &[S],
    case_fold: bool,
) -> Result<ProjectedPhrase, ProjectionError> {
    if phrase.is_empty() {
        return Err(ProjectionError::EmptyPhrase);
    }
    validate_alignment(a, s, t)?;
    let target: Vec<_> = t.tokens().iter().map(|w| fold(w, case_fold)).collect();
    let mut used = vec![false; t.len()];
    for word in phrase {
        let word = fold(word.as_ref(), case_fold);
        if let Some(j) = (0..t.len()).find(|&j| !used[j] && target[j] == word) {
            used[j] = true;
        }
    }

    let mut sources: Vec<usize> = a.links().filter(|&(_, j)| used[j]).map(|(i, _)| i).collect();
    sources.sort_unstable();
    sources.dedup();
    let (Some(&first), Some(&last)) = (sources.first(), sources.last()) else {
        return Err(ProjectionError::EmptyProjection);
    };
    let contiguous = last - first + 1 == sources.len();
    Ok(ProjectedPhrase {
        tokens: sources.iter().map(|&i| s.tokens()[i].clone()).collect(),
        source_span: contiguous.then_some(Span { start: first, end: last }),
        method: ProjectionMethod::WordAlignFallback,
        bleu_score: None,
    })
}

/// Maps the (folded) target tokens and query words to small integer ids so
/// that n-gram comparisons are integer comparisons.
fn intern<S: AsRef<str>>(target: &[String], phrase: &[S], case_fold: bool) -> (Vec<u32>, Vec<u32>) {
    let mut ids: HashMap<Cow<'_, str>, u32> = HashMap::new();
    let mut id_of = |w: Cow<'_, str>| {
        let next = ids.len() as u32;
        *ids.entry(w.into_owned().into()).or_insert(next)
    };
    let target_ids = target.iter().map(|w| id_of(fold(w, case_fold))).collect();
    let query_ids = phrase.iter().map(|w| id_of(fold(w.as_ref(), case_fold))).collect();
    (target_ids, query_ids)
}

/// Projects `phrase` using an already extracted, canonically ordered phrase
/// set `pairs` for `(s, t, a)`.
pub fn project_with_pairs<S: AsRef<str>>(
    s: &Sentence,
    t: &Sentence,
    a: &AlignmentSet,
    pairs: &[PhrasePair],
    phrase: &[S],
    cfg: &ProjectionConfig,
) -> Result<ProjectedPhrase, ProjectionError> {
    if phrase.is_empty() {
        return Err(ProjectionError::EmptyPhrase);
    }
    let case_fold = cfg.bleu.case_fold;
    let (target_ids, query_ids) = intern(t.tokens(), phrase, case_fold);
    // overlap_prefix[k] counts target positions before k holding a query word
    let mut overlap_prefix = Vec::with_capacity(t.len() + 1);
    overlap_prefix.push(0usize);
    for id in &target_ids {
        let hit = usize::from(query_ids.contains(id));
        overlap_prefix.push(overlap_prefix.last().unwrap() + hit);
    }

    let mut best: Option<(Span, f64)> = None;
    let mut last_tgt = None;
    for pair in pairs {
        // pairs sharing a target span are adjacent and score identically
        if last_tgt == Some(pair.tgt) {
            continue;
        }
        last_tgt = Some(pair.tgt);
        if overlap_prefix[pair.tgt.end + 1] == overlap_prefix[pair.tgt.start] {
            continue;
        }
        let candidate = &target_ids[pair.tgt.start..=pair.tgt.end];
        let score = score_tokens(candidate, &query_ids, &cfg.bleu)?;
        if best.map_or(true, |(_, top)| score > top) {
            best = Some((pair.tgt, score));
        }
    }

    let Some((tgt, score)) = best else {
        return word_alignment_projection(s, t, a, phrase, case_fold);
    };
    let src = pairs
        .iter()
        .filter(|p| p.tgt == tgt)
        .map(|p| p.src)
        .min_by_key(|src| (src.len(), src.start))
        .expect("winning target span comes from the pair list");
    Ok(ProjectedPhrase {
        tokens: s.slice(src).to_vec(),
        source_span: Some(src),
        method: ProjectionMethod::PhraseMatch,
        bleu_score: Some(score),
    })
}

/// Projects a single English phrase onto `s`.
pub fn project_phrase<S: AsRef<str>>(
    s: &Sentence,
    t: &Sentence,
    a: &AlignmentSet,
    phrase: &[S],
    cfg: &ProjectionConfig,
) -> Result<ProjectedPhrase, ProjectionError> {
    if phrase.is_empty() {
        return Err(ProjectionError::EmptyPhrase);
    }
    let pairs = crate::extract::phrase_extract(s, t, a, &cfg.extract)?;
    project_with_pairs(s, t, a, &pairs, phrase, cfg)
}

/// Projects all three slots of `triple`, extracting phrase pairs once.
/// Slots with nothing to project onto are marked unprojectable.
pub fn project_relation(
    triple: &RelationTriple,
    s: &Sentence,
    t: &Sentence,
    a: &AlignmentSet,
    cfg: &ProjectionConfig,
) -> Result<ProjectedRelation, ProjectionError> {
    let pairs = crate::extract::phrase_extract(s, t, a, &cfg.extract)?;
    project_relation_with_pairs(triple, s, t, a, &pairs, cfg)
}

pub(crate) fn project_relation_with_pairs(
    triple: &RelationTriple,
    s: &Sentence,
    t: &Sentence,
    a: &AlignmentSet,
    pairs: &[PhrasePair],
    cfg: &ProjectionConfig,
) -> Result<ProjectedRelation, ProjectionError> {
    if triple.sentence_id != s.id() {
        return Err(ProjectionError::SentenceMismatch {
            triple: triple.sentence_id.clone(),
            sentence: s.id().to_owned(),
        });
    }
    let slot = |phrase: &[String]| match project_with_pairs(s, t, a, pairs, phrase, cfg) {
        Ok(p) => Ok(SlotProjection::Projected(p)),
        Err(ProjectionError::EmptyProjection) => Ok(SlotProjection::Unprojectable),
        Err(e) => Err(e),
    };
    Ok(ProjectedRelation {
        sentence_id: triple.sentence_id.clone(),
        arg1: slot(&triple.arg1)?,
        rel: slot(&triple.rel)?,
        arg2: slot(&triple.arg2)?,
    })
}

/// Phrase pairs for a sentence pair, extracted once and shared by every
/// triple of that sentence.
#[derive(Debug, Clone)]
pub struct SentenceProjector<'a> {
    s: &'a Sentence,
    t: &'a Sentence,
    a: &'a AlignmentSet,
    pairs: Vec<PhrasePair>,
    cfg: ProjectionConfig,
}

impl<'a> SentenceProjector<'a> {
    pub fn new(
        s: &'a Sentence,
        t: &'a Sentence,
        a: &'a AlignmentSet,
        cfg: ProjectionConfig,
    ) -> Result<Self, ProjectionError> {
        validate_alignment(a, s, t)?;
        if cfg.extract.max_src_len == Some(0) || cfg.extract.max_tgt_len == Some(0) {
            return Err(ExtractError::ZeroLimit.into());
        }
        let pairs = extract_unchecked(a, &cfg.extract);
        Ok(SentenceProjector { s, t, a, pairs, cfg })
    }

    pub fn pairs(&self) -> &[PhrasePair] {
        &self.pairs
    }

    pub fn project_phrase<S: AsRef<str>>(&self, phrase: &[S]) -> Result<ProjectedPhrase, ProjectionError> {
        project_with_pairs(self.s, self.t, self.a, &self.pairs, phrase, &self.cfg)
    }

    pub fn project_relation(&self, triple: &RelationTriple) -> Result<ProjectedRelation, ProjectionError> {
        project_relation_with_pairs(triple, self.s, self.t, self.a, &self.pairs, &self.cfg)
    }
}
