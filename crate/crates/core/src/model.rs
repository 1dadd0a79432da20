//! Domain types shared by every stage of the projection toolkit.
//!
//! All values are immutable after construction. Indices are 0-based
//! throughout, matching the Pharaoh alignment convention.

use std::borrow::Cow;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("alignment link {0}-{1} is out of range")]
    OutOfRangeLink(usize, usize),
    #[error("alignment covers {align_src}x{align_tgt} tokens but sentences have {src}x{tgt}")]
    LengthMismatch {
        align_src: usize,
        align_tgt: usize,
        src: usize,
        tgt: usize,
    },
    #[error("token {0:?} is empty or contains whitespace")]
    InvalidToken(String),
    #[error("span start {0} is after end {1}")]
    InvertedSpan(usize, usize),
    #[error("relation field `{0}` is empty")]
    EmptyPhrase(&'static str),
    #[error("annotation validity does not match gold phrase (valid={valid}, {len} tokens)")]
    InconsistentAnnotation { valid: bool, len: usize },
}

fn check_token(tok: &str) -> Result<(), ModelError> {
    if tok.is_empty() || tok.chars().any(char::is_whitespace) {
        Err(ModelError::InvalidToken(tok.to_owned()))
    } else {
        Ok(())
    }
}

/// Splits text into whitespace-separated tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// Lowercases a token when `case_fold` is set, borrowing otherwise.
pub fn fold(token: &str, case_fold: bool) -> Cow<'_, str> {
    if case_fold {
        Cow::Owned(token.to_lowercase())
    } else {
        Cow::Borrowed(token)
    }
}

/// A tokenized sentence on either side of a translation pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    id: String,
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Result<Self, ModelError> {
        for tok in &tokens {
            check_token(tok)?;
        }
        Ok(Sentence {
            id: id.into(),
            tokens,
        })
    }

    /// Builds a sentence by splitting `text` on whitespace.
    pub fn from_text(id: impl Into<String>, text: &str) -> Self {
        Sentence {
            id: id.into(),
            tokens: tokenize(text),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens covered by `span`. Panics if the span is out of range.
    pub fn slice(&self, span: Span) -> &[String] {
        &self.tokens[span.start..=span.end]
    }
}

/// Word alignment between a source and a target sentence, stored as a set of
/// `(source index, target index)` links.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct AlignmentSet {
    links: BTreeSet<(usize, usize)>,
    src_len: usize,
    tgt_len: usize,
}

impl AlignmentSet {
    pub fn new(
        links: impl IntoIterator<Item = (usize, usize)>,
        src_len: usize,
        tgt_len: usize,
    ) -> Result<Self, ModelError> {
        let links: BTreeSet<_> = links.into_iter().collect();
        if let Some(&(i, j)) = links.iter().find(|&&(i, j)| i >= src_len || j >= tgt_len) {
            return Err(ModelError::OutOfRangeLink(i, j));
        }
        Ok(AlignmentSet {
            links,
            src_len,
            tgt_len,
        })
    }

    /// Links in ascending `(i, j)` order.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.links.contains(&(i, j))
    }

    pub fn src_len(&self) -> usize {
        self.src_len
    }

    pub fn tgt_len(&self) -> usize {
        self.tgt_len
    }

    /// Target indices linked to each source index.
    pub fn by_source(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.src_len];
        for (i, j) in self.links() {
            out[i].push(j);
        }
        out
    }

    /// Source indices linked to each target index.
    pub fn by_target(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.tgt_len];
        for (i, j) in self.links() {
            out[j].push(i);
        }
        out
    }
}

/// Checks that `a` describes the sentence pair `(s, t)`.
pub fn validate_alignment(a: &AlignmentSet, s: &Sentence, t: &Sentence) -> Result<(), ModelError> {
    if a.src_len != s.len() || a.tgt_len != t.len() {
        return Err(ModelError::LengthMismatch {
            align_src: a.src_len,
            align_tgt: a.tgt_len,
            src: s.len(),
            tgt: t.len(),
        });
    }
    match a.links().find(|&(i, j)| i >= s.len() || j >= t.len()) {
        Some((i, j)) => Err(ModelError::OutOfRangeLink(i, j)),
        None => Ok(()),
    }
}

/// Inclusive token range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Result<Self, ModelError> {
        if start > end {
            return Err(ModelError::InvertedSpan(start, end));
        }
        Ok(Span { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.start <= idx && idx <= self.end
    }
}

impl TryFrom<(usize, usize)> for Span {
    type Error = ModelError;

    fn try_from((start, end): (usize, usize)) -> Result<Self, Self::Error> {
        Span::new(start, end)
    }
}

impl From<Span> for (usize, usize) {
    fn from(span: Span) -> Self {
        (span.start, span.end)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// A source span paired with a target span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhrasePair {
    pub src: Span,
    pub tgt: Span,
}

impl PhrasePair {
    pub fn new(src: Span, tgt: Span) -> Self {
        PhrasePair { src, tgt }
    }

    /// Sort key used for the canonical ordering of extracted phrase sets.
    pub fn order_key(&self) -> (usize, usize, usize, usize) {
        (self.tgt.start, self.tgt.end, self.src.start, self.src.end)
    }
}

impl PartialOrd for PhrasePair {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PhrasePair {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

/// An open relation triple over the English side. Phrases are token lists,
/// not spans, since the extractor may normalize them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationTriple {
    pub sentence_id: String,
    pub arg1: Vec<String>,
    pub rel: Vec<String>,
    pub arg2: Vec<String>,
}

impl RelationTriple {
    pub fn new(
        sentence_id: impl Into<String>,
        arg1: Vec<String>,
        rel: Vec<String>,
        arg2: Vec<String>,
    ) -> Result<Self, ModelError> {
        for (name, phrase) in [("arg1", &arg1), ("rel", &rel), ("arg2", &arg2)] {
            if phrase.is_empty() {
                return Err(ModelError::EmptyPhrase(name));
            }
            for tok in phrase {
                check_token(tok)?;
            }
        }
        Ok(RelationTriple {
            sentence_id: sentence_id.into(),
            arg1,
            rel,
            arg2,
        })
    }

    pub fn slots(&self) -> [(Slot, &[String]); 3] {
        [
            (Slot::Arg1, &self.arg1),
            (Slot::Rel, &self.rel),
            (Slot::Arg2, &self.arg2),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Arg1,
    Rel,
    Arg2,
}

impl Slot {
    pub fn name(self) -> &'static str {
        match self {
            Slot::Arg1 => "arg1",
            Slot::Rel => "rel",
            Slot::Arg2 => "arg2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectionMethod {
    PhraseMatch,
    WordAlignFallback,
}

/// A phrase carried over to the source side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPhrase {
    pub tokens: Vec<String>,
    /// Present iff the tokens form a contiguous source run.
    pub source_span: Option<Span>,
    pub method: ProjectionMethod,
    /// Only set for [`ProjectionMethod::PhraseMatch`].
    pub bleu_score: Option<f64>,
}

/// Outcome for one slot of a triple. A slot is never dropped: when nothing in
/// the source sentence can be tied to the phrase it is marked unprojectable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SlotProjection {
    Projected(ProjectedPhrase),
    Unprojectable,
}

impl SlotProjection {
    pub fn phrase(&self) -> Option<&ProjectedPhrase> {
        match self {
            SlotProjection::Projected(p) => Some(p),
            SlotProjection::Unprojectable => None,
        }
    }

    /// Source tokens, empty when unprojectable.
    pub fn tokens(&self) -> &[String] {
        self.phrase().map_or(&[], |p| &p.tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedRelation {
    pub sentence_id: String,
    pub arg1: SlotProjection,
    pub rel: SlotProjection,
    pub arg2: SlotProjection,
}

/// Human judgement for one extracted relation: whether its arguments admit a
/// relation phrase, and if so which contiguous source phrase it is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    sentence_id: String,
    valid: bool,
    gold_rel: Vec<String>,
}

impl GoldAnnotation {
    pub fn new(
        sentence_id: impl Into<String>,
        valid: bool,
        gold_rel: Vec<String>,
    ) -> Result<Self, ModelError> {
        if valid == gold_rel.is_empty() {
            return Err(ModelError::InconsistentAnnotation {
                valid,
                len: gold_rel.len(),
            });
        }
        for tok in &gold_rel {
            check_token(tok)?;
        }
        Ok(GoldAnnotation {
            sentence_id: sentence_id.into(),
            valid,
            gold_rel,
        })
    }

    pub fn valid(sentence_id: impl Into<String>, gold_rel: Vec<String>) -> Result<Self, ModelError> {
        Self::new(sentence_id, true, gold_rel)
    }

    pub fn invalid(sentence_id: impl Into<String>) -> Self {
        GoldAnnotation {
            sentence_id: sentence_id.into(),
            valid: false,
            gold_rel: Vec::new(),
        }
    }

    pub fn sentence_id(&self) -> &str {
        &self.sentence_id
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn gold_rel(&self) -> &[String] {
        &self.gold_rel
    }
}
