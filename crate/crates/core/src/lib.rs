//! Cross-lingual projection of open relation triples.
//!
//! Relation triples extracted from the English translation of a sentence are
//! carried back to the source sentence through the word alignment. Each
//! phrase is matched against alignment-consistent phrase pairs by smoothed
//! sentence-level BLEU, falling back to a word-by-word alignment mapping when
//! no phrase pair shares a word with it. [`eval`] scores the projections
//! against human annotations.

pub mod bleu;
pub mod cli;
pub mod eval;
pub mod extract;
pub mod io;
pub mod model;
pub mod projection;

pub use bleu::{sentence_bleu, BleuConfig};
pub use extract::{is_consistent, phrase_extract, ExtractConfig};
pub use model::{
    AlignmentSet, GoldAnnotation, PhrasePair, ProjectedPhrase, ProjectedRelation, ProjectionMethod,
    RelationTriple, Sentence, SlotProjection, Span,
};
pub use projection::{project_phrase, project_relation, ProjectionConfig};
