//! Readers and writers for corpus files.
//!
//! Formats:
//! - sentences: one pre-tokenized sentence per line, tokens separated by
//!   whitespace. With `id_column`, each source line is `id<TAB>tokens`.
//! - alignments: one line per sentence of space-separated Pharaoh links
//!   `i-j` (0-based source and target indices). An empty line means no links.
//! - triples: JSONL objects `{"sentence_id", "arg1", "rel", "arg2"}`, each
//!   phrase a space-joined token string.
//! - gold annotations: JSONL objects `{"sentence_id", "valid", "gold_rel"}`.
//! - projections: JSONL objects with one `{"text", "span", "method", "bleu"}`
//!   object per slot.
//!
//! Readers stream line by line. All errors carry 1-based line numbers.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Lines, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    tokenize, AlignmentSet, GoldAnnotation, ModelError, ProjectedPhrase, ProjectedRelation,
    ProjectionMethod, RelationTriple, Sentence, SlotProjection, Span,
};

/// Version of the file formats written by this crate.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {source}")]
    Read {
        line: usize,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: input files have different line counts")]
    LineCountMismatch { line: usize },
    #[error("line {line}: malformed alignment token {token:?}")]
    MalformedAlignment { line: usize, token: String },
    #[error("line {line}: {source}")]
    InvalidAlignment {
        line: usize,
        #[source]
        source: ModelError,
    },
    #[error("line {line}: missing tab-separated sentence id")]
    MissingId { line: usize },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: field `{field}` is empty")]
    EmptyField { line: usize, field: &'static str },
    #[error("line {line}: valid flag does not match gold_rel")]
    InvalidAnnotation { line: usize },
    #[error("line {line}: triple for sentence {sentence_id:?} matches no remaining sentence (triples must follow corpus order)")]
    UnmatchedTriple { line: usize, sentence_id: String },
}

impl CorpusError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CorpusError::io(path, e))
}

/// Parses one line of Pharaoh links.
pub fn parse_alignment(line: &str, line_no: usize) -> Result<Vec<(usize, usize)>> {
    line.split_whitespace()
        .map(|token| {
            let malformed = || CorpusError::MalformedAlignment {
                line: line_no,
                token: token.to_owned(),
            };
            let (i, j) = token.split_once('-').ok_or_else(malformed)?;
            let i = i.parse().map_err(|_| malformed())?;
            let j = j.parse().map_err(|_| malformed())?;
            Ok((i, j))
        })
        .collect()
}

/// Renders links in Pharaoh format.
pub fn format_alignment(a: &AlignmentSet) -> String {
    a.links()
        .map(|(i, j)| format!("{i}-{j}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelRecord {
    pub sentence_id: String,
    pub source: Sentence,
    pub target: Sentence,
    pub alignment: AlignmentSet,
}

/// Streams line-aligned source, target and alignment files.
pub struct ParallelReader<S, T, A> {
    src: Lines<S>,
    tgt: Lines<T>,
    align: Lines<A>,
    id_column: bool,
    line: usize,
    done: bool,
}

impl<S: BufRead, T: BufRead, A: BufRead> ParallelReader<S, T, A> {
    pub fn new(src: S, tgt: T, align: A) -> Self {
        ParallelReader {
            src: src.lines(),
            tgt: tgt.lines(),
            align: align.lines(),
            id_column: false,
            line: 0,
            done: false,
        }
    }

    /// Take sentence ids from a leading tab-separated column of the source file.
    pub fn with_id_column(mut self, on: bool) -> Self {
        self.id_column = on;
        self
    }

    fn record(&self, src: String, tgt: String, align: String) -> Result<ParallelRecord> {
        let line = self.line;
        let (id, src_text) = if self.id_column {
            let (id, rest) = src.split_once('\t').ok_or(CorpusError::MissingId { line })?;
            (id.to_owned(), rest)
        } else {
            ((line - 1).to_string(), src.as_str())
        };
        let source = Sentence::from_text(id.clone(), src_text);
        let target = Sentence::from_text(id.clone(), &tgt);
        let links = parse_alignment(&align, line)?;
        let alignment = AlignmentSet::new(links, source.len(), target.len())
            .map_err(|source| CorpusError::InvalidAlignment { line, source })?;
        Ok(ParallelRecord {
            sentence_id: id,
            source,
            target,
            alignment,
        })
    }
}

impl<S: BufRead, T: BufRead, A: BufRead> Iterator for ParallelReader<S, T, A> {
    type Item = Result<ParallelRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        self.line += 1;
        let line = self.line;
        let read = |r: Option<io::Result<String>>| r.transpose().map_err(|source| CorpusError::Read { line, source });
        let lines = (|| Ok((read(self.src.next())?, read(self.tgt.next())?, read(self.align.next())?)))();
        let out = match lines {
            Err(e) => Err(e),
            Ok((None, None, None)) => {
                self.done = true;
                return None;
            }
            Ok((Some(s), Some(t), Some(a))) => self.record(s, t, a),
            Ok(_) => Err(CorpusError::LineCountMismatch { line }),
        };
        if out.is_err() {
            self.done = true;
        }
        Some(out)
    }
}

/// Opens the three files of a parallel corpus.
pub fn read_parallel(
    source: &Path,
    target: &Path,
    alignment: &Path,
) -> Result<ParallelReader<BufReader<File>, BufReader<File>, BufReader<File>>> {
    Ok(ParallelReader::new(open(source)?, open(target)?, open(alignment)?))
}

/// Non-blank lines of a JSONL stream with their 1-based numbers.
struct JsonLines<R> {
    lines: Lines<R>,
    line: usize,
}

impl<R: BufRead> JsonLines<R> {
    fn new(reader: R) -> Self {
        JsonLines {
            lines: reader.lines(),
            line: 0,
        }
    }

    fn next_value<T: for<'de> Deserialize<'de>>(&mut self) -> Option<Result<(usize, T)>> {
        loop {
            self.line += 1;
            let line = self.line;
            let text = match self.lines.next()? {
                Ok(text) => text,
                Err(source) => return Some(Err(CorpusError::Read { line, source })),
            };
            if text.trim().is_empty() {
                continue;
            }
            return Some(
                serde_json::from_str(&text)
                    .map(|v| (line, v))
                    .map_err(|e| CorpusError::MalformedRecord {
                        line,
                        reason: e.to_string(),
                    }),
            );
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TripleRecord {
    sentence_id: String,
    arg1: String,
    rel: String,
    arg2: String,
}

pub struct TripleReader<R> {
    inner: JsonLines<R>,
}

impl<R: BufRead> TripleReader<R> {
    pub fn new(reader: R) -> Self {
        TripleReader {
            inner: JsonLines::new(reader),
        }
    }

    /// Next triple along with its line number.
    pub fn next_numbered(&mut self) -> Option<Result<(usize, RelationTriple)>> {
        let (line, rec) = match self.inner.next_value::<TripleRecord>()? {
            Ok(v) => v,
            Err(e) => return Some(Err(e)),
        };
        let field = |field: &'static str, text: &str| {
            let tokens = tokenize(text);
            if tokens.is_empty() {
                Err(CorpusError::EmptyField { line, field })
            } else {
                Ok(tokens)
            }
        };
        let triple = (|| {
            let arg1 = field("arg1", &rec.arg1)?;
            let rel = field("rel", &rec.rel)?;
            let arg2 = field("arg2", &rec.arg2)?;
            RelationTriple::new(rec.sentence_id, arg1, rel, arg2).map_err(|e| CorpusError::MalformedRecord {
                line,
                reason: e.to_string(),
            })
        })();
        Some(triple.map(|t| (line, t)))
    }
}

impl<R: BufRead> Iterator for TripleReader<R> {
    type Item = Result<RelationTriple>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_numbered().map(|r| r.map(|(_, t)| t))
    }
}

pub fn read_triples(path: &Path) -> Result<TripleReader<BufReader<File>>> {
    Ok(TripleReader::new(open(path)?))
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct GoldRecord {
    sentence_id: String,
    valid: bool,
    gold_rel: String,
}

pub struct GoldReader<R> {
    inner: JsonLines<R>,
}

impl<R: BufRead> GoldReader<R> {
    pub fn new(reader: R) -> Self {
        GoldReader {
            inner: JsonLines::new(reader),
        }
    }
}

impl<R: BufRead> Iterator for GoldReader<R> {
    type Item = Result<GoldAnnotation>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.inner.next_value::<GoldRecord>()?.and_then(|(line, rec)| {
            GoldAnnotation::new(rec.sentence_id, rec.valid, tokenize(&rec.gold_rel))
                .map_err(|_| CorpusError::InvalidAnnotation { line })
        }))
    }
}

pub fn read_gold(path: &Path) -> Result<GoldReader<BufReader<File>>> {
    Ok(GoldReader::new(open(path)?))
}

/// Writes annotations in the gold JSONL format.
pub fn write_gold<'a, W: Write + ?Sized>(
    annotations: impl IntoIterator<Item = &'a GoldAnnotation>,
    out: &mut W,
) -> io::Result<()> {
    for g in annotations {
        let rec = GoldRecord {
            sentence_id: g.sentence_id().to_owned(),
            valid: g.is_valid(),
            gold_rel: g.gold_rel().join(" "),
        };
        serde_json::to_writer(&mut *out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MethodTag {
    Phrase,
    Fallback,
    None,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlotRecord {
    text: String,
    span: Option<(usize, usize)>,
    method: MethodTag,
    bleu: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectedRecord {
    sentence_id: String,
    arg1: SlotRecord,
    rel: SlotRecord,
    arg2: SlotRecord,
}

impl From<&SlotProjection> for SlotRecord {
    fn from(slot: &SlotProjection) -> Self {
        match slot {
            SlotProjection::Unprojectable => SlotRecord {
                text: String::new(),
                span: None,
                method: MethodTag::None,
                bleu: None,
            },
            SlotProjection::Projected(p) => SlotRecord {
                text: p.tokens.join(" "),
                span: p.source_span.map(Into::into),
                method: match p.method {
                    ProjectionMethod::PhraseMatch => MethodTag::Phrase,
                    ProjectionMethod::WordAlignFallback => MethodTag::Fallback,
                },
                bleu: p.bleu_score,
            },
        }
    }
}

impl SlotRecord {
    fn into_slot(self, line: usize, field: &'static str) -> Result<SlotProjection> {
        let bad = |reason: &str| CorpusError::MalformedRecord {
            line,
            reason: format!("{field}: {reason}"),
        };
        let method = match self.method {
            MethodTag::None => {
                if !self.text.is_empty() || self.span.is_some() || self.bleu.is_some() {
                    return Err(bad("unprojectable slot carries a phrase"));
                }
                return Ok(SlotProjection::Unprojectable);
            }
            MethodTag::Phrase => ProjectionMethod::PhraseMatch,
            MethodTag::Fallback => ProjectionMethod::WordAlignFallback,
        };
        let tokens = tokenize(&self.text);
        if tokens.is_empty() {
            return Err(CorpusError::EmptyField { line, field });
        }
        let source_span = self
            .span
            .map(|(s, e)| Span::new(s, e).map_err(|e| bad(&e.to_string())))
            .transpose()?;
        if let Some(span) = source_span {
            if span.len() != tokens.len() {
                return Err(bad("span length differs from text"));
            }
        }
        match (method, source_span, self.bleu) {
            (ProjectionMethod::PhraseMatch, None, _) => return Err(bad("phrase match without span")),
            (ProjectionMethod::PhraseMatch, _, None) => return Err(bad("phrase match without bleu")),
            (ProjectionMethod::WordAlignFallback, _, Some(_)) => return Err(bad("fallback with bleu")),
            _ => {}
        }
        Ok(SlotProjection::Projected(ProjectedPhrase {
            tokens,
            source_span,
            method,
            bleu_score: self.bleu,
        }))
    }
}

/// Writes a single slot as one JSON line.
pub fn write_slot<W: Write + ?Sized>(slot: &SlotProjection, out: &mut W) -> io::Result<()> {
    serde_json::to_writer(&mut *out, &SlotRecord::from(slot))?;
    out.write_all(b"\n")
}

/// Writes one JSON line for `rel`.
pub fn write_projected_one<W: Write + ?Sized>(rel: &ProjectedRelation, out: &mut W) -> io::Result<()> {
    let rec = ProjectedRecord {
        sentence_id: rel.sentence_id.clone(),
        arg1: (&rel.arg1).into(),
        rel: (&rel.rel).into(),
        arg2: (&rel.arg2).into(),
    };
    serde_json::to_writer(&mut *out, &rec)?;
    out.write_all(b"\n")
}

pub fn write_projected<'a, W: Write + ?Sized>(
    relations: impl IntoIterator<Item = &'a ProjectedRelation>,
    out: &mut W,
) -> io::Result<()> {
    for rel in relations {
        write_projected_one(rel, out)?;
    }
    Ok(())
}

pub struct ProjectedReader<R> {
    inner: JsonLines<R>,
}

impl<R: BufRead> ProjectedReader<R> {
    pub fn new(reader: R) -> Self {
        ProjectedReader {
            inner: JsonLines::new(reader),
        }
    }
}

impl<R: BufRead> Iterator for ProjectedReader<R> {
    type Item = Result<ProjectedRelation>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.inner.next_value::<ProjectedRecord>()?.and_then(|(line, rec)| {
            Ok(ProjectedRelation {
                sentence_id: rec.sentence_id,
                arg1: rec.arg1.into_slot(line, "arg1")?,
                rel: rec.rel.into_slot(line, "rel")?,
                arg2: rec.arg2.into_slot(line, "arg2")?,
            })
        }))
    }
}

pub fn read_projected(path: &Path) -> Result<ProjectedReader<BufReader<File>>> {
    Ok(ProjectedReader::new(open(path)?))
}

/// Inclusive bounds on source sentence length; records outside are skipped
/// together with their triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LengthFilter {
    pub min_len: Option<usize>,
    pub max_len: Option<usize>,
}

impl LengthFilter {
    pub fn accepts(&self, len: usize) -> bool {
        self.min_len.map_or(true, |m| len >= m) && self.max_len.map_or(true, |m| len <= m)
    }
}

/// A parallel record with the triples extracted from its target side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceBatch {
    pub record: ParallelRecord,
    pub triples: Vec<RelationTriple>,
}

/// File-backed stand-in for the translation and relation-extraction
/// services: pairs each parallel record with its triples.
///
/// Triples must appear in corpus order (all triples of sentence k before
/// those of any later sentence); the join is a single streaming merge.
pub struct BackendBundle<P, R> {
    parallel: P,
    triples: TripleReader<R>,
    pending: Option<(usize, RelationTriple)>,
    filter: LengthFilter,
    failed: bool,
}

impl<P, R> BackendBundle<P, R>
where
    P: Iterator<Item = Result<ParallelRecord>>,
    R: BufRead,
{
    pub fn new(parallel: P, triples: TripleReader<R>, filter: LengthFilter) -> Self {
        BackendBundle {
            parallel,
            triples,
            pending: None,
            filter,
            failed: false,
        }
    }

    fn peek_triple(&mut self) -> Result<Option<&(usize, RelationTriple)>> {
        if self.pending.is_none() {
            self.pending = self.triples.next_numbered().transpose()?;
        }
        Ok(self.pending.as_ref())
    }

    fn take_triples(&mut self, id: &str) -> Result<Vec<RelationTriple>> {
        let mut out = Vec::new();
        while let Some((_, t)) = self.peek_triple()? {
            if t.sentence_id != id {
                break;
            }
            out.push(self.pending.take().expect("peeked").1);
        }
        Ok(out)
    }

    fn step(&mut self) -> Option<Result<SentenceBatch>> {
        loop {
            let record = match self.parallel.next() {
                Some(Ok(r)) => r,
                Some(Err(e)) => return Some(Err(e)),
                None => {
                    return match self.peek_triple() {
                        Err(e) => Some(Err(e)),
                        Ok(None) => None,
                        Ok(Some((line, t))) => Some(Err(CorpusError::UnmatchedTriple {
                            line: *line,
                            sentence_id: t.sentence_id.clone(),
                        })),
                    };
                }
            };
            let triples = match self.take_triples(&record.sentence_id) {
                Ok(t) => t,
                Err(e) => return Some(Err(e)),
            };
            if self.filter.accepts(record.source.len()) {
                return Some(Ok(SentenceBatch { record, triples }));
            }
        }
    }
}

impl<P, R> Iterator for BackendBundle<P, R>
where
    P: Iterator<Item = Result<ParallelRecord>>,
    R: BufRead,
{
    type Item = Result<SentenceBatch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let out = self.step();
        if matches!(out, Some(Err(_))) {
            self.failed = true;
        }
        out
    }
}
