//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when input validation, joining or I/O fails,
//! 2 on usage errors. Data goes to standard output (or `--out`), diagnostics
//! to standard error.

use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use log::info;
use rayon::prelude::*;
use serde::Deserialize;
use tempfile::NamedTempFile;

use crate::bleu::BleuConfig;
use crate::eval::{agreement, evaluate};
use crate::extract::{phrase_extract, ExtractConfig};
use crate::io::{
    self as corpus, parse_alignment, BackendBundle, CorpusError, LengthFilter,
    SentenceBatch, TripleReader, FORMAT_VERSION,
};
use crate::model::{AlignmentSet, ProjectedRelation, Sentence, SlotProjection};
use crate::projection::{project_phrase, ProjectionConfig, ProjectionError, SentenceProjector};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (format 1)");

/// Sentences handed to the worker pool at a time.
const CHUNK: usize = 512;

#[derive(Debug, Parser)]
#[command(name = "relproj", version = VERSION, about = "Project English relation triples onto source sentences through word alignments")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// TOML file with default values for any flag; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Maximum BLEU n-gram order.
    #[arg(long, global = true)]
    max_order: Option<usize>,
    /// Compare tokens case-insensitively for overlap and BLEU.
    #[arg(long, global = true)]
    case_fold: bool,
    /// Disable the BLEU brevity penalty.
    #[arg(long, global = true)]
    no_brevity_penalty: bool,
    /// Do not extend source phrases across unaligned tokens.
    #[arg(long, global = true)]
    no_extensions: bool,
    #[arg(long, global = true)]
    max_src_len: Option<usize>,
    #[arg(long, global = true)]
    max_tgt_len: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the alignment-consistent phrase pairs of every sentence pair.
    ExtractPhrases(CorpusArgs),
    /// Project a single English phrase onto a source sentence.
    Project(ProjectArgs),
    /// Project every triple of a corpus onto its source sentence.
    Pipeline(PipelineArgs),
    /// Score projected relations against gold annotations.
    Evaluate(EvaluateArgs),
    /// Compare two annotators' judgements of the same relations.
    Agreement(AgreementArgs),
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Source-language sentences, one per line.
    #[arg(long)]
    src: Option<PathBuf>,
    /// English translations, line-aligned with --src.
    #[arg(long)]
    tgt: Option<PathBuf>,
    /// Pharaoh alignments (i-j, 0-based), line-aligned with --src.
    #[arg(long)]
    align: Option<PathBuf>,
    /// Source lines start with a tab-separated sentence id.
    #[arg(long)]
    id_column: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[arg(long)]
    src_sent: String,
    #[arg(long)]
    tgt_sent: String,
    #[arg(long)]
    align_line: String,
    #[arg(long)]
    phrase: String,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Relation triples (JSONL) extracted from the English side, in corpus order.
    #[arg(long)]
    triples: Option<PathBuf>,
    /// Worker threads; output order does not depend on this.
    #[arg(long)]
    jobs: Option<usize>,
    /// Skip sentences with fewer source tokens.
    #[arg(long)]
    min_len: Option<usize>,
    /// Skip sentences with more source tokens.
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    projected: Option<PathBuf>,
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Also print the BLEU histogram.
    #[arg(long)]
    bins: bool,
    /// Print the report as one JSON object instead of a table.
    #[arg(long)]
    json: bool,
    /// Row label for the table.
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AgreementArgs {
    /// First annotator's file.
    #[arg(long)]
    a: Option<PathBuf>,
    /// Second annotator's file.
    #[arg(long)]
    b: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flag defaults read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    max_order: Option<usize>,
    case_fold: Option<bool>,
    brevity_penalty: Option<bool>,
    extensions: Option<bool>,
    max_src_len: Option<usize>,
    max_tgt_len: Option<usize>,
    jobs: Option<usize>,
    min_len: Option<usize>,
    max_len: Option<usize>,
    id_column: Option<bool>,
    bins: Option<bool>,
    json: Option<bool>,
    label: Option<String>,
    src: Option<PathBuf>,
    tgt: Option<PathBuf>,
    align: Option<PathBuf>,
    triples: Option<PathBuf>,
    projected: Option<PathBuf>,
    gold: Option<PathBuf>,
    a: Option<PathBuf>,
    b: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failed(String),
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

fn failed(e: impl ToString) -> CliError {
    CliError::Failed(e.to_string())
}

fn required(flag: Option<PathBuf>, file: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    flag.or_else(|| file.clone())
        .ok_or_else(|| CliError::Usage(format!("missing required argument --{name}")))
}

struct Settings {
    file: FileConfig,
    projection: ProjectionConfig,
}

impl Settings {
    fn new(opts: &GlobalOpts) -> Result<Self, CliError> {
        let file: FileConfig = match &opts.config {
            None => FileConfig::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
                toml::from_str(&text).map_err(|e| failed(format!("{}: {e}", path.display())))?
            }
        };
        let bleu = BleuConfig {
            max_order: opts.max_order.or(file.max_order).unwrap_or(3),
            brevity_penalty: !opts.no_brevity_penalty && file.brevity_penalty.unwrap_or(true),
            case_fold: opts.case_fold || file.case_fold.unwrap_or(false),
            ..BleuConfig::default()
        };
        if bleu.max_order == 0 {
            return Err(CliError::Usage("--max-order must be at least 1".into()));
        }
        let extract = ExtractConfig {
            max_src_len: opts.max_src_len.or(file.max_src_len),
            max_tgt_len: opts.max_tgt_len.or(file.max_tgt_len),
            include_unaligned_extensions: !opts.no_extensions && file.extensions.unwrap_or(true),
        };
        if extract.max_src_len == Some(0) || extract.max_tgt_len == Some(0) {
            return Err(CliError::Usage("phrase length limits must be at least 1".into()));
        }
        Ok(Settings {
            file,
            projection: ProjectionConfig { bleu, extract },
        })
    }
}

/// Buffered output to stdout, or to a temporary file that replaces the
/// target only once everything was written.
enum Sink<'a> {
    Stdout(&'a mut dyn Write),
    File(BufWriter<NamedTempFile>, PathBuf),
}

impl<'a> Sink<'a> {
    fn open(path: Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Sink::Stdout(stdout));
        };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_owned(),
            _ => PathBuf::from("."),
        };
        let tmp = NamedTempFile::new_in(&dir).map_err(|e| failed(format!("{}: {e}", dir.display())))?;
        Ok(Sink::File(BufWriter::new(tmp), path))
    }

    fn writer(&mut self) -> &mut dyn Write {
        match self {
            Sink::Stdout(w) => *w,
            Sink::File(w, _) => w,
        }
    }

    fn commit(self) -> Result<(), CliError> {
        match self {
            Sink::Stdout(w) => Ok(w.flush()?),
            Sink::File(w, path) => {
                let tmp = w.into_inner().map_err(|e| failed(e.error()))?;
                tmp.persist(&path).map_err(|e| failed(format!("{}: {}", path.display(), e.error)))?;
                Ok(())
            }
        }
    }
}

/// Parses `args` (including the program name) and runs the chosen command.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    2
                }
            };
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let usage = Cli::command().render_usage();
            let _ = writeln!(stderr, "error: {msg}\n\n{usage}");
            2
        }
        Err(CliError::Failed(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
    }
}

pub fn run() -> i32 {
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    let mut stderr = io::stderr();
    run_with(std::env::args_os(), &mut stdout, &mut stderr)
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let settings = Settings::new(&cli.opts)?;
    match cli.command {
        Command::ExtractPhrases(args) => extract_phrases(args, &settings, stdout),
        Command::Project(args) => project(args, &settings, stdout),
        Command::Pipeline(args) => pipeline(args, &settings, stdout),
        Command::Evaluate(args) => evaluate_cmd(args, &settings, stdout),
        Command::Agreement(args) => agreement_cmd(args, &settings, stdout),
    }
}

struct CorpusPaths {
    src: PathBuf,
    tgt: PathBuf,
    align: PathBuf,
    id_column: bool,
    out: Option<PathBuf>,
}

impl CorpusPaths {
    fn resolve(args: CorpusArgs, file: &FileConfig) -> Result<Self, CliError> {
        Ok(CorpusPaths {
            src: required(args.src, &file.src, "src")?,
            tgt: required(args.tgt, &file.tgt, "tgt")?,
            align: required(args.align, &file.align, "align")?,
            id_column: args.id_column || file.id_column.unwrap_or(false),
            out: args.out.or_else(|| file.out.clone()),
        })
    }

    fn reader(&self) -> Result<impl Iterator<Item = corpus::Result<corpus::ParallelRecord>>, CliError> {
        Ok(corpus::read_parallel(&self.src, &self.tgt, &self.align)?.with_id_column(self.id_column))
    }
}

fn extract_phrases(args: CorpusArgs, settings: &Settings, stdout: &mut dyn Write) -> Result<(), CliError> {
    let paths = CorpusPaths::resolve(args, &settings.file)?;
    let mut sink = Sink::open(paths.out.clone(), stdout)?;
    for record in paths.reader()? {
        let record = record?;
        let pairs = phrase_extract(&record.source, &record.target, &record.alignment, &settings.projection.extract)
            .map_err(|e| failed(format!("sentence {}: {e}", record.sentence_id)))?;
        let w = sink.writer();
        for p in pairs {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                p.src,
                p.tgt,
                record.source.slice(p.src).join(" "),
                record.target.slice(p.tgt).join(" ")
            )?;
        }
        writeln!(w)?;
    }
    sink.commit()
}

fn project(args: ProjectArgs, settings: &Settings, stdout: &mut dyn Write) -> Result<(), CliError> {
    let s = Sentence::from_text("0", &args.src_sent);
    let t = Sentence::from_text("0", &args.tgt_sent);
    let links = parse_alignment(&args.align_line, 1)?;
    let a = AlignmentSet::new(links, s.len(), t.len()).map_err(failed)?;
    let phrase = crate::model::tokenize(&args.phrase);
    if phrase.is_empty() {
        return Err(CliError::Usage("--phrase must contain at least one token".into()));
    }
    let slot = match project_phrase(&s, &t, &a, &phrase, &settings.projection) {
        Ok(p) => SlotProjection::Projected(p),
        Err(ProjectionError::EmptyProjection) => SlotProjection::Unprojectable,
        Err(e) => return Err(failed(e)),
    };
    corpus::write_slot(&slot, stdout)?;
    Ok(())
}

fn project_batch(batch: &SentenceBatch, cfg: &ProjectionConfig) -> Result<Vec<ProjectedRelation>, CliError> {
    if batch.triples.is_empty() {
        return Ok(Vec::new());
    }
    let r = &batch.record;
    let context = |e: ProjectionError| failed(format!("sentence {}: {e}", r.sentence_id));
    let projector = SentenceProjector::new(&r.source, &r.target, &r.alignment, *cfg).map_err(context)?;
    batch
        .triples
        .iter()
        .map(|t| projector.project_relation(t).map_err(context))
        .collect()
}

fn pipeline(args: PipelineArgs, settings: &Settings, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = &settings.file;
    let triples_path = required(args.triples, &file.triples, "triples")?;
    let paths = CorpusPaths::resolve(args.corpus, file)?;
    let jobs = args.jobs.or(file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let filter = LengthFilter {
        min_len: args.min_len.or(file.min_len),
        max_len: args.max_len.or(file.max_len),
    };
    let pool = if jobs > 1 {
        Some(rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(failed)?)
    } else {
        None
    };

    let triples = TripleReader::new(corpus::open(&triples_path)?);
    let bundle = BackendBundle::new(paths.reader()?, triples, filter);
    let mut sink = Sink::open(paths.out.clone(), stdout)?;
    let cfg = settings.projection;
    let (mut sentences, mut relations) = (0usize, 0usize);

    let mut flush = |chunk: &mut Vec<SentenceBatch>, sink: &mut Sink| -> Result<(), CliError> {
        let results: Vec<_> = match &pool {
            Some(pool) => pool.install(|| chunk.par_iter().map(|b| project_batch(b, &cfg)).collect()),
            None => chunk.iter().map(|b| project_batch(b, &cfg)).collect(),
        };
        for rels in results {
            for rel in rels? {
                corpus::write_projected_one(&rel, sink.writer())?;
                relations += 1;
            }
        }
        sentences += chunk.len();
        chunk.clear();
        info!("{sentences} sentences, {relations} relations projected");
        Ok(())
    };

    let mut chunk = Vec::with_capacity(CHUNK);
    for batch in bundle {
        chunk.push(batch?);
        if chunk.len() == CHUNK {
            flush(&mut chunk, &mut sink)?;
        }
    }
    flush(&mut chunk, &mut sink)?;
    sink.commit()
}

fn collect<T>(iter: impl Iterator<Item = corpus::Result<T>>) -> Result<Vec<T>, CliError> {
    Ok(iter.collect::<corpus::Result<_>>()?)
}

fn with_path<T>(path: &Path, r: corpus::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn evaluate_cmd(args: EvaluateArgs, settings: &Settings, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = &settings.file;
    let projected_path = required(args.projected, &file.projected, "projected")?;
    let gold_path = required(args.gold, &file.gold, "gold")?;
    let projected = with_path(&projected_path, corpus::read_projected(&projected_path))?;
    let projected = collect(projected).map_err(|e| prefix(&projected_path, e))?;
    let gold = with_path(&gold_path, corpus::read_gold(&gold_path))?;
    let gold = collect(gold).map_err(|e| prefix(&gold_path, e))?;
    let report = evaluate(projected, gold, &settings.projection.bleu).map_err(failed)?;

    let mut sink = Sink::open(args.out.or_else(|| file.out.clone()), stdout)?;
    let w = sink.writer();
    if args.json || file.json.unwrap_or(false) {
        serde_json::to_writer(&mut *w, &report).map_err(failed)?;
        writeln!(w)?;
    } else {
        let label = args.label.or_else(|| file.label.clone()).unwrap_or_else(|| "-".into());
        write!(w, "{}", report.to_table(&label))?;
        if report.n_unprojectable > 0 {
            writeln!(w, "unprojectable relations scored 0: {}", report.n_unprojectable)?;
        }
    }
    if args.bins || file.bins.unwrap_or(false) {
        write!(w, "{}", report.bins_table())?;
    }
    sink.commit()
}

fn agreement_cmd(args: AgreementArgs, settings: &Settings, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = &settings.file;
    let a_path = required(args.a, &file.a, "a")?;
    let b_path = required(args.b, &file.b, "b")?;
    let a = collect(with_path(&a_path, corpus::read_gold(&a_path))?).map_err(|e| prefix(&a_path, e))?;
    let b = collect(with_path(&b_path, corpus::read_gold(&b_path))?).map_err(|e| prefix(&b_path, e))?;
    let report = agreement(a, b, &settings.projection.bleu).map_err(failed)?;

    let mut sink = Sink::open(args.out.or_else(|| file.out.clone()), stdout)?;
    let w = sink.writer();
    if args.json || file.json.unwrap_or(false) {
        serde_json::to_writer(&mut *w, &report).map_err(failed)?;
        writeln!(w)?;
    } else {
        write!(w, "{}", report.to_table())?;
    }
    sink.commit()
}

fn prefix(path: &Path, e: CliError) -> CliError {
    match e {
        CliError::Failed(msg) => CliError::Failed(format!("{}: {msg}", path.display())),
        other => other,
    }
}

/// Toolkit and file-format version line.
pub fn version_line() -> String {
    format!("relproj {} (format {FORMAT_VERSION})", env!("CARGO_PKG_VERSION"))
}
