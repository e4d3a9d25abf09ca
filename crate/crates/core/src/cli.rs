//! The `minuted` command line.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | any other failure (including a failed `--verify`) |
//! | 2 | unreadable or malformed input, bad configuration, unmatched or empty corpus |
//! | 3 | inference backend unavailable |
//! | 4 | recursion depth exceeded |
//!
//! Settings are layered: built-in defaults, then the `--config` JSON file,
//! then `MINUTED_ENDPOINT`, then command-line flags.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::action_items::{extract_action_items, ActionItem};
use crate::backends::stub::StubServer;
use crate::backends::{BackendConfig, BackendKind, Backends, MockBackend, MockSummarizerMode};
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate_corpus, BertScoreOptions, ConfigDescriptor, DocumentPair, GridReport, ScoreReport,
};
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::segmentation::{segment_units, verify_chunks, Chunk, SegmenterConfig, Strategy};
use crate::transcript::{parse_transcript, Transcript, TranscriptFormat};

pub const ENDPOINT_ENV: &str = "MINUTED_ENDPOINT";

#[derive(Debug, Parser)]
#[command(
    name = "minuted",
    version,
    about = "Action-item-driven meeting summarization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize a transcript.
    Summarize {
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Write the pipeline trace as JSON to `<input>.trace.json`.
        #[arg(long)]
        trace: bool,
        /// Trace destination; implies --trace.
        #[arg(long, value_name = "PATH")]
        trace_out: Option<PathBuf>,
        /// Re-run with one worker and fail unless the summary is identical.
        #[arg(long)]
        verify: bool,
    },
    /// Segment a transcript into chunks.
    Segment {
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Fail unless the chunks partition the transcript within the token limit.
        #[arg(long)]
        verify: bool,
    },
    /// Extract action items from every chunk of a transcript.
    ExtractActions {
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score candidate summaries against references, matched by file stem.
    ///
    /// If CANDIDATES contains subdirectories named `<strategy>.general` or
    /// `<strategy>.action-items` (as written by `ablate`), each is scored
    /// and the result is a grid report.
    Evaluate {
        candidates: PathBuf,
        references: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Rescale BERTScore with this baseline: (x - b) / (1 - b).
        #[arg(long, value_name = "B")]
        baseline: Option<f64>,
    },
    /// Summarize every transcript in a directory under all eight
    /// strategy × action-item configurations.
    Ablate {
        transcripts: PathBuf,
        /// Output directory; one subdirectory per configuration.
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Serve the mock backend over the HTTP inference protocol.
    ServeMock {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, value_enum, default_value_t = MockSummarizerMode::LeadSentence)]
        summarizer: MockSummarizerMode,
        #[arg(long, default_value_t = 1024)]
        input_limit: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
    Markdown,
}

/// Options shared by every command that runs the pipeline or a backend.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON file with `backend` and `pipeline` sections.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, visible_alias = "strategy", value_enum)]
    pub segmenter: Option<Strategy>,
    /// Cosine threshold for the cosine strategies.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Token limit of each chunk and summarizer input.
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Inference server base URL; implies `--backend remote` unless
    /// `--backend` is given.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Mock summarizer behavior.
    #[arg(long, value_enum)]
    pub mock_summarizer: Option<MockSummarizerMode>,
    /// General summaries only, without action-item enrichment.
    #[arg(long)]
    pub no_action_items: bool,
    /// Worker threads (default: logical cores, at most 8).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

/// Contents of a `--config` file. Missing sections keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub backend: BackendConfig,
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    /// Applies the precedence chain: file, then `endpoint_env`, then flags.
    pub fn resolve(args: &RunArgs, endpoint_env: Option<String>) -> Result<Self> {
        let FileConfig {
            mut backend,
            mut pipeline,
        } = match &args.config {
            Some(path) => serde_json::from_str(&read(path)?)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?,
            None => FileConfig::default(),
        };
        if let Some(endpoint) = endpoint_env.filter(|e| !e.trim().is_empty()) {
            backend.endpoint = Some(endpoint);
        }
        if let Some(endpoint) = &args.endpoint {
            backend.endpoint = Some(endpoint.clone());
            backend.kind = BackendKind::Remote;
        }
        if let Some(kind) = args.backend {
            backend.kind = kind;
        }
        if let Some(mode) = args.mock_summarizer {
            backend.mock.summarizer = mode;
        }
        if let Some(strategy) = args.segmenter {
            pipeline.segmenter.strategy = strategy;
        }
        if let Some(t) = args.threshold {
            pipeline.segmenter.similarity_threshold = t;
        }
        if let Some(m) = args.max_tokens {
            pipeline.max_tokens = m;
            pipeline.segmenter.max_tokens = m;
        }
        if args.no_action_items {
            pipeline.include_action_items = false;
        }
        if let Some(j) = args.jobs {
            pipeline.parallelism = j;
        }
        backend.validate()?;
        pipeline.validate()?;
        Ok(RunConfig { backend, pipeline })
    }

    pub fn backends(&self) -> Result<Backends> {
        Backends::from_config(&self.backend)
    }

    pub fn pipeline(&self) -> Result<Pipeline> {
        Pipeline::new(self.backends()?, self.pipeline.clone())
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::BackendUnavailable { .. } => 3,
        Error::DepthExceeded { .. } => 4,
        Error::EmptyTranscript
        | Error::MalformedInput(_)
        | Error::InvalidInput(_)
        | Error::InvalidConfig(_)
        | Error::EmptyReference
        | Error::EmptyCorpus
        | Error::Io { .. } => 2,
        _ => 1,
    }
}

struct VerifyFailed(String);

enum Failure {
    Error(Error),
    Verify(VerifyFailed),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let endpoint_env = std::env::var(ENDPOINT_ENV).ok();
    match dispatch(cli.command, endpoint_env, out, err) {
        Ok(()) => 0,
        Err(Failure::Error(e)) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
        Err(Failure::Verify(VerifyFailed(msg))) => {
            let _ = writeln!(err, "verification failed: {msg}");
            1
        }
    }
}

fn dispatch(
    command: Command,
    endpoint_env: Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    match command {
        Command::Summarize {
            input,
            run,
            trace,
            trace_out,
            verify,
        } => {
            let cfg = RunConfig::resolve(&run, endpoint_env)?;
            let trace_path = match (trace_out, trace) {
                (Some(p), _) => Some(p),
                (None, true) => Some(side_path(&input, ".trace.json")),
                (None, false) => None,
            };
            cmd_summarize(
                &cfg,
                &input,
                format_or(&run, OutputFormat::Text),
                trace_path.as_deref(),
                verify,
                out,
            )
        }
        Command::Segment { input, run, verify } => {
            let cfg = RunConfig::resolve(&run, endpoint_env)?;
            cmd_segment(
                &cfg,
                &input,
                format_or(&run, OutputFormat::Json),
                verify,
                out,
            )
        }
        Command::ExtractActions { input, run } => {
            let cfg = RunConfig::resolve(&run, endpoint_env)?;
            Ok(cmd_extract_actions(
                &cfg,
                &input,
                format_or(&run, OutputFormat::Json),
                out,
            )?)
        }
        Command::Evaluate {
            candidates,
            references,
            run,
            baseline,
        } => {
            let cfg = RunConfig::resolve(&run, endpoint_env)?;
            let options = BertScoreOptions { baseline };
            Ok(cmd_evaluate(
                &cfg,
                &candidates,
                &references,
                &options,
                format_or(&run, OutputFormat::Text),
                out,
            )?)
        }
        Command::Ablate {
            transcripts,
            out: dir,
            run,
        } => {
            let cfg = RunConfig::resolve(&run, endpoint_env)?;
            Ok(cmd_ablate(&cfg, &transcripts, &dir, err)?)
        }
        Command::ServeMock {
            addr,
            summarizer,
            input_limit,
        } => {
            let backend = MockBackend::new(
                crate::backends::MockConfig::default().summarizer(summarizer),
                backend_limit(input_limit)?,
            );
            let server = StubServer::bind(&addr, backend).map_err(|e| Error::io(&addr, e))?;
            let _ = writeln!(out, "{}", server.url());
            let _ = out.flush();
            server.wait();
            Ok(())
        }
    }
}

fn backend_limit(limit: usize) -> Result<usize> {
    if limit == 0 {
        return Err(Error::InvalidConfig("input limit must be positive".into()));
    }
    Ok(limit)
}

fn format_or(run: &RunArgs, default: OutputFormat) -> OutputFormat {
    run.format.unwrap_or(default)
}

fn side_path(input: &Path, suffix: &str) -> PathBuf {
    let mut name = input.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| {
            if text.ends_with('\n') {
                Ok(())
            } else {
                out.write_all(b"\n")
            }
        })
        .map_err(|e| Error::io("<stdout>", e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output types serialize")
}

pub fn load_transcript(path: &Path) -> Result<Transcript> {
    let raw = read(path)?;
    let format = TranscriptFormat::detect(Some(path), &raw);
    let transcript = parse_transcript(&raw, format)?;
    if transcript.id.is_empty() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        return Ok(transcript.with_id(stem));
    }
    Ok(transcript)
}

#[derive(Debug, Serialize)]
struct SummaryOutput<'a> {
    id: &'a str,
    strategy: Strategy,
    action_items: bool,
    summary: &'a str,
}

fn cmd_summarize(
    cfg: &RunConfig,
    input: &Path,
    format: OutputFormat,
    trace_path: Option<&Path>,
    verify: bool,
    out: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let transcript = load_transcript(input)?;
    let pipeline = cfg.pipeline()?;
    let output = pipeline.summarize_transcript(&transcript)?;
    if verify {
        let serial = Pipeline::new(
            pipeline.backends().clone(),
            PipelineConfig {
                parallelism: 1,
                ..cfg.pipeline.clone()
            },
        )?
        .summarize_transcript(&transcript)?;
        if serial.summary != output.summary {
            return Err(Failure::Verify(VerifyFailed(
                "summary differs between parallel and single-worker runs".into(),
            )));
        }
    }
    if let Some(path) = trace_path {
        write_file(path, &to_json(&output.trace))?;
    }
    let text = match format {
        OutputFormat::Text => output.summary.clone(),
        OutputFormat::Json => to_json(&SummaryOutput {
            id: &transcript.id,
            strategy: cfg.pipeline.segmenter.strategy,
            action_items: cfg.pipeline.include_action_items,
            summary: &output.summary,
        }),
        OutputFormat::Markdown => format!("# Summary of {}\n\n{}\n", transcript.id, output.summary),
    };
    Ok(emit(out, &text)?)
}

#[derive(Debug, Serialize)]
struct SegmentOutput<'a> {
    id: &'a str,
    strategy: Strategy,
    max_tokens: usize,
    chunks: &'a [Chunk],
}

fn cmd_segment(
    cfg: &RunConfig,
    input: &Path,
    format: OutputFormat,
    verify: bool,
    out: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let transcript = load_transcript(input)?;
    let backends = cfg.backends()?;
    let seg = SegmenterConfig {
        max_tokens: cfg.pipeline.max_tokens,
        ..cfg.pipeline.segmenter
    };
    let units = transcript.units();
    let chunks = segment_units(&backends, &units, &seg)?;
    if verify {
        verify_chunks(
            backends.tokenizer.as_ref(),
            &units,
            &chunks,
            seg.strategy,
            seg.max_tokens,
        )
        .map_err(|e| Failure::Verify(VerifyFailed(e.to_string())))?;
    }
    let text = match format {
        OutputFormat::Json => to_json(&SegmentOutput {
            id: &transcript.id,
            strategy: seg.strategy,
            max_tokens: seg.max_tokens,
            chunks: &chunks,
        }),
        OutputFormat::Text => chunks
            .iter()
            .enumerate()
            .map(|(i, c)| {
                format!(
                    "[{i}] units {}..{} ({} tokens)\n{}\n",
                    c.unit_range.0, c.unit_range.1, c.token_count, c.text
                )
            })
            .collect::<Vec<_>>()
            .join("\n"),
        OutputFormat::Markdown => chunks
            .iter()
            .enumerate()
            .map(|(i, c)| {
                format!(
                    "## Chunk {i}\n\nUnits {}..{}, {} tokens.\n\n{}\n",
                    c.unit_range.0, c.unit_range.1, c.token_count, c.text
                )
            })
            .collect::<Vec<_>>()
            .join("\n"),
    };
    Ok(emit(out, &text)?)
}

#[derive(Debug, Serialize)]
struct ChunkActions {
    chunk: usize,
    unit_range: (usize, usize),
    items: Vec<ActionItem>,
}

#[derive(Debug, Serialize)]
struct ActionsOutput<'a> {
    id: &'a str,
    strategy: Strategy,
    chunks: Vec<ChunkActions>,
}

pub fn cmd_extract_actions(
    cfg: &RunConfig,
    input: &Path,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<()> {
    let transcript = load_transcript(input)?;
    let backends = cfg.backends()?;
    let seg = SegmenterConfig {
        max_tokens: cfg.pipeline.max_tokens,
        ..cfg.pipeline.segmenter
    };
    let chunks = segment_units(&backends, &transcript.units(), &seg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.pipeline.parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let per_chunk = pool.install(|| {
        chunks
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let found = extract_action_items(
                    &backends,
                    &c.text,
                    &cfg.pipeline.neighborhood,
                    cfg.pipeline.summary_params,
                )?;
                Ok(ChunkActions {
                    chunk: i,
                    unit_range: c.unit_range,
                    items: found.items,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let text = match format {
        OutputFormat::Json => to_json(&ActionsOutput {
            id: &transcript.id,
            strategy: seg.strategy,
            chunks: per_chunk,
        }),
        OutputFormat::Text | OutputFormat::Markdown => {
            let bullet = if format == OutputFormat::Markdown {
                "- "
            } else {
                ""
            };
            per_chunk
                .iter()
                .flat_map(|c| {
                    c.items.iter().map(move |item| {
                        format!(
                            "{bullet}[chunk {}, sentence {}] {}",
                            c.chunk, item.sentence_index, item.text
                        )
                    })
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
    };
    emit(out, &text)
}

/// Regular files in `dir` keyed by file stem.
fn files_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        let Some(stem) = path.file_stem().map(|s| s.to_string_lossy().into_owned()) else {
            continue;
        };
        if stem.starts_with('.') || path.to_string_lossy().ends_with(".trace.json") {
            continue;
        }
        if let Some(previous) = files.insert(stem.clone(), path.clone()) {
            return Err(Error::InvalidInput(format!(
                "`{}` and `{}` share the stem `{stem}`",
                previous.display(),
                path.display()
            )));
        }
    }
    Ok(files)
}

/// Pairs candidate and reference files by stem; every stem must appear on
/// both sides.
pub fn load_pairs(candidates: &Path, references: &Path) -> Result<Vec<DocumentPair>> {
    let cands = files_by_stem(candidates)?;
    let refs = files_by_stem(references)?;
    let unmatched: Vec<&String> = cands
        .keys()
        .filter(|k| !refs.contains_key(*k))
        .chain(refs.keys().filter(|k| !cands.contains_key(*k)))
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::InvalidInput(format!(
            "unmatched document stems: {}",
            unmatched
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    cands
        .into_iter()
        .map(|(id, path)| {
            Ok(DocumentPair {
                candidate: read(&path)?,
                reference: read(&refs[&id])?,
                id,
            })
        })
        .collect()
}

/// Configuration subdirectories of `dir`, in grid order.
fn grid_dirs(dir: &Path) -> Result<Vec<(ConfigDescriptor, PathBuf)>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_dir() {
            continue;
        }
        if let Some(d) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(ConfigDescriptor::from_dir_name)
        {
            found.push((d, path));
        }
    }
    let order = ConfigDescriptor::grid();
    found.sort_by_key(|(d, _)| order.iter().position(|o| o == d));
    Ok(found)
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    candidates: &Path,
    references: &Path,
    options: &BertScoreOptions,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<()> {
    options.validate()?;
    let backends = cfg.backends()?;
    let embedder = backends.embedder.as_ref();
    let grid = grid_dirs(candidates)?;
    let reports: Vec<ScoreReport> = if grid.is_empty() {
        let descriptor = candidates
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(ConfigDescriptor::from_dir_name);
        vec![evaluate_corpus(
            embedder,
            &load_pairs(candidates, references)?,
            descriptor,
            options,
        )?]
    } else {
        grid.iter()
            .map(|(d, dir)| {
                evaluate_corpus(embedder, &load_pairs(dir, references)?, Some(*d), options)
            })
            .collect::<Result<_>>()?
    };
    let report = GridReport { reports };
    let text = match format {
        OutputFormat::Json if report.reports.len() == 1 => to_json(&report.reports[0]),
        OutputFormat::Json => to_json(&report),
        OutputFormat::Text => report.render_table(),
        OutputFormat::Markdown => report.render_markdown(),
    };
    emit(out, &text)
}

pub fn cmd_ablate(
    cfg: &RunConfig,
    transcripts: &Path,
    out_dir: &Path,
    log: &mut dyn Write,
) -> Result<()> {
    let inputs = files_by_stem(transcripts)?;
    if inputs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let loaded = inputs
        .iter()
        .map(|(stem, path)| Ok((stem.clone(), load_transcript(path)?)))
        .collect::<Result<Vec<_>>>()?;
    let backends = cfg.backends()?;
    for d in ConfigDescriptor::grid() {
        let mut pcfg = cfg.pipeline.clone();
        pcfg.segmenter.strategy = d.strategy;
        pcfg.include_action_items = d.action_items;
        let pipeline = Pipeline::new(backends.clone(), pcfg)?;
        let dir = out_dir.join(d.dir_name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (stem, transcript) in &loaded {
            let summary = pipeline.summarize_transcript(transcript)?.summary;
            write_file(&dir.join(format!("{stem}.txt")), &format!("{summary}\n"))?;
        }
        let _ = writeln!(log, "wrote {}", dir.display());
    }
    Ok(())
}
