//! Command-line front end.
//!
//! Exit status is 0 on success, 2 on usage errors and 1 on domain errors; the
//! error name (e.g. `UnknownParticipant`) is printed on standard error. Log
//! verbosity follows `COLLAB_PPM_LOG` (`error`, `warn`, `info`, `debug`).

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::event_model::EventLog;
use crate::ingest::{parse_csv, parse_xes, write_csv, write_xes, ColumnMapping};
use crate::merge::{merge_logs, split_log};
use crate::predict::{
    evaluate, generate_dataset, train, Dataset, DatasetOptions, EncoderConfig, PredictError, Prediction, TrainConfig,
    TrainedModel,
};
use crate::simulate::{builtin_model, parse_model, simulate, CollabModel, SimConfig};
use crate::tasks::{PredictionTask, TaskRequest};
use crate::views::{apply_view, Content, DirectionFilter, Scope, ViewSpec};
use crate::Error;

pub const LOG_ENV: &str = "COLLAB_PPM_LOG";

/// Header of prediction files.
pub const PREDICTION_HEADER: [&str; 3] = ["case_id", "prediction", "confidence"];

#[derive(Debug, Parser)]
#[command(
    name = "collab-ppm",
    version,
    about = "Predictive monitoring for collaborative processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a collaboration log from a builtin model or a model file.
    Simulate(SimulateArgs),
    /// Merge participant logs into one collaboration log.
    Merge(MergeArgs),
    /// Apply a view to a log.
    View(ViewCmdArgs),
    /// Build the prefix dataset of a prediction task.
    Dataset(DatasetArgs),
    /// Train a frequency model from a dataset or from a log and a task.
    Train(TrainArgs),
    /// Predict the target of every trace of an incomplete log.
    Predict(PredictArgs),
    /// Score a model on a log of complete traces.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormat {
    Xes,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Process,
    Participant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContentArg {
    All,
    Messages,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Any,
    Send,
    Receive,
}

impl From<ContentArg> for Content {
    fn from(c: ContentArg) -> Self {
        match c {
            ContentArg::All => Content::AllEvents,
            ContentArg::Messages => Content::MessagesOnly,
        }
    }
}

impl From<DirectionArg> for DirectionFilter {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Any => DirectionFilter::Any,
            DirectionArg::Send => DirectionFilter::SendOnly,
            DirectionArg::Receive => DirectionFilter::ReceiveOnly,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; `-` or absent writes to standard output.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Log format of the output (default: from the file extension, else csv).
    #[arg(long, value_enum)]
    pub format: Option<LogFormat>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Builtin model name (buyer_reseller, healthcare) or path to a model file.
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Also write one log per participant into this directory.
    #[arg(long)]
    pub split: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ViewArgs {
    #[arg(long, value_enum)]
    pub scope: Option<ScopeArg>,
    #[arg(long)]
    pub participant: Option<String>,
    #[arg(long, value_enum)]
    pub content: Option<ContentArg>,
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
}

#[derive(Debug, Args)]
pub struct ViewCmdArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub view: ViewArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    /// Task id, e.g. next-message-send or remaining-time-process.
    #[arg(long)]
    pub task: Option<String>,
    /// Participant or message label for outcome tasks.
    #[arg(long)]
    pub target: Option<String>,
    #[command(flatten)]
    pub view: ViewArgs,
}

#[derive(Debug, Args)]
pub struct EncoderArgs {
    /// Context length (number of trailing activities).
    #[arg(long)]
    pub order: Option<usize>,
    /// Append the last event's participant to the encoded state.
    #[arg(long)]
    pub with_participant: bool,
    /// Append the last event's direction to the encoded state.
    #[arg(long)]
    pub with_direction: bool,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub task: TaskArgs,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    /// Drop outcome rows whose outcome is already visible in the prefix.
    #[arg(long)]
    pub drop_witnessed: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Log of complete traces (requires --task).
    #[arg(conflicts_with = "dataset")]
    pub input: Option<PathBuf>,
    /// Dataset file written by `dataset`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub task: TaskArgs,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    /// Minimum support of a context before backing off to a shorter one.
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Log of running cases; each trace is one prefix.
    pub input: PathBuf,
    /// Fails unless the model was trained for this task.
    #[command(flatten)]
    pub task: TaskArgs,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Log of complete traces.
    pub input: PathBuf,
    /// Metrics CSV; the readable summary goes to standard output.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage { name: &'static str, message: String },
    Domain(Error),
}

macro_rules! domain_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Domain(e.into())
            }
        }
    )*};
}

domain_from!(
    Error,
    io::Error,
    crate::ingest::IngestError,
    crate::merge::MergeError,
    crate::views::ViewError,
    PredictError,
    crate::simulate::ModelError
);

fn usage(name: &'static str, message: impl Into<String>) -> CliError {
    CliError::Usage {
        name,
        message: message.into(),
    }
}

fn is_stdout(path: Option<&Path>) -> bool {
    path.is_none_or(|p| p.as_os_str() == "-")
}

/// Writes through a temporary file in the target directory and renames it.
fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) if !is_stdout(path) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(p).map_err(|e| Error::Io(e.error))?;
            info!("wrote {}", p.display());
            Ok(())
        }
        _ => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn detect_format(path: &Path, bytes: &[u8]) -> LogFormat {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("xes") | Some("xml") => LogFormat::Xes,
        Some("csv") => LogFormat::Csv,
        _ if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'<') => LogFormat::Xes,
        _ => LogFormat::Csv,
    }
}

pub fn read_log(path: &Path) -> Result<EventLog, Error> {
    let bytes = fs::read(path)?;
    let log = match detect_format(path, &bytes) {
        LogFormat::Xes => parse_xes(&bytes)?,
        LogFormat::Csv => parse_csv(&bytes, &ColumnMapping::default())?,
    };
    info!(
        "read {} traces, {} events from {}",
        log.len(),
        log.event_count(),
        path.display()
    );
    Ok(log)
}

fn output_format(output: &OutputArgs) -> LogFormat {
    output.format.unwrap_or_else(|| match &output.out {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("xes")) => LogFormat::Xes,
        _ => LogFormat::Csv,
    })
}

pub fn serialize_log(log: &EventLog, format: LogFormat) -> Vec<u8> {
    match format {
        LogFormat::Xes => write_xes(log),
        LogFormat::Csv => write_csv(log, &ColumnMapping::default()),
    }
}

fn view_from(args: &ViewArgs) -> Result<ViewSpec, CliError> {
    let scope = match (args.scope, &args.participant) {
        (Some(ScopeArg::Participant) | None, Some(p)) => Scope::Participant(p.clone()),
        (Some(ScopeArg::Participant), None) => {
            return Err(usage("MissingParticipant", "--scope participant needs --participant"))
        }
        (Some(ScopeArg::Process), Some(_)) => {
            return Err(usage("TaskConflict", "--participant conflicts with --scope process"))
        }
        (Some(ScopeArg::Process) | None, None) => Scope::Process,
    };
    Ok(ViewSpec {
        scope,
        content: args.content.map_or(Content::AllEvents, Into::into),
        direction: args.direction.map_or(DirectionFilter::Any, Into::into),
    })
}

fn task_from(args: &TaskArgs) -> Result<Option<PredictionTask>, CliError> {
    let Some(id) = &args.task else { return Ok(None) };
    let request = TaskRequest {
        id: id.clone(),
        participant_scope: args.view.scope.map(|s| s == ScopeArg::Participant),
        participant: args.view.participant.clone(),
        direction: args.view.direction.map(Into::into),
        content: args.view.content.map(Into::into),
        target: args.target.clone(),
    };
    request.resolve().map(Some).map_err(|e| usage(e.name(), e.to_string()))
}

fn encoder_from(args: &EncoderArgs) -> EncoderConfig {
    let default = EncoderConfig::default();
    EncoderConfig {
        order: args.order.unwrap_or(default.order),
        with_participant: args.with_participant,
        with_direction: args.with_direction,
    }
}

fn load_model(name: &str) -> Result<CollabModel, Error> {
    let path = Path::new(name);
    if path.is_file() {
        Ok(parse_model(&fs::read_to_string(path)?)?)
    } else {
        Ok(builtin_model(name)?)
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let log = simulate(&model, &SimConfig::new(args.cases, args.seed));
    info!("simulated {} cases of {}", log.len(), model.name());
    let format = output_format(&args.output);
    write_output(args.output.out.as_deref(), &serialize_log(&log, format))?;
    if let Some(dir) = &args.split {
        fs::create_dir_all(dir).map_err(Error::from)?;
        let ext = match format {
            LogFormat::Xes => "xes",
            LogFormat::Csv => "csv",
        };
        for (participant, part) in split_log(&log) {
            let path = dir.join(format!("{participant}.{ext}"));
            write_output(Some(&path), &serialize_log(&part, format))?;
        }
    }
    Ok(())
}

fn cmd_merge(args: &MergeArgs) -> Result<(), CliError> {
    let parts = args.inputs.iter().map(|p| read_log(p)).collect::<Result<Vec<_>, _>>()?;
    let merged = merge_logs(&parts)?;
    write_output(
        args.output.out.as_deref(),
        &serialize_log(&merged, output_format(&args.output)),
    )
}

fn cmd_view(args: &ViewCmdArgs) -> Result<(), CliError> {
    let log = read_log(&args.input)?;
    let viewed = apply_view(&log, &view_from(&args.view)?)?;
    write_output(
        args.output.out.as_deref(),
        &serialize_log(&viewed, output_format(&args.output)),
    )
}

fn required_task(args: &TaskArgs) -> Result<PredictionTask, CliError> {
    task_from(args)?.ok_or_else(|| usage("MissingTask", "--task is required"))
}

fn build_dataset(
    input: &Path,
    task: &TaskArgs,
    encoder: &EncoderArgs,
    drop_witnessed: bool,
) -> Result<Dataset, CliError> {
    let task = required_task(task)?;
    let log = read_log(input)?;
    let options = DatasetOptions {
        drop_witnessed_outcomes: drop_witnessed,
    };
    let dataset = generate_dataset(&log, &task, &encoder_from(encoder), &options)?;
    info!("{} rows for {}", dataset.len(), task);
    Ok(dataset)
}

fn cmd_dataset(args: &DatasetArgs) -> Result<(), CliError> {
    let dataset = build_dataset(&args.input, &args.task, &args.encoder, args.drop_witnessed)?;
    let mut text = serde_json::to_string_pretty(&dataset).expect("dataset serializes");
    text.push('\n');
    write_output(args.out.as_deref(), text.as_bytes())
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let dataset = match (&args.dataset, &args.input) {
        (Some(path), None) => {
            if args.task.task.is_some() {
                return Err(usage("TaskConflict", "a dataset already fixes the task; drop --task"));
            }
            let text = fs::read_to_string(path).map_err(Error::from)?;
            serde_json::from_str::<Dataset>(&text)
                .map_err(|e| Error::from(PredictError::ModelFormat(format!("dataset: {e}"))))?
        }
        (None, Some(input)) => build_dataset(input, &args.task, &args.encoder, false)?,
        _ => return Err(usage("MissingInput", "give a log with --task, or --dataset")),
    };
    let config = TrainConfig {
        order: args.encoder.order.unwrap_or(dataset.provenance.encoder.order),
        min_count: args.min_count,
    };
    let model = train(&dataset, &config)?;
    write_output(args.out.as_deref(), model.to_json().as_bytes())
}

fn read_model(path: &Path) -> Result<TrainedModel, Error> {
    Ok(TrainedModel::from_json(&fs::read_to_string(path)?)?)
}

fn csv_bytes(rows: impl IntoIterator<Item = [String; 3]>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(PREDICTION_HEADER).expect("in-memory");
    for r in rows {
        w.write_record(&r).expect("in-memory");
    }
    w.into_inner().expect("in-memory")
}

fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let model = read_model(&args.model)?;
    if let Some(requested) = task_from(&args.task)? {
        if requested != model.task() {
            return Err(Error::from(PredictError::ModelTaskMismatch {
                model: model.task().to_string(),
                requested: requested.to_string(),
            })
            .into());
        }
    }
    let log = read_log(&args.input)?;
    let mut rows = Vec::with_capacity(log.len());
    for trace in log.traces() {
        let row = match model.predict_events::<f64>(&trace.events) {
            Ok(Prediction::Label { label, confidence, .. }) => [trace.case_id.clone(), label, confidence.to_string()],
            Ok(Prediction::Value { estimate, .. }) => [trace.case_id.clone(), estimate.to_string(), String::new()],
            Err(PredictError::PrefixEmptyInView) => {
                warn!("{}: no event in the model view", trace.case_id);
                [trace.case_id.clone(), String::new(), String::new()]
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(row);
    }
    write_output(args.out.as_deref(), &csv_bytes(rows))
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let model = read_model(&args.model)?;
    let log = read_log(&args.input)?;
    let metrics = evaluate::<f64>(&model, &log)?;
    if let Some(out) = args.out.as_deref().filter(|p| !is_stdout(Some(p))) {
        write_output(Some(out), metrics.to_csv().as_bytes())?;
        print!("{metrics}");
    } else {
        write_output(None, metrics.to_csv().as_bytes())?;
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Merge(a) => cmd_merge(a),
        Command::View(a) => cmd_view(a),
        Command::Dataset(a) => cmd_dataset(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().filter_or(LOG_ENV, "warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage { name, message }) => {
            eprintln!("error: {name}: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(1)
        }
    }
}
