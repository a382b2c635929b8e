use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use voxclass::eval::{FrequencyMode, Ordering, Population};
use voxclass::gda::Task;
use voxclass::riskopt::RiskMode;
use voxclass::Error;

mod commands;

/// Voice-quality classification from short sound spectra.
#[derive(Parser, Debug)]
#[command(name = "voxclass", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus: one WAV per take plus manifest.csv.
    Synth(SynthArgs),
    /// Select probe frequencies and fit a model on a whole manifest.
    Train(TrainArgs),
    /// Classify WAV files with a trained model.
    Classify(ClassifyArgs),
    /// Cross-validate and write a CSV of accuracies.
    Evaluate(EvaluateArgs),
    /// Correlate per-subject posteriors with external scores.
    Correlate(CorrelateArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory; its parent must exist.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Group sizes as male singers, female singers, male non-singers,
    /// female non-singers.
    #[arg(long, default_value = "11,12,14,13")]
    counts: String,
}

#[derive(Args, Debug, Clone)]
pub struct SelectArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "mc-samples", default_value_t = 4000)]
    mc_samples: usize,
    #[arg(long, default_value_t = voxclass::gda::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    /// Coarse scan stride over the grid (1 scans every point).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,
    #[arg(long = "max-passes", default_value_t = 10)]
    max_passes: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Risk estimator: monte-carlo or empirical.
    #[arg(long, default_value = "monte-carlo")]
    risk: RiskMode,
    /// Subjects taking part: all, singers, males, females.
    #[arg(long, default_value = "all")]
    population: Population,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    task: Task,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=64))]
    d: u64,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Frequency CSV; defaults to the model path with a .freq.csv suffix.
    #[arg(long)]
    frequencies: Option<PathBuf>,
    #[command(flatten)]
    select: SelectArgs,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(required = true)]
    wavs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    task: Task,
    /// Dimensions, e.g. `4`, `1..8` or `1,2,4`.
    #[arg(long, default_value = "1..8")]
    d: String,
    /// optimized, random or both.
    #[arg(long, default_value = "optimized")]
    mode: String,
    /// Joint-label ordering (independent, sn-mf, mf-sn, joint) or `all`.
    #[arg(long)]
    ordering: Option<String>,
    /// Analysis lengths in seconds, e.g. `0.1,0.5,1.0`.
    #[arg(long)]
    durations: Option<String>,
    #[arg(long, default_value_t = 20)]
    folds: usize,
    /// CSV to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    select: SelectArgs,
}

#[derive(Args, Debug)]
struct CorrelateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// `subject_id,score` lines.
    #[arg(long)]
    scores: PathBuf,
    /// Class whose posterior is correlated.
    #[arg(long, default_value = "S")]
    class: String,
}

/// Failures with the exit code they map to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Format(_) | Error::Unsupported(_) | Error::Parse(_) => 2,
        _ => 3,
    }
}

pub fn parse_dims(s: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Usage(format!("bad --d `{s}`"));
    let dims: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..=b).collect()
    } else {
        s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if dims.is_empty() || dims.contains(&0) {
        return Err(Failure::Usage("--d values must be at least 1".into()));
    }
    Ok(dims)
}

pub fn parse_modes(s: &str) -> Result<Vec<FrequencyMode>, Failure> {
    match s {
        "both" => Ok(vec![FrequencyMode::Optimized, FrequencyMode::Random]),
        other => Ok(vec![other.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?]),
    }
}

pub fn parse_orderings(s: &str) -> Result<Vec<Ordering>, Failure> {
    match s {
        "all" => Ok(Ordering::ALL.to_vec()),
        other => other
            .split(',')
            .map(|o| o.trim().parse().map_err(|e: Error| Failure::Usage(e.to_string())))
            .collect(),
    }
}

pub fn parse_durations(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| Failure::Usage(format!("bad duration `{v}`"))))
        .collect()
}

/// The parent directory of an output path must already exist.
pub fn check_output(path: &Path) -> Result<(), Failure> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(Failure::Run(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", parent.display()),
        ))));
    }
    Ok(())
}

pub fn check_input(path: &Path) -> Result<(), Failure> {
    if !path.is_file() {
        return Err(Failure::Run(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        ))));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a.out, a.seed, &a.counts),
        Command::Train(a) => commands::train(&a),
        Command::Classify(a) => commands::classify(&a.model, &a.wavs),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Correlate(a) => commands::correlate(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
