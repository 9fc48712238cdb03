//! Command-line front end. Exit status: 0 success, 1 input error, 2 configuration or usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::curve::CurveChannel;
use crate::ingest::FrameRate;
use crate::midi::write_smf;
use crate::pipeline::{
    analyze, compose_report, extract, load_curves, load_report, plot_curves, run_pipeline, source_json,
    source_sidecar_path, write_output, ExtractOptions, PipelineError,
};
use crate::report::write_csv;

#[derive(Debug, Parser)]
#[command(name = "lumiscore", version, about = "Compose a MIDI score from the brightness curve of a film")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct SourceArgs {
    /// Y4M file, PPM/PGM image or directory of images, or raw RGB24 with a JSON sidecar.
    #[arg(long)]
    input: PathBuf,
    /// Frame rate for image sequences, as `N` or `N/D`.
    #[arg(long, default_value = "24", value_parser = parse_fps)]
    fps: FrameRate,
    /// Photometry worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Measure per-frame brightness curves into a CSV file.
    Extract {
        #[command(flatten)]
        source: SourceArgs,
        /// Comma-separated channels: luma, red, green, blue, contrast_rms, contrast_spread.
        #[arg(long, default_value = "luma")]
        channels: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment and classify the luma curve of a CSV file.
    Analyze {
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an analysis report to a Standard MIDI File.
    Compose {
        #[arg(long)]
        analysis: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw the luma curve, with sections when an analysis is given.
    Plot {
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        analysis: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage and write all artifacts into one directory.
    Pipeline {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_fps(s: &str) -> Result<FrameRate, String> {
    let (num, den) = s.split_once('/').unwrap_or((s, "1"));
    let num = num.trim().parse().map_err(|_| format!("bad frame rate {s:?}"))?;
    let den = den.trim().parse().map_err(|_| format!("bad frame rate {s:?}"))?;
    FrameRate::new(num, den).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Pipeline(PipelineError),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, PipelineError> {
    match path {
        Some(p) => Ok(PipelineConfig::load(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn input_error(path: &Path, e: impl ToString) -> PipelineError {
    PipelineError::Input { path: path.to_path_buf(), message: e.to_string() }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Extract { source, channels, out } => {
            let channels = channels
                .split(',')
                .map(|c| c.trim().parse::<CurveChannel>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::Usage(format!("--channels: {e}")))?;
            let opts = ExtractOptions { channels, sequence_fps: source.fps, threads: source.threads };
            let curves = extract(&source.input, &opts)?;
            write_output(&out, write_csv(&curves).as_bytes())?;
            write_output(&source_sidecar_path(&out), source_json(&curves).as_bytes())?;
        }
        Command::Analyze { curves, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let set = load_curves(&curves)?;
            write_output(&out, analyze(&set, &cfg, &curves)?.to_json().as_bytes())?;
        }
        Command::Compose { analysis, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let report = load_report(&analysis)?;
            let score = compose_report(&report, &cfg).map_err(|e| input_error(&analysis, e))?;
            write_output(&out, &write_smf(&score))?;
        }
        Command::Plot { curves, analysis, out } => {
            let set = load_curves(&curves)?;
            let report = analysis.as_deref().map(load_report).transpose()?;
            write_output(&out, plot_curves(&set, report.as_ref(), &curves)?.as_bytes())?;
        }
        Command::Pipeline { source, config, out_dir } => {
            let cfg = load_config(config.as_deref())?;
            let opts = ExtractOptions { sequence_fps: source.fps, threads: source.threads, ..ExtractOptions::default() };
            run_pipeline(&source.input, &cfg, &out_dir, &opts)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
