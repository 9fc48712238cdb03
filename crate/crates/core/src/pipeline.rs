//! The stages behind the command-line tool.
//!
//! `run_pipeline` passes every intermediate artifact through its serialized
//! form, so running the stages one by one yields the same bytes.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::compose::{compose, Score};
use crate::config::{ConfigError, PipelineConfig};
use crate::curve::{CurveChannel, CurveSet};
use crate::gesture::{assign_motifs, classify};
use crate::ingest::{open_source, FrameRate, StreamInfo};
use crate::midi::write_smf;
use crate::photometry::{extract_curves, PhotometryError};
use crate::plot::{plot_svg, Section};
use crate::prep::{resample, smooth, smooth_segment, window_samples};
use crate::report::{
    canonical_json, curves_from_csv, write_csv, AnalysisCurve, AnalysisReport, ReportError, SegmentReport,
    REPORT_VERSION,
};
use crate::segmentation::{estimate_noise, segment, SegmentationError, SegmentationParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl PipelineError {
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 1,
        }
    }

    fn input(path: &Path, message: impl ToString) -> Self {
        PipelineError::Input { path: path.to_path_buf(), message: message.to_string() }
    }

    fn config(key: &str, message: impl ToString) -> Self {
        PipelineError::Config(ConfigError::Invalid {
            file: PathBuf::from("<config>"),
            key: key.to_string(),
            message: message.to_string(),
        })
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Clone, Debug)]
pub struct ExtractOptions {
    pub channels: Vec<CurveChannel>,
    /// Frame rate assumed for image sequences.
    pub sequence_fps: FrameRate,
    pub threads: Option<usize>,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            channels: vec![CurveChannel::Luma],
            sequence_fps: FrameRate { num: 24, den: 1 },
            threads: None,
        }
    }
}

pub fn extract(input: &Path, opts: &ExtractOptions) -> Result<CurveSet> {
    let mut source = open_source(input, opts.sequence_fps).map_err(|e| PipelineError::input(input, e))?;
    extract_curves(&mut *source, &opts.channels, opts.threads).map_err(|e| match e {
        PhotometryError::Ingest(e) => PipelineError::input(input, e),
        other => PipelineError::input(input, other),
    })
}

/// Where the stream metadata of a curves file is kept.
pub fn source_sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("source.json")
}

pub fn source_json(curves: &CurveSet) -> String {
    canonical_json(&curves.source)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

/// Reads a curves CSV and, when present, its stream metadata sidecar.
pub fn load_curves(csv: &Path) -> Result<CurveSet> {
    let text = read_text(csv)?;
    let sidecar = source_sidecar_path(csv);
    let source: Option<StreamInfo> = if sidecar.is_file() {
        serde_json::from_str(&read_text(&sidecar)?).map_err(|e| PipelineError::input(&sidecar, e))?
    } else {
        None
    };
    curves_from_csv(&text, source).map_err(|e| PipelineError::input(csv, e))
}

fn analysis_error(curves_path: &Path, e: SegmentationError) -> PipelineError {
    match e {
        SegmentationError::UnsortedBoundaries
        | SegmentationError::BoundaryOutOfRange(_)
        | SegmentationError::SegmentBelowMinimum { .. } => PipelineError::config("manual_boundaries_s", e),
        SegmentationError::InvalidParams(_) => PipelineError::config("analysis", e),
        SegmentationError::CurveTooShort { .. } => PipelineError::input(curves_path, e),
    }
}

/// Segments and classifies the luma curve of `curves`.
///
/// `curves_path` only labels errors.
pub fn analyze(curves: &CurveSet, cfg: &PipelineConfig, curves_path: &Path) -> Result<AnalysisReport> {
    let luma = curves
        .get(CurveChannel::Luma)
        .ok_or_else(|| PipelineError::input(curves_path, "analysis needs a luma column"))?;
    let prep = cfg.prep_params();
    let raw = resample(luma, prep.analysis_rate).map_err(|e| PipelineError::config("analysis.rate_hz", e))?;
    let smoothed = smooth(&raw, prep.smooth_window);
    let rate = raw.sample_rate();

    // resampling correlates neighbouring samples, so noise is measured at the source rate
    let seg_params = SegmentationParams {
        noise_sigma: estimate_noise(luma.values()).ok(),
        ..cfg.segmentation_params()
    };
    let segments = segment(&raw, &seg_params).map_err(|e| analysis_error(curves_path, e))?;
    let width = if prep.smooth_window > 0.0 { window_samples(prep.smooth_window, rate) } else { 1 };
    let params = cfg.classify_params();
    let mut gestures = segments
        .iter()
        .map(|seg| {
            let sm = smooth_segment(raw.values(), seg.start, seg.end, width);
            classify(*seg, &sm, &raw.values()[seg.start..seg.end], rate, &params)
                .map_err(|e| PipelineError::input(curves_path, e))
        })
        .collect::<Result<Vec<_>>>()?;
    assign_motifs(&mut gestures, rate, cfg.analysis.motif_epsilon);

    let mut classified = vec![None; gestures.len()];
    for (i, ov) in cfg.overrides.iter().flatten().enumerate() {
        let Some(g) = gestures.get_mut(ov.segment_index) else {
            return Err(PipelineError::config(
                &format!("overrides[{i}].segment_index"),
                format!("analysis found {} segments", segments.len()),
            ));
        };
        classified[ov.segment_index] = Some(g.archetype);
        g.archetype = ov.archetype;
    }

    Ok(AnalysisReport {
        version: REPORT_VERSION.to_string(),
        source: curves.source.clone(),
        rate_hz: rate,
        channels: curves.channels(),
        segments: gestures
            .iter()
            .zip(classified)
            .map(|(g, c)| SegmentReport::from_gesture(g, &smoothed, c))
            .collect(),
        analysis_curve: AnalysisCurve {
            t0_s: smoothed.t0(),
            rate_hz: rate,
            values: smoothed.values().to_vec(),
        },
        config: cfg.clone(),
    })
}

pub fn load_report(path: &Path) -> Result<AnalysisReport> {
    AnalysisReport::from_json(&read_text(path)?).map_err(|e| PipelineError::input(path, e))
}

pub fn compose_report(report: &AnalysisReport, cfg: &PipelineConfig) -> std::result::Result<Score, ReportError> {
    let curve = report.analysis_curve.to_curve()?;
    let gestures: Vec<_> = report.segments.iter().map(SegmentReport::to_gesture).collect();
    Ok(compose(&gestures, &curve, &cfg.compose_params(), cfg.seed))
}

/// SVG of the luma curve with the report's sections, if any.
pub fn plot_curves(curves: &CurveSet, report: Option<&AnalysisReport>, curves_path: &Path) -> Result<String> {
    let luma = curves
        .get(CurveChannel::Luma)
        .ok_or_else(|| PipelineError::input(curves_path, "plot needs a luma column"))?;
    let sections: Vec<Section> = report
        .map(|r| {
            r.segments
                .iter()
                .map(|s| Section { start_s: s.start_s, end_s: s.end_s, label: format!("{:?}", s.archetype) })
                .collect()
        })
        .unwrap_or_default();
    Ok(plot_svg(luma, &sections))
}

/// Serialized outputs of one pipeline run.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub curves_csv: String,
    pub source_json: String,
    pub analysis_json: String,
    pub score_mid: Vec<u8>,
    pub plot_svg: String,
}

pub const CURVES_FILE: &str = "curves.csv";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const SCORE_FILE: &str = "score.mid";
pub const PLOT_FILE: &str = "plot.svg";

/// Runs every stage in memory.
pub fn build_artifacts(input: &Path, cfg: &PipelineConfig, opts: &ExtractOptions) -> Result<Artifacts> {
    let extracted = extract(input, opts)?;
    let curves_csv = write_csv(&extracted);
    let source_json = source_json(&extracted);
    let csv_label = Path::new(CURVES_FILE);

    let curves = curves_from_csv(&curves_csv, extracted.source.clone()).map_err(|e| PipelineError::input(csv_label, e))?;
    let analysis_json = analyze(&curves, cfg, csv_label)?.to_json();
    let report = AnalysisReport::from_json(&analysis_json).map_err(|e| PipelineError::input(Path::new(ANALYSIS_FILE), e))?;
    let score = compose_report(&report, cfg).map_err(|e| PipelineError::input(Path::new(ANALYSIS_FILE), e))?;
    Ok(Artifacts {
        plot_svg: plot_curves(&curves, Some(&report), csv_label)?,
        score_mid: write_smf(&score),
        curves_csv,
        source_json,
        analysis_json,
    })
}

pub fn run_pipeline(input: &Path, cfg: &PipelineConfig, out_dir: &Path, opts: &ExtractOptions) -> Result<Artifacts> {
    let art = build_artifacts(input, cfg, opts)?;
    std::fs::create_dir_all(out_dir).map_err(|source| PipelineError::Io { path: out_dir.to_path_buf(), source })?;
    let csv = out_dir.join(CURVES_FILE);
    write_file(&csv, art.curves_csv.as_bytes())?;
    write_file(&source_sidecar_path(&csv), art.source_json.as_bytes())?;
    write_file(&out_dir.join(ANALYSIS_FILE), art.analysis_json.as_bytes())?;
    write_file(&out_dir.join(SCORE_FILE), &art.score_mid)?;
    write_file(&out_dir.join(PLOT_FILE), art.plot_svg.as_bytes())?;
    Ok(art)
}

pub fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    write_file(path, bytes)
}
