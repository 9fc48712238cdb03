//! CSV curves and the JSON analysis report.
//!
//! JSON artifacts are canonical: keys sorted, two-space indentation, floats
//! in shortest round-trip form, trailing newline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::curve::{BrightnessCurve, CurveChannel, CurveError, CurveSet};
use crate::gesture::{Archetype, FitRecord, Gesture, ShapeKind, TransientInfo};
use crate::ingest::StreamInfo;
use crate::segmentation::Segment;

pub const REPORT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub fn write_csv(curves: &CurveSet) -> String {
    let list: Vec<&BrightnessCurve> = curves.iter().collect();
    let mut out = String::from("time_s");
    for c in &list {
        out.push(',');
        out.push_str(c.channel().name());
    }
    out.push('\n');
    let Some(first) = list.first() else {
        return out;
    };
    for i in 0..first.len() {
        write!(out, "{:.6}", first.time_of(i)).unwrap();
        for c in &list {
            write!(out, ",{:.6}", c.values()[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parsed CSV columns: the time column and one column per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub times: Vec<f64>,
    pub columns: Vec<(CurveChannel, Vec<f64>)>,
}

pub fn read_csv(text: &str) -> Result<CsvTable, ReportError> {
    let csv_err = |line: usize, reason: String| ReportError::Csv { line, reason };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| csv_err(1, "empty file".into()))?;
    let mut names = header.split(',');
    if names.next() != Some("time_s") {
        return Err(csv_err(1, "first column must be time_s".into()));
    }
    let channels = names
        .map(|n| n.parse::<CurveChannel>().map_err(|e| csv_err(1, e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if channels.is_empty() {
        return Err(csv_err(1, "no curve columns".into()));
    }
    if channels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(csv_err(1, "columns must be distinct and in canonical order".into()));
    }

    let mut times = Vec::new();
    let mut cols = vec![Vec::new(); channels.len()];
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != channels.len() + 1 {
            return Err(csv_err(i + 1, format!("expected {} fields, found {}", channels.len() + 1, fields.len())));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| csv_err(i + 1, format!("not a number: {s:?}")))
        };
        times.push(num(fields[0])?);
        for (col, f) in cols.iter_mut().zip(&fields[1..]) {
            col.push(num(f)?);
        }
    }
    if times.is_empty() {
        return Err(csv_err(2, "no data rows".into()));
    }
    Ok(CsvTable { times, columns: channels.into_iter().zip(cols).collect() })
}

/// Builds curves from CSV text. The sample rate comes from `source` when
/// known, otherwise from the first and last time stamps.
pub fn curves_from_csv(text: &str, source: Option<StreamInfo>) -> Result<CurveSet, ReportError> {
    let table = read_csv(text)?;
    let n = table.times.len();
    let rate = match &source {
        Some(info) => info.fps.as_f64(),
        None if n >= 2 => (n - 1) as f64 / (table.times[n - 1] - table.times[0]),
        None => {
            return Err(ReportError::Csv {
                line: 2,
                reason: "a single row needs source metadata to know its rate".into(),
            })
        }
    };
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(ReportError::Csv { line: 2, reason: "time stamps must increase".into() });
    }
    let mut set = CurveSet::new(source);
    for (channel, values) in table.columns {
        set.insert(BrightnessCurve::new(channel, rate, table.times[0], values)?)?;
    }
    Ok(set)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransientReport {
    pub onset_idx: usize,
    pub t_s: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentReport {
    pub start_idx: usize,
    pub end_idx: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub kind: ShapeKind,
    pub archetype: Archetype,
    /// Table archetype when a configured override replaced it.
    pub classified_archetype: Option<Archetype>,
    pub transient: Option<TransientReport>,
    pub granularity: f64,
    pub fit: FitRecord,
    pub body_offset: usize,
    pub mean_brightness: f64,
    pub fit_rrmse: f64,
    pub motif_id: Option<u32>,
}

impl SegmentReport {
    pub fn from_gesture(g: &Gesture, curve: &BrightnessCurve, classified: Option<Archetype>) -> Self {
        SegmentReport {
            start_idx: g.segment.start,
            end_idx: g.segment.end,
            start_s: curve.time_of(g.segment.start),
            end_s: curve.time_of(g.segment.end),
            kind: g.kind,
            archetype: g.archetype,
            classified_archetype: classified,
            transient: g.transient.map(|t| TransientReport {
                onset_idx: t.onset_idx,
                t_s: curve.time_of(g.segment.start + t.onset_idx),
                amplitude: t.amplitude,
            }),
            granularity: g.granularity,
            fit: g.fit.clone(),
            body_offset: g.body_offset,
            mean_brightness: g.mean_brightness,
            fit_rrmse: g.fit_rrmse,
            motif_id: g.motif_id,
        }
    }

    pub fn to_gesture(&self) -> Gesture {
        Gesture {
            segment: Segment::new(self.start_idx, self.end_idx),
            kind: self.kind,
            transient: self.transient.as_ref().map(|t| TransientInfo {
                onset_idx: t.onset_idx,
                amplitude: t.amplitude,
            }),
            granularity: self.granularity,
            fit: self.fit.clone(),
            body_offset: self.body_offset,
            mean_brightness: self.mean_brightness,
            fit_rrmse: self.fit_rrmse,
            motif_id: self.motif_id,
            archetype: self.archetype,
        }
    }
}

/// The smoothed, resampled luma curve the segments index into.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisCurve {
    pub t0_s: f64,
    pub rate_hz: f64,
    pub values: Vec<f64>,
}

impl AnalysisCurve {
    pub fn to_curve(&self) -> Result<BrightnessCurve, CurveError> {
        BrightnessCurve::new(CurveChannel::Luma, self.rate_hz, self.t0_s, self.values.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisReport {
    pub version: String,
    pub source: Option<StreamInfo>,
    pub rate_hz: f64,
    pub channels: Vec<CurveChannel>,
    pub segments: Vec<SegmentReport>,
    pub analysis_curve: AnalysisCurve,
    pub config: PipelineConfig,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn canonical_json<T: Serialize>(value: &T) -> String {
    // `Value` keeps object keys in a sorted map
    let v = serde_json::to_value(value).expect("report types serialize");
    let mut s = serde_json::to_string_pretty(&v).expect("values serialize");
    s.push('\n');
    s
}
