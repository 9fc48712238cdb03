//! Shape classification, transients, granularity and motif grouping.
//!
//! A segment is described by three orthogonal attributes (envelope kind,
//! transient, granularity) and the archetype table combines them into one
//! musical gesture. Fit parameters are expressed relative to the body start,
//! which is `body_offset` samples into the segment.

pub mod fit;

use serde::{Deserialize, Serialize};

use crate::prep::{residual_roughness, DEFAULT_ROUGHNESS_SATURATION};
use crate::segmentation::Segment;
use fit::{bic, fit_exponential, fit_linear, fit_staircase, tau_grid, FitError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapeKind {
    LinearRise,
    LinearDecay,
    ExponentialRise,
    ExponentialDecay,
    Plateau,
    Staircase,
    Chaotic,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 7] = [
        ShapeKind::LinearRise,
        ShapeKind::LinearDecay,
        ShapeKind::ExponentialRise,
        ShapeKind::ExponentialDecay,
        ShapeKind::Plateau,
        ShapeKind::Staircase,
        ShapeKind::Chaotic,
    ];

    pub fn index(self) -> usize {
        ShapeKind::ALL.iter().position(|k| *k == self).unwrap()
    }

    pub fn is_rise(self) -> bool {
        matches!(self, ShapeKind::LinearRise | ShapeKind::ExponentialRise)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Archetype {
    ChordResonance,
    ChordArpeggio,
    TremoloScratch,
    ChordHeld,
    ArpeggioDetached,
    GranularTexture,
    CrescendoHeld,
    DiminuendoHeld,
}

impl Archetype {
    pub const ALL: [Archetype; 8] = [
        Archetype::ChordResonance,
        Archetype::ChordArpeggio,
        Archetype::TremoloScratch,
        Archetype::ChordHeld,
        Archetype::ArpeggioDetached,
        Archetype::GranularTexture,
        Archetype::CrescendoHeld,
        Archetype::DiminuendoHeld,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransientInfo {
    /// Sample index within the segment.
    pub onset_idx: usize,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitRecord {
    Constant {
        level: f64,
        sse: f64,
    },
    Linear {
        intercept: f64,
        slope_per_s: f64,
        sse: f64,
    },
    Exponential {
        c: f64,
        d: f64,
        tau_s: f64,
        sse: f64,
    },
    Staircase {
        levels: Vec<f64>,
        step_times_s: Vec<f64>,
        sse: f64,
    },
}

impl FitRecord {
    pub fn sse(&self) -> f64 {
        match self {
            FitRecord::Constant { sse, .. }
            | FitRecord::Linear { sse, .. }
            | FitRecord::Exponential { sse, .. }
            | FitRecord::Staircase { sse, .. } => *sse,
        }
    }

    /// Model value `t` seconds after the body start.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            FitRecord::Constant { level, .. } => *level,
            FitRecord::Linear {
                intercept,
                slope_per_s,
                ..
            } => intercept + slope_per_s * t,
            FitRecord::Exponential { c, d, tau_s, .. } => c + d * (-t / tau_s).exp(),
            FitRecord::Staircase {
                levels,
                step_times_s,
                ..
            } => {
                let k = step_times_s.iter().take_while(|s| **s <= t).count();
                levels[k]
            }
        }
    }

    fn staircase_rising(&self) -> bool {
        match self {
            FitRecord::Staircase { levels, .. } => levels.last() > levels.first(),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    pub flat: f64,
    pub transient: f64,
    /// Seconds.
    pub transient_window: f64,
    pub granular: f64,
    pub chaotic_rough: f64,
    pub fit_rrmse: f64,
    pub tau_grid_size: usize,
    pub staircase_m_max: usize,
    pub roughness_saturation: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams {
            flat: 0.03,
            transient: 0.15,
            transient_window: 0.2,
            granular: 0.4,
            chaotic_rough: 0.6,
            fit_rrmse: 0.35,
            tau_grid_size: 64,
            staircase_m_max: 6,
            roughness_saturation: DEFAULT_ROUGHNESS_SATURATION,
        }
    }
}

impl ClassifyParams {
    /// Checks thresholds lie in (0, 1) and grids are non-empty.
    pub fn validate(&self) -> Result<(), String> {
        let unit = [
            ("flat", self.flat),
            ("transient", self.transient),
            ("granular", self.granular),
            ("chaotic_rough", self.chaotic_rough),
            ("fit_rrmse", self.fit_rrmse),
        ];
        for (name, v) in unit {
            if !(v > 0.0 && v < 1.0) {
                return Err(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if !(self.transient_window > 0.0 && self.transient_window.is_finite()) {
            return Err("transient_window must be positive".into());
        }
        if !(self.roughness_saturation > 0.0 && self.roughness_saturation.is_finite()) {
            return Err("roughness_saturation must be positive".into());
        }
        if self.tau_grid_size == 0 {
            return Err("tau_grid_size must be at least 1".into());
        }
        if self.staircase_m_max < 2 {
            return Err("staircase_m_max must be at least 2".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gesture {
    pub segment: Segment,
    pub kind: ShapeKind,
    pub transient: Option<TransientInfo>,
    pub granularity: f64,
    pub fit: FitRecord,
    /// Samples skipped before the fitted body.
    pub body_offset: usize,
    pub mean_brightness: f64,
    pub fit_rrmse: f64,
    pub motif_id: Option<u32>,
    pub archetype: Archetype,
}

/// Largest rise over the first `transient_window` seconds of `body`.
pub fn detect_transient(body: &[f64], rate: f64, params: &ClassifyParams) -> Option<TransientInfo> {
    if body.len() < 2 {
        return None;
    }
    let last = ((params.transient_window * rate + 1e-9).floor() as usize).min(body.len() - 1);
    let (mut onset_idx, mut max) = (0, body[0]);
    for (i, &v) in body.iter().enumerate().take(last + 1) {
        if v > max {
            max = v;
            onset_idx = i;
        }
    }
    let amplitude = max - body[0];
    (amplitude >= params.transient).then_some(TransientInfo {
        onset_idx,
        amplitude,
    })
}

/// The archetype table. Earlier rows take priority.
pub fn archetype_for(
    kind: ShapeKind,
    has_transient: bool,
    granularity: f64,
    rising_steps: bool,
    granular: f64,
) -> Archetype {
    use ShapeKind::*;
    match kind {
        LinearDecay if has_transient => Archetype::ChordResonance,
        ExponentialDecay if has_transient => Archetype::ChordArpeggio,
        Plateau if has_transient => Archetype::ChordHeld,
        Staircase if rising_steps => Archetype::ArpeggioDetached,
        LinearRise | ExponentialRise if granularity >= granular => Archetype::TremoloScratch,
        Chaotic => Archetype::GranularTexture,
        LinearRise | ExponentialRise => Archetype::CrescendoHeld,
        _ => Archetype::DiminuendoHeld,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct Candidate {
    bic: f64,
    kind: ShapeKind,
    fit: FitRecord,
}

fn candidates(body: &[f64], rate: f64, params: &ClassifyParams) -> Result<Vec<Candidate>, FitError> {
    let n = body.len();
    let mut out = Vec::with_capacity(3);

    let lin = fit_linear(body, rate)?;
    out.push(Candidate {
        bic: bic(n, lin.sse, 2),
        kind: if lin.slope >= 0.0 {
            ShapeKind::LinearRise
        } else {
            ShapeKind::LinearDecay
        },
        fit: FitRecord::Linear {
            intercept: lin.intercept,
            slope_per_s: lin.slope,
            sse: lin.sse,
        },
    });

    if n >= 3 {
        let grid = tau_grid(n as f64 / rate, params.tau_grid_size);
        if let Ok(e) = fit_exponential(body, rate, &grid) {
            out.push(Candidate {
                bic: bic(n, e.sse, 3),
                kind: if e.d < 0.0 {
                    ShapeKind::ExponentialRise
                } else {
                    ShapeKind::ExponentialDecay
                },
                fit: FitRecord::Exponential {
                    c: e.c,
                    d: e.d,
                    tau_s: e.tau,
                    sse: e.sse,
                },
            });
        }
    }

    if n >= 2 * params.staircase_m_max {
        let s = fit_staircase(body, rate, params.staircase_m_max)?;
        if s.direction().is_some() {
            out.push(Candidate {
                bic: bic(n, s.sse, 2 * s.pieces() - 1),
                kind: ShapeKind::Staircase,
                fit: FitRecord::Staircase {
                    levels: s.levels,
                    step_times_s: s.step_times,
                    sse: s.sse,
                },
            });
        }
    }
    Ok(out)
}

/// Residual standard deviations of smoothed scatter tolerated on top of the flat threshold.
pub const PLATEAU_SCATTER: f64 = 6.0;

/// Classifies one segment from its smoothed and raw samples.
///
/// The returned gesture has no motif id.
pub fn classify(
    segment: Segment,
    smoothed: &[f64],
    raw: &[f64],
    rate: f64,
    params: &ClassifyParams,
) -> Result<Gesture, FitError> {
    let n = smoothed.len();
    if n < 2 || raw.len() != n {
        return Err(FitError::TooFewSamples { needed: 2, got: n.min(raw.len()) });
    }
    let transient = detect_transient(smoothed, rate, params);
    let body_offset = transient.map_or(0, |t| (t.onset_idx + 1).min(n - 2));
    let body = &smoothed[body_offset..];
    let (lo, hi) = body
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;

    let best = if range < params.flat {
        None
    } else {
        let mut cands = candidates(body, rate, params)?;
        // stable: on equal scores the simpler model listed first wins
        cands.sort_by(|a, b| a.bic.total_cmp(&b.bic));
        Some(cands.swap_remove(0))
    };
    // a body is flat when its range is within `flat` plus the scatter the best model leaves unexplained
    let (mut kind, fit) = match best {
        Some(b) if range >= params.flat + PLATEAU_SCATTER * (b.fit.sse() / body.len() as f64).sqrt() => (b.kind, b.fit),
        _ => {
            let level = mean(body);
            let sse = body.iter().map(|v| (v - level) * (v - level)).sum();
            (ShapeKind::Plateau, FitRecord::Constant { level, sse })
        }
    };

    let granularity = residual_roughness(raw, smoothed, params.roughness_saturation);
    let fit_rrmse = (fit.sse() / body.len() as f64).sqrt() / range.max(0.05);
    let texture_only = granularity > params.chaotic_rough
        && transient.is_none()
        && range < 2.0 * granularity * params.roughness_saturation * 12f64.sqrt();
    if fit_rrmse > params.fit_rrmse || texture_only {
        kind = ShapeKind::Chaotic;
    }

    let archetype = archetype_for(
        kind,
        transient.is_some(),
        granularity,
        fit.staircase_rising(),
        params.granular,
    );
    Ok(Gesture {
        segment,
        kind,
        transient,
        granularity,
        fit,
        body_offset,
        mean_brightness: mean(raw),
        fit_rrmse,
        motif_id: None,
        archetype,
    })
}

pub const DEFAULT_MOTIF_EPSILON: f64 = 0.25;

/// Feature vector used for motif grouping.
pub fn motif_features(g: &Gesture, rate: f64) -> [f64; 12] {
    let duration = g.segment.len() as f64 / rate;
    let mut f = [0.0; 12];
    f[g.kind.index()] = 1.0;
    match g.fit {
        FitRecord::Linear { slope_per_s, .. } => {
            f[7] = slope_per_s.signum() * (slope_per_s.abs() * duration).min(1.0);
        }
        FitRecord::Exponential { tau_s, .. } => f[8] = (tau_s / duration).min(1.0),
        _ => {}
    }
    f[9] = g.granularity;
    f[10] = g.transient.map_or(0.0, |t| t.amplitude);
    f[11] = duration.ln() / 60f64.ln();
    f
}

fn distance(a: &[f64; 12], b: &[f64; 12]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Greedy online clustering in temporal order; ids start at 0.
pub fn assign_motifs(gestures: &mut [Gesture], rate: f64, epsilon: f64) {
    let mut reps: Vec<(ShapeKind, [f64; 12])> = Vec::new();
    for g in gestures.iter_mut() {
        let feat = motif_features(g, rate);
        let id = reps
            .iter()
            .position(|(kind, rep)| *kind == g.kind && distance(rep, &feat) <= epsilon)
            .unwrap_or_else(|| {
                reps.push((g.kind, feat));
                reps.len() - 1
            });
        g.motif_id = Some(id as u32);
    }
}
