//! Least-squares shape models for segment bodies.
//!
//! Samples are taken at `t_i = i / rate` seconds from the start of the body.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    /// The exponential column carries no information; the linear fit is
    /// returned in its place.
    #[error("exponential basis is degenerate")]
    DegenerateBasis(LinearFit),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    /// Change per second.
    pub slope: f64,
    pub sse: f64,
}

/// `y ~ c + d * exp(-t / tau)`; rising shapes have `d < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub c: f64,
    pub d: f64,
    pub tau: f64,
    pub sse: f64,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.c + self.d * (-t / self.tau).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaircaseFit {
    /// Piece means, in time order.
    pub levels: Vec<f64>,
    /// Start of every piece after the first, in seconds from the body start.
    pub step_times: Vec<f64>,
    /// The same boundaries as sample offsets.
    pub boundaries: Vec<usize>,
    pub sse: f64,
}

impl StaircaseFit {
    pub fn pieces(&self) -> usize {
        self.levels.len()
    }

    /// Levels never decrease (`Some(true)`), never increase (`Some(false)`), or neither.
    pub fn direction(&self) -> Option<bool> {
        let up = self.levels.windows(2).all(|w| w[1] >= w[0]);
        let down = self.levels.windows(2).all(|w| w[1] <= w[0]);
        match (up, down) {
            (true, false) => Some(true),
            (false, true) => Some(false),
            _ => None,
        }
    }
}

/// `n * ln(sse / n + 1e-12) + k * ln(n)`.
pub fn bic(n: usize, sse: f64, params: usize) -> f64 {
    let nf = n as f64;
    nf * (sse / nf + 1e-12).ln() + params as f64 * nf.ln()
}

fn require(samples: &[f64], needed: usize) -> Result<(), FitError> {
    if samples.len() < needed {
        return Err(FitError::TooFewSamples {
            needed,
            got: samples.len(),
        });
    }
    Ok(())
}

/// Ordinary least squares on `(t_i, y_i)`.
pub fn fit_linear(samples: &[f64], rate: f64) -> Result<LinearFit, FitError> {
    require(samples, 2)?;
    let n = samples.len() as f64;
    let tm = (n - 1.0) / (2.0 * rate);
    let ym = samples.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (i, &y) in samples.iter().enumerate() {
        let dt = i as f64 / rate - tm;
        sxx += dt * dt;
        sxy += dt * (y - ym);
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let sse = samples
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let r = y - (intercept + slope * i as f64 / rate);
            r * r
        })
        .sum();
    Ok(LinearFit { intercept, slope, sse })
}

/// `count` log-spaced time constants spanning `[duration / 50, 5 * duration]`.
pub fn tau_grid(duration: f64, count: usize) -> Vec<f64> {
    let (lo, hi) = (duration / 50.0, duration * 5.0);
    if count <= 1 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| lo * (step * k as f64).exp()).collect()
}

/// Grid search over `tau_grid` with a closed-form `(c, d)` solve per grid point.
///
/// The smallest-residual grid point wins; ties keep the smaller time constant.
pub fn fit_exponential(samples: &[f64], rate: f64, tau_grid: &[f64]) -> Result<ExpFit, FitError> {
    require(samples, 3)?;
    if tau_grid.is_empty() {
        return Err(FitError::DegenerateBasis(fit_linear(samples, rate)?));
    }
    let n = samples.len() as f64;
    let ym = samples.iter().sum::<f64>() / n;
    let mut basis = vec![0.0; samples.len()];
    let mut best: Option<ExpFit> = None;
    let mut sorted = tau_grid.to_vec();
    sorted.sort_by(f64::total_cmp);

    for &tau in sorted.iter().filter(|t| **t > 0.0) {
        for (i, e) in basis.iter_mut().enumerate() {
            *e = (-(i as f64 / rate) / tau).exp();
        }
        let em = basis.iter().sum::<f64>() / n;
        let (mut see, mut sey) = (0.0, 0.0);
        for (&e, &y) in basis.iter().zip(samples) {
            see += (e - em) * (e - em);
            sey += (e - em) * (y - ym);
        }
        if see <= 1e-14 * n {
            continue;
        }
        let d = sey / see;
        let c = ym - d * em;
        let sse: f64 = basis
            .iter()
            .zip(samples)
            .map(|(&e, &y)| {
                let r = y - c - d * e;
                r * r
            })
            .sum();
        if best.is_none_or(|b| sse < b.sse) {
            best = Some(ExpFit { c, d, tau, sse });
        }
    }

    match best {
        Some(fit) if fit.d.abs() > 1e-9 => Ok(fit),
        _ => Err(FitError::DegenerateBasis(fit_linear(samples, rate)?)),
    }
}

struct PieceCost {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl PieceCost {
    fn new(samples: &[f64]) -> Self {
        // centre the data to keep the prefix-sum difference well conditioned
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let mut s1 = Vec::with_capacity(samples.len() + 1);
        let mut s2 = Vec::with_capacity(samples.len() + 1);
        s1.push(0.0);
        s2.push(0.0);
        for &y in samples {
            let v = y - mean;
            s1.push(s1.last().unwrap() + v);
            s2.push(s2.last().unwrap() + v * v);
        }
        PieceCost { s1, s2 }
    }

    /// Squared error of `[i, j)` around its mean.
    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        let len = (j - i) as f64;
        let s = self.s1[j] - self.s1[i];
        (self.s2[j] - self.s2[i] - s * s / len).max(0.0)
    }
}

/// Optimal piecewise-constant fits with 2..=`m_max` pieces by dynamic
/// programming; the piece count is chosen by `bic` with `2m - 1` parameters.
pub fn fit_staircase(samples: &[f64], rate: f64, m_max: usize) -> Result<StaircaseFit, FitError> {
    let m_max = m_max.max(2);
    require(samples, 2 * m_max)?;
    let n = samples.len();
    let pc = PieceCost::new(samples);

    // cost[k][j]: best error covering [0, j) with k + 1 pieces; arg[k][j]: start of the last piece
    let mut cost = vec![vec![f64::INFINITY; n + 1]; m_max];
    let mut arg = vec![vec![0usize; n + 1]; m_max];
    for (j, c) in cost[0].iter_mut().enumerate().skip(1) {
        *c = pc.cost(0, j);
    }
    for k in 1..m_max {
        let (done, rest) = cost.split_at_mut(k);
        let prev = &done[k - 1];
        for j in (k + 1)..=n {
            let mut best = f64::INFINITY;
            let mut best_i = k;
            for (i, &p) in prev.iter().enumerate().take(j).skip(k) {
                let c = p + pc.cost(i, j);
                if c < best {
                    best = c;
                    best_i = i;
                }
            }
            rest[0][j] = best;
            arg[k][j] = best_i;
        }
    }

    let mut chosen: Option<(f64, usize)> = None;
    for m in 2..=m_max {
        let score = bic(n, cost[m - 1][n], 2 * m - 1);
        if chosen.is_none_or(|(s, _)| score < s) {
            chosen = Some((score, m));
        }
    }
    let m = chosen.expect("at least one piece count").1;

    let mut boundaries = Vec::with_capacity(m - 1);
    let mut j = n;
    for k in (1..m).rev() {
        let i = arg[k][j];
        boundaries.push(i);
        j = i;
    }
    boundaries.reverse();

    let edges: Vec<usize> = std::iter::once(0)
        .chain(boundaries.iter().copied())
        .chain([n])
        .collect();
    let levels = edges
        .windows(2)
        .map(|w| samples[w[0]..w[1]].iter().sum::<f64>() / (w[1] - w[0]) as f64)
        .collect::<Vec<_>>();
    let sse = edges
        .windows(2)
        .zip(&levels)
        .map(|(w, &l)| samples[w[0]..w[1]].iter().map(|y| (y - l) * (y - l)).sum::<f64>())
        .sum();
    Ok(StaircaseFit {
        levels,
        step_times: boundaries.iter().map(|&b| b as f64 / rate).collect(),
        boundaries,
        sse,
    })
}
