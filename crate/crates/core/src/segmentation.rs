//! Piecewise-linear sectioning of a brightness curve.
//!
//! Automatic segmentation is bottom-up: the curve is cut into blocks of the
//! minimum segment length, then the adjacent pair whose merge raises the
//! residual of a least-squares line the least is merged repeatedly, until
//! that increase exceeds a BIC-style penalty `beta * sigma^2 * ln n`. Each
//! surviving boundary is finally moved, within one block, to the position
//! that minimizes the two-line residual, which recovers breakpoints that do
//! not fall on the initial block grid, and boundaries whose removal costs no
//! more than the penalty are dropped.
//!
//! Manual boundaries bypass all of this.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::BrightnessCurve;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("curve has {len} samples, at least {needed} are required")]
    CurveTooShort { len: usize, needed: usize },
    #[error("manual boundaries must be strictly increasing")]
    UnsortedBoundaries,
    #[error("manual boundary {0} s lies outside the curve's interior")]
    BoundaryOutOfRange(f64),
    #[error("manual boundaries produce segment [{start}, {end}) shorter than 2 samples")]
    SegmentBelowMinimum { start: usize, end: usize },
    #[error("invalid segmentation parameter: {0}")]
    InvalidParams(&'static str),
}

/// Half-open sample range `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end);
        Segment { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationParams {
    /// Minimum segment duration in seconds.
    pub min_segment: f64,
    pub penalty_beta: f64,
    pub manual_boundaries: Option<Vec<f64>>,
    /// Noise level for the merge penalty; estimated from the curve when absent.
    pub noise_sigma: Option<f64>,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            min_segment: 0.5,
            penalty_beta: 4.0,
            manual_boundaries: None,
            noise_sigma: None,
        }
    }
}

/// MAD-of-differences noise estimate: `median |y[i+1] - y[i]| / (0.6745 * sqrt 2)`.
pub fn estimate_noise(values: &[f64]) -> Result<f64, SegmentationError> {
    if values.len() < 2 {
        return Err(SegmentationError::CurveTooShort {
            len: values.len(),
            needed: 2,
        });
    }
    let mut diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    diffs.sort_by(f64::total_cmp);
    let m = diffs.len();
    let median = if m % 2 == 1 {
        diffs[m / 2]
    } else {
        0.5 * (diffs[m / 2 - 1] + diffs[m / 2])
    };
    Ok(median / (0.6745 * std::f64::consts::SQRT_2))
}

/// Residual sum of squares of the least-squares line through `y` (unit spacing).
pub(crate) fn line_sse(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 3 {
        return 0.0;
    }
    let nf = n as f64;
    let tm = (nf - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (i, &v) in y.iter().enumerate() {
        let dt = i as f64 - tm;
        let dy = v - ym;
        sxy += dt * dy;
        syy += dy * dy;
    }
    let sxx = nf * (nf * nf - 1.0) / 12.0;
    (syy - sxy * sxy / sxx).max(0.0)
}

fn block_len(min_segment: f64, rate: f64) -> usize {
    ((min_segment * rate - 1e-9).ceil() as usize).max(1)
}

fn check_params(params: &SegmentationParams) -> Result<(), SegmentationError> {
    if !(params.min_segment > 0.0 && params.min_segment.is_finite()) {
        return Err(SegmentationError::InvalidParams("min_segment must be positive"));
    }
    if !(params.penalty_beta > 0.0 && params.penalty_beta.is_finite()) {
        return Err(SegmentationError::InvalidParams("penalty_beta must be positive"));
    }
    if params.noise_sigma.is_some_and(|s| !(s >= 0.0 && s.is_finite())) {
        return Err(SegmentationError::InvalidParams("noise_sigma must be finite and non-negative"));
    }
    Ok(())
}

/// Automatic segmentation, or the manual cut list when `params` carries one.
pub fn segment(curve: &BrightnessCurve, params: &SegmentationParams) -> Result<Vec<Segment>, SegmentationError> {
    check_params(params)?;
    if let Some(times) = &params.manual_boundaries {
        return apply_manual_boundaries(curve, times);
    }
    let y = curve.values();
    let n = y.len();
    let block = block_len(params.min_segment, curve.sample_rate());
    if n < 2 * block || n < 2 {
        return Err(SegmentationError::CurveTooShort {
            len: n,
            needed: (2 * block).max(2),
        });
    }

    let sigma = match params.noise_sigma {
        Some(s) => s,
        None => estimate_noise(y)?,
    }
    .max(1e-4);
    let lambda = params.penalty_beta * sigma * sigma * (n as f64).ln();

    let blocks = n / block;
    let mut segs: Vec<(usize, usize, f64)> = (0..blocks)
        .map(|k| {
            let start = k * block;
            let end = if k + 1 == blocks { n } else { start + block };
            (start, end, line_sse(&y[start..end]))
        })
        .collect();
    let merge_cost = |a: &(usize, usize, f64), b: &(usize, usize, f64)| line_sse(&y[a.0..b.1]) - a.2 - b.2;
    let mut deltas: Vec<f64> = segs.windows(2).map(|w| merge_cost(&w[0], &w[1])).collect();

    while !deltas.is_empty() {
        let (best, &min) = deltas
            .iter()
            .enumerate()
            .fold((0, &deltas[0]), |acc, (i, d)| if *d < *acc.1 { (i, d) } else { acc });
        if min > lambda {
            break;
        }
        let right = segs.remove(best + 1);
        let left = &mut segs[best];
        left.1 = right.1;
        left.2 = line_sse(&y[left.0..left.1]);
        deltas.remove(best);
        if best > 0 {
            deltas[best - 1] = merge_cost(&segs[best - 1], &segs[best]);
        }
        if best < deltas.len() {
            deltas[best] = merge_cost(&segs[best], &segs[best + 1]);
        }
    }

    let mut bounds: Vec<usize> = segs.iter().map(|s| s.0).chain([n]).collect();
    refine_boundaries(y, &mut bounds, block);
    prune_boundaries(y, &mut bounds, block, lambda);
    Ok(bounds.windows(2).map(|w| Segment::new(w[0], w[1])).collect())
}

/// Moves each interior boundary, left to right, to the split within
/// `reach` samples that minimizes the summed line residual of its two
/// neighbours, keeping both at least `reach` samples long.
fn refine_boundaries(y: &[f64], bounds: &mut [usize], reach: usize) {
    for k in 1..bounds.len() - 1 {
        refine_one(y, bounds, k, reach);
    }
}

fn refine_one(y: &[f64], bounds: &mut [usize], k: usize, reach: usize) {
    let (s, b, e) = (bounds[k - 1], bounds[k], bounds[k + 1]);
    let lo = b.saturating_sub(reach).max(s + reach);
    let hi = (b + reach).min(e - reach);
    if lo >= hi {
        return;
    }
    let cost = |p: usize| line_sse(&y[s..p]) + line_sse(&y[p..e]);
    let mut best = b;
    let mut best_cost = cost(b);
    for p in lo..=hi {
        let c = cost(p);
        if c < best_cost {
            best = p;
            best_cost = c;
        }
    }
    bounds[k] = best;
}

fn total_sse(y: &[f64], bounds: &[usize]) -> f64 {
    bounds.windows(2).map(|w| line_sse(&y[w[0]..w[1]])).sum()
}

/// Removes boundaries while some removal, followed by refining the two
/// boundaries around the gap, raises the total residual by at most `lambda`.
///
/// A breakpoint inside a block leaves that block isolated between two
/// boundaries; dropping one of them lets the other slide onto the breakpoint.
fn prune_boundaries(y: &[f64], bounds: &mut Vec<usize>, reach: usize, lambda: f64) {
    loop {
        let base = total_sse(y, bounds);
        let mut best: Option<(f64, Vec<usize>)> = None;
        for k in 1..bounds.len() - 1 {
            let mut cand = bounds.clone();
            cand.remove(k);
            for j in [k - 1, k] {
                if j > 0 && j + 1 < cand.len() {
                    refine_one(y, &mut cand, j, reach);
                }
            }
            let increase = total_sse(y, &cand) - base;
            if increase <= lambda && best.as_ref().is_none_or(|(c, _)| increase < *c) {
                best = Some((increase, cand));
            }
        }
        match best {
            Some((_, cand)) => *bounds = cand,
            None => break,
        }
    }
}

/// Cuts the curve at `round(t * rate)` for every time in `times`.
pub fn apply_manual_boundaries(curve: &BrightnessCurve, times: &[f64]) -> Result<Vec<Segment>, SegmentationError> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SegmentationError::UnsortedBoundaries);
    }
    let duration = curve.duration();
    let n = curve.len();
    let mut bounds = vec![0usize];
    for &t in times {
        if !(t > 0.0 && t < duration) {
            return Err(SegmentationError::BoundaryOutOfRange(t));
        }
        bounds.push((t * curve.sample_rate()).round() as usize);
    }
    bounds.push(n);
    for w in bounds.windows(2) {
        if w[1] < w[0] + 2 {
            return Err(SegmentationError::SegmentBelowMinimum { start: w[0], end: w[1] });
        }
    }
    Ok(bounds.windows(2).map(|w| Segment::new(w[0], w[1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::CurveChannel;
    use crate::rng::Prng;
    use proptest::prelude::*;

    fn curve(values: Vec<f64>) -> BrightnessCurve {
        BrightnessCurve::new(CurveChannel::Luma, 50.0, 0.0, values).unwrap()
    }

    fn params() -> SegmentationParams {
        SegmentationParams::default()
    }

    fn cuts(segs: &[Segment]) -> Vec<usize> {
        segs.iter().skip(1).map(|s| s.start).collect()
    }

    fn assert_cover(segs: &[Segment], n: usize) {
        assert_eq!(segs[0].start, 0);
        assert_eq!(segs.last().unwrap().end, n);
        for w in segs.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        assert!(segs.iter().all(|s| s.start < s.end));
    }

    #[test]
    fn noise_estimate_examples() {
        assert_eq!(estimate_noise(&[0.3; 10]).unwrap(), 0.0);
        let alt: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 0.0 } else { 0.2 }).collect();
        let expected = 0.2 / (0.6745 * 2f64.sqrt());
        assert!((estimate_noise(&alt).unwrap() - expected).abs() < 1e-15);
        assert!(estimate_noise(&[0.1]).is_err());

        let mut rng = Prng::new(11);
        let y: Vec<f64> = (0..2000)
            .map(|i| 0.2 + 0.5 * i as f64 / 2000.0 + 0.02 * rng.next_gaussian())
            .collect();
        let s = estimate_noise(&y).unwrap();
        assert!((0.015..=0.025).contains(&s), "{s}");
    }

    #[test]
    fn line_sse_is_zero_on_lines() {
        let y: Vec<f64> = (0..40).map(|i| 0.1 + 0.01 * i as f64).collect();
        assert!(line_sse(&y) < 1e-20);
        assert_eq!(line_sse(&[0.3, 0.9]), 0.0);
        // three points off a line by +1, -2, +1 (scaled): residual 6 * 0.01^2
        let v = line_sse(&[0.01, -0.02, 0.01]);
        assert!((v - 6e-4).abs() < 1e-15, "{v}");
    }

    #[test]
    fn constant_curve_is_one_segment() {
        let segs = segment(&curve(vec![0.4; 500]), &params()).unwrap();
        assert_eq!(segs, vec![Segment::new(0, 500)]);
    }

    #[test]
    fn step_is_cut_at_the_jump() {
        let y: Vec<f64> = (0..500).map(|i| if i < 250 { 0.0 } else { 1.0 }).collect();
        let segs = segment(&curve(y), &params()).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(cuts(&segs)[0].abs_diff(250) <= 5);
    }

    #[test]
    fn triangle_is_cut_at_the_apex() {
        let y: Vec<f64> = (0..500)
            .map(|i| {
                let t = i as f64 / 50.0;
                if t < 5.0 { t / 5.0 } else { (10.0 - t) / 5.0 }
            })
            .collect();
        let segs = segment(&curve(y), &params()).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(cuts(&segs)[0].abs_diff(250) <= 10, "{segs:?}");
    }

    #[test]
    fn off_grid_kink_is_refined() {
        // kink at 3.37 s, away from the 0.5 s block grid
        let y: Vec<f64> = (0..400)
            .map(|i| {
                let t = i as f64 / 50.0;
                0.1 + 0.03 * t + if t > 3.37 { 0.12 * (t - 3.37) } else { 0.0 }
            })
            .collect();
        let segs = segment(&curve(y), &params()).unwrap();
        assert_eq!(segs.len(), 2, "{segs:?}");
        let cut = cuts(&segs)[0] as f64 / 50.0;
        assert!((cut - 3.37).abs() <= 0.2, "{cut}");
    }

    #[test]
    fn too_short_curve() {
        assert_eq!(
            segment(&curve(vec![0.1; 49]), &params()),
            Err(SegmentationError::CurveTooShort { len: 49, needed: 50 })
        );
    }

    #[test]
    fn symmetric_input_is_deterministic() {
        // two identical steps: merge ties must resolve the same way every time
        let y: Vec<f64> = (0..600).map(|i| if (200..400).contains(&i) { 0.8 } else { 0.2 }).collect();
        let a = segment(&curve(y.clone()), &params()).unwrap();
        let b = segment(&curve(y), &params()).unwrap();
        assert_eq!(a, b);
        assert_eq!(cuts(&a), vec![200, 400]);
    }

    #[test]
    fn manual_boundaries() {
        let c = curve(vec![0.5; 500]);
        assert_eq!(
            apply_manual_boundaries(&c, &[5.0]).unwrap(),
            vec![Segment::new(0, 250), Segment::new(250, 500)]
        );
        assert_eq!(apply_manual_boundaries(&c, &[]).unwrap(), vec![Segment::new(0, 500)]);
        assert_eq!(
            apply_manual_boundaries(&c, &[5.0, 4.0]),
            Err(SegmentationError::UnsortedBoundaries)
        );
        assert_eq!(
            apply_manual_boundaries(&c, &[10.0]),
            Err(SegmentationError::BoundaryOutOfRange(10.0))
        );
        assert_eq!(
            apply_manual_boundaries(&c, &[0.01]),
            Err(SegmentationError::SegmentBelowMinimum { start: 0, end: 1 })
        );
        // manual boundaries in params bypass automatic segmentation
        let p = SegmentationParams {
            manual_boundaries: Some(vec![1.0, 2.0]),
            ..params()
        };
        assert_eq!(segment(&c, &p).unwrap().len(), 3);
    }

    fn random_curve(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = Prng::new(seed);
        let mut level = rng.uniform(0.2, 0.8);
        let mut slope = 0.0;
        (0..n)
            .map(|i| {
                if i % 37 == 0 && rng.next_unit() < 0.5 {
                    slope = rng.uniform(-0.01, 0.01);
                }
                level = (level + slope).clamp(0.0, 1.0);
                (level + 0.02 * rng.next_gaussian()).clamp(0.0, 1.0)
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn segments_cover_the_curve(seed in any::<u64>(), n in 50usize..700, min_seg in 0.1f64..1.0, beta in 0.1f64..20.0) {
            let p = SegmentationParams { min_segment: min_seg, penalty_beta: beta, ..params() };
            let c = curve(random_curve(seed, n));
            match segment(&c, &p) {
                Ok(segs) => {
                    assert_cover(&segs, n);
                    let block = block_len(min_seg, 50.0);
                    prop_assert!(segs.iter().all(|s| s.len() >= block));
                }
                Err(SegmentationError::CurveTooShort { .. }) => prop_assert!(n < 2 * block_len(min_seg, 50.0)),
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn larger_penalty_never_adds_segments(seed in any::<u64>(), beta in 0.1f64..10.0, factor in 1.0f64..5.0) {
            let c = curve(random_curve(seed, 600));
            let lo = segment(&c, &SegmentationParams { penalty_beta: beta, ..params() }).unwrap();
            let hi = segment(&c, &SegmentationParams { penalty_beta: beta * factor, ..params() }).unwrap();
            prop_assert!(hi.len() <= lo.len());
        }
    }
}
