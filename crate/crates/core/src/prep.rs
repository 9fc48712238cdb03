//! Resampling, smoothing and roughness of brightness curves.

use thiserror::Error;

use crate::curve::{BrightnessCurve, CurveError};

/// Residual RMS that counts as fully granular.
pub const DEFAULT_ROUGHNESS_SATURATION: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum PrepError {
    #[error("resampling rate {0} must be positive")]
    NonPositiveRate(f64),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrepParams {
    pub analysis_rate: f64,
    pub smooth_window: f64,
}

impl Default for PrepParams {
    fn default() -> Self {
        PrepParams {
            analysis_rate: 50.0,
            smooth_window: 0.25,
        }
    }
}

/// Number of output samples when a curve of `n` samples at `rate_in` is
/// resampled at `rate_out`, covering `[t0, t0 + (n - 1) / rate_in]`.
fn resampled_len(n: usize, rate_in: f64, rate_out: f64) -> usize {
    let span = (n - 1) as f64 * rate_out / rate_in;
    // tolerate representation error when the span is an exact multiple
    (span + 1e-9).floor() as usize + 1
}

/// Linear interpolation of `curve` onto a grid at `rate` Hz.
pub fn resample(curve: &BrightnessCurve, rate: f64) -> Result<BrightnessCurve, PrepError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(PrepError::NonPositiveRate(rate));
    }
    if rate == curve.sample_rate() {
        return Ok(curve.clone());
    }
    let src = curve.values();
    let rate_in = curve.sample_rate();
    let m = resampled_len(src.len(), rate_in, rate);
    let last = src.len() - 1;
    let values = (0..m)
        .map(|j| {
            let pos = j as f64 * rate_in / rate;
            let i = (pos.floor() as usize).min(last);
            let frac = pos - i as f64;
            let v = if i == last || frac <= 0.0 {
                src[i]
            } else {
                src[i] + (src[i + 1] - src[i]) * frac
            };
            v.clamp(0.0, 1.0)
        })
        .collect();
    Ok(BrightnessCurve::new(curve.channel(), rate, curve.t0(), values)?)
}

/// Odd moving-average width in samples for `window` seconds at `rate` Hz.
///
/// Even widths are lowered to the next odd number; the minimum is 1.
pub fn window_samples(window: f64, rate: f64) -> usize {
    let w = ((window * rate).round() as usize).max(1);
    if w.is_multiple_of(2) {
        w - 1
    } else {
        w
    }
}

/// Centered moving average of width `width` (odd), shrinking symmetrically at the edges.
pub fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            window_mean(&values[i - h..=i + h])
        })
        .collect()
}

// Constant windows return their value exactly.
fn window_mean(w: &[f64]) -> f64 {
    let first = w[0];
    if w.iter().all(|&v| v == first) {
        return first;
    }
    w.iter().sum::<f64>() / w.len() as f64
}

pub fn smooth(curve: &BrightnessCurve, window: f64) -> BrightnessCurve {
    if window <= 0.0 {
        return curve.clone();
    }
    let width = window_samples(window, curve.sample_rate());
    let values = moving_average(curve.values(), width)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    curve
        .with_values(values)
        .expect("averages of unit-interval samples stay in range")
}

/// Smoothed values of `raw[start..end]` that use samples before `start` as
/// context but nothing at or after `end`.
pub fn smooth_segment(raw: &[f64], start: usize, end: usize, width: usize) -> Vec<f64> {
    let lead = (width / 2).min(start);
    let mut out = moving_average(&raw[start - lead..end], width);
    out.drain(..lead);
    for v in &mut out {
        *v = v.clamp(0.0, 1.0);
    }
    out
}

/// `min(1, rms(raw - smoothed) / saturation)` over two aligned slices.
pub fn residual_roughness(raw: &[f64], smoothed: &[f64], saturation: f64) -> f64 {
    debug_assert_eq!(raw.len(), smoothed.len());
    if raw.is_empty() {
        return 0.0;
    }
    let ss: f64 = raw
        .iter()
        .zip(smoothed)
        .map(|(r, s)| (r - s) * (r - s))
        .sum();
    let rms = (ss / raw.len() as f64).sqrt();
    (rms / saturation).min(1.0)
}

/// Granularity of a whole curve: residual of `smooth(curve, window)`.
pub fn roughness(curve: &BrightnessCurve, window: f64, saturation: f64) -> f64 {
    let smoothed = smooth(curve, window);
    residual_roughness(curve.values(), smoothed.values(), saturation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::CurveChannel;
    use crate::rng::Prng;
    use proptest::prelude::*;

    fn curve(rate: f64, values: Vec<f64>) -> BrightnessCurve {
        BrightnessCurve::new(CurveChannel::Luma, rate, 0.0, values).unwrap()
    }

    #[test]
    fn resample_identity_and_midpoint() {
        let c = curve(24.0, vec![0.1, 0.7, 0.3]);
        assert_eq!(resample(&c, 24.0).unwrap(), c);
        let two = resample(&curve(1.0, vec![0.0, 1.0]), 2.0).unwrap();
        assert_eq!(two.values(), &[0.0, 0.5, 1.0]);
        assert_eq!(two.sample_rate(), 2.0);
        assert_eq!(resample(&c, 0.0), Err(PrepError::NonPositiveRate(0.0)));
    }

    // Direct evaluation of the piecewise-linear function through the samples.
    fn interp_oracle(values: &[f64], rate_in: f64, t: f64) -> f64 {
        let times: Vec<f64> = (0..values.len()).map(|i| i as f64 / rate_in).collect();
        for k in 0..values.len() - 1 {
            if t >= times[k] && t <= times[k + 1] {
                let u = (t - times[k]) / (times[k + 1] - times[k]);
                return values[k] * (1.0 - u) + values[k + 1] * u;
            }
        }
        *values.last().unwrap()
    }

    #[test]
    fn resample_24_to_50_matches_oracle() {
        let values: Vec<f64> = (0..48).map(|i| (i as f64 / 47.0).powf(1.3)).collect();
        let out = resample(&curve(24.0, values.clone()), 50.0).unwrap();
        // span 47/24 s at 50 Hz
        assert_eq!(out.len(), (47.0f64 * 50.0 / 24.0).floor() as usize + 1);
        for (j, &v) in out.values().iter().enumerate() {
            let expected = interp_oracle(&values, 24.0, j as f64 / 50.0);
            assert!((v - expected).abs() < 1e-12, "sample {j}: {v} vs {expected}");
        }
    }

    #[test]
    fn smoothing_examples() {
        let c = curve(10.0, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(smooth(&c, 0.0), c);
        let s = smooth(&c, 0.3);
        let third = 1.0 / 3.0;
        assert_eq!(s.values(), &[0.0, third, third, third, 0.0]);
        let flat = curve(50.0, vec![0.37; 40]);
        assert_eq!(smooth(&flat, 0.25), flat);
    }

    #[test]
    fn window_width_rules() {
        assert_eq!(window_samples(0.25, 50.0), 13);
        assert_eq!(window_samples(0.2, 50.0), 9);
        assert_eq!(window_samples(0.001, 50.0), 1);
        assert_eq!(window_samples(0.3, 10.0), 3);
    }

    #[test]
    fn roughness_examples() {
        assert_eq!(roughness(&curve(50.0, vec![0.4; 100]), 0.25, 0.05), 0.0);
        let ramp: Vec<f64> = (0..250).map(|i| 0.1 + 0.7 * i as f64 / 249.0).collect();
        assert!(roughness(&curve(50.0, ramp.clone()), 0.25, 0.05) < 0.1);

        let mut rng = Prng::new(7);
        let noisy: Vec<f64> = ramp
            .iter()
            .map(|v| v + 0.1 * (2.0 * rng.next_unit() - 1.0))
            .collect();
        // oracle: residual RMS computed here from an independent centered average
        let width = 13usize;
        let resid: f64 = (0..noisy.len())
            .map(|i| {
                let h = (width / 2).min(i).min(noisy.len() - 1 - i);
                let m: f64 = noisy[i - h..=i + h].iter().sum::<f64>() / (2 * h + 1) as f64;
                (noisy[i] - m).powi(2)
            })
            .sum::<f64>();
        let oracle = ((resid / noisy.len() as f64).sqrt() / 0.05).min(1.0);
        let got = roughness(&curve(50.0, noisy), 0.25, 0.05);
        assert!(got >= 0.9, "{got}");
        assert!((got - oracle).abs() < 1e-9);
    }

    #[test]
    fn segment_smoothing_ignores_the_future() {
        let raw: Vec<f64> = (0..40).map(|i| if i < 20 { 0.2 } else { 0.8 }).collect();
        let first = smooth_segment(&raw, 0, 20, 5);
        assert_eq!(first, vec![0.2; 20]);
        let second = smooth_segment(&raw, 20, 40, 5);
        let full = moving_average(&raw, 5);
        // leading samples see the earlier level, trailing ones shrink their window
        assert_eq!(&second[..2], &full[20..22]);
        assert_eq!(second.last(), Some(&0.8));
        assert_eq!(smooth_segment(&raw, 10, 30, 1), raw[10..30].to_vec());
    }

    proptest! {
        #[test]
        fn resample_twice_at_same_rate_is_idempotent(
            values in prop::collection::vec(0.0f64..=1.0, 2..60),
            rate in 1.0f64..100.0,
        ) {
            let once = resample(&curve(24.0, values), rate).unwrap();
            let twice = resample(&once, rate).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn smoothing_roughly_preserves_mean(
            values in prop::collection::vec(0.0f64..=1.0, 20..120),
            window in 0.0f64..0.3,
        ) {
            let c = curve(50.0, values.clone());
            let s = smooth(&c, window);
            let w = window_samples(window, 50.0) as f64;
            let n = values.len() as f64;
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            prop_assert!((mean(s.values()) - mean(&values)).abs() <= w / n + 1e-12);
        }

        #[test]
        fn roughness_ignores_offsets(
            values in prop::collection::vec(0.0f64..=0.5, 5..80),
            offset in 0.0f64..0.5,
        ) {
            let a = roughness(&curve(50.0, values.clone()), 0.25, 0.05);
            let shifted: Vec<f64> = values.iter().map(|v| v + offset).collect();
            let b = roughness(&curve(50.0, shifted), 0.25, 0.05);
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
