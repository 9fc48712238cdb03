//! Uniformly sampled brightness curves.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::StreamInfo;

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("curve has no samples")]
    Empty,
    #[error("sample rate {0} must be positive and finite")]
    NonPositiveRate(f64),
    #[error("sample {index} = {value} lies outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("curve {channel} does not share length, rate and start time with the set")]
    Mismatched { channel: CurveChannel },
    #[error("unknown channel name '{0}'")]
    UnknownChannel(String),
}

/// Measured quantity. Declaration order is the fixed column order used in exports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveChannel {
    Luma,
    Red,
    Green,
    Blue,
    ContrastRms,
    ContrastSpread,
}

impl CurveChannel {
    pub const ALL: [CurveChannel; 6] = [
        CurveChannel::Luma,
        CurveChannel::Red,
        CurveChannel::Green,
        CurveChannel::Blue,
        CurveChannel::ContrastRms,
        CurveChannel::ContrastSpread,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CurveChannel::Luma => "luma",
            CurveChannel::Red => "red",
            CurveChannel::Green => "green",
            CurveChannel::Blue => "blue",
            CurveChannel::ContrastRms => "contrast_rms",
            CurveChannel::ContrastSpread => "contrast_spread",
        }
    }
}

impl fmt::Display for CurveChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CurveChannel {
    type Err = CurveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CurveChannel::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| CurveError::UnknownChannel(s.to_owned()))
    }
}

/// A non-empty series of unit-interval samples taken at `sample_rate` Hz from `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrightnessCurve {
    channel: CurveChannel,
    sample_rate: f64,
    t0: f64,
    values: Vec<f64>,
}

impl BrightnessCurve {
    pub fn new(channel: CurveChannel, sample_rate: f64, t0: f64, values: Vec<f64>) -> Result<Self, CurveError> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(CurveError::NonPositiveRate(sample_rate));
        }
        if values.is_empty() {
            return Err(CurveError::Empty);
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(CurveError::OutOfRange { index, value });
        }
        Ok(BrightnessCurve {
            channel,
            sample_rate,
            t0,
            values,
        })
    }

    pub fn channel(&self) -> CurveChannel {
        self.channel
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Time of sample `i` in seconds.
    pub fn time_of(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    /// Span covered by the samples, `len / sample_rate` seconds.
    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.sample_rate
    }

    /// Piecewise-linear value at time `t`, held constant outside the sampled span.
    pub fn value_at(&self, t: f64) -> f64 {
        let pos = (t - self.t0) * self.sample_rate;
        let last = self.values.len() - 1;
        if pos.is_nan() || pos <= 0.0 {
            return self.values[0];
        }
        if pos >= last as f64 {
            return self.values[last];
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let (a, b) = (self.values[i], self.values[i + 1]);
        if frac == 0.0 {
            a
        } else {
            a + (b - a) * frac
        }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, CurveError> {
        BrightnessCurve::new(self.channel, self.sample_rate, self.t0, values)
    }
}

/// Curves of one source, at most one per channel, all sharing their time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSet {
    pub source: Option<StreamInfo>,
    curves: BTreeMap<CurveChannel, BrightnessCurve>,
}

impl CurveSet {
    pub fn new(source: Option<StreamInfo>) -> Self {
        CurveSet {
            source,
            curves: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, curve: BrightnessCurve) -> Result<(), CurveError> {
        if let Some(other) = self.curves.values().find(|c| c.channel != curve.channel) {
            if other.len() != curve.len()
                || other.sample_rate != curve.sample_rate
                || other.t0 != curve.t0
            {
                return Err(CurveError::Mismatched {
                    channel: curve.channel,
                });
            }
        }
        self.curves.insert(curve.channel, curve);
        Ok(())
    }

    pub fn get(&self, channel: CurveChannel) -> Option<&BrightnessCurve> {
        self.curves.get(&channel)
    }

    /// Curves in fixed channel order.
    pub fn iter(&self) -> impl Iterator<Item = &BrightnessCurve> {
        self.curves.values()
    }

    pub fn channels(&self) -> Vec<CurveChannel> {
        self.curves.keys().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Shared sample count, rate and start time, if any curve is present.
    pub fn grid(&self) -> Option<(usize, f64, f64)> {
        self.curves
            .values()
            .next()
            .map(|c| (c.len(), c.sample_rate, c.t0))
    }
}
