//! Whole-frame brightness and contrast measurements.
//!
//! Per-pixel luma uses Rec.601 weights on RGB input, the raw value on
//! grayscale input and the limited-range convention `(Y - 16) / 219` on
//! Y4M luma planes. All reductions are carried out on integer sums so the
//! results do not depend on traversal order or thread count.

use rayon::prelude::*;
use thiserror::Error;

use crate::curve::{BrightnessCurve, CurveChannel, CurveError, CurveSet};
use crate::ingest::{Frame, FrameSource, IngestError, PixelFormat};

#[derive(Debug, Error)]
pub enum PhotometryError {
    #[error("channel {channel} is not available for {format} input")]
    ChannelUnavailable {
        channel: CurveChannel,
        format: PixelFormat,
    },
    #[error("no channels requested")]
    NoChannels,
    #[error("the stream contains no frames")]
    EmptyStream,
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorChannel {
    Red,
    Green,
    Blue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ContrastMethod {
    /// Population standard deviation of per-pixel luma.
    #[default]
    Rms,
    /// 95th minus 5th nearest-rank percentile of per-pixel luma.
    Spread,
}

// Rec.601 weights in thousandths.
const W_R: u64 = 299;
const W_G: u64 = 587;
const W_B: u64 = 114;
const RGB_SCALE: u64 = 255_000;
const Y4M_BLACK: u8 = 16;
const Y4M_RANGE: u64 = 219;

fn rgb_sums(data: &[u8]) -> [u64; 3] {
    let mut sums = [0u64; 3];
    // u32 partials cannot overflow within a block of 2^24 / 255 pixels
    for block in data.chunks(3 * 65_536) {
        let mut part = [0u32; 3];
        for px in block.chunks_exact(3) {
            part[0] += u32::from(px[0]);
            part[1] += u32::from(px[1]);
            part[2] += u32::from(px[2]);
        }
        for (s, p) in sums.iter_mut().zip(part) {
            *s += u64::from(p);
        }
    }
    sums
}

fn histogram(plane: &[u8]) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in plane {
        hist[v as usize] += 1;
    }
    hist
}

fn y4m_level(y: u8) -> u64 {
    u64::from(y.saturating_sub(Y4M_BLACK)).min(Y4M_RANGE)
}

/// Mean luma of the frame in [0, 1].
pub fn frame_luma_mean(frame: &Frame) -> f64 {
    let n = frame.pixel_count() as u64;
    match frame.format {
        PixelFormat::Rgb24 => {
            let [r, g, b] = rgb_sums(&frame.data);
            let num = W_R * r + W_G * g + W_B * b;
            num as f64 / (RGB_SCALE * n) as f64
        }
        PixelFormat::Gray8 => {
            let sum: u64 = frame.data.iter().map(|&v| u64::from(v)).sum();
            sum as f64 / (255 * n) as f64
        }
        PixelFormat::Y4m420 | PixelFormat::Y4m444 | PixelFormat::Y4mMono => {
            let hist = histogram(frame.y_plane());
            let sum: u64 = hist
                .iter()
                .enumerate()
                .map(|(y, &count)| count * y4m_level(y as u8))
                .sum();
            sum as f64 / (Y4M_RANGE * n) as f64
        }
    }
}

pub fn frame_channel_mean(frame: &Frame, channel: ColorChannel) -> Result<f64, PhotometryError> {
    if frame.format != PixelFormat::Rgb24 {
        return Err(PhotometryError::ChannelUnavailable {
            channel: match channel {
                ColorChannel::Red => CurveChannel::Red,
                ColorChannel::Green => CurveChannel::Green,
                ColorChannel::Blue => CurveChannel::Blue,
            },
            format: frame.format,
        });
    }
    let sums = rgb_sums(&frame.data);
    let s = match channel {
        ColorChannel::Red => sums[0],
        ColorChannel::Green => sums[1],
        ColorChannel::Blue => sums[2],
    };
    Ok(s as f64 / (255 * frame.pixel_count() as u64) as f64)
}

/// Per-pixel luma as integers over a common scale: `luma_i = levels[i] / scale`.
fn luma_levels(frame: &Frame) -> (Vec<u32>, u64) {
    match frame.format {
        PixelFormat::Rgb24 => (
            frame
                .data
                .chunks_exact(3)
                .map(|p| (W_R * u64::from(p[0]) + W_G * u64::from(p[1]) + W_B * u64::from(p[2])) as u32)
                .collect(),
            RGB_SCALE,
        ),
        PixelFormat::Gray8 => (frame.data.iter().map(|&v| u32::from(v)).collect(), 255),
        _ => (
            frame.y_plane().iter().map(|&y| y4m_level(y) as u32).collect(),
            Y4M_RANGE,
        ),
    }
}

/// Nearest-rank percentile index (0-based) for `p` percent of `n` sorted values.
fn nearest_rank(p: u64, n: usize) -> usize {
    let rank = (p * n as u64).div_ceil(100).max(1);
    rank as usize - 1
}

pub fn frame_contrast(frame: &Frame, method: ContrastMethod) -> f64 {
    let (mut levels, scale) = luma_levels(frame);
    let n = levels.len();
    match method {
        ContrastMethod::Rms => {
            let (sum, sum_sq) = levels.iter().fold((0u128, 0u128), |(s, q), &v| {
                let v = u128::from(v);
                (s + v, q + v * v)
            });
            let n = n as u128;
            let var_num = n * sum_sq - sum * sum;
            (var_num as f64).sqrt() / (n as f64 * scale as f64)
        }
        ContrastMethod::Spread => {
            let lo_idx = nearest_rank(5, n);
            let hi_idx = nearest_rank(95, n);
            let (_, &mut hi, _) = levels.select_nth_unstable(hi_idx);
            let (_, &mut lo, _) = levels.select_nth_unstable(lo_idx);
            f64::from(hi - lo) / scale as f64
        }
    }
}

fn check_channel(channel: CurveChannel, format: PixelFormat) -> Result<(), PhotometryError> {
    let needs_rgb = matches!(
        channel,
        CurveChannel::Red | CurveChannel::Green | CurveChannel::Blue
    );
    if needs_rgb && !format.has_rgb() {
        return Err(PhotometryError::ChannelUnavailable { channel, format });
    }
    Ok(())
}

fn measure(frame: &Frame, channels: &[CurveChannel]) -> Vec<f64> {
    let rgb = (frame.format == PixelFormat::Rgb24
        && channels
            .iter()
            .any(|c| matches!(c, CurveChannel::Red | CurveChannel::Green | CurveChannel::Blue)))
    .then(|| rgb_sums(&frame.data));
    let denom = (255 * frame.pixel_count() as u64) as f64;
    channels
        .iter()
        .map(|&c| match c {
            CurveChannel::Luma => frame_luma_mean(frame),
            CurveChannel::Red => rgb.expect("rgb sums")[0] as f64 / denom,
            CurveChannel::Green => rgb.expect("rgb sums")[1] as f64 / denom,
            CurveChannel::Blue => rgb.expect("rgb sums")[2] as f64 / denom,
            CurveChannel::ContrastRms => frame_contrast(frame, ContrastMethod::Rms),
            CurveChannel::ContrastSpread => frame_contrast(frame, ContrastMethod::Spread),
        })
        .collect()
}

const BATCH: usize = 32;

/// Reduces every frame of `source` to one sample per requested channel.
///
/// `threads` selects the worker count for per-frame measurement: `Some(1)`
/// runs inline, `None` uses the global rayon pool. Output is identical for
/// every choice.
pub fn extract_curves(
    source: &mut dyn FrameSource,
    channels: &[CurveChannel],
    threads: Option<usize>,
) -> Result<CurveSet, PhotometryError> {
    let mut channels = channels.to_vec();
    channels.sort();
    channels.dedup();
    if channels.is_empty() {
        return Err(PhotometryError::NoChannels);
    }
    let info = source.info().clone();
    for &c in &channels {
        check_channel(c, info.pixel_format)?;
    }

    let pool = match threads {
        Some(n) if n > 1 => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool"),
        ),
        _ => None,
    };
    let parallel = threads != Some(1);

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); channels.len()];
    let mut batch = Vec::with_capacity(BATCH);
    loop {
        batch.clear();
        while batch.len() < BATCH {
            match source.next_frame()? {
                Some(f) => batch.push(f),
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        let rows: Vec<Vec<f64>> = if !parallel {
            batch.iter().map(|f| measure(f, &channels)).collect()
        } else {
            let run = || batch.par_iter().map(|f| measure(f, &channels)).collect();
            match &pool {
                Some(p) => p.install(run),
                None => run(),
            }
        };
        for row in rows {
            for (col, v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        if batch.len() < BATCH {
            break;
        }
    }
    if columns[0].is_empty() {
        return Err(PhotometryError::EmptyStream);
    }

    let rate = info.fps.as_f64();
    let mut set = CurveSet::new(Some(info));
    for (c, values) in channels.into_iter().zip(columns) {
        set.insert(BrightnessCurve::new(c, rate, 0.0, values)?)?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{FrameRate, StreamInfo, VecSource};
    use proptest::prelude::*;

    fn rgb(w: u32, h: u32, px: impl Fn(usize) -> [u8; 3]) -> Frame {
        let data = (0..(w * h) as usize).flat_map(px).collect();
        Frame::new(0, w, h, PixelFormat::Rgb24, data).unwrap()
    }

    fn gray(w: u32, h: u32, values: Vec<u8>) -> Frame {
        Frame::new(0, w, h, PixelFormat::Gray8, values).unwrap()
    }

    #[test]
    fn luma_extremes_and_midpoint() {
        assert_eq!(frame_luma_mean(&rgb(4, 3, |_| [0, 0, 0])), 0.0);
        assert_eq!(frame_luma_mean(&rgb(4, 3, |_| [255, 255, 255])), 1.0);
        let half = rgb(2, 1, |i| if i == 0 { [0, 0, 0] } else { [255, 255, 255] });
        assert_eq!(frame_luma_mean(&half), 0.5);
    }

    #[test]
    fn y4m_limited_range() {
        let mut data = vec![16u8, 235, 0, 255];
        data.extend([128u8; 2]);
        let f = Frame::new(0, 2, 2, PixelFormat::Y4m420, data).unwrap();
        // levels 0, 219, 0 (clamped), 219 (clamped)
        assert_eq!(frame_luma_mean(&f), 0.5);
        let mono = Frame::new(0, 1, 1, PixelFormat::Y4mMono, vec![125]).unwrap();
        assert_eq!(frame_luma_mean(&mono), 109.0 / 219.0);
    }

    #[test]
    fn channel_means() {
        let red = rgb(3, 2, |_| [255, 0, 0]);
        assert_eq!(frame_channel_mean(&red, ColorChannel::Red).unwrap(), 1.0);
        assert_eq!(frame_channel_mean(&red, ColorChannel::Green).unwrap(), 0.0);
        assert!(matches!(
            frame_channel_mean(&gray(1, 1, vec![3]), ColorChannel::Blue),
            Err(PhotometryError::ChannelUnavailable {
                channel: CurveChannel::Blue,
                format: PixelFormat::Gray8
            })
        ));
    }

    #[test]
    fn rms_contrast() {
        assert_eq!(frame_contrast(&gray(3, 3, vec![90; 9]), ContrastMethod::Rms), 0.0);
        let split = rgb(4, 2, |i| if i % 2 == 0 { [0, 0, 0] } else { [255, 255, 255] });
        assert_eq!(frame_contrast(&split, ContrastMethod::Rms), 0.5);
    }

    #[test]
    fn spread_contrast_matches_sorted_oracle() {
        // 100 pixels with a skewed histogram
        let values: Vec<u8> = (0..100u32).map(|i| ((i * 37 + i * i) % 251) as u8).collect();
        let f = gray(10, 10, values.clone());
        let mut sorted = values.clone();
        sorted.sort();
        // nearest rank: ceil(p/100 * 100) -> 1-based ranks 5 and 95
        let expected = (f64::from(sorted[94]) - f64::from(sorted[4])) / 255.0;
        assert_eq!(frame_contrast(&f, ContrastMethod::Spread), expected);
    }

    #[test]
    fn nearest_rank_small_sets() {
        assert_eq!(nearest_rank(5, 1), 0);
        assert_eq!(nearest_rank(95, 1), 0);
        assert_eq!(nearest_rank(95, 10), 9);
        assert_eq!(nearest_rank(5, 10), 0);
        assert_eq!(nearest_rank(5, 21), 1);
    }

    fn stream(frames: Vec<Frame>) -> VecSource {
        let f0 = &frames[0];
        let info = StreamInfo::new(f0.width, f0.height, FrameRate { num: 24, den: 1 }, f0.format).unwrap();
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(i, mut f)| {
                f.index = i as u64;
                f
            })
            .collect();
        VecSource::new(info, frames).unwrap()
    }

    #[test]
    fn extract_three_frames() {
        let frames = vec![
            rgb(2, 2, |_| [0, 0, 0]),
            rgb(2, 2, |_| [128, 128, 128]),
            rgb(2, 2, |_| [255, 255, 255]),
        ];
        let set = extract_curves(&mut stream(frames), &[CurveChannel::Luma], Some(1)).unwrap();
        let luma = set.get(CurveChannel::Luma).unwrap();
        assert_eq!(luma.values(), &[0.0, 128.0 / 255.0, 1.0]);
        assert_eq!(luma.sample_rate(), 24.0);
        assert_eq!(luma.t0(), 0.0);
    }

    #[test]
    fn extract_requires_channels_and_frames() {
        let frames = vec![rgb(1, 1, |_| [1, 2, 3])];
        assert!(matches!(
            extract_curves(&mut stream(frames), &[], None),
            Err(PhotometryError::NoChannels)
        ));
        let info = StreamInfo::new(1, 1, FrameRate { num: 24, den: 1 }, PixelFormat::Rgb24).unwrap();
        let mut empty = VecSource::new(info, vec![]).unwrap();
        assert!(matches!(
            extract_curves(&mut empty, &[CurveChannel::Luma], None),
            Err(PhotometryError::EmptyStream)
        ));
        let mut g = stream(vec![gray(1, 1, vec![1])]);
        assert!(matches!(
            extract_curves(&mut g, &[CurveChannel::Red], None),
            Err(PhotometryError::ChannelUnavailable { .. })
        ));
    }

    #[test]
    fn ramp_video_gives_increasing_luma() {
        let frames: Vec<Frame> = (0..10)
            .map(|i| {
                let v = (25.5 * i as f64).round() as u8;
                rgb(4, 4, move |_| [v, v, v])
            })
            .collect();
        let set = extract_curves(&mut stream(frames), &[CurveChannel::Luma], None).unwrap();
        let luma = set.get(CurveChannel::Luma).unwrap().values();
        assert!(luma.windows(2).all(|w| w[1] > w[0]), "{luma:?}");
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let frames: Vec<Frame> = (0..100u32)
            .map(|i| rgb(7, 5, move |p| [(i * 3 + p as u32) as u8, (i * 5) as u8, (p * 11) as u8]))
            .collect();
        let channels = CurveChannel::ALL;
        let one = extract_curves(&mut stream(frames.clone()), &channels, Some(1)).unwrap();
        let four = extract_curves(&mut stream(frames.clone()), &channels, Some(4)).unwrap();
        let global = extract_curves(&mut stream(frames), &channels, None).unwrap();
        assert_eq!(one, four);
        assert_eq!(one, global);
    }

    proptest! {
        #[test]
        fn brightening_never_lowers_luma(
            base in prop::collection::vec(any::<[u8; 3]>(), 1..40),
            bump in prop::collection::vec(any::<[u8; 3]>(), 40),
        ) {
            let n = base.len() as u32;
            let a = rgb(n, 1, |i| base[i]);
            let b = rgb(n, 1, |i| {
                let mut p = base[i];
                for k in 0..3 { p[k] = p[k].saturating_add(bump[i][k]); }
                p
            });
            prop_assert!(frame_luma_mean(&b) >= frame_luma_mean(&a));
        }

        #[test]
        fn rms_zero_iff_uniform(values in prop::collection::vec(0u8..4, 1..30)) {
            let n = values.len() as u32;
            let f = gray(n, 1, values.clone());
            let uniform = values.iter().all(|&v| v == values[0]);
            prop_assert_eq!(frame_contrast(&f, ContrastMethod::Rms) == 0.0, uniform);
        }
    }
}
