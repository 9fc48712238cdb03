//! Seeded synthetic curves and footage for tests, benchmarks and demos.

use std::io::Read;

use crate::gesture::Archetype;
use crate::ingest::{FrameRate, PixelFormat, StreamInfo};
use crate::rng::Prng;

/// Samples at `rate` Hz of the polyline through `knots` (time, value),
/// held flat outside the knot span.
pub fn piecewise_linear(knots: &[(f64, f64)], rate: f64, duration: f64) -> Vec<f64> {
    let n = (duration * rate).round() as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let k = knots.partition_point(|&(kt, _)| kt <= t);
            match k {
                0 => knots[0].1,
                k if k == knots.len() => knots[k - 1].1,
                k => {
                    let ((t0, v0), (t1, v1)) = (knots[k - 1], knots[k]);
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        })
        .collect()
}

pub fn add_gaussian_noise(values: &mut [f64], sigma: f64, rng: &mut Prng) {
    for v in values {
        *v = (*v + sigma * rng.next_gaussian()).clamp(0.0, 1.0);
    }
}

/// One generated gesture preceded by a short lead-in at its starting level.
#[derive(Clone, Debug)]
pub struct GestureInstance {
    pub values: Vec<f64>,
    /// First sample of the gesture proper.
    pub start: usize,
    /// Sample of the transient jump, if the cell has one.
    pub jump: Option<usize>,
    pub archetype: Archetype,
}

/// The six archetypes that correspond to a drawn gesture cell.
pub const CELLS: [Archetype; 6] = [
    Archetype::ChordResonance,
    Archetype::ChordArpeggio,
    Archetype::TremoloScratch,
    Archetype::ChordHeld,
    Archetype::ArpeggioDetached,
    Archetype::GranularTexture,
];

/// Random instance of `cell` at `rate` Hz with measurement noise up to `max_sigma`.
///
/// Texture amplitude belongs to the tremolo and granular gestures themselves
/// and is not counted as measurement noise.
pub fn gesture_instance(cell: Archetype, rate: f64, max_sigma: f64, rng: &mut Prng) -> GestureInstance {
    let lead = (0.5 * rate).round() as usize;
    let secs = |s: f64| (s * rate).round() as usize;
    let t = |i: usize| i as f64 / rate;
    let duration = rng.uniform(3.0, 8.0);
    let n = secs(duration);
    let base = rng.uniform(0.02, 0.15);

    let (lead_level, body, jump): (f64, Vec<f64>, bool) = match cell {
        Archetype::ChordResonance => {
            let peak = rng.uniform(0.7, 0.95);
            let end = rng.uniform(0.05, peak - 0.35);
            let body = (0..n).map(|i| peak + (end - peak) * i as f64 / (n - 1) as f64).collect();
            (base, body, true)
        }
        Archetype::ChordArpeggio => {
            let c = rng.uniform(0.05, 0.2);
            let d = rng.uniform(0.5, 0.75);
            let tau = rng.uniform(duration / 8.0, duration / 3.0);
            (base, (0..n).map(|i| c + d * (-t(i) / tau).exp()).collect(), true)
        }
        Archetype::TremoloScratch => {
            let a = rng.uniform(0.1, 0.3);
            let b = rng.uniform(a + 0.4, 0.85);
            let amp = rng.uniform(0.07, 0.12);
            let body = (0..n)
                .map(|i| a + (b - a) * i as f64 / (n - 1) as f64 + rng.uniform(-amp, amp))
                .collect();
            (a, body, false)
        }
        Archetype::ChordHeld => {
            let level = rng.uniform(0.5, 0.9);
            (base, vec![level; n], true)
        }
        Archetype::ArpeggioDetached => {
            let steps = 3 + (rng.next_u64() % 3) as usize;
            let a = rng.uniform(0.1, 0.25);
            let h = rng.uniform(0.1, 0.15);
            let mut body = Vec::new();
            for k in 0..=steps {
                let len = secs(rng.uniform(0.8, 1.5));
                body.extend(std::iter::repeat_n(a + h * k as f64, len));
            }
            (a, body, false)
        }
        Archetype::GranularTexture => {
            let m = rng.uniform(0.3, 0.7);
            let w = rng.uniform(0.12, 0.2);
            (m, (0..n).map(|_| m + rng.uniform(-w, w)).collect(), false)
        }
        other => panic!("{other:?} has no generator"),
    };

    let mut values = vec![lead_level; lead];
    values.extend(body);
    let sigma = rng.uniform(0.0, max_sigma);
    add_gaussian_noise(&mut values, sigma, rng);
    GestureInstance {
        values,
        start: lead,
        jump: jump.then_some(lead),
        archetype: cell,
    }
}

/// Luma script of the pinned 90 s demonstration film, one value per frame.
pub fn film_curve(fps: f64) -> Vec<f64> {
    let rate = fps;
    let knots: Vec<(f64, f64)> = vec![
        (0.0, 0.1),
        (10.0, 0.7),
        // jump, then linear fall
        (10.0 + 1e-6, 0.9),
        (18.0, 0.3),
        (18.0 + 1e-6, 0.85),
    ];
    let mut v = piecewise_linear(&knots, rate, 18.0);
    let seg = |secs: f64| (secs * rate).round() as usize;
    // exponential fall
    v.extend((0..seg(10.0)).map(|i| 0.1 + 0.75 * (-(i as f64 / rate) / 2.0).exp()));
    // rising staircase
    for k in 0..4 {
        v.extend(std::iter::repeat_n(0.15 + 0.15 * k as f64, seg(2.0)));
    }
    // granular texture
    let mut rng = Prng::new(90);
    v.extend((0..seg(10.0)).map(|_| 0.5 + rng.uniform(-0.15, 0.15)));
    // held chord
    v.extend(std::iter::repeat_n(0.08, seg(1.0)));
    v.extend(std::iter::repeat_n(0.75, seg(9.0)));
    // noisy rise
    v.extend((0..seg(10.0)).map(|i| 0.2 + 0.6 * i as f64 / (seg(10.0) - 1) as f64 + rng.uniform(-0.09, 0.09)));
    // slow fade out
    v.extend((0..seg(12.0)).map(|i| 0.7 - 0.5 * i as f64 / (seg(12.0) - 1) as f64));
    // recurring resonance gesture
    v.extend(std::iter::repeat_n(0.1, seg(2.0)));
    v.extend((0..seg(10.0)).map(|i| 0.9 - 0.6 * i as f64 / (seg(10.0) - 1) as f64));
    // film grain
    add_gaussian_noise(&mut v, 0.01, &mut rng);
    v
}

/// 8-bit limited-range luma code for brightness `v`.
pub fn luma_code(v: f64) -> u8 {
    (16.0 + (v.clamp(0.0, 1.0) * 219.0).round()) as u8
}

/// YUV4MPEG2 stream whose frame `i` has mean luma code `luma_code(values[i])`.
///
/// Frames are produced on demand while reading, so long streams need no
/// buffer. The luma plane carries a zero-mean checkerboard so frames are not
/// uniform; chroma is neutral.
pub struct SyntheticY4m {
    info: StreamInfo,
    values: Vec<f64>,
    header: Vec<u8>,
    frame: Vec<u8>,
    next_frame: usize,
    pos: usize,
    in_header: bool,
}

impl SyntheticY4m {
    pub fn new(width: u32, height: u32, fps: FrameRate, values: Vec<f64>) -> Self {
        assert!(width.is_multiple_of(2) && height.is_multiple_of(2), "4:2:0 needs even dimensions");
        let info = StreamInfo::new(width, height, fps, PixelFormat::Y4m420).expect("valid stream");
        let mut header = Vec::new();
        crate::ingest::write_y4m_header(&mut header, &info).expect("in-memory write");
        SyntheticY4m {
            info,
            values,
            header,
            frame: Vec::new(),
            next_frame: 0,
            pos: 0,
            in_header: true,
        }
    }

    pub fn info(&self) -> &StreamInfo {
        &self.info
    }

    /// Total stream length in bytes.
    pub fn len(&self) -> u64 {
        self.header.len() as u64 + self.values.len() as u64 * (6 + self.info.bytes_per_frame() as u64)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn fill_frame(&mut self, i: usize) {
        let (w, h) = (self.info.width as usize, self.info.height as usize);
        let y = luma_code(self.values[i]);
        // +-d pairs keep the mean exact while staying inside the code range
        let d = (y - 16).min(235 - y).min(8);
        self.frame.clear();
        self.frame.extend_from_slice(b"FRAME\n");
        for r in 0..h {
            self.frame.extend((0..w).map(|c| if (r + c) % 2 == 0 { y + d } else { y - d }));
        }
        self.frame.resize(6 + self.info.bytes_per_frame(), 128);
    }

    /// The whole stream in memory.
    pub fn to_bytes(mut self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() as usize);
        self.read_to_end(&mut out).expect("in-memory read");
        out
    }
}

impl Read for SyntheticY4m {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        loop {
            let src: &[u8] = if self.in_header { &self.header } else { &self.frame };
            if self.pos < src.len() {
                let n = buf.len().min(src.len() - self.pos);
                buf[..n].copy_from_slice(&src[self.pos..self.pos + n]);
                self.pos += n;
                return Ok(n);
            }
            if self.next_frame == self.values.len() {
                return Ok(0);
            }
            self.in_header = false;
            self.fill_frame(self.next_frame);
            self.next_frame += 1;
            self.pos = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Y4mReader;
    use crate::ingest::FrameSource;
    use crate::photometry::frame_luma_mean;
    use std::io::BufReader;

    #[test]
    fn polyline_knots() {
        let v = piecewise_linear(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)], 4.0, 3.0);
        assert_eq!(v, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.875, 0.75, 0.625, 0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn synthetic_video_means() {
        let values = vec![0.0, 0.02, 0.5, 0.99, 1.0];
        let src = SyntheticY4m::new(8, 6, FrameRate::new(24, 1).unwrap(), values.clone());
        let len = src.len();
        let bytes = src.to_bytes();
        assert_eq!(bytes.len() as u64, len);
        let mut reader = Y4mReader::new(BufReader::new(bytes.as_slice())).unwrap();
        for v in values {
            let f = reader.next_frame().unwrap().unwrap();
            let expected = (luma_code(v) - 16) as f64 / 219.0;
            assert_eq!(frame_luma_mean(&f), expected);
        }
        assert!(reader.next_frame().unwrap().is_none());
    }

    #[test]
    fn instances_are_seeded() {
        for cell in CELLS {
            let a = gesture_instance(cell, 50.0, 0.02, &mut Prng::new(4));
            let b = gesture_instance(cell, 50.0, 0.02, &mut Prng::new(4));
            assert_eq!(a.values, b.values);
            assert!(a.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn film_is_ninety_seconds() {
        assert_eq!(film_curve(24.0).len(), 90 * 24);
    }
}
