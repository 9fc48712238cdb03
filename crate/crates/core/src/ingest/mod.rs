//! Decoder-free video ingest.
//!
//! Three input kinds are understood: YUV4MPEG2 streams, directories of binary
//! PPM/PGM images (read in lexicographic filename order) and headerless RGB24
//! files described by a JSON sidecar. All of them are exposed through the
//! [`FrameSource`] trait, which yields [`Frame`]s with strictly increasing
//! indices.

mod ppm;
mod raw;
mod y4m;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ppm::{read_ppm, write_ppm, PpmSequence};
pub use raw::{RawRgbReader, RawSidecar};
pub use y4m::{parse_y4m_header, write_y4m_frame, write_y4m_header, Y4mReader};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing YUV4MPEG2 signature")]
    MissingSignature,
    #[error("Y4M header is not terminated by a newline")]
    TruncatedHeader,
    #[error("Y4M header lacks required token '{0}'")]
    MissingRequiredToken(char),
    #[error("invalid Y4M header token '{0}'")]
    InvalidToken(String),
    #[error("unsupported Y4M colorspace '{0}'")]
    UnsupportedColorspace(String),
    #[error("expected FRAME marker before frame {index}")]
    BadFrameMarker { index: u64 },
    #[error("stream ended inside frame {index}")]
    TruncatedFrame { index: u64 },
    #[error("unsupported image magic (expected P5 or P6)")]
    UnsupportedMagic,
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("malformed PNM header: {0}")]
    MalformedHeader(&'static str),
    #[error("pixel data truncated: expected {expected} bytes, found {found}")]
    TruncatedPixelData { expected: usize, found: usize },
    #[error("{path}: frame is {found}, sequence is {expected}")]
    DimensionMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("no .ppm/.pgm images in {0}")]
    EmptySequence(PathBuf),
    #[error("invalid sidecar {path}: {reason}")]
    InvalidSidecar { path: PathBuf, reason: String },
    #[error("{0}: not a Y4M stream, PPM/PGM image, image directory, or raw RGB24 file with sidecar")]
    UnrecognizedInput(PathBuf),
    #[error("invalid stream parameters: {0}")]
    InvalidStreamInfo(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PixelFormat {
    Rgb24,
    Gray8,
    Y4m444,
    Y4m420,
    /// Y4M `Cmono`: a single limited-range luma plane.
    Y4mMono,
}

impl PixelFormat {
    pub fn bytes_per_frame(self, width: u32, height: u32) -> usize {
        let (w, h) = (width as usize, height as usize);
        match self {
            PixelFormat::Rgb24 | PixelFormat::Y4m444 => 3 * w * h,
            PixelFormat::Gray8 | PixelFormat::Y4mMono => w * h,
            PixelFormat::Y4m420 => w * h + 2 * w.div_ceil(2) * h.div_ceil(2),
        }
    }

    pub fn is_y4m(self) -> bool {
        matches!(
            self,
            PixelFormat::Y4m444 | PixelFormat::Y4m420 | PixelFormat::Y4mMono
        )
    }

    pub fn has_rgb(self) -> bool {
        self == PixelFormat::Rgb24
    }
}

impl fmt::Display for PixelFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PixelFormat::Rgb24 => "RGB24",
            PixelFormat::Gray8 => "GRAY8",
            PixelFormat::Y4m444 => "Y4M_444",
            PixelFormat::Y4m420 => "Y4M_420",
            PixelFormat::Y4mMono => "Y4M_MONO",
        })
    }
}

/// Frames per second as an exact rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(IngestError::InvalidStreamInfo(format!(
                "frame rate {num}/{den} must have positive numerator and denominator"
            )));
        }
        Ok(FrameRate { num, den })
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamInfo {
    pub width: u32,
    pub height: u32,
    pub fps: FrameRate,
    pub pixel_format: PixelFormat,
    pub frame_count: Option<u64>,
}

impl StreamInfo {
    pub fn new(width: u32, height: u32, fps: FrameRate, pixel_format: PixelFormat) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(IngestError::InvalidStreamInfo(format!(
                "dimensions {width}x{height} must be positive"
            )));
        }
        FrameRate::new(fps.num, fps.den)?;
        Ok(StreamInfo {
            width,
            height,
            fps,
            pixel_format,
            frame_count: None,
        })
    }

    pub fn bytes_per_frame(&self) -> usize {
        self.pixel_format.bytes_per_frame(self.width, self.height)
    }
}

/// One decoded frame. `data` holds exactly `format.bytes_per_frame(width, height)` bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub index: u64,
    pub width: u32,
    pub height: u32,
    pub format: PixelFormat,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn new(index: u64, width: u32, height: u32, format: PixelFormat, data: Vec<u8>) -> Result<Self> {
        let expected = format.bytes_per_frame(width, height);
        if width == 0 || height == 0 {
            return Err(IngestError::InvalidStreamInfo(format!(
                "dimensions {width}x{height} must be positive"
            )));
        }
        if data.len() != expected {
            return Err(IngestError::TruncatedPixelData {
                expected,
                found: data.len(),
            });
        }
        Ok(Frame {
            index,
            width,
            height,
            format,
            data,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// The luma plane of a Y4M frame (first `width * height` bytes).
    pub fn y_plane(&self) -> &[u8] {
        &self.data[..self.pixel_count()]
    }
}

/// A sequential, single-consumer source of frames.
pub trait FrameSource {
    fn info(&self) -> &StreamInfo;

    /// Returns the next frame, `Ok(None)` at a clean end of stream.
    ///
    /// After an error the source is exhausted and keeps returning `Ok(None)`.
    fn next_frame(&mut self) -> Result<Option<Frame>>;

    /// Number of frames handed out so far.
    fn frames_read(&self) -> u64;
}

impl<S: FrameSource + ?Sized> FrameSource for Box<S> {
    fn info(&self) -> &StreamInfo {
        (**self).info()
    }
    fn next_frame(&mut self) -> Result<Option<Frame>> {
        (**self).next_frame()
    }
    fn frames_read(&self) -> u64 {
        (**self).frames_read()
    }
}

/// In-memory frame list, mostly useful for tests and synthetic input.
pub struct VecSource {
    info: StreamInfo,
    frames: std::vec::IntoIter<Frame>,
    read: u64,
}

impl VecSource {
    pub fn new(info: StreamInfo, frames: Vec<Frame>) -> Result<Self> {
        let bpf = info.bytes_per_frame();
        for (i, f) in frames.iter().enumerate() {
            if f.index != i as u64
                || f.width != info.width
                || f.height != info.height
                || f.format != info.pixel_format
                || f.data.len() != bpf
            {
                return Err(IngestError::InvalidStreamInfo(format!(
                    "frame {i} does not match the declared stream"
                )));
            }
        }
        let mut info = info;
        info.frame_count = Some(frames.len() as u64);
        Ok(VecSource {
            info,
            frames: frames.into_iter(),
            read: 0,
        })
    }
}

impl FrameSource for VecSource {
    fn info(&self) -> &StreamInfo {
        &self.info
    }
    fn next_frame(&mut self) -> Result<Option<Frame>> {
        let f = self.frames.next();
        if f.is_some() {
            self.read += 1;
        }
        Ok(f)
    }
    fn frames_read(&self) -> u64 {
        self.read
    }
}

/// Opens `path` as a frame source, sniffing its kind.
///
/// Directories are read as PPM/PGM sequences at `sequence_fps`. Files are
/// Y4M if they start with the YUV4MPEG2 signature, single PPM/PGM images if
/// they start with `P5`/`P6`, and raw RGB24 if a sidecar descriptor exists
/// (`<file>.json`, else the file name with its extension replaced by `json`).
pub fn open_source(path: &Path, sequence_fps: FrameRate) -> Result<Box<dyn FrameSource + Send>> {
    if path.is_dir() {
        return Ok(Box::new(PpmSequence::open(path, sequence_fps)?));
    }
    let mut file = File::open(path)?;
    let mut magic = [0u8; 9];
    let got = read_prefix(&mut file, &mut magic)?;
    let magic = &magic[..got];
    if magic.starts_with(b"YUV4MPEG2") {
        let file = File::open(path)?;
        return Ok(Box::new(Y4mReader::new(BufReader::new(file))?));
    }
    if let Some(sidecar) = raw::find_sidecar(path) {
        return Ok(Box::new(RawRgbReader::open(path, &sidecar)?));
    }
    if magic.starts_with(b"P5") || magic.starts_with(b"P6") {
        return Ok(Box::new(PpmSequence::single(path, sequence_fps)?));
    }
    Err(IngestError::UnrecognizedInput(path.to_path_buf()))
}

fn read_prefix(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}
