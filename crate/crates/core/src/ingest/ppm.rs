//! Binary PPM (P6) and PGM (P5) images, singly or as a numbered sequence.

use std::path::{Path, PathBuf};

use super::{Frame, FrameRate, FrameSource, IngestError, PixelFormat, Result, StreamInfo};

/// Decodes one binary PNM image with maxval 255.
///
/// Trailing bytes after the pixel payload are ignored.
pub fn read_ppm(bytes: &[u8]) -> Result<Frame> {
    let format = match bytes.get(..2) {
        Some(b"P6") => PixelFormat::Rgb24,
        Some(b"P5") => PixelFormat::Gray8,
        _ => return Err(IngestError::UnsupportedMagic),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.uint("width")?;
    let height = cur.uint("height")?;
    let maxval = cur.uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(IngestError::MalformedHeader("zero image dimension"));
    }
    if maxval != 255 {
        return Err(IngestError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(IngestError::MalformedHeader("missing whitespace after maxval")),
    }
    let expected = format.bytes_per_frame(width, height);
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(IngestError::TruncatedPixelData {
            expected,
            found: payload.len(),
        });
    }
    Ok(Frame {
        index: 0,
        width,
        height,
        format,
        data: payload[..expected].to_vec(),
    })
}

pub fn write_ppm(frame: &Frame) -> Vec<u8> {
    let magic = match frame.format {
        PixelFormat::Rgb24 => "P6",
        _ => "P5",
    };
    let data = match frame.format {
        PixelFormat::Rgb24 | PixelFormat::Gray8 => &frame.data[..],
        _ => frame.y_plane(),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(data);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn uint(&mut self, what: &'static str) -> Result<u32> {
        let start = self.pos;
        self.skip_space();
        if self.pos == start {
            return Err(IngestError::MalformedHeader(what));
        }
        let digits_start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value * 10 + u64::from(b - b'0');
            if value > u64::from(u32::MAX) {
                return Err(IngestError::MalformedHeader(what));
            }
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(IngestError::MalformedHeader(what));
        }
        Ok(value as u32)
    }
}

/// A directory of `.ppm`/`.pgm` images read in lexicographic filename order.
/// All images must share dimensions and format with the first one.
pub struct PpmSequence {
    files: Vec<PathBuf>,
    info: StreamInfo,
    next: usize,
    done: bool,
}

impl PpmSequence {
    pub fn open(dir: &Path, fps: FrameRate) -> Result<Self> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| e.eq_ignore_ascii_case("ppm") || e.eq_ignore_ascii_case("pgm"))
            })
            .collect();
        files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
        if files.is_empty() {
            return Err(IngestError::EmptySequence(dir.to_path_buf()));
        }
        Self::from_files(files, fps)
    }

    pub fn single(path: &Path, fps: FrameRate) -> Result<Self> {
        Self::from_files(vec![path.to_path_buf()], fps)
    }

    fn from_files(files: Vec<PathBuf>, fps: FrameRate) -> Result<Self> {
        let first = read_ppm(&std::fs::read(&files[0])?)?;
        let mut info = StreamInfo::new(first.width, first.height, fps, first.format)?;
        info.frame_count = Some(files.len() as u64);
        Ok(PpmSequence {
            files,
            info,
            next: 0,
            done: false,
        })
    }

    fn read_next(&mut self) -> Result<Option<Frame>> {
        let Some(path) = self.files.get(self.next) else {
            return Ok(None);
        };
        let mut frame = read_ppm(&std::fs::read(path)?)?;
        if frame.width != self.info.width
            || frame.height != self.info.height
            || frame.format != self.info.pixel_format
        {
            return Err(IngestError::DimensionMismatch {
                path: path.clone(),
                expected: format!("{}x{} {}", self.info.width, self.info.height, self.info.pixel_format),
                found: format!("{}x{} {}", frame.width, frame.height, frame.format),
            });
        }
        frame.index = self.next as u64;
        self.next += 1;
        Ok(Some(frame))
    }
}

impl FrameSource for PpmSequence {
    fn info(&self) -> &StreamInfo {
        &self.info
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        if self.done {
            return Ok(None);
        }
        let res = self.read_next();
        if !matches!(res, Ok(Some(_))) {
            self.done = true;
        }
        res
    }

    fn frames_read(&self) -> u64 {
        self.next as u64
    }
}
