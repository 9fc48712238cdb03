//! YUV4MPEG2 reader.
//!
//! Only the luma plane is used downstream, but frames carry their full
//! payload so that byte counts can be validated. Interlacing (`I`), aspect
//! (`A`) and extension (`X`) tokens are parsed past and ignored.

use std::io::{BufRead, Read, Write};

use super::{Frame, FrameRate, FrameSource, IngestError, PixelFormat, Result, StreamInfo};

const SIGNATURE: &[u8] = b"YUV4MPEG2";
const MAX_HEADER_LEN: u64 = 64 * 1024;
const MAX_FRAME_LINE_LEN: u64 = 4 * 1024;

/// Parses the stream header line at the start of `bytes`.
///
/// Returns the stream description and the number of bytes consumed, which
/// includes the terminating newline.
pub fn parse_y4m_header(bytes: &[u8]) -> Result<(StreamInfo, usize)> {
    if !bytes.starts_with(SIGNATURE) {
        return Err(IngestError::MissingSignature);
    }
    match bytes.get(SIGNATURE.len()) {
        Some(b' ') | Some(b'\n') => {}
        None => return Err(IngestError::TruncatedHeader),
        Some(_) => return Err(IngestError::MissingSignature),
    }
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or(IngestError::TruncatedHeader)?;
    let line = &bytes[SIGNATURE.len()..end];

    let mut width = None;
    let mut height = None;
    let mut fps = None;
    let mut format = PixelFormat::Y4m420;

    for token in line.split(|&b| b == b' ').filter(|t| !t.is_empty()) {
        let text = std::str::from_utf8(token)
            .map_err(|_| IngestError::InvalidToken(String::from_utf8_lossy(token).into_owned()))?;
        let (tag, value) = text.split_at(1);
        match tag {
            "W" => width = Some(parse_dim(text, value)?),
            "H" => height = Some(parse_dim(text, value)?),
            "F" => fps = Some(parse_rate(text, value)?),
            "C" => format = parse_colorspace(value)?,
            // interlacing, pixel aspect, extensions
            "I" | "A" | "X" => {}
            _ => {}
        }
    }

    let width = width.ok_or(IngestError::MissingRequiredToken('W'))?;
    let height = height.ok_or(IngestError::MissingRequiredToken('H'))?;
    let fps = fps.ok_or(IngestError::MissingRequiredToken('F'))?;
    Ok((StreamInfo::new(width, height, fps, format)?, end + 1))
}

fn parse_dim(token: &str, value: &str) -> Result<u32> {
    match value.parse::<u32>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(IngestError::InvalidToken(token.to_owned())),
    }
}

fn parse_rate(token: &str, value: &str) -> Result<FrameRate> {
    let bad = || IngestError::InvalidToken(token.to_owned());
    let (num, den) = value.split_once(':').ok_or_else(bad)?;
    let num = num.parse::<u32>().map_err(|_| bad())?;
    let den = den.parse::<u32>().map_err(|_| bad())?;
    FrameRate::new(num, den).map_err(|_| bad())
}

fn parse_colorspace(value: &str) -> Result<PixelFormat> {
    match value {
        "420" | "420jpeg" | "420mpeg2" => Ok(PixelFormat::Y4m420),
        "444" => Ok(PixelFormat::Y4m444),
        "mono" => Ok(PixelFormat::Y4mMono),
        other => Err(IngestError::UnsupportedColorspace(other.to_owned())),
    }
}

pub struct Y4mReader<R> {
    inner: R,
    info: StreamInfo,
    frame_len: usize,
    next_index: u64,
    done: bool,
    line: Vec<u8>,
}

impl<R: BufRead> Y4mReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut header = Vec::new();
        (&mut inner)
            .take(MAX_HEADER_LEN)
            .read_until(b'\n', &mut header)?;
        let (info, _) = parse_y4m_header(&header)?;
        Ok(Y4mReader {
            frame_len: info.bytes_per_frame(),
            inner,
            info,
            next_index: 0,
            done: false,
            line: Vec::with_capacity(16),
        })
    }

    fn read_frame(&mut self) -> Result<Option<Frame>> {
        let index = self.next_index;
        self.line.clear();
        (&mut self.inner)
            .take(MAX_FRAME_LINE_LEN)
            .read_until(b'\n', &mut self.line)?;
        if self.line.is_empty() {
            return Ok(None);
        }
        let marker_ok = self.line.starts_with(b"FRAME")
            && matches!(self.line.get(5), Some(b' ') | Some(b'\n') | None);
        if !marker_ok {
            return Err(IngestError::BadFrameMarker { index });
        }
        if self.line.last() != Some(&b'\n') {
            return Err(IngestError::TruncatedFrame { index });
        }
        let mut data = vec![0u8; self.frame_len];
        self.inner.read_exact(&mut data).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => IngestError::TruncatedFrame { index },
            _ => IngestError::Io(e),
        })?;
        self.next_index += 1;
        Ok(Some(Frame {
            index,
            width: self.info.width,
            height: self.info.height,
            format: self.info.pixel_format,
            data,
        }))
    }
}

impl<R: BufRead> FrameSource for Y4mReader<R> {
    fn info(&self) -> &StreamInfo {
        &self.info
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        if self.done {
            return Ok(None);
        }
        let res = self.read_frame();
        if !matches!(res, Ok(Some(_))) {
            self.done = true;
        }
        res
    }

    fn frames_read(&self) -> u64 {
        self.next_index
    }
}

pub fn write_y4m_header(out: &mut impl Write, info: &StreamInfo) -> std::io::Result<()> {
    let colorspace = match info.pixel_format {
        PixelFormat::Y4m420 => "C420jpeg",
        PixelFormat::Y4m444 => "C444",
        PixelFormat::Y4mMono => "Cmono",
        other => {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("{other} cannot be written as Y4M"),
            ))
        }
    };
    writeln!(
        out,
        "YUV4MPEG2 W{} H{} F{}:{} Ip A1:1 {}",
        info.width, info.height, info.fps.num, info.fps.den, colorspace
    )
}

pub fn write_y4m_frame(out: &mut impl Write, frame: &Frame) -> std::io::Result<()> {
    out.write_all(b"FRAME\n")?;
    out.write_all(&frame.data)
}
