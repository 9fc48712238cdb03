//! Headerless RGB24 frames with a JSON sidecar descriptor.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Frame, FrameRate, FrameSource, IngestError, PixelFormat, Result, StreamInfo};

/// Sidecar contents. Exactly these four keys are accepted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSidecar {
    pub width: u32,
    pub height: u32,
    pub fps_num: u32,
    pub fps_den: u32,
}

impl RawSidecar {
    pub fn parse(path: &Path, text: &str) -> Result<StreamInfo> {
        let invalid = |reason: String| IngestError::InvalidSidecar {
            path: path.to_path_buf(),
            reason,
        };
        let sc: RawSidecar = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        let fps = FrameRate::new(sc.fps_num, sc.fps_den).map_err(|e| invalid(e.to_string()))?;
        StreamInfo::new(sc.width, sc.height, fps, PixelFormat::Rgb24).map_err(|e| invalid(e.to_string()))
    }
}

/// `<file>.json` if present, else `<file stem>.json`.
pub(super) fn find_sidecar(path: &Path) -> Option<PathBuf> {
    let mut appended = path.as_os_str().to_owned();
    appended.push(".json");
    let appended = PathBuf::from(appended);
    if appended.is_file() {
        return Some(appended);
    }
    let replaced = path.with_extension("json");
    (replaced != path && replaced.is_file()).then_some(replaced)
}

pub struct RawRgbReader<R = BufReader<File>> {
    inner: R,
    info: StreamInfo,
    next_index: u64,
    done: bool,
}

impl RawRgbReader {
    pub fn open(path: &Path, sidecar: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(sidecar)?;
        let mut info = RawSidecar::parse(sidecar, &text)?;
        let len = std::fs::metadata(path)?.len();
        info.frame_count = Some(len / info.bytes_per_frame() as u64);
        Ok(RawRgbReader::new(BufReader::new(File::open(path)?), info))
    }
}

impl<R: Read> RawRgbReader<R> {
    pub fn new(inner: R, info: StreamInfo) -> Self {
        RawRgbReader {
            inner,
            info,
            next_index: 0,
            done: false,
        }
    }

    fn read_frame(&mut self) -> Result<Option<Frame>> {
        let index = self.next_index;
        let mut data = vec![0u8; self.info.bytes_per_frame()];
        let mut filled = 0;
        while filled < data.len() {
            match self.inner.read(&mut data[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        if filled == 0 {
            return Ok(None);
        }
        if filled < data.len() {
            return Err(IngestError::TruncatedFrame { index });
        }
        self.next_index += 1;
        Ok(Some(Frame {
            index,
            width: self.info.width,
            height: self.info.height,
            format: PixelFormat::Rgb24,
            data,
        }))
    }
}

impl<R: Read> FrameSource for RawRgbReader<R> {
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
