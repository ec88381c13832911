//! `.mpfraw` frame container.
//!
//! ```text
//! offset size  field
//!      0    4  magic "MPFR"
//!      4    2  version (u16 LE) = 1
//!      6    4  height (u32 LE)
//!     10    4  width (u32 LE)
//!     14    1  channels (u8)
//!     15    2  fps numerator (u16 LE)
//!     17    2  fps denominator (u16 LE)
//!     19    4  frame count (u32 LE)
//!     23    .. frames, row-major, channel-interleaved u8
//! ```

use std::fs;
use std::path::Path;

use super::{Fps, Frame, FrameSequence, SamplingError};

pub const RAW_MAGIC: &[u8; 4] = b"MPFR";
pub const RAW_VERSION: u16 = 1;
pub const RAW_HEADER_LEN: usize = 23;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawHeader {
    pub height: u32,
    pub width: u32,
    pub channels: u8,
    pub fps_num: u16,
    pub fps_den: u16,
    pub frame_count: u32,
}

impl RawHeader {
    pub fn frame_bytes(&self) -> usize {
        self.height as usize * self.width as usize * self.channels as usize
    }
}

fn undecodable(path: &Path, reason: impl Into<String>) -> SamplingError {
    SamplingError::Undecodable {
        file: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub(crate) fn parse_header(path: &Path, data: &[u8]) -> Result<RawHeader, SamplingError> {
    if data.len() < RAW_HEADER_LEN {
        return Err(undecodable(
            path,
            format!("header needs {RAW_HEADER_LEN} bytes, file has {}", data.len()),
        ));
    }
    if &data[0..4] != RAW_MAGIC {
        return Err(undecodable(path, "bad magic, expected MPFR"));
    }
    let version = u16::from_le_bytes([data[4], data[5]]);
    if version != RAW_VERSION {
        return Err(undecodable(path, format!("unsupported version {version}")));
    }
    let u32_at = |o: usize| u32::from_le_bytes([data[o], data[o + 1], data[o + 2], data[o + 3]]);
    let u16_at = |o: usize| u16::from_le_bytes([data[o], data[o + 1]]);
    Ok(RawHeader {
        height: u32_at(6),
        width: u32_at(10),
        channels: data[14],
        fps_num: u16_at(15),
        fps_den: u16_at(17),
        frame_count: u32_at(19),
    })
}

/// Decodes a container held in memory. Single-channel payloads are
/// replicated to RGB.
pub fn decode_mpfraw(
    path: &Path,
    data: &[u8],
) -> Result<(FrameSequence, RawHeader), SamplingError> {
    let header = parse_header(path, data)?;
    if !matches!(header.channels, 1 | 3) {
        return Err(undecodable(
            path,
            format!("unsupported channel count {}", header.channels),
        ));
    }
    let frame_len = header.frame_bytes();
    let expected = RAW_HEADER_LEN + frame_len * header.frame_count as usize;
    if data.len() != expected {
        return Err(undecodable(
            path,
            format!(
                "payload size mismatch: expected {expected} bytes, found {}",
                data.len()
            ),
        ));
    }
    if header.frame_count == 0 || frame_len == 0 {
        return Err(SamplingError::NoFrames);
    }
    let fps = Fps::new(header.fps_num as u32, header.fps_den as u32)?;
    let frames = data[RAW_HEADER_LEN..]
        .chunks_exact(frame_len)
        .map(|chunk| {
            Frame::new(
                header.height as usize,
                header.width as usize,
                header.channels as usize,
                chunk.to_vec(),
            )
            .map(Frame::into_rgb)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok((FrameSequence::new(frames, fps, id)?, header))
}

pub fn read_mpfraw(path: &Path) -> Result<(FrameSequence, RawHeader), SamplingError> {
    let data = fs::read(path).map_err(|source| SamplingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_mpfraw(path, &data)
}

/// Serializes frames into container bytes.
pub fn encode_mpfraw(frames: &[Frame], fps: Fps) -> Result<Vec<u8>, SamplingError> {
    let first = frames.first().ok_or(SamplingError::NoFrames)?;
    let (h, w, c) = first.shape();
    let fps_num = u16::try_from(fps.num).map_err(|_| SamplingError::InvalidFps {
        num: fps.num,
        den: fps.den,
    })?;
    let fps_den = u16::try_from(fps.den).map_err(|_| SamplingError::InvalidFps {
        num: fps.num,
        den: fps.den,
    })?;
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + frames.len() * h * w * c);
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&RAW_VERSION.to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.push(c as u8);
    out.extend_from_slice(&fps_num.to_le_bytes());
    out.extend_from_slice(&fps_den.to_le_bytes());
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    for f in frames {
        out.extend_from_slice(f.data());
    }
    Ok(out)
}

pub fn write_mpfraw(path: &Path, frames: &[Frame], fps: Fps) -> Result<(), SamplingError> {
    let bytes = encode_mpfraw(frames, fps)?;
    fs::write(path, bytes).map_err(|source| SamplingError::Io {
        path: path.to_path_buf(),
        source,
    })
}
