//! Frame ingestion and micro-sequential segment extraction.
//!
//! A video is analysed through one contiguous window of `L` frames
//! `I_k .. I_{k+L-1}`. The start index is either drawn uniformly from
//! `0..=T-L` with a seeded generator (training passes) or pinned to 0
//! (evaluation passes).

mod rawfile;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rawfile::{
    decode_mpfraw, encode_mpfraw, read_mpfraw, write_mpfraw, RawHeader, RAW_HEADER_LEN, RAW_MAGIC,
    RAW_VERSION,
};

/// Segment length used when nothing else is requested.
pub const DEFAULT_SEGMENT_LEN: usize = 8;

/// Frame rate assumed when neither the caller nor the source states one.
pub const DEFAULT_FPS: Fps = Fps { num: 8, den: 1 };

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("input path does not exist: {}", .0.display())]
    MissingPath(PathBuf),
    #[error("no frame images found in {}", .0.display())]
    EmptyDirectory(PathBuf),
    #[error("frame {} is {found_h}x{found_w}x{found_c}, expected {expected_h}x{expected_w}x{expected_c}", file.display())]
    DimensionMismatch {
        file: PathBuf,
        expected_h: usize,
        expected_w: usize,
        expected_c: usize,
        found_h: usize,
        found_w: usize,
        found_c: usize,
    },
    #[error("cannot decode {}: {reason}", file.display())]
    Undecodable { file: PathBuf, reason: String },
    #[error("segment length must be at least 2, got {0}")]
    SegmentTooShort(usize),
    #[error("source has no frames")]
    NoFrames,
    #[error("frame rate must be positive, got {num}/{den}")]
    InvalidFps { num: u32, den: u32 },
    #[error("frame buffer holds {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("segment {start}..{end} exceeds source length {total}")]
    SegmentOutOfRange {
        start: usize,
        end: usize,
        total: usize,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SamplingError {
    pub fn kind(&self) -> &'static str {
        match self {
            SamplingError::MissingPath(_) => "missing_path",
            SamplingError::EmptyDirectory(_) => "empty_directory",
            SamplingError::DimensionMismatch { .. } => "dimension_mismatch",
            SamplingError::Undecodable { .. } => "undecodable",
            SamplingError::SegmentTooShort(_) => "segment_too_short",
            SamplingError::NoFrames => "no_frames",
            SamplingError::InvalidFps { .. } => "invalid_fps",
            SamplingError::BufferSize { .. } => "buffer_size",
            SamplingError::SegmentOutOfRange { .. } => "segment_out_of_range",
            SamplingError::Io { .. } => "io",
        }
    }
}

/// Frames per second as a positive rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fps {
    pub num: u32,
    pub den: u32,
}

impl Fps {
    pub fn new(num: u32, den: u32) -> Result<Self, SamplingError> {
        if num == 0 || den == 0 {
            return Err(SamplingError::InvalidFps { num, den });
        }
        Ok(Fps { num, den })
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Fps {
    fn default() -> Self {
        DEFAULT_FPS
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Accepts `30` or `30000/1001`.
impl FromStr for Fps {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (num, den) = s.split_once('/').unwrap_or((s, "1"));
        let parse = |v: &str| {
            v.trim()
                .parse::<u32>()
                .map_err(|_| format!("invalid frame rate `{s}`"))
        };
        Fps::new(parse(num)?, parse(den)?).map_err(|e| e.to_string())
    }
}

/// One decoded frame, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, SamplingError> {
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(SamplingError::BufferSize {
                expected,
                actual: data.len(),
            });
        }
        Ok(Frame {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Self {
        Frame {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Rec.601 luma per pixel.
    pub fn luma(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.iter().map(|&v| v as f64).collect(),
            _ => self
                .data
                .chunks_exact(self.channels)
                .map(|px| 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64)
                .collect(),
        }
    }

    /// Replicates a single-channel frame to three channels; other frames are
    /// returned unchanged.
    pub fn into_rgb(self) -> Frame {
        if self.channels != 1 {
            return self;
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Frame {
            channels: 3,
            data,
            ..self
        }
    }
}

/// A contiguous window of frames from one source.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    fps: Fps,
    source_id: String,
    start_index: usize,
    source_len: usize,
    short: bool,
}

impl FrameSequence {
    /// Wraps a whole source. All frames must share one shape.
    pub fn new(
        frames: Vec<Frame>,
        fps: Fps,
        source_id: impl Into<String>,
    ) -> Result<Self, SamplingError> {
        let first = frames.first().ok_or(SamplingError::NoFrames)?;
        let (h, w, c) = first.shape();
        for (i, f) in frames.iter().enumerate().skip(1) {
            if f.shape() != (h, w, c) {
                return Err(SamplingError::DimensionMismatch {
                    file: PathBuf::from(format!("frame #{i}")),
                    expected_h: h,
                    expected_w: w,
                    expected_c: c,
                    found_h: f.height,
                    found_w: f.width,
                    found_c: f.channels,
                });
            }
        }
        let source_len = frames.len();
        Ok(FrameSequence {
            frames,
            fps,
            source_id: source_id.into(),
            start_index: 0,
            source_len,
            short: false,
        })
    }

    /// Extracts `length` consecutive frames starting at `start`. When the
    /// source holds fewer than `length` frames the whole source is kept and
    /// the result is flagged short.
    pub fn segment(&self, start: usize, length: usize) -> Result<FrameSequence, SamplingError> {
        let total = self.frames.len();
        if total < length {
            return Ok(FrameSequence {
                frames: self.frames.clone(),
                fps: self.fps,
                source_id: self.source_id.clone(),
                start_index: self.start_index,
                source_len: self.source_len,
                short: true,
            });
        }
        let end = start + length;
        if end > total {
            return Err(SamplingError::SegmentOutOfRange { start, end, total });
        }
        Ok(FrameSequence {
            frames: self.frames[start..end].to_vec(),
            fps: self.fps,
            source_id: self.source_id.clone(),
            start_index: self.start_index + start,
            source_len: self.source_len,
            short: false,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    /// Number of frames in the source this window was cut from.
    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn is_short(&self) -> bool {
        self.short
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.frames[0].shape()
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentMode {
    Stochastic,
    #[default]
    Fixed,
}

impl FromStr for SegmentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stochastic" => Ok(SegmentMode::Stochastic),
            "fixed" => Ok(SegmentMode::Fixed),
            other => Err(format!("unknown segment mode `{other}`")),
        }
    }
}

/// Picks the start index of a `length`-frame window in a `total`-frame source.
pub fn sample_segment(
    total: usize,
    length: usize,
    mode: SegmentMode,
    seed: u64,
) -> Result<usize, SamplingError> {
    if length < 2 {
        return Err(SamplingError::SegmentTooShort(length));
    }
    if total == 0 {
        return Err(SamplingError::NoFrames);
    }
    if total <= length {
        return Ok(0);
    }
    match mode {
        SegmentMode::Fixed => Ok(0),
        SegmentMode::Stochastic => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(rng.random_range(0..=total - length))
        }
    }
}

/// How to read a source and which window to keep.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestSpec {
    /// Expected (H, W, C) of the decoded frames; checked when set.
    pub expected_shape: Option<(usize, usize, usize)>,
    /// Overrides any frame rate found in the source.
    pub fps: Option<Fps>,
    pub length: usize,
    pub mode: SegmentMode,
    pub seed: u64,
}

impl Default for IngestSpec {
    fn default() -> Self {
        IngestSpec {
            expected_shape: None,
            fps: None,
            length: DEFAULT_SEGMENT_LEN,
            mode: SegmentMode::Fixed,
            seed: 0,
        }
    }
}

/// Sidecar metadata read from `meta.json` next to an image directory.
#[derive(Debug, Deserialize)]
struct Sidecar {
    fps_numerator: u32,
    #[serde(default = "one")]
    fps_denominator: u32,
}

fn one() -> u32 {
    1
}

pub const SIDECAR_NAME: &str = "meta.json";

/// Reads every frame of a source (image directory or `.mpfraw` container).
pub fn load_source(path: &Path, spec: &IngestSpec) -> Result<FrameSequence, SamplingError> {
    if !path.exists() {
        return Err(SamplingError::MissingPath(path.to_path_buf()));
    }
    let mut seq = if path.is_dir() {
        load_image_dir(path)?
    } else {
        let (seq, _) = read_mpfraw(path)?;
        seq
    };
    if let Some(fps) = spec.fps {
        seq.fps = Fps::new(fps.num, fps.den)?;
    }
    if let Some((h, w, c)) = spec.expected_shape {
        let (fh, fw, fc) = seq.shape();
        if (fh, fw, fc) != (h, w, c) {
            return Err(SamplingError::DimensionMismatch {
                file: path.to_path_buf(),
                expected_h: h,
                expected_w: w,
                expected_c: c,
                found_h: fh,
                found_w: fw,
                found_c: fc,
            });
        }
    }
    Ok(seq)
}

/// Reads a source and cuts the window described by `spec`.
pub fn load_frames(path: &Path, spec: &IngestSpec) -> Result<FrameSequence, SamplingError> {
    let source = load_source(path, spec)?;
    let start = sample_segment(source.len(), spec.length, spec.mode, spec.seed)?;
    source.segment(start, spec.length)
}

fn is_frame_file(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png" | "ppm" | "pgm" | "pnm")
    )
}

/// Numeric key taken from the trailing digits of the file stem.
fn frame_number(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

/// Lists frame files in playback order.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>, SamplingError> {
    let entries = fs::read_dir(dir).map_err(|source| SamplingError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| SamplingError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let p = entry.path();
        if p.is_file() && is_frame_file(&p) {
            files.push(p);
        }
    }
    files.sort_by(|a, b| {
        let ka = (frame_number(a).unwrap_or(u64::MAX), a.file_name());
        let kb = (frame_number(b).unwrap_or(u64::MAX), b.file_name());
        ka.cmp(&kb)
    });
    Ok(files)
}

fn load_image_dir(dir: &Path) -> Result<FrameSequence, SamplingError> {
    let files = list_frame_files(dir)?;
    if files.is_empty() {
        return Err(SamplingError::EmptyDirectory(dir.to_path_buf()));
    }
    let mut frames: Vec<Frame> = Vec::with_capacity(files.len());
    for file in &files {
        let img = image::open(file).map_err(|e| SamplingError::Undecodable {
            file: file.clone(),
            reason: e.to_string(),
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        if let Some(first) = frames.first() {
            if (first.height, first.width) != (h, w) {
                return Err(SamplingError::DimensionMismatch {
                    file: file.clone(),
                    expected_h: first.height,
                    expected_w: first.width,
                    expected_c: 3,
                    found_h: h,
                    found_w: w,
                    found_c: 3,
                });
            }
        }
        frames.push(Frame::new(h, w, 3, rgb.into_raw())?);
    }
    let fps = read_sidecar_fps(dir)?.unwrap_or(DEFAULT_FPS);
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    FrameSequence::new(frames, fps, id)
}

fn read_sidecar_fps(dir: &Path) -> Result<Option<Fps>, SamplingError> {
    let path = dir.join(SIDECAR_NAME);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|source| SamplingError::Io {
        path: path.clone(),
        source,
    })?;
    let meta: Sidecar = serde_json::from_str(&text).map_err(|e| SamplingError::Undecodable {
        file: path.clone(),
        reason: e.to_string(),
    })?;
    Fps::new(meta.fps_numerator, meta.fps_denominator).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_with_indices(n: usize) -> FrameSequence {
        let frames = (0..n).map(|i| Frame::filled(2, 2, 3, i as u8)).collect();
        FrameSequence::new(frames, DEFAULT_FPS, "idx").unwrap()
    }

    #[test]
    fn fixed_mode_starts_at_zero() {
        assert_eq!(sample_segment(100, 8, SegmentMode::Fixed, 99).unwrap(), 0);
    }

    #[test]
    fn single_admissible_start() {
        for seed in 0..50 {
            assert_eq!(
                sample_segment(8, 8, SegmentMode::Stochastic, seed).unwrap(),
                0
            );
        }
    }

    #[test]
    fn short_source_returns_zero() {
        assert_eq!(sample_segment(3, 8, SegmentMode::Stochastic, 5).unwrap(), 0);
    }

    #[test]
    fn length_below_two_rejected() {
        assert!(matches!(
            sample_segment(10, 1, SegmentMode::Fixed, 0),
            Err(SamplingError::SegmentTooShort(1))
        ));
    }

    #[test]
    fn stochastic_is_deterministic() {
        let a = sample_segment(500, 8, SegmentMode::Stochastic, 1234).unwrap();
        let b = sample_segment(500, 8, SegmentMode::Stochastic, 1234).unwrap();
        assert_eq!(a, b);
        assert!(a <= 492);
    }

    #[test]
    fn segment_is_contiguous() {
        let src = seq_with_indices(20);
        let seg = src.segment(5, 8).unwrap();
        assert_eq!(seg.start_index(), 5);
        assert_eq!(seg.source_len(), 20);
        let idx: Vec<u8> = seg.frames().iter().map(|f| f.get(0, 0, 0)).collect();
        assert_eq!(idx, (5..13).collect::<Vec<u8>>());
    }

    #[test]
    fn short_source_is_flagged() {
        let seg = seq_with_indices(5).segment(0, 8).unwrap();
        assert!(seg.is_short());
        assert_eq!(seg.len(), 5);
    }

    #[test]
    fn segment_out_of_range() {
        assert!(seq_with_indices(10).segment(5, 8).is_err());
    }

    #[test]
    fn mixed_shapes_rejected() {
        let frames = vec![Frame::filled(4, 4, 3, 0), Frame::filled(8, 8, 3, 0)];
        assert!(matches!(
            FrameSequence::new(frames, DEFAULT_FPS, "x"),
            Err(SamplingError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gray_replicates_to_rgb() {
        let f = Frame::new(1, 2, 1, vec![7, 9]).unwrap().into_rgb();
        assert_eq!(f.data(), &[7, 7, 7, 9, 9, 9]);
    }

    #[test]
    fn frame_number_from_stem() {
        assert_eq!(frame_number(Path::new("frame_000012.png")), Some(12));
        assert_eq!(frame_number(Path::new("a.png")), None);
    }
}
