use std::fs;
use std::path::Path;

use image::{GrayImage, RgbImage};

use mpfscope::sampling::{
    encode_mpfraw, load_frames, load_source, read_mpfraw, sample_segment, write_mpfraw, Fps,
    Frame, IngestSpec, SamplingError, SegmentMode, RAW_HEADER_LEN,
};
use mpfscope::stats::chi_square_uniform;

fn write_png(path: &Path, w: u32, h: u32, value: u8) {
    RgbImage::from_pixel(w, h, image::Rgb([value, value / 2, 255 - value]))
        .save(path)
        .unwrap();
}

#[test]
fn png_directory_of_identical_frames() {
    let dir = tempfile::tempdir().unwrap();
    for i in 1..=8 {
        write_png(&dir.path().join(format!("frame_{i:06}.png")), 4, 4, 90);
    }
    let seq = load_frames(dir.path(), &IngestSpec::default()).unwrap();
    assert_eq!(seq.len(), 8);
    assert_eq!(seq.shape(), (4, 4, 3));
    assert_eq!(seq.fps(), Fps::new(8, 1).unwrap());
    assert!(seq.frames().windows(2).all(|p| p[0] == p[1]));
}

#[test]
fn mixed_sizes_name_the_second_file() {
    let dir = tempfile::tempdir().unwrap();
    write_png(&dir.path().join("frame_000001.png"), 4, 4, 10);
    write_png(&dir.path().join("frame_000002.png"), 8, 8, 10);
    write_png(&dir.path().join("frame_000003.png"), 4, 4, 10);
    let err = load_frames(dir.path(), &IngestSpec::default()).unwrap_err();
    match err {
        SamplingError::DimensionMismatch { file, .. } => {
            assert_eq!(file.file_name().unwrap(), "frame_000002.png")
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn numeric_order_not_lexical() {
    let dir = tempfile::tempdir().unwrap();
    for i in [1u8, 2, 10, 11, 3] {
        write_png(&dir.path().join(format!("f{i}.png")), 2, 2, i * 10);
    }
    let seq = load_source(dir.path(), &IngestSpec::default()).unwrap();
    let firsts: Vec<u8> = seq.frames().iter().map(|f| f.get(0, 0, 0)).collect();
    assert_eq!(firsts, vec![10, 20, 30, 100, 110]);
}

#[test]
fn sidecar_and_override_fps() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..3 {
        write_png(&dir.path().join(format!("{i}.png")), 2, 2, 0);
    }
    fs::write(
        dir.path().join("meta.json"),
        r#"{"fps_numerator": 30000, "fps_denominator": 1001}"#,
    )
    .unwrap();
    let spec = IngestSpec {
        length: 2,
        ..IngestSpec::default()
    };
    assert_eq!(load_frames(dir.path(), &spec).unwrap().fps(), Fps::new(30000, 1001).unwrap());
    let spec = IngestSpec {
        fps: Some(Fps::new(24, 1).unwrap()),
        ..spec
    };
    assert_eq!(load_frames(dir.path(), &spec).unwrap().fps().as_f64(), 24.0);
}

#[test]
fn grayscale_png_becomes_rgb() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..2 {
        GrayImage::from_pixel(3, 2, image::Luma([77]))
            .save(dir.path().join(format!("{i}.png")))
            .unwrap();
    }
    let spec = IngestSpec {
        length: 2,
        ..IngestSpec::default()
    };
    let seq = load_frames(dir.path(), &spec).unwrap();
    assert_eq!(seq.shape(), (2, 3, 3));
    assert!(seq.frames()[0].data().iter().all(|&v| v == 77));
}

#[test]
fn undecodable_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    write_png(&dir.path().join("0.png"), 2, 2, 0);
    fs::write(dir.path().join("1.png"), b"not an image").unwrap();
    let err = load_source(dir.path(), &IngestSpec::default()).unwrap_err();
    assert_eq!(err.kind(), "undecodable");
    assert!(err.to_string().contains("1.png"));
}

#[test]
fn missing_path() {
    let err = load_source(Path::new("/definitely/not/here"), &IngestSpec::default()).unwrap_err();
    assert_eq!(err.kind(), "missing_path");
}

/// Builds the container bytes by hand, independent of the encoder.
fn raw_bytes(frames: u32, h: u32, w: u32, c: u8) -> Vec<u8> {
    let mut out = b"MPFR".to_vec();
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.push(c);
    out.extend_from_slice(&25u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&frames.to_le_bytes());
    for t in 0..frames {
        for i in 0..h * w * c as u32 {
            out.push(((t * 31 + i) % 251) as u8);
        }
    }
    out
}

#[test]
fn raw_container_segment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.mpfraw");
    let bytes = raw_bytes(10, 64, 64, 3);
    assert_eq!(bytes.len(), RAW_HEADER_LEN + 10 * 64 * 64 * 3);
    fs::write(&path, &bytes).unwrap();

    let spec = IngestSpec {
        expected_shape: Some((64, 64, 3)),
        ..IngestSpec::default()
    };
    let seq = load_frames(&path, &spec).unwrap();
    assert_eq!(seq.len(), 8);
    assert_eq!(seq.fps(), Fps::new(25, 1).unwrap());
    // every frame carries its index in the first byte, so contiguity is visible
    for (t, f) in seq.frames().iter().enumerate() {
        assert_eq!(f.data()[0], ((t as u32 * 31) % 251) as u8);
    }

    let (all, _) = read_mpfraw(&path).unwrap();
    assert_eq!(encode_mpfraw(all.frames(), all.fps()).unwrap(), bytes);

    let spec = IngestSpec {
        expected_shape: Some((32, 64, 3)),
        ..IngestSpec::default()
    };
    assert_eq!(load_frames(&path, &spec).unwrap_err().kind(), "dimension_mismatch");
}

#[test]
fn stochastic_segment_is_contiguous() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("idx.mpfraw");
    let frames: Vec<Frame> = (0..30).map(|i| Frame::filled(2, 2, 3, i)).collect();
    write_mpfraw(&path, &frames, Fps::default()).unwrap();
    for seed in 0..20 {
        let spec = IngestSpec {
            mode: SegmentMode::Stochastic,
            seed,
            ..IngestSpec::default()
        };
        let seq = load_frames(&path, &spec).unwrap();
        let k = seq.start_index() as u8;
        let idx: Vec<u8> = seq.frames().iter().map(|f| f.get(0, 0, 0)).collect();
        assert_eq!(idx, (k..k + 8).collect::<Vec<_>>());
    }
}

#[test]
fn short_source_is_kept_whole() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.mpfraw");
    let frames: Vec<Frame> = (0..5).map(|i| Frame::filled(2, 2, 3, i)).collect();
    write_mpfraw(&path, &frames, Fps::default()).unwrap();
    let seq = load_frames(&path, &IngestSpec::default()).unwrap();
    assert_eq!(seq.len(), 5);
    assert!(seq.is_short());
}

#[test]
fn stochastic_start_is_uniform() {
    let mut counts = vec![0u64; 13];
    for i in 0..10_000u64 {
        let k = sample_segment(20, 8, SegmentMode::Stochastic, 7 ^ (i << 8)).unwrap();
        counts[k] += 1;
    }
    assert!(counts.iter().all(|&c| c > 0));
    let (_, p) = chi_square_uniform(&counts);
    assert!(p > 0.01, "chi-square p = {p}");
    assert_eq!(sample_segment(100, 8, SegmentMode::Fixed, 3).unwrap(), 0);
}
