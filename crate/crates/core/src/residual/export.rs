//! 16-bit PNG export of residual stacks with a JSON manifest.

use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use super::{Enhancement, ResidualError, ResidualMap, ResidualStack, Strategy};

/// Stored sample = round(value * EXPORT_SCALE); 255.0 maps to 65535.
pub const EXPORT_SCALE: f32 = 257.0;
pub const MANIFEST_NAME: &str = "residuals.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualManifest {
    pub strategy: Strategy,
    pub alpha: f32,
    pub count: usize,
    /// `[height, width, channels]`
    pub shape: [usize; 3],
    pub scale: f32,
    pub enhancement: Enhancement,
    pub files: Vec<String>,
}

fn export_err(path: &Path, reason: impl ToString) -> ResidualError {
    ResidualError::Export {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

fn quantize(v: f32) -> u16 {
    (v * EXPORT_SCALE).round().clamp(0.0, 65535.0) as u16
}

/// Writes `map_NNNN.png` files plus `residuals.json` into `dir`.
pub fn write_stack(dir: &Path, stack: &ResidualStack) -> Result<ResidualManifest, ResidualError> {
    fs::create_dir_all(dir).map_err(|e| export_err(dir, e))?;
    let first = stack
        .maps()
        .first()
        .ok_or_else(|| export_err(dir, "empty residual stack"))?;
    let (h, w, c) = first.shape();
    let mut files = Vec::with_capacity(stack.len());
    for (i, map) in stack.maps().iter().enumerate() {
        let name = format!("map_{i:04}.png");
        let path = dir.join(&name);
        let samples: Vec<u16> = map.data().iter().map(|&v| quantize(v)).collect();
        let result = match c {
            1 => ImageBuffer::<Luma<u16>, _>::from_raw(w as u32, h as u32, samples)
                .ok_or_else(|| export_err(&path, "buffer size"))?
                .save(&path),
            3 => ImageBuffer::<Rgb<u16>, _>::from_raw(w as u32, h as u32, samples)
                .ok_or_else(|| export_err(&path, "buffer size"))?
                .save(&path),
            other => return Err(export_err(&path, format!("cannot export {other} channels"))),
        };
        result.map_err(|e| export_err(&path, e))?;
        files.push(name);
    }
    let manifest = ResidualManifest {
        strategy: stack.strategy(),
        alpha: stack.alpha(),
        count: stack.len(),
        shape: [h, w, c],
        scale: EXPORT_SCALE,
        enhancement: stack.enhancement(),
        files,
    };
    let manifest_path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| export_err(&manifest_path, e))?;
    fs::write(&manifest_path, text + "\n").map_err(|e| export_err(&manifest_path, e))?;
    Ok(manifest)
}

/// Reads a stack back from its manifest. Values carry the export
/// quantization (steps of 1/257).
pub fn read_stack(manifest_path: &Path) -> Result<(ResidualManifest, ResidualStack), ResidualError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| export_err(manifest_path, e))?;
    let manifest: ResidualManifest =
        serde_json::from_str(&text).map_err(|e| export_err(manifest_path, e))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let [h, w, c] = manifest.shape;
    let mut maps = Vec::with_capacity(manifest.files.len());
    for name in &manifest.files {
        let path = dir.join(name);
        let img = image::open(&path).map_err(|e| export_err(&path, e))?;
        let samples: Vec<u16> = match c {
            1 => img.to_luma16().into_raw(),
            3 => img.to_rgb16().into_raw(),
            other => return Err(export_err(&path, format!("cannot import {other} channels"))),
        };
        if (img.height() as usize, img.width() as usize) != (h, w) {
            return Err(export_err(&path, "map shape differs from manifest"));
        }
        let data = samples.iter().map(|&s| s as f32 / manifest.scale).collect();
        maps.push(ResidualMap::new(h, w, c, data)?);
    }
    if maps.len() != manifest.count {
        return Err(export_err(manifest_path, "file list length differs from count"));
    }
    let stack = ResidualStack::new(maps, manifest.enhancement);
    Ok((manifest, stack))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn export_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let maps = vec![
            ResidualMap::new(2, 3, 3, (0..18).map(|i| i as f32 * 14.1).collect()).unwrap(),
            ResidualMap::zeros(2, 3, 3),
        ];
        let stack = ResidualStack::new(maps, Enhancement::Normalized { alpha: 10.0 });
        let manifest = write_stack(dir.path(), &stack).unwrap();
        assert_eq!(manifest.count, 2);
        assert_eq!(manifest.shape, [2, 3, 3]);
        let (_, back) = read_stack(&dir.path().join(MANIFEST_NAME)).unwrap();
        for (a, b) in stack.maps().iter().zip(back.maps()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 0.5 / EXPORT_SCALE + 1e-4);
            }
        }
    }

    #[test]
    fn single_channel_export() {
        let dir = tempfile::tempdir().unwrap();
        let maps = vec![ResidualMap::new(2, 2, 1, vec![0.0, 255.0, 255.0, 0.0]).unwrap()];
        let stack = ResidualStack::new(maps, Enhancement::ChangeMask { threshold: 5.0 });
        write_stack(dir.path(), &stack).unwrap();
        let (m, back) = read_stack(&dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(m.strategy, Strategy::ChangeMask);
        assert_eq!(back.maps()[0].data(), &[0.0, 255.0, 255.0, 0.0]);
    }
}
