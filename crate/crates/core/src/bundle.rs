//! On-disk scene bundles: a JSON manifest plus raw little-endian 32-bit
//! arrays, chosen for bit-exact interchange with trivially simple readers.
//!
//! Layout of a bundle directory:
//!
//! - `manifest.json` — shapes, voxel-size default, camera mode, file names;
//! - attention: `N * N` reals, row-major;
//! - depths: `S * rows * cols` reals, frame-major (token-id order);
//! - cameras: `S * 9` reals in compact mode (`qw qx qy qz tx ty tz fov_x
//!   fov_y`) or `S * 21` in decoded mode (rotation row-major, translation,
//!   intrinsics row-major);
//! - features (optional): `N * d` reals, row-major;
//! - ground truth (optional): JSON sidecar with token-to-voxel labels.
//!
//! Loading validates byte sizes exactly and rejects NaN; softer issues
//! (non-stochastic attention rows, invalid depths) come back as warnings.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attention::{AttentionMatrix, FeatureMatrix};
use crate::error::{Error, Result};
use crate::geometry::{
    decode_camera, token_pixel_center, unproject, voxelize, CameraCompact, CameraDecoded,
    DepthMap, Vec3, VoxelMap,
};
use crate::grid::FrameGrid;
use crate::synthscene::GroundTruth;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

/// Camera parameterization carried by a bundle. Compact cameras are decoded
/// on demand; decoded cameras are consumed as-is.
#[derive(Debug, Clone, PartialEq)]
pub enum CameraSet {
    Compact(Vec<CameraCompact>),
    Decoded(Vec<CameraDecoded>),
}

impl CameraSet {
    pub fn len(&self) -> usize {
        match self {
            CameraSet::Compact(v) => v.len(),
            CameraSet::Decoded(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> CameraMode {
        match self {
            CameraSet::Compact(_) => CameraMode::Compact9,
            CameraSet::Decoded(_) => CameraMode::Decoded,
        }
    }
}

/// Fully validated in-memory scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub grid: FrameGrid,
    pub delta_default: f64,
    pub cameras: CameraSet,
    pub depths: Vec<DepthMap>,
    pub attention: AttentionMatrix,
    pub features: Option<FeatureMatrix>,
    pub groundtruth: Option<GroundTruth>,
}

impl SceneBundle {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let n = self.grid.token_count();
        if !self.delta_default.is_finite() || self.delta_default <= 0.0 {
            return Err(Error::invalid(
                "delta default",
                format!("{} must be > 0", self.delta_default),
            ));
        }
        if self.cameras.len() != self.grid.frames {
            return Err(Error::invalid(
                "cameras",
                format!(
                    "expected {} cameras, got {}",
                    self.grid.frames,
                    self.cameras.len()
                ),
            ));
        }
        match &self.cameras {
            CameraSet::Compact(v) => v.iter().try_for_each(|c| c.validate())?,
            CameraSet::Decoded(v) => v.iter().try_for_each(|c| c.validate())?,
        }
        if self.depths.len() != self.grid.frames {
            return Err(Error::invalid(
                "depths",
                format!(
                    "expected {} depth maps, got {}",
                    self.grid.frames,
                    self.depths.len()
                ),
            ));
        }
        for (s, d) in self.depths.iter().enumerate() {
            if d.rows() != self.grid.rows || d.cols() != self.grid.cols {
                return Err(Error::invalid(
                    "depths",
                    format!(
                        "depth map {s} is {}x{}, grid is {}x{}",
                        d.rows(),
                        d.cols(),
                        self.grid.rows,
                        self.grid.cols
                    ),
                ));
            }
        }
        if self.attention.n() != n {
            return Err(Error::invalid(
                "attention",
                format!("matrix is {0}x{0}, grid has {n} tokens", self.attention.n()),
            ));
        }
        if let Some(f) = &self.features {
            if f.n() != n {
                return Err(Error::invalid(
                    "features",
                    format!("matrix has {} rows, grid has {n} tokens", f.n()),
                ));
            }
        }
        if let Some(gt) = &self.groundtruth {
            if gt.labels.len() != n {
                return Err(Error::invalid(
                    "groundtruth",
                    format!("{} labels, grid has {n} tokens", gt.labels.len()),
                ));
            }
        }
        Ok(())
    }

    /// Cameras in decoded form, decoding compact parameters when needed.
    pub fn decoded_cameras(&self) -> Result<Vec<CameraDecoded>> {
        match &self.cameras {
            CameraSet::Decoded(v) => Ok(v.clone()),
            CameraSet::Compact(v) => v.iter().map(|c| decode_camera(c, &self.grid)).collect(),
        }
    }

    /// World position of every token center, `None` where depth is invalid.
    pub fn token_world_points(&self) -> Result<Vec<(usize, Option<Vec3>)>> {
        let cameras = self.decoded_cameras()?;
        let mut points = Vec::with_capacity(self.grid.token_count());
        for s in 0..self.grid.frames {
            let cam = &cameras[s];
            let depth_map = &self.depths[s];
            for h in 0..self.grid.rows {
                for w in 0..self.grid.cols {
                    let id = self.grid.flat_id(s, h, w)?;
                    let (u, v) = token_pixel_center(s, h, w, &self.grid)?;
                    let point = unproject(u, v, depth_map.get(h, w), cam)?;
                    points.push((id, point));
                }
            }
        }
        Ok(points)
    }

    /// Voxelize every token at the given voxel size.
    pub fn voxel_map(&self, delta: f64) -> Result<VoxelMap> {
        voxelize(&self.token_world_points()?, delta)
    }

    /// Count of tokens with invalid depth.
    pub fn invalid_depths(&self) -> usize {
        self.depths.iter().map(|d| d.invalid_count()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CameraMode {
    #[serde(rename = "compact9")]
    Compact9,
    #[serde(rename = "decoded")]
    Decoded,
}

/// File references within a bundle directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFiles {
    pub attention: String,
    pub depths: String,
    pub cameras: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groundtruth: Option<String>,
}

/// The bundle manifest: shapes and file references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub grid: FrameGrid,
    /// Feature dimension; 0 when the bundle carries no features.
    pub feature_dim: usize,
    pub delta_default: f64,
    pub camera_mode: CameraMode,
    pub endianness: String,
    pub files: ManifestFiles,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_f32_file(path: &Path, expected_values: usize) -> Result<Vec<f32>> {
    let bytes = read_file(path)?;
    let expected = expected_values as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            file: path.display().to_string(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn f32_bytes(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// A loaded bundle plus the non-fatal issues found while loading.
#[derive(Debug, Clone)]
pub struct LoadedBundle {
    pub bundle: SceneBundle,
    pub warnings: Vec<String>,
}

/// Load and validate a bundle directory.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<LoadedBundle> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_NAME);
    let manifest: BundleManifest = serde_json::from_slice(&read_file(&manifest_path)?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::UnknownFormatVersion(manifest.format_version));
    }
    if manifest.endianness != "little" {
        return Err(Error::invalid(
            "endianness",
            format!("'{}' (only 'little' is defined)", manifest.endianness),
        ));
    }
    manifest.grid.validate()?;
    let grid = manifest.grid;
    let n = grid.token_count();

    let attention_path = dir.join(&manifest.files.attention);
    let attention_values = read_f32_file(&attention_path, n * n)?;
    let attention = AttentionMatrix::new(n, attention_values)?;

    let depths_values = read_f32_file(&dir.join(&manifest.files.depths), n)?;
    let per_frame = grid.tokens_per_frame();
    let depths: Vec<DepthMap> = (0..grid.frames)
        .map(|s| {
            DepthMap::new(
                grid.rows,
                grid.cols,
                depths_values[s * per_frame..(s + 1) * per_frame].to_vec(),
            )
        })
        .collect::<Result<_>>()?;

    let camera_values_per = match manifest.camera_mode {
        CameraMode::Compact9 => 9,
        CameraMode::Decoded => 21,
    };
    let camera_values = read_f32_file(
        &dir.join(&manifest.files.cameras),
        grid.frames * camera_values_per,
    )?;
    let cameras = match manifest.camera_mode {
        CameraMode::Compact9 => CameraSet::Compact(
            camera_values
                .chunks_exact(9)
                .map(|c| CameraCompact {
                    rotation: [c[0] as f64, c[1] as f64, c[2] as f64, c[3] as f64],
                    translation: [c[4] as f64, c[5] as f64, c[6] as f64],
                    fov: [c[7] as f64, c[8] as f64],
                })
                .collect(),
        ),
        CameraMode::Decoded => CameraSet::Decoded(
            camera_values
                .chunks_exact(21)
                .map(|c| {
                    let m = |o: usize| {
                        [
                            [c[o] as f64, c[o + 1] as f64, c[o + 2] as f64],
                            [c[o + 3] as f64, c[o + 4] as f64, c[o + 5] as f64],
                            [c[o + 6] as f64, c[o + 7] as f64, c[o + 8] as f64],
                        ]
                    };
                    CameraDecoded {
                        rotation: m(0),
                        translation: [c[9] as f64, c[10] as f64, c[11] as f64],
                        intrinsics: m(12),
                    }
                })
                .collect(),
        ),
    };

    let features = match (&manifest.files.features, manifest.feature_dim) {
        (Some(name), d) if d > 0 => {
            let values = read_f32_file(&dir.join(name), n * d)?;
            Some(FeatureMatrix::new(n, d, values)?)
        }
        (Some(_), 0) => {
            return Err(Error::invalid(
                "feature_dim",
                "features file referenced but feature_dim is 0",
            ));
        }
        (None, d) if d > 0 => {
            return Err(Error::invalid(
                "feature_dim",
                "feature_dim > 0 but no features file referenced",
            ));
        }
        _ => None,
    };

    let groundtruth = match &manifest.files.groundtruth {
        Some(name) => Some(serde_json::from_slice::<GroundTruth>(&read_file(
            &dir.join(name),
        )?)?),
        None => None,
    };

    let bundle = SceneBundle {
        grid,
        delta_default: manifest.delta_default,
        cameras,
        depths,
        attention,
        features,
        groundtruth,
    };
    bundle.validate()?;

    let mut warnings = Vec::new();
    let dev = bundle.attention.max_row_sum_deviation();
    if dev > 1e-3 {
        warnings.push(format!(
            "attention rows are not stochastic: max |row sum - 1| = {dev:.6}"
        ));
    }
    let invalid = bundle.invalid_depths();
    if invalid > 0 {
        warnings.push(format!(
            "{invalid} of {n} tokens have invalid depth and will never be retained"
        ));
    }
    Ok(LoadedBundle { bundle, warnings })
}

/// Write a bundle directory. Returns the manifest that was written.
pub fn save_bundle(bundle: &SceneBundle, dir: impl AsRef<Path>) -> Result<BundleManifest> {
    bundle.validate()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    let manifest = BundleManifest {
        format_version: FORMAT_VERSION,
        grid: bundle.grid,
        feature_dim: bundle.features.as_ref().map_or(0, |f| f.dim()),
        delta_default: bundle.delta_default,
        camera_mode: bundle.cameras.mode(),
        endianness: "little".to_string(),
        files: ManifestFiles {
            attention: "attention.f32".to_string(),
            depths: "depths.f32".to_string(),
            cameras: "cameras.f32".to_string(),
            features: bundle.features.as_ref().map(|_| "features.f32".to_string()),
            groundtruth: bundle
                .groundtruth
                .as_ref()
                .map(|_| "groundtruth.json".to_string()),
        },
    };

    write_file(
        &dir.join("attention.f32"),
        &f32_bytes(bundle.attention.values()),
    )?;
    let mut depth_values = Vec::with_capacity(bundle.grid.token_count());
    for d in &bundle.depths {
        depth_values.extend_from_slice(d.values());
    }
    write_file(&dir.join("depths.f32"), &f32_bytes(&depth_values))?;

    let camera_values: Vec<f32> = match &bundle.cameras {
        CameraSet::Compact(v) => v
            .iter()
            .flat_map(|c| {
                let mut row = [0f32; 9];
                for (i, q) in c.rotation.iter().enumerate() {
                    row[i] = *q as f32;
                }
                for (i, t) in c.translation.iter().enumerate() {
                    row[4 + i] = *t as f32;
                }
                row[7] = c.fov[0] as f32;
                row[8] = c.fov[1] as f32;
                row
            })
            .collect(),
        CameraSet::Decoded(v) => v
            .iter()
            .flat_map(|c| {
                let mut row = [0f32; 21];
                for i in 0..3 {
                    for j in 0..3 {
                        row[3 * i + j] = c.rotation[i][j] as f32;
                        row[12 + 3 * i + j] = c.intrinsics[i][j] as f32;
                    }
                    row[9 + i] = c.translation[i] as f32;
                }
                row
            })
            .collect(),
    };
    write_file(&dir.join("cameras.f32"), &f32_bytes(&camera_values))?;

    if let Some(f) = &bundle.features {
        write_file(&dir.join("features.f32"), &f32_bytes(f.values()))?;
    }
    if let Some(gt) = &bundle.groundtruth {
        let mut json = serde_json::to_vec_pretty(gt)?;
        json.push(b'\n');
        write_file(&dir.join("groundtruth.json"), &json)?;
    }
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_file(&dir.join(MANIFEST_NAME), &json)?;
    Ok(manifest)
}

/// Path of the manifest inside a bundle directory.
pub fn manifest_path(dir: impl AsRef<Path>) -> PathBuf {
    dir.as_ref().join(MANIFEST_NAME)
}
