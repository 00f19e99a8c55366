//! Camera decoding, depth unprojection, and voxel assignment.
//!
//! Conventions fixed by the bundle format:
//! - extrinsics map world to camera: `x_cam = R * x_world + T`;
//! - pixel coordinates place patch centers at `((col + 0.5) * p, (row + 0.5) * p)`;
//! - depth is the camera-frame z of the patch center, `<= 0` marks the token
//!   geometrically invalid;
//! - voxel binning is `floor(coord / delta)` per axis (half-open cells).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrameGrid;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

const UNIT_QUAT_TOL: f64 = 1e-6;
const ORTHONORMAL_TOL: f64 = 1e-6;

pub(crate) fn mat_transpose_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

pub(crate) fn vec_sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn vec_dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn vec_cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn vec_norm(a: &Vec3) -> f64 {
    vec_dot(a, a).sqrt()
}

pub(crate) fn vec_normalize(a: &Vec3) -> Vec3 {
    let n = vec_norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Compact 9-parameter camera: unit quaternion (w, x, y, z) for the
/// world-to-camera rotation, translation in meters, and horizontal/vertical
/// field of view in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraCompact {
    pub rotation: [f64; 4],
    pub translation: Vec3,
    pub fov: [f64; 2],
}

impl CameraCompact {
    pub fn validate(&self) -> Result<()> {
        let q = &self.rotation;
        let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_QUAT_TOL {
            return Err(Error::invalid(
                "camera rotation",
                format!("quaternion norm {norm} deviates from 1 beyond {UNIT_QUAT_TOL}"),
            ));
        }
        for (axis, &f) in ["horizontal", "vertical"].iter().zip(self.fov.iter()) {
            if !f.is_finite() || f <= 0.0 || f >= std::f64::consts::PI {
                return Err(Error::invalid(
                    "camera fov",
                    format!("{axis} fov {f} outside (0, pi)"),
                ));
            }
        }
        if self.translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("camera translation", "non-finite component"));
        }
        Ok(())
    }
}

/// Decoded camera: rotation matrix, translation, and pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraDecoded {
    /// World-to-camera rotation.
    pub rotation: Mat3,
    /// World-to-camera translation in meters.
    pub translation: Vec3,
    /// Upper-triangular intrinsics `[[fx, 0, cx], [0, fy, cy], [0, 0, 1]]`.
    pub intrinsics: Mat3,
}

impl CameraDecoded {
    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation;
        // R^T R = I within tolerance.
        for i in 0..3 {
            for j in 0..3 {
                let dot = r[0][i] * r[0][j] + r[1][i] * r[1][j] + r[2][i] * r[2][j];
                let expect = if i == j { 1.0 } else { 0.0 };
                if !dot.is_finite() || (dot - expect).abs() > ORTHONORMAL_TOL {
                    return Err(Error::invalid(
                        "camera rotation",
                        format!("R^T R deviates from identity at ({i}, {j}): {dot}"),
                    ));
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::invalid(
                "camera rotation",
                format!("determinant {det} deviates from 1"),
            ));
        }
        let y = &self.intrinsics;
        if y[1][0] != 0.0 || y[2][0] != 0.0 || y[2][1] != 0.0 || y[0][1] != 0.0 {
            return Err(Error::invalid("camera intrinsics", "not upper-triangular"));
        }
        if y[2][2] != 1.0 {
            return Err(Error::invalid(
                "camera intrinsics",
                format!("Y[2][2] = {} (expected 1)", y[2][2]),
            ));
        }
        if y[0][0] <= 0.0 || y[1][1] <= 0.0 || !y[0][0].is_finite() || !y[1][1].is_finite() {
            return Err(Error::invalid(
                "camera intrinsics",
                "focal entries must be positive and finite",
            ));
        }
        if self.translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("camera translation", "non-finite component"));
        }
        Ok(())
    }

    /// Camera center in world coordinates: `-R^T T`.
    pub fn center(&self) -> Vec3 {
        let c = mat_transpose_vec(&self.rotation, &self.translation);
        [-c[0], -c[1], -c[2]]
    }

    /// World-space ray through pixel `(u, v)`: origin at the camera center,
    /// direction scaled so a point at parameter `t` has camera-frame depth `t`.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Result<(Vec3, Vec3)> {
        let y = &self.intrinsics;
        let (fx, fy) = (y[0][0], y[1][1]);
        if fx == 0.0 || fy == 0.0 {
            return Err(Error::invalid("camera intrinsics", "singular intrinsics"));
        }
        let dir_cam = [(u - y[0][2]) / fx, (v - y[1][2]) / fy, 1.0];
        Ok((self.center(), mat_transpose_vec(&self.rotation, &dir_cam)))
    }
}

/// Build a rotation matrix from a unit quaternion (w, x, y, z).
pub fn quaternion_to_matrix(q: &[f64; 4]) -> Mat3 {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Recover a unit quaternion (w, x, y, z) from a rotation matrix.
/// The returned quaternion has nonnegative w.
pub fn matrix_to_quaternion(m: &Mat3) -> [f64; 4] {
    let trace = m[0][0] + m[1][1] + m[2][2];
    let mut q;
    if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        q = [
            0.25 * s,
            (m[2][1] - m[1][2]) / s,
            (m[0][2] - m[2][0]) / s,
            (m[1][0] - m[0][1]) / s,
        ];
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        q = [
            (m[2][1] - m[1][2]) / s,
            0.25 * s,
            (m[0][1] + m[1][0]) / s,
            (m[0][2] + m[2][0]) / s,
        ];
    } else if m[1][1] > m[2][2] {
        let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
        q = [
            (m[0][2] - m[2][0]) / s,
            (m[0][1] + m[1][0]) / s,
            0.25 * s,
            (m[1][2] + m[2][1]) / s,
        ];
    } else {
        let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
        q = [
            (m[1][0] - m[0][1]) / s,
            (m[0][2] + m[2][0]) / s,
            (m[1][2] + m[2][1]) / s,
            0.25 * s,
        ];
    }
    if q[0] < 0.0 {
        for c in q.iter_mut() {
            *c = -*c;
        }
    }
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

/// Decode a compact camera into rotation matrix, translation, and intrinsics
/// derived from the field of view and the grid's pixel dimensions.
pub fn decode_camera(camera: &CameraCompact, grid: &FrameGrid) -> Result<CameraDecoded> {
    camera.validate()?;
    grid.validate()?;
    let width = grid.image_width() as f64;
    let height = grid.image_height() as f64;
    let fx = width / (2.0 * (camera.fov[0] / 2.0).tan());
    let fy = height / (2.0 * (camera.fov[1] / 2.0).tan());
    let decoded = CameraDecoded {
        rotation: quaternion_to_matrix(&camera.rotation),
        translation: camera.translation,
        intrinsics: [
            [fx, 0.0, width / 2.0],
            [0.0, fy, height / 2.0],
            [0.0, 0.0, 1.0],
        ],
    };
    decoded.validate()?;
    Ok(decoded)
}

/// Pixel coordinates of a patch center: `u = (col + 0.5) p`, `v = (row + 0.5) p`.
pub fn token_pixel_center(
    frame: usize,
    row: usize,
    col: usize,
    grid: &FrameGrid,
) -> Result<(f64, f64)> {
    if frame >= grid.frames || row >= grid.rows || col >= grid.cols {
        return Err(Error::invalid(
            "token position",
            format!("({frame}, {row}, {col}) out of grid range"),
        ));
    }
    let p = grid.patch_size as f64;
    Ok(((col as f64 + 0.5) * p, (row as f64 + 0.5) * p))
}

/// Lift pixel `(u, v)` at camera-frame depth `depth` to world coordinates.
///
/// Returns `Ok(None)` when `depth <= 0` or non-finite (no 3D position exists).
pub fn unproject(u: f64, v: f64, depth: f64, camera: &CameraDecoded) -> Result<Option<Vec3>> {
    if !depth.is_finite() || depth <= 0.0 {
        return Ok(None);
    }
    let y = &camera.intrinsics;
    let (fx, fy) = (y[0][0], y[1][1]);
    if fx == 0.0 || fy == 0.0 {
        return Err(Error::invalid("camera intrinsics", "singular intrinsics"));
    }
    let cam_point = [
        depth * (u - y[0][2]) / fx,
        depth * (v - y[1][2]) / fy,
        depth,
    ];
    let rel = vec_sub(&cam_point, &camera.translation);
    Ok(Some(mat_transpose_vec(&camera.rotation, &rel)))
}

/// Per-view depth grid at patch resolution. Entries `<= 0` mark the token
/// geometrically invalid; non-finite entries are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMap {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::invalid(
                "depth map",
                format!("expected {} values, got {}", rows * cols, values.len()),
            ));
        }
        if values.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("depth map", "non-finite depth entry"));
        }
        Ok(DepthMap { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col] as f64
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Number of entries with no valid 3D position.
    pub fn invalid_count(&self) -> usize {
        self.values.iter().filter(|&&d| d <= 0.0).count()
    }
}

/// Integer voxel index; equal keys identify the same cubic cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VoxelKey {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

impl VoxelKey {
    pub fn new(x: i64, y: i64, z: i64) -> Self {
        VoxelKey { x, y, z }
    }

    /// Bin a world point at voxel size `delta`. `None` for non-finite points.
    pub fn from_point(point: &Vec3, delta: f64) -> Option<Self> {
        if point.iter().any(|c| !c.is_finite()) {
            return None;
        }
        Some(VoxelKey {
            x: (point[0] / delta).floor() as i64,
            y: (point[1] / delta).floor() as i64,
            z: (point[2] / delta).floor() as i64,
        })
    }

    /// World coordinates of the cell center.
    pub fn center(&self, delta: f64) -> Vec3 {
        [
            (self.x as f64 + 0.5) * delta,
            (self.y as f64 + 0.5) * delta,
            (self.z as f64 + 0.5) * delta,
        ]
    }
}

impl std::fmt::Display for VoxelKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Partition of token ids into voxels, plus the tokens with no valid geometry.
///
/// Every token list is sorted ascending; that order is the canonical
/// tie-breaking order for all downstream selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoxelMap {
    entries: BTreeMap<VoxelKey, Vec<usize>>,
    invalid: Vec<usize>,
    token_count: usize,
}

impl VoxelMap {
    pub fn from_parts(
        entries: BTreeMap<VoxelKey, Vec<usize>>,
        invalid: Vec<usize>,
        token_count: usize,
    ) -> Result<Self> {
        let map = VoxelMap {
            entries,
            invalid,
            token_count,
        };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.token_count];
        let mut mark = |id: usize| -> Result<()> {
            if id >= self.token_count {
                return Err(Error::invalid(
                    "voxel map",
                    format!("token id {id} out of range 0..{}", self.token_count),
                ));
            }
            if seen[id] {
                return Err(Error::invalid(
                    "voxel map",
                    format!("token id {id} appears more than once"),
                ));
            }
            seen[id] = true;
            Ok(())
        };
        for (key, tokens) in &self.entries {
            if tokens.is_empty() {
                return Err(Error::invalid("voxel map", format!("empty voxel {key}")));
            }
            if !tokens.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::invalid(
                    "voxel map",
                    format!("voxel {key} token list not sorted ascending"),
                ));
            }
            for &id in tokens {
                mark(id)?;
            }
        }
        for &id in &self.invalid {
            mark(id)?;
        }
        if !seen.iter().all(|&v| v) {
            return Err(Error::invalid(
                "voxel map",
                "some token ids are neither voxelized nor marked invalid",
            ));
        }
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<VoxelKey, Vec<usize>> {
        &self.entries
    }

    pub fn tokens(&self, key: &VoxelKey) -> Option<&[usize]> {
        self.entries.get(key).map(|v| v.as_slice())
    }

    pub fn invalid(&self) -> &[usize] {
        &self.invalid
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    /// Number of occupied voxels.
    pub fn occupied(&self) -> usize {
        self.entries.len()
    }

    /// Total tokens across all voxels.
    pub fn valid_tokens(&self) -> usize {
        self.entries.values().map(|t| t.len()).sum()
    }
}

/// Assign tokens to voxels of size `delta` by flooring each coordinate.
///
/// Tokens with `None` or non-finite points go to the invalid list. Input order
/// does not matter; the output is canonical.
pub fn voxelize(points: &[(usize, Option<Vec3>)], delta: f64) -> Result<VoxelMap> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::invalid("voxel size", format!("{delta} must be > 0")));
    }
    let mut entries: BTreeMap<VoxelKey, Vec<usize>> = BTreeMap::new();
    let mut invalid = Vec::new();
    for &(id, point) in points {
        match point.as_ref().and_then(|p| VoxelKey::from_point(p, delta)) {
            Some(key) => entries.entry(key).or_default().push(id),
            None => invalid.push(id),
        }
    }
    for tokens in entries.values_mut() {
        tokens.sort_unstable();
    }
    invalid.sort_unstable();
    VoxelMap::from_parts(entries, invalid, points.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid_100px() -> FrameGrid {
        // 100x100 pixel image split into 10x10 patches of 10 px.
        FrameGrid::new(1, 10, 10, 10).unwrap()
    }

    #[test]
    fn decode_identity_camera() {
        let cam = CameraCompact {
            rotation: [1.0, 0.0, 0.0, 0.0],
            translation: [0.0, 0.0, 0.0],
            fov: [PI / 2.0, PI / 2.0],
        };
        let dec = decode_camera(&cam, &grid_100px()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dec.rotation[i][j] - expect).abs() < 1e-12);
            }
        }
        assert_eq!(dec.translation, [0.0, 0.0, 0.0]);
        assert!((dec.intrinsics[0][0] - 50.0).abs() < 1e-9);
        assert!((dec.intrinsics[1][1] - 50.0).abs() < 1e-9);
        assert!((dec.intrinsics[0][2] - 50.0).abs() < 1e-12);
        assert!((dec.intrinsics[1][2] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn decode_half_turn_about_z() {
        let cam = CameraCompact {
            rotation: [0.0, 0.0, 0.0, 1.0],
            translation: [1.0, 2.0, 3.0],
            fov: [1.0, 1.0],
        };
        let dec = decode_camera(&cam, &grid_100px()).unwrap();
        let expect = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((dec.rotation[i][j] - expect[i][j]).abs() < 1e-12);
            }
        }
        assert_eq!(dec.translation, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn decode_matches_scalar_reference() {
        // Rotation of pi/4 about the y axis; 384x384 image.
        let half = PI / 8.0;
        let cam = CameraCompact {
            rotation: [half.cos(), 0.0, half.sin(), 0.0],
            translation: [0.3, -0.2, 1.5],
            fov: [1.0, 0.8],
        };
        let grid = FrameGrid::new(1, 24, 24, 16).unwrap();
        let dec = decode_camera(&cam, &grid).unwrap();

        // Independent closed-form evaluation.
        let theta = PI / 4.0;
        let r_ref = [
            [theta.cos(), 0.0, theta.sin()],
            [0.0, 1.0, 0.0],
            [-theta.sin(), 0.0, theta.cos()],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((dec.rotation[i][j] - r_ref[i][j]).abs() < 1e-12);
            }
        }
        let fx_ref = 384.0 / (2.0 * (0.5f64).tan());
        let fy_ref = 384.0 / (2.0 * (0.4f64).tan());
        assert!((dec.intrinsics[0][0] - fx_ref).abs() < 1e-9);
        assert!((dec.intrinsics[1][1] - fy_ref).abs() < 1e-9);
        assert!((dec.intrinsics[0][2] - 192.0).abs() < 1e-12);
        assert!((dec.intrinsics[1][2] - 192.0).abs() < 1e-12);
    }

    #[test]
    fn decode_rejects_bad_inputs() {
        let grid = grid_100px();
        let bad_quat = CameraCompact {
            rotation: [1.0, 0.1, 0.0, 0.0],
            translation: [0.0; 3],
            fov: [1.0, 1.0],
        };
        assert!(decode_camera(&bad_quat, &grid).is_err());
        let bad_fov = CameraCompact {
            rotation: [1.0, 0.0, 0.0, 0.0],
            translation: [0.0; 3],
            fov: [0.0, 1.0],
        };
        assert!(decode_camera(&bad_fov, &grid).is_err());
    }

    #[test]
    fn pixel_centers() {
        let grid = FrameGrid::new(1, 14, 14, 16).unwrap();
        assert_eq!(token_pixel_center(0, 0, 0, &grid).unwrap(), (8.0, 8.0));
        assert_eq!(
            token_pixel_center(0, 13, 13, &grid).unwrap(),
            (216.0, 216.0)
        );
        let grid27 = FrameGrid::new(1, 6, 8, 27).unwrap();
        assert_eq!(
            token_pixel_center(0, 2, 5, &grid27).unwrap(),
            (148.5, 67.5)
        );
        assert!(token_pixel_center(0, 14, 0, &grid).is_err());
        assert!(token_pixel_center(1, 0, 0, &grid).is_err());
    }

    fn identity_camera(fx: f64, fy: f64, cx: f64, cy: f64, t: Vec3) -> CameraDecoded {
        CameraDecoded {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: t,
            intrinsics: [[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]],
        }
    }

    #[test]
    fn unproject_identity_axis() {
        let cam = identity_camera(1.0, 1.0, 0.0, 0.0, [0.0; 3]);
        let p = unproject(0.0, 0.0, 1.0, &cam).unwrap().unwrap();
        assert_eq!(p, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn unproject_translated_axis_point() {
        let cam = identity_camera(50.0, 50.0, 50.0, 50.0, [0.0, 0.0, -2.0]);
        let p = unproject(50.0, 50.0, 3.0, &cam).unwrap().unwrap();
        assert_eq!(p, [0.0, 0.0, 5.0]);
    }

    #[test]
    fn unproject_invalid_depth_is_not_fatal() {
        let cam = identity_camera(1.0, 1.0, 0.0, 0.0, [0.0; 3]);
        assert!(unproject(0.0, 0.0, 0.0, &cam).unwrap().is_none());
        assert!(unproject(0.0, 0.0, -1.0, &cam).unwrap().is_none());
        assert!(unproject(0.0, 0.0, f64::NAN, &cam).unwrap().is_none());
    }

    #[test]
    fn quaternion_matrix_roundtrip() {
        let samples = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.5, 0.5, 0.5, 0.5],
            [0.825, -0.21, 0.33, -0.41],
        ];
        for q in samples {
            let n = (q.iter().map(|c| c * c).sum::<f64>()).sqrt();
            let q = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
            let back = matrix_to_quaternion(&quaternion_to_matrix(&q));
            // q and -q encode the same rotation; the roundtrip pins w >= 0.
            let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
            for (a, b) in q.iter().zip(back.iter()) {
                assert!((a * sign - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn voxel_binning_floors() {
        let key = VoxelKey::from_point(&[0.05, 0.15, -0.02], 0.1).unwrap();
        assert_eq!(key, VoxelKey::new(0, 1, -1));
    }

    #[test]
    fn voxelize_groups_and_sorts() {
        // Input order does not matter; the list comes out ascending.
        let points = vec![
            (1usize, Some([0.39, 0.0, 0.0])),
            (0usize, Some([0.31, 0.0, 0.0])),
        ];
        let map = voxelize(&points, 0.1).unwrap();
        assert_eq!(map.token_count(), 2);
        assert_eq!(map.occupied(), 1);
        assert_eq!(
            map.tokens(&VoxelKey::new(3, 0, 0)).unwrap(),
            &[0usize, 1][..]
        );
    }

    #[test]
    fn voxelize_handles_invalid_points() {
        let points = vec![
            (0usize, Some([0.0, 0.0, 0.0])),
            (1usize, None),
            (2usize, Some([f64::NAN, 0.0, 0.0])),
        ];
        let map = voxelize(&points, 0.1).unwrap();
        assert_eq!(map.invalid(), &[1, 2]);
        assert_eq!(map.valid_tokens(), 1);
        assert!(voxelize(&points, 0.0).is_err());
    }
}
