//! 3D Morton (Z-order) codes for space-filling voxel traversal.

use crate::error::{Error, Result};
use crate::geometry::VoxelKey;

const AXIS_BITS: u32 = 21;

/// Interleave three 21-bit coordinates into a single 63-bit code.
pub fn encode3(x: u64, y: u64, z: u64) -> u64 {
    debug_assert!(x < (1 << AXIS_BITS) && y < (1 << AXIS_BITS) && z < (1 << AXIS_BITS));
    let mut code = 0u64;
    for bit in 0..AXIS_BITS {
        code |= ((x >> bit) & 1) << (3 * bit);
        code |= ((y >> bit) & 1) << (3 * bit + 1);
        code |= ((z >> bit) & 1) << (3 * bit + 2);
    }
    code
}

/// Order voxel keys along the Z-curve after offsetting every axis to the
/// nonnegative range. Ties are impossible (keys are distinct).
pub fn morton_order(keys: &[VoxelKey]) -> Result<Vec<VoxelKey>> {
    if keys.is_empty() {
        return Ok(Vec::new());
    }
    let min_x = keys.iter().map(|k| k.x).min().unwrap();
    let min_y = keys.iter().map(|k| k.y).min().unwrap();
    let min_z = keys.iter().map(|k| k.z).min().unwrap();
    let limit = 1i64 << AXIS_BITS;
    let mut coded: Vec<(u64, VoxelKey)> = Vec::with_capacity(keys.len());
    for &k in keys {
        let (dx, dy, dz) = (k.x - min_x, k.y - min_y, k.z - min_z);
        if dx >= limit || dy >= limit || dz >= limit {
            return Err(Error::invalid(
                "voxel key range",
                format!("offset key ({dx}, {dy}, {dz}) exceeds {AXIS_BITS}-bit Morton range"),
            ));
        }
        coded.push((encode3(dx as u64, dy as u64, dz as u64), k));
    }
    coded.sort_unstable();
    Ok(coded.into_iter().map(|(_, k)| k).collect())
}
