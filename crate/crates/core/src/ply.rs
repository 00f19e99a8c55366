//! ASCII PLY export of voxel clouds before and after pruning.
//!
//! Each occupied voxel becomes one vertex at its cell center. The "before"
//! cloud contains every occupied voxel, colored green when the voxel kept at
//! least one token and red otherwise; the "after" cloud contains only the
//! covered voxels, all green.

use std::collections::BTreeSet;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{VoxelKey, VoxelMap};

const KEPT_COLOR: [u8; 3] = [64, 192, 64];
const PRUNED_COLOR: [u8; 3] = [208, 64, 64];

fn covered_voxels(vmap: &VoxelMap, retained: &[usize]) -> BTreeSet<VoxelKey> {
    let retained: BTreeSet<usize> = retained.iter().copied().collect();
    vmap.entries()
        .iter()
        .filter(|(_, tokens)| tokens.iter().any(|id| retained.contains(id)))
        .map(|(key, _)| *key)
        .collect()
}

fn write_ply(
    out: &mut impl Write,
    vertices: &[(VoxelKey, [u8; 3])],
    delta: f64,
) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("ply stream", e);
    writeln!(out, "ply").map_err(io_err)?;
    writeln!(out, "format ascii 1.0").map_err(io_err)?;
    writeln!(out, "comment voxel centers at cell size {delta}").map_err(io_err)?;
    writeln!(out, "element vertex {}", vertices.len()).map_err(io_err)?;
    for line in [
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ] {
        writeln!(out, "{line}").map_err(io_err)?;
    }
    for (key, color) in vertices {
        let c = key.center(delta);
        writeln!(
            out,
            "{} {} {} {} {} {}",
            c[0] as f32, c[1] as f32, c[2] as f32, color[0], color[1], color[2]
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Export the pre-prune voxel cloud: every occupied voxel, color-coded by
/// whether it kept a token. Returns the vertex count.
pub fn export_before(
    out: &mut impl Write,
    vmap: &VoxelMap,
    retained: &[usize],
    delta: f64,
) -> Result<usize> {
    let covered = covered_voxels(vmap, retained);
    let vertices: Vec<(VoxelKey, [u8; 3])> = vmap
        .entries()
        .keys()
        .map(|key| {
            let color = if covered.contains(key) {
                KEPT_COLOR
            } else {
                PRUNED_COLOR
            };
            (*key, color)
        })
        .collect();
    write_ply(out, &vertices, delta)?;
    Ok(vertices.len())
}

/// Export the post-prune voxel cloud: covered voxels only. Returns the
/// vertex count.
pub fn export_after(
    out: &mut impl Write,
    vmap: &VoxelMap,
    retained: &[usize],
    delta: f64,
) -> Result<usize> {
    let vertices: Vec<(VoxelKey, [u8; 3])> = covered_voxels(vmap, retained)
        .into_iter()
        .map(|key| (key, KEPT_COLOR))
        .collect();
    write_ply(out, &vertices, delta)?;
    Ok(vertices.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn sample_map() -> VoxelMap {
        let mut entries = BTreeMap::new();
        entries.insert(VoxelKey::new(0, 0, 0), vec![0, 1]);
        entries.insert(VoxelKey::new(1, 0, 0), vec![2]);
        entries.insert(VoxelKey::new(0, 1, 0), vec![3]);
        VoxelMap::from_parts(entries, vec![], 4).unwrap()
    }

    #[test]
    fn vertex_counts_match_voxel_counts() {
        let vmap = sample_map();
        let retained = vec![0, 2];
        let mut before = Vec::new();
        let n_before = export_before(&mut before, &vmap, &retained, 0.1).unwrap();
        assert_eq!(n_before, 3);
        let mut after = Vec::new();
        let n_after = export_after(&mut after, &vmap, &retained, 0.1).unwrap();
        assert_eq!(n_after, 2);

        let before = String::from_utf8(before).unwrap();
        assert!(before.starts_with("ply\nformat ascii 1.0\n"));
        assert!(before.contains("element vertex 3"));
        let after = String::from_utf8(after).unwrap();
        assert!(after.contains("element vertex 2"));
        // 0.05 = center of cell 0 at delta 0.1.
        assert!(after.contains("0.05 0.05 0.05"));
    }

    #[test]
    fn colors_distinguish_kept_and_pruned() {
        let vmap = sample_map();
        let mut out = Vec::new();
        export_before(&mut out, &vmap, &[0], 0.1).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("64 192 64"));
        assert!(text.contains("208 64 64"));
    }
}
