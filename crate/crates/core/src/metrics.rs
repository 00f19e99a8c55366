//! Geometry-aware proxy metrics for pruning quality.
//!
//! Coverage measures how much of the originally occupied space still has a
//! token after pruning; redundancy measures how many tokens pile up per
//! covered voxel. Together they quantify the spatial diversity of the
//! retained set without any task model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VoxelMap;
use crate::grid::FrameGrid;
use crate::pruner::{PruneConfig, PruneResult};

/// Quality summary for one pruning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: String,
    /// Fraction of pre-prune occupied voxels holding at least one retained
    /// token.
    pub coverage: f64,
    /// Mean retained tokens per covered voxel (0 when nothing was retained).
    pub redundancy: f64,
    /// Retained tokens over total tokens.
    pub budget_ratio: f64,
    pub occupied_voxels: usize,
    pub covered_voxels: usize,
    pub retained_count: usize,
    pub total_tokens: usize,
    /// Retained tokens per frame, in frame order.
    pub per_frame: Vec<usize>,
    /// The configuration the run used.
    pub config: PruneConfig,
}

/// Evaluate a pruning result against the voxel map taken before pruning.
pub fn evaluate(
    grid: &FrameGrid,
    vmap_before: &VoxelMap,
    result: &PruneResult,
) -> Result<MetricsReport> {
    grid.validate()?;
    let n = grid.token_count();
    if vmap_before.token_count() != n {
        return Err(Error::invalid(
            "voxel map",
            format!(
                "covers {} tokens, grid has {n}",
                vmap_before.token_count()
            ),
        ));
    }
    if result.counts.total != n {
        return Err(Error::invalid(
            "prune result",
            format!("counts.total {} does not match grid {n}", result.counts.total),
        ));
    }
    let mut retained_flags = vec![false; n];
    for &id in &result.retained {
        if id >= n {
            return Err(Error::invalid(
                "prune result",
                format!("retained id {id} out of range 0..{n}"),
            ));
        }
        retained_flags[id] = true;
    }
    let invalid: std::collections::BTreeSet<usize> =
        vmap_before.invalid().iter().copied().collect();
    if let Some(&bad) = result.retained.iter().find(|id| invalid.contains(id)) {
        return Err(Error::invalid(
            "prune result",
            format!("retained id {bad} has no voxel (invalid depth)"),
        ));
    }

    let occupied = vmap_before.occupied();
    let covered = vmap_before
        .entries()
        .values()
        .filter(|tokens| tokens.iter().any(|&id| retained_flags[id]))
        .count();
    let retained_count = result.retained.len();

    let mut per_frame = vec![0usize; grid.frames];
    for &id in &result.retained {
        per_frame[grid.frame_of(id)] += 1;
    }

    Ok(MetricsReport {
        strategy: result.config.strategy.name().to_string(),
        coverage: if occupied == 0 {
            0.0
        } else {
            covered as f64 / occupied as f64
        },
        redundancy: if covered == 0 {
            0.0
        } else {
            retained_count as f64 / covered as f64
        },
        budget_ratio: retained_count as f64 / n as f64,
        occupied_voxels: occupied,
        covered_voxels: covered,
        retained_count,
        total_tokens: n,
        per_frame,
        config: result.config,
    })
}
