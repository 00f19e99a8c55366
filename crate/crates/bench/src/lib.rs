//! Shared fixtures for the criterion benches.

use voxelprune::synthscene::{generate, ClusterParams, SceneSpec};
use voxelprune::SceneBundle;

/// A mid-sized deterministic bundle for benching.
pub fn bench_bundle(seed: u64) -> SceneBundle {
    let spec = SceneSpec::clustered(ClusterParams {
        seed,
        noise: 0.05,
        ..ClusterParams::default()
    });
    generate(&spec).expect("bench bundle generates")
}
