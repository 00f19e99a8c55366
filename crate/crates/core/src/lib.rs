//! Geometry-guided pruning of multi-view visual tokens.
//!
//! Tokens from a multi-view scene are unprojected through per-view depth into
//! a world-space voxel grid, then reduced in two stages: an intra-voxel stage
//! keeps the most view-consistent tokens inside each voxel, and an inter-voxel
//! stage greedily selects spatially diverse voxels until a token budget is
//! met. Both stages are driven by a global cross-frame attention matrix (or a
//! cosine-similarity stand-in).
//!
//! The crate also ships ablation baselines (random, uniform/Morton, per-frame
//! top-k), a deterministic synthetic scene generator that serves as the
//! correctness oracle, proxy quality metrics, and the on-disk bundle format
//! shared with the command-line tool.

pub mod attention;
pub mod bundle;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod metrics;
pub mod morton;
pub mod ply;
pub mod pruner;
pub mod rng;
pub mod scoring;
pub mod synthscene;

pub use attention::{cosine_relevance, AttentionMatrix, FeatureMatrix};
pub use bundle::{load_bundle, save_bundle, BundleManifest, CameraSet, LoadedBundle, SceneBundle};
pub use error::{Error, Result};
pub use geometry::{
    decode_camera, token_pixel_center, unproject, voxelize, CameraCompact, CameraDecoded,
    DepthMap, VoxelKey, VoxelMap,
};
pub use grid::FrameGrid;
pub use metrics::{evaluate, MetricsReport};
pub use pruner::{
    prune, prune_voxel_map, sdp, vcp, PruneConfig, PruneCounts, PruneResult, Relevance,
    SdpIteration, SdpTrace, Strategy,
};
pub use scoring::{
    inter_voxel_flow, inter_voxel_scores, intra_voxel_scores, FlowMatrix, InterScoreState,
    ScoreTable, SelfTerm,
};
pub use synthscene::{generate, GroundTruth, ObjectSpec, SceneSpec};
