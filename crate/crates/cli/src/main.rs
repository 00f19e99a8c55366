//! Command-line front end: generate synthetic bundles, prune them, evaluate
//! the result, and export voxel clouds.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use voxelprune::bundle::{load_bundle, save_bundle, SceneBundle};
use voxelprune::metrics::evaluate;
use voxelprune::ply;
use voxelprune::pruner::{prune, PruneConfig, PruneResult, Relevance, Strategy};
use voxelprune::synthscene::{generate, ClusterParams, SceneSpec};
use voxelprune::FrameGrid;

#[derive(Parser)]
#[command(
    name = "voxelprune",
    version,
    about = "Geometry-guided pruning of multi-view visual tokens"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prune a scene bundle down to a token budget.
    Prune(PruneArgs),
    /// Generate a deterministic synthetic scene bundle.
    Gen(GenArgs),
    /// Compute coverage/redundancy metrics for a prune result.
    Eval(EvalArgs),
    /// Export before/after voxel clouds as ASCII PLY.
    ExportPly(ExportPlyArgs),
}

#[derive(Args)]
struct PruneArgs {
    /// Bundle directory.
    #[arg(long)]
    bundle: PathBuf,
    /// Pruning strategy.
    #[arg(long, default_value = "geo3d")]
    strategy: Strategy,
    /// Per-voxel retention fraction for the view-consistency stage.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Voxel size in meters.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Voxels selected per spatial-diversity round.
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Exact token budget.
    #[arg(long, group = "budget_spec")]
    budget: Option<usize>,
    /// Reduction ratio in [0, 1); budget becomes floor(n * (1 - ratio)).
    #[arg(long, group = "budget_spec")]
    ratio: Option<f64>,
    /// Relevance source: attention or cosine.
    #[arg(long, default_value = "attention")]
    relevance: Relevance,
    /// Seed for the randomized baseline.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output result file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of box objects.
    #[arg(long, default_value_t = 10)]
    objects: usize,
    /// Number of views (cameras on the ring).
    #[arg(long, default_value_t = 8)]
    views: usize,
    #[arg(long, default_value_t = 8)]
    patch_rows: usize,
    #[arg(long, default_value_t = 8)]
    patch_cols: usize,
    #[arg(long, default_value_t = 48)]
    patch_size: usize,
    /// Voxel size for coupling structure and ground-truth labels.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Attention noise amplitude.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Attention bonus for same-voxel pairs.
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    /// Feature dimension (0 = no features file).
    #[arg(long, default_value_t = 8)]
    feature_dim: usize,
    #[arg(long, default_value_t = 1.1)]
    ring_radius: f64,
    #[arg(long, default_value_t = 0.35)]
    ring_height: f64,
    #[arg(long, default_value_t = 0.5)]
    fov_x: f64,
    #[arg(long, default_value_t = 0.5)]
    fov_y: f64,
    /// Objects are placed within this radius of the origin.
    #[arg(long, default_value_t = 0.45)]
    cluster_radius: f64,
    #[arg(long, default_value_t = 0.12)]
    extent_min: f64,
    #[arg(long, default_value_t = 0.3)]
    extent_max: f64,
    /// Z-axis extent range; defaults to the x/y range.
    #[arg(long)]
    extent_z_min: Option<f64>,
    #[arg(long)]
    extent_z_max: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Bundle directory the result was computed from.
    #[arg(long)]
    bundle: PathBuf,
    /// Prune result file (JSON).
    #[arg(long)]
    result: PathBuf,
    /// Output metrics file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportPlyArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    result: PathBuf,
    /// Pre-prune cloud: every occupied voxel, color-coded kept vs pruned.
    #[arg(long)]
    out_before: PathBuf,
    /// Post-prune cloud: covered voxels only.
    #[arg(long)]
    out_after: PathBuf,
}

fn load(path: &Path) -> Result<SceneBundle> {
    let loaded =
        load_bundle(path).with_context(|| format!("loading bundle at {}", path.display()))?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded.bundle)
}

fn read_result(path: &Path) -> Result<PruneResult> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing prune result {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_prune(args: PruneArgs) -> Result<()> {
    let bundle = load(&args.bundle)?;
    let n = bundle.grid.token_count();
    let budget = match (args.budget, args.ratio) {
        (Some(b), None) => b,
        (None, Some(r)) => PruneConfig::budget_from_ratio(n, r)?,
        (None, None) => bail!("one of --budget or --ratio is required"),
        (Some(_), Some(_)) => unreachable!("clap group rejects this"),
    };
    let cfg = PruneConfig {
        alpha: args.alpha,
        delta: args.delta,
        k: args.k,
        budget,
        strategy: args.strategy,
        relevance: args.relevance,
        seed: args.seed,
    };
    let result = prune(&bundle, &cfg)?;
    write_json(&args.out, &result)?;
    let ratio_echo = args
        .ratio
        .map(|r| format!(" ratio={r}"))
        .unwrap_or_default();
    println!(
        "strategy={} relevance={} alpha={} delta={} k={} tokens={n} budget={budget}{ratio_echo} \
         post_stage1={} retained={}",
        cfg.strategy,
        cfg.relevance,
        cfg.alpha,
        cfg.delta,
        cfg.k,
        result.counts.post_vcp,
        result.counts.final_count,
    );
    if result.trace.shortfall {
        eprintln!(
            "warning: budget {budget} exceeds available tokens; retained {}",
            result.counts.final_count
        );
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    if args.extent_min > args.extent_max {
        bail!("--extent-min must not exceed --extent-max");
    }
    let grid = FrameGrid::new(args.views, args.patch_rows, args.patch_cols, args.patch_size)?;
    let spec = SceneSpec::clustered(ClusterParams {
        seed: args.seed,
        objects: args.objects,
        views: args.views,
        grid,
        delta: args.delta,
        noise: args.noise,
        coupling: args.coupling,
        feature_dim: args.feature_dim,
        ring_radius: args.ring_radius,
        ring_height: args.ring_height,
        fov: [args.fov_x, args.fov_y],
        cluster_radius: args.cluster_radius,
        extent_range: [args.extent_min, args.extent_max],
        extent_z_range: [
            args.extent_z_min.unwrap_or(args.extent_min),
            args.extent_z_max.unwrap_or(args.extent_max),
        ],
    });
    let bundle = generate(&spec)?;
    save_bundle(&bundle, &args.out)?;
    let gt = bundle.groundtruth.as_ref().expect("generator writes labels");
    println!(
        "bundle={} tokens={} valid={} voxels={}",
        args.out.display(),
        bundle.grid.token_count(),
        gt.labels.iter().flatten().count(),
        gt.occupied_voxels(),
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let bundle = load(&args.bundle)?;
    let result = read_result(&args.result)?;
    let vmap = bundle.voxel_map(result.config.delta)?;
    let report = evaluate(&bundle.grid, &vmap, &result)?;
    write_json(&args.out, &report)?;
    println!(
        "strategy={} coverage={:.4} redundancy={:.4} budget_ratio={:.4} covered={}/{}",
        report.strategy,
        report.coverage,
        report.redundancy,
        report.budget_ratio,
        report.covered_voxels,
        report.occupied_voxels,
    );
    Ok(())
}

fn cmd_export_ply(args: ExportPlyArgs) -> Result<()> {
    let bundle = load(&args.bundle)?;
    let result = read_result(&args.result)?;
    let delta = result.config.delta;
    let vmap = bundle.voxel_map(delta)?;

    let mut before = Vec::new();
    let n_before = ply::export_before(&mut before, &vmap, &result.retained, delta)?;
    fs::write(&args.out_before, before)
        .with_context(|| format!("writing {}", args.out_before.display()))?;

    let mut after = Vec::new();
    let n_after = ply::export_after(&mut after, &vmap, &result.retained, delta)?;
    fs::write(&args.out_after, after)
        .with_context(|| format!("writing {}", args.out_after.display()))?;

    println!("before_vertices={n_before} after_vertices={n_after}");
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Prune(args) => cmd_prune(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Eval(args) => cmd_eval(args),
        Command::ExportPly(args) => cmd_export_ply(args),
    }
}
