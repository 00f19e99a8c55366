//! Diagnostic sweep: prints mean coverage per strategy over seeded scene
//! families. Useful when tuning synthetic scene recipes; not part of the
//! regular suite. Run with:
//!
//! ```text
//! cargo test -p voxelprune-cli --release --test sweep -- --ignored --nocapture
//! ```

use voxelprune::metrics::evaluate;
use voxelprune::pruner::{prune, PruneConfig, Relevance, Strategy};
use voxelprune::synthscene::{generate, ClusterParams, SceneSpec};

fn coverage(
    bundle: &voxelprune::SceneBundle,
    strategy: Strategy,
    relevance: Relevance,
    budget: usize,
) -> f64 {
    let cfg = PruneConfig {
        strategy,
        relevance,
        budget,
        seed: 17,
        ..PruneConfig::default()
    };
    let result = prune(bundle, &cfg).unwrap();
    let vmap = bundle.voxel_map(cfg.delta).unwrap();
    evaluate(&bundle.grid, &vmap, &result).unwrap().coverage
}

fn run_recipe(label: &str, params: ClusterParams, seed_range: std::ops::Range<u64>) {
    let seeds = seed_range.end - seed_range.start;
    let mut means = std::collections::BTreeMap::new();
    let mut cosine_mean = 0.0;
    let mut topk_strict_wins = 0usize;
    let mut rand_wins = 0usize;
    let mut unif_wins = 0usize;
    let mut valid_total = 0usize;
    let mut voxel_total = 0usize;
    let mut size_hist: std::collections::BTreeMap<usize, usize> = Default::default();
    for seed in seed_range {
        let spec = SceneSpec::clustered(ClusterParams { seed, ..params });
        let bundle = generate(&spec).unwrap();
        let n = bundle.grid.token_count();
        let budget = n / 10;
        let gt = bundle.groundtruth.as_ref().unwrap();
        valid_total += gt.labels.iter().flatten().count();
        voxel_total += gt.occupied_voxels();
        let vm = bundle.voxel_map(params.delta).unwrap();
        for t in vm.entries().values() {
            *size_hist.entry(t.len().min(9)).or_insert(0) += 1;
        }
        let mut geo = 0.0;
        let mut topk = 0.0;
        let mut rand_c = 0.0;
        let mut unif_c = 0.0;
        for strategy in Strategy::ALL {
            let c = coverage(&bundle, strategy, Relevance::Attention, budget);
            *means.entry(strategy.name()).or_insert(0.0) += c;
            match strategy {
                Strategy::Geo3d => geo = c,
                Strategy::FrameTopk => topk = c,
                Strategy::RandomVoxel => rand_c = c,
                Strategy::UniformVoxel => unif_c = c,
                _ => {}
            }
        }
        cosine_mean += coverage(&bundle, Strategy::Geo3d, Relevance::Cosine, budget);
        topk_strict_wins += usize::from(geo > topk);
        rand_wins += usize::from(geo > rand_c);
        unif_wins += usize::from(geo > unif_c);
    }
    let s = seeds as f64;
    println!(
        "== {label}: avg valid tokens {} voxels {}",
        valid_total / seeds as usize,
        voxel_total / seeds as usize
    );
    for (name, sum) in &means {
        println!("   {name:>14}: {:.4}", sum / s);
    }
    println!("   geo3d(cosine): {:.4}", cosine_mean / s);
    println!(
        "   geo3d wins: vs frame_topk {topk_strict_wins}/{seeds}, vs random {rand_wins}/{seeds}, \
         vs uniform {unif_wins}/{seeds}"
    );
    let total: usize = size_hist.values().sum();
    let hist: Vec<String> = size_hist
        .iter()
        .map(|(sz, c)| {
            format!(
                "{sz}{}:{:.0}%",
                if *sz == 9 { "+" } else { "" },
                100.0 * *c as f64 / total as f64
            )
        })
        .collect();
    println!("   voxel sizes: {}", hist.join(" "));
}

/// The scene family the acceptance suite freezes, plus nearby variants.
#[test]
#[ignore]
fn sweep_recipes() {
    let slabs = ClusterParams {
        objects: 11,
        extent_range: [0.2, 0.35],
        extent_z_range: [0.02, 0.05],
        cluster_radius: 0.35,
        ring_radius: 1.25,
        ring_height: 1.05,
        fov: [0.62, 0.62],
        ..ClusterParams::default()
    };
    run_recipe(
        "slabs (acceptance family)",
        ClusterParams {
            ring_radius: 1.4,
            ring_height: 1.15,
            ..slabs
        },
        0..50,
    );
    run_recipe("slabs, tighter ring", slabs, 0..50);
    run_recipe("boxes (default params)", ClusterParams::default(), 0..50);
}
