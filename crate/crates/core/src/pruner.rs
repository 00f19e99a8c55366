//! The two-stage pruning pipeline and its ablation baselines.
//!
//! Stage one (view-consistency pruning) keeps the top-`alpha` fraction of
//! tokens inside every voxel, ranked by intra-voxel received attention, so
//! duplicate observations of one spot collapse to the most consistent few.
//! Stage two (spatial-diversity pruning) greedily selects voxels by the
//! attention they receive from the remaining candidates, re-scoring after
//! every round, until the selected voxels hold the token budget.
//!
//! All selection is deterministic: score ties break by ascending token id or
//! lexicographic voxel key, and the randomized baseline draws from the
//! counter-based generator pinned by the bundle format.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::attention::{cosine_relevance, AttentionMatrix};
use crate::bundle::SceneBundle;
use crate::error::{Error, Result};
use crate::geometry::{VoxelKey, VoxelMap};
use crate::morton::morton_order;
use crate::rng::CounterRng;
use crate::scoring::{intra_voxel_scores, FlowMatrix, InterScoreState, SelfTerm};

/// Pruning strategy: the full two-stage pipeline, its single-stage ablations,
/// and the comparison baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// View-consistency stage, then spatial-diversity stage.
    Geo3d,
    /// View-consistency stage only; budget met by global score ranking.
    VcpOnly,
    /// Spatial-diversity stage only, on the unreduced voxel map.
    SdpOnly,
    /// Seeded random voxel selection.
    RandomVoxel,
    /// Space-filling (Morton) stride voxel selection.
    UniformVoxel,
    /// Per-frame attention top-k over tokens, no voxel reasoning.
    FrameTopk,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Geo3d,
        Strategy::VcpOnly,
        Strategy::SdpOnly,
        Strategy::RandomVoxel,
        Strategy::UniformVoxel,
        Strategy::FrameTopk,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Geo3d => "geo3d",
            Strategy::VcpOnly => "vcp_only",
            Strategy::SdpOnly => "sdp_only",
            Strategy::RandomVoxel => "random_voxel",
            Strategy::UniformVoxel => "uniform_voxel",
            Strategy::FrameTopk => "frame_topk",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .iter()
            .find(|v| v.name() == s)
            .copied()
            .ok_or_else(|| {
                Error::invalid(
                    "strategy",
                    format!(
                        "'{s}' (expected one of: {})",
                        Strategy::ALL.map(|v| v.name()).join(", ")
                    ),
                )
            })
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Source of the relevance matrix driving both stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relevance {
    /// The bundle's global cross-frame attention map.
    Attention,
    /// Clamped pairwise cosine similarity of the bundle's features.
    Cosine,
}

impl std::str::FromStr for Relevance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(Relevance::Attention),
            "cosine" => Ok(Relevance::Cosine),
            other => Err(Error::invalid(
                "relevance",
                format!("'{other}' (expected 'attention' or 'cosine')"),
            )),
        }
    }
}

impl std::fmt::Display for Relevance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Relevance::Attention => "attention",
            Relevance::Cosine => "cosine",
        })
    }
}

/// Pruning configuration. Defaults: `alpha = 0.5`, `delta = 0.1` m,
/// `k = 8` voxels per round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Retention fraction per voxel in the view-consistency stage, in (0, 1].
    pub alpha: f64,
    /// Voxel size in meters.
    pub delta: f64,
    /// Voxels selected per spatial-diversity round.
    pub k: usize,
    /// Exact number of tokens to retain.
    pub budget: usize,
    pub strategy: Strategy,
    pub relevance: Relevance,
    /// Seed for the randomized baseline.
    pub seed: u64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            alpha: 0.5,
            delta: 0.1,
            k: 8,
            budget: 1,
            strategy: Strategy::Geo3d,
            relevance: Relevance::Attention,
            seed: 0,
        }
    }
}

impl PruneConfig {
    pub fn with_budget(budget: usize) -> Self {
        PruneConfig {
            budget,
            ..Default::default()
        }
    }

    /// Convert a reduction ratio into a token budget: `floor(n * (1 - ratio))`.
    pub fn budget_from_ratio(n: usize, ratio: f64) -> Result<usize> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::invalid(
                "ratio",
                format!("{ratio} outside [0, 1)"),
            ));
        }
        Ok((n as f64 * (1.0 - ratio)).floor() as usize)
    }

    pub fn validate(&self, token_count: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(
                "alpha",
                format!("{} outside (0, 1]", self.alpha),
            ));
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::invalid("delta", format!("{} must be > 0", self.delta)));
        }
        if self.k < 1 {
            return Err(Error::invalid("k", "must be >= 1"));
        }
        if self.budget < 1 || self.budget > token_count {
            return Err(Error::invalid(
                "budget",
                format!("{} outside 1..={token_count}", self.budget),
            ));
        }
        Ok(())
    }
}

/// Retention record for one voxel: which tokens stayed, which were dropped,
/// and every token's intra-voxel score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelRecord {
    pub key: VoxelKey,
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    /// (token id, intra-voxel score), ascending by id.
    pub scores: Vec<(usize, f64)>,
}

/// One spatial-diversity round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpIteration {
    /// Candidate count at the start of the round.
    pub candidates: usize,
    /// Voxels selected this round, highest score first.
    pub selected: Vec<VoxelKey>,
    /// Received-attention scores of the selected voxels, same order.
    pub scores: Vec<f64>,
}

/// Full record of the spatial-diversity loop.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SdpTrace {
    pub iterations: Vec<SdpIteration>,
    /// True when every voxel was selected and the budget still was not met.
    pub shortfall: bool,
}

/// Token counts before pruning, after the strategy's first stage, and after
/// the budget was applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneCounts {
    pub total: usize,
    /// Tokens available after stage one (view-consistency survivors for the
    /// voxel-consistency strategies, geometrically valid tokens otherwise).
    pub post_vcp: usize,
    pub final_count: usize,
}

/// Outcome of a pruning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneResult {
    pub config: PruneConfig,
    /// Retained token ids, ascending.
    pub retained: Vec<usize>,
    /// Per-voxel retention records, ascending by key.
    pub per_voxel: Vec<VoxelRecord>,
    pub trace: SdpTrace,
    pub counts: PruneCounts,
}

impl PruneResult {
    /// Selection structure without float scores: retained ids, per-voxel
    /// kept/dropped ids, trace keys and candidate counts, and counts. Two
    /// runs that select identically compare equal here even if their score
    /// values differ by a positive scale.
    pub fn selection_signature(&self) -> impl PartialEq + std::fmt::Debug + '_ {
        (
            &self.retained,
            self.per_voxel
                .iter()
                .map(|r| (r.key, &r.kept, &r.dropped))
                .collect::<Vec<_>>(),
            self.trace
                .iterations
                .iter()
                .map(|it| (it.candidates, &it.selected))
                .collect::<Vec<_>>(),
            self.trace.shortfall,
            self.counts,
        )
    }
}

/// Keep count for a voxel of `size` tokens at retention fraction `alpha`:
/// `ceil(alpha * size)`, so every nonempty voxel keeps at least one token.
fn keep_count(alpha: f64, size: usize) -> usize {
    ((alpha * size as f64).ceil() as usize).clamp(1, size)
}

/// Rank token ids by score descending, ties by ascending id.
fn rank_by_score(ids: &[usize], scores: &BTreeMap<usize, f64>) -> Vec<usize> {
    let mut ranked: Vec<usize> = ids.to_vec();
    ranked.sort_by(|a, b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| a.cmp(b))
    });
    ranked
}

/// Intra-voxel scores for every voxelized token.
fn score_all_voxels(
    matrix: &AttentionMatrix,
    vmap: &VoxelMap,
) -> Result<BTreeMap<usize, f64>> {
    let mut scores = BTreeMap::new();
    for tokens in vmap.entries().values() {
        for (id, score) in intra_voxel_scores(matrix, tokens)? {
            scores.insert(id, score);
        }
    }
    Ok(scores)
}

/// View-consistency pruning: keep the top-`alpha` fraction of tokens in each
/// voxel by intra-voxel score. Returns the survivor map and every token's
/// score (computed over the full voxel, pre-pruning).
pub fn vcp(
    matrix: &AttentionMatrix,
    vmap: &VoxelMap,
    alpha: f64,
) -> Result<(VoxelMap, BTreeMap<usize, f64>)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("{alpha} outside (0, 1]")));
    }
    let scores = score_all_voxels(matrix, vmap)?;
    let mut entries: BTreeMap<VoxelKey, Vec<usize>> = BTreeMap::new();
    let mut invalid = vmap.invalid().to_vec();
    for (key, tokens) in vmap.entries() {
        let ranked = rank_by_score(tokens, &scores);
        let keep = keep_count(alpha, tokens.len());
        let mut kept: Vec<usize> = ranked[..keep].to_vec();
        kept.sort_unstable();
        invalid.extend_from_slice(&ranked[keep..]);
        entries.insert(*key, kept);
    }
    invalid.sort_unstable();
    let survivors = VoxelMap::from_parts(entries, invalid, vmap.token_count())?;
    Ok((survivors, scores))
}

/// Spatial-diversity pruning: repeatedly score the candidate voxels by the
/// attention they receive from each other, move the top `k` into the
/// selection, and re-score the rest, until the selected voxels hold at least
/// `budget` tokens or no candidates remain.
pub fn sdp(
    matrix: &AttentionMatrix,
    vmap: &VoxelMap,
    k: usize,
    budget: usize,
) -> Result<(Vec<VoxelKey>, SdpTrace)> {
    if k < 1 {
        return Err(Error::invalid("k", "must be >= 1"));
    }
    if budget < 1 {
        return Err(Error::invalid("budget", "must be >= 1"));
    }
    if vmap.occupied() == 0 {
        return Ok((
            Vec::new(),
            SdpTrace {
                iterations: Vec::new(),
                shortfall: true,
            },
        ));
    }
    let sizes: Vec<usize> = vmap.entries().values().map(|t| t.len()).collect();
    let flow = FlowMatrix::from_voxel_map(matrix, vmap)?;
    let mut state = InterScoreState::new(flow, SelfTerm::Exclude)?;
    let keys = state.keys().to_vec();

    let mut selection = Vec::new();
    let mut iterations = Vec::new();
    let mut selected_tokens = 0usize;
    while selected_tokens < budget && state.active_count() > 0 {
        let candidates = state.active_count();
        let mut ranked: Vec<usize> = state.active_indices();
        ranked.sort_by(|&a, &b| {
            state
                .score(b)
                .total_cmp(&state.score(a))
                .then_with(|| keys[a].cmp(&keys[b]))
        });
        ranked.truncate(k);
        iterations.push(SdpIteration {
            candidates,
            selected: ranked.iter().map(|&i| keys[i]).collect(),
            scores: ranked.iter().map(|&i| state.score(i)).collect(),
        });
        for &idx in &ranked {
            selected_tokens += sizes[idx];
            selection.push(keys[idx]);
        }
        state.remove(&ranked);
    }
    Ok((
        selection,
        SdpTrace {
            iterations,
            shortfall: selected_tokens < budget,
        },
    ))
}

/// Tokens of the selected voxels in commit order: voxels in selection order,
/// tokens within a voxel by score descending (ties by ascending id). Taking
/// the first `budget` tokens of this sequence is the same as trimming the
/// overshoot by dropping lowest-score tokens from the most recently selected
/// voxels.
fn commit_order(
    selection: &[VoxelKey],
    vmap: &VoxelMap,
    scores: &BTreeMap<usize, f64>,
) -> Vec<usize> {
    let mut commit = Vec::new();
    for key in selection {
        let tokens = vmap.tokens(key).expect("selected voxel must be occupied");
        commit.extend(rank_by_score(tokens, scores));
    }
    commit
}

fn column_means(matrix: &AttentionMatrix) -> Vec<f64> {
    let n = matrix.n();
    let mut sums = vec![0.0f64; n];
    for j in 0..n {
        for (i, sum) in sums.iter_mut().enumerate() {
            *sum += matrix.get(j, i);
        }
    }
    for sum in sums.iter_mut() {
        *sum /= n as f64;
    }
    sums
}

/// Outcome of a single strategy stage, before result assembly.
#[derive(Debug, Clone)]
pub struct StageOutput {
    /// Retained token ids, ascending.
    pub retained: Vec<usize>,
    /// Tokens available after the strategy's first stage.
    pub post_stage1: usize,
    pub trace: SdpTrace,
}

fn run_voxel_selection(
    selection: Vec<VoxelKey>,
    trace: SdpTrace,
    vmap: &VoxelMap,
    scores: &BTreeMap<usize, f64>,
    budget: usize,
    post_stage1: usize,
) -> StageOutput {
    let commit = commit_order(&selection, vmap, scores);
    let take = budget.min(commit.len());
    let mut retained = commit[..take].to_vec();
    retained.sort_unstable();
    StageOutput {
        retained,
        post_stage1,
        trace,
    }
}

fn strategy_geo3d(
    matrix: &AttentionMatrix,
    vmap: &VoxelMap,
    cfg: &PruneConfig,
) -> Result<StageOutput> {
    let (survivors, scores) = vcp(matrix, vmap, cfg.alpha)?;
    let post = survivors.valid_tokens();
    let (selection, trace) = sdp(matrix, &survivors, cfg.k, cfg.budget)?;
    Ok(run_voxel_selection(
        selection, trace, &survivors, &scores, cfg.budget, post,
    ))
}

fn strategy_vcp_only(
    matrix: &AttentionMatrix,
    vmap: &VoxelMap,
    cfg: &PruneConfig,
) -> Result<StageOutput> {
    let (survivors, scores) = vcp(matrix, vmap, cfg.alpha)?;
    let post = survivors.valid_tokens();
    let all: Vec<usize> = survivors
        .entries()
        .values()
        .flat_map(|t| t.iter().copied())
        .collect();
    let ranked = rank_by_score(&all, &scores);
    let mut retained = ranked[..cfg.budget.min(ranked.len())].to_vec();
    retained.sort_unstable();
    Ok(StageOutput {
        retained,
        post_stage1: post,
        trace: SdpTrace::default(),
    })
}

fn strategy_sdp_only(
    matrix: &AttentionMatrix,
    vmap: &VoxelMap,
    cfg: &PruneConfig,
) -> Result<StageOutput> {
    let scores = score_all_voxels(matrix, vmap)?;
    let (selection, trace) = sdp(matrix, vmap, cfg.k, cfg.budget)?;
    Ok(run_voxel_selection(
        selection,
        trace,
        vmap,
        &scores,
        cfg.budget,
        vmap.valid_tokens(),
    ))
}

/// Random-voxel baseline: shuffle the occupied voxels with the seeded
/// generator and accumulate whole voxels until the budget is met.
pub fn baseline_random_voxel(
    matrix: &AttentionMatrix,
    vmap: &VoxelMap,
    budget: usize,
    seed: u64,
) -> Result<StageOutput> {
    let scores = score_all_voxels(matrix, vmap)?;
    let mut keys: Vec<VoxelKey> = vmap.entries().keys().copied().collect();
    CounterRng::new(seed).shuffle(&mut keys);
    let selection = accumulate_until(&keys, vmap, budget);
    let shortfall = vmap.valid_tokens() < budget;
    Ok(run_voxel_selection(
        selection,
        SdpTrace {
            iterations: Vec::new(),
            shortfall,
        },
        vmap,
        &scores,
        budget,
        vmap.valid_tokens(),
    ))
}

/// Uniform-voxel baseline: order voxels along the Morton curve and pick with
/// an even stride, repeating over the remainder until the budget is met.
pub fn baseline_uniform_voxel(
    matrix: &AttentionMatrix,
    vmap: &VoxelMap,
    budget: usize,
) -> Result<StageOutput> {
    let scores = score_all_voxels(matrix, vmap)?;
    let keys: Vec<VoxelKey> = vmap.entries().keys().copied().collect();
    let mut remaining = morton_order(&keys)?;
    let mut selection = Vec::new();
    let mut selected_tokens = 0usize;
    while selected_tokens < budget && !remaining.is_empty() {
        let remaining_tokens: usize = remaining
            .iter()
            .map(|k| vmap.tokens(k).unwrap().len())
            .sum();
        let avg = remaining_tokens.div_ceil(remaining.len());
        let needed = (budget - selected_tokens).div_ceil(avg).max(1);
        let stride = remaining.len().div_ceil(needed.min(remaining.len()));
        let mut picked_positions = Vec::new();
        let mut pos = 0;
        while pos < remaining.len() && selected_tokens < budget {
            let key = remaining[pos];
            selected_tokens += vmap.tokens(&key).unwrap().len();
            selection.push(key);
            picked_positions.push(pos);
            pos += stride;
        }
        for &p in picked_positions.iter().rev() {
            remaining.remove(p);
        }
    }
    let shortfall = vmap.valid_tokens() < budget;
    Ok(run_voxel_selection(
        selection,
        SdpTrace {
            iterations: Vec::new(),
            shortfall,
        },
        vmap,
        &scores,
        budget,
        vmap.valid_tokens(),
    ))
}

/// Per-frame attention top-k baseline: score every token by its mean incoming
/// attention over the whole matrix, keep the best tokens of each frame under
/// an even per-frame quota (remainder to the earliest frames), then fill any
/// unused quota from the global ranking. Invalid-depth tokens are never kept.
pub fn baseline_frame_topk(
    matrix: &AttentionMatrix,
    grid: &crate::grid::FrameGrid,
    vmap: &VoxelMap,
    budget: usize,
) -> Result<StageOutput> {
    let means = column_means(matrix);
    let mut valid = vec![true; grid.token_count()];
    for &id in vmap.invalid() {
        valid[id] = false;
    }
    let rank =
        |a: &usize, b: &usize| means[*b].total_cmp(&means[*a]).then_with(|| a.cmp(b));

    let frames = grid.frames;
    let base = budget / frames;
    let rem = budget % frames;
    let mut retained = Vec::new();
    let mut taken = vec![false; grid.token_count()];
    for s in 0..frames {
        let quota = base + usize::from(s < rem);
        let mut frame_tokens: Vec<usize> = (s * grid.tokens_per_frame()
            ..(s + 1) * grid.tokens_per_frame())
            .filter(|&id| valid[id])
            .collect();
        frame_tokens.sort_by(rank);
        for &id in frame_tokens.iter().take(quota) {
            retained.push(id);
            taken[id] = true;
        }
    }
    if retained.len() < budget {
        let mut rest: Vec<usize> = (0..grid.token_count())
            .filter(|&id| valid[id] && !taken[id])
            .collect();
        rest.sort_by(rank);
        retained.extend(rest.into_iter().take(budget - retained.len()));
    }
    retained.sort_unstable();
    let shortfall = vmap.valid_tokens() < budget;
    Ok(StageOutput {
        retained,
        post_stage1: vmap.valid_tokens(),
        trace: SdpTrace {
            iterations: Vec::new(),
            shortfall,
        },
    })
}

/// Run the configured strategy over a validated bundle.
pub fn prune(bundle: &SceneBundle, cfg: &PruneConfig) -> Result<PruneResult> {
    bundle.validate()?;
    let vmap = bundle.voxel_map(cfg.delta)?;

    let cosine_matrix;
    let matrix: &AttentionMatrix = match cfg.relevance {
        Relevance::Attention => &bundle.attention,
        Relevance::Cosine => {
            let features = bundle.features.as_ref().ok_or_else(|| {
                Error::invalid("relevance", "cosine relevance requires bundle features")
            })?;
            cosine_matrix = cosine_relevance(features)?;
            &cosine_matrix
        }
    };

    prune_voxel_map(matrix, &bundle.grid, &vmap, cfg)
}

/// Run the configured strategy over an already-voxelized token map. The
/// relevance matrix is taken as given; `cfg.relevance` is recorded but not
/// applied here.
pub fn prune_voxel_map(
    matrix: &AttentionMatrix,
    grid: &crate::grid::FrameGrid,
    vmap: &VoxelMap,
    cfg: &PruneConfig,
) -> Result<PruneResult> {
    cfg.validate(grid.token_count())?;
    if vmap.token_count() != grid.token_count() {
        return Err(Error::invalid(
            "voxel map",
            format!(
                "covers {} tokens, grid has {}",
                vmap.token_count(),
                grid.token_count()
            ),
        ));
    }
    if matrix.n() != grid.token_count() {
        return Err(Error::invalid(
            "relevance matrix",
            format!("is {0}x{0}, grid has {1} tokens", matrix.n(), grid.token_count()),
        ));
    }

    let out = match cfg.strategy {
        Strategy::Geo3d => strategy_geo3d(matrix, vmap, cfg)?,
        Strategy::VcpOnly => strategy_vcp_only(matrix, vmap, cfg)?,
        Strategy::SdpOnly => strategy_sdp_only(matrix, vmap, cfg)?,
        Strategy::RandomVoxel => baseline_random_voxel(matrix, vmap, cfg.budget, cfg.seed)?,
        Strategy::UniformVoxel => baseline_uniform_voxel(matrix, vmap, cfg.budget)?,
        Strategy::FrameTopk => baseline_frame_topk(matrix, grid, vmap, cfg.budget)?,
    };

    let scores = score_all_voxels(matrix, vmap)?;
    let retained_set: BTreeSet<usize> = out.retained.iter().copied().collect();
    let per_voxel = vmap
        .entries()
        .iter()
        .map(|(key, tokens)| VoxelRecord {
            key: *key,
            kept: tokens
                .iter()
                .copied()
                .filter(|id| retained_set.contains(id))
                .collect(),
            dropped: tokens
                .iter()
                .copied()
                .filter(|id| !retained_set.contains(id))
                .collect(),
            scores: tokens.iter().map(|&id| (id, scores[&id])).collect(),
        })
        .collect();

    Ok(PruneResult {
        config: *cfg,
        counts: PruneCounts {
            total: grid.token_count(),
            post_vcp: out.post_stage1,
            final_count: out.retained.len(),
        },
        retained: out.retained,
        per_voxel,
        trace: out.trace,
    })
}

/// Accumulate whole voxels in the given order until they hold `budget` tokens.
fn accumulate_until(keys: &[VoxelKey], vmap: &VoxelMap, budget: usize) -> Vec<VoxelKey> {
    let mut selection = Vec::new();
    let mut tokens = 0usize;
    for &key in keys {
        if tokens >= budget {
            break;
        }
        tokens += vmap.tokens(&key).unwrap().len();
        selection.push(key);
    }
    selection
}
