//! Attention-derived scores driving both pruning stages.
//!
//! Two kinds of score exist:
//!
//! - **intra-voxel** `a_i`: the column mean of the voxel-local attention
//!   block — how much attention token `i` receives on average from the tokens
//!   sharing its voxel (the diagonal included);
//! - **inter-voxel** `a_{k->l}` and `a_l`: the attention flow from voxel `k`
//!   to voxel `l` (row sums over the target block, averaged over source
//!   tokens) and the total flow voxel `l` receives from the current candidate
//!   set. The self term `k = l` is excluded by default; a switch exposes the
//!   inclusive variant.
//!
//! Every optimized path has a naive double/triple-loop counterpart in
//! [`naive`] that serves as the oracle in tests and acceptance runs.

use std::collections::BTreeMap;

use crate::attention::AttentionMatrix;
use crate::error::{Error, Result};
use crate::geometry::{VoxelKey, VoxelMap};

/// Whether `a_l` sums include the flow of a voxel onto itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelfTerm {
    /// Sum only flows from other candidate voxels (default).
    #[default]
    Exclude,
    /// Also count the voxel's own intra-block flow.
    Include,
}

/// Per-token and per-voxel scores at a given selection state.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    /// Token id -> intra-voxel contribution score.
    pub intra: BTreeMap<usize, f64>,
    /// Voxel -> global received attention over `candidates`.
    pub inter: BTreeMap<VoxelKey, f64>,
    /// The candidate set the inter scores were computed over.
    pub candidates: Vec<VoxelKey>,
}

fn require_tokens(tokens: &[usize], what: &str) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::invalid(what, "empty token list"));
    }
    Ok(())
}

fn check_ids(matrix: &AttentionMatrix, tokens: &[usize], what: &str) -> Result<()> {
    if let Some(&bad) = tokens.iter().find(|&&id| id >= matrix.n()) {
        return Err(Error::invalid(
            what,
            format!("token id {bad} out of range 0..{}", matrix.n()),
        ));
    }
    Ok(())
}

/// Intra-voxel contribution scores: `a_i = mean over j in T_k of A[j, i]`.
pub fn intra_voxel_scores(
    matrix: &AttentionMatrix,
    tokens: &[usize],
) -> Result<Vec<(usize, f64)>> {
    require_tokens(tokens, "intra-voxel scores")?;
    check_ids(matrix, tokens, "intra-voxel scores")?;
    let count = tokens.len() as f64;
    Ok(tokens
        .iter()
        .map(|&i| {
            let sum: f64 = tokens.iter().map(|&j| matrix.get(j, i)).sum();
            (i, sum / count)
        })
        .collect())
}

/// Attention flow from voxel `k` to voxel `l`: row sums over the target
/// block, averaged over the source tokens.
pub fn inter_voxel_flow(
    matrix: &AttentionMatrix,
    source: &[usize],
    target: &[usize],
) -> Result<f64> {
    require_tokens(source, "inter-voxel flow source")?;
    require_tokens(target, "inter-voxel flow target")?;
    check_ids(matrix, source, "inter-voxel flow source")?;
    check_ids(matrix, target, "inter-voxel flow target")?;
    let mut total = 0.0;
    for &j in source {
        for &i in target {
            total += matrix.get(j, i);
        }
    }
    Ok(total / source.len() as f64)
}

/// Dense all-pairs flow matrix over a fixed voxel list.
///
/// Built in one pass over the relevant attention rows: each source token's
/// row is binned by the target token's voxel, which costs
/// `O(total_tokens * candidate_tokens)` instead of a triple loop per pair.
#[derive(Debug, Clone)]
pub struct FlowMatrix {
    keys: Vec<VoxelKey>,
    flows: Vec<f64>,
}

impl FlowMatrix {
    /// Compute flows between every ordered pair of the given voxels
    /// (self flows included; consumers decide whether to use them).
    pub fn compute(
        matrix: &AttentionMatrix,
        voxels: &[(VoxelKey, &[usize])],
    ) -> Result<FlowMatrix> {
        let count = voxels.len();
        for (key, tokens) in voxels {
            require_tokens(tokens, &format!("voxel {key}"))?;
            check_ids(matrix, tokens, &format!("voxel {key}"))?;
        }
        // token id -> column position in the flow accumulator
        let mut owner: Vec<u32> = vec![u32::MAX; matrix.n()];
        for (idx, (_, tokens)) in voxels.iter().enumerate() {
            for &t in *tokens {
                if owner[t] != u32::MAX {
                    return Err(Error::invalid(
                        "flow matrix",
                        format!("token id {t} appears in more than one voxel"),
                    ));
                }
                owner[t] = idx as u32;
            }
        }
        let member_tokens: Vec<usize> = voxels
            .iter()
            .flat_map(|(_, tokens)| tokens.iter().copied())
            .collect();
        let mut flows = vec![0.0f64; count * count];
        for (src_idx, (_, tokens)) in voxels.iter().enumerate() {
            let row = &mut flows[src_idx * count..(src_idx + 1) * count];
            for &j in *tokens {
                for &i in &member_tokens {
                    row[owner[i] as usize] += matrix.get(j, i);
                }
            }
            let size = tokens.len() as f64;
            for v in row.iter_mut() {
                *v /= size;
            }
        }
        Ok(FlowMatrix {
            keys: voxels.iter().map(|(k, _)| *k).collect(),
            flows,
        })
    }

    /// Compute flows over every occupied voxel of a map.
    pub fn from_voxel_map(matrix: &AttentionMatrix, vmap: &VoxelMap) -> Result<FlowMatrix> {
        let voxels: Vec<(VoxelKey, &[usize])> = vmap
            .entries()
            .iter()
            .map(|(k, t)| (*k, t.as_slice()))
            .collect();
        FlowMatrix::compute(matrix, &voxels)
    }

    pub fn keys(&self) -> &[VoxelKey] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Flow from voxel index `source` to voxel index `target`.
    #[inline]
    pub fn flow(&self, source: usize, target: usize) -> f64 {
        self.flows[source * self.keys.len() + target]
    }
}

/// Incrementally maintained received-attention scores over a shrinking
/// candidate set. Removing a candidate subtracts its outgoing flows from
/// every remaining score, which is exactly how the definition changes.
#[derive(Debug, Clone)]
pub struct InterScoreState {
    flow: FlowMatrix,
    active: Vec<bool>,
    scores: Vec<f64>,
    self_term: SelfTerm,
}

impl InterScoreState {
    pub fn new(flow: FlowMatrix, self_term: SelfTerm) -> Result<Self> {
        if flow.is_empty() {
            return Err(Error::invalid("inter-voxel scores", "empty candidate set"));
        }
        let count = flow.len();
        let mut scores = vec![0.0f64; count];
        for (l, score) in scores.iter_mut().enumerate() {
            for k in 0..count {
                if k == l && self_term == SelfTerm::Exclude {
                    continue;
                }
                *score += flow.flow(k, l);
            }
        }
        Ok(InterScoreState {
            flow,
            active: vec![true; count],
            scores,
            self_term,
        })
    }

    pub fn keys(&self) -> &[VoxelKey] {
        self.flow.keys()
    }

    /// Remaining candidate count.
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Scores of the remaining candidates, keyed by voxel.
    pub fn current(&self) -> BTreeMap<VoxelKey, f64> {
        self.flow
            .keys()
            .iter()
            .enumerate()
            .filter(|(idx, _)| self.active[*idx])
            .map(|(idx, key)| (*key, self.scores[idx]))
            .collect()
    }

    /// Indices (into `keys`) of the remaining candidates.
    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&i| self.active[i]).collect()
    }

    pub fn score(&self, index: usize) -> f64 {
        self.scores[index]
    }

    pub fn is_active(&self, index: usize) -> bool {
        self.active[index]
    }

    /// Remove candidates by index, subtracting their flows from every
    /// remaining score.
    pub fn remove(&mut self, removed: &[usize]) {
        for &m in removed {
            debug_assert!(self.active[m]);
            self.active[m] = false;
        }
        for l in 0..self.active.len() {
            if !self.active[l] {
                continue;
            }
            for &m in removed {
                self.scores[l] -= self.flow.flow(m, l);
            }
        }
    }

    /// Recompute every remaining score from the flow matrix. Exists to
    /// cross-check the incremental path.
    pub fn recompute_full(&self) -> BTreeMap<VoxelKey, f64> {
        let count = self.active.len();
        let mut out = BTreeMap::new();
        for l in 0..count {
            if !self.active[l] {
                continue;
            }
            let mut score = 0.0;
            for k in 0..count {
                if !self.active[k] {
                    continue;
                }
                if k == l && self.self_term == SelfTerm::Exclude {
                    continue;
                }
                score += self.flow.flow(k, l);
            }
            out.insert(self.flow.keys()[l], score);
        }
        out
    }
}

/// Compute the full score table for a selection state: intra scores for
/// every voxelized token and inter scores over the given candidates.
pub fn compute_score_table(
    matrix: &AttentionMatrix,
    vmap: &VoxelMap,
    candidates: &[VoxelKey],
    self_term: SelfTerm,
) -> Result<ScoreTable> {
    let mut intra = BTreeMap::new();
    for tokens in vmap.entries().values() {
        for (id, score) in intra_voxel_scores(matrix, tokens)? {
            intra.insert(id, score);
        }
    }
    let inter = inter_voxel_scores(matrix, candidates, vmap, self_term)?;
    Ok(ScoreTable {
        intra,
        inter,
        candidates: candidates.to_vec(),
    })
}

/// Received-attention score for every candidate voxel: the sum of flows from
/// all other candidates (self term per `self_term`).
pub fn inter_voxel_scores(
    matrix: &AttentionMatrix,
    candidates: &[VoxelKey],
    vmap: &VoxelMap,
    self_term: SelfTerm,
) -> Result<BTreeMap<VoxelKey, f64>> {
    if candidates.is_empty() {
        return Err(Error::invalid("inter-voxel scores", "empty candidate set"));
    }
    let mut voxels = Vec::with_capacity(candidates.len());
    for key in candidates {
        let tokens = vmap.tokens(key).ok_or_else(|| {
            Error::invalid(
                "inter-voxel scores",
                format!("candidate {key} is not an occupied voxel"),
            )
        })?;
        voxels.push((*key, tokens));
    }
    let flow = FlowMatrix::compute(matrix, &voxels)?;
    Ok(InterScoreState::new(flow, self_term)?.current())
}

/// Straightforward reference implementations of every score. These are the
/// oracles: independent of the optimized paths above and written as plain
/// index loops.
pub mod naive {
    use super::*;

    pub fn intra_voxel_scores(
        matrix: &AttentionMatrix,
        tokens: &[usize],
    ) -> Result<Vec<(usize, f64)>> {
        require_tokens(tokens, "intra-voxel scores")?;
        check_ids(matrix, tokens, "intra-voxel scores")?;
        let mut out = Vec::with_capacity(tokens.len());
        for idx in 0..tokens.len() {
            let i = tokens[idx];
            let mut sum = 0.0;
            for jdx in 0..tokens.len() {
                sum += matrix.get(tokens[jdx], i);
            }
            out.push((i, sum / tokens.len() as f64));
        }
        Ok(out)
    }

    pub fn inter_voxel_flow(
        matrix: &AttentionMatrix,
        source: &[usize],
        target: &[usize],
    ) -> Result<f64> {
        require_tokens(source, "inter-voxel flow source")?;
        require_tokens(target, "inter-voxel flow target")?;
        let mut total = 0.0;
        for jdx in 0..source.len() {
            let mut row = 0.0;
            for idx in 0..target.len() {
                row += matrix.get(source[jdx], target[idx]);
            }
            total += row;
        }
        Ok(total / source.len() as f64)
    }

    pub fn inter_voxel_scores(
        matrix: &AttentionMatrix,
        voxels: &[(VoxelKey, &[usize])],
        self_term: SelfTerm,
    ) -> Result<BTreeMap<VoxelKey, f64>> {
        if voxels.is_empty() {
            return Err(Error::invalid("inter-voxel scores", "empty candidate set"));
        }
        let mut out = BTreeMap::new();
        for (l_key, l_tokens) in voxels {
            let mut score = 0.0;
            for (k_key, k_tokens) in voxels {
                if k_key == l_key && self_term == SelfTerm::Exclude {
                    continue;
                }
                score += inter_voxel_flow(matrix, k_tokens, l_tokens)?;
            }
            out.insert(*l_key, score);
        }
        Ok(out)
    }
}
