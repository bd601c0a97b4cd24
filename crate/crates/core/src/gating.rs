//! The keyed 2-of-3 CRT gate.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numtheory::{ModTriple, NumError};
use crate::planner::ViewParams;
use crate::rng;
use crate::views::ResidueSet;

/// One `(r1, r2)` pair with its two-view reconstruction and the third-view
/// bin it predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatedCandidate {
    pub r1: u64,
    pub r2: u64,
    pub f12: u64,
    pub r3_hat: u64,
    pub passed: bool,
}

/// Two-view reconstruction and predicted third bin for a bin pair.
pub fn gate_one(r1: u64, r2: u64, triple: &ModTriple, hashes: &[ViewParams]) -> Result<(u64, u64), NumError> {
    let f12 = triple.garner12(hashes[0].unhash(r1)?, hashes[1].unhash(r2)?)?;
    Ok((f12, hashes[2].hash(f12)))
}

/// Gates every pair of `set1 x set2` against membership in `set3`.
///
/// Residue sets hold hashed bins; `hashes` are the three views' affine maps.
pub fn gate_pairs(
    set1: &ResidueSet,
    set2: &ResidueSet,
    set3: &ResidueSet,
    triple: &ModTriple,
    hashes: &[ViewParams],
) -> Result<Vec<GatedCandidate>, NumError> {
    let members: HashSet<u64> = set3.bins().collect();
    let mut out = Vec::with_capacity(set1.len() * set2.len());
    for r1 in set1.bins() {
        for r2 in set2.bins() {
            let (f12, r3_hat) = gate_one(r1, r2, triple, hashes)?;
            out.push(GatedCandidate {
                r1,
                r2,
                f12,
                r3_hat,
                passed: members.contains(&r3_hat),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateStats {
    pub trials: usize,
    pub mean_false_survivors: f64,
    pub stderr_false_survivors: f64,
    pub mean_true_survivors: f64,
    /// Trials in which every planted pair passed the gate.
    pub complete_trials: usize,
    /// `|R1| |R2| |R3| / m3`.
    pub prediction: f64,
}

/// Monte Carlo of gate survivors for random `k`-supports in
/// `[0, min(N, m1 m2))` with residue sets padded to `ceil(alpha k)` by
/// uniform filler bins.
pub fn gate_survivor_stats(
    n: u64,
    k: usize,
    alpha: f64,
    triple: &ModTriple,
    trials: usize,
    seed: u64,
) -> Result<GateStats, NumError> {
    let moduli = triple.moduli();
    let hashes: Vec<ViewParams> = moduli.iter().map(|&m| ViewParams::identity(m, 1)).collect();
    let size = |m: u64| ((alpha * k as f64).ceil() as u64).min(m) as usize;
    let span = n.min(moduli[0] * moduli[1]);
    let prediction = moduli.iter().map(|&m| size(m) as f64).product::<f64>() / moduli[2] as f64;

    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64, bool), NumError> {
            let mut s = rng::stream(seed, &format!("gate-trial-{t}"));
            let mut support = HashSet::new();
            while support.len() < k.min(span as usize) {
                support.insert(s.gen_range(0..span));
            }
            let mut support: Vec<u64> = support.into_iter().collect();
            support.sort_unstable();
            let sets: Vec<ResidueSet> = moduli
                .iter()
                .map(|&m| {
                    let mut bins: Vec<u64> = support.iter().map(|f| f % m).collect();
                    bins.sort_unstable();
                    bins.dedup();
                    let taken: HashSet<u64> = bins.iter().copied().collect();
                    let mut free: Vec<u64> = (0..m).filter(|r| !taken.contains(r)).collect();
                    free.shuffle(&mut s);
                    let fill = size(m).saturating_sub(bins.len());
                    bins.extend(free.into_iter().take(fill));
                    ResidueSet::from_residues(bins)
                })
                .collect();
            let gated = gate_pairs(&sets[0], &sets[1], &sets[2], triple, &hashes)?;
            let true_pairs: HashSet<(u64, u64)> =
                support.iter().map(|f| (f % moduli[0], f % moduli[1])).collect();
            let passed_true = gated
                .iter()
                .filter(|g| g.passed && true_pairs.contains(&(g.r1, g.r2)))
                .count();
            let passed = gated.iter().filter(|g| g.passed).count();
            Ok((
                (passed - passed_true) as f64,
                passed_true as f64,
                passed_true == true_pairs.len(),
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n = trials.max(1) as f64;
    let mean = per_trial.iter().map(|t| t.0).sum::<f64>() / n;
    let var = if trials > 1 {
        per_trial.iter().map(|t| (t.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(GateStats {
        trials,
        mean_false_survivors: mean,
        stderr_false_survivors: (var / n).sqrt(),
        mean_true_survivors: per_trial.iter().map(|t| t.1).sum::<f64>() / n,
        complete_trials: per_trial.iter().filter(|t| t.2).count(),
        prediction,
    })
}
