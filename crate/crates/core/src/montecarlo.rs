//! Monte Carlo experiments behind the statistical claims: gate survivors,
//! first-round singleton rates, verification misses and rehash completion.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, ViewMode};
use crate::dft::PlanCache;
use crate::gating::gate_survivor_stats;
use crate::numtheory::{ModTriple, NumError};
use crate::ops::OpCounts;
use crate::peeling::{detect_singletons, run_peeling, PeelState, PeelStatus};
use crate::planner::{make_plan, rehash, ModuliPlan};
use crate::rng;
use crate::signal::{synthesize, SparseSpectrum};
use crate::verification::verify_on;
use crate::views::{alias_view, ViewError};

#[derive(Debug, thiserror::Error)]
pub enum McError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Plan(#[from] crate::planner::PlanError),
    #[error(transparent)]
    View(#[from] ViewError),
}

/// `k` distinct frequencies uniform in `[0, span)` on a grid of length
/// `grid`, magnitudes uniform in [0.5, 2) with uniform phase.
pub fn random_spectrum(grid: u64, span: u64, k: usize, stream: &mut rng::Stream) -> SparseSpectrum {
    let span = span.min(grid);
    let mut fs = BTreeSet::new();
    while fs.len() < k.min(span as usize) {
        fs.insert(stream.gen_range(0..span));
    }
    let entries: Vec<(u64, Complex64)> = fs
        .into_iter()
        .map(|f| {
            let mag = stream.gen_range(0.5..2.0);
            let phase = stream.gen_range(0.0..std::f64::consts::TAU);
            (f, Complex64::from_polar(mag, phase))
        })
        .collect();
    SparseSpectrum::new(grid, entries).expect("distinct on-grid frequencies")
}

/// One CSV row of experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub experiment: String,
    pub n: u64,
    pub k: usize,
    pub alpha: f64,
    pub modulus: u64,
    pub lambda: f64,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    pub prediction: f64,
}

pub const CSV_HEADER: &str = "experiment,n,k,alpha,modulus,lambda,trials,mean,stderr,prediction";

pub fn rows_to_csv(rows: &[McRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("rows serialize");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8");
    format!("{CSV_HEADER}\n{body}")
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[allow(clippy::too_many_arguments)]
fn row(experiment: &str, n: u64, k: usize, alpha: f64, modulus: u64, trials: usize, samples: &[f64], prediction: f64) -> McRow {
    let (mean, stderr) = mean_stderr(samples);
    McRow {
        experiment: experiment.into(),
        n,
        k,
        alpha,
        modulus,
        lambda: k as f64 / modulus as f64,
        trials,
        mean,
        stderr,
        prediction,
    }
}

/// False gate survivors against `alpha^3 k^3 / m3`.
pub fn gate_survivors(n: u64, k: usize, alpha: f64, triple: &ModTriple, trials: usize, seed: u64) -> Result<Vec<McRow>, McError> {
    if trials == 0 {
        return Ok(Vec::new());
    }
    let stats = gate_survivor_stats(n, k, alpha, triple, trials, seed)?;
    let m3 = triple.m(2);
    let base = McRow {
        experiment: "gate-survivors".into(),
        n,
        k,
        alpha,
        modulus: m3,
        lambda: k as f64 / m3 as f64,
        trials,
        mean: stats.mean_false_survivors,
        stderr: stats.stderr_false_survivors,
        prediction: (alpha * k as f64).powi(3) / m3 as f64,
    };
    let truth = McRow {
        experiment: "gate-true-survivors".into(),
        mean: stats.mean_true_survivors,
        stderr: 0.0,
        prediction: k as f64,
        ..base.clone()
    };
    Ok(vec![base, truth])
}

/// First-round singleton statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingletonStats {
    pub trials: usize,
    /// Mean fraction of the support read as a singleton, per view.
    pub per_view: [f64; 3],
    pub per_view_stderr: [f64; 3],
    /// Mean fraction read in at least one view.
    pub any_view: f64,
    pub any_view_stderr: f64,
    /// Fraction of trials that peeled to completion within the round cap.
    pub within_round_cap: f64,
}

fn random_plan(k: usize, triple: &ModTriple, seed: u64) -> Result<ModuliPlan, McError> {
    let cfg = Config { moduli: Some(triple.moduli().to_vec()), ..Config::default() };
    Ok(make_plan(triple.product(), k, 0, seed, &cfg)?)
}

pub fn singleton_stats(k: usize, triple: &ModTriple, trials: usize, seed: u64) -> Result<SingletonStats, McError> {
    let cfg = Config::default();
    let grid = triple.product();
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<([f64; 3], f64, bool), McError> {
            let mut s = rng::stream(seed, &format!("singleton-trial-{t}"));
            let spec = random_spectrum(grid, grid, k, &mut s);
            let plan = random_plan(k, triple, s.gen())?;
            let views = plan.id_views.iter().map(|p| alias_view(&spec, p)).collect();
            let mut state = PeelState::with_relative_floor(views, grid, cfg.noise_floor_rel);
            let readings = detect_singletons(&state, cfg.singleton_tol);
            let kk = spec.len().max(1) as f64;
            let mut per_view = [0.0; 3];
            let mut any = BTreeSet::new();
            for r in &readings {
                per_view[r.view_index] += 1.0 / kk;
                any.insert(r.f_hat);
            }
            let out = run_peeling(&mut state, k, &cfg, &mut OpCounts::default());
            Ok((per_view, any.len() as f64 / kk, out.status == PeelStatus::Complete))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut per_view = [0.0; 3];
    let mut per_view_stderr = [0.0; 3];
    for v in 0..3 {
        let xs: Vec<f64> = per_trial.iter().map(|t| t.0[v]).collect();
        (per_view[v], per_view_stderr[v]) = mean_stderr(&xs);
    }
    let any: Vec<f64> = per_trial.iter().map(|t| t.1).collect();
    let (any_view, any_view_stderr) = mean_stderr(&any);
    Ok(SingletonStats {
        trials,
        per_view,
        per_view_stderr,
        any_view,
        any_view_stderr,
        within_round_cap: per_trial.iter().filter(|t| t.2).count() as f64 / trials.max(1) as f64,
    })
}

/// Per-view and any-view singleton fractions against `e^{-lambda}` and
/// `1 - prod (1 - e^{-lambda_i})`.
pub fn singleton_fraction(k: usize, triple: &ModTriple, trials: usize, seed: u64) -> Result<Vec<McRow>, McError> {
    if trials == 0 {
        return Ok(Vec::new());
    }
    let stats = singleton_stats(k, triple, trials, seed)?;
    let n = triple.product();
    let mut rows: Vec<McRow> = (0..3)
        .map(|v| {
            let m = triple.m(v);
            McRow {
                experiment: format!("singleton-fraction-view{}", v + 1),
                mean: stats.per_view[v],
                stderr: stats.per_view_stderr[v],
                prediction: (-(k as f64) / m as f64).exp(),
                ..row("", n, k, 0.0, m, trials, &[], 0.0)
            }
        })
        .collect();
    let miss: f64 = (0..3).map(|v| 1.0 - (-(k as f64) / triple.m(v) as f64).exp()).product();
    let m_min = triple.moduli().into_iter().min().unwrap();
    rows.push(McRow {
        experiment: "singleton-fraction-any-view".into(),
        mean: stats.any_view,
        stderr: stats.any_view_stderr,
        prediction: 1.0 - miss,
        ..row("", n, k, 0.0, m_min, trials, &[], 0.0)
    });
    Ok(rows)
}

/// Outcomes of the verification soundness experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyMissStats {
    pub trials: usize,
    /// Parseval-neutral corruptions accepted by the first verification view.
    pub single_view_misses: usize,
    /// Corruptions accepted by all three views.
    pub three_view_misses: usize,
    /// Candidates missing one tone that were rejected by every view.
    pub missing_rejected_every_view: usize,
    pub missing_rejected: usize,
}

/// Corrupts one frequency (same coefficient, fresh location) and drops one
/// tone, then checks both candidates on freshly drawn verification views
/// whose first view uses `triple.m(first)`.
pub fn verify_miss_stats(k: usize, triple: &ModTriple, first: usize, trials: usize, seed: u64) -> Result<VerifyMissStats, McError> {
    let cfg = Config::default();
    let grid = triple.product();
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool, bool, bool), McError> {
            let mut s = rng::stream(seed, &format!("verify-trial-{t}"));
            let spec = random_spectrum(grid, grid, k, &mut s);
            let src = synthesize(spec.clone());
            let mut plan = random_plan(k, triple, s.gen())?;
            plan.verify_views = (first..first + 3)
                .map(|v| crate::planner::verification_view(&plan, v, cfg.shifts))
                .collect();

            let victim = s.gen_range(0..spec.len());
            let mut moved = s.gen_range(0..grid);
            while spec.get(moved).is_some() {
                moved = s.gen_range(0..grid);
            }
            let corrupted = SparseSpectrum::new(
                grid,
                spec.entries()
                    .iter()
                    .enumerate()
                    .map(|(i, e)| if i == victim { (moved, e.coeff) } else { (e.f, e.coeff) }),
            )
            .expect("distinct");
            let missing = SparseSpectrum::new(
                grid,
                spec.entries()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != victim)
                    .map(|(_, e)| (e.f, e.coeff)),
            )
            .expect("distinct");

            let mut ops = OpCounts::default();
            let plans = PlanCache::default();
            let report = verify_on(&src, &plan.verify_views, k, &corrupted, &cfg, ViewMode::Dense, &plans, &mut ops)?;
            let single_miss = report.views[0].passed;
            let all_miss = report.overall;
            let report = verify_on(&src, &plan.verify_views, k, &missing, &cfg, ViewMode::Dense, &plans, &mut ops)?;
            let every = report.views.iter().all(|v| v.parseval_gap > v.epsilon && !v.passed);
            Ok((single_miss, all_miss, every, !report.overall))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VerifyMissStats {
        trials,
        single_view_misses: per_trial.iter().filter(|t| t.0).count(),
        three_view_misses: per_trial.iter().filter(|t| t.1).count(),
        missing_rejected_every_view: per_trial.iter().filter(|t| t.2).count(),
        missing_rejected: per_trial.iter().filter(|t| t.3).count(),
    })
}

pub fn verify_miss(k: usize, triple: &ModTriple, trials: usize, seed: u64) -> Result<Vec<McRow>, McError> {
    if trials == 0 {
        return Ok(Vec::new());
    }
    let stats = verify_miss_stats(k, triple, 0, trials, seed)?;
    let n = triple.product();
    let m = triple.m(0);
    let rate = |count: usize| -> Vec<f64> {
        (0..trials).map(|i| if i < count { 1.0 } else { 0.0 }).collect()
    };
    let bound = 2.0 * k as f64 / m as f64;
    Ok(vec![
        row("verify-miss", n, k, 0.0, m, trials, &rate(stats.single_view_misses), bound),
        row(
            "verify-miss-three-views",
            n,
            k,
            0.0,
            m,
            trials,
            &rate(stats.three_view_misses),
            (0..3).map(|v| 2.0 * k as f64 / triple.m(v) as f64).product(),
        ),
        row("verify-missing-tone-rejected", n, k, 0.0, m, trials, &rate(stats.missing_rejected), 1.0),
    ])
}

/// Outcomes of the rehash experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RehashStats {
    pub trials: usize,
    /// Trials that completed without rehashing.
    pub first_pass: usize,
    /// Trials that completed within one rehash.
    pub within_one_rehash: usize,
}

pub fn rehash_stats(k: usize, triple: &ModTriple, trials: usize, seed: u64) -> Result<RehashStats, McError> {
    let cfg = Config::default();
    let grid = triple.product();
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool), McError> {
            let mut s = rng::stream(seed, &format!("rehash-trial-{t}"));
            let spec = random_spectrum(grid, grid, k, &mut s);
            let plan = random_plan(k, triple, s.gen())?;
            let views = plan.id_views.iter().map(|p| alias_view(&spec, p)).collect();
            let mut state = PeelState::with_relative_floor(views, grid, cfg.noise_floor_rel);
            let mut ops = OpCounts::default();
            let first = run_peeling(&mut state, k, &cfg, &mut ops).status == PeelStatus::Complete;
            if first {
                return Ok((true, true));
            }
            let next = rehash(&plan, 1, &cfg);
            state.reset_views(next.id_views.iter().map(|p| alias_view(&spec, p)).collect());
            let second = run_peeling(&mut state, k, &cfg, &mut ops).status == PeelStatus::Complete;
            Ok((false, second))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RehashStats {
        trials,
        first_pass: per_trial.iter().filter(|t| t.0).count(),
        within_one_rehash: per_trial.iter().filter(|t| t.1).count(),
    })
}

pub fn rehash_rows(k: usize, triple: &ModTriple, trials: usize, seed: u64) -> Result<Vec<McRow>, McError> {
    if trials == 0 {
        return Ok(Vec::new());
    }
    let stats = rehash_stats(k, triple, trials, seed)?;
    let n = triple.product();
    let m = triple.moduli().into_iter().min().unwrap();
    let ones = |count: usize| -> Vec<f64> { (0..trials).map(|i| if i < count { 1.0 } else { 0.0 }).collect() };
    Ok(vec![
        row("rehash-first-pass", n, k, 0.0, m, trials, &ones(stats.first_pass), 0.99),
        row("rehash-within-one", n, k, 0.0, m, trials, &ones(stats.within_one_rehash), 0.99),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trials_give_header_only() {
        let t = ModTriple::new(97, 101, 103).unwrap();
        let rows = gate_survivors(10_000, 5, 15.0, &t, 0, 1).unwrap();
        assert!(rows.is_empty());
        assert_eq!(rows_to_csv(&rows), format!("{CSV_HEADER}\n"));
        assert!(singleton_fraction(5, &t, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn csv_layout() {
        let t = ModTriple::new(97, 101, 103).unwrap();
        let rows = gate_survivors(10_000, 2, 15.0, &t, 20, 1).unwrap();
        let text = rows_to_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert!(lines.next().unwrap().starts_with("gate-survivors,10000,2,15.0,103,"));
        assert_eq!(text, rows_to_csv(&gate_survivors(10_000, 2, 15.0, &t, 20, 1).unwrap()));
    }

    #[test]
    fn small_singleton_run_is_sane() {
        let t = ModTriple::new(997, 1009, 1013).unwrap();
        let s = singleton_stats(10, &t, 50, 3).unwrap();
        for v in s.per_view {
            assert!(v > 0.9 && v <= 1.0);
        }
        assert!(s.any_view >= s.per_view[0]);
    }

    #[test]
    fn small_verification_run() {
        let t = ModTriple::new(97, 101, 103).unwrap();
        let s = verify_miss_stats(5, &t, 0, 30, 4).unwrap();
        assert_eq!(s.missing_rejected, 30);
        assert!(s.three_view_misses <= s.single_view_misses);
    }

    #[test]
    fn random_spectrum_respects_span() {
        let mut s = rng::stream(1, "t");
        let spec = random_spectrum(1000, 10, 50, &mut s);
        assert_eq!(spec.len(), 10);
        assert!(spec.frequencies().iter().all(|&f| f < 10));
    }
}
