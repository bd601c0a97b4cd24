//! Peeling decoder: singleton detection across shifted views, cross-view
//! subtraction, and round control.

pub mod recursive;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::dft::unit_phase;
use crate::ops::OpCounts;
use crate::signal::SparseSpectrum;
use crate::views::ViewSpectrum;

#[derive(Debug, Error, PartialEq)]
pub enum PeelError {
    #[error("frequency {f} re-detected with a residual below the noise floor")]
    DuplicateConflict { f: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingletonReading {
    pub view_index: usize,
    pub residue: u64,
    pub f_hat: u64,
    pub coeff: Complex64,
    pub shift_ratio_error: f64,
}

/// Views being peeled plus the spectrum recovered so far.
#[derive(Debug, Clone)]
pub struct PeelState {
    views: Vec<ViewSpectrum>,
    grid: u64,
    floor: f64,
    recovered: BTreeMap<u64, Complex64>,
    round: u32,
}

impl PeelState {
    /// `floor` is the absolute magnitude below which a bin counts as empty.
    pub fn new(views: Vec<ViewSpectrum>, grid: u64, floor: f64) -> Self {
        Self {
            views,
            grid,
            floor,
            recovered: BTreeMap::new(),
            round: 0,
        }
    }

    /// Floor at `rel` times the largest shift-0 bin over all views.
    pub fn with_relative_floor(views: Vec<ViewSpectrum>, grid: u64, rel: f64) -> Self {
        let max = views.iter().map(|v| v.max_magnitude()).fold(0.0, f64::max);
        Self::new(views, grid, rel * max)
    }

    pub fn views(&self) -> &[ViewSpectrum] {
        &self.views
    }

    pub fn grid(&self) -> u64 {
        self.grid
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn recovered_count(&self) -> usize {
        self.recovered.len()
    }

    /// Recovered entries whose merged coefficient is above the floor.
    pub fn recovered(&self) -> SparseSpectrum {
        SparseSpectrum::new(
            self.grid,
            self.recovered
                .iter()
                .filter(|(_, c)| c.norm() > self.floor)
                .map(|(&f, &c)| (f, c)),
        )
        .expect("recovered frequencies are distinct and on the grid")
    }

    /// Sum of squared bin magnitudes over all views and shifts.
    pub fn residual_energy(&self) -> f64 {
        self.views
            .iter()
            .flat_map(|v| (0..v.shift_count()).flat_map(move |s| v.shift(s).iter()))
            .map(|z| z.norm_sqr())
            .sum()
    }

    pub fn is_clear(&self) -> bool {
        self.views.iter().all(|v| {
            (0..v.shift_count()).all(|s| v.shift(s).iter().all(|z| z.norm() <= self.floor))
        })
    }

    /// Removes a known component from every bin it occupies, without
    /// recording it.
    pub fn subtract(&mut self, f: u64, coeff: Complex64) -> u64 {
        let grid = self.grid as u128;
        let mut ops = 0;
        for view in &mut self.views {
            let r = view.params().hash(f);
            let shifts = view.params().shifts.clone();
            for (s, &offset) in shifts.iter().enumerate() {
                view.sub(r, s, coeff * unit_phase(f as u128 * (offset as u128 % grid), grid));
                ops += 1;
            }
        }
        ops
    }

    /// Replaces the views (same grid) and re-applies everything recovered.
    pub fn reset_views(&mut self, views: Vec<ViewSpectrum>) -> u64 {
        self.views = views;
        let known: Vec<(u64, Complex64)> = self.recovered.iter().map(|(&f, &c)| (f, c)).collect();
        known.into_iter().map(|(f, c)| self.subtract(f, c)).sum()
    }
}

/// Scans every bin; returns emitted readings and the count of bins that
/// looked like singletons but failed the hash-consistency check.
fn scan(state: &PeelState, tol: f64, ops: &mut OpCounts) -> (Vec<SingletonReading>, usize) {
    let grid = state.grid as u128;
    let two_pi = std::f64::consts::TAU;
    let mut readings = Vec::new();
    let mut discarded = 0;
    for (vi, view) in state.views.iter().enumerate() {
        let params = view.params();
        if params.shifts.len() < 2 || params.shifts[0] != 0 || params.shifts[1] != 1 {
            continue;
        }
        ops.peeling += view.m();
        for r in 0..view.m() {
            let y0 = view.value(r, 0);
            let mag0 = y0.norm();
            if mag0 <= state.floor {
                continue;
            }
            ops.peeling += view.shift_count() as u64;
            let mut err: f64 = 0.0;
            for s in 1..view.shift_count() {
                err = err.max((view.value(r, s).norm() - mag0).abs() / mag0);
            }
            let q = view.value(r, 1) / y0;
            let turns = q.arg() / two_pi;
            let f_hat = ((turns * state.grid as f64).round() as i128).rem_euclid(state.grid as i128) as u64;
            let unit = unit_phase(f_hat as u128, grid);
            err = err.max((q / q.norm() - unit).norm());
            if view.shift_count() >= 3 && params.shifts[2] == 2 {
                let q2 = view.value(r, 2) / view.value(r, 1);
                err = err.max((q2 - q).norm());
            }
            if err.is_nan() || err > tol {
                continue;
            }
            if params.hash(f_hat) != r {
                discarded += 1;
                continue;
            }
            readings.push(SingletonReading {
                view_index: vi,
                residue: r,
                f_hat,
                coeff: y0,
                shift_ratio_error: err,
            });
        }
    }
    (readings, discarded)
}

/// Bins that pass the magnitude, phase-ratio and hash-consistency tests.
pub fn detect_singletons(state: &PeelState, tol: f64) -> Vec<SingletonReading> {
    scan(state, tol, &mut OpCounts::default()).0
}

/// Subtracts a reading from every view and records it.
pub fn peel(state: &mut PeelState, reading: &SingletonReading) -> Result<u64, PeelError> {
    if let Some(existing) = state.recovered.get_mut(&reading.f_hat) {
        if reading.coeff.norm() <= state.floor {
            return Err(PeelError::DuplicateConflict { f: reading.f_hat });
        }
        *existing += reading.coeff;
    } else {
        state.recovered.insert(reading.f_hat, reading.coeff);
    }
    Ok(state.subtract(reading.f_hat, reading.coeff))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeelStatus {
    Complete,
    TwoCore,
    Stagnated,
}

/// Singleton counts of the first detection round.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RoundStats {
    /// Readings emitted per view.
    pub per_view: Vec<usize>,
    /// Distinct frequencies read in any view.
    pub distinct: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeelOutcome {
    pub recovered: SparseSpectrum,
    pub status: PeelStatus,
    pub rounds: u32,
    pub first_round: RoundStats,
    pub discarded: usize,
}

/// Detect-then-peel until the views are clear, nothing is detectable
/// (`TwoCore`), or the round cap is hit (`Stagnated`).
pub fn run_peeling(state: &mut PeelState, k: usize, cfg: &Config, ops: &mut OpCounts) -> PeelOutcome {
    let cap = state.round + cfg.round_cap(k);
    let runaway = 4 * k + 4;
    let mut first_round = None;
    let mut discarded = 0;
    let status = loop {
        if state.is_clear() {
            break PeelStatus::Complete;
        }
        if state.round >= cap || state.recovered.len() > runaway {
            break PeelStatus::Stagnated;
        }
        let (readings, bad) = scan(state, cfg.singleton_tol, ops);
        discarded += bad;
        if first_round.is_none() {
            let mut per_view = vec![0; state.views.len()];
            readings.iter().for_each(|r| per_view[r.view_index] += 1);
            let mut fs: Vec<u64> = readings.iter().map(|r| r.f_hat).collect();
            fs.sort_unstable();
            fs.dedup();
            first_round = Some(RoundStats { per_view, distinct: fs.len() });
        }
        if readings.is_empty() {
            break PeelStatus::TwoCore;
        }
        let mut seen = std::collections::BTreeSet::new();
        for reading in readings {
            if !seen.insert(reading.f_hat) {
                continue;
            }
            match peel(state, &reading) {
                Ok(n) => ops.peeling += n,
                Err(PeelError::DuplicateConflict { .. }) => discarded += 1,
            }
        }
        state.round += 1;
    };
    PeelOutcome {
        recovered: state.recovered(),
        status,
        rounds: state.round,
        first_round: first_round.unwrap_or_default(),
        discarded,
    }
}
