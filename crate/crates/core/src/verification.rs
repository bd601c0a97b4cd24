//! Two-part verification of a candidate spectrum on independent views.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{Config, ViewMode};
use crate::dft::PlanCache;
use crate::ops::OpCounts;
use crate::planner::{ModuliPlan, ViewParams};
use crate::signal::{SignalSource, SparseSpectrum};
use crate::views::{alias_view, build_view, view_energy, BuildContext, ViewError, ViewSpectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewCheck {
    pub view_modulus: u64,
    pub parseval_gap: f64,
    pub residual_energy: f64,
    pub epsilon: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub views: Vec<ViewCheck>,
    pub overall: bool,
    /// True when no verification view ran.
    pub unverified: bool,
    /// Largest tolerance used by any view.
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOutcome {
    pub value: f64,
    pub epsilon: f64,
    pub passed: bool,
}

/// Energy check: the view's time-domain energy per sample against the
/// energy the candidate predicts for the same view's bins.
///
/// `E_time / m` equals `sum_r |Y(r)|^2` exactly, so this also holds when
/// candidate frequencies collide in the view.
pub fn parseval_check(
    source: &dyn SignalSource,
    params: &ViewParams,
    candidate: &SparseSpectrum,
    eps_rel: f64,
    ops: &mut OpCounts,
) -> Result<CheckOutcome, ViewError> {
    let e_time = view_energy(source, params, ops)? / params.m as f64;
    let zero_shift = ViewParams { shifts: vec![0], ..params.clone() };
    let predicted = alias_view(candidate, &zero_shift).energy();
    ops.verification += params.m + candidate.len() as u64;
    let gap = (e_time - predicted).abs();
    let epsilon = eps_rel * e_time.max(1.0);
    Ok(CheckOutcome { value: gap, epsilon, passed: gap <= epsilon })
}

/// Bin-wise residual between a freshly built view and the candidate's
/// prediction, summed over all bins and shifts.
pub fn residual_check(view: &ViewSpectrum, candidate: &SparseSpectrum, epsilon: f64, ops: &mut OpCounts) -> CheckOutcome {
    let predicted = alias_view(candidate, view.params());
    let residual: f64 = (0..view.shift_count())
        .flat_map(|s| {
            view.shift(s)
                .iter()
                .zip(predicted.shift(s))
                .map(|(y, p): (&Complex64, &Complex64)| (y - p).norm_sqr())
        })
        .sum();
    ops.verification += (view.m() + candidate.len() as u64) * view.shift_count() as u64;
    CheckOutcome { value: residual, epsilon, passed: residual <= epsilon }
}

/// Runs both checks on each of `views`.
#[allow(clippy::too_many_arguments)]
pub fn verify_on(
    source: &dyn SignalSource,
    views: &[ViewParams],
    k: usize,
    candidate: &SparseSpectrum,
    cfg: &Config,
    mode: ViewMode,
    plans: &PlanCache,
    ops: &mut OpCounts,
) -> Result<VerificationReport, ViewError> {
    let n = source.original_length().max(4);
    let mut checks = Vec::with_capacity(views.len());
    for params in views {
        let mut local = OpCounts::default();
        let energy = parseval_check(source, params, candidate, cfg.verify_eps_rel, &mut local)?;
        let ctx = BuildContext { mode, k, depth: 0, max_depth: cfg.depth_limit(n), cfg, plans };
        let view = build_view(source, params, &ctx, &mut local)?;
        let residual = residual_check(&view, candidate, energy.epsilon, &mut local);
        local.verification += local.views + local.peeling;
        local.views = 0;
        local.peeling = 0;
        *ops += local;
        checks.push(ViewCheck {
            view_modulus: params.m,
            parseval_gap: energy.value,
            residual_energy: residual.value,
            epsilon: energy.epsilon,
            passed: energy.passed && residual.passed,
        });
    }
    Ok(VerificationReport {
        overall: checks.iter().all(|c| c.passed),
        unverified: checks.is_empty(),
        epsilon: checks.iter().map(|c| c.epsilon).fold(0.0, f64::max),
        views: checks,
    })
}

/// Verifies a candidate on the plan's verification views.
pub fn verify(
    source: &dyn SignalSource,
    plan: &ModuliPlan,
    candidate: &SparseSpectrum,
    cfg: &Config,
    plans: &PlanCache,
    ops: &mut OpCounts,
) -> Result<VerificationReport, ViewError> {
    verify_on(source, &plan.verify_views, plan.k, candidate, cfg, cfg.verify_mode, plans, ops)
}
