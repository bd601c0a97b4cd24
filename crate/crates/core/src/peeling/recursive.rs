//! Sparse recovery of a view signal by recursing into its own coprime
//! sub-views, with dense FFT terminals.

use crate::config::{Config, ViewMode};
use crate::dft::PlanCache;
use crate::numtheory::factorize;
use crate::ops::OpCounts;
use crate::peeling::{run_peeling, PeelState, PeelStatus};
use crate::planner::ViewParams;
use crate::signal::{SignalSource, SparseSpectrum};
use crate::views::{build_view, dense_view_spectrum, BuildContext, ViewError};

/// Splits `m` into three pairwise-coprime factors by dealing its prime
/// powers round-robin in ascending order; `None` when `m` has fewer than
/// three distinct primes.
pub fn child_moduli(m: u64) -> Option<[u64; 3]> {
    let factors = factorize(m);
    if factors.len() < 3 {
        return None;
    }
    let mut groups = [1u64; 3];
    for (i, (p, e)) in factors.into_iter().enumerate() {
        groups[i % 3] *= p.pow(e);
    }
    Some(groups)
}

/// The normalized spectrum `(1/m) DFT(y)` of a length-`m` signal that is
/// at most `k`-sparse.
///
/// A node recurses when `m` has three coprime factors, the depth budget
/// allows it and the child load `k / min(child)` is within the threshold;
/// otherwise, or when child peeling fails, it computes a dense FFT.
pub fn recursive_spectrum(
    signal: &dyn SignalSource,
    ctx: &BuildContext<'_>,
    ops: &mut OpCounts,
) -> Result<SparseSpectrum, ViewError> {
    let BuildContext { k, depth, max_depth, cfg, plans, .. } = *ctx;
    let m = signal.grid_length();
    let children = child_moduli(m).filter(|c| {
        let smallest = *c.iter().min().unwrap();
        depth < max_depth && k as f64 / smallest as f64 <= cfg.lambda_threshold
    });
    if let Some(children) = children {
        let ctx = BuildContext {
            mode: ViewMode::Recursive,
            k,
            depth: depth + 1,
            max_depth,
            cfg,
            plans,
        };
        let views = children
            .iter()
            .map(|&c| build_view(signal, &ViewParams::identity(c, cfg.shifts), &ctx, ops))
            .collect::<Result<Vec<_>, _>>()?;
        let mut state = PeelState::with_relative_floor(views, m, cfg.noise_floor_rel);
        let out = run_peeling(&mut state, k, cfg, ops);
        if out.status == PeelStatus::Complete && out.recovered.len() <= k {
            return Ok(out.recovered);
        }
    }
    dense_terminal(signal, cfg, plans, ops)
}

fn dense_terminal(
    signal: &dyn SignalSource,
    cfg: &Config,
    plans: &PlanCache,
    ops: &mut OpCounts,
) -> Result<SparseSpectrum, ViewError> {
    let m = signal.grid_length();
    let spectrum = dense_view_spectrum(signal, plans, ops)?;
    let floor = cfg.noise_floor_rel * spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(SparseSpectrum::new(
        m,
        spectrum
            .into_iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > floor)
            .map(|(f, z)| (f as u64, z)),
    )
    .expect("dense bins are distinct and finite"))
}
