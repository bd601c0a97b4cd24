//! The certified algorithm: plan, views, peeling with rehash, verification,
//! and dense fallback, plus certificate construction and checking.

use std::collections::HashSet;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, GateRecords, ViewMode};
use crate::dft::{DftError, DftPlan, PlanCache};
use crate::gating::{gate_one, gate_pairs};
use crate::numtheory::NumError;
use crate::ops::OpCounts;
use crate::peeling::{run_peeling, PeelOutcome, PeelState, PeelStatus};
use crate::planner::{make_plan, rehash, verification_view, ModuliPlan};
use crate::signal::{Regridded, SignalSource, SparseSpectrum};
use crate::verification::{verify, verify_on, VerificationReport};
use crate::views::{build_view, extract_residues, BuildContext, ResidueSet, ViewError, ViewSpectrum};

pub const CERTIFICATE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dense fallback needs {grid} samples, above the cap of {cap}")]
    FallbackTooLarge { grid: u64, cap: u64 },
    #[error(transparent)]
    Dft(#[from] DftError),
    #[error(transparent)]
    View(#[from] ViewError),
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("malformed certificate: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("certificate grid {cert} does not match the signal grid {signal}")]
    GridMismatch { cert: u64, signal: u64 },
    #[error(transparent)]
    View(#[from] ViewError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryPath {
    FastPath,
    Fallback,
}

/// One escalation step taken during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Escalation {
    Rehash { round: u32, after: PeelStatus },
    ExtraVerification { views: usize, passed: bool },
    DenseFallback { reason: String },
}

/// A gate evaluation; `f` names the recovered frequency it was recorded for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateRecord {
    pub f: Option<u64>,
    pub r1: u64,
    pub r2: u64,
    pub f12: u64,
    pub r3_hat: u64,
    pub passed: bool,
}

/// Garner intermediates for one recovered frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrtRecord {
    pub f: u64,
    pub residues: [u64; 3],
    pub u2: u64,
    pub u3: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeRecord {
    pub f: u64,
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
}

/// Audit record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub version: u32,
    pub path: RecoveryPath,
    pub grid: u64,
    pub declared_n: Option<u64>,
    pub plan: Option<ModuliPlan>,
    pub residue_sets: Vec<ResidueSet>,
    pub gated_pairs: Vec<GateRecord>,
    pub crt: Vec<CrtRecord>,
    pub amplitudes: Vec<AmplitudeRecord>,
    pub verification: Option<VerificationReport>,
    pub tau: f64,
    pub escalations: Vec<Escalation>,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CertificateError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub spectrum: SparseSpectrum,
    pub path: RecoveryPath,
    pub certificate: Certificate,
    pub op_counts: OpCounts,
}

impl RecoveryResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// Top-`k` bins of the dense spectrum of the whole source.
pub fn dense_fallback(
    source: &dyn SignalSource,
    k: usize,
    cfg: &Config,
    ops: &mut OpCounts,
) -> Result<SparseSpectrum, PipelineError> {
    let grid = source.grid_length();
    if grid > cfg.dense_cap {
        return Err(PipelineError::FallbackTooLarge { grid, cap: cfg.dense_cap });
    }
    let plan = DftPlan::new(grid as usize)?;
    let mut buf: Vec<Complex64> = (0..grid).map(|n| source.sample(n)).collect();
    plan.forward(&mut buf)?;
    let scale = 1.0 / grid as f64;
    let floor = cfg.noise_floor_rel * buf.iter().map(|z| z.norm()).fold(0.0, f64::max) * scale;
    ops.samples_read += grid;
    ops.fallback += plan.setup_cost() + plan.op_cost() + 2 * grid;
    let full = SparseSpectrum::new(
        grid,
        buf.into_iter()
            .enumerate()
            .map(|(f, z)| (f as u64, z * scale))
            .filter(|(_, z)| z.norm() > floor),
    )
    .expect("dense bins are distinct and finite");
    Ok(full.top_k(k))
}

struct Run<'a> {
    cfg: &'a Config,
    k: usize,
    ops: OpCounts,
    escalations: Vec<Escalation>,
    plan: Option<ModuliPlan>,
    residue_sets: Vec<ResidueSet>,
    verification: Option<VerificationReport>,
}

impl Run<'_> {
    fn fallback(mut self, source: &dyn SignalSource, reason: String) -> Result<RecoveryResult, PipelineError> {
        self.escalations.push(Escalation::DenseFallback { reason });
        let spectrum = dense_fallback(source, self.k, self.cfg, &mut self.ops)?;
        self.finish(spectrum, RecoveryPath::Fallback, None)
    }

    fn finish(
        mut self,
        spectrum: SparseSpectrum,
        path: RecoveryPath,
        initial_views: Option<&[ViewSpectrum]>,
    ) -> Result<RecoveryResult, PipelineError> {
        let gated_pairs = match (&self.plan, initial_views) {
            (Some(plan), Some(_)) => gate_records(plan, &spectrum, &self.residue_sets, self.cfg.gate_records, &mut self.ops)?,
            _ => Vec::new(),
        };
        let certificate = build_certificate(
            path,
            &spectrum,
            self.plan,
            self.residue_sets,
            gated_pairs,
            self.verification,
            self.escalations,
            self.cfg,
        )?;
        Ok(RecoveryResult {
            spectrum,
            path,
            certificate,
            op_counts: self.ops.finalized(),
        })
    }
}

fn gate_records(
    plan: &ModuliPlan,
    spectrum: &SparseSpectrum,
    sets: &[ResidueSet],
    mode: GateRecords,
    ops: &mut OpCounts,
) -> Result<Vec<GateRecord>, NumError> {
    let members: HashSet<u64> = sets.get(2).map(|s| s.bins().collect()).unwrap_or_default();
    match mode {
        GateRecords::Off => Ok(Vec::new()),
        GateRecords::Recovered => spectrum
            .entries()
            .iter()
            .map(|e| {
                let r1 = plan.id_views[0].hash(e.f);
                let r2 = plan.id_views[1].hash(e.f);
                let (f12, r3_hat) = gate_one(r1, r2, &plan.triple, &plan.id_views)?;
                ops.gating += 1;
                Ok(GateRecord {
                    f: Some(e.f),
                    r1,
                    r2,
                    f12,
                    r3_hat,
                    passed: members.contains(&r3_hat),
                })
            })
            .collect(),
        GateRecords::Full => {
            let rows = gate_pairs(&sets[0], &sets[1], &sets[2], &plan.triple, &plan.id_views)?;
            ops.gating += rows.len() as u64;
            Ok(rows
                .into_iter()
                .map(|g| GateRecord {
                    f: None,
                    r1: g.r1,
                    r2: g.r2,
                    f12: g.f12,
                    r3_hat: g.r3_hat,
                    passed: g.passed,
                })
                .collect())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_certificate(
    path: RecoveryPath,
    spectrum: &SparseSpectrum,
    plan: Option<ModuliPlan>,
    residue_sets: Vec<ResidueSet>,
    gated_pairs: Vec<GateRecord>,
    verification: Option<VerificationReport>,
    escalations: Vec<Escalation>,
    cfg: &Config,
) -> Result<Certificate, NumError> {
    let crt = match &plan {
        Some(plan) => spectrum
            .entries()
            .iter()
            .map(|e| {
                let residues = plan.triple.residues(e.f);
                let trace = plan.triple.garner3(residues[0], residues[1], residues[2])?;
                Ok(CrtRecord { f: e.f, residues, u2: trace.u2, u3: trace.u3 })
            })
            .collect::<Result<Vec<_>, NumError>>()?,
        None => Vec::new(),
    };
    let amplitudes: Vec<AmplitudeRecord> = spectrum
        .entries()
        .iter()
        .map(|e| AmplitudeRecord {
            f: e.f,
            re: e.coeff.re,
            im: e.coeff.im,
            magnitude: e.coeff.norm(),
        })
        .collect();
    let max_amp = amplitudes.iter().map(|a| a.magnitude).fold(0.0, f64::max);
    Ok(Certificate {
        version: CERTIFICATE_VERSION,
        path,
        grid: spectrum.grid_length(),
        declared_n: cfg.declared_n,
        plan,
        residue_sets,
        gated_pairs,
        crt,
        amplitudes,
        verification,
        tau: cfg.tau_rel * max_amp,
        escalations,
    })
}

fn build_id_views(
    source: &dyn SignalSource,
    plan: &ModuliPlan,
    ctx: &BuildContext<'_>,
    ops: &mut OpCounts,
) -> Result<Vec<ViewSpectrum>, ViewError> {
    let built = plan
        .id_views
        .par_iter()
        .map(|p| {
            let mut local = OpCounts::default();
            build_view(source, p, ctx, &mut local).map(|v| (v, local))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(built
        .into_iter()
        .map(|(v, local)| {
            *ops += local;
            v
        })
        .collect())
}

/// Moves one recovered frequency to the nearest unused neighbour.
fn corrupt(candidate: &SparseSpectrum) -> SparseSpectrum {
    let grid = candidate.grid_length();
    let Some(first) = candidate.entries().first() else {
        return candidate.clone();
    };
    let mut target = (first.f + 1) % grid;
    while candidate.get(target).is_some() && target != first.f {
        target = (target + 1) % grid;
    }
    SparseSpectrum::new(
        grid,
        candidate
            .entries()
            .iter()
            .map(|e| if e.f == first.f { (target, e.coeff) } else { (e.f, e.coeff) }),
    )
    .expect("moved entry stays distinct")
}

/// Recovers the `k` largest spectral components of `source`.
///
/// Every fast-path failure routes to the dense fallback; the only error is a
/// fallback whose grid exceeds `cfg.dense_cap`.
pub fn sparse_fft(source: &dyn SignalSource, k: usize, cfg: &Config, seed: u64) -> Result<RecoveryResult, PipelineError> {
    let mut run = Run {
        cfg,
        k,
        ops: OpCounts::default(),
        escalations: Vec::new(),
        plan: None,
        residue_sets: Vec::new(),
        verification: None,
    };
    if cfg.force_fallback {
        return run.fallback(source, "forced".into());
    }
    let n = source.original_length();
    let mut plan = match make_plan(n, k, cfg.verify_views, seed, cfg) {
        Ok(p) => p,
        Err(e) => return run.fallback(source, format!("no plan: {e}")),
    };
    let regridded;
    let work: &dyn SignalSource = if plan.grid == source.grid_length() {
        source
    } else if let Some(r) = Regridded::new(source, plan.grid) {
        regridded = r;
        &regridded
    } else {
        run.plan = Some(plan.clone());
        return run.fallback(
            source,
            format!("source grid {} differs from planned grid {}", source.grid_length(), plan.grid),
        );
    };

    let plans = PlanCache::default();
    let ctx = BuildContext {
        plans: &plans,
        mode: cfg.view_mode,
        k,
        depth: 0,
        max_depth: cfg.depth_limit(n),
        cfg,
    };
    let mut views = build_id_views(work, &plan, &ctx, &mut run.ops)?;
    let mut state = PeelState::with_relative_floor(views.clone(), plan.grid, cfg.noise_floor_rel);
    let mut outcome: PeelOutcome = run_peeling(&mut state, k, cfg, &mut run.ops);
    let mut anomaly = outcome.discarded > 0;
    let mut round = 0;
    while outcome.status != PeelStatus::Complete && round < cfg.max_rehash {
        round += 1;
        run.escalations.push(Escalation::Rehash { round, after: outcome.status });
        plan = rehash(&plan, round, cfg);
        views = build_id_views(work, &plan, &ctx, &mut run.ops)?;
        run.ops.peeling += state.reset_views(views.clone());
        outcome = run_peeling(&mut state, k, cfg, &mut run.ops);
        anomaly = true;
        anomaly |= outcome.discarded > 0;
    }
    let floor = state.floor();
    run.residue_sets = views
        .iter()
        .map(|v| extract_residues(v, cfg.coverage(k), floor))
        .collect();
    run.plan = Some(plan.clone());
    if outcome.status != PeelStatus::Complete {
        let reason = format!("peeling ended {:?} after {round} rehash rounds", outcome.status);
        return run.fallback(source, reason);
    }
    let mut candidate = outcome.recovered;
    if candidate.len() > 2 * k {
        let reason = format!("{} candidates exceed 2k = {}", candidate.len(), 2 * k);
        return run.fallback(source, reason);
    }
    if candidate.len() > k {
        candidate = candidate.top_k(k);
        anomaly = true;
    }
    if cfg.corrupt_candidate {
        candidate = corrupt(&candidate);
    }

    let mut report = verify(work, &plan, &candidate, cfg, &plans, &mut run.ops)?;
    if report.overall && anomaly && cfg.max_extra_verify_views > 0 {
        let t = plan.verify_views.len();
        let extra: Vec<_> = (t..t + cfg.max_extra_verify_views)
            .map(|v| verification_view(&plan, v, cfg.shifts))
            .collect();
        let more = verify_on(work, &extra, k, &candidate, cfg, cfg.verify_mode, &plans, &mut run.ops)?;
        run.escalations.push(Escalation::ExtraVerification {
            views: extra.len(),
            passed: more.overall,
        });
        report.overall &= more.overall;
        report.unverified = false;
        report.epsilon = report.epsilon.max(more.epsilon);
        report.views.extend(more.views);
        plan.verify_views.extend(extra);
        run.plan = Some(plan.clone());
    }
    let passed = report.overall;
    run.verification = Some(report);
    if !passed {
        return run.fallback(source, "verification failed".into());
    }
    run.finish(candidate, RecoveryPath::FastPath, Some(&views))
}

/// A failed certificate check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub record: String,
    pub message: String,
}

fn violation(record: String, message: impl Into<String>) -> Violation {
    Violation { record, message: message.into() }
}

/// Re-derives every certificate check from scratch against `source`.
pub fn verify_certificate(cert: &Certificate, source: &dyn SignalSource) -> Result<Vec<Violation>, CertificateError> {
    let regridded;
    let work: &dyn SignalSource = if cert.grid == source.grid_length() {
        source
    } else if let Some(r) = Regridded::new(source, cert.grid) {
        regridded = r;
        &regridded
    } else {
        return Err(CertificateError::GridMismatch { cert: cert.grid, signal: source.grid_length() });
    };
    let mut out = Vec::new();

    if let Some(plan) = &cert.plan {
        let members: HashSet<u64> = cert.residue_sets.get(2).map(|s| s.bins().collect()).unwrap_or_default();
        let m12 = plan.triple.m(0) * plan.triple.m(1);
        for g in &cert.gated_pairs {
            let name = format!("gated pair ({}, {})", g.r1, g.r2);
            match gate_one(g.r1, g.r2, &plan.triple, &plan.id_views) {
                Err(e) => out.push(violation(name, e.to_string())),
                Ok((f12, r3_hat)) if (f12, r3_hat) != (g.f12, g.r3_hat) => out.push(violation(
                    name,
                    format!("recorded f12 = {}, r3_hat = {}; recomputed {f12}, {r3_hat}", g.f12, g.r3_hat),
                )),
                Ok((_, r3_hat)) if members.contains(&r3_hat) != g.passed => {
                    out.push(violation(name, "recorded verdict disagrees with membership in R3"))
                }
                Ok(_) => {
                    if let Some(f) = g.f {
                        if f < m12 && !g.passed {
                            out.push(violation(name, format!("gate rejects recovered frequency {f}")));
                        }
                    }
                }
            }
        }
        for c in &cert.crt {
            let name = format!("crt f = {}", c.f);
            match plan.triple.garner3(c.residues[0], c.residues[1], c.residues[2]) {
                Err(e) => out.push(violation(name, e.to_string())),
                Ok(t) if (t.f, t.u2, t.u3) != (c.f, c.u2, c.u3) => out.push(violation(
                    name,
                    format!("garner gives f = {} (u2 = {}, u3 = {})", t.f, t.u2, t.u3),
                )),
                Ok(_) => {}
            }
        }
        let crt_fs: HashSet<u64> = cert.crt.iter().map(|c| c.f).collect();
        for a in &cert.amplitudes {
            if !crt_fs.contains(&a.f) {
                out.push(violation(format!("amplitude f = {}", a.f), "no CRT record"));
            }
        }
    }

    let fresh = fresh_view(cert, work)?;
    let tol = cert.amplitudes.iter().map(|a| a.magnitude).fold(1.0, f64::max) * 1e-6;
    for a in &cert.amplitudes {
        let name = format!("amplitude f = {}", a.f);
        if a.f >= cert.grid || cert.declared_n.is_some_and(|n| a.f >= n) {
            out.push(violation(name, "frequency outside the declared range"));
        } else if a.magnitude < cert.tau {
            out.push(violation(name, format!("|a| = {:e} below tau = {:e}", a.magnitude, cert.tau)));
        } else if let Some(view) = &fresh {
            let p = view.params();
            let bin = p.hash(a.f);
            let others: Complex64 = cert
                .amplitudes
                .iter()
                .filter(|o| o.f != a.f && p.hash(o.f) == bin)
                .map(|o| Complex64::new(o.re, o.im))
                .sum();
            let measured = view.value(bin, 0) - others;
            if (measured - Complex64::new(a.re, a.im)).norm() > tol {
                out.push(violation(name, format!("fresh view measures {measured}")));
            }
        }
    }
    Ok(out)
}

fn fresh_view(cert: &Certificate, source: &dyn SignalSource) -> Result<Option<ViewSpectrum>, ViewError> {
    let Some(plan) = &cert.plan else {
        return Ok(None);
    };
    let Some(params) = plan.verify_views.first().or(plan.id_views.first()) else {
        return Ok(None);
    };
    let params = crate::planner::ViewParams { shifts: vec![0], ..params.clone() };
    let cfg = Config::default();
    let ctx = BuildContext { mode: ViewMode::Dense, k: plan.k, depth: 0, max_depth: 0, cfg: &cfg, plans: &PlanCache::default() };
    build_view(source, &params, &ctx, &mut OpCounts::default()).map(Some)
}
