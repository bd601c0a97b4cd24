//! Fast path versus dense transform on the same synthesized instance.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::dft::{transform_cost, DftError, DftPlan};
use crate::montecarlo::random_spectrum;
use crate::pipeline::{sparse_fft, PipelineError, RecoveryPath};
use crate::planner::{planned_grid, PlanError};
use crate::rng;
use crate::signal::{synthesize, SignalSource};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Dft(#[from] DftError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Largest length for which the dense comparator is actually executed;
/// longer rows report the closed-form cost instead.
pub const DENSE_RUN_CAP: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: u64,
    pub k: usize,
    pub t: usize,
    pub grid: u64,
    /// `fast_path`, `fallback` or `dense-only`.
    pub status: String,
    pub fast_ident_ops: u64,
    pub fast_total_ops: u64,
    pub dense_ops: u64,
    /// `measured` when the length-`n` transform ran, `estimated` otherwise.
    pub dense_source: String,
    pub ratio: f64,
    pub samples_read: u64,
    pub fast_wall_ms: Option<f64>,
    pub dense_wall_ms: Option<f64>,
}

pub const CSV_HEADER: &str =
    "n,k,t,grid,status,fast_ident_ops,fast_total_ops,dense_ops,dense_source,ratio,samples_read,fast_wall_ms,dense_wall_ms";

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("rows serialize");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8");
    format!("{CSV_HEADER}\n{body}")
}

/// Dense comparator: one length-`n` transform of the first `n` samples.
/// Cost is the transform plus one read and one scale per sample.
fn dense_cost(source: &dyn SignalSource, n: u64, run: bool) -> Result<(u64, bool, Option<f64>), DftError> {
    let closed = transform_cost(n as usize) + 2 * n;
    if !run || n > DENSE_RUN_CAP {
        return Ok((closed, false, None));
    }
    let start = Instant::now();
    let plan = DftPlan::new(n as usize)?;
    let mut buf: Vec<Complex64> = (0..n).map(|i| source.sample(i)).collect();
    plan.forward(&mut buf)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((plan.setup_cost() + plan.op_cost() + 2 * n, true, Some(ms)))
}

/// One benchmark cell. Frequencies are drawn on the planned grid with the
/// stream labelled by the cell, so a cell is reproducible in isolation.
pub fn bench_cell(n: u64, k: usize, t: usize, cfg: &Config, seed: u64, wall_time: bool) -> Result<BenchRow, BenchError> {
    let cfg = Config { verify_views: t, ..cfg.clone() };
    let mut row = BenchRow {
        n,
        k,
        t,
        grid: n,
        status: "dense-only".into(),
        fast_ident_ops: 0,
        fast_total_ops: 0,
        dense_ops: 0,
        dense_source: String::new(),
        ratio: 0.0,
        samples_read: 0,
        fast_wall_ms: None,
        dense_wall_ms: None,
    };
    let grid = match planned_grid(n, k, &cfg) {
        Ok(g) => g,
        Err(PlanError::DenseRegime { .. } | PlanError::TooShort(_)) => {
            row.dense_ops = transform_cost(n as usize) + 2 * n;
            row.dense_source = "estimated".into();
            return Ok(row);
        }
        Err(e) => return Err(e.into()),
    };
    let mut s = rng::stream(seed, &format!("bench-n{n}-k{k}"));
    let spec = random_spectrum(grid, grid, k, &mut s);
    let source = synthesize(spec).with_nominal_length(n);

    let start = Instant::now();
    let result = sparse_fft(&source, k, &cfg, seed)?;
    let fast_ms = start.elapsed().as_secs_f64() * 1e3;
    let (dense_ops, measured, dense_ms) = dense_cost(&source, n, wall_time)?;

    row.grid = grid;
    row.status = match result.path {
        RecoveryPath::FastPath => "fast_path",
        RecoveryPath::Fallback => "fallback",
    }
    .into();
    row.fast_ident_ops = result.op_counts.identification();
    row.fast_total_ops = result.op_counts.total;
    row.dense_ops = dense_ops;
    row.dense_source = if measured { "measured" } else { "estimated" }.into();
    row.ratio = dense_ops as f64 / result.op_counts.total.max(1) as f64;
    row.samples_read = result.op_counts.samples_read;
    if wall_time {
        row.fast_wall_ms = Some(fast_ms);
        row.dense_wall_ms = dense_ms;
    }
    Ok(row)
}

/// Every `(n, k)` cell in row-major order.
pub fn bench(ns: &[u64], ks: &[usize], t: usize, cfg: &Config, seed: u64, wall_time: bool) -> Result<Vec<BenchRow>, BenchError> {
    let mut rows = Vec::new();
    for &n in ns {
        for &k in ks {
            rows.push(bench_cell(n, k, t, cfg, seed, wall_time)?);
        }
    }
    Ok(rows)
}
