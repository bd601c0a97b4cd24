//! Decimated, dilated and shifted observations of a signal.
//!
//! View `(m, sigma, b)` at shift `s` reads
//! `y[j] = e^{2 pi i b j / m} x((sigma j d + s) mod M)` with `d = M / m`.
//! Its normalized spectrum `(1/m) DFT(y)[r]` is the alias sum of
//! `A_f e^{2 pi i f s / M}` over all `f` with `(a f + b) mod m = r`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ViewMode};
use crate::dft::{unit_phase, DftError, PlanCache};
use crate::ops::OpCounts;
use crate::peeling::recursive::recursive_spectrum;
use crate::planner::ViewParams;
use crate::signal::{SignalSource, SparseSpectrum};

#[derive(Debug, Error, PartialEq)]
pub enum ViewError {
    #[error("view modulus {m} does not divide the grid length {grid}")]
    StrideMismatch { m: u64, grid: u64 },
    #[error(transparent)]
    Dft(#[from] DftError),
}

/// The length-`m` sequence a view samples at one shift.
pub struct ViewSignal<'a> {
    source: &'a dyn SignalSource,
    m: u64,
    step: u64,
    shift: u64,
    b: u64,
}

impl<'a> ViewSignal<'a> {
    pub fn new(source: &'a dyn SignalSource, params: &ViewParams, shift: u64) -> Result<Self, ViewError> {
        let grid = source.grid_length();
        if params.m == 0 || !grid.is_multiple_of(params.m) {
            return Err(ViewError::StrideMismatch { m: params.m, grid });
        }
        let d = grid / params.m;
        let step = ((params.sigma as u128 * d as u128) % grid as u128) as u64;
        Ok(Self {
            source,
            m: params.m,
            step,
            shift: shift % grid,
            b: params.b % params.m,
        })
    }
}

impl SignalSource for ViewSignal<'_> {
    fn grid_length(&self) -> u64 {
        self.m
    }

    fn sample(&self, j: u64) -> Complex64 {
        let grid = self.source.grid_length() as u128;
        let j = j % self.m;
        let n = ((self.step as u128 * j as u128 + self.shift as u128) % grid) as u64;
        let x = self.source.sample(n);
        if self.b == 0 {
            x
        } else {
            x * unit_phase(self.b as u128 * j as u128, self.m as u128)
        }
    }
}

/// Per-shift normalized bin values of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSpectrum {
    params: ViewParams,
    bins: Vec<Vec<Complex64>>,
}

impl ViewSpectrum {
    pub fn from_bins(params: ViewParams, bins: Vec<Vec<Complex64>>) -> Self {
        debug_assert_eq!(bins.len(), params.shifts.len());
        Self { params, bins }
    }

    pub fn params(&self) -> &ViewParams {
        &self.params
    }

    pub fn m(&self) -> u64 {
        self.params.m
    }

    pub fn shift_count(&self) -> usize {
        self.bins.len()
    }

    pub fn value(&self, r: u64, s: usize) -> Complex64 {
        self.bins[s][r as usize]
    }

    pub fn shift(&self, s: usize) -> &[Complex64] {
        &self.bins[s]
    }

    pub(crate) fn sub(&mut self, r: u64, s: usize, z: Complex64) {
        self.bins[s][r as usize] -= z;
    }

    pub fn max_magnitude(&self) -> f64 {
        self.bins[0].iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Bins whose shift-0 magnitude exceeds `floor`.
    pub fn occupied(&self, floor: f64) -> Vec<u64> {
        (0..self.m()).filter(|&r| self.bins[0][r as usize].norm() > floor).collect()
    }

    /// `sum_r |Y(r, 0)|^2`.
    pub fn energy(&self) -> f64 {
        self.bins[0].iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Recursion bookkeeping shared by every view built for one problem.
#[derive(Debug, Clone, Copy)]
pub struct BuildContext<'a> {
    pub mode: ViewMode,
    pub k: usize,
    pub depth: u32,
    pub max_depth: u32,
    pub cfg: &'a Config,
    pub plans: &'a PlanCache,
}

/// Spectrum of one view signal, densely or through recursive sparse recovery.
pub fn view_shift_spectrum(
    signal: &ViewSignal<'_>,
    ctx: &BuildContext<'_>,
    ops: &mut OpCounts,
) -> Result<Vec<Complex64>, ViewError> {
    let m = signal.grid_length();
    match ctx.mode {
        ViewMode::Dense => dense_view_spectrum(signal, ctx.plans, ops),
        ViewMode::Recursive => {
            let sparse = recursive_spectrum(signal, ctx, ops)?;
            let mut out = vec![Complex64::new(0.0, 0.0); m as usize];
            for e in sparse.entries() {
                out[e.f as usize] = e.coeff;
            }
            Ok(out)
        }
    }
}

/// Materializes `m` samples and returns `(1/m) DFT(y)`.
pub fn dense_view_spectrum(
    signal: &dyn SignalSource,
    plans: &PlanCache,
    ops: &mut OpCounts,
) -> Result<Vec<Complex64>, ViewError> {
    let m = signal.grid_length();
    let (plan, setup) = plans.get(m as usize)?;
    let mut buf: Vec<Complex64> = (0..m).map(|j| signal.sample(j)).collect();
    plan.forward(&mut buf)?;
    let scale = 1.0 / m as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
    ops.samples_read += m;
    ops.views += setup + plan.op_cost() + 2 * m;
    Ok(buf)
}

/// Builds every shift of a view.
pub fn build_view(
    source: &dyn SignalSource,
    params: &ViewParams,
    ctx: &BuildContext<'_>,
    ops: &mut OpCounts,
) -> Result<ViewSpectrum, ViewError> {
    let bins = params
        .shifts
        .iter()
        .map(|&s| view_shift_spectrum(&ViewSignal::new(source, params, s)?, ctx, ops))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ViewSpectrum::from_bins(params.clone(), bins))
}

/// The view a spectrum induces, by direct alias summation.
pub fn alias_view(spectrum: &SparseSpectrum, params: &ViewParams) -> ViewSpectrum {
    let grid = spectrum.grid_length() as u128;
    let bins = params
        .shifts
        .iter()
        .map(|&s| {
            let mut row = vec![Complex64::new(0.0, 0.0); params.m as usize];
            for e in spectrum.entries() {
                let phase = unit_phase(e.f as u128 * (s as u128 % grid), grid);
                row[params.hash(e.f) as usize] += e.coeff * phase;
            }
            row
        })
        .collect();
    ViewSpectrum::from_bins(params.clone(), bins)
}

/// `sum_j |y0[j]|^2` from raw samples.
pub fn view_energy(source: &dyn SignalSource, params: &ViewParams, ops: &mut OpCounts) -> Result<f64, ViewError> {
    let signal = ViewSignal::new(source, params, 0)?;
    ops.samples_read += params.m;
    Ok((0..params.m).map(|j| signal.sample(j).norm_sqr()).sum())
}

/// Top residues of a view by shift-0 magnitude, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidueSet {
    pub residues: Vec<(u64, f64)>,
    pub capacity: usize,
}

impl ResidueSet {
    pub fn from_residues(residues: impl IntoIterator<Item = u64>) -> Self {
        let residues: Vec<(u64, f64)> = residues.into_iter().map(|r| (r, 1.0)).collect();
        let capacity = residues.len();
        Self { residues, capacity }
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn bins(&self) -> impl Iterator<Item = u64> + '_ {
        self.residues.iter().map(|r| r.0)
    }

    pub fn contains(&self, r: u64) -> bool {
        self.residues.iter().any(|x| x.0 == r)
    }
}

/// Residues with magnitude above `noise_floor`, the `alpha_k` largest, ties
/// broken by ascending index.
pub fn extract_residues(view: &ViewSpectrum, alpha_k: usize, noise_floor: f64) -> ResidueSet {
    let mut residues: Vec<(u64, f64)> = view.bins[0]
        .iter()
        .enumerate()
        .map(|(r, z)| (r as u64, z.norm()))
        .filter(|&(_, mag)| mag > noise_floor)
        .collect();
    residues.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    residues.truncate(alpha_k);
    ResidueSet {
        residues,
        capacity: alpha_k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::synthesize;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ctx(cfg: &Config, mode: ViewMode, k: usize) -> BuildContext<'_> {
        BuildContext { mode, k, depth: 0, max_depth: 4, cfg, plans: Box::leak(Box::default()) }
    }

    fn random_spectrum(grid: u64, k: usize, rng: &mut ChaCha8Rng) -> SparseSpectrum {
        let mut fs = std::collections::BTreeSet::new();
        while fs.len() < k {
            fs.insert(rng.gen_range(0..grid));
        }
        SparseSpectrum::new(
            grid,
            fs.into_iter().map(|f| (f, c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))),
        )
        .unwrap()
    }

    fn max_diff(a: &ViewSpectrum, b: &ViewSpectrum) -> f64 {
        (0..a.shift_count())
            .flat_map(|s| a.shift(s).iter().zip(b.shift(s)).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn single_tone_aliases_to_its_residue() {
        let cfg = Config::default();
        let src = synthesize(SparseSpectrum::new(1001, [(5, c(1.0, 0.0))]).unwrap());
        let v = build_view(&src, &ViewParams::identity(7, 3), &ctx(&cfg, ViewMode::Dense, 1), &mut OpCounts::default()).unwrap();
        for s in 0..3 {
            let expect = unit_phase(5 * s as u128, 1001);
            assert!((v.value(5, s) - expect).norm() < 1e-12);
            for r in (0..7).filter(|&r| r != 5) {
                assert!(v.value(r, s).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn worked_example_first_view_occupancy() {
        let cfg = Config::default();
        let src = synthesize(SparseSpectrum::new(1001, [(7, c(1.0, 0.0)), (41, c(1.0, 0.0))]).unwrap());
        let v = build_view(&src, &ViewParams::identity(7, 3), &ctx(&cfg, ViewMode::Dense, 2), &mut OpCounts::default()).unwrap();
        assert_eq!(v.occupied(1e-9), vec![0, 6]);
    }

    #[test]
    fn fft_path_matches_alias_sums_under_dilation() {
        let cfg = Config::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = random_spectrum(1001, 8, &mut rng);
        let src = synthesize(spec.clone());
        for (sigma, b) in [(1, 0), (2, 3), (500, 12), (997, 6)] {
            let params = ViewParams { m: 13, sigma, b, shifts: vec![0, 1, 2] };
            let built = build_view(&src, &params, &ctx(&cfg, ViewMode::Dense, 8), &mut OpCounts::default()).unwrap();
            assert!(max_diff(&built, &alias_view(&spec, &params)) < 1e-9, "sigma {sigma} b {b}");
        }
    }

    #[test]
    fn stride_must_divide_grid() {
        let cfg = Config::default();
        let src = synthesize(SparseSpectrum::empty(1001).unwrap());
        assert_eq!(
            build_view(&src, &ViewParams::identity(17, 2), &ctx(&cfg, ViewMode::Dense, 1), &mut OpCounts::default()),
            Err(ViewError::StrideMismatch { m: 17, grid: 1001 })
        );
    }

    #[test]
    fn residue_extraction() {
        let params = ViewParams::identity(7, 1);
        let bins = vec![vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)]];
        let v = ViewSpectrum::from_bins(params.clone(), bins);
        let set = extract_residues(&v, 9, 1e-9);
        assert_eq!(set.bins().collect::<Vec<_>>(), vec![0, 6, 3]);
        let zero = ViewSpectrum::from_bins(params.clone(), vec![vec![c(0.0, 0.0); 7]]);
        assert!(extract_residues(&zero, 4, 0.0).is_empty());
        let ties = ViewSpectrum::from_bins(
            params,
            vec![vec![c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(1.0, 0.0), c(0.0, 0.0)]],
        );
        let top = extract_residues(&ties, 3, 1e-9);
        assert_eq!(top.bins().collect::<Vec<_>>(), vec![1, 0, 2]);
        assert_eq!(top.capacity, 3);
    }

    #[test]
    fn energy_identities() {
        let cfg = Config::default();
        let mut ops = OpCounts::default();
        let params = ViewParams { m: 11, sigma: 3, b: 2, shifts: vec![0, 1, 2] };
        let zero = synthesize(SparseSpectrum::empty(1001).unwrap());
        assert_eq!(view_energy(&zero, &params, &mut ops).unwrap(), 0.0);
        let one = synthesize(SparseSpectrum::new(1001, [(40, c(3.0, 4.0))]).unwrap());
        assert!((view_energy(&one, &params, &mut ops).unwrap() - 11.0 * 25.0).abs() < 1e-9);
        let two = synthesize(SparseSpectrum::new(1001, [(40, c(3.0, 4.0)), (51, c(-1.0, 0.5))]).unwrap());
        let v = build_view(&two, &params, &ctx(&cfg, ViewMode::Dense, 2), &mut ops).unwrap();
        let e = view_energy(&two, &params, &mut ops).unwrap();
        assert!((e - 11.0 * v.energy()).abs() < 1e-9 * e);
    }

    #[test]
    fn recursive_mode_matches_dense_mode() {
        let cfg = Config::default();
        let grid = 2431 * 19 * 23;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = random_spectrum(grid, 1, &mut rng);
        let src = synthesize(spec.clone());
        let params = ViewParams { m: 2431, sigma: 2, b: 7, shifts: vec![0, 1, 2] };
        let mut dense_ops = OpCounts::default();
        let dense = build_view(&src, &params, &ctx(&cfg, ViewMode::Dense, 1), &mut dense_ops).unwrap();
        let mut rec_ops = OpCounts::default();
        let rec = build_view(&src, &params, &ctx(&cfg, ViewMode::Recursive, 1), &mut rec_ops).unwrap();
        assert!(max_diff(&dense, &rec) < 1e-9);
        assert!(rec_ops.samples_read < dense_ops.samples_read);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn alias_sum_and_sparsity(seed in any::<u64>(), k in 0usize..10, sigma_seed in any::<u64>(), b in 0u64..17) {
            let cfg = Config::default();
            let grid = 13 * 17 * 19;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = random_spectrum(grid, k, &mut rng);
            let src = synthesize(spec.clone());
            let mut sigma = sigma_seed % grid;
            while crate::numtheory::gcd(sigma, grid) != 1 {
                sigma += 1;
            }
            let params = ViewParams { m: 17, sigma, b, shifts: vec![0, 1, 2] };
            let v = build_view(&src, &params, &ctx(&cfg, ViewMode::Dense, k), &mut OpCounts::default()).unwrap();
            prop_assert!(max_diff(&v, &alias_view(&spec, &params)) < 1e-9);
            prop_assert!(v.occupied(1e-9).len() <= k);
            // singleton bins keep their magnitude across shifts
            let oracle = alias_view(&spec, &params);
            for e in spec.entries() {
                let r = params.hash(e.f);
                let alone = spec.entries().iter().filter(|o| params.hash(o.f) == r).count() == 1;
                if alone {
                    for s in 1..3 {
                        prop_assert!((v.value(r, s).norm() - oracle.value(r, 0).norm()).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
