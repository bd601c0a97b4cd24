//! Regime classification, moduli selection and per-view hash parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ModuliKind};
use crate::numtheory::{find_coprime_moduli, gcd, mod_inverse, ModTriple, NumError};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("dense regime (rho = {rho:.3}): no fast-path plan")]
    DenseRegime { rho: f64 },
    #[error("signal length must be at least 4, got {0}")]
    TooShort(u64),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("moduli product {product} is below the signal length {n}")]
    ProductTooSmall { product: u64, n: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Sparse,
    Moderate,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub rho: f64,
    pub regime: Regime,
    pub alpha: f64,
    pub lambda_threshold: f64,
}

/// Classifies `rho = k / sqrt(N)` against the configured thresholds.
pub fn classify_regime(n: u64, k: usize, cfg: &Config) -> RegimeParams {
    let rho = k as f64 / (n as f64).sqrt();
    let regime = if rho < cfg.sparse_rho_max {
        Regime::Sparse
    } else if rho < cfg.moderate_rho_max {
        Regime::Moderate
    } else {
        Regime::Dense
    };
    RegimeParams {
        rho,
        regime,
        alpha: cfg.alpha,
        lambda_threshold: cfg.lambda_threshold,
    }
}

/// One decimated view: modulus `m`, dilation `sigma`, offset `b` and the
/// time shifts at which the view is sampled.
///
/// Frequency `f` lands in bin `(a * f + b) mod m` with `a = sigma mod m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewParams {
    pub m: u64,
    pub sigma: u64,
    pub b: u64,
    pub shifts: Vec<u64>,
}

impl ViewParams {
    pub fn identity(m: u64, shift_count: usize) -> Self {
        Self {
            m,
            sigma: 1,
            b: 0,
            shifts: (0..shift_count as u64).collect(),
        }
    }

    pub fn a(&self) -> u64 {
        self.sigma % self.m
    }

    pub fn hash(&self, f: u64) -> u64 {
        ((self.a() as u128 * (f % self.m) as u128 + self.b as u128) % self.m as u128) as u64
    }

    /// Frequency residue `f mod m` of the frequencies landing in `bin`.
    pub fn unhash(&self, bin: u64) -> Result<u64, NumError> {
        let inv = mod_inverse(self.a(), self.m)?;
        let shifted = (bin % self.m + self.m - self.b % self.m) % self.m;
        Ok(((inv as u128 * shifted as u128) % self.m as u128) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuliPlan {
    /// Nominal signal length.
    pub n: u64,
    pub k: usize,
    /// Grid length `M = m1 * m2 * m3`.
    pub grid: u64,
    pub seed: u64,
    pub triple: ModTriple,
    pub id_views: Vec<ViewParams>,
    pub verify_views: Vec<ViewParams>,
    pub regime: RegimeParams,
    /// Number of rehashes applied to the identification views.
    pub rehash_round: u32,
}

/// Builds the plan for an `N`-sample, `k`-sparse problem with `t`
/// verification views.
pub fn make_plan(n: u64, k: usize, t: usize, seed: u64, cfg: &Config) -> Result<ModuliPlan, PlanError> {
    if n < 4 {
        return Err(PlanError::TooShort(n));
    }
    let regime = classify_regime(n, k, cfg);
    if regime.regime == Regime::Dense {
        return Err(PlanError::DenseRegime { rho: regime.rho });
    }
    let triple = match &cfg.moduli {
        Some(m) => ModTriple::new(m[0], m[1], m[2])?,
        None => select_moduli(n, k, regime.regime, cfg)?,
    };
    let grid = triple.product();
    if grid < n {
        return Err(PlanError::ProductTooSmall { product: grid, n });
    }
    let mut plan = ModuliPlan {
        n,
        k,
        grid,
        seed,
        triple,
        id_views: Vec::new(),
        verify_views: Vec::new(),
        regime,
        rehash_round: 0,
    };
    plan.id_views = identification_views(&plan, 0, cfg);
    plan.verify_views = (0..t).map(|v| verification_view(&plan, v, cfg.shifts)).collect();
    Ok(plan)
}

/// The grid `make_plan` would choose, without drawing any hash parameters.
pub fn planned_grid(n: u64, k: usize, cfg: &Config) -> Result<u64, PlanError> {
    make_plan(n, k, 0, 0, cfg).map(|p| p.grid)
}

fn ceil_sqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// Modulus target for the regime: `sqrt(N)` raised so the load stays under
/// the threshold, or `10 k log2 k` in the moderate regime.
pub fn modulus_target(n: u64, k: usize, regime: Regime, cfg: &Config) -> u64 {
    let root = ceil_sqrt(n);
    let load_floor = (k as f64 / cfg.lambda_threshold).ceil() as u64;
    match regime {
        Regime::Moderate => {
            let kf = k.max(2) as f64;
            root.max((10.0 * kf * kf.log2()).ceil() as u64)
        }
        _ => root.max(load_floor),
    }
}

fn select_moduli(n: u64, k: usize, regime: Regime, cfg: &Config) -> Result<ModTriple, PlanError> {
    match cfg.moduli_kind {
        ModuliKind::Prime => {
            let target = modulus_target(n, k, regime, cfg);
            let p = find_coprime_moduli(target, 3, n as u128, &[])?;
            Ok(ModTriple::new(p[0], p[1], p[2])?)
        }
        ModuliKind::Composite => {
            let root9 = (n as f64).powf(1.0 / 9.0).ceil() as u64;
            let load_floor = (k as f64 / cfg.lambda_threshold).ceil() as u64;
            let mut target = root9.max(load_floor).max(2);
            while !crate::numtheory::is_prime(target) {
                target += 1;
            }
            let p = find_coprime_moduli(target, 9, n as u128, &[])?;
            let group = |i: usize| -> Result<u64, PlanError> {
                p[i].checked_mul(p[i + 3])
                    .and_then(|x| x.checked_mul(p[i + 6]))
                    .ok_or(PlanError::Num(NumError::Overflow))
            };
            Ok(ModTriple::new(group(0)?, group(1)?, group(2)?)?)
        }
    }
}

/// Uniform dilation in `[1, M)` with `gcd(sigma, M) = 1`.
fn draw_sigma(stream: &mut rng::Stream, grid: u64) -> u64 {
    if grid <= 2 {
        return 1;
    }
    loop {
        let s = stream.gen_range(1..grid);
        if gcd(s, grid) == 1 {
            return s;
        }
    }
}

fn identification_views(plan: &ModuliPlan, round: u32, cfg: &Config) -> Vec<ViewParams> {
    (0..3)
        .map(|i| {
            let m = plan.triple.m(i);
            if cfg.identity_hash && round == 0 {
                return ViewParams::identity(m, cfg.shifts);
            }
            let label = if round == 0 {
                format!("id-view-{i}")
            } else {
                format!("id-view-{i}-rehash-{round}")
            };
            let mut s = rng::stream(plan.seed, &label);
            let sigma = draw_sigma(&mut s, plan.grid);
            let b = s.gen_range(0..m);
            ViewParams {
                m,
                sigma,
                b,
                shifts: (0..cfg.shifts as u64).collect(),
            }
        })
        .collect()
}

/// Verification view `v`: modulus `m_{v mod 3}`, fresh dilation, offset and
/// shifts from its own labeled stream.
pub fn verification_view(plan: &ModuliPlan, v: usize, shift_count: usize) -> ViewParams {
    let m = plan.triple.m(v % 3);
    let mut s = rng::stream(plan.seed, &format!("verify-view-{v}"));
    let sigma = draw_sigma(&mut s, plan.grid);
    let b = s.gen_range(0..m);
    let mut shifts = vec![0];
    while shifts.len() < shift_count {
        let x = if plan.grid > 1 { s.gen_range(1..plan.grid) } else { 0 };
        if !shifts.contains(&x) {
            shifts.push(x);
        }
        if plan.grid <= shift_count as u64 {
            break;
        }
    }
    ViewParams { m, sigma, b, shifts }
}

/// Fresh identification hashes for the same moduli.
pub fn rehash(plan: &ModuliPlan, round: u32, cfg: &Config) -> ModuliPlan {
    let mut next = plan.clone();
    next.rehash_round = round;
    next.id_views = identification_views(plan, round, cfg);
    next
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanViolation {
    NotCoprime { a: u64, b: u64 },
    ProductTooSmall { product: u64, n: u64 },
    GridMismatch { grid: u64, product: u64 },
    StrideMismatch { view: String, m: u64 },
    NotInvertible { view: String, sigma: u64 },
    OffsetOutOfRange { view: String, b: u64 },
    BadShifts { view: String },
}

/// Lists every broken plan invariant; empty means the plan is valid.
pub fn validate_plan(plan: &ModuliPlan) -> Vec<PlanViolation> {
    let mut out = Vec::new();
    let ids: Vec<u64> = plan.id_views.iter().map(|v| v.m).collect();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            if gcd(ids[i], ids[j]) != 1 {
                out.push(PlanViolation::NotCoprime { a: ids[i], b: ids[j] });
            }
        }
    }
    let product = ids
        .iter()
        .try_fold(1u64, |acc, &m| acc.checked_mul(m))
        .unwrap_or(u64::MAX);
    if product < plan.n {
        out.push(PlanViolation::ProductTooSmall { product, n: plan.n });
    }
    if product != plan.grid {
        out.push(PlanViolation::GridMismatch { grid: plan.grid, product });
    }
    let labeled = plan
        .id_views
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("id-{i}"), v))
        .chain(plan.verify_views.iter().enumerate().map(|(i, v)| (format!("verify-{i}"), v)));
    for (name, v) in labeled {
        if v.m < 2 || !plan.grid.is_multiple_of(v.m) {
            out.push(PlanViolation::StrideMismatch { view: name.clone(), m: v.m });
        }
        if gcd(v.sigma, plan.grid) != 1 {
            out.push(PlanViolation::NotInvertible { view: name.clone(), sigma: v.sigma });
        }
        if v.b >= v.m {
            out.push(PlanViolation::OffsetOutOfRange { view: name.clone(), b: v.b });
        }
        if v.shifts.first() != Some(&0) {
            out.push(PlanViolation::BadShifts { view: name });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_config() -> Config {
        Config {
            moduli: Some(vec![7, 11, 13]),
            identity_hash: true,
            ..Config::default()
        }
    }

    #[test]
    fn regime_examples() {
        let cfg = Config::default();
        let r = classify_regime(1_000_000, 50, &cfg);
        assert!((r.rho - 0.05).abs() < 1e-12);
        assert_eq!(r.regime, Regime::Sparse);
        let r = classify_regime(64, 2, &cfg);
        assert_eq!(r.rho, 0.25);
        assert_eq!(r.regime, Regime::Sparse);
        assert_eq!(classify_regime(100, 6, &cfg).regime, Regime::Dense);
        assert_eq!(classify_regime(100, 4, &cfg).regime, Regime::Moderate);
        assert_eq!(
            make_plan(100, 6, 3, 1, &cfg),
            Err(PlanError::DenseRegime { rho: 0.6 })
        );
    }

    #[test]
    fn toy_override_plan() {
        let plan = make_plan(64, 2, 0, 9, &toy_config()).unwrap();
        assert_eq!(plan.grid, 1001);
        assert_eq!(plan.triple.moduli(), [7, 11, 13]);
        for v in &plan.id_views {
            assert_eq!((v.sigma, v.b), (1, 0));
            assert_eq!(v.shifts, vec![0, 1, 2]);
        }
        assert!(validate_plan(&plan).is_empty());
    }

    #[test]
    fn sparse_plan_near_sqrt_n() {
        let plan = make_plan(1 << 20, 20, 3, 5, &Config::default()).unwrap();
        assert_eq!(plan.triple.moduli(), [1021, 1031, 1033]);
        assert_eq!(plan.grid, 1021 * 1031 * 1033);
        assert_eq!(plan.verify_views.len(), 3);
        assert!(validate_plan(&plan).is_empty());
    }

    #[test]
    fn moderate_plan_uses_load_target() {
        let cfg = Config::default();
        assert_eq!(classify_regime(1_000_000, 400, &cfg).regime, Regime::Moderate);
        let target = modulus_target(1_000_000, 200, Regime::Moderate, &cfg);
        assert_eq!(target, (10.0 * 200.0 * 200f64.log2()).ceil() as u64);
        assert_eq!(target, 15288);
        let plan = make_plan(1_000_000, 400, 0, 1, &cfg).unwrap();
        let m = *plan.triple.moduli().iter().min().unwrap() as f64;
        let bound = 1.0 / (10.0 * 400f64.log2()) * 1.05;
        assert!(400.0 / m <= bound, "load {} bound {bound}", 400.0 / m);
    }

    #[test]
    fn composite_plan_groups_nine_primes() {
        let cfg = Config {
            moduli_kind: ModuliKind::Composite,
            ..Config::default()
        };
        let plan = make_plan(1 << 20, 2, 0, 3, &cfg).unwrap();
        for m in plan.triple.moduli() {
            assert_eq!(crate::numtheory::coprime_divisor_capacity(m), 3);
            assert!(2.0 / crate::numtheory::factorize(m)[0].0 as f64 <= 0.1);
        }
        assert!(plan.grid >= 1 << 20);
        assert!(validate_plan(&plan).is_empty());
    }

    #[test]
    fn validation_reports_each_violation() {
        let mut plan = make_plan(64, 2, 0, 9, &toy_config()).unwrap();
        plan.id_views[1].m = 7;
        assert!(validate_plan(&plan).contains(&PlanViolation::NotCoprime { a: 7, b: 7 }));
        let mut plan = make_plan(64, 2, 0, 9, &toy_config()).unwrap();
        plan.n = 2000;
        assert_eq!(
            validate_plan(&plan),
            vec![PlanViolation::ProductTooSmall { product: 1001, n: 2000 }]
        );
        assert_eq!(
            make_plan(2000, 2, 0, 9, &toy_config()),
            Err(PlanError::ProductTooSmall { product: 1001, n: 2000 })
        );
    }

    #[test]
    fn hash_round_trips_through_unhash() {
        let v = ViewParams { m: 13, sigma: 5 * 13 + 4, b: 9, shifts: vec![0, 1, 2] };
        for f in 0..200u64 {
            assert_eq!(v.unhash(v.hash(f)).unwrap(), f % 13);
        }
    }

    #[test]
    fn rehash_keeps_moduli_and_is_deterministic() {
        let cfg = Config::default();
        let plan = make_plan(1 << 16, 10, 3, 42, &cfg).unwrap();
        let a = rehash(&plan, 1, &cfg);
        let b = rehash(&plan, 1, &cfg);
        assert_eq!(a, b);
        assert_ne!(a.id_views, plan.id_views);
        assert_eq!(a.triple, plan.triple);
        assert_eq!(a.verify_views, plan.verify_views);
        assert!(validate_plan(&a).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn plans_are_deterministic(n in 64u64..1 << 30, k in 0usize..8, seed in any::<u64>()) {
            let cfg = Config::default();
            let a = make_plan(n, k, 3, seed, &cfg);
            let b = make_plan(n, k, 3, seed, &cfg);
            prop_assert_eq!(&a, &b);
            if let Ok(p) = a {
                prop_assert!(validate_plan(&p).is_empty());
            }
        }

        #[test]
        fn verification_count_does_not_touch_identification(n in 64u64..1 << 30, seed in any::<u64>(), t in 0usize..6) {
            let cfg = Config::default();
            let base = make_plan(n, 3, 0, seed, &cfg).unwrap();
            let more = make_plan(n, 3, t, seed, &cfg).unwrap();
            prop_assert_eq!(&base.id_views, &more.id_views);
            let fewer = make_plan(n, 3, t.saturating_sub(1), seed, &cfg).unwrap();
            prop_assert_eq!(&fewer.verify_views[..], &more.verify_views[..fewer.verify_views.len()]);
        }
    }
}
