//! Complex DFT engines: iterative radix-2 for powers of two, chirp-z
//! (Bluestein) for every other length, and a literal O(n^2) evaluator used
//! as the test oracle.
//!
//! Convention: the forward transform is unnormalized,
//! `X[f] = sum_n x[n] e^{-2 pi i f n / N}`; the inverse carries the `1/N`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use thiserror::Error;

pub const DEFAULT_ORACLE_CAP: usize = 8192;

/// Twiddles are generated by complex-multiply recurrence and re-anchored to
/// exact `sin`/`cos` every this many steps.
const TWIDDLE_REFRESH: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DftError {
    #[error("empty buffer")]
    Empty,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("length {len} exceeds the oracle cap {cap}")]
    OracleCapExceeded { len: usize, cap: usize },
    #[error("buffer length {got} does not match plan length {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// A non-empty buffer of finite complex values.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBuffer(Vec<Complex64>);

impl ComplexBuffer {
    pub fn new(values: Vec<Complex64>) -> Result<Self, DftError> {
        check_finite(&values)?;
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Result<Self, DftError> {
        Self::new(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }
}

impl AsRef<[Complex64]> for ComplexBuffer {
    fn as_ref(&self) -> &[Complex64] {
        &self.0
    }
}

pub fn check_finite(values: &[Complex64]) -> Result<(), DftError> {
    if values.is_empty() {
        return Err(DftError::Empty);
    }
    match values.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        Some(i) => Err(DftError::NonFinite(i)),
        None => Ok(()),
    }
}

/// `e^{2 pi i num / den}` with the ratio reduced exactly before it reaches
/// floating point.
#[inline]
pub fn unit_phase(num: u128, den: u128) -> Complex64 {
    let r = num % den;
    let theta = 2.0 * PI * (r as f64 / den as f64);
    Complex64::new(theta.cos(), theta.sin())
}

fn twiddle_table(n: usize, count: usize, sign: f64) -> Vec<Complex64> {
    let step = Complex64::from_polar(1.0, sign * 2.0 * PI / n as f64);
    let mut out = Vec::with_capacity(count);
    let mut w = Complex64::new(1.0, 0.0);
    for j in 0..count {
        if j % TWIDDLE_REFRESH == 0 {
            let theta = sign * 2.0 * PI * j as f64 / n as f64;
            w = Complex64::new(theta.cos(), theta.sin());
        }
        out.push(w);
        w *= step;
    }
    out
}

#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    log2n: u32,
    twiddles: Vec<Complex64>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        Self {
            n,
            log2n: n.trailing_zeros(),
            twiddles: twiddle_table(n, n / 2, -1.0),
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let n = self.n;
        if n <= 1 {
            return;
        }
        let shift = usize::BITS - self.log2n;
        for i in 0..n {
            let j = i.reverse_bits() >> shift;
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let w = self.twiddles[j * stride];
                    let u = buf[start + j];
                    let v = buf[start + j + half] * w;
                    buf[start + j] = u + v;
                    buf[start + j + half] = u - v;
                }
            }
            len <<= 1;
        }
    }

    fn cost(&self) -> u64 {
        (self.n as u64 / 2) * self.log2n as u64
    }
}

#[derive(Debug, Clone)]
struct Bluestein {
    n: usize,
    chirp: Vec<Complex64>,
    // FFT of the conjugate chirp filter, pre-scaled by 1/L
    filter: Vec<Complex64>,
    inner: Radix2,
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let len = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(len);
        // w_j = e^{-i pi j^2 / n}; j^2 reduced mod 2n keeps the angle small
        let two_n = 2 * n as u128;
        let chirp: Vec<Complex64> = (0..n)
            .map(|j| unit_phase(two_n - (j as u128 * j as u128) % two_n, two_n))
            .collect();
        let mut filter = vec![Complex64::new(0.0, 0.0); len];
        filter[0] = chirp[0].conj();
        for j in 1..n {
            filter[j] = chirp[j].conj();
            filter[len - j] = chirp[j].conj();
        }
        inner.forward(&mut filter);
        let scale = 1.0 / len as f64;
        for z in filter.iter_mut() {
            *z *= scale;
        }
        Self {
            n,
            chirp,
            filter,
            inner,
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let len = self.inner.n;
        let mut work = vec![Complex64::new(0.0, 0.0); len];
        for j in 0..self.n {
            work[j] = buf[j] * self.chirp[j];
        }
        self.inner.forward(&mut work);
        for (w, f) in work.iter_mut().zip(&self.filter) {
            *w = (*w * f).conj();
        }
        // inverse FFT as conj(FFT(conj(.))); the 1/L lives in `filter`
        self.inner.forward(&mut work);
        for k in 0..self.n {
            buf[k] = work[k].conj() * self.chirp[k];
        }
    }

    fn cost(&self) -> u64 {
        2 * self.inner.cost() + self.inner.n as u64 + 2 * self.n as u64
    }

    fn setup_cost(&self) -> u64 {
        self.inner.cost() + self.inner.n as u64
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Identity,
    Radix2(Radix2),
    Bluestein(Bluestein),
}

/// A reusable transform of one fixed length. Immutable after construction,
/// so it can be shared across threads.
#[derive(Debug, Clone)]
pub struct DftPlan {
    n: usize,
    engine: Engine,
}

impl DftPlan {
    pub fn new(n: usize) -> Result<Self, DftError> {
        let engine = match n {
            0 => return Err(DftError::Empty),
            1 => Engine::Identity,
            n if n.is_power_of_two() => Engine::Radix2(Radix2::new(n)),
            n => Engine::Bluestein(Bluestein::new(n)),
        };
        Ok(Self { n, engine })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_chirp_z(&self) -> bool {
        matches!(self.engine, Engine::Bluestein(_))
    }

    /// In-place unnormalized forward transform.
    pub fn forward(&self, buf: &mut [Complex64]) -> Result<(), DftError> {
        if buf.len() != self.n {
            return Err(DftError::LengthMismatch {
                expected: self.n,
                got: buf.len(),
            });
        }
        match &self.engine {
            Engine::Identity => {}
            Engine::Radix2(r) => r.forward(buf),
            Engine::Bluestein(b) => b.forward(buf),
        }
        Ok(())
    }

    /// In-place inverse transform including the `1/N` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) -> Result<(), DftError> {
        for z in buf.iter_mut() {
            *z = z.conj();
        }
        self.forward(buf)?;
        let scale = 1.0 / self.n as f64;
        for z in buf.iter_mut() {
            *z = z.conj() * scale;
        }
        Ok(())
    }

    /// Complex multiply-adds per transform.
    pub fn op_cost(&self) -> u64 {
        match &self.engine {
            Engine::Identity => 0,
            Engine::Radix2(r) => r.cost(),
            Engine::Bluestein(b) => b.cost(),
        }
    }

    /// Complex multiply-adds spent building the plan.
    pub fn setup_cost(&self) -> u64 {
        match &self.engine {
            Engine::Bluestein(b) => b.setup_cost(),
            _ => 0,
        }
    }
}

/// Plans shared by length within one run. Setup is charged only to the
/// call that builds a length first.
#[derive(Debug, Default)]
pub struct PlanCache {
    plans: Mutex<HashMap<usize, Arc<DftPlan>>>,
}

impl PlanCache {
    /// The plan for length `n` and the setup cost this call incurred.
    pub fn get(&self, n: usize) -> Result<(Arc<DftPlan>, u64), DftError> {
        let mut plans = self.plans.lock().expect("plan cache lock");
        if let Some(plan) = plans.get(&n) {
            return Ok((Arc::clone(plan), 0));
        }
        let plan = Arc::new(DftPlan::new(n)?);
        let setup = plan.setup_cost();
        plans.insert(n, Arc::clone(&plan));
        Ok((plan, setup))
    }
}

/// Op count a fresh plan of length `n` would report for one transform,
/// setup included, without allocating it.
pub fn transform_cost(n: usize) -> u64 {
    if n <= 1 {
        return 0;
    }
    let radix2 = |m: usize| (m as u64 / 2) * m.trailing_zeros() as u64;
    if n.is_power_of_two() {
        radix2(n)
    } else {
        let len = (2 * n - 1).next_power_of_two();
        3 * radix2(len) + 2 * len as u64 + 2 * n as u64
    }
}

pub fn dft_forward(input: &ComplexBuffer) -> Result<ComplexBuffer, DftError> {
    let mut out = input.as_slice().to_vec();
    DftPlan::new(out.len())?.forward(&mut out)?;
    Ok(ComplexBuffer(out))
}

pub fn dft_inverse(input: &ComplexBuffer) -> Result<ComplexBuffer, DftError> {
    let mut out = input.as_slice().to_vec();
    DftPlan::new(out.len())?.inverse(&mut out)?;
    Ok(ComplexBuffer(out))
}

/// Literal evaluation of the DFT sum with exactly reduced phases.
pub fn dft_direct(input: &ComplexBuffer, cap: usize) -> Result<ComplexBuffer, DftError> {
    let n = input.len();
    if n > cap {
        return Err(DftError::OracleCapExceeded { len: n, cap });
    }
    let x = input.as_slice();
    let nn = n as u128;
    let out = (0..n)
        .map(|f| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| v * unit_phase(nn - (f as u128 * t as u128) % nn, nn))
                .sum()
        })
        .collect();
    Ok(ComplexBuffer(out))
}
