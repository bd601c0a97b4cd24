//! Exact integer arithmetic: Euclid, inverses, primality, Garner CRT and
//! moduli search.
//!
//! Residues and moduli are `u64`; every product that can leave that range is
//! formed in `u128` and checked before narrowing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumError {
    #[error("{a} and {m} are not coprime")]
    NotCoprime { a: u64, m: u64 },
    #[error("modulus must be at least 2, got {0}")]
    BadModulus(u64),
    #[error("residue {r} out of range for modulus {m}")]
    ResidueOutOfRange { r: u64, m: u64 },
    #[error("product of moduli overflows 64 bits")]
    Overflow,
    #[error("no qualifying moduli within radius {radius} of {target}")]
    SearchExhausted { target: u64, radius: u64 },
    #[error("egcd(0, 0) is undefined")]
    ZeroGcd,
}

/// Extended Euclid: returns `(g, x, y)` with `a*x + b*y = g = gcd(a, b) >= 0`.
pub fn egcd(a: i128, b: i128) -> Result<(i128, i128, i128), NumError> {
    if a == 0 && b == 0 {
        return Err(NumError::ZeroGcd);
    }
    let (mut old_r, mut r) = (a, b);
    let (mut old_x, mut x) = (1i128, 0i128);
    let (mut old_y, mut y) = (0i128, 1i128);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_x, x) = (x, old_x - q * x);
        (old_y, y) = (y, old_y - q * y);
    }
    if old_r < 0 {
        old_r = -old_r;
        old_x = -old_x;
        old_y = -old_y;
    }
    Ok((old_r, old_x, old_y))
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
pub fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 + b as u128) % m as u128) as u64
}

/// `(a - b) mod m` normalized into `[0, m)`, for `a, b < m`.
#[inline]
pub fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        m - (b - a)
    }
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m`, in `[1, m)` (or `0` when `m == 1` is rejected).
pub fn mod_inverse(a: u64, m: u64) -> Result<u64, NumError> {
    if m < 2 {
        return Err(NumError::BadModulus(m));
    }
    let (g, x, _) = egcd((a % m) as i128, m as i128)?;
    if g != 1 {
        return Err(NumError::NotCoprime { a, m });
    }
    Ok(x.rem_euclid(m as i128) as u64)
}

// Bases valid for every n < 2^64 (Jaeschke / Sorenson-Webster bound).
const MR_BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic Miller-Rabin for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MR_BASES {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &MR_BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Two-modulus Garner: the unique `f` in `[0, m1*m2)` with `f = r1 (mod m1)`
/// and `f = r2 (mod m2)`.
pub fn garner2(r1: u64, r2: u64, m1: u64, m2: u64) -> Result<u64, NumError> {
    check_residue(r1, m1)?;
    check_residue(r2, m2)?;
    let gamma = mod_inverse(m1 % m2, m2).map_err(|_| NumError::NotCoprime { a: m1, m: m2 })?;
    let prod = (m1 as u128)
        .checked_mul(m2 as u128)
        .filter(|p| *p <= u64::MAX as u128)
        .ok_or(NumError::Overflow)?;
    let u2 = mul_mod(sub_mod(r2, r1 % m2, m2), gamma, m2);
    let f = r1 as u128 + m1 as u128 * u2 as u128;
    debug_assert!(f < prod);
    Ok(f as u64)
}

fn check_residue(r: u64, m: u64) -> Result<(), NumError> {
    if m < 2 {
        return Err(NumError::BadModulus(m));
    }
    if r >= m {
        return Err(NumError::ResidueOutOfRange { r, m });
    }
    Ok(())
}

/// Three pairwise-coprime moduli with their precomputed Garner constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[u64; 3]", into = "[u64; 3]")]
pub struct ModTriple {
    moduli: [u64; 3],
    gamma12: u64,
    gamma23: u64,
    product: u64,
}

/// Intermediate values of one Garner reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GarnerTrace {
    pub u2: u64,
    pub u3: u64,
    pub f: u64,
}

impl ModTriple {
    pub fn new(m1: u64, m2: u64, m3: u64) -> Result<Self, NumError> {
        for m in [m1, m2, m3] {
            if m < 2 {
                return Err(NumError::BadModulus(m));
            }
        }
        for (a, b) in [(m1, m2), (m1, m3), (m2, m3)] {
            if gcd(a, b) != 1 {
                return Err(NumError::NotCoprime { a, m: b });
            }
        }
        let m12 = m1.checked_mul(m2).ok_or(NumError::Overflow)?;
        let product = m12.checked_mul(m3).ok_or(NumError::Overflow)?;
        let gamma12 = mod_inverse(m1 % m2, m2)?;
        let gamma23 = mod_inverse(m12 % m3, m3)?;
        Ok(Self {
            moduli: [m1, m2, m3],
            gamma12,
            gamma23,
            product,
        })
    }

    pub fn moduli(&self) -> [u64; 3] {
        self.moduli
    }

    pub fn m(&self, i: usize) -> u64 {
        self.moduli[i]
    }

    pub fn gamma12(&self) -> u64 {
        self.gamma12
    }

    pub fn gamma23(&self) -> u64 {
        self.gamma23
    }

    /// `M = m1 * m2 * m3`.
    pub fn product(&self) -> u64 {
        self.product
    }

    pub fn residues(&self, f: u64) -> [u64; 3] {
        self.moduli.map(|m| f % m)
    }

    /// Two-view reconstruction on the first two moduli, using the cached inverse.
    pub fn garner12(&self, r1: u64, r2: u64) -> Result<u64, NumError> {
        let [m1, m2, _] = self.moduli;
        check_residue(r1, m1)?;
        check_residue(r2, m2)?;
        let u2 = mul_mod(sub_mod(r2, r1 % m2, m2), self.gamma12, m2);
        Ok(r1 + m1 * u2)
    }

    /// Full three-view Garner reconstruction with its intermediates.
    pub fn garner3(&self, r1: u64, r2: u64, r3: u64) -> Result<GarnerTrace, NumError> {
        let [m1, m2, m3] = self.moduli;
        check_residue(r3, m3)?;
        let f12 = self.garner12(r1, r2)?;
        let u2 = (f12 - r1) / m1;
        let u3 = mul_mod(sub_mod(r3, f12 % m3, m3), self.gamma23, m3);
        let f = f12 + m1 * m2 * u3;
        Ok(GarnerTrace { u2, u3, f })
    }
}

impl TryFrom<[u64; 3]> for ModTriple {
    type Error = NumError;

    fn try_from(m: [u64; 3]) -> Result<Self, Self::Error> {
        ModTriple::new(m[0], m[1], m[2])
    }
}

impl From<ModTriple> for [u64; 3] {
    fn from(t: ModTriple) -> Self {
        t.moduli
    }
}

/// Picks `count` pairwise-coprime primes around `target`.
///
/// The window starts at the largest prime `<= target` and extends through
/// the following primes, skipping anything in (or sharing a factor with)
/// `exclusions`. If the window's product is below `min_product` it slides
/// upward. Candidates beyond `11 * target` exhaust the search.
pub fn find_coprime_moduli(
    target: u64,
    count: usize,
    min_product: u128,
    exclusions: &[u64],
) -> Result<Vec<u64>, NumError> {
    let radius = target.saturating_mul(10);
    let limit = target.saturating_add(radius);
    let exhausted = NumError::SearchExhausted { target, radius };
    if target < 2 || count == 0 {
        return Err(exhausted);
    }
    let admissible = |p: u64| is_prime(p) && exclusions.iter().all(|&e| e != p && gcd(e, p) == 1);

    let mut start = target;
    while start >= 2 && !admissible(start) {
        start -= 1;
    }
    if start < 2 {
        start = target + 1;
        while !admissible(start) {
            start += 1;
            if start > limit {
                return Err(exhausted);
            }
        }
    }

    let mut window = vec![start];
    let mut next = start + 1;
    let mut push_next = |window: &mut Vec<u64>| -> Result<(), NumError> {
        while !admissible(next) {
            next += 1;
            if next > limit {
                return Err(NumError::SearchExhausted { target, radius });
            }
        }
        window.push(next);
        next += 1;
        Ok(())
    };
    while window.len() < count {
        push_next(&mut window)?;
    }
    loop {
        let product = window
            .iter()
            .try_fold(1u128, |acc, &m| acc.checked_mul(m as u128))
            .unwrap_or(u128::MAX);
        if product >= min_product {
            return Ok(window);
        }
        window.remove(0);
        push_next(&mut window)?;
    }
}

/// Distinct prime factors of `n` with multiplicities, by trial division.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Maximum number of pairwise-coprime nontrivial moduli available among the
/// divisors of `n`, i.e. the number of distinct primes dividing `n`.
pub fn coprime_divisor_capacity(n: u64) -> u32 {
    factorize(n).len() as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial_division(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n.is_multiple_of(d) {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn egcd_examples() {
        let (g, x, y) = egcd(7, 11).unwrap();
        assert_eq!(g, 1);
        assert_eq!(7 * x + 11 * y, 1);
        // exhaustive: the unique x in [0, 11) with 7x = 1 (mod 11)
        let brute = (0..11).find(|x| 7 * x % 11 == 1).unwrap();
        assert_eq!(brute, 8);
        assert_eq!(x.rem_euclid(11), brute);

        assert_eq!(egcd(0, 5).unwrap().0, 5);
        assert_eq!(egcd(1009, 991).unwrap().0, 1);
        assert_eq!(egcd(-12, 18).unwrap().0, 6);
        assert!(egcd(0, 0).is_err());
    }

    #[test]
    fn mod_inverse_examples() {
        assert_eq!(mod_inverse(7, 11).unwrap(), 8);
        assert_eq!(mod_inverse(1, 97).unwrap(), 1);
        assert_eq!(mod_inverse(4, 7).unwrap(), 2);
        assert_eq!(mod_inverse(6, 9), Err(NumError::NotCoprime { a: 6, m: 9 }));
        assert_eq!(mod_inverse(3, 1), Err(NumError::BadModulus(1)));
    }

    #[test]
    fn mod_inverse_exhaustive_small() {
        for m in 2..=1000u64 {
            for a in 1..m {
                match mod_inverse(a, m) {
                    Ok(inv) => {
                        assert!((1..m).contains(&inv));
                        assert_eq!(a * inv % m, 1, "a={a} m={m}");
                    }
                    Err(_) => assert_ne!(gcd(a, m), 1),
                }
            }
        }
    }

    #[test]
    fn primality_examples() {
        assert!(is_prime(1009));
        assert!(!is_prime(1003));
        assert_eq!(17 * 59, 1003);
        assert!(is_prime(2));
        assert!(!is_prime(0));
        assert!(!is_prime(1));
        assert!(is_prime(18446744073709551557)); // largest 64-bit prime
        assert!(!is_prime(3215031751)); // strong pseudoprime to bases 2,3,5,7
        assert!(!is_prime(4294967297)); // 641 * 6700417
    }

    #[test]
    fn primality_matches_sieve_to_one_million() {
        let limit = 1_000_000usize;
        let mut sieve = vec![true; limit + 1];
        sieve[0] = false;
        sieve[1] = false;
        let mut i = 2;
        while i * i <= limit {
            if sieve[i] {
                let mut j = i * i;
                while j <= limit {
                    sieve[j] = false;
                    j += i;
                }
            }
            i += 1;
        }
        for (n, &expect) in sieve.iter().enumerate() {
            assert_eq!(is_prime(n as u64), expect, "n = {n}");
        }
        // spot-check the sieve itself against plain trial division
        for n in [0u64, 1, 2, 91, 97, 7919, 999_983] {
            assert_eq!(sieve[n as usize], trial_division(n));
        }
    }

    #[test]
    fn garner2_examples() {
        assert_eq!(garner2(0, 7, 7, 11).unwrap(), 7);
        assert_eq!(garner2(6, 8, 7, 11).unwrap(), 41);
        let brute = (0..77).find(|f| f % 7 == 3 && f % 11 == 1).unwrap();
        assert_eq!(brute, 45);
        assert_eq!(garner2(3, 1, 7, 11).unwrap(), 45);
        assert_eq!(garner2(4, 4, 7, 11).unwrap(), 4);
        assert!(matches!(garner2(1, 1, 6, 9), Err(NumError::NotCoprime { .. })));
        assert!(matches!(garner2(7, 1, 7, 11), Err(NumError::ResidueOutOfRange { .. })));
    }

    #[test]
    fn garner3_examples() {
        let t = ModTriple::new(7, 11, 13).unwrap();
        assert_eq!(t.product(), 1001);
        assert_eq!(t.garner3(6, 8, 2).unwrap().f, 41);
        assert_eq!(t.garner3(0, 0, 0).unwrap().f, 0);
        assert_eq!(t.garner3(5, 5, 5).unwrap().f, 5);
        for f in 0..1001u64 {
            let tr = t.garner3(f % 7, f % 11, f % 13).unwrap();
            assert_eq!(tr.f, f);
            assert_eq!(tr.f, f % 7 + 7 * tr.u2 + 77 * tr.u3);
        }
    }

    #[test]
    fn mod_triple_invariants() {
        let t = ModTriple::new(1021, 1031, 1033).unwrap();
        assert_eq!(1021 * t.gamma12() % 1031, 1);
        assert_eq!((1021 * 1031) % 1033 * t.gamma23() % 1033, 1);
        assert!(matches!(ModTriple::new(7, 7, 13), Err(NumError::NotCoprime { .. })));
        assert!(matches!(ModTriple::new(6, 35, 9), Err(NumError::NotCoprime { .. })));
        assert_eq!(
            ModTriple::new(1 << 30, (1 << 30) + 1, (1 << 30) + 3),
            Err(NumError::Overflow)
        );
    }

    #[test]
    fn coprime_moduli_search() {
        assert_eq!(find_coprime_moduli(8, 3, 64, &[]).unwrap(), vec![7, 11, 13]);
        assert_eq!(find_coprime_moduli(2, 1, 2, &[]).unwrap(), vec![2]);
        let near_1000 = find_coprime_moduli(1000, 3, 1_000_000, &[]).unwrap();
        assert_eq!(near_1000, vec![997, 1009, 1013]);
        assert_eq!(find_coprime_moduli(1024, 3, 1 << 20, &[]).unwrap(), vec![1021, 1031, 1033]);
        // exclusions push past used primes
        assert_eq!(find_coprime_moduli(8, 2, 1, &[7, 11]).unwrap(), vec![5, 13]);
        // product requirement slides the window upward
        assert_eq!(find_coprime_moduli(8, 3, 2000, &[]).unwrap(), vec![11, 13, 17]);
        assert!(matches!(
            find_coprime_moduli(10, 3, u128::MAX, &[]),
            Err(NumError::SearchExhausted { .. })
        ));
    }

    #[test]
    fn divisor_capacity() {
        assert_eq!(coprime_divisor_capacity(100_000), 2);
        assert_eq!(coprime_divisor_capacity(1009), 1);
        assert_eq!(coprime_divisor_capacity(1001), 3);
        assert_eq!(factorize(1001), vec![(7, 1), (11, 1), (13, 1)]);
        assert_eq!(factorize(100_000), vec![(2, 5), (5, 5)]);
    }

    fn small_triple() -> impl Strategy<Value = ModTriple> {
        (2u64..60, 2u64..60, 2u64..60).prop_filter_map("coprime", |(a, b, c)| {
            ModTriple::new(a, b, c).ok().filter(|t| t.product() <= 100_000)
        })
    }

    proptest! {
        #[test]
        fn garner3_round_trips_whole_range(t in small_triple()) {
            for f in 0..t.product() {
                let [r1, r2, r3] = t.residues(f);
                prop_assert_eq!(t.garner3(r1, r2, r3).unwrap().f, f);
            }
        }

        #[test]
        fn garner2_agrees_with_garner3(t in small_triple(), f in 0u64..100_000) {
            let f = f % t.product();
            let [r1, r2, r3] = t.residues(f);
            let f12 = garner2(r1, r2, t.m(0), t.m(1)).unwrap();
            prop_assert_eq!(f12, t.garner12(r1, r2).unwrap());
            let full = t.garner3(r1, r2, r3).unwrap().f;
            prop_assert_eq!(full % (t.m(0) * t.m(1)), f12);
            if f < t.m(0) * t.m(1) {
                prop_assert_eq!(f12 % t.m(2), r3);
                prop_assert_eq!(f12, full);
            }
        }

        #[test]
        fn search_is_deterministic_and_coprime(target in 2u64..5000, count in 1usize..5) {
            let a = find_coprime_moduli(target, count, 1, &[]).unwrap();
            let b = find_coprime_moduli(target, count, 1, &[]).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.len(), count);
            for i in 0..a.len() {
                prop_assert!(is_prime(a[i]));
                for j in 0..i {
                    prop_assert_eq!(gcd(a[i], a[j]), 1);
                }
            }
        }
    }
}
