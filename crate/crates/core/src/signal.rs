//! The k-sparse signal model: spectra on a cyclic grid, lazy time-domain
//! sample access, and the spectrum / dense-signal file formats.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dft::unit_phase;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("duplicate frequency {0}")]
    DuplicateFrequency(u64),
    #[error("frequency {f} out of range for grid length {grid}")]
    OutOfRange { f: u64, grid: u64 },
    #[error("coefficient at frequency {0} is zero or non-finite")]
    InvalidCoefficient(u64),
    #[error("grid length must be positive")]
    EmptyGrid,
    #[error("padded length {padded} is shorter than the signal ({len})")]
    PaddingTooShort { len: u64, padded: u64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEntry {
    pub f: u64,
    pub coeff: Complex64,
}

/// Distinct, ascending (frequency, coefficient) pairs on a grid of length
/// `grid_length`. Coefficients are nonzero and finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumFile", into = "SpectrumFile")]
pub struct SparseSpectrum {
    grid_length: u64,
    entries: Vec<SpectralEntry>,
}

impl SparseSpectrum {
    /// Builds a spectrum from entries in any order.
    pub fn new(
        grid_length: u64,
        entries: impl IntoIterator<Item = (u64, Complex64)>,
    ) -> Result<Self, SignalError> {
        if grid_length == 0 {
            return Err(SignalError::EmptyGrid);
        }
        let mut entries: Vec<SpectralEntry> = entries
            .into_iter()
            .map(|(f, coeff)| SpectralEntry { f, coeff })
            .collect();
        entries.sort_by_key(|e| e.f);
        for (i, e) in entries.iter().enumerate() {
            if e.f >= grid_length {
                return Err(SignalError::OutOfRange { f: e.f, grid: grid_length });
            }
            if i > 0 && entries[i - 1].f == e.f {
                return Err(SignalError::DuplicateFrequency(e.f));
            }
            let finite = e.coeff.re.is_finite() && e.coeff.im.is_finite();
            if !finite || e.coeff.norm() == 0.0 {
                return Err(SignalError::InvalidCoefficient(e.f));
            }
        }
        Ok(Self { grid_length, entries })
    }

    pub fn empty(grid_length: u64) -> Result<Self, SignalError> {
        Self::new(grid_length, [])
    }

    pub fn grid_length(&self) -> u64 {
        self.grid_length
    }

    pub fn entries(&self) -> &[SpectralEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn frequencies(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.f).collect()
    }

    pub fn get(&self, f: u64) -> Option<Complex64> {
        self.entries
            .binary_search_by_key(&f, |e| e.f)
            .ok()
            .map(|i| self.entries[i].coeff)
    }

    /// Sum of squared coefficient magnitudes.
    pub fn energy(&self) -> f64 {
        self.entries.iter().map(|e| e.coeff.norm_sqr()).sum()
    }

    /// The `k` largest-magnitude entries, ties broken by ascending frequency.
    pub fn top_k(&self, k: usize) -> SparseSpectrum {
        let mut sorted = self.entries.clone();
        sorted.sort_by(|a, b| {
            b.coeff
                .norm()
                .total_cmp(&a.coeff.norm())
                .then(a.f.cmp(&b.f))
        });
        sorted.truncate(k);
        sorted.sort_by_key(|e| e.f);
        SparseSpectrum {
            grid_length: self.grid_length,
            entries: sorted,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    f: u64,
    re: f64,
    im: f64,
}

/// On-disk spectrum layout.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumFile {
    grid_length: u64,
    entries: Vec<EntryFile>,
}

impl TryFrom<SpectrumFile> for SparseSpectrum {
    type Error = SignalError;

    fn try_from(file: SpectrumFile) -> Result<Self, Self::Error> {
        SparseSpectrum::new(
            file.grid_length,
            file.entries
                .into_iter()
                .map(|e| (e.f, Complex64::new(e.re, e.im))),
        )
    }
}

impl From<SparseSpectrum> for SpectrumFile {
    fn from(s: SparseSpectrum) -> Self {
        SpectrumFile {
            grid_length: s.grid_length,
            entries: s
                .entries
                .into_iter()
                .map(|e| EntryFile {
                    f: e.f,
                    re: e.coeff.re,
                    im: e.coeff.im,
                })
                .collect(),
        }
    }
}

pub fn spectrum_from_json(text: &str) -> Result<SparseSpectrum, SignalError> {
    let file: SpectrumFile =
        serde_json::from_str(text).map_err(|e| SignalError::Parse(e.to_string()))?;
    file.try_into()
}

pub fn spectrum_to_json(spectrum: &SparseSpectrum) -> String {
    serde_json::to_string_pretty(spectrum).expect("spectrum serializes")
}

pub fn load_spectrum(path: impl AsRef<Path>) -> Result<SparseSpectrum, SignalError> {
    spectrum_from_json(&fs::read_to_string(path)?)
}

pub fn save_spectrum(path: impl AsRef<Path>, spectrum: &SparseSpectrum) -> Result<(), SignalError> {
    fs::write(path, spectrum_to_json(spectrum))?;
    Ok(())
}

/// Time-domain access to a signal on a cyclic grid.
///
/// Implementations must be deterministic (same index, bit-identical sample)
/// and safe to read from several threads.
pub trait SignalSource: Sync {
    fn grid_length(&self) -> u64;

    /// Length of the caller's signal before padding.
    fn original_length(&self) -> u64 {
        self.grid_length()
    }

    fn sample(&self, n: u64) -> Complex64;

    /// True when every sample at index `>= original_length` is zero, so the
    /// signal may be re-padded onto a different grid.
    fn zero_padded(&self) -> bool {
        false
    }
}

impl<T: SignalSource + ?Sized> SignalSource for &T {
    fn grid_length(&self) -> u64 {
        (**self).grid_length()
    }
    fn original_length(&self) -> u64 {
        (**self).original_length()
    }
    fn sample(&self, n: u64) -> Complex64 {
        (**self).sample(n)
    }
    fn zero_padded(&self) -> bool {
        (**self).zero_padded()
    }
}

/// Lazily evaluates `x[n] = sum_i A_i e^{2 pi i f_i n / M}`, O(k) per sample.
#[derive(Debug, Clone)]
pub struct SynthesizedSource {
    spectrum: SparseSpectrum,
    nominal_length: Option<u64>,
}

pub fn synthesize(spectrum: SparseSpectrum) -> SynthesizedSource {
    SynthesizedSource {
        spectrum,
        nominal_length: None,
    }
}

impl SynthesizedSource {
    /// Declares the nominal length `N` the grid was planned from.
    pub fn with_nominal_length(mut self, n: u64) -> Self {
        self.nominal_length = Some(n);
        self
    }

    pub fn spectrum(&self) -> &SparseSpectrum {
        &self.spectrum
    }

    pub fn nominal_length(&self) -> Option<u64> {
        self.nominal_length
    }
}

impl SignalSource for SynthesizedSource {
    fn grid_length(&self) -> u64 {
        self.spectrum.grid_length
    }

    fn original_length(&self) -> u64 {
        self.nominal_length.unwrap_or(self.spectrum.grid_length)
    }

    fn sample(&self, n: u64) -> Complex64 {
        let grid = self.spectrum.grid_length as u128;
        let n = n as u128 % grid;
        self.spectrum
            .entries
            .iter()
            .map(|e| e.coeff * unit_phase(e.f as u128 * n, grid))
            .sum()
    }
}

/// A dense buffer zero-padded to `grid_length`.
#[derive(Debug, Clone)]
pub struct DenseSource {
    samples: Vec<Complex64>,
    grid_length: u64,
}

pub fn from_dense(samples: Vec<Complex64>, padded_length: u64) -> Result<DenseSource, SignalError> {
    let len = samples.len() as u64;
    if padded_length == 0 {
        return Err(SignalError::EmptyGrid);
    }
    if padded_length < len {
        return Err(SignalError::PaddingTooShort { len, padded: padded_length });
    }
    Ok(DenseSource {
        samples,
        grid_length: padded_length,
    })
}

impl DenseSource {
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }
}

impl SignalSource for DenseSource {
    fn grid_length(&self) -> u64 {
        self.grid_length
    }

    fn original_length(&self) -> u64 {
        self.samples.len() as u64
    }

    fn sample(&self, n: u64) -> Complex64 {
        let n = n % self.grid_length;
        self.samples
            .get(n as usize)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    fn zero_padded(&self) -> bool {
        true
    }
}

/// A zero-padded source viewed on a different (longer) grid.
pub struct Regridded<'a> {
    inner: &'a dyn SignalSource,
    grid_length: u64,
}

impl<'a> Regridded<'a> {
    /// `None` unless `inner` is zero-padded and fits in `grid_length`.
    pub fn new(inner: &'a dyn SignalSource, grid_length: u64) -> Option<Self> {
        (inner.zero_padded() && inner.original_length() <= grid_length && grid_length > 0)
            .then_some(Self { inner, grid_length })
    }
}

impl SignalSource for Regridded<'_> {
    fn grid_length(&self) -> u64 {
        self.grid_length
    }

    fn original_length(&self) -> u64 {
        self.inner.original_length()
    }

    fn sample(&self, n: u64) -> Complex64 {
        let n = n % self.grid_length;
        if n < self.inner.original_length() {
            self.inner.sample(n)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    fn zero_padded(&self) -> bool {
        true
    }
}

/// Reads every sample on the grid.
pub fn materialize(source: &dyn SignalSource) -> Vec<Complex64> {
    (0..source.grid_length()).map(|n| source.sample(n)).collect()
}

/// Loads a dense signal: `.csv` files use `index,re,im` rows, anything else
/// is the little-endian binary layout (u64 count, then f64 re/im pairs).
pub fn load_dense(path: impl AsRef<Path>) -> Result<Vec<Complex64>, SignalError> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_dense_csv(&fs::read_to_string(path)?)
    } else {
        read_dense_binary(&fs::read(path)?)
    }
}

pub fn save_dense(path: impl AsRef<Path>, samples: &[Complex64]) -> Result<(), SignalError> {
    let path = path.as_ref();
    let mut out = BufWriter::new(fs::File::create(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        writeln!(out, "index,re,im")?;
        for (i, z) in samples.iter().enumerate() {
            writeln!(out, "{i},{:?},{:?}", z.re, z.im)?;
        }
    } else {
        out.write_all(&(samples.len() as u64).to_le_bytes())?;
        for z in samples {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_dense_binary(bytes: &[u8]) -> Result<Vec<Complex64>, SignalError> {
    let header: [u8; 8] = bytes
        .get(..8)
        .and_then(|h| h.try_into().ok())
        .ok_or_else(|| SignalError::Parse("missing 8-byte length header".into()))?;
    let count = u64::from_le_bytes(header) as usize;
    let body = &bytes[8..];
    if Some(body.len()) != count.checked_mul(16) {
        return Err(SignalError::Parse(format!(
            "header declares {count} samples but body has {} bytes",
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

pub fn read_dense_csv(text: &str) -> Result<Vec<Complex64>, SignalError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| SignalError::Parse(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["index", "re", "im"] {
        return Err(SignalError::Parse("expected header index,re,im".into()));
    }
    let mut rows: Vec<(u64, Complex64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| SignalError::Parse(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let idx: u64 = field(0)
            .parse()
            .map_err(|_| SignalError::Parse(format!("bad index {:?}", field(0))))?;
        let re: f64 = field(1)
            .parse()
            .map_err(|_| SignalError::Parse(format!("bad re {:?}", field(1))))?;
        let im: f64 = field(2)
            .parse()
            .map_err(|_| SignalError::Parse(format!("bad im {:?}", field(2))))?;
        rows.push((idx, Complex64::new(re, im)));
    }
    rows.sort_by_key(|r| r.0);
    let len = rows.last().map_or(0, |r| r.0 + 1) as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (i, (idx, z)) in rows.iter().enumerate() {
        if i > 0 && rows[i - 1].0 == *idx {
            return Err(SignalError::Parse(format!("duplicate index {idx}")));
        }
        out[*idx as usize] = *z;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dft::{dft_direct, ComplexBuffer};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_spectrum(grid: u64, k: usize, seed: u64) -> SparseSpectrum {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut freqs = std::collections::BTreeSet::new();
        while freqs.len() < k {
            freqs.insert(rng.gen_range(0..grid));
        }
        SparseSpectrum::new(
            grid,
            freqs
                .into_iter()
                .map(|f| (f, c(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0)))),
        )
        .unwrap()
    }

    #[test]
    fn dc_tone_is_constant() {
        let src = synthesize(SparseSpectrum::new(8, [(0, c(1.0, 0.0))]).unwrap());
        for n in 0..8 {
            assert_eq!(src.sample(n), c(1.0, 0.0));
        }
    }

    #[test]
    fn worked_example_lifts_to_1001_grid() {
        let src = synthesize(SparseSpectrum::new(1001, [(7, c(1.0, 0.0)), (41, c(1.0, 0.0))]).unwrap())
            .with_nominal_length(64);
        assert_eq!(src.grid_length(), 1001);
        assert_eq!(src.original_length(), 64);
        let samples = materialize(&src);
        assert_eq!(samples.len(), 1001);
        // x[n] at n = 0 is the coefficient sum
        assert!((samples[0] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn synthesized_signal_has_exact_spectrum() {
        let spec = random_spectrum(4096, 5, 11);
        let src = synthesize(spec.clone());
        let x = ComplexBuffer::new(materialize(&src)).unwrap();
        let y = dft_direct(&x, 4096).unwrap();
        let norm = spec.energy().sqrt();
        for (f, z) in y.as_slice().iter().enumerate() {
            let expect = spec.get(f as u64).unwrap_or_default() * 4096.0;
            assert!((z - expect).norm() / 4096.0 <= 1e-9 * norm, "bin {f}");
        }
    }

    #[test]
    fn time_domain_energy_matches_coefficients() {
        let spec = random_spectrum(997, 6, 5);
        let src = synthesize(spec.clone());
        let e: f64 = materialize(&src).iter().map(|z| z.norm_sqr()).sum();
        let expect = 997.0 * spec.energy();
        assert!((e - expect).abs() <= 1e-9 * expect);
    }

    #[test]
    fn repeated_samples_are_bit_identical() {
        let src = synthesize(random_spectrum(1_000_003, 8, 2));
        for n in [0u64, 17, 999_999] {
            let a = src.sample(n);
            let b = src.sample(n);
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn dense_padding() {
        let d = from_dense(vec![c(1.0, 0.0); 4], 6).unwrap();
        assert_eq!(d.sample(5), c(0.0, 0.0));
        assert_eq!(d.sample(3), c(1.0, 0.0));
        let same = from_dense(vec![c(2.0, 1.0); 4], 4).unwrap();
        assert_eq!(materialize(&same), vec![c(2.0, 1.0); 4]);
        assert!(matches!(
            from_dense(vec![c(0.0, 0.0); 5], 4),
            Err(SignalError::PaddingTooShort { .. })
        ));
        let wide = Regridded::new(&d, 10).unwrap();
        assert_eq!(wide.sample(8), c(0.0, 0.0));
        assert_eq!(wide.sample(2), c(1.0, 0.0));
        let synth = synthesize(SparseSpectrum::new(8, [(1, c(1.0, 0.0))]).unwrap());
        assert!(Regridded::new(&synth, 16).is_none());
    }

    #[test]
    fn dense_64_sample_synthesis_padded_to_1001() {
        // the same two tones generated on a 64-point grid, then zero-padded:
        // samples agree with the 64-grid synthesis and vanish beyond index 63
        let on64 = synthesize(SparseSpectrum::new(64, [(7, c(1.0, 0.0)), (41, c(1.0, 0.0))]).unwrap());
        let dense = from_dense(materialize(&on64), 1001).unwrap();
        for n in 0..64 {
            assert_eq!(dense.sample(n), on64.sample(n));
        }
        assert!((64..1001).all(|n| dense.sample(n) == c(0.0, 0.0)));
    }

    #[test]
    fn spectrum_validation() {
        assert!(matches!(
            SparseSpectrum::new(10, [(3, c(1.0, 0.0)), (3, c(2.0, 0.0))]),
            Err(SignalError::DuplicateFrequency(3))
        ));
        assert!(matches!(
            SparseSpectrum::new(10, [(10, c(1.0, 0.0))]),
            Err(SignalError::OutOfRange { f: 10, grid: 10 })
        ));
        assert!(matches!(
            SparseSpectrum::new(10, [(1, c(0.0, 0.0))]),
            Err(SignalError::InvalidCoefficient(1))
        ));
        let s = SparseSpectrum::new(10, [(5, c(1.0, 0.0)), (2, c(-3.0, 0.0))]).unwrap();
        assert_eq!(s.frequencies(), vec![2, 5]);
    }

    #[test]
    fn top_k_is_deterministic_under_ties() {
        let s = SparseSpectrum::new(
            100,
            [(9, c(1.0, 0.0)), (3, c(0.0, 1.0)), (50, c(2.0, 0.0)), (7, c(-1.0, 0.0))],
        )
        .unwrap();
        assert_eq!(s.top_k(2).frequencies(), vec![3, 50]);
        assert_eq!(s.top_k(10).len(), 4);
    }

    #[test]
    fn json_errors() {
        let dup = r#"{"grid_length": 10, "entries": [{"f": 1, "re": 1.0, "im": 0.0}, {"f": 1, "re": 2.0, "im": 0.0}]}"#;
        assert!(matches!(spectrum_from_json(dup), Err(SignalError::DuplicateFrequency(1))));
        let oob = r#"{"grid_length": 10, "entries": [{"f": 12, "re": 1.0, "im": 0.0}]}"#;
        assert!(matches!(spectrum_from_json(oob), Err(SignalError::OutOfRange { f: 12, grid: 10 })));
        assert!(matches!(spectrum_from_json("{"), Err(SignalError::Parse(_))));
        let empty = SparseSpectrum::empty(77).unwrap();
        assert_eq!(spectrum_from_json(&spectrum_to_json(&empty)).unwrap(), empty);
    }

    #[test]
    fn dense_file_formats() {
        let dir = tempfile::tempdir().unwrap();
        let data = vec![c(1.5, -0.25), c(0.0, 3.0), c(-1e-300, 7.0)];
        for name in ["x.bin", "x.csv"] {
            let p = dir.path().join(name);
            save_dense(&p, &data).unwrap();
            assert_eq!(load_dense(&p).unwrap(), data);
        }
        assert!(read_dense_binary(&[1, 0, 0, 0, 0, 0, 0, 0]).is_err());
        assert!(read_dense_csv("a,b,c\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn spectrum_json_round_trip(grid in 1u64..1_000_000_000_000, k in 0usize..12, seed in any::<u64>()) {
            let k = k.min(grid as usize);
            let s = random_spectrum(grid, k, seed);
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.json");
            save_spectrum(&p, &s).unwrap();
            prop_assert_eq!(load_spectrum(&p).unwrap(), s);
        }
    }
}
