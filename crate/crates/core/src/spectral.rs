//! Fourier transforms and spectral calculus on uniform 2π-periodic grids.
//!
//! Grid nodes are `α_k = k·h`, `h = 2π/N`, stored for `k = 0 … N-1`. The
//! forward transform carries the `1/N` factor, so `coeff(0)` is the mean of
//! the field. Coefficients are stored in FFT order internally; every public
//! accessor takes a signed wavenumber `m ∈ (-N/2, N/2]`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

/// Imaginary residue above which an inverse transform is rejected as non-real.
pub const NON_REAL_TOLERANCE: f64 = 1e-9;

/// Amplitude threshold of the round-off (Krasny) filter.
pub const KRASNY_THRESHOLD: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid size {0} is not a power of two >= 8")]
    InvalidGridSize(usize),
    #[error("grid field contains a non-finite value at node {0}")]
    NonFinite(usize),
    #[error("inverse transform is not real: imaginary residue {0:e}")]
    NonRealResult(f64),
    #[error("filter argument {0} lies outside [-1, 1]")]
    DomainError(f64),
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
}

pub fn is_valid_grid_size(n: usize) -> bool {
    n >= 8 && n.is_power_of_two()
}

fn check_size(n: usize) -> Result<(), SpectralError> {
    if is_valid_grid_size(n) {
        Ok(())
    } else {
        Err(SpectralError::InvalidGridSize(n))
    }
}

/// Real samples of a 2π-periodic function on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: Vec<f64>,
}

impl GridField {
    pub fn new(values: Vec<f64>) -> Result<Self, SpectralError> {
        check_size(values.len())?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite(k));
        }
        Ok(Self { values })
    }

    /// Samples `f(α_k)` at every node.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self, SpectralError> {
        Self::new(nodes(n).map(f).collect())
    }

    pub fn constant(n: usize, value: f64) -> Result<Self, SpectralError> {
        Self::new(vec![value; n])
    }

    /// Skips validation; callers guarantee a valid size and finite values.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(is_valid_grid_size(values.len()));
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn h(&self) -> f64 {
        2.0 * PI / self.n() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Discrete norm `(Σ |f_k|² h)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.h()).sqrt()
    }

    /// Pointwise map; the result is validated again.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, SpectralError> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Every `factor`-th node, i.e. the restriction to a nested coarser grid.
    pub fn restrict(&self, n_coarse: usize) -> Result<Self, SpectralError> {
        check_size(n_coarse)?;
        if n_coarse > self.n() || !self.n().is_multiple_of(n_coarse) {
            return Err(SpectralError::SizeMismatch(self.n(), n_coarse));
        }
        let stride = self.n() / n_coarse;
        Ok(Self {
            values: self.values.iter().step_by(stride).copied().collect(),
        })
    }
}

/// Grid nodes `α_k = 2πk/N` for `k = 0 … N-1`.
pub fn nodes(n: usize) -> impl Iterator<Item = f64> {
    let h = 2.0 * PI / n as f64;
    (0..n).map(move |k| k as f64 * h)
}

/// Discrete Fourier coefficients indexed by signed wavenumber.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(n: usize) -> Result<Self, SpectralError> {
        check_size(n)?;
        Ok(Self {
            coeffs: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    /// Builds a spectrum from coefficients in FFT storage order.
    pub fn from_fft_order(coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        check_size(coeffs.len())?;
        Ok(Self { coeffs })
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    /// Storage slot of wavenumber `m`; `m` is reduced modulo `N`.
    pub fn slot(&self, m: i64) -> usize {
        m.rem_euclid(self.n() as i64) as usize
    }

    /// Signed wavenumber held in storage slot `i`, in `(-N/2, N/2]`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        wavenumber(i, self.n())
    }

    pub fn coeff(&self, m: i64) -> Complex64 {
        self.coeffs[self.slot(m)]
    }

    pub fn set(&mut self, m: i64, value: Complex64) {
        let i = self.slot(m);
        self.coeffs[i] = value;
    }

    pub fn as_fft_order(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn as_fft_order_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// `(m, coeff(m))` for `m = -N/2+1 … N/2` in increasing order.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let half = (self.n() / 2) as i64;
        (-half + 1..=half).map(move |m| (m, self.coeff(m)))
    }

    /// Largest violation of `coeff(-m) = conj(coeff(m))`, including the
    /// imaginary part of the Nyquist coefficient.
    pub fn symmetry_defect(&self) -> f64 {
        let half = (self.n() / 2) as i64;
        let mut worst = self.coeff(0).im.abs().max(self.coeff(half).im.abs());
        for m in 1..half {
            worst = worst.max((self.coeff(-m) - self.coeff(m).conj()).norm());
        }
        worst
    }

    /// `Σ |coeff(m)|²`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

pub(crate) fn wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Forward transform `f̂_m = (1/N) Σ_k f(α_k) e^{-imα_k}`.
pub fn dft(field: &GridField) -> Spectrum {
    Spectrum {
        coeffs: forward_raw(field.values()),
    }
}

pub(crate) fn forward_raw(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward_plan(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Inverse transform returning the real field and the largest discarded
/// imaginary residue.
pub fn idft_with_residue(spectrum: &Spectrum) -> Result<(GridField, f64), SpectralError> {
    let (values, residue) = inverse_raw(spectrum.as_fft_order());
    if residue > NON_REAL_TOLERANCE {
        return Err(SpectralError::NonRealResult(residue));
    }
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite(k));
    }
    Ok((GridField { values }, residue))
}

/// Inverse transform `f_k = Σ_m f̂_m e^{imα_k}`.
pub fn idft(spectrum: &Spectrum) -> Result<GridField, SpectralError> {
    idft_with_residue(spectrum).map(|(f, _)| f)
}

pub(crate) fn inverse_raw(coeffs: &[Complex64]) -> (Vec<f64>, f64) {
    let mut buf = coeffs.to_vec();
    inverse_plan(buf.len()).process(&mut buf);
    let residue = buf.iter().fold(0.0_f64, |acc, c| acc.max(c.im.abs()));
    (buf.into_iter().map(|c| c.re).collect(), residue)
}

/// `(im)^order` with the Nyquist mode dropped for odd orders.
fn derivative_symbol(m: i64, n: usize, order: u32) -> Complex64 {
    if order % 2 == 1 && m == (n / 2) as i64 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::new(0.0, m as f64).powu(order)
}

/// Multiplies every mode of `spectrum` in place by `(im)^order`.
pub fn differentiate_spectrum(spectrum: &mut Spectrum, order: u32) {
    let n = spectrum.n();
    for (i, c) in spectrum.coeffs.iter_mut().enumerate() {
        *c *= derivative_symbol(wavenumber(i, n), n, order);
    }
}

/// `S_h^order f`; order is 1, 2 or 3 in practice but any order is accepted.
pub fn spectral_derivative(field: &GridField, order: u32) -> GridField {
    let mut s = dft(field);
    differentiate_spectrum(&mut s, order);
    // Symmetric input stays symmetric under these symbols.
    idft(&s).expect("derivative of a real field is real")
}

/// Zero-mean antiderivative: mode `m ≠ 0` is divided by `im`, the mean is dropped.
pub fn spectral_antiderivative(field: &GridField) -> GridField {
    let mut s = dft(field);
    integrate_spectrum(&mut s);
    idft(&s).expect("antiderivative of a real field is real")
}

pub(crate) fn integrate_spectrum(spectrum: &mut Spectrum) {
    let n = spectrum.n();
    for (i, c) in spectrum.coeffs.iter_mut().enumerate() {
        let m = wavenumber(i, n);
        if m == 0 || m == (n / 2) as i64 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c /= Complex64::new(0.0, m as f64);
        }
    }
}

/// Smooth high-mode damping multiplier: 1 on `|x| < 1/2`, decaying as
/// `exp(1 - 1/(16(1-|x|)^4))` to exactly 0 at `|x| = 1`.
pub fn dpr_rho1(x: f64) -> Result<f64, SpectralError> {
    if !(x.abs() <= 1.0) {
        return Err(SpectralError::DomainError(x));
    }
    Ok(rho1_unchecked(x))
}

fn rho1_unchecked(x: f64) -> f64 {
    let a = x.abs();
    if a < 0.5 {
        1.0
    } else if a >= 1.0 {
        0.0
    } else {
        let d = 1.0 - a;
        (1.0 - 1.0 / (16.0 * d * d * d * d)).exp()
    }
}

/// Round-off filter: 0 for amplitudes below `1e-13`, 1 otherwise.
pub fn krasny_rho2(amplitude: f64) -> f64 {
    if amplitude < KRASNY_THRESHOLD {
        0.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FilterMode {
    #[default]
    None,
    Dpr,
    Krasny,
    Both,
}

impl FilterMode {
    pub fn uses_dpr(self) -> bool {
        matches!(self, FilterMode::Dpr | FilterMode::Both)
    }

    pub fn uses_krasny(self) -> bool {
        matches!(self, FilterMode::Krasny | FilterMode::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            FilterMode::None => "none",
            FilterMode::Dpr => "dpr",
            FilterMode::Krasny => "krasny",
            FilterMode::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(FilterMode::None),
            "dpr" => Some(FilterMode::Dpr),
            "krasny" | "k" => Some(FilterMode::Krasny),
            "both" => Some(FilterMode::Both),
            _ => None,
        }
    }
}

/// Per-mode first-derivative multipliers `im·ρ1(2m/N)` (the `ρ1` factor only
/// when DPR filtering is on). Krasny depends on the data and is applied
/// separately.
pub(crate) fn first_derivative_symbols(n: usize, filter: FilterMode) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            let m = wavenumber(i, n);
            let mut sym = derivative_symbol(m, n, 1);
            if filter.uses_dpr() {
                sym *= rho1_unchecked(2.0 * m as f64 / n as f64);
            }
            sym
        })
        .collect()
}

/// Applies the filtered first derivative to a spectrum in place.
pub(crate) fn apply_filtered_derivative(coeffs: &mut [Complex64], symbols: &[Complex64], filter: FilterMode) {
    let krasny = filter.uses_krasny();
    for (c, sym) in coeffs.iter_mut().zip(symbols) {
        if krasny && c.norm() < KRASNY_THRESHOLD {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= sym;
        }
    }
}

/// `D_h f`: first derivative with optional DPR and Krasny filtering.
/// `FilterMode::None` is the plain spectral derivative.
pub fn filtered_derivative(field: &GridField, mode: FilterMode) -> GridField {
    let mut s = dft(field);
    let symbols = first_derivative_symbols(field.n(), mode);
    apply_filtered_derivative(&mut s.coeffs, &symbols, mode);
    idft(&s).expect("filtered derivative of a real field is real")
}

/// `|coeff(m)|²` for `m = -N/2+1 … N/2`.
pub fn power_spectrum(spectrum: &Spectrum) -> Vec<f64> {
    spectrum.modes().map(|(_, c)| c.norm_sqr()).collect()
}

/// Largest `|coeff(m)|²` over `|m| > cutoff`.
pub fn spectral_tail_max(spectrum: &Spectrum, cutoff: i64) -> f64 {
    spectrum
        .modes()
        .filter(|(m, _)| m.abs() > cutoff)
        .fold(0.0, |acc, (_, c)| acc.max(c.norm_sqr()))
}

/// Trigonometric interpolant evaluated at an arbitrary point.
pub fn interpolate(spectrum: &Spectrum, alpha: f64) -> f64 {
    let n = spectrum.n();
    let half = (n / 2) as i64;
    let mut acc = spectrum.coeff(0).re;
    for m in 1..half {
        let c = spectrum.coeff(m);
        let (s, co) = (m as f64 * alpha).sin_cos();
        acc += 2.0 * (c.re * co - c.im * s);
    }
    acc + spectrum.coeff(half).re * (half as f64 * alpha).cos()
}

/// Zero-pads (or truncates) a spectrum onto a grid of size `n_new`. The
/// Nyquist coefficient is split symmetrically when padding.
pub fn resize_spectrum(spectrum: &Spectrum, n_new: usize) -> Result<Spectrum, SpectralError> {
    let mut out = Spectrum::zeros(n_new)?;
    let n = spectrum.n();
    let half_old = (n / 2) as i64;
    let half_new = (n_new / 2) as i64;
    let keep = half_old.min(half_new);
    for m in -keep + 1..keep {
        out.set(m, spectrum.coeff(m));
    }
    if n_new > n {
        let nyq = spectrum.coeff(half_old) * 0.5;
        out.set(half_old, nyq);
        out.set(-half_old, nyq);
    } else {
        // Fold the pair at the new Nyquist into a single real coefficient.
        let c = spectrum.coeff(keep) + spectrum.coeff(-keep);
        out.set(keep, if n_new == n { spectrum.coeff(keep) } else { c });
    }
    Ok(out)
}
