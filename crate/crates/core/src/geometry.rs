//! Closed planar curves and their θ-L representation.
//!
//! Curves are counterclockwise and carried at equal arc-length nodes. Only
//! the periodic part `φ = θ - α` of the tangent angle lives on the spectral
//! grid, so `θ_α = 1 + S_h φ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::spectral::{self, GridField, SpectralError, Spectrum};

/// Default tolerance on `|mean(s_α cos θ)|`, `|mean(s_α sin θ)|`.
pub const DEFAULT_CLOSURE_TOL: f64 = 1e-8;

/// Default arc-length resampling tolerance, relative to `L`.
pub const DEFAULT_RESAMPLE_TOL: f64 = 1e-12;

const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unknown shape `{0}`")]
    UnknownShape(String),
    #[error("invalid shape parameter: {0}")]
    InvalidParameter(String),
    #[error("curve is not regular: min s_alpha = {0:e}")]
    NotRegular(f64),
    #[error("arc-length inversion did not converge for node {node} (residual {residual:e})")]
    NoConvergence { node: usize, residual: f64 },
    #[error("tangent turns {0} times per loop; expected one counterclockwise turn")]
    WindingError(i64),
    #[error("state does not close: tangent mean ({0:e}, {1:e})")]
    ClosureViolation(f64, f64),
    #[error("curve length must be positive and finite, got {0}")]
    InvalidLength(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Catalog of analytic initial curves, all counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Circle {
        radius: f64,
    },
    /// `(a cos α, b sin α)`.
    Ellipse {
        a: f64,
        b: f64,
    },
    /// Polar graph `r = R + δ cos(mα)`.
    PerturbedCircle {
        radius: f64,
        delta: f64,
        mode: u32,
    },
    /// `(cos α + 0.35 sin 2α, sin α + 0.7 sin² α)`.
    Cardioid,
}

impl Shape {
    /// Ellipse E = E3: `(cos α, ½ sin α)`, max k² = 16.
    pub fn e3() -> Self {
        Shape::Ellipse { a: 1.0, b: 0.5 }
    }

    /// Ellipse E1: `(cos α, (√2/2) sin α)`, max k² = 4.
    pub fn e1() -> Self {
        Shape::Ellipse {
            a: 1.0,
            b: 2f64.sqrt() / 2.0,
        }
    }

    /// Ellipse E2: `(cos α, (2^{1/4}/2) sin α)`, max k² = 8.
    pub fn e2() -> Self {
        Shape::Ellipse {
            a: 1.0,
            b: 2f64.sqrt().sqrt() / 2.0,
        }
    }

    /// Three-fold perturbed circle `r = 1 + 0.4 cos 3α`.
    pub fn pc3() -> Self {
        Shape::PerturbedCircle {
            radius: 1.0,
            delta: 0.4,
            mode: 3,
        }
    }

    /// Builds a shape from a catalog name and its numeric parameters.
    ///
    /// Recognized names: `circle(r)`, `ellipse(a, b)`,
    /// `perturbed_circle(r0, delta0, m)`, and the parameterless presets
    /// `e`/`e3`, `e1`, `e2`, `pc3`, `cardioid`.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self, GeometryError> {
        let need = |k: usize| -> Result<(), GeometryError> {
            if params.len() == k {
                Ok(())
            } else {
                Err(GeometryError::InvalidParameter(format!(
                    "`{name}` takes {k} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        let shape = match name.to_ascii_lowercase().as_str() {
            "circle" => {
                need(1)?;
                Shape::Circle { radius: params[0] }
            }
            "ellipse" => {
                need(2)?;
                Shape::Ellipse {
                    a: params[0],
                    b: params[1],
                }
            }
            "perturbed_circle" | "pc" => {
                need(3)?;
                if params[2].fract() != 0.0 || params[2] < 1.0 {
                    return Err(GeometryError::InvalidParameter(format!(
                        "mode must be a positive integer, got {}",
                        params[2]
                    )));
                }
                Shape::PerturbedCircle {
                    radius: params[0],
                    delta: params[1],
                    mode: params[2] as u32,
                }
            }
            "e" | "e3" => {
                need(0)?;
                Shape::e3()
            }
            "e1" => {
                need(0)?;
                Shape::e1()
            }
            "e2" => {
                need(0)?;
                Shape::e2()
            }
            "pc3" => {
                need(0)?;
                Shape::pc3()
            }
            "cardioid" => {
                need(0)?;
                Shape::Cardioid
            }
            _ => return Err(GeometryError::UnknownShape(name.to_string())),
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(GeometryError::InvalidParameter(format!(
                    "{what} must be positive, got {v}"
                )))
            }
        };
        match *self {
            Shape::Circle { radius } => positive("radius", radius),
            Shape::Ellipse { a, b } => {
                positive("a", a)?;
                positive("b", b)
            }
            Shape::PerturbedCircle { radius, delta, mode } => {
                positive("radius", radius)?;
                if !(delta.abs() < radius) || mode == 0 {
                    return Err(GeometryError::InvalidParameter(format!(
                        "perturbation needs |delta| < radius and mode >= 1 (delta {delta}, mode {mode})"
                    )));
                }
                Ok(())
            }
            Shape::Cardioid => Ok(()),
        }
    }

    /// Point at parameter `α`.
    pub fn point(&self, alpha: f64) -> (f64, f64) {
        match *self {
            Shape::Circle { radius } => (radius * alpha.cos(), radius * alpha.sin()),
            Shape::Ellipse { a, b } => (a * alpha.cos(), b * alpha.sin()),
            Shape::PerturbedCircle { radius, delta, mode } => {
                let r = radius + delta * (mode as f64 * alpha).cos();
                (r * alpha.cos(), r * alpha.sin())
            }
            Shape::Cardioid => {
                let s = alpha.sin();
                (alpha.cos() + 0.35 * (2.0 * alpha).sin(), s + 0.7 * s * s)
            }
        }
    }

    /// Short identifier used in output file names and tables.
    pub fn label(&self) -> String {
        match *self {
            Shape::Circle { radius } => format!("circle(r={radius})"),
            Shape::Ellipse { a, b } => {
                if *self == Shape::e3() {
                    "E".into()
                } else if *self == Shape::e1() {
                    "E1".into()
                } else if *self == Shape::e2() {
                    "E2".into()
                } else {
                    format!("ellipse(a={a},b={b})")
                }
            }
            Shape::PerturbedCircle { radius, delta, mode } => {
                if *self == Shape::pc3() {
                    "PC".into()
                } else {
                    format!("pc(r={radius},d={delta},m={mode})")
                }
            }
            Shape::Cardioid => "C".into(),
        }
    }
}

/// Samples `(x(α_k), y(α_k))` of a closed curve on a uniform parameter grid.
/// The curve is the trigonometric interpolant of the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricCurve {
    x: GridField,
    y: GridField,
}

impl ParametricCurve {
    pub fn from_samples(x: Vec<f64>, y: Vec<f64>) -> Result<Self, GeometryError> {
        if x.len() != y.len() {
            return Err(SpectralError::SizeMismatch(x.len(), y.len()).into());
        }
        Ok(Self {
            x: GridField::new(x)?,
            y: GridField::new(y)?,
        })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> (f64, f64)) -> Result<Self, GeometryError> {
        let (x, y): (Vec<f64>, Vec<f64>) = spectral::nodes(n).map(f).unzip();
        Self::from_samples(x, y)
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn x(&self) -> &GridField {
        &self.x
    }

    pub fn y(&self) -> &GridField {
        &self.y
    }

    /// Same curve traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        let n = self.n();
        let flip = |f: &GridField| {
            let v = f.values();
            GridField::from_vec_unchecked((0..n).map(|k| v[(n - k) % n]).collect())
        };
        Self {
            x: flip(&self.x),
            y: flip(&self.y),
        }
    }

    /// Positive for counterclockwise curves.
    pub fn signed_area(&self) -> f64 {
        signed_area(self.x.values(), self.y.values())
    }
}

/// Analytic samples of a catalog shape at `n` uniform parameter values.
pub fn sample_catalog_curve(shape: &Shape, n: usize) -> Result<ParametricCurve, GeometryError> {
    shape.validate()?;
    ParametricCurve::from_fn(n, |a| shape.point(a))
}

/// Node coordinates of a closed curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoints {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl CurvePoints {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.y.iter().copied())
    }

    /// Largest Euclidean distance between corresponding nodes.
    pub fn max_deviation(&self, other: &CurvePoints) -> f64 {
        self.iter()
            .zip(other.iter())
            .fold(0.0, |acc, ((x0, y0), (x1, y1))| acc.max((x0 - x1).hypot(y0 - y1)))
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x.iter().map(|v| v + dx).collect(),
            y: self.y.iter().map(|v| v + dy).collect(),
        }
    }

    /// Rigid rotation about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let (x, y) = self.iter().map(|(x, y)| (c * x - s * y, s * x + c * y)).unzip();
        Self { x, y }
    }
}

/// Truncated trigonometric interpolant `Σ_{|m|≤K} c_m e^{imα}` of a real field.
struct TrigSeries {
    mean: f64,
    coeffs: Vec<Complex64>,
}

impl TrigSeries {
    fn new(spectrum: &Spectrum) -> Self {
        let half = (spectrum.n() / 2) as i64;
        let scale = spectrum.as_fft_order().iter().fold(0.0_f64, |a, c| a.max(c.norm()));
        let cut = 1e-19 * scale.max(f64::MIN_POSITIVE);
        // The Nyquist term is split over ±N/2, matching the real interpolant.
        let mut coeffs: Vec<Complex64> = (1..half).map(|m| spectrum.coeff(m)).collect();
        coeffs.push(spectrum.coeff(half) * 0.5);
        while coeffs.last().is_some_and(|c| c.norm() <= cut) {
            coeffs.pop();
        }
        Self {
            mean: spectrum.coeff(0).re,
            coeffs,
        }
    }

    fn eval(&self, alpha: f64) -> f64 {
        let mut acc = self.mean;
        for (j, c) in self.coeffs.iter().enumerate() {
            let (s, co) = ((j + 1) as f64 * alpha).sin_cos();
            acc += 2.0 * (c.re * co - c.im * s);
        }
        acc
    }
}

/// Resamples a curve at `n` nodes equally spaced in arc length, starting
/// from the curve point at parameter 0. Returns the nodes and the length.
///
/// Arc length is the spectral antiderivative of `s_α` on a refined grid;
/// each node is located by safeguarded Newton iteration on the interpolated
/// arc-length function. `tol` is relative to `L`.
pub fn resample_equal_arclength(
    curve: &ParametricCurve,
    n: usize,
    tol: f64,
) -> Result<(CurvePoints, f64), GeometryError> {
    if !spectral::is_valid_grid_size(n) {
        return Err(SpectralError::InvalidGridSize(n).into());
    }
    let m_fine = curve.n().max(4 * n).max(1024);
    let x_hat = spectral::resize_spectrum(&spectral::dft(curve.x()), m_fine)?;
    let y_hat = spectral::resize_spectrum(&spectral::dft(curve.y()), m_fine)?;
    let deriv = |s: &Spectrum| {
        let mut d = s.clone();
        spectral::differentiate_spectrum(&mut d, 1);
        spectral::idft(&d)
    };
    let (xa, ya) = (deriv(&x_hat)?, deriv(&y_hat)?);
    let speed: Vec<f64> = xa.values().iter().zip(ya.values()).map(|(a, b)| a.hypot(*b)).collect();
    let min_speed = speed.iter().copied().fold(f64::INFINITY, f64::min);
    let max_speed = speed.iter().copied().fold(0.0, f64::max);
    if !(min_speed > 1e-12 * max_speed) {
        return Err(GeometryError::NotRegular(min_speed));
    }
    let speed_hat = spectral::dft(&GridField::new(speed)?);
    let mean_speed = speed_hat.coeff(0).re;
    let length = 2.0 * PI * mean_speed;

    let mut periodic = speed_hat.clone();
    spectral::integrate_spectrum(&mut periodic);
    let arc_periodic = TrigSeries::new(&periodic);
    let speed_series = TrigSeries::new(&speed_hat);
    let offset = arc_periodic.eval(0.0);
    let arc = |a: f64| mean_speed * a + arc_periodic.eval(a) - offset;

    // Arc length on the fine grid brackets every target.
    let h_fine = 2.0 * PI / m_fine as f64;
    let table: Vec<f64> = (0..=m_fine).map(|k| arc(k as f64 * h_fine)).collect();
    let x_series = TrigSeries::new(&x_hat);
    let y_series = TrigSeries::new(&y_hat);
    let abs_tol = tol * length;

    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for j in 0..n {
        let target = j as f64 * length / n as f64;
        let alpha = if j == 0 {
            0.0
        } else {
            let k = table.partition_point(|&s| s <= target).clamp(1, m_fine);
            let (mut lo, mut hi) = ((k - 1) as f64 * h_fine, k as f64 * h_fine);
            let (s_lo, s_hi) = (table[k - 1], table[k]);
            let mut a = lo + (target - s_lo) / (s_hi - s_lo) * (hi - lo);
            let mut residual = f64::INFINITY;
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                residual = arc(a) - target;
                if residual > 0.0 {
                    hi = a;
                } else {
                    lo = a;
                }
                let step = residual / speed_series.eval(a);
                let mut next = a - step;
                if !(next > lo && next < hi) {
                    next = 0.5 * (lo + hi);
                }
                if (next - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0) {
                    a = next;
                    converged = true;
                    break;
                }
                a = next;
            }
            let final_residual = (arc(a) - target).abs();
            if !converged && final_residual > abs_tol {
                return Err(GeometryError::NoConvergence {
                    node: j,
                    residual: residual.abs().min(final_residual),
                });
            }
            if final_residual > abs_tol {
                return Err(GeometryError::NoConvergence {
                    node: j,
                    residual: final_residual,
                });
            }
            a
        };
        xs.push(x_series.eval(alpha));
        ys.push(y_series.eval(alpha));
    }
    Ok((CurvePoints { x: xs, y: ys }, length))
}

/// The θ-L state of a closed counterclockwise curve at equal arc-length nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaLState {
    /// Periodic part of the tangent angle, `θ(α) = α + φ(α)`.
    pub phi: GridField,
    pub length: f64,
    pub time: f64,
    /// Curve point at `α = 0`.
    pub anchor: (f64, f64),
}

impl ThetaLState {
    pub fn new(phi: GridField, length: f64, time: f64, anchor: (f64, f64)) -> Result<Self, GeometryError> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(GeometryError::InvalidLength(length));
        }
        Ok(Self {
            phi,
            length,
            time,
            anchor,
        })
    }

    pub fn n(&self) -> usize {
        self.phi.n()
    }

    /// `s_α = L/2π`.
    pub fn speed(&self) -> f64 {
        self.length / (2.0 * PI)
    }

    /// Unwrapped tangent angle samples `θ_k = α_k + φ_k`.
    pub fn theta(&self) -> Vec<f64> {
        spectral::nodes(self.n())
            .zip(self.phi.values())
            .map(|(a, p)| a + p)
            .collect()
    }

    /// Initial state of a catalog shape resampled at `n` equal arc-length nodes.
    pub fn from_shape(shape: &Shape, n: usize) -> Result<Self, GeometryError> {
        let curve = sample_catalog_curve(shape, n.max(256))?;
        let (points, length) = resample_equal_arclength(&curve, n, DEFAULT_RESAMPLE_TOL)?;
        extract_theta_l(&points, length)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Tangent angle from spectral derivatives of equal arc-length nodes.
pub fn extract_theta_l(points: &CurvePoints, length: f64) -> Result<ThetaLState, GeometryError> {
    let x = GridField::new(points.x.clone())?;
    let y = GridField::new(points.y.clone())?;
    if x.n() != y.n() {
        return Err(SpectralError::SizeMismatch(x.n(), y.n()).into());
    }
    let xa = spectral::spectral_derivative(&x, 1);
    let ya = spectral::spectral_derivative(&y, 1);
    let raw: Vec<f64> = xa
        .values()
        .iter()
        .zip(ya.values())
        .map(|(dx, dy)| dy.atan2(*dx))
        .collect();
    let n = raw.len();
    let mut theta = Vec::with_capacity(n);
    theta.push(raw[0]);
    for k in 1..n {
        theta.push(theta[k - 1] + wrap_angle(raw[k] - raw[k - 1]));
    }
    let total = theta[n - 1] + wrap_angle(raw[0] - raw[n - 1]) - theta[0];
    let turns = (total / (2.0 * PI)).round() as i64;
    if turns != 1 {
        return Err(GeometryError::WindingError(turns));
    }
    let phi: Vec<f64> = theta.iter().zip(spectral::nodes(n)).map(|(t, a)| t - a).collect();
    ThetaLState::new(GridField::new(phi)?, length, 0.0, (points.x[0], points.y[0]))
}

/// Node positions of the curve with anchor at the state's `anchor`.
pub fn reconstruct_curve(state: &ThetaLState) -> Result<CurvePoints, GeometryError> {
    reconstruct_curve_with_tolerance(state, DEFAULT_CLOSURE_TOL)
}

pub fn reconstruct_curve_with_tolerance(state: &ThetaLState, closure_tol: f64) -> Result<CurvePoints, GeometryError> {
    let speed = state.speed();
    let theta = state.theta();
    let gx = GridField::new(theta.iter().map(|t| speed * t.cos()).collect())?;
    let gy = GridField::new(theta.iter().map(|t| speed * t.sin()).collect())?;
    let (mx, my) = (gx.mean(), gy.mean());
    if mx.abs() > closure_tol || my.abs() > closure_tol {
        return Err(GeometryError::ClosureViolation(mx, my));
    }
    let ix = spectral::spectral_antiderivative(&gx);
    let iy = spectral::spectral_antiderivative(&gy);
    let (x0, y0) = state.anchor;
    let (ox, oy) = (ix.values()[0], iy.values()[0]);
    Ok(CurvePoints {
        x: ix.values().iter().map(|v| x0 + v - ox).collect(),
        y: iy.values().iter().map(|v| y0 + v - oy).collect(),
    })
}

/// Curvature samples `k_j` at the equal arc-length nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField(pub GridField);

impl CurvatureField {
    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn field(&self) -> &GridField {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }
}

/// `k = (2π/L)(1 + S_h φ)`.
pub fn curvature(state: &ThetaLState) -> CurvatureField {
    let dphi = spectral::spectral_derivative(&state.phi, 1);
    let scale = 2.0 * PI / state.length;
    CurvatureField(GridField::from_vec_unchecked(
        dphi.values().iter().map(|d| scale * (1.0 + d)).collect(),
    ))
}

/// Curvature from node coordinates, `(x_α y_αα − x_αα y_α)/s_α³`.
pub fn point_curvature(points: &CurvePoints) -> Result<GridField, GeometryError> {
    let x = GridField::new(points.x.clone())?;
    let y = GridField::new(points.y.clone())?;
    let (x1, x2) = (
        spectral::spectral_derivative(&x, 1),
        spectral::spectral_derivative(&x, 2),
    );
    let (y1, y2) = (
        spectral::spectral_derivative(&y, 1),
        spectral::spectral_derivative(&y, 2),
    );
    let k = (0..x.n())
        .map(|i| {
            let (xa, ya) = (x1.values()[i], y1.values()[i]);
            let s = xa.hypot(ya);
            (xa * y2.values()[i] - x2.values()[i] * ya) / (s * s * s)
        })
        .collect();
    Ok(GridField::new(k)?)
}

fn signed_area(x: &[f64], y: &[f64]) -> f64 {
    let xf = GridField::from_vec_unchecked(x.to_vec());
    let yf = GridField::from_vec_unchecked(y.to_vec());
    let xa = spectral::spectral_derivative(&xf, 1);
    let ya = spectral::spectral_derivative(&yf, 1);
    let h = xf.h();
    0.5 * h
        * (0..x.len())
            .map(|k| x[k] * ya.values()[k] - y[k] * xa.values()[k])
            .sum::<f64>()
}

/// `½ ∮ (x, y)·n ds`, orientation-normalized.
pub fn enclosed_area(points: &CurvePoints) -> f64 {
    signed_area(&points.x, &points.y).abs()
}

/// `√(Area/π)`.
pub fn recover_radius(points: &CurvePoints) -> f64 {
    (enclosed_area(points) / PI).sqrt()
}

/// `max_k (√(x_k² + y_k²) − r0)`, the largest radial excess over `r0`.
pub fn recover_perturbation(points: &CurvePoints, r0: f64) -> f64 {
    points
        .iter()
        .map(|(x, y)| x.hypot(y) - r0)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `max_k |√(x_k² + y_k²) − r0|`.
pub fn max_radial_deviation(points: &CurvePoints, r0: f64) -> f64 {
    points.iter().map(|(x, y)| (x.hypot(y) - r0).abs()).fold(0.0, f64::max)
}

/// Area-weighted centroid of the enclosed region.
pub fn centroid(points: &CurvePoints) -> (f64, f64) {
    let xf = GridField::from_vec_unchecked(points.x.clone());
    let yf = GridField::from_vec_unchecked(points.y.clone());
    let xa = spectral::spectral_derivative(&xf, 1);
    let ya = spectral::spectral_derivative(&yf, 1);
    let h = xf.h();
    let area = signed_area(&points.x, &points.y);
    let (mut cx, mut cy) = (0.0, 0.0);
    for k in 0..points.n() {
        cx += points.x[k] * points.x[k] * ya.values()[k];
        cy -= points.y[k] * points.y[k] * xa.values()[k];
    }
    (cx * h / (2.0 * area), cy * h / (2.0 * area))
}
