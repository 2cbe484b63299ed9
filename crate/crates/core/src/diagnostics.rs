//! Conserved quantities, the linear perturbation oracle, the mKdV residual
//! and convergence orders.

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::{self, CurvePoints, ThetaLState};
use crate::spectral::{self, GridField, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("relative drift undefined: |M3(0)| = {0:e}")]
    DegenerateBaseline(f64),
    #[error("need {needed} equally spaced snapshots, got {got}")]
    MissingSnapshots { needed: usize, got: usize },
    #[error("difference norm {0:e} is below the measurable floor")]
    NonPositiveError(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Smallest difference norm accepted by [`convergence_order`].
pub const MEASURABLE_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedTriple {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub time: f64,
}

/// `M1 = ∫k ds`, `M2 = ∫k² ds`, `M3 = ∫(½k_s² − ⅛k⁴) ds` by the
/// trapezoidal rule on the equal arc-length grid.
pub fn conserved_quantities(state: &ThetaLState) -> ConservedTriple {
    let k = geometry::curvature(state);
    let ks = arc_derivative(k.field(), state.length, 1);
    let ds = state.length / state.n() as f64;
    let (mut m1, mut m2, mut m3) = (0.0, 0.0, 0.0);
    for (&kv, &ksv) in k.values().iter().zip(ks.values()) {
        let k2 = kv * kv;
        m1 += kv;
        m2 += k2;
        m3 += 0.5 * ksv * ksv - 0.125 * k2 * k2;
    }
    ConservedTriple {
        m1: m1 * ds,
        m2: m2 * ds,
        m3: m3 * ds,
        time: state.time,
    }
}

/// `∂ⁿ/∂sⁿ = (2π/L)ⁿ ∂ⁿ/∂αⁿ`.
fn arc_derivative(f: &GridField, length: f64, order: u32) -> GridField {
    let scale = (2.0 * PI / length).powi(order as i32);
    let d = spectral::spectral_derivative(f, order);
    GridField::from_vec_unchecked(d.values().iter().map(|v| v * scale).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct M3Drift {
    /// `ξ_i = (M3(t_i) − M3(0)) / M3(0)`.
    pub xi: Vec<f64>,
    pub max_abs: f64,
}

pub fn relative_m3_error(series: &[ConservedTriple]) -> Result<M3Drift, DiagnosticsError> {
    let Some(first) = series.first() else {
        return Err(DiagnosticsError::MissingSnapshots { needed: 1, got: 0 });
    };
    let base = first.m3;
    if !(base.abs() >= 1e-14) {
        return Err(DiagnosticsError::DegenerateBaseline(base));
    }
    let xi: Vec<f64> = series.iter().map(|c| (c.m3 - base) / base).collect();
    let max_abs = xi.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    Ok(M3Drift { xi, max_abs })
}

/// Linearized evolution of `r = R₀ + δ₀ cos(mα)` under Airy flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOracleState {
    pub r: f64,
    pub delta_r: f64,
    pub delta_i: f64,
    pub tau: f64,
    pub m: u32,
    pub delta0: f64,
    pub time: f64,
}

impl LinearOracleState {
    /// `√(δ_R² + δ_I²)`, the perturbation amplitude `δ_L`.
    pub fn amplitude(&self) -> f64 {
        self.delta_r.hypot(self.delta_i)
    }

    /// `r_L(α) = R + δ_R cos(mα) − δ_I sin(mα)`.
    pub fn radius_at(&self, alpha: f64) -> f64 {
        let ma = self.m as f64 * alpha;
        self.r + self.delta_r * ma.cos() - self.delta_i * ma.sin()
    }

    /// `k_L(α) = 1/R + ((m² − 1)/R²)(δ_R cos(mα) − δ_I sin(mα))`.
    pub fn curvature_at(&self, alpha: f64) -> f64 {
        let m = self.m as f64;
        let ma = m * alpha;
        1.0 / self.r + (m * m - 1.0) / (self.r * self.r) * (self.delta_r * ma.cos() - self.delta_i * ma.sin())
    }

    /// Oracle curve sampled at polar angles `2πj/n`.
    pub fn sample(&self, n: usize) -> CurvePoints {
        let (x, y) = spectral::nodes(n)
            .map(|a| {
                let r = self.radius_at(a);
                (r * a.cos(), r * a.sin())
            })
            .unzip();
        CurvePoints { x, y }
    }
}

/// `τ = (m³ − 1.5m)/R₀³`, `δ_R = δ₀ cos τt`, `δ_I = δ₀ sin τt`, `R = R₀`.
pub fn linear_oracle(r0: f64, delta0: f64, m: u32, t: f64) -> Result<LinearOracleState, DiagnosticsError> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(DiagnosticsError::InvalidArgument(format!(
            "R0 must be positive, got {r0}"
        )));
    }
    if m < 2 {
        return Err(DiagnosticsError::InvalidArgument(format!(
            "wavenumber must be at least 2, got {m}"
        )));
    }
    let mf = m as f64;
    let tau = (mf.powi(3) - 1.5 * mf) / r0.powi(3);
    let (s, c) = (tau * t).sin_cos();
    Ok(LinearOracleState {
        r: r0,
        delta_r: delta0 * c,
        delta_i: delta0 * s,
        tau,
        m,
        delta0,
        time: t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearComparison {
    pub time: f64,
    pub delta_numeric: f64,
    pub radius_numeric: f64,
    /// `δ_L − δ̃_N`.
    pub delta_error: f64,
    /// `R_L − R̃_N`.
    pub radius_error: f64,
}

/// Compares reconstructed snapshots `(t, points)` against the linear oracle.
///
/// `R̃_N = √(Area/π)` and `δ̃_N = max(√(x² + y²) − R₀)`; the curve is
/// assumed centered at the origin.
pub fn linear_comparison(
    snapshots: &[(f64, CurvePoints)],
    r0: f64,
    delta0: f64,
    m: u32,
) -> Result<Vec<LinearComparison>, DiagnosticsError> {
    snapshots
        .iter()
        .map(|(t, points)| {
            let oracle = linear_oracle(r0, delta0, m, *t)?;
            let radius_numeric = geometry::recover_radius(points);
            let delta_numeric = geometry::recover_perturbation(points, r0);
            Ok(LinearComparison {
                time: *t,
                delta_numeric,
                radius_numeric,
                delta_error: oracle.amplitude() - delta_numeric,
                radius_error: oracle.r - radius_numeric,
            })
        })
        .collect()
}

/// `k_sss + (3/2) k² k_s`.
pub fn mkdv_rhs(k: &GridField, length: f64) -> GridField {
    let ks = arc_derivative(k, length, 1);
    let ksss = arc_derivative(k, length, 3);
    let values = k
        .values()
        .iter()
        .zip(ks.values())
        .zip(ksss.values())
        .map(|((kv, ksv), k3)| k3 + 1.5 * kv * kv * ksv)
        .collect();
    GridField::from_vec_unchecked(values)
}

/// `−V_ss + k_s T − k² V` with `V = −k_s`, `T = k²/2`.
pub fn mkdv_rhs_velocity_form(k: &GridField, length: f64) -> GridField {
    let ks = arc_derivative(k, length, 1);
    let v = GridField::from_vec_unchecked(ks.values().iter().map(|x| -x).collect());
    let vss = arc_derivative(&v, length, 2);
    let values = (0..k.n())
        .map(|i| {
            let kv = k.values()[i];
            let t = 0.5 * kv * kv;
            -vss.values()[i] + ks.values()[i] * t - kv * kv * v.values()[i]
        })
        .collect();
    GridField::from_vec_unchecked(values)
}

/// Max-norm of `(k(t+Δt) − k(t−Δt))/(2Δt) − (k_sss + 1.5k²k_s)(t)` for three
/// consecutive states of one trajectory.
pub fn mkdv_residual(states: &[ThetaLState]) -> Result<f64, DiagnosticsError> {
    let [prev, mid, next] = states else {
        return Err(DiagnosticsError::MissingSnapshots {
            needed: 3,
            got: states.len(),
        });
    };
    let dt = 0.5 * (next.time - prev.time);
    if !(dt > 0.0) || ((mid.time - prev.time) - dt).abs() > 1e-9 * dt {
        return Err(DiagnosticsError::InvalidArgument(
            "snapshots must be equally spaced in time".into(),
        ));
    }
    if prev.n() != mid.n() || next.n() != mid.n() {
        return Err(SpectralError::SizeMismatch(prev.n(), next.n()).into());
    }
    let (k0, k1, k2) = (
        geometry::curvature(prev),
        geometry::curvature(mid),
        geometry::curvature(next),
    );
    let rhs = mkdv_rhs(k1.field(), mid.length);
    Ok((0..mid.n())
        .map(|i| ((k2.values()[i] - k0.values()[i]) / (2.0 * dt) - rhs.values()[i]).abs())
        .fold(0.0, f64::max))
}

/// `log₂(e_first/e_last)/(len − 1)`: the mean observed order of a sequence of
/// difference norms at successive refinements by 2. For the usual pair
/// `[‖θ_Δt − θ_Δt/2‖, ‖θ_Δt/2 − θ_Δt/4‖]` this is `log₂(e1/e2)`.
pub fn convergence_order(errors: &[f64]) -> Result<f64, DiagnosticsError> {
    if errors.len() < 2 {
        return Err(DiagnosticsError::MissingSnapshots {
            needed: 2,
            got: errors.len(),
        });
    }
    if let Some(&bad) = errors.iter().find(|e| !(**e > MEASURABLE_FLOOR)) {
        return Err(DiagnosticsError::NonPositiveError(bad));
    }
    Ok((errors[0] / errors[errors.len() - 1]).log2() / (errors.len() - 1) as f64)
}

/// `‖θ_a − θ_b‖_{l²}` on the coarser of the two grids. The finer solution is
/// restricted to the coarse nodes (the grids nest).
pub fn state_difference_norm(a: &ThetaLState, b: &ThetaLState) -> Result<f64, DiagnosticsError> {
    let n = a.n().min(b.n());
    let fa = a.phi.restrict(n)?;
    let fb = b.phi.restrict(n)?;
    let diff: Vec<f64> = fa.values().iter().zip(fb.values()).map(|(x, y)| x - y).collect();
    Ok(GridField::new(diff)?.l2_norm())
}

/// `max |φ̂_m|²` over `|m| > N/4`.
pub fn spectral_tail(state: &ThetaLState) -> f64 {
    spectral::spectral_tail_max(&spectral::dft(&state.phi), state.n() as i64 / 4)
}
