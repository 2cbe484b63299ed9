//! Pseudo-spectral solver for Airy flow of closed planar curves.
//!
//! A counterclockwise curve is carried as its tangent angle
//! `θ(α) = α + φ(α)` at equal arc-length nodes together with its length
//! `L`. Under Airy flow `L` is constant and `θ` obeys
//! `θ_t = (2π/L)³ (θ_ααα + θ_α³/2)`; the curvature `k = (2π/L) θ_α` then
//! solves the modified KdV equation `k_t = k_sss + (3/2) k² k_s`.
//!
//! * [`spectral`]: transforms, spectral calculus and filters.
//! * [`geometry`]: catalog curves, arc-length resampling, θ-L extraction and
//!   reconstruction, shape statistics.
//! * [`schemes`]: the ADB, CN and CNADB time integrators.
//! * [`diagnostics`]: conserved quantities, the linear oracle, mKdV residual
//!   and convergence orders.
//! * [`harness`]: configuration, presets, experiment drivers and CSV output.

// NaN must fail validation, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod geometry;
pub mod harness;
pub mod schemes;
pub mod spectral;

pub use diagnostics::{ConservedTriple, DiagnosticsError, LinearOracleState};
pub use geometry::{CurvatureField, CurvePoints, GeometryError, ParametricCurve, Shape, ThetaLState};
pub use harness::{HarnessError, RunConfig};
pub use schemes::{Scheme, SchemeConfig, SchemeError, Solver};
pub use spectral::{FilterMode, GridField, SpectralError, Spectrum};
