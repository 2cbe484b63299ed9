//! Time integrators for the tangent-angle equation in Fourier space.
//!
//! Writing `θ = α + φ`, the periodic part obeys
//! `φ_t = (2π/L)³ [φ_ααα + (1 + φ_α)³/2]`. Mode by mode the linear part is
//! `-iγ_m/Δt` with `γ_m = Δt (2πm/L)³`, and the nonlinear term
//! `NL = (2π/L)³ θ_α³/2` is formed in physical space.
//!
//! * ADB: integrating factor `ζ_m = e^{-iγ_m}` with an Euler first step and
//!   second-order Adams–Bashforth afterwards.
//! * CN: Euler first step, then leapfrog with the linear term averaged
//!   between levels `j-1` and `j+1`.
//! * CNADB: CN whose first step is the mean of the ADB and CN first steps.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{self, GeometryError, ThetaLState};
use crate::spectral::{self, FilterMode, GridField, SpectralError, Spectrum};

/// Default blow-up guard on `max |φ|`.
pub const DEFAULT_MAX_PHI: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("step requires history from a previous step")]
    MissingHistory,
    #[error("final time {t_final} is not a whole number of steps of {dt} from {t_start}")]
    NonCommensurateTime { t_start: f64, t_final: f64, dt: f64 },
    #[error("solution blew up at step {step} (t = {time}): max |phi| = {max_phi:e}")]
    BlowUp { step: usize, time: f64, max_phi: f64 },
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Adb,
    Cn,
    Cnadb,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Adb, Scheme::Cn, Scheme::Cnadb];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Adb => "adb",
            Scheme::Cn => "cn",
            Scheme::Cnadb => "cnadb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adb" => Some(Scheme::Adb),
            "cn" => Some(Scheme::Cn),
            "cnadb" => Some(Scheme::Cnadb),
            _ => None,
        }
    }
}

/// Display name combining scheme and filter, e.g. `ADBDPR`, `CNK`.
pub fn variant_label(scheme: Scheme, filter: FilterMode) -> String {
    let base = scheme.name().to_ascii_uppercase();
    match filter {
        FilterMode::None => base,
        FilterMode::Dpr => format!("{base}DPR"),
        FilterMode::Krasny => format!("{base}K"),
        FilterMode::Both => format!("{base}DPRK"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub filter: FilterMode,
    pub n: usize,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, dt: f64, filter: FilterMode, n: usize) -> Self {
        Self { scheme, dt, filter, n }
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SchemeError::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !spectral::is_valid_grid_size(self.n) {
            return Err(SpectralError::InvalidGridSize(self.n).into());
        }
        Ok(())
    }
}

/// Per-mode propagators, constant along a trajectory since `L` is.
/// Stored in FFT order; use [`Multipliers::at`] for signed wavenumbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    /// `γ_m = Δt (2πm/L)³`.
    pub gamma: Vec<f64>,
    /// `ζ_m = e^{-iγ_m}`.
    pub zeta: Vec<Complex64>,
    /// `(1 - iγ_m)/(1 + iγ_m)`.
    pub zeta1: Vec<Complex64>,
    /// `(1 - iγ_m)/(1 + γ_m²)`.
    pub zeta2: Vec<Complex64>,
}

impl Multipliers {
    pub fn new(n: usize, dt: f64, length: f64) -> Self {
        let k = 2.0 * PI / length;
        let gamma: Vec<f64> = (0..n)
            .map(|i| {
                let m = spectral::wavenumber(i, n) as f64;
                dt * (k * m).powi(3)
            })
            .collect();
        let one = Complex64::new(1.0, 0.0);
        let zeta = gamma.iter().map(|&g| Complex64::from_polar(1.0, -g)).collect();
        let zeta1 = gamma
            .iter()
            .map(|&g| (one - Complex64::new(0.0, g)) / (one + Complex64::new(0.0, g)))
            .collect();
        let zeta2 = gamma
            .iter()
            .map(|&g| (one - Complex64::new(0.0, g)) / (1.0 + g * g))
            .collect();
        Self {
            gamma,
            zeta,
            zeta1,
            zeta2,
        }
    }

    /// `(γ_m, ζ_m, ζ¹_m, ζ²_m)` for signed wavenumber `m`.
    pub fn at(&self, m: i64) -> (f64, Complex64, Complex64, Complex64) {
        let i = m.rem_euclid(self.gamma.len() as i64) as usize;
        (self.gamma[i], self.zeta[i], self.zeta1[i], self.zeta2[i])
    }
}

/// Data handed to a nonlinear-term provider.
pub struct NlContext<'a> {
    pub length: f64,
    pub filter: FilterMode,
    symbols: &'a [Complex64],
}

impl NlContext<'_> {
    /// `D_h φ` on the grid, with the configured filter.
    pub fn filtered_derivative(&self, phi_hat: &Spectrum) -> Vec<f64> {
        let mut coeffs = phi_hat.as_fft_order().to_vec();
        spectral::apply_filtered_derivative(&mut coeffs, self.symbols, self.filter);
        spectral::inverse_raw(&coeffs).0
    }
}

/// Physical-space nonlinear term as a function of the current `φ̂`.
pub trait Nonlinearity: Send + Sync {
    fn evaluate(&self, phi_hat: &Spectrum, ctx: &NlContext<'_>) -> Vec<f64>;
}

/// `NL = (2π/L)³ (1 + D_h φ)³ / 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AiryNonlinearity;

impl Nonlinearity for AiryNonlinearity {
    fn evaluate(&self, phi_hat: &Spectrum, ctx: &NlContext<'_>) -> Vec<f64> {
        let scale = 0.5 * (2.0 * PI / ctx.length).powi(3);
        let mut d = ctx.filtered_derivative(phi_hat);
        for v in &mut d {
            let ta = 1.0 + *v;
            *v = scale * ta * ta * ta;
        }
        d
    }
}

/// `NL ≡ 0`: the purely linear (Airy) problem.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNonlinearity;

impl Nonlinearity for ZeroNonlinearity {
    fn evaluate(&self, phi_hat: &Spectrum, _ctx: &NlContext<'_>) -> Vec<f64> {
        vec![0.0; phi_hat.n()]
    }
}

impl<F> Nonlinearity for F
where
    F: Fn(&Spectrum, &NlContext<'_>) -> Vec<f64> + Send + Sync,
{
    fn evaluate(&self, phi_hat: &Spectrum, ctx: &NlContext<'_>) -> Vec<f64> {
        self(phi_hat, ctx)
    }
}

/// `NL` of a state with the Airy nonlinearity, in physical space.
pub fn nonlinear_term(state: &ThetaLState, filter: FilterMode) -> GridField {
    let symbols = spectral::first_derivative_symbols(state.n(), filter);
    let ctx = NlContext {
        length: state.length,
        filter,
        symbols: &symbols,
    };
    GridField::from_vec_unchecked(AiryNonlinearity.evaluate(&spectral::dft(&state.phi), &ctx))
}

/// Multistep history.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SchemeMemory {
    /// `N̂L` at the previous level (ADB).
    pub prev_nl: Option<Spectrum>,
    /// `φ̂` at the previous level (CN, CNADB).
    pub prev_theta: Option<Spectrum>,
    pub step_count: usize,
}

/// One-step kernels for a fixed configuration and curve length.
pub struct Stepper {
    cfg: SchemeConfig,
    length: f64,
    mult: Multipliers,
    zeta_sq: Vec<Complex64>,
    symbols: Vec<Complex64>,
    nl: Box<dyn Nonlinearity>,
}

impl Stepper {
    pub fn new(cfg: SchemeConfig, length: f64) -> Result<Self, SchemeError> {
        Self::with_nonlinearity(cfg, length, AiryNonlinearity)
    }

    pub fn with_nonlinearity(
        cfg: SchemeConfig,
        length: f64,
        nl: impl Nonlinearity + 'static,
    ) -> Result<Self, SchemeError> {
        cfg.validate()?;
        if !(length > 0.0 && length.is_finite()) {
            return Err(GeometryError::InvalidLength(length).into());
        }
        let mult = Multipliers::new(cfg.n, cfg.dt, length);
        let zeta_sq = mult.zeta.iter().map(|z| z * z).collect();
        Ok(Self {
            symbols: spectral::first_derivative_symbols(cfg.n, cfg.filter),
            cfg,
            length,
            mult,
            zeta_sq,
            nl: Box::new(nl),
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn multipliers(&self) -> &Multipliers {
        &self.mult
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `N̂L` of the given `φ̂`.
    pub fn nl_hat(&self, phi_hat: &Spectrum) -> Spectrum {
        let ctx = NlContext {
            length: self.length,
            filter: self.cfg.filter,
            symbols: &self.symbols,
        };
        let phys = self.nl.evaluate(phi_hat, &ctx);
        Spectrum::from_fft_order(spectral::forward_raw(&phys)).expect("grid size already validated")
    }

    /// Euler step with integrating factor: `ζ(φ̂ + Δt N̂L)`.
    pub fn adb_init(&self, phi: &Spectrum) -> (Spectrum, SchemeMemory) {
        let nl = self.nl_hat(phi);
        let dt = self.cfg.dt;
        let next = self.combine(|i| self.mult.zeta[i] * (phi.as_fft_order()[i] + dt * nl.as_fft_order()[i]));
        (
            next,
            SchemeMemory {
                prev_nl: Some(nl),
                prev_theta: None,
                step_count: 1,
            },
        )
    }

    /// `ζφ̂ʲ + (Δt/2)(3ζ N̂Lʲ − ζ² N̂Lʲ⁻¹)`.
    pub fn adb(&self, phi: &Spectrum, memory: &SchemeMemory) -> Result<(Spectrum, SchemeMemory), SchemeError> {
        let prev = match (&memory.prev_nl, memory.step_count) {
            (Some(p), c) if c >= 1 => p,
            _ => return Err(SchemeError::MissingHistory),
        };
        let nl = self.nl_hat(phi);
        let half_dt = 0.5 * self.cfg.dt;
        let (p, q, r) = (phi.as_fft_order(), nl.as_fft_order(), prev.as_fft_order());
        let next = self.combine(|i| {
            let z = self.mult.zeta[i];
            z * p[i] + half_dt * (3.0 * z * q[i] - self.zeta_sq[i] * r[i])
        });
        Ok((
            next,
            SchemeMemory {
                prev_nl: Some(nl),
                prev_theta: None,
                step_count: memory.step_count + 1,
            },
        ))
    }

    /// Explicit Euler: `φ̂ + Δt(L̂ + N̂L)` with `Δt L̂ = -iγ φ̂`.
    pub fn cn_init(&self, phi: &Spectrum) -> (Spectrum, SchemeMemory) {
        let nl = self.nl_hat(phi);
        let dt = self.cfg.dt;
        let (p, q) = (phi.as_fft_order(), nl.as_fft_order());
        let next = self.combine(|i| Complex64::new(1.0, -self.mult.gamma[i]) * p[i] + dt * q[i]);
        (next, self.leapfrog_memory(phi, 1))
    }

    /// Mean of the ADB and CN first steps.
    pub fn cnadb_init(&self, phi: &Spectrum) -> (Spectrum, SchemeMemory) {
        let nl = self.nl_hat(phi);
        let half_dt = 0.5 * self.cfg.dt;
        let (p, q) = (phi.as_fft_order(), nl.as_fft_order());
        let next = self.combine(|i| {
            let z = self.mult.zeta[i];
            let euler = Complex64::new(1.0, -self.mult.gamma[i]);
            0.5 * (z + euler) * p[i] + half_dt * (1.0 + z) * q[i]
        });
        (next, self.leapfrog_memory(phi, 1))
    }

    /// Leapfrog CN: `ζ¹ φ̂ʲ⁻¹ + 2Δt ζ² N̂Lʲ`.
    pub fn cn(&self, phi: &Spectrum, memory: &SchemeMemory) -> Result<(Spectrum, SchemeMemory), SchemeError> {
        let prev = match (&memory.prev_theta, memory.step_count) {
            (Some(p), c) if c >= 1 => p,
            _ => return Err(SchemeError::MissingHistory),
        };
        let nl = self.nl_hat(phi);
        let two_dt = 2.0 * self.cfg.dt;
        let (q, r) = (nl.as_fft_order(), prev.as_fft_order());
        let next = self.combine(|i| self.mult.zeta1[i] * r[i] + two_dt * self.mult.zeta2[i] * q[i]);
        Ok((next, self.leapfrog_memory(phi, memory.step_count + 1)))
    }

    /// One step of the configured scheme, choosing the first-step variant
    /// when the history is empty.
    pub fn step(&self, phi: &Spectrum, memory: &SchemeMemory) -> Result<(Spectrum, SchemeMemory), SchemeError> {
        if memory.step_count == 0 {
            return Ok(match self.cfg.scheme {
                Scheme::Adb => self.adb_init(phi),
                Scheme::Cn => self.cn_init(phi),
                Scheme::Cnadb => self.cnadb_init(phi),
            });
        }
        match self.cfg.scheme {
            Scheme::Adb => self.adb(phi, memory),
            Scheme::Cn | Scheme::Cnadb => self.cn(phi, memory),
        }
    }

    fn leapfrog_memory(&self, phi: &Spectrum, step_count: usize) -> SchemeMemory {
        SchemeMemory {
            prev_nl: None,
            prev_theta: Some(phi.clone()),
            step_count,
        }
    }

    /// Builds the next spectrum mode by mode. The Nyquist coefficient of a
    /// real field has no partner mode, so it is kept real.
    fn combine(&self, f: impl Fn(usize) -> Complex64) -> Spectrum {
        let n = self.cfg.n;
        let mut coeffs: Vec<Complex64> = (0..n).map(f).collect();
        coeffs[n / 2].im = 0.0;
        Spectrum::from_fft_order(coeffs).expect("grid size already validated")
    }

    fn check_state(&self, state: &ThetaLState) -> Result<Spectrum, SchemeError> {
        if state.n() != self.cfg.n {
            return Err(SchemeError::InvalidConfig(format!(
                "state has {} nodes, configuration expects {}",
                state.n(),
                self.cfg.n
            )));
        }
        if (state.length - self.length).abs() > 1e-12 * self.length {
            return Err(SchemeError::InvalidConfig(format!(
                "state length {} differs from stepper length {}",
                state.length, self.length
            )));
        }
        Ok(spectral::dft(&state.phi))
    }

    fn advance_state(&self, state: &ThetaLState, phi: &Spectrum) -> Result<ThetaLState, SchemeError> {
        let (field, _) = spectral::idft_with_residue(phi)?;
        Ok(ThetaLState::new(
            field,
            state.length,
            state.time + self.cfg.dt,
            state.anchor,
        )?)
    }
}

macro_rules! state_init_step {
    ($(#[$doc:meta])* $name:ident, $kernel:ident) => {
        $(#[$doc])*
        pub fn $name(state: &ThetaLState, cfg: &SchemeConfig) -> Result<(ThetaLState, SchemeMemory), SchemeError> {
            stepped_init(&Stepper::new(*cfg, state.length)?, state, |s, p| s.$kernel(p))
        }
    };
}

fn stepped_init(
    stepper: &Stepper,
    state: &ThetaLState,
    kernel: impl Fn(&Stepper, &Spectrum) -> (Spectrum, SchemeMemory),
) -> Result<(ThetaLState, SchemeMemory), SchemeError> {
    let phi = stepper.check_state(state)?;
    let (next, mem) = kernel(stepper, &phi);
    Ok((stepper.advance_state(state, &next)?, mem))
}

state_init_step!(
    /// First ADB step on a θ-L state. The anchor is carried unchanged.
    adb_init_step, adb_init
);
state_init_step!(
    /// First CN step on a θ-L state.
    cn_init_step, cn_init
);
state_init_step!(
    /// First CNADB step on a θ-L state.
    cnadb_init_step, cnadb_init
);

/// Subsequent ADB step on a θ-L state.
pub fn adb_step(
    state: &ThetaLState,
    memory: &SchemeMemory,
    cfg: &SchemeConfig,
) -> Result<(ThetaLState, SchemeMemory), SchemeError> {
    let stepper = Stepper::new(*cfg, state.length)?;
    let phi = stepper.check_state(state)?;
    let (next, mem) = stepper.adb(&phi, memory)?;
    Ok((stepper.advance_state(state, &next)?, mem))
}

/// Subsequent leapfrog CN step (used by CN and CNADB) on a θ-L state.
pub fn cn_step(
    state: &ThetaLState,
    memory: &SchemeMemory,
    cfg: &SchemeConfig,
) -> Result<(ThetaLState, SchemeMemory), SchemeError> {
    let stepper = Stepper::new(*cfg, state.length)?;
    let phi = stepper.check_state(state)?;
    let (next, mem) = stepper.cn(&phi, memory)?;
    Ok((stepper.advance_state(state, &next)?, mem))
}

/// Number of whole steps of `dt` covering `duration`.
pub fn step_count_for(t_start: f64, t_final: f64, dt: f64) -> Result<usize, SchemeError> {
    let ratio = (t_final - t_start) / dt;
    let k = ratio.round();
    if !(k >= 0.0) || (ratio - k).abs() > 1e-9 * k.max(1.0) {
        return Err(SchemeError::NonCommensurateTime { t_start, t_final, dt });
    }
    Ok(k as usize)
}

/// Receives states during [`integrate`].
pub trait Observer {
    /// Steps between calls; the initial and final states are always observed.
    fn stride(&self) -> usize;
    fn observe(&mut self, step: usize, state: &ThetaLState);
}

/// A trajectory in progress: `φ̂`, history and the stepper.
///
/// The curve position is not part of the θ-L dynamics. The centroid of the
/// enclosed region is invariant under Airy flow, so states handed out by
/// [`Solver::state`] place the curve with its initial centroid.
pub struct Solver {
    stepper: Stepper,
    phi_hat: Spectrum,
    memory: SchemeMemory,
    t_start: f64,
    steps: usize,
    centroid: (f64, f64),
    max_phi: f64,
}

impl Solver {
    pub fn new(initial: &ThetaLState, cfg: SchemeConfig) -> Result<Self, SchemeError> {
        Self::with_stepper(initial, Stepper::new(cfg, initial.length)?)
    }

    pub fn with_nonlinearity(
        initial: &ThetaLState,
        cfg: SchemeConfig,
        nl: impl Nonlinearity + 'static,
    ) -> Result<Self, SchemeError> {
        Self::with_stepper(initial, Stepper::with_nonlinearity(cfg, initial.length, nl)?)
    }

    fn with_stepper(initial: &ThetaLState, stepper: Stepper) -> Result<Self, SchemeError> {
        let phi_hat = stepper.check_state(initial)?;
        let points = geometry::reconstruct_curve_with_tolerance(initial, f64::INFINITY)?;
        Ok(Self {
            stepper,
            phi_hat,
            memory: SchemeMemory::default(),
            t_start: initial.time,
            steps: 0,
            centroid: geometry::centroid(&points),
            max_phi: DEFAULT_MAX_PHI,
        })
    }

    /// Blow-up threshold on `max |φ|`.
    pub fn set_max_phi(&mut self, max_phi: f64) {
        self.max_phi = max_phi;
    }

    pub fn config(&self) -> &SchemeConfig {
        self.stepper.config()
    }

    pub fn stepper(&self) -> &Stepper {
        &self.stepper
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.t_start + self.steps as f64 * self.stepper.cfg.dt
    }

    pub fn length(&self) -> f64 {
        self.stepper.length
    }

    pub fn phi_hat(&self) -> &Spectrum {
        &self.phi_hat
    }

    pub fn memory(&self) -> &SchemeMemory {
        &self.memory
    }

    pub fn step(&mut self) -> Result<(), SchemeError> {
        let (next, memory) = self.stepper.step(&self.phi_hat, &self.memory)?;
        self.phi_hat = next;
        self.memory = memory;
        self.steps += 1;
        self.guard()
    }

    pub fn advance(&mut self, steps: usize) -> Result<(), SchemeError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn guard(&self) -> Result<(), SchemeError> {
        let bound: f64 = self.phi_hat.as_fft_order().iter().map(|c| c.norm()).sum();
        if bound.is_finite() && bound <= self.max_phi {
            return Ok(());
        }
        let max_phi = if bound.is_finite() {
            spectral::inverse_raw(self.phi_hat.as_fft_order())
                .0
                .iter()
                .fold(
                    0.0_f64,
                    |a, v| if v.is_finite() { a.max(v.abs()) } else { f64::INFINITY },
                )
        } else {
            f64::INFINITY
        };
        if max_phi.is_finite() && max_phi <= self.max_phi {
            return Ok(());
        }
        Err(SchemeError::BlowUp {
            step: self.steps,
            time: self.time(),
            max_phi,
        })
    }

    /// `φ` on the grid without positioning the curve.
    pub fn phi(&self) -> Result<GridField, SchemeError> {
        Ok(spectral::idft(&self.phi_hat)?)
    }

    /// Current θ-L state with the anchor placed so the centroid is conserved.
    pub fn state(&self) -> Result<ThetaLState, SchemeError> {
        let mut state = ThetaLState::new(self.phi()?, self.length(), self.time(), (0.0, 0.0))?;
        let points = geometry::reconstruct_curve_with_tolerance(&state, f64::INFINITY)?;
        let (cx, cy) = geometry::centroid(&points);
        state.anchor = (self.centroid.0 - cx, self.centroid.1 - cy);
        Ok(state)
    }

    /// Advances to `t_final`, reporting to observers along the way.
    pub fn run_to(&mut self, t_final: f64, observers: &mut [&mut dyn Observer]) -> Result<(), SchemeError> {
        let total = step_count_for(self.time(), t_final, self.stepper.cfg.dt)?;
        let start = self.steps;
        let notify =
            |solver: &Solver, observers: &mut [&mut dyn Observer], k: usize, last: bool| -> Result<(), SchemeError> {
                let due: Vec<usize> = (0..observers.len())
                    .filter(|&i| {
                        let stride = observers[i].stride().max(1);
                        last || k == 0 || k.is_multiple_of(stride)
                    })
                    .collect();
                if due.is_empty() {
                    return Ok(());
                }
                let state = solver.state()?;
                for i in due {
                    observers[i].observe(start + k, &state);
                }
                Ok(())
            };
        notify(self, observers, 0, total == 0)?;
        for k in 1..=total {
            self.step()?;
            notify(self, observers, k, k == total)?;
        }
        Ok(())
    }
}

/// Integrates from `initial` to `t_final` with the Airy nonlinearity.
pub fn integrate(
    initial: &ThetaLState,
    cfg: SchemeConfig,
    t_final: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<ThetaLState, SchemeError> {
    let mut solver = Solver::new(initial, cfg)?;
    solver.run_to(t_final, observers)?;
    if solver.steps() == 0 {
        return Ok(initial.clone());
    }
    solver.state()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;

    fn circle_state(n: usize) -> ThetaLState {
        ThetaLState::new(GridField::constant(n, PI / 2.0).unwrap(), 2.0 * PI, 0.0, (1.0, 0.0)).unwrap()
    }

    fn mode_state(n: usize, length: f64, m: i64, amp: Complex64) -> (ThetaLState, Spectrum) {
        let mut s = Spectrum::zeros(n).unwrap();
        s.set(m, amp);
        s.set(-m, amp.conj());
        let phi = spectral::idft(&s).unwrap();
        (ThetaLState::new(phi, length, 0.0, (0.0, 0.0)).unwrap(), s)
    }

    fn max_nonzero_mode(s: &Spectrum) -> f64 {
        s.modes()
            .filter(|(m, _)| *m != 0)
            .fold(0.0, |a, (_, c)| a.max(c.norm()))
    }

    #[test]
    fn multipliers_are_unimodular() {
        let m = Multipliers::new(4096, 1e-3, 3.7);
        for i in 0..4096 {
            assert!((m.zeta[i].norm() - 1.0).abs() <= 1e-15);
            assert!((m.zeta1[i].norm() - 1.0).abs() <= 1e-15);
            assert!(m.zeta2[i].norm() <= 1.0 + 1e-15);
        }
        let (g, z, z1, z2) = m.at(0);
        assert_eq!((g, z, z1, z2), (0.0, 1.0.into(), 1.0.into(), 1.0.into()));
        let (_, zp, _, _) = m.at(5);
        let (_, zn, _, _) = m.at(-5);
        assert_eq!(zn, zp.conj());
    }

    #[test]
    fn nonlinear_term_of_circle() {
        let nl = nonlinear_term(&circle_state(32), FilterMode::None);
        assert!(nl.values().iter().all(|v| (v - 0.5).abs() < 1e-14));
    }

    #[test]
    fn nonlinear_term_of_single_mode() {
        let phi = GridField::from_fn(64, |a| 0.1 * a.sin()).unwrap();
        let state = ThetaLState::new(phi, 2.0 * PI, 0.0, (0.0, 0.0)).unwrap();
        let nl = nonlinear_term(&state, FilterMode::None);
        for (v, a) in nl.values().iter().zip(spectral::nodes(64)) {
            assert!((v - (1.0 + 0.1 * a.cos()).powi(3) / 2.0).abs() <= 1e-13);
        }
        let both = nonlinear_term(&state, FilterMode::Both);
        for (a, b) in nl.values().iter().zip(both.values()) {
            assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn adb_init_linear_is_exact() {
        let (state, s0) = mode_state(32, 2.0 * PI, 3, Complex64::new(0.2, -0.1));
        let cfg = SchemeConfig::new(Scheme::Adb, 1e-2, FilterMode::None, 32);
        let stepper = Stepper::with_nonlinearity(cfg, state.length, ZeroNonlinearity).unwrap();
        let (s1, mem) = stepper.adb_init(&s0);
        let zeta = Complex64::from_polar(1.0, -1e-2 * 27.0);
        assert!((s1.coeff(3) - zeta * s0.coeff(3)).norm() < 1e-16);
        assert_eq!(mem.step_count, 1);
        assert!(mem.prev_nl.is_some() && mem.prev_theta.is_none());
    }

    #[test]
    fn adb_init_zero_mode_and_circle() {
        let cfg = SchemeConfig::new(Scheme::Adb, 1e-3, FilterMode::None, 32);
        let circle = circle_state(32);
        let (next, _) = adb_init_step(&circle, &cfg).unwrap();
        // NL ≡ ½(2π/L)³ = ½ on the unit circle.
        for v in next.phi.values() {
            assert!((v - (PI / 2.0 + 0.5e-3)).abs() < 1e-15);
        }
        assert_eq!(next.time, 1e-3);

        // m = 0 mode advances by Δt N̂L_0 for any state.
        let phi = GridField::from_fn(32, |a| 0.3 + 0.05 * (2.0 * a).cos()).unwrap();
        let state = ThetaLState::new(phi, 2.0 * PI, 0.0, (0.0, 0.0)).unwrap();
        let nl0 = spectral::dft(&nonlinear_term(&state, FilterMode::None)).coeff(0);
        let (next, _) = adb_init_step(&state, &cfg).unwrap();
        let got = spectral::dft(&next.phi).coeff(0);
        assert!((got - (Complex64::new(0.3, 0.0) + 1e-3 * nl0)).norm() < 1e-15);
    }

    #[test]
    fn adb_linear_propagation_is_exact() {
        let length = 5.0;
        let n = 32;
        let (state, s0) = mode_state(n, length, 4, Complex64::new(0.1, 0.05));
        let dt = 1e-3;
        let cfg = SchemeConfig::new(Scheme::Adb, dt, FilterMode::None, n);
        let mut solver = Solver::with_nonlinearity(&state, cfg, ZeroNonlinearity).unwrap();
        solver.advance(1000).unwrap();
        let omega = (2.0 * PI * 4.0 / length).powi(3);
        let exact = s0.coeff(4) * Complex64::from_polar(1.0, -omega * 1000.0 * dt);
        assert!((solver.phi_hat().coeff(4) - exact).norm() <= 1e-13);
        assert!((solver.phi_hat().coeff(-4) - exact.conj()).norm() <= 1e-13);
    }

    #[test]
    fn adb_step_requires_history() {
        let cfg = SchemeConfig::new(Scheme::Adb, 1e-3, FilterMode::None, 32);
        let state = circle_state(32);
        assert_eq!(
            adb_step(&state, &SchemeMemory::default(), &cfg),
            Err(SchemeError::MissingHistory)
        );
        assert_eq!(
            cn_step(&state, &SchemeMemory::default(), &cfg),
            Err(SchemeError::MissingHistory)
        );
    }

    #[test]
    fn cn_init_examples() {
        let adb = SchemeConfig::new(Scheme::Adb, 1e-3, FilterMode::None, 32);
        let cn = SchemeConfig::new(Scheme::Cn, 1e-3, FilterMode::None, 32);
        let circle = circle_state(32);
        let (a, _) = adb_init_step(&circle, &adb).unwrap();
        let (c, mem) = cn_init_step(&circle, &cn).unwrap();
        for (x, y) in a.phi.values().iter().zip(c.phi.values()) {
            assert!((x - y).abs() <= 1e-15);
        }
        assert!(mem.prev_theta.is_some() && mem.prev_nl.is_none());

        // Zero state, NL = g: φ̂¹ = Δt ĝ.
        let g = |_: &Spectrum, _: &NlContext<'_>| -> Vec<f64> {
            spectral::nodes(32).map(|a| a.cos() + 0.5 * (3.0 * a).sin()).collect()
        };
        let stepper = Stepper::with_nonlinearity(cn, 2.0 * PI, g).unwrap();
        let zero = Spectrum::zeros(32).unwrap();
        let (s1, _) = stepper.cn_init(&zero);
        let g_hat = spectral::dft(&GridField::from_fn(32, |a| a.cos() + 0.5 * (3.0 * a).sin()).unwrap());
        for (m, c) in s1.modes() {
            assert!((c - 1e-3 * g_hat.coeff(m)).norm() < 1e-17);
        }

        // Single mode m = 1, L = 2π: factor 1 - i·1e-3.
        let stepper = Stepper::with_nonlinearity(cn, 2.0 * PI, ZeroNonlinearity).unwrap();
        let (_, s0) = mode_state(32, 2.0 * PI, 1, Complex64::new(0.7, 0.2));
        let (s1, _) = stepper.cn_init(&s0);
        assert!((s1.coeff(1) - Complex64::new(1.0, -1e-3) * s0.coeff(1)).norm() < 1e-16);
    }

    #[test]
    fn cn_linear_is_neutral() {
        let cfg = SchemeConfig::new(Scheme::Cn, 1e-2, FilterMode::None, 32);
        let (state, s0) = mode_state(32, 2.0 * PI, 5, Complex64::new(0.3, 0.4));
        let mut solver = Solver::with_nonlinearity(&state, cfg, ZeroNonlinearity).unwrap();
        solver.advance(1).unwrap();
        let after_first = solver.phi_hat().coeff(5).norm();
        solver.advance(500).unwrap();
        // Each leapfrog sub-sequence preserves its modulus.
        let later = solver.phi_hat().coeff(5).norm();
        let expected = if 501 % 2 == 1 { after_first } else { s0.coeff(5).norm() };
        assert!((later - expected).abs() < 1e-14);
    }

    #[test]
    fn cn_gamma_one_rotates_by_minus_i() {
        // L = 2π, m = 1, Δt = 1 gives γ = 1 and ζ¹ = -i.
        let cfg = SchemeConfig::new(Scheme::Cn, 1.0, FilterMode::None, 16);
        let stepper = Stepper::with_nonlinearity(cfg, 2.0 * PI, ZeroNonlinearity).unwrap();
        let (_, _, z1, _) = stepper.multipliers().at(1);
        assert!((z1 - Complex64::new(0.0, -1.0)).norm() < 1e-15, "{z1}");
        let (_, s0) = mode_state(16, 2.0 * PI, 1, Complex64::new(0.25, 0.1));
        let (s1, m1) = stepper.cn_init(&s0);
        let (s2, m2) = stepper.cn(&s1, &m1).unwrap();
        let (s3, m3) = stepper.cn(&s2, &m2).unwrap();
        let (s4, _) = stepper.cn(&s3, &m3).unwrap();
        let minus_i = Complex64::new(0.0, -1.0);
        assert!((s2.coeff(1) - minus_i * s0.coeff(1)).norm() < 1e-15);
        assert!((s3.coeff(1) - minus_i * s1.coeff(1)).norm() < 1e-15);
        assert!((s4.coeff(1) + s0.coeff(1)).norm() < 1e-15);
    }

    #[test]
    fn cnadb_init_is_average_of_first_steps() {
        let state = ThetaLState::from_shape(&Shape::e3(), 64).unwrap();
        let dt = 1e-3;
        let mk = |scheme| SchemeConfig::new(scheme, dt, FilterMode::None, 64);
        let (a, _) = adb_init_step(&state, &mk(Scheme::Adb)).unwrap();
        let (c, _) = cn_init_step(&state, &mk(Scheme::Cn)).unwrap();
        let (m, mem) = cnadb_init_step(&state, &mk(Scheme::Cnadb)).unwrap();
        let (ah, ch, mh) = (spectral::dft(&a.phi), spectral::dft(&c.phi), spectral::dft(&m.phi));
        for (k, v) in mh.modes() {
            assert!((v - 0.5 * (ah.coeff(k) + ch.coeff(k))).norm() <= 1e-13, "mode {k}");
        }
        assert!(mem.prev_theta.is_some());

        // Zero mode reduces to Euler.
        let nl0 = spectral::dft(&nonlinear_term(&state, FilterMode::None)).coeff(0);
        assert!((mh.coeff(0) - (spectral::dft(&state.phi).coeff(0) + dt * nl0)).norm() < 1e-15);
    }

    #[test]
    fn cnadb_tiny_step_is_identity() {
        let shape = Shape::Ellipse { a: 1.0, b: 0.9 };
        let state = ThetaLState::from_shape(&shape, 64).unwrap();
        let cfg = SchemeConfig::new(Scheme::Cnadb, 1e-10, FilterMode::None, 64);
        let (next, _) = cnadb_init_step(&state, &cfg).unwrap();
        let diff = next
            .phi
            .values()
            .iter()
            .zip(state.phi.values())
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(diff <= 1e-9, "{diff}");
    }

    #[test]
    fn circle_keeps_its_shape() {
        for scheme in Scheme::ALL {
            let cfg = SchemeConfig::new(scheme, 1e-3, FilterMode::None, 64);
            let mut solver = Solver::new(&circle_state(64), cfg).unwrap();
            solver.advance(1000).unwrap();
            assert!(max_nonzero_mode(solver.phi_hat()) <= 1e-12, "{scheme:?}");
            let k = geometry::curvature(&solver.state().unwrap());
            assert!(k.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn spectra_stay_conjugate_symmetric() {
        let state = ThetaLState::from_shape(&Shape::e3(), 128).unwrap();
        for scheme in Scheme::ALL {
            let cfg = SchemeConfig::new(scheme, 1e-4, FilterMode::None, 128);
            let mut solver = Solver::new(&state, cfg).unwrap();
            solver.advance(500).unwrap();
            assert!(solver.phi_hat().symmetry_defect() <= 1e-11, "{scheme:?}");
        }
    }

    #[test]
    fn conjugate_pair_modes_step_consistently() {
        let state = ThetaLState::from_shape(&Shape::e3(), 64).unwrap();
        let cfg = SchemeConfig::new(Scheme::Adb, 1e-3, FilterMode::None, 64);
        let stepper = Stepper::new(cfg, state.length).unwrap();
        let (s1, _) = stepper.adb_init(&spectral::dft(&state.phi));
        for m in 1..32 {
            assert!((s1.coeff(-m) - s1.coeff(m).conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn time_must_be_commensurate() {
        assert_eq!(step_count_for(0.0, 0.0, 1e-3).unwrap(), 0);
        assert_eq!(step_count_for(0.0, 2.0, 5e-4).unwrap(), 4000);
        assert!(matches!(
            step_count_for(0.0, 3.00000049, 1e-3),
            Err(SchemeError::NonCommensurateTime { .. })
        ));
        assert!(step_count_for(0.0, -1.0, 1e-3).is_err());
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let state = ThetaLState::from_shape(&Shape::e3(), 64).unwrap();
        let cfg = SchemeConfig::new(Scheme::Cnadb, 1e-3, FilterMode::None, 64);
        assert_eq!(integrate(&state, cfg, 0.0, &mut []).unwrap(), state);
    }

    struct Counter {
        stride: usize,
        seen: Vec<usize>,
    }

    impl Observer for Counter {
        fn stride(&self) -> usize {
            self.stride
        }
        fn observe(&mut self, step: usize, _state: &ThetaLState) {
            self.seen.push(step);
        }
    }

    #[test]
    fn observers_see_strides_and_final_state() {
        let state = circle_state(32);
        let cfg = SchemeConfig::new(Scheme::Cn, 1e-2, FilterMode::None, 32);
        let mut obs = Counter {
            stride: 4,
            seen: vec![],
        };
        let out = integrate(&state, cfg, 0.1, &mut [&mut obs]).unwrap();
        assert_eq!(obs.seen, vec![0, 4, 8, 10]);
        assert!((out.time - 0.1).abs() < 1e-15);
    }

    #[test]
    fn blow_up_is_detected() {
        let state = circle_state(32);
        let cfg = SchemeConfig::new(Scheme::Adb, 1e-2, FilterMode::None, 32);
        let huge = |p: &Spectrum, _: &NlContext<'_>| vec![1e6; p.n()];
        let mut solver = Solver::with_nonlinearity(&state, cfg, huge).unwrap();
        let err = solver.advance(10).unwrap_err();
        assert!(matches!(err, SchemeError::BlowUp { step: 1, .. }), "{err:?}");

        let nan = |p: &Spectrum, _: &NlContext<'_>| vec![f64::NAN; p.n()];
        let mut solver = Solver::with_nonlinearity(&state, cfg, nan).unwrap();
        assert!(matches!(solver.step(), Err(SchemeError::BlowUp { .. })));
    }

    #[test]
    fn centroid_is_tracked() {
        let state = ThetaLState::from_shape(&Shape::e3(), 128).unwrap();
        let cfg = SchemeConfig::new(Scheme::Adb, 1e-5, FilterMode::None, 128);
        let mut solver = Solver::new(&state, cfg).unwrap();
        solver.advance(2000).unwrap();
        let pts = geometry::reconstruct_curve(&solver.state().unwrap()).unwrap();
        let (cx, cy) = geometry::centroid(&pts);
        assert!(cx.abs() < 1e-9 && cy.abs() < 1e-9, "{cx} {cy}");
        let area0 = geometry::enclosed_area(&geometry::reconstruct_curve(&state).unwrap());
        let area = geometry::enclosed_area(&pts);
        assert!((area - area0).abs() < 1e-8, "{area} {area0}");
    }
}
