//! Experiment configuration, runs, studies and CSV output.
//!
//! Configurations are TOML with flat sections:
//!
//! ```toml
//! [shape]
//! name = "ellipse"   # circle | ellipse | perturbed_circle | e | e1 | e2 | e3 | pc3 | cardioid
//! a = 1.0
//! b = 0.5
//!
//! [run]
//! n = 512
//! dt = 5e-4
//! t_final = 2.0
//! scheme = "cnadb"           # adb | cn | cnadb
//! filter = "none"            # none | dpr | krasny | both
//! diagnostic_stride = 10     # steps between diagnostics rows (default 1)
//! snapshot_stride = 1000     # steps between curve/spectrum dumps (0: first and last only)
//! nonlinear = true           # false drops the nonlinear term
//! max_phi = 1e3              # blow-up guard
//!
//! [output]
//! dir = "out/e3"
//!
//! [convergence]              # optional; turns the file into a convergence study
//! axis = "time"              # time: dt, dt/2, dt/4 | space: n, 2n, 4n
//! comparison_time = 0.92
//! ```
//!
//! Shape parameters: `radius` (circle, perturbed_circle), `a`, `b` (ellipse),
//! `delta`, `mode` (perturbed_circle). With a `[convergence]` section
//! `t_final` may be omitted.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::diagnostics::{self, ConservedTriple, DiagnosticsError};
use crate::geometry::{self, GeometryError, Shape, ThetaLState};
use crate::schemes::{self, Observer, Scheme, SchemeConfig, SchemeError, Solver, ZeroNonlinearity};
use crate::spectral::{self, FilterMode};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    ValidationError(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::ValidationError(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub shape: Shape,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub filter: FilterMode,
    pub diagnostic_stride: usize,
    pub snapshot_stride: usize,
    pub nonlinear: bool,
    pub max_phi: f64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(shape: Shape, n: usize, dt: f64, t_final: f64, scheme: Scheme) -> Self {
        Self {
            shape,
            n,
            dt,
            t_final,
            scheme,
            filter: FilterMode::None,
            diagnostic_stride: 1,
            snapshot_stride: 0,
            nonlinear: true,
            max_phi: schemes::DEFAULT_MAX_PHI,
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig::new(self.scheme, self.dt, self.filter, self.n)
    }

    pub fn steps(&self) -> usize {
        schemes::step_count_for(0.0, self.t_final, self.dt).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.shape.validate()?;
        self.scheme_config().validate().map_err(|e| invalid(e.to_string()))?;
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(invalid(format!("t_final must be non-negative, got {}", self.t_final)));
        }
        if schemes::step_count_for(0.0, self.t_final, self.dt).is_err() {
            return Err(invalid(format!(
                "t_final / dt must be an integer (t_final = {}, dt = {})",
                self.t_final, self.dt
            )));
        }
        if self.diagnostic_stride == 0 {
            return Err(invalid("diagnostic_stride must be at least 1"));
        }
        if !(self.max_phi > 0.0) {
            return Err(invalid("max_phi must be positive"));
        }
        Ok(())
    }

    /// Fully resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        s.push_str("[shape]\n");
        s.push_str(&shape_toml(&self.shape));
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "dt = {}", fmt_toml_float(self.dt));
        let _ = writeln!(s, "t_final = {}", fmt_toml_float(self.t_final));
        let _ = writeln!(s, "scheme = \"{}\"", self.scheme.name());
        let _ = writeln!(s, "filter = \"{}\"", self.filter.name());
        let _ = writeln!(s, "diagnostic_stride = {}", self.diagnostic_stride);
        let _ = writeln!(s, "snapshot_stride = {}", self.snapshot_stride);
        let _ = writeln!(s, "nonlinear = {}", self.nonlinear);
        let _ = writeln!(s, "max_phi = {}", fmt_toml_float(self.max_phi));
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", toml_string(&self.output_dir.display().to_string()));
        s
    }
}

fn shape_toml(shape: &Shape) -> String {
    match *shape {
        Shape::Circle { radius } => format!("name = \"circle\"\nradius = {}\n", fmt_toml_float(radius)),
        Shape::Ellipse { a, b } => format!(
            "name = \"ellipse\"\na = {}\nb = {}\n",
            fmt_toml_float(a),
            fmt_toml_float(b)
        ),
        Shape::PerturbedCircle { radius, delta, mode } => format!(
            "name = \"perturbed_circle\"\nradius = {}\ndelta = {}\nmode = {mode}\n",
            fmt_toml_float(radius),
            fmt_toml_float(delta)
        ),
        Shape::Cardioid => "name = \"cardioid\"\n".to_string(),
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Shortest round-tripping float that TOML reads back as a float.
fn fmt_toml_float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'i', 'N']) {
        s
    } else {
        format!("{s}.0")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Time,
    Space,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Time => "time",
            Axis::Space => "space",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudyConfig {
    /// Coarsest level: largest `dt` (time axis) or smallest `n` (space axis).
    pub base: RunConfig,
    pub axis: Axis,
    pub comparison_time: f64,
}

impl ConvergenceStudyConfig {
    pub fn new(base: RunConfig, axis: Axis, comparison_time: f64) -> Self {
        Self {
            base,
            axis,
            comparison_time,
        }
    }

    /// The three runs, coarsest first, each ending at the comparison time.
    pub fn levels(&self) -> Vec<RunConfig> {
        (0..3)
            .map(|i| {
                let mut cfg = self.base.clone();
                cfg.t_final = self.comparison_time;
                match self.axis {
                    Axis::Time => cfg.dt = self.base.dt / f64::from(1u32 << i),
                    Axis::Space => cfg.n = self.base.n << i,
                }
                cfg
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.comparison_time > 0.0) {
            return Err(invalid("comparison_time must be positive"));
        }
        for level in self.levels() {
            level.validate().map_err(|e| match e {
                HarnessError::ValidationError(m) => invalid(format!("{} axis level: {m}", self.axis.name())),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        let mut base = self.base.clone();
        base.t_final = self.comparison_time;
        format!(
            "{}\n[convergence]\naxis = \"{}\"\ncomparison_time = {}\n",
            base.to_toml(),
            self.axis.name(),
            fmt_toml_float(self.comparison_time)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedConfig {
    Run(RunConfig),
    Convergence(ConvergenceStudyConfig),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    shape: RawShape,
    run: RawRun,
    #[serde(default)]
    output: RawOutput,
    convergence: Option<RawConvergence>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShape {
    name: String,
    radius: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    delta: Option<f64>,
    mode: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    n: usize,
    dt: f64,
    t_final: Option<f64>,
    scheme: String,
    #[serde(default)]
    filter: Option<String>,
    diagnostic_stride: Option<usize>,
    snapshot_stride: Option<usize>,
    nonlinear: Option<bool>,
    max_phi: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConvergence {
    axis: String,
    comparison_time: f64,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn build_shape(raw: &RawShape) -> Result<Shape, HarnessError> {
    let name = raw.name.to_ascii_lowercase();
    let allowed: &[&str] = match name.as_str() {
        "circle" => &["radius"],
        "ellipse" => &["a", "b"],
        "perturbed_circle" | "pc" => &["radius", "delta", "mode"],
        _ => &[],
    };
    let given = [
        ("radius", raw.radius.is_some()),
        ("a", raw.a.is_some()),
        ("b", raw.b.is_some()),
        ("delta", raw.delta.is_some()),
        ("mode", raw.mode.is_some()),
    ];
    if let Some((key, _)) = given.iter().find(|(k, set)| *set && !allowed.contains(k)) {
        return Err(invalid(format!("shape `{}` takes no parameter `{key}`", raw.name)));
    }
    let shape = match name.as_str() {
        "circle" => Shape::Circle {
            radius: raw.radius.unwrap_or(1.0),
        },
        "ellipse" => Shape::Ellipse {
            a: raw.a.unwrap_or(1.0),
            b: raw.b.unwrap_or(0.5),
        },
        "perturbed_circle" | "pc" => Shape::PerturbedCircle {
            radius: raw.radius.unwrap_or(1.0),
            delta: raw.delta.unwrap_or(0.4),
            mode: raw.mode.unwrap_or(3),
        },
        _ => Shape::from_name(&name, &[]).map_err(|e| invalid(e.to_string()))?,
    };
    shape.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(shape)
}

pub fn parse_config(text: &str) -> Result<ParsedConfig, HarnessError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        HarnessError::ParseError {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let shape = build_shape(&raw.shape)?;
    let scheme =
        Scheme::parse(&raw.run.scheme).ok_or_else(|| invalid(format!("unknown scheme `{}`", raw.run.scheme)))?;
    let filter = match &raw.run.filter {
        Some(f) => FilterMode::parse(f).ok_or_else(|| invalid(format!("unknown filter `{f}`")))?,
        None => FilterMode::None,
    };
    let t_final = match (raw.run.t_final, &raw.convergence) {
        (Some(t), _) => t,
        (None, Some(c)) => c.comparison_time,
        (None, None) => return Err(invalid("run.t_final is required")),
    };
    let mut cfg = RunConfig::new(shape, raw.run.n, raw.run.dt, t_final, scheme);
    cfg.filter = filter;
    if let Some(s) = raw.run.diagnostic_stride {
        cfg.diagnostic_stride = s;
    }
    if let Some(s) = raw.run.snapshot_stride {
        cfg.snapshot_stride = s;
    }
    if let Some(nl) = raw.run.nonlinear {
        cfg.nonlinear = nl;
    }
    if let Some(m) = raw.run.max_phi {
        cfg.max_phi = m;
    }
    if let Some(dir) = raw.output.dir {
        cfg.output_dir = dir;
    }
    match raw.convergence {
        None => {
            cfg.validate()?;
            Ok(ParsedConfig::Run(cfg))
        }
        Some(c) => {
            let axis = match c.axis.to_ascii_lowercase().as_str() {
                "time" => Axis::Time,
                "space" => Axis::Space,
                other => return Err(invalid(format!("unknown convergence axis `{other}`"))),
            };
            let study = ConvergenceStudyConfig::new(cfg, axis, c.comparison_time);
            study.validate()?;
            Ok(ParsedConfig::Convergence(study))
        }
    }
}

pub fn load_config(path: &Path) -> Result<ParsedConfig, HarnessError> {
    parse_config(&fs::read_to_string(path).map_err(io_err(path))?)
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row of `diagnostics.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub conserved: ConservedTriple,
    pub xi: f64,
    pub max_k: f64,
    pub delta_n: f64,
    pub r_n: f64,
    pub tail_max: f64,
}

pub const DIAGNOSTICS_HEADER: &str = "time,M1,M2,M3,xi,max_abs_k,delta_N,R_N,tail_max";

impl DiagnosticsRow {
    pub fn csv(&self) -> String {
        let c = &self.conserved;
        [
            c.time,
            c.m1,
            c.m2,
            c.m3,
            self.xi,
            self.max_k,
            self.delta_n,
            self.r_n,
            self.tail_max,
        ]
        .iter()
        .map(|v| fmt_float(*v))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// Collects diagnostics along a trajectory.
///
/// `δ̃_N = max(|X − c| − R₀)` and `R̃_N = √(Area/π)` with `c` the initial
/// centroid. `R₀` is the reference radius if one is given, else
/// `√(initial area/π)`.
pub struct DiagnosticsRecorder {
    stride: usize,
    center: Option<(f64, f64)>,
    reference_radius: Option<f64>,
    r0: f64,
    m3_0: f64,
    pub rows: Vec<DiagnosticsRow>,
}

impl DiagnosticsRecorder {
    pub fn new(stride: usize) -> Self {
        Self {
            stride,
            center: None,
            reference_radius: None,
            r0: 0.0,
            m3_0: f64::NAN,
            rows: Vec::new(),
        }
    }

    pub fn with_reference_radius(mut self, r0: Option<f64>) -> Self {
        self.reference_radius = r0;
        self
    }

    pub fn max_xi(&self) -> f64 {
        self.rows.iter().fold(0.0, |a, r| a.max(r.xi.abs()))
    }

    pub fn csv(&self) -> String {
        let mut s = String::from(DIAGNOSTICS_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv());
            s.push('\n');
        }
        s
    }
}

impl Observer for DiagnosticsRecorder {
    fn stride(&self) -> usize {
        self.stride
    }

    fn observe(&mut self, step: usize, state: &ThetaLState) {
        let conserved = diagnostics::conserved_quantities(state);
        let points = geometry::reconstruct_curve_with_tolerance(state, f64::INFINITY).expect("grid already validated");
        let area = geometry::enclosed_area(&points);
        let (cx, cy) = *self.center.get_or_insert_with(|| geometry::centroid(&points));
        if self.rows.is_empty() {
            self.r0 = self
                .reference_radius
                .unwrap_or_else(|| (area / std::f64::consts::PI).sqrt());
            self.m3_0 = conserved.m3;
        }
        let xi = if self.m3_0.abs() >= 1e-14 {
            (conserved.m3 - self.m3_0) / self.m3_0 + 0.0
        } else {
            f64::NAN
        };
        self.rows.push(DiagnosticsRow {
            step,
            conserved,
            xi,
            max_k: geometry::curvature(state).max_abs(),
            delta_n: geometry::recover_perturbation(&points.translated(-cx, -cy), self.r0),
            r_n: (area / std::f64::consts::PI).sqrt(),
            tail_max: diagnostics::spectral_tail(state),
        });
    }
}

/// Writes `curve_t*.csv` and `spectrum_t*.csv` into a directory.
pub struct SnapshotWriter {
    stride: usize,
    dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub error: Option<HarnessError>,
}

impl SnapshotWriter {
    pub fn new(dir: PathBuf, stride: usize) -> Self {
        Self {
            stride,
            dir,
            files: Vec::new(),
            error: None,
        }
    }

    fn write(&mut self, state: &ThetaLState) -> Result<(), HarnessError> {
        let points = geometry::reconstruct_curve_with_tolerance(state, f64::INFINITY)?;
        let k = geometry::curvature(state);
        let tag = format!("{:.8}", state.time);
        let mut curve = String::from("alpha,x,y,k\n");
        for (j, alpha) in spectral::nodes(state.n()).enumerate() {
            let _ = writeln!(
                curve,
                "{},{},{},{}",
                fmt_float(alpha),
                fmt_float(points.x[j]),
                fmt_float(points.y[j]),
                fmt_float(k.values()[j])
            );
        }
        let curve_path = self.dir.join(format!("curve_t{tag}.csv"));
        fs::write(&curve_path, curve).map_err(io_err(&curve_path))?;
        let spectrum_path = self.dir.join(format!("spectrum_t{tag}.csv"));
        fs::write(&spectrum_path, spectrum_csv(state)).map_err(io_err(&spectrum_path))?;
        self.files.push(curve_path);
        self.files.push(spectrum_path);
        Ok(())
    }
}

fn spectrum_csv(state: &ThetaLState) -> String {
    let spec = spectral::dft(&state.phi);
    let power = spectral::power_spectrum(&spec);
    let mut s = String::from("m,power\n");
    for ((m, _), p) in spec.modes().zip(power) {
        let _ = writeln!(s, "{m},{}", fmt_float(p));
    }
    s
}

impl Observer for SnapshotWriter {
    fn stride(&self) -> usize {
        if self.stride == 0 {
            usize::MAX
        } else {
            self.stride
        }
    }

    fn observe(&mut self, _step: usize, state: &ThetaLState) {
        if self.error.is_none() {
            if let Err(e) = self.write(state) {
                self.error = Some(e);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    BlowUp {
        step: usize,
        time: f64,
        max_phi: f64,
    },
    /// Any other error; only filter studies record it instead of returning it.
    Failed(String),
}

impl RunStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::BlowUp { .. } => "blow_up",
            RunStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: RunStatus,
    pub steps: usize,
    pub wall_time: f64,
    pub max_xi: f64,
    pub rows: Vec<DiagnosticsRow>,
    pub files: Vec<PathBuf>,
    pub final_state: Option<ThetaLState>,
}

/// Radius of the unperturbed circle, if the shape has one.
pub fn base_radius(shape: &Shape) -> Option<f64> {
    match *shape {
        Shape::Circle { radius } | Shape::PerturbedCircle { radius, .. } => Some(radius),
        _ => None,
    }
}

fn solver_for(cfg: &RunConfig, initial: &ThetaLState) -> Result<Solver, SchemeError> {
    let mut solver = if cfg.nonlinear {
        Solver::new(initial, cfg.scheme_config())?
    } else {
        Solver::with_nonlinearity(initial, cfg.scheme_config(), ZeroNonlinearity)?
    };
    solver.set_max_phi(cfg.max_phi);
    Ok(solver)
}

/// Integrates `cfg` in memory, observing with `observers`. A blow-up is
/// reported in the status rather than as an error.
pub fn simulate(
    cfg: &RunConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<(RunStatus, usize, Option<ThetaLState>), HarnessError> {
    cfg.validate()?;
    let initial = ThetaLState::from_shape(&cfg.shape, cfg.n)?;
    let mut solver = solver_for(cfg, &initial)?;
    match solver.run_to(cfg.t_final, observers) {
        Ok(()) => {
            let state = solver.state()?;
            Ok((RunStatus::Completed, solver.steps(), Some(state)))
        }
        Err(SchemeError::BlowUp { step, time, max_phi }) => Ok((RunStatus::BlowUp { step, time, max_phi }, step, None)),
        Err(e) => Err(e.into()),
    }
}

/// Runs one experiment and writes `diagnostics.csv`, `snapshots/`,
/// `config.toml` and `manifest.toml` into `cfg.output_dir`.
///
/// On blow-up the partial outputs are written, the manifest is flagged and
/// the error is returned.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir).map_err(io_err(&snap_dir))?;
    let config_path = dir.join("config.toml");
    fs::write(&config_path, cfg.to_toml()).map_err(io_err(&config_path))?;

    let start = Instant::now();
    let mut diag = DiagnosticsRecorder::new(cfg.diagnostic_stride).with_reference_radius(base_radius(&cfg.shape));
    let mut snaps = SnapshotWriter::new(snap_dir, cfg.snapshot_stride);
    let (status, steps, final_state) = simulate(cfg, &mut [&mut diag, &mut snaps])?;
    let wall_time = start.elapsed().as_secs_f64();
    if let Some(e) = snaps.error.take() {
        return Err(e);
    }

    let diag_path = dir.join("diagnostics.csv");
    fs::write(&diag_path, diag.csv()).map_err(io_err(&diag_path))?;
    let mut files = vec![config_path, diag_path];
    files.extend(snaps.files);

    let manifest_path = dir.join("manifest.toml");
    let mut m = String::new();
    let _ = writeln!(m, "[result]");
    let _ = writeln!(m, "status = \"{}\"", status.name());
    let _ = writeln!(m, "steps = {steps}");
    let _ = writeln!(m, "wall_time_s = {}", fmt_toml_float(wall_time));
    let _ = writeln!(m, "max_abs_xi = {}", fmt_toml_float(diag.max_xi()));
    if let RunStatus::BlowUp { step, time, max_phi } = &status {
        let _ = writeln!(m, "blow_up_step = {step}");
        let _ = writeln!(m, "blow_up_time = {}", fmt_toml_float(*time));
        let _ = writeln!(m, "blow_up_max_phi = {}", fmt_toml_float(*max_phi));
    }
    let names: Vec<String> = files
        .iter()
        .map(|p| toml_string(&p.strip_prefix(dir).unwrap_or(p).display().to_string()))
        .collect();
    let _ = writeln!(m, "files = [{}]", names.join(", "));
    let _ = writeln!(m, "\n# configuration echo");
    m.push_str(
        &cfg.to_toml()
            .replace("[shape]", "[config.shape]")
            .replace("[run]", "[config.run]")
            .replace("[output]", "[config.output]"),
    );
    fs::write(&manifest_path, m).map_err(io_err(&manifest_path))?;

    let summary = RunSummary {
        max_xi: diag.max_xi(),
        rows: diag.rows,
        status: status.clone(),
        steps,
        wall_time,
        files,
        final_state,
    };
    match status {
        RunStatus::Completed => Ok(summary),
        RunStatus::BlowUp { step, time, max_phi } => Err(SchemeError::BlowUp { step, time, max_phi }.into()),
        RunStatus::Failed(msg) => Err(invalid(msg)),
    }
}

/// Runs `f` over `items` on a pool of `parallel` threads (0: rayon default).
pub fn run_parallel<T, R, F>(items: Vec<T>, parallel: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    let run = || items.into_par_iter().map(&f).collect();
    match rayon::ThreadPoolBuilder::new().num_threads(parallel).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub curve: String,
    pub scheme: String,
    pub t0: f64,
    pub err1: f64,
    pub err2: f64,
    /// `None` when the difference norms are at round-off level.
    pub order: Option<f64>,
}

pub const CONVERGENCE_HEADER: &str = "curve,scheme,t0,err1,err2,order";

impl ConvergenceRow {
    pub fn csv(&self) -> String {
        let order = self.order.map_or_else(|| "exact".to_string(), fmt_float);
        format!(
            "{},{},{},{},{},{}",
            self.curve,
            self.scheme,
            fmt_float(self.t0),
            fmt_float(self.err1),
            fmt_float(self.err2),
            order
        )
    }
}

/// Difference norms at or below this are round-off; the row reports
/// `exact` instead of an order.
pub const EXACT_FLOOR: f64 = 1e-13;

/// Final states of the three levels of a study.
pub fn convergence_states(study: &ConvergenceStudyConfig, parallel: usize) -> Result<Vec<ThetaLState>, HarnessError> {
    study.validate()?;
    let results = run_parallel(study.levels(), parallel, |level| -> Result<ThetaLState, HarnessError> {
        match simulate(&level, &mut [])? {
            (RunStatus::Completed, _, Some(state)) => Ok(state),
            (RunStatus::BlowUp { step, time, max_phi }, ..) => Err(SchemeError::BlowUp { step, time, max_phi }.into()),
            (RunStatus::Failed(msg), ..) => Err(invalid(msg)),
            _ => unreachable!("completed runs carry a state"),
        }
    });
    results.into_iter().collect()
}

/// Runs the three levels and computes the table row.
pub fn convergence_row(study: &ConvergenceStudyConfig, parallel: usize) -> Result<ConvergenceRow, HarnessError> {
    let states = convergence_states(study, parallel)?;
    let err1 = diagnostics::state_difference_norm(&states[0], &states[1])?;
    let err2 = diagnostics::state_difference_norm(&states[1], &states[2])?;
    let order = if err1.max(err2) <= EXACT_FLOOR {
        None
    } else {
        match diagnostics::convergence_order(&[err1, err2]) {
            Ok(o) => Some(o),
            Err(DiagnosticsError::NonPositiveError(_)) => None,
            Err(e) => return Err(e.into()),
        }
    };
    Ok(ConvergenceRow {
        curve: study.base.shape.label(),
        scheme: schemes::variant_label(study.base.scheme, study.base.filter),
        t0: study.comparison_time,
        err1,
        err2,
        order,
    })
}

/// Runs a study and writes `convergence.csv` and `config.toml` into the base
/// output directory.
pub fn run_convergence_study(study: &ConvergenceStudyConfig, parallel: usize) -> Result<ConvergenceRow, HarnessError> {
    let row = convergence_row(study, parallel)?;
    let dir = &study.base.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let config_path = dir.join("config.toml");
    fs::write(&config_path, study.to_toml()).map_err(io_err(&config_path))?;
    let path = dir.join("convergence.csv");
    fs::write(&path, format!("{CONVERGENCE_HEADER}\n{}\n", row.csv())).map_err(io_err(&path))?;
    Ok(row)
}

/// The scheme and filter combinations compared in a filter study.
pub const FILTER_STUDY_VARIANTS: [(Scheme, FilterMode); 7] = [
    (Scheme::Adb, FilterMode::None),
    (Scheme::Adb, FilterMode::Dpr),
    (Scheme::Adb, FilterMode::Krasny),
    (Scheme::Cn, FilterMode::None),
    (Scheme::Cn, FilterMode::Dpr),
    (Scheme::Cn, FilterMode::Krasny),
    (Scheme::Cnadb, FilterMode::None),
];

#[derive(Debug, Clone)]
pub struct FilterRun {
    pub label: String,
    pub scheme: Scheme,
    pub filter: FilterMode,
    pub status: RunStatus,
    /// `(time, ξ)` at every diagnostics step reached.
    pub xi: Vec<(f64, f64)>,
    /// `(m, |φ̂_m|²)` of the last state reached.
    pub spectrum: Vec<(i64, f64)>,
    /// Time of the last state reached.
    pub final_time: f64,
    pub tail_max: f64,
}

impl FilterRun {
    pub fn max_xi(&self) -> f64 {
        self.xi.iter().fold(0.0, |a, (_, x)| a.max(x.abs()))
    }
}

/// Keeps the last observed state and a ξ series.
struct LastState {
    stride: usize,
    m3_0: Option<f64>,
    xi: Vec<(f64, f64)>,
    last: Option<ThetaLState>,
}

impl Observer for LastState {
    fn stride(&self) -> usize {
        self.stride
    }

    fn observe(&mut self, _step: usize, state: &ThetaLState) {
        let m3 = diagnostics::conserved_quantities(state).m3;
        let m3_0 = *self.m3_0.get_or_insert(m3);
        self.xi.push((state.time, (m3 - m3_0) / m3_0));
        self.last = Some(state.clone());
    }
}

/// Runs every [`FILTER_STUDY_VARIANTS`] entry from the same initial data.
pub fn filter_study_runs(base: &RunConfig, parallel: usize) -> Result<Vec<FilterRun>, HarnessError> {
    base.validate()?;
    let runs = run_parallel(FILTER_STUDY_VARIANTS.to_vec(), parallel, |(scheme, filter)| {
        filter_run(base, scheme, filter).unwrap_or_else(|e| FilterRun {
            label: schemes::variant_label(scheme, filter),
            scheme,
            filter,
            status: RunStatus::Failed(e.to_string()),
            xi: Vec::new(),
            spectrum: Vec::new(),
            final_time: f64::NAN,
            tail_max: f64::NAN,
        })
    });
    Ok(runs)
}

fn filter_run(base: &RunConfig, scheme: Scheme, filter: FilterMode) -> Result<FilterRun, HarnessError> {
    let mut cfg = base.clone();
    cfg.scheme = scheme;
    cfg.filter = filter;
    let mut obs = LastState {
        stride: cfg.diagnostic_stride,
        m3_0: None,
        xi: Vec::new(),
        last: None,
    };
    let (status, ..) = simulate(&cfg, &mut [&mut obs])?;
    let last = obs.last.expect("initial state is always observed");
    let spec = spectral::dft(&last.phi);
    let spectrum = spec
        .modes()
        .map(|(m, _)| m)
        .zip(spectral::power_spectrum(&spec))
        .collect();
    Ok(FilterRun {
        label: schemes::variant_label(scheme, filter),
        scheme,
        filter,
        status,
        xi: obs.xi,
        spectrum,
        final_time: last.time,
        tail_max: diagnostics::spectral_tail(&last),
    })
}

/// Runs the filter study and writes `filter_xi.csv`, `filter_spectrum.csv`
/// and `filter_summary.csv` into the base output directory.
pub fn run_filter_study(base: &RunConfig, parallel: usize) -> Result<Vec<FilterRun>, HarnessError> {
    let runs = filter_study_runs(base, parallel)?;
    let dir = &base.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut xi = String::from("scheme,time,xi\n");
    let mut spectrum = String::from("scheme,m,power\n");
    let mut summary = String::from("scheme,status,final_time,max_abs_xi,tail_max\n");
    for run in &runs {
        for (t, x) in &run.xi {
            let _ = writeln!(xi, "{},{},{}", run.label, fmt_float(*t), fmt_float(*x));
        }
        for (m, p) in &run.spectrum {
            let _ = writeln!(spectrum, "{},{m},{}", run.label, fmt_float(*p));
        }
        let _ = writeln!(
            summary,
            "{},{},{},{},{}",
            run.label,
            run.status.name(),
            fmt_float(run.final_time),
            fmt_float(run.max_xi()),
            fmt_float(run.tail_max)
        );
    }
    for (name, body) in [
        ("filter_xi.csv", xi),
        ("filter_spectrum.csv", spectrum),
        ("filter_summary.csv", summary),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
    }
    let config_path = dir.join("config.toml");
    fs::write(&config_path, base.to_toml()).map_err(io_err(&config_path))?;
    Ok(runs)
}

/// A named experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Run(RunConfig),
    Convergence(ConvergenceStudyConfig),
    Filters(RunConfig),
}

#[derive(Debug, Clone, Copy)]
pub struct PresetInfo {
    pub name: &'static str,
    pub extended: bool,
    pub description: &'static str,
}

pub const PRESETS: &[PresetInfo] = &[
    PresetInfo {
        name: "circle",
        extended: false,
        description: "unit circle, CN, N=64, dt=1e-3, T=1",
    },
    PresetInfo {
        name: "e",
        extended: false,
        description: "ellipse E, CNADB, N=512, dt=5e-4, T=2",
    },
    PresetInfo {
        name: "e1",
        extended: false,
        description: "ellipse E1, CNADB, N=512, dt=5e-4, T=2",
    },
    PresetInfo {
        name: "e2",
        extended: false,
        description: "ellipse E2, CNADB, N=512, dt=2.5e-4, T=2",
    },
    PresetInfo {
        name: "e3",
        extended: false,
        description: "ellipse E3, CNADB, N=512, dt=1.25e-4, T=2",
    },
    PresetInfo {
        name: "linear-m2",
        extended: false,
        description: "perturbed circle m=2, delta=0.1, ADB, N=512, dt=1e-3, T=0.1",
    },
    PresetInfo {
        name: "filters",
        extended: false,
        description: "filter study on E3, N=512, dt=1e-4, T=0.5",
    },
    PresetInfo {
        name: "pc3",
        extended: true,
        description: "perturbed circle r=1+0.4cos3a, CNADB, N=512, dt=5e-6, T=4.5",
    },
    PresetInfo {
        name: "cardioid",
        extended: true,
        description: "cardioid, CNADB, N=512, dt=1e-5, T=5",
    },
    PresetInfo {
        name: "time-e-adb",
        extended: false,
        description: "time convergence, E, ADB, t0=0.16",
    },
    PresetInfo {
        name: "time-e-cn",
        extended: false,
        description: "time convergence, E, CN, t0=0.92",
    },
    PresetInfo {
        name: "time-e-cnadb",
        extended: false,
        description: "time convergence, E, CNADB, t0=0.92",
    },
    PresetInfo {
        name: "time-pc-adbdpr",
        extended: false,
        description: "time convergence, PC, ADBDPR, t0=0.5",
    },
    PresetInfo {
        name: "time-pc-cn",
        extended: true,
        description: "time convergence, PC, CN, t0=2.8",
    },
    PresetInfo {
        name: "time-pc-cnadb",
        extended: true,
        description: "time convergence, PC, CNADB, t0=4.4",
    },
    PresetInfo {
        name: "time-c-adbdpr",
        extended: false,
        description: "time convergence, C, ADBDPR, t0=0.5",
    },
    PresetInfo {
        name: "time-c-cn",
        extended: false,
        description: "time convergence, C, CN, t0=0.5",
    },
    PresetInfo {
        name: "time-c-cnadb",
        extended: false,
        description: "time convergence, C, CNADB, t0=0.5",
    },
    PresetInfo {
        name: "space-e-adb",
        extended: false,
        description: "space convergence, E, ADB, t0=0.1",
    },
    PresetInfo {
        name: "space-e-cn",
        extended: false,
        description: "space convergence, E, CN, t0=1",
    },
    PresetInfo {
        name: "space-e-cnadb",
        extended: false,
        description: "space convergence, E, CNADB, t0=1",
    },
    PresetInfo {
        name: "space-pc-adbdpr",
        extended: true,
        description: "space convergence, PC, ADBDPR, t0=1",
    },
    PresetInfo {
        name: "space-pc-cn",
        extended: true,
        description: "space convergence, PC, CN, t0=4.5",
    },
    PresetInfo {
        name: "space-pc-cnadb",
        extended: true,
        description: "space convergence, PC, CNADB, t0=4.5",
    },
    PresetInfo {
        name: "space-c-adbdpr",
        extended: false,
        description: "space convergence, C, ADBDPR, t0=1",
    },
    PresetInfo {
        name: "space-c-cn",
        extended: true,
        description: "space convergence, C, CN, t0=5",
    },
    PresetInfo {
        name: "space-c-cnadb",
        extended: true,
        description: "space convergence, C, CNADB, t0=5",
    },
];

fn study(shape: Shape, scheme: Scheme, filter: FilterMode, axis: Axis, n: usize, dt: f64, t0: f64) -> Preset {
    let mut base = RunConfig::new(shape, n, dt, t0, scheme);
    base.filter = filter;
    Preset::Convergence(ConvergenceStudyConfig::new(base, axis, t0))
}

/// Looks up a preset; the output directory defaults to `out/<name>`.
pub fn preset(name: &str) -> Result<Preset, HarnessError> {
    use Axis::{Space, Time};
    use FilterMode::{Dpr, None as Unf};
    use Scheme::{Adb, Cn, Cnadb};
    let (e, pc, c) = (Shape::e3(), Shape::pc3(), Shape::Cardioid);
    let run = |shape: Shape, scheme: Scheme, n: usize, dt: f64, t: f64, stride: usize| {
        let mut cfg = RunConfig::new(shape, n, dt, t, scheme);
        cfg.diagnostic_stride = stride;
        cfg
    };
    let mut p = match name.to_ascii_lowercase().as_str() {
        "circle" => Preset::Run(run(Shape::Circle { radius: 1.0 }, Cn, 64, 1e-3, 1.0, 10)),
        "e" => Preset::Run(run(e, Cnadb, 512, 5e-4, 2.0, 1)),
        "e1" => Preset::Run(run(Shape::e1(), Cnadb, 512, 5e-4, 2.0, 1)),
        "e2" => Preset::Run(run(Shape::e2(), Cnadb, 512, 2.5e-4, 2.0, 1)),
        "e3" => Preset::Run(run(e, Cnadb, 512, 1.25e-4, 2.0, 1)),
        "linear-m2" => {
            let shape = Shape::PerturbedCircle {
                radius: 1.0,
                delta: 0.1,
                mode: 2,
            };
            Preset::Run(run(shape, Adb, 512, 1e-3, 0.1, 1))
        }
        "filters" => Preset::Filters(run(e, Adb, 512, 1e-4, 0.5, 10)),
        "pc3" => Preset::Run(run(pc, Cnadb, 512, 5e-6, 4.5, 200)),
        "cardioid" => Preset::Run(run(c, Cnadb, 512, 1e-5, 5.0, 100)),
        "time-e-adb" => study(e, Adb, Unf, Time, 512, 1e-4, 0.16),
        "time-e-cn" => study(e, Cn, Unf, Time, 512, 2e-3, 0.92),
        "time-e-cnadb" => study(e, Cnadb, Unf, Time, 512, 2e-3, 0.92),
        "time-pc-adbdpr" => study(pc, Adb, Dpr, Time, 512, 2e-5, 0.5),
        "time-pc-cn" => study(pc, Cn, Unf, Time, 512, 2e-5, 2.8),
        "time-pc-cnadb" => study(pc, Cnadb, Unf, Time, 512, 1e-5, 4.4),
        "time-c-adbdpr" => study(c, Adb, Dpr, Time, 512, 4e-4, 0.5),
        "time-c-cn" => study(c, Cn, Unf, Time, 512, 2e-4, 0.5),
        "time-c-cnadb" => study(c, Cnadb, Unf, Time, 512, 4e-4, 0.5),
        "space-e-adb" => study(e, Adb, Unf, Space, 128, 1e-5, 0.1),
        "space-e-cn" => study(e, Cn, Unf, Space, 128, 5e-4, 1.0),
        "space-e-cnadb" => study(e, Cnadb, Unf, Space, 128, 5e-4, 1.0),
        "space-pc-adbdpr" => study(pc, Adb, Dpr, Space, 256, 5e-6, 1.0),
        "space-pc-cn" => study(pc, Cn, Unf, Space, 512, 5e-6, 4.5),
        "space-pc-cnadb" => study(pc, Cnadb, Unf, Space, 512, 5e-6, 4.5),
        "space-c-adbdpr" => study(c, Adb, Dpr, Space, 256, 5e-5, 1.0),
        "space-c-cn" => study(c, Cn, Unf, Space, 256, 5e-5, 5.0),
        "space-c-cnadb" => study(c, Cnadb, Unf, Space, 256, 5e-5, 5.0),
        _ => return Err(HarnessError::UnknownPreset(name.to_string())),
    };
    let dir = PathBuf::from("out").join(name);
    match &mut p {
        Preset::Run(cfg) | Preset::Filters(cfg) => cfg.output_dir = dir,
        Preset::Convergence(s) => s.base.output_dir = dir,
    }
    Ok(p)
}

/// Applies `key=value` overrides (`n`, `dt`, `t_final`, `scheme`, `filter`,
/// `diagnostic_stride`, `snapshot_stride`, `nonlinear`, `max_phi`, `dir`,
/// and `comparison_time` for studies).
pub fn apply_overrides(preset: &mut Preset, overrides: &[String]) -> Result<(), HarnessError> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| invalid(format!("override `{item}` is not key=value")))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = || invalid(format!("bad value for `{key}`: `{value}`"));
        let num = || value.parse::<f64>().map_err(|_| bad());
        let int = || value.parse::<usize>().map_err(|_| bad());
        let (cfg, study_t0) = match preset {
            Preset::Run(cfg) | Preset::Filters(cfg) => (cfg, None),
            Preset::Convergence(s) => (&mut s.base, Some(&mut s.comparison_time)),
        };
        match key {
            "n" => cfg.n = int()?,
            "dt" => cfg.dt = num()?,
            "t_final" | "t" => cfg.t_final = num()?,
            "scheme" => cfg.scheme = Scheme::parse(value).ok_or_else(bad)?,
            "filter" => cfg.filter = FilterMode::parse(value).ok_or_else(bad)?,
            "diagnostic_stride" => cfg.diagnostic_stride = int()?,
            "snapshot_stride" => cfg.snapshot_stride = int()?,
            "nonlinear" => cfg.nonlinear = value.parse().map_err(|_| bad())?,
            "max_phi" => cfg.max_phi = num()?,
            "dir" | "out" => cfg.output_dir = PathBuf::from(value),
            "comparison_time" | "t0" => match study_t0 {
                Some(t0) => {
                    *t0 = num()?;
                    cfg.t_final = *t0;
                }
                None => return Err(invalid("comparison_time applies to convergence presets only")),
            },
            _ => return Err(invalid(format!("unknown override `{key}`"))),
        }
    }
    match preset {
        Preset::Run(cfg) | Preset::Filters(cfg) => cfg.validate(),
        Preset::Convergence(s) => s.validate(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[shape]
name = "ellipse"
a = 1.0
b = 0.5

[run]
n = 512
dt = 5e-4
t_final = 2.0
scheme = "cnadb"
"#;

    #[test]
    fn minimal_config_is_accepted() {
        let ParsedConfig::Run(cfg) = parse_config(MINIMAL).unwrap() else {
            panic!("expected a run config");
        };
        assert_eq!(cfg.shape, Shape::Ellipse { a: 1.0, b: 0.5 });
        assert_eq!(
            (cfg.n, cfg.dt, cfg.t_final, cfg.scheme),
            (512, 5e-4, 2.0, Scheme::Cnadb)
        );
        assert_eq!(cfg.filter, FilterMode::None);
        assert_eq!(cfg.diagnostic_stride, 1);
        assert_eq!(cfg.steps(), 4000);
    }

    #[test]
    fn echo_round_trips() {
        let ParsedConfig::Run(mut cfg) = parse_config(MINIMAL).unwrap() else {
            unreachable!()
        };
        cfg.filter = FilterMode::Both;
        cfg.snapshot_stride = 7;
        cfg.dt = 0.1 + 0.2;
        cfg.t_final = cfg.dt * 3.0;
        cfg.output_dir = PathBuf::from("some dir/with \"quotes\"");
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), ParsedConfig::Run(cfg));
    }

    #[test]
    fn zero_dt_is_rejected() {
        let text = MINIMAL.replace("dt = 5e-4", "dt = 0.0");
        assert!(matches!(parse_config(&text), Err(HarnessError::ValidationError(_))));
    }

    #[test]
    fn non_commensurate_time_is_rejected() {
        let text = MINIMAL
            .replace("dt = 5e-4", "dt = 1e-3")
            .replace("t_final = 2.0", "t_final = 3.00000049");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(&err, HarnessError::ValidationError(m) if m.contains("integer")),
            "{err}"
        );
    }

    #[test]
    fn parse_errors_carry_positions() {
        let text = MINIMAL.replace("n = 512", "n = \"many\"");
        match parse_config(&text) {
            Err(HarnessError::ParseError { line, column, .. }) => {
                assert_eq!(line, 8);
                assert_eq!(column, 5);
            }
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("scheme = \"cnadb\"", "scheme = \"cnadb\"\nbogus = 1");
        assert!(matches!(
            parse_config(&text),
            Err(HarnessError::ParseError { line: 12, .. })
        ));
    }

    #[test]
    fn bad_names_are_rejected() {
        for (from, to) in [
            ("scheme = \"cnadb\"", "scheme = \"rk4\""),
            ("name = \"ellipse\"", "name = \"blob\""),
            ("b = 0.5", "b = -0.5"),
            ("a = 1.0", "radius = 1.0"),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(
                matches!(parse_config(&text), Err(HarnessError::ValidationError(_))),
                "{to}"
            );
        }
    }

    #[test]
    fn convergence_section_builds_a_study() {
        let text =
            MINIMAL.replace("t_final = 2.0\n", "") + "\n[convergence]\naxis = \"space\"\ncomparison_time = 1.0\n";
        let ParsedConfig::Convergence(study) = parse_config(&text).unwrap() else {
            panic!("expected a study");
        };
        let ns: Vec<usize> = study.levels().iter().map(|l| l.n).collect();
        assert_eq!(ns, vec![512, 1024, 2048]);
        assert_eq!(
            parse_config(&study.to_toml()).unwrap(),
            ParsedConfig::Convergence(study)
        );

        let text = format!("{MINIMAL}\n[convergence]\naxis = \"time\"\ncomparison_time = 0.9205\n");
        let ParsedConfig::Convergence(study) = parse_config(&text).unwrap() else {
            panic!("expected a study");
        };
        let dts: Vec<f64> = study.levels().iter().map(|l| l.dt).collect();
        assert_eq!(dts, vec![5e-4, 2.5e-4, 1.25e-4]);
        let text = format!("{MINIMAL}\n[convergence]\naxis = \"time\"\ncomparison_time = 0.92025\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn presets_are_valid() {
        for info in PRESETS {
            let p = preset(info.name).unwrap();
            match &p {
                Preset::Run(cfg) | Preset::Filters(cfg) => cfg.validate().unwrap(),
                Preset::Convergence(s) => s.validate().unwrap(),
            }
        }
        assert!(matches!(preset("nope"), Err(HarnessError::UnknownPreset(_))));
    }

    #[test]
    fn overrides_apply_and_validate() {
        let mut p = preset("e").unwrap();
        apply_overrides(&mut p, &["n=256".into(), "dt=1e-3".into(), "filter=dpr".into()]).unwrap();
        let Preset::Run(cfg) = &p else { unreachable!() };
        assert_eq!((cfg.n, cfg.dt, cfg.filter), (256, 1e-3, FilterMode::Dpr));
        assert!(apply_overrides(&mut p, &["dt=3e-1".into()]).is_err());
        assert!(apply_overrides(&mut p, &["colour=blue".into()]).is_err());
        assert!(apply_overrides(&mut p, &["t0=1".into()]).is_err());
    }

    #[test]
    fn float_formatting_has_17_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(-2.0), "-2.0000000000000000e0");
        let v = 0.1 + 0.2;
        assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn line_column_counts_from_one() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }
}
