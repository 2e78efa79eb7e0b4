//! Experiment configuration: JSON schema, validation and realization into
//! solver inputs.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::algebra::DualElement;
use crate::calibration::{load_field, load_vector_field};
use crate::dynamics::{FluidOptions, LagrangianModel, NoiseModel, SolverOptions};
use crate::field::{Field, FieldKind, Grid2D, VectorField};
use crate::kelvin::{MaterialLoop, MIN_LOOP_POINTS};

/// `amp cos(2 pi (kx x / lx + ky y / ly) + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub kx: i32,
    pub ky: i32,
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Mode {
    pub fn new(kx: i32, ky: i32, amp: f64, phase: f64) -> Self {
        Self { kx, ky, amp, phase }
    }

    fn arg(&self, g: &Grid2D, x: f64, y: f64) -> f64 {
        TAU * (self.kx as f64 * x / g.lx + self.ky as f64 * y / g.ly) + self.phase
    }

    fn value(&self, g: &Grid2D, x: f64, y: f64) -> f64 {
        self.amp * self.arg(g, x, y).cos()
    }

    /// Gradient of [`Mode::value`].
    fn gradient(&self, g: &Grid2D, x: f64, y: f64) -> (f64, f64) {
        let s = -self.amp * self.arg(g, x, y).sin();
        (s * TAU * self.kx as f64 / g.lx, s * TAU * self.ky as f64 / g.ly)
    }
}

fn sum_modes(modes: &[Mode], g: &Grid2D, x: f64, y: f64) -> f64 {
    modes.iter().map(|m| m.value(g, x, y)).sum()
}

/// Scalar field given inline or by file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    Fourier { modes: Vec<Mode> },
    File { path: PathBuf },
}

/// One noise vector field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum XiSpec {
    /// Body-frame vector for the finite-dimensional models.
    Constant { xi: Vector3<f64> },
    /// Divergence-free field `(d psi/dy, -d psi/dx)` of a stream function.
    Stream { modes: Vec<Mode> },
    Components {
        #[serde(default)]
        x: Vec<Mode>,
        #[serde(default)]
        y: Vec<Mode>,
    },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Common multiplier for every `xi`.
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub xis: Vec<XiSpec>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            xis: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Momentum {
        m: Vector3<f64>,
        #[serde(default)]
        a: Option<Vector3<f64>>,
    },
    Fields {
        vorticity: FieldSource,
        #[serde(default)]
        buoyancy: Option<FieldSource>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_cfl")]
    pub cfl_limit: Option<f64>,
    /// Loop resampling trigger in grid cells.
    #[serde(default = "default_resample")]
    pub resample_cells: f64,
    /// Fail a source-free run whose relative circulation drift exceeds this.
    #[serde(default)]
    pub conservation_tol: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver_tol: default_solver_tol(),
            max_iter: default_max_iter(),
            cfl_limit: default_cfl(),
            resample_cells: default_resample(),
            conservation_tol: None,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_solver_tol() -> f64 {
    SolverOptions::default().tol
}
fn default_max_iter() -> usize {
    SolverOptions::default().max_iter
}
fn default_cfl() -> Option<f64> {
    FluidOptions::default().cfl_limit
}
fn default_resample() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: LagrangianModel,
    pub initial: InitialCondition,
    /// Required for the fluid models.
    #[serde(default)]
    pub grid: Option<Grid2D>,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_usize")]
    pub ensemble: usize,
    /// States are written every this many steps, and at the final step.
    #[serde(default)]
    pub save_every: Option<usize>,
    #[serde(default, rename = "loop")]
    pub loop_spec: Option<LoopSpec>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Solver inputs built from a validated configuration.
#[derive(Debug, Clone)]
pub enum Prepared {
    Finite {
        y0: DualElement,
        noise: NoiseModel<Vector3<f64>>,
    },
    Fluid {
        grid: Grid2D,
        omega0: Field,
        b0: Option<Field>,
        noise: NoiseModel<VectorField>,
        loop0: Option<MaterialLoop>,
    },
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))
    }

    /// Parses a file; relative data paths are taken relative to its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let InitialCondition::Fields { vorticity, buoyancy } = &mut self.initial {
            for src in std::iter::once(vorticity).chain(buoyancy.as_mut()) {
                if let FieldSource::File { path } = src {
                    resolve(base, path);
                }
            }
        }
        for xi in &mut self.noise.xis {
            if let XiSpec::File { path } = xi {
                resolve(base, path);
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn is_fluid(&self) -> bool {
        matches!(self.model, LagrangianModel::Euler2d | LagrangianModel::Boussinesq { .. })
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Effective save interval: explicit, else about 10 snapshots per run.
    pub fn save_interval(&self) -> usize {
        self.save_every.unwrap_or_else(|| (self.n_steps() / 10).max(1))
    }

    /// Fills every default explicitly so that emitting and re-parsing is a
    /// fixed point.
    pub fn normalized(&self) -> Self {
        let mut c = self.clone();
        c.save_every = Some(self.save_interval());
        if !c.is_fluid() {
            c.grid = None;
        }
        c
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tolerances.solver_tol,
            max_iter: self.tolerances.max_iter,
        }
    }

    pub fn fluid_options(&self) -> FluidOptions {
        FluidOptions {
            solver: self.solver(),
            cfl_limit: self.tolerances.cfl_limit,
        }
    }

    fn check_scalars(&self) -> Result<(), HarnessError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(config_err(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return Err(config_err(format!(
                "t_final must be at least dt, got t_final {} and dt {}",
                self.t_final, self.dt
            )));
        }
        let steps = self.n_steps();
        if (steps as f64 * self.dt - self.t_final).abs() > 1e-9 * self.t_final {
            return Err(config_err(format!(
                "t_final {} is not a whole number of steps of {}",
                self.t_final, self.dt
            )));
        }
        if self.ensemble == 0 {
            return Err(config_err("ensemble size must be at least 1"));
        }
        if self.save_every == Some(0) {
            return Err(config_err("save_every must be at least 1"));
        }
        let t = &self.tolerances;
        if !(t.solver_tol > 0.0 && t.max_iter > 0 && t.resample_cells > 0.0) {
            return Err(config_err("tolerances must be positive"));
        }
        if !(self.noise.amplitude.is_finite()) {
            return Err(config_err("noise amplitude must be finite"));
        }
        Ok(())
    }

    /// Validates and loads every referenced file.
    pub fn prepare(&self) -> Result<Prepared, HarnessError> {
        self.check_scalars()?;
        self.model
            .validate()
            .map_err(|e| config_err(format!("invalid model: {e}")))?;
        if self.is_fluid() {
            self.prepare_fluid()
        } else {
            self.prepare_finite()
        }
    }

    fn prepare_finite(&self) -> Result<Prepared, HarnessError> {
        if self.loop_spec.is_some() {
            return Err(config_err("a material loop needs a fluid model"));
        }
        let InitialCondition::Momentum { m, a } = &self.initial else {
            return Err(config_err("finite-dimensional models need a momentum initial condition"));
        };
        let y0 = match (&self.model, a) {
            (LagrangianModel::RigidBody { .. }, None) => DualElement::rigid_body(*m),
            (LagrangianModel::HeavyTop { .. }, Some(a)) => DualElement::heavy_top(*m, *a),
            (LagrangianModel::RigidBody { .. }, Some(_)) => {
                return Err(config_err("the rigid body has no advected vector `a`"))
            }
            _ => return Err(config_err("the heavy top needs the advected vector `a`")),
        };
        let xis = self
            .noise
            .xis
            .iter()
            .map(|x| match x {
                XiSpec::Constant { xi } => Ok(xi * self.noise.amplitude),
                _ => Err(config_err("finite-dimensional noise must be `constant` vectors")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let noise = NoiseModel::constant(xis, vec![])
            .map_err(|e| config_err(format!("invalid noise: {e}")))?;
        Ok(Prepared::Finite { y0, noise })
    }

    fn prepare_fluid(&self) -> Result<Prepared, HarnessError> {
        let g = self.grid.ok_or_else(|| config_err("fluid models need a grid"))?;
        let grid = Grid2D::new(g.nx, g.ny, g.lx, g.ly).map_err(|e| config_err(e.to_string()))?;
        let InitialCondition::Fields { vorticity, buoyancy } = &self.initial else {
            return Err(config_err("fluid models need a fields initial condition"));
        };
        let omega0 = scalar_field(vorticity, &grid, "vorticity")?;
        if omega0.mean().abs() > 1e-12 * omega0.max_abs().max(1.0) {
            return Err(config_err(format!(
                "vorticity must have zero mean on the torus, got {:e}",
                omega0.mean()
            )));
        }
        let b0 = match (&self.model, buoyancy) {
            (LagrangianModel::Boussinesq { .. }, Some(b)) => Some(scalar_field(b, &grid, "buoyancy")?),
            (LagrangianModel::Boussinesq { .. }, None) => {
                return Err(config_err("the boussinesq model needs an initial buoyancy"))
            }
            (_, Some(_)) => return Err(config_err("buoyancy is only used by the boussinesq model")),
            (_, None) => None,
        };
        let xis = self
            .noise
            .xis
            .iter()
            .map(|x| xi_field(x, &grid).map(|v| v.scaled(self.noise.amplitude)))
            .collect::<Result<Vec<_>, _>>()?;
        let noise = NoiseModel::fields(xis, vec![])
            .map_err(|e| config_err(format!("invalid noise: {e}")))?;
        let loop0 = match self.loop_spec {
            None => None,
            Some(l) => {
                if !(l.radius > 0.0) || l.n < MIN_LOOP_POINTS {
                    return Err(config_err(format!(
                        "loop needs a positive radius and at least {MIN_LOOP_POINTS} points"
                    )));
                }
                Some(
                    MaterialLoop::circle((l.center[0], l.center[1]), l.radius, l.n)
                        .map_err(|e| config_err(e.to_string()))?,
                )
            }
        };
        Ok(Prepared::Fluid {
            grid,
            omega0,
            b0,
            noise,
            loop0,
        })
    }
}

fn missing(path: &Path, what: &str, e: impl std::fmt::Display) -> HarnessError {
    config_err(format!("cannot load {what} file {}: {e}", path.display()))
}

fn scalar_field(src: &FieldSource, grid: &Grid2D, what: &str) -> Result<Field, HarnessError> {
    match src {
        FieldSource::Fourier { modes } => Ok(Field::scalar_from_fn(*grid, |x, y| sum_modes(modes, grid, x, y))),
        FieldSource::File { path } => {
            let f = load_field(path).map_err(|e| missing(path, what, e))?;
            if f.grid() != grid {
                return Err(config_err(format!("{what} file {} is not on the configured grid", path.display())));
            }
            if f.kind().components() != 1 {
                return Err(config_err(format!("{what} file {} is not a scalar field", path.display())));
            }
            Ok(f.with_kind(FieldKind::Scalar).expect("one component"))
        }
    }
}

fn xi_field(spec: &XiSpec, grid: &Grid2D) -> Result<VectorField, HarnessError> {
    match spec {
        XiSpec::Constant { .. } => Err(config_err("fluid noise must be a field, not a `constant` vector")),
        XiSpec::Stream { modes } => Ok(VectorField::from_fn(*grid, |x, y| {
            let (px, py) = modes.iter().fold((0.0, 0.0), |(a, b), m| {
                let (gx, gy) = m.gradient(grid, x, y);
                (a + gx, b + gy)
            });
            (py, -px)
        })),
        XiSpec::Components { x, y } => Ok(VectorField::from_fn(*grid, |px, py| {
            (sum_modes(x, grid, px, py), sum_modes(y, grid, px, py))
        })),
        XiSpec::File { path } => {
            let v = load_vector_field(path).map_err(|e| missing(path, "noise", e))?;
            if v.grid() != grid {
                return Err(config_err(format!("noise file {} is not on the configured grid", path.display())));
            }
            Ok(v)
        }
    }
}
