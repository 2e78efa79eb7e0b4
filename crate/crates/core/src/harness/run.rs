//! Single seeded run of a configured experiment.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{ExperimentConfig, Prepared};
use super::{create_dir, write_bytes, write_csv, write_json, HarnessError, Result};
use crate::algebra::DualElement;
use crate::calibration::encode_field;
use crate::dynamics::{
    boussinesq_step, buoyancy_potential, salt_euler_step, simulate_lie_poisson, BoussinesqState,
    LagrangianModel, NoiseModel, NoisePath,
};
use crate::field::{velocity_from_vorticity, vector_inner_product, Field, Grid2D, VectorField};
use crate::kelvin::{run_circulation_budget_with, BudgetModel, BudgetSetup, CirculationRecord, MaterialLoop};

/// Subdirectory of a fluid run holding the velocity snapshots.
pub const VELOCITY_DIR: &str = "velocity";

/// Deterministic run diagnostics, also written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub model: String,
    pub seed: u64,
    pub steps: usize,
    pub dt: f64,
    /// `max_t |C_k(t) - C_k(0)|` per Casimir.
    pub casimir_drift: Vec<f64>,
    /// `max_t |H(t) - H(0)|`.
    pub energy_excursion: f64,
    /// `|H(T) - H(0)|`.
    pub energy_drift: f64,
    /// `|I(T) - I(0)| / |I(0)|` when a loop is tracked.
    pub circulation_drift: Option<f64>,
    /// `|I(T) - I(0) - int source dt| / max |I|` when a loop is tracked.
    pub budget_residual: Option<f64>,
    pub files: Vec<String>,
}

fn model_name(m: &LagrangianModel) -> &'static str {
    match m {
        LagrangianModel::RigidBody { .. } => "rigid_body",
        LagrangianModel::HeavyTop { .. } => "heavy_top",
        LagrangianModel::Euler2d => "euler2d",
        LagrangianModel::Boussinesq { .. } => "boussinesq",
    }
}

fn drifts(series: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = series.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|k| series.iter().fold(0.0_f64, |m, v| m.max((v[k] - first[k]).abs())))
        .collect()
}

fn excursion(e: &[f64]) -> (f64, f64) {
    let e0 = e[0];
    let max = e.iter().fold(0.0_f64, |m, v| m.max((v - e0).abs()));
    (max, (e[e.len() - 1] - e0).abs())
}

fn is_saved(n: usize, every: usize, last: usize) -> bool {
    n % every == 0 || n == last
}

/// Runs one member with `seed` and writes its artifacts into `out`:
/// `config.json`, `summary.json`, `timing.json`, states (`states.csv` or
/// SGMF snapshots of omega, b and, under `velocity/`, u) and, with a loop,
/// `circulation.csv`.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<RunSummary> {
    let prepared = cfg.prepare()?;
    let start = Instant::now();
    create_dir(out)?;
    let mut emitted = cfg.normalized();
    emitted.seed = seed;
    write_bytes(&out.join("config.json"), (emitted.to_json() + "\n").as_bytes())?;

    let steps = cfg.n_steps();
    let mut summary = match prepared {
        Prepared::Finite { y0, noise } => {
            let path = NoisePath::sample(seed, cfg.dt, steps, noise.len()).map_err(HarnessError::numerical)?;
            run_finite(cfg, &y0, &noise, &path, out)?
        }
        Prepared::Fluid {
            grid,
            omega0,
            b0,
            noise,
            loop0,
        } => {
            let path = NoisePath::sample(seed, cfg.dt, steps, noise.len()).map_err(HarnessError::numerical)?;
            run_fluid(cfg, &grid, omega0, b0, &noise, loop0, &path, out)?
        }
    };
    summary.seed = seed;
    summary.files.sort();
    write_json(&out.join("summary.json"), &serde_json::to_value(&summary).expect("summary serializes"))?;
    write_json(
        &out.join("timing.json"),
        &serde_json::json!({ "wall_time_s": start.elapsed().as_secs_f64() }),
    )?;
    Ok(summary)
}

fn run_finite(
    cfg: &ExperimentConfig,
    y0: &DualElement,
    noise: &NoiseModel<nalgebra::Vector3<f64>>,
    path: &NoisePath,
    out: &Path,
) -> Result<RunSummary> {
    let run = simulate_lie_poisson(y0, &cfg.model, noise, path, &cfg.solver()).map_err(HarnessError::numerical)?;
    let casimirs = run.casimirs().map_err(HarnessError::numerical)?;
    let energies = run.energies().map_err(HarnessError::numerical)?;

    let mut header: Vec<String> = ["t", "m_1", "m_2", "m_3"].map(String::from).to_vec();
    if matches!(y0, DualElement::HeavyTop { .. }) {
        header.extend(["a_1", "a_2", "a_3"].map(String::from));
    }
    header.push("energy".into());
    header.extend((0..casimirs[0].len()).map(|k| format!("casimir_{k}")));

    let (every, last) = (cfg.save_interval(), run.states.len() - 1);
    let rows: Vec<Vec<f64>> = (0..=last)
        .filter(|&n| is_saved(n, every, last))
        .map(|n| {
            let mut r = vec![run.times[n]];
            match &run.states[n] {
                DualElement::RigidBody { m } => r.extend(m.iter()),
                DualElement::HeavyTop { m, a } => {
                    r.extend(m.iter());
                    r.extend(a.iter());
                }
                DualElement::Euler2d { .. } => unreachable!("finite run"),
            }
            r.push(energies[n]);
            r.extend(&casimirs[n]);
            r
        })
        .collect();
    write_csv(&out.join("states.csv"), &header, &rows)?;
    let (energy_excursion, energy_drift) = excursion(&energies);
    Ok(RunSummary {
        model: model_name(&cfg.model).into(),
        seed: 0,
        steps: path.n_steps(),
        dt: path.dt(),
        casimir_drift: drifts(&casimirs),
        energy_excursion,
        energy_drift,
        circulation_drift: None,
        budget_residual: None,
        files: vec!["states.csv".into()],
    })
}

/// Per-step diagnostics and the snapshots due for saving.
struct FluidObserver {
    grid: Grid2D,
    phi: Option<Field>,
    every: usize,
    last: usize,
    casimirs: Vec<Vec<f64>>,
    energies: Vec<f64>,
    saved: Vec<(usize, Field, Option<Field>)>,
}

impl FluidObserver {
    fn integral(&self, f: impl Iterator<Item = f64>) -> f64 {
        f.sum::<f64>() * self.grid.cell_area()
    }

    fn observe(&mut self, n: usize, omega: &Field, b: Option<&Field>) -> std::result::Result<(), crate::field::FieldError> {
        let u = velocity_from_vorticity(omega)?;
        let mut energy = 0.5 * vector_inner_product(&u, &u)?;
        // Euler: circulation and enstrophy; Boussinesq: buoyancy moments
        let c = match (b, &self.phi) {
            (Some(b), Some(phi)) => {
                energy += self.integral(b.values().iter().zip(phi.values()).map(|(p, q)| p * q));
                vec![self.integral(b.values().iter().copied()), self.integral(b.values().iter().map(|v| v * v))]
            }
            _ => vec![
                self.integral(omega.values().iter().copied()),
                self.integral(omega.values().iter().map(|v| v * v)),
            ],
        };
        self.casimirs.push(c);
        self.energies.push(energy);
        if is_saved(n, self.every, self.last) {
            self.saved.push((n, omega.clone(), b.cloned()));
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn run_fluid(
    cfg: &ExperimentConfig,
    grid: &Grid2D,
    omega0: Field,
    b0: Option<Field>,
    noise: &NoiseModel<VectorField>,
    loop0: Option<MaterialLoop>,
    path: &NoisePath,
    out: &Path,
) -> Result<RunSummary> {
    let g_acc = match cfg.model {
        LagrangianModel::Boussinesq { g } => Some(g),
        _ => None,
    };
    let mut obs = FluidObserver {
        grid: *grid,
        phi: g_acc.map(|g| buoyancy_potential(grid, g)),
        every: cfg.save_interval(),
        last: path.n_steps(),
        casimirs: Vec::new(),
        energies: Vec::new(),
        saved: Vec::new(),
    };
    let opts = cfg.fluid_options();
    let record: Option<CirculationRecord> = match loop0 {
        Some(lp) => {
            let setup = BudgetSetup {
                omega0,
                model: match (g_acc, b0) {
                    (Some(g), Some(b0)) => BudgetModel::Boussinesq { g, b0 },
                    _ => BudgetModel::Euler,
                },
                loop0: lp,
                resample_cells: cfg.tolerances.resample_cells,
                conservation_tol: cfg.tolerances.conservation_tol,
            };
            let rec = run_circulation_budget_with(&setup, noise, path, &opts, |n, w, b| {
                obs.observe(n, w, b).map_err(Into::into)
            })
            .map_err(HarnessError::numerical)?;
            Some(rec)
        }
        None => {
            let mut omega = omega0;
            let mut b = b0;
            obs.observe(0, &omega, b.as_ref()).map_err(HarnessError::numerical)?;
            for n in 0..path.n_steps() {
                let dw = path.step(n);
                match (g_acc, b.as_mut()) {
                    (Some(g), Some(bf)) => {
                        let s = BoussinesqState {
                            omega: omega.clone(),
                            b: bf.clone(),
                        };
                        let next = boussinesq_step(&s, g, noise, path.dt(), &dw, &opts).map_err(HarnessError::numerical)?;
                        omega = next.omega;
                        *bf = next.b;
                    }
                    _ => omega = salt_euler_step(&omega, noise, path.dt(), &dw, &opts).map_err(HarnessError::numerical)?,
                }
                obs.observe(n + 1, &omega, b.as_ref()).map_err(HarnessError::numerical)?;
            }
            None
        }
    };

    let mut files = Vec::new();
    // velocity snapshots get their own directory so it can feed `eof` directly
    create_dir(&out.join(VELOCITY_DIR))?;
    for (n, omega, b) in &obs.saved {
        let name = format!("omega_{n:06}.sgmf");
        write_bytes(&out.join(&name), &encode_field(omega))?;
        files.push(name);
        let u = velocity_from_vorticity(omega).map_err(HarnessError::numerical)?;
        let name = format!("{VELOCITY_DIR}/u_{n:06}.sgmf");
        write_bytes(&out.join(&name), &encode_field(&u.to_field()))?;
        files.push(name);
        if let Some(b) = b {
            let name = format!("b_{n:06}.sgmf");
            write_bytes(&out.join(&name), &encode_field(b))?;
            files.push(name);
        }
    }
    if let Some(rec) = &record {
        let rows: Vec<Vec<f64>> = (0..rec.times.len())
            .map(|i| vec![rec.times[i], rec.i_values[i], rec.source_values[i]])
            .collect();
        let header = ["t", "I", "cumulative_source"].map(String::from);
        write_csv(&out.join("circulation.csv"), &header, &rows)?;
        files.push("circulation.csv".into());
    }
    let (energy_excursion, energy_drift) = excursion(&obs.energies);
    Ok(RunSummary {
        model: model_name(&cfg.model).into(),
        seed: 0,
        steps: path.n_steps(),
        dt: path.dt(),
        casimir_drift: drifts(&obs.casimirs),
        energy_excursion,
        energy_drift,
        circulation_drift: record.as_ref().map(|r| r.relative_drift()),
        budget_residual: record.as_ref().map(|r| r.budget_residual()),
        files,
    })
}
