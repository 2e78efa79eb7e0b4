//! Casimir preservation and energy non-conservation along a stored
//! Lie-Poisson trajectory.

use super::report::{Criterion, ResidualReport};
use super::{Result, VerificationError};
use crate::dynamics::LiePoissonRun;

/// Default Casimir drift threshold.
pub const CASIMIR_TOL: f64 = 1e-8;

/// Casimir drift per Casimir against `casimir_tol`, plus an energy
/// component: for stochastic runs the energy excursion must exceed 100
/// times the largest Casimir drift; for deterministic runs it must stay
/// below `casimir_tol`. Full time series are attached.
pub fn casimir_energy_report(run: &LiePoissonRun, stochastic: bool, casimir_tol: f64) -> Result<ResidualReport> {
    if run.states.is_empty() {
        return Err(VerificationError::MissingStates);
    }
    let casimirs = run.casimirs()?;
    let energies = run.energies()?;
    let drift = run.casimir_drift()?;
    let excursion = run.energy_excursion()?;
    let worst = drift.iter().copied().fold(0.0, f64::max);

    let params = serde_json::json!({
        "model": serde_json::to_value(&run.model).expect("model serializes"),
        "steps": run.states.len() - 1,
        "stochastic": stochastic,
    });
    let mut rep = ResidualReport::from_residuals(
        "casimir",
        params,
        "casimir",
        (0..drift.len()).map(|i| i as f64).collect(),
        drift,
        Criterion::MaxResidual(casimir_tol),
    );
    rep.series.insert("t".into(), run.times.clone());
    for k in 0..casimirs.first().map_or(0, |c| c.len()) {
        rep.series
            .insert(format!("casimir_{k}"), casimirs.iter().map(|c| c[k]).collect());
    }
    rep.series.insert("energy".into(), energies);

    let criterion = if stochastic {
        Criterion::MinResidual(100.0 * worst)
    } else {
        Criterion::MaxResidual(casimir_tol)
    };
    let energy = ResidualReport::from_residuals(
        "energy",
        serde_json::json!({ "max_casimir_drift": worst }),
        "run",
        vec![0.0],
        vec![excursion],
        criterion,
    );
    Ok(rep.with_component(energy))
}
