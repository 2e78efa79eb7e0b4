//! Named verification suites with fixed default problems.

use serde::Serialize;

use super::presets;
use super::{HarnessError, Result, EXIT_OK, EXIT_VERIFICATION};
use crate::algebra::Realization;
use crate::dynamics::{simulate_lie_poisson, NoisePath, SolverOptions};
use crate::field::{Field, FieldKind, Grid2D, VectorField};
use crate::harness::config::Prepared;
use crate::sampling;
use crate::verification::{
    casimir_energy_report, check_dualities, check_kiw, check_lie_chain_rule, check_variation_lemma,
    default_bump, KiwFlow, KiwOptions, KiwSpec, ResidualReport, RotationFlow, ScaledProfile, Status,
    VariationSpec, CASIMIR_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    ChainRule,
    Kiw,
    Variation,
    Duality,
    Casimir,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::ChainRule, Suite::Kiw, Suite::Variation, Suite::Duality, Suite::Casimir];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ChainRule => "chainrule",
            Suite::Kiw => "kiw",
            Suite::Variation => "variation",
            Suite::Duality => "duality",
            Suite::Casimir => "casimir",
        }
    }

    pub fn parse(s: &str) -> Result<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
            HarnessError::Usage(format!("unknown suite `{s}`; available: {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Coarsest step of a dyadic three-level sweep, for the step-based
    /// suites.
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub status: Status,
    pub reports: Vec<ResidualReport>,
}

impl SuiteReport {
    fn new(suite: Suite, reports: Vec<ResidualReport>) -> Self {
        let status = reports.iter().fold(Status::Pass, |s, r| s.combine(r.overall()));
        Self {
            suite: suite.name().into(),
            status,
            reports,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.status == Status::Pass {
            EXIT_OK
        } else {
            EXIT_VERIFICATION
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("suite report serializes")
    }
}

/// Band-limited KIW problem on a 32x32 grid: `k0` with amplitude 3,
/// optional drift `G` and velocity `u`, `p` channels `H_j`, and `m`
/// solenoidal `xi_i` of amplitude 0.3.
pub fn kiw_problem(kind: FieldKind, m: usize, p: usize, with_drift: bool, seed: u64) -> (KiwSpec, KiwFlow) {
    let g = Grid2D::periodic_square(32).expect("valid grid");
    let mut rng = sampling::rng(seed);
    let mut band = |k: i32, amp: f64| sampling::band_limited_field(&g, kind, k, &mut rng).scaled(amp);
    let k0 = band(3, 3.0);
    let drift = if with_drift { band(2, 2.0) } else { Field::zeros(kind, g) };
    let h = (0..p).map(|_| band(2, 2.0)).collect();
    let u = if with_drift {
        sampling::band_limited_solenoidal(&g, 2, &mut rng)
    } else {
        VectorField::zeros(g)
    };
    let xis = (0..m)
        .map(|_| sampling::band_limited_solenoidal(&g, 2, &mut rng).scaled(0.3))
        .collect();
    (KiwSpec { k0, drift, h }, KiwFlow { u, xis })
}

fn dyadic(dt: f64) -> Vec<f64> {
    vec![dt, dt / 2.0, dt / 4.0]
}

fn numerical(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Numerical(e.to_string())
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<SuiteReport> {
    if let Some(dt) = opts.dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(HarnessError::Usage(format!("--dt must be positive, got {dt}")));
        }
    }
    let reports = match suite {
        Suite::ChainRule => {
            let g = Grid2D::periodic_square(64).expect("valid grid");
            let s = ScaledProfile {
                profile: default_bump,
                growth: 0.7,
            };
            let flow = RotationFlow {
                center: (std::f64::consts::PI, std::f64::consts::PI),
                rate: 1.0,
            };
            vec![check_lie_chain_rule(&g, &s, &flow, 0.3, &[0.08, 0.04, 0.02, 0.01]).map_err(numerical)?]
        }
        Suite::Kiw => {
            let kiw = |m: usize, p: usize, min_order: f64| -> Result<ResidualReport> {
                let (spec, flow) = kiw_problem(FieldKind::Scalar, m, p, m > 1, opts.seed);
                let mut o = KiwOptions {
                    seed: opts.seed,
                    min_order,
                    ..Default::default()
                };
                if let Some(dt) = opts.dt {
                    o.dts = dyadic(dt);
                }
                check_kiw(&spec, &flow, &o).map_err(numerical)
            };
            vec![kiw(2, 2, 0.5)?, kiw(1, 1, 0.9)?]
        }
        Suite::Variation => {
            let mut spec = VariationSpec {
                seed: opts.seed,
                ..Default::default()
            };
            if let Some(dt) = opts.dt {
                spec.dts = dyadic(dt);
            }
            vec![check_variation_lemma(&spec).map_err(numerical)?]
        }
        Suite::Duality => vec![
            check_dualities(Realization::RigidBody, 1000, opts.seed).map_err(numerical)?,
            check_dualities(Realization::HeavyTop, 1000, opts.seed).map_err(numerical)?,
            check_dualities(Realization::Euler2d, 50, opts.seed).map_err(numerical)?,
        ],
        Suite::Casimir => {
            let mut out = Vec::new();
            for cfg in [presets::rigid_body(), presets::heavy_top()] {
                let Prepared::Finite { y0, noise } = cfg.prepare()? else {
                    unreachable!("finite preset")
                };
                let dt = opts.dt.unwrap_or(cfg.dt);
                let steps = (cfg.t_final / dt).round() as usize;
                let path = NoisePath::sample(opts.seed, dt, steps, noise.len()).map_err(numerical)?;
                let run = simulate_lie_poisson(&y0, &cfg.model, &noise, &path, &SolverOptions::default())
                    .map_err(numerical)?;
                out.push(casimir_energy_report(&run, !noise.is_empty(), CASIMIR_TOL).map_err(numerical)?);
            }
            out
        }
    };
    Ok(SuiteReport::new(suite, reports))
}
