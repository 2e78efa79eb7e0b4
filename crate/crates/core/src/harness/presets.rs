//! Embedded default experiments.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;

use super::config::{
    ExperimentConfig, FieldSource, InitialCondition, LoopSpec, Mode, NoiseSpec, Tolerances, XiSpec,
};
use super::HarnessError;
use crate::dynamics::LagrangianModel;
use crate::field::Grid2D;

pub const PRESETS: [&str; 4] = ["rigid_body", "heavy_top", "euler2d_kelvin", "boussinesq_budget"];

pub fn preset(name: &str) -> Result<ExperimentConfig, HarnessError> {
    match name {
        "rigid_body" => Ok(rigid_body()),
        "heavy_top" => Ok(heavy_top()),
        "euler2d_kelvin" => Ok(euler2d_kelvin()),
        "boussinesq_budget" => Ok(boussinesq_budget()),
        _ => Err(HarnessError::Usage(format!(
            "unknown preset `{name}`; available: {}",
            PRESETS.join(", ")
        ))),
    }
}

fn finite(model: LagrangianModel, m: Vector3<f64>, a: Option<Vector3<f64>>, xi: Vector3<f64>) -> ExperimentConfig {
    ExperimentConfig {
        model,
        initial: InitialCondition::Momentum { m, a },
        grid: None,
        noise: NoiseSpec {
            amplitude: 1.0,
            xis: vec![XiSpec::Constant { xi }],
        },
        dt: 1e-3,
        t_final: 10.0,
        seed: 0,
        ensemble: 1,
        save_every: Some(100),
        loop_spec: None,
        out: None,
        tolerances: Tolerances::default(),
    }
}

/// Stochastic rigid body, one noise channel.
pub fn rigid_body() -> ExperimentConfig {
    finite(
        LagrangianModel::RigidBody {
            inertia: Vector3::new(1.0, 2.0, 3.0),
        },
        Vector3::new(0.4, -1.0, 0.7),
        None,
        Vector3::new(0.3, -0.2, 0.5),
    )
}

/// Stochastic heavy top, one noise channel.
pub fn heavy_top() -> ExperimentConfig {
    finite(
        LagrangianModel::HeavyTop {
            inertia: Vector3::new(1.0, 1.5, 2.0),
            mgl: 0.5,
            chi: Vector3::new(0.0, 0.0, 1.0),
        },
        Vector3::new(0.3, 0.5, 1.0),
        Some(Vector3::new(0.0, 0.6, 0.8)),
        Vector3::new(0.2, -0.1, 0.3),
    )
}

/// `cos x cos y + 0.3 sin(2x + y)`.
pub fn cell_vorticity() -> FieldSource {
    FieldSource::Fourier {
        modes: vec![
            Mode::new(1, 1, 0.5, 0.0),
            Mode::new(1, -1, 0.5, 0.0),
            Mode::new(2, 1, 0.3, -FRAC_PI_2),
        ],
    }
}

/// Two divergence-free shear fields, `0.15 cos y e_x` and `0.1 sin 2x e_y`.
pub fn shear_noise() -> NoiseSpec {
    NoiseSpec {
        amplitude: 1.0,
        xis: vec![
            XiSpec::Components {
                x: vec![Mode::new(0, 1, 0.15, 0.0)],
                y: vec![],
            },
            XiSpec::Components {
                x: vec![],
                y: vec![Mode::new(2, 0, 0.1, -FRAC_PI_2)],
            },
        ],
    }
}

fn fluid(model: LagrangianModel, buoyancy: Option<FieldSource>, dt: f64, t_final: f64) -> ExperimentConfig {
    ExperimentConfig {
        model,
        initial: InitialCondition::Fields {
            vorticity: cell_vorticity(),
            buoyancy,
        },
        grid: Some(Grid2D::periodic_square(64).expect("valid grid")),
        noise: shear_noise(),
        dt,
        t_final,
        seed: 0,
        ensemble: 1,
        save_every: Some(((t_final / dt).round() as usize / 4).max(1)),
        loop_spec: Some(LoopSpec {
            center: [3.3, 2.9],
            radius: 1.0,
            n: 256,
        }),
        out: None,
        tolerances: Tolerances::default(),
    }
}

/// SALT Euler with a 256-point material loop; conservative case.
pub fn euler2d_kelvin() -> ExperimentConfig {
    let mut c = fluid(LagrangianModel::Euler2d, None, 5e-4, 1.0);
    c.tolerances.conservation_tol = Some(0.01);
    c
}

/// SALT Boussinesq with a buoyancy-driven circulation source.
pub fn boussinesq_budget() -> ExperimentConfig {
    let b0 = FieldSource::Fourier {
        modes: vec![Mode::new(1, 0, 0.5, 0.3 - FRAC_PI_2), Mode::new(0, 1, 0.2, 0.0)],
    };
    fluid(LagrangianModel::Boussinesq { g: 1.0 }, Some(b0), 1e-3, 0.5)
}
