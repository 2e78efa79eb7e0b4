use nalgebra::Vector3;

use super::lagrangian::{hamiltonian, hamiltonian_gradient};
use super::stepper::{implicit_midpoint_step, stratonovich_step, SdeSystem, SolverOptions};
use super::{DynamicsError, LagrangianModel, NoiseModel, NoisePath, Result};
use crate::algebra::{ad_star, casimir_values, AlgebraElement, DualElement, Realization};

/// `d(m, a) = -ad*_{(dh/dm, dh/da)}(m, a) dt - sum_i ad*_{(xi_i, 0)}(m, a) o dW_i`
/// on flat coordinates.
struct LiePoissonSystem<'a> {
    model: &'a LagrangianModel,
    noise: &'a NoiseModel<Vector3<f64>>,
    realization: Realization,
}

impl LiePoissonSystem<'_> {
    fn dual(&self, x: &[f64]) -> Result<DualElement> {
        DualElement::from_coords(self.realization, x)
            .ok_or_else(|| DynamicsError::InvalidArgument("state length".into()))
    }

    fn minus_ad_star(&self, v: &AlgebraElement, y: &DualElement) -> Result<Vec<f64>> {
        let c = ad_star(v, y)?.to_coords().expect("finite-dimensional");
        Ok(c.into_iter().map(|v| -v).collect())
    }
}

impl SdeSystem for LiePoissonSystem<'_> {
    fn channels(&self) -> usize {
        self.noise.len()
    }

    fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.dual(x)?;
        let grad = hamiltonian_gradient(self.model, &y)?;
        self.minus_ad_star(&grad, &y)
    }

    fn diffusion(&self, x: &[f64], channel: usize) -> Result<Vec<f64>> {
        let y = self.dual(x)?;
        let xi = self.noise.xis()[channel];
        let v = match self.realization {
            Realization::RigidBody => AlgebraElement::rigid_body(xi),
            _ => AlgebraElement::heavy_top(xi, Vector3::zeros()),
        };
        self.minus_ad_star(&v, &y)
    }
}

fn system<'a>(
    y: &DualElement,
    model: &'a LagrangianModel,
    noise: &'a NoiseModel<Vector3<f64>>,
) -> Result<(LiePoissonSystem<'a>, Vec<f64>)> {
    let realization = y.realization();
    if realization != model.realization() {
        return Err(DynamicsError::Algebra(crate::algebra::AlgebraError::RealizationMismatch(
            realization,
            model.realization(),
        )));
    }
    let x = y.to_coords().ok_or(DynamicsError::Algebra(
        crate::algebra::AlgebraError::Unsupported {
            op: "lie_poisson_step",
            realization,
        },
    ))?;
    model.validate()?;
    Ok((
        LiePoissonSystem {
            model,
            noise,
            realization,
        },
        x,
    ))
}

/// One implicit-midpoint Stratonovich step of the stochastic Lie-Poisson
/// equation. Quadratic Casimirs are preserved up to the solver tolerance.
pub fn lie_poisson_step(
    y: &DualElement,
    model: &LagrangianModel,
    noise: &NoiseModel<Vector3<f64>>,
    dt: f64,
    dw: &[f64],
    opts: &SolverOptions,
) -> Result<DualElement> {
    let (sys, x) = system(y, model, noise)?;
    let next = stratonovich_step(&sys, &x, dt, dw, opts)?;
    sys.dual(&next)
}

/// Deterministic Lie-Poisson step `dy/dt = -ad*_{dh/dy} y`.
pub fn lie_poisson_step_deterministic(
    y: &DualElement,
    model: &LagrangianModel,
    dt: f64,
    opts: &SolverOptions,
) -> Result<DualElement> {
    let none = NoiseModel::none();
    let (sys, x) = system(y, model, &none)?;
    let next = implicit_midpoint_step(|v| sys.drift(v), &x, dt, opts)?;
    sys.dual(&next)
}

/// Stored trajectory of a finite-dimensional run.
#[derive(Debug, Clone, PartialEq)]
pub struct LiePoissonRun {
    pub model: LagrangianModel,
    pub times: Vec<f64>,
    pub states: Vec<DualElement>,
}

impl LiePoissonRun {
    /// Casimir values per stored state.
    pub fn casimirs(&self) -> Result<Vec<Vec<f64>>> {
        self.states
            .iter()
            .map(|y| casimir_values(y).map_err(Into::into))
            .collect()
    }

    pub fn energies(&self) -> Result<Vec<f64>> {
        self.states.iter().map(|y| hamiltonian(&self.model, y)).collect()
    }

    /// `max_t |C(t) - C(0)|` for each Casimir.
    pub fn casimir_drift(&self) -> Result<Vec<f64>> {
        let c = self.casimirs()?;
        let first = c.first().ok_or(DynamicsError::InvalidArgument("empty run".into()))?;
        Ok((0..first.len())
            .map(|k| c.iter().fold(0.0_f64, |m, v| m.max((v[k] - first[k]).abs())))
            .collect())
    }

    /// `max_t |h(t) - h(0)|`.
    pub fn energy_excursion(&self) -> Result<f64> {
        let e = self.energies()?;
        let e0 = *e.first().ok_or(DynamicsError::InvalidArgument("empty run".into()))?;
        Ok(e.iter().fold(0.0_f64, |m, v| m.max((v - e0).abs())))
    }
}

/// Integrates over the whole path, storing every state.
pub fn simulate_lie_poisson(
    y0: &DualElement,
    model: &LagrangianModel,
    noise: &NoiseModel<Vector3<f64>>,
    path: &NoisePath,
    opts: &SolverOptions,
) -> Result<LiePoissonRun> {
    if path.channels() != noise.len() {
        return Err(DynamicsError::InvalidArgument(format!(
            "path has {} channels, noise model {}",
            path.channels(),
            noise.len()
        )));
    }
    let (sys, mut x) = system(y0, model, noise)?;
    let dt = path.dt();
    let mut states = Vec::with_capacity(path.n_steps() + 1);
    states.push(y0.clone());
    for n in 0..path.n_steps() {
        x = stratonovich_step(&sys, &x, dt, &path.step(n), opts)?;
        states.push(sys.dual(&x)?);
    }
    Ok(LiePoissonRun {
        model: model.clone(),
        times: path.times(),
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rigid() -> LagrangianModel {
        LagrangianModel::RigidBody {
            inertia: Vector3::new(1.0, 2.0, 3.0),
        }
    }

    #[test]
    fn principal_axis_is_stationary() {
        let y = DualElement::rigid_body(Vector3::new(1.3, 0.0, 0.0));
        let mut z = y.clone();
        for _ in 0..100 {
            z = lie_poisson_step_deterministic(&z, &rigid(), 1e-2, &SolverOptions::default()).unwrap();
        }
        let DualElement::RigidBody { m } = z else { unreachable!() };
        assert!((m - Vector3::new(1.3, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn matches_euler_equations_to_first_order() {
        // m' = m x Omega with Omega = I^{-1} m
        let m0 = Vector3::new(0.4, -1.0, 0.7);
        let dt = 1e-6;
        let y = lie_poisson_step_deterministic(
            &DualElement::rigid_body(m0),
            &rigid(),
            dt,
            &SolverOptions::default(),
        )
        .unwrap();
        let DualElement::RigidBody { m } = y else { unreachable!() };
        let omega = m0.component_div(&Vector3::new(1.0, 2.0, 3.0));
        let rate = (m - m0) / dt;
        assert!((rate - m0.cross(&omega)).norm() < 1e-5);
    }

    #[test]
    fn heavy_top_reproduces_textbook_equations() {
        let model = LagrangianModel::HeavyTop {
            inertia: Vector3::new(1.0, 1.5, 2.0),
            mgl: 0.8,
            chi: Vector3::new(0.0, 0.2, 1.0),
        };
        let (m0, a0) = (Vector3::new(0.3, 0.5, -0.2), Vector3::new(0.0, 0.6, 0.8));
        let dt = 1e-6;
        let y = lie_poisson_step_deterministic(
            &DualElement::heavy_top(m0, a0),
            &model,
            dt,
            &SolverOptions::default(),
        )
        .unwrap();
        let DualElement::HeavyTop { m, a } = y else { unreachable!() };
        let omega = m0.component_div(&Vector3::new(1.0, 1.5, 2.0));
        let chi = Vector3::new(0.0, 0.2, 1.0);
        assert!(((m - m0) / dt - (m0.cross(&omega) + 0.8 * a0.cross(&chi))).norm() < 1e-5);
        assert!(((a - a0) / dt - a0.cross(&omega)).norm() < 1e-5);
    }

    #[test]
    fn noise_free_step_equals_deterministic_bitwise() {
        let y = DualElement::rigid_body(Vector3::new(0.4, -1.0, 0.7));
        let opts = SolverOptions::default();
        let a = lie_poisson_step(&y, &rigid(), &NoiseModel::none(), 1e-3, &[], &opts).unwrap();
        let b = lie_poisson_step_deterministic(&y, &rigid(), 1e-3, &opts).unwrap();
        let (ca, cb) = (a.to_coords().unwrap(), b.to_coords().unwrap());
        assert!(ca.iter().zip(&cb).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn realization_mismatch_is_an_error() {
        let y = DualElement::heavy_top(Vector3::x(), Vector3::y());
        assert!(lie_poisson_step_deterministic(&y, &rigid(), 1e-3, &SolverOptions::default()).is_err());
    }
}
