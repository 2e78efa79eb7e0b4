//! Pseudo-spectral SALT steppers for 2D incompressible flow.
//!
//! Vorticity is transported in flux form `div(omega dchi)`, which equals
//! `dchi . grad omega` for divergence-free `dchi` and keeps the domain mean
//! fixed to round-off for any noise fields. Tendencies are filtered with the
//! 2/3 rule.

use serde::{Deserialize, Serialize};

use super::lagrangian::buoyancy_potential;
use super::stepper::{solve_midpoint, SolverOptions};
use super::{DynamicsError, NoiseModel, Result};
use crate::algebra::{diamond, Tensor};
use crate::field::{
    dealias, lie_derivative, spectral, velocity_from_vorticity, Field, FieldKind, VectorField,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidOptions {
    pub solver: SolverOptions,
    /// Largest admissible `max_cell (|u| dt + sum_i |xi_i| |dW_i|) / dx`;
    /// `None` disables the guard.
    pub cfl_limit: Option<f64>,
}

impl Default for FluidOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            cfl_limit: Some(0.5),
        }
    }
}

/// `dchi = u dt + sum_i xi_i dW_i` for one step.
#[derive(Debug, Clone)]
pub struct StochIncrement<'a> {
    pub dt: f64,
    pub drift: &'a VectorField,
    pub diffusion: Vec<(&'a VectorField, f64)>,
}

impl<'a> StochIncrement<'a> {
    pub fn new(
        u: &'a VectorField,
        dt: f64,
        noise: &'a NoiseModel<VectorField>,
        dw: &[f64],
    ) -> Result<Self> {
        let diffusion = noise.terms(dw)?;
        for (xi, _) in &diffusion {
            u.grid().same_as(xi.grid())?;
        }
        Ok(Self {
            dt,
            drift: u,
            diffusion,
        })
    }

    pub fn deterministic(u: &'a VectorField, dt: f64) -> Self {
        Self {
            dt,
            drift: u,
            diffusion: Vec::new(),
        }
    }

    pub fn displacement(&self) -> VectorField {
        displacement(self.drift, self.dt, &self.diffusion)
    }

    pub fn cfl_number(&self) -> f64 {
        cfl_number(self.drift, self.dt, &self.diffusion)
    }
}

fn displacement(u: &VectorField, dt: f64, terms: &[(&VectorField, f64)]) -> VectorField {
    let mut d = u.scaled(dt);
    for (xi, w) in terms {
        d.axpy(*w, xi).expect("grids checked");
    }
    d
}

fn cfl_number(u: &VectorField, dt: f64, terms: &[(&VectorField, f64)]) -> f64 {
    let g = u.grid();
    let h = g.dx().min(g.dy());
    let mut worst = 0.0_f64;
    for i in 0..g.len() {
        let mut s = u.x[i].hypot(u.y[i]) * dt;
        for (xi, w) in terms {
            s += xi.x[i].hypot(xi.y[i]) * w.abs();
        }
        worst = worst.max(s);
    }
    worst / h
}

fn check_cfl(number: f64, opts: &FluidOptions) -> Result<()> {
    match opts.cfl_limit {
        Some(limit) if number > limit => Err(DynamicsError::Cfl { number, limit }),
        _ => Ok(()),
    }
}

fn scalar_like(f: &Field) -> Result<()> {
    if f.kind().components() == 1 {
        Ok(())
    } else {
        Err(crate::field::FieldError::UnsupportedKind(f.kind(), "vorticity").into())
    }
}

/// `-dealias(div(q d))` as a flat vector.
fn flux_tendency(q: Field, d: &VectorField) -> Result<Vec<f64>> {
    let q = q.with_kind(FieldKind::Density)?;
    Ok(dealias(&lie_derivative(d, &q)?).scaled(-1.0).into_values())
}

fn vorticity_step(
    omega: &Field,
    dt: f64,
    terms: &[(&VectorField, f64)],
    opts: &FluidOptions,
) -> Result<Field> {
    scalar_like(omega)?;
    let u0 = velocity_from_vorticity(omega)?;
    check_cfl(cfl_number(&u0, dt, terms), opts)?;
    let (kind, grid) = (omega.kind(), *omega.grid());
    let next = solve_midpoint(
        omega.values(),
        |mid| {
            let w = Field::new(FieldKind::Density, grid, mid.to_vec())?;
            let u = velocity_from_vorticity(&w)?;
            flux_tendency(w, &displacement(&u, dt, terms))
        },
        &opts.solver,
    )?;
    Ok(Field::new(kind, grid, next)?)
}

/// One Stratonovich step of `d omega + L_{dchi} omega = 0` with
/// `dchi = u dt + sum_i xi_i o dW_i` and `u` recovered from `omega`.
pub fn salt_euler_step(
    omega: &Field,
    noise: &NoiseModel<VectorField>,
    dt: f64,
    dw: &[f64],
    opts: &FluidOptions,
) -> Result<Field> {
    let terms = noise.terms(dw)?;
    for (xi, _) in &terms {
        omega.grid().same_as(xi.grid())?;
    }
    vorticity_step(omega, dt, &terms, opts)
}

/// Deterministic 2D Euler step in vorticity form.
pub fn euler_step(omega: &Field, dt: f64, opts: &FluidOptions) -> Result<Field> {
    vorticity_step(omega, dt, &[], opts)
}

fn frozen_advection(a: &Field, d: &VectorField, opts: &FluidOptions) -> Result<Field> {
    a.grid().same_as(d.grid())?;
    let (kind, grid) = (a.kind(), *a.grid());
    let next = solve_midpoint(
        a.values(),
        |mid| {
            let f = Field::new(kind, grid, mid.to_vec())?;
            Ok(dealias(&lie_derivative(d, &f)?).scaled(-1.0).into_values())
        },
        &opts.solver,
    )?;
    Ok(Field::new(kind, grid, next)?)
}

/// One Stratonovich step of `da + L_{dchi} a = 0` for any field kind, with
/// the velocity in `inc` taken at the step midpoint.
pub fn advect_step(a: &Field, inc: &StochIncrement<'_>, opts: &FluidOptions) -> Result<Field> {
    check_cfl(inc.cfl_number(), opts)?;
    frozen_advection(a, &inc.displacement(), opts)
}

/// Deterministic advection by `u` over `dt`.
pub fn advect_step_deterministic(
    a: &Field,
    u: &VectorField,
    dt: f64,
    opts: &FluidOptions,
) -> Result<Field> {
    check_cfl(cfl_number(u, dt, &[]), opts)?;
    frozen_advection(a, &u.scaled(dt), opts)
}

/// Vorticity and buoyancy for the Boussinesq model `l = int 1/2 |u|^2 - b Phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoussinesqState {
    pub omega: Field,
    pub b: Field,
}

/// Vorticity forcing `curl(dl/db <> b)` with `dl/db = -Phi`.
fn buoyancy_torque(b: &Field, phi: &Field) -> Result<Vec<f64>> {
    let Tensor::Grid(f) = diamond(&Tensor::Grid(phi.scaled(-1.0)), &Tensor::Grid(b.clone()))? else {
        unreachable!("grid diamond")
    };
    let g = *b.grid();
    let dfy = spectral::ddx(&g, f.component(1));
    let dfx = spectral::ddy(&g, f.component(0));
    let curl: Vec<f64> = dfy.iter().zip(&dfx).map(|(a, c)| a - c).collect();
    Ok(spectral::dealias_plane(&g, &curl))
}

fn boussinesq_core(
    s: &BoussinesqState,
    g_acc: f64,
    dt: f64,
    terms: &[(&VectorField, f64)],
    opts: &FluidOptions,
) -> Result<BoussinesqState> {
    scalar_like(&s.omega)?;
    s.b.expect_kind(FieldKind::Scalar)?;
    s.omega.grid().same_as(s.b.grid())?;
    let grid = *s.omega.grid();
    let n = grid.len();
    let phi = buoyancy_potential(&grid, g_acc);
    check_cfl(cfl_number(&velocity_from_vorticity(&s.omega)?, dt, terms), opts)?;
    let mut x = s.omega.values().to_vec();
    x.extend_from_slice(s.b.values());
    let next = solve_midpoint(
        &x,
        |mid| {
            let w = Field::new(FieldKind::Density, grid, mid[..n].to_vec())?;
            let b = Field::new(FieldKind::Scalar, grid, mid[n..].to_vec())?;
            let u = velocity_from_vorticity(&w)?;
            let d = displacement(&u, dt, terms);
            let mut inc = flux_tendency(w, &d)?;
            for (v, t) in inc.iter_mut().zip(buoyancy_torque(&b, &phi)?) {
                *v += t * dt;
            }
            inc.extend(dealias(&lie_derivative(&d, &b)?).scaled(-1.0).into_values());
            Ok(inc)
        },
        &opts.solver,
    )?;
    Ok(BoussinesqState {
        omega: Field::new(s.omega.kind(), grid, next[..n].to_vec())?,
        b: Field::new(FieldKind::Scalar, grid, next[n..].to_vec())?,
    })
}

/// One Stratonovich step of the SALT Boussinesq system
/// `d omega + L_{dchi} omega = curl(dl/db <> b) dt`, `db + L_{dchi} b = 0`.
pub fn boussinesq_step(
    s: &BoussinesqState,
    g: f64,
    noise: &NoiseModel<VectorField>,
    dt: f64,
    dw: &[f64],
    opts: &FluidOptions,
) -> Result<BoussinesqState> {
    let terms = noise.terms(dw)?;
    for (xi, _) in &terms {
        s.omega.grid().same_as(xi.grid())?;
    }
    boussinesq_core(s, g, dt, &terms, opts)
}

pub fn boussinesq_step_deterministic(
    s: &BoussinesqState,
    g: f64,
    dt: f64,
    opts: &FluidOptions,
) -> Result<BoussinesqState> {
    boussinesq_core(s, g, dt, &[], opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{integrate_domain, Grid2D};

    fn grid(n: usize) -> Grid2D {
        Grid2D::periodic_square(n).unwrap()
    }

    #[test]
    fn zero_vorticity_stays_zero_under_noise() {
        let g = grid(32);
        let xi = VectorField::from_fn(g, |_, y| (y.cos(), 0.3));
        let noise = NoiseModel::fields(vec![xi], vec![]).unwrap();
        let w = Field::zeros(FieldKind::Scalar, g);
        let out = salt_euler_step(&w, &noise, 1e-2, &[0.05], &FluidOptions::default()).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn mean_vorticity_is_preserved() {
        let g = grid(32);
        let w = Field::scalar_from_fn(g, |x, y| (x + 2.0 * y).sin() + 0.5 * (3.0 * x).cos() * y.sin());
        // a compressible noise field: the flux form still keeps the mean
        let xi = VectorField::from_fn(g, |x, _| (0.2 * x.sin(), 0.1));
        let noise = NoiseModel::fields(vec![xi], vec![]).unwrap();
        let out = salt_euler_step(&w, &noise, 1e-2, &[0.05], &FluidOptions::default()).unwrap();
        assert!(out.mean().abs() < 1e-12);
    }

    #[test]
    fn cfl_guard_trips() {
        let g = grid(16);
        let w = Field::scalar_from_fn(g, |x, y| 5.0 * x.sin() * y.sin());
        let err = euler_step(&w, 0.5, &FluidOptions::default()).unwrap_err();
        assert!(matches!(err, DynamicsError::Cfl { .. }));
        let relaxed = FluidOptions {
            cfl_limit: None,
            ..FluidOptions::default()
        };
        // without the guard the solve itself may still fail, but not on CFL
        assert!(!matches!(euler_step(&w, 0.5, &relaxed), Err(DynamicsError::Cfl { .. })));
    }

    #[test]
    fn density_mass_is_conserved_per_step() {
        let g = grid(32);
        let rho = Field::density_from_fn(g, |x, y| 1.0 + 0.3 * (x - y).sin());
        let u = VectorField::from_fn(g, |x, y| (y.sin(), 0.5 * x.cos()));
        let m0 = integrate_domain(&rho).unwrap();
        let r = advect_step_deterministic(&rho, &u, 1e-2, &FluidOptions::default()).unwrap();
        assert!((integrate_domain(&r).unwrap() - m0).abs() < 1e-10 * m0);
    }

    #[test]
    fn constant_scalar_is_unchanged() {
        let g = grid(16);
        let a = Field::constant(FieldKind::Scalar, g, 2.5);
        let u = VectorField::from_fn(g, |x, y| (y.sin(), x.cos()));
        let xi = VectorField::uniform(g, 1.0, 0.0);
        let noise = NoiseModel::fields(vec![xi], vec![]).unwrap();
        let inc = StochIncrement::new(&u, 1e-2, &noise, &[0.1]).unwrap();
        let out = advect_step(&a, &inc, &FluidOptions::default()).unwrap();
        assert!(out.values().iter().all(|v| (v - 2.5).abs() < 1e-13));
    }

    #[test]
    fn buoyancy_torque_matches_jacobian() {
        // curl(Phi grad b) = Phi_x b_y - Phi_y b_x = -Phi_y b_x for Phi = g sin y
        let g = grid(32);
        let b = Field::scalar_from_fn(g, |x, _| x.cos());
        let phi = buoyancy_potential(&g, 2.0);
        let t = buoyancy_torque(&b, &phi).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = g.node(i, j);
                let expected = -(2.0 * y.cos()) * (-x.sin());
                assert!((t[g.index(i, j)] - expected).abs() < 1e-12);
            }
        }
    }
}
