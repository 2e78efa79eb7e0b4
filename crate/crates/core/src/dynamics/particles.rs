//! Lagrangian particles advected by `dx = u(x) dt + sum_i xi_i(x) o dW_i`.
//!
//! Positions live in the universal cover of the torus (they are never
//! wrapped), so loop segments and displacements stay continuous. Use
//! [`Grid2D::wrap`](crate::field::Grid2D::wrap) for display.

use super::stepper::SolverOptions;
use super::{DynamicsError, NoiseModel, NoisePath, Result};
use crate::field::{Interpolant, VectorField};

/// Velocity evaluated at arbitrary points.
pub trait VelocitySource {
    fn velocity(&self, x: f64, y: f64) -> (f64, f64);
}

impl<F: Fn(f64, f64) -> (f64, f64)> VelocitySource for F {
    fn velocity(&self, x: f64, y: f64) -> (f64, f64) {
        self(x, y)
    }
}

/// Bicubic interpolation of a grid velocity.
#[derive(Debug, Clone, Copy)]
pub struct GridVelocity<'a> {
    x: Interpolant<'a>,
    y: Interpolant<'a>,
}

impl<'a> GridVelocity<'a> {
    pub fn new(u: &'a VectorField) -> Self {
        Self {
            x: Interpolant::new(u.grid(), &u.x),
            y: Interpolant::new(u.grid(), &u.y),
        }
    }
}

impl VelocitySource for GridVelocity<'_> {
    fn velocity(&self, x: f64, y: f64) -> (f64, f64) {
        (self.x.eval(x, y), self.y.eval(x, y))
    }
}

const RANGE: f64 = 1e12;

fn check_point(p: (f64, f64)) -> Result<()> {
    if p.0.is_finite() && p.1.is_finite() && p.0.abs() < RANGE && p.1.abs() < RANGE {
        Ok(())
    } else {
        Err(DynamicsError::PointOutOfRange(p.0, p.1))
    }
}

fn step_point(
    p: (f64, f64),
    u: &dyn VelocitySource,
    terms: &[(&dyn VelocitySource, f64)],
    dt: f64,
    opts: &SolverOptions,
) -> Result<(f64, f64)> {
    check_point(p)?;
    let mut next = p;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let mid = (0.5 * (p.0 + next.0), 0.5 * (p.1 + next.1));
        let (vx, vy) = u.velocity(mid.0, mid.1);
        let mut dx = vx * dt;
        let mut dy = vy * dt;
        for (xi, w) in terms {
            let (ax, ay) = xi.velocity(mid.0, mid.1);
            dx += ax * w;
            dy += ay * w;
        }
        let cand = (p.0 + dx, p.1 + dy);
        residual = (cand.0 - next.0).abs().max((cand.1 - next.1).abs());
        next = cand;
        check_point(next)?;
        if residual <= opts.tol * next.0.abs().max(next.1.abs()).max(1.0) {
            return Ok(next);
        }
    }
    Err(DynamicsError::NonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// One implicit-midpoint Stratonovich step for every point. `u` should be
/// the velocity at the middle of the step.
pub fn particle_step(
    points: &[(f64, f64)],
    u: &dyn VelocitySource,
    xis: &[&dyn VelocitySource],
    dt: f64,
    dw: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<(f64, f64)>> {
    if xis.len() != dw.len() {
        return Err(DynamicsError::InvalidArgument(format!(
            "{} increments for {} noise fields",
            dw.len(),
            xis.len()
        )));
    }
    let terms: Vec<(&dyn VelocitySource, f64)> = xis.iter().copied().zip(dw.iter().copied()).collect();
    points
        .iter()
        .map(|&p| step_point(p, u, &terms, dt, opts))
        .collect()
}

/// Deterministic reconstruction step `dx/dt = u(x)`.
pub fn particle_step_deterministic(
    points: &[(f64, f64)],
    u: &dyn VelocitySource,
    dt: f64,
    opts: &SolverOptions,
) -> Result<Vec<(f64, f64)>> {
    points
        .iter()
        .map(|&p| step_point(p, u, &[], dt, opts))
        .collect()
}

/// Trajectories `[step][point]` of particles driven by the velocity series
/// `u_series` (one field per step time, `n_steps + 1` in total) and the
/// noise path. The velocity inside step `n` is the time midpoint
/// `(u_n + u_{n+1}) / 2`.
pub fn reconstruct_particles(
    points: &[(f64, f64)],
    u_series: &[VectorField],
    noise: &NoiseModel<VectorField>,
    path: &NoisePath,
    opts: &SolverOptions,
) -> Result<Vec<Vec<(f64, f64)>>> {
    if u_series.len() != path.n_steps() + 1 {
        return Err(DynamicsError::InvalidArgument(format!(
            "{} velocity fields for {} steps",
            u_series.len(),
            path.n_steps()
        )));
    }
    if path.channels() != noise.len() {
        return Err(DynamicsError::InvalidArgument(format!(
            "path has {} channels, noise model {}",
            path.channels(),
            noise.len()
        )));
    }
    let sources: Vec<GridVelocity<'_>> = noise.xis().iter().map(GridVelocity::new).collect();
    let xis: Vec<&dyn VelocitySource> = sources.iter().map(|s| s as &dyn VelocitySource).collect();
    let mut out = Vec::with_capacity(u_series.len());
    out.push(points.to_vec());
    for n in 0..path.n_steps() {
        let mut mid = u_series[n].scaled(0.5);
        mid.axpy(0.5, &u_series[n + 1])?;
        let um = GridVelocity::new(&mid);
        let next = particle_step(out.last().unwrap(), &um, &xis, path.dt(), &path.step(n), opts)?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;

    #[test]
    fn zero_fields_keep_points_fixed() {
        let g = Grid2D::periodic_square(16).unwrap();
        let zero = VectorField::zeros(g);
        let pts = vec![(0.1, 0.2), (3.0, 5.5)];
        let path = NoisePath::sample(1, 0.1, 10, 1).unwrap();
        let noise = NoiseModel::fields(vec![VectorField::zeros(g)], vec![]).unwrap();
        let traj =
            reconstruct_particles(&pts, &vec![zero; 11], &noise, &path, &SolverOptions::default()).unwrap();
        assert_eq!(traj.last().unwrap(), &pts);
    }

    #[test]
    fn uniform_flow_translates_exactly() {
        let g = Grid2D::periodic_square(16).unwrap();
        let u = VectorField::uniform(g, 1.0, 0.0);
        let path = NoisePath::sample(1, 1e-2, 100, 0).unwrap();
        let pts = vec![(0.3, 0.4), (6.0, 1.0)];
        let traj = reconstruct_particles(&pts, &vec![u; 101], &NoiseModel::none(), &path, &SolverOptions::default())
            .unwrap();
        for (p, q) in pts.iter().zip(traj.last().unwrap()) {
            assert!((q.0 - p.0 - 1.0).abs() < 1e-12);
            assert!((q.1 - p.1).abs() < 1e-12);
        }
    }

    #[test]
    fn solid_body_rotation_keeps_radius() {
        let (cx, cy) = (3.0, 3.0);
        let rot = move |x: f64, y: f64| (-(y - cy), x - cx);
        let mut pts = vec![(4.0, 3.0), (3.0, 3.5), (2.2, 2.9)];
        let r0: Vec<f64> = pts.iter().map(|p| (p.0 - cx).hypot(p.1 - cy)).collect();
        for _ in 0..1000 {
            pts = particle_step_deterministic(&pts, &rot, 1e-3, &SolverOptions::default()).unwrap();
        }
        for (p, r) in pts.iter().zip(&r0) {
            assert!(((p.0 - cx).hypot(p.1 - cy) - r).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_point_is_rejected() {
        let u = |_: f64, _: f64| (0.0, 0.0);
        let err = particle_step_deterministic(&[(f64::NAN, 0.0)], &u, 0.1, &SolverOptions::default());
        assert!(matches!(err, Err(DynamicsError::PointOutOfRange(..))));
    }
}
