//! Deterministic Lie chain rule
//! `d/de (g_e* S_e) = g_e* (dS_e/de - L_w S_e)` for scalar families, where
//! `w = (Dg_e)^{-1} dg_e/de` is the convective velocity of the flow family.

use serde::Serialize;

use super::report::ResidualReport;
use super::Result;
use crate::field::{lie_derivative, Field, Grid2D, SpectralEvaluator, VectorField};

/// Scalar field depending smoothly on `e`, evaluated anywhere in the plane.
pub trait ScalarFamily: Sync {
    fn value(&self, eps: f64, x: f64, y: f64) -> f64;
    fn eps_derivative(&self, eps: f64, x: f64, y: f64) -> f64;
}

/// Flow family `g_e` through its inverse and convective velocity.
pub trait FlowFamily: Sync {
    fn inverse(&self, eps: f64, x: f64, y: f64) -> (f64, f64);
    fn convective_velocity(&self, eps: f64, x: f64, y: f64) -> (f64, f64);
}

/// `S_e = (1 + growth e) profile`.
pub struct ScaledProfile<F> {
    pub profile: F,
    pub growth: f64,
}

impl<F: Fn(f64, f64) -> f64 + Sync> ScalarFamily for ScaledProfile<F> {
    fn value(&self, eps: f64, x: f64, y: f64) -> f64 {
        (1.0 + self.growth * eps) * (self.profile)(x, y)
    }

    fn eps_derivative(&self, _: f64, x: f64, y: f64) -> f64 {
        self.growth * (self.profile)(x, y)
    }
}

pub struct IdentityFlow;

impl FlowFamily for IdentityFlow {
    fn inverse(&self, _: f64, x: f64, y: f64) -> (f64, f64) {
        (x, y)
    }

    fn convective_velocity(&self, _: f64, _: f64, _: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
}

/// Rotation by angle `rate * e` about `center`. Profiles must be supported
/// well inside the domain so the rotated field stays periodic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RotationFlow {
    pub center: (f64, f64),
    pub rate: f64,
}

impl FlowFamily for RotationFlow {
    fn inverse(&self, eps: f64, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = (-self.rate * eps).sin_cos();
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        (self.center.0 + c * dx - s * dy, self.center.1 + s * dx + c * dy)
    }

    fn convective_velocity(&self, _: f64, x: f64, y: f64) -> (f64, f64) {
        // rotations commute, so the convective and spatial velocities agree
        (-self.rate * (y - self.center.1), self.rate * (x - self.center.0))
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Compares the central `e`-difference of `g_e* S_e` (step `h`) with the
/// right-hand side built from the grid Lie derivative, for every `h` in
/// `hs`. Residuals are relative L2 norms; the expected order is 2.
pub fn check_lie_chain_rule(
    grid: &Grid2D,
    s: &dyn ScalarFamily,
    g: &dyn FlowFamily,
    eps0: f64,
    hs: &[f64],
) -> Result<ResidualReport> {
    let nodes: Vec<(f64, f64)> = (0..grid.ny)
        .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
        .map(|(i, j)| grid.node(i, j))
        .collect();
    let pushed = |eps: f64| -> Vec<f64> {
        nodes
            .iter()
            .map(|&(x, y)| {
                let (px, py) = g.inverse(eps, x, y);
                s.value(eps, px, py)
            })
            .collect()
    };

    let s0 = Field::scalar_from_fn(*grid, |x, y| s.value(eps0, x, y));
    let w = VectorField::from_fn(*grid, |x, y| g.convective_velocity(eps0, x, y));
    let transport = lie_derivative(&w, &s0)?;
    let body: Vec<f64> = nodes
        .iter()
        .zip(transport.values())
        .map(|(&(x, y), l)| s.eps_derivative(eps0, x, y) - l)
        .collect();
    let eval = SpectralEvaluator::with_cutoff(grid, &body, 0.0);
    let rhs: Vec<f64> = nodes
        .iter()
        .map(|&(x, y)| {
            let (px, py) = g.inverse(eps0, x, y);
            eval.value(px, py)
        })
        .collect();
    let scale = l2(&rhs).max(l2(s0.values())).max(f64::MIN_POSITIVE);

    let residuals = hs
        .iter()
        .map(|&h| {
            let (p, m) = (pushed(eps0 + h), pushed(eps0 - h));
            let diff: Vec<f64> = p
                .iter()
                .zip(&m)
                .zip(&rhs)
                .map(|((a, b), r)| (a - b) / (2.0 * h) - r)
                .collect();
            l2(&diff) / scale
        })
        .collect();
    Ok(ResidualReport::from_order(
        "chainrule",
        serde_json::json!({ "grid": [grid.nx, grid.ny], "eps0": eps0, "h": hs }),
        "h",
        hs.to_vec(),
        residuals,
        1.8,
    ))
}

/// Off-center Gaussian bump, negligible at the domain boundary of the
/// standard `2 pi` torus.
pub fn default_bump(x: f64, y: f64) -> f64 {
    let (cx, cy) = (std::f64::consts::PI + 0.6, std::f64::consts::PI - 0.2);
    let (dx, dy) = (x - cx, y - cy);
    (-(dx * dx / (2.0 * 0.35 * 0.35) + dy * dy / (2.0 * 0.3 * 0.3))).exp()
}
