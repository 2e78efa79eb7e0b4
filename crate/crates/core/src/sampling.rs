//! Seeded random samples used by the verification checks and tests.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::so3;
use crate::field::{Field, FieldKind, Grid2D, VectorField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec3<R: Rng>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Rotation `exp(hat w)` with `w` uniform in the ball of radius 3.
pub fn rotation<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    loop {
        let w = Vector3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        if w.norm() < 3.0 {
            return so3::exp(&w);
        }
    }
}

/// Real trigonometric polynomial with integer modes `|k_x|, |k_y| <= kmax`,
/// Gaussian coefficients and zero mean.
pub fn band_limited_plane<R: Rng>(grid: &Grid2D, kmax: i32, rng: &mut R) -> Vec<f64> {
    let mut terms = Vec::new();
    for kx in -kmax..=kmax {
        for ky in 0..=kmax {
            if ky == 0 && kx <= 0 {
                continue;
            }
            let c: f64 = rng.sample(StandardNormal);
            let s: f64 = rng.sample(StandardNormal);
            terms.push((kx as f64, ky as f64, c, s));
        }
    }
    let (ax, ay) = (std::f64::consts::TAU / grid.lx, std::f64::consts::TAU / grid.ly);
    grid.sample(|x, y| {
        terms
            .iter()
            .map(|&(kx, ky, c, s)| {
                let th = ax * kx * x + ay * ky * y;
                c * th.cos() + s * th.sin()
            })
            .sum::<f64>()
            / terms.len() as f64
    })
}

pub fn band_limited_field<R: Rng>(grid: &Grid2D, kind: FieldKind, kmax: i32, rng: &mut R) -> Field {
    let mut data = Vec::new();
    for _ in 0..kind.components() {
        data.extend(band_limited_plane(grid, kmax, rng));
    }
    Field::new(kind, *grid, data).expect("finite sample")
}

pub fn band_limited_vector<R: Rng>(grid: &Grid2D, kmax: i32, rng: &mut R) -> VectorField {
    let x = band_limited_plane(grid, kmax, rng);
    let y = band_limited_plane(grid, kmax, rng);
    VectorField::new(*grid, x, y).expect("finite sample")
}

/// Divergence-free band-limited field from a random stream function.
pub fn band_limited_solenoidal<R: Rng>(grid: &Grid2D, kmax: i32, rng: &mut R) -> VectorField {
    let psi = band_limited_plane(grid, kmax, rng);
    let (px, py) = crate::field::spectral::gradient_planes(grid, &psi);
    VectorField::new(*grid, py, px.into_iter().map(|v| -v).collect()).expect("finite sample")
}
