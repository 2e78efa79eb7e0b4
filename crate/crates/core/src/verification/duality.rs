//! Defining dualities of `ad*`, the diamond operator and `Ad*`, checked by
//! pairing both sides on random elements.

use nalgebra::Vector3;
use rand::Rng;

use super::report::{Criterion, ResidualReport};
use super::Result;
use crate::algebra::{
    ad, ad_star, adjoint, coadjoint, diamond, diamond_r3, group_inv, lie_r3, pair,
    AlgebraElement, DualElement, GroupElement, Realization, Tensor,
};
use crate::field::{inner_product, lie_derivative, Field, FieldKind, Grid2D, VectorField};
use crate::sampling;

/// Finite-dimensional residual threshold (absolute).
pub const FINITE_TOL: f64 = 1e-10;
/// Grid residual threshold (relative).
pub const GRID_TOL: f64 = 1e-6;

/// Largest absolute residual of
/// `<ad*_x y, z> = <y, ad_x z>`, `<Ad*_{p^{-1}} y, z> = <y, Ad_p z>` and,
/// for the heavy top, `<v <> a, w> = -<a, rho_w v>` with `rho_w v = -w x v`.
pub fn finite_duality_residual(
    x: &AlgebraElement,
    y: &DualElement,
    z: &AlgebraElement,
    p: &GroupElement,
) -> Result<f64> {
    let r_ad = (pair(&ad_star(x, y)?, z)? - pair(y, &ad(x, z)?)?).abs();
    let r_big = (pair(&coadjoint(&group_inv(p), y)?, z)? - pair(y, &adjoint(p, z)?)?).abs();
    let r_diamond = match (y, z) {
        (DualElement::HeavyTop { m, a }, AlgebraElement::HeavyTop { u, .. }) => {
            // m plays the role of v, u the algebra element
            let lhs = diamond_r3(m, a).dot(u);
            let rho = lie_r3(u, m);
            (lhs + a.dot(&rho)).abs()
        }
        _ => 0.0,
    };
    Ok(r_ad.max(r_big).max(r_diamond))
}

fn relative(lhs: f64, rhs: f64, scale: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-8 * scale).max(f64::MIN_POSITIVE)
}

fn grid_diamond_pair(v: &Field, a: &Field, w: &VectorField) -> Result<f64> {
    let Tensor::Grid(d) = diamond(&Tensor::Grid(v.clone()), &Tensor::Grid(a.clone()))? else {
        unreachable!("grid diamond")
    };
    // <v <> a, w> = -<a, rho_w v> = <a, L_w v>
    let lhs = inner_product(&d, &w.to_field())?;
    let rhs = inner_product(a, &lie_derivative(w, v)?)?;
    Ok(relative(lhs, rhs, v.l2_norm() * a.l2_norm() * w.l2_norm()))
}

/// Largest relative residual of the `ad*` duality and both diamond
/// identities (scalar/density and density/scalar) on grid elements.
pub fn grid_duality_residual(
    x: &AlgebraElement,
    y: &DualElement,
    z: &AlgebraElement,
    w: &VectorField,
) -> Result<f64> {
    let lhs = pair(&ad_star(x, y)?, z)?;
    let rhs = pair(y, &ad(x, z)?)?;
    let mut r = relative(lhs, rhs, 1.0);
    if let (AlgebraElement::Euler2d { b, .. }, DualElement::Euler2d { a, .. }) = (x, y) {
        if a.kind() == FieldKind::Density {
            r = r.max(grid_diamond_pair(b, a, w)?);
            let as_scalar = a.clone().with_kind(FieldKind::Scalar)?;
            let b_density = b.clone().with_kind(FieldKind::Density)?;
            r = r.max(grid_diamond_pair(&b_density, &as_scalar, w)?);
        }
    }
    Ok(r)
}

fn random_finite<R: Rng>(realization: Realization, rng: &mut R) -> Result<(AlgebraElement, DualElement, AlgebraElement, GroupElement)> {
    let mut v = || sampling::normal_vec3(rng);
    let (x, y, z) = match realization {
        Realization::RigidBody => (
            AlgebraElement::rigid_body(v()),
            DualElement::rigid_body(v()),
            AlgebraElement::rigid_body(v()),
        ),
        _ => (
            AlgebraElement::heavy_top(v(), v()),
            DualElement::heavy_top(v(), v()),
            AlgebraElement::heavy_top(v(), v()),
        ),
    };
    let t = if realization == Realization::RigidBody {
        Vector3::zeros()
    } else {
        sampling::normal_vec3(rng)
    };
    let p = GroupElement::new(realization, sampling::rotation(rng), t)?;
    Ok((x, y, z, p))
}

/// Maximum residual over `n_samples` seeded random tuples. Finite
/// realizations use absolute residuals against 1e-10; the grid uses
/// band-limited 32x32 fields and relative residuals against 1e-6. The grid
/// group action is not represented, so only the algebra identities are
/// checked there.
pub fn check_dualities(realization: Realization, n_samples: usize, seed: u64) -> Result<ResidualReport> {
    let mut rng = sampling::rng(seed);
    let mut residuals = Vec::with_capacity(n_samples);
    let (tol, note) = if realization.is_finite_dim() {
        for _ in 0..n_samples {
            let (x, y, z, p) = random_finite(realization, &mut rng)?;
            residuals.push(finite_duality_residual(&x, &y, &z, &p)?);
        }
        (FINITE_TOL, None)
    } else {
        let g = Grid2D::periodic_square(32)?;
        for _ in 0..n_samples {
            let x = AlgebraElement::Euler2d {
                u: sampling::band_limited_solenoidal(&g, 3, &mut rng),
                b: sampling::band_limited_field(&g, FieldKind::Scalar, 3, &mut rng),
            };
            let z = AlgebraElement::Euler2d {
                u: sampling::band_limited_solenoidal(&g, 3, &mut rng),
                b: sampling::band_limited_field(&g, FieldKind::Scalar, 3, &mut rng),
            };
            let y = DualElement::euler2d(
                sampling::band_limited_field(&g, FieldKind::OneForm, 3, &mut rng),
                sampling::band_limited_field(&g, FieldKind::Density, 3, &mut rng),
            )?;
            let w = sampling::band_limited_vector(&g, 3, &mut rng);
            residuals.push(grid_duality_residual(&x, &y, &z, &w)?);
        }
        (GRID_TOL, Some("group coadjoint action not checked on the grid"))
    };
    let mut rep = ResidualReport::from_residuals(
        "duality",
        serde_json::json!({
            "realization": format!("{realization:?}"),
            "samples": n_samples,
            "seed": seed,
        }),
        "sample",
        (0..n_samples).map(|i| i as f64).collect(),
        residuals,
        Criterion::MaxResidual(tol),
    );
    if let Some(n) = note {
        rep.notes.push(n.into());
    }
    Ok(rep)
}
