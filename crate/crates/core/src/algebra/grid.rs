//! Grid realization of the semidirect-product operators.

use super::AlgebraError;
use crate::field::{
    gradient, inner_product, lie_derivative, Field, FieldKind, VectorField,
};

pub(super) fn pair(m: &Field, a: &Field, u: &VectorField, b: &Field) -> Result<f64, AlgebraError> {
    let mu = inner_product(m, &u.to_field())?;
    let ab = inner_product(a, b)?;
    Ok(mu + ab)
}

pub(super) fn ad(
    u: &VectorField,
    b: &Field,
    w: &VectorField,
    c: &Field,
) -> Result<(VectorField, Field), AlgebraError> {
    let bracket = lie_derivative(u, &w.to_field())?;
    let bracket = VectorField::from_field(&bracket)?.scaled(-1.0);
    // representation rho_u = -L_u (infinitesimal push-forward)
    let mut rep = lie_derivative(w, b)?;
    rep.axpy(-1.0, &lie_derivative(u, c)?)?;
    Ok((bracket, rep))
}

/// Lie derivative of a one-form density: one-form part plus `m div u`.
pub(super) fn lie_one_form_density(u: &VectorField, m: &Field) -> Result<Field, AlgebraError> {
    let mut out = lie_derivative(u, m)?;
    let div = crate::field::divergence(u);
    let n = m.grid().len();
    let d = div.values();
    let mv = m.values();
    let o = out.values_mut();
    for c in 0..2 {
        for i in 0..n {
            o[c * n + i] += mv[c * n + i] * d[i];
        }
    }
    Ok(out)
}

pub(super) fn ad_star(
    u: &VectorField,
    b: &Field,
    m: &Field,
    a: &Field,
) -> Result<(Field, Field), AlgebraError> {
    let mut mom = lie_one_form_density(u, m)?;
    mom.axpy(1.0, &diamond(b, a)?)?;
    let adv = lie_derivative(u, a)?;
    Ok((mom, adv))
}

pub(super) fn diamond(v: &Field, a: &Field) -> Result<Field, AlgebraError> {
    v.grid().same_as(a.grid())?;
    let (sign, weight, potential) = match (v.kind(), a.kind()) {
        // <v <> a, u> = <a, u . grad v>
        (FieldKind::Scalar, FieldKind::Density) => (1.0, a, v),
        // <v <> a, u> = <a, div(v u)> = -<v grad a, u>
        (FieldKind::Density, FieldKind::Scalar) => (-1.0, v, a),
        (kv, ka) => {
            return Err(AlgebraError::UnsupportedTensor(format!(
                "{kv:?} <> {ka:?}"
            )))
        }
    };
    let mut g = gradient(potential)?;
    let n = v.grid().len();
    let w = weight.values();
    let gv = g.values_mut();
    for c in 0..2 {
        for i in 0..n {
            gv[c * n + i] *= sign * w[i];
        }
    }
    Ok(g)
}
