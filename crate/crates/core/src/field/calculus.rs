use rustfft::num_complex::Complex64;

use super::spectral::{self, dealias_plane, derivative_wavenumbers, gradient_planes, wavenumbers};
use super::{Field, FieldError, FieldKind, VectorField};

/// Lie derivative `L_u T` by tensor kind.
///
/// * scalar `f`: `u . grad f`
/// * density `f`: `div(f u)`
/// * one-form `alpha`: `(L_u alpha)_j = u^k d_k alpha_j + alpha_k d_j u^k`
/// * vector `w`: `[u, w] = u . grad w - w . grad u`
///
/// Products are collocated without filtering, which keeps the discrete
/// integration-by-parts identities exact; callers that need dealiasing
/// apply [`dealias`] to the result.
pub fn lie_derivative(u: &VectorField, t: &Field) -> Result<Field, FieldError> {
    let grid = *t.grid();
    u.grid().same_as(&grid)?;
    let n = grid.len();
    let out = match t.kind() {
        FieldKind::Scalar => {
            let (fx, fy) = gradient_planes(&grid, t.component(0));
            (0..n).map(|i| u.x[i] * fx[i] + u.y[i] * fy[i]).collect()
        }
        FieldKind::Density => {
            let f = t.component(0);
            let px: Vec<f64> = (0..n).map(|i| f[i] * u.x[i]).collect();
            let py: Vec<f64> = (0..n).map(|i| f[i] * u.y[i]).collect();
            let dx = spectral::ddx(&grid, &px);
            let dy = spectral::ddy(&grid, &py);
            dx.iter().zip(&dy).map(|(a, b)| a + b).collect()
        }
        FieldKind::OneForm => {
            let (a0, a1) = (t.component(0), t.component(1));
            let (a0x, a0y) = gradient_planes(&grid, a0);
            let (a1x, a1y) = gradient_planes(&grid, a1);
            let (uxx, uxy) = gradient_planes(&grid, &u.x);
            let (uyx, uyy) = gradient_planes(&grid, &u.y);
            let mut out = vec![0.0; 2 * n];
            for i in 0..n {
                out[i] = u.x[i] * a0x[i] + u.y[i] * a0y[i] + a0[i] * uxx[i] + a1[i] * uyx[i];
                out[n + i] = u.x[i] * a1x[i] + u.y[i] * a1y[i] + a0[i] * uxy[i] + a1[i] * uyy[i];
            }
            out
        }
        FieldKind::Vector => {
            let (w0, w1) = (t.component(0), t.component(1));
            let (w0x, w0y) = gradient_planes(&grid, w0);
            let (w1x, w1y) = gradient_planes(&grid, w1);
            let (uxx, uxy) = gradient_planes(&grid, &u.x);
            let (uyx, uyy) = gradient_planes(&grid, &u.y);
            let mut out = vec![0.0; 2 * n];
            for i in 0..n {
                out[i] = u.x[i] * w0x[i] + u.y[i] * w0y[i] - (w0[i] * uxx[i] + w1[i] * uxy[i]);
                out[n + i] = u.x[i] * w1x[i] + u.y[i] * w1y[i] - (w0[i] * uyx[i] + w1[i] * uyy[i]);
            }
            out
        }
    };
    Ok(Field::from_raw(t.kind(), grid, out))
}

/// Recovers `u = (d_y psi, -d_x psi)` with `lap psi = -omega`.
pub fn velocity_from_vorticity(omega: &Field) -> Result<VectorField, FieldError> {
    if omega.kind().components() != 1 {
        return Err(FieldError::UnsupportedKind(omega.kind(), "velocity_from_vorticity"));
    }
    let grid = *omega.grid();
    let mean = omega.mean();
    if mean.abs() > 1e-10 * omega.max_abs().max(1.0) {
        return Err(FieldError::NonzeroMean { mean });
    }
    let spec = spectral::forward(&grid, omega.component(0));
    let (kx2, ky2) = wavenumbers(&grid);
    let (kx, ky) = derivative_wavenumbers(&grid);
    let mut sx = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut sy = sx.clone();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.index(i, j);
            let k2 = kx2[i] * kx2[i] + ky2[j] * ky2[j];
            if k2 == 0.0 {
                continue;
            }
            let psi = spec[idx] / k2;
            sx[idx] = psi * Complex64::new(0.0, ky[j]);
            sy[idx] = -psi * Complex64::new(0.0, kx[i]);
        }
    }
    Ok(VectorField::from_raw(
        grid,
        spectral::inverse(&grid, sx),
        spectral::inverse(&grid, sy),
    ))
}

/// Scalar vorticity `d_x u_y - d_y u_x`.
pub fn curl(u: &VectorField) -> Field {
    let grid = *u.grid();
    let a = spectral::ddx(&grid, &u.y);
    let b = spectral::ddy(&grid, &u.x);
    Field::from_raw(
        FieldKind::Scalar,
        grid,
        a.iter().zip(&b).map(|(p, q)| p - q).collect(),
    )
}

pub fn divergence(u: &VectorField) -> Field {
    let grid = *u.grid();
    let a = spectral::ddx(&grid, &u.x);
    let b = spectral::ddy(&grid, &u.y);
    Field::from_raw(
        FieldKind::Scalar,
        grid,
        a.iter().zip(&b).map(|(p, q)| p + q).collect(),
    )
}

/// Exterior derivative of a scalar, as a one-form.
pub fn gradient(f: &Field) -> Result<Field, FieldError> {
    if f.kind().components() != 1 {
        return Err(FieldError::UnsupportedKind(f.kind(), "gradient"));
    }
    let grid = *f.grid();
    let (gx, gy) = gradient_planes(&grid, f.component(0));
    let mut data = gx;
    data.extend(gy);
    Ok(Field::from_raw(FieldKind::OneForm, grid, data))
}

/// Cell-area weighted sum of a scalar or density.
pub fn integrate_domain(f: &Field) -> Result<f64, FieldError> {
    if f.kind().components() != 1 {
        return Err(FieldError::UnsupportedKind(f.kind(), "integrate_domain"));
    }
    Ok(f.values().iter().sum::<f64>() * f.grid().cell_area())
}

/// Quadrature pairing `sum a . b dA` over all components.
pub fn inner_product(a: &Field, b: &Field) -> Result<f64, FieldError> {
    a.grid().same_as(b.grid())?;
    if a.kind().components() != b.kind().components() {
        return Err(FieldError::KindMismatch {
            expected: a.kind(),
            found: b.kind(),
        });
    }
    let s: f64 = a.values().iter().zip(b.values()).map(|(p, q)| p * q).sum();
    Ok(s * a.grid().cell_area())
}

pub fn vector_inner_product(u: &VectorField, w: &VectorField) -> Result<f64, FieldError> {
    u.grid().same_as(w.grid())?;
    let s: f64 = u
        .x
        .iter()
        .zip(&w.x)
        .chain(u.y.iter().zip(&w.y))
        .map(|(p, q)| p * q)
        .sum();
    Ok(s * u.grid().cell_area())
}

/// Index lowering under the flat metric: components are unchanged.
pub fn flat(u: &VectorField) -> Field {
    u.to_field().with_kind(FieldKind::OneForm).expect("two components")
}

/// Inverse of [`flat`].
pub fn sharp(alpha: &Field) -> Result<VectorField, FieldError> {
    alpha.expect_kind(FieldKind::OneForm)?;
    VectorField::from_field(alpha)
}

/// 2/3-rule filter applied to every component.
pub fn dealias(f: &Field) -> Field {
    let grid = *f.grid();
    let mut data = Vec::with_capacity(f.values().len());
    for c in 0..f.kind().components() {
        data.extend(dealias_plane(&grid, f.component(c)));
    }
    Field::from_raw(f.kind(), grid, data)
}
