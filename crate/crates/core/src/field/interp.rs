//! Tensor-product cubic Lagrange interpolation on the periodic grid.

use super::{Field, Grid2D, VectorField};

#[inline]
fn weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Rounds fractional indices that sit on a node up to floating-point noise,
/// so nodal evaluation returns the stored value.
#[inline]
fn snap(s: f64) -> f64 {
    let r = s.round();
    if (s - r).abs() < 1e-10 {
        r
    } else {
        s
    }
}

/// Bicubic interpolation of one plane. Points may lie anywhere; they are
/// wrapped into the torus first.
#[derive(Debug, Clone, Copy)]
pub struct Interpolant<'a> {
    grid: &'a Grid2D,
    plane: &'a [f64],
}

impl<'a> Interpolant<'a> {
    pub fn new(grid: &'a Grid2D, plane: &'a [f64]) -> Self {
        debug_assert_eq!(plane.len(), grid.len());
        Self { grid, plane }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let g = self.grid;
        let sx = snap(x.rem_euclid(g.lx) / g.dx());
        let sy = snap(y.rem_euclid(g.ly) / g.dy());
        let i0 = sx.floor();
        let j0 = sy.floor();
        let wx = weights(sx - i0);
        let wy = weights(sy - j0);
        let (nx, ny) = (g.nx as i64, g.ny as i64);
        let (i0, j0) = (i0 as i64, j0 as i64);
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let j = (j0 - 1 + b as i64).rem_euclid(ny) as usize;
            let row = &self.plane[j * g.nx..(j + 1) * g.nx];
            let mut r = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                let i = (i0 - 1 + a as i64).rem_euclid(nx) as usize;
                r += wxa * row[i];
            }
            acc += wyb * r;
        }
        acc
    }
}

/// Interpolates every component of `f` at `points`; result is indexed
/// `[point][component]`.
pub fn interpolate(f: &Field, points: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let comps: Vec<Interpolant<'_>> = (0..f.kind().components())
        .map(|c| Interpolant::new(f.grid(), f.component(c)))
        .collect();
    points
        .iter()
        .map(|&(x, y)| comps.iter().map(|ip| ip.eval(x, y)).collect())
        .collect()
}

pub fn interpolate_vector(u: &VectorField, points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let ix = Interpolant::new(u.grid(), &u.x);
    let iy = Interpolant::new(u.grid(), &u.y);
    points
        .iter()
        .map(|&(x, y)| (ix.eval(x, y), iy.eval(x, y)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldKind;

    #[test]
    fn reproduces_nodal_values() {
        let g = Grid2D::periodic_square(16).unwrap();
        let f = Field::scalar_from_fn(g, |x, y| (3.0 * x).sin() + (x * y).cos());
        for (i, j) in [(0, 0), (3, 7), (15, 15), (8, 1)] {
            let (x, y) = g.node(i, j);
            let v = interpolate(&f, &[(x, y)])[0][0];
            assert_eq!(v, f.values()[g.index(i, j)]);
        }
    }

    #[test]
    fn constant_is_reproduced_everywhere() {
        let g = Grid2D::new(8, 12, 1.0, 2.0).unwrap();
        let f = Field::constant(FieldKind::Density, g, -2.25);
        for p in [(0.013, 1.7), (-3.3, 9.1), (0.5, 0.5)] {
            assert!((interpolate(&f, &[p])[0][0] + 2.25).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_for_cubics_within_a_cell() {
        // Fill only the 4x4 stencil around cell (5, 6) with a bicubic polynomial.
        let g = Grid2D::periodic_square(16).unwrap();
        let poly = |x: f64, y: f64| 1.0 + 2.0 * x - x * x * x + 0.5 * x * y * y * y - y * y;
        let mut data = vec![0.0; g.len()];
        for j in 5..=8 {
            for i in 4..=7 {
                let (x, y) = g.node(i, j);
                data[g.index(i, j)] = poly(x, y);
            }
        }
        let f = Field::new(FieldKind::Scalar, g, data).unwrap();
        let (x0, y0) = g.node(5, 6);
        for (fx, fy) in [(0.1, 0.2), (0.77, 0.5), (0.999, 0.01)] {
            let (x, y) = (x0 + fx * g.dx(), y0 + fy * g.dy());
            let v = interpolate(&f, &[(x, y)])[0][0];
            assert!((v - poly(x, y)).abs() < 1e-11, "{v} vs {}", poly(x, y));
        }
    }

    #[test]
    fn off_node_error_is_within_cubic_bound() {
        let g = Grid2D::periodic_square(64).unwrap();
        let f = Field::scalar_from_fn(g, |x, _| x.sin());
        let dx = g.dx();
        for i in [0usize, 7, 33] {
            let x = i as f64 * dx + 0.3 * dx;
            let v = interpolate(&f, &[(x, 1.0)])[0][0];
            assert!((v - x.sin()).abs() < dx.powi(3));
        }
    }

    #[test]
    fn empty_point_list_gives_empty_result() {
        let g = Grid2D::periodic_square(8).unwrap();
        let f = Field::zeros(FieldKind::Scalar, g);
        assert!(interpolate(&f, &[]).is_empty());
    }
}
