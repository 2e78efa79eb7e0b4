//! Discrete tensor fields on a doubly periodic 2D grid.
//!
//! Fields are node-collocated. Multi-component fields store their
//! components as contiguous planes (`x` plane then `y` plane), each plane in
//! row-major order with `y` as the outer index.
//!
//! Only the flat torus is supported. Moving to another compact manifold
//! would replace the spectral derivatives in `spectral` and the metric used
//! by `flat`, `sharp` and the quadrature pairing; the rest of the crate only
//! goes through those entry points.

mod calculus;
mod interp;
pub mod spectral;

pub use calculus::{
    curl, dealias, divergence, flat, gradient, integrate_domain, inner_product, lie_derivative,
    sharp, velocity_from_vorticity, vector_inner_product,
};
pub use interp::{interpolate, interpolate_vector, Interpolant};
pub use spectral::SpectralEvaluator;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {left:?} vs {right:?}")]
    GridMismatch { left: Grid2D, right: Grid2D },
    #[error("unsupported field kind {0:?} for {1}")]
    UnsupportedKind(FieldKind, &'static str),
    #[error("kind mismatch: expected {expected:?}, got {found:?}")]
    KindMismatch { expected: FieldKind, found: FieldKind },
    #[error("vorticity has nonzero mean {mean:e}; the torus Poisson problem is not solvable")]
    NonzeroMean { mean: f64 },
    #[error("value array has length {found}, expected {expected}")]
    BadLength { expected: usize, found: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

/// Doubly periodic rectangle `[0, lx) x [0, ly)` with `nx * ny` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, FieldError> {
        if nx < 8 || ny < 8 || nx % 2 != 0 || ny % 2 != 0 {
            return Err(FieldError::InvalidGrid(format!(
                "cell counts must be even and >= 8, got {nx}x{ny}"
            )));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(FieldError::InvalidGrid(format!(
                "domain lengths must be positive, got {lx}x{ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// `n x n` grid on `[0, 2pi)^2`.
    pub fn periodic_square(n: usize) -> Result<Self, FieldError> {
        Self::new(n, n, std::f64::consts::TAU, std::f64::consts::TAU)
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.dx(), j as f64 * self.dy())
    }

    /// Maps a point into the fundamental domain.
    pub fn wrap(&self, x: f64, y: f64) -> (f64, f64) {
        (x.rem_euclid(self.lx), y.rem_euclid(self.ly))
    }

    /// Evaluates `f` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                let (x, y) = self.node(i, j);
                out.push(f(x, y));
            }
        }
        out
    }

    pub fn same_as(&self, other: &Grid2D) -> Result<(), FieldError> {
        if self == other {
            Ok(())
        } else {
            Err(FieldError::GridMismatch {
                left: *self,
                right: *other,
            })
        }
    }
}

/// Tensor type carried by a [`Field`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Scalar,
    Density,
    OneForm,
    Vector,
}

impl FieldKind {
    pub fn components(self) -> usize {
        match self {
            FieldKind::Scalar | FieldKind::Density => 1,
            FieldKind::OneForm | FieldKind::Vector => 2,
        }
    }

    /// Numeric tag used by the SGMF file format.
    pub fn code(self) -> u32 {
        match self {
            FieldKind::Scalar => 0,
            FieldKind::Density => 1,
            FieldKind::OneForm => 2,
            FieldKind::Vector => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(FieldKind::Scalar),
            1 => Some(FieldKind::Density),
            2 => Some(FieldKind::OneForm),
            3 => Some(FieldKind::Vector),
            _ => None,
        }
    }
}

/// A tensor field on a [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    kind: FieldKind,
    grid: Grid2D,
    data: Vec<f64>,
}

impl Field {
    pub fn new(kind: FieldKind, grid: Grid2D, data: Vec<f64>) -> Result<Self, FieldError> {
        let expected = grid.len() * kind.components();
        if data.len() != expected {
            return Err(FieldError::BadLength {
                expected,
                found: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(idx));
        }
        Ok(Self { kind, grid, data })
    }

    /// Builds a field without the finiteness scan. Length is still checked in
    /// debug builds.
    pub(crate) fn from_raw(kind: FieldKind, grid: Grid2D, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len() * kind.components());
        Self { kind, grid, data }
    }

    pub fn zeros(kind: FieldKind, grid: Grid2D) -> Self {
        Self::from_raw(kind, grid, vec![0.0; grid.len() * kind.components()])
    }

    pub fn constant(kind: FieldKind, grid: Grid2D, value: f64) -> Self {
        Self::from_raw(kind, grid, vec![value; grid.len() * kind.components()])
    }

    pub fn scalar_from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_raw(FieldKind::Scalar, grid, grid.sample(f))
    }

    pub fn density_from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_raw(FieldKind::Density, grid, grid.sample(f))
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// All values, component planes concatenated.
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    /// Same data relabelled as another kind with the same component count.
    pub fn with_kind(mut self, kind: FieldKind) -> Result<Self, FieldError> {
        if kind.components() != self.kind.components() {
            return Err(FieldError::KindMismatch {
                expected: self.kind,
                found: kind,
            });
        }
        self.kind = kind;
        Ok(self)
    }

    pub fn expect_kind(&self, kind: FieldKind) -> Result<(), FieldError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(FieldError::KindMismatch {
                expected: kind,
                found: self.kind,
            })
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_raw(self.kind, self.grid, self.data.iter().map(|v| v * s).collect())
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Field) -> Result<(), FieldError> {
        self.grid.same_as(&other.grid)?;
        if self.kind.components() != other.kind.components() {
            return Err(FieldError::KindMismatch {
                expected: self.kind,
                found: other.kind,
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Quadrature L2 norm, summed over components.
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    /// Quadrature L2 norm of `self - other`.
    pub fn l2_distance(&self, other: &Field) -> f64 {
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (s * self.grid.cell_area()).sqrt()
    }
}

/// A vector field: two components per node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid2D,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid2D, x: Vec<f64>, y: Vec<f64>) -> Result<Self, FieldError> {
        for comp in [&x, &y] {
            if comp.len() != grid.len() {
                return Err(FieldError::BadLength {
                    expected: grid.len(),
                    found: comp.len(),
                });
            }
            if let Some(idx) = comp.iter().position(|v| !v.is_finite()) {
                return Err(FieldError::NonFinite(idx));
            }
        }
        Ok(Self { grid, x, y })
    }

    pub(crate) fn from_raw(grid: Grid2D, x: Vec<f64>, y: Vec<f64>) -> Self {
        debug_assert_eq!(x.len(), grid.len());
        debug_assert_eq!(y.len(), grid.len());
        Self { grid, x, y }
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self::from_raw(grid, vec![0.0; grid.len()], vec![0.0; grid.len()])
    }

    pub fn uniform(grid: Grid2D, ux: f64, uy: f64) -> Self {
        Self::from_raw(grid, vec![ux; grid.len()], vec![uy; grid.len()])
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut x = Vec::with_capacity(grid.len());
        let mut y = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (px, py) = grid.node(i, j);
                let (vx, vy) = f(px, py);
                x.push(vx);
                y.push(vy);
            }
        }
        Self::from_raw(grid, x, y)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_raw(
            self.grid,
            self.x.iter().map(|v| v * s).collect(),
            self.y.iter().map(|v| v * s).collect(),
        )
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &VectorField) -> Result<(), FieldError> {
        self.grid.same_as(&other.grid)?;
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a += s * b;
        }
        for (a, b) in self.y.iter_mut().zip(&other.y) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn max_norm(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)))
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.x.iter().chain(&self.y).map(|v| v * v).sum();
        (s * self.grid.cell_area()).sqrt()
    }

    pub fn l2_distance(&self, other: &VectorField) -> f64 {
        let s: f64 = self
            .x
            .iter()
            .zip(&other.x)
            .chain(self.y.iter().zip(&other.y))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (s * self.grid.cell_area()).sqrt()
    }

    /// Planar `Field` of kind `Vector`.
    pub fn to_field(&self) -> Field {
        let mut data = Vec::with_capacity(2 * self.grid.len());
        data.extend_from_slice(&self.x);
        data.extend_from_slice(&self.y);
        Field::from_raw(FieldKind::Vector, self.grid, data)
    }

    /// Interprets a two-component field's planes as vector components.
    pub fn from_field(f: &Field) -> Result<Self, FieldError> {
        if f.kind().components() != 2 {
            return Err(FieldError::UnsupportedKind(f.kind(), "vector conversion"));
        }
        Ok(Self::from_raw(
            *f.grid(),
            f.component(0).to_vec(),
            f.component(1).to_vec(),
        ))
    }
}
