//! Semidirect-product group and algebra actions.
//!
//! Three realizations share one interface:
//!
//! * `RigidBody`: `so(3)` with trivial representation space.
//! * `HeavyTop`: `so(3) x R^3` with the rotation representation.
//! * `Euler2d`: divergence-free velocity plus a scalar buoyancy on the
//!   periodic grid, paired with a momentum one-form density and a density.
//!
//! # Conventions
//!
//! `so(3)` is identified with `R^3` through the hat map, `[hat u, hat w] =
//! hat(u x w)`. The Lie-algebra part of `ad` carries the right-action minus
//! sign, so `ad(u, w) = -u x w`.
//!
//! The representation `rho_u` of the algebra on `V` is `rho_u v = -u x v` on
//! `R^3` and `rho_u v = -L_u v` (the infinitesimal push-forward) on grid
//! tensors. These signs make `ad` a Lie bracket compatible with the minus
//! sign above, and turn `-ad*` into the usual transport dynamics: the
//! heavy-top Lie-Poisson flow conserves `m . a`, and on the grid
//! `d a + L_u a dt = 0`. The diamond operator is defined by
//! `<v <> a, u> = -<a, rho_u v>`, which gives `v <> a = v x a` on `R^3`.
//!
//! Finite-dimensional group elements `(g, v)` compose as
//! `(g1, v1)(g2, v2) = (g1 o g2, v2 + g2 v1)` where `g1 o g2` is the matrix
//! product `g2 g1`; this is the composition order for which the product law
//! is associative when push-forward acts by matrix multiplication.
//! Pull-back is multiplication by the transpose.

mod grid;
pub mod so3;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Field, FieldError, FieldKind, VectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("realization mismatch: {0:?} vs {1:?}")]
    RealizationMismatch(Realization, Realization),
    #[error("{op} is not supported for the {realization:?} realization")]
    Unsupported {
        op: &'static str,
        realization: Realization,
    },
    #[error("unsupported tensor kinds for diamond: {0}")]
    UnsupportedTensor(String),
    #[error("group element is not a rotation (defect {0:e})")]
    NotOrthogonal(f64),
    #[error("non-finite component")]
    NonFinite,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Realization {
    RigidBody,
    HeavyTop,
    Euler2d,
}

impl Realization {
    pub fn is_finite_dim(self) -> bool {
        !matches!(self, Realization::Euler2d)
    }
}

/// Element `(u, b)` of the semidirect-product Lie algebra.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgebraElement {
    RigidBody { u: Vector3<f64> },
    HeavyTop { u: Vector3<f64>, b: Vector3<f64> },
    Euler2d { u: VectorField, b: Field },
}

/// Element `(m, a)` of the dual.
#[derive(Debug, Clone, PartialEq)]
pub enum DualElement {
    RigidBody { m: Vector3<f64> },
    HeavyTop { m: Vector3<f64>, a: Vector3<f64> },
    /// `m` is a one-form density (kind `OneForm`); `a` is a density (mass)
    /// or a scalar (buoyancy).
    Euler2d { m: Field, a: Field },
}

/// Finite-dimensional group element `(g, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    realization: Realization,
    g: Matrix3<f64>,
    v: Vector3<f64>,
}

/// Representation-space or dual-space element handed to [`diamond`].
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    R3(Vector3<f64>),
    Grid(Field),
}

const ORTHOGONALITY_TOL: f64 = 1e-12;

fn finite(v: &Vector3<f64>) -> bool {
    v.iter().all(|c| c.is_finite())
}

impl AlgebraElement {
    pub fn rigid_body(u: Vector3<f64>) -> Self {
        AlgebraElement::RigidBody { u }
    }

    pub fn heavy_top(u: Vector3<f64>, b: Vector3<f64>) -> Self {
        AlgebraElement::HeavyTop { u, b }
    }

    /// Grid element with zero buoyancy part.
    pub fn euler2d(u: VectorField) -> Self {
        let b = Field::zeros(FieldKind::Scalar, *u.grid());
        AlgebraElement::Euler2d { u, b }
    }

    pub fn realization(&self) -> Realization {
        match self {
            AlgebraElement::RigidBody { .. } => Realization::RigidBody,
            AlgebraElement::HeavyTop { .. } => Realization::HeavyTop,
            AlgebraElement::Euler2d { .. } => Realization::Euler2d,
        }
    }

    /// Checks the element's own invariants: finite values, and a scalar or
    /// density `b` on the velocity's grid.
    pub fn validate(&self) -> Result<(), AlgebraError> {
        match self {
            AlgebraElement::RigidBody { u } if !finite(u) => Err(AlgebraError::NonFinite),
            AlgebraElement::HeavyTop { u, b } if !finite(u) || !finite(b) => {
                Err(AlgebraError::NonFinite)
            }
            AlgebraElement::Euler2d { u, b } => {
                u.grid().same_as(b.grid())?;
                if b.kind() != FieldKind::Density {
                    b.expect_kind(FieldKind::Scalar)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl DualElement {
    pub fn rigid_body(m: Vector3<f64>) -> Self {
        DualElement::RigidBody { m }
    }

    pub fn heavy_top(m: Vector3<f64>, a: Vector3<f64>) -> Self {
        DualElement::HeavyTop { m, a }
    }

    pub fn euler2d(m: Field, a: Field) -> Result<Self, AlgebraError> {
        m.expect_kind(FieldKind::OneForm)?;
        if a.kind() != FieldKind::Scalar {
            a.expect_kind(FieldKind::Density)?;
        }
        m.grid().same_as(a.grid())?;
        Ok(DualElement::Euler2d { m, a })
    }

    pub fn realization(&self) -> Realization {
        match self {
            DualElement::RigidBody { .. } => Realization::RigidBody,
            DualElement::HeavyTop { .. } => Realization::HeavyTop,
            DualElement::Euler2d { .. } => Realization::Euler2d,
        }
    }

    /// Flat coordinate vector for finite-dimensional elements (`m` then `a`).
    pub fn to_coords(&self) -> Option<Vec<f64>> {
        match self {
            DualElement::RigidBody { m } => Some(m.iter().copied().collect()),
            DualElement::HeavyTop { m, a } => Some(m.iter().chain(a.iter()).copied().collect()),
            DualElement::Euler2d { .. } => None,
        }
    }

    pub fn from_coords(realization: Realization, c: &[f64]) -> Option<Self> {
        match (realization, c.len()) {
            (Realization::RigidBody, 3) => Some(DualElement::RigidBody {
                m: Vector3::new(c[0], c[1], c[2]),
            }),
            (Realization::HeavyTop, 6) => Some(DualElement::HeavyTop {
                m: Vector3::new(c[0], c[1], c[2]),
                a: Vector3::new(c[3], c[4], c[5]),
            }),
            _ => None,
        }
    }
}

impl GroupElement {
    pub fn new(realization: Realization, g: Matrix3<f64>, v: Vector3<f64>) -> Result<Self, AlgebraError> {
        if !realization.is_finite_dim() {
            return Err(AlgebraError::Unsupported {
                op: "group element",
                realization,
            });
        }
        if !g.iter().all(|c| c.is_finite()) || !finite(&v) {
            return Err(AlgebraError::NonFinite);
        }
        let defect = so3::orthogonality_defect(&g);
        if defect > ORTHOGONALITY_TOL {
            return Err(AlgebraError::NotOrthogonal(defect));
        }
        let v = if realization == Realization::RigidBody {
            Vector3::zeros()
        } else {
            v
        };
        Ok(Self { realization, g, v })
    }

    pub fn identity(realization: Realization) -> Result<Self, AlgebraError> {
        Self::new(realization, Matrix3::identity(), Vector3::zeros())
    }

    pub fn realization(&self) -> Realization {
        self.realization
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.g
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.v
    }

    /// Distance to another element: max-abs over both slots.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        (self.g - other.g).amax().max((self.v - other.v).amax())
    }
}

fn check_same(a: Realization, b: Realization) -> Result<(), AlgebraError> {
    if a == b {
        Ok(())
    } else {
        Err(AlgebraError::RealizationMismatch(a, b))
    }
}

/// Representation of the algebra on `R^3`: `rho_u v = -u x v`.
#[inline]
pub fn lie_r3(u: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    -u.cross(v)
}

/// Push-forward `g_* v` on `R^3`.
#[inline]
pub fn push_forward(g: &Matrix3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    g * v
}

/// Pull-back `g^* v` on `R^3`.
#[inline]
pub fn pull_back(g: &Matrix3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    g.transpose() * v
}

/// `<(m, a), (u, b)> = <m, u> + <a, b>`.
pub fn pair(x: &DualElement, y: &AlgebraElement) -> Result<f64, AlgebraError> {
    check_same(x.realization(), y.realization())?;
    match (x, y) {
        (DualElement::RigidBody { m }, AlgebraElement::RigidBody { u }) => Ok(m.dot(u)),
        (DualElement::HeavyTop { m, a }, AlgebraElement::HeavyTop { u, b }) => {
            Ok(m.dot(u) + a.dot(b))
        }
        (DualElement::Euler2d { m, a }, AlgebraElement::Euler2d { u, b }) => grid::pair(m, a, u, b),
        _ => unreachable!("realizations checked"),
    }
}

/// `(g1, v1)(g2, v2) = (g1 o g2, v2 + (g2)_* v1)`.
pub fn group_mul(p: &GroupElement, q: &GroupElement) -> Result<GroupElement, AlgebraError> {
    check_same(p.realization, q.realization)?;
    Ok(GroupElement {
        realization: p.realization,
        g: q.g * p.g,
        v: q.v + push_forward(&q.g, &p.v),
    })
}

/// `(g, v)^{-1} = (g^{-1}, -g^* v)`.
pub fn group_inv(p: &GroupElement) -> GroupElement {
    GroupElement {
        realization: p.realization,
        g: p.g.transpose(),
        v: -pull_back(&p.g, &p.v),
    }
}

/// Conjugation `AD_p q = p q p^{-1}`.
pub fn conjugate(p: &GroupElement, q: &GroupElement) -> Result<GroupElement, AlgebraError> {
    group_mul(&group_mul(p, q)?, &group_inv(p))
}

/// Adjoint action `Ad_(g,v)(u, b) = (g_* u, g^* (b - rho_u v))`.
pub fn adjoint(p: &GroupElement, y: &AlgebraElement) -> Result<AlgebraElement, AlgebraError> {
    check_same(p.realization, y.realization())?;
    match y {
        AlgebraElement::RigidBody { u } => Ok(AlgebraElement::RigidBody {
            u: push_forward(&p.g, u),
        }),
        AlgebraElement::HeavyTop { u, b } => Ok(AlgebraElement::HeavyTop {
            u: push_forward(&p.g, u),
            b: pull_back(&p.g, &(b - lie_r3(u, &p.v))),
        }),
        AlgebraElement::Euler2d { .. } => unreachable!("group elements are finite-dimensional"),
    }
}

/// Coadjoint action. With `(g, v) = q^{-1}`,
/// `Ad*_q (m, a) = (g^* m + v <> g_* a, g_* a)`, so that
/// `<Ad*_{p^{-1}} x, y> = <x, Ad_p y>`.
pub fn coadjoint(q: &GroupElement, x: &DualElement) -> Result<DualElement, AlgebraError> {
    check_same(q.realization, x.realization())?;
    let p = group_inv(q);
    match x {
        DualElement::RigidBody { m } => Ok(DualElement::RigidBody {
            m: pull_back(&p.g, m),
        }),
        DualElement::HeavyTop { m, a } => {
            let ga = push_forward(&p.g, a);
            Ok(DualElement::HeavyTop {
                m: pull_back(&p.g, m) + diamond_r3(&p.v, &ga),
                a: ga,
            })
        }
        DualElement::Euler2d { .. } => unreachable!("group elements are finite-dimensional"),
    }
}

/// `ad_(u,b)(u~, b~) = (-[u, u~], rho_u b~ - rho_u~ b)`.
pub fn ad(x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement, AlgebraError> {
    check_same(x.realization(), y.realization())?;
    match (x, y) {
        (AlgebraElement::RigidBody { u }, AlgebraElement::RigidBody { u: w }) => {
            Ok(AlgebraElement::RigidBody { u: -u.cross(w) })
        }
        (AlgebraElement::HeavyTop { u, b }, AlgebraElement::HeavyTop { u: w, b: c }) => {
            Ok(AlgebraElement::HeavyTop {
                u: -u.cross(w),
                b: lie_r3(u, c) - lie_r3(w, b),
            })
        }
        (AlgebraElement::Euler2d { u, b }, AlgebraElement::Euler2d { u: w, b: c }) => {
            let (bracket, rep) = grid::ad(u, b, w, c)?;
            Ok(AlgebraElement::Euler2d { u: bracket, b: rep })
        }
        _ => unreachable!("realizations checked"),
    }
}

/// `ad*_(u,b)(m, a) = (ad*_u m + b <> a, rho*_u a)`, the dual of [`ad`].
///
/// On the grid this is `(L_u m + b <> a, L_u a)` with `m` a one-form density.
pub fn ad_star(x: &AlgebraElement, y: &DualElement) -> Result<DualElement, AlgebraError> {
    check_same(x.realization(), y.realization())?;
    match (x, y) {
        (AlgebraElement::RigidBody { u }, DualElement::RigidBody { m }) => {
            Ok(DualElement::RigidBody { m: u.cross(m) })
        }
        (AlgebraElement::HeavyTop { u, b }, DualElement::HeavyTop { m, a }) => {
            Ok(DualElement::HeavyTop {
                m: u.cross(m) + diamond_r3(b, a),
                a: u.cross(a),
            })
        }
        (AlgebraElement::Euler2d { u, b }, DualElement::Euler2d { m, a }) => {
            let (mom, adv) = grid::ad_star(u, b, m, a)?;
            Ok(DualElement::Euler2d { m: mom, a: adv })
        }
        _ => unreachable!("realizations checked"),
    }
}

/// `v <> a = v x a` on `R^3`.
#[inline]
pub fn diamond_r3(v: &Vector3<f64>, a: &Vector3<f64>) -> Vector3<f64> {
    v.cross(a)
}

/// Diamond operator, defined by `<v <> a, u> = -<a, rho_u v>`.
///
/// Grid combinations: scalar `v` with density `a` gives `a grad v`; density
/// `v` with scalar `a` gives `-v grad a`. Both results are one-form densities.
pub fn diamond(v: &Tensor, a: &Tensor) -> Result<Tensor, AlgebraError> {
    match (v, a) {
        (Tensor::R3(v), Tensor::R3(a)) => Ok(Tensor::R3(diamond_r3(v, a))),
        (Tensor::Grid(v), Tensor::Grid(a)) => Ok(Tensor::Grid(grid::diamond(v, a)?)),
        _ => Err(AlgebraError::UnsupportedTensor(
            "cannot mix R^3 and grid tensors".into(),
        )),
    }
}

/// Casimir functionals: `[|m|^2]` for the rigid body, `[m . a, |a|^2]` for
/// the heavy top.
pub fn casimir_values(y: &DualElement) -> Result<Vec<f64>, AlgebraError> {
    match y {
        DualElement::RigidBody { m } => Ok(vec![m.norm_squared()]),
        DualElement::HeavyTop { m, a } => Ok(vec![m.dot(a), a.norm_squared()]),
        DualElement::Euler2d { .. } => Err(AlgebraError::Unsupported {
            op: "casimir_values",
            realization: Realization::Euler2d,
        }),
    }
}

/// Gradients of [`casimir_values`] with respect to the flat coordinates of `y`.
pub fn casimir_gradients(y: &DualElement) -> Result<Vec<Vec<f64>>, AlgebraError> {
    match y {
        DualElement::RigidBody { m } => Ok(vec![(2.0 * m).iter().copied().collect()]),
        DualElement::HeavyTop { m, a } => Ok(vec![
            a.iter().chain(m.iter()).copied().collect(),
            [0.0; 3].iter().copied().chain((2.0 * a).iter().copied()).collect(),
        ]),
        DualElement::Euler2d { .. } => Err(AlgebraError::Unsupported {
            op: "casimir_gradients",
            realization: Realization::Euler2d,
        }),
    }
}
