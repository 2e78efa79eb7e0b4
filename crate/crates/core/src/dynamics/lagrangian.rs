use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{DynamicsError, Result};
use crate::algebra::{AlgebraElement, DualElement, Realization, Tensor};
use crate::field::{flat, integrate_domain, sharp, Field, FieldKind, Grid2D};

/// Reduced Lagrangians `l(u, a)`.
///
/// * `RigidBody`: `1/2 u . I u`.
/// * `HeavyTop`: `1/2 u . I u - mgl chi . a`.
/// * `Euler2d`: `1/2 int rho |u|^2` with the advected density `rho`.
/// * `Boussinesq`: `1/2 int |u|^2 - b Phi` with buoyancy `b` and the periodic
///   potential `Phi = g sin(2 pi y / ly)`.
///
/// Inertias are principal moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LagrangianModel {
    RigidBody {
        inertia: Vector3<f64>,
    },
    HeavyTop {
        inertia: Vector3<f64>,
        mgl: f64,
        chi: Vector3<f64>,
    },
    Euler2d,
    Boussinesq {
        g: f64,
    },
}

/// `Phi(y) = g sin(2 pi y / ly)` sampled on the grid as a density.
pub fn buoyancy_potential(grid: &Grid2D, g: f64) -> Field {
    let k = std::f64::consts::TAU / grid.ly;
    Field::density_from_fn(*grid, |_, y| g * (k * y).sin())
}

fn check_inertia(i: &Vector3<f64>) -> Result<()> {
    if i.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(())
    } else {
        Err(DynamicsError::SingularModel(format!(
            "inertia must be positive and finite, got ({}, {}, {})",
            i.x, i.y, i.z
        )))
    }
}

fn mismatch(model: &LagrangianModel, what: &str) -> DynamicsError {
    DynamicsError::InvalidArgument(format!("{what} does not match the {:?} model", model.realization()))
}

impl LagrangianModel {
    pub fn realization(&self) -> Realization {
        match self {
            LagrangianModel::RigidBody { .. } => Realization::RigidBody,
            LagrangianModel::HeavyTop { .. } => Realization::HeavyTop,
            LagrangianModel::Euler2d | LagrangianModel::Boussinesq { .. } => Realization::Euler2d,
        }
    }

    /// Rejects parameters for which the Legendre map is not invertible.
    pub fn validate(&self) -> Result<()> {
        match self {
            LagrangianModel::RigidBody { inertia } => check_inertia(inertia),
            LagrangianModel::HeavyTop { inertia, mgl, chi } => {
                check_inertia(inertia)?;
                if !mgl.is_finite() || chi.iter().any(|c| !c.is_finite()) {
                    return Err(DynamicsError::NonFinite);
                }
                Ok(())
            }
            LagrangianModel::Euler2d => Ok(()),
            LagrangianModel::Boussinesq { g } if g.is_finite() => Ok(()),
            LagrangianModel::Boussinesq { .. } => Err(DynamicsError::NonFinite),
        }
    }

    /// `l(u, a)`; the `b` slot of `u` is ignored.
    pub fn lagrangian(&self, u: &AlgebraElement, a: &Tensor) -> Result<f64> {
        self.validate()?;
        match (self, u, a) {
            (LagrangianModel::RigidBody { inertia }, AlgebraElement::RigidBody { u }, _) => {
                Ok(0.5 * u.dot(&inertia.component_mul(u)))
            }
            (
                LagrangianModel::HeavyTop { inertia, mgl, chi },
                AlgebraElement::HeavyTop { u, .. },
                Tensor::R3(a),
            ) => Ok(0.5 * u.dot(&inertia.component_mul(u)) - mgl * chi.dot(a)),
            (LagrangianModel::Euler2d, AlgebraElement::Euler2d { u, .. }, Tensor::Grid(rho)) => {
                rho.expect_kind(FieldKind::Density)?;
                let mut ke = Field::zeros(FieldKind::Density, *u.grid());
                let r = rho.values();
                for (i, v) in ke.values_mut().iter_mut().enumerate() {
                    *v = 0.5 * r[i] * (u.x[i] * u.x[i] + u.y[i] * u.y[i]);
                }
                Ok(integrate_domain(&ke)?)
            }
            (LagrangianModel::Boussinesq { g }, AlgebraElement::Euler2d { u, .. }, Tensor::Grid(b)) => {
                b.expect_kind(FieldKind::Scalar)?;
                let phi = buoyancy_potential(u.grid(), *g);
                let mut dens = Field::zeros(FieldKind::Density, *u.grid());
                let (bv, pv) = (b.values(), phi.values());
                for (i, v) in dens.values_mut().iter_mut().enumerate() {
                    *v = 0.5 * (u.x[i] * u.x[i] + u.y[i] * u.y[i]) - bv[i] * pv[i];
                }
                Ok(integrate_domain(&dens)?)
            }
            _ => Err(mismatch(self, "element")),
        }
    }

    /// `dl/da`, an element of the representation space `V`.
    ///
    /// For `Euler2d` the density derivative `|u|^2 / 2` is returned as a
    /// scalar; its diamond with the density is a gradient and so never
    /// contributes to circulation.
    pub fn dl_da(&self, u: &AlgebraElement, a: &Tensor) -> Result<Tensor> {
        self.validate()?;
        match (self, u, a) {
            (LagrangianModel::RigidBody { .. }, AlgebraElement::RigidBody { .. }, _) => {
                Ok(Tensor::R3(Vector3::zeros()))
            }
            (LagrangianModel::HeavyTop { mgl, chi, .. }, AlgebraElement::HeavyTop { .. }, Tensor::R3(_)) => {
                Ok(Tensor::R3(-*mgl * chi))
            }
            (LagrangianModel::Euler2d, AlgebraElement::Euler2d { u, .. }, Tensor::Grid(_)) => {
                let g = *u.grid();
                let v = (0..g.len())
                    .map(|i| 0.5 * (u.x[i] * u.x[i] + u.y[i] * u.y[i]))
                    .collect();
                Ok(Tensor::Grid(Field::new(FieldKind::Scalar, g, v)?))
            }
            (LagrangianModel::Boussinesq { g }, AlgebraElement::Euler2d { u, .. }, Tensor::Grid(_)) => {
                Ok(Tensor::Grid(buoyancy_potential(u.grid(), *g).scaled(-1.0)))
            }
            _ => Err(mismatch(self, "element")),
        }
    }
}

fn grid_density<'a>(model: &LagrangianModel, a: &'a Field) -> Result<Option<&'a Field>> {
    match model {
        LagrangianModel::Euler2d => {
            a.expect_kind(FieldKind::Density)?;
            if a.values().iter().any(|r| !(*r > 0.0)) {
                return Err(DynamicsError::SingularModel("density must be positive".into()));
            }
            Ok(Some(a))
        }
        _ => {
            a.expect_kind(FieldKind::Scalar)?;
            Ok(None)
        }
    }
}

/// Legendre transform `m = dl/du`; returns `(m, a)` and the Hamiltonian
/// `h(m, a) = <m, u> - l(u, a)`.
pub fn legendre_transform(
    model: &LagrangianModel,
    u: &AlgebraElement,
    a: &Tensor,
) -> Result<(DualElement, f64)> {
    model.validate()?;
    let y = match (model, u, a) {
        (LagrangianModel::RigidBody { inertia }, AlgebraElement::RigidBody { u }, _) => {
            DualElement::rigid_body(inertia.component_mul(u))
        }
        (LagrangianModel::HeavyTop { inertia, .. }, AlgebraElement::HeavyTop { u, .. }, Tensor::R3(a)) => {
            DualElement::heavy_top(inertia.component_mul(u), *a)
        }
        (_, AlgebraElement::Euler2d { u, .. }, Tensor::Grid(a))
            if model.realization() == Realization::Euler2d =>
        {
            let mut m = flat(u);
            if let Some(rho) = grid_density(model, a)? {
                let n = u.grid().len();
                let r = rho.values();
                let mv = m.values_mut();
                for c in 0..2 {
                    for i in 0..n {
                        mv[c * n + i] *= r[i];
                    }
                }
            }
            DualElement::euler2d(m, a.clone())?
        }
        _ => return Err(mismatch(model, "element")),
    };
    let mut zero_b = u.clone();
    if let AlgebraElement::HeavyTop { b, .. } = &mut zero_b {
        *b = Vector3::zeros();
    }
    let pairing = match (&y, u) {
        (DualElement::Euler2d { m, .. }, AlgebraElement::Euler2d { u, .. }) => {
            crate::field::inner_product(m, &u.to_field())?
        }
        _ => crate::algebra::pair(&y, &zero_b)?,
    };
    let h = pairing - model.lagrangian(u, a)?;
    Ok((y, h))
}

/// `(dh/dm, dh/da)`: the velocity and the representation-space gradient that
/// drive the Lie-Poisson flow.
pub fn hamiltonian_gradient(model: &LagrangianModel, y: &DualElement) -> Result<AlgebraElement> {
    model.validate()?;
    match (model, y) {
        (LagrangianModel::RigidBody { inertia }, DualElement::RigidBody { m }) => {
            Ok(AlgebraElement::rigid_body(m.component_div(inertia)))
        }
        (LagrangianModel::HeavyTop { inertia, mgl, chi }, DualElement::HeavyTop { m, .. }) => {
            Ok(AlgebraElement::heavy_top(m.component_div(inertia), *mgl * chi))
        }
        (_, DualElement::Euler2d { m, a }) if model.realization() == Realization::Euler2d => {
            let g = *m.grid();
            let u = match grid_density(model, a)? {
                Some(rho) => {
                    let n = g.len();
                    let r = rho.values();
                    let mut data = m.values().to_vec();
                    for c in 0..2 {
                        for i in 0..n {
                            data[c * n + i] /= r[i];
                        }
                    }
                    sharp(&Field::new(FieldKind::OneForm, g, data)?)?
                }
                None => sharp(m)?,
            };
            // the density derivative is a pressure-like gradient and is not
            // represented; buoyancy carries dh/db = Phi
            let b = match model {
                LagrangianModel::Boussinesq { g: grav } => buoyancy_potential(&g, *grav),
                _ => Field::zeros(FieldKind::Scalar, g),
            };
            Ok(AlgebraElement::Euler2d { u, b })
        }
        _ => Err(mismatch(model, "dual element")),
    }
}

/// `h(m, a)`.
pub fn hamiltonian(model: &LagrangianModel, y: &DualElement) -> Result<f64> {
    let grad = hamiltonian_gradient(model, y)?;
    let a = match y {
        DualElement::RigidBody { .. } => Tensor::R3(Vector3::zeros()),
        DualElement::HeavyTop { a, .. } => Tensor::R3(*a),
        DualElement::Euler2d { a, .. } => Tensor::Grid(a.clone()),
    };
    Ok(legendre_transform(model, &grad, &a)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField;

    #[test]
    fn rigid_body_hand_example() {
        let model = LagrangianModel::RigidBody {
            inertia: Vector3::new(1.0, 2.0, 3.0),
        };
        let u = AlgebraElement::rigid_body(Vector3::new(1.0, 1.0, 1.0));
        let (y, h) = legendre_transform(&model, &u, &Tensor::R3(Vector3::zeros())).unwrap();
        assert_eq!(y, DualElement::rigid_body(Vector3::new(1.0, 2.0, 3.0)));
        assert_eq!(h, 3.0);
        // quadratic l: h equals l at matched points
        assert_eq!(h, model.lagrangian(&u, &Tensor::R3(Vector3::zeros())).unwrap());
        assert_eq!(hamiltonian_gradient(&model, &y).unwrap(), u);
    }

    #[test]
    fn heavy_top_round_trip_and_energy() {
        let model = LagrangianModel::HeavyTop {
            inertia: Vector3::new(2.0, 2.0, 1.0),
            mgl: 0.5,
            chi: Vector3::z(),
        };
        let u = AlgebraElement::heavy_top(Vector3::new(0.3, -0.7, 1.1), Vector3::zeros());
        let a = Vector3::new(0.0, 0.6, 0.8);
        let (y, h) = legendre_transform(&model, &u, &Tensor::R3(a)).unwrap();
        let back = hamiltonian_gradient(&model, &y).unwrap();
        let AlgebraElement::HeavyTop { u: ub, b } = back else { unreachable!() };
        let AlgebraElement::HeavyTop { u: u0, .. } = u else { unreachable!() };
        assert!((ub - u0).norm() <= 1e-12 * u0.norm());
        assert_eq!(b, 0.5 * Vector3::z());
        let expected = 0.5 * u0.dot(&Vector3::new(2.0, 2.0, 1.0).component_mul(&u0)) + 0.5 * 0.8;
        assert!((h - expected).abs() < 1e-14);
        assert!((hamiltonian(&model, &y).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn singular_inertia_is_rejected() {
        let model = LagrangianModel::RigidBody {
            inertia: Vector3::new(1.0, 0.0, 3.0),
        };
        let u = AlgebraElement::rigid_body(Vector3::x());
        assert!(matches!(
            legendre_transform(&model, &u, &Tensor::R3(Vector3::zeros())),
            Err(DynamicsError::SingularModel(_))
        ));
    }

    #[test]
    fn grid_legendre_is_flat_with_unit_density() {
        let g = Grid2D::periodic_square(16).unwrap();
        let u = VectorField::from_fn(g, |x, y| (y.sin(), (x + y).cos()));
        let rho = Field::constant(FieldKind::Density, g, 1.0);
        let ue = AlgebraElement::euler2d(u.clone());
        let (y, h) = legendre_transform(&LagrangianModel::Euler2d, &ue, &Tensor::Grid(rho)).unwrap();
        let DualElement::Euler2d { m, .. } = &y else { unreachable!() };
        assert_eq!(m.values(), flat(&u).values());
        let AlgebraElement::Euler2d { u: back, .. } =
            hamiltonian_gradient(&LagrangianModel::Euler2d, &y).unwrap()
        else {
            unreachable!()
        };
        assert!(back.l2_distance(&u) <= 1e-12 * u.l2_norm());
        let ke = crate::field::vector_inner_product(&u, &u).unwrap() * 0.5;
        assert!((h - ke).abs() < 1e-12 * ke);
    }

    #[test]
    fn grid_legendre_with_variable_density() {
        let g = Grid2D::periodic_square(16).unwrap();
        let u = VectorField::from_fn(g, |x, _| (x.cos(), 0.5));
        let rho = Field::density_from_fn(g, |x, y| 1.5 + 0.5 * (x - y).sin());
        let ue = AlgebraElement::euler2d(u.clone());
        let (y, _) = legendre_transform(&LagrangianModel::Euler2d, &ue, &Tensor::Grid(rho)).unwrap();
        let AlgebraElement::Euler2d { u: back, .. } =
            hamiltonian_gradient(&LagrangianModel::Euler2d, &y).unwrap()
        else {
            unreachable!()
        };
        assert!(back.l2_distance(&u) <= 1e-8 * u.l2_norm());
        let bad = Field::constant(FieldKind::Density, g, 0.0);
        assert!(legendre_transform(&LagrangianModel::Euler2d, &ue, &Tensor::Grid(bad)).is_err());
    }
}
