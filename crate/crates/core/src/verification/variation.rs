//! Variational lemma on the rotation group: for `g_{t,e} = exp(e v(t)) g_t`
//! the variation of the stochastic increment `dchi = dg g^{-1}` is
//! `delta(dchi) = dv + ad_{dchi} v`.
//!
//! The stochastic flow is piecewise geodesic, `g_{n+1} = exp(X_n) g_n` with
//! `X_n = u dt + sum_i xi_i dW_i`, and the increment of the varied flow over
//! a step is `log(g_{n+1,e} g_{n,e}^{-1})`. Its exact `e`-derivative at
//! `e = 0` is `dexp_{X}^{-1}(v_{n+1} - exp(X) v_n)`, which serves as the
//! reference for the central differences.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::report::ResidualReport;
use super::{Result, VerificationError};
use crate::algebra::{ad, so3, AlgebraElement};
use crate::dynamics::NoisePath;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationSpec {
    pub u: Vector3<f64>,
    pub xis: Vec<Vector3<f64>>,
    /// `v(t) = v0 + t v1 + sin(freq t) v2`
    pub v0: Vector3<f64>,
    pub v1: Vector3<f64>,
    pub v2: Vector3<f64>,
    pub freq: f64,
    pub t_final: f64,
    /// Dyadically nested steps, coarsest first; the last is used for the
    /// `e` sweep.
    pub dts: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub seed: u64,
}

impl Default for VariationSpec {
    fn default() -> Self {
        Self {
            u: Vector3::new(0.3, -0.2, 0.5),
            xis: vec![Vector3::new(0.1, 0.7, -0.4), Vector3::new(-0.5, 0.2, 0.3)],
            v0: Vector3::new(0.4, 0.1, -0.3),
            v1: Vector3::new(0.2, -0.5, 0.6),
            v2: Vector3::new(0.3, 0.0, 0.1),
            freq: 3.0,
            t_final: 0.2,
            dts: vec![4e-4, 2e-4, 1e-4],
            epsilons: vec![1e-2, 5e-3, 2.5e-3],
            seed: 0,
        }
    }
}

impl VariationSpec {
    fn v(&self, t: f64) -> Vector3<f64> {
        self.v0 + self.v1 * t + self.v2 * (self.freq * t).sin()
    }
}

/// `dexp_X^{-1}(Y) = Y - X x Y / 2 + c(|X|) X x (X x Y)` for right
/// trivialization.
pub fn dexp_inv(x: &Vector3<f64>, y: &Vector3<f64>) -> Vector3<f64> {
    let theta2 = x.norm_squared();
    let c = if theta2 < 1e-6 {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        let theta = theta2.sqrt();
        (1.0 - 0.5 * theta / (0.5 * theta).tan()) / theta2
    };
    y - x.cross(y) * 0.5 + x.cross(&x.cross(y)) * c
}

struct Sums {
    /// central difference per epsilon
    central: Vec<Vector3<f64>>,
    exact: Vector3<f64>,
    lemma: Vector3<f64>,
}

fn ad_r3(x: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    match ad(&AlgebraElement::rigid_body(*x), &AlgebraElement::rigid_body(*v)) {
        Ok(AlgebraElement::RigidBody { u }) => u,
        _ => unreachable!("so(3) bracket"),
    }
}

fn accumulate(spec: &VariationSpec, path: &NoisePath, epsilons: &[f64]) -> Sums {
    let dt = path.dt();
    let mut g = nalgebra::Matrix3::identity();
    let mut sums = Sums {
        central: vec![Vector3::zeros(); epsilons.len()],
        exact: Vector3::zeros(),
        lemma: Vector3::zeros(),
    };
    for n in 0..path.n_steps() {
        let dw = path.step(n);
        let x = spec
            .xis
            .iter()
            .zip(&dw)
            .fold(spec.u * dt, |acc, (xi, w)| acc + xi * *w);
        let step = so3::exp(&x);
        let g_next = step * g;
        let (v_a, v_b) = (spec.v(n as f64 * dt), spec.v((n + 1) as f64 * dt));
        for (k, &eps) in epsilons.iter().enumerate() {
            let inc = |e: f64| {
                let a = so3::exp(&(v_b * e)) * g_next;
                let b = so3::exp(&(v_a * e)) * g;
                so3::log(&(a * b.transpose()))
            };
            sums.central[k] += (inc(eps) - inc(-eps)) / (2.0 * eps);
        }
        sums.exact += dexp_inv(&x, &(v_b - step * v_a));
        let v_mid = (v_a + v_b) * 0.5;
        sums.lemma += (v_b - v_a) + ad_r3(&x, &v_mid);
        g = g_next;
    }
    sums
}

/// Checks the lemma pathwise. The main report fits the order in `e` of the
/// central-difference variation against the exact derivative (expected 2);
/// the component report shows the residual of the lemma itself shrinking
/// with `dt`.
pub fn check_variation_lemma(spec: &VariationSpec) -> Result<ResidualReport> {
    if spec.dts.is_empty() || spec.epsilons.is_empty() {
        return Err(VerificationError::InvalidArgument("need dt and epsilon lists".into()));
    }
    let steps = (spec.t_final / spec.dts[0]).round() as usize;
    if steps == 0 {
        return Err(VerificationError::InvalidArgument("t_final shorter than dt".into()));
    }
    let mut path = NoisePath::sample(spec.seed, spec.dts[0], steps, spec.xis.len())?;
    let mut lemma_res = Vec::new();
    let mut last = None;
    for &dt in &spec.dts {
        while path.dt() > dt * (1.0 + 1e-12) {
            path = path.refine();
        }
        let s = accumulate(spec, &path, &spec.epsilons);
        lemma_res.push((s.exact - s.lemma).norm());
        last = Some(s);
    }
    let s = last.expect("non-empty dt list");
    let scale = s.exact.norm().max(s.lemma.norm()).max(1.0);
    let eps_res: Vec<f64> = s.central.iter().map(|c| (c - s.exact).norm() / scale).collect();
    let params = serde_json::to_value(spec).expect("spec serializes");

    let dt_report = ResidualReport::from_order(
        "variation_dt",
        serde_json::json!({ "eps": "exact" }),
        "dt",
        spec.dts.clone(),
        lemma_res.iter().map(|r| r / scale).collect(),
        0.5,
    );
    Ok(
        ResidualReport::from_order("variation", params, "eps", spec.epsilons.clone(), eps_res, 1.8)
            .with_component(dt_report),
    )
}
