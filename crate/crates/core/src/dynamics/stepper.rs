use serde::{Deserialize, Serialize};

use super::{DynamicsError, Result};

/// Fixed-point controls for the implicit midpoint solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when successive iterates differ by at most `tol * max(1, |x|)`
    /// in the max norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Solves `x1 = x0 + increment((x0 + x1) / 2)` by fixed-point iteration
/// started from `x1 = x0`.
pub fn solve_midpoint<F>(x0: &[f64], mut increment: F, opts: &SolverOptions) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut next = x0.to_vec();
    let mut mid = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        for i in 0..n {
            mid[i] = 0.5 * (x0[i] + next[i]);
        }
        let inc = increment(&mid)?;
        if inc.len() != n {
            return Err(DynamicsError::InvalidArgument(format!(
                "increment has length {}, state has {n}",
                inc.len()
            )));
        }
        residual = 0.0;
        for i in 0..n {
            let cand = x0[i] + inc[i];
            residual = residual.max((cand - next[i]).abs());
            next[i] = cand;
        }
        if !residual.is_finite() {
            return Err(DynamicsError::NonFinite);
        }
        if residual <= opts.tol * max_abs(&next).max(1.0) {
            return Ok(next);
        }
    }
    Err(DynamicsError::NonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// A Stratonovich system `dx = f(x) dt + sum_i g_i(x) o dW_i` on a flat
/// state vector.
pub trait SdeSystem {
    fn channels(&self) -> usize;
    fn drift(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn diffusion(&self, x: &[f64], channel: usize) -> Result<Vec<f64>>;

    /// `f(x) dt + sum_i g_i(x) dW_i`. Systems that can form the combined
    /// increment more cheaply override this.
    fn increment(&self, x: &[f64], dt: f64, dw: &[f64]) -> Result<Vec<f64>> {
        let mut inc: Vec<f64> = self.drift(x)?.iter().map(|f| f * dt).collect();
        for (c, w) in dw.iter().enumerate() {
            let g = self.diffusion(x, c)?;
            for (a, b) in inc.iter_mut().zip(&g) {
                *a += b * w;
            }
        }
        Ok(inc)
    }
}

/// One implicit-midpoint Stratonovich step.
pub fn stratonovich_step<S: SdeSystem + ?Sized>(
    sys: &S,
    x: &[f64],
    dt: f64,
    dw: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    if dw.len() != sys.channels() {
        return Err(DynamicsError::InvalidArgument(format!(
            "{} increments for {} channels",
            dw.len(),
            sys.channels()
        )));
    }
    solve_midpoint(x, |m| sys.increment(m, dt, dw), opts)
}

/// One implicit-midpoint step of `dx/dt = f(x)`.
pub fn implicit_midpoint_step<F>(f: F, x: &[f64], dt: f64, opts: &SolverOptions) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    solve_midpoint(x, |m| Ok(f(m)?.iter().map(|v| v * dt).collect()), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear {
        a: f64,
        b: f64,
    }

    impl SdeSystem for Linear {
        fn channels(&self) -> usize {
            1
        }
        fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![self.a * x[0]])
        }
        fn diffusion(&self, x: &[f64], _: usize) -> Result<Vec<f64>> {
            Ok(vec![self.b * x[0]])
        }
    }

    #[test]
    fn zero_system_leaves_state_unchanged() {
        let sys = Linear { a: 0.0, b: 0.0 };
        let x = [1.25];
        let y = stratonovich_step(&sys, &x, 0.1, &[0.3], &SolverOptions::default()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn linear_step_matches_closed_form() {
        // midpoint for dx = c x gives x1 = x0 (1 + c/2) / (1 - c/2)
        let sys = Linear { a: -0.7, b: 0.4 };
        let (dt, dw) = (0.01, 0.05);
        let y = stratonovich_step(&sys, &[2.0], dt, &[dw], &SolverOptions::default()).unwrap();
        let c = -0.7 * dt + 0.4 * dw;
        let exact = 2.0 * (1.0 + c / 2.0) / (1.0 - c / 2.0);
        assert!((y[0] - exact).abs() < 1e-13);
    }

    #[test]
    fn reports_non_convergence_with_residual() {
        let sys = Linear { a: 300.0, b: 0.0 };
        let opts = SolverOptions { tol: 1e-12, max_iter: 5 };
        match stratonovich_step(&sys, &[1.0], 0.1, &[0.0], &opts) {
            Err(DynamicsError::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 5);
                assert!(residual > 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn channel_count_is_checked() {
        let sys = Linear { a: 1.0, b: 1.0 };
        assert!(stratonovich_step(&sys, &[1.0], 0.1, &[], &SolverOptions::default()).is_err());
    }

    #[test]
    fn deterministic_limit_is_bit_identical() {
        struct NoNoise;
        impl SdeSystem for NoNoise {
            fn channels(&self) -> usize {
                0
            }
            fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![x[1], -x[0].sin()])
            }
            fn diffusion(&self, _: &[f64], _: usize) -> Result<Vec<f64>> {
                unreachable!()
            }
        }
        let opts = SolverOptions::default();
        let x = [0.3, -0.2];
        let a = stratonovich_step(&NoNoise, &x, 0.01, &[], &opts).unwrap();
        let b = implicit_midpoint_step(|v| Ok(vec![v[1], -v[0].sin()]), &x, 0.01, &opts).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }
}
