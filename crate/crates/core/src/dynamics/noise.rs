use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DynamicsError, Result};
use crate::field::VectorField;

/// Prescribed noise fields `xi_i`: constant vectors for the finite-dimensional
/// realizations, grid vector fields for the fluid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel<X> {
    xis: Vec<X>,
    labels: Vec<String>,
}

impl<X> NoiseModel<X> {
    pub fn none() -> Self {
        Self {
            xis: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.xis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xis.is_empty()
    }

    pub fn xis(&self) -> &[X] {
        &self.xis
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn labelled(xis: Vec<X>, labels: Vec<String>) -> Result<Self> {
        let labels = if labels.is_empty() {
            (1..=xis.len()).map(|i| format!("xi_{i}")).collect()
        } else {
            labels
        };
        if labels.len() != xis.len() {
            return Err(DynamicsError::InvalidArgument(format!(
                "{} labels for {} noise fields",
                labels.len(),
                xis.len()
            )));
        }
        Ok(Self { xis, labels })
    }
}

impl NoiseModel<Vector3<f64>> {
    /// Empty `labels` get the defaults `xi_1, xi_2, ...`.
    pub fn constant(xis: Vec<Vector3<f64>>, labels: Vec<String>) -> Result<Self> {
        if xis.iter().any(|x| x.iter().any(|c| !c.is_finite())) {
            return Err(DynamicsError::NonFinite);
        }
        Self::labelled(xis, labels)
    }
}

impl NoiseModel<VectorField> {
    /// All fields must share one grid.
    pub fn fields(xis: Vec<VectorField>, labels: Vec<String>) -> Result<Self> {
        if let Some(first) = xis.first() {
            for x in &xis[1..] {
                first.grid().same_as(x.grid())?;
            }
        }
        Self::labelled(xis, labels)
    }

    /// `(xi_i, dW_i)` pairs for one step.
    pub fn terms<'a>(&'a self, dw: &[f64]) -> Result<Vec<(&'a VectorField, f64)>> {
        if dw.len() != self.len() {
            return Err(DynamicsError::InvalidArgument(format!(
                "{} increments for {} noise fields",
                dw.len(),
                self.len()
            )));
        }
        Ok(self.xis.iter().zip(dw.iter().copied()).collect())
    }
}

/// Seeded Brownian increments, one independent channel per noise field.
///
/// Channel `c` at refinement level `l` is drawn from the ChaCha8 stream
/// `(l << 32) | c` of the seed, so paths are reproducible bit-for-bit and a
/// path can be refined by Brownian-bridge sampling that keeps every coarse
/// increment equal to the sum of its two halves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePath {
    seed: u64,
    dt: f64,
    n_steps: usize,
    level: i32,
    /// `increments[channel][step]`
    increments: Vec<Vec<f64>>,
}

fn stream(seed: u64, level: i32, channel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((level as i64 as u64) << 32) | channel as u64);
    rng
}

impl NoisePath {
    pub fn sample(seed: u64, dt: f64, n_steps: usize, channels: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(DynamicsError::InvalidArgument("n_steps must be at least 1".into()));
        }
        let sd = dt.sqrt();
        let increments = (0..channels)
            .map(|c| {
                let mut rng = stream(seed, 0, c);
                (0..n_steps)
                    .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Ok(Self {
            seed,
            dt,
            n_steps,
            level: 0,
            increments,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|n| n as f64 * self.dt).collect()
    }

    pub fn channels(&self) -> usize {
        self.increments.len()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.increments[c]
    }

    /// Increments of every channel for one step.
    pub fn step(&self, n: usize) -> Vec<f64> {
        self.increments.iter().map(|ch| ch[n]).collect()
    }

    /// `W(t_n)` of one channel, `n` in `0..=n_steps`.
    pub fn cumulative(&self, c: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.n_steps + 1);
        let mut acc = 0.0;
        w.push(acc);
        for d in &self.increments[c] {
            acc += d;
            w.push(acc);
        }
        w
    }

    /// Halves the step by Brownian-bridge sampling.
    pub fn refine(&self) -> NoisePath {
        let level = self.level + 1;
        let half = 0.5 * self.dt;
        let sd = (0.5 * half).sqrt();
        let increments = self
            .increments
            .iter()
            .enumerate()
            .map(|(c, coarse)| {
                let mut rng = stream(self.seed, level, c);
                let mut fine = Vec::with_capacity(2 * coarse.len());
                for &dw in coarse {
                    let z: f64 = rng.sample(StandardNormal);
                    let first = 0.5 * dw + sd * z;
                    fine.push(first);
                    fine.push(dw - first);
                }
                fine
            })
            .collect();
        NoisePath {
            seed: self.seed,
            dt: half,
            n_steps: 2 * self.n_steps,
            level,
            increments,
        }
    }

    /// Doubles the step by pairwise summation.
    pub fn coarsen(&self) -> Result<NoisePath> {
        if self.n_steps % 2 != 0 {
            return Err(DynamicsError::InvalidArgument(format!(
                "cannot coarsen {} steps",
                self.n_steps
            )));
        }
        let increments = self
            .increments
            .iter()
            .map(|fine| fine.chunks_exact(2).map(|p| p[0] + p[1]).collect())
            .collect();
        Ok(NoisePath {
            seed: self.seed,
            dt: 2.0 * self.dt,
            n_steps: self.n_steps / 2,
            level: self.level - 1,
            increments,
        })
    }
}
