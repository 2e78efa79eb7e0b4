//! FFT plumbing for pseudo-spectral operators on a [`Grid2D`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Grid2D;

struct Plans {
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

fn plans(nx: usize, ny: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((nx, ny))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                fwd_x: planner.plan_fft_forward(nx),
                inv_x: planner.plan_fft_inverse(nx),
                fwd_y: planner.plan_fft_forward(ny),
                inv_y: planner.plan_fft_inverse(ny),
            })
        })
        .clone()
}

fn transform(grid: &Grid2D, buf: &mut [Complex64], inverse: bool) {
    let p = plans(grid.nx, grid.ny);
    let (fx, fy) = if inverse {
        (&p.inv_x, &p.inv_y)
    } else {
        (&p.fwd_x, &p.fwd_y)
    };
    // rows are contiguous
    fx.process(buf);
    let (nx, ny) = (grid.nx, grid.ny);
    let mut col = vec![Complex64::new(0.0, 0.0); ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = buf[j * nx + i];
        }
        fy.process(&mut col);
        for j in 0..ny {
            buf[j * nx + i] = col[j];
        }
    }
}

/// Unnormalised forward 2D DFT of one real plane.
pub fn forward(grid: &Grid2D, data: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut buf, false);
    buf
}

/// Inverse of [`forward`], keeping the real part.
pub fn inverse(grid: &Grid2D, spec: Vec<Complex64>) -> Vec<f64> {
    let mut buf = spec;
    transform(grid, &mut buf, true);
    let norm = 1.0 / grid.len() as f64;
    buf.into_iter().map(|c| c.re * norm).collect()
}

/// Signed integer mode index for FFT bin `m` of an `n`-point transform.
#[inline]
pub fn mode_index(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Angular wavenumbers along x and y. The Nyquist entry keeps its magnitude;
/// first-derivative operators zero it separately.
pub fn wavenumbers(grid: &Grid2D) -> (Vec<f64>, Vec<f64>) {
    let kx = (0..grid.nx)
        .map(|m| std::f64::consts::TAU / grid.lx * mode_index(m, grid.nx) as f64)
        .collect();
    let ky = (0..grid.ny)
        .map(|m| std::f64::consts::TAU / grid.ly * mode_index(m, grid.ny) as f64)
        .collect();
    (kx, ky)
}

/// Wavenumbers for first derivatives: Nyquist bins set to zero so the
/// operator stays real and skew-adjoint.
pub fn derivative_wavenumbers(grid: &Grid2D) -> (Vec<f64>, Vec<f64>) {
    let (mut kx, mut ky) = wavenumbers(grid);
    kx[grid.nx / 2] = 0.0;
    ky[grid.ny / 2] = 0.0;
    (kx, ky)
}

/// `(df/dx, df/dy)` from a single forward transform.
pub fn gradient_planes(grid: &Grid2D, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let spec = forward(grid, f);
    let (kx, ky) = derivative_wavenumbers(grid);
    let mut sx = spec.clone();
    let mut sy = spec;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = j * grid.nx + i;
            sx[idx] *= Complex64::new(0.0, kx[i]);
            sy[idx] *= Complex64::new(0.0, ky[j]);
        }
    }
    (inverse(grid, sx), inverse(grid, sy))
}

pub fn ddx(grid: &Grid2D, f: &[f64]) -> Vec<f64> {
    let mut spec = forward(grid, f);
    let (kx, _) = derivative_wavenumbers(grid);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            spec[j * grid.nx + i] *= Complex64::new(0.0, kx[i]);
        }
    }
    inverse(grid, spec)
}

pub fn ddy(grid: &Grid2D, f: &[f64]) -> Vec<f64> {
    let mut spec = forward(grid, f);
    let (_, ky) = derivative_wavenumbers(grid);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            spec[j * grid.nx + i] *= Complex64::new(0.0, ky[j]);
        }
    }
    inverse(grid, spec)
}

/// Zeroes every mode with `|m_x| > nx/3` or `|m_y| > ny/3`.
pub fn dealias_plane(grid: &Grid2D, f: &[f64]) -> Vec<f64> {
    let mut spec = forward(grid, f);
    let cx = grid.nx as i64 / 3;
    let cy = grid.ny as i64 / 3;
    for j in 0..grid.ny {
        let my = mode_index(j, grid.ny).abs();
        for i in 0..grid.nx {
            let mx = mode_index(i, grid.nx).abs();
            if mx > cx || my > cy {
                spec[j * grid.nx + i] = Complex64::new(0.0, 0.0);
            }
        }
    }
    inverse(grid, spec)
}

/// Trigonometric interpolant of a band-limited plane, evaluated exactly at
/// arbitrary points.
///
/// Only modes whose magnitude exceeds a relative cutoff are retained, so
/// evaluation costs O(active modes) per point.
#[derive(Debug, Clone)]
pub struct SpectralEvaluator {
    modes: Vec<(f64, f64, Complex64)>,
}

impl SpectralEvaluator {
    pub fn new(grid: &Grid2D, f: &[f64]) -> Self {
        Self::with_cutoff(grid, f, 1e-14)
    }

    pub fn with_cutoff(grid: &Grid2D, f: &[f64], rel_cutoff: f64) -> Self {
        let spec = forward(grid, f);
        let (kx, ky) = wavenumbers(grid);
        let norm = 1.0 / grid.len() as f64;
        let peak = spec.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        let floor = rel_cutoff * peak;
        let mut modes = Vec::new();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let c = spec[j * grid.nx + i];
                if peak > 0.0 && c.norm() > floor {
                    modes.push((kx[i], ky[j], c * norm));
                }
            }
        }
        Self { modes }
    }

    pub fn active_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(kx, ky, c)| {
                let (s, co) = (kx * x + ky * y).sin_cos();
                c.re * co - c.im * s
            })
            .sum()
    }

    /// Value and gradient at one point.
    pub fn value_and_gradient(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let mut v = 0.0;
        let mut gx = 0.0;
        let mut gy = 0.0;
        for &(kx, ky, c) in &self.modes {
            let (s, co) = (kx * x + ky * y).sin_cos();
            let re = c.re * co - c.im * s;
            // d/dtheta of Re(c e^{i theta}) = -Im(c e^{i theta})
            let dre = -(c.re * s + c.im * co);
            v += re;
            gx += kx * dre;
            gy += ky * dre;
        }
        (v, gx, gy)
    }
}
