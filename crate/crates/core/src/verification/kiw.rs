//! Stochastic chain rule for pull-backs of tensor-valued semimartingales:
//! `d(g_t^* K_t) = g_t^*(dK_t + L_u K_t dt + sum_i L_{xi_i} K_t o dW_i)`
//! with `K_t = K_0 + int G dt + sum_j int H_j o dB_j` and the flow
//! `dx = u dt + sum_i xi_i o dW_i`.
//!
//! For each node `x` the flow is integrated with the implicit midpoint
//! rule, the pulled-back tensor `g_t^* K_t` is evaluated exactly from the
//! spectral representation, and its net change is compared against the
//! midpoint (Stratonovich) sum of the right-hand side over the same
//! increments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::ResidualReport;
use super::{Result, VerificationError};
use crate::dynamics::{NoisePath, SolverOptions};
use crate::field::{Field, FieldKind, Grid2D, SpectralEvaluator, VectorField};

/// Semimartingale `K_t`; every field has the same kind, scalar or one-form.
#[derive(Debug, Clone)]
pub struct KiwSpec {
    pub k0: Field,
    pub drift: Field,
    pub h: Vec<Field>,
}

#[derive(Debug, Clone)]
pub struct KiwFlow {
    pub u: VectorField,
    pub xis: Vec<VectorField>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KiwOptions {
    /// Dyadically nested steps, coarsest first.
    pub dts: Vec<f64>,
    pub t_final: f64,
    pub seed: u64,
    /// Independent paths; residuals are RMS over paths.
    pub paths: usize,
    /// Every `stride`-th node in each direction is tracked.
    pub stride: usize,
    pub min_order: f64,
    pub solver: SolverOptions,
}

impl Default for KiwOptions {
    fn default() -> Self {
        Self {
            dts: vec![4e-3, 2e-3, 1e-3],
            t_final: 0.5,
            seed: 0,
            paths: 4,
            stride: 4,
            min_order: 0.5,
            solver: SolverOptions {
                tol: 1e-13,
                max_iter: 50,
            },
        }
    }
}

/// Largest per-step displacement, in grid cells, for which a resolution is
/// taken to be in the asymptotic regime.
const MAX_STEP_CELLS: f64 = 0.5;

type Mat2 = [[f64; 2]; 2];

struct Spectral {
    comps: Vec<SpectralEvaluator>,
}

impl Spectral {
    fn of_field(f: &Field) -> Self {
        Self {
            comps: (0..f.kind().components())
                .map(|c| SpectralEvaluator::new(f.grid(), f.component(c)))
                .collect(),
        }
    }

    fn of_vector(u: &VectorField) -> Self {
        Self {
            comps: vec![
                SpectralEvaluator::new(u.grid(), &u.x),
                SpectralEvaluator::new(u.grid(), &u.y),
            ],
        }
    }

    /// Values and gradients `[(v, dx, dy)]` per component.
    fn eval(&self, x: f64, y: f64) -> Vec<(f64, f64, f64)> {
        self.comps.iter().map(|e| e.value_and_gradient(x, y)).collect()
    }

    fn values(&self, x: f64, y: f64) -> Vec<f64> {
        self.comps.iter().map(|e| e.value(x, y)).collect()
    }
}

struct Prepared {
    kind: FieldKind,
    k0: Spectral,
    drift: Spectral,
    h: Vec<Spectral>,
    u: Spectral,
    xis: Vec<Spectral>,
}

fn validate(spec: &KiwSpec, flow: &KiwFlow) -> Result<FieldKind> {
    let kind = spec.k0.kind();
    if !matches!(kind, FieldKind::Scalar | FieldKind::OneForm) {
        return Err(VerificationError::UnsupportedKind(kind));
    }
    let grid = *spec.k0.grid();
    for f in std::iter::once(&spec.drift).chain(&spec.h) {
        f.expect_kind(kind)?;
        grid.same_as(f.grid())?;
    }
    for v in std::iter::once(&flow.u).chain(&flow.xis) {
        grid.same_as(v.grid())?;
    }
    Ok(kind)
}

fn solve2(a: Mat2, b: [f64; 2]) -> [f64; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [
        (a[1][1] * b[0] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ]
}

struct NodeOutcome {
    residual_sq: f64,
    scale_sq: f64,
    max_step: f64,
}

fn run_node(
    p: &Prepared,
    x0: (f64, f64),
    dt: f64,
    n_steps: usize,
    dw: &[Vec<f64>],
    db: &[Vec<f64>],
    opts: &SolverOptions,
) -> Result<NodeOutcome> {
    let comps = p.k0.comps.len();
    let m = p.xis.len();
    let mut y = x0;
    let mut jac: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
    let mut b = vec![0.0; db.len()];
    let mut acc = vec![0.0; comps];
    let mut max_step = 0.0_f64;

    // displacement of one step evaluated at z
    let increment = |z: (f64, f64), n: usize| -> (f64, f64) {
        let u = p.u.values(z.0, z.1);
        let (mut dx, mut dy) = (u[0] * dt, u[1] * dt);
        for i in 0..m {
            let xi = p.xis[i].values(z.0, z.1);
            dx += xi[0] * dw[i][n];
            dy += xi[1] * dw[i][n];
        }
        (dx, dy)
    };

    for n in 0..n_steps {
        let mut next = y;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..opts.max_iter {
            let mid = (0.5 * (y.0 + next.0), 0.5 * (y.1 + next.1));
            let d = increment(mid, n);
            let cand = (y.0 + d.0, y.1 + d.1);
            residual = (cand.0 - next.0).abs().max((cand.1 - next.1).abs());
            next = cand;
            if residual <= opts.tol * next.0.abs().max(next.1.abs()).max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(crate::dynamics::DynamicsError::NonConvergence {
                iterations: opts.max_iter,
                residual,
            }
            .into());
        }
        let mid = (0.5 * (y.0 + next.0), 0.5 * (y.1 + next.1));
        let delta = (next.0 - y.0, next.1 - y.1);
        max_step = max_step.max(delta.0.abs()).max(delta.1.abs());

        // Jacobian of the step displacement at the midpoint
        let du = p.u.eval(mid.0, mid.1);
        let mut a: Mat2 = [
            [du[0].1 * dt, du[0].2 * dt],
            [du[1].1 * dt, du[1].2 * dt],
        ];
        for i in 0..m {
            let dxi = p.xis[i].eval(mid.0, mid.1);
            for r in 0..2 {
                a[r][0] += dxi[r].1 * dw[i][n];
                a[r][1] += dxi[r].2 * dw[i][n];
            }
        }
        // (I - A/2) J_{n+1} = (I + A/2) J_n, column by column
        let lhs: Mat2 = [
            [1.0 - 0.5 * a[0][0], -0.5 * a[0][1]],
            [-0.5 * a[1][0], 1.0 - 0.5 * a[1][1]],
        ];
        let mut jac_next = [[0.0; 2]; 2];
        for c in 0..2 {
            let rhs = [
                jac[0][c] + 0.5 * (a[0][0] * jac[0][c] + a[0][1] * jac[1][c]),
                jac[1][c] + 0.5 * (a[1][0] * jac[0][c] + a[1][1] * jac[1][c]),
            ];
            let col = solve2(lhs, rhs);
            jac_next[0][c] = col[0];
            jac_next[1][c] = col[1];
        }

        // K at the time midpoint, its increment, and their gradients at y_mid
        let t_mid = (n as f64 + 0.5) * dt;
        let k0 = p.k0.eval(mid.0, mid.1);
        let g = p.drift.eval(mid.0, mid.1);
        let hs: Vec<Vec<(f64, f64, f64)>> = p.h.iter().map(|h| h.eval(mid.0, mid.1)).collect();
        let mut k_mid = vec![(0.0, 0.0, 0.0); comps];
        let mut dk = vec![0.0; comps];
        for c in 0..comps {
            let mut v = (
                k0[c].0 + g[c].0 * t_mid,
                k0[c].1 + g[c].1 * t_mid,
                k0[c].2 + g[c].2 * t_mid,
            );
            dk[c] = g[c].0 * dt;
            for j in 0..hs.len() {
                let b_mid = b[j] + 0.5 * db[j][n];
                v.0 += hs[j][c].0 * b_mid;
                v.1 += hs[j][c].1 * b_mid;
                v.2 += hs[j][c].2 * b_mid;
                dk[c] += hs[j][c].0 * db[j][n];
            }
            k_mid[c] = v;
        }

        match p.kind {
            FieldKind::Scalar => {
                acc[0] += dk[0] + k_mid[0].1 * delta.0 + k_mid[0].2 * delta.1;
            }
            _ => {
                // L_d alpha = (d . grad) alpha + A^T alpha, pulled back by J_mid^T
                let mut w = [0.0; 2];
                for c in 0..2 {
                    w[c] = dk[c]
                        + k_mid[c].1 * delta.0
                        + k_mid[c].2 * delta.1
                        + a[0][c] * k_mid[0].0
                        + a[1][c] * k_mid[1].0;
                }
                for c in 0..2 {
                    let j0 = 0.5 * (jac[0][c] + jac_next[0][c]);
                    let j1 = 0.5 * (jac[1][c] + jac_next[1][c]);
                    acc[c] += j0 * w[0] + j1 * w[1];
                }
            }
        }

        for j in 0..b.len() {
            b[j] += db[j][n];
        }
        y = next;
        jac = jac_next;
    }

    // exact change of the pulled-back tensor
    let t = n_steps as f64 * dt;
    let k_at = |z: (f64, f64)| -> Vec<f64> {
        let mut v = p.k0.values(z.0, z.1);
        let g = p.drift.values(z.0, z.1);
        for c in 0..comps {
            v[c] += g[c] * t;
        }
        for (j, h) in p.h.iter().enumerate() {
            let hv = h.values(z.0, z.1);
            for c in 0..comps {
                v[c] += hv[c] * b[j];
            }
        }
        v
    };
    let start = p.k0.values(x0.0, x0.1);
    let end = k_at(y);
    let pulled: Vec<f64> = match p.kind {
        FieldKind::Scalar => end,
        _ => (0..2)
            .map(|c| jac[0][c] * end[0] + jac[1][c] * end[1])
            .collect(),
    };
    let mut residual_sq = 0.0;
    let mut scale_sq = 0.0;
    for c in 0..comps {
        residual_sq += (pulled[c] - start[c] - acc[c]).powi(2);
        scale_sq += start[c].powi(2);
    }
    Ok(NodeOutcome {
        residual_sq,
        scale_sq,
        max_step,
    })
}

/// Pathwise strong residual of the stochastic chain rule for each step in
/// `opts.dts`, with an order fit. Resolutions whose largest step moves a
/// point more than half a grid cell are excluded from the fit.
pub fn check_kiw(spec: &KiwSpec, flow: &KiwFlow, opts: &KiwOptions) -> Result<ResidualReport> {
    let kind = validate(spec, flow)?;
    if opts.dts.is_empty() || opts.paths == 0 || opts.stride == 0 {
        return Err(VerificationError::InvalidArgument(
            "need at least one dt, one path and a positive stride".into(),
        ));
    }
    for w in opts.dts.windows(2) {
        if ((w[0] / w[1]).log2() - (w[0] / w[1]).log2().round()).abs() > 1e-9 || w[1] >= w[0] {
            return Err(VerificationError::InvalidArgument(format!(
                "dt list must be dyadically decreasing, got {:?}",
                opts.dts
            )));
        }
    }
    let grid: Grid2D = *spec.k0.grid();
    let prep = Prepared {
        kind,
        k0: Spectral::of_field(&spec.k0),
        drift: Spectral::of_field(&spec.drift),
        h: spec.h.iter().map(Spectral::of_field).collect(),
        u: Spectral::of_vector(&flow.u),
        xis: flow.xis.iter().map(Spectral::of_vector).collect(),
    };
    let nodes: Vec<(f64, f64)> = (0..grid.ny)
        .step_by(opts.stride)
        .flat_map(|j| (0..grid.nx).step_by(opts.stride).map(move |i| (i, j)))
        .map(|(i, j)| grid.node(i, j))
        .collect();
    let m = flow.xis.len();
    let channels = m + spec.h.len();
    let coarse_steps = (opts.t_final / opts.dts[0]).round() as usize;
    if coarse_steps == 0 {
        return Err(VerificationError::InvalidArgument("t_final shorter than dt".into()));
    }
    let h_cell = grid.dx().min(grid.dy());

    let mut sums = vec![0.0; opts.dts.len()];
    let mut max_steps = vec![0.0_f64; opts.dts.len()];
    for k in 0..opts.paths {
        let mut path = NoisePath::sample(opts.seed + k as u64, opts.dts[0], coarse_steps, channels)?;
        for (level, &dt) in opts.dts.iter().enumerate() {
            while path.dt() > dt * (1.0 + 1e-12) {
                path = path.refine();
            }
            let dw: Vec<Vec<f64>> = (0..m).map(|c| path.channel(c).to_vec()).collect();
            let db: Vec<Vec<f64>> = (m..channels).map(|c| path.channel(c).to_vec()).collect();
            let outcomes: Vec<NodeOutcome> = nodes
                .par_iter()
                .map(|&x0| run_node(&prep, x0, path.dt(), path.n_steps(), &dw, &db, &opts.solver))
                .collect::<Result<_>>()?;
            let res: f64 = outcomes.iter().map(|o| o.residual_sq).sum();
            let scale: f64 = outcomes.iter().map(|o| o.scale_sq).sum::<f64>().max(f64::MIN_POSITIVE);
            sums[level] += res / scale;
            max_steps[level] = outcomes.iter().fold(max_steps[level], |a, o| a.max(o.max_step));
        }
    }

    let mut kept_dt = Vec::new();
    let mut kept_res = Vec::new();
    let mut notes = Vec::new();
    for (level, &dt) in opts.dts.iter().enumerate() {
        let r = (sums[level] / opts.paths as f64).sqrt();
        let cells = max_steps[level] / h_cell;
        if cells > MAX_STEP_CELLS {
            notes.push(format!(
                "dt = {dt:e} excluded: largest step {cells:.2} cells exceeds {MAX_STEP_CELLS}"
            ));
        } else {
            kept_dt.push(dt);
            kept_res.push(r);
        }
    }
    let params = serde_json::json!({
        "kind": format!("{kind:?}"),
        "grid": [grid.nx, grid.ny],
        "noise_channels": m,
        "tensor_channels": spec.h.len(),
        "dts": opts.dts,
        "t_final": opts.t_final,
        "seed": opts.seed,
        "paths": opts.paths,
        "stride": opts.stride,
    });
    let mut rep = ResidualReport::from_order("kiw", params, "dt", kept_dt, kept_res, opts.min_order);
    rep.notes.splice(0..0, notes);
    Ok(rep)
}
