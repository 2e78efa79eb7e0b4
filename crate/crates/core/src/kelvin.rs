//! Material loops, the Kelvin-Noether circulation and its budget.
//!
//! The circulation of `(1/rho) dl/du` around a loop advected by the
//! stochastic flow changes only through the loop integral of
//! `(1/rho)(dl/da <> a)`. For the density-only fluid that integrand is a
//! gradient and the circulation is conserved pathwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{diamond, AlgebraError, Tensor};
use crate::dynamics::{
    boussinesq_step, buoyancy_potential, particle_step, salt_euler_step, BoussinesqState,
    DynamicsError, FluidOptions, GridVelocity, NoiseModel, NoisePath, VelocitySource,
};
use crate::field::{
    flat, interpolate, spectral, velocity_from_vorticity, Field, FieldError, FieldKind, Grid2D,
    VectorField,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KelvinError {
    #[error("invalid loop: {0}")]
    InvalidLoop(String),
    #[error("density must be positive (found {0:e})")]
    NonpositiveDensity(f64),
    #[error("missing advected quantity: {0}")]
    MissingAdvected(String),
    #[error("circulation drift {drift:e} exceeds tolerance {tol:e}")]
    ConservationViolated { drift: f64, tol: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

pub type Result<T> = std::result::Result<T, KelvinError>;

pub const MIN_LOOP_POINTS: usize = 16;

/// Closed polyline of material points; the segment from the last point back
/// to the first is implicit. Points live in the universal cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialLoop {
    points: Vec<(f64, f64)>,
}

impl MaterialLoop {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < MIN_LOOP_POINTS {
            return Err(KelvinError::InvalidLoop(format!(
                "{} points, need at least {MIN_LOOP_POINTS}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(KelvinError::InvalidLoop("non-finite point".into()));
        }
        Ok(Self { points })
    }

    /// Counter-clockwise circle.
    pub fn circle(center: (f64, f64), radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(KelvinError::InvalidLoop(format!("radius {radius}")));
        }
        let pts = (0..n)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / n as f64;
                (center.0 + radius * th.cos(), center.1 + radius * th.sin())
            })
            .collect();
        Self::new(pts)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn segments(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        let n = self.points.len();
        (0..n).map(move |k| (self.points[k], self.points[(k + 1) % n]))
    }

    pub fn max_spacing(&self) -> f64 {
        self.segments()
            .map(|(p, q)| (q.0 - p.0).hypot(q.1 - p.1))
            .fold(0.0, f64::max)
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(p, q)| (q.0 - p.0).hypot(q.1 - p.1)).sum()
    }

    /// Same loop starting at point `k`.
    pub fn rotated(&self, k: usize) -> Self {
        let mut pts = self.points.clone();
        let n = pts.len();
        pts.rotate_left(k % n);
        Self { points: pts }
    }

    /// Inserts midpoints along the spline, doubling `n`.
    pub fn refined(&self) -> Self {
        let n = self.points.len();
        let spline = PeriodicSpline::through(&self.points);
        let mut pts = Vec::with_capacity(2 * n);
        for k in 0..n {
            pts.push(self.points[k]);
            pts.push(spline.eval(k, 0.5));
        }
        Self { points: pts }
    }

    /// Resamples uniformly in arc length along the periodic cubic spline
    /// through the current points.
    pub fn resample(&self, n: usize) -> Result<Self> {
        if n < MIN_LOOP_POINTS {
            return Err(KelvinError::InvalidLoop(format!("{n} points")));
        }
        let spline = PeriodicSpline::through(&self.points);
        let total = spline.knots[self.points.len()];
        let mut pts = Vec::with_capacity(n);
        let mut seg = 0;
        for k in 0..n {
            let s = total * k as f64 / n as f64;
            while spline.knots[seg + 1] < s {
                seg += 1;
            }
            let h = spline.knots[seg + 1] - spline.knots[seg];
            pts.push(spline.eval(seg, (s - spline.knots[seg]) / h));
        }
        Self::new(pts)
    }
}

/// Periodic cubic spline through closed-loop points, parameterized by chord
/// length.
struct PeriodicSpline {
    pts: Vec<(f64, f64)>,
    /// cumulative chord length, `n + 1` entries
    knots: Vec<f64>,
    mx: Vec<f64>,
    my: Vec<f64>,
}

impl PeriodicSpline {
    fn through(points: &[(f64, f64)]) -> Self {
        let n = points.len();
        let mut knots = vec![0.0; n + 1];
        for k in 0..n {
            let (p, q) = (points[k], points[(k + 1) % n]);
            knots[k + 1] = knots[k] + (q.0 - p.0).hypot(q.1 - p.1).max(f64::MIN_POSITIVE);
        }
        let h: Vec<f64> = (0..n).map(|k| knots[k + 1] - knots[k]).collect();
        let second = |v: &dyn Fn(usize) -> f64| {
            // h_{k-1} M_{k-1} + 2 (h_{k-1} + h_k) M_k + h_k M_{k+1} = 6 (slope_k - slope_{k-1})
            let mut sub = vec![0.0; n];
            let mut diag = vec![0.0; n];
            let mut sup = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            for k in 0..n {
                let km = (k + n - 1) % n;
                let kp = (k + 1) % n;
                sub[k] = h[km];
                diag[k] = 2.0 * (h[km] + h[k]);
                sup[k] = h[k];
                rhs[k] = 6.0 * ((v(kp) - v(k)) / h[k] - (v(k) - v(km)) / h[km]);
            }
            cyclic_tridiagonal(&sub, &diag, &sup, &rhs)
        };
        let mx = second(&|k| points[k].0);
        let my = second(&|k| points[k].1);
        Self {
            pts: points.to_vec(),
            knots,
            mx,
            my,
        }
    }

    /// Point at fraction `t` of segment `k`.
    fn eval(&self, k: usize, t: f64) -> (f64, f64) {
        let n = self.pts.len();
        let kp = (k + 1) % n;
        let h = self.knots[k + 1] - self.knots[k];
        let cubic = |a: f64, b: f64, ma: f64, mb: f64| {
            let s = 1.0 - t;
            s * a + t * b + h * h / 6.0 * ((s * s * s - s) * ma + (t * t * t - t) * mb)
        };
        (
            cubic(self.pts[k].0, self.pts[kp].0, self.mx[k], self.mx[kp]),
            cubic(self.pts[k].1, self.pts[kp].1, self.my[k], self.my[kp]),
        )
    }
}

/// Solves a cyclic tridiagonal system by Sherman-Morrison on top of the
/// Thomas algorithm. `sub[0]` and `sup[n-1]` are the corner entries.
fn cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= sup[n - 1] * sub[0] / gamma;
    let thomas = |r: &[f64]| {
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = sup[0] / b[0];
        d[0] = r[0] / b[0];
        for i in 1..n {
            let m = b[i] - sub[i] * c[i - 1];
            c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
            d[i] = (r[i] - sub[i] * d[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    };
    let x = thomas(rhs);
    let mut uvec = vec![0.0; n];
    uvec[0] = gamma;
    uvec[n - 1] = sup[n - 1];
    let z = thomas(&uvec);
    let vx = x[0] + sub[0] * x[n - 1] / gamma;
    let vz = z[0] + sub[0] * z[n - 1] / gamma;
    let f = vx / (1.0 + vz);
    x.iter().zip(&z).map(|(a, b)| a - f * b).collect()
}

/// Sum of terms in a canonical order, so the result does not depend on
/// where the loop starts.
fn canonical_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Gauss points on a segment, as fractions of the parameter interval.
const GAUSS: [f64; 2] = [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9];

/// Cubic through four consecutive points at parameters -1, 0, 1, 2:
/// position and parameter derivative at `t`.
fn local_cubic(p: [(f64, f64); 4], t: f64) -> ((f64, f64), (f64, f64)) {
    let l = [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ];
    let dl = [
        -(3.0 * t * t - 6.0 * t + 2.0) / 6.0,
        (3.0 * t * t - 4.0 * t - 1.0) / 2.0,
        -(3.0 * t * t - 2.0 * t - 2.0) / 2.0,
        (3.0 * t * t - 1.0) / 6.0,
    ];
    let mut x = (0.0, 0.0);
    let mut dx = (0.0, 0.0);
    for i in 0..4 {
        x.0 += l[i] * p[i].0;
        x.1 += l[i] * p[i].1;
        dx.0 += dl[i] * p[i].0;
        dx.1 += dl[i] * p[i].1;
    }
    (x, dx)
}

/// Line integral of a one-form field along the closed loop. Each segment is
/// the local cubic through its four nearest material points, integrated
/// with two-point Gauss quadrature, so the rule is fourth order in the
/// point spacing.
pub fn line_integral(lp: &MaterialLoop, alpha: &Field) -> Result<f64> {
    alpha.expect_kind(FieldKind::OneForm)?;
    let n = lp.len();
    let p = &lp.points;
    let mut nodes = Vec::with_capacity(2 * n);
    let mut tangents = Vec::with_capacity(2 * n);
    for k in 0..n {
        let quad = [p[(k + n - 1) % n], p[k], p[(k + 1) % n], p[(k + 2) % n]];
        for t in GAUSS {
            let (x, dx) = local_cubic(quad, t);
            nodes.push(x);
            tangents.push(dx);
        }
    }
    let vals = interpolate(alpha, &nodes);
    let terms = (0..n)
        .map(|k| {
            (0..2)
                .map(|q| {
                    let (v, d) = (&vals[2 * k + q], tangents[2 * k + q]);
                    0.5 * (v[0] * d.0 + v[1] * d.1)
                })
                .sum()
        })
        .collect();
    Ok(canonical_sum(terms))
}

fn divide_by_density(alpha: &Field, rho: &Field) -> Result<Field> {
    rho.expect_kind(FieldKind::Density)?;
    alpha.grid().same_as(rho.grid())?;
    let r = rho.values();
    if let Some(bad) = r.iter().copied().find(|v| !(*v > 0.0)) {
        return Err(KelvinError::NonpositiveDensity(bad));
    }
    let n = r.len();
    let mut data = alpha.values().to_vec();
    for c in 0..2 {
        for i in 0..n {
            data[c * n + i] /= r[i];
        }
    }
    Ok(Field::new(FieldKind::OneForm, *alpha.grid(), data)?)
}

/// Kelvin-Noether quantity `I = loop integral of m / rho`.
pub fn circulation(lp: &MaterialLoop, m: &Field, rho: &Field) -> Result<f64> {
    line_integral(lp, &divide_by_density(m, rho)?)
}

/// Loop integral of `(1/rho)(dl/da <> a)`.
///
/// When the advected quantity is the density itself, the integrand is the
/// exact differential of `dl/da`; the integral is then evaluated as the
/// telescoping sum of point values and vanishes to round-off.
pub fn diamond_source_integral(lp: &MaterialLoop, dl_da: &Field, a: &Field, rho: &Field) -> Result<f64> {
    if dl_da.kind() == FieldKind::Scalar && a.kind() == FieldKind::Density && a == rho {
        let v = interpolate(dl_da, lp.points());
        let n = lp.len();
        return Ok(canonical_sum((0..n).map(|k| v[(k + 1) % n][0] - v[k][0]).collect()));
    }
    let Tensor::Grid(d) = diamond(&Tensor::Grid(dl_da.clone()), &Tensor::Grid(a.clone()))? else {
        unreachable!("grid diamond")
    };
    line_integral(lp, &divide_by_density(&d, rho)?)
}

/// Moves every loop point with the Stratonovich particle rule. `u_mid` is
/// the velocity at the middle of the step.
pub fn advect_loop(
    lp: &MaterialLoop,
    u_mid: &dyn VelocitySource,
    xis: &[&dyn VelocitySource],
    dt: f64,
    dw: &[f64],
    opts: &crate::dynamics::SolverOptions,
) -> Result<MaterialLoop> {
    let pts = particle_step(lp.points(), u_mid, xis, dt, dw, opts)?;
    MaterialLoop::new(pts)
}

/// Resamples when the largest spacing exceeds `trigger_cells` grid cells,
/// choosing enough points for at most one cell per segment.
pub fn maintain_spacing(lp: MaterialLoop, grid: &Grid2D, trigger_cells: f64) -> Result<MaterialLoop> {
    let h = grid.dx().min(grid.dy());
    if lp.max_spacing() <= trigger_cells * h {
        return Ok(lp);
    }
    let n = lp.len().max((lp.length() / h).ceil() as usize);
    lp.resample(n)
}

/// Pulls a one-form back along a flow map sampled at every grid node:
/// `(g^* alpha)(x) = Dg(x)^T alpha(g(x))`. The map's displacement
/// `g(x) - x` must be periodic.
pub fn pullback_one_form(alpha: &Field, image: &[(f64, f64)]) -> Result<Field> {
    alpha.expect_kind(FieldKind::OneForm)?;
    let g = *alpha.grid();
    if image.len() != g.len() {
        return Err(KelvinError::InvalidLoop(format!(
            "flow map has {} nodes, grid {}",
            image.len(),
            g.len()
        )));
    }
    let mut dx = vec![0.0; g.len()];
    let mut dy = vec![0.0; g.len()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (x, y) = g.node(i, j);
            let k = g.index(i, j);
            dx[k] = image[k].0 - x;
            dy[k] = image[k].1 - y;
        }
    }
    let (dxx, dxy) = spectral::gradient_planes(&g, &dx);
    let (dyx, dyy) = spectral::gradient_planes(&g, &dy);
    let vals = interpolate(alpha, image);
    let n = g.len();
    let mut out = vec![0.0; 2 * n];
    for k in 0..n {
        let (a0, a1) = (vals[k][0], vals[k][1]);
        // Dg = I + D(displacement)
        out[k] = (1.0 + dxx[k]) * a0 + dyx[k] * a1;
        out[n + k] = dxy[k] * a0 + (1.0 + dyy[k]) * a1;
    }
    Ok(Field::new(FieldKind::OneForm, g, out)?)
}

/// Time series of a budget run. `source_values` holds the cumulative time
/// integral of the diamond source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirculationRecord {
    pub times: Vec<f64>,
    pub i_values: Vec<f64>,
    pub source_values: Vec<f64>,
}

impl CirculationRecord {
    fn push(&mut self, t: f64, i: f64, s: f64) -> Result<()> {
        if !i.is_finite() || !s.is_finite() {
            return Err(DynamicsError::NonFinite.into());
        }
        self.times.push(t);
        self.i_values.push(i);
        self.source_values.push(s);
        Ok(())
    }

    /// `|I(T) - I(0)| / |I(0)|`.
    pub fn relative_drift(&self) -> f64 {
        let i0 = self.i_values[0];
        (self.i_values.last().unwrap() - i0).abs() / i0.abs()
    }

    /// `max_t |I(t) - I(0)| / |I(0)|`.
    pub fn max_relative_drift(&self) -> f64 {
        let i0 = self.i_values[0];
        self.i_values.iter().map(|i| (i - i0).abs()).fold(0.0, f64::max) / i0.abs()
    }

    /// `|I(T) - I(0) - int source dt| / max_t |I|`.
    pub fn budget_residual(&self) -> f64 {
        let i0 = self.i_values[0];
        let last = self.i_values.len() - 1;
        let scale = self.i_values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        (self.i_values[last] - i0 - self.source_values[last]).abs() / scale
    }
}

/// Fluid model co-evolved with the loop.
#[derive(Debug, Clone, PartialEq)]
pub enum BudgetModel {
    /// SALT Euler with unit density: no circulation source.
    Euler,
    /// SALT Boussinesq with buoyancy `b0` and potential `g sin(2 pi y / ly)`.
    Boussinesq { g: f64, b0: Field },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSetup {
    pub omega0: Field,
    pub model: BudgetModel,
    pub loop0: MaterialLoop,
    /// Resample when the loop spacing exceeds this many grid cells.
    pub resample_cells: f64,
    /// For the source-free model, fail when the final relative drift exceeds
    /// this value.
    pub conservation_tol: Option<f64>,
}

fn unit_density(g: &Grid2D) -> Field {
    Field::constant(FieldKind::Density, *g, 1.0)
}

fn source_now(lp: &MaterialLoop, model: &BudgetModel, b: Option<&Field>, u: &VectorField) -> Result<f64> {
    let g = u.grid();
    let rho = unit_density(g);
    match (model, b) {
        (BudgetModel::Euler, _) => {
            let ke: Vec<f64> = (0..g.len())
                .map(|i| 0.5 * (u.x[i] * u.x[i] + u.y[i] * u.y[i]))
                .collect();
            let dl_drho = Field::new(FieldKind::Scalar, *g, ke)?;
            diamond_source_integral(lp, &dl_drho, &rho, &rho)
        }
        (BudgetModel::Boussinesq { g: grav, .. }, Some(b)) => {
            let dl_db = buoyancy_potential(g, *grav).scaled(-1.0);
            diamond_source_integral(lp, &dl_db, b, &rho)
        }
        (BudgetModel::Boussinesq { .. }, None) => {
            Err(KelvinError::MissingAdvected("buoyancy".into()))
        }
    }
}

/// Co-evolves vorticity (and buoyancy), the material loop and the
/// circulation on one noise path, recording `I(t)` and the cumulative
/// diamond source after every step.
pub fn run_circulation_budget(
    setup: &BudgetSetup,
    noise: &NoiseModel<VectorField>,
    path: &NoisePath,
    opts: &FluidOptions,
) -> Result<CirculationRecord> {
    run_circulation_budget_with(setup, noise, path, opts, |_, _, _| Ok(()))
}

/// As [`run_circulation_budget`], calling `observe(step, omega, b)` on the
/// initial state and after every step.
pub fn run_circulation_budget_with<F>(
    setup: &BudgetSetup,
    noise: &NoiseModel<VectorField>,
    path: &NoisePath,
    opts: &FluidOptions,
    mut observe: F,
) -> Result<CirculationRecord>
where
    F: FnMut(usize, &Field, Option<&Field>) -> Result<()>,
{
    let grid = *setup.omega0.grid();
    if path.channels() != noise.len() {
        return Err(DynamicsError::InvalidArgument(format!(
            "path has {} channels, noise model {}",
            path.channels(),
            noise.len()
        ))
        .into());
    }
    for xi in noise.xis() {
        grid.same_as(xi.grid())?;
    }
    let rho = unit_density(&grid);
    let dt = path.dt();
    let sources: Vec<GridVelocity<'_>> = noise.xis().iter().map(GridVelocity::new).collect();
    let xis: Vec<&dyn VelocitySource> = sources.iter().map(|s| s as &dyn VelocitySource).collect();

    let mut omega = setup.omega0.clone();
    let mut b = match &setup.model {
        BudgetModel::Euler => None,
        BudgetModel::Boussinesq { b0, .. } => {
            grid.same_as(b0.grid())?;
            Some(b0.clone())
        }
    };
    let mut u = velocity_from_vorticity(&omega)?;
    let mut lp = setup.loop0.clone();
    let mut record = CirculationRecord {
        times: Vec::new(),
        i_values: Vec::new(),
        source_values: Vec::new(),
    };
    let mut src = source_now(&lp, &setup.model, b.as_ref(), &u)?;
    let mut cumulative = 0.0;
    record.push(0.0, circulation(&lp, &flat(&u), &rho)?, 0.0)?;
    observe(0, &omega, b.as_ref())?;

    for n in 0..path.n_steps() {
        let dw = path.step(n);
        match (&setup.model, b.as_mut()) {
            (BudgetModel::Boussinesq { g, .. }, Some(bf)) => {
                let next = boussinesq_step(
                    &BoussinesqState {
                        omega: omega.clone(),
                        b: bf.clone(),
                    },
                    *g,
                    noise,
                    dt,
                    &dw,
                    opts,
                )?;
                omega = next.omega;
                *bf = next.b;
            }
            _ => omega = salt_euler_step(&omega, noise, dt, &dw, opts)?,
        }
        let u_next = velocity_from_vorticity(&omega)?;
        let mut u_mid = u.scaled(0.5);
        u_mid.axpy(0.5, &u_next)?;
        lp = advect_loop(&lp, &GridVelocity::new(&u_mid), &xis, dt, &dw, &opts.solver)?;
        lp = maintain_spacing(lp, &grid, setup.resample_cells)?;
        u = u_next;

        let src_next = source_now(&lp, &setup.model, b.as_ref(), &u)?;
        cumulative += 0.5 * (src + src_next) * dt;
        src = src_next;
        record.push((n + 1) as f64 * dt, circulation(&lp, &flat(&u), &rho)?, cumulative)?;
        observe(n + 1, &omega, b.as_ref())?;
    }

    if let (BudgetModel::Euler, Some(tol)) = (&setup.model, setup.conservation_tol) {
        let drift = record.relative_drift();
        if !(drift <= tol) {
            return Err(KelvinError::ConservationViolated { drift, tol });
        }
    }
    Ok(record)
}
