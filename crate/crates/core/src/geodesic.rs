//! Chart-level geodesics and the field exponential map `alpha(1; Y)`.
//!
//! The geodesic equation `a'' + Gamma(a)(a', a') = 0` is integrated as the first
//! order system `(a, Z)' = (Z, -Gamma(a)(Z, Z))` with fixed-step classical RK4.
//! Over a grid of initial data the system is diagonal, so the field version
//! integrates each point independently.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::random::trial_rng;
use crate::report::{loglog_slope, SuiteReport};

/// Step for central differences of custom metrics.
pub const METRIC_FD_STEP: f64 = 1e-6;
pub const DEFAULT_STEPS: usize = 256;

type MetricFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MetricKind {
    Flat,
    /// `g = e^{2z}` on the line.
    ExpConformal1d,
    /// `g = e^{2 lambda} I` with `lambda(z) = amplitude sin(2 pi z_1) cos(2 pi z_2)`.
    Conformal2d {
        amplitude: f64,
    },
    /// User-supplied components; derivatives by central differences.
    Custom,
}

#[derive(Clone)]
pub struct Metric {
    dim: usize,
    kind: MetricKind,
    custom: Option<MetricFn>,
}

impl std::fmt::Debug for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Metric")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .finish()
    }
}

impl Metric {
    pub fn flat(dim: usize) -> Self {
        Self {
            dim,
            kind: MetricKind::Flat,
            custom: None,
        }
    }

    pub fn exp_conformal_1d() -> Self {
        Self {
            dim: 1,
            kind: MetricKind::ExpConformal1d,
            custom: None,
        }
    }

    pub fn conformal_2d(amplitude: f64) -> Self {
        Self {
            dim: 2,
            kind: MetricKind::Conformal2d { amplitude },
            custom: None,
        }
    }

    /// `g` returns the `dim x dim` components row-major.
    pub fn custom(dim: usize, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            kind: MetricKind::Custom,
            custom: Some(Arc::new(g)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    fn conformal_factor(amplitude: f64, z: &[f64]) -> (f64, [f64; 2]) {
        let (s1, c1) = (2.0 * PI * z[0]).sin_cos();
        let (s2, c2) = (2.0 * PI * z[1]).sin_cos();
        let lambda = amplitude * s1 * c2;
        let grad = [
            2.0 * PI * amplitude * c1 * c2,
            -2.0 * PI * amplitude * s1 * s2,
        ];
        (lambda, grad)
    }

    /// Metric components at `z`, row-major.
    pub fn components(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        match self.kind {
            MetricKind::Flat => identity(d),
            MetricKind::ExpConformal1d => vec![(2.0 * z[0]).exp()],
            MetricKind::Conformal2d { amplitude } => {
                let (lambda, _) = Self::conformal_factor(amplitude, z);
                let e = (2.0 * lambda).exp();
                vec![e, 0.0, 0.0, e]
            }
            MetricKind::Custom => (self.custom.as_ref().expect("custom metric has components"))(z),
        }
    }

    /// `dg[l][p][q] = d g_pq / d z_l`, flattened as `l * d^2 + p * d + q`.
    pub fn derivatives(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        match self.kind {
            MetricKind::Flat => vec![0.0; d * d * d],
            MetricKind::ExpConformal1d => vec![2.0 * (2.0 * z[0]).exp()],
            MetricKind::Conformal2d { amplitude } => {
                let (lambda, grad) = Self::conformal_factor(amplitude, z);
                let e = (2.0 * lambda).exp();
                let mut out = vec![0.0; 8];
                for l in 0..2 {
                    out[l * 4] = 2.0 * grad[l] * e;
                    out[l * 4 + 3] = 2.0 * grad[l] * e;
                }
                out
            }
            MetricKind::Custom => self.fd_derivatives(z),
        }
    }

    fn fd_derivatives(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d * d];
        let mut zp = z.to_vec();
        for l in 0..d {
            zp[l] = z[l] + METRIC_FD_STEP;
            let gp = self.components(&zp);
            zp[l] = z[l] - METRIC_FD_STEP;
            let gm = self.components(&zp);
            zp[l] = z[l];
            for c in 0..d * d {
                out[l * d * d + c] = (gp[c] - gm[c]) / (2.0 * METRIC_FD_STEP);
            }
        }
        out
    }

    /// Inverse metric via Cholesky; fails unless `g` is symmetric positive definite at `z`.
    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim;
        let g = self.components(z);
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for p in 0..d {
            for q in 0..p {
                if (g[p * d + q] - g[q * d + p]).abs() > 1e-12 * scale {
                    return Err(Error::MetricNotPositive { point: z.to_vec() });
                }
            }
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::MetricNotPositive { point: z.to_vec() });
        }
        let chol = DMatrix::from_row_slice(d, d, &g)
            .cholesky()
            .ok_or_else(|| Error::MetricNotPositive { point: z.to_vec() })?;
        let inv = chol.inverse();
        Ok((0..d * d).map(|c| inv[(c / d, c % d)]).collect())
    }

    /// `g(v, v)` at `z`.
    pub fn energy(&self, z: &[f64], v: &[f64]) -> f64 {
        let d = self.dim;
        let g = self.components(z);
        let mut e = 0.0;
        for p in 0..d {
            for q in 0..d {
                e += g[p * d + q] * v[p] * v[q];
            }
        }
        e
    }
}

fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

/// `Gamma^k_pq` at `z`, flattened as `k * d^2 + p * d + q`.
pub fn christoffel(m: &Metric, z: &[f64]) -> Result<Vec<f64>> {
    let d = m.dim();
    if z.len() != d {
        return Err(Error::InvalidParameter(format!(
            "point has {} coordinates, metric dimension is {d}",
            z.len()
        )));
    }
    let ginv = m.inverse(z)?;
    let dg = m.derivatives(z);
    let at = |l: usize, p: usize, q: usize| dg[l * d * d + p * d + q];
    let mut gamma = vec![0.0; d * d * d];
    for k in 0..d {
        for p in 0..d {
            for q in p..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += ginv[k * d + l] * (at(q, p, l) - at(l, p, q) + at(p, l, q));
                }
                gamma[k * d * d + p * d + q] = 0.5 * acc;
                gamma[k * d * d + q * d + p] = 0.5 * acc;
            }
        }
    }
    Ok(gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub t: f64,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

/// Right-hand side `(Z, -Gamma(a)(Z, Z))`.
fn rhs(m: &Metric, a: &[f64], z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = m.dim();
    let gamma = christoffel(m, a)?;
    let mut dz = vec![0.0; d];
    for k in 0..d {
        for p in 0..d {
            for q in 0..d {
                dz[k] -= gamma[k * d * d + p * d + q] * z[p] * z[q];
            }
        }
    }
    Ok((z.to_vec(), dz))
}

fn offset(x: &[f64], k: &[f64], h: f64) -> Vec<f64> {
    x.iter().zip(k).map(|(x, k)| x + h * k).collect()
}

fn rk4_step(m: &Metric, a: &mut [f64], z: &mut [f64], h: f64) -> Result<()> {
    let (a1, z1) = rhs(m, a, z)?;
    let (a2, z2) = rhs(m, &offset(a, &a1, 0.5 * h), &offset(z, &z1, 0.5 * h))?;
    let (a3, z3) = rhs(m, &offset(a, &a2, 0.5 * h), &offset(z, &z2, 0.5 * h))?;
    let (a4, z4) = rhs(m, &offset(a, &a3, h), &offset(z, &z3, h))?;
    for i in 0..a.len() {
        a[i] += h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
        z[i] += h / 6.0 * (z1[i] + 2.0 * z2[i] + 2.0 * z3[i] + z4[i]);
    }
    Ok(())
}

fn validate_flow(m: &Metric, y0: &[f64], v0: &[f64], t_final: f64, steps: usize) -> Result<()> {
    if y0.len() != m.dim() || v0.len() != m.dim() {
        return Err(Error::InvalidParameter(
            "initial data do not match the metric dimension".into(),
        ));
    }
    if !(t_final.abs() <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "|T| = {} exceeds 2",
            t_final.abs()
        )));
    }
    if steps < 16 {
        return Err(Error::InvalidParameter(format!(
            "{steps} steps is below the minimum of 16"
        )));
    }
    Ok(())
}

/// Endpoint of the geodesic from `y0` with velocity `v0` at time `t_final`.
pub fn geodesic_endpoint(
    m: &Metric,
    y0: &[f64],
    v0: &[f64],
    t_final: f64,
    steps: usize,
) -> Result<GeodesicState> {
    validate_flow(m, y0, v0, t_final, steps)?;
    let h = t_final / steps as f64;
    let (mut a, mut z) = (y0.to_vec(), v0.to_vec());
    for i in 0..steps {
        rk4_step(m, &mut a, &mut z, h)?;
        if a.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::GeodesicBlowup {
                t: (i + 1) as f64 * h,
            });
        }
    }
    Ok(GeodesicState {
        t: t_final,
        position: a,
        velocity: z,
    })
}

/// Full trajectory, `steps + 1` states including the initial one.
pub fn geodesic_flow(
    m: &Metric,
    y0: &[f64],
    v0: &[f64],
    t_final: f64,
    steps: usize,
) -> Result<Vec<GeodesicState>> {
    validate_flow(m, y0, v0, t_final, steps)?;
    let h = t_final / steps as f64;
    let (mut a, mut z) = (y0.to_vec(), v0.to_vec());
    let mut out = Vec::with_capacity(steps + 1);
    out.push(GeodesicState {
        t: 0.0,
        position: a.clone(),
        velocity: z.clone(),
    });
    for i in 0..steps {
        rk4_step(m, &mut a, &mut z, h)?;
        let t = (i + 1) as f64 * h;
        if a.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::GeodesicBlowup { t });
        }
        out.push(GeodesicState {
            t,
            position: a.clone(),
            velocity: z.clone(),
        });
    }
    Ok(out)
}

/// Max relative change of `g(Z, Z)` along a trajectory.
pub fn energy_drift(m: &Metric, trajectory: &[GeodesicState]) -> f64 {
    let e0 = m.energy(&trajectory[0].position, &trajectory[0].velocity);
    trajectory
        .iter()
        .map(|s| (m.energy(&s.position, &s.velocity) - e0).abs() / e0.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

pub fn write_trajectory_csv<W: Write>(trajectory: &[GeodesicState], out: W) -> Result<()> {
    let d = trajectory.first().map_or(0, |s| s.position.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|i| format!("alpha_{i}")));
    header.extend((0..d).map(|i| format!("z_{i}")));
    w.write_record(&header)?;
    for s in trajectory {
        let row: Vec<String> = std::iter::once(s.t)
            .chain(s.position.iter().copied())
            .chain(s.velocity.iter().copied())
            .map(|v| format!("{v:e}"))
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn point_of(f: &GridFunction, p: usize) -> Vec<f64> {
    (0..f.components()).map(|c| f.value(p, c)).collect()
}

/// `alpha(t; Y)`: the time-`t` geodesic map applied pointwise to chart points `f`
/// with initial velocities `y`.
pub fn exp_field_at(
    m: &Metric,
    f: &GridFunction,
    y: &GridFunction,
    t: f64,
    steps: usize,
) -> Result<GridFunction> {
    f.check_same_shape(y)?;
    if f.components() != m.dim() {
        return Err(Error::SpecMismatch(format!(
            "field has {} components, metric dimension is {}",
            f.components(),
            m.dim()
        )));
    }
    let spec = f.spec();
    let d = m.dim();
    let ends = (0..spec.len())
        .into_par_iter()
        .map(|p| geodesic_endpoint(m, &point_of(f, p), &point_of(y, p), t, steps))
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; spec.len() * d];
    for (p, e) in ends.iter().enumerate() {
        for c in 0..d {
            values[c * spec.len() + p] = e.position[c];
        }
    }
    GridFunction::new(spec, d, values)
}

/// `alpha(1; Y)`.
pub fn exp_field(
    m: &Metric,
    f: &GridFunction,
    y: &GridFunction,
    steps: usize,
) -> Result<GridFunction> {
    exp_field_at(m, f, y, 1.0, steps)
}

/// Determinant of `d_v exp_y(v)` by central differences; a sign change or
/// vanishing value signals that `alpha(1; .)` is no longer locally invertible.
pub fn exp_jacobian_det(m: &Metric, y: &[f64], v: &[f64], steps: usize) -> Result<f64> {
    let d = m.dim();
    let h = 1e-5;
    let mut jac = vec![0.0; d * d];
    let mut vp = v.to_vec();
    for j in 0..d {
        vp[j] = v[j] + h;
        let plus = geodesic_endpoint(m, y, &vp, 1.0, steps)?.position;
        vp[j] = v[j] - h;
        let minus = geodesic_endpoint(m, y, &vp, 1.0, steps)?.position;
        vp[j] = v[j];
        for i in 0..d {
            jac[i * d + j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(crate::diffeo::det(d, &jac))
}

/// Max grid discrepancy between `alpha(lambda; Y)` and `alpha(1; lambda Y)` for each `lambda`.
pub fn scaling_check(
    m: &Metric,
    f: &GridFunction,
    y: &GridFunction,
    lambdas: &[f64],
    steps: usize,
    tol: f64,
) -> Result<SuiteReport> {
    let started = Instant::now();
    let mut report = SuiteReport::new("geodesic-scaling")
        .param("lambdas", lambdas)
        .param("steps", steps);
    for &l in lambdas {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {l} is outside [0, 1]"
            )));
        }
        let a = exp_field_at(m, f, y, l, steps)?;
        let b = exp_field(m, f, &y.scale(l), steps)?;
        let diff = a.max_abs_diff(&b)?;
        report.record(diff);
        report.check_upper(&format!("scaling lambda={l}"), diff, tol);
    }
    Ok(report.finish(started))
}

/// `||(alpha(1; eps Y) - f)/eps - Y||_0` for each `eps`, with successive error
/// ratios required to lie in `ratio_range`. Errors below `1e-12 (1 + ||Y||_0)`
/// count as exact and skip the ratio test.
pub fn d0exp_check(
    m: &Metric,
    f: &GridFunction,
    y: &GridFunction,
    eps: &[f64],
    steps: usize,
    ratio_range: (f64, f64),
) -> Result<SuiteReport> {
    let started = Instant::now();
    let mut report = SuiteReport::new("geodesic-d0exp")
        .param("eps", eps)
        .param("steps", steps);
    let mut errors = Vec::new();
    for &e in eps {
        let moved = exp_field(m, f, &y.scale(e), steps)?;
        let err = moved.sub(f)?.scale(1.0 / e).sub(y)?.l2_norm();
        report.record(err);
        errors.push(err);
    }
    let exact = 1e-12 * (1.0 + y.l2_norm());
    if errors.iter().all(|&e| e <= exact) {
        report.note("first-order error vanishes to rounding; ratio test skipped");
        report.check_true("d0 exp = id exactly", true);
    } else {
        for w in errors.windows(2) {
            report.check_range(
                "error ratio per eps halving",
                w[0] / w[1],
                Some(ratio_range.0),
                Some(ratio_range.1),
            );
        }
    }
    Ok(report.finish(started))
}

/// Position errors at `t = 1` against a reference run with `reference_steps`,
/// and the fitted order in the step size.
pub fn rk4_order(
    m: &Metric,
    y0: &[f64],
    v0: &[f64],
    steps: &[usize],
    reference_steps: usize,
) -> Result<(Vec<f64>, f64)> {
    let reference = geodesic_endpoint(m, y0, v0, 1.0, reference_steps)?.position;
    let errors = steps
        .iter()
        .map(|&s| {
            let p = geodesic_endpoint(m, y0, v0, 1.0, s)?.position;
            Ok(p.iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let hs: Vec<f64> = steps.iter().map(|&s| 1.0 / s as f64).collect();
    Ok((errors.clone(), loglog_slope(&hs, &errors)))
}

/// Parameters of the geodesic suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicSuiteParams {
    pub grid: usize,
    pub seed: u64,
    pub steps: usize,
    pub amplitude: f64,
    /// Sup of the random initial velocities.
    pub velocity_scale: f64,
    pub lambdas: Vec<f64>,
    pub eps: Vec<f64>,
    pub flat_tol: f64,
    pub scaling_tol: f64,
    pub energy_tol: f64,
    pub ratio_range: (f64, f64),
    pub order_range: (f64, f64),
}

impl Default for GeodesicSuiteParams {
    fn default() -> Self {
        Self {
            grid: 16,
            seed: 23,
            steps: DEFAULT_STEPS,
            amplitude: 0.2,
            velocity_scale: 0.3,
            lambdas: vec![0.0, 0.25, 0.5, 1.0],
            eps: vec![1e-2, 5e-3, 2.5e-3],
            flat_tol: 1e-12,
            scaling_tol: 1e-8,
            energy_tol: 1e-8,
            ratio_range: (1.7, 2.3),
            order_range: (3.7, 4.3),
        }
    }
}

/// Random chart data on a `grid x grid` lattice in `T^2`: chart points are the
/// lattice points, velocities are uniform in `[-scale, scale]^2`.
pub fn random_initial_field(
    grid: usize,
    seed: u64,
    scale: f64,
) -> Result<(GridFunction, GridFunction)> {
    use rand::Rng;
    let spec = crate::grid::GridSpec::new(2, grid)?;
    let f = GridFunction::from_vector_fn(spec, 2, |x, out| out.copy_from_slice(x))?;
    let mut rng = trial_rng(seed, 0);
    let values: Vec<f64> = (0..spec.len() * 2)
        .map(|_| rng.gen_range(-scale..=scale))
        .collect();
    Ok((f, GridFunction::new(spec, 2, values)?))
}

/// Flat exactness, scaling law, `d_0 exp = id`, energy conservation and RK4 order.
pub fn geodesic_suite(params: &GeodesicSuiteParams) -> Result<SuiteReport> {
    let started = Instant::now();
    let mut report = SuiteReport::new("geodesic")
        .param("grid", params.grid)
        .param("seed", params.seed)
        .param("steps", params.steps)
        .param("amplitude", params.amplitude)
        .param("velocity_scale", params.velocity_scale);
    let (f, y) = random_initial_field(params.grid, params.seed, params.velocity_scale)?;
    let conformal = Metric::conformal_2d(params.amplitude);

    let flat = Metric::flat(2);
    let flat_err = exp_field(&flat, &f, &y, params.steps)?.max_abs_diff(&f.add(&y)?)?;
    report.record(flat_err);
    report.check_upper(
        "flat metric: alpha(1; Y) = f + Y",
        flat_err,
        params.flat_tol,
    );
    let still = exp_field(
        &conformal,
        &f,
        &GridFunction::zeros(f.spec(), 2),
        params.steps,
    )?
    .max_abs_diff(&f)?;
    report.check_upper("Y = 0 is stationary", still, 0.0);

    let scaling = scaling_check(
        &conformal,
        &f,
        &y,
        &params.lambdas,
        params.steps,
        params.scaling_tol,
    )?;
    let worst_scaling = scaling.max.unwrap_or(0.0);
    report.record(worst_scaling);
    report.check_upper(
        "scaling law alpha(l; Y) = alpha(1; l Y)",
        worst_scaling,
        params.scaling_tol,
    );

    let d0 = d0exp_check(
        &conformal,
        &f,
        &y,
        &params.eps,
        params.steps,
        params.ratio_range,
    )?;
    report.checks.extend(d0.checks);

    let mut drift: f64 = 0.0;
    for p in 0..f.spec().len() {
        let traj = geodesic_flow(
            &conformal,
            &point_of(&f, p),
            &point_of(&y, p),
            1.0,
            params.steps,
        )?;
        drift = drift.max(energy_drift(&conformal, &traj));
    }
    let line = geodesic_flow(
        &Metric::exp_conformal_1d(),
        &[0.0],
        &[1.0],
        1.0,
        params.steps,
    )?;
    drift = drift.max(energy_drift(&Metric::exp_conformal_1d(), &line));
    report.record(drift);
    report.check_upper("relative energy drift", drift, params.energy_tol);

    let (errors, order) = rk4_order(
        &conformal,
        &[0.1, 0.3],
        &[0.8, -0.5],
        &[16, 32, 64, 128],
        8192,
    )?;
    let mut extra = std::collections::BTreeMap::new();
    for (i, e) in errors.iter().enumerate() {
        extra.insert(format!("error_{i}"), *e);
    }
    report.record_with(order, extra);
    report.slope = Some(order);
    report.check_range(
        "RK4 order",
        order,
        Some(params.order_range.0),
        Some(params.order_range.1),
    );

    let mut min_det = f64::INFINITY;
    for p in 0..f.spec().len() {
        min_det = min_det.min(exp_jacobian_det(
            &conformal,
            &point_of(&f, p),
            &point_of(&y, p),
            params.steps,
        )?);
    }
    report.set_param("min_exp_jacobian_det", min_det);
    if min_det <= 0.0 {
        report.note("alpha(1; .) is not locally invertible at some sampled velocity");
    }
    Ok(report.finish(started))
}
