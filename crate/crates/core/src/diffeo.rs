//! Orientation-preserving torus diffeomorphisms `phi = id + u`.
//!
//! A [`Diffeo`] is only constructed through certification: on a refined
//! evaluation grid the Jacobian determinant must stay above a floor, and the
//! map must be injective. On `T^1` a positive derivative already gives a
//! bijection of the circle. On `T^2` injectivity of a fresh displacement is
//! certified by the contraction test `sup |du|_op < 1`; this is sufficient, not
//! necessary, so some genuine diffeomorphisms are rejected. Inverses and
//! composites of certified maps inherit injectivity and only have their
//! Jacobian re-checked.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::random::FieldSampler;
use crate::report::SuiteReport;
use crate::spectrum::{forward_transform, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffeoOptions {
    /// Reject when `min det(d phi)` falls below this value.
    pub min_det_floor: f64,
    /// Refinement factor of the certification grid.
    pub refine: usize,
}

impl Default for DiffeoOptions {
    fn default() -> Self {
        Self {
            min_det_floor: 0.05,
            refine: 4,
        }
    }
}

/// Validity certificate recorded at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `inf det(d phi)` over the refined grid.
    pub min_det: f64,
    /// Where the infimum was attained.
    pub min_det_point: Vec<f64>,
    /// `sup |du|_op` over the refined grid.
    pub max_strain: f64,
    /// `sup |d phi|_op` over the refined grid.
    pub max_stretch: f64,
    /// Mean displacement per axis.
    pub mean_displacement: Vec<f64>,
    pub injectivity: Injectivity,
    pub options: DiffeoOptions,
}

/// What the injectivity claim of a certificate rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injectivity {
    /// `T^1`: positive derivative of a degree-one circle map.
    Monotone,
    /// `sup |du|_op < 1` on the refined grid.
    Contraction,
    /// Inverse or composite of certified maps.
    Inherited,
}

#[derive(Debug, Clone)]
pub struct Diffeo {
    displacement: Spectrum,
    displacement_grid: GridFunction,
    /// `d phi` on the base grid, row-major `n x n`: component `i * n + j` is `d_j phi_i`.
    jacobian: GridFunction,
    det: GridFunction,
    /// `[u_0, .., u_{n-1}, d_0 u_0, d_1 u_0, .., d_{n-1} u_{n-1}]`, for point evaluation.
    stacked: Spectrum,
    certificate: Certificate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvertOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for InvertOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            max_halvings: 5,
        }
    }
}

pub(crate) fn det(n: usize, a: &[f64]) -> f64 {
    match n {
        1 => a[0],
        _ => a[0] * a[3] - a[1] * a[2],
    }
}

pub(crate) fn inverse(n: usize, a: &[f64]) -> Vec<f64> {
    match n {
        1 => vec![1.0 / a[0]],
        _ => {
            let d = det(2, a);
            vec![a[3] / d, -a[1] / d, -a[2] / d, a[0] / d]
        }
    }
}

/// Spectral norm of an `n x n` row-major matrix.
pub(crate) fn op_norm(n: usize, a: &[f64]) -> f64 {
    match n {
        1 => a[0].abs(),
        _ => {
            let fro = a.iter().map(|v| v * v).sum::<f64>();
            let d = det(2, a);
            let disc = (fro * fro - 4.0 * d * d).max(0.0).sqrt();
            ((fro + disc) / 2.0).sqrt()
        }
    }
}

pub(crate) fn mat_vec(n: usize, a: &[f64], v: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum())
        .collect()
}

impl Diffeo {
    /// Certifies `id + u` with default options.
    pub fn new(displacement: Spectrum) -> Result<Self> {
        Self::with_options(displacement, DiffeoOptions::default())
    }

    pub fn with_options(displacement: Spectrum, options: DiffeoOptions) -> Result<Self> {
        let basis = if displacement.spec().dim() == 1 {
            Injectivity::Monotone
        } else {
            Injectivity::Contraction
        };
        Self::certify(displacement, options, basis)
    }

    /// Certification for maps whose injectivity is already known (inverses and
    /// composites of certified maps); only the Jacobian is checked.
    pub(crate) fn inherited(displacement: Spectrum, options: DiffeoOptions) -> Result<Self> {
        Self::certify(displacement, options, Injectivity::Inherited)
    }

    pub(crate) fn certify(
        displacement: Spectrum,
        options: DiffeoOptions,
        basis: Injectivity,
    ) -> Result<Self> {
        let spec = displacement.spec();
        let n = spec.dim();
        if displacement.components() != n {
            return Err(Error::SpecMismatch(format!(
                "displacement needs {n} components on a {n}-dimensional grid, got {}",
                displacement.components()
            )));
        }
        if options.refine == 0 || !(options.min_det_floor >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bad certification options {options:?}"
            )));
        }

        let mut parts = vec![displacement.clone()];
        for i in 0..n {
            for j in 0..n {
                parts.push(displacement.component(i).differentiate(j)?);
            }
        }
        let refs: Vec<&Spectrum> = parts.iter().collect();
        let stacked = Spectrum::stack(&refs)?;
        let grad = Spectrum::stack(&refs[1..])?;

        let fine = grad.refined_grid(options.refine)?;
        let fine_spec = fine.spec();
        let mut min_det = f64::INFINITY;
        let mut min_at = 0;
        let mut max_strain: f64 = 0.0;
        let mut max_stretch: f64 = 0.0;
        let mut du = vec![0.0; n * n];
        let mut a = vec![0.0; n * n];
        for p in 0..fine_spec.len() {
            for c in 0..n * n {
                du[c] = fine.value(p, c);
                a[c] = du[c] + if c % (n + 1) == 0 { 1.0 } else { 0.0 };
            }
            let d = det(n, &a);
            if d < min_det {
                min_det = d;
                min_at = p;
            }
            max_strain = max_strain.max(op_norm(n, &du));
            max_stretch = max_stretch.max(op_norm(n, &a));
        }
        let min_det_point = fine_spec.point(min_at)[..n].to_vec();
        if min_det <= 0.0 {
            return Err(Error::Orientation {
                point: min_det_point,
                det: min_det,
            });
        }
        if min_det < options.min_det_floor {
            return Err(Error::Degenerate {
                min_det,
                floor: options.min_det_floor,
            });
        }
        if basis == Injectivity::Contraction && max_strain >= 1.0 {
            return Err(Error::Injectivity {
                op_norm: max_strain,
            });
        }

        let displacement_grid = displacement.to_grid();
        let grad_grid = grad.to_grid();
        let len = spec.len();
        let mut jac = grad_grid.into_values();
        for i in 0..n {
            for v in &mut jac[(i * n + i) * len..(i * n + i + 1) * len] {
                *v += 1.0;
            }
        }
        let jacobian = GridFunction::new(spec, n * n, jac)?;
        let dets = (0..len)
            .map(|p| {
                let m: Vec<f64> = (0..n * n).map(|c| jacobian.value(p, c)).collect();
                det(n, &m)
            })
            .collect();
        let det_grid = GridFunction::new(spec, 1, dets)?;
        let mean_displacement = (0..n)
            .map(|i| displacement.coeff(i, &vec![0; n]).re)
            .collect();

        Ok(Self {
            displacement,
            displacement_grid,
            jacobian,
            det: det_grid,
            stacked,
            certificate: Certificate {
                min_det,
                min_det_point,
                max_strain,
                max_stretch,
                mean_displacement,
                injectivity: basis,
                options,
            },
        })
    }

    pub fn identity(spec: GridSpec) -> Self {
        Self::new(Spectrum::zeros(spec, spec.dim())).expect("the identity is certified")
    }

    /// Rigid translation `x -> x + a`.
    pub fn shift(spec: GridSpec, a: &[f64]) -> Result<Self> {
        let n = spec.dim();
        if a.len() != n {
            return Err(Error::InvalidParameter(format!("shift needs {n} entries")));
        }
        let values = a
            .iter()
            .flat_map(|&ai| std::iter::repeat_n(ai, spec.len()))
            .collect();
        Self::new(forward_transform(&GridFunction::new(spec, n, values)?)?)
    }

    /// Certifies the displacement given by grid values.
    pub fn from_displacement_grid(u: &GridFunction, options: DiffeoOptions) -> Result<Self> {
        Self::with_options(forward_transform(u)?, options)
    }

    pub fn spec(&self) -> GridSpec {
        self.displacement.spec()
    }

    pub fn dim(&self) -> usize {
        self.spec().dim()
    }

    pub fn displacement(&self) -> &Spectrum {
        &self.displacement
    }

    pub fn displacement_grid(&self) -> &GridFunction {
        &self.displacement_grid
    }

    pub fn jacobian(&self) -> &GridFunction {
        &self.jacobian
    }

    pub fn jacobian_at(&self, point: usize) -> Vec<f64> {
        let n = self.dim();
        (0..n * n).map(|c| self.jacobian.value(point, c)).collect()
    }

    pub fn det(&self) -> &GridFunction {
        &self.det
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn options(&self) -> DiffeoOptions {
        self.certificate.options
    }

    /// `phi(x_j) = x_j + u(x_j)` on the grid, lifted (not reduced mod 1).
    pub fn grid_images(&self) -> Vec<f64> {
        let spec = self.spec();
        let n = spec.dim();
        let mut out = Vec::with_capacity(spec.len() * n);
        for j in 0..spec.len() {
            let x = spec.point(j);
            for (i, xi) in x.iter().take(n).enumerate() {
                out.push(xi + self.displacement_grid.value(j, i));
            }
        }
        out
    }

    /// `u` and `du` at an arbitrary point: `n` displacement values followed by
    /// the row-major gradient.
    pub fn local(&self, x: &[f64]) -> Vec<f64> {
        self.stacked.evaluate_point(x)
    }

    /// `phi` at arbitrary points (lifted).
    pub fn apply(&self, points: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        let u = self.displacement.evaluate(points)?;
        let p = points.len() / n;
        let mut out = points.to_vec();
        for q in 0..p {
            for i in 0..n {
                out[q * n + i] += u[i * p + q];
            }
        }
        Ok(out)
    }

    /// `id + u + t * delta`, re-certified.
    pub fn perturbed(&self, delta: &Spectrum, t: f64) -> Result<Self> {
        Self::with_options(self.displacement.axpy(t, delta)?, self.options())
    }
}

/// Certifies `id + u` with default options.
pub fn make_diffeo(u: Spectrum) -> Result<Diffeo> {
    Diffeo::new(u)
}

/// `f o phi` on the grid, by trigonometric evaluation of `f` at `phi(x_j)`.
pub fn compose_function(f: &Spectrum, phi: &Diffeo) -> Result<GridFunction> {
    if f.spec() != phi.spec() {
        return Err(Error::SpecMismatch(
            "function and diffeomorphism live on different grids".into(),
        ));
    }
    let values = f.evaluate(&phi.grid_images())?;
    GridFunction::new(f.spec(), f.components(), values)
}

/// `phi o psi`, with displacement `u_phi o psi + u_psi`, re-certified.
pub fn compose_diffeo(phi: &Diffeo, psi: &Diffeo) -> Result<Diffeo> {
    let outer = compose_function(phi.displacement(), psi)?;
    let u = outer.add(psi.displacement_grid())?;
    Diffeo::inherited(forward_transform(&u)?, phi.options())
}

/// Pointwise Newton inversion on the grid.
pub fn invert(phi: &Diffeo, opts: InvertOptions) -> Result<Diffeo> {
    let spec = phi.spec();
    let n = spec.dim();
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidParameter(format!(
            "bad inversion options {opts:?}"
        )));
    }
    let solved: Vec<(Vec<f64>, f64, bool)> = (0..spec.len())
        .into_par_iter()
        .map(|j| {
            let y = &spec.point(j)[..n];
            newton_preimage(phi, y, opts)
        })
        .collect();

    let mut values = vec![0.0; spec.len() * n];
    for (j, (x, _, _)) in solved.iter().enumerate() {
        let y = spec.point(j);
        for i in 0..n {
            values[i * spec.len() + j] = x[i] - y[i];
        }
    }
    // non-converged points rank above every converged residual
    let (worst_at, worst) = solved
        .iter()
        .enumerate()
        .max_by(|a, b| (!a.1 .2, a.1 .1).partial_cmp(&(!b.1 .2, b.1 .1)).unwrap())
        .expect("grids are non-empty");
    if !worst.2 || worst.1 >= 10.0 * opts.tol {
        return Err(Error::NonConvergence {
            point: spec.point(worst_at)[..n].to_vec(),
            residual: worst.1,
        });
    }
    Diffeo::inherited(
        forward_transform(&GridFunction::new(spec, n, values)?)?,
        phi.options(),
    )
}

/// Solves `x + u(x) = y` for `x` near `y`; returns `(x, |residual|_inf, converged)`.
pub(crate) fn newton_preimage(
    phi: &Diffeo,
    y: &[f64],
    opts: InvertOptions,
) -> (Vec<f64>, f64, bool) {
    let n = y.len();
    let residual_at = |x: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let loc = phi.local(x);
        let r: Vec<f64> = (0..n).map(|i| x[i] + loc[i] - y[i]).collect();
        let mut jac = loc[n..].to_vec();
        for i in 0..n {
            jac[i * n + i] += 1.0;
        }
        (r, jac)
    };
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));

    let mut x = y.to_vec();
    let (mut r, mut jac) = residual_at(&x);
    for _ in 0..opts.max_iter {
        let step = mat_vec(n, &inverse(n, &jac), &r);
        let mut scale = 1.0;
        let mut accepted = None;
        for h in 0..=opts.max_halvings {
            let trial: Vec<f64> = (0..n).map(|i| x[i] - scale * step[i]).collect();
            let (rt, jt) = residual_at(&trial);
            if sup(&rt) <= sup(&r) || h == opts.max_halvings {
                accepted = Some((trial, rt, jt));
                break;
            }
            scale *= 0.5;
        }
        let (trial, rt, jt) = accepted.expect("the last halving is always accepted");
        let moved = scale * sup(&step);
        x = trial;
        r = rt;
        jac = jt;
        if moved < opts.tol {
            return (x, sup(&r), true);
        }
    }
    let res = sup(&r);
    (x, res, false)
}

/// Random smooth diffeomorphism: a band-limited displacement rescaled so that
/// `sup |du|_op` on the grid equals `strain`.
pub fn random_diffeo(
    spec: GridSpec,
    rng: &mut ChaCha8Rng,
    band: usize,
    strain: f64,
) -> Result<Diffeo> {
    let n = spec.dim();
    let margin = crate::random::default_decay_margin(n);
    let u = FieldSampler::new(1.0, margin, n)
        .with_band(band)
        .sample(spec, rng)?;
    let mut grads = Vec::new();
    for i in 0..n {
        for j in 0..n {
            grads.push(u.component(i).differentiate(j)?.to_grid());
        }
    }
    let mut sup: f64 = 0.0;
    let mut m = vec![0.0; n * n];
    for p in 0..spec.len() {
        for c in 0..n * n {
            m[c] = grads[c].value(p, 0);
        }
        sup = sup.max(op_norm(n, &m));
    }
    if sup == 0.0 {
        return Ok(Diffeo::identity(spec));
    }
    Diffeo::new(u.scale(strain / sup))
}

/// Compares the spectral derivative of `f o phi` with `(df o phi) . d phi`.
pub fn chain_rule_check(f: &Spectrum, phi: &Diffeo) -> Result<SuiteReport> {
    let started = Instant::now();
    let spec = phi.spec();
    let n = spec.dim();
    let len = spec.len();
    let composed = forward_transform(&compose_function(f, phi)?)?;
    let mut df_parts = Vec::with_capacity(n);
    for j in 0..n {
        df_parts.push(compose_function(&f.differentiate(j)?, phi)?);
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let lhs = composed.differentiate(i)?.to_grid();
        for c in 0..f.components() {
            for p in 0..len {
                let rhs: f64 = (0..n)
                    .map(|j| df_parts[j].value(p, c) * phi.jacobian.value(p, j * n + i))
                    .sum();
                worst = worst.max((lhs.value(p, c) - rhs).abs());
            }
        }
    }
    let f_norm = crate::norms::hs_norm_fourier(f, 2.0);
    let tol = 1e-6 * f_norm.max(f64::MIN_POSITIVE);
    let mut report = SuiteReport::new("chain-rule")
        .param("grid", spec.size())
        .param("dim", n);
    report.record(worst);
    report.check_upper("max |d(f o phi) - (df o phi) d phi|", worst, tol.max(1e-12));
    report.bound = Some(tol);
    Ok(report.finish(started))
}

/// Compares `d(phi^{-1} - id)` with `((d phi)^{-1} - I) o phi^{-1}`.
pub fn inverse_derivative_check(phi: &Diffeo, opts: InvertOptions) -> Result<SuiteReport> {
    let started = Instant::now();
    let inv = invert(phi, opts)?;
    let residual = inverse_derivative_residual(phi, &inv)?;
    let mut report = SuiteReport::new("inverse-derivative").param("grid", phi.spec().size());
    report.record(residual);
    report.check_upper("max |d(phi^-1) - (d phi)^-1 o phi^-1|", residual, 1e-6);
    report.bound = Some(1e-6);
    Ok(report.finish(started))
}

pub(crate) fn inverse_derivative_residual(phi: &Diffeo, inv: &Diffeo) -> Result<f64> {
    let spec = phi.spec();
    let n = spec.dim();
    let images = inv.grid_images();
    let mut worst: f64 = 0.0;
    for p in 0..spec.len() {
        let loc = phi.local(&images[p * n..(p + 1) * n]);
        let mut a = loc[n..].to_vec();
        for i in 0..n {
            a[i * n + i] += 1.0;
        }
        let ainv = inverse(n, &a);
        let lhs = inv.jacobian_at(p);
        for c in 0..n * n {
            worst = worst.max((lhs[c] - ainv[c]).abs());
        }
    }
    Ok(worst)
}

/// `max ||f o phi||_s / ||f||_s` over random `f` band-limited to `band`.
pub fn composition_envelope(
    phi: &Diffeo,
    s: f64,
    band: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let spec = phi.spec();
    let sampler =
        FieldSampler::new(s, crate::random::default_decay_margin(spec.dim()), 1).with_band(band);
    let ratios = (0..trials)
        .into_par_iter()
        .map(|t| {
            let f = sampler.sample(spec, &mut crate::random::trial_rng(seed, t as u64))?;
            let composed = forward_transform(&compose_function(&f, phi)?)?;
            Ok(crate::norms::hs_norm_fourier(&composed, s) / crate::norms::hs_norm_fourier(&f, s))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Envelope of `||f o phi||_s <= C ||f||_s` for `phi = x + 0.1 sin(2 pi x_1)`: on each
/// grid in `sizes` (same band-limited ensemble) and over random maps in a ball
/// around `phi`. All envelopes must lie within `stability` of the base value.
pub fn composition_bound_suite(
    dim: usize,
    sizes: &[usize],
    s: f64,
    trials: usize,
    seed: u64,
    ball: usize,
    stability: f64,
) -> Result<SuiteReport> {
    let started = Instant::now();
    let min_size = *sizes
        .iter()
        .min()
        .ok_or_else(|| Error::InvalidParameter("no grid sizes given".into()))?;
    let band = min_size / 4;
    let bump = |spec: GridSpec| -> Result<Diffeo> {
        let n = spec.dim();
        let parts = (0..n)
            .map(|i| {
                Spectrum::from_fn(spec, |x| {
                    if i == 0 {
                        0.1 * (2.0 * std::f64::consts::PI * x[0]).sin()
                    } else {
                        0.0
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Diffeo::new(Spectrum::stack(&parts.iter().collect::<Vec<_>>())?)
    };
    let mut report = SuiteReport::new("composition-bound")
        .param("dim", dim)
        .param("sizes", sizes)
        .param("s", s)
        .param("trials", trials)
        .param("seed", seed)
        .param("band", band)
        .param("ball", ball);
    let mut values = Vec::new();
    for &n in sizes {
        let phi = bump(GridSpec::new(dim, n)?)?;
        let c = composition_envelope(&phi, s, band, trials, seed)?;
        let mut extra = std::collections::BTreeMap::new();
        extra.insert("grid".to_string(), n as f64);
        extra.insert("min_det".to_string(), phi.certificate().min_det);
        report.record_with(c, extra);
        values.push(c);
    }
    let spec = GridSpec::new(dim, min_size)?;
    let base = bump(spec)?;
    for b in 0..ball {
        let mut rng = crate::random::trial_rng(seed, (1u64 << 32) + b as u64);
        let h = FieldSampler::new(1.0, crate::random::default_decay_margin(dim), dim)
            .with_band(4)
            .sample(spec, &mut rng)?;
        let scale = 0.02 / h.to_grid().sup_norm().max(f64::MIN_POSITIVE);
        let phi = base.perturbed(&h, scale)?;
        let c = composition_envelope(&phi, s, band, trials, seed)?;
        let mut extra = std::collections::BTreeMap::new();
        extra.insert("ball_member".to_string(), b as f64);
        extra.insert("min_det".to_string(), phi.certificate().min_det);
        report.record_with(c, extra);
        values.push(c);
    }
    let reference = values[0];
    let spread = values
        .iter()
        .map(|v| (v / reference - 1.0).abs())
        .fold(0.0, f64::max);
    report.constant = Some(values.iter().copied().fold(0.0, f64::max));
    report.check_true("envelope finite", values.iter().all(|v| v.is_finite()));
    report.check_upper("max relative deviation of C", spread, stability);
    Ok(report.finish(started))
}

/// Round trips `phi o phi^{-1}` and `phi^{-1} o phi`, chain-rule and
/// inverse-derivative residuals on random certified maps.
pub fn group_suite(
    spec: GridSpec,
    trials: usize,
    seed: u64,
    roundtrip_tol: f64,
    derivative_tol: f64,
) -> Result<SuiteReport> {
    let started = Instant::now();
    let opts = InvertOptions::default();
    let margin = crate::random::default_decay_margin(spec.dim());
    let rows = (0..trials)
        .map(|t| {
            let mut rng = crate::random::trial_rng(seed, t as u64);
            let strain = 0.1 + 0.4 * t as f64 / trials.max(1) as f64;
            let phi = random_diffeo(spec, &mut rng, 4, strain)?;
            let f = FieldSampler::new(2.0, margin, 1)
                .with_band(8)
                .sample(spec, &mut rng)?;
            let inv = invert(&phi, opts)?;
            let right = compose_diffeo(&phi, &inv)?.displacement_grid().sup_norm();
            let left = compose_diffeo(&inv, &phi)?.displacement_grid().sup_norm();
            let chain = chain_rule_check(&f, &phi)?.max.unwrap_or(f64::NAN);
            let inv_d = inverse_derivative_residual(&phi, &inv)?;
            Ok([strain, right.max(left), chain, inv_d])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = SuiteReport::new("group")
        .param("grid", spec.size())
        .param("dim", spec.dim())
        .param("trials", trials)
        .param("seed", seed);
    let mut worst = [0.0f64; 3];
    for row in &rows {
        let mut extra = std::collections::BTreeMap::new();
        extra.insert("strain".to_string(), row[0]);
        extra.insert("chain_rule".to_string(), row[2]);
        extra.insert("inverse_derivative".to_string(), row[3]);
        report.record_with(row[1], extra);
        for i in 0..3 {
            worst[i] = worst[i].max(row[i + 1]);
        }
    }
    report.check_upper(
        "max |phi o phi^-1 - id|, |phi^-1 o phi - id|",
        worst[0],
        roundtrip_tol,
    );
    report.check_upper("max chain-rule residual", worst[1], derivative_tol);
    report.check_upper("max inverse-derivative residual", worst[2], derivative_tol);
    if spec.dim() > 1 {
        report.note(
            "injectivity rests on sup |du|_op < 1, a sufficient and conservative certificate",
        );
    }
    Ok(report.finish(started))
}
