//! Differential structure of composition `mu(u, phi) = u o phi` and inversion.
//!
//! Perturbations of `u` are spectra, perturbations of `phi` are grid vector
//! fields with `n` components. Products go through the dealiased `multiply`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::multiply_many;
use crate::diffeo::{compose_function, invert, random_diffeo, Diffeo, InvertOptions};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::norms::{hs_norm_fourier, multi_factorial, multi_indices};
use crate::random::{default_decay_margin, trial_rng, FieldSampler};
use crate::report::{loglog_slope, SuiteReport};
use crate::spectrum::{forward_transform, Spectrum};

/// Node count for the `t`-integrals in the remainders.
pub const QUADRATURE_NODES: usize = 16;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

fn check_perturbation(u: &Spectrum, phi: &Diffeo, dphi: &GridFunction) -> Result<()> {
    if u.spec() != phi.spec() || dphi.spec() != phi.spec() {
        return Err(Error::SpecMismatch(
            "perturbation data live on different grids".into(),
        ));
    }
    if dphi.components() != phi.dim() {
        return Err(Error::SpecMismatch(format!(
            "delta phi has {} components, expected {}",
            dphi.components(),
            phi.dim()
        )));
    }
    Ok(())
}

/// `coef * base * dphi^alpha`.
fn monomial_term(
    coef: f64,
    base: &GridFunction,
    dphi: &[GridFunction],
    alpha: &[usize],
) -> Result<GridFunction> {
    let mut factors = vec![base];
    for (i, &a) in alpha.iter().enumerate() {
        for _ in 0..a {
            factors.push(&dphi[i]);
        }
    }
    let product = if factors.len() == 1 {
        base.clone()
    } else {
        multiply_many(&factors)?
    };
    Ok(product.scale(coef))
}

fn split(dphi: &GridFunction) -> Vec<GridFunction> {
    (0..dphi.components())
        .map(|i| dphi.component_fn(i))
        .collect()
}

/// `eta_k(u, phi)(du, dphi)^k`, the k-th derivative of `t -> (u + t du) o (phi + t dphi)` at 0.
pub fn eta_k(
    u: &Spectrum,
    phi: &Diffeo,
    du: &Spectrum,
    dphi: &GridFunction,
    k: usize,
) -> Result<GridFunction> {
    if k < 1 {
        return Err(Error::InvalidParameter("eta_k needs k >= 1".into()));
    }
    check_perturbation(u, phi, dphi)?;
    if du.components() != u.components() || du.spec() != u.spec() {
        return Err(Error::SpecMismatch("u and delta u differ in shape".into()));
    }
    let n = phi.dim();
    let parts = split(dphi);
    let kf = factorial(k);
    let mut acc = GridFunction::zeros(u.spec(), u.components());
    for alpha in multi_indices(n, k) {
        let d = compose_function(&u.derivative(&alpha)?, phi)?;
        acc = acc.add(&monomial_term(
            kf / multi_factorial(&alpha),
            &d,
            &parts,
            &alpha,
        )?)?;
    }
    for alpha in multi_indices(n, k - 1) {
        let d = compose_function(&du.derivative(&alpha)?, phi)?;
        acc = acc.add(&monomial_term(
            kf / multi_factorial(&alpha),
            &d,
            &parts,
            &alpha,
        )?)?;
    }
    Ok(acc)
}

/// The symmetric bilinear form behind `eta_2`, written slot by slot:
/// `B(a, b) = d^2u(phi)(dphi_a, dphi_b) + du_a'(phi) dphi_b + du_b'(phi) dphi_a`.
pub fn eta2_bilinear(
    u: &Spectrum,
    phi: &Diffeo,
    a: (&Spectrum, &GridFunction),
    b: (&Spectrum, &GridFunction),
) -> Result<GridFunction> {
    check_perturbation(u, phi, a.1)?;
    check_perturbation(u, phi, b.1)?;
    let n = phi.dim();
    let mut acc = GridFunction::zeros(u.spec(), u.components());
    for i in 0..n {
        let ai = a.1.component_fn(i);
        let bi = b.1.component_fn(i);
        for j in 0..n {
            let mut alpha = vec![0usize; n];
            alpha[i] += 1;
            alpha[j] += 1;
            let h = compose_function(&u.derivative(&alpha)?, phi)?;
            let bj = b.1.component_fn(j);
            acc = acc.add(&multiply_many(&[&h, &ai, &bj])?)?;
        }
        let mut e = vec![0usize; n];
        e[i] = 1;
        let da = compose_function(&a.0.derivative(&e)?, phi)?;
        let db = compose_function(&b.0.derivative(&e)?, phi)?;
        acc = acc.add(&multiply_many(&[&da, &bi])?)?;
        acc = acc.add(&multiply_many(&[&db, &ai])?)?;
    }
    Ok(acc)
}

/// `phi + t dphi` at each quadrature node, each certified.
fn node_maps(phi: &Diffeo, dphi: &GridFunction) -> Result<(Vec<f64>, Vec<f64>, Vec<Diffeo>)> {
    let (t, w) = gauss_legendre(QUADRATURE_NODES);
    let delta = forward_transform(dphi)?;
    let maps = t
        .par_iter()
        .map(|&tq| phi.perturbed(&delta, tq))
        .collect::<Result<Vec<_>>>()?;
    Ok((t, w, maps))
}

/// Shared body of `R1` (with the base value subtracted) and `R2` (without).
fn remainder(
    f: &Spectrum,
    phi: &Diffeo,
    dphi: &GridFunction,
    r: usize,
    subtract_base: bool,
) -> Result<GridFunction> {
    if r < 1 {
        return Err(Error::InvalidParameter(
            "remainder order must be >= 1".into(),
        ));
    }
    check_perturbation(f, phi, dphi)?;
    let n = phi.dim();
    let parts = split(dphi);
    let (t, w, maps) = node_maps(phi, dphi)?;
    let mut acc = GridFunction::zeros(f.spec(), f.components());
    for alpha in multi_indices(n, r) {
        let d = f.derivative(&alpha)?;
        let base = if subtract_base {
            Some(compose_function(&d, phi)?)
        } else {
            None
        };
        let samples = maps
            .par_iter()
            .map(|m| compose_function(&d, m))
            .collect::<Result<Vec<_>>>()?;
        let mut integral = GridFunction::zeros(f.spec(), f.components());
        for q in 0..t.len() {
            let kernel = w[q] * (1.0 - t[q]).powi(r as i32 - 1);
            let sample = match &base {
                Some(b) => samples[q].sub(b)?,
                None => samples[q].clone(),
            };
            integral = integral.add(&sample.scale(kernel))?;
        }
        acc = acc.add(&monomial_term(
            r as f64 / multi_factorial(&alpha),
            &integral,
            &parts,
            &alpha,
        )?)?;
    }
    Ok(acc)
}

/// `sum_{|a|=r} r/a! int_0^1 (1-t)^{r-1} [(d^a u)(phi + t dphi) - (d^a u)(phi)] dt dphi^a`.
pub fn remainder_r1(
    u: &Spectrum,
    phi: &Diffeo,
    dphi: &GridFunction,
    r: usize,
) -> Result<GridFunction> {
    remainder(u, phi, dphi, r, true)
}

/// `sum_{|a|=r} r/a! int_0^1 (1-t)^{r-1} (d^a du)(phi + t dphi) dt dphi^a`.
pub fn remainder_r2(
    du: &Spectrum,
    phi: &Diffeo,
    dphi: &GridFunction,
    r: usize,
) -> Result<GridFunction> {
    remainder(du, phi, dphi, r, false)
}

/// `(u + du) o (phi + dphi) - [u o phi + sum_k eta_k / k! + R1 + R2]`, max over the grid.
pub fn taylor_residual(
    u: &Spectrum,
    phi: &Diffeo,
    du: &Spectrum,
    dphi: &GridFunction,
    r: usize,
) -> Result<f64> {
    check_perturbation(u, phi, dphi)?;
    let moved = phi.perturbed(&forward_transform(dphi)?, 1.0)?;
    let lhs = compose_function(&u.add(du)?, &moved)?;
    let mut rhs = compose_function(u, phi)?;
    for k in 1..=r {
        rhs = rhs.add(&eta_k(u, phi, du, dphi, k)?.scale(1.0 / factorial(k)))?;
    }
    rhs = rhs.add(&remainder_r1(u, phi, dphi, r)?)?;
    rhs = rhs.add(&remainder_r2(du, phi, dphi, r)?)?;
    lhs.max_abs_diff(&rhs)
}

pub fn taylor_identity_check(
    u: &Spectrum,
    phi: &Diffeo,
    du: &Spectrum,
    dphi: &GridFunction,
    r: usize,
    s: f64,
) -> Result<SuiteReport> {
    let started = Instant::now();
    let residual = taylor_residual(u, phi, du, dphi, r)?;
    let tol = 1e-7 * (1.0 + hs_norm_fourier(u, s + r as f64));
    let mut report = SuiteReport::new("taylor-identity")
        .param("r", r)
        .param("s", s)
        .param("grid", u.spec().size());
    report.record(residual);
    report.bound = Some(tol);
    report.check_upper(&format!("identity residual r={r}"), residual, tol);
    Ok(report.finish(started))
}

/// Remainder norms along a decreasing sequence of perturbation scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorProbe {
    pub order: usize,
    pub scales: Vec<f64>,
    pub remainders: Vec<f64>,
    /// Log-log slope of remainder against scale; `None` when every remainder vanishes.
    pub slope: Option<f64>,
    pub monotone: bool,
}

impl TaylorProbe {
    pub fn degenerate(&self) -> bool {
        self.slope.is_none()
    }

    pub fn passes(&self, margin: f64) -> bool {
        match self.slope {
            None => true,
            Some(s) => self.monotone && s.is_finite() && s >= self.order as f64 + margin,
        }
    }
}

/// `2^{-m}` for `m = 1..=count`.
pub fn default_scales(count: usize) -> Vec<f64> {
    (1..=count as i32).map(|m| 2f64.powi(-m)).collect()
}

/// `||R(u, phi, eps du, eps dphi)||_s` for each scale.
pub fn remainder_order_probe(
    u: &Spectrum,
    phi: &Diffeo,
    du_dir: &Spectrum,
    dphi_dir: &GridFunction,
    r: usize,
    scales: &[f64],
    s: f64,
) -> Result<TaylorProbe> {
    if scales.len() < 2
        || scales.windows(2).any(|w| !(w[1] < w[0]))
        || scales.iter().any(|&e| !(e > 0.0))
    {
        return Err(Error::InvalidParameter(
            "scales must be positive and strictly decreasing".into(),
        ));
    }
    let remainders = scales
        .iter()
        .map(|&eps| {
            let dphi = dphi_dir.scale(eps);
            let rem = remainder_r1(u, phi, &dphi, r)?.add(&remainder_r2(
                &du_dir.scale(eps),
                phi,
                &dphi,
                r,
            )?)?;
            Ok(hs_norm_fourier(&forward_transform(&rem)?, s))
        })
        .collect::<Result<Vec<f64>>>()?;
    let degenerate = remainders.iter().all(|&v| v == 0.0);
    let monotone = remainders.windows(2).all(|w| w[1] < w[0]);
    let slope = if degenerate {
        None
    } else if remainders.iter().all(|&v| v > 0.0) {
        Some(loglog_slope(scales, &remainders))
    } else {
        Some(f64::NAN)
    };
    Ok(TaylorProbe {
        order: r,
        scales: scales.to_vec(),
        remainders,
        slope,
        monotone,
    })
}

fn rescale_to(f: GridFunction, target: f64, measure: f64) -> GridFunction {
    if measure == 0.0 {
        f
    } else {
        f.scale(target / measure)
    }
}

/// Sup over the grid of the operator norm of the gradient of a vector field.
fn gradient_sup(f: &Spectrum) -> Result<f64> {
    let n = f.spec().dim();
    let mut grads = Vec::new();
    for i in 0..f.components() {
        for j in 0..n {
            grads.push(f.component(i).differentiate(j)?.to_grid());
        }
    }
    let mut sup: f64 = 0.0;
    for p in 0..f.spec().len() {
        let m: Vec<f64> = grads.iter().map(|g| g.value(p, 0)).collect();
        sup = sup.max(crate::diffeo::op_norm(n, &m));
    }
    Ok(sup)
}

/// Analytic (band-limited) data for one seed of the regression suite.
pub fn taylor_regression_data(
    spec: GridSpec,
    s: f64,
    r: usize,
    seed: u64,
) -> Result<(Spectrum, Diffeo, Spectrum, GridFunction)> {
    let n = spec.dim();
    let margin = default_decay_margin(n);
    let band = 4;
    let mut rng = trial_rng(seed, 0);
    let u = FieldSampler::new(s + r as f64, margin, 1)
        .with_band(band)
        .sample(spec, &mut rng)?;
    let phi = random_diffeo(spec, &mut rng, band, 0.3)?;
    let du = FieldSampler::new(s + r as f64, margin, 1)
        .with_band(band)
        .sample(spec, &mut rng)?;
    let du_grid = du.to_grid();
    let du_sup = du_grid.sup_norm();
    let du = forward_transform(&rescale_to(du_grid, 0.1, du_sup))?;
    let dphi = FieldSampler::new(s, margin, n)
        .with_band(band)
        .sample(spec, &mut rng)?;
    let sup = gradient_sup(&dphi)?;
    let dphi = rescale_to(dphi.to_grid(), 0.2, sup);
    Ok((u, phi, du, dphi))
}

/// Remainder-order slopes for each seed; pass means slope >= r + margin with a
/// monotone remainder sequence.
pub fn taylor_order_suite(
    spec: GridSpec,
    r: usize,
    s: f64,
    seeds: &[u64],
    scales: &[f64],
    margin: f64,
) -> Result<SuiteReport> {
    let started = Instant::now();
    let mut report = SuiteReport::new("taylor-order")
        .param("r", r)
        .param("s", s)
        .param("seeds", seeds)
        .param("grid", spec.size())
        .param("dim", spec.dim())
        .param("scales", scales);
    let mut slopes = Vec::new();
    for &seed in seeds {
        let (u, phi, du, dphi) = taylor_regression_data(spec, s, r, seed)?;
        let probe = remainder_order_probe(&u, &phi, &du, &dphi, r, scales, s)?;
        let slope = probe.slope.unwrap_or(f64::NAN);
        let mut extra = std::collections::BTreeMap::new();
        extra.insert("seed".to_string(), seed as f64);
        for (m, v) in probe.remainders.iter().enumerate() {
            extra.insert(format!("remainder_{m}"), *v);
        }
        report.record_with(slope, extra);
        report.check_true(
            &format!("remainders decrease (seed {seed})"),
            probe.monotone,
        );
        report.check_lower(&format!("slope (seed {seed})"), slope, r as f64 + margin);
        slopes.push(slope);
    }
    report.slope = slopes.iter().copied().reduce(f64::min);
    Ok(report.finish(started))
}

/// Identity residuals on the bundled data `u = sin 2 pi x`, `phi = x + 0.05 sin 2 pi x`,
/// `dphi = 0.01 cos 2 pi x`, `du = 0.01 cos 4 pi x`, for each order.
pub fn taylor_identity_suite(spec: GridSpec, orders: &[usize], s: f64) -> Result<SuiteReport> {
    use std::f64::consts::PI;
    let started = Instant::now();
    if spec.dim() != 1 {
        return Err(Error::InvalidParameter(
            "the bundled Taylor data live on T^1".into(),
        ));
    }
    let u = Spectrum::from_fn(spec, |x| (2.0 * PI * x[0]).sin())?;
    let phi = Diffeo::new(Spectrum::from_fn(spec, |x| 0.05 * (2.0 * PI * x[0]).sin())?)?;
    let du = Spectrum::from_fn(spec, |x| 0.01 * (4.0 * PI * x[0]).cos())?;
    let dphi = GridFunction::from_fn(spec, |x| 0.01 * (2.0 * PI * x[0]).cos())?;
    let mut report = SuiteReport::new("taylor-identity")
        .param("orders", orders)
        .param("s", s)
        .param("grid", spec.size());
    let tol = |r: usize| 1e-7 * (1.0 + hs_norm_fourier(&u, s + r as f64));
    for &r in orders {
        let res = taylor_residual(&u, &phi, &du, &dphi, r)?;
        report.record(res);
        report.check_upper(&format!("identity residual r={r}"), res, tol(r));
    }
    Ok(report.finish(started))
}

/// `d inv(phi)(dphi) = -((d phi)^{-1} dphi) o phi^{-1}`.
pub fn inv_differential(
    phi: &Diffeo,
    dphi: &GridFunction,
    opts: InvertOptions,
) -> Result<GridFunction> {
    let inv = invert(phi, opts)?;
    inv_differential_with(phi, &inv, dphi)
}

fn inv_differential_with(phi: &Diffeo, inv: &Diffeo, dphi: &GridFunction) -> Result<GridFunction> {
    check_perturbation(phi.displacement(), phi, dphi)?;
    let spec = phi.spec();
    let n = spec.dim();
    let mut w = vec![0.0; spec.len() * n];
    for p in 0..spec.len() {
        let a = phi.jacobian_at(p);
        let v: Vec<f64> = (0..n).map(|i| dphi.value(p, i)).collect();
        let sol = crate::diffeo::mat_vec(n, &crate::diffeo::inverse(n, &a), &v);
        for i in 0..n {
            w[i * spec.len() + p] = sol[i];
        }
    }
    let w = forward_transform(&GridFunction::new(spec, n, w)?)?;
    Ok(compose_function(&w, inv)?.scale(-1.0))
}

/// Central differences of `invert` against `inv_differential` at each `eps`, the
/// Richardson ratio of the first two errors, and the consistency residual
/// `(d phi o phi^{-1}) . d inv(dphi) + dphi o phi^{-1}`.
pub fn inv_differential_check(
    phi: &Diffeo,
    dphi: &GridFunction,
    eps: &[f64],
    opts: InvertOptions,
    ratio_range: (f64, f64),
) -> Result<SuiteReport> {
    let started = Instant::now();
    if eps.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two step sizes".into(),
        ));
    }
    let spec = phi.spec();
    let n = spec.dim();
    let inv = invert(phi, opts)?;
    let formula = inv_differential_with(phi, &inv, dphi)?;
    let delta = forward_transform(dphi)?;
    let mut report = SuiteReport::new("inverse-differential")
        .param("grid", spec.size())
        .param("eps", eps);
    let mut errors = Vec::new();
    for &e in eps {
        let plus = invert(&phi.perturbed(&delta, e)?, opts)?;
        let minus = invert(&phi.perturbed(&delta, -e)?, opts)?;
        let fd = plus
            .displacement_grid()
            .sub(minus.displacement_grid())?
            .scale(0.5 / e);
        let err = fd.max_abs_diff(&formula)?;
        report.record(err);
        errors.push(err);
    }
    let ratio = errors[0] / errors[1];
    report.constant = Some(ratio);
    report.check_range(
        "Richardson error ratio",
        ratio,
        Some(ratio_range.0),
        Some(ratio_range.1),
    );

    let images = inv.grid_images();
    let dphi_back = compose_function(&delta, &inv)?;
    let mut worst: f64 = 0.0;
    for p in 0..spec.len() {
        let loc = phi.local(&images[p * n..(p + 1) * n]);
        for i in 0..n {
            let mut v = dphi_back.value(p, i);
            for j in 0..n {
                let a = loc[n + i * n + j] + if i == j { 1.0 } else { 0.0 };
                v += a * formula.value(p, j);
            }
            worst = worst.max(v.abs());
        }
    }
    report.check_upper(
        "consistency (d phi o phi^-1) d inv + dphi o phi^-1",
        worst,
        1e-7,
    );
    Ok(report.finish(started))
}

/// `||f o phi - f o base||_s / (||f||_{s+1} ||phi - base||_s)`; `None` when `phi = base`.
pub fn lipschitz_ratio(f: &Spectrum, phi: &Diffeo, base: &Diffeo, s: f64) -> Result<Option<f64>> {
    let diff = forward_transform(&compose_function(f, phi)?.sub(&compose_function(f, base)?)?)?;
    let den = hs_norm_fourier(f, s + 1.0)
        * hs_norm_fourier(&phi.displacement().sub(base.displacement())?, s);
    if den == 0.0 {
        return Ok(None);
    }
    Ok(Some(hs_norm_fourier(&diff, s) / den))
}

/// Max Lipschitz ratio over random perturbations of `base` with `||h||_s = radius`.
pub fn lipschitz_envelope(
    f: &Spectrum,
    base: &Diffeo,
    radius: f64,
    trials: usize,
    seed: u64,
    s: f64,
) -> Result<f64> {
    let spec = base.spec();
    let n = spec.dim();
    let sampler = FieldSampler::new(s, default_decay_margin(n), n).with_band(4);
    let ratios = (0..trials)
        .into_par_iter()
        .map(|t| {
            let h = sampler.sample(spec, &mut trial_rng(seed, t as u64))?;
            let norm = hs_norm_fourier(&h, s);
            if norm == 0.0 {
                return Ok(None);
            }
            let phi = base.perturbed(&h, radius / norm)?;
            lipschitz_ratio(f, &phi, base, s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ratios.into_iter().flatten().fold(0.0, f64::max))
}

/// Lipschitz envelope at `radius` and `radius / 2`, on `spec` and on the grid
/// twice as fine; all four must agree within `stability`.
pub fn lipschitz_estimate_check(
    spec: GridSpec,
    s: f64,
    radius: f64,
    trials: usize,
    seed: u64,
    stability: f64,
) -> Result<SuiteReport> {
    let started = Instant::now();
    let mut report = SuiteReport::new("lipschitz")
        .param("grid", spec.size())
        .param("dim", spec.dim())
        .param("s", s)
        .param("radius", radius)
        .param("trials", trials)
        .param("seed", seed);
    let mut values = Vec::new();
    for size in [spec.size(), 2 * spec.size()] {
        let g = spec.with_size(size)?;
        let mut rng = trial_rng(seed, u64::MAX);
        let f = FieldSampler::new(s + 1.0, default_decay_margin(g.dim()), 1)
            .with_band(4)
            .sample(g, &mut rng)?;
        let base = random_diffeo(g, &mut rng, 4, 0.2)?;
        for rad in [radius, radius / 2.0] {
            let k = lipschitz_envelope(&f, &base, rad, trials, seed, s)?;
            let mut extra = std::collections::BTreeMap::new();
            extra.insert("grid".to_string(), size as f64);
            extra.insert("radius".to_string(), rad);
            report.record_with(k, extra);
            values.push(k);
        }
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    report.constant = Some(hi);
    report.check_true("envelope finite and positive", hi.is_finite() && lo > 0.0);
    report.check_upper("relative spread of the envelope", hi / lo - 1.0, stability);
    Ok(report.finish(started))
}

/// Left translation `phi -> psi_j o phi` against right translation `f -> f o phi`
/// along single modes `psi_j = c_j sin(2 pi 2^j x)` normalized in `H^s`.
///
/// `L_j = max_eps ||psi_j o phi_eps - psi_j o phi||_s / ||phi_eps - phi||_s` with
/// `phi_eps = phi + eps cos(2 pi x)`; `R_j = max_eps ||(f + eps psi_j) o phi - f o phi||_s / ||eps psi_j||_s`
/// with `f = sin(2 pi x)`. `L_j` must grow by `growth` per octave, `R_j` must
/// stay within `right_band` of `R_1`.
pub fn loss_of_derivative_probe(
    spec: GridSpec,
    s: f64,
    octaves: usize,
    eps: &[f64],
    growth: f64,
    right_band: f64,
) -> Result<SuiteReport> {
    use std::f64::consts::PI;
    let started = Instant::now();
    if spec.dim() != 1 {
        return Err(Error::InvalidParameter(
            "the roughness ladder is defined on T^1".into(),
        ));
    }
    if (1usize << octaves) >= spec.size() / 4 {
        return Err(Error::InvalidParameter(format!(
            "mode 2^{octaves} is not resolved after composition on N = {}",
            spec.size()
        )));
    }
    let phi = Diffeo::new(Spectrum::from_fn(spec, |x| 0.1 * (2.0 * PI * x[0]).sin())?)?;
    let h = Spectrum::from_fn(spec, |x| (2.0 * PI * x[0]).cos())?;
    let f = Spectrum::from_fn(spec, |x| (2.0 * PI * x[0]).sin())?;
    let f_phi = compose_function(&f, &phi)?;
    let moved = eps
        .iter()
        .map(|&e| phi.perturbed(&h, e))
        .collect::<Result<Vec<_>>>()?;
    let h_norm = hs_norm_fourier(&h, s);

    let mut report = SuiteReport::new("loss-of-derivative")
        .param("grid", spec.size())
        .param("s", s)
        .param("octaves", octaves)
        .param("eps", eps);
    let mut left = Vec::new();
    let mut right = Vec::new();
    for j in 1..=octaves {
        let k = (1u64 << j) as f64;
        let raw = Spectrum::from_fn(spec, |x| (2.0 * PI * k * x[0]).sin())?;
        let psi = raw.scale(1.0 / hs_norm_fourier(&raw, s));
        let base = compose_function(&psi, &phi)?;
        let mut lj: f64 = 0.0;
        let mut rj: f64 = 0.0;
        for (m, &e) in moved.iter().zip(eps) {
            let d = forward_transform(&compose_function(&psi, m)?.sub(&base)?)?;
            lj = lj.max(hs_norm_fourier(&d, s) / (e.abs() * h_norm));
            let g = compose_function(&f.axpy(e, &psi)?, &phi)?;
            let d = forward_transform(&g.sub(&f_phi)?)?;
            rj = rj.max(hs_norm_fourier(&d, s) / (e.abs() * hs_norm_fourier(&psi, s)));
        }
        let mut extra = std::collections::BTreeMap::new();
        extra.insert("frequency".to_string(), k);
        extra.insert("right".to_string(), rj);
        report.record_with(lj, extra);
        left.push(lj);
        right.push(rj);
    }
    for j in 1..left.len() {
        report.check_lower(
            &format!("left growth octave {}->{}", j, j + 1),
            left[j] / left[j - 1],
            growth,
        );
    }
    for (j, r) in right.iter().enumerate() {
        let rel = r / right[0] - 1.0;
        report.check_range(
            &format!("right quotient octave {} vs 1", j + 1),
            rel,
            Some(-right_band),
            Some(right_band),
        );
    }
    report.slope = Some(loglog_slope(
        &(1..=octaves)
            .map(|j| (1u64 << j) as f64)
            .collect::<Vec<_>>(),
        &left,
    ));
    Ok(report.finish(started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bundled(n: usize) -> (GridSpec, Spectrum, Diffeo) {
        let g = GridSpec::new(1, n).unwrap();
        let u = Spectrum::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        let phi =
            Diffeo::new(Spectrum::from_fn(g, |x| 0.05 * (2.0 * PI * x[0]).sin()).unwrap()).unwrap();
        (g, u, phi)
    }

    #[test]
    fn gauss_legendre_exact_on_polynomials() {
        let (t, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for p in [1, 5, 17, 31] {
            let q: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
        assert!(t.windows(2).all(|v| v[0] < v[1]));
    }

    #[test]
    fn eta_trivial_cases() {
        let (g, u, phi) = bundled(64);
        let zero_u = Spectrum::zeros(g, 1);
        let zero_phi = GridFunction::zeros(g, 1);
        for k in 1..=3 {
            assert_eq!(
                eta_k(&u, &phi, &zero_u, &zero_phi, k).unwrap().sup_norm(),
                0.0
            );
        }
        assert!(eta_k(&u, &phi, &zero_u, &zero_phi, 0).is_err());
        let du = Spectrum::from_fn(g, |x| (6.0 * PI * x[0]).cos()).unwrap();
        let e = eta_k(&u, &phi, &du, &zero_phi, 1).unwrap();
        let direct = compose_function(&du, &phi).unwrap();
        assert!(e.max_abs_diff(&direct).unwrap() < 1e-14);
    }

    #[test]
    fn eta_one_is_linear_in_du() {
        let (g, u, phi) = bundled(64);
        let zero_phi = GridFunction::zeros(g, 1);
        let a = Spectrum::from_fn(g, |x| (6.0 * PI * x[0]).cos()).unwrap();
        let b = Spectrum::from_fn(g, |x| (2.0 * PI * x[0]).sin() + 0.3).unwrap();
        let ea = eta_k(&u, &phi, &a, &zero_phi, 1).unwrap();
        let eb = eta_k(&u, &phi, &b, &zero_phi, 1).unwrap();
        let sum = eta_k(&u, &phi, &a.axpy(2.5, &b).unwrap(), &zero_phi, 1).unwrap();
        assert!(sum.max_abs_diff(&ea.add(&eb.scale(2.5)).unwrap()).unwrap() < 1e-10);
    }

    #[test]
    fn eta_one_matches_central_difference() {
        let (g, u, phi) = bundled(128);
        let dphi = GridFunction::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let zero_u = Spectrum::zeros(g, 1);
        let e1 = eta_k(&u, &phi, &zero_u, &dphi, 1).unwrap();
        let delta = forward_transform(&dphi).unwrap();
        let err = |h: f64| {
            let p = compose_function(&u, &phi.perturbed(&delta, h).unwrap()).unwrap();
            let m = compose_function(&u, &phi.perturbed(&delta, -h).unwrap()).unwrap();
            p.sub(&m).unwrap().scale(0.5 / h).max_abs_diff(&e1).unwrap()
        };
        let (a, b) = (err(1e-3), err(5e-4));
        assert!(a < 1e-3);
        assert!((a / b - 4.0).abs() < 0.2, "{a} {b}");
    }

    #[test]
    fn eta_two_symmetry_and_polarization() {
        let g = GridSpec::new(2, 16).unwrap();
        let u =
            Spectrum::from_fn(g, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()).unwrap();
        let phi = Diffeo::new(
            Spectrum::stack(&[
                &Spectrum::from_fn(g, |x| 0.03 * (2.0 * PI * x[1]).sin()).unwrap(),
                &Spectrum::from_fn(g, |x| 0.02 * (2.0 * PI * x[0]).cos()).unwrap(),
            ])
            .unwrap(),
        )
        .unwrap();
        let ua = Spectrum::from_fn(g, |x| 0.1 * (2.0 * PI * x[1]).sin()).unwrap();
        let ub = Spectrum::from_fn(g, |x| 0.2 * (2.0 * PI * x[0]).cos()).unwrap();
        let pa = GridFunction::from_vector_fn(g, 2, |x, out| {
            out[0] = 0.01 * (2.0 * PI * x[0]).cos();
            out[1] = 0.02;
        })
        .unwrap();
        let pb = GridFunction::from_vector_fn(g, 2, |x, out| {
            out[0] = -0.01;
            out[1] = 0.03 * (2.0 * PI * x[1]).sin();
        })
        .unwrap();
        let ab = eta2_bilinear(&u, &phi, (&ua, &pa), (&ub, &pb)).unwrap();
        let ba = eta2_bilinear(&u, &phi, (&ub, &pb), (&ua, &pa)).unwrap();
        assert!(ab.max_abs_diff(&ba).unwrap() < 1e-9);
        let aa = eta2_bilinear(&u, &phi, (&ua, &pa), (&ua, &pa)).unwrap();
        let eta_a = eta_k(&u, &phi, &ua, &pa, 2).unwrap();
        assert!(aa.max_abs_diff(&eta_a).unwrap() < 1e-9);
        let sum_u = ua.add(&ub).unwrap();
        let sum_p = pa.add(&pb).unwrap();
        let eta_ab = eta_k(&u, &phi, &sum_u, &sum_p, 2).unwrap();
        let eta_b = eta_k(&u, &phi, &ub, &pb, 2).unwrap();
        let polar = eta_ab.sub(&eta_a).unwrap().sub(&eta_b).unwrap().scale(0.5);
        assert!(polar.max_abs_diff(&ab).unwrap() < 1e-9);
    }

    #[test]
    fn remainders_vanish_without_perturbation() {
        let (g, u, phi) = bundled(64);
        let zero_phi = GridFunction::zeros(g, 1);
        let du = Spectrum::from_fn(g, |x| (4.0 * PI * x[0]).cos()).unwrap();
        assert_eq!(
            remainder_r1(&u, &phi, &zero_phi, 1).unwrap().sup_norm(),
            0.0
        );
        assert_eq!(
            remainder_r2(&du, &phi, &zero_phi, 2).unwrap().sup_norm(),
            0.0
        );
        let dphi = GridFunction::from_fn(g, |x| 0.01 * (2.0 * PI * x[0]).cos()).unwrap();
        assert_eq!(
            remainder_r2(&Spectrum::zeros(g, 1), &phi, &dphi, 1)
                .unwrap()
                .sup_norm(),
            0.0
        );
    }

    #[test]
    fn r1_defining_identity() {
        let (g, u, phi) = bundled(128);
        let dphi = GridFunction::from_fn(g, |x| 0.01 * (2.0 * PI * x[0]).cos()).unwrap();
        let moved = phi
            .perturbed(&forward_transform(&dphi).unwrap(), 1.0)
            .unwrap();
        let zero_u = Spectrum::zeros(g, 1);
        for r in 1..=2 {
            let mut expect = compose_function(&u, &moved)
                .unwrap()
                .sub(&compose_function(&u, &phi).unwrap())
                .unwrap();
            for k in 1..=r {
                expect = expect
                    .sub(
                        &eta_k(&u, &phi, &zero_u, &dphi, k)
                            .unwrap()
                            .scale(1.0 / factorial(k)),
                    )
                    .unwrap();
            }
            let r1 = remainder_r1(&u, &phi, &dphi, r).unwrap();
            assert!(r1.max_abs_diff(&expect).unwrap() < 1e-9, "r = {r}");
        }
    }

    #[test]
    fn taylor_identity_bundled() {
        let r = taylor_identity_suite(GridSpec::new(1, 256).unwrap(), &[1, 2], 2.0).unwrap();
        assert!(r.pass, "{:?}", r.failures());
        assert!(r.max.unwrap() < 1e-10);
    }

    #[test]
    fn order_probe_degenerate_and_slopes() {
        let (g, u, phi) = bundled(64);
        let zero = remainder_order_probe(
            &u,
            &phi,
            &Spectrum::zeros(g, 1),
            &GridFunction::zeros(g, 1),
            1,
            &default_scales(4),
            2.0,
        )
        .unwrap();
        assert!(zero.degenerate() && zero.passes(0.9));
        let dphi = GridFunction::from_fn(g, |x| 0.05 * (2.0 * PI * x[0]).cos()).unwrap();
        let du = Spectrum::from_fn(g, |x| 0.1 * (4.0 * PI * x[0]).sin()).unwrap();
        for r in 1..=2 {
            let p =
                remainder_order_probe(&u, &phi, &du, &dphi, r, &default_scales(8), 2.0).unwrap();
            let slope = p.slope.unwrap();
            assert!((slope - (r as f64 + 1.0)).abs() < 0.15, "r = {r}: {slope}");
            assert!(p.passes(0.9));
        }
    }

    #[test]
    fn inv_differential_trivial_cases() {
        let g = GridSpec::new(1, 64).unwrap();
        let dphi = GridFunction::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let id = Diffeo::identity(g);
        let d = inv_differential(&id, &dphi, InvertOptions::default()).unwrap();
        assert!(d.max_abs_diff(&dphi.scale(-1.0)).unwrap() < 1e-14);
        // dphi = d phi . v for constant v
        let phi =
            Diffeo::new(Spectrum::from_fn(g, |x| 0.1 * (2.0 * PI * x[0]).sin()).unwrap()).unwrap();
        let v = 0.7;
        let dphi = phi.jacobian().scale(v);
        let d = inv_differential(&phi, &dphi, InvertOptions::default()).unwrap();
        assert!(d.max_abs_diff(&GridFunction::constant(g, -v)).unwrap() < 1e-12);
    }

    #[test]
    fn inv_differential_richardson() {
        let g = GridSpec::new(1, 128).unwrap();
        let phi =
            Diffeo::new(Spectrum::from_fn(g, |x| 0.1 * (2.0 * PI * x[0]).sin()).unwrap()).unwrap();
        let dphi = GridFunction::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let r = inv_differential_check(
            &phi,
            &dphi,
            &[1e-3, 5e-4],
            InvertOptions::default(),
            (3.5, 4.5),
        )
        .unwrap();
        assert!(r.pass, "{:?} {:?}", r.failures(), r.constant);
    }

    #[test]
    fn lipschitz_zero_perturbation_skipped() {
        let (_, u, phi) = bundled(64);
        assert_eq!(lipschitz_ratio(&u, &phi, &phi, 2.0).unwrap(), None);
    }

    #[test]
    fn lipschitz_rigid_shift_closed_form() {
        // f = sin(2 pi x), shift by a: f(x + a) - f(x) is a single mode of
        // amplitude 2 |sin(pi a)|, the shift has constant displacement a
        let g = GridSpec::new(1, 64).unwrap();
        let f = Spectrum::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        let a = 0.01;
        let shifted = Diffeo::shift(g, &[a]).unwrap();
        let ratio = lipschitz_ratio(&f, &shifted, &Diffeo::identity(g), 1.0)
            .unwrap()
            .unwrap();
        let w = |s: f64| (1.0 + 4.0 * PI * PI).powf(s / 2.0);
        let expect = 2.0 * (PI * a).sin().abs() * w(1.0) / (w(2.0) * a);
        assert!((ratio - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn smooth_left_translation_bounded() {
        let g = GridSpec::new(1, 128).unwrap();
        let r = loss_of_derivative_probe(g, 2.0, 1, &[1e-3, 5e-4], 1.5, 0.2).unwrap();
        assert!(r.max.unwrap().is_finite());
    }
}
