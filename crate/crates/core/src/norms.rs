//! Sobolev norms, seminorms and the certificates built on them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffeo::{compose_function, random_diffeo, Diffeo};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::random::{default_decay_margin, trial_rng, FieldSampler};
use crate::report::SuiteReport;
use crate::spectrum::{forward_transform, Spectrum, Truncation};

/// A Sobolev regularity index `s >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub fn new(s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Sobolev index {s} must be finite and >= 0"
            )));
        }
        Ok(Self(s))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `s > n/2`: continuous embedding into `C^0`, algebra property.
    pub fn embeds_continuously(self, dim: usize) -> bool {
        self.0 > dim as f64 / 2.0
    }

    /// `s > n/2 + 1`: the regime of the diffeomorphism group `D^s`.
    pub fn is_group_regime(self, dim: usize) -> bool {
        self.0 > dim as f64 / 2.0 + 1.0
    }

    /// Integer part and fractional remainder `lambda = s - floor(s)`.
    pub fn split(self) -> (u32, f64) {
        let fl = self.0.floor();
        (fl as u32, self.0 - fl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    Fourier,
    DerivativeSum,
    Slobodeckij,
    Sup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub norm_value: f64,
    pub method: NormMethod,
    pub params: BTreeMap<String, f64>,
}

/// Computes the norm of `f` named by `method`. `index` is `s` for the Fourier
/// norm, the integer order for the derivative sum, `lambda` in `(0, 1)` for the
/// Slobodeckij seminorm (`T^1` only) and `r` for the `C^r` norm.
pub fn compute_norm(f: &Spectrum, method: NormMethod, index: f64) -> Result<NormReport> {
    let integer = |name: &str| -> Result<u32> {
        if index >= 0.0 && index.fract() == 0.0 {
            Ok(index as u32)
        } else {
            Err(Error::InvalidParameter(format!(
                "{name} needs a non-negative integer order, got {index}"
            )))
        }
    };
    let (value, key) = match method {
        NormMethod::Fourier => (hs_norm_fourier(f, index), "s"),
        NormMethod::DerivativeSum => (
            hs_norm_derivative_spectral(f, integer("the derivative-sum norm")?)?,
            "s",
        ),
        NormMethod::Slobodeckij => (slobodeckij_seminorm(&f.to_grid(), index)?, "lambda"),
        NormMethod::Sup => (cr_norm_spectral(f, integer("the C^r norm")?)?, "r"),
    };
    let mut params = BTreeMap::new();
    params.insert(key.to_string(), index);
    params.insert("grid".to_string(), f.spec().size() as f64);
    params.insert("dim".to_string(), f.spec().dim() as f64);
    Ok(NormReport {
        norm_value: value,
        method,
        params,
    })
}

/// Fourier weight `(1 + |2 pi k|^2)`.
pub(crate) fn bracket(k: &[i64]) -> f64 {
    1.0 + k
        .iter()
        .map(|&v| (2.0 * PI * v as f64).powi(2))
        .sum::<f64>()
}

/// `(sum_k (1 + |2 pi k|^2)^s |f_k|^2)^{1/2}`, summed over components.
pub fn hs_norm_fourier(f: &Spectrum, s: f64) -> f64 {
    let spec = f.spec();
    let len = spec.len();
    let dim = spec.dim();
    let weights: Vec<f64> = (0..len)
        .map(|j| bracket(&spec.wavevector(j)[..dim]).powf(s))
        .collect();
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| weights[i % len] * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// All multi-indices of a given total order in `dim` variables.
pub fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    match dim {
        1 => vec![vec![order]],
        _ => (0..=order).rev().map(|a| vec![a, order - a]).collect(),
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// `alpha!` for a multi-index.
pub fn multi_factorial(alpha: &[usize]) -> f64 {
    alpha.iter().map(|&a| factorial(a)).product()
}

/// `(sum_{|alpha| <= s} ||d^alpha f||^2)^{1/2}` with spectral derivatives.
pub fn hs_norm_derivative(f: &GridFunction, s: u32) -> Result<f64> {
    let spectrum = forward_transform(f)?;
    hs_norm_derivative_spectral(&spectrum, s)
}

pub(crate) fn hs_norm_derivative_spectral(f: &Spectrum, s: u32) -> Result<f64> {
    let dim = f.spec().dim();
    let mut total = 0.0;
    for order in 0..=s as usize {
        for alpha in multi_indices(dim, order) {
            total += f.derivative(&alpha)?.l2_norm().powi(2);
        }
    }
    Ok(total.sqrt())
}

/// Periodic Slobodeckij seminorm on `T^1`:
/// `(sum_{i != j} |f_i - f_j|^2 / d(x_i, x_j)^{1 + 2 lambda} h^2)^{1/2}` with the
/// torus distance `d`; the singular diagonal cells are excluded.
pub fn slobodeckij_seminorm(f: &GridFunction, lambda: f64) -> Result<f64> {
    let spec = f.spec();
    if spec.dim() != 1 {
        return Err(Error::InvalidParameter(
            "the Slobodeckij seminorm is implemented on T^1 only".into(),
        ));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda = {lambda} must lie in (0, 1)"
        )));
    }
    let n = spec.size();
    let h = 1.0 / n as f64;
    let total: f64 = (1..n)
        .into_par_iter()
        .map(|lag| {
            let dist = lag.min(n - lag) as f64 * h;
            let mut diff2 = 0.0;
            for c in 0..f.components() {
                let v = f.component(c);
                for i in 0..n {
                    let d = v[i] - v[(i + lag) % n];
                    diff2 += d * d;
                }
            }
            diff2 / dist.powf(1.0 + 2.0 * lambda)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok((total * h * h).sqrt())
}

/// `max_{x_j, |alpha| <= r} |d^alpha f(x_j)|` over all components.
pub fn cr_norm(f: &GridFunction, r: u32) -> Result<f64> {
    let spectrum = forward_transform(f)?;
    cr_norm_spectral(&spectrum, r)
}

pub(crate) fn cr_norm_spectral(f: &Spectrum, r: u32) -> Result<f64> {
    let dim = f.spec().dim();
    let mut sup: f64 = 0.0;
    for order in 0..=r as usize {
        for alpha in multi_indices(dim, order) {
            sup = sup.max(f.derivative(&alpha)?.to_grid().sup_norm());
        }
    }
    Ok(sup)
}

/// Largest multinomial coefficient of `(1 + xi_1^2 + .. + xi_n^2)^s`; its square
/// root bounds the ratio of the Fourier norm to the derivative-sum norm.
pub fn multinomial_bound(dim: usize, s: u32) -> f64 {
    let s = s as usize;
    let mut best: f64 = 1.0;
    match dim {
        1 => {
            for a in 0..=s {
                best = best.max(factorial(s) / (factorial(a) * factorial(s - a)));
            }
        }
        _ => {
            for a in 0..=s {
                for b in 0..=(s - a) {
                    let c = s - a - b;
                    best = best.max(factorial(s) / (factorial(a) * factorial(b) * factorial(c)));
                }
            }
        }
    }
    best.sqrt()
}

/// `(sum_k (1 + |2 pi k|^2)^{-s})^{1/2}` over the grid's wavevectors: a
/// Cauchy-Schwarz bound for `||d^alpha f||_{C^0} / ||f||_{s + |alpha|}` on that grid.
pub fn embedding_constant(spec: GridSpec, s: f64) -> f64 {
    let dim = spec.dim();
    (0..spec.len())
        .map(|j| bracket(&spec.wavevector(j)[..dim]).powf(-s))
        .sum::<f64>()
        .sqrt()
}

/// Upper bound for the neglected squared tail `sum_{|k|_inf > N/2} (1 + |2 pi k|^2)^{-s}`.
pub fn embedding_tail_bound(spec: GridSpec, s: f64) -> f64 {
    let m = spec.size() as f64 / 2.0;
    let c = (4.0 * PI * PI).powf(-s);
    match spec.dim() {
        // 2 sum_{k > m} k^{-2s} <= 2 int_{m}^inf k^{-2s} dk
        1 => 2.0 * c * m.powf(1.0 - 2.0 * s) / (2.0 * s - 1.0),
        // shells |k|_inf = j hold 8j points with |k| >= j
        _ => 8.0 * c * m.powf(2.0 - 2.0 * s) / (2.0 * s - 2.0).max(f64::MIN_POSITIVE),
    }
}

fn field_sampler(spec: GridSpec, s: f64) -> FieldSampler {
    FieldSampler::new(s, default_decay_margin(spec.dim()), 1)
}

/// Checks `1 <= ||f||~_s / ||f||_s <= C_s` on random fields.
pub fn norm_equivalence_certificate(
    spec: GridSpec,
    s: u32,
    trials: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let started = Instant::now();
    let bound = multinomial_bound(spec.dim(), s);
    let sampler = field_sampler(spec, s as f64);
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let f = sampler.sample(spec, &mut trial_rng(seed, t as u64))?;
            Ok(hs_norm_fourier(&f, s as f64) / hs_norm_derivative_spectral(&f, s)?)
        })
        .collect::<Result<_>>()?;
    let mut report = SuiteReport::new("norm-equivalence")
        .param("s", s)
        .param("grid", spec.size())
        .param("dim", spec.dim())
        .param("seed", seed);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for r in &ratios {
        report.record(*r);
    }
    report.bound = Some(bound);
    report.constant = Some(bound);
    if bound == 1.0 {
        report.check_upper(
            "max |ratio - 1|",
            (hi - 1.0).abs().max((lo - 1.0).abs()),
            1e-10,
        );
    } else {
        report.check_lower("min ratio", lo, 1.0 - 1e-12);
        report.check_upper("max ratio", hi, bound);
    }
    report.note("C_s is the square root of the largest multinomial coefficient of (1 + |xi|^2)^s");
    Ok(report.finish(started))
}

/// Checks `||f||_{C^r} <= K_s ||f||_{s + r}` with the discrete tail-sum constant.
pub fn embedding_certificate(
    spec: GridSpec,
    s: f64,
    r: u32,
    trials: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let started = Instant::now();
    let half = spec.dim() as f64 / 2.0;
    if !(s > half) {
        return Err(Error::InvalidParameter(format!(
            "the embedding needs s > n/2 = {half}, got s = {s}"
        )));
    }
    let k = embedding_constant(spec, s);
    let sampler = field_sampler(spec, s + r as f64);
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let f = sampler.sample(spec, &mut trial_rng(seed, t as u64))?;
            Ok(cr_norm_spectral(&f, r)? / hs_norm_fourier(&f, s + r as f64))
        })
        .collect::<Result<_>>()?;
    let mut report = SuiteReport::new("embedding")
        .param("s", s)
        .param("r", r)
        .param("grid", spec.size())
        .param("dim", spec.dim())
        .param("seed", seed);
    for v in &ratios {
        report.record(*v);
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let violations = ratios.iter().filter(|&&v| v > k).count();
    report.bound = Some(k);
    report.constant = Some(k);
    report.check_upper("max ||f||_{C^r} / ||f||_{s+r}", max, k);
    report.check_upper("violations", violations as f64, 0.0);
    report.note(format!(
        "squared tail of the continuum constant beyond |k| = N/2 is at most {:.3e}",
        embedding_tail_bound(spec, s)
    ));
    Ok(report.finish(started))
}

/// Checks that `||f||_0 + sum_i ||d_i f||_{s-1}` lies within `[1, sqrt(n+1)]` of `||f||_s`.
pub fn inductive_norm_check(
    spec: GridSpec,
    s: f64,
    trials: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let started = Instant::now();
    if !(s >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "the inductive norm needs s >= 1, got {s}"
        )));
    }
    let n = spec.dim();
    let sampler = field_sampler(spec, s);
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let f = sampler.sample(spec, &mut trial_rng(seed, t as u64))?;
            let mut lhs = f.l2_norm();
            for i in 0..n {
                lhs += hs_norm_fourier(&f.differentiate(i)?, s - 1.0);
            }
            Ok(lhs / hs_norm_fourier(&f, s))
        })
        .collect::<Result<_>>()?;
    let upper = ((n + 1) as f64).sqrt();
    let mut report = SuiteReport::new("inductive-norm")
        .param("s", s)
        .param("grid", spec.size())
        .param("dim", n);
    for v in &ratios {
        report.record(*v);
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    report.check_lower("min ratio", lo, 1.0 - 1e-12);
    report.check_upper("max ratio", hi, upper);
    report.bound = Some(upper);
    Ok(report.finish(started))
}

/// `||f - f_M||_s` along a list of cutoffs; asserts monotone decay.
pub fn truncation_decay_check(
    f: &Spectrum,
    s: f64,
    cutoffs: &[f64],
    mode: Truncation,
) -> Result<SuiteReport> {
    let started = Instant::now();
    let mut report = SuiteReport::new("density")
        .param("s", s)
        .param("mode", mode)
        .param("cutoffs", cutoffs);
    let mut errors = Vec::with_capacity(cutoffs.len());
    for &m in cutoffs {
        let err = hs_norm_fourier(&f.sub(&f.fourier_truncate(m, mode)?)?, s);
        errors.push(err);
        report.record(err);
    }
    let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
    report.check_true("monotone decay in the cutoff", monotone);
    if let (Some(first), Some(last)) = (errors.first(), errors.last()) {
        if *first > 0.0 {
            report.check_upper("last / first error", last / first, 1.0);
        }
    }
    Ok(report.finish(started))
}

/// Checks `[f o phi]_lambda <= M^{-1} L^{1/2 + lambda} [f]_lambda` on `T^1`, with
/// `M = inf det d phi` and `L = sup |d phi|` from the certificate.
pub fn fractional_composition_bound(
    f: &GridFunction,
    phi: &Diffeo,
    lambda: f64,
    slack: f64,
) -> Result<SuiteReport> {
    let started = Instant::now();
    let (lhs, rhs) = fractional_sides(f, phi, lambda)?;
    let mut report = SuiteReport::new("fractional-composition")
        .param("lambda", lambda)
        .param("slack", slack);
    report.record(if rhs > 0.0 { lhs / rhs } else { 0.0 });
    report.check_upper(
        "[f o phi] - (1 + slack) bound",
        lhs - (1.0 + slack) * rhs,
        0.0,
    );
    report.bound = Some(rhs);
    report.constant = Some(lhs);
    Ok(report.finish(started))
}

/// `([f o phi]_lambda, M^{-1} L^{1/2 + lambda} [f]_lambda)`.
pub fn fractional_sides(f: &GridFunction, phi: &Diffeo, lambda: f64) -> Result<(f64, f64)> {
    if f.spec() != phi.spec() {
        return Err(Error::SpecMismatch(
            "function and diffeomorphism live on different grids".into(),
        ));
    }
    let composed = compose_function(&forward_transform(f)?, phi)?;
    let lhs = slobodeckij_seminorm(&composed, lambda)?;
    let cert = phi.certificate();
    let factor = cert.max_stretch.powf(0.5 + lambda) / cert.min_det;
    Ok((lhs, factor * slobodeckij_seminorm(f, lambda)?))
}

/// Fractional suite: the seminorm at `N` against a refined grid, and the
/// composition bound on random pairs.
pub fn fractional_suite(
    spec: GridSpec,
    lambda: f64,
    trials: usize,
    seed: u64,
    refined_size: usize,
    slack: f64,
) -> Result<SuiteReport> {
    let started = Instant::now();
    if spec.dim() != 1 {
        return Err(Error::InvalidParameter(
            "the fractional suite runs on T^1".into(),
        ));
    }
    let mut report = SuiteReport::new("fractional")
        .param("lambda", lambda)
        .param("grid", spec.size())
        .param("refined_grid", refined_size)
        .param("trials", trials)
        .param("seed", seed);

    let sine = |x: &[f64]| (2.0 * PI * x[0]).sin();
    let coarse = slobodeckij_seminorm(&GridFunction::from_fn(spec, sine)?, lambda)?;
    let fine = slobodeckij_seminorm(
        &GridFunction::from_fn(spec.with_size(refined_size)?, sine)?,
        lambda,
    )?;
    report.check_upper(
        "seminorm relative deviation from refined quadrature",
        (coarse - fine).abs() / fine,
        0.02,
    );

    let band = spec.size() / 4;
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let f = FieldSampler::new(1.0, 0.6, 1)
                .with_band(band)
                .sample(spec, &mut rng)?;
            let strain = 0.1 + 0.4 * (t as f64 / trials.max(1) as f64);
            let phi = random_diffeo(spec, &mut rng, 4, strain)?;
            let (lhs, rhs) = fractional_sides(&f.to_grid(), &phi, lambda)?;
            Ok(lhs / rhs)
        })
        .collect::<Result<_>>()?;
    for r in &ratios {
        report.record(*r);
    }
    let violations = ratios.iter().filter(|&&r| r > 1.0 + slack).count();
    report.check_upper("composition bound violations", violations as f64, 0.0);
    report.bound = Some(1.0 + slack);
    Ok(report.finish(started))
}
