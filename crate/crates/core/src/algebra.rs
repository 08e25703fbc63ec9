//! Dealiased pointwise nonlinearities: products and quotients by `1 + g`.
//!
//! Inputs are interpolated onto a grid with twice the points per axis, combined
//! pointwise there and projected back onto the base band. For quadratic terms
//! this is alias-free; division is not polynomial, so a residual aliasing error
//! remains and decays with the smoothness of the data.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::norms::hs_norm_fourier;
use crate::random::{default_decay_margin, trial_rng, FieldSampler};
use crate::report::SuiteReport;
use crate::spectrum::forward_transform;

const PAD: usize = 2;

/// Membership of `g` in `U_eps = { g : inf (1 + g) > eps }`, judged on a 4x refined grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsetCertificate {
    pub epsilon: f64,
    pub inf_value: f64,
    pub member: bool,
}

fn padded(f: &GridFunction) -> Result<GridFunction> {
    forward_transform(f)?.refined_grid(PAD)
}

fn project(fine: &GridFunction, spec: GridSpec) -> Result<GridFunction> {
    Ok(forward_transform(fine)?.resample(spec.size())?.to_grid())
}

fn broadcast_components(f: &GridFunction, g: &GridFunction) -> Result<usize> {
    if f.spec() != g.spec() {
        return Err(Error::SpecMismatch(format!(
            "{:?} vs {:?}",
            f.spec(),
            g.spec()
        )));
    }
    match (f.components(), g.components()) {
        (a, b) if a == b => Ok(a),
        (a, 1) => Ok(a),
        (1, b) => Ok(b),
        (a, b) => Err(Error::SpecMismatch(format!(
            "cannot combine {a} and {b} components"
        ))),
    }
}

/// Applies `op` pointwise to two functions on the padded grid, with
/// single-component arguments broadcast.
fn combine(
    f: &GridFunction,
    g: &GridFunction,
    op: impl Fn(f64, f64) -> f64,
) -> Result<GridFunction> {
    let comps = broadcast_components(f, g)?;
    let (ff, gg) = (padded(f)?, padded(g)?);
    let fine_spec = ff.spec();
    let len = fine_spec.len();
    let mut values = vec![0.0; len * comps];
    for c in 0..comps {
        let a = ff.component(if f.components() == 1 { 0 } else { c });
        let b = gg.component(if g.components() == 1 { 0 } else { c });
        for p in 0..len {
            values[c * len + p] = op(a[p], b[p]);
        }
    }
    project(&GridFunction::new(fine_spec, comps, values)?, f.spec())
}

/// Dealiased pointwise product.
pub fn multiply(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    combine(f, g, |a, b| a * b)
}

/// Dealiased product of several factors, formed in one pass on the padded grid
/// so the result does not depend on the order of the factors.
pub fn multiply_many(factors: &[&GridFunction]) -> Result<GridFunction> {
    let first = factors
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty product".into()))?;
    let mut comps = first.components();
    for f in &factors[1..] {
        comps = broadcast_components(&GridFunction::zeros(first.spec(), comps), f)?;
    }
    let fine: Vec<GridFunction> = factors.iter().map(|f| padded(f)).collect::<Result<_>>()?;
    let fine_spec = fine[0].spec();
    let len = fine_spec.len();
    let mut values = vec![1.0; len * comps];
    for (f, ff) in factors.iter().zip(&fine) {
        for c in 0..comps {
            let a = ff.component(if f.components() == 1 { 0 } else { c });
            for p in 0..len {
                values[c * len + p] *= a[p];
            }
        }
    }
    project(&GridFunction::new(fine_spec, comps, values)?, first.spec())
}

pub fn uset_membership(g: &GridFunction, epsilon: f64) -> Result<UsetCertificate> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} must be positive"
        )));
    }
    if g.components() != 1 {
        return Err(Error::InvalidParameter(
            "U_eps membership needs a scalar g".into(),
        ));
    }
    let fine = forward_transform(g)?.refined_grid(4)?;
    let inf_value = fine
        .values()
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(1.0 + v));
    Ok(UsetCertificate {
        epsilon,
        inf_value,
        member: inf_value > epsilon,
    })
}

/// Dealiased `f / (1 + g)` for `g` in `U_eps`.
pub fn divide(f: &GridFunction, g: &GridFunction, epsilon: f64) -> Result<GridFunction> {
    let cert = uset_membership(g, epsilon)?;
    if !cert.member {
        return Err(Error::OutsideUset {
            inf: cert.inf_value,
            epsilon,
        });
    }
    combine(f, g, |a, b| a / (1.0 + b))
}

/// Compares `d_i (f / (1 + g))` with `d_i f / (1 + g) - (d_i(fg) - g d_i f) / (1 + g)^2`.
pub fn quotient_rule_check(
    f: &GridFunction,
    g: &GridFunction,
    epsilon: f64,
) -> Result<SuiteReport> {
    let started = Instant::now();
    let spec = f.spec();
    let quotient = forward_transform(&divide(f, g, epsilon)?)?;
    let fs = forward_transform(f)?;
    let fg = forward_transform(&multiply(f, g)?)?;
    let g_fine = padded(g)?;
    let mut worst: f64 = 0.0;
    for i in 0..spec.dim() {
        let lhs = quotient.differentiate(i)?.to_grid();
        let df = padded(&fs.differentiate(i)?.to_grid())?;
        let dfg = padded(&fg.differentiate(i)?.to_grid())?;
        let fine_spec = df.spec();
        let len = fine_spec.len();
        let comps = df.components();
        let mut values = vec![0.0; len * comps];
        for c in 0..comps {
            for p in 0..len {
                let one_g = 1.0 + g_fine.value(p, 0);
                let (a, b) = (df.value(p, c), dfg.value(p, c));
                values[c * len + p] = a / one_g - (b - g_fine.value(p, 0) * a) / (one_g * one_g);
            }
        }
        let rhs = project(&GridFunction::new(fine_spec, comps, values)?, spec)?;
        worst = worst.max(lhs.max_abs_diff(&rhs)?);
    }
    let scale = (1.0 + hs_norm_fourier(&fs, 2.0))
        * (1.0 + hs_norm_fourier(&forward_transform(g)?, 2.0)).powi(2);
    let tol = 1e-6 * scale;
    let mut report = SuiteReport::new("quotient-rule")
        .param("epsilon", epsilon)
        .param("grid", spec.size());
    report.record(worst);
    report.bound = Some(tol);
    report.check_upper("max quotient-rule residual", worst, tol);
    Ok(report.finish(started))
}

/// `max ||fg||_{s2} / (||f||_s ||g||_{s2})` over random pairs on one grid.
pub fn algebra_envelope(
    spec: GridSpec,
    s: f64,
    s2: f64,
    band: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let margin = default_decay_margin(spec.dim());
    let fs = FieldSampler::new(s, margin, 1).with_band(band);
    let gs = FieldSampler::new(s2, margin, 1).with_band(band);
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let f = fs.sample(spec, &mut rng)?;
            let g = gs.sample(spec, &mut rng)?;
            let fg = forward_transform(&multiply(&f.to_grid(), &g.to_grid())?)?;
            Ok(hs_norm_fourier(&fg, s2) / (hs_norm_fourier(&f, s) * hs_norm_fourier(&g, s2)))
        })
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Measures the algebra constant on each grid.
///
/// The stability check uses one ensemble with band `min(N)/4` on every grid, so
/// the same functions are measured at each resolution. A second ensemble with
/// band `N/4` per grid checks that the envelope does not grow as finer modes
/// enter. `k_max`, when given, is an upper bound the envelope must respect.
#[allow(clippy::too_many_arguments)]
pub fn algebra_suite(
    dim: usize,
    sizes: &[usize],
    s: f64,
    s2: f64,
    trials: usize,
    seed: u64,
    stability: f64,
    k_max: Option<f64>,
) -> Result<SuiteReport> {
    let started = Instant::now();
    let min_size = *sizes
        .iter()
        .min()
        .ok_or_else(|| Error::InvalidParameter("no grid sizes given".into()))?;
    let band = min_size / 4;
    let mut report = SuiteReport::new("algebra")
        .param("dim", dim)
        .param("sizes", sizes)
        .param("s", s)
        .param("s2", s2)
        .param("trials", trials)
        .param("seed", seed)
        .param("band", band);
    let mut fixed = Vec::new();
    let mut matched = Vec::new();
    for &n in sizes {
        let spec = GridSpec::new(dim, n)?;
        let k = algebra_envelope(spec, s, s2, band, trials, seed)?;
        let km = if n == min_size {
            k
        } else {
            algebra_envelope(spec, s, s2, n / 4, trials, seed)?
        };
        let mut extra = std::collections::BTreeMap::new();
        extra.insert("grid".to_string(), n as f64);
        extra.insert("k_band_n_over_4".to_string(), km);
        report.record_with(k, extra);
        fixed.push(k);
        matched.push(km);
    }
    let lo = fixed.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fixed.iter().copied().fold(0.0, f64::max);
    report.constant = Some(hi);
    report.check_upper("relative spread of K across N", hi / lo - 1.0, stability);
    let base = matched[sizes.iter().position(|&n| n == min_size).unwrap_or(0)];
    let grown = matched.iter().copied().fold(0.0, f64::max) / base - 1.0;
    report.check_upper("growth of K with resolution-matched band", grown, stability);
    if let Some(k) = k_max {
        report.bound = Some(k);
        report.check_upper("K", hi, k);
    }
    Ok(report.finish(started))
}

/// Quotient-rule residuals on the bundled pair and a random pair, and the
/// division round trip.
pub fn division_suite(spec: GridSpec, epsilon: f64, seed: u64, tol: f64) -> Result<SuiteReport> {
    let started = Instant::now();
    let mut report = SuiteReport::new("quotient-rule")
        .param("grid", spec.size())
        .param("dim", spec.dim())
        .param("epsilon", epsilon)
        .param("seed", seed);
    let pair = GridFunction::from_fn(spec, |x| 0.2 * (2.0 * std::f64::consts::PI * x[0]).sin())?;
    let qr = quotient_rule_check(&pair, &pair, epsilon)?;
    let residual = qr.max.unwrap_or(f64::NAN);
    report.record(residual);
    report.check_upper("quotient-rule residual (bundled pair)", residual, tol);

    let band = spec.size() / 4;
    let mut rng = trial_rng(seed, 0);
    let margin = default_decay_margin(spec.dim());
    let f = FieldSampler::new(1.0, margin, 1)
        .with_band(band)
        .sample(spec, &mut rng)?
        .to_grid();
    // band N/8 keeps the product f (1 + g) below the Nyquist mode
    let g0 = FieldSampler::new(1.0, margin, 1)
        .with_band(band / 2)
        .sample(spec, &mut rng)?
        .to_grid();
    // keep 1 + g at least 0.7 so g sits well inside U_eps
    let g = g0.scale(0.3 / g0.sup_norm().max(f64::MIN_POSITIVE));
    let random_qr = quotient_rule_check(&f, &g, epsilon)?;
    let random_residual = random_qr.max.unwrap_or(f64::NAN);
    report.record(random_residual);
    report.check_true("quotient rule on the random pair", random_qr.pass);
    let one_plus_g = g.map(|v| 1.0 + v)?;
    let back = divide(&multiply(&f, &one_plus_g)?, &g, epsilon)?;
    let roundtrip = back.max_abs_diff(&f)?;
    report.record(roundtrip);
    report.check_upper("division round trip f(1+g)/(1+g) - f", roundtrip, tol);
    Ok(report.finish(started))
}
