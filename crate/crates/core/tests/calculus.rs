use std::f64::consts::PI;

use sobodiff::calculus::{
    default_scales, eta_k, inv_differential, inv_differential_check, lipschitz_estimate_check,
    lipschitz_ratio, loss_of_derivative_probe, remainder_order_probe, remainder_r1, remainder_r2,
    taylor_identity_suite, taylor_regression_data,
};
use sobodiff::diffeo::{compose_function, InvertOptions};
use sobodiff::{Diffeo, GridFunction, GridSpec, Spectrum};

fn g1(n: usize) -> GridSpec {
    GridSpec::new(1, n).unwrap()
}

fn bump(g: GridSpec, a: f64) -> Diffeo {
    Diffeo::new(Spectrum::from_fn(g, |x| a * (2.0 * PI * x[0]).sin()).unwrap()).unwrap()
}

fn sine(g: GridSpec) -> Spectrum {
    Spectrum::from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap()
}

// plain least squares on (ln x, ln y)
fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

#[test]
fn eta1_against_finite_differences() {
    let g = g1(128);
    let (u, phi) = (sine(g), bump(g, 0.05));
    let h = Spectrum::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
    let eta = eta_k(&u, &phi, &Spectrum::zeros(g, 1), &h.to_grid(), 1).unwrap();
    let base = compose_function(&u, &phi).unwrap();
    let at = |e: f64| compose_function(&u, &phi.perturbed(&h, e).unwrap()).unwrap();
    let mut forward = Vec::new();
    let mut central = Vec::new();
    for e in [1e-2, 5e-3] {
        forward.push(
            at(e)
                .sub(&base)
                .unwrap()
                .scale(1.0 / e)
                .max_abs_diff(&eta)
                .unwrap(),
        );
        central.push(
            at(e)
                .sub(&at(-e))
                .unwrap()
                .scale(0.5 / e)
                .max_abs_diff(&eta)
                .unwrap(),
        );
    }
    let (rf, rc) = (forward[0] / forward[1], central[0] / central[1]);
    assert!((1.8..2.2).contains(&rf), "forward ratio {rf}");
    assert!((3.6..4.4).contains(&rc), "central ratio {rc}");
}

#[test]
fn r1_is_the_rearranged_identity() {
    let g = g1(128);
    let (u, phi) = (sine(g), bump(g, 0.05));
    let dphi = GridFunction::from_fn(g, |x| 0.01 * (2.0 * PI * x[0]).cos()).unwrap();
    let r1 = remainder_r1(&u, &phi, &dphi, 1).unwrap();
    let oracle = GridFunction::from_fn(g, |x| {
        let p = x[0] + 0.05 * (2.0 * PI * x[0]).sin();
        let d = 0.01 * (2.0 * PI * x[0]).cos();
        (2.0 * PI * (p + d)).sin() - (2.0 * PI * p).sin() - 2.0 * PI * (2.0 * PI * p).cos() * d
    })
    .unwrap();
    assert!(r1.max_abs_diff(&oracle).unwrap() < 1e-9);
}

#[test]
fn r2_is_the_rearranged_identity() {
    let g = g1(128);
    let phi = bump(g, 0.05);
    let du = Spectrum::from_fn(g, |x| 0.01 * (4.0 * PI * x[0]).cos()).unwrap();
    let dphi = GridFunction::from_fn(g, |x| 0.01 * (2.0 * PI * x[0]).cos()).unwrap();
    // r = 1: int_0^1 du'(phi + t dphi) dt dphi = du(phi + dphi) - du(phi)
    let r2 = remainder_r2(&du, &phi, &dphi, 1).unwrap();
    let oracle = GridFunction::from_fn(g, |x| {
        let p = x[0] + 0.05 * (2.0 * PI * x[0]).sin();
        let d = 0.01 * (2.0 * PI * x[0]).cos();
        0.01 * ((4.0 * PI * (p + d)).cos() - (4.0 * PI * p).cos())
    })
    .unwrap();
    assert!(r2.max_abs_diff(&oracle).unwrap() < 1e-9);
}

#[test]
fn taylor_identity_bundled_orders() {
    let r = taylor_identity_suite(g1(256), &[1, 2], 2.0).unwrap();
    assert!(r.pass, "{:?}", r.failures());
}

#[test]
fn remainder_slopes_by_independent_regression() {
    let g = g1(64);
    let scales = default_scales(8);
    for (r, target, band) in [(1usize, 2.0, 0.1), (2, 3.0, 0.15)] {
        let (u, phi, du, dphi) = taylor_regression_data(g, 2.0, r, 1).unwrap();
        let probe = remainder_order_probe(&u, &phi, &du, &dphi, r, &scales, 2.0).unwrap();
        let slope = fitted_slope(&scales, &probe.remainders);
        assert!((slope - target).abs() < band, "r = {r}: slope {slope}");
        assert!((probe.slope.unwrap() - slope).abs() < 1e-9);
    }
}

#[test]
fn inverse_differential_closed_form_on_t1() {
    let g = g1(256);
    let phi = bump(g, 0.1);
    let dphi = GridFunction::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
    let got = inv_differential(&phi, &dphi, InvertOptions::default()).unwrap();
    // -dphi(x) / phi'(x) at x = phi^{-1}(y), x found by bisection
    let f = |x: f64| x + 0.1 * (2.0 * PI * x).sin();
    for j in (0..256).step_by(23) {
        let y = j as f64 / 256.0;
        let (mut lo, mut hi) = (y - 0.2, y + 0.2);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < y {
                lo = mid
            } else {
                hi = mid
            }
        }
        let x = 0.5 * (lo + hi);
        let oracle = -(2.0 * PI * x).cos() / (1.0 + 0.2 * PI * (2.0 * PI * x).cos());
        assert!((got.value(j, 0) - oracle).abs() < 1e-9, "y = {y}");
    }
    let r = inv_differential_check(
        &phi,
        &dphi,
        &[1e-3, 5e-4],
        InvertOptions::default(),
        (3.5, 4.5),
    )
    .unwrap();
    assert!(r.pass, "{:?}", r.failures());
}

#[test]
fn lipschitz_ratio_of_rigid_shift() {
    let g = g1(64);
    let id = Diffeo::identity(g);
    let s = 1.0;
    for (k, a) in [(1.0, 0.03), (3.0, 0.01), (5.0, 0.002)] {
        let f = Spectrum::from_fn(g, |x| (2.0 * PI * k * x[0]).sin()).unwrap();
        let shifted = Diffeo::shift(g, &[a]).unwrap();
        let got = lipschitz_ratio(&f, &shifted, &id, s).unwrap().unwrap();
        let oracle = 2.0 * (PI * k * a).sin().abs() / (a * (1.0 + 4.0 * PI * PI * k * k).sqrt());
        assert!(
            (got / oracle - 1.0).abs() < 1e-10,
            "k = {k}: {got} vs {oracle}"
        );
    }
    assert!(lipschitz_ratio(&sine(g), &id, &id, s).unwrap().is_none());
}

#[test]
fn lipschitz_envelope_stable_under_radius_halving() {
    let r = lipschitz_estimate_check(g1(64), 1.0, 1e-2, 50, 31, 0.15).unwrap();
    assert!(r.pass, "{:?}", r.failures());
}

#[test]
fn left_translation_loses_a_derivative() {
    let r = loss_of_derivative_probe(g1(256), 1.0, 5, &[1e-3, 1e-4], 1.5, 0.2).unwrap();
    assert!(r.pass, "{:?}", r.failures());
    let slope = r.slope.unwrap();
    assert!((slope - 1.0).abs() < 0.1, "slope {slope}");
    // at fixed frequency the difference quotient settles as eps shrinks
    let g = g1(256);
    let phi = bump(g, 0.1);
    let h = Spectrum::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
    let psi = Spectrum::from_fn(g, |x| (16.0 * PI * x[0]).sin()).unwrap();
    let base = compose_function(&psi, &phi).unwrap();
    let q: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&e| {
            let d = compose_function(&psi, &phi.perturbed(&h, e).unwrap())
                .unwrap()
                .sub(&base)
                .unwrap();
            sobodiff::norms::hs_norm_fourier(&sobodiff::forward_transform(&d).unwrap(), 1.0) / e
        })
        .collect();
    let steps: Vec<f64> = q.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(steps.windows(2).all(|w| w[1] < w[0]), "{q:?}");
}
