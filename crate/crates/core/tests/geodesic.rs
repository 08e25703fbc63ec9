use rand::Rng;
use sobodiff::geodesic::{
    christoffel, d0exp_check, energy_drift, exp_field, geodesic_endpoint, geodesic_flow,
    random_initial_field, rk4_order, scaling_check, write_trajectory_csv, Metric,
};
use sobodiff::random::trial_rng;

#[test]
fn exp_metric_christoffel_is_one() {
    let m = Metric::exp_conformal_1d();
    for z in [-0.7, 0.0, 0.3, 1.2] {
        assert!((christoffel(&m, &[z]).unwrap()[0] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn conformal_christoffels_against_metric_differences() {
    let m = Metric::conformal_2d(0.2);
    let lambda = |z: &[f64]| 0.5 * m.components(z)[0].ln();
    let h = 1e-5;
    let mut rng = trial_rng(2, 0);
    for _ in 0..20 {
        let z = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let d1 = (lambda(&[z[0] + h, z[1]]) - lambda(&[z[0] - h, z[1]])) / (2.0 * h);
        let d2 = (lambda(&[z[0], z[1] + h]) - lambda(&[z[0], z[1] - h])) / (2.0 * h);
        let gam = christoffel(&m, &z).unwrap();
        // index k * 4 + p * 2 + q
        let expected = [d1, d2, d2, -d1, -d2, d1, d1, d2];
        for (c, e) in expected.iter().enumerate() {
            assert!((gam[c] - e).abs() < 1e-6, "component {c} at {z:?}");
        }
    }
}

#[test]
fn exp_metric_geodesic_closed_form() {
    // g = e^{2z}: (e^alpha)'' = 0, so alpha(t) = ln(1 + t) for alpha(0) = 0, alpha'(0) = 1
    let m = Metric::exp_conformal_1d();
    let coarse = geodesic_endpoint(&m, &[0.0], &[1.0], 1.0, 256).unwrap();
    let dense = geodesic_endpoint(&m, &[0.0], &[1.0], 1.0, 8192).unwrap();
    assert!((coarse.position[0] - dense.position[0]).abs() < 1e-9);
    assert!((dense.position[0] - 2f64.ln()).abs() < 1e-12);
    assert!((dense.velocity[0] - 0.5).abs() < 1e-12);
}

#[test]
fn exp_field_against_dense_steps() {
    let m = Metric::conformal_2d(0.2);
    let (f, y) = random_initial_field(8, 19, 0.3).unwrap();
    let got = exp_field(&m, &f, &y, 256).unwrap();
    for p in 0..f.spec().len() {
        let y0 = [f.value(p, 0), f.value(p, 1)];
        let v0 = [y.value(p, 0), y.value(p, 1)];
        let end = geodesic_endpoint(&m, &y0, &v0, 1.0, 8192).unwrap().position;
        for (c, e) in end.iter().enumerate() {
            assert!((got.value(p, c) - e).abs() < 1e-8);
        }
    }
}

#[test]
fn scaling_law_at_half() {
    let m = Metric::conformal_2d(0.2);
    let (f, y) = random_initial_field(16, 23, 0.3).unwrap();
    let r = scaling_check(&m, &f, &y, &[0.5], 512, 1e-8).unwrap();
    assert!(r.pass, "{:?}", r.failures());
}

#[test]
fn first_order_error_halves_with_eps() {
    let m = Metric::conformal_2d(0.2);
    let (f, y) = random_initial_field(16, 23, 0.3).unwrap();
    let r = d0exp_check(&m, &f, &y, &[1e-2, 5e-3], 256, (1.7, 2.3)).unwrap();
    assert!(r.pass, "{:?}", r.failures());
    let (a, b) = (r.records[0].value.unwrap(), r.records[1].value.unwrap());
    assert!(a > 1e-10 && (a / b - 2.0).abs() < 0.3);
}

#[test]
fn rk4_is_fourth_order_and_conserves_energy() {
    // errors against the exact endpoint ln 2, slope by least squares in ln h
    let m = Metric::exp_conformal_1d();
    let steps = [16usize, 32, 64, 128];
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .map(|&n| {
            let end = geodesic_endpoint(&m, &[0.0], &[1.0], 1.0, n)
                .unwrap()
                .position[0];
            ((1.0 / n as f64).ln(), (end - 2f64.ln()).abs().ln())
        })
        .collect();
    let k = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / k,
        pts.iter().map(|p| p.1).sum::<f64>() / k,
    );
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((3.7..4.3).contains(&slope), "slope {slope}");

    let conformal = Metric::conformal_2d(0.2);
    let (_, order) = rk4_order(&conformal, &[0.1, 0.3], &[0.8, -0.5], &steps, 8192).unwrap();
    assert!((3.7..4.3).contains(&order), "order {order}");
    let traj = geodesic_flow(&conformal, &[0.1, 0.2], &[0.3, -0.2], 1.0, 256).unwrap();
    assert!(energy_drift(&conformal, &traj) < 1e-8);
}

#[test]
fn trajectory_csv_layout() {
    let traj = geodesic_flow(&Metric::flat(2), &[0.0, 0.0], &[1.0, 0.5], 1.0, 16).unwrap();
    let mut out = Vec::new();
    write_trajectory_csv(&traj, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,alpha_0,alpha_1,z_0,z_1"));
    let last: Vec<f64> = lines
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last, vec![1.0, 1.0, 0.5, 1.0, 0.5]);
}
