//! Acceptance criteria 1 to 11. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use sobodiff::SuiteReport;
use sobodiff_cli::{run_suite, SuiteConfig, SuiteName};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn run(suite: SuiteName, edit: impl FnOnce(&mut SuiteConfig)) -> Result<SuiteReport, String> {
    let mut cfg = SuiteConfig::new(suite);
    edit(&mut cfg);
    run_suite(&cfg).map_err(|e| format!("{suite}: {e}"))
}

fn values(r: &SuiteReport) -> Result<Vec<f64>, String> {
    r.records
        .iter()
        .map(|t| {
            t.value
                .ok_or_else(|| format!("{}: non-finite record {}", r.suite, t.index))
        })
        .collect()
}

fn check_value(r: &SuiteReport, prefix: &str) -> Result<f64, String> {
    r.checks
        .iter()
        .find(|c| c.name.starts_with(prefix))
        .and_then(|c| c.value)
        .ok_or_else(|| format!("{}: no check named '{prefix}'", r.suite))
}

fn sci(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.1e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn require(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn norm_equivalence() -> Verdict {
    let s1 = run(SuiteName::NormEquivalence, |c| {
        c.dim = Some(1);
        c.grid = Some(64);
        c.s = Some(1.0);
        c.trials = Some(100);
        c.seed = Some(1);
    })?;
    let dev = values(&s1)?
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    let s2 = run(SuiteName::NormEquivalence, |c| {
        c.dim = Some(1);
        c.grid = Some(64);
        c.s = Some(2.0);
        c.trials = Some(100);
        c.seed = Some(2);
    })?;
    let ratios = values(&s2)?;
    let violations = ratios
        .iter()
        .filter(|&&v| !(1.0 - 1e-12..=2f64.sqrt()).contains(&v))
        .count();
    require(
        s1.records.len() == 100
            && s2.records.len() == 100
            && dev < 1e-10
            && violations == 0
            && s1.pass
            && s2.pass,
        format!("s=1 max |ratio - 1| = {dev:.2e}; s=2 violations of [1, sqrt 2] = {violations}"),
    )
}

fn embedding() -> Verdict {
    let r = run(SuiteName::Embedding, |c| {
        c.dim = Some(1);
        c.grid = Some(64);
        c.s = Some(1.0);
        c.r = Some(0);
        c.trials = Some(100);
        c.seed = Some(4);
    })?;
    let k: f64 = (-32i64..32)
        .map(|k| 1.0 / (1.0 + 4.0 * PI * PI * (k * k) as f64))
        .sum::<f64>()
        .sqrt();
    let vals = values(&r)?;
    let worst = vals.iter().copied().fold(0.0, f64::max);
    let violations = vals.iter().filter(|&&v| v > k).count();
    require(
        vals.len() == 100 && violations == 0 && r.pass,
        format!("max ||f||_C0 / ||f||_1 = {worst:.4} <= K = {k:.4}, violations = {violations}"),
    )
}

fn algebra() -> Verdict {
    let r = run(SuiteName::Algebra, |c| {
        c.grids = Some(vec![64, 128, 256]);
        c.s = Some(2.0);
        c.s2 = Some(1.0);
        c.trials = Some(200);
        c.seed = Some(9);
    })?;
    let ks = values(&r)?;
    let (lo, hi) = ks
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = hi / lo - 1.0;
    require(
        ks.len() == 3 && spread <= 0.10 && r.pass,
        format!(
            "K over N = 64, 128, 256: {ks:.4?}, spread {:.2e} <= 10%",
            spread
        ),
    )
}

fn quotient_rule() -> Verdict {
    let r = run(SuiteName::QuotientRule, |c| {
        c.grid = Some(128);
        c.epsilon = Some(0.5);
        c.seed = Some(21);
    })?;
    let residual = check_value(&r, "quotient-rule residual (bundled pair)")?;
    let round_trip = check_value(&r, "division round trip")?;
    require(
        residual < 1e-8 && round_trip < 1e-8 && r.pass,
        format!("bundled residual {residual:.2e}, round trip {round_trip:.2e}"),
    )
}

fn group() -> Verdict {
    let r = run(SuiteName::Group, |c| {
        c.dim = Some(1);
        c.grid = Some(256);
        c.trials = Some(20);
        c.seed = Some(13);
    })?;
    let rt = check_value(&r, "max |phi o phi^-1 - id|")?;
    let chain = check_value(&r, "max chain-rule residual")?;
    let inv = check_value(&r, "max inverse-derivative residual")?;
    require(
        r.records.len() == 20 && rt < 1e-10 && chain < 1e-7 && inv < 1e-7 && r.pass,
        format!("round trip {rt:.2e}, chain rule {chain:.2e}, inverse derivative {inv:.2e}"),
    )
}

fn taylor() -> Verdict {
    let id = run(SuiteName::TaylorIdentity, |c| {
        c.grid = Some(256);
        c.orders = Some(vec![1, 2]);
    })?;
    let residuals = values(&id)?;
    let mut ok = residuals.len() == 2 && residuals.iter().all(|&v| v < 1e-7) && id.pass;
    let mut slopes = Vec::new();
    for r in [1usize, 2] {
        let rep = run(SuiteName::TaylorOrder, |c| {
            c.dim = Some(1);
            c.grid = Some(64);
            c.r = Some(r);
            c.seeds = Some(vec![1, 2, 3]);
        })?;
        let s = values(&rep)?;
        ok &= s.len() == 3 && s.iter().all(|&v| v >= r as f64 + 0.9) && rep.pass;
        slopes.push(s);
    }
    require(
        ok,
        format!(
            "identity residuals {}; slopes r=1 {:.3?}, r=2 {:.3?}",
            sci(&residuals),
            slopes[0],
            slopes[1]
        ),
    )
}

fn inverse_differential() -> Verdict {
    let r = run(SuiteName::InverseDifferential, |c| {
        c.grid = Some(256);
        c.epsilon = Some(1e-3);
    })?;
    let ratio = check_value(&r, "Richardson error ratio")?;
    require(
        (3.5..=4.5).contains(&ratio) && r.pass,
        format!("Richardson ratio {ratio:.4}"),
    )
}

fn loss_of_derivative() -> Verdict {
    let r = run(SuiteName::LossOfDerivative, |c| {
        c.grid = Some(256);
        c.s = Some(2.0);
        c.octaves = Some(5);
    })?;
    let left = values(&r)?;
    let right: Vec<f64> = r
        .records
        .iter()
        .map(|t| t.extra.get("right").copied().unwrap_or(f64::NAN))
        .collect();
    let growth: Vec<f64> = left.windows(2).map(|w| w[1] / w[0]).collect();
    let band = right
        .iter()
        .map(|v| (v / right[0] - 1.0).abs())
        .fold(0.0, f64::max);
    require(
        left.len() == 5 && growth.iter().all(|&g| g >= 1.5) && band <= 0.2 && r.pass,
        format!("left growth per octave {growth:.3?}; right deviation {band:.2e}"),
    )
}

fn geodesic() -> Verdict {
    let r = run(SuiteName::Geodesic, |c| {
        c.grid = Some(16);
        c.seed = Some(23);
    })?;
    let flat = check_value(&r, "flat metric")?;
    let scaling = check_value(&r, "scaling law")?;
    let drift = check_value(&r, "relative energy drift")?;
    let order = check_value(&r, "RK4 order")?;
    let ratios: Vec<f64> = r
        .checks
        .iter()
        .filter(|c| c.name.starts_with("error ratio per eps halving"))
        .filter_map(|c| c.value)
        .collect();
    require(
        flat < 1e-12
            && scaling < 1e-8
            && !ratios.is_empty()
            && ratios.iter().all(|v| (1.7..=2.3).contains(v))
            && drift < 1e-8
            && (3.7..=4.3).contains(&order)
            && r.pass,
        format!(
            "flat {flat:.1e}, scaling {scaling:.1e}, d0 ratios {ratios:.3?}, drift {drift:.1e}, RK4 slope {order:.3}"
        ),
    )
}

fn fractional() -> Verdict {
    let r = run(SuiteName::Fractional, |c| {
        c.grid = Some(256);
        c.lambda = Some(0.5);
        c.trials = Some(20);
        c.seed = Some(17);
    })?;
    let dev = check_value(&r, "seminorm relative deviation")?;
    let violations = check_value(&r, "composition bound violations")?;
    require(
        r.records.len() == 20 && dev < 0.02 && violations == 0.0 && r.pass,
        format!(
            "quadrature deviation {:.2}%, violations {violations}",
            100.0 * dev
        ),
    )
}

fn without_timing(path: &Path) -> Result<String, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim_start().starts_with("\"wall_time_s\""))
        .collect::<Vec<_>>()
        .join("\n"))
}

fn determinism() -> Verdict {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default.json");
    let base = std::env::temp_dir().join(format!("sobodiff-acceptance-{}", std::process::id()));
    let mut dirs: Vec<PathBuf> = Vec::new();
    for run in 0..2 {
        let dir = base.join(format!("run{run}"));
        let _ = std::fs::remove_dir_all(&dir);
        let status = Command::new(env!("CARGO_BIN_EXE_sobodiff"))
            .args(["verify-all", "--config"])
            .arg(&config)
            .arg("--out-dir")
            .arg(&dir)
            .output()
            .map_err(|e| format!("could not run the binary: {e}"))?;
        if status.status.code() != Some(0) {
            return Err(format!("run {run} exited with {:?}", status.status.code()));
        }
        dirs.push(dir);
    }
    let mut names: Vec<_> = std::fs::read_dir(&dirs[0])
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.file_name()))
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        if without_timing(&dirs[0].join(name))? != without_timing(&dirs[1].join(name))? {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    let _ = std::fs::remove_dir_all(&base);
    require(
        differing.is_empty() && names.len() > 1,
        format!("{} report files identical modulo wall_time_s, exit code 0 twice; differing: {differing:?}", names.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("norm equivalence", norm_equivalence),
        ("embedding", embedding),
        ("algebra constant", algebra),
        ("quotient rule", quotient_rule),
        ("group", group),
        ("Taylor", taylor),
        ("inverse differential", inverse_differential),
        ("loss of derivative", loss_of_derivative),
        ("geodesic", geodesic),
        ("fractional", fractional),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}  {name}: {detail}", i + 1);
    }
    println!(
        "{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
