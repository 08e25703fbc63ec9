//! Configuration-driven suite runner.
//!
//! A [`SuiteConfig`] names one suite and overrides any of its parameters; a
//! [`RunConfig`] lists several. Every suite produces a [`SuiteReport`]; a run
//! produces an [`AggregateReport`] whose `pass` is the conjunction of its suites.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sobodiff::diffeo::{Diffeo, InvertOptions};
use sobodiff::geodesic::GeodesicSuiteParams;
use sobodiff::random::default_decay_margin;
use sobodiff::{algebra, calculus, diffeo, geodesic, norms};
use sobodiff::{
    Error, FieldSampler, GridFunction, GridSpec, Result, Spectrum, SuiteReport, Truncation,
    SCHEMA_VERSION,
};

#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Hash,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    NormEquivalence,
    Embedding,
    InductiveNorm,
    Density,
    Algebra,
    QuotientRule,
    Group,
    CompositionBound,
    TaylorIdentity,
    TaylorOrder,
    InverseDifferential,
    Lipschitz,
    LossOfDerivative,
    Geodesic,
    Fractional,
}

impl SuiteName {
    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::NormEquivalence => "norm-equivalence",
            SuiteName::Embedding => "embedding",
            SuiteName::InductiveNorm => "inductive-norm",
            SuiteName::Density => "density",
            SuiteName::Algebra => "algebra",
            SuiteName::QuotientRule => "quotient-rule",
            SuiteName::Group => "group",
            SuiteName::CompositionBound => "composition-bound",
            SuiteName::TaylorIdentity => "taylor-identity",
            SuiteName::TaylorOrder => "taylor-order",
            SuiteName::InverseDifferential => "inverse-differential",
            SuiteName::Lipschitz => "lipschitz",
            SuiteName::LossOfDerivative => "loss-of-derivative",
            SuiteName::Geodesic => "geodesic",
            SuiteName::Fractional => "fractional",
        }
    }

    /// Tolerance keys the suite accepts, with defaults.
    pub fn default_tolerances(self) -> &'static [(&'static str, f64)] {
        match self {
            SuiteName::Algebra => &[("stability", 0.10)],
            SuiteName::QuotientRule => &[("residual", 1e-8)],
            SuiteName::Group => &[("roundtrip", 1e-10), ("derivative", 1e-7)],
            SuiteName::CompositionBound => &[("stability", 0.20)],
            SuiteName::TaylorOrder => &[("slope_margin", 0.9)],
            SuiteName::InverseDifferential => &[("ratio_low", 3.5), ("ratio_high", 4.5)],
            SuiteName::Lipschitz => &[("stability", 0.15)],
            SuiteName::LossOfDerivative => &[("growth", 1.5), ("right_band", 0.2)],
            SuiteName::Geodesic => &[
                ("flat", 1e-12),
                ("scaling", 1e-8),
                ("energy", 1e-8),
                ("ratio_low", 1.7),
                ("ratio_high", 2.3),
                ("order_low", 3.7),
                ("order_high", 4.3),
            ],
            SuiteName::Fractional => &[("slack", 0.05)],
            _ => &[],
        }
    }
}

impl std::fmt::Display for SuiteName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One suite and its parameter overrides. Unset fields take the suite's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub suite: SuiteName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grids: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    /// Frequency octaves of the loss-of-derivative ladder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub octaves: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Upper bound on the algebra constant; `0` forces a failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Truncation>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl SuiteConfig {
    pub fn new(suite: SuiteName) -> Self {
        Self {
            suite,
            dim: None,
            grid: None,
            grids: None,
            s: None,
            s2: None,
            r: None,
            octaves: None,
            orders: None,
            seed: None,
            seeds: None,
            trials: None,
            lambda: None,
            epsilon: None,
            k_max: None,
            truncation: None,
            tolerances: BTreeMap::new(),
            output: None,
        }
    }

    /// Configured tolerances merged over the suite defaults; unknown keys and
    /// non-positive values are rejected.
    pub fn tolerances(&self) -> Result<BTreeMap<String, f64>> {
        let defaults = self.suite.default_tolerances();
        let mut out: BTreeMap<String, f64> =
            defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in &self.tolerances {
            if !out.contains_key(k) {
                let known: Vec<&str> = defaults.iter().map(|(k, _)| *k).collect();
                return Err(Error::InvalidParameter(format!(
                    "suite {} has no tolerance {k:?} (known: {known:?})",
                    self.suite
                )));
            }
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "tolerance {k} = {v} must be positive"
                )));
            }
            out.insert(k.clone(), *v);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub suites: Vec<SuiteConfig>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "config schema version {version}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        check_schema(cfg.schema_version)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub suite: SuiteName,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<SuiteReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub pass: bool,
    pub warnings: Vec<String>,
    pub outcomes: Vec<SuiteOutcome>,
    pub wall_time_s: f64,
}

impl AggregateReport {
    /// Pretty JSON with every wall-time field zeroed.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.wall_time_s = 0.0;
        for o in &mut copy.outcomes {
            if let Some(r) = &mut o.report {
                r.wall_time_s = 0.0;
            }
        }
        serde_json::to_string_pretty(&copy).expect("reports serialize")
    }
}

fn dim_spec(cfg: &SuiteConfig, dim: usize, grid: usize) -> Result<GridSpec> {
    GridSpec::new(cfg.dim.unwrap_or(dim), cfg.grid.unwrap_or(grid))
}

fn echo(mut report: SuiteReport, cfg: &SuiteConfig, tol: &BTreeMap<String, f64>) -> SuiteReport {
    report.set_param("config", cfg);
    if !tol.is_empty() {
        report.set_param("tolerances", tol);
    }
    report
}

/// Runs one suite.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let tol = cfg.tolerances()?;
    let t = |k: &str| tol[k];
    let seed = cfg.seed.unwrap_or(1);
    let report = match cfg.suite {
        SuiteName::NormEquivalence => {
            let s = cfg.s.unwrap_or(1.0);
            if s.fract() != 0.0 || s < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "norm equivalence needs an integer s >= 0, got {s}"
                )));
            }
            norms::norm_equivalence_certificate(
                dim_spec(cfg, 1, 64)?,
                s as u32,
                cfg.trials.unwrap_or(100),
                seed,
            )?
        }
        SuiteName::Embedding => norms::embedding_certificate(
            dim_spec(cfg, 1, 64)?,
            cfg.s.unwrap_or(1.0),
            cfg.r.unwrap_or(0) as u32,
            cfg.trials.unwrap_or(100),
            seed,
        )?,
        SuiteName::InductiveNorm => norms::inductive_norm_check(
            dim_spec(cfg, 1, 64)?,
            cfg.s.unwrap_or(1.5),
            cfg.trials.unwrap_or(100),
            seed,
        )?,
        SuiteName::Density => {
            let spec = dim_spec(cfg, 1, 64)?;
            let s = cfg.s.unwrap_or(1.0);
            let f = FieldSampler::new(s + 1.0, default_decay_margin(spec.dim()), 1)
                .sample_seeded(spec, seed)?;
            let half = spec.size() as f64 / 2.0;
            let cutoffs = [half / 8.0, half / 4.0, half / 2.0, half];
            norms::truncation_decay_check(
                &f,
                s,
                &cutoffs,
                cfg.truncation.unwrap_or(Truncation::Sharp),
            )?
        }
        SuiteName::Algebra => {
            let grids = cfg.grids.clone().unwrap_or_else(|| vec![64, 128, 256]);
            algebra::algebra_suite(
                cfg.dim.unwrap_or(1),
                &grids,
                cfg.s.unwrap_or(2.0),
                cfg.s2.unwrap_or(1.0),
                cfg.trials.unwrap_or(200),
                cfg.seed.unwrap_or(9),
                t("stability"),
                cfg.k_max,
            )?
        }
        SuiteName::QuotientRule => algebra::division_suite(
            dim_spec(cfg, 1, 128)?,
            cfg.epsilon.unwrap_or(0.5),
            cfg.seed.unwrap_or(21),
            t("residual"),
        )?,
        SuiteName::Group => diffeo::group_suite(
            dim_spec(cfg, 1, 256)?,
            cfg.trials.unwrap_or(20),
            cfg.seed.unwrap_or(13),
            t("roundtrip"),
            t("derivative"),
        )?,
        SuiteName::CompositionBound => diffeo::composition_bound_suite(
            cfg.dim.unwrap_or(1),
            &cfg.grids.clone().unwrap_or_else(|| vec![64, 128]),
            cfg.s.unwrap_or(1.0),
            cfg.trials.unwrap_or(50),
            cfg.seed.unwrap_or(31),
            5,
            t("stability"),
        )?,
        SuiteName::TaylorIdentity => calculus::taylor_identity_suite(
            dim_spec(cfg, 1, 256)?,
            &cfg.orders.clone().unwrap_or_else(|| vec![1, 2]),
            cfg.s.unwrap_or(2.0),
        )?,
        SuiteName::TaylorOrder => {
            let spec = dim_spec(cfg, 1, 64)?;
            let r = cfg.r.unwrap_or(1);
            if !(1..=3).contains(&r) {
                return Err(Error::InvalidParameter(format!(
                    "Taylor order r = {r} is outside 1..=3"
                )));
            }
            let default_s = if spec.dim() == 1 { 2.0 } else { 2.5 };
            calculus::taylor_order_suite(
                spec,
                r,
                cfg.s.unwrap_or(default_s),
                &cfg.seeds.clone().unwrap_or_else(|| vec![1, 2, 3]),
                &calculus::default_scales(8),
                t("slope_margin"),
            )?
        }
        SuiteName::InverseDifferential => {
            let spec = dim_spec(cfg, 1, 256)?;
            if spec.dim() != 1 {
                return Err(Error::InvalidParameter(
                    "the bundled map lives on T^1".into(),
                ));
            }
            let phi = Diffeo::new(Spectrum::from_fn(spec, |x| 0.1 * (2.0 * PI * x[0]).sin())?)?;
            let dphi = GridFunction::from_fn(spec, |x| (2.0 * PI * x[0]).cos())?;
            let eps = cfg.epsilon.unwrap_or(1e-3);
            calculus::inv_differential_check(
                &phi,
                &dphi,
                &[eps, eps / 2.0],
                InvertOptions::default(),
                (t("ratio_low"), t("ratio_high")),
            )?
        }
        SuiteName::Lipschitz => {
            let spec = dim_spec(cfg, 1, 64)?;
            let default_s = if spec.dim() == 1 { 2.0 } else { 2.5 };
            calculus::lipschitz_estimate_check(
                spec,
                cfg.s.unwrap_or(default_s),
                cfg.epsilon.unwrap_or(0.05),
                cfg.trials.unwrap_or(50),
                cfg.seed.unwrap_or(31),
                t("stability"),
            )?
        }
        SuiteName::LossOfDerivative => calculus::loss_of_derivative_probe(
            dim_spec(cfg, 1, 256)?,
            cfg.s.unwrap_or(2.0),
            cfg.octaves.unwrap_or(5),
            &[1e-3, 5e-4, 2.5e-4],
            t("growth"),
            t("right_band"),
        )?,
        SuiteName::Geodesic => {
            let defaults = GeodesicSuiteParams::default();
            let params = GeodesicSuiteParams {
                grid: cfg.grid.unwrap_or(defaults.grid),
                seed: cfg.seed.unwrap_or(defaults.seed),
                flat_tol: t("flat"),
                scaling_tol: t("scaling"),
                energy_tol: t("energy"),
                ratio_range: (t("ratio_low"), t("ratio_high")),
                order_range: (t("order_low"), t("order_high")),
                ..defaults
            };
            geodesic::geodesic_suite(&params)?
        }
        SuiteName::Fractional => norms::fractional_suite(
            dim_spec(cfg, 1, 256)?,
            cfg.lambda.unwrap_or(0.5),
            cfg.trials.unwrap_or(20),
            cfg.seed.unwrap_or(17),
            2048,
            t("slack"),
        )?,
    };
    let report = echo(report, cfg, &tol);
    if let Some(path) = &cfg.output {
        write_json(path, &report)?;
    }
    Ok(report)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Runs every listed suite, continuing past errors. Per-suite reports go to
/// `out_dir` (or the config's `output_dir`) as `NN-<suite>.json`.
pub fn run_all(run: &RunConfig, out_dir: Option<&Path>) -> Result<AggregateReport> {
    let started = std::time::Instant::now();
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| run.output_dir.clone());
    let mut warnings = Vec::new();
    if run.suites.is_empty() {
        warnings.push("no suites listed; the run passes vacuously".to_string());
    }
    let mut outcomes = Vec::with_capacity(run.suites.len());
    for (i, cfg) in run.suites.iter().enumerate() {
        let outcome = match run_suite(cfg) {
            Ok(report) => {
                if let Some(dir) = &dir {
                    write_json(&dir.join(format!("{i:02}-{}.json", cfg.suite)), &report)?;
                }
                SuiteOutcome {
                    suite: cfg.suite,
                    pass: report.pass,
                    error: None,
                    report: Some(report),
                }
            }
            Err(e) => SuiteOutcome {
                suite: cfg.suite,
                pass: false,
                error: Some(e.to_string()),
                report: None,
            },
        };
        outcomes.push(outcome);
    }
    let aggregate = AggregateReport {
        schema_version: SCHEMA_VERSION,
        pass: outcomes.iter().all(|o| o.pass),
        warnings,
        outcomes,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &dir {
        write_json(&dir.join("aggregate.json"), &aggregate)?;
    }
    Ok(aggregate)
}

/// One line per suite for stdout.
pub fn summary_line(o: &SuiteOutcome) -> String {
    let status = if o.pass { "PASS" } else { "FAIL" };
    match (&o.report, &o.error) {
        (_, Some(e)) => format!("{status}  {:<22} error: {e}", o.suite.as_str()),
        (Some(r), None) => {
            let failed = r.failures();
            let detail = if failed.is_empty() {
                String::new()
            } else {
                format!("  failed: {}", failed.join("; "))
            };
            format!(
                "{status}  {:<22} {:>7.2} s{detail}",
                o.suite.as_str(),
                r.wall_time_s
            )
        }
        (None, None) => format!("{status}  {}", o.suite.as_str()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_rejected_at_parse_time() {
        let err = RunConfig::from_json(r#"{"suites":[{"suite":"nonexistent"}]}"#);
        assert!(err.is_err());
        let err = RunConfig::from_json(r#"{"suites":[{"suite":"algebra","bogus":1}]}"#);
        assert!(err.is_err());
    }

    #[test]
    fn tolerances_validated() {
        let mut cfg = SuiteConfig::new(SuiteName::Algebra);
        cfg.tolerances.insert("stability".into(), 0.2);
        assert_eq!(cfg.tolerances().unwrap()["stability"], 0.2);
        cfg.tolerances.insert("stability".into(), 0.0);
        assert!(cfg.tolerances().is_err());
        let mut cfg = SuiteConfig::new(SuiteName::Embedding);
        cfg.tolerances.insert("anything".into(), 1.0);
        assert!(run_suite(&cfg).is_err());
    }

    #[test]
    fn names_round_trip() {
        for name in [
            SuiteName::NormEquivalence,
            SuiteName::LossOfDerivative,
            SuiteName::TaylorOrder,
        ] {
            let text = serde_json::to_string(&name).unwrap();
            assert_eq!(text, format!("\"{}\"", name.as_str()));
        }
    }

    #[test]
    fn empty_run_passes_with_warning() {
        let agg = run_all(&RunConfig::from_json(r#"{"suites":[]}"#).unwrap(), None).unwrap();
        assert!(agg.pass);
        assert_eq!(agg.warnings.len(), 1);
    }

    #[test]
    fn norm_equivalence_identity_case() {
        let mut cfg = SuiteConfig::new(SuiteName::NormEquivalence);
        cfg.trials = Some(10);
        let r = run_suite(&cfg).unwrap();
        assert!(r.pass);
        assert!(r.max.unwrap() - 1.0 < 1e-10);
    }
}
