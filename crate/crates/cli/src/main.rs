use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sobodiff::diffeo::{compose_function, invert, random_diffeo, InvertOptions};
use sobodiff::geodesic::{geodesic_flow, write_trajectory_csv, Metric};
use sobodiff::io::{read_diffeo, read_field, write_diffeo, write_field};
use sobodiff::norms::{compute_norm, NormMethod};
use sobodiff::random::{default_decay_margin, trial_rng};
use sobodiff::{forward_transform, FieldSampler, GridSpec};
use sobodiff_cli::{
    run_all, run_suite, summary_line, RunConfig, SuiteConfig, SuiteName, SuiteOutcome,
};

const EXIT_FAIL: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "sobodiff",
    version,
    about = "Sobolev-space diffeomorphism toolkit on the torus"
)]
struct Cli {
    /// Run on a single thread.
    #[arg(long, global = true)]
    serial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Fourier,
    Derivative,
    Slobodeckij,
    Sup,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Flat,
    Exp,
    Conformal,
}

#[derive(Subcommand)]
enum Command {
    /// Run one suite.
    Verify {
        suite: SuiteName,
        /// JSON suite config (a single suite, or a run config containing this suite).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        grid: Option<usize>,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every suite listed in a run config.
    VerifyAll {
        #[arg(long)]
        config: PathBuf,
        /// Directory for per-suite reports and aggregate.json.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Norm of a field stored as JSON.
    Norm {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, value_enum, default_value = "fourier")]
        method: MethodArg,
        /// Sobolev index, fractional order or C^r order, depending on the method.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
    },
    /// Compose a field with a diffeomorphism.
    Compose {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        diffeo: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invert a diffeomorphism by pointwise Newton iteration.
    Invert {
        #[arg(long)]
        diffeo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
    },
    /// Write a seeded random H^s field.
    RandomField {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 1)]
        components: usize,
        /// Largest |k_i| that receives energy (default: every non-Nyquist mode).
        #[arg(long)]
        band: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded random certified diffeomorphism.
    RandomDiffeo {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 4)]
        band: usize,
        #[arg(long, default_value_t = 0.3)]
        strain: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate one geodesic and write the trajectory as CSV.
    Geodesic {
        #[arg(long, value_enum, default_value = "conformal")]
        metric: MetricArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y0: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v0: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        time: f64,
        #[arg(long, default_value_t = 256)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_suite_config(path: &PathBuf, suite: SuiteName) -> sobodiff::Result<SuiteConfig> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(cfg) = serde_json::from_str::<SuiteConfig>(&text) {
        if cfg.suite != suite {
            return Err(sobodiff::Error::InvalidParameter(format!(
                "config is for suite {}, not {suite}",
                cfg.suite
            )));
        }
        return Ok(cfg);
    }
    let run = RunConfig::from_json(&text)?;
    run.suites
        .into_iter()
        .find(|c| c.suite == suite)
        .ok_or_else(|| sobodiff::Error::InvalidParameter(format!("config lists no {suite} suite")))
}

fn run(cli: Cli) -> sobodiff::Result<bool> {
    match cli.command {
        Command::Verify {
            suite,
            config,
            seed,
            grid,
            out,
        } => {
            let mut cfg = match &config {
                Some(path) => load_suite_config(path, suite)?,
                None => SuiteConfig::new(suite),
            };
            cfg.seed = seed.or(cfg.seed);
            cfg.grid = grid.or(cfg.grid);
            cfg.output = out.or(cfg.output);
            let outcome = match run_suite(&cfg) {
                Ok(r) => SuiteOutcome {
                    suite,
                    pass: r.pass,
                    error: None,
                    report: Some(r),
                },
                Err(e) => {
                    eprintln!("{suite}: {e}");
                    return Err(e);
                }
            };
            println!("{}", summary_line(&outcome));
            Ok(outcome.pass)
        }
        Command::VerifyAll { config, out_dir } => {
            let run = RunConfig::load(&config)?;
            let agg = run_all(&run, out_dir.as_deref())?;
            for w in &agg.warnings {
                eprintln!("warning: {w}");
            }
            for o in &agg.outcomes {
                if let Some(e) = &o.error {
                    eprintln!("{}: {e}", o.suite);
                }
                println!("{}", summary_line(o));
            }
            let passed = agg.outcomes.iter().filter(|o| o.pass).count();
            println!(
                "{} of {} suites passed in {:.1} s: {}",
                passed,
                agg.outcomes.len(),
                agg.wall_time_s,
                if agg.pass { "PASS" } else { "FAIL" }
            );
            Ok(agg.pass)
        }
        Command::Norm { field, method, s } => {
            let f = read_field(&field)?;
            let method = match method {
                MethodArg::Fourier => NormMethod::Fourier,
                MethodArg::Derivative => NormMethod::DerivativeSum,
                MethodArg::Slobodeckij => NormMethod::Slobodeckij,
                MethodArg::Sup => NormMethod::Sup,
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&compute_norm(&f, method, s)?)?
            );
            Ok(true)
        }
        Command::Compose { field, diffeo, out } => {
            let f = read_field(&field)?;
            let phi = read_diffeo(&diffeo)?;
            write_field(&out, &forward_transform(&compose_function(&f, &phi)?)?)?;
            Ok(true)
        }
        Command::Invert {
            diffeo,
            out,
            tol,
            max_iter,
        } => {
            let phi = read_diffeo(&diffeo)?;
            let inv = invert(
                &phi,
                InvertOptions {
                    tol,
                    max_iter,
                    ..InvertOptions::default()
                },
            )?;
            write_diffeo(&out, &inv)?;
            println!("{}", serde_json::to_string_pretty(inv.certificate())?);
            Ok(true)
        }
        Command::RandomField {
            dim,
            grid,
            s,
            components,
            band,
            seed,
            out,
        } => {
            let spec = GridSpec::new(dim, grid)?;
            let mut sampler = FieldSampler::new(s, default_decay_margin(dim), components);
            if let Some(b) = band {
                sampler = sampler.with_band(b);
            }
            let f = sampler.sample_seeded(spec, seed)?;
            write_field(&out, &f)?;
            Ok(true)
        }
        Command::RandomDiffeo {
            dim,
            grid,
            band,
            strain,
            seed,
            out,
        } => {
            let spec = GridSpec::new(dim, grid)?;
            let phi = random_diffeo(spec, &mut trial_rng(seed, 0), band, strain)?;
            write_diffeo(&out, &phi)?;
            println!("{}", serde_json::to_string_pretty(phi.certificate())?);
            Ok(true)
        }
        Command::Geodesic {
            metric,
            y0,
            v0,
            time,
            steps,
            out,
        } => {
            let m = match metric {
                MetricArg::Flat => Metric::flat(y0.len()),
                MetricArg::Exp => Metric::exp_conformal_1d(),
                MetricArg::Conformal => Metric::conformal_2d(0.2),
            };
            let traj = geodesic_flow(&m, &y0, &v0, time, steps)?;
            write_trajectory_csv(&traj, std::fs::File::create(&out)?)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.serial {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
        {
            eprintln!("could not configure a serial thread pool: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
