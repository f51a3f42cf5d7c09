//! Command-line front end. Every subcommand builds an [`ExperimentConfig`]
//! and goes through [`run`](super::run::run).
//!
//! Exit codes: 0 success, 1 configuration, usage or I/O error, 2 a failed
//! check (or failed row) under `--strict`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::{
    AGrid, AHatRule, ExperimentConfig, ExperimentKind, EXAMPLE_CONFIG, SCHEMA_HELP,
};
use super::output::{write_csv, write_json};
use super::run::{run, ResultRow};
use crate::blindest::GainEstimator;
use crate::error::{Error, Result};
use crate::model::InputDistribution;

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "REGRETLAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "regretlab",
    version,
    about = "Regret of mismatched MMSE estimation on the gain-uncertain Gaussian channel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Check a JSON config and report every invalid field.
    Validate { config: PathBuf },
    /// Print the config field reference and an example config.
    Schema,
    /// Regret scalar and output Fisher information over a gain grid, for a
    /// unit-variance Gaussian input at the given SNR.
    Fig2 {
        #[arg(long, allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 0.05)]
        start: f64,
        #[arg(long, default_value_t = 3.0)]
        stop: f64,
        #[arg(long, default_value_t = 0.005)]
        step: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Trade-off residual over a gain grid.
    Tradeoff {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Regret against every bound at relative gain offsets.
    Bounds {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Relative offsets ε, with â = a·(1+ε).
        #[arg(long = "rel-offset", value_delimiter = ',', allow_hyphen_values = true, default_values_t = [1e-3, 1e-2])]
        rel_offsets: Vec<f64>,
        /// Outputs per row for the pointwise bound check.
        #[arg(long, default_value_t = 25)]
        points: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Gain-estimator efficiency and expected regret.
    Efficiency {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = EstimatorArg::Mle)]
        estimator: EstimatorArg,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Mle,
    MomentMatching,
}

#[derive(Debug, Args)]
struct ChannelArgs {
    /// Input prior: gaussian(m,v), mixture(w,m,v;...), discrete(p,x;...) or JSON.
    #[arg(long)]
    prior: String,
    #[arg(long, default_value_t = 1.0)]
    noise_var: f64,
    /// Comma-separated gains.
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.5, 1.0, 2.0, 5.0])]
    a_grid: Vec<f64>,
}

impl ChannelArgs {
    fn config(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let prior: InputDistribution = self.prior.parse()?;
        Ok(ExperimentConfig::new(
            kind,
            prior,
            self.noise_var,
            AGrid::List(self.a_grid.clone()),
        ))
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// CSV destination; standard output when neither this nor a JSON path is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON destination.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Exit with status 2 if any check fails or any row errors.
    #[arg(long)]
    strict: bool,
    /// Omit the metadata comment line (it carries a timestamp).
    #[arg(long)]
    no_meta: bool,
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            if code != EXIT_OK {
                eprintln!("\n{SCHEMA_HELP}");
            }
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::ConfigInvalid(_) | Error::InvalidPrior(_)) {
                eprintln!("run `regretlab schema` for the config format");
            }
            EXIT_CONFIG
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            Error::InvalidArgument(format!("{THREADS_ENV}={v} is not a positive integer"))
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Run { config, out } => {
            let c = ExperimentConfig::from_path(&config)?;
            execute(c, &out)
        }
        Command::Validate { config } => {
            let c = ExperimentConfig::from_path(&config)?;
            let rows = c.a_grid.points().len() * c.a_hat_rules.len().max(1);
            println!("ok: {} ({}, {rows} rows)", c.id, c.kind);
            Ok(EXIT_OK)
        }
        Command::Schema => {
            println!("{SCHEMA_HELP}\nexample:\n{EXAMPLE_CONFIG}");
            Ok(EXIT_OK)
        }
        Command::Fig2 {
            snr_db,
            start,
            stop,
            step,
            out,
        } => {
            let noise_var = 10f64.powf(-snr_db / 10.0);
            let prior = InputDistribution::gaussian(0.0, 1.0)?;
            let mut c = ExperimentConfig::new(
                ExperimentKind::Fig2,
                prior,
                noise_var,
                AGrid::Range { start, stop, step },
            );
            c.id = format!("fig2-snr{snr_db}dB");
            let code = execute(c, &out)?;
            Ok(code)
        }
        Command::Tradeoff { channel, out } => {
            execute(channel.config(ExperimentKind::Tradeoff)?, &out)
        }
        Command::Bounds {
            channel,
            rel_offsets,
            points,
            out,
        } => {
            let mut c = channel.config(ExperimentKind::Bounds)?;
            c.a_hat_rules = rel_offsets
                .into_iter()
                .map(|epsilon| AHatRule::RelativeOffset { epsilon })
                .collect();
            c.pointwise_points = points;
            execute(c, &out)
        }
        Command::Efficiency {
            channel,
            n,
            trials,
            seed,
            estimator,
            out,
        } => {
            let mut c = channel.config(ExperimentKind::Efficiency)?;
            let estimator = match estimator {
                EstimatorArg::Mle => GainEstimator::mle(),
                EstimatorArg::MomentMatching => GainEstimator::moment_matching(),
            };
            c.a_hat_rules = vec![AHatRule::FromEstimator { estimator, n }];
            c.trials = trials;
            c.seed = seed;
            execute(c, &out)
        }
    }
}

fn execute(mut config: ExperimentConfig, out: &OutputArgs) -> Result<i32> {
    if out.out.is_some() {
        config.output.csv = out.out.clone();
    }
    if out.json.is_some() {
        config.output.json = out.json.clone();
    }
    let rows = run(&config)?;
    let meta = (!out.no_meta).then(|| meta_line(&config, rows.len()));
    match (&config.output.csv, &config.output.json) {
        (None, None) => {
            let stdout = io::stdout();
            write_csv(stdout.lock(), config.kind, &rows, meta.as_deref())?;
        }
        (csv_path, json_path) => {
            if let Some(p) = csv_path {
                let mut f = BufWriter::new(File::create(p)?);
                write_csv(&mut f, config.kind, &rows, meta.as_deref())?;
                f.flush()?;
            }
            if let Some(p) = json_path {
                let mut f = BufWriter::new(File::create(p)?);
                write_json(&mut f, &rows)?;
                f.flush()?;
            }
        }
    }
    report(&config, &rows);
    let failing = rows.iter().filter(|r| r.has_violation()).count();
    Ok(if out.strict && failing > 0 {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    })
}

fn meta_line(config: &ExperimentConfig, rows: usize) -> String {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!(
        "regretlab {} experiment={} kind={} seed={} rows={rows} generated_unix={now}",
        env!("CARGO_PKG_VERSION"),
        config.id,
        config.kind,
        config.seed
    )
}

/// One-paragraph summary on standard error.
fn report(config: &ExperimentConfig, rows: &[ResultRow]) {
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    let failing = rows.iter().filter(|r| r.has_violation()).count() - errors;
    eprintln!(
        "{}: {} rows, {failing} with failed checks, {errors} errored",
        config.id,
        rows.len()
    );
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("  a = {}: {}", r.a, r.error.as_deref().unwrap_or_default());
    }
    if config.kind == ExperimentKind::Fig2 {
        let best = |name: &str, sign: f64| {
            rows.iter()
                .filter_map(|r| r.metric(name).map(|v| (r.a, sign * v)))
                .min_by(|p, q| p.1.total_cmp(&q.1))
        };
        if let (Some((a_rho, rho)), Some((a_fy, fy))) = (best("rho", 1.0), best("fisher_y", -1.0)) {
            eprintln!(
                "  min rho = {rho:.6} at a = {a_rho}; max I(Y;a) = {:.6} at a = {a_fy}",
                -fy
            );
        }
    }
}
