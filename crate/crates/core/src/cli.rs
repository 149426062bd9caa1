//! Config parsing, subcommand dispatch and file emission for the `covband` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{self, AnalysisError};
use crate::env::{self, BanditInstance, CovariateDistribution, EnvError};
use crate::policy::PolicySpec;
use crate::schedule::{self, ScheduleError};
use crate::sim::{self, format_g17, ExperimentConfig, ExperimentResult, SimError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    /// 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 2,
            CliError::Io { .. } | CliError::Internal(_) => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) | SimError::Env(_) | SimError::Policy(_) => CliError::Validation(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ScheduleError> for CliError {
    fn from(e: ScheduleError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Validation(e.to_string())
    }
}

/// A policy as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyEntry {
    /// Threshold at the instance's true `theta`.
    Oracle,
    Myopic,
    NearlyMyopic {
        c: f64,
    },
    Forced {
        q: f64,
    },
    /// Oracle-style rule at a fixed, possibly wrong, threshold.
    FixedThreshold {
        theta: f64,
    },
}

/// On-disk experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub instance: BanditInstance,
    pub policies: Vec<PolicyEntry>,
    pub horizons: Vec<u64>,
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub record_trajectories: bool,
}

impl ConfigDocument {
    /// SHA-256 of the canonical re-serialization, hex encoded.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn to_experiment(&self) -> Result<ExperimentConfig, CliError> {
        if self.horizons.is_empty() {
            return Err(CliError::Validation("horizons must be nonempty".into()));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Validation("horizons must be strictly increasing".into()));
        }
        if self.horizons[0] == 0 {
            return Err(CliError::Validation("horizons must be positive".into()));
        }
        if self.replications == 0 {
            return Err(CliError::Validation("replications must be >= 1".into()));
        }
        if self.policies.is_empty() {
            return Err(CliError::Validation("policies must be nonempty".into()));
        }
        self.instance.validate()?;
        let steps = *self.horizons.last().unwrap();
        let policies = self
            .policies
            .iter()
            .map(|p| policy_from_entry(p, &self.instance, steps))
            .collect::<Result<Vec<_>, _>>()?;
        let config = ExperimentConfig {
            instance: self.instance,
            policies,
            horizons: self.horizons.clone(),
            replications: self.replications,
            master_seed: self.seed,
            record_trajectories: self.record_trajectories,
        };
        config.validate()?;
        Ok(config)
    }
}

fn policy_from_entry(entry: &PolicyEntry, instance: &BanditInstance, steps: u64) -> Result<PolicySpec, CliError> {
    Ok(match entry {
        PolicyEntry::Oracle => PolicySpec::Oracle { theta: instance.theta },
        PolicyEntry::Myopic => PolicySpec::Myopic,
        PolicyEntry::NearlyMyopic { c } => PolicySpec::NearlyMyopic { c: *c },
        PolicyEntry::Forced { q } => PolicySpec::ForcedSampling {
            schedule: schedule::build_schedule(*q, steps)?,
        },
        PolicyEntry::FixedThreshold { theta } => PolicySpec::Oracle { theta: *theta },
    })
}

/// Parse a JSON config document without validating it.
pub fn parse_document(text: &str) -> Result<ConfigDocument, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: ConfigDocument = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| CliError::Parse {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(doc)
}

/// Parse and validate a JSON config into an experiment.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    parse_document(text)?.to_experiment()
}

/// The two built-in replication setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Setup {
    /// Uniform covariate on `[-1, 1]`.
    #[value(name = "i")]
    Uniform,
    /// Covariate `+-1` with equal probability.
    #[value(name = "ii")]
    TwoPoint,
}

/// Checkpoints shared by both built-in setups.
pub const SETUP_HORIZONS: [u64; 9] = [250, 500, 750, 1000, 2000, 2500, 3000, 4000, 5000];

pub const SETUP_REPLICATIONS: u64 = 500;

pub const SETUP_SEED: u64 = 20_240_101;

/// Built-in setup: `theta = 0`, `sigma = 1`, myopic, nearly-myopic with `c = 1`
/// and forced sampling with `q = 1/12`.
pub fn setup_document(setup: Setup, replications: u64, seed: u64) -> ConfigDocument {
    let covariate = match setup {
        Setup::Uniform => CovariateDistribution::Uniform { lo: -1.0, hi: 1.0 },
        Setup::TwoPoint => CovariateDistribution::TwoPoint {
            x_minus: -1.0,
            x_plus: 1.0,
            prob_plus: 0.5,
        },
    };
    ConfigDocument {
        instance: BanditInstance {
            theta: 0.0,
            sigma: 1.0,
            covariate,
        },
        policies: vec![
            PolicyEntry::Myopic,
            PolicyEntry::NearlyMyopic { c: 1.0 },
            PolicyEntry::Forced { q: 1.0 / 12.0 },
        ],
        horizons: SETUP_HORIZONS.to_vec(),
        replications,
        seed,
        record_trajectories: false,
    }
}

/// Written next to every run's data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub outputs: Vec<String>,
    pub wall_time: f64,
}

/// Plot-ready rows `policy,n,mean,lo,hi` with a 95% normal interval.
pub fn plot_csv(result: &ExperimentResult, regret: bool) -> String {
    let mut out = String::from("policy,n,mean,lo,hi\n");
    for row in &result.aggregate {
        let s = if regret { row.regret } else { row.t_inf };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.policy,
            row.horizon,
            format_g17(s.mean),
            format_g17(s.mean - 1.96 * s.se),
            format_g17(s.mean + 1.96 * s.se)
        ));
    }
    out
}

fn decisions_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("policy,replication,decisions\n");
    for (k, label) in result.labels.iter().enumerate() {
        for (r, episode) in result.episodes.iter().enumerate() {
            if let Some(d) = &episode[k].decisions {
                let bits: String = d.iter().map(|a| if a.is_one() { '1' } else { '0' }).collect();
                out.push_str(&format!("{label},{r},{bits}\n"));
            }
        }
    }
    out
}

fn write_file(dir: &Path, name: &str, contents: &str, outputs: &mut Vec<String>) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
    outputs.push(name.to_string());
    Ok(())
}

/// Run `doc` and write its data files plus `manifest.json` into `out`.
pub fn run_to_dir(doc: &ConfigDocument, out: &Path, workers: usize, plots: bool) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let config = doc.to_experiment()?;
    let result = sim::run_experiment(&config, workers)?;
    fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut outputs = Vec::new();
    write_file(out, "replications.csv", &result.replications_csv(), &mut outputs)?;
    write_file(out, "aggregate.csv", &result.aggregate_csv(), &mut outputs)?;
    if plots {
        write_file(out, "plot_regret.csv", &plot_csv(&result, true), &mut outputs)?;
        write_file(out, "plot_tinf.csv", &plot_csv(&result, false), &mut outputs)?;
    }
    if config.record_trajectories {
        write_file(out, "decisions.csv", &decisions_csv(&result), &mut outputs)?;
    }
    let manifest = RunManifest {
        config_digest: doc.digest(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: doc.seed,
        outputs,
        wall_time: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    let path = out.join("manifest.json");
    fs::write(&path, json + "\n").map_err(|source| CliError::Io { path, source })?;
    Ok(manifest)
}

/// CSV `k,tau,count,count_upper,count_lower` for every schedule time.
pub fn schedule_csv(q: f64, horizon: u64) -> Result<String, CliError> {
    let s = schedule::build_schedule(q, horizon)?;
    let mut out = String::from("k,tau,count,count_upper,count_lower\n");
    for (i, &tau) in s.times().iter().enumerate() {
        let lower = schedule::count_lower_bound(q, tau).map(format_g17).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            tau,
            s.count_upto(tau),
            format_g17(schedule::count_upper_bound(q, tau)),
            lower
        ));
    }
    Ok(out)
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Validation(format!("bad number `{v}`: {e}")))
        })
        .collect()
}

/// JSON lines, one per point of the cartesian grid.
pub fn bounds_lines(alpha: &str, c_star: &str, sigma: &str, x0: Option<&str>, n: &str) -> Result<String, CliError> {
    let alphas = parse_grid(alpha)?;
    let c_stars = parse_grid(c_star)?;
    let sigmas = parse_grid(sigma)?;
    let x0s: Vec<Option<f64>> = match x0 {
        Some(text) => parse_grid(text)?.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let ns = parse_grid(n)?;
    let mut out = String::new();
    for &a in &alphas {
        for &c in &c_stars {
            for &s in &sigmas {
                for &x in &x0s {
                    for &n in &ns {
                        let record = analysis::bound_record(a, c, s, x, n)?;
                        out.push_str(&serde_json::to_string(&record).map_err(|e| CliError::Internal(e.to_string()))?);
                        out.push('\n');
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Family {
    Uniform,
    TwoPoint,
    PowerMargin,
    AdversarialMargin,
}

#[derive(Debug, Clone, clap::Args)]
pub struct MarginArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_minus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_plus: Option<f64>,
    #[arg(long)]
    prob_plus: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    center: Option<f64>,
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    c_star: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

fn need(v: Option<f64>, flag: &str, family: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Validation(format!("--{flag} is required for family {family}")))
}

impl MarginArgs {
    pub fn distribution(&self) -> Result<CovariateDistribution, CliError> {
        Ok(match self.family {
            Family::Uniform => CovariateDistribution::Uniform {
                lo: need(self.lo, "lo", "uniform")?,
                hi: need(self.hi, "hi", "uniform")?,
            },
            Family::TwoPoint => CovariateDistribution::TwoPoint {
                x_minus: need(self.x_minus, "x-minus", "two_point")?,
                x_plus: need(self.x_plus, "x-plus", "two_point")?,
                prob_plus: need(self.prob_plus, "prob-plus", "two_point")?,
            },
            Family::PowerMargin => CovariateDistribution::PowerMargin {
                alpha: need(self.alpha, "alpha", "power_margin")?,
                center: need(self.center, "center", "power_margin")?,
                half_width: need(self.half_width, "half-width", "power_margin")?,
            },
            Family::AdversarialMargin => CovariateDistribution::adversarial(
                need(self.alpha, "alpha", "adversarial_margin")?,
                need(self.c_star, "c-star", "adversarial_margin")?,
                need(self.x0, "x0", "adversarial_margin")?,
                need(self.delta, "delta", "adversarial_margin")?,
            ),
        })
    }
}

#[derive(Debug, Serialize)]
struct MarginReport {
    theta: f64,
    covariate: CovariateDistribution,
    certificate: env::MarginParams,
}

/// JSON certificate for a covariate law around `theta`.
pub fn margin_json(args: &MarginArgs) -> Result<String, CliError> {
    let covariate = args.distribution()?;
    covariate.validate()?;
    let certificate = env::margin_params(&covariate, args.theta)?;
    let report = MarginReport {
        theta: args.theta,
        covariate,
        certificate,
    };
    serde_json::to_string(&report)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Internal(e.to_string()))
}

#[derive(Debug, Parser)]
#[command(
    name = "covband",
    version,
    about = "Covariate one-armed bandit experiments and bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, env = "COVBAND_WORKERS")]
        workers: Option<usize>,
    },
    /// Run one of the two built-in setups end to end.
    ReplicatePaper {
        #[arg(value_enum)]
        setup: Setup,
        #[arg(long, default_value_t = SETUP_REPLICATIONS)]
        reps: u64,
        #[arg(long, default_value_t = SETUP_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "COVBAND_WORKERS")]
        workers: Option<usize>,
    },
    /// Print the forced-sampling schedule with its count bounds.
    Schedule {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        horizon: u64,
    },
    /// Print lower-bound records for a parameter grid (comma-separated values).
    Bounds {
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        c_star: String,
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        x0: Option<String>,
        #[arg(long)]
        n: String,
    },
    /// Print the margin-class certificate of a covariate law.
    Margin(MarginArgs),
}

fn default_workers(workers: Option<usize>) -> usize {
    workers
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, workers } => {
            let text = fs::read_to_string(&config).map_err(|source| CliError::Io {
                path: config.clone(),
                source,
            })?;
            let doc = parse_document(&text)?;
            let manifest = run_to_dir(&doc, &out, default_workers(workers), true)?;
            eprintln!(
                "wrote {} files to {} in {:.2}s",
                manifest.outputs.len() + 1,
                out.display(),
                manifest.wall_time
            );
        }
        Command::ReplicatePaper {
            setup,
            reps,
            seed,
            out,
            workers,
        } => {
            let doc = setup_document(setup, reps, seed);
            let out = out.unwrap_or_else(|| {
                PathBuf::from(match setup {
                    Setup::Uniform => "out/setup_i",
                    Setup::TwoPoint => "out/setup_ii",
                })
            });
            let manifest = run_to_dir(&doc, &out, default_workers(workers), true)?;
            eprintln!(
                "wrote {} files to {} in {:.2}s",
                manifest.outputs.len() + 1,
                out.display(),
                manifest.wall_time
            );
        }
        Command::Schedule { q, horizon } => print!("{}", schedule_csv(q, horizon)?),
        Command::Bounds {
            alpha,
            c_star,
            sigma,
            x0,
            n,
        } => print!("{}", bounds_lines(&alpha, &c_star, &sigma, x0.as_deref(), &n)?),
        Command::Margin(args) => print!("{}", margin_json(&args)?),
    }
    Ok(())
}

/// Entry point of the binary; returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
