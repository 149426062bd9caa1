//! Episodes and parallel Monte Carlo experiments.
//!
//! Every step consumes exactly three uniforms from the replication stream:
//! one for the covariate and two for a Box–Muller noise draw. Noise is drawn
//! whether or not arm 1 is pulled, so all policies in a replication see the
//! same `(X_t, eps_t)` sequence.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::hash::Hasher;
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::env::{BanditInstance, EnvError};
use crate::policy::{decide, update, Arm, PolicyError, PolicySpec, PolicyState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("could not build worker pool: {0}")]
    WorkerPool(String),
    #[error("write failed: {0}")]
    Io(#[from] io::Error),
}

/// Deterministic source of uniform variates in `[0, 1)`.
pub trait UniformSource {
    fn next_uniform(&mut self) -> f64;
}

/// ChaCha12 stream for one replication: keyed by the master seed, with the
/// replication index selecting an independent stream.
#[derive(Debug, Clone)]
pub struct ReplicationStream {
    rng: ChaCha12Rng,
}

impl ReplicationStream {
    pub fn new(master_seed: u64, replication: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(replication);
        ReplicationStream { rng }
    }
}

impl UniformSource for ReplicationStream {
    fn next_uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// One step's exogenous randomness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDraw {
    pub x: f64,
    pub eps: f64,
}

/// Draw `(X_t, eps_t)` using exactly three uniforms.
pub fn draw_step(instance: &BanditInstance, source: &mut impl UniformSource) -> StepDraw {
    let x = instance.covariate.sample(source.next_uniform());
    // 1 - u lies in (0, 1], keeping the logarithm finite.
    let u1 = 1.0 - source.next_uniform();
    let u2 = source.next_uniform();
    let eps = instance.sigma * (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos();
    StepDraw { x, eps }
}

pub fn draw_steps(instance: &BanditInstance, source: &mut impl UniformSource, steps: u64) -> Vec<StepDraw> {
    (0..steps).map(|_| draw_step(instance, source)).collect()
}

/// Order-sensitive hash of the raw bits of a draw sequence.
pub fn stream_digest(draws: &[StepDraw]) -> u64 {
    let mut hasher = DefaultHasher::new();
    for d in draws {
        hasher.write_u64(d.x.to_bits());
        hasher.write_u64(d.eps.to_bits());
    }
    hasher.finish()
}

/// Snapshot of an episode after `n` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub n: u64,
    /// `sum |X_t - theta| * I{arm != oracle arm}`.
    pub cum_regret: f64,
    /// Number of steps on which the arm differed from the oracle's.
    pub t_inf: u64,
    pub pulls: u64,
    pub theta_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub checkpoints: Vec<Checkpoint>,
    pub stream_digest: u64,
    pub decisions: Option<Vec<Arm>>,
}

impl EpisodeMetrics {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("episodes have at least one checkpoint")
    }
}

fn check_horizons(horizons: &[u64]) -> Result<(), SimError> {
    if horizons.is_empty() {
        return Err(SimError::InvalidConfig("horizons must be nonempty".into()));
    }
    if horizons[0] == 0 {
        return Err(SimError::InvalidConfig("horizons must be positive".into()));
    }
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::InvalidConfig("horizons must be strictly increasing".into()));
    }
    Ok(())
}

/// Run one episode drawing from `source`, snapshotting at each horizon.
pub fn run_episode(
    instance: &BanditInstance,
    spec: &PolicySpec,
    horizons: &[u64],
    source: &mut impl UniformSource,
    record_decisions: bool,
) -> Result<EpisodeMetrics, SimError> {
    check_horizons(horizons)?;
    let draws = draws_for(instance, source, horizons);
    run_episode_on_draws(instance, spec, horizons, &draws, record_decisions)
}

fn draws_for(instance: &BanditInstance, source: &mut impl UniformSource, horizons: &[u64]) -> Vec<StepDraw> {
    draw_steps(instance, source, *horizons.last().unwrap_or(&0))
}

/// Run one episode over pre-drawn randomness. `draws` must cover the last horizon.
pub fn run_episode_on_draws(
    instance: &BanditInstance,
    spec: &PolicySpec,
    horizons: &[u64],
    draws: &[StepDraw],
    record_decisions: bool,
) -> Result<EpisodeMetrics, SimError> {
    check_horizons(horizons)?;
    let steps = *horizons.last().unwrap();
    if (draws.len() as u64) < steps {
        return Err(SimError::InvalidConfig(format!(
            "{} draws cannot cover {steps} steps",
            draws.len()
        )));
    }
    spec.validate(steps)?;

    let mut state = PolicyState::new();
    let mut cum_regret = 0.0;
    let mut t_inf = 0u64;
    let mut checkpoints = Vec::with_capacity(horizons.len());
    let mut next_checkpoint = horizons.iter().peekable();
    let mut decisions = record_decisions.then(|| Vec::with_capacity(steps as usize));

    for draw in &draws[..steps as usize] {
        let arm = decide(spec, &state, draw.x);
        let reward = arm.is_one().then(|| instance.reward_arm1(draw.x, draw.eps));
        state = update(state, draw.x, arm, reward)?;
        if arm.is_one() != instance.oracle_arm(draw.x) {
            cum_regret += (draw.x - instance.theta).abs();
            t_inf += 1;
        }
        if let Some(d) = decisions.as_mut() {
            d.push(arm);
        }
        if next_checkpoint.peek() == Some(&&state.t) {
            next_checkpoint.next();
            checkpoints.push(Checkpoint {
                n: state.t,
                cum_regret,
                t_inf,
                pulls: state.pulls,
                theta_hat: state.theta_hat().ok(),
            });
        }
    }

    Ok(EpisodeMetrics {
        checkpoints,
        stream_digest: stream_digest(&draws[..steps as usize]),
        decisions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub instance: BanditInstance,
    pub policies: Vec<PolicySpec>,
    pub horizons: Vec<u64>,
    pub replications: u64,
    pub master_seed: u64,
    pub record_trajectories: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.instance.validate()?;
        check_horizons(&self.horizons)?;
        if self.replications == 0 {
            return Err(SimError::InvalidConfig("replications must be >= 1".into()));
        }
        if self.policies.is_empty() {
            return Err(SimError::InvalidConfig("at least one policy is required".into()));
        }
        let steps = *self.horizons.last().unwrap();
        for spec in &self.policies {
            spec.validate(steps)?;
        }
        Ok(())
    }
}

/// Mean, sample standard deviation (`n - 1` divisor) and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary {
            mean,
            sd,
            se: sd / n.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub policy: String,
    pub horizon: u64,
    pub regret: Summary,
    pub t_inf: Summary,
    pub reps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub labels: Vec<String>,
    pub horizons: Vec<u64>,
    /// `episodes[r][k]`: replication `r`, policy `k`.
    pub episodes: Vec<Vec<EpisodeMetrics>>,
    /// One row per `(policy, horizon)`, policies in config order.
    pub aggregate: Vec<AggregateRow>,
}

impl ExperimentResult {
    pub fn row(&self, policy: usize, horizon: u64) -> Option<&AggregateRow> {
        let h = self.horizons.iter().position(|&n| n == horizon)?;
        self.aggregate.get(policy * self.horizons.len() + h)
    }

    pub fn row_by_label(&self, label: &str, horizon: u64) -> Option<&AggregateRow> {
        let k = self.labels.iter().position(|l| l == label)?;
        self.row(k, horizon)
    }

    /// Per-replication CSV: `policy,horizon,replication,regret,t_inf,pulls`.
    pub fn replications_csv(&self) -> String {
        let mut out = String::from("policy,horizon,replication,regret,t_inf,pulls\n");
        for (k, label) in self.labels.iter().enumerate() {
            for (r, episode) in self.episodes.iter().enumerate() {
                for c in &episode[k].checkpoints {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        label,
                        c.n,
                        r,
                        format_g17(c.cum_regret),
                        c.t_inf,
                        c.pulls
                    );
                }
            }
        }
        out
    }

    /// Aggregate CSV:
    /// `policy,horizon,mean_regret,sd_regret,se_regret,mean_tinf,sd_tinf,se_tinf,reps`.
    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("policy,horizon,mean_regret,sd_regret,se_regret,mean_tinf,sd_tinf,se_tinf,reps\n");
        for row in &self.aggregate {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                row.policy,
                row.horizon,
                format_g17(row.regret.mean),
                format_g17(row.regret.sd),
                format_g17(row.regret.se),
                format_g17(row.t_inf.mean),
                format_g17(row.t_inf.sd),
                format_g17(row.t_inf.se),
                row.reps
            );
        }
        out
    }
}

/// Run every policy on every replication using `workers` threads.
///
/// Output depends only on `config`: replication `r` always uses stream `r`,
/// and results are merged in replication order.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ExperimentResult, SimError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::WorkerPool(e.to_string()))?;

    let episodes: Vec<Vec<EpisodeMetrics>> = pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|r| run_replication(config, r))
            .collect::<Result<_, _>>()
    })?;

    let labels: Vec<String> = config.policies.iter().map(PolicySpec::label).collect();
    let mut aggregate = Vec::with_capacity(labels.len() * config.horizons.len());
    for (k, label) in labels.iter().enumerate() {
        for (h, &n) in config.horizons.iter().enumerate() {
            let regret: Vec<f64> = episodes.iter().map(|e| e[k].checkpoints[h].cum_regret).collect();
            let t_inf: Vec<f64> = episodes.iter().map(|e| e[k].checkpoints[h].t_inf as f64).collect();
            aggregate.push(AggregateRow {
                policy: label.clone(),
                horizon: n,
                regret: Summary::of(&regret),
                t_inf: Summary::of(&t_inf),
                reps: config.replications,
            });
        }
    }

    Ok(ExperimentResult {
        labels,
        horizons: config.horizons.clone(),
        episodes,
        aggregate,
    })
}

fn run_replication(config: &ExperimentConfig, r: u64) -> Result<Vec<EpisodeMetrics>, SimError> {
    let mut stream = ReplicationStream::new(config.master_seed, r);
    let draws = draws_for(&config.instance, &mut stream, &config.horizons);
    config
        .policies
        .iter()
        .map(|spec| {
            run_episode_on_draws(
                &config.instance,
                spec,
                &config.horizons,
                &draws,
                config.record_trajectories,
            )
        })
        .collect()
}

/// `%.17g`-style rendering: 17 significant digits with trailing
/// zeros trimmed, switching to exponent form outside `[1e-5, 1e17)`.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exponent) = sci.split_once('e').expect("exponent form");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if (-5..17).contains(&exponent) {
        let decimals = (16 - exponent).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), sign, exponent.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::CovariateDistribution;
    use crate::schedule::build_schedule;

    struct Fixed {
        values: Vec<f64>,
        at: usize,
    }

    impl UniformSource for Fixed {
        fn next_uniform(&mut self) -> f64 {
            let v = self.values[self.at % self.values.len()];
            self.at += 1;
            v
        }
    }

    fn uniform_instance() -> BanditInstance {
        BanditInstance::new(0.0, 1.0, CovariateDistribution::Uniform { lo: -1.0, hi: 1.0 }).unwrap()
    }

    #[test]
    fn three_uniforms_per_step() {
        let inst = uniform_instance();
        let mut src = Fixed {
            values: vec![0.75, 0.0, 0.25],
            at: 0,
        };
        let d = draw_step(&inst, &mut src);
        assert_eq!(src.at, 3);
        assert_eq!(d.x, 0.5);
        // u1 = 1 gives zero radius.
        assert_eq!(d.eps, 0.0);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = {
            let mut s = ReplicationStream::new(9, 3);
            (0..5).map(|_| s.next_uniform()).collect()
        };
        let b: Vec<f64> = {
            let mut s = ReplicationStream::new(9, 3);
            (0..5).map(|_| s.next_uniform()).collect()
        };
        let c: Vec<f64> = {
            let mut s = ReplicationStream::new(9, 4);
            (0..5).map(|_| s.next_uniform()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|u| (0.0..1.0).contains(u)));
    }

    #[test]
    fn oracle_has_zero_regret() {
        let inst = uniform_instance();
        let spec = PolicySpec::Oracle { theta: 0.0 };
        let mut src = ReplicationStream::new(1, 0);
        let m = run_episode(&inst, &spec, &[10, 100, 1000], &mut src, false).unwrap();
        assert_eq!(m.checkpoints.len(), 3);
        for c in &m.checkpoints {
            assert_eq!(c.cum_regret, 0.0);
            assert_eq!(c.t_inf, 0);
        }
    }

    #[test]
    fn noiseless_nearly_myopic_errs_at_most_once() {
        // The inflation scales with sigma, so it vanishes with the noise.
        let sigma = 1e-300;
        let inst = BanditInstance::new(0.1, sigma, CovariateDistribution::Uniform { lo: -1.0, hi: 1.0 }).unwrap();
        let spec = PolicySpec::nearly_myopic_theory(sigma);
        for seed in 0..20 {
            let mut src = ReplicationStream::new(seed, 0);
            let m = run_episode(&inst, &spec, &[500], &mut src, false).unwrap();
            assert!(m.last().t_inf <= 1, "seed {seed}: {}", m.last().t_inf);
        }
    }

    #[test]
    fn checkpoints_are_monotone_and_conserve_steps() {
        let inst = uniform_instance();
        let schedule = build_schedule(1.0 / 12.0, 300).unwrap();
        let mut src = ReplicationStream::new(5, 2);
        let m = run_episode(
            &inst,
            &PolicySpec::ForcedSampling { schedule },
            &[50, 100, 300],
            &mut src,
            true,
        )
        .unwrap();
        let d = m.decisions.as_ref().unwrap();
        assert_eq!(d.len(), 300);
        for w in m.checkpoints.windows(2) {
            assert!(w[0].cum_regret <= w[1].cum_regret);
            assert!(w[0].t_inf <= w[1].t_inf);
        }
        for c in &m.checkpoints {
            let ones = d[..c.n as usize].iter().filter(|a| a.is_one()).count() as u64;
            assert_eq!(c.pulls, ones);
            assert!(c.t_inf <= c.n);
        }
    }

    #[test]
    fn horizons_validated() {
        let inst = uniform_instance();
        let mut src = ReplicationStream::new(0, 0);
        assert!(run_episode(&inst, &PolicySpec::Myopic, &[10, 10], &mut src, false).is_err());
        assert!(run_episode(&inst, &PolicySpec::Myopic, &[], &mut src, false).is_err());
        assert!(run_episode(&inst, &PolicySpec::Myopic, &[0, 5], &mut src, false).is_err());
    }

    #[test]
    fn single_oracle_replication() {
        let config = ExperimentConfig {
            instance: uniform_instance(),
            policies: vec![PolicySpec::Oracle { theta: 0.0 }],
            horizons: vec![20],
            replications: 1,
            master_seed: 3,
            record_trajectories: false,
        };
        let res = run_experiment(&config, 2).unwrap();
        let row = &res.aggregate[0];
        assert_eq!((row.regret.mean, row.regret.sd, row.reps), (0.0, 0.0, 1));
    }

    #[test]
    fn summary_uses_unbiased_variance() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s.se - s.sd / 2.0).abs() < 1e-15);
    }

    #[test]
    fn g17_format() {
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(250.0), "250");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(format_g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(-2.5), "-2.5");
        for x in [0.1, 1.0 / 3.0, 12345.678, 7.188e-4, 1e-7, 6.02e23] {
            assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }
    }
}
