//! Two-hypothesis adversarial pair: every policy pays the worst-case
//! inferior-sampling floor on at least one of the two instances.

use covband::analysis::isr_lower_bound;
use covband::env::adversarial_pair;
use covband::policy::PolicySpec;
use covband::schedule::build_schedule;
use covband::sim::{run_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (alpha, c_star, sigma, x0) = (1.0, 1.0, 1.0, 0.45);
    let horizons = vec![100, 200, 400];
    let n = *horizons.last().unwrap();
    let (null, alt, delta) = adversarial_pair(alpha, c_star, x0, sigma, n)?;
    println!(
        "delta = {delta:.4}, floor at n = {n}: {:.4}",
        isr_lower_bound(alpha, c_star, sigma, n as f64)?
    );

    let policies = vec![
        PolicySpec::Myopic,
        PolicySpec::NearlyMyopic { c: 1.0 },
        PolicySpec::ForcedSampling {
            schedule: build_schedule(1.0 / 12.0, n)?,
        },
        PolicySpec::Oracle { theta: 0.0 },
        PolicySpec::Oracle { theta: delta },
    ];
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let run = |instance, seed| {
        run_experiment(
            &ExperimentConfig {
                instance,
                policies: policies.clone(),
                horizons: horizons.clone(),
                replications: 1000,
                master_seed: seed,
                record_trajectories: false,
            },
            workers,
        )
    };
    let (on_null, on_alt) = (run(null, 1)?, run(alt, 2)?);
    for (k, spec) in policies.iter().enumerate() {
        let a = on_null.row(k, n).unwrap().t_inf.mean;
        let b = on_alt.row(k, n).unwrap().t_inf.mean;
        println!(
            "{:<32} t_inf null {a:>7.2}  alt {b:>7.2}  worst {:>7.2}",
            spec.label(),
            a.max(b)
        );
    }
    Ok(())
}
