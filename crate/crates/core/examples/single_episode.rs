//! One episode of each policy on shared randomness, with its decision trace.

use covband::env::{BanditInstance, CovariateDistribution};
use covband::policy::PolicySpec;
use covband::schedule::build_schedule;
use covband::sim::{draw_steps, run_episode_on_draws, ReplicationStream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instance = BanditInstance::new(0.2, 1.0, CovariateDistribution::Uniform { lo: -1.0, hi: 1.0 })?;
    let horizons = [20, 100, 1000];
    let draws = draw_steps(&instance, &mut ReplicationStream::new(42, 0), 1000);
    let policies = [
        PolicySpec::Oracle { theta: instance.theta },
        PolicySpec::Myopic,
        PolicySpec::NearlyMyopic { c: 1.0 },
        PolicySpec::ForcedSampling {
            schedule: build_schedule(1.0 / 12.0, 1000)?,
        },
    ];
    for spec in &policies {
        let ep = run_episode_on_draws(&instance, spec, &horizons, &draws, true)?;
        println!("{}", spec.label());
        for c in &ep.checkpoints {
            println!(
                "  n = {:>4}  regret {:>8.4}  t_inf {:>4}  pulls {:>4}  theta_hat {}",
                c.n,
                c.cum_regret,
                c.t_inf,
                c.pulls,
                c.theta_hat.map_or("-".into(), |v| format!("{v:+.4}"))
            );
        }
        let trace: String = ep.decisions.unwrap()[..40]
            .iter()
            .map(|a| if a.is_one() { '1' } else { '0' })
            .collect();
        println!("  first 40 arms: {trace}");
    }
    Ok(())
}
