//! Empirical tail of the plug-in estimator against its sub-Gaussian bound.

use covband::analysis::concentration_bound;
use covband::env::{BanditInstance, CovariateDistribution};
use covband::policy::PolicySpec;
use covband::sim::{run_episode, ReplicationStream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma = 1.0;
    let instance = BanditInstance::new(0.0, sigma, CovariateDistribution::Uniform { lo: -1.0, hi: 1.0 })?;
    // A threshold below the support pulls arm 1 every round.
    let always = PolicySpec::Oracle { theta: -2.0 };
    let taus = [10u64, 50, 200];
    let episodes = 20_000;
    let mut estimates = vec![Vec::with_capacity(episodes); taus.len()];
    for r in 0..episodes as u64 {
        let ep = run_episode(&instance, &always, &taus, &mut ReplicationStream::new(5, r), false)?;
        for (k, c) in ep.checkpoints.iter().enumerate() {
            estimates[k].push(c.theta_hat.unwrap());
        }
    }
    for (k, &tau) in taus.iter().enumerate() {
        for x in [0.1, 0.3, 0.5] {
            let freq = estimates[k].iter().filter(|e| e.abs() >= x).count() as f64 / episodes as f64;
            let bound = concentration_bound(x, tau as f64, sigma);
            println!("tau = {tau:>3}  x = {x}:  P(|theta_hat| >= x) = {freq:.4}  bound {bound:.4}");
        }
    }
    Ok(())
}
