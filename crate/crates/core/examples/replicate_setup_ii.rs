//! Built-in experiment with a covariate at ±1 with equal mass: aggregate table and growth fits.
//!
//! Pass a replication count as the first argument (default 500).

use covband::analysis::fit_growth;
use covband::cli::{setup_document, Setup, SETUP_REPLICATIONS, SETUP_SEED};
use covband::sim::run_experiment;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reps = std::env::args().nth(1).map_or(Ok(SETUP_REPLICATIONS), |s| s.parse())?;
    let config = setup_document(Setup::TwoPoint, reps, SETUP_SEED).to_experiment()?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let result = run_experiment(&config, workers)?;
    println!("{:<28} {:>5} {:>18} {:>18}", "policy", "n", "regret (se)", "t_inf (se)");
    for row in &result.aggregate {
        println!(
            "{:<28} {:>5} {:>10.3} ({:>5.3}) {:>10.2} ({:>5.2})",
            row.policy, row.horizon, row.regret.mean, row.regret.se, row.t_inf.mean, row.t_inf.se
        );
    }
    for label in &result.labels {
        let points: Vec<(f64, f64)> = result
            .horizons
            .iter()
            .map(|&n| (n as f64, result.row_by_label(label, n).unwrap().regret.mean))
            .collect();
        let fit = fit_growth(&points)?;
        println!(
            "{label}: regret growth {:?} {:?} (r2 {:.4})",
            fit.model, fit.parameters, fit.r_squared
        );
    }
    Ok(())
}
