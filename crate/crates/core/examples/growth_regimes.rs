//! Upper-envelope rates and values across margin exponents, next to the matching floor.

use covband::analysis::{isr_lower_bound, upper_envelope, EnvelopeQuery, MetricKind, PolicyKind};
use covband::env::MarginParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma = 0.25;
    for alpha in [0.5, 1.0, 2.0, 3.0, f64::INFINITY] {
        let margin = MarginParams {
            alpha,
            c_star: 1.0,
            x0: 0.25,
            p: 0.5,
            p1: 0.25,
            mu: Some(0.5),
        };
        println!("alpha = {alpha}");
        for policy in [PolicyKind::NearlyMyopic, PolicyKind::ForcedSampling] {
            for metric in [MetricKind::InferiorSampling, MetricKind::Regret] {
                let values: Vec<String> = [1_000u64, 100_000, 10_000_000]
                    .iter()
                    .map(|&n| {
                        let query = EnvelopeQuery {
                            policy,
                            metric,
                            n,
                            sigma,
                            margin,
                            q: Some(1.0 / 12.0),
                        };
                        match upper_envelope(&query) {
                            Ok(e) => e.value.map_or("-".into(), |v| format!("{v:.3e}")),
                            Err(e) => format!("({e})"),
                        }
                    })
                    .collect();
                let rate = upper_envelope(&EnvelopeQuery {
                    policy,
                    metric,
                    n: 1000,
                    sigma,
                    margin,
                    q: Some(1.0 / 12.0),
                })
                .map_or("-".into(), |e| e.rate_label);
                println!(
                    "  {policy:?} {metric:?}: rate {rate}, n = 1e3/1e5/1e7 -> {}",
                    values.join(" / ")
                );
            }
        }
        if alpha <= 2.0 {
            println!("  floor at n = 1e7: {:.3e}", isr_lower_bound(alpha, 1.0, sigma, 1e7)?);
        }
    }
    Ok(())
}
