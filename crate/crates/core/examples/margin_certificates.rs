//! Margin-class certificates of the built-in covariate laws.

use covband::env::{margin_params, CovariateDistribution};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        (
            "uniform[-1,1]",
            CovariateDistribution::Uniform { lo: -1.0, hi: 1.0 },
            0.0,
        ),
        (
            "two-point ±1",
            CovariateDistribution::TwoPoint {
                x_minus: -1.0,
                x_plus: 1.0,
                prob_plus: 0.5,
            },
            0.0,
        ),
        (
            "power alpha=0.5",
            CovariateDistribution::PowerMargin {
                alpha: 0.5,
                center: 0.0,
                half_width: 1.0,
            },
            0.0,
        ),
        (
            "power alpha=3",
            CovariateDistribution::PowerMargin {
                alpha: 3.0,
                center: 0.0,
                half_width: 1.0,
            },
            0.0,
        ),
        (
            "adversarial",
            CovariateDistribution::adversarial(1.0, 1.0, 0.45, 0.1),
            0.1,
        ),
    ];
    println!(
        "{:<16} {:>6} {:>8} {:>6} {:>6} {:>6} {:>8}",
        "law", "alpha", "C*", "x0", "p", "p1", "mu"
    );
    for (name, law, theta) in cases {
        let m = margin_params(&law, theta)?;
        println!(
            "{name:<16} {:>6} {:>8.4} {:>6.3} {:>6.3} {:>6.3} {:>8.4}",
            m.alpha,
            m.c_star,
            m.x0,
            m.p,
            m.p1,
            m.mu.unwrap_or(f64::NAN)
        );
        // Spot-check the margin condition on a grid inside the certified radius.
        for k in 1..=10 {
            let x = m.x0 * k as f64 / 10.0;
            let mass = law.prob_closed(theta - x, theta + x);
            let bound = if m.alpha.is_infinite() { 0.0 } else { m.margin_bound(x) };
            assert!(mass <= bound + 1e-12, "{name}: mass {mass} above {bound} at {x}");
        }
    }
    Ok(())
}
