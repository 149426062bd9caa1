//! Forced-sampling schedule for a few rates, with its count bounds.

use covband::schedule::{build_schedule, count_lower_bound, count_upper_bound, thresholds};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for q in [1.0, 0.25, 1.0 / 12.0] {
        let schedule = build_schedule(q, 5000)?;
        let (nu, nu0) = thresholds(q)?;
        println!(
            "q = {q:.4}: {} forced times up to 5000, nu = {nu:.3}, nu0 = {nu0}",
            schedule.times().len()
        );
        println!(
            "  first times: {:?}",
            &schedule.times()[..schedule.times().len().min(12)]
        );
        for t in [10, 100, 1000, 5000] {
            let lower = count_lower_bound(q, t).map_or("-".to_string(), |b| format!("{b:.2}"));
            println!(
                "  N({t:>4}) = {:>3}   upper {:>7.2}   lower {lower:>7}",
                schedule.count_upto(t),
                count_upper_bound(q, t)
            );
        }
    }
    Ok(())
}
