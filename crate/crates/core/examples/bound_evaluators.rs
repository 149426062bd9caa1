//! Lower-bound records on a grid, as emitted by `covband bounds`.

use covband::analysis::{bound_record, lemma5_floor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for alpha in [0.5, 1.0, 2.0] {
        for n in [100.0, 1e4, 1e6] {
            let record = bound_record(alpha, 1.0, 1.0, Some(0.5), n)?;
            println!("{}", serde_json::to_string(&record)?);
        }
    }
    // The regret floor is the inferior-sampling floor pushed through the margin condition.
    let s = 40.0;
    println!(
        "floor for s_n = {s} at n = 1e4, alpha = 1: {:.4}",
        lemma5_floor(s, 1e4, 1.0, 1.0, 0.5)
    );
    Ok(())
}
