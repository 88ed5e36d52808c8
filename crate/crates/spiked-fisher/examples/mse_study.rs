//! Estimator accuracy by dimension: replicate the bundled study designs at
//! two sizes and print mean estimates and mean squared errors per spike.

use spiked_fisher::fluctuation::Field;
use spiked_fisher::simulate::{run_mse, study_design_cov, study_design_fisher};
use spiked_fisher::Result;

fn main() -> Result<()> {
    let designs = vec![
        (study_design_cov(100, Field::Real)?, 120),
        (study_design_cov(200, Field::Real)?, 60),
        (study_design_fisher(100, Field::Real)?, 120),
        (study_design_fisher(200, Field::Real)?, 60),
    ];
    let summary = run_mse(&designs, 99)?;

    println!(
        "{:>12} {:>5} {:>7} {:>10} {:>12} {:>6}",
        "estimator", "p", "spike", "mean", "mse", "reps"
    );
    for c in &summary.cells {
        println!(
            "{:>12} {:>5} {:>7.2} {:>10.4} {:>12.5} {:>6}",
            c.kind, c.p, c.spike_value, c.estimate_mean, c.mse, c.reps
        );
    }
    println!("\nmse shrinks with p; the ratio ensemble concentrates faster here");
    Ok(())
}
