//! Balanced soft assignments of a batch to prototypes.

use clup::clustering::{sinkhorn_codes, sinkhorn_plan, SinkhornConfig};
use ndarray::{array, Axis};

fn main() -> clup::Result<()> {
    // Three samples that all prefer prototype 0.
    let scores = array![[0.9, 0.1, 0.0], [0.8, 0.2, 0.1], [0.7, 0.0, 0.3]];
    for iterations in [1, 3, 20] {
        let cfg = SinkhornConfig {
            epsilon: 0.05,
            iterations,
        };
        let plan = sinkhorn_plan(scores.view(), &cfg)?;
        println!("{iterations:>2} iterations, prototype mass {:.3}", plan.sum_axis(Axis(0)));
    }
    let codes = sinkhorn_codes(scores.view(), &SinkhornConfig::default())?;
    println!("codes:\n{codes:.3}");
    Ok(())
}
