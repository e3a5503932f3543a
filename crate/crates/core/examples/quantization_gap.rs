//! How much is lost by acting on a uniform grid instead of the exact
//! context: the gap between the best per-cell arm and the pointwise best
//! arm, compared with the Lipschitz bound `2 c sqrt(n) / N^(1/n)`.
//!
//! cargo run --release --example quantization_gap

use hsb::environments::{mean_losses, switch_threshold};
use hsb::evaluation::quantization_gap;
use hsb::experiment::verify::SINUSOIDAL_LIPSCHITZ;

fn main() -> hsb::Result<()> {
    println!("best arm changes near s = {:.4}", switch_threshold());
    let reports = quantization_gap(
        |x| mean_losses(x[0], false).to_vec(),
        3,
        SINUSOIDAL_LIPSCHITZ,
        1,
        &[2, 4, 8, 16, 32, 64, 128, 256],
        200_000,
    )?;
    println!("{:>5}{:>12}{:>12}", "N", "gap", "bound");
    for r in &reports {
        println!("{:>5}{:>12.6}{:>12.4}", r.cells, r.gap, r.bound);
    }

    // a two-dimensional loss surface, to show the dimension in the bound
    let plane = quantization_gap(
        |x| vec![x[0] * x[1], 1.0 - x[0], 0.5 * (1.0 - x[1])],
        3,
        1.0,
        2,
        &[4, 16, 64],
        400,
    )?;
    for r in &plane {
        println!("2-d, N={:>3}: gap {:.6} <= {:.4}: {}", r.cells, r.gap, r.bound, r.holds());
    }
    Ok(())
}
