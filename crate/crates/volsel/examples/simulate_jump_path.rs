//! Simulate one contaminated study-1 path and dump it as CSV.
//!
//! Run with: `cargo run --example simulate_jump_path`

use volsel::registry::Study;
use volsel::simulate::{simulate_path_with_stats, write_path_csv, SeedPlan};

fn main() -> volsel::Result<()> {
    let n = 1000;
    let q = 10.0; // ~10 expected jumps over [0, 1]
    let model = Study::Study1.true_model(q)?;
    let (grid, stats) = simulate_path_with_stats(&model, n, 1.0, &SeedPlan::new(42, 0))?;

    eprintln!(
        "simulated n = {} steps, h = {}, jumps drawn = {}",
        grid.n(),
        grid.h(),
        stats.jump_count
    );
    write_path_csv(&grid, std::io::stdout().lock())?;
    Ok(())
}
