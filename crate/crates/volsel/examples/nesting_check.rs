//! Verify the registry's nesting maps and the nested-likelihood identity
//! H_small(theta) = H_big(F theta + c) on simulated data.

use volsel::gqlf::{objective, IncrementCache};
use volsel::model::{verify_nesting, ObjectiveKind};
use volsel::registry::Study;
use volsel::simulate::{simulate_path, SeedPlan};

fn main() -> volsel::Result<()> {
    let study = Study::Study1;
    let candidates = study.candidates();
    let big = &candidates[0];

    // Structural check: F^T F = I and S-equality on probe points.
    for small in &candidates[1..] {
        let map = small.nest.as_ref().expect("all non-maximal candidates nest");
        let probes: Vec<(Vec<f64>, Vec<f64>)> = (0..8)
            .map(|i| {
                let t = 0.37 * i as f64;
                (vec![t.cos(), t.sin(), (2.0 * t).cos()], vec![0.4 * i as f64 - 1.0; small.p()])
            })
            .collect();
        verify_nesting(small, big, map, &probes)?;
        println!("{} nests into {} (p {} -> {})", small.id, big.id, small.p(), big.p());
    }

    // Likelihood-level check on a real path.
    let grid = simulate_path(&study.true_model(10.0)?, 500, 1.0, &SeedPlan::new(13, 0))?;
    let cache = IncrementCache::new(&grid);
    let small = &candidates[1]; // diff2
    let map = small.nest.as_ref().unwrap();
    for kind in [ObjectiveKind::Standard, ObjectiveKind::DensityPower, ObjectiveKind::Holder] {
        let theta = vec![-1.0, 2.0];
        let hs = objective(&cache, small, &theta, kind, 0.2)?;
        let hb = objective(&cache, big, &map.apply(&theta), kind, 0.2)?;
        println!("{kind:?}: H_diff2 = {hs:.10}, H_diff1(F theta) = {hb:.10}, diff = {:.2e}",
            (hs - hb).abs());
    }
    Ok(())
}
