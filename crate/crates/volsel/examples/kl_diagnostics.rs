//! KL-limit diagnostics for study 2: the limit functional vanishes at the
//! true coefficient and is strictly negative at every misspecified
//! candidate's fit. Simulation-only: the true S path is never available to
//! estimators.

use volsel::criteria::{kl_limit, true_s_path};
use volsel::estimate::{estimate_all, OptimizerConfig};
use volsel::model::ObjectiveKind;
use volsel::registry::Study;
use volsel::simulate::{simulate_path, SeedPlan};

fn main() -> volsel::Result<()> {
    let study = Study::Study2;
    let model = study.true_model(0.0)?; // jump-free: matches the continuous limit
    let grid = simulate_path(&model, 1000, 1.0, &SeedPlan::new(5, 0))?;
    let (s_true, x_rows) = true_s_path(&model, &grid);

    let v0 = kl_limit(&s_true, &x_rows, &model.diffusion, &model.theta0, 1.0)?;
    println!("at truth (diff2, theta0 = {:?}): {v0:.6e}", model.theta0);

    let candidates = study.candidates();
    let fits = estimate_all(
        &grid,
        &candidates,
        ObjectiveKind::DensityPower,
        0.2,
        &OptimizerConfig::default(),
    )?;
    for (spec, fit) in candidates.iter().zip(&fits) {
        let v = kl_limit(&s_true, &x_rows, spec, &fit.theta_hat, 1.0)?;
        println!("at fit of {:6}: {v:.6e}", spec.id);
    }
    Ok(())
}
