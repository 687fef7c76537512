//! Free-energy expansion residuals over an n-ladder for a correctly
//! specified one-parameter family. Bounded residuals are the numerical
//! signature of the stochastic-BIC expansion behind dpGQBIC.

use std::sync::Arc;

use volsel::criteria::{expansion_residual, PriorSpec, QuadratureConfig};
use volsel::estimate::OptimizerConfig;
use volsel::model::{DiffusionSpec, JumpSpec, ObjectiveKind, ObservationGrid, ParameterBox};
use volsel::registry::constant_true_model;
use volsel::simulate::{simulate_path, SeedPlan};

fn main() -> volsel::Result<()> {
    // S(theta) = theta, truth at theta0 = 1 inside [0.2, 5].
    let model = constant_true_model(1.0, JumpSpec::none())?;
    let spec = DiffusionSpec::new(
        "const",
        ParameterBox::new(vec![0.2], vec![5.0])?,
        1,
        1,
        Arc::new(|_x: &[f64], theta: &[f64], out: &mut [f64]| out[0] = theta[0].sqrt()),
    )?;

    let grids: Vec<ObservationGrid> = [100usize, 400, 1600]
        .iter()
        .map(|&n| simulate_path(&model, n, 1.0, &SeedPlan::new(9, 0)))
        .collect::<volsel::Result<_>>()?;
    let grid_refs: Vec<&ObservationGrid> = grids.iter().collect();

    let report = expansion_residual(
        &grid_refs,
        &spec,
        ObjectiveKind::DensityPower,
        0.2,
        &PriorSpec::UniformOnBox,
        &OptimizerConfig::default(),
        &QuadratureConfig { nodes_per_axis: 256 },
    )?;
    print!("{}", report.to_csv());
    Ok(())
}
