//! A small Monte Carlo selection-frequency campaign (a desk-scale slice of
//! the paper's Table 1) printed as a frequency CSV.

use volsel::harness::{frequency_csv, run_campaign, ExperimentConfig, QRule};
use volsel::model::CriterionKind;
use volsel::registry::Study;

fn main() -> volsel::Result<()> {
    let mut cfg = ExperimentConfig::new(Study::Study1);
    cfg.n_list = vec![100, 500];
    cfg.lambda_list = vec![0.2];
    cfg.criteria = vec![CriterionKind::Gqbic, CriterionKind::DpGqbic];
    cfg.q_rule = QRule::PerN(0.01);
    cfg.replications = 25; // keep the example fast; the paper uses 1000
    cfg.base_seed = 2024;

    let result = run_campaign(&cfg)?;
    print!("{}", frequency_csv(&result.table));
    Ok(())
}
