//! Rank the study-1 candidates by GQBIC and dpGQBIC on the same
//! contaminated path, showing the non-robust criterion overfitting while the
//! density-power one recovers the true model (diff2).

use volsel::criteria::{criterion, select};
use volsel::estimate::{estimate_all, OptimizerConfig};
use volsel::model::CriterionKind;
use volsel::registry::Study;
use volsel::simulate::{simulate_path, SeedPlan};

fn main() -> volsel::Result<()> {
    let study = Study::Study1;
    let grid = simulate_path(&study.true_model(10.0)?, 1000, 1.0, &SeedPlan::new(3, 0))?;
    let candidates = study.candidates();
    let opt = OptimizerConfig::default();

    for (kind, lambda) in [(CriterionKind::Gqbic, 0.0), (CriterionKind::DpGqbic, 0.2)] {
        let fits = estimate_all(&grid, &candidates, kind.objective(), lambda, &opt)?;
        let mut records = Vec::new();
        for (spec, fit) in candidates.iter().zip(&fits) {
            records.push(criterion(
                fit,
                &spec.id,
                spec.p(),
                grid.n(),
                grid.h(),
                grid.d(),
                kind,
            )?);
        }
        println!("criterion {kind} (lambda = {lambda}):");
        for rec in &records {
            println!("  {:6}  p = {}  value = {:10.3}", rec.candidate_id, rec.p, rec.value);
        }
        println!("  -> selected: {}\n", select(&records)?.candidate_id);
    }
    Ok(())
}
