//! Configuration ingestion, the Monte Carlo replication engine, and CSV
//! artifact emission for selection-frequency campaigns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::criteria::{criterion, select};
use crate::error::{Error, Result};
use crate::estimate::{estimate_cached, OptimizerConfig};
use crate::gqlf::IncrementCache;
use crate::model::{CriterionKind, FrequencyRow, FrequencyTable};
use crate::registry::Study;
use crate::simulate::{simulate_path, SeedPlan};

/// Jump-intensity rule: either proportional to the sample size (`q = c n`,
/// the paper's regime) or a fixed absolute intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QRule {
    PerN(f64),
    Absolute(f64),
}

impl QRule {
    pub fn q(self, n: usize) -> f64 {
        match self {
            QRule::PerN(c) => c * n as f64,
            QRule::Absolute(q) => q,
        }
    }

    /// Accepts `per-n:<c>` and `absolute:<q>`.
    pub fn parse(s: &str) -> Result<Self> {
        let parse_num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad q_rule number '{v}'")))
        };
        if let Some(v) = s.strip_prefix("per-n:") {
            let c = parse_num(v)?;
            if !(c >= 0.0) {
                return Err(Error::Config("q_rule constant must be >= 0".into()));
            }
            Ok(QRule::PerN(c))
        } else if let Some(v) = s.strip_prefix("absolute:") {
            let q = parse_num(v)?;
            if !(q >= 0.0) {
                return Err(Error::Config("q_rule intensity must be >= 0".into()));
            }
            Ok(QRule::Absolute(q))
        } else {
            Err(Error::Config(format!(
                "q_rule must be 'per-n:<c>' or 'absolute:<q>', got '{s}'"
            )))
        }
    }
}

/// Full description of one selection-frequency campaign.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub study: Study,
    pub n_list: Vec<usize>,
    pub lambda_list: Vec<f64>,
    pub q_rule: QRule,
    pub replications: usize,
    pub criteria: Vec<CriterionKind>,
    pub base_seed: u64,
    /// Candidate ids to fit; `None` means the study's full registry.
    pub candidates: Option<Vec<String>>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub t_horizon: f64,
    pub optimizer: OptimizerConfig,
}

impl ExperimentConfig {
    pub fn new(study: Study) -> Self {
        ExperimentConfig {
            study,
            n_list: vec![100, 500, 1000],
            lambda_list: vec![0.01, 0.05, 0.2],
            q_rule: QRule::PerN(0.01),
            replications: 200,
            criteria: vec![
                CriterionKind::Gqbic,
                CriterionKind::DpGqbic,
                CriterionKind::HGqbic,
            ],
            base_seed: 1,
            candidates: None,
            out_dir: None,
            threads: None,
            t_horizon: 1.0,
            optimizer: OptimizerConfig::default(),
        }
    }

    /// Parses the flat key-value config format. Lines are `key = value`;
    /// `#` starts a comment; lists are comma-separated.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }

        let study = Study::parse(
            map.remove("study")
                .ok_or_else(|| Error::Config("missing required key 'study'".into()))?
                .as_str(),
        )?;
        let mut cfg = ExperimentConfig::new(study);

        let parse_list_usize = |v: &str| -> Result<Vec<usize>> {
            v.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad integer '{s}'")))
                })
                .collect()
        };
        let parse_list_f64 = |v: &str| -> Result<Vec<f64>> {
            v.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad number '{s}'")))
                })
                .collect()
        };
        let parse_u64 = |k: &str, v: &str| -> Result<u64> {
            v.parse::<u64>()
                .map_err(|_| Error::Config(format!("bad value for {k}: '{v}'")))
        };
        let parse_f64 = |k: &str, v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad value for {k}: '{v}'")))
        };

        for (key, value) in map {
            match key.as_str() {
                "n_list" => cfg.n_list = parse_list_usize(&value)?,
                "lambda_list" => cfg.lambda_list = parse_list_f64(&value)?,
                "q_rule" => cfg.q_rule = QRule::parse(&value)?,
                "replications" => cfg.replications = parse_u64(&key, &value)? as usize,
                "criteria" => {
                    cfg.criteria = value
                        .split(',')
                        .map(|s| CriterionKind::parse(s.trim()))
                        .collect::<Result<Vec<_>>>()?
                }
                "base_seed" => cfg.base_seed = parse_u64(&key, &value)?,
                "candidates" => {
                    cfg.candidates =
                        Some(value.split(',').map(|s| s.trim().to_string()).collect())
                }
                "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
                "threads" => cfg.threads = Some(parse_u64(&key, &value)? as usize),
                "t_horizon" => cfg.t_horizon = parse_f64(&key, &value)?,
                "optimizer.n_starts" => cfg.optimizer.n_starts = parse_u64(&key, &value)? as usize,
                "optimizer.max_evals" => {
                    cfg.optimizer.max_evals = parse_u64(&key, &value)? as usize
                }
                "optimizer.simplex_scale" => cfg.optimizer.simplex_scale = parse_f64(&key, &value)?,
                "optimizer.f_tol" => cfg.optimizer.f_tol = parse_f64(&key, &value)?,
                "optimizer.x_tol" => cfg.optimizer.x_tol = parse_f64(&key, &value)?,
                other => return Err(Error::Config(format!("unknown config key '{other}'"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.n_list.is_empty() || self.n_list.iter().any(|&n| n < 2) {
            return Err(Error::Config("n_list must contain integers >= 2".into()));
        }
        if self.criteria.is_empty() {
            return Err(Error::Config("criteria must be nonempty".into()));
        }
        let needs_lambda = self
            .criteria
            .iter()
            .any(|c| *c != CriterionKind::Gqbic);
        if needs_lambda && (self.lambda_list.is_empty() || self.lambda_list.iter().any(|&l| !(l > 0.0)))
        {
            return Err(Error::Config(
                "lambda_list must contain positive values for robust criteria".into(),
            ));
        }
        if !(self.t_horizon > 0.0) {
            return Err(Error::Config("t_horizon must be positive".into()));
        }
        self.optimizer
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.candidate_specs().map(|_| ())
    }

    /// Resolves the configured candidate ids against the study registry,
    /// preserving registry order.
    pub fn candidate_specs(&self) -> Result<Vec<crate::model::DiffusionSpec>> {
        let all = self.study.candidates();
        match &self.candidates {
            None => Ok(all),
            Some(ids) => {
                for id in ids {
                    if !all.iter().any(|c| &c.id == id) {
                        return Err(Error::Config(format!(
                            "unknown candidate '{id}' for {}",
                            self.study.name()
                        )));
                    }
                }
                Ok(all.into_iter().filter(|c| ids.contains(&c.id)).collect())
            }
        }
    }

    /// The experimental cells in deterministic emission order: n outer,
    /// then criteria in configured order, with one cell per lambda for the
    /// robust criteria and a single lambda=0 cell for GQBIC.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &n in &self.n_list {
            let q = self.q_rule.q(n);
            for &criterion in &self.criteria {
                if criterion == CriterionKind::Gqbic {
                    out.push(CellKey {
                        criterion,
                        lambda: 0.0,
                        n,
                        q,
                    });
                } else {
                    for &lambda in &self.lambda_list {
                        out.push(CellKey {
                            criterion,
                            lambda,
                            n,
                            q,
                        });
                    }
                }
            }
        }
        out
    }
}

/// One (criterion, lambda, n, q) experimental cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub criterion: CriterionKind,
    pub lambda: f64,
    pub n: usize,
    pub q: f64,
}

/// Successful outcome of one cell within one trial.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub selected: String,
    /// Fitted parameter of the selected candidate.
    pub theta_hat: Vec<f64>,
    /// Objective value of the selected candidate at its maximizer.
    pub objective: f64,
    /// Fitted parameter of the study's true candidate under this cell's
    /// objective, for boxplot data. None when that candidate was excluded.
    pub theta_true_candidate: Option<Vec<f64>>,
}

/// One cell's result: the selection outcome or a recorded failure.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub key: CellKey,
    pub outcome: std::result::Result<CellOutcome, String>,
}

/// Everything one Monte Carlo trial produced.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: u64,
    pub cells: Vec<CellResult>,
}

/// Runs one Monte Carlo trial: simulates one path per (n, q) cell and
/// applies every requested (criterion, lambda) selection to it. Per-cell
/// failures are recorded, not fatal.
pub fn run_replication(config: &ExperimentConfig, trial_index: u64) -> Result<TrialRecord> {
    let candidates = config.candidate_specs()?;
    let true_id = config.study.true_candidate_id();
    let seeds = SeedPlan::new(config.base_seed, trial_index);
    let mut cells = Vec::new();

    for &n in &config.n_list {
        let q = config.q_rule.q(n);
        let model = config.study.true_model(q)?;
        let cache = match simulate_path(&model, n, config.t_horizon, &seeds) {
            Ok(grid) => Ok(IncrementCache::new(&grid)),
            Err(e) => Err(e.to_string()),
        };
        for &crit in &config.criteria {
            let lambdas: Vec<f64> = if crit == CriterionKind::Gqbic {
                vec![0.0]
            } else {
                config.lambda_list.clone()
            };
            for lambda in lambdas {
                let key = CellKey {
                    criterion: crit,
                    lambda,
                    n,
                    q,
                };
                let outcome = match &cache {
                    Err(e) => Err(e.clone()),
                    Ok(cache) => run_cell(cache, &candidates, true_id, key, &config.optimizer),
                };
                cells.push(CellResult { key, outcome });
            }
        }
    }
    Ok(TrialRecord {
        trial: trial_index,
        cells,
    })
}

fn run_cell(
    cache: &IncrementCache,
    candidates: &[crate::model::DiffusionSpec],
    true_id: &str,
    key: CellKey,
    opt: &OptimizerConfig,
) -> std::result::Result<CellOutcome, String> {
    let kind = key.criterion.objective();
    let mut records = Vec::with_capacity(candidates.len());
    let mut fits = Vec::with_capacity(candidates.len());
    for spec in candidates {
        let fit = estimate_cached(cache, spec, kind, key.lambda, opt)
            .map_err(|e| format!("candidate '{}': {e}", spec.id))?;
        let rec = criterion(
            &fit,
            &spec.id,
            spec.p(),
            cache.n,
            cache.h,
            cache.d,
            key.criterion,
        )
        .map_err(|e| e.to_string())?;
        records.push(rec);
        fits.push(fit);
    }
    let winner = select(&records).map_err(|e| e.to_string())?;
    let idx = candidates
        .iter()
        .position(|c| c.id == winner.candidate_id)
        .expect("winner comes from the candidate list");
    let theta_true_candidate = candidates
        .iter()
        .position(|c| c.id == true_id)
        .map(|i| fits[i].theta_hat.clone());
    Ok(CellOutcome {
        selected: winner.candidate_id.clone(),
        theta_hat: fits[idx].theta_hat.clone(),
        objective: fits[idx].objective_value,
        theta_true_candidate,
    })
}

/// Aggregated output of [`run_campaign`].
#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub table: FrequencyTable,
    pub trials: Vec<TrialRecord>,
}

/// Runs all R trials (in parallel when a thread pool is available) and
/// aggregates selection counts. Thread count never affects the result:
/// trials are keyed by index and aggregated in index order.
pub fn run_campaign(config: &ExperimentConfig) -> Result<CampaignResult> {
    config.validate()?;
    let run_all = || -> Result<Vec<TrialRecord>> {
        (0..config.replications as u64)
            .into_par_iter()
            .map(|trial| run_replication(config, trial))
            .collect()
    };
    let trials = match config.threads {
        Some(t) if t > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run_all),
        _ => run_all(),
    }?;

    let candidates = config.candidate_specs()?;
    let ids: Vec<String> = candidates.iter().map(|c| c.id.clone()).collect();
    let mut rows: Vec<FrequencyRow> = config
        .cells()
        .iter()
        .map(|key| FrequencyRow {
            criterion: key.criterion,
            lambda: key.lambda,
            n: key.n,
            q: key.q,
            counts: ids.iter().map(|id| (id.clone(), 0)).collect(),
            errors: 0,
        })
        .collect();
    for trial in &trials {
        for (cell, row) in trial.cells.iter().zip(rows.iter_mut()) {
            debug_assert_eq!(cell.key.n, row.n);
            match &cell.outcome {
                Ok(out) => {
                    let slot = row
                        .counts
                        .iter_mut()
                        .find(|(id, _)| *id == out.selected)
                        .expect("selected id is registered");
                    slot.1 += 1;
                }
                Err(_) => row.errors += 1,
            }
        }
    }
    let result = CampaignResult {
        table: FrequencyTable { rows },
        trials,
    };
    if let Some(dir) = &config.out_dir {
        write_artifacts(config, &result, dir)?;
    }
    Ok(result)
}

/// Canonical text form of a lambda / q value in CSV cells: shortest exact
/// decimal (`0.2`, `1`, `10`).
fn num_cell(v: f64) -> String {
    format!("{v}")
}

/// Renders the frequency table: one row per (cell, candidate), shares to 6
/// decimals, with the cell's error count repeated on each row.
pub fn frequency_csv(table: &FrequencyTable) -> String {
    let mut out = String::from("criterion,lambda,n,q,candidate,count,share,errors\n");
    for row in &table.rows {
        let total = row.replications().max(1);
        for (id, count) in &row.counts {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{}",
                row.criterion,
                num_cell(row.lambda),
                row.n,
                num_cell(row.q),
                id,
                count,
                *count as f64 / total as f64,
                row.errors
            );
        }
    }
    out
}

/// Renders the raw per-trial records, padding theta columns to the widest
/// candidate dimension. Failed cells carry `error` in the selected column
/// and empty numeric fields.
pub fn trials_csv(trials: &[TrialRecord], p_max: usize) -> String {
    let mut out = String::from("trial,criterion,lambda,n,q,selected");
    for k in 1..=p_max {
        let _ = write!(out, ",theta_hat_{k}");
    }
    out.push_str(",objective\n");
    for trial in trials {
        for cell in &trial.cells {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                trial.trial,
                cell.key.criterion,
                num_cell(cell.key.lambda),
                cell.key.n,
                num_cell(cell.key.q)
            );
            match &cell.outcome {
                Ok(res) => {
                    let _ = write!(out, ",{}", res.selected);
                    for k in 0..p_max {
                        match res.theta_hat.get(k) {
                            Some(v) => {
                                let _ = write!(out, ",{v:.16e}");
                            }
                            None => out.push(','),
                        }
                    }
                    let _ = writeln!(out, ",{:.16e}", res.objective);
                }
                Err(_) => {
                    let _ = write!(out, ",error");
                    for _ in 0..p_max {
                        out.push(',');
                    }
                    out.push_str(",\n");
                }
            }
        }
    }
    out
}

/// Boxplot data for one sample size: `theta_hat - theta0` coordinates of
/// the true candidate's fit, one row per (lambda, trial, coordinate).
pub fn boxplot_csv(
    trials: &[TrialRecord],
    criterion_kind: CriterionKind,
    n: usize,
    theta0: &[f64],
) -> String {
    let mut out = String::from("lambda,coord,value\n");
    for trial in trials {
        for cell in &trial.cells {
            if cell.key.criterion != criterion_kind || cell.key.n != n {
                continue;
            }
            if let Ok(res) = &cell.outcome {
                if let Some(theta) = &res.theta_true_candidate {
                    for (k, (v, v0)) in theta.iter().zip(theta0.iter()).enumerate() {
                        let _ = writeln!(
                            out,
                            "{},{},{:.16e}",
                            num_cell(cell.key.lambda),
                            k + 1,
                            v - v0
                        );
                    }
                }
            }
        }
    }
    out
}

/// Writes frequency.csv, trials.csv, and per-n boxplot data files.
pub fn write_artifacts(
    config: &ExperimentConfig,
    result: &CampaignResult,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("frequency.csv"), frequency_csv(&result.table))?;
    let p_max = config
        .candidate_specs()?
        .iter()
        .map(|c| c.p())
        .max()
        .unwrap_or(0);
    std::fs::write(dir.join("trials.csv"), trials_csv(&result.trials, p_max))?;
    let theta0 = config.study.theta0();
    let boxplot_kind = config
        .criteria
        .iter()
        .copied()
        .find(|c| *c != CriterionKind::Gqbic);
    if let Some(kind) = boxplot_kind {
        for &n in &config.n_list {
            let name = format!(
                "boxplot_{}_n{}.csv",
                match kind.objective() {
                    crate::model::ObjectiveKind::DensityPower => "dp",
                    crate::model::ObjectiveKind::Holder => "holder",
                    crate::model::ObjectiveKind::Standard => "std",
                },
                n
            );
            std::fs::write(dir.join(name), boxplot_csv(&result.trials, kind, n, &theta0))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE_CFG: &str = "\
# study-1 smoke configuration
study = study1
n_list = 100, 500
lambda_list = 0.05, 0.2
q_rule = per-n:0.01
replications = 3
criteria = GQBIC, dpGQBIC
base_seed = 7
optimizer.max_evals = 400
";

    #[test]
    fn parses_sample_config() {
        let cfg = ExperimentConfig::parse_str(SAMPLE_CFG).unwrap();
        assert_eq!(cfg.study, Study::Study1);
        assert_eq!(cfg.n_list, vec![100, 500]);
        assert_eq!(cfg.lambda_list, vec![0.05, 0.2]);
        assert_eq!(cfg.q_rule, QRule::PerN(0.01));
        assert_eq!(cfg.replications, 3);
        assert_eq!(
            cfg.criteria,
            vec![CriterionKind::Gqbic, CriterionKind::DpGqbic]
        );
        assert_eq!(cfg.base_seed, 7);
        assert_eq!(cfg.optimizer.max_evals, 400);
        // Cells: per n, one GQBIC cell plus two dpGQBIC lambdas.
        assert_eq!(cfg.cells().len(), 2 * 3);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::parse_str("n_list = 100").is_err()); // no study
        assert!(ExperimentConfig::parse_str("study = study1\nbogus_key = 1").is_err());
        assert!(ExperimentConfig::parse_str("study = study1\nreplications = 0").is_err());
        assert!(
            ExperimentConfig::parse_str("study = study1\nlambda_list = 0.0, 0.2").is_err()
        );
        assert!(ExperimentConfig::parse_str("study = study1\ncandidates = diff9").is_err());
        assert!(ExperimentConfig::parse_str("study = study1\nq_rule = sometimes").is_err());
    }

    #[test]
    fn q_rule_values() {
        assert_eq!(QRule::parse("per-n:0.1").unwrap().q(500), 50.0);
        assert_eq!(QRule::parse("absolute:3").unwrap().q(500), 3.0);
    }

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(Study::Study1);
        cfg.n_list = vec![100];
        cfg.lambda_list = vec![0.2];
        cfg.criteria = vec![CriterionKind::Gqbic, CriterionKind::DpGqbic];
        cfg.replications = 4;
        cfg.base_seed = 11;
        cfg.optimizer.max_evals = 600;
        cfg
    }

    #[test]
    fn replication_structure_and_determinism() {
        let cfg = tiny_config();
        let a = run_replication(&cfg, 5).unwrap();
        assert_eq!(a.cells.len(), 2); // GQBIC + one dp lambda
        for cell in &a.cells {
            let out = cell.outcome.as_ref().unwrap();
            assert!(out.selected.starts_with("diff"));
            assert!(out.theta_true_candidate.is_some());
        }
        let b = run_replication(&cfg, 5).unwrap();
        for (ca, cb) in a.cells.iter().zip(&b.cells) {
            let (oa, ob) = (ca.outcome.as_ref().unwrap(), cb.outcome.as_ref().unwrap());
            assert_eq!(oa.selected, ob.selected);
            assert_eq!(oa.theta_hat, ob.theta_hat);
            assert_eq!(oa.objective, ob.objective);
        }
        // Different trials see different data.
        let c = run_replication(&cfg, 6).unwrap();
        assert_ne!(
            a.cells[0].outcome.as_ref().unwrap().objective,
            c.cells[0].outcome.as_ref().unwrap().objective
        );
    }

    #[test]
    fn campaign_counts_and_thread_independence() {
        let mut cfg = tiny_config();
        cfg.threads = Some(1);
        let r1 = run_campaign(&cfg).unwrap();
        cfg.threads = Some(3);
        let r2 = run_campaign(&cfg).unwrap();
        let (csv1, csv2) = (frequency_csv(&r1.table), frequency_csv(&r2.table));
        assert_eq!(csv1, csv2);
        assert!(csv1.starts_with("criterion,lambda,n,q,candidate,count,share,errors\n"));
        for row in &r1.table.rows {
            assert_eq!(row.replications(), cfg.replications);
        }
        // Raw trial CSV carries one line per (trial, cell) plus the header.
        let trials = trials_csv(&r1.trials, 3);
        assert_eq!(
            trials.lines().count(),
            1 + cfg.replications * cfg.cells().len()
        );
        assert!(trials.starts_with(
            "trial,criterion,lambda,n,q,selected,theta_hat_1,theta_hat_2,theta_hat_3,objective\n"
        ));
        let boxplot = boxplot_csv(&r1.trials, CriterionKind::DpGqbic, 100, &[-2.0, 3.0]);
        assert_eq!(boxplot.lines().count(), 1 + cfg.replications * 2);
    }
}
