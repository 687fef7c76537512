//! Thin command-line front end over the volsel library.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use volsel::criteria::{expansion_residual, kl_limit, true_s_path, PriorSpec, QuadratureConfig};
use volsel::error::Error;
use volsel::estimate::{estimate_all, OptimizerConfig};
use volsel::harness::{run_campaign, ExperimentConfig};
use volsel::model::{CriterionKind, ObjectiveKind, ObservationGrid, ParameterBox};
use volsel::registry::{self, Study};
use volsel::simulate::{read_path_csv, simulate_path, write_path_csv, SeedPlan};
use volsel::{criterion, select, DiffusionSpec};

#[derive(Parser)]
#[command(
    name = "volsel",
    about = "Jump-robust model selection for SDE volatility coefficients",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one contaminated observation path and emit it as CSV.
    Simulate {
        /// Built-in study (study1 | study2).
        #[arg(long, default_value = "study1")]
        study: String,
        /// Number of observation steps.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Jump intensity q (expected q*T jumps over the horizon).
        #[arg(long, default_value_t = 10.0)]
        q: f64,
        /// Terminal time.
        #[arg(long, default_value_t = 1.0)]
        t_horizon: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Trial index within the seed plan.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one candidate on a path and print the fit.
    Fit {
        #[arg(long, default_value = "study1")]
        study: String,
        /// Candidate id from the study registry.
        #[arg(long)]
        candidate: String,
        /// Path CSV produced by `simulate`; simulated on the fly if omitted.
        #[arg(long)]
        path: Option<PathBuf>,
        /// Objective kind: standard | density-power | holder.
        #[arg(long, default_value = "density-power")]
        objective: String,
        #[arg(long, default_value_t = 0.2)]
        lambda: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 10.0)]
        q: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Fit all candidates on a path, print criterion records and the winner.
    Select {
        #[arg(long, default_value = "study1")]
        study: String,
        #[arg(long)]
        path: Option<PathBuf>,
        /// Criterion: GQBIC | dpGQBIC | HGQBIC | dpGQBIC-sharp.
        #[arg(long, default_value = "dpGQBIC")]
        criterion: String,
        #[arg(long, default_value_t = 0.2)]
        lambda: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 10.0)]
        q: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run a full Monte Carlo campaign from a config file.
    Replicate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's thread count.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Free-energy expansion residual ladder for a correctly specified
    /// one-parameter family; prints an ExpansionReport CSV.
    VerifyExpansion {
        /// Comma-separated sample sizes.
        #[arg(long, default_value = "100,400,1600")]
        n_list: String,
        #[arg(long, default_value_t = 0.2)]
        lambda: f64,
        /// Objective kind: density-power | holder.
        #[arg(long, default_value = "density-power")]
        objective: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// KL-limit diagnostics: the limit functional at the true parameter and
    /// at each candidate's fit on a jump-free path.
    OracleKl {
        #[arg(long, default_value = "study2")]
        study: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.2)]
        lambda: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn parse_objective(s: &str) -> Result<ObjectiveKind, Error> {
    match s {
        "standard" => Ok(ObjectiveKind::Standard),
        "density-power" | "dp" => Ok(ObjectiveKind::DensityPower),
        "holder" => Ok(ObjectiveKind::Holder),
        other => Err(Error::Config(format!("unknown objective kind '{other}'"))),
    }
}

fn load_or_simulate(
    path: &Option<PathBuf>,
    study: Study,
    n: usize,
    q: f64,
    seed: u64,
) -> Result<ObservationGrid, Error> {
    match path {
        Some(p) => {
            let file = File::open(p)
                .map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())))?;
            read_path_csv(BufReader::new(file))
        }
        None => simulate_path(&study.true_model(q)?, n, 1.0, &SeedPlan::new(seed, 0)),
    }
}

fn print_fit(spec: &DiffusionSpec, fit: &volsel::FitResult) {
    let theta: Vec<String> = fit.theta_hat.iter().map(|v| format!("{v:.6}")).collect();
    println!(
        "{}: theta_hat = [{}]  objective = {:.6}  kind = {}  lambda = {}  evals = {}  converged = {}",
        spec.id,
        theta.join(", "),
        fit.objective_value,
        fit.objective_kind,
        fit.lambda,
        fit.n_evals,
        fit.converged
    );
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate {
            study,
            n,
            q,
            t_horizon,
            seed,
            trial,
            out,
        } => {
            let study = Study::parse(&study)?;
            let grid = simulate_path(&study.true_model(q)?, n, t_horizon, &SeedPlan::new(seed, trial))?;
            match out {
                Some(p) => {
                    let file = File::create(&p)?;
                    write_path_csv(&grid, file)?;
                    eprintln!("wrote {} rows to {}", n + 1, p.display());
                }
                None => write_path_csv(&grid, std::io::stdout().lock())?,
            }
        }
        Command::Fit {
            study,
            candidate,
            path,
            objective,
            lambda,
            n,
            q,
            seed,
        } => {
            let study = Study::parse(&study)?;
            let spec = registry::candidate_by_id(study, &candidate)?;
            let kind = parse_objective(&objective)?;
            let grid = load_or_simulate(&path, study, n, q, seed)?;
            let fit = volsel::estimate(&grid, &spec, kind, lambda, &OptimizerConfig::default())?;
            print_fit(&spec, &fit);
        }
        Command::Select {
            study,
            path,
            criterion: crit,
            lambda,
            n,
            q,
            seed,
        } => {
            let study = Study::parse(&study)?;
            let kind = CriterionKind::parse(&crit)?;
            let lambda = if kind == CriterionKind::Gqbic { 0.0 } else { lambda };
            let grid = load_or_simulate(&path, study, n, q, seed)?;
            let candidates = study.candidates();
            let fits = estimate_all(
                &grid,
                &candidates,
                kind.objective(),
                lambda,
                &OptimizerConfig::default(),
            )?;
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
            for rec in &records {
                println!(
                    "{}  p = {}  {} = {:.6}  (-2H = {:.6}, penalty = {:.6}, extras = {:.6})",
                    rec.candidate_id, rec.p, rec.kind, rec.value, rec.minus2h, rec.penalty,
                    rec.extras
                );
            }
            let winner = select(&records)?;
            println!("selected: {}", winner.candidate_id);
        }
        Command::Replicate {
            config,
            seed,
            out,
            threads,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            if let Some(t) = threads {
                cfg.threads = Some(t);
            }
            let result = run_campaign(&cfg)?;
            match &cfg.out_dir {
                Some(dir) => eprintln!(
                    "campaign complete: {} trials, artifacts in {}",
                    cfg.replications,
                    dir.display()
                ),
                None => print!("{}", volsel::harness::frequency_csv(&result.table)),
            }
        }
        Command::VerifyExpansion {
            n_list,
            lambda,
            objective,
            seed,
            out,
        } => {
            let kind = parse_objective(&objective)?;
            let ns: Vec<usize> = n_list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad n '{s}'")))
                })
                .collect::<Result<_, _>>()?;
            // Correctly specified one-parameter family S(theta) = theta,
            // truth at theta0 = 1 inside the box [0.2, 5].
            let model = registry::constant_true_model(1.0, volsel::JumpSpec::none())?;
            let spec = DiffusionSpec::new(
                "const",
                ParameterBox::new(vec![0.2], vec![5.0])?,
                1,
                1,
                std::sync::Arc::new(|_x: &[f64], theta: &[f64], outb: &mut [f64]| {
                    outb[0] = theta[0].sqrt()
                }),
            )?;
            let grids: Vec<ObservationGrid> = ns
                .iter()
                .map(|&n| simulate_path(&model, n, 1.0, &SeedPlan::new(seed, 0)))
                .collect::<Result<_, _>>()?;
            let grid_refs: Vec<&ObservationGrid> = grids.iter().collect();
            let report = expansion_residual(
                &grid_refs,
                &spec,
                kind,
                lambda,
                &PriorSpec::UniformOnBox,
                &OptimizerConfig::default(),
                &QuadratureConfig { nodes_per_axis: 256 },
            )?;
            let csv = report.to_csv();
            match out {
                Some(p) => {
                    let mut f = File::create(&p)?;
                    f.write_all(csv.as_bytes())?;
                }
                None => print!("{csv}"),
            }
        }
        Command::OracleKl {
            study,
            n,
            lambda,
            seed,
        } => {
            let study = Study::parse(&study)?;
            // Jump-free path so the diagnostic matches the continuous limit.
            let model = study.true_model(0.0)?;
            let grid = simulate_path(&model, n, 1.0, &SeedPlan::new(seed, 0))?;
            let (s_true, x_rows) = true_s_path(&model, &grid);
            let at_truth = kl_limit(&s_true, &x_rows, &model.diffusion, &model.theta0, 1.0)?;
            println!("kl_limit at truth ({}): {:.6e}", model.diffusion.id, at_truth);
            let candidates = study.candidates();
            let fits = estimate_all(
                &grid,
                &candidates,
                ObjectiveKind::DensityPower,
                lambda,
                &OptimizerConfig::default(),
            )?;
            for (spec, fit) in candidates.iter().zip(&fits) {
                let v = kl_limit(&s_true, &x_rows, spec, &fit.theta_hat, 1.0)?;
                let theta: Vec<String> =
                    fit.theta_hat.iter().map(|v| format!("{v:.4}")).collect();
                println!(
                    "kl_limit at fit  ({}): {:.6e}  theta_hat = [{}]",
                    spec.id,
                    v,
                    theta.join(", ")
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success status.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
