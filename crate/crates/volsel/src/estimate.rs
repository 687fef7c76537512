//! Deterministic multi-start maximization of a chosen objective over a
//! parameter box, via a bounded derivative-free simplex search with box
//! clipping.

use crate::error::{Error, Result};
use crate::gqlf::{objective, IncrementCache};
use crate::model::{DiffusionSpec, FitResult, ObjectiveKind, ObservationGrid};

/// Optimizer settings. The start-point rule is fixed: first start at the box
/// center, remaining starts from a low-discrepancy sequence over the box
/// whose offset is derived from (grid hash, spec id).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub n_starts: usize,
    pub max_evals: usize,
    /// Initial simplex scale as a fraction of the box width per axis.
    pub simplex_scale: f64,
    /// Absolute objective stall tolerance.
    pub f_tol: f64,
    /// Simplex diameter tolerance.
    pub x_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            n_starts: 8,
            max_evals: 2000,
            simplex_scale: 0.1,
            f_tol: 1e-10,
            x_tol: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts < 1 {
            return Err(Error::Optimize("n_starts must be at least 1".into()));
        }
        if !(self.f_tol > 0.0) || !(self.x_tol > 0.0) {
            return Err(Error::Optimize("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// FNV-1a over the raw bits of the observed data plus the spec id; pins the
/// low-discrepancy start offset to the (grid, spec) pair.
fn start_offset(cache: &IncrementCache, spec_id: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    let mut feed = |byte: u8| {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    };
    for j in 0..cache.n {
        for v in cache.ny(j) {
            for b in v.to_bits().to_le_bytes() {
                feed(b);
            }
        }
    }
    for b in spec_id.as_bytes() {
        feed(*b);
    }
    hash % 4096
}

const HALTON_BASES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

struct Simplex {
    points: Vec<Vec<f64>>,
    values: Vec<f64>, // negated objective (minimization)
}

struct SearchOutcome {
    theta: Vec<f64>,
    value: f64, // objective (maximization scale)
    evals: usize,
    converged: bool,
}

/// Deterministic bounded maximization of an arbitrary objective over a box.
/// `start_seed` offsets the low-discrepancy start sequence.
pub fn maximize<F>(
    f: F,
    bounds: &crate::model::ParameterBox,
    config: &OptimizerConfig,
    start_seed: u64,
) -> Result<(Vec<f64>, f64, usize, usize, bool)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    config.validate()?;
    let p = bounds.p();
    let eval = |theta: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        match f(theta) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };

    let mut best: Option<SearchOutcome> = None;
    let mut any_converged = false;
    let mut total_evals = 0usize;
    let mut restarts_used = 0usize;
    for start in 0..config.n_starts {
        let mut theta0 = if start == 0 {
            bounds.center()
        } else {
            (0..p)
                .map(|k| {
                    let u = halton(start_seed + start as u64, HALTON_BASES[k % HALTON_BASES.len()]);
                    bounds.lower()[k] + u * bounds.width(k)
                })
                .collect()
        };
        bounds.clip(&mut theta0);
        let outcome = nelder_mead(&eval, bounds, theta0, config);
        total_evals += outcome.evals;
        restarts_used += 1;
        any_converged |= outcome.converged;
        let better = match &best {
            None => true,
            Some(b) => {
                if (outcome.value - b.value).abs() <= 1e-12 {
                    // Deterministic tie-break: lexicographically smallest point.
                    outcome.theta < b.theta
                } else {
                    outcome.value > b.value
                }
            }
        };
        if better {
            best = Some(outcome);
        }
    }
    let mut best = best.ok_or_else(|| Error::Optimize("no start produced a value".into()))?;
    best.converged = any_converged;
    if !best.value.is_finite() {
        return Err(Error::Optimize(
            "all starts produced non-finite objectives".into(),
        ));
    }
    Ok((
        best.theta,
        best.value,
        restarts_used,
        total_evals,
        best.converged,
    ))
}

fn nelder_mead<E>(
    eval: &E,
    bounds: &crate::model::ParameterBox,
    start: Vec<f64>,
    config: &OptimizerConfig,
) -> SearchOutcome
where
    E: Fn(&[f64], &mut usize) -> f64,
{
    let p = bounds.p();
    let mut evals = 0usize;
    let clip = |mut v: Vec<f64>| {
        bounds.clip(&mut v);
        v
    };

    let mut simplex = Simplex {
        points: Vec::with_capacity(p + 1),
        values: Vec::with_capacity(p + 1),
    };
    simplex.values.push(eval(&start, &mut evals));
    simplex.points.push(start.clone());
    for k in 0..p {
        let mut v = start.clone();
        let step = config.simplex_scale * bounds.width(k);
        v[k] = if v[k] + step <= bounds.upper()[k] {
            v[k] + step
        } else {
            v[k] - step
        };
        let v = clip(v);
        simplex.values.push(eval(&v, &mut evals));
        simplex.points.push(v);
    }

    let (alpha, gamma, rho, shrink) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;

    while evals < config.max_evals {
        // Order ascending by value (best first).
        let mut idx: Vec<usize> = (0..=p).collect();
        idx.sort_by(|&a, &b| {
            simplex.values[a]
                .partial_cmp(&simplex.values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        simplex.points = idx.iter().map(|&i| simplex.points[i].clone()).collect();
        simplex.values = idx.iter().map(|&i| simplex.values[i]).collect();

        let f_best = simplex.values[0];
        let f_worst = simplex.values[p];
        let diameter = (0..p)
            .map(|k| {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for pt in &simplex.points {
                    lo = lo.min(pt[k]);
                    hi = hi.max(pt[k]);
                }
                hi - lo
            })
            .fold(0.0f64, f64::max);
        if (f_worst - f_best).abs() < config.f_tol || diameter < config.x_tol {
            converged = true;
            break;
        }

        // Centroid of all but the worst.
        let mut centroid = vec![0.0; p];
        for pt in &simplex.points[..p] {
            for k in 0..p {
                centroid[k] += pt[k] / p as f64;
            }
        }

        let worst = simplex.points[p].clone();
        let reflected = clip(
            (0..p)
                .map(|k| centroid[k] + alpha * (centroid[k] - worst[k]))
                .collect(),
        );
        let f_ref = eval(&reflected, &mut evals);

        if f_ref < simplex.values[0] {
            let expanded = clip(
                (0..p)
                    .map(|k| centroid[k] + gamma * (reflected[k] - centroid[k]))
                    .collect(),
            );
            let f_exp = eval(&expanded, &mut evals);
            if f_exp < f_ref {
                simplex.points[p] = expanded;
                simplex.values[p] = f_exp;
            } else {
                simplex.points[p] = reflected;
                simplex.values[p] = f_ref;
            }
        } else if f_ref < simplex.values[p - 1] {
            simplex.points[p] = reflected;
            simplex.values[p] = f_ref;
        } else {
            let contract_base = if f_ref < simplex.values[p] {
                &reflected
            } else {
                &worst
            };
            let contracted = clip(
                (0..p)
                    .map(|k| centroid[k] + rho * (contract_base[k] - centroid[k]))
                    .collect(),
            );
            let f_con = eval(&contracted, &mut evals);
            if f_con < simplex.values[p].min(f_ref) {
                simplex.points[p] = contracted;
                simplex.values[p] = f_con;
            } else {
                // Shrink toward the best vertex.
                let best_pt = simplex.points[0].clone();
                for i in 1..=p {
                    let pt = clip(
                        (0..p)
                            .map(|k| best_pt[k] + shrink * (simplex.points[i][k] - best_pt[k]))
                            .collect(),
                    );
                    simplex.values[i] = eval(&pt, &mut evals);
                    simplex.points[i] = pt;
                }
            }
        }
    }

    let mut best_i = 0;
    for i in 1..=p {
        if simplex.values[i] < simplex.values[best_i] {
            best_i = i;
        }
    }
    SearchOutcome {
        theta: simplex.points[best_i].clone(),
        value: -simplex.values[best_i],
        evals,
        converged,
    }
}

/// Maximizes the chosen objective over the candidate's box, with the
/// objective value recomputed once at the returned point.
pub fn estimate_cached(
    cache: &IncrementCache,
    spec: &DiffusionSpec,
    kind: ObjectiveKind,
    lambda: f64,
    config: &OptimizerConfig,
) -> Result<FitResult> {
    let seed = start_offset(cache, &spec.id);
    let (theta_hat, _, restarts, evals, converged) = maximize(
        |theta| objective(cache, spec, theta, kind, lambda),
        &spec.bounds,
        config,
        seed,
    )?;
    let objective_value = objective(cache, spec, &theta_hat, kind, lambda)?;
    Ok(FitResult {
        theta_hat,
        objective_value,
        objective_kind: if lambda == 0.0 {
            ObjectiveKind::Standard
        } else {
            kind
        },
        lambda,
        n_restarts_used: restarts,
        n_evals: evals,
        converged,
    })
}

/// See [`estimate_cached`]; builds the increment cache from the grid.
pub fn estimate(
    grid: &ObservationGrid,
    spec: &DiffusionSpec,
    kind: ObjectiveKind,
    lambda: f64,
    config: &OptimizerConfig,
) -> Result<FitResult> {
    estimate_cached(&IncrementCache::new(grid), spec, kind, lambda, config)
}

/// Fits every candidate independently, preserving candidate order. Errors
/// carry the offending candidate id.
pub fn estimate_all(
    grid: &ObservationGrid,
    candidates: &[DiffusionSpec],
    kind: ObjectiveKind,
    lambda: f64,
    config: &OptimizerConfig,
) -> Result<Vec<FitResult>> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let cache = IncrementCache::new(grid);
    candidates
        .iter()
        .map(|spec| {
            estimate_cached(&cache, spec, kind, lambda, config)
                .map_err(|e| Error::Optimize(format!("candidate '{}': {e}", spec.id)))
        })
        .collect()
}
