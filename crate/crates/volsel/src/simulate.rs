//! Path generation: Euler steps on the observation grid plus
//! compound-Poisson jump increments, with reproducible per-trial streams.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{CovariateSpec, JumpLaw, ObservationGrid, RowMat, TrueModelSpec};

/// Purpose tag of one random stream within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Brownian,
    PoissonCount,
    JumpSize,
    CovariateNoise,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Brownian => 1,
            StreamPurpose::PoissonCount => 2,
            StreamPurpose::JumpSize => 3,
            StreamPurpose::CovariateNoise => 4,
        }
    }
}

/// Deterministic mapping (base_seed, trial_index, purpose) -> independent
/// random stream. Distinct triples give distinct ChaCha keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPlan {
    pub base_seed: u64,
    pub trial_index: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl SeedPlan {
    pub fn new(base_seed: u64, trial_index: u64) -> Self {
        SeedPlan {
            base_seed,
            trial_index,
        }
    }

    /// Independent ChaCha stream keyed on (base_seed, trial_index, purpose).
    pub fn stream(&self, purpose: StreamPurpose) -> ChaCha8Rng {
        let mut state = self
            .base_seed
            .wrapping_mul(0x9E3779B97F4A7C15)
            .wrapping_add(self.trial_index)
            .rotate_left(17)
            ^ purpose.tag().wrapping_mul(0xD1B54A32D192ED03);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

/// Diagnostics collected while simulating one path.
#[derive(Debug, Clone, Copy, Default)]
pub struct PathStats {
    pub jump_count: u64,
    pub covariate_jump_count: u64,
}

/// Trigonometric covariate rows: row j = (cos(2 j pi / n), sin(2 j pi / n),
/// cos(4 j pi / n)) for j = 0..=n, evaluated exactly at the grid indices.
pub fn covariate_trig(n: usize) -> RowMat {
    assert!(n >= 1);
    let mut m = RowMat::zeros(n + 1, 3);
    for j in 0..=n {
        let a = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let row = m.row_mut(j);
        row[0] = a.cos();
        row[1] = a.sin();
        row[2] = (2.0 * a).cos();
    }
    m
}

fn sample_jump_increment(law: JumpLaw, k: u64, jump_rng: &mut ChaCha8Rng, out: &mut [f64]) {
    out.fill(0.0);
    if k == 0 {
        return;
    }
    match law {
        JumpLaw::None => {}
        JumpLaw::Normal { mean, variance } => {
            let dist = Normal::new(mean, variance.sqrt()).expect("validated at construction");
            for _ in 0..k {
                for v in out.iter_mut() {
                    *v += dist.sample(jump_rng);
                }
            }
        }
    }
}

fn poisson_count(intensity_h: f64, rng: &mut ChaCha8Rng) -> u64 {
    if intensity_h <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(intensity_h).expect("positive mean");
    dist.sample(rng) as u64
}

/// Simulates one observation grid from the data-generating model.
///
/// Per step j: `dY = drift(t_{j-1}, Y_{j-1}, X_{j-1}) h + sigma(X_{j-1},
/// theta0) sqrt(h) xi_j + dJ_j`, with `K_j ~ Poisson(q h)` jumps summed into
/// `dJ_j`. Identical `(model, n, T, seeds)` inputs give identical grids.
pub fn simulate_path(
    model: &TrueModelSpec,
    n: usize,
    t_horizon: f64,
    seeds: &SeedPlan,
) -> Result<ObservationGrid> {
    simulate_path_with_stats(model, n, t_horizon, seeds).map(|(g, _)| g)
}

/// Like [`simulate_path`] but also reports jump-count diagnostics.
pub fn simulate_path_with_stats(
    model: &TrueModelSpec,
    n: usize,
    t_horizon: f64,
    seeds: &SeedPlan,
) -> Result<(ObservationGrid, PathStats)> {
    if n < 2 {
        return Err(Error::InvalidSpec(format!("n must be at least 2, got {n}")));
    }
    let d = model.diffusion.d;
    let r = model.diffusion.r;
    let h = t_horizon / n as f64;
    let sqrt_h = h.sqrt();

    let mut brownian = seeds.stream(StreamPurpose::Brownian);
    let mut poisson = seeds.stream(StreamPurpose::PoissonCount);
    let mut jump_size = seeds.stream(StreamPurpose::JumpSize);
    let mut cov_noise = seeds.stream(StreamPurpose::CovariateNoise);

    let mut stats = PathStats::default();

    // Covariate path. Deterministic kinds are evaluated up front; the
    // endogenous kind mirrors Y; the SDE kind evolves inside the main loop.
    enum CovState {
        Fixed(RowMat),
        Endogenous,
        Sde {
            x: RowMat,
            rprime: usize,
        },
    }
    let mut cov = match &model.covariate {
        CovariateSpec::Deterministic(f) => {
            let mut rows = Vec::with_capacity(n + 1);
            for j in 0..=n {
                let t = j as f64 * h;
                let row = f(t, j, n);
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState(j));
                }
                rows.push(row);
            }
            CovState::Fixed(RowMat::from_rows(&rows))
        }
        CovariateSpec::Endogenous => CovState::Endogenous,
        CovariateSpec::SdeDriven { x0, rprime, .. } => {
            let mut x = RowMat::zeros(n + 1, x0.len());
            x.row_mut(0).copy_from_slice(x0);
            CovState::Sde {
                x,
                rprime: *rprime,
            }
        }
    };

    let mut y = RowMat::zeros(n + 1, d);
    y.row_mut(0).copy_from_slice(&model.y0);

    let mut sig = vec![0.0; d * r];
    let mut drift = vec![0.0; d];
    let mut xi = vec![0.0; r];
    let mut jump = vec![0.0; d];

    for j in 1..=n {
        let t_prev = (j - 1) as f64 * h;
        let x_prev: Vec<f64> = match &cov {
            CovState::Fixed(m) => m.row(j - 1).to_vec(),
            CovState::Endogenous => y.row(j - 1).to_vec(),
            CovState::Sde { x, .. } => x.row(j - 1).to_vec(),
        };
        let y_prev = y.row(j - 1).to_vec();

        (model.drift)(t_prev, &y_prev, &x_prev, &mut drift);
        model.diffusion.sigma_into(&x_prev, &model.theta0, &mut sig);
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut brownian);
        }
        let k = poisson_count(model.jumps.intensity * h, &mut poisson);
        stats.jump_count += k;
        sample_jump_increment(model.jumps.law, k, &mut jump_size, &mut jump);

        for i in 0..d {
            let mut diff = 0.0;
            for kk in 0..r {
                diff += sig[i * r + kk] * xi[kk];
            }
            let v = y.get(j - 1, i) + drift[i] * h + diff * sqrt_h + jump[i];
            if !v.is_finite() {
                return Err(Error::NonFiniteState(j));
            }
            y.set(j, i, v);
        }

        if let CovState::Sde { x, rprime } = &mut cov {
            if let CovariateSpec::SdeDriven {
                drift: cdrift,
                diffusion: cdiff,
                jumps: cjumps,
                ..
            } = &model.covariate
            {
                let dp = x.ncols();
                let rp = *rprime;
                let mut mu = vec![0.0; dp];
                cdrift(t_prev, &x_prev, &y_prev, &mut mu);
                let mut s = vec![0.0; dp * rp];
                cdiff(t_prev, &x_prev, &mut s);
                let kx = poisson_count(cjumps.intensity * h, &mut poisson);
                stats.covariate_jump_count += kx;
                let mut jx = vec![0.0; dp];
                sample_jump_increment(cjumps.law, kx, &mut jump_size, &mut jx);
                let mut zx = vec![0.0; rp];
                for z in zx.iter_mut() {
                    *z = StandardNormal.sample(&mut cov_noise);
                }
                for i in 0..dp {
                    let mut acc = 0.0;
                    for kk in 0..rp {
                        acc += s[i * rp + kk] * zx[kk];
                    }
                    let v = x.get(j - 1, i) + mu[i] * h + acc * sqrt_h + jx[i];
                    if !v.is_finite() {
                        return Err(Error::NonFiniteState(j));
                    }
                    x.set(j, i, v);
                }
            }
        }
    }

    let x = match cov {
        CovState::Fixed(m) => m,
        CovState::Endogenous => y.clone(),
        CovState::Sde { x, .. } => x,
    };
    let grid = ObservationGrid::new(t_horizon, y, x)?;
    Ok((grid, stats))
}

/// Writes a path dump: header `t,y_1..y_d,x_1..x_dprime`, one row per grid
/// point, 17 significant digits.
pub fn write_path_csv<W: Write>(grid: &ObservationGrid, mut w: W) -> Result<()> {
    let mut header = String::from("t");
    for i in 1..=grid.d() {
        header.push_str(&format!(",y_{i}"));
    }
    for i in 1..=grid.dprime() {
        header.push_str(&format!(",x_{i}"));
    }
    writeln!(w, "{header}")?;
    for j in 0..=grid.n() {
        let mut line = format!("{:.16e}", grid.times()[j]);
        for v in grid.y().row(j) {
            line.push_str(&format!(",{v:.16e}"));
        }
        for v in grid.x().row(j) {
            line.push_str(&format!(",{v:.16e}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads a path dump produced by [`write_path_csv`]. The number of y columns
/// is recovered from the header.
pub fn read_path_csv<R: BufRead>(r: R) -> Result<ObservationGrid> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidGrid("empty path file".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"t") {
        return Err(Error::InvalidGrid("path file must start with 't'".into()));
    }
    let d = cols.iter().filter(|c| c.starts_with("y_")).count();
    let dp = cols.iter().filter(|c| c.starts_with("x_")).count();
    if d == 0 || dp == 0 || 1 + d + dp != cols.len() {
        return Err(Error::InvalidGrid(format!("bad path header '{header}'")));
    }
    let mut times = Vec::new();
    let mut y = Vec::new();
    let mut x = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .trim()
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| Error::InvalidGrid(format!("row {i}: {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != cols.len() {
            return Err(Error::InvalidGrid(format!(
                "row {i} has {} values, expected {}",
                vals.len(),
                cols.len()
            )));
        }
        times.push(vals[0]);
        y.extend_from_slice(&vals[1..1 + d]);
        x.extend_from_slice(&vals[1 + d..]);
    }
    let n = times.len().saturating_sub(1);
    if n < 1 {
        return Err(Error::InvalidGrid("path file has too few rows".into()));
    }
    let t_horizon = times[n] - times[0];
    ObservationGrid::from_raw(t_horizon, times, RowMat::new(y, d), RowMat::new(x, dp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JumpSpec;
    use crate::registry;

    #[test]
    fn covariate_trig_boundary_rows() {
        let m = covariate_trig(100);
        assert_eq!(m.row(0), &[1.0, 0.0, 1.0]);
        let last = m.row(100);
        assert!((last[0] - 1.0).abs() < 1e-12);
        assert!(last[1].abs() < 1e-12);
        assert!((last[2] - 1.0).abs() < 1e-12);
        let quarter = m.row(25);
        assert!(quarter[0].abs() < 1e-12);
        assert!((quarter[1] - 1.0).abs() < 1e-12);
        assert!((quarter[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_diffusion_increments_are_standard_normal() {
        let model = registry::constant_true_model(1.0, JumpSpec::none()).unwrap();
        let n = 10_000;
        let grid = simulate_path(&model, n, 1.0, &SeedPlan::new(11, 0)).unwrap();
        let h = grid.h();
        let ny: Vec<f64> = (1..=n)
            .map(|j| (grid.y().get(j, 0) - grid.y().get(j - 1, 0)) / h.sqrt())
            .collect();
        let mean = ny.iter().sum::<f64>() / n as f64;
        let var = ny.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "mean = {mean}");
        assert!((0.95..=1.05).contains(&var), "var = {var}");
    }

    #[test]
    fn poisson_jump_count_mean() {
        let jumps = JumpSpec::new(
            10.0,
            JumpLaw::Normal {
                mean: 0.0,
                variance: 3.0,
            },
        )
        .unwrap();
        let model = registry::constant_true_model(1.0, jumps).unwrap();
        let mut total = 0u64;
        let paths = 1000;
        for trial in 0..paths {
            let (_, stats) =
                simulate_path_with_stats(&model, 100, 1.0, &SeedPlan::new(5, trial)).unwrap();
            total += stats.jump_count;
        }
        let mean = total as f64 / paths as f64;
        assert!((9.0..=11.0).contains(&mean), "mean jump count = {mean}");
    }

    #[test]
    fn study1_large_increments_dominate() {
        // At n=1000 and q=10, |dY| > 5 sqrt(h) is exceeded many times per
        // path with high probability (jumps plus the sigma > 1 region).
        let n = 1000;
        let model = registry::study1_true_model(0.01 * n as f64).unwrap();
        let h = 1.0 / n as f64;
        let threshold = 5.0 * h.sqrt();
        let mut hits = 0usize;
        let seeds = 100;
        for trial in 0..seeds {
            let grid = simulate_path(&model, n, 1.0, &SeedPlan::new(21, trial)).unwrap();
            let count = (1..=n)
                .filter(|&j| (grid.y().get(j, 0) - grid.y().get(j - 1, 0)).abs() > threshold)
                .count();
            if count > 5 {
                hits += 1;
            }
        }
        assert!(
            hits as f64 / seeds as f64 > 0.9,
            "exceedance fraction = {}",
            hits as f64 / seeds as f64
        );
    }

    #[test]
    fn bit_reproducible_paths() {
        let model = registry::study1_true_model(10.0).unwrap();
        let a = simulate_path(&model, 500, 1.0, &SeedPlan::new(7, 3)).unwrap();
        let b = simulate_path(&model, 500, 1.0, &SeedPlan::new(7, 3)).unwrap();
        assert_eq!(a.y().data(), b.y().data());
        assert_eq!(a.x().data(), b.x().data());
    }

    #[test]
    fn distinct_trials_differ() {
        let model = registry::study1_true_model(10.0).unwrap();
        let a = simulate_path(&model, 100, 1.0, &SeedPlan::new(7, 0)).unwrap();
        let b = simulate_path(&model, 100, 1.0, &SeedPlan::new(7, 1)).unwrap();
        assert_ne!(a.y().data(), b.y().data());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let model = registry::study1_true_model(10.0).unwrap();
        let grid = simulate_path(&model, 50, 1.0, &SeedPlan::new(3, 0)).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&grid, &mut buf).unwrap();
        let back = read_path_csv(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(grid.y().data(), back.y().data());
        assert_eq!(grid.x().data(), back.x().data());
    }
}
