//! Shared domain types: observation grids, candidate diffusion coefficients,
//! nesting maps between candidates, jump specifications, fit results and
//! criterion records.
//!
//! All types validate their structural invariants at construction time and
//! are immutable afterwards, so they can be shared freely across threads.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`. Rows are the natural access unit
/// throughout the crate (one row per grid point / per step).
#[derive(Debug, Clone, PartialEq)]
pub struct RowMat {
    data: Vec<f64>,
    ncols: usize,
}

impl RowMat {
    pub fn new(data: Vec<f64>, ncols: usize) -> Self {
        assert!(ncols > 0, "RowMat needs at least one column");
        assert!(
            data.len() % ncols == 0,
            "data length {} not a multiple of ncols {}",
            data.len(),
            ncols
        );
        RowMat { data, ncols }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        RowMat::new(vec![0.0; nrows * ncols], ncols)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map(|r| r.len()).unwrap_or(1).max(1);
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        RowMat { data, ncols }
    }

    pub fn nrows(&self) -> usize {
        self.data.len() / self.ncols
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Synchronized discrete sample of the observed process Y and the covariate
/// process X on a uniform grid with step `h = T / n`.
#[derive(Debug, Clone)]
pub struct ObservationGrid {
    n: usize,
    t_horizon: f64,
    h: f64,
    times: Vec<f64>,
    y: RowMat,
    x: RowMat,
}

impl ObservationGrid {
    /// Builds a grid from the horizon and the two data matrices, generating
    /// the time stamps as `t_j = j * h`.
    pub fn new(t_horizon: f64, y: RowMat, x: RowMat) -> Result<Self> {
        if y.nrows() < 2 {
            return Err(Error::InvalidGrid("need at least 2 grid points".into()));
        }
        let n = y.nrows() - 1;
        let h = t_horizon / n as f64;
        let times: Vec<f64> = (0..=n).map(|j| j as f64 * h).collect();
        Self::from_raw(t_horizon, times, y, x)
    }

    /// Builds a grid from explicit time stamps (e.g. when reading a dump back
    /// from disk). All invariants are re-validated.
    pub fn from_raw(t_horizon: f64, times: Vec<f64>, y: RowMat, x: RowMat) -> Result<Self> {
        if y.nrows() < 2 {
            return Err(Error::InvalidGrid("need at least 2 grid points".into()));
        }
        let n = y.nrows() - 1;
        if !(t_horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be positive, got {t_horizon}"
            )));
        }
        let h = t_horizon / n as f64;
        let grid = ObservationGrid {
            n,
            t_horizon,
            h,
            times,
            y,
            x,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Checks every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.times.len() != n + 1 {
            return Err(Error::InvalidGrid(format!(
                "times has {} entries, expected {}",
                self.times.len(),
                n + 1
            )));
        }
        if self.y.nrows() != n + 1 {
            return Err(Error::InvalidGrid(format!(
                "y has {} rows, expected {}",
                self.y.nrows(),
                n + 1
            )));
        }
        if self.x.nrows() != n + 1 {
            return Err(Error::InvalidGrid(format!(
                "x has {} rows, expected {}",
                self.x.nrows(),
                n + 1
            )));
        }
        for j in 1..=n {
            let dt = self.times[j] - self.times[j - 1];
            // 8-ulp tolerance at the scale of the time stamp itself.
            let tol = 8.0 * f64::EPSILON * f64::max(self.times[j].abs(), self.h.abs());
            if (dt - self.h).abs() > tol {
                return Err(Error::InvalidGrid(format!(
                    "non-uniform step at index {j}: expected {}, actual {}",
                    self.h, dt
                )));
            }
        }
        for (name, m) in [("y", &self.y), ("x", &self.x)] {
            for i in 0..m.nrows() {
                for (k, v) in m.row(i).iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::InvalidGrid(format!(
                            "non-finite value in {name} at row {i}, column {k}: {v}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn y(&self) -> &RowMat {
        &self.y
    }

    pub fn x(&self) -> &RowMat {
        &self.x
    }

    pub fn d(&self) -> usize {
        self.y.ncols()
    }

    pub fn dprime(&self) -> usize {
        self.x.ncols()
    }
}

/// Validates an observation grid, reporting the first violated invariant.
pub fn validate_grid(grid: &ObservationGrid) -> Result<()> {
    grid.validate()
}

/// Axis-aligned bounded parameter box with a nonempty open interior.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidBox(format!(
                "bound lengths mismatch: {} vs {}",
                lower.len(),
                upper.len()
            )));
        }
        for k in 0..lower.len() {
            if !(lower[k] < upper[k]) {
                return Err(Error::InvalidBox(format!(
                    "lower[{k}] = {} must be strictly below upper[{k}] = {}",
                    lower[k], upper[k]
                )));
            }
        }
        Ok(ParameterBox { lower, upper })
    }

    /// Cube `[lo, hi]^p`.
    pub fn cube(lo: f64, hi: f64, p: usize) -> Result<Self> {
        Self::new(vec![lo; p], vec![hi; p])
    }

    pub fn p(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.p())
            .map(|k| 0.5 * (self.lower[k] + self.upper[k]))
            .collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.p()).map(|k| self.width(k)).product()
    }

    /// True if theta lies in the closed box.
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.p()
            && theta
                .iter()
                .enumerate()
                .all(|(k, &v)| v >= self.lower[k] && v <= self.upper[k])
    }

    /// True if theta lies strictly inside the open box.
    pub fn contains_interior(&self, theta: &[f64]) -> bool {
        theta.len() == self.p()
            && theta
                .iter()
                .enumerate()
                .all(|(k, &v)| v > self.lower[k] && v < self.upper[k])
    }

    /// Clips theta coordinatewise into the closed box.
    pub fn clip(&self, theta: &mut [f64]) {
        for k in 0..self.p() {
            theta[k] = theta[k].clamp(self.lower[k], self.upper[k]);
        }
    }
}

/// Callable diffusion coefficient sigma(x, theta), written into a caller
/// supplied `d * r` row-major buffer.
pub type SigmaFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// One candidate diffusion coefficient with its parameter box and an
/// optional nesting map into a larger candidate.
#[derive(Clone)]
pub struct DiffusionSpec {
    pub id: String,
    pub bounds: ParameterBox,
    pub d: usize,
    pub r: usize,
    sigma: SigmaFn,
    pub nest: Option<NestingMap>,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("id", &self.id)
            .field("p", &self.p())
            .field("d", &self.d)
            .field("r", &self.r)
            .field("nest", &self.nest.as_ref().map(|m| &m.target))
            .finish()
    }
}

impl DiffusionSpec {
    pub fn new(
        id: impl Into<String>,
        bounds: ParameterBox,
        d: usize,
        r: usize,
        sigma: SigmaFn,
    ) -> Result<Self> {
        if d == 0 || r == 0 {
            return Err(Error::InvalidSpec("dimensions must be positive".into()));
        }
        Ok(DiffusionSpec {
            id: id.into(),
            bounds,
            d,
            r,
            sigma,
            nest: None,
        })
    }

    pub fn with_nest(mut self, nest: NestingMap) -> Self {
        self.nest = Some(nest);
        self
    }

    pub fn p(&self) -> usize {
        self.bounds.p()
    }

    /// Writes sigma(x, theta) into `out` (length `d * r`, row-major).
    pub fn sigma_into(&self, x: &[f64], theta: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.d * self.r);
        (self.sigma)(x, theta, out)
    }

    /// Computes S(x, theta) = sigma sigma^T into `s_out` (length `d * d`,
    /// row-major), using `sig_buf` (length `d * r`) as scratch.
    pub fn s_into(&self, x: &[f64], theta: &[f64], sig_buf: &mut [f64], s_out: &mut [f64]) {
        self.sigma_into(x, theta, sig_buf);
        let (d, r) = (self.d, self.r);
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..r {
                    acc += sig_buf[i * r + k] * sig_buf[j * r + k];
                }
                s_out[i * d + j] = acc;
            }
        }
    }

    /// Convenience allocation of S(x, theta) as a `d x d` matrix.
    pub fn s_matrix(&self, x: &[f64], theta: &[f64]) -> RowMat {
        let mut sig = vec![0.0; self.d * self.r];
        let mut s = vec![0.0; self.d * self.d];
        self.s_into(x, theta, &mut sig, &mut s);
        RowMat::new(s, self.d)
    }
}

/// Affine isometric embedding of a small parameter space into a larger one:
/// f(theta) = F theta + c with F^T F = I.
#[derive(Debug, Clone)]
pub struct NestingMap {
    /// `p_big x p_small`, row-major.
    pub f: RowMat,
    pub c: Vec<f64>,
    pub target: String,
}

impl NestingMap {
    pub fn new(f: RowMat, c: Vec<f64>, target: impl Into<String>) -> Result<Self> {
        if f.nrows() != c.len() {
            return Err(Error::Nesting(format!(
                "F has {} rows but c has {} entries",
                f.nrows(),
                c.len()
            )));
        }
        let map = NestingMap {
            f,
            c,
            target: target.into(),
        };
        map.check_orthonormal()?;
        Ok(map)
    }

    /// Checks F^T F = I entrywise to 1e-12.
    pub fn check_orthonormal(&self) -> Result<()> {
        let (pb, ps) = (self.f.nrows(), self.f.ncols());
        for a in 0..ps {
            for b in 0..ps {
                let mut acc = 0.0;
                for i in 0..pb {
                    acc += self.f.get(i, a) * self.f.get(i, b);
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                if (acc - expect).abs() > 1e-12 {
                    return Err(Error::Nesting(format!(
                        "F^T F [{a},{b}] = {acc}, expected {expect}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Applies f(theta) = F theta + c.
    pub fn apply(&self, theta_small: &[f64]) -> Vec<f64> {
        let (pb, ps) = (self.f.nrows(), self.f.ncols());
        debug_assert_eq!(theta_small.len(), ps);
        (0..pb)
            .map(|i| {
                let mut acc = self.c[i];
                for k in 0..ps {
                    acc += self.f.get(i, k) * theta_small[k];
                }
                acc
            })
            .collect()
    }
}

/// Confirms that `map` really embeds `small` into `big`: orthonormality of F
/// and S_small(x, theta) = S_big(x, F theta + c) at every probe, to 1e-10
/// relative error entrywise.
pub fn verify_nesting(
    small: &DiffusionSpec,
    big: &DiffusionSpec,
    map: &NestingMap,
    probes: &[(Vec<f64>, Vec<f64>)],
) -> Result<()> {
    if map.target != big.id {
        return Err(Error::Nesting(format!(
            "map targets '{}' but big spec is '{}'",
            map.target, big.id
        )));
    }
    if map.f.nrows() != big.p() || map.f.ncols() != small.p() {
        return Err(Error::Nesting(format!(
            "F is {}x{}, expected {}x{}",
            map.f.nrows(),
            map.f.ncols(),
            big.p(),
            small.p()
        )));
    }
    map.check_orthonormal()?;
    let mut worst: Option<(usize, usize, f64)> = None;
    for (pi, (x, theta_small)) in probes.iter().enumerate() {
        if !small.bounds.contains(theta_small) {
            return Err(Error::Nesting(format!(
                "probe {pi} theta lies outside the small box"
            )));
        }
        let theta_big = map.apply(theta_small);
        let s_small = small.s_matrix(x, theta_small);
        let s_big = big.s_matrix(x, &theta_big);
        for e in 0..small.d * small.d {
            let a = s_small.data()[e];
            let b = s_big.data()[e];
            let scale = f64::max(a.abs(), b.abs()).max(1e-300);
            let rel = (a - b).abs() / scale;
            if rel > worst.map(|w| w.2).unwrap_or(0.0) {
                worst = Some((pi, e, rel));
            }
        }
    }
    if let Some((pi, e, rel)) = worst {
        if rel > 1e-10 {
            return Err(Error::Nesting(format!(
                "S equality fails: worst probe {pi}, entry {e}, relative error {rel:.3e}"
            )));
        }
    }
    Ok(())
}

/// Jump-size distribution for the compound Poisson contamination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpLaw {
    None,
    Normal { mean: f64, variance: f64 },
}

/// Compound Poisson jump component: expected `intensity` jumps per unit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSpec {
    pub intensity: f64,
    pub law: JumpLaw,
}

impl JumpSpec {
    pub fn new(intensity: f64, law: JumpLaw) -> Result<Self> {
        if !(intensity >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "jump intensity must be nonnegative, got {intensity}"
            )));
        }
        if let JumpLaw::Normal { variance, .. } = law {
            if !(variance > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "jump variance must be positive, got {variance}"
                )));
            }
        }
        Ok(JumpSpec { intensity, law })
    }

    pub fn none() -> Self {
        JumpSpec {
            intensity: 0.0,
            law: JumpLaw::None,
        }
    }
}

/// Drift of the data-generating model: (t, y, x) -> d-vector, written into
/// the output buffer.
pub type DriftFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;

/// How the covariate process X is produced.
#[derive(Clone)]
pub enum CovariateSpec {
    /// x = f(t), evaluated exactly at grid times (the closure also receives
    /// the grid index and n so that index-exact formulas stay index-exact).
    Deterministic(Arc<dyn Fn(f64, usize, usize) -> Vec<f64> + Send + Sync>),
    /// X = Y.
    Endogenous,
    /// X follows its own Euler-discretized SDE with optional jumps.
    SdeDriven {
        x0: Vec<f64>,
        drift: DriftFn,
        /// sigma'(t, x) written into a `dprime * rprime` buffer.
        diffusion: Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>,
        rprime: usize,
        jumps: JumpSpec,
    },
}

impl fmt::Debug for CovariateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariateSpec::Deterministic(_) => write!(f, "Deterministic"),
            CovariateSpec::Endogenous => write!(f, "Endogenous"),
            CovariateSpec::SdeDriven { .. } => write!(f, "SdeDriven"),
        }
    }
}

/// Full data-generating model: true diffusion coefficient at a fixed
/// parameter, drift, covariate dynamics and jump contamination.
#[derive(Clone)]
pub struct TrueModelSpec {
    pub diffusion: DiffusionSpec,
    pub theta0: Vec<f64>,
    pub y0: Vec<f64>,
    pub drift: DriftFn,
    pub covariate: CovariateSpec,
    pub jumps: JumpSpec,
}

impl fmt::Debug for TrueModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrueModelSpec")
            .field("diffusion", &self.diffusion)
            .field("theta0", &self.theta0)
            .field("y0", &self.y0)
            .field("covariate", &self.covariate)
            .field("jumps", &self.jumps)
            .finish()
    }
}

impl TrueModelSpec {
    pub fn new(
        diffusion: DiffusionSpec,
        theta0: Vec<f64>,
        y0: Vec<f64>,
        drift: DriftFn,
        covariate: CovariateSpec,
        jumps: JumpSpec,
    ) -> Result<Self> {
        if !diffusion.bounds.contains_interior(&theta0) {
            return Err(Error::InvalidSpec(format!(
                "theta0 {theta0:?} must lie strictly inside the parameter box of '{}'",
                diffusion.id
            )));
        }
        if y0.len() != diffusion.d {
            return Err(Error::InvalidSpec(format!(
                "y0 has length {}, expected d = {}",
                y0.len(),
                diffusion.d
            )));
        }
        Ok(TrueModelSpec {
            diffusion,
            theta0,
            y0,
            drift,
            covariate,
            jumps,
        })
    }

    /// Drift that is identically zero.
    pub fn zero_drift() -> DriftFn {
        Arc::new(|_t, _y, _x, out| out.fill(0.0))
    }
}

/// Which quasi-likelihood objective a fit maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectiveKind {
    Standard,
    DensityPower,
    Holder,
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ObjectiveKind::Standard => "standard",
            ObjectiveKind::DensityPower => "density-power",
            ObjectiveKind::Holder => "holder",
        };
        write!(f, "{s}")
    }
}

/// Which Schwarz-type criterion to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CriterionKind {
    Gqbic,
    DpGqbic,
    HGqbic,
    DpGqbicSharp,
}

impl CriterionKind {
    /// Objective kind whose maximizer feeds this criterion.
    pub fn objective(self) -> ObjectiveKind {
        match self {
            CriterionKind::Gqbic => ObjectiveKind::Standard,
            CriterionKind::DpGqbic | CriterionKind::DpGqbicSharp => ObjectiveKind::DensityPower,
            CriterionKind::HGqbic => ObjectiveKind::Holder,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "GQBIC" | "gqbic" => Ok(CriterionKind::Gqbic),
            "dpGQBIC" | "dpgqbic" => Ok(CriterionKind::DpGqbic),
            "HGQBIC" | "hgqbic" => Ok(CriterionKind::HGqbic),
            "dpGQBIC-sharp" | "dpgqbic-sharp" => Ok(CriterionKind::DpGqbicSharp),
            other => Err(Error::Config(format!("unknown criterion '{other}'"))),
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CriterionKind::Gqbic => "GQBIC",
            CriterionKind::DpGqbic => "dpGQBIC",
            CriterionKind::HGqbic => "HGQBIC",
            CriterionKind::DpGqbicSharp => "dpGQBIC-sharp",
        };
        write!(f, "{s}")
    }
}

/// Result of maximizing one objective over one candidate's parameter box.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub objective_value: f64,
    pub objective_kind: ObjectiveKind,
    pub lambda: f64,
    pub n_restarts_used: usize,
    pub n_evals: usize,
    pub converged: bool,
}

/// One criterion evaluation for one candidate. The additive decomposition
/// `value = minus2h + penalty + extras` holds bit-exactly by construction.
#[derive(Debug, Clone)]
pub struct CriterionRecord {
    pub kind: CriterionKind,
    pub value: f64,
    pub minus2h: f64,
    pub penalty: f64,
    pub extras: f64,
    pub candidate_id: String,
    pub p: usize,
}

/// Selection counts for one experimental cell (criterion, lambda, n, q).
#[derive(Debug, Clone)]
pub struct FrequencyRow {
    pub criterion: CriterionKind,
    pub lambda: f64,
    pub n: usize,
    pub q: f64,
    /// (candidate id, count), in registry order.
    pub counts: Vec<(String, usize)>,
    pub errors: usize,
}

impl FrequencyRow {
    pub fn replications(&self) -> usize {
        self.counts.iter().map(|(_, c)| c).sum::<usize>() + self.errors
    }

    pub fn share(&self, candidate: &str) -> f64 {
        let total = self.replications();
        let count = self
            .counts
            .iter()
            .find(|(id, _)| id == candidate)
            .map(|(_, c)| *c)
            .unwrap_or(0);
        count as f64 / total as f64
    }
}

/// Per (criterion, lambda, n, q) counts of selected candidates over a
/// Monte Carlo campaign.
#[derive(Debug, Clone, Default)]
pub struct FrequencyTable {
    pub rows: Vec<FrequencyRow>,
}

impl FrequencyTable {
    pub fn find(&self, criterion: CriterionKind, lambda: f64, n: usize) -> Option<&FrequencyRow> {
        self.rows
            .iter()
            .find(|r| r.criterion == criterion && r.lambda == lambda && r.n == n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    fn ok_grid(n: usize) -> ObservationGrid {
        let y = RowMat::new(vec![0.0; n + 1], 1);
        let x = RowMat::new(vec![1.0; n + 1], 1);
        ObservationGrid::new(1.0, y, x).unwrap()
    }

    #[test]
    fn validate_grid_accepts_uniform_grid() {
        let grid = ok_grid(100);
        assert!(validate_grid(&grid).is_ok());
        assert_eq!(grid.h(), 1.0 / 100.0);
    }

    #[test]
    fn validate_grid_reports_nan_row() {
        let mut y = vec![0.0; 101];
        y[3] = f64::NAN;
        let err = ObservationGrid::new(1.0, RowMat::new(y, 1), RowMat::new(vec![0.0; 101], 1))
            .unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }

    #[test]
    fn validate_grid_reports_non_uniform_step() {
        let grid = ok_grid(100);
        let mut times = grid.times().to_vec();
        times[5] += 1e-3;
        let err =
            ObservationGrid::from_raw(1.0, times, grid.y().clone(), grid.x().clone()).unwrap_err();
        assert!(err.to_string().contains("non-uniform step"), "{err}");
    }

    #[test]
    fn box_rejects_empty_interior() {
        assert!(ParameterBox::new(vec![0.0], vec![0.0]).is_err());
        assert!(ParameterBox::new(vec![1.0], vec![0.5]).is_err());
    }

    #[test]
    fn verify_nesting_study1_diff2_into_diff1() {
        let specs = registry::study1_candidates();
        let diff1 = &specs[0];
        let diff2 = &specs[1];
        let map = diff2.nest.clone().unwrap();
        let probes: Vec<(Vec<f64>, Vec<f64>)> = vec![
            (vec![1.0, 0.0, 1.0], vec![-2.0, 3.0]),
            (vec![0.3, -0.8, 0.5], vec![0.7, -1.2]),
            (vec![-0.6, 0.2, -0.9], vec![5.0, 5.0]),
        ];
        verify_nesting(diff2, diff1, &map, &probes).unwrap();
    }

    #[test]
    fn verify_nesting_identity_map() {
        let specs = registry::study1_candidates();
        let diff2 = &specs[1];
        let f = RowMat::new(vec![1.0, 0.0, 0.0, 1.0], 2);
        let map = NestingMap::new(f, vec![0.0, 0.0], diff2.id.clone()).unwrap();
        let probes = vec![(vec![0.5, 0.5, 0.5], vec![-2.0, 3.0])];
        verify_nesting(diff2, diff2, &map, &probes).unwrap();
    }

    #[test]
    fn verify_nesting_rejects_shifted_constant() {
        let specs = registry::study1_candidates();
        let diff1 = &specs[0];
        let diff2 = &specs[1];
        let f = RowMat::new(vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0], 2);
        let map = NestingMap::new(f, vec![0.0, 0.0, 1.0], diff1.id.clone()).unwrap();
        let probes = vec![(vec![0.4, -0.3, 0.9], vec![-2.0, 3.0])];
        let err = verify_nesting(diff2, diff1, &map, &probes).unwrap_err();
        assert!(err.to_string().contains("S equality fails"), "{err}");
    }

    #[test]
    fn jump_spec_rejects_bad_inputs() {
        assert!(JumpSpec::new(-1.0, JumpLaw::None).is_err());
        assert!(JumpSpec::new(
            1.0,
            JumpLaw::Normal {
                mean: 0.0,
                variance: 0.0
            }
        )
        .is_err());
    }

    #[test]
    fn true_model_requires_interior_theta0() {
        let specs = registry::study1_candidates();
        let diff2 = specs[1].clone();
        let err = TrueModelSpec::new(
            diff2,
            vec![-10.0, 3.0],
            vec![0.0],
            TrueModelSpec::zero_drift(),
            CovariateSpec::Endogenous,
            JumpSpec::none(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("strictly inside"), "{err}");
    }
}
