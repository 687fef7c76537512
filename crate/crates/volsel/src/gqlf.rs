//! The three quasi-likelihood objectives and the normalizing constant
//! `k_lambda`, evaluated in log-domain form.
//!
//! Per step the increment enters only through the normalized form
//! `ny_j = h^{-1/2} (Y_{t_j} - Y_{t_{j-1}})` and the candidate covariance
//! `S_{j-1}(theta)` evaluated at the previous covariate row. Positive
//! definiteness is checked lazily at evaluation time via Cholesky; a pivot
//! below 1e-300 is treated as non-PD.

use crate::error::{Error, Result};
use crate::model::{DiffusionSpec, ObjectiveKind, ObservationGrid, RowMat};

const LN_2PI: f64 = 1.8378770664093453;
const PIVOT_MIN: f64 = 1e-300;

/// Tuning parameter lambda with its documented soft upper bound. Exactly
/// zero selects the standard objective at the dispatching layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaTuning {
    pub lambda: f64,
    pub lambda_bar: f64,
}

impl LambdaTuning {
    pub const DEFAULT_BAR: f64 = 0.5;

    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_bar(lambda, Self::DEFAULT_BAR)
    }

    pub fn with_bar(lambda: f64, lambda_bar: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidLambda(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        if lambda > lambda_bar {
            return Err(Error::InvalidLambda(format!(
                "lambda = {lambda} exceeds the soft bound {lambda_bar}"
            )));
        }
        Ok(LambdaTuning { lambda, lambda_bar })
    }

    pub fn is_standard(&self) -> bool {
        self.lambda == 0.0
    }
}

/// Normalized increments and previous-step covariate rows, built once per
/// grid and shared read-only across evaluations.
#[derive(Debug, Clone)]
pub struct IncrementCache {
    pub n: usize,
    pub d: usize,
    pub h: f64,
    ny: RowMat,
    x_prev: RowMat,
}

impl IncrementCache {
    pub fn new(grid: &ObservationGrid) -> Self {
        let n = grid.n();
        let d = grid.d();
        let h = grid.h();
        let sqrt_h = h.sqrt();
        let mut ny = RowMat::zeros(n, d);
        let mut x_prev = RowMat::zeros(n, grid.dprime());
        for j in 1..=n {
            for i in 0..d {
                ny.set(j - 1, i, (grid.y().get(j, i) - grid.y().get(j - 1, i)) / sqrt_h);
            }
            x_prev.row_mut(j - 1).copy_from_slice(grid.x().row(j - 1));
        }
        IncrementCache { n, d, h, ny, x_prev }
    }

    pub fn ny(&self, j: usize) -> &[f64] {
        self.ny.row(j)
    }

    pub fn x_prev(&self, j: usize) -> &[f64] {
        self.x_prev.row(j)
    }
}

/// Per-step scratch buffers reused across the summation loop.
struct StepScratch {
    sig: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
}

impl StepScratch {
    fn new(spec: &DiffusionSpec) -> Self {
        StepScratch {
            sig: vec![0.0; spec.d * spec.r],
            s: vec![0.0; spec.d * spec.d],
            z: vec![0.0; spec.d],
        }
    }
}

/// In-place Cholesky of the row-major `d x d` matrix `s` (lower triangle),
/// followed by a solve to produce `(log det S, ny^T S^{-1} ny)`.
fn logdet_and_quad(s: &mut [f64], d: usize, ny: &[f64], z: &mut [f64]) -> Option<(f64, f64)> {
    if d == 1 {
        let v = s[0];
        if !(v > PIVOT_MIN) || !v.is_finite() {
            return None;
        }
        return Some((v.ln(), ny[0] * ny[0] / v));
    }
    // Lower-triangular Cholesky, L stored in s.
    for i in 0..d {
        for j in 0..=i {
            let mut acc = s[i * d + j];
            for k in 0..j {
                acc -= s[i * d + k] * s[j * d + k];
            }
            if i == j {
                if !(acc > PIVOT_MIN) || !acc.is_finite() {
                    return None;
                }
                s[i * d + j] = acc.sqrt();
            } else {
                s[i * d + j] = acc / s[j * d + j];
            }
        }
    }
    let mut logdet = 0.0;
    for i in 0..d {
        logdet += s[i * d + i].ln();
    }
    logdet *= 2.0;
    // Solve L z = ny.
    for i in 0..d {
        let mut acc = ny[i];
        for k in 0..i {
            acc -= s[i * d + k] * z[k];
        }
        z[i] = acc / s[i * d + i];
    }
    let quad = z.iter().map(|v| v * v).sum();
    Some((logdet, quad))
}

fn step_terms(
    cache: &IncrementCache,
    spec: &DiffusionSpec,
    theta: &[f64],
    j: usize,
    scratch: &mut StepScratch,
) -> Result<(f64, f64)> {
    spec.s_into(cache.x_prev(j), theta, &mut scratch.sig, &mut scratch.s);
    logdet_and_quad(&mut scratch.s, spec.d, cache.ny(j), &mut scratch.z).ok_or_else(|| {
        Error::NotPositiveDefinite {
            step: j + 1,
            theta: theta.to_vec(),
        }
    })
}

fn check_theta(spec: &DiffusionSpec, theta: &[f64]) -> Result<()> {
    if !spec.bounds.contains(theta) {
        return Err(Error::InvalidSpec(format!(
            "theta {theta:?} outside the closed box of '{}'",
            spec.id
        )));
    }
    Ok(())
}

/// Standard Gaussian quasi-log-likelihood, including the theta-independent
/// `-(d/2) log(2 pi h)` constant of each Gaussian transition term (so the
/// lambda -> 0 degeneration identities hold exactly).
pub fn gqlf_standard(cache: &IncrementCache, spec: &DiffusionSpec, theta: &[f64]) -> Result<f64> {
    check_theta(spec, theta)?;
    let d = cache.d as f64;
    let mut scratch = StepScratch::new(spec);
    let constant = -0.5 * d * (LN_2PI + cache.h.ln());
    let mut acc = 0.0;
    for j in 0..cache.n {
        let (logdet, quad) = step_terms(cache, spec, theta, j, &mut scratch)?;
        acc += constant - 0.5 * logdet - 0.5 * quad;
    }
    Ok(acc)
}

/// Density-power Gaussian quasi-log-likelihood, lambda > 0.
pub fn gqlf_density_power(
    cache: &IncrementCache,
    spec: &DiffusionSpec,
    theta: &[f64],
    lambda: f64,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidLambda(format!(
            "density-power objective requires lambda > 0, got {lambda}"
        )));
    }
    check_theta(spec, theta)?;
    let d = cache.d as f64;
    let mut scratch = StepScratch::new(spec);
    // (2 pi)^{-d lambda / 2} / (lambda + 1)^{1 + d/2}, via logs.
    let offset = (-0.5 * d * lambda * LN_2PI - (1.0 + 0.5 * d) * (lambda + 1.0).ln()).exp();
    let mut acc = 0.0;
    for j in 0..cache.n {
        let (logdet, quad) = step_terms(cache, spec, theta, j, &mut scratch)?;
        let det_pow = (-0.5 * lambda * logdet).exp();
        let phi_pow = (lambda * (-0.5 * d * LN_2PI - 0.5 * quad)).exp();
        acc += det_pow * (phi_pow / lambda - offset);
    }
    Ok(acc)
}

/// Hoelder-based Gaussian quasi-log-likelihood, lambda > 0.
pub fn gqlf_holder(
    cache: &IncrementCache,
    spec: &DiffusionSpec,
    theta: &[f64],
    lambda: f64,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidLambda(format!(
            "Hoelder objective requires lambda > 0, got {lambda}"
        )));
    }
    check_theta(spec, theta)?;
    let d = cache.d as f64;
    let mut scratch = StepScratch::new(spec);
    let det_exp = -0.5 * lambda / (lambda + 1.0);
    let mut acc = 0.0;
    for j in 0..cache.n {
        let (logdet, quad) = step_terms(cache, spec, theta, j, &mut scratch)?;
        acc += (det_exp * logdet + lambda * (-0.5 * d * LN_2PI - 0.5 * quad)).exp() / lambda;
    }
    Ok(acc)
}

/// Closed-form constant linking the Hoelder objective to the standard one:
/// `k_lambda = (h^{d lambda/2})^{-1/(lambda+1)} lambda
/// {(2 pi)^{-d lambda/2} / (lambda+1)^{d/2}}^{-lambda/(lambda+1)}`.
pub fn k_lambda(h: f64, d: usize, lambda: f64) -> f64 {
    let d = d as f64;
    let ln_a = -0.5 * d * lambda * LN_2PI - 0.5 * d * (lambda + 1.0).ln();
    let ln_k = -0.5 * d * lambda * h.ln() / (lambda + 1.0) + lambda.ln()
        - lambda / (lambda + 1.0) * ln_a;
    ln_k.exp()
}

/// Raw objective dispatch. Lambda = 0 is an alias for the standard objective
/// for every kind.
pub fn objective(
    cache: &IncrementCache,
    spec: &DiffusionSpec,
    theta: &[f64],
    kind: ObjectiveKind,
    lambda: f64,
) -> Result<f64> {
    if lambda == 0.0 {
        return gqlf_standard(cache, spec, theta);
    }
    match kind {
        ObjectiveKind::Standard => gqlf_standard(cache, spec, theta),
        ObjectiveKind::DensityPower => gqlf_density_power(cache, spec, theta, lambda),
        ObjectiveKind::Holder => gqlf_holder(cache, spec, theta, lambda),
    }
}

/// Centered, rescaled objective that converges to the standard GQLF as
/// lambda -> 0: `(1/h^{d lambda/2}) H(theta;lambda) - n/lambda +
/// n/h^{d lambda/2}` for the density-power kind and `(1/lambda)
/// (k_lambda H_flat(theta;lambda) - n)` for the Hoelder kind.
pub fn centered_objective(
    cache: &IncrementCache,
    spec: &DiffusionSpec,
    theta: &[f64],
    kind: ObjectiveKind,
    lambda: f64,
) -> Result<f64> {
    if lambda == 0.0 {
        return gqlf_standard(cache, spec, theta);
    }
    let n = cache.n as f64;
    let d = cache.d as f64;
    match kind {
        ObjectiveKind::Standard => gqlf_standard(cache, spec, theta),
        ObjectiveKind::DensityPower => {
            let scale = (-0.5 * d * lambda * cache.h.ln()).exp(); // h^{-d lambda/2}
            let raw = gqlf_density_power(cache, spec, theta, lambda)?;
            Ok(scale * raw - n / lambda + n * scale)
        }
        ObjectiveKind::Holder => {
            let raw = gqlf_holder(cache, spec, theta, lambda)?;
            Ok((k_lambda(cache.h, cache.d, lambda) * raw - n) / lambda)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ObservationGrid, ParameterBox, RowMat};
    use crate::registry;
    use crate::simulate::{simulate_path, SeedPlan};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    /// Grid with a single increment dy at step h = 1, x constant.
    fn single_increment_grid(dy: f64) -> ObservationGrid {
        let y = RowMat::new(vec![0.0, dy], 1);
        let x = RowMat::new(vec![1.0, 1.0], 1);
        ObservationGrid::new(1.0, y, x).unwrap()
    }

    /// One-parameter spec with S(x, theta) = theta (constant in x).
    fn constant_spec() -> DiffusionSpec {
        registry::constant_diffusion_spec("const", 0.01, 100.0).unwrap()
    }

    #[test]
    fn standard_single_increment_values() {
        let spec = constant_spec();
        let cache = IncrementCache::new(&single_increment_grid(1.0));
        // d=1, h=1, S=2, dY=1: -0.5 log(4 pi) - 0.25
        let v = gqlf_standard(&cache, &spec, &[2.0]).unwrap();
        assert_relative_eq!(v, -1.5155121, epsilon = 1e-6);
        // d=1, h=1, S=1, dY=0: log phi(0)
        let cache0 = IncrementCache::new(&single_increment_grid(0.0));
        let v0 = gqlf_standard(&cache0, &spec, &[1.0]).unwrap();
        assert_relative_eq!(v0, -0.9189385, epsilon = 1e-6);
    }

    #[test]
    fn density_power_single_increment_value() {
        let spec = constant_spec();
        let cache = IncrementCache::new(&single_increment_grid(0.0));
        let v = gqlf_density_power(&cache, &spec, &[1.0], 1.0).unwrap();
        // (2 pi)^{-1/2} (1 - 2^{-3/2})
        assert_relative_eq!(v, 0.2578948845, epsilon = 1e-6);
    }

    #[test]
    fn holder_single_increment_value() {
        let spec = constant_spec();
        let cache = IncrementCache::new(&single_increment_grid(0.0));
        let v = gqlf_holder(&cache, &spec, &[1.0], 1.0).unwrap();
        assert_relative_eq!(v, 0.3989423, epsilon = 1e-6);
    }

    #[test]
    fn k_lambda_values() {
        // k_lambda / lambda -> 1 as lambda -> 0
        let r = k_lambda(0.37, 2, 1e-8) / 1e-8;
        assert!((r - 1.0).abs() < 1e-6, "ratio = {r}");
        assert_relative_eq!(k_lambda(0.01, 1, 0.2), 0.3073251465, epsilon = 1e-6);
        assert_relative_eq!(k_lambda(1.0, 1, 0.2), 0.2093781849, epsilon = 1e-6);
    }

    fn degeneration_errors(cache: &IncrementCache, spec: &DiffusionSpec, theta: &[f64]) -> Vec<(f64, f64)> {
        let std = gqlf_standard(cache, spec, theta).unwrap();
        let mut out = Vec::new();
        for &lam in &[1e-2, 1e-4, 1e-6] {
            let dp = centered_objective(cache, spec, theta, ObjectiveKind::DensityPower, lam).unwrap();
            let ho = centered_objective(cache, spec, theta, ObjectiveKind::Holder, lam).unwrap();
            out.push(((dp - std).abs(), (ho - std).abs()));
        }
        out
    }

    #[test]
    fn lambda_to_zero_degeneration() {
        let model = registry::study1_true_model(0.0).unwrap();
        let grid = simulate_path(&model, 50, 1.0, &SeedPlan::new(2, 0)).unwrap();
        let cache = IncrementCache::new(&grid);
        let spec = registry::study1_candidates()[1].clone();
        let errs = degeneration_errors(&cache, &spec, &[-2.0, 3.0]);
        for w in errs.windows(2) {
            assert!(w[1].0 < w[0].0, "dp errors not decreasing: {errs:?}");
            assert!(w[1].1 < w[0].1, "holder errors not decreasing: {errs:?}");
        }
        assert!(errs[2].0 < 1e-3, "dp error at 1e-6: {}", errs[2].0);
        assert!(errs[2].1 < 1e-3, "holder error at 1e-6: {}", errs[2].1);
    }

    #[test]
    fn nested_equality_of_all_objectives() {
        let model = registry::study1_true_model(10.0).unwrap();
        let grid = simulate_path(&model, 200, 1.0, &SeedPlan::new(9, 0)).unwrap();
        let cache = IncrementCache::new(&grid);
        let specs = registry::study1_candidates();
        let (diff1, diff2) = (&specs[0], &specs[1]);
        let map = diff2.nest.as_ref().unwrap();
        for theta in [[-2.0, 3.0], [0.5, -0.25], [4.0, 4.0]] {
            let big = map.apply(&theta);
            for kind in [ObjectiveKind::Standard, ObjectiveKind::DensityPower, ObjectiveKind::Holder] {
                let a = objective(&cache, diff2, &theta, kind, 0.2).unwrap();
                let b = objective(&cache, diff1, &big, kind, 0.2).unwrap();
                assert_relative_eq!(a, b, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn robust_terms_bounded_in_increment() {
        let spec = constant_spec();
        let lam = 0.2;
        let mut prev_dp = f64::NAN;
        let mut prev_ho = f64::NAN;
        for &dy in &[1e3, 1e6] {
            let cache = IncrementCache::new(&single_increment_grid(dy));
            let dp = gqlf_density_power(&cache, &spec, &[1.0], lam).unwrap();
            let ho = gqlf_holder(&cache, &spec, &[1.0], lam).unwrap();
            let std = gqlf_standard(&cache, &spec, &[1.0]).unwrap();
            assert!(dp.is_finite() && ho.is_finite());
            assert!(std < -1e5, "standard term must diverge, got {std}");
            prev_dp = dp;
            prev_ho = ho;
        }
        // Limits: dp term -> -det^{-lambda/2} offset, holder term -> 0.
        let offset = (-0.5 * lam * LN_2PI - (1.0 + 0.5) * (lam + 1.0f64).ln()).exp();
        assert_relative_eq!(prev_dp, -offset, epsilon = 1e-10);
        assert!(prev_ho.abs() < 1e-10);
    }

    #[test]
    fn non_pd_spec_reports_step() {
        // sigma that flips S negative on the second step's covariate.
        let bounds = ParameterBox::cube(0.0, 2.0, 1).unwrap();
        let spec = DiffusionSpec::new(
            "bad",
            bounds,
            1,
            1,
            Arc::new(|x: &[f64], theta: &[f64], out: &mut [f64]| {
                out[0] = if x[0] > 0.5 { f64::NAN } else { theta[0] + 1.0 };
            }),
        )
        .unwrap();
        let y = RowMat::new(vec![0.0, 0.1, 0.2], 1);
        let x = RowMat::new(vec![0.0, 1.0, 0.0], 1);
        let grid = ObservationGrid::new(1.0, y, x).unwrap();
        let cache = IncrementCache::new(&grid);
        match gqlf_standard(&cache, &spec, &[1.0]) {
            Err(Error::NotPositiveDefinite { step, .. }) => assert_eq!(step, 2),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn lambda_tuning_validation() {
        assert!(LambdaTuning::new(0.0).unwrap().is_standard());
        assert!(LambdaTuning::new(0.2).is_ok());
        assert!(LambdaTuning::new(-0.1).is_err());
        assert!(LambdaTuning::new(0.6).is_err());
        assert!(LambdaTuning::with_bar(0.6, 1.0).is_ok());
    }
}

#[cfg(test)]
mod scale_prop {
    use super::*;
    use crate::model::{ObservationGrid, RowMat};
    use crate::registry;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        /// d=1 scale consistency: scaling every increment by c and S by c^2
        /// shifts the standard GQLF by exactly -n log c and leaves the
        /// quadratic form invariant.
        #[test]
        fn standard_gqlf_scale_consistency(
            c in 0.25f64..4.0,
            incs in proptest::collection::vec(-2.0f64..2.0, 5..20),
        ) {
            let n = incs.len();
            let mut y = vec![0.0];
            for dv in &incs {
                y.push(y.last().unwrap() + dv);
            }
            let y_scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
            let x = RowMat::new(vec![1.0; n + 1], 1);
            let g1 = ObservationGrid::new(1.0, RowMat::new(y, 1), x.clone()).unwrap();
            let g2 = ObservationGrid::new(1.0, RowMat::new(y_scaled, 1), x).unwrap();
            let c1 = IncrementCache::new(&g1);
            let c2 = IncrementCache::new(&g2);
            let spec = registry::constant_diffusion_spec("const", 1e-6, 1e6).unwrap();
            let theta = 1.7f64;
            let a = gqlf_standard(&c1, &spec, &[theta]).unwrap();
            let b = gqlf_standard(&c2, &spec, &[theta * c * c]).unwrap();
            prop_assert!((b - (a - n as f64 * c.ln())).abs() < 1e-8 * (1.0 + a.abs()));
        }
    }
}
