//! Built-in candidate coefficients and data-generating models for the two
//! shipped simulation studies, addressable by id.
//!
//! Study 1 (time-inhomogeneous Wiener process): seven exponential-family
//! candidates `sigma_m = exp(1/2 theta . x_subset)` over the trigonometric
//! covariate, true coefficient diff2 at theta0 = (-2, 3).
//!
//! Study 2 (jump diffusion): three rational candidates over the endogenous
//! covariate x = y, true coefficient diff2 at theta0 = (2, 3). The source
//! description labels the true pair (theta21, theta22) although diff2's
//! parameters are named (theta21, theta23); it is read as (theta21, theta23)
//! = (2, 3) here.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    CovariateSpec, DiffusionSpec, JumpLaw, JumpSpec, NestingMap, ParameterBox, RowMat,
    TrueModelSpec,
};

/// Default parameter box per exponential-family coordinate (study 1).
pub const STUDY1_BOX: (f64, f64) = (-10.0, 10.0);
/// Default parameter box per rational-family coordinate (study 2).
pub const STUDY2_BOX: (f64, f64) = (0.01, 20.0);

/// Which built-in study a candidate set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Study1,
    Study2,
}

impl Study {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "study1" => Ok(Study::Study1),
            "study2" => Ok(Study::Study2),
            other => Err(Error::Config(format!("unknown study '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Study::Study1 => "study1",
            Study::Study2 => "study2",
        }
    }

    pub fn candidates(self) -> Vec<DiffusionSpec> {
        match self {
            Study::Study1 => study1_candidates(),
            Study::Study2 => study2_candidates(),
        }
    }

    pub fn true_model(self, q: f64) -> Result<TrueModelSpec> {
        match self {
            Study::Study1 => study1_true_model(q),
            Study::Study2 => study2_true_model(q),
        }
    }

    /// Id of the minimal correctly specified candidate.
    pub fn true_candidate_id(self) -> &'static str {
        "diff2"
    }

    pub fn theta0(self) -> Vec<f64> {
        match self {
            Study::Study1 => vec![-2.0, 3.0],
            Study::Study2 => vec![2.0, 3.0],
        }
    }
}

/// Selector matrix picking `coords` out of a `p_big`-dimensional space.
fn selector_map(coords: &[usize], p_big: usize, target: &str) -> NestingMap {
    let mut f = RowMat::zeros(p_big, coords.len());
    for (k, &c) in coords.iter().enumerate() {
        f.set(c, k, 1.0);
    }
    NestingMap::new(f, vec![0.0; p_big], target).expect("selector columns are orthonormal")
}

/// sigma(x, theta) = exp(1/2 sum_k theta_k x_{coords[k]}), d = r = 1.
fn exp_half_spec(id: &str, coords: &'static [usize]) -> DiffusionSpec {
    let p = coords.len();
    let bounds = ParameterBox::cube(STUDY1_BOX.0, STUDY1_BOX.1, p).unwrap();
    DiffusionSpec::new(
        id,
        bounds,
        1,
        1,
        Arc::new(move |x: &[f64], theta: &[f64], out: &mut [f64]| {
            let mut acc = 0.0;
            for (k, &c) in coords.iter().enumerate() {
                acc += theta[k] * x[c];
            }
            out[0] = (0.5 * acc).exp();
        }),
    )
    .unwrap()
}

/// The seven study-1 candidates, in registry order diff1..diff7. All but
/// diff1 carry a nesting map into diff1.
pub fn study1_candidates() -> Vec<DiffusionSpec> {
    let subsets: [(&str, &'static [usize]); 7] = [
        ("diff1", &[0, 1, 2]),
        ("diff2", &[0, 1]),
        ("diff3", &[0, 2]),
        ("diff4", &[1, 2]),
        ("diff5", &[0]),
        ("diff6", &[1]),
        ("diff7", &[2]),
    ];
    subsets
        .iter()
        .map(|(id, coords)| {
            let spec = exp_half_spec(id, coords);
            if *id == "diff1" {
                spec
            } else {
                spec.with_nest(selector_map(coords, 3, "diff1"))
            }
        })
        .collect()
}

/// Study-1 data-generating model: dY = exp{(-2 X_1 + 3 X_2)/2} dw + dJ with
/// the trigonometric covariate and N(0, 3) jump sizes at intensity q.
pub fn study1_true_model(q: f64) -> Result<TrueModelSpec> {
    let diff2 = study1_candidates().remove(1);
    let jumps = if q > 0.0 {
        JumpSpec::new(
            q,
            JumpLaw::Normal {
                mean: 0.0,
                variance: 3.0,
            },
        )?
    } else {
        JumpSpec::none()
    };
    TrueModelSpec::new(
        diff2,
        vec![-2.0, 3.0],
        vec![0.0],
        TrueModelSpec::zero_drift(),
        CovariateSpec::Deterministic(Arc::new(|_t, j, n| {
            let a = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            vec![a.cos(), a.sin(), (2.0 * a).cos()]
        })),
        jumps,
    )
}

fn rational_spec(id: &str, powers: &'static [usize]) -> DiffusionSpec {
    // sigma(y, theta) = (sum_k theta_k y^{powers[k]}) / (1 + y^2)
    let p = powers.len();
    let bounds = ParameterBox::cube(STUDY2_BOX.0, STUDY2_BOX.1, p).unwrap();
    DiffusionSpec::new(
        id,
        bounds,
        1,
        1,
        Arc::new(move |x: &[f64], theta: &[f64], out: &mut [f64]| {
            let y = x[0];
            let mut num = 0.0;
            for (k, &pw) in powers.iter().enumerate() {
                num += theta[k] * y.powi(pw as i32);
            }
            out[0] = num / (1.0 + y * y);
        }),
    )
    .unwrap()
}

/// The three study-2 candidates, in registry order diff1..diff3.
pub fn study2_candidates() -> Vec<DiffusionSpec> {
    let diff1 = rational_spec("diff1", &[0, 1, 2]);
    let diff2 = rational_spec("diff2", &[0, 2]).with_nest(selector_map(&[0, 2], 3, "diff1"));
    let diff3 = rational_spec("diff3", &[0]).with_nest(selector_map(&[0], 3, "diff1"));
    vec![diff1, diff2, diff3]
}

/// Study-2 data-generating model: dY = Y dt + (2 + 3 Y^2)/(1 + Y^2) dw + dJ
/// with endogenous covariate X = Y.
pub fn study2_true_model(q: f64) -> Result<TrueModelSpec> {
    let diff2 = study2_candidates().remove(1);
    let jumps = if q > 0.0 {
        JumpSpec::new(
            q,
            JumpLaw::Normal {
                mean: 0.0,
                variance: 3.0,
            },
        )?
    } else {
        JumpSpec::none()
    };
    TrueModelSpec::new(
        diff2,
        vec![2.0, 3.0],
        vec![0.0],
        Arc::new(|_t, y: &[f64], _x, out: &mut [f64]| out[0] = y[0]),
        CovariateSpec::Endogenous,
        jumps,
    )
}

/// One-parameter spec with S(x, theta) = theta, constant in the covariate.
pub fn constant_diffusion_spec(id: &str, lo: f64, hi: f64) -> Result<DiffusionSpec> {
    DiffusionSpec::new(
        id,
        ParameterBox::new(vec![lo], vec![hi])?,
        1,
        1,
        Arc::new(|_x: &[f64], theta: &[f64], out: &mut [f64]| out[0] = theta[0].sqrt()),
    )
}

/// Data-generating model with S = s0 constant and the given jumps; used by
/// diagnostics and tests.
pub fn constant_true_model(s0: f64, jumps: JumpSpec) -> Result<TrueModelSpec> {
    let spec = constant_diffusion_spec("const", s0 * 1e-3, s0 * 1e3)?;
    TrueModelSpec::new(
        spec,
        vec![s0],
        vec![0.0],
        TrueModelSpec::zero_drift(),
        CovariateSpec::Deterministic(Arc::new(|_t, _j, _n| vec![1.0])),
        jumps,
    )
}

/// Looks up a candidate by id within a study's registry.
pub fn candidate_by_id(study: Study, id: &str) -> Result<DiffusionSpec> {
    study
        .candidates()
        .into_iter()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::Config(format!("unknown candidate '{id}' in {}", study.name())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::verify_nesting;

    #[test]
    fn study1_registry_shape() {
        let specs = study1_candidates();
        assert_eq!(specs.len(), 7);
        assert_eq!(specs[0].p(), 3);
        assert_eq!(specs[1].p(), 2);
        assert_eq!(specs[6].p(), 1);
        let ids: Vec<&str> = specs.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(
            ids,
            ["diff1", "diff2", "diff3", "diff4", "diff5", "diff6", "diff7"]
        );
    }

    #[test]
    fn all_shipped_nests_verify() {
        for study in [Study::Study1, Study::Study2] {
            let specs = study.candidates();
            let big = &specs[0];
            for small in &specs[1..] {
                let map = small.nest.as_ref().unwrap();
                let probes: Vec<(Vec<f64>, Vec<f64>)> = (0..5)
                    .map(|i| {
                        let t = i as f64 * 0.21;
                        let x = vec![t.cos(), (2.0 * t).sin(), (3.0 * t).cos()];
                        let theta = vec![0.5 + 0.3 * i as f64; small.p()];
                        (x, theta)
                    })
                    .collect();
                verify_nesting(small, big, map, &probes).unwrap();
            }
        }
    }

    #[test]
    fn study2_true_coefficient_matches_diff2() {
        let model = study2_true_model(0.0).unwrap();
        for y in [-2.0, 0.0, 0.5, 3.0] {
            let s = model.diffusion.s_matrix(&[y], &model.theta0).data()[0];
            let expect = ((2.0 + 3.0 * y * y) / (1.0 + y * y)).powi(2);
            assert!((s - expect).abs() < 1e-12 * expect.max(1.0));
        }
    }
}
