use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::rollout::rollout_cost;
use crate::env::Environment;
use crate::error::{CacheError, Result};
use crate::policy::{Policy, ThresholdParams};
use crate::seed::{rng_for, stream};

#[derive(Clone, Debug, PartialEq)]
pub struct FdmConfig {
    /// Perturbations are drawn uniformly from `[-r, r]` per coordinate.
    pub perturb_range: f64,
    pub trajectories_per_update: usize,
    pub slots_per_trajectory: usize,
    pub step_size: f64,
    pub updates_averaged: usize,
    /// Roll the perturbed and unperturbed policies on the same trace.
    pub common_random_numbers: bool,
}

impl Default for FdmConfig {
    fn default() -> Self {
        Self {
            perturb_range: 0.08,
            trajectories_per_update: 100,
            slots_per_trajectory: 300,
            step_size: 0.0,
            updates_averaged: 5,
            common_random_numbers: true,
        }
    }
}

impl FdmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.perturb_range > 0.0) {
            return Err(CacheError::Config(
                "fdm perturbation range must be positive".into(),
            ));
        }
        if self.trajectories_per_update == 0
            || self.slots_per_trajectory == 0
            || self.updates_averaged == 0
        {
            return Err(CacheError::Config("fdm counts must be at least 1".into()));
        }
        if !(self.step_size >= 0.0) {
            return Err(CacheError::Config("step size must be nonnegative".into()));
        }
        Ok(())
    }

    /// Rollouts consumed by one gradient estimate.
    pub fn trajectories_per_estimate(&self) -> usize {
        2 * self.trajectories_per_update
    }
}

/// Least-squares gradient from perturbations (rows of `dtheta`) and cost
/// differences.
#[derive(Clone, Debug, PartialEq)]
pub struct Regression {
    pub gradient: Vec<f64>,
    /// Whether the ridge term had to be added.
    pub regularized: bool,
}

/// Solves `min_g |dTheta g - dJ|`. With fewer rows than columns, or an
/// ill-conditioned normal matrix, a ridge `eps = 1e-8 trace / dim` is added;
/// the underdetermined case uses the dual form
/// `dTheta^T (dTheta dTheta^T + eps I)^-1 dJ`.
pub fn fdm_regression(dtheta: &[Vec<f64>], dj: &[f64]) -> Result<Regression> {
    let n = dtheta.len();
    if n == 0 || n != dj.len() {
        return Err(CacheError::SingularRegression);
    }
    let d = dtheta[0].len();
    let x = DMatrix::from_fn(n, d, |i, j| dtheta[i][j]);
    let y = DVector::from_column_slice(dj);
    let trace: f64 = x.iter().map(|v| v * v).sum();
    if !(trace > 0.0) {
        return Err(CacheError::SingularRegression);
    }
    let eps = 1e-8 * trace / d as f64;
    if n >= d {
        let a = x.transpose() * &x;
        let b = x.transpose() * &y;
        if let Some(chol) = a.clone().cholesky() {
            let diag = chol.l_dirty().diagonal();
            let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
                (lo.min(v.abs()), hi.max(v.abs()))
            });
            if lo * lo > 1e-12 * hi * hi {
                return Ok(Regression {
                    gradient: chol.solve(&b).iter().copied().collect(),
                    regularized: false,
                });
            }
        }
        let ridge = a + DMatrix::identity(d, d) * eps;
        let chol = ridge.cholesky().ok_or(CacheError::SingularRegression)?;
        Ok(Regression {
            gradient: chol.solve(&b).iter().copied().collect(),
            regularized: true,
        })
    } else {
        let g = &x * x.transpose() + DMatrix::identity(n, n) * eps;
        let chol = g.cholesky().ok_or(CacheError::SingularRegression)?;
        let alpha = chol.solve(&y);
        Ok(Regression {
            gradient: (x.transpose() * alpha).iter().copied().collect(),
            regularized: true,
        })
    }
}

/// Finite-difference gradient of an arbitrary objective.
///
/// `objective(theta, i, perturbed)` evaluates the `i`-th noisy sample at the
/// base point (`perturbed == false`) or at the `i`-th perturbed point. `project` maps a perturbed
/// point back into the feasible set and the regression uses the perturbation
/// that survives it.
pub fn fdm_gradient_with<R, F, P>(
    theta: &[f64],
    n: usize,
    range: f64,
    project: P,
    objective: F,
    rng: &mut R,
) -> Result<Regression>
where
    R: Rng + ?Sized,
    F: Fn(&[f64], usize, bool) -> f64 + Sync,
    P: Fn(&mut [f64]),
{
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let mut p: Vec<f64> = theta
            .iter()
            .map(|t| t + rng.random_range(-range..=range))
            .collect();
        project(&mut p);
        points.push(p);
    }
    let dj: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| objective(&points[i], i, true) - objective(theta, i, false))
        .collect();
    let dtheta: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(theta).map(|(a, b)| a - b).collect())
        .collect();
    fdm_regression(&dtheta, &dj)
}

/// Finite-difference gradient of the deterministic threshold policy's cost.
pub fn fdm_gradient<R: Rng + ?Sized>(
    env: &Environment,
    params: &ThresholdParams,
    cfg: &FdmConfig,
    rng: &mut R,
) -> Result<Regression> {
    cfg.validate()?;
    let n = cfg.trajectories_per_update;
    let seed: u64 = rng.random();
    let traces = (0..n)
        .into_par_iter()
        .map(|i| {
            let base = env.sample_trace(
                cfg.slots_per_trajectory,
                &mut rng_for(seed, &[stream::TRACE, i as u64, 0]),
            )?;
            let perturbed = if cfg.common_random_numbers {
                None
            } else {
                Some(env.sample_trace(
                    cfg.slots_per_trajectory,
                    &mut rng_for(seed, &[stream::TRACE, i as u64, 1]),
                )?)
            };
            Ok((base, perturbed))
        })
        .collect::<Result<Vec<_>>>()?;
    let template = params.clone();
    let objective = |theta: &[f64], i: usize, perturbed: bool| {
        let mut p = template.clone();
        p.set_vec(theta);
        let trace = match &traces[i].1 {
            Some(other) if perturbed => other,
            _ => &traces[i].0,
        };
        rollout_cost(
            env,
            &Policy::Threshold(p),
            trace,
            &mut rng_for(seed, &[stream::POLICY, i as u64]),
        )
    };
    let project = |theta: &mut [f64]| {
        let mut p = template.clone();
        p.set_vec(theta);
        p.project();
        theta.copy_from_slice(p.as_slice());
    };
    fdm_gradient_with(
        params.as_slice(),
        n,
        cfg.perturb_range,
        project,
        objective,
        rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_objective_is_recovered() {
        let a = [0.3, -1.2, 2.5, 0.0, 4.0];
        let theta = [1.0, 2.0, 3.0, 4.0, 5.0];
        let f = |t: &[f64], _, _| t.iter().zip(&a).map(|(x, y)| x * y).sum::<f64>();
        let g = fdm_gradient_with(&theta, 40, 0.1, |_| {}, f, &mut rng_for(1, &[])).unwrap();
        assert!(!g.regularized);
        for (x, y) in g.gradient.iter().zip(&a) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-8);
        }
    }

    #[test]
    fn scalar_regression_is_least_squares_slope() {
        let dt = vec![vec![0.1], vec![-0.2], vec![0.05]];
        let dj = [0.3, -0.5, 0.2];
        let g = fdm_regression(&dt, &dj).unwrap();
        let slope = (0.1 * 0.3 + 0.2 * 0.5 + 0.05 * 0.2) / (0.01 + 0.04 + 0.0025);
        assert_abs_diff_eq!(g.gradient[0], slope, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_bias_shrinks_with_range() {
        let theta = [0.0; 4];
        let f = |t: &[f64], _, _| t.iter().map(|x| x * x).sum::<f64>();
        let norm = |r: f64| {
            let g = fdm_gradient_with(&theta, 50, r, |_| {}, f, &mut rng_for(2, &[])).unwrap();
            g.gradient.iter().map(|x| x * x).sum::<f64>().sqrt()
        };
        let (big, small) = (norm(0.1), norm(0.001));
        assert!(small < big * 0.05 && small < 0.01, "{big} {small}");
    }

    #[test]
    fn underdetermined_uses_ridge() {
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let f = |t: &[f64], _, _| t.iter().zip(&a).map(|(x, y)| x * y).sum::<f64>();
        let g = fdm_gradient_with(&[0.0; 10], 4, 0.1, |_| {}, f, &mut rng_for(3, &[])).unwrap();
        assert!(g.regularized);
        assert!(g.gradient.iter().all(|v| v.is_finite()));
        // minimum-norm solution is consistent with every observed difference
        assert!(fdm_regression(&[vec![0.0, 0.0]], &[1.0]).is_err());
    }
}
