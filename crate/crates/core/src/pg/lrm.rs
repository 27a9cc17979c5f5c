use rand::Rng;
use rayon::prelude::*;

use super::rollout::rollout_score;
use crate::env::Environment;
use crate::error::{CacheError, Result};
use crate::policy::ThresholdParams;
use crate::seed::{rng_for, stream};

#[derive(Clone, Debug, PartialEq)]
pub struct LrmConfig {
    /// Slope of the sigmoid acceptance probability, per mW.
    pub eta: f64,
    pub trajectories_per_update: usize,
    pub slots_per_trajectory: usize,
    pub step_size: f64,
    pub updates_averaged: usize,
    pub use_baseline: bool,
}

impl Default for LrmConfig {
    fn default() -> Self {
        Self {
            eta: 10.0,
            trajectories_per_update: 20,
            slots_per_trajectory: 300,
            step_size: 0.0,
            updates_averaged: 5,
            use_baseline: true,
        }
    }
}

impl LrmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(CacheError::Config("lrm slope eta must be positive".into()));
        }
        if self.trajectories_per_update == 0
            || self.slots_per_trajectory == 0
            || self.updates_averaged == 0
        {
            return Err(CacheError::Config("lrm counts must be at least 1".into()));
        }
        if !(self.step_size >= 0.0) {
            return Err(CacheError::Config("step size must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-coordinate baseline `b_h = sum g_h^2 J / sum g_h^2` (0 where all
/// scores vanish).
pub fn lrm_baseline(samples: &[(f64, Vec<f64>)]) -> Vec<f64> {
    let dim = samples.first().map_or(0, |s| s.1.len());
    let mut num = vec![0.0; dim];
    let mut den = vec![0.0; dim];
    for (j, g) in samples {
        for h in 0..dim {
            let g2 = g[h] * g[h];
            num[h] += g2 * j;
            den[h] += g2;
        }
    }
    num.iter()
        .zip(&den)
        .map(|(n, d)| if *d > 0.0 { n / d } else { 0.0 })
        .collect()
}

/// Likelihood-ratio estimate `mean_i g(tau_i) (J(tau_i) - b)` from sampled
/// `(J, g)` pairs.
pub fn lrm_estimate(samples: &[(f64, Vec<f64>)], baseline: Option<&[f64]>) -> Vec<f64> {
    let dim = samples.first().map_or(0, |s| s.1.len());
    let zero = vec![0.0; dim];
    let b = baseline.unwrap_or(&zero);
    let mut out = vec![0.0; dim];
    for (j, g) in samples {
        for h in 0..dim {
            out[h] += g[h] * (j - b[h]);
        }
    }
    let n = samples.len().max(1) as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

/// Draws `n` randomized rollouts and returns their `(J, score)` pairs in
/// index order.
pub fn lrm_samples(
    env: &Environment,
    params: &ThresholdParams,
    eta: f64,
    n: usize,
    slots: usize,
    seed: u64,
) -> Result<Vec<(f64, Vec<f64>)>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let trace = env.sample_trace(slots, &mut rng_for(seed, &[stream::TRACE, i as u64]))?;
            Ok(rollout_score(
                env,
                params,
                eta,
                &trace,
                &mut rng_for(seed, &[stream::POLICY, i as u64]),
            ))
        })
        .collect()
}

/// Likelihood-ratio gradient of the randomized policy's average cost.
pub fn lrm_gradient<R: Rng + ?Sized>(
    env: &Environment,
    params: &ThresholdParams,
    cfg: &LrmConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let samples = lrm_samples(
        env,
        params,
        cfg.eta,
        cfg.trajectories_per_update,
        cfg.slots_per_trajectory,
        rng.random(),
    )?;
    let baseline = cfg.use_baseline.then(|| lrm_baseline(&samples));
    Ok(lrm_estimate(&samples, baseline.as_deref()))
}
