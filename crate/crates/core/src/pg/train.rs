use rand::SeedableRng;
use rayon::prelude::*;

use super::fdm::{fdm_gradient, FdmConfig};
use super::lrm::{lrm_gradient, LrmConfig};
use super::rollout::rollout_cost;
use crate::bounds::UcThresholds;
use crate::env::{Environment, Trace};
use crate::error::{CacheError, Result};
use crate::policy::{Policy, PolicyKind, ThresholdParams};
use crate::seed::{derive_seed, rng_for, stream, SimRng};
use crate::stats::mean_stderr;

/// Initial value of the swap thresholds `theta(l, L)` with `l >= 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SwapInit {
    /// No swaps until learned.
    #[default]
    Zero,
    /// `T_L - T_l`: the unlimited-cache value of the incoming content minus
    /// that of the evicted one.
    LifetimeGap,
}

/// LISO: `theta(0, L) = T_L` and 0 elsewhere; LFA replicates the same
/// thresholds in every frequency bin.
pub fn init_from_ucb(uc: &UcThresholds, kind: PolicyKind, c_max: f64) -> ThresholdParams {
    init_from_ucb_with(uc, kind, c_max, SwapInit::Zero)
}

pub fn init_from_ucb_with(
    uc: &UcThresholds,
    kind: PolicyKind,
    c_max: f64,
    swaps: SwapInit,
) -> ThresholdParams {
    let k = uc.k_max();
    let mut liso = ThresholdParams::zeros(PolicyKind::Liso, k, c_max);
    for big_l in 1..=k {
        let t = uc.by_lifetime[big_l - 1];
        liso.set(0, 0, big_l, t.min(c_max));
        if swaps == SwapInit::LifetimeGap {
            for l in 1..big_l {
                liso.set(0, l, big_l, (t - uc.by_lifetime[l - 1]).clamp(0.0, c_max));
            }
        }
    }
    match kind {
        PolicyKind::Liso => liso,
        PolicyKind::Lfa => ThresholdParams::lfa_from_liso(&liso),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Optimizer {
    Fdm(FdmConfig),
    Lrm(LrmConfig),
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Fdm(_) => "FDM",
            Optimizer::Lrm(_) => "LRM",
        }
    }

    pub fn step_size(&self) -> f64 {
        match self {
            Optimizer::Fdm(c) => c.step_size,
            Optimizer::Lrm(c) => c.step_size,
        }
    }

    pub fn set_step_size(&mut self, lambda: f64) {
        match self {
            Optimizer::Fdm(c) => c.step_size = lambda,
            Optimizer::Lrm(c) => c.step_size = lambda,
        }
    }

    fn updates_averaged(&self) -> usize {
        match self {
            Optimizer::Fdm(c) => c.updates_averaged,
            Optimizer::Lrm(c) => c.updates_averaged,
        }
    }

    /// Rollouts consumed by one training iteration.
    pub fn trajectories_per_iteration(&self) -> usize {
        match self {
            Optimizer::Fdm(c) => c.trajectories_per_estimate() * c.updates_averaged,
            Optimizer::Lrm(c) => c.trajectories_per_update * c.updates_averaged,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Optimizer::Fdm(c) => c.validate(),
            Optimizer::Lrm(c) => c.validate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub iterations: usize,
    /// Training stops before an iteration would exceed this many rollouts.
    pub max_trajectories: usize,
    pub validation_trajectories: usize,
    pub validation_slots: usize,
    /// An iterate whose validation cost exceeds this multiple of the reactive
    /// cost is rejected and the step size halved.
    pub divergence_factor: f64,
}

impl TrainConfig {
    pub fn new(optimizer: Optimizer, iterations: usize) -> Self {
        Self {
            optimizer,
            iterations,
            max_trajectories: 2000,
            validation_trajectories: 20,
            validation_slots: 1000,
            divergence_factor: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.validation_trajectories == 0 || self.validation_slots == 0 {
            return Err(CacheError::Config(
                "validation needs at least one trajectory and slot".into(),
            ));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(CacheError::Config("divergence factor must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub trajectories_consumed: usize,
    pub j_mean: f64,
    pub j_stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    /// Iterate with the lowest validation cost.
    pub best: ThresholdParams,
    pub best_iteration: usize,
    pub best_j: f64,
    pub last: ThresholdParams,
    pub curve: Vec<CurvePoint>,
    /// Step size after any divergence halvings.
    pub final_step_size: f64,
}

/// Fixed held-out traces for scoring iterates.
pub struct Validator {
    traces: Vec<Trace>,
    seed: u64,
}

impl Validator {
    pub fn new(env: &Environment, n: usize, slots: usize, seed: u64) -> Result<Self> {
        let traces = (0..n)
            .into_par_iter()
            .map(|i| env.sample_trace(slots, &mut rng_for(seed, &[stream::VALID, i as u64])))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { traces, seed })
    }

    /// Mean and standard error of the per-trace average cost.
    pub fn score(&self, env: &Environment, policy: &Policy) -> (f64, f64) {
        let js: Vec<f64> = self
            .traces
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                rollout_cost(
                    env,
                    policy,
                    t,
                    &mut rng_for(self.seed, &[stream::VALID, stream::POLICY, i as u64]),
                )
            })
            .collect();
        mean_stderr(&js)
    }
}

fn gradient(
    env: &Environment,
    params: &ThresholdParams,
    opt: &Optimizer,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    match opt {
        Optimizer::Fdm(c) => fdm_gradient(env, params, c, rng).map(|r| r.gradient),
        Optimizer::Lrm(c) => lrm_gradient(env, params, c, rng),
    }
}

/// One update: `m` independent gradient estimates, each turned into a
/// candidate `theta - lambda g`, averaged and projected.
pub fn averaged_update(
    env: &Environment,
    params: &ThresholdParams,
    opt: &Optimizer,
    lambda: f64,
    seed: u64,
) -> Result<ThresholdParams> {
    let m = opt.updates_averaged();
    let theta = params.as_slice();
    let mut sum = vec![0.0; theta.len()];
    for k in 0..m {
        let mut rng = SimRng::seed_from_u64(derive_seed(seed, &[k as u64]));
        let g = gradient(env, params, opt, &mut rng)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(CacheError::Diverged("non-finite gradient estimate".into()));
        }
        for (s, (t, gi)) in sum.iter_mut().zip(theta.iter().zip(&g)) {
            *s += t - lambda * gi;
        }
    }
    let mut next = params.clone();
    next.set_vec(&sum.iter().map(|s| s / m as f64).collect::<Vec<_>>());
    next.project();
    Ok(next)
}

/// Gradient descent on the average cost, starting from `initial`.
pub fn train(
    env: &Environment,
    initial: &ThresholdParams,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    train_with(
        env,
        initial,
        cfg,
        seed,
        &Validator::new(env, cfg.validation_trajectories, cfg.validation_slots, seed)?,
    )
}

pub fn train_with(
    env: &Environment,
    initial: &ThresholdParams,
    cfg: &TrainConfig,
    seed: u64,
    validator: &Validator,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    env.validate()?;
    let reactive = validator.score(env, &Policy::Reactive).0;
    let mut lambda = cfg.optimizer.step_size();
    let per_iter = cfg.optimizer.trajectories_per_iteration();
    let mut current = initial.clone();
    let (j0, se0) = validator.score(env, &Policy::Threshold(current.clone()));
    let mut curve = vec![CurvePoint {
        iteration: 0,
        trajectories_consumed: 0,
        j_mean: j0,
        j_stderr: se0,
    }];
    let (mut best, mut best_j, mut best_iteration) = (current.clone(), j0, 0);
    let mut consumed = 0;
    for it in 1..=cfg.iterations {
        if consumed + per_iter > cfg.max_trajectories {
            break;
        }
        let candidate = averaged_update(
            env,
            &current,
            &cfg.optimizer,
            lambda,
            derive_seed(seed, &[stream::TRAIN, it as u64]),
        )?;
        consumed += per_iter;
        let (j, se) = validator.score(env, &Policy::Threshold(candidate.clone()));
        if !j.is_finite() {
            return Err(CacheError::Diverged(format!(
                "non-finite validation cost at iteration {it}"
            )));
        }
        if j > cfg.divergence_factor * reactive {
            lambda *= 0.5;
            let prev = *curve.last().expect("curve starts with the initial point");
            curve.push(CurvePoint {
                iteration: it,
                trajectories_consumed: consumed,
                ..prev
            });
            continue;
        }
        current = candidate;
        if j < best_j {
            best = current.clone();
            best_j = j;
            best_iteration = it;
        }
        curve.push(CurvePoint {
            iteration: it,
            trajectories_consumed: consumed,
            j_mean: j,
            j_stderr: se,
        });
    }
    Ok(TrainOutcome {
        best,
        best_iteration,
        best_j,
        last: current,
        curve,
        final_step_size: lambda,
    })
}

/// Picks the step size from `multipliers * scale` by a short training run
/// of `iterations` iterations each, scored by the validation cost of the
/// last iterate.
pub fn pilot_step_size(
    env: &Environment,
    initial: &ThresholdParams,
    cfg: &TrainConfig,
    seed: u64,
    scale: f64,
    multipliers: &[f64],
    iterations: usize,
) -> Result<f64> {
    let validator = Validator::new(env, cfg.validation_trajectories, cfg.validation_slots, seed)?;
    let mut best = (
        f64::INFINITY,
        scale * multipliers.first().copied().unwrap_or(1.0),
    );
    for (i, m) in multipliers.iter().enumerate() {
        let mut c = cfg.clone();
        c.iterations = iterations;
        c.max_trajectories = usize::MAX;
        c.optimizer.set_step_size(m * scale);
        let out = train_with(env, initial, &c, derive_seed(seed, &[i as u64]), &validator)?;
        let j = out.curve.last().map_or(f64::INFINITY, |p| p.j_mean);
        if j < best.0 {
            best = (j, m * scale);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{lbuc_thresholds_irm, ChannelStats};
    use crate::channel::CostModel;
    use crate::content_model::{AccessModel, ContentGenConfig};
    use crate::policy::FrequencyVector;

    fn env() -> Environment {
        Environment {
            content: ContentGenConfig::iid_multiples_of_five(4, 10),
            access: AccessModel::Irm { p_a: 0.25 },
            cost: CostModel::Uniform { lo: 0.05, hi: 2.0 },
            capacity: 6,
        }
    }

    fn uc() -> UcThresholds {
        lbuc_thresholds_irm(&ChannelStats::Uniform { lo: 0.05, hi: 2.0 }, 10, 0.25)
    }

    #[test]
    fn ucb_initialization() {
        let uc = uc();
        let p = init_from_ucb(&uc, PolicyKind::Liso, 2.0);
        assert_eq!(p.get(0, 0, 1), 0.0);
        assert_eq!(p.get(0, 0, 10), uc.by_lifetime[9]);
        assert_eq!(p.get(0, 3, 7), 0.0);
        let g = init_from_ucb_with(&uc, PolicyKind::Liso, 2.0, SwapInit::LifetimeGap);
        assert_eq!(g.get(0, 3, 7), uc.by_lifetime[6] - uc.by_lifetime[2]);
        assert_eq!(g.get(0, 1, 7), uc.by_lifetime[6]);
        let f = init_from_ucb(&uc, PolicyKind::Lfa, 2.0);
        let mut phi = vec![0.0; 11];
        phi[0] = 0.25;
        phi[4] = 0.75;
        let a = crate::policy::SimpleAction::new(0, 8);
        assert!((f.threshold(&FrequencyVector(phi), a) - uc.by_lifetime[7]).abs() < 1e-12);
    }

    #[test]
    fn zero_step_keeps_parameters() {
        let env = env();
        let p = init_from_ucb(&uc(), PolicyKind::Liso, 2.0);
        let fdm = FdmConfig {
            trajectories_per_update: 10,
            slots_per_trajectory: 50,
            updates_averaged: 2,
            ..FdmConfig::default()
        };
        let mut cfg = TrainConfig::new(Optimizer::Fdm(fdm), 2);
        cfg.validation_slots = 100;
        cfg.validation_trajectories = 4;
        let out = train(&env, &p, &cfg, 1).unwrap();
        assert_eq!(out.last, p);
        assert_eq!(out.curve.len(), 3);
        assert_eq!(out.curve[2].trajectories_consumed, 80);
    }

    #[test]
    fn averaged_update_is_update_of_averaged_gradient() {
        let env = env();
        let p = init_from_ucb_with(&uc(), PolicyKind::Lfa, 2.0, SwapInit::LifetimeGap);
        let lrm = LrmConfig {
            trajectories_per_update: 5,
            slots_per_trajectory: 40,
            updates_averaged: 3,
            ..LrmConfig::default()
        };
        let opt = Optimizer::Lrm(lrm.clone());
        let lambda = 0.01;
        let next = averaged_update(&env, &p, &opt, lambda, 9).unwrap();
        let mut mean = vec![0.0; p.dim()];
        for k in 0..3u64 {
            let mut rng = SimRng::seed_from_u64(derive_seed(9, &[k]));
            let g = lrm_gradient(&env, &p, &lrm, &mut rng).unwrap();
            mean.iter_mut().zip(&g).for_each(|(m, x)| *m += x / 3.0);
        }
        for ((a, t), g) in next.as_slice().iter().zip(p.as_slice()).zip(&mean) {
            assert!((a - (t - lambda * g)).abs() < 1e-12);
        }
    }

    #[test]
    fn training_respects_parameter_box() {
        let env = env();
        let p = init_from_ucb(&uc(), PolicyKind::Liso, 2.0);
        let lrm = LrmConfig {
            trajectories_per_update: 5,
            slots_per_trajectory: 60,
            updates_averaged: 1,
            step_size: 5.0,
            ..LrmConfig::default()
        };
        let mut cfg = TrainConfig::new(Optimizer::Lrm(lrm), 20);
        cfg.validation_slots = 200;
        cfg.validation_trajectories = 4;
        let out = train(&env, &p, &cfg, 2).unwrap();
        assert!(out
            .last
            .as_slice()
            .iter()
            .all(|&t| (0.0..=2.0).contains(&t)));
        assert!(out.best_j <= out.curve[0].j_mean);
    }
}
