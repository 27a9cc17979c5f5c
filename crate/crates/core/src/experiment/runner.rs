use std::fmt::Write as _;
use std::sync::OnceLock;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Scenario};
use crate::bounds::{
    estimate_channel_stats, lbnck_thresholds_converged, lbuc_thresholds_irm, rollout_lbnck,
    rollout_lbuc, ChannelStats, NckThresholds, UcThresholds,
};
use crate::env::{Environment, Trace};
use crate::error::{CacheError, Result};
use crate::pg::{
    init_from_ucb_with, pilot_step_size, rollout_cost, train, CurvePoint, Optimizer, TrainConfig,
    TrainOutcome,
};
use crate::policy::{Policy, PolicyKind, ThresholdParams};
use crate::seed::{derive_seed, rng_for, stream};
use crate::stats::mean_stderr;

/// Step sizes tried by the pilot, as multiples of the mean channel cost.
pub const PILOT_MULTIPLIERS: [f64; 3] = [1e-3, 1e-2, 1e-1];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Reactive,
    Random,
    LbUc,
    LbNck,
    LisoFdm,
    LisoLrm,
    LfaFdm,
    LfaLrm,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::Reactive,
        Scheme::Random,
        Scheme::LbUc,
        Scheme::LbNck,
        Scheme::LisoFdm,
        Scheme::LisoLrm,
        Scheme::LfaFdm,
        Scheme::LfaLrm,
    ];
    pub const TRAINED: [Scheme; 4] = [
        Scheme::LisoFdm,
        Scheme::LisoLrm,
        Scheme::LfaFdm,
        Scheme::LfaLrm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Reactive => "reactive",
            Scheme::Random => "random",
            Scheme::LbUc => "lb_uc",
            Scheme::LbNck => "lb_nck",
            Scheme::LisoFdm => "liso_fdm",
            Scheme::LisoLrm => "liso_lrm",
            Scheme::LfaFdm => "lfa_fdm",
            Scheme::LfaLrm => "lfa_lrm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| CacheError::Config(format!("unknown scheme {s:?}")))
    }

    pub fn is_trained(self) -> bool {
        Scheme::TRAINED.contains(&self)
    }

    fn id(self) -> u64 {
        Scheme::ALL.iter().position(|&x| x == self).expect("listed") as u64
    }

    /// Policy class and optimizer of a trained scheme.
    pub fn training(self, cfg: &ExperimentConfig) -> Option<(PolicyKind, Optimizer)> {
        match self {
            Scheme::LisoFdm => Some((PolicyKind::Liso, Optimizer::Fdm(cfg.fdm.clone()))),
            Scheme::LisoLrm => Some((PolicyKind::Liso, Optimizer::Lrm(cfg.lrm.clone()))),
            Scheme::LfaFdm => Some((PolicyKind::Lfa, Optimizer::Fdm(cfg.fdm.clone()))),
            Scheme::LfaLrm => Some((PolicyKind::Lfa, Optimizer::Lrm(cfg.lrm.clone()))),
            _ => None,
        }
    }
}

/// Mean cost over the evaluation trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub mean: f64,
    pub stderr: f64,
    pub n_traj: usize,
    pub n_slots: usize,
    /// Average cost of each evaluation trajectory, in seed order.
    pub per_trajectory: Vec<f64>,
}

impl EvalResult {
    fn from_costs(per_trajectory: Vec<f64>, n_slots: usize) -> Self {
        let (mean, stderr) = mean_stderr(&per_trajectory);
        Self {
            mean,
            stderr,
            n_traj: per_trajectory.len(),
            n_slots,
            per_trajectory,
        }
    }
}

/// Mean and standard error of `a - b` over shared evaluation trajectories.
pub fn paired_difference(a: &EvalResult, b: &EvalResult) -> (f64, f64) {
    let d: Vec<f64> = a
        .per_trajectory
        .iter()
        .zip(&b.per_trajectory)
        .map(|(x, y)| x - y)
        .collect();
    mean_stderr(&d)
}

/// One experiment point: environment, channel statistics, bounds and the
/// evaluation traces.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub env: Environment,
    pub stats: ChannelStats,
    pub uc: UcThresholds,
    pub nck: NckThresholds,
    eval_traces: OnceLock<Vec<Trace>>,
}

impl Context {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let env = cfg.environment()?;
        let stats = estimate_channel_stats(
            &env.cost,
            cfg.stats_samples,
            &mut rng_for(cfg.seed, &[stream::STATS]),
        )?;
        let p_a = match env.access {
            crate::content_model::AccessModel::Irm { p_a } => p_a,
            crate::content_model::AccessModel::Bounded { .. } => {
                unreachable!("experiments use IRM access")
            }
        };
        let uc = lbuc_thresholds_irm(&stats, cfg.k_max, p_a);
        let nck = lbnck_thresholds_converged(&stats, 1_000_000)?;
        Ok(Self {
            cfg: cfg.clone(),
            env,
            stats,
            uc,
            nck,
            eval_traces: OnceLock::new(),
        })
    }

    /// Evaluation traces; their seeds never serve for training or validation.
    pub fn eval_traces(&self) -> Result<&[Trace]> {
        if let Some(t) = self.eval_traces.get() {
            return Ok(t);
        }
        let traces = (0..self.cfg.eval_trajectories)
            .into_par_iter()
            .map(|i| {
                self.env.sample_trace(
                    self.cfg.eval_slots,
                    &mut rng_for(self.cfg.seed, &[stream::EVAL, i as u64]),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.eval_traces.get_or_init(|| traces))
    }

    pub fn run_eval(&self, policy: &Policy) -> Result<EvalResult> {
        let seed = self.cfg.seed;
        let costs = self
            .eval_traces()?
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                rollout_cost(
                    &self.env,
                    policy,
                    t,
                    &mut rng_for(seed, &[stream::EVAL, stream::POLICY, i as u64]),
                )
            })
            .collect();
        Ok(EvalResult::from_costs(costs, self.cfg.eval_slots))
    }

    pub fn eval_bound(&self, scheme: Scheme) -> Result<EvalResult> {
        let costs = self
            .eval_traces()?
            .par_iter()
            .map(|t| match scheme {
                Scheme::LbUc => rollout_lbuc(&self.env, &self.uc, t),
                _ => rollout_lbnck(&self.env, &self.nck, t),
            })
            .collect();
        Ok(EvalResult::from_costs(costs, self.cfg.eval_slots))
    }

    pub fn initial_params(&self, kind: PolicyKind) -> ThresholdParams {
        init_from_ucb_with(&self.uc, kind, self.env.c_max(), self.cfg.swap_init)
    }

    pub fn train_config(&self, optimizer: Optimizer) -> TrainConfig {
        let mut tc = TrainConfig::new(optimizer, self.cfg.iterations);
        tc.max_trajectories = self.cfg.max_trajectories;
        tc.validation_trajectories = self.cfg.validation_trajectories;
        tc.validation_slots = self.cfg.validation_slots;
        tc
    }

    /// Trains a scheme from its unlimited-cache initialization. A zero step
    /// size in the configuration triggers the pilot search.
    pub fn train_scheme(&self, scheme: Scheme) -> Result<TrainOutcome> {
        let (kind, optimizer) = scheme.training(&self.cfg).ok_or_else(|| {
            CacheError::Config(format!("{} is not a trained scheme", scheme.name()))
        })?;
        let initial = self.initial_params(kind);
        let mut tc = self.train_config(optimizer);
        let seed = derive_seed(self.cfg.seed, &[stream::TRAIN, scheme.id()]);
        if tc.optimizer.step_size() == 0.0 {
            let lambda = pilot_step_size(
                &self.env,
                &initial,
                &tc,
                derive_seed(seed, &[0]),
                self.stats.mean(),
                &PILOT_MULTIPLIERS,
                self.cfg.pilot_iterations,
            )?;
            tc.optimizer.set_step_size(lambda);
        }
        train(&self.env, &initial, &tc, seed)
    }

    /// Evaluates any scheme; trained schemes are trained first and their
    /// best validated parameters are run deterministically.
    pub fn eval_scheme(&self, scheme: Scheme) -> Result<(EvalResult, Option<TrainOutcome>)> {
        match scheme {
            Scheme::Reactive => Ok((self.run_eval(&Policy::Reactive)?, None)),
            Scheme::Random => Ok((
                self.run_eval(&Policy::RandomCache { p_r: self.cfg.p_r })?,
                None,
            )),
            Scheme::LbUc | Scheme::LbNck => Ok((self.eval_bound(scheme)?, None)),
            _ => {
                let out = self.train_scheme(scheme)?;
                Ok((
                    self.run_eval(&Policy::Threshold(out.best.clone()))?,
                    Some(out),
                ))
            }
        }
    }
}

/// One line of a sweep CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub sweep_var: String,
    pub scheme: Scheme,
    pub mean_mw: f64,
    pub stderr_mw: f64,
    pub n_traj: usize,
    pub n_slots: usize,
    pub seed: u64,
}

pub fn rows_to_csv(rows: &[Row]) -> String {
    let mut s = String::from("sweep_var,scheme,mean_mw,stderr_mw,n_traj,n_slots,seed\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{},{},{}",
            r.sweep_var,
            r.scheme.name(),
            r.mean_mw,
            r.stderr_mw,
            r.n_traj,
            r.n_slots,
            r.seed
        );
    }
    s
}

fn point_rows(cfg: &ExperimentConfig, label: String, schemes: &[Scheme]) -> Result<Vec<Row>> {
    let ctx = Context::new(cfg)?;
    schemes
        .iter()
        .map(|&s| {
            let (r, _) = ctx.eval_scheme(s)?;
            Ok(Row {
                sweep_var: label.clone(),
                scheme: s,
                mean_mw: r.mean,
                stderr_mw: r.stderr,
                n_traj: r.n_traj,
                n_slots: r.n_slots,
                seed: cfg.seed,
            })
        })
        .collect()
}

fn sweep<T: Sync>(
    points: &[T],
    f: impl Fn(&T) -> Result<Vec<Row>> + Sync + Send,
) -> Result<Vec<Row>> {
    if points.is_empty() {
        return Err(CacheError::Config("empty sweep grid".into()));
    }
    let parts = points.par_iter().map(&f).collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

pub fn sweep_capacity(
    cfg: &ExperimentConfig,
    capacities: &[usize],
    schemes: &[Scheme],
) -> Result<Vec<Row>> {
    sweep(capacities, |&b| {
        point_rows(
            &ExperimentConfig {
                capacity: b,
                ..cfg.clone()
            },
            b.to_string(),
            schemes,
        )
    })
}

pub fn sweep_lifetime(
    cfg: &ExperimentConfig,
    k_maxes: &[usize],
    schemes: &[Scheme],
) -> Result<Vec<Row>> {
    sweep(k_maxes, |&k| {
        point_rows(
            &ExperimentConfig {
                k_max: k,
                lifetimes: None,
                ..cfg.clone()
            },
            k.to_string(),
            schemes,
        )
    })
}

pub fn sweep_memory(
    cfg: &ExperimentConfig,
    p1s: &[f64],
    p2s: &[f64],
    schemes: &[Scheme],
) -> Result<Vec<Row>> {
    let grid: Vec<(f64, f64)> = p1s
        .iter()
        .flat_map(|&a| p2s.iter().map(move |&b| (a, b)))
        .collect();
    sweep(&grid, |&(p1, p2)| {
        let point = ExperimentConfig {
            scenario: Scenario::Memory,
            p1,
            p2,
            ..cfg.clone()
        };
        point_rows(&point, format!("p1={p1};p2={p2}"), schemes)
    })
}

/// Validation learning curve of each trained scheme.
pub fn learning_curves(
    cfg: &ExperimentConfig,
    schemes: &[Scheme],
) -> Result<Vec<(Scheme, CurvePoint)>> {
    let ctx = Context::new(cfg)?;
    let mut out = Vec::new();
    for &s in schemes.iter().filter(|s| s.is_trained()) {
        let t = ctx.train_scheme(s)?;
        out.extend(t.curve.into_iter().map(|p| (s, p)));
    }
    Ok(out)
}

pub fn curves_to_csv(points: &[(Scheme, CurvePoint)]) -> String {
    let mut s = String::from("scheme,iteration,trajectories_consumed,J_mean,J_stderr\n");
    for (scheme, p) in points {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6}",
            scheme.name(),
            p.iteration,
            p.trajectories_consumed,
            p.j_mean,
            p.j_stderr
        );
    }
    s
}
