use rand::Rng;

use crate::content_model::{step_in_place, Action, LifetimeMultiset, SystemState};
use crate::env::{Environment, Trace};
use crate::error::Result;
use crate::policy::{accumulate_grad_log_prob, select_action_randomized, Policy, ThresholdParams};

/// One simulated slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotRecord {
    /// State at the start of the slot, before acting.
    pub state: SystemState,
    pub cost: f64,
    /// Downloads and discards; on access slots the forced flush.
    pub action: Action,
    /// Paid in this slot: downloads times cost.
    pub paid: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<SlotRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Average cost per slot of a trajectory; 0 when empty.
pub fn evaluate(traj: &Trajectory) -> f64 {
    if traj.is_empty() {
        return 0.0;
    }
    traj.records.iter().map(|r| r.paid).sum::<f64>() / traj.len() as f64
}

fn initial_state(trace: &Trace) -> SystemState {
    SystemState::new(
        trace.arrivals[0].clone(),
        LifetimeMultiset::new(),
        0,
        trace.access[0],
    )
}

/// Drives `policy` along `trace`, calling `visit` once per slot.
fn simulate<R, F>(env: &Environment, policy: &Policy, trace: &Trace, rng: &mut R, mut visit: F)
where
    R: Rng + ?Sized,
    F: FnMut(&SystemState, f64, &Action, f64),
{
    if trace.is_empty() {
        return;
    }
    let mut state = initial_state(trace);
    for t in 0..trace.len() {
        let c = trace.cost[t];
        let action = if state.accessed {
            Action::forced(&state)
        } else {
            policy.act(&state, c, env.capacity, rng)
        };
        visit(&state, c, &action, action.cost(c));
        if t + 1 < trace.len() {
            step_in_place(
                &mut state,
                &action,
                env.capacity,
                trace.access[t + 1],
                &trace.arrivals[t + 1],
            )
            .expect("policies only emit legal actions");
        }
    }
}

/// Rolls `policy` out along a pre-sampled trace and records every slot.
pub fn rollout_trace<R: Rng + ?Sized>(
    env: &Environment,
    policy: &Policy,
    trace: &Trace,
    rng: &mut R,
) -> Trajectory {
    let mut records = Vec::with_capacity(trace.len());
    simulate(env, policy, trace, rng, |s, c, a, paid| {
        records.push(SlotRecord {
            state: s.clone(),
            cost: c,
            action: a.clone(),
            paid,
        })
    });
    Trajectory { records }
}

/// Samples `slots` slots of exogenous input from `rng`, then rolls out.
pub fn rollout<R: Rng + ?Sized>(
    env: &Environment,
    policy: &Policy,
    slots: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let trace = env.sample_trace(slots, rng)?;
    Ok(rollout_trace(env, policy, &trace, rng))
}

/// Average cost of `policy` along `trace` without recording the trajectory.
pub fn rollout_cost<R: Rng + ?Sized>(
    env: &Environment,
    policy: &Policy,
    trace: &Trace,
    rng: &mut R,
) -> f64 {
    let mut total = 0.0;
    simulate(env, policy, trace, rng, |_, _, _, paid| total += paid);
    if trace.is_empty() {
        0.0
    } else {
        total / trace.len() as f64
    }
}

/// Randomized rollout returning the average cost and the summed score
/// `sum_t grad log pi(A_t | S_t)`.
pub fn rollout_score<R: Rng + ?Sized>(
    env: &Environment,
    params: &ThresholdParams,
    eta: f64,
    trace: &Trace,
    rng: &mut R,
) -> (f64, Vec<f64>) {
    let mut score = vec![0.0; params.dim()];
    if trace.is_empty() {
        return (0.0, score);
    }
    let mut state = initial_state(trace);
    let mut total = 0.0;
    for t in 0..trace.len() {
        let c = trace.cost[t];
        let action = if state.accessed {
            Action::forced(&state)
        } else {
            let (a, log) = select_action_randomized(&state, c, params, eta, env.capacity, rng);
            accumulate_grad_log_prob(&log, params, eta, &mut score);
            a
        };
        total += action.cost(c);
        if t + 1 < trace.len() {
            step_in_place(
                &mut state,
                &action,
                env.capacity,
                trace.access[t + 1],
                &trace.arrivals[t + 1],
            )
            .expect("policies only emit legal actions");
        }
    }
    (total / trace.len() as f64, score)
}
