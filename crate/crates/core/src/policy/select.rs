//! Action selection for threshold policies.
//!
//! The cache is sorted ascending (empty slots first, as lifetime 0) and the
//! outside pool descending (padded with 0). The i-th candidate swap pairs the
//! i-th entries of both lists. Swaps are tried in order and selection stops
//! at the first swap that is inadmissible or rejected.

use rand::Rng;

use super::params::{
    fill_frequency, pair_count, pair_index, PolicyKind, SimpleAction, ThresholdParams,
};
use crate::content_model::{Action, LifetimeMultiset, SystemState};

/// Candidate swaps in trial order, `capacity` of them (zero-padded).
pub fn candidate_swaps<'a>(
    state: &'a SystemState,
    capacity: usize,
) -> impl Iterator<Item = SimpleAction> + 'a {
    let empty = capacity.saturating_sub(state.inside.size());
    let cached = std::iter::repeat_n(0, empty).chain(state.inside.iter_ascending());
    let outside = state.outside.iter_descending().chain(std::iter::repeat(0));
    cached
        .zip(outside)
        .take(capacity)
        .map(|(l, big_l)| SimpleAction::new(l, big_l))
}

fn phi_for(state: &SystemState, params: &ThresholdParams, capacity: usize) -> Vec<f64> {
    let mut phi = vec![0.0; params.k_max() + 1];
    if params.kind() == PolicyKind::Lfa {
        fill_frequency(&state.inside, capacity, params.k_max(), &mut phi)
            .expect("cache state consistent with policy dimensions");
    }
    phi
}

fn apply(action: &mut Action, a: SimpleAction) {
    action.download.insert(a.big_l);
    if a.l > 0 {
        action.discard.insert(a.l);
    }
}

/// Deterministic threshold rule: perform swap i while `cost <= T(l_i|L_i)`.
pub fn select_action_deterministic(
    state: &SystemState,
    cost: f64,
    params: &ThresholdParams,
    capacity: usize,
) -> Action {
    let phi = phi_for(state, params, capacity);
    let mut action = Action::none();
    for a in candidate_swaps(state, capacity) {
        if !a.is_admissible() || a.big_l > params.k_max() {
            break;
        }
        let t = params
            .raw_threshold(&phi, pair_index(a.l, a.big_l))
            .clamp(0.0, params.c_max());
        if cost > t {
            break;
        }
        apply(&mut action, a);
    }
    action
}

/// One Bernoulli trial of the randomized policy.
#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub action: SimpleAction,
    /// Acceptance probability of the swap.
    pub prob: f64,
    pub accepted: bool,
    /// Whether the threshold sits inside `[0, c_max]`, i.e. it responds to
    /// parameter changes.
    pub active: bool,
}

/// Trials made in one slot, plus the frequency vector they were evaluated at.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TrialLog {
    pub trials: Vec<Trial>,
    pub phi: Vec<f64>,
}

impl TrialLog {
    /// Log-probability of the performed composite action.
    pub fn log_prob(&self) -> f64 {
        self.trials
            .iter()
            .map(|t| {
                if t.accepted {
                    t.prob.ln()
                } else {
                    (1.0 - t.prob).ln()
                }
            })
            .sum()
    }
}

/// Sigmoid acceptance probability and its complement, both computed stably.
#[inline]
pub fn acceptance(eta: f64, threshold: f64, cost: f64) -> (f64, f64) {
    let x = eta * (threshold - cost);
    if x >= 0.0 {
        let e = (-x).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = x.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

/// Randomized rule: swap i is accepted with probability
/// `1 / (1 + exp(-eta (T(l_i|L_i) - cost)))`, trials continue until the first
/// rejection.
pub fn select_action_randomized<R: Rng + ?Sized>(
    state: &SystemState,
    cost: f64,
    params: &ThresholdParams,
    eta: f64,
    capacity: usize,
    rng: &mut R,
) -> (Action, TrialLog) {
    let phi = phi_for(state, params, capacity);
    let mut action = Action::none();
    let mut trials = Vec::new();
    for a in candidate_swaps(state, capacity) {
        if !a.is_admissible() || a.big_l > params.k_max() {
            break;
        }
        let raw = params.raw_threshold(&phi, pair_index(a.l, a.big_l));
        let t = raw.clamp(0.0, params.c_max());
        let (p, _) = acceptance(eta, t, cost);
        let accepted = rng.random::<f64>() < p;
        trials.push(Trial {
            action: a,
            prob: p,
            accepted,
            active: (0.0..=params.c_max()).contains(&raw),
        });
        if !accepted {
            break;
        }
        apply(&mut action, a);
    }
    (action, TrialLog { trials, phi })
}

/// Probability of each prefix length `0..=n` of the admissible swap list.
pub fn prefix_probabilities(
    state: &SystemState,
    cost: f64,
    params: &ThresholdParams,
    eta: f64,
    capacity: usize,
) -> Vec<f64> {
    let phi = phi_for(state, params, capacity);
    let mut out = Vec::new();
    let mut reach = 1.0;
    for a in candidate_swaps(state, capacity) {
        if !a.is_admissible() || a.big_l > params.k_max() {
            break;
        }
        let t = params
            .raw_threshold(&phi, pair_index(a.l, a.big_l))
            .clamp(0.0, params.c_max());
        let (p, q) = acceptance(eta, t, cost);
        out.push(reach * q);
        reach *= p;
    }
    out.push(reach);
    out
}

/// Adds `∇_θ log π(A|S)` for one slot's trials into `grad`.
pub fn accumulate_grad_log_prob(
    log: &TrialLog,
    params: &ThresholdParams,
    eta: f64,
    grad: &mut [f64],
) {
    let np = pair_count(params.k_max());
    for t in &log.trials {
        if !t.active {
            continue;
        }
        // d/dT log p = eta (1 - p);  d/dT log (1 - p) = -eta p
        let coef = if t.accepted {
            eta * (1.0 - t.prob)
        } else {
            -eta * t.prob
        };
        if coef == 0.0 {
            continue;
        }
        let pair = pair_index(t.action.l, t.action.big_l);
        match params.kind() {
            PolicyKind::Liso => grad[pair] += coef,
            PolicyKind::Lfa => {
                for (i, &p) in log.phi.iter().enumerate() {
                    if p != 0.0 {
                        grad[i * np + pair] += coef * p;
                    }
                }
            }
        }
    }
}

/// Gradient of the log-probability of the performed composite action.
pub fn grad_log_prob(log: &TrialLog, params: &ThresholdParams, eta: f64) -> Vec<f64> {
    let mut g = vec![0.0; params.dim()];
    accumulate_grad_log_prob(log, params, eta, &mut g);
    g
}

/// Proactive action of the reactive scheme: nothing.
pub fn reactive(_state: &SystemState) -> Action {
    Action::none()
}

/// Random caching: each outside content (longest lifetime first) is
/// downloaded with probability `p_r` while the cache has room. Nothing is
/// ever discarded.
pub fn random_cache<R: Rng + ?Sized>(
    state: &SystemState,
    p_r: f64,
    capacity: usize,
    rng: &mut R,
) -> Action {
    let mut room = capacity.saturating_sub(state.inside.size());
    let mut download = LifetimeMultiset::new();
    if p_r <= 0.0 {
        return Action::none();
    }
    for l in state.outside.iter_descending() {
        if room == 0 {
            break;
        }
        if rng.random::<f64>() < p_r {
            download.insert(l);
            room -= 1;
        }
    }
    Action {
        download,
        discard: LifetimeMultiset::new(),
    }
}
