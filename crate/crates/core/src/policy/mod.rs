//! Threshold caching policies and the baseline schemes.

mod params;
mod select;

pub use params::{
    frequency_vector, pair_count, pair_index, FrequencyVector, PolicyKind, SimpleAction,
    ThresholdParams,
};
pub use select::{
    acceptance, accumulate_grad_log_prob, candidate_swaps, grad_log_prob, prefix_probabilities,
    random_cache, reactive, select_action_deterministic, select_action_randomized, Trial, TrialLog,
};

use rand::Rng;

use crate::content_model::{Action, SystemState};

/// A caching scheme that can be rolled out.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    Reactive,
    RandomCache {
        p_r: f64,
    },
    /// Threshold policy evaluated deterministically.
    Threshold(ThresholdParams),
    /// Threshold policy with sigmoid-randomized swaps of slope `eta`.
    Randomized {
        params: ThresholdParams,
        eta: f64,
    },
}

impl Policy {
    /// Proactive action in a slot without user access.
    pub fn act<R: Rng + ?Sized>(
        &self,
        state: &SystemState,
        cost: f64,
        capacity: usize,
        rng: &mut R,
    ) -> Action {
        match self {
            Policy::Reactive => reactive(state),
            Policy::RandomCache { p_r } => random_cache(state, *p_r, capacity, rng),
            Policy::Threshold(p) => select_action_deterministic(state, cost, p, capacity),
            Policy::Randomized { params, eta } => {
                select_action_randomized(state, cost, params, *eta, capacity, rng).0
            }
        }
    }
}
