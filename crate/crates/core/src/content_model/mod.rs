//! Content lifetimes, arrivals, user access and the exact slot dynamics.

mod dynamics;
mod generation;
mod multiset;

pub use dynamics::{step, step_in_place, validate_action, Action, SystemState};
pub(crate) use generation::generate_into;
pub use generation::{
    advance_regime, generate_contents, sample_access, AccessModel, ContentGenConfig, GenMode,
    Regime,
};
pub use multiset::LifetimeMultiset;
