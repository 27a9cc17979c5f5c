//! Rollouts, policy-gradient estimators and training, and an exact solver
//! for tiny instances.

mod dp;
mod fdm;
mod lrm;
mod rollout;
mod train;

pub use dp::{dp_oracle, exact_expected_cost, tiny_instance_family, DpSolution, TinyInstance};
pub use fdm::{fdm_gradient, fdm_gradient_with, fdm_regression, FdmConfig, Regression};
pub use lrm::{lrm_baseline, lrm_estimate, lrm_gradient, lrm_samples, LrmConfig};
pub use rollout::{
    evaluate, rollout, rollout_cost, rollout_score, rollout_trace, SlotRecord, Trajectory,
};
pub use train::{
    averaged_update, init_from_ucb, init_from_ucb_with, pilot_step_size, train, train_with,
    CurvePoint, Optimizer, SwapInit, TrainConfig, TrainOutcome, Validator,
};
