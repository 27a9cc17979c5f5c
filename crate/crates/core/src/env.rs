//! The caching environment and its exogenous randomness.
//!
//! Arrivals, user accesses and channel costs do not depend on the caching
//! decisions, so a whole trajectory's worth of them can be drawn up front as a
//! [`Trace`]. Running different policies on the same trace gives common
//! random numbers for free.

use rand::Rng;

use crate::channel::CostModel;
use crate::content_model::{
    advance_regime, generate_into, sample_access, AccessModel, ContentGenConfig, LifetimeMultiset,
};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub content: ContentGenConfig,
    pub access: AccessModel,
    pub cost: CostModel,
    /// Cache capacity B in contents.
    pub capacity: usize,
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        self.content.validate()?;
        self.access.validate()?;
        self.cost.validate()
    }

    pub fn k_max(&self) -> usize {
        self.content.k_max()
    }

    pub fn c_max(&self) -> f64 {
        self.cost.c_max()
    }

    pub fn with_capacity(&self, capacity: usize) -> Self {
        Self {
            capacity,
            ..self.clone()
        }
    }

    /// Draws the exogenous inputs of `slots` consecutive slots, starting right
    /// after a user access with empty cache and outside pool.
    pub fn sample_trace<R: Rng + ?Sized>(&self, slots: usize, rng: &mut R) -> Result<Trace> {
        let mut arrivals = Vec::with_capacity(slots);
        let mut access = Vec::with_capacity(slots);
        let mut cost = Vec::with_capacity(slots);
        let mut regime = self.content.initial_regime(rng);
        let mut mobility = self.cost.initial_state(rng);
        let mut elapsed = 0usize;
        for _ in 0..slots {
            let mut n = LifetimeMultiset::new();
            generate_into(rng, &self.content, regime, &mut n);
            arrivals.push(n);
            if let Some(r) = regime {
                regime = Some(advance_regime(rng, r, &self.content));
            }
            let u = sample_access(rng, elapsed, &self.access)?;
            access.push(u);
            elapsed = if u { 0 } else { elapsed + 1 };
            let (c, m) = self.cost.sample(rng, mobility);
            cost.push(c);
            mobility = m;
        }
        // Accesses past the horizon, so every slot knows its distance to the next access.
        let mut tail_gap = 0usize;
        loop {
            if sample_access(rng, elapsed, &self.access)? {
                break;
            }
            elapsed += 1;
            tail_gap += 1;
        }
        Ok(Trace {
            arrivals,
            access,
            cost,
            tail_gap,
        })
    }
}

/// Exogenous inputs of one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    /// New contents appearing at the start of each slot.
    pub arrivals: Vec<LifetimeMultiset>,
    /// User access flag of each slot.
    pub access: Vec<bool>,
    /// Per-content download cost of each slot (mW).
    pub cost: Vec<f64>,
    /// Slots after the horizon before the next access.
    pub tail_gap: usize,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    /// For each slot, the number of slots until the next access (0 on access slots).
    pub fn gaps_to_access(&self) -> Vec<usize> {
        let mut gaps = vec![0; self.len()];
        let mut next = self.len() + self.tail_gap;
        for t in (0..self.len()).rev() {
            if self.access[t] {
                next = t;
            }
            gaps[t] = next - t;
        }
        gaps
    }
}
