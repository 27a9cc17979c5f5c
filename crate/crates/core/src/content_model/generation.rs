//! Content arrival, lifetime regime and user-access processes.

use rand::Rng;

use super::multiset::LifetimeMultiset;
use crate::error::{CacheError, Result};

/// State of the two-state lifetime generator used in the memory scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    Short,
    Long,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GenMode {
    /// Lifetimes drawn i.i.d. uniformly from the support.
    Iid,
    /// All contents of a slot share the lifetime of the current regime.
    Regime {
        p_stay_short: f64,
        p_stay_long: f64,
        short_lifetime: usize,
        long_lifetime: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContentGenConfig {
    /// Number of new contents per slot is uniform on `1..=m_max`.
    pub m_max: usize,
    pub lifetime_support: Vec<usize>,
    pub mode: GenMode,
}

impl ContentGenConfig {
    /// I.i.d. lifetimes on `{5, 10, ..., k_max}`.
    pub fn iid_multiples_of_five(m_max: usize, k_max: usize) -> Self {
        Self {
            m_max,
            lifetime_support: (1..=k_max / 5).map(|i| 5 * i).collect(),
            mode: GenMode::Iid,
        }
    }

    pub fn regime(
        m_max: usize,
        p1: f64,
        p2: f64,
        short_lifetime: usize,
        long_lifetime: usize,
    ) -> Self {
        Self {
            m_max,
            lifetime_support: vec![short_lifetime, long_lifetime],
            mode: GenMode::Regime {
                p_stay_short: p1,
                p_stay_long: p2,
                short_lifetime,
                long_lifetime,
            },
        }
    }

    /// Largest lifetime the generator can emit.
    pub fn k_max(&self) -> usize {
        match self.mode {
            GenMode::Iid => self.lifetime_support.iter().copied().max().unwrap_or(0),
            GenMode::Regime {
                short_lifetime,
                long_lifetime,
                ..
            } => short_lifetime.max(long_lifetime),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_max == 0 {
            return Err(CacheError::Config("m_max must be positive".into()));
        }
        match self.mode {
            GenMode::Iid => {
                if self.lifetime_support.is_empty() || self.lifetime_support.contains(&0) {
                    return Err(CacheError::Config(
                        "lifetime support must be nonempty and positive".into(),
                    ));
                }
            }
            GenMode::Regime {
                p_stay_short,
                p_stay_long,
                short_lifetime,
                long_lifetime,
            } => {
                if !(0.0..=1.0).contains(&p_stay_short) || !(0.0..=1.0).contains(&p_stay_long) {
                    return Err(CacheError::Config(
                        "regime persistence probabilities must lie in [0,1]".into(),
                    ));
                }
                if short_lifetime == 0 || long_lifetime == 0 {
                    return Err(CacheError::Config(
                        "regime lifetimes must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Stationary probability of the short regime; 1/2 when both states are absorbing.
    pub fn stationary_short(&self) -> f64 {
        match self.mode {
            GenMode::Iid => 0.5,
            GenMode::Regime {
                p_stay_short,
                p_stay_long,
                ..
            } => {
                let leave_short = 1.0 - p_stay_short;
                let leave_long = 1.0 - p_stay_long;
                if leave_short + leave_long == 0.0 {
                    0.5
                } else {
                    leave_long / (leave_short + leave_long)
                }
            }
        }
    }

    pub fn initial_regime<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Regime> {
        match self.mode {
            GenMode::Iid => None,
            GenMode::Regime { .. } => Some(if rng.random::<f64>() < self.stationary_short() {
                Regime::Short
            } else {
                Regime::Long
            }),
        }
    }
}

/// Draws the new contents of one slot.
pub fn generate_contents<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ContentGenConfig,
    regime: Option<Regime>,
) -> LifetimeMultiset {
    let mut out = LifetimeMultiset::new();
    generate_into(rng, cfg, regime, &mut out);
    out
}

pub(crate) fn generate_into<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ContentGenConfig,
    regime: Option<Regime>,
    out: &mut LifetimeMultiset,
) {
    let m = rng.random_range(1..=cfg.m_max);
    match (&cfg.mode, regime) {
        (
            GenMode::Regime {
                short_lifetime,
                long_lifetime,
                ..
            },
            Some(r),
        ) => {
            let l = match r {
                Regime::Short => *short_lifetime,
                Regime::Long => *long_lifetime,
            };
            out.insert_n(l, m as u32);
        }
        _ => {
            let support = &cfg.lifetime_support;
            for _ in 0..m {
                out.insert(support[rng.random_range(0..support.len())]);
            }
        }
    }
}

/// One transition of the lifetime regime chain.
pub fn advance_regime<R: Rng + ?Sized>(
    rng: &mut R,
    regime: Regime,
    cfg: &ContentGenConfig,
) -> Regime {
    let GenMode::Regime {
        p_stay_short,
        p_stay_long,
        ..
    } = cfg.mode
    else {
        return regime;
    };
    let stay = match regime {
        Regime::Short => p_stay_short,
        Regime::Long => p_stay_long,
    };
    if rng.random::<f64>() < stay {
        regime
    } else {
        match regime {
            Regime::Short => Regime::Long,
            Regime::Long => Regime::Short,
        }
    }
}

/// User-access process.
#[derive(Clone, Debug, PartialEq)]
pub enum AccessModel {
    /// Independent reference model: access in every slot with probability `p_a`.
    Irm { p_a: f64 },
    /// Renewal process with inter-access pmf `pmf[d-1] = P(D = d)`, `d = 1..=D_max`.
    Bounded { pmf: Vec<f64> },
}

impl AccessModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            AccessModel::Irm { p_a } => {
                if !(*p_a > 0.0 && *p_a <= 1.0) {
                    return Err(CacheError::Config(format!(
                        "access probability {p_a} not in (0,1]"
                    )));
                }
            }
            AccessModel::Bounded { pmf } => {
                if pmf.is_empty() || pmf.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(CacheError::Config(
                        "inter-access pmf entries must lie in [0,1]".into(),
                    ));
                }
                let s: f64 = pmf.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(CacheError::Config(format!(
                        "inter-access pmf sums to {s}, not 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Maximum inter-access time, `None` under IRM.
    pub fn d_max(&self) -> Option<usize> {
        match self {
            AccessModel::Irm { .. } => None,
            AccessModel::Bounded { pmf } => Some(pmf.len()),
        }
    }

    /// Probability of access in the next slot given `elapsed` slots since the
    /// last access: the hazard rate of the inter-access time at `elapsed + 1`.
    pub fn access_probability(&self, elapsed: usize) -> Result<f64> {
        match self {
            AccessModel::Irm { p_a } => Ok(*p_a),
            AccessModel::Bounded { pmf } => {
                let d_max = pmf.len();
                if elapsed >= d_max {
                    return Err(CacheError::ImpossibleAccessState { elapsed, d_max });
                }
                let tail: f64 = pmf[elapsed..].iter().sum();
                if tail <= 0.0 {
                    return Err(CacheError::ImpossibleAccessState { elapsed, d_max });
                }
                Ok((pmf[elapsed] / tail).min(1.0))
            }
        }
    }
}

pub fn sample_access<R: Rng + ?Sized>(
    rng: &mut R,
    elapsed: usize,
    model: &AccessModel,
) -> Result<bool> {
    let p = model.access_probability(elapsed)?;
    Ok(p >= 1.0 || rng.random::<f64>() < p)
}
