use std::path::Path;

use crate::channel::{ChannelConfig, CostModel, Mobility};
use crate::content_model::{AccessModel, ContentGenConfig};
use crate::env::Environment;
use crate::error::{CacheError, Result};
use crate::pg::{FdmConfig, LrmConfig, SwapInit};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// i.i.d. lifetimes and i.i.d. user distance.
    Iid,
    /// Two-state lifetime regime chain and random-walk user distance.
    Memory,
}

/// Everything an experiment needs, read from a flat `section.key=value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub capacity: usize,
    pub k_max: usize,
    pub m_max: usize,
    /// Lifetime support in the i.i.d. scenario; multiples of five up to
    /// `k_max` when unset.
    pub lifetimes: Option<Vec<usize>>,
    pub p_a: f64,
    pub p_r: f64,
    pub p1: f64,
    pub p2: f64,
    pub short_lifetime: usize,
    pub long_lifetime: usize,
    /// Random-walk mobility; defaults to the scenario's choice when unset.
    pub walk: Option<bool>,
    pub step_m: f64,
    pub p_up: f64,
    pub channel: ChannelConfig,
    pub fdm: FdmConfig,
    pub lrm: LrmConfig,
    pub iterations: usize,
    pub max_trajectories: usize,
    pub validation_trajectories: usize,
    pub validation_slots: usize,
    pub pilot_iterations: usize,
    pub swap_init: SwapInit,
    pub eval_trajectories: usize,
    pub eval_slots: usize,
    pub stats_samples: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Iid,
            capacity: 20,
            k_max: 15,
            m_max: 8,
            lifetimes: None,
            p_a: 0.25,
            p_r: 0.45,
            p1: 0.5,
            p2: 0.5,
            short_lifetime: 5,
            long_lifetime: 15,
            walk: None,
            step_m: 5.0,
            p_up: 0.5,
            channel: ChannelConfig::default(),
            fdm: FdmConfig::default(),
            lrm: LrmConfig::default(),
            iterations: 1000,
            max_trajectories: 2000,
            validation_trajectories: 40,
            validation_slots: 1000,
            pilot_iterations: 5,
            swap_init: SwapInit::LifetimeGap,
            eval_trajectories: 100,
            eval_slots: 5000,
            stats_samples: 1_000_000,
            seed: 1,
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| CacheError::Parse {
        line,
        msg: format!("bad value {v:?} for {key}"),
    })
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CacheError::Parse {
            line,
            msg: format!("bad boolean {v:?} for {key}"),
        }),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let v = value;
        let ch = &mut self.channel;
        match key {
            "scenario" => {
                self.scenario = match v {
                    "iid" => Scenario::Iid,
                    "memory" => Scenario::Memory,
                    _ => {
                        return Err(CacheError::Parse {
                            line,
                            msg: format!("unknown scenario {v:?}"),
                        })
                    }
                }
            }
            "seed" | "master_seed" => self.seed = parse_num(line, key, v)?,
            "cache.capacity" => self.capacity = parse_num(line, key, v)?,
            "content.k_max" => self.k_max = parse_num(line, key, v)?,
            "content.m_max" => self.m_max = parse_num(line, key, v)?,
            "content.lifetimes" => {
                let list = v
                    .split(',')
                    .map(|s| parse_num(line, key, s.trim()))
                    .collect::<Result<Vec<usize>>>()?;
                self.lifetimes = Some(list);
            }
            "access.p_a" => self.p_a = parse_num(line, key, v)?,
            "baseline.p_r" => self.p_r = parse_num(line, key, v)?,
            "regime.p1" => self.p1 = parse_num(line, key, v)?,
            "regime.p2" => self.p2 = parse_num(line, key, v)?,
            "regime.short_lifetime" => self.short_lifetime = parse_num(line, key, v)?,
            "regime.long_lifetime" => self.long_lifetime = parse_num(line, key, v)?,
            "mobility.model" => {
                self.walk = Some(match v {
                    "iid" => false,
                    "walk" => true,
                    _ => {
                        return Err(CacheError::Parse {
                            line,
                            msg: format!("unknown mobility model {v:?}"),
                        })
                    }
                })
            }
            "mobility.step_m" => self.step_m = parse_num(line, key, v)?,
            "mobility.p_up" => self.p_up = parse_num(line, key, v)?,
            "channel.noise_psd_dbm_per_hz" => ch.noise_psd_dbm_per_hz = parse_num(line, key, v)?,
            "channel.noise_figure_db" => ch.noise_figure_db = parse_num(line, key, v)?,
            "channel.bandwidth_hz" => ch.bandwidth_hz = parse_num(line, key, v)?,
            "channel.center_freq_ghz" => ch.center_freq_ghz = parse_num(line, key, v)?,
            "channel.tx_gain_dbi" => ch.tx_gain_dbi = parse_num(line, key, v)?,
            "channel.rx_gain_dbi" => ch.rx_gain_dbi = parse_num(line, key, v)?,
            "channel.spectral_eff_bps_per_hz" => {
                ch.spectral_eff_bps_per_hz = parse_num(line, key, v)?
            }
            "channel.shadow_sigma_db" => ch.shadow_sigma_db = parse_num(line, key, v)?,
            "channel.d_min_m" => ch.d_min_m = parse_num(line, key, v)?,
            "channel.d_max_m" => ch.d_max_m = parse_num(line, key, v)?,
            "fdm.perturb_range" => self.fdm.perturb_range = parse_num(line, key, v)?,
            "fdm.trajectories_per_update" => {
                self.fdm.trajectories_per_update = parse_num(line, key, v)?
            }
            "fdm.slots_per_trajectory" => self.fdm.slots_per_trajectory = parse_num(line, key, v)?,
            "fdm.step_size" => self.fdm.step_size = parse_num(line, key, v)?,
            "fdm.updates_averaged" => self.fdm.updates_averaged = parse_num(line, key, v)?,
            "fdm.common_random_numbers" => {
                self.fdm.common_random_numbers = parse_bool(line, key, v)?
            }
            "lrm.eta" => self.lrm.eta = parse_num(line, key, v)?,
            "lrm.trajectories_per_update" => {
                self.lrm.trajectories_per_update = parse_num(line, key, v)?
            }
            "lrm.slots_per_trajectory" => self.lrm.slots_per_trajectory = parse_num(line, key, v)?,
            "lrm.step_size" => self.lrm.step_size = parse_num(line, key, v)?,
            "lrm.updates_averaged" => self.lrm.updates_averaged = parse_num(line, key, v)?,
            "lrm.use_baseline" => self.lrm.use_baseline = parse_bool(line, key, v)?,
            "train.iterations" => self.iterations = parse_num(line, key, v)?,
            "train.max_trajectories" => self.max_trajectories = parse_num(line, key, v)?,
            "train.validation_trajectories" => {
                self.validation_trajectories = parse_num(line, key, v)?
            }
            "train.validation_slots" => self.validation_slots = parse_num(line, key, v)?,
            "train.pilot_iterations" => self.pilot_iterations = parse_num(line, key, v)?,
            "train.swap_init" => {
                self.swap_init = match v {
                    "zero" => SwapInit::Zero,
                    "lifetime_gap" => SwapInit::LifetimeGap,
                    _ => {
                        return Err(CacheError::Parse {
                            line,
                            msg: format!("unknown swap init {v:?}"),
                        })
                    }
                }
            }
            "eval.trajectories" => self.eval_trajectories = parse_num(line, key, v)?,
            "eval.slots" => self.eval_slots = parse_num(line, key, v)?,
            "stats.samples" => self.stats_samples = parse_num(line, key, v)?,
            _ => {
                return Err(CacheError::Parse {
                    line,
                    msg: format!("unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    pub fn uses_walk(&self) -> bool {
        self.walk.unwrap_or(self.scenario == Scenario::Memory)
    }

    pub fn content(&self) -> ContentGenConfig {
        match self.scenario {
            Scenario::Iid => match &self.lifetimes {
                Some(l) => ContentGenConfig {
                    m_max: self.m_max,
                    lifetime_support: l.clone(),
                    mode: crate::content_model::GenMode::Iid,
                },
                None => ContentGenConfig::iid_multiples_of_five(self.m_max, self.k_max),
            },
            Scenario::Memory => ContentGenConfig::regime(
                self.m_max,
                self.p1,
                self.p2,
                self.short_lifetime,
                self.long_lifetime,
            ),
        }
    }

    pub fn channel_config(&self) -> ChannelConfig {
        let mut c = self.channel.clone();
        c.mobility = if self.uses_walk() {
            Mobility::RandomWalk {
                step_m: self.step_m,
                p_up: self.p_up,
            }
        } else {
            Mobility::IidUniform
        };
        c
    }

    pub fn environment(&self) -> Result<Environment> {
        let env = Environment {
            content: self.content(),
            access: AccessModel::Irm { p_a: self.p_a },
            cost: CostModel::Lte(self.channel_config()),
            capacity: self.capacity,
        };
        self.validate_with(&env)?;
        Ok(env)
    }

    fn validate_with(&self, env: &Environment) -> Result<()> {
        env.validate()?;
        let k = env.k_max();
        if k > self.k_max {
            return Err(CacheError::Config(format!(
                "lifetimes up to {k} exceed content.k_max = {}",
                self.k_max
            )));
        }
        if env.content.lifetime_support.is_empty() {
            return Err(CacheError::Config(
                "content.k_max must be at least 5 for the default lifetime support".into(),
            ));
        }
        for (name, p) in [
            ("access.p_a", self.p_a),
            ("baseline.p_r", self.p_r),
            ("regime.p1", self.p1),
            ("regime.p2", self.p2),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CacheError::Config(format!(
                    "{name} = {p} is not a probability"
                )));
            }
        }
        if self.eval_trajectories == 0 || self.eval_slots == 0 || self.stats_samples == 0 {
            return Err(CacheError::Config(
                "evaluation and statistics sizes must be positive".into(),
            ));
        }
        self.fdm.validate()?;
        self.lrm.validate()
    }
}

impl std::str::FromStr for ExperimentConfig {
    type Err = CacheError;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CacheError::Parse {
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            cfg.set(k.trim(), v.trim(), i + 1)?;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_rejects_unknown_keys() {
        let cfg: ExperimentConfig = "# comment\nscenario=memory\ncache.capacity = 30\nchannel.bandwidth_hz=20000000\nregime.p1=0.9 # trailing\nfdm.common_random_numbers=false\n"
            .parse()
            .unwrap();
        assert_eq!(cfg.scenario, Scenario::Memory);
        assert_eq!(cfg.capacity, 30);
        assert_eq!(cfg.channel.bandwidth_hz, 2e7);
        assert_eq!(cfg.p1, 0.9);
        assert!(!cfg.fdm.common_random_numbers);
        assert!(cfg.uses_walk());
        let err = "cache.capacty=3".parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(err, CacheError::Parse { line: 1, .. }));
        assert!("cache.capacity=-1".parse::<ExperimentConfig>().is_err());
        assert!("just text".parse::<ExperimentConfig>().is_err());
    }

    #[test]
    fn default_environment() {
        let env = ExperimentConfig::default().environment().unwrap();
        assert_eq!(env.content.lifetime_support, vec![5, 10, 15]);
        assert_eq!(env.capacity, 20);
        let bad = ExperimentConfig {
            p_a: 1.5,
            ..Default::default()
        };
        assert!(bad.environment().is_err());
        let short = ExperimentConfig {
            lifetimes: Some(vec![20]),
            ..Default::default()
        };
        assert!(short.environment().is_err());
    }
}
