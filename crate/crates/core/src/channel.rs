//! Per-slot download cost from an LTE urban-micro link budget.
//!
//! The cost of one content is the transmit power (mW) needed to sustain the
//! target spectral efficiency at the user's distance, after pathloss and
//! shadowing. Shadowing is truncated at three standard deviations so that the
//! cost has a finite maximum.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CacheError, Result};

const SHADOW_TRUNCATION: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub enum Mobility {
    /// Fresh uniform distance every slot.
    IidUniform,
    /// Lattice walk: `d ± step_m`, stepping outward with probability `p_up`.
    RandomWalk { step_m: f64, p_up: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelConfig {
    pub noise_psd_dbm_per_hz: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub center_freq_ghz: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub spectral_eff_bps_per_hz: f64,
    pub shadow_sigma_db: f64,
    pub d_min_m: f64,
    pub d_max_m: f64,
    pub mobility: Mobility,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            noise_psd_dbm_per_hz: -174.0,
            noise_figure_db: 5.0,
            bandwidth_hz: 10e6,
            center_freq_ghz: 2.5,
            tx_gain_dbi: 17.0,
            rx_gain_dbi: 0.0,
            spectral_eff_bps_per_hz: 2.0,
            shadow_sigma_db: 4.0,
            d_min_m: 50.0,
            d_max_m: 250.0,
            mobility: Mobility::IidUniform,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min_m > 0.0 && self.d_min_m < self.d_max_m) {
            return Err(CacheError::Config(
                "channel distances need 0 < d_min < d_max".into(),
            ));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(CacheError::Config("bandwidth must be positive".into()));
        }
        if !(self.spectral_eff_bps_per_hz > 0.0) {
            return Err(CacheError::Config(
                "spectral efficiency must be positive".into(),
            ));
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return Err(CacheError::Config(
                "shadowing deviation must be nonnegative".into(),
            ));
        }
        if let Mobility::RandomWalk { step_m, p_up } = self.mobility {
            if !(step_m > 0.0) || !(0.0..=1.0).contains(&p_up) {
                return Err(CacheError::Config(
                    "random walk needs step > 0 and p_up in [0,1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// Largest possible cost: cell edge with worst truncated shadowing.
    pub fn c_max(&self) -> f64 {
        self.cost_mw_unchecked(self.d_max_m, SHADOW_TRUNCATION * self.shadow_sigma_db)
    }

    fn cost_mw_unchecked(&self, d: f64, shadow_db: f64) -> f64 {
        let pl = pathloss_db_unchecked(d, shadow_db, self);
        let dbm = noise_power_dbm(self) + required_snr_db(self) + pl
            - self.tx_gain_dbi
            - self.rx_gain_dbi;
        dbm_to_mw(dbm)
    }

    /// Distance lattice visited by the random walk.
    fn walk_lattice(&self, step: f64) -> usize {
        ((self.d_max_m - self.d_min_m) / step).floor() as usize + 1
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

fn pathloss_db_unchecked(d: f64, shadow_db: f64, cfg: &ChannelConfig) -> f64 {
    36.7 * d.log10() + 22.7 + 26.0 * cfg.center_freq_ghz.log10() + shadow_db
}

/// UMi NLOS pathloss in dB at distance `d` metres.
pub fn pathloss_db(d: f64, shadow_db: f64, cfg: &ChannelConfig) -> Result<f64> {
    if !(cfg.d_min_m..=cfg.d_max_m).contains(&d) {
        return Err(CacheError::DistanceOutOfRange(d));
    }
    Ok(pathloss_db_unchecked(d, shadow_db, cfg))
}

/// Thermal noise power over the configured bandwidth, in dBm.
pub fn noise_power_dbm(cfg: &ChannelConfig) -> f64 {
    cfg.noise_psd_dbm_per_hz + 10.0 * cfg.bandwidth_hz.log10() + cfg.noise_figure_db
}

/// SNR in dB needed to reach the target spectral efficiency (Shannon).
pub fn required_snr_db(cfg: &ChannelConfig) -> f64 {
    10.0 * (2f64.powf(cfg.spectral_eff_bps_per_hz) - 1.0).log10()
}

/// Transmit power in mW for one content at distance `d` with shadowing `shadow_db`.
pub fn download_cost_mw(d: f64, shadow_db: f64, cfg: &ChannelConfig) -> Result<f64> {
    if !(cfg.d_min_m..=cfg.d_max_m).contains(&d) {
        return Err(CacheError::DistanceOutOfRange(d));
    }
    Ok(cfg.cost_mw_unchecked(d, shadow_db))
}

/// Memory carried by the channel between slots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MobilityState {
    Memoryless,
    At(f64),
}

impl MobilityState {
    pub fn initial<R: Rng + ?Sized>(rng: &mut R, cfg: &ChannelConfig) -> Self {
        match cfg.mobility {
            Mobility::IidUniform => MobilityState::Memoryless,
            Mobility::RandomWalk { step_m, .. } => {
                let k = rng.random_range(0..cfg.walk_lattice(step_m));
                MobilityState::At(cfg.d_min_m + k as f64 * step_m)
            }
        }
    }
}

fn sample_shadow<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    loop {
        let x = normal.sample(rng);
        if x.abs() <= SHADOW_TRUNCATION * sigma {
            return x;
        }
    }
}

/// Moves the user one step of the random walk. Boundaries reflect inward.
pub fn walk_step<R: Rng + ?Sized>(
    rng: &mut R,
    d: f64,
    step_m: f64,
    p_up: f64,
    cfg: &ChannelConfig,
) -> f64 {
    let up = if d - step_m < cfg.d_min_m {
        true
    } else if d + step_m > cfg.d_max_m {
        false
    } else {
        rng.random::<f64>() < p_up
    };
    let next = if up { d + step_m } else { d - step_m };
    next.clamp(cfg.d_min_m, cfg.d_max_m)
}

/// Draws the cost of the current slot and advances the mobility state.
pub fn sample_cost<R: Rng + ?Sized>(
    rng: &mut R,
    state: MobilityState,
    cfg: &ChannelConfig,
) -> (f64, MobilityState) {
    let (d, next) = match (state, &cfg.mobility) {
        (MobilityState::At(d), Mobility::RandomWalk { step_m, p_up }) => {
            (d, MobilityState::At(walk_step(rng, d, *step_m, *p_up, cfg)))
        }
        _ => (
            rng.random_range(cfg.d_min_m..=cfg.d_max_m),
            MobilityState::Memoryless,
        ),
    };
    let shadow = sample_shadow(rng, cfg.shadow_sigma_db);
    (cfg.cost_mw_unchecked(d, shadow), next)
}

/// Source of per-slot download costs.
#[derive(Clone, Debug, PartialEq)]
pub enum CostModel {
    Lte(ChannelConfig),
    /// Finite cost levels with probabilities, used for exact solvers.
    Discrete {
        levels: Vec<f64>,
        probs: Vec<f64>,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Constant(f64),
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            CostModel::Lte(cfg) => cfg.validate(),
            CostModel::Discrete { levels, probs } => {
                if levels.is_empty() || levels.len() != probs.len() {
                    return Err(CacheError::Config(
                        "discrete channel needs matching levels and probs".into(),
                    ));
                }
                if levels.iter().any(|&c| !(c > 0.0)) {
                    return Err(CacheError::Config("cost levels must be positive".into()));
                }
                if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 || probs.iter().any(|&p| p < 0.0)
                {
                    return Err(CacheError::Config(
                        "cost level probabilities must sum to 1".into(),
                    ));
                }
                Ok(())
            }
            CostModel::Uniform { lo, hi } => {
                if !(*lo >= 0.0 && lo < hi) {
                    return Err(CacheError::Config(
                        "uniform channel needs 0 <= lo < hi".into(),
                    ));
                }
                Ok(())
            }
            CostModel::Constant(c) => {
                if !(*c > 0.0) {
                    return Err(CacheError::Config("constant cost must be positive".into()));
                }
                Ok(())
            }
        }
    }

    pub fn c_max(&self) -> f64 {
        match self {
            CostModel::Lte(cfg) => cfg.c_max(),
            CostModel::Discrete { levels, .. } => levels.iter().copied().fold(0.0, f64::max),
            CostModel::Uniform { hi, .. } => *hi,
            CostModel::Constant(c) => *c,
        }
    }

    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> MobilityState {
        match self {
            CostModel::Lte(cfg) => MobilityState::initial(rng, cfg),
            _ => MobilityState::Memoryless,
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        state: MobilityState,
    ) -> (f64, MobilityState) {
        match self {
            CostModel::Lte(cfg) => sample_cost(rng, state, cfg),
            CostModel::Discrete { levels, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (c, p) in levels.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return (*c, state);
                    }
                }
                (*levels.last().expect("validated"), state)
            }
            CostModel::Uniform { lo, hi } => (rng.random_range(*lo..*hi), state),
            CostModel::Constant(c) => (*c, state),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pathloss_values() {
        let cfg = ChannelConfig::default();
        // 36.7*2 + 22.7 + 26*log10(2.5)
        assert_abs_diff_eq!(
            pathloss_db(100.0, 0.0, &cfg).unwrap(),
            106.4464,
            epsilon = 1e-3
        );
        assert_abs_diff_eq!(
            pathloss_db(50.0, 0.0, &cfg).unwrap(),
            95.3991,
            epsilon = 1e-3
        );
        let base = pathloss_db(120.0, 0.0, &cfg).unwrap();
        assert_abs_diff_eq!(
            pathloss_db(120.0, 4.0, &cfg).unwrap() - base,
            4.0,
            epsilon = 1e-12
        );
        assert_eq!(
            pathloss_db(20.0, 0.0, &cfg),
            Err(CacheError::DistanceOutOfRange(20.0))
        );
    }

    #[test]
    fn noise_power_values() {
        let cfg = ChannelConfig::default();
        assert_abs_diff_eq!(noise_power_dbm(&cfg), -99.0, epsilon = 1e-9);
        let unit = ChannelConfig {
            bandwidth_hz: 1.0,
            noise_figure_db: 0.0,
            ..cfg.clone()
        };
        assert_abs_diff_eq!(noise_power_dbm(&unit), -174.0, epsilon = 1e-12);
        let doubled = ChannelConfig {
            bandwidth_hz: 2.0 * cfg.bandwidth_hz,
            ..cfg.clone()
        };
        assert_abs_diff_eq!(
            noise_power_dbm(&doubled) - noise_power_dbm(&cfg),
            3.0103,
            epsilon = 1e-4
        );
    }

    #[test]
    fn download_cost_chain() {
        let cfg = ChannelConfig::default();
        assert_abs_diff_eq!(required_snr_db(&cfg), 4.7712, epsilon = 1e-4);
        // -99 + 4.7712 + 106.4464 - 17 = -4.7824 dBm
        let c = download_cost_mw(100.0, 0.0, &cfg).unwrap();
        assert_abs_diff_eq!(c, 0.33245, epsilon = 2e-4);
        let mut prev = 0.0;
        for k in 0..=200 {
            let d = 50.0 + k as f64;
            let c = download_cost_mw(d, 1.5, &cfg).unwrap();
            assert!(c > prev);
            prev = c;
        }
        assert_eq!(
            download_cost_mw(100.0, 0.0, &cfg).unwrap().to_bits(),
            c.to_bits()
        );
    }

    #[test]
    fn zero_shadow_is_deterministic() {
        let cfg = ChannelConfig {
            shadow_sigma_db: 0.0,
            d_min_m: 80.0,
            d_max_m: 80.0 + 1e-12,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (c, _) = sample_cost(&mut rng, MobilityState::Memoryless, &cfg);
        assert_abs_diff_eq!(
            c,
            download_cost_mw(80.0, 0.0, &cfg).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn walk_reflects_at_boundaries() {
        let cfg = ChannelConfig {
            mobility: Mobility::RandomWalk {
                step_m: 5.0,
                p_up: 0.0,
            },
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            assert_eq!(walk_step(&mut rng, 50.0, 5.0, 0.0, &cfg), 55.0);
            assert_eq!(walk_step(&mut rng, 250.0, 5.0, 1.0, &cfg), 245.0);
        }
    }

    #[test]
    fn walk_stays_in_cell() {
        let cfg = ChannelConfig {
            mobility: Mobility::RandomWalk {
                step_m: 5.0,
                p_up: 0.7,
            },
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut st = MobilityState::initial(&mut rng, &cfg);
        for _ in 0..1_000_000 {
            let (c, next) = sample_cost(&mut rng, st, &cfg);
            assert!(c > 0.0 && c <= cfg.c_max());
            let MobilityState::At(d) = next else { panic!() };
            assert!((cfg.d_min_m..=cfg.d_max_m).contains(&d));
            st = next;
        }
    }

    #[test]
    fn iid_mean_cost_is_stable_across_seeds() {
        let cfg = ChannelConfig::default();
        let mean = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 1_000_000;
            (0..n)
                .map(|_| sample_cost(&mut rng, MobilityState::Memoryless, &cfg).0)
                .sum::<f64>()
                / n as f64
        };
        let (a, b) = (mean(10), mean(11));
        assert!(a.is_finite() && a > 0.0);
        assert!((a - b).abs() / a < 0.01, "{a} vs {b}");
    }
}
