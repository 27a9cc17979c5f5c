//! Lower bounds on the achievable average cost.
//!
//! LB-UC relaxes the cache capacity: each content is then handled on its own
//! and a per-lifetime threshold follows from a one-dimensional dynamic
//! program. LB-NCK reveals future access times: only contents that survive
//! until the next access matter, and the download threshold depends only on
//! the number of slots left before that access.

use rand::Rng;

use crate::channel::CostModel;
use crate::content_model::AccessModel;
use crate::env::{Environment, Trace};
use crate::error::{CacheError, Result};

/// Distribution summaries of the per-slot cost needed by the recursions.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelStats {
    /// Sorted cost samples with prefix sums, for the LTE channel.
    Empirical {
        pool: Vec<f64>,
        prefix: Vec<f64>,
        mean: f64,
    },
    /// Exact moments of a discrete distribution.
    Discrete { levels: Vec<f64>, probs: Vec<f64> },
    /// Exact moments of a uniform distribution.
    Uniform { lo: f64, hi: f64 },
}

impl ChannelStats {
    pub fn from_samples(mut pool: Vec<f64>) -> Result<Self> {
        if pool.is_empty() {
            return Err(CacheError::Config("empty cost sample pool".into()));
        }
        pool.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(pool.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &c in &pool {
            acc += c;
            prefix.push(acc);
        }
        let mean = acc / pool.len() as f64;
        Ok(ChannelStats::Empirical { pool, prefix, mean })
    }

    /// Exact statistics for models with closed forms, `None` for the LTE channel.
    pub fn exact(model: &CostModel) -> Option<Self> {
        match model {
            CostModel::Lte(_) => None,
            CostModel::Discrete { levels, probs } => {
                let mut pairs: Vec<(f64, f64)> =
                    levels.iter().copied().zip(probs.iter().copied()).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                Some(ChannelStats::Discrete {
                    levels: pairs.iter().map(|p| p.0).collect(),
                    probs: pairs.iter().map(|p| p.1).collect(),
                })
            }
            CostModel::Uniform { lo, hi } => Some(ChannelStats::Uniform { lo: *lo, hi: *hi }),
            CostModel::Constant(c) => Some(ChannelStats::Discrete {
                levels: vec![*c],
                probs: vec![1.0],
            }),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ChannelStats::Empirical { mean, .. } => *mean,
            ChannelStats::Discrete { levels, probs } => {
                levels.iter().zip(probs).map(|(c, p)| c * p).sum()
            }
            ChannelStats::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    /// `P(C <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            ChannelStats::Empirical { pool, .. } => {
                pool.partition_point(|&c| c <= t) as f64 / pool.len() as f64
            }
            ChannelStats::Discrete { levels, probs } => levels
                .iter()
                .zip(probs)
                .filter(|(c, _)| **c <= t)
                .map(|(_, p)| p)
                .sum(),
            ChannelStats::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    /// `E[C 1{C <= t}]`.
    pub fn partial_mean(&self, t: f64) -> f64 {
        match self {
            ChannelStats::Empirical { pool, prefix, .. } => {
                let k = pool.partition_point(|&c| c <= t);
                prefix[k] / pool.len() as f64
            }
            ChannelStats::Discrete { levels, probs } => levels
                .iter()
                .zip(probs)
                .filter(|(c, _)| **c <= t)
                .map(|(c, p)| c * p)
                .sum(),
            ChannelStats::Uniform { lo, hi } => {
                let x = t.clamp(*lo, *hi);
                (x * x - lo * lo) / (2.0 * (hi - lo))
            }
        }
    }

    /// `E[C | C <= t]`, zero when the event has probability zero.
    pub fn conditional_mean(&self, t: f64) -> f64 {
        let p = self.cdf(t);
        if p == 0.0 {
            0.0
        } else {
            self.partial_mean(t) / p
        }
    }

    /// `E[min(C, t)]`.
    pub fn expected_min(&self, t: f64) -> f64 {
        self.partial_mean(t) + t * (1.0 - self.cdf(t))
    }
}

/// Draws `n` consecutive costs from the channel and summarizes them.
pub fn estimate_channel_stats<R: Rng + ?Sized>(
    model: &CostModel,
    n: usize,
    rng: &mut R,
) -> Result<ChannelStats> {
    model.validate()?;
    let mut state = model.initial_state(rng);
    let mut pool = Vec::with_capacity(n);
    for _ in 0..n {
        let (c, next) = model.sample(rng, state);
        pool.push(c);
        state = next;
    }
    ChannelStats::from_samples(pool)
}

/// Download thresholds of the unlimited-cache problem.
#[derive(Clone, Debug, PartialEq)]
pub struct UcThresholds {
    /// `by_lifetime[L - 1]` is the threshold for remaining lifetime `L`.
    pub by_lifetime: Vec<f64>,
    /// `grid[L - 1][E]`: threshold for lifetime `L` when `E` slots have
    /// elapsed since the last access (bounded access model only).
    pub grid: Option<Vec<Vec<f64>>>,
}

impl UcThresholds {
    pub fn k_max(&self) -> usize {
        self.by_lifetime.len()
    }

    /// Threshold for lifetime `l` at elapsed time `e` (ignored under IRM).
    pub fn get(&self, l: usize, e: usize) -> f64 {
        if l == 0 || l > self.by_lifetime.len() {
            return 0.0;
        }
        match &self.grid {
            Some(g) => {
                let row = &g[l - 1];
                row[e.min(row.len() - 1)]
            }
            None => self.by_lifetime[l - 1],
        }
    }
}

/// IRM thresholds: `T_1 = 0`, `T_{L+1} = p E[C] + (1 - p) E[min(C, T_L)]`.
pub fn lbuc_thresholds_irm(stats: &ChannelStats, k_max: usize, p_a: f64) -> UcThresholds {
    let mean = stats.mean();
    let mut by_lifetime = Vec::with_capacity(k_max);
    let mut t = 0.0;
    for l in 1..=k_max {
        if l > 1 {
            t = p_a * mean + (1.0 - p_a) * stats.expected_min(t);
        }
        by_lifetime.push(t);
    }
    UcThresholds {
        by_lifetime,
        grid: None,
    }
}

/// Thresholds indexed by lifetime and elapsed time, for any access model.
///
/// `e_len` is the number of elapsed-time columns (`E = 0..e_len`). For a
/// bounded model it may not exceed `D_max`; under IRM the last column is
/// reused for `E + 1` beyond the grid.
pub fn lbuc_thresholds_general(
    stats: &ChannelStats,
    k_max: usize,
    access: &AccessModel,
    e_len: usize,
) -> Result<UcThresholds> {
    if let Some(d_max) = access.d_max() {
        if e_len > d_max {
            return Err(CacheError::Config(format!(
                "elapsed grid of {e_len} columns exceeds D_max = {d_max}"
            )));
        }
    }
    if e_len == 0 {
        return Err(CacheError::Config("elapsed grid must be nonempty".into()));
    }
    let mean = stats.mean();
    let full_len = access.d_max().unwrap_or(e_len);
    let hazard: Vec<f64> = (0..full_len)
        .map(|e| access.access_probability(e).unwrap_or(1.0))
        .collect();
    let mut grid = vec![vec![0.0; full_len]; k_max];
    for l in 1..k_max {
        for e in 0..full_len {
            let p = hazard[e];
            let next = if p >= 1.0 {
                0.0
            } else {
                let t_next = grid[l - 1][(e + 1).min(full_len - 1)];
                stats.expected_min(t_next)
            };
            grid[l][e] = p * mean + (1.0 - p) * next;
        }
    }
    for row in &mut grid {
        row.truncate(e_len);
    }
    let by_lifetime = grid.iter().map(|row| row[0]).collect();
    Ok(UcThresholds {
        by_lifetime,
        grid: Some(grid),
    })
}

/// Thresholds of the non-causal bound, `by_gap[G - 1]` for `G` slots before access.
#[derive(Clone, Debug, PartialEq)]
pub struct NckThresholds {
    pub by_gap: Vec<f64>,
}

impl NckThresholds {
    /// Threshold at gap `g >= 1`; constant past the computed range.
    pub fn get(&self, g: usize) -> f64 {
        if g == 0 {
            return f64::INFINITY;
        }
        self.by_gap[(g - 1).min(self.by_gap.len() - 1)]
    }
}

/// `T_1 = E[C]`, `T_G = E[min(C, T_{G-1})]` for `G = 1..=g_max`.
pub fn lbnck_thresholds(stats: &ChannelStats, g_max: usize) -> NckThresholds {
    let mut by_gap = Vec::with_capacity(g_max.max(1));
    let mut t = stats.mean();
    by_gap.push(t);
    for _ in 1..g_max {
        t = stats.expected_min(t);
        by_gap.push(t);
    }
    NckThresholds { by_gap }
}

/// Iterates the recursion until successive thresholds differ by less than
/// `1e-6 E[C]`, for unbounded access gaps.
pub fn lbnck_thresholds_converged(stats: &ChannelStats, max_len: usize) -> Result<NckThresholds> {
    let mean = stats.mean();
    let mut by_gap = vec![mean];
    while by_gap.len() < max_len {
        let prev = *by_gap.last().expect("nonempty");
        let t = stats.expected_min(prev);
        by_gap.push(t);
        if (prev - t).abs() < 1e-6 * mean {
            return Ok(NckThresholds { by_gap });
        }
    }
    Err(CacheError::NoConvergence(max_len))
}

/// Unlimited-cache rollout: every outside content of lifetime `L` is fetched
/// as soon as the cost drops to its threshold, and nothing is evicted.
/// Returns the average cost per slot.
pub fn rollout_lbuc(env: &Environment, uc: &UcThresholds, trace: &Trace) -> f64 {
    let k = env.k_max();
    let mut outside = vec![0u32; k + 2];
    let mut total = 0.0;
    let mut elapsed = 0usize;
    for t in 0..trace.len() {
        for (l, &n) in trace.arrivals[t].counts().iter().enumerate() {
            outside[l] += n;
        }
        let c = trace.cost[t];
        if trace.access[t] {
            total += outside.iter().map(|&n| n as f64).sum::<f64>() * c;
            outside.iter_mut().for_each(|n| *n = 0);
            elapsed = 0;
            continue;
        }
        // column E counts the slots since the access, including this one
        for (l, n) in outside.iter_mut().enumerate().skip(1) {
            if *n > 0 && c <= uc.get(l, elapsed + 1) {
                total += *n as f64 * c;
                *n = 0;
            }
        }
        outside.remove(1);
        outside.push(0);
        elapsed += 1;
    }
    total / trace.len() as f64
}

/// Non-causal rollout with cache capacity `env.capacity`.
///
/// Contents that expire before the next access are dropped at no cost. While
/// the cache has room and the cost is below the threshold for the current
/// gap, surviving contents are fetched in arrival order; at the access the
/// remaining survivors are fetched at the current cost.
pub fn rollout_lbnck(env: &Environment, nck: &NckThresholds, trace: &Trace) -> f64 {
    let gaps = trace.gaps_to_access();
    let capacity = env.capacity as u64;
    let mut waiting = 0u64;
    let mut cached = 0u64;
    let mut total = 0.0;
    for (t, &g) in gaps.iter().enumerate() {
        // a content with remaining lifetime L is still relevant g slots later iff L > g
        waiting += trace.arrivals[t].tail_count(g + 1) as u64;
        let c = trace.cost[t];
        if trace.access[t] {
            total += waiting as f64 * c;
            waiting = 0;
            cached = 0;
            continue;
        }
        if cached < capacity && waiting > 0 && c <= nck.get(g) {
            let n = waiting.min(capacity - cached);
            total += n as f64 * c;
            waiting -= n;
            cached += n;
        }
    }
    total / trace.len() as f64
}
