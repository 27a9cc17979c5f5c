use std::collections::{HashMap, VecDeque};

use crate::channel::CostModel;
use crate::content_model::{
    step, AccessModel, Action, ContentGenConfig, GenMode, LifetimeMultiset, SystemState,
};
use crate::env::Environment;
use crate::error::{CacheError, Result};
use crate::policy::{candidate_swaps, prefix_probabilities, ThresholdParams};

/// An instance small enough to enumerate: IRM access and a discrete channel.
#[derive(Clone, Debug, PartialEq)]
pub struct TinyInstance {
    pub m_max: usize,
    pub lifetime_support: Vec<usize>,
    pub capacity: usize,
    pub p_a: f64,
    pub levels: Vec<f64>,
    pub probs: Vec<f64>,
}

impl TinyInstance {
    pub fn validate(&self) -> Result<()> {
        let k = self.k_max();
        if k == 0 || k > 3 || self.m_max == 0 || self.m_max > 2 || self.capacity > 2 {
            return Err(CacheError::Config(
                "tiny instance needs K_max <= 3, 1 <= M_max <= 2, B <= 2".into(),
            ));
        }
        if self.levels.is_empty() || self.levels.len() > 5 || self.levels.len() != self.probs.len()
        {
            return Err(CacheError::Config(
                "tiny instance needs 1 to 5 cost levels with probabilities".into(),
            ));
        }
        self.environment().validate()
    }

    pub fn k_max(&self) -> usize {
        self.lifetime_support.iter().copied().max().unwrap_or(0)
    }

    pub fn environment(&self) -> Environment {
        Environment {
            content: ContentGenConfig {
                m_max: self.m_max,
                lifetime_support: self.lifetime_support.clone(),
                mode: GenMode::Iid,
            },
            access: AccessModel::Irm { p_a: self.p_a },
            cost: CostModel::Discrete {
                levels: self.levels.clone(),
                probs: self.probs.clone(),
            },
            capacity: self.capacity,
        }
    }

    /// Exact distribution of one slot's arrivals.
    pub fn arrival_distribution(&self) -> Vec<(LifetimeMultiset, f64)> {
        let support = &self.lifetime_support;
        let mut dist: HashMap<LifetimeMultiset, f64> = HashMap::new();
        for m in 1..=self.m_max {
            let pm = 1.0 / self.m_max as f64;
            let combos = support.len().pow(m as u32);
            let pc = pm / combos as f64;
            for code in 0..combos {
                let mut x = code;
                let mut set = LifetimeMultiset::new();
                for _ in 0..m {
                    set.insert(support[x % support.len()]);
                    x /= support.len();
                }
                *dist.entry(set).or_default() += pc;
            }
        }
        let mut out: Vec<_> = dist.into_iter().collect();
        out.sort_by(|a, b| a.0.counts().cmp(b.0.counts()));
        out
    }

    /// Exogenous next-slot outcomes `(arrivals, access, probability)`.
    fn exogenous(&self) -> Vec<(LifetimeMultiset, bool, f64)> {
        let mut out = Vec::new();
        for (n, p) in self.arrival_distribution() {
            if self.p_a > 0.0 {
                out.push((n.clone(), true, p * self.p_a));
            }
            if self.p_a < 1.0 {
                out.push((n, false, p * (1.0 - self.p_a)));
            }
        }
        out
    }
}

/// Every instance with lifetime support in `{1, 2, 3}`, `M_max <= 2`,
/// `B <= 2`, two access probabilities and two cost distributions over the
/// levels `{0.5, 1, 2, 4, 8}`.
pub fn tiny_instance_family() -> Vec<TinyInstance> {
    let levels = vec![0.5, 1.0, 2.0, 4.0, 8.0];
    let dists = [vec![0.2; 5], vec![0.1, 0.15, 0.2, 0.25, 0.3]];
    let mut out = Vec::new();
    for mask in 1u32..8 {
        let support: Vec<usize> = (1..=3).filter(|l| mask & (1 << (l - 1)) != 0).collect();
        for m_max in 1..=2 {
            for capacity in 0..=2 {
                for p_a in [0.25, 0.6] {
                    for probs in &dists {
                        out.push(TinyInstance {
                            m_max,
                            lifetime_support: support.clone(),
                            capacity,
                            p_a,
                            levels: levels.clone(),
                            probs: probs.clone(),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Every sub-multiset of `set`.
fn sub_multisets(set: &LifetimeMultiset) -> Vec<LifetimeMultiset> {
    let mut out = vec![LifetimeMultiset::new()];
    for (l, &n) in set.counts().iter().enumerate().skip(1) {
        let mut next = Vec::with_capacity(out.len() * (n as usize + 1));
        for base in &out {
            for k in 0..=n {
                let mut s = base.clone();
                s.insert_n(l, k);
                next.push(s);
            }
        }
        out = next;
    }
    out
}

/// Legal actions of a non-access state, fewest downloads first.
fn legal_actions(state: &SystemState, capacity: usize) -> Vec<Action> {
    let mut out = Vec::new();
    for download in sub_multisets(&state.outside) {
        for discard in sub_multisets(&state.inside) {
            if state.inside.size() + download.size() - discard.size() <= capacity {
                out.push(Action {
                    download: download.clone(),
                    discard,
                });
            }
        }
    }
    out.sort_by_key(|a| (a.download.size(), a.discard.size()));
    out
}

/// Optimal average cost, relative values and policy of a tiny instance.
#[derive(Clone, Debug)]
pub struct DpSolution {
    pub rho: f64,
    pub states: Vec<SystemState>,
    /// Relative value of each state before its cost is revealed.
    pub values: Vec<f64>,
    /// `policy[s][c]`: optimal action in state `s` at cost level `c`.
    pub policy: Vec<Vec<Action>>,
    pub levels: Vec<f64>,
    pub iterations: usize,
}

impl DpSolution {
    /// States whose optimal download count increases somewhere along the
    /// sorted cost levels.
    pub fn threshold_violations(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.levels.len()).collect();
        order.sort_by(|&a, &b| self.levels[a].total_cmp(&self.levels[b]));
        (0..self.states.len())
            .filter(|&s| {
                order.windows(2).any(|w| {
                    self.policy[s][w[1]].download.size() > self.policy[s][w[0]].download.size()
                })
            })
            .collect()
    }

    /// Comparable pairs `(s, s')` with `s` better than `s'` but a larger
    /// value, beyond `tol`. Also returns the number of comparable pairs.
    pub fn order_violations(&self, tol: f64) -> (Vec<(usize, usize)>, usize) {
        let mut bad = Vec::new();
        let mut checked = 0;
        for (i, a) in self.states.iter().enumerate() {
            for (j, b) in self.states.iter().enumerate() {
                if i != j && a.is_better_than(b) {
                    checked += 1;
                    if self.values[i] > self.values[j] + tol {
                        bad.push((i, j));
                    }
                }
            }
        }
        (bad, checked)
    }
}

/// An action and its successor distribution as `(state index, probability)`.
type Transition = (Action, Vec<(usize, f64)>);

/// Relative value iteration on the reachable states of a tiny instance.
///
/// Ties between actions within `1e-9` go to the fewest downloads.
pub fn dp_oracle(inst: &TinyInstance, max_iterations: usize, tol: f64) -> Result<DpSolution> {
    inst.validate()?;
    let exo = inst.exogenous();
    let capacity = inst.capacity;

    let mut index: HashMap<SystemState, usize> = HashMap::new();
    let mut states: Vec<SystemState> = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern =
        |s: SystemState, states: &mut Vec<SystemState>, queue: &mut VecDeque<usize>| -> usize {
            *index.entry(s.clone()).or_insert_with(|| {
                states.push(s);
                queue.push_back(states.len() - 1);
                states.len() - 1
            })
        };
    for (n, u, _) in &exo {
        intern(
            SystemState::new(n.clone(), LifetimeMultiset::new(), 0, *u),
            &mut states,
            &mut queue,
        );
    }

    // Per state: the candidate actions and, per action, the successor
    // distribution; access states have a single forced action.
    let mut actions: Vec<Vec<Transition>> = Vec::new();
    while let Some(s) = queue.pop_front() {
        let state = states[s].clone();
        let acts = if state.accessed {
            vec![Action::forced(&state)]
        } else {
            legal_actions(&state, capacity)
        };
        let mut entry = Vec::with_capacity(acts.len());
        for a in acts {
            let mut succ = Vec::with_capacity(exo.len());
            for (n, u, p) in &exo {
                let mut next = step(&state, &a, capacity, *u, n)?;
                next.elapsed = 0;
                succ.push((intern(next, &mut states, &mut queue), *p));
            }
            entry.push((a, succ));
        }
        if actions.len() <= s {
            actions.resize_with(s + 1, Vec::new);
        }
        actions[s] = entry;
    }

    let ns = states.len();
    let mut h = vec![0.0; ns];
    let mut th = vec![0.0; ns];
    let tau = 0.5;
    let bellman = |h: &[f64], s: usize, c: f64| -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        let q: Vec<f64> = actions[s]
            .iter()
            .map(|(a, succ)| {
                a.download.size() as f64 * c + succ.iter().map(|&(j, p)| p * h[j]).sum::<f64>()
            })
            .collect();
        let min = q.iter().copied().fold(f64::INFINITY, f64::min);
        for (k, &v) in q.iter().enumerate() {
            if v <= min + 1e-9 {
                best = (v, k);
                break;
            }
        }
        best
    };
    let mut iterations = 0;
    let rho = loop {
        if iterations >= max_iterations {
            return Err(CacheError::NoConvergence(max_iterations));
        }
        iterations += 1;
        for (s, t) in th.iter_mut().enumerate() {
            *t = inst
                .levels
                .iter()
                .zip(&inst.probs)
                .map(|(&c, &p)| p * bellman(&h, s, c).0)
                .sum();
        }
        let (lo, hi) = th
            .iter()
            .zip(&h)
            .map(|(t, v)| t - v)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            });
        if hi - lo < tol {
            break 0.5 * (lo + hi);
        }
        let shift = th[0] - h[0];
        for s in 0..ns {
            h[s] += tau * (th[s] - h[s] - shift);
        }
    };
    let policy = (0..ns)
        .map(|s| {
            inst.levels
                .iter()
                .map(|&c| actions[s][bellman(&h, s, c).1].0.clone())
                .collect()
        })
        .collect();
    states.iter_mut().for_each(|s| s.elapsed = 0);
    Ok(DpSolution {
        rho,
        states,
        values: h,
        policy,
        levels: inst.levels.clone(),
        iterations,
    })
}

/// Exact `E[J_T]` of the randomized threshold policy over `horizon` slots,
/// starting from the same initial state as a rollout.
pub fn exact_expected_cost(
    inst: &TinyInstance,
    params: &ThresholdParams,
    eta: f64,
    horizon: usize,
) -> Result<f64> {
    inst.validate()?;
    let exo = inst.exogenous();
    let mut dist: HashMap<SystemState, f64> = HashMap::new();
    for (n, u, p) in &exo {
        *dist
            .entry(SystemState::new(n.clone(), LifetimeMultiset::new(), 0, *u))
            .or_default() += p;
    }
    let mut total = 0.0;
    for t in 0..horizon {
        let last = t + 1 == horizon;
        let mut next: HashMap<SystemState, f64> = HashMap::new();
        for (state, ps) in &dist {
            for (&c, &pc) in inst.levels.iter().zip(&inst.probs) {
                let branches: Vec<(Action, f64)> = if state.accessed {
                    vec![(Action::forced(state), 1.0)]
                } else {
                    let probs = prefix_probabilities(state, c, params, eta, inst.capacity);
                    let swaps: Vec<_> = candidate_swaps(state, inst.capacity)
                        .take(probs.len() - 1)
                        .collect();
                    (0..probs.len())
                        .map(|k| {
                            let mut a = Action::none();
                            for s in &swaps[..k] {
                                a.download.insert(s.big_l);
                                if s.l > 0 {
                                    a.discard.insert(s.l);
                                }
                            }
                            (a, probs[k])
                        })
                        .collect()
                };
                for (a, pa) in branches {
                    let w = ps * pc * pa;
                    if w == 0.0 {
                        continue;
                    }
                    total += w * a.cost(c);
                    if last {
                        continue;
                    }
                    for (n, u, pn) in &exo {
                        let mut s2 = step(state, &a, inst.capacity, *u, n)?;
                        s2.elapsed = 0;
                        *next.entry(s2).or_default() += w * pn;
                    }
                }
            }
        }
        dist = next;
    }
    Ok(total / horizon as f64)
}
