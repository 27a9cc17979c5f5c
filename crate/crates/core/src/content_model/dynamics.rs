//! Slot-level state transitions of the caching system.

use super::multiset::LifetimeMultiset;
use crate::error::{CacheError, Result};

/// Contents outside and inside the cache plus the user-access status.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SystemState {
    pub outside: LifetimeMultiset,
    pub inside: LifetimeMultiset,
    /// Slots since the last access, counted at the start of this slot.
    pub elapsed: usize,
    /// Whether the user accesses the system in this slot.
    pub accessed: bool,
}

impl SystemState {
    pub fn new(
        outside: LifetimeMultiset,
        inside: LifetimeMultiset,
        elapsed: usize,
        accessed: bool,
    ) -> Self {
        Self {
            outside,
            inside,
            elapsed,
            accessed,
        }
    }

    /// `self` is at least as good as `other`: same access status and the same
    /// contents overall, with shorter-lived contents outside and longer-lived
    /// contents inside.
    pub fn is_better_than(&self, other: &Self) -> bool {
        self.accessed == other.accessed
            && self.elapsed == other.elapsed
            && self.outside.union(&self.inside) == other.outside.union(&other.inside)
            && self.outside.le_padded(&other.outside)
            && other.inside.le_padded(&self.inside)
    }
}

/// Downloads from the outside pool and discards from the cache in one slot.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Action {
    pub download: LifetimeMultiset,
    pub discard: LifetimeMultiset,
}

impl Action {
    pub fn none() -> Self {
        Self::default()
    }

    /// The action imposed by a user access: everything outside is downloaded
    /// and the cache is handed to the app.
    pub fn forced(state: &SystemState) -> Self {
        Self {
            download: state.outside.clone(),
            discard: state.inside.clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.download.is_empty() && self.discard.is_empty()
    }

    /// Cost of the action at per-content download cost `cost`.
    pub fn cost(&self, cost: f64) -> f64 {
        self.download.size() as f64 * cost
    }
}

/// Checks that `action` is legal in `state` under cache capacity `capacity`.
pub fn validate_action(state: &SystemState, action: &Action, capacity: usize) -> Result<()> {
    if state.accessed {
        return Ok(());
    }
    if !action.download.is_sub_multiset_of(&state.outside) {
        return Err(CacheError::NotSubMultiset {
            what: "download",
            of: "outside contents",
        });
    }
    if !action.discard.is_sub_multiset_of(&state.inside) {
        return Err(CacheError::NotSubMultiset {
            what: "discard",
            of: "cache contents",
        });
    }
    let size = state.inside.size() + action.download.size() - action.discard.size();
    if size > capacity {
        return Err(CacheError::CapacityExceeded { size, capacity });
    }
    Ok(())
}

/// Advances the system by one slot.
///
/// On an access slot the action is the forced flush and the argument is
/// ignored: the cache empties and only the new arrivals remain outside.
/// Otherwise the action is applied and every remaining lifetime is
/// decremented before the new arrivals join the outside pool.
pub fn step(
    state: &SystemState,
    action: &Action,
    capacity: usize,
    access_next: bool,
    new_contents: &LifetimeMultiset,
) -> Result<SystemState> {
    let mut next = state.clone();
    step_in_place(&mut next, action, capacity, access_next, new_contents)?;
    Ok(next)
}

pub fn step_in_place(
    state: &mut SystemState,
    action: &Action,
    capacity: usize,
    access_next: bool,
    new_contents: &LifetimeMultiset,
) -> Result<()> {
    validate_action(state, action, capacity)?;
    if state.accessed {
        state.inside = LifetimeMultiset::new();
        state.outside = new_contents.clone();
        state.elapsed = 0;
    } else {
        state.inside.add_assign(&action.download);
        state.inside.sub_assign(&action.discard);
        state.outside.sub_assign(&action.download);
        state.outside.add_assign(&action.discard);
        state.inside.decrement_in_place();
        state.outside.decrement_in_place();
        state.outside.add_assign(new_contents);
        state.elapsed += 1;
    }
    state.accessed = access_next;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ms(v: &[usize]) -> LifetimeMultiset {
        v.iter().copied().collect()
    }

    #[test]
    fn no_access_step() {
        let s = SystemState::new(ms(&[5, 3]), ms(&[2]), 1, false);
        let a = Action {
            download: ms(&[5]),
            discard: ms(&[]),
        };
        let n = step(&s, &a, 4, false, &ms(&[])).unwrap();
        assert_eq!(n.inside, ms(&[4, 1]));
        assert_eq!(n.outside, ms(&[2]));
        assert_eq!(n.elapsed, 2);
    }

    #[test]
    fn access_step_flushes() {
        let s = SystemState::new(ms(&[5, 3, 3]), ms(&[2, 7]), 4, true);
        let n = step(&s, &Action::forced(&s), 2, false, &ms(&[10])).unwrap();
        assert!(n.inside.is_empty());
        assert_eq!(n.outside, ms(&[10]));
        assert_eq!(n.elapsed, 0);
        assert_eq!(Action::forced(&s).cost(2.0), 6.0);
    }

    #[test]
    fn both_pools_expire() {
        let s = SystemState::new(ms(&[1]), ms(&[1]), 0, false);
        let n = step(&s, &Action::none(), 3, false, &ms(&[])).unwrap();
        assert!(n.inside.is_empty() && n.outside.is_empty());
    }

    #[test]
    fn illegal_actions_are_rejected() {
        let s = SystemState::new(ms(&[5, 3]), ms(&[2]), 0, false);
        let too_many = Action {
            download: ms(&[5, 3]),
            discard: ms(&[]),
        };
        assert_eq!(
            step(&s, &too_many, 2, false, &ms(&[])),
            Err(CacheError::CapacityExceeded {
                size: 3,
                capacity: 2
            })
        );
        let absent = Action {
            download: ms(&[4]),
            discard: ms(&[]),
        };
        assert!(matches!(
            step(&s, &absent, 5, false, &ms(&[])),
            Err(CacheError::NotSubMultiset { .. })
        ));
        let bad_discard = Action {
            download: ms(&[]),
            discard: ms(&[3]),
        };
        assert!(matches!(
            step(&s, &bad_discard, 5, false, &ms(&[])),
            Err(CacheError::NotSubMultiset { .. })
        ));
        let swap = Action {
            download: ms(&[5, 3]),
            discard: ms(&[2]),
        };
        assert!(step(&s, &swap, 2, false, &ms(&[])).is_ok());
    }

    fn arb_state() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (
            prop::collection::vec(2usize..10, 0..8),
            prop::collection::vec(2usize..10, 0..4),
        )
    }

    proptest! {
        #[test]
        fn conservation_without_expiry(
            (outside, inside) in arb_state(),
            new in prop::collection::vec(1usize..10, 0..5),
            take in 0usize..8,
            drop in 0usize..4,
        ) {
            let s = SystemState::new(ms(&outside), ms(&inside), 0, false);
            let download: LifetimeMultiset = outside.iter().copied().take(take).collect();
            let discard: LifetimeMultiset = inside.iter().copied().take(drop).collect();
            let a = Action { download, discard };
            let n = step(&s, &a, usize::MAX, false, &ms(&new)).unwrap();
            prop_assert_eq!(
                n.outside.size() + n.inside.size(),
                outside.len() + inside.len() + new.len()
            );
        }
    }

    /// All states over `k_max` with at most `max_total` contents.
    fn small_multisets(k_max: usize, max_size: usize) -> Vec<LifetimeMultiset> {
        let mut out = vec![LifetimeMultiset::new()];
        let mut frontier = vec![(LifetimeMultiset::new(), 1usize)];
        for _ in 0..max_size {
            let mut next = Vec::new();
            for (m, lo) in &frontier {
                for l in *lo..=k_max {
                    let mut m2 = m.clone();
                    m2.insert(l);
                    out.push(m2.clone());
                    next.push((m2, l));
                }
            }
            frontier = next;
        }
        out
    }

    fn simple_actions(s: &SystemState, capacity: usize) -> Vec<Action> {
        let mut acts = vec![Action::none()];
        let ls: Vec<usize> = std::iter::once(0)
            .chain(
                s.inside
                    .counts()
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(l, _)| l),
            )
            .collect();
        let bigs: Vec<usize> = s
            .outside
            .counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(l, _)| l)
            .collect();
        for &l in &ls {
            for &big in &bigs {
                if l == 0 && s.inside.size() >= capacity {
                    continue;
                }
                acts.push(Action {
                    download: ms(&[big]),
                    discard: if l == 0 { ms(&[]) } else { ms(&[l]) },
                });
            }
        }
        acts
    }

    #[test]
    fn better_state_order_is_preserved_by_matched_simple_actions() {
        let k_max = 3;
        let capacity = 2;
        let sets = small_multisets(k_max, 4);
        let mut checked = 0usize;
        for o in &sets {
            for i in &sets {
                if o.size() + i.size() > 4 || i.size() > capacity {
                    continue;
                }
                let s_prime = SystemState::new(o.clone(), i.clone(), 1, false);
                for o2 in &sets {
                    for i2 in &sets {
                        if i2.size() > capacity {
                            continue;
                        }
                        let s = SystemState::new(o2.clone(), i2.clone(), 1, false);
                        if !s.is_better_than(&s_prime) {
                            continue;
                        }
                        for a_prime in simple_actions(&s_prime, capacity) {
                            let next_prime =
                                step(&s_prime, &a_prime, capacity, false, &ms(&[])).unwrap();
                            let found = simple_actions(&s, capacity).into_iter().any(|a| {
                                a.download.size() <= a_prime.download.size()
                                    && step(&s, &a, capacity, false, &ms(&[]))
                                        .map(|n| n.is_better_than(&next_prime))
                                        .unwrap_or(false)
                            });
                            assert!(
                                found,
                                "no matching action for {s:?} vs {s_prime:?} under {a_prime:?}"
                            );
                            checked += 1;
                        }
                    }
                }
            }
        }
        assert!(checked > 1000, "only {checked} cases");
    }
}
