//! Threshold parametrizations: one threshold per swap pair (LISO) or a
//! threshold that is linear in the cache's lifetime histogram (LFA).

use std::fmt::Write as _;

use crate::content_model::LifetimeMultiset;
use crate::error::{CacheError, Result};

/// Swap of a cached content with remaining lifetime `l` (0 = empty slot) for
/// an outside content with remaining lifetime `big_l` (0 = nothing to fetch).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SimpleAction {
    pub l: usize,
    pub big_l: usize,
}

impl SimpleAction {
    pub fn new(l: usize, big_l: usize) -> Self {
        Self { l, big_l }
    }

    /// Only swaps that bring in a longer-lived content are ever considered.
    pub fn is_admissible(&self) -> bool {
        self.l < self.big_l
    }
}

/// Dense index of the admissible pairs `(l, L)` with `0 <= l < L <= k_max`.
#[inline]
pub fn pair_index(l: usize, big_l: usize) -> usize {
    debug_assert!(l < big_l);
    big_l * (big_l - 1) / 2 + l
}

pub fn pair_count(k_max: usize) -> usize {
    k_max * (k_max + 1) / 2
}

/// Normalized lifetime histogram of the cache; entry 0 counts empty slots.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyVector(pub Vec<f64>);

impl FrequencyVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Builds the frequency vector of a cache with capacity `capacity`.
///
/// With zero capacity the cache is all "empty slot" by convention.
pub fn frequency_vector(
    inside: &LifetimeMultiset,
    capacity: usize,
    k_max: usize,
) -> Result<FrequencyVector> {
    let mut phi = vec![0.0; k_max + 1];
    fill_frequency(inside, capacity, k_max, &mut phi)?;
    Ok(FrequencyVector(phi))
}

pub(crate) fn fill_frequency(
    inside: &LifetimeMultiset,
    capacity: usize,
    k_max: usize,
    phi: &mut [f64],
) -> Result<()> {
    if let Some(top) = inside.max_lifetime() {
        if top > k_max {
            return Err(CacheError::LifetimeOutOfRange {
                lifetime: top,
                k_max,
            });
        }
    }
    let size = inside.size();
    if size > capacity {
        return Err(CacheError::CapacityExceeded { size, capacity });
    }
    phi.iter_mut().for_each(|p| *p = 0.0);
    if capacity == 0 {
        phi[0] = 1.0;
        return Ok(());
    }
    let b = capacity as f64;
    phi[0] = (capacity - size) as f64 / b;
    for (l, &c) in inside.counts().iter().enumerate().skip(1) {
        phi[l] = c as f64 / b;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    Liso,
    Lfa,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Liso => "liso",
            PolicyKind::Lfa => "lfa",
        }
    }
}

/// Parameters of a threshold policy, stored as a flat vector.
///
/// LISO: `theta[pair_index(l, L)]`, kept within `[0, c_max]`.
/// LFA: `theta[i * pair_count + pair_index(l, L)]` for histogram bin `i`,
/// unconstrained; the resulting threshold is clamped to `[0, c_max]`.
/// Inadmissible pairs (`l >= L`) have no storage and threshold zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdParams {
    kind: PolicyKind,
    k_max: usize,
    c_max: f64,
    theta: Vec<f64>,
}

impl ThresholdParams {
    pub fn zeros(kind: PolicyKind, k_max: usize, c_max: f64) -> Self {
        let n = match kind {
            PolicyKind::Liso => pair_count(k_max),
            PolicyKind::Lfa => (k_max + 1) * pair_count(k_max),
        };
        Self {
            kind,
            k_max,
            c_max,
            theta: vec![0.0; n],
        }
    }

    pub fn from_vec(kind: PolicyKind, k_max: usize, c_max: f64, theta: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(kind, k_max, c_max);
        if theta.len() != p.theta.len() {
            return Err(CacheError::Config(format!(
                "{} parameter vector has length {}, expected {}",
                kind.name(),
                theta.len(),
                p.theta.len()
            )));
        }
        p.theta = theta;
        p.project();
        Ok(p)
    }

    /// LFA parameters that reproduce a LISO table on every cache state.
    pub fn lfa_from_liso(liso: &ThresholdParams) -> Self {
        let np = pair_count(liso.k_max);
        let mut out = Self::zeros(PolicyKind::Lfa, liso.k_max, liso.c_max);
        for i in 0..=liso.k_max {
            out.theta[i * np..(i + 1) * np].copy_from_slice(&liso.theta);
        }
        out
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    /// Replaces the parameter vector, re-establishing the invariants.
    pub fn set_vec(&mut self, theta: &[f64]) {
        self.theta.copy_from_slice(theta);
        self.project();
    }

    /// LISO entries are clamped into `[0, c_max]`; LFA weights are free.
    pub fn project(&mut self) {
        if self.kind == PolicyKind::Liso {
            let c_max = self.c_max;
            self.theta.iter_mut().for_each(|t| *t = t.clamp(0.0, c_max));
        }
    }

    /// Raw (unclamped) LISO entry or LFA weight.
    pub fn get(&self, bin: usize, l: usize, big_l: usize) -> f64 {
        if l >= big_l || big_l > self.k_max {
            return 0.0;
        }
        match self.kind {
            PolicyKind::Liso => self.theta[pair_index(l, big_l)],
            PolicyKind::Lfa => self.theta[bin * pair_count(self.k_max) + pair_index(l, big_l)],
        }
    }

    pub fn set(&mut self, bin: usize, l: usize, big_l: usize, value: f64) {
        assert!(
            l < big_l && big_l <= self.k_max,
            "inadmissible pair ({l}|{big_l})"
        );
        let idx = match self.kind {
            PolicyKind::Liso => pair_index(l, big_l),
            PolicyKind::Lfa => bin * pair_count(self.k_max) + pair_index(l, big_l),
        };
        self.theta[idx] = match self.kind {
            PolicyKind::Liso => value.clamp(0.0, self.c_max),
            PolicyKind::Lfa => value,
        };
    }

    /// Raw linear threshold before clamping; equals the entry for LISO.
    #[inline]
    pub(crate) fn raw_threshold(&self, phi: &[f64], pair: usize) -> f64 {
        match self.kind {
            PolicyKind::Liso => self.theta[pair],
            PolicyKind::Lfa => {
                let np = pair_count(self.k_max);
                phi.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(i, &p)| p * self.theta[i * np + pair])
                    .sum()
            }
        }
    }

    /// Threshold (mW) of a simple action in a cache with histogram `phi`.
    pub fn threshold(&self, phi: &FrequencyVector, a: SimpleAction) -> f64 {
        if !a.is_admissible() || a.big_l > self.k_max {
            return 0.0;
        }
        self.raw_threshold(&phi.0, pair_index(a.l, a.big_l))
            .clamp(0.0, self.c_max)
    }

    /// Writes the table as text: a `kind` header, optional extra header lines,
    /// then one `bin l L value` line per stored coordinate.
    pub fn to_text(&self, header: &[(&str, String)]) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# kind={} k_max={} c_max={}",
            self.kind.name(),
            self.k_max,
            self.c_max
        );
        for (k, v) in header {
            let _ = writeln!(s, "# {k}={v}");
        }
        let bins = match self.kind {
            PolicyKind::Liso => 1,
            PolicyKind::Lfa => self.k_max + 1,
        };
        for bin in 0..bins {
            for big_l in 1..=self.k_max {
                for l in 0..big_l {
                    let _ = writeln!(s, "{bin} {l} {big_l} {}", self.get(bin, l, big_l));
                }
            }
        }
        s
    }

    /// Parses the format written by [`ThresholdParams::to_text`]. Extra header
    /// keys are returned in file order.
    pub fn from_text(text: &str) -> Result<(Self, Vec<(String, String)>)> {
        let mut kind = None;
        let mut k_max = None;
        let mut c_max = None;
        let mut extra = Vec::new();
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for tok in rest.split_whitespace() {
                    let (k, v) = tok.split_once('=').ok_or_else(|| CacheError::Parse {
                        line: line_no,
                        msg: format!("bad header token {tok:?}"),
                    })?;
                    let perr = |m: &str| CacheError::Parse {
                        line: line_no,
                        msg: m.to_string(),
                    };
                    match k {
                        "kind" => {
                            kind = Some(match v {
                                "liso" => PolicyKind::Liso,
                                "lfa" => PolicyKind::Lfa,
                                _ => return Err(perr("unknown policy kind")),
                            })
                        }
                        "k_max" => k_max = Some(v.parse::<usize>().map_err(|_| perr("bad k_max"))?),
                        "c_max" => c_max = Some(v.parse::<f64>().map_err(|_| perr("bad c_max"))?),
                        _ => extra.push((k.to_string(), v.to_string())),
                    }
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let perr = || CacheError::Parse {
                line: line_no,
                msg: format!("expected `bin l L value`, got {line:?}"),
            };
            if f.len() != 4 {
                return Err(perr());
            }
            let bin: usize = f[0].parse().map_err(|_| perr())?;
            let l: usize = f[1].parse().map_err(|_| perr())?;
            let big_l: usize = f[2].parse().map_err(|_| perr())?;
            let v: f64 = f[3].parse().map_err(|_| perr())?;
            rows.push((line_no, bin, l, big_l, v));
        }
        let missing = |m: &str| CacheError::Parse {
            line: 1,
            msg: format!("missing {m} header"),
        };
        let mut p = Self::zeros(
            kind.ok_or_else(|| missing("kind"))?,
            k_max.ok_or_else(|| missing("k_max"))?,
            c_max.ok_or_else(|| missing("c_max"))?,
        );
        let bins = match p.kind {
            PolicyKind::Liso => 1,
            PolicyKind::Lfa => p.k_max + 1,
        };
        for (line, bin, l, big_l, v) in rows {
            if bin >= bins || l >= big_l || big_l > p.k_max {
                return Err(CacheError::Parse {
                    line,
                    msg: format!("coordinate ({bin},{l},{big_l}) out of range"),
                });
            }
            p.set(bin, l, big_l, v);
        }
        Ok((p, extra))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pair_index_is_dense() {
        let k = 6;
        let mut seen = vec![false; pair_count(k)];
        for big_l in 1..=k {
            for l in 0..big_l {
                let i = pair_index(l, big_l);
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn frequency_examples() {
        let empty = frequency_vector(&LifetimeMultiset::new(), 4, 5).unwrap();
        assert_eq!(empty.0, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let c = frequency_vector(&LifetimeMultiset::from_lifetimes([5, 5, 3]), 4, 5).unwrap();
        assert_eq!(c.0, vec![0.25, 0.0, 0.0, 0.25, 0.0, 0.5]);
        assert_eq!(
            frequency_vector(&LifetimeMultiset::from_lifetimes([6]), 4, 5),
            Err(CacheError::LifetimeOutOfRange {
                lifetime: 6,
                k_max: 5
            })
        );
    }

    #[test]
    fn threshold_basics() {
        let mut liso = ThresholdParams::zeros(PolicyKind::Liso, 4, 10.0);
        liso.set(0, 1, 3, 2.5);
        liso.set(0, 0, 4, 50.0);
        let phi = frequency_vector(&LifetimeMultiset::from_lifetimes([1]), 2, 4).unwrap();
        assert_eq!(liso.threshold(&phi, SimpleAction::new(1, 3)), 2.5);
        assert_eq!(liso.threshold(&phi, SimpleAction::new(0, 4)), 10.0);
        assert_eq!(liso.threshold(&phi, SimpleAction::new(3, 3)), 0.0);
        assert_eq!(liso.threshold(&phi, SimpleAction::new(4, 2)), 0.0);

        let mut lfa = ThresholdParams::zeros(PolicyKind::Lfa, 4, 10.0);
        lfa.set(0, 1, 3, -4.0);
        lfa.set(2, 1, 3, 7.0);
        let basis = FrequencyVector(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(lfa.threshold(&basis, SimpleAction::new(1, 3)), 0.0);
        let mixed = FrequencyVector(vec![0.5, 0.0, 0.5, 0.0, 0.0]);
        assert_eq!(lfa.threshold(&mixed, SimpleAction::new(1, 3)), 1.5);
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let mut p = ThresholdParams::zeros(PolicyKind::Lfa, 3, 7.25);
        p.set(1, 0, 2, 0.1 + 0.2);
        p.set(3, 2, 3, -1.0 / 3.0);
        let txt = p.to_text(&[("iteration", "4".into()), ("j_estimate", "0.5".into())]);
        let (q, extra) = ThresholdParams::from_text(&txt).unwrap();
        assert_eq!(p, q);
        assert_eq!(
            extra,
            vec![
                ("iteration".to_string(), "4".to_string()),
                ("j_estimate".to_string(), "0.5".to_string())
            ]
        );
        assert!(ThresholdParams::from_text("# kind=liso k_max=2 c_max=1\n0 2 1 0.5\n").is_err());
        assert!(ThresholdParams::from_text("0 0 1 0.5\n").is_err());
    }

    proptest! {
        #[test]
        fn frequency_sums_to_one(v in prop::collection::vec(1usize..=15, 0..20), extra in 0usize..10) {
            let m = LifetimeMultiset::from_lifetimes(v.clone());
            let phi = frequency_vector(&m, v.len() + extra, 15).unwrap();
            let s: f64 = phi.0.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(phi.0.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }

        #[test]
        fn constant_lfa_equals_liso(
            vals in prop::collection::vec(0.0f64..5.0, pair_count(5)),
            cache in prop::collection::vec(1usize..=5, 0..4),
            l in 0usize..5, big_l in 1usize..=5,
        ) {
            let liso = ThresholdParams::from_vec(PolicyKind::Liso, 5, 4.0, vals).unwrap();
            let lfa = ThresholdParams::lfa_from_liso(&liso);
            let phi = frequency_vector(&LifetimeMultiset::from_lifetimes(cache), 4, 5).unwrap();
            let a = SimpleAction::new(l, big_l);
            // sum of phi is 1 up to rounding, so compare with a tight tolerance
            prop_assert!((liso.threshold(&phi, a) - lfa.threshold(&phi, a)).abs() < 1e-12);
        }
    }
}
