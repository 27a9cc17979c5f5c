//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Failures are reported but do not change the exit status unless
//! `ACCEPTANCE_STRICT=1` is set.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::Rng;

use proactive_cache::bounds::{lbnck_thresholds, lbuc_thresholds_irm, ChannelStats};
use proactive_cache::content_model::{
    step, validate_action, Action, LifetimeMultiset, SystemState,
};
use proactive_cache::experiment::{
    paired_difference, Context, EvalResult, ExperimentConfig, Scenario, Scheme,
};
use proactive_cache::pg::{
    dp_oracle, exact_expected_cost, lrm_baseline, lrm_samples, rollout_cost, tiny_instance_family,
    TinyInstance,
};
use proactive_cache::policy::{
    frequency_vector, grad_log_prob, prefix_probabilities, select_action_randomized, Policy,
    PolicyKind, ThresholdParams,
};
use proactive_cache::seed::{rng_for, SimRng};
use proactive_cache::stats::mean_stderr;

struct Report {
    results: Vec<(String, bool)>,
}

impl Report {
    fn record(&mut self, id: &str, ok: bool, detail: String) {
        println!(
            "{} criterion {id}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
        self.results.push((id.to_string(), ok));
    }
}

type PointResults = HashMap<Scheme, EvalResult>;

fn run_point(cfg: &ExperimentConfig, schemes: &[Scheme]) -> PointResults {
    let ctx = Context::new(cfg).expect("valid configuration");
    schemes
        .iter()
        .map(|&s| (s, ctx.eval_scheme(s).expect("scheme evaluates").0))
        .collect()
}

/// `a <= b` up to two standard errors of the difference of the means.
fn le_2se(a: &EvalResult, b: &EvalResult) -> bool {
    a.mean <= b.mean + 2.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

fn criterion_1(r: &mut Report) {
    let start = Instant::now();
    let u = ChannelStats::Uniform { lo: 0.0, hi: 1.0 };
    let uc = lbuc_thresholds_irm(&u, 3, 0.25);
    let nck = lbnck_thresholds(&u, 2);
    let elapsed = start.elapsed();
    let ok = (uc.by_lifetime[1] - 0.125).abs() <= 1e-4
        && (uc.by_lifetime[2] - 0.21289).abs() <= 1e-4
        && (nck.by_gap[1] - 0.375).abs() <= 1e-4
        && elapsed < Duration::from_secs(1);
    r.record(
        "1",
        ok,
        format!(
            "UC T2={:.6} T3={:.6}, NCK T2={:.6} (targets 0.125, 0.21289, 0.375 +-1e-4) in {elapsed:.1?}",
            uc.by_lifetime[1], uc.by_lifetime[2], nck.by_gap[1]
        ),
    );
}

fn criteria_2_3_4(r: &mut Report) -> PointResults {
    let start = Instant::now();
    let base = ExperimentConfig::default();
    let mut points: Vec<(usize, PointResults)> = Vec::new();
    for b in [0usize, 10, 20, 30, 40, 50] {
        let cfg = ExperimentConfig {
            capacity: b,
            ..base.clone()
        };
        points.push((b, run_point(&cfg, &Scheme::ALL)));
    }
    let elapsed = start.elapsed();
    let at = |b: usize| &points.iter().find(|p| p.0 == b).expect("swept").1;

    let b30 = at(30);
    let reduction = 1.0 - b30[&Scheme::LisoFdm].mean / b30[&Scheme::Reactive].mean;
    let mut near_uc = Vec::new();
    for b in [40, 50] {
        let p = at(b);
        near_uc.push((b, p[&Scheme::LisoFdm].mean / p[&Scheme::LbUc].mean - 1.0));
    }
    let ok = reduction >= 0.45
        && near_uc.iter().all(|x| x.1 <= 0.10)
        && elapsed <= Duration::from_secs(1800);
    r.record(
        "2",
        ok,
        format!(
            "B=30 LISO-FDM saves {:.1}% vs reactive (>= 45%); LISO-FDM above LB-UC by {} (<= 10%); sweep took {elapsed:.0?}",
            100.0 * reduction,
            near_uc.iter().map(|(b, g)| format!("B={b}: {:.2}%", 100.0 * g)).collect::<Vec<_>>().join(", ")
        ),
    );

    let mut bad = Vec::new();
    for b in [0usize, 10, 20, 30, 40] {
        let p = at(b);
        for t in Scheme::TRAINED {
            if !le_2se(&p[&Scheme::LbNck], &p[&t]) {
                bad.push(format!("B={b} lb_nck > {}", t.name()));
            }
            if !le_2se(&p[&t], &p[&Scheme::Reactive]) {
                bad.push(format!("B={b} {} > reactive", t.name()));
            }
        }
        if !le_2se(&p[&Scheme::Reactive], &p[&Scheme::Random]) {
            bad.push(format!("B={b} reactive > random"));
        }
    }
    let b0 = at(0);
    let nck_gap = (b0[&Scheme::LbNck].mean / b0[&Scheme::Reactive].mean - 1.0).abs();
    r.record(
        "3",
        bad.is_empty() && nck_gap <= 0.01,
        format!(
            "ordering LB-NCK <= trained <= reactive <= random at B in {{0,10,20,30,40}}: {}; B=0 LB-NCK vs reactive {:.3}%",
            if bad.is_empty() { "holds".to_string() } else { bad.join("; ") },
            100.0 * nck_gap
        ),
    );

    let b20 = at(20);
    let (d, se) = paired_difference(&b20[&Scheme::LisoFdm], &b20[&Scheme::LfaLrm]);
    let lower = d - 1.645 * se;
    r.record(
        "4",
        lower > 0.0,
        format!(
            "B=20 LISO-FDM {:.4} vs LFA-LRM {:.4} mW: gap {:.4} +- {:.4} (paired), one-sided 95% lower bound {:.4} (> 0)",
            b20[&Scheme::LisoFdm].mean,
            b20[&Scheme::LfaLrm].mean,
            d,
            se,
            lower
        ),
    );
    at(20).clone()
}

fn random_state(rng: &mut SimRng, k: usize, capacity: usize) -> SystemState {
    let n_in = rng.random_range(0..=capacity);
    let n_out = rng.random_range(0..=12);
    let inside: LifetimeMultiset = (0..n_in).map(|_| rng.random_range(1..=k)).collect();
    let outside: LifetimeMultiset = (0..n_out).map(|_| rng.random_range(1..=k)).collect();
    SystemState::new(outside, inside, 1, false)
}

fn random_params(rng: &mut SimRng, kind: PolicyKind, k: usize, c_max: f64) -> ThresholdParams {
    let mut p = ThresholdParams::zeros(kind, k, c_max);
    let v: Vec<f64> = (0..p.dim())
        .map(|_| rng.random_range(0.05 * c_max..0.95 * c_max))
        .collect();
    p.set_vec(&v);
    p
}

fn log_prob_of_prefix(
    state: &SystemState,
    cost: f64,
    p: &ThresholdParams,
    eta: f64,
    cap: usize,
    accepted: usize,
) -> f64 {
    prefix_probabilities(state, cost, p, eta, cap)[accepted].ln()
}

fn criterion_5(r: &mut Report) {
    // score function against central differences of the composite-action log-probability
    let mut rng = rng_for(5, &[1]);
    let mut worst = 0.0f64;
    let mut informative = 0;
    for i in 0..1000 {
        let k = rng.random_range(2..=6);
        let cap = rng.random_range(1..=6);
        let c_max = 4.0;
        let kind = if i % 2 == 0 {
            PolicyKind::Liso
        } else {
            PolicyKind::Lfa
        };
        let params = random_params(&mut rng, kind, k, c_max);
        let state = random_state(&mut rng, k, cap);
        let eta = rng.random_range(0.5..5.0);
        let cost = rng.random_range(0.0..c_max);
        let (action, log) = select_action_randomized(&state, cost, &params, eta, cap, &mut rng);
        let accepted = action.download.size();
        let g = grad_log_prob(&log, &params, eta);
        let h = 1e-5;
        let mut err = 0.0f64;
        let scale = g.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for j in 0..params.dim() {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let mut v = params.as_slice().to_vec();
            v[j] += h;
            plus.set_vec(&v);
            v[j] -= 2.0 * h;
            minus.set_vec(&v);
            let fd = (log_prob_of_prefix(&state, cost, &plus, eta, cap, accepted)
                - log_prob_of_prefix(&state, cost, &minus, eta, cap, accepted))
                / (2.0 * h);
            err = err.max((fd - g[j]).abs() / scale);
        }
        if !log.trials.is_empty() {
            informative += 1;
        }
        worst = worst.max(err);
    }
    let ok_a = worst <= 1e-6;

    // likelihood-ratio estimate against the enumerated gradient on a tiny instance
    let inst = TinyInstance {
        m_max: 2,
        lifetime_support: vec![2, 3],
        capacity: 2,
        p_a: 0.3,
        levels: vec![0.5, 1.0, 2.0, 4.0, 8.0],
        probs: vec![0.2; 5],
    };
    let (eta, horizon, n) = (1.0, 5, 10_000);
    let mut params = ThresholdParams::zeros(PolicyKind::Liso, 3, 8.0);
    params.set_vec(&[0.8, 1.5, 0.9, 2.5, 1.2, 0.7]);
    let exact: Vec<f64> = (0..params.dim())
        .map(|j| {
            let h = 1e-4;
            let mut v = params.as_slice().to_vec();
            let mut q = params.clone();
            v[j] += h;
            q.set_vec(&v);
            let up = exact_expected_cost(&inst, &q, eta, horizon).expect("tiny instance");
            v[j] -= 2.0 * h;
            q.set_vec(&v);
            let down = exact_expected_cost(&inst, &q, eta, horizon).expect("tiny instance");
            (up - down) / (2.0 * h)
        })
        .collect();
    let env = inst.environment();
    let samples = lrm_samples(&env, &params, eta, n, horizon, 51).expect("samples");
    let b = lrm_baseline(&samples);
    let mut z_max = 0.0f64;
    for (j, ex) in exact.iter().enumerate() {
        let terms: Vec<f64> = samples
            .iter()
            .map(|(cost, g)| g[j] * (cost - b[j]))
            .collect();
        let (m, se) = mean_stderr(&terms);
        let z = if se > 0.0 {
            (m - ex).abs() / se
        } else if (m - ex).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        z_max = z_max.max(z);
    }
    let ok_b = z_max <= 3.0;

    // the baseline term has zero mean when the baseline comes from another batch
    let other = lrm_samples(&env, &params, eta, n, horizon, 52).expect("samples");
    let b_ind = lrm_baseline(&other);
    let mut zb = 0.0f64;
    for (j, bj) in b_ind.iter().enumerate() {
        let terms: Vec<f64> = samples.iter().map(|(_, g)| g[j] * bj).collect();
        let (m, se) = mean_stderr(&terms);
        if se > 0.0 {
            zb = zb.max(m.abs() / se);
        }
    }
    let ok_c = zb <= 3.0;
    r.record(
        "5",
        ok_a && ok_b && ok_c,
        format!(
            "score vs finite differences on 1000 states ({informative} with trials): max rel err {worst:.2e} (<= 1e-6); \
             LRM vs enumerated gradient max |z| {z_max:.2} (<= 3, n={n}); baseline term max |z| {zb:.2} (<= 3)"
        ),
    );
}

fn criterion_6(r: &mut Report) {
    let start = Instant::now();
    let family = tiny_instance_family();
    let (mut thr, mut ord, mut pairs) = (0, 0, 0);
    let mut failed = 0;
    for inst in &family {
        match dp_oracle(inst, 200_000, 1e-10) {
            Ok(sol) => {
                thr += sol.threshold_violations().len();
                let (bad, n) = sol.order_violations(1e-7);
                ord += bad.len();
                pairs += n;
            }
            Err(_) => failed += 1,
        }
    }
    let elapsed = start.elapsed();
    r.record(
        "6",
        failed == 0 && thr == 0 && ord == 0 && elapsed < Duration::from_secs(300),
        format!(
            "{} instances solved ({failed} unsolved): {thr} threshold violations, {ord} order violations over {pairs} comparable pairs, {elapsed:.1?}",
            family.len()
        ),
    );
}

fn run_property<F>(name: &str, cases: u32, f: F) -> Result<(), String>
where
    F: Fn(u64) -> Result<(), TestCaseError>,
{
    let mut runner = TestRunner::new(PropConfig {
        cases,
        failure_persistence: None,
        ..PropConfig::default()
    });
    runner
        .run(&any::<u64>(), f)
        .map_err(|e| format!("{name}: {e}"))
}

type Property = Box<dyn Fn(u64) -> Result<(), TestCaseError>>;

fn criterion_7(r: &mut Report) {
    let cases = 100_000;
    let k = 6;
    let mut errors = Vec::new();
    let props: Vec<(&str, Property)> = vec![
        (
            "multiset conservation",
            Box::new(move |seed| {
                let mut rng = rng_for(seed, &[]);
                let cap = rng.random_range(0..=5);
                let s = random_state(&mut rng, k, cap);
                let params = random_params(&mut rng, PolicyKind::Liso, k, 3.0);
                let a = select_action_deterministic_any(&s, &params, cap, &mut rng);
                let arrivals: LifetimeMultiset = (0..rng.random_range(0..4))
                    .map(|_| rng.random_range(1..=k))
                    .collect();
                let next = step(&s, &a, cap, rng.random_bool(0.3), &arrivals)
                    .map_err(|e| TestCaseError::fail(e.to_string()))?;
                let expected = s.outside.union(&s.inside).decrement().union(&arrivals);
                prop_assert_eq!(next.outside.union(&next.inside), expected);
                Ok(())
            }),
        ),
        (
            "capacity invariance",
            Box::new(move |seed| {
                let mut rng = rng_for(seed, &[]);
                let cap = rng.random_range(0..=5);
                let s = random_state(&mut rng, k, cap);
                let params = random_params(&mut rng, PolicyKind::Lfa, k, 3.0);
                let policy = Policy::Randomized { params, eta: 2.0 };
                let a = policy.act(&s, rng.random_range(0.0..3.0), cap, &mut rng);
                prop_assert!(validate_action(&s, &a, cap).is_ok());
                let next = step(&s, &a, cap, false, &LifetimeMultiset::new())
                    .map_err(|e| TestCaseError::fail(e.to_string()))?;
                prop_assert!(next.inside.size() <= cap);
                let mut over = Action::none();
                for l in s.outside.iter_descending().take(cap + 1 - s.inside.size()) {
                    over.download.insert(l);
                }
                if s.outside.size() > cap - s.inside.size() {
                    prop_assert!(validate_action(&s, &over, cap).is_err());
                }
                Ok(())
            }),
        ),
        (
            "seed determinism",
            Box::new(move |seed| {
                let env = ExperimentConfig {
                    capacity: 4,
                    k_max: 10,
                    m_max: 3,
                    ..Default::default()
                }
                .environment()
                .unwrap();
                let t1 = env.sample_trace(12, &mut rng_for(seed, &[1])).unwrap();
                let t2 = env.sample_trace(12, &mut rng_for(seed, &[1])).unwrap();
                prop_assert_eq!(&t1, &t2);
                let policy = Policy::RandomCache { p_r: 0.5 };
                let a = rollout_cost(&env, &policy, &t1, &mut rng_for(seed, &[2]));
                let b = rollout_cost(&env, &policy, &t2, &mut rng_for(seed, &[2]));
                prop_assert_eq!(a.to_bits(), b.to_bits());
                Ok(())
            }),
        ),
        (
            "frequency-vector normalization",
            Box::new(move |seed| {
                let mut rng = rng_for(seed, &[]);
                let cap = rng.random_range(0..=8);
                let s = random_state(&mut rng, k, cap);
                let phi = frequency_vector(&s.inside, cap, k).unwrap();
                prop_assert!((phi.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(phi.0.iter().all(|&x| x >= 0.0));
                Ok(())
            }),
        ),
        (
            "composite-action probability normalization",
            Box::new(move |seed| {
                let mut rng = rng_for(seed, &[]);
                let cap = rng.random_range(0..=6);
                let s = random_state(&mut rng, k, cap);
                let kind = if rng.random_bool(0.5) {
                    PolicyKind::Liso
                } else {
                    PolicyKind::Lfa
                };
                let params = random_params(&mut rng, kind, k, 3.0);
                let probs = prefix_probabilities(
                    &s,
                    rng.random_range(0.0..3.0),
                    &params,
                    rng.random_range(0.1..20.0),
                    cap,
                );
                prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
                Ok(())
            }),
        ),
    ];
    let start = Instant::now();
    for (name, f) in &props {
        if let Err(e) = run_property(name, cases, f) {
            errors.push(e);
        }
    }
    r.record(
        "7",
        errors.is_empty(),
        format!(
            "{} properties x {cases} cases ({}) in {:.1?}{}",
            props.len(),
            props.iter().map(|p| p.0).collect::<Vec<_>>().join(", "),
            start.elapsed(),
            if errors.is_empty() {
                String::new()
            } else {
                format!(": {}", errors.join("; "))
            }
        ),
    );
}

/// Greedy legal action: downloads while there is room, discarding nothing.
fn select_action_deterministic_any(
    s: &SystemState,
    p: &ThresholdParams,
    cap: usize,
    rng: &mut SimRng,
) -> Action {
    proactive_cache::policy::select_action_deterministic(
        s,
        rng.random_range(0.0..p.c_max()),
        p,
        cap,
    )
}

fn criterion_8(r: &mut Report, iid_b20: &PointResults) {
    let grid = [0.1, 0.5, 0.9];
    let schemes = [Scheme::LisoLrm, Scheme::LfaLrm];
    let base = ExperimentConfig {
        scenario: Scenario::Memory,
        capacity: 20,
        ..Default::default()
    };
    let mut res: HashMap<(usize, usize), PointResults> = HashMap::new();
    for (i, &p1) in grid.iter().enumerate() {
        for (j, &p2) in grid.iter().enumerate() {
            res.insert(
                (i, j),
                run_point(
                    &ExperimentConfig {
                        p1,
                        p2,
                        ..base.clone()
                    },
                    &schemes,
                ),
            );
        }
    }
    let mut bad = Vec::new();
    for s in schemes {
        for a in 0..3 {
            for b in 0..2 {
                // increasing in p2 at fixed p1
                if !le_2se(&res[&(a, b)][&s], &res[&(a, b + 1)][&s]) {
                    bad.push(format!(
                        "{} p1={} p2 {}->{}",
                        s.name(),
                        grid[a],
                        grid[b],
                        grid[b + 1]
                    ));
                }
                // decreasing in p1 at fixed p2
                if !le_2se(&res[&(b + 1, a)][&s], &res[&(b, a)][&s]) {
                    bad.push(format!(
                        "{} p2={} p1 {}->{}",
                        s.name(),
                        grid[a],
                        grid[b],
                        grid[b + 1]
                    ));
                }
            }
        }
    }
    let gain = |p: &PointResults| 1.0 - p[&Scheme::LfaLrm].mean / p[&Scheme::LisoLrm].mean;
    let memory_gain = res.values().map(gain).sum::<f64>() / res.len() as f64;
    let iid_gain = gain(iid_b20);
    r.record(
        "8",
        bad.is_empty() && memory_gain > iid_gain,
        format!(
            "memory-scenario cost monotone in p1, p2: {}; LFA gain over LISO (LRM, B=20) {:.3}% with memory vs {:.3}% iid",
            if bad.is_empty() { "yes".to_string() } else { bad.join("; ") },
            100.0 * memory_gain,
            100.0 * iid_gain
        ),
    );
}

fn main() {
    let start = Instant::now();
    let mut report = Report {
        results: Vec::new(),
    };
    criterion_1(&mut report);
    let b20 = criteria_2_3_4(&mut report);
    criterion_5(&mut report);
    criterion_6(&mut report);
    criterion_7(&mut report);
    criterion_8(&mut report, &b20);
    let failed: Vec<&str> = report
        .results
        .iter()
        .filter(|r| !r.1)
        .map(|r| r.0.as_str())
        .collect();
    println!(
        "acceptance: {}/{} criteria passed in {:.0?}{}",
        report.results.len() - failed.len(),
        report.results.len(),
        start.elapsed(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" (failed: {})", failed.join(", "))
        }
    );
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
