//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the report is printed on every `cargo test`.

use std::time::{Duration, Instant};

use relaylab::af::{self, ZForm};
use relaylab::bounds;
use relaylab::cf::{self, CompressionState};
use relaylab::fading::{
    alloc_joint_opt, alloc_single_user_opt, PowerAllocation, Rayleigh, SessionSchedule,
};
use relaylab::oracle::{sample_pair, SampleConfig};
use relaylab::rate_engine::{broadcast_rate, outage_rate};
use relaylab::validate::{ks_suite, ordering_suite, Check};
use relaylab::{CoopMode, PowerConfig};

const SEED: u64 = 20_240_601;

/// Independent high-precision evaluation of the single-user broadcast rate
/// at `Ps = 1`: `e^{-1} - e^{-s0} + 2E1(s0) - 2E1(1)`, `s0 = 2/(1 + √5)`.
const BROADCAST_LB_PS1: f64 = 0.266_652_609_325_656_5;

struct Outcome {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn run(id: u32, title: &'static str, budget_s: u64, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (passed, detail) = f();
    let elapsed = t.elapsed();
    Outcome {
        id,
        title,
        passed,
        detail,
        elapsed,
        budget: Duration::from_secs(budget_s),
    }
}

fn failures(checks: &[Check]) -> Vec<&Check> {
    checks.iter().filter(|c| c.required && !c.passed).collect()
}

fn worst(checks: &[Check]) -> f64 {
    checks
        .iter()
        .filter(|c| c.required)
        .map(|c| c.value - c.limit)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn random_draws(seed: u64, n: usize) -> impl Iterator<Item = (relaylab::FadingPair, f64)> {
    (0..n).map(move |k| (sample_pair(seed, 2 * k), sample_pair(seed, 2 * k + 1).s1))
}

fn criterion_1() -> (bool, String) {
    let lb = bounds::broadcast_lb(1.0).unwrap();
    let engine = broadcast_rate(&Rayleigh, &alloc_single_user_opt(1.0).unwrap()).unwrap();
    let ok = (lb - BROADCAST_LB_PS1).abs() < 1e-6 && (engine - lb).abs() < 1e-6;
    let quoted = (lb - 0.266_610).abs();
    (
        ok,
        format!(
            "closed form {lb:.10}, engine {engine:.10}, |diff| {:.1e}; the quoted 0.266610 is off by {quoted:.1e}",
            (engine - lb).abs()
        ),
    )
}

fn criterion_2() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for ps in [0.5, 1.0, 10.0, 100.0] {
        let numeric = outage_rate(&Rayleigh, ps).unwrap().threshold;
        let w = relaylab::numerics::lambert_w0(ps).unwrap();
        worst = worst.max(rel(numeric, (ps - w) / (w * ps)));
    }
    (worst < 1e-6, format!("max relative error {worst:.2e}"))
}

fn criterion_3() -> (bool, String) {
    let exact = bounds::ergodic_capacity(2, 1.0).unwrap();
    let quad = bounds::ergodic_capacity_quadrature(2, 1.0).unwrap();
    (
        exact == 1.0 && (quad - 1.0).abs() < 1e-6,
        format!("closed form {exact:?}, quadrature {quad:.12}"),
    )
}

fn criterion_4() -> (bool, String) {
    let sc = SampleConfig::new(100_000, SEED).unwrap();
    let (checks, _) = ks_suite(&sc).unwrap();
    let max_ks = checks
        .iter()
        .filter(|c| c.required)
        .map(|c| c.value)
        .fold(0.0, f64::max);
    let bad = failures(&checks);
    let names: Vec<_> = bad.iter().map(|c| c.name.as_str()).collect();
    (
        bad.is_empty(),
        format!(
            "{} laws, max KS {max_ks:.4} (limit 0.01) {names:?}",
            checks.iter().filter(|c| c.required).count()
        ),
    )
}

fn criterion_5() -> (bool, String) {
    let (ps, pr) = (10.0, 10.0);
    let joint = alloc_joint_opt(ps).unwrap();
    let schedule = SessionSchedule::Uniform(1000);
    let mut dev: f64 = 0.0;
    for (pair, _) in random_draws(SEED, 100) {
        let (da, db) = af::discrete_session_oracle(pair, &joint, &schedule, pr).unwrap();
        let g = af::multisession_gains(pair, &joint, pr, ZForm::Limit).unwrap();
        dev = dev.max(rel(g.s_a, da)).max(rel(g.s_b, db));
    }
    let none = PowerAllocation::constant(0.0, ps).unwrap();
    let mut dev0: f64 = 0.0;
    for (pair, _) in random_draws(SEED ^ 1, 100) {
        let (lo, hi) = (pair.min(), pair.max());
        let g = af::multisession_gains(pair, &none, pr, ZForm::Limit).unwrap();
        dev0 = dev0.max((g.s_b - (hi + lo - hi / (1.0 + pr))).abs());
        dev0 = dev0.max((g.s_a - (hi + lo * pr / (1.0 + pr))).abs());
    }
    (
        dev < 0.01 && dev0 < 1e-8,
        format!("K=1000 vs continuum max rel {dev:.2e}, I=0 closed form max abs {dev0:.1e}"),
    )
}

fn criterion_6() -> (bool, String) {
    let (ps, pr) = (10.0, 10.0);
    let cfg = PowerConfig::new(ps, pr, CoopMode::NarrowBand).unwrap();
    let mut dev: f64 = 0.0;
    for (pair, u) in random_draws(SEED ^ 2, 1000) {
        let alloc = PowerAllocation::constant(-ps * (-u).exp_m1(), ps).unwrap();
        let start = CompressionState {
            sigma2_1: 1e12,
            sigma2_2: 1e12,
            ..CompressionState::initial(pair)
        };
        let s = cf::multisession_step(start, pair, &alloc, pr, pr).unwrap();
        dev = dev.max(rel(s.sigma2_2, cf::sep_sigma2(pair, &alloc, &cfg)));
        dev = dev.max(rel(
            s.sigma2_1,
            cf::sep_sigma2(pair.swapped(), &alloc, &cfg),
        ));
    }
    (
        dev < 1e-6,
        format!("max relative error {dev:.2e} over 1000 draws"),
    )
}

fn criterion_7() -> (bool, String) {
    let sc = SampleConfig::new(100_000, SEED).unwrap();
    let checks = ordering_suite(&[10.0, 20.0, 40.0], &[-6.0, 0.0], &sc).unwrap();
    let bad = failures(&checks);
    let names: Vec<_> = bad.iter().map(|c| c.name.as_str()).collect();
    (
        bad.is_empty(),
        format!(
            "{} comparisons, worst margin {:.2e} {names:?}",
            checks.len(),
            worst(&checks)
        ),
    )
}

fn criterion_8() -> (bool, String) {
    let report = relaylab::validate::validate(relaylab::validate::Level::Full, SEED).unwrap();
    let forms = serde_json::to_value(&report.forms).unwrap();
    let named = forms["sep_af_cdf"].is_string() && forms["multisession_z"].is_string();
    (
        named && report.passed,
        format!(
            "full validation {}, forms {forms}",
            if report.passed { "passed" } else { "failed" }
        ),
    )
}

fn main() {
    let outcomes = vec![
        run(
            1,
            "single-user broadcast rate, two formulas",
            1,
            criterion_1,
        ),
        run(2, "outage threshold closed form", 1, criterion_2),
        run(3, "two-antenna ergodic identity", 1, criterion_3),
        run(4, "gain laws against sampled gains", 120, criterion_4),
        run(5, "multi-session AF continuum limit", 120, criterion_5),
        run(6, "one CF session reduces to separate CF", 10, criterion_6),
        run(7, "global rate ordering", 600, criterion_7),
        run(8, "competing forms adjudicated", 600, criterion_8),
    ];
    let mut all = true;
    for o in &outcomes {
        let in_time = o.elapsed <= o.budget;
        let ok = o.passed && in_time;
        all &= ok;
        println!(
            "criterion {}: {} {} ({:.2?}, budget {:?}) {}",
            o.id,
            if ok { "PASS" } else { "FAIL" },
            o.title,
            o.elapsed,
            o.budget,
            o.detail
        );
    }
    if !all {
        eprintln!("acceptance criteria failed");
        std::process::exit(1);
    }
}
