//! Cross-checks of the closed forms against the Monte Carlo oracle, the
//! finite-session recursions and known limits, plus the global rate
//! ordering.
//!
//! Two laws have competing written forms: the separate-preprocessing AF cdf
//! integrand and the multi-session AF accumulation `Z`. Both forms are
//! tested and the report names the one the data supports.

use serde::Serialize;

use crate::af::{self, SepCdfForm, SeparateAf, ZForm};
use crate::bounds;
use crate::cf::{self, CompressionState};
use crate::fading::{
    alloc_joint_opt, alloc_single_user_opt, db_to_linear, PowerAllocation, Rayleigh,
    SessionSchedule,
};
use crate::oracle::{empirical_distribution, sample_pair, SampleConfig};
use crate::rate_engine::{broadcast_rate, outage_rate};
use crate::strategies::{evaluate, EvalOptions, RatePoint, StrategySpec};
use crate::{CoopMode, FadingPair, GainDistribution, PowerConfig, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// `10^4` samples, short session checks, ordering at one power.
    Fast,
    /// `10^5` samples, 100 pairs against 1000 sessions, full ordering grid.
    Full,
}

impl Level {
    pub fn samples(self) -> usize {
        match self {
            Level::Fast => 10_000,
            Level::Full => 100_000,
        }
    }
}

impl std::str::FromStr for Level {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            _ => Err(crate::Error::Config(format!(
                "unknown validation level `{s}` (fast, full)"
            ))),
        }
    }
}

/// One comparison, passed when `value <= limit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
    /// Informational checks (the rejected candidate forms) do not count
    /// towards the verdict.
    pub required: bool,
}

impl Check {
    fn new(suite: &'static str, name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            suite,
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
            required: true,
        }
    }

    fn informational(mut self) -> Self {
        self.required = false;
        self
    }
}

/// Which written form of each ambiguous law agreed with the oracles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormVerdict {
    pub sep_af_cdf: Option<SepCdfForm>,
    pub multisession_z: Option<ZForm>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub level: Level,
    pub n_samples: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub forms: FormVerdict,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.required && !c.passed)
    }
}

/// KS acceptance limit: `0.01`, or the 99% critical value when the sample
/// is too small for that to be meaningful.
pub fn ks_limit(n: usize) -> f64 {
    (1.63 / (n as f64).sqrt()).max(0.01)
}

struct WithForm<'a>(&'a SeparateAf, SepCdfForm);

impl GainDistribution for WithForm<'_> {
    fn cdf(&self, x: f64) -> Result<f64> {
        self.0.cdf_form(x, self.1)
    }

    fn pdf(&self, x: f64) -> Result<f64> {
        self.0.pdf(x)
    }
}

const KS_STRIDE: usize = 50;
const KS_POINTS: [(f64, f64); 2] = [(10.0, 10.0), (10.0, 2.5)];

/// KS distances of the naive AF, separate AF (joint layering, both
/// integrand forms) and naive CF laws against sampled gains, at
/// `(Ps, Pr) = (10, 10)` and `(10, 2.5)`. Returns the checks and the
/// separate-AF form that passed at every point.
pub fn ks_suite(sc: &SampleConfig) -> Result<(Vec<Check>, Option<SepCdfForm>)> {
    const S: &str = "distribution";
    let limit = ks_limit(sc.n_samples);
    let mut checks = Vec::new();
    let mut forms_ok = [true, true];
    for (ps, pr) in KS_POINTS {
        let nb = PowerConfig::new(ps, pr, CoopMode::NarrowBand)?;
        let wb = nb.with_mode(CoopMode::WideBand);
        let tag = format!("Ps={ps} Pr={pr}");

        let emp = empirical_distribution(sc, |p| Ok(af::naive_gain(p, &nb)))?;
        let ks = emp.ks_distance_strided(&af::naive_distribution(&nb)?, KS_STRIDE)?;
        checks.push(Check::new(S, format!("naive AF {tag}"), ks.upper, limit));

        let joint = alloc_joint_opt(ps)?;
        let sep = af::sep_distribution(&joint, &nb)?;
        let emp = empirical_distribution(sc, |p| Ok(af::sep_gain(p, &joint, &nb)))?;
        for (k, form) in [SepCdfForm::TwoBranch, SepCdfForm::SingleExp]
            .into_iter()
            .enumerate()
        {
            let ks = emp.ks_distance_strided(&WithForm(&sep, form), KS_STRIDE)?;
            forms_ok[k] &= ks.upper <= limit;
            let c = Check::new(S, format!("separate AF ({form:?}) {tag}"), ks.upper, limit);
            checks.push(c);
        }

        for (cfg, name) in [(nb, "naive CF narrow-band"), (wb, "naive CF wide-band")] {
            let emp = empirical_distribution(sc, |p| Ok(cf::naive_gain(p, &cfg)))?;
            let ks = emp.ks_distance_strided(&cf::naive_distribution(&cfg)?, KS_STRIDE)?;
            checks.push(Check::new(S, format!("{name} {tag}"), ks.upper, limit));
        }
    }
    let verdict = match forms_ok {
        [true, _] => Some(SepCdfForm::TwoBranch),
        [false, true] => Some(SepCdfForm::SingleExp),
        _ => None,
    };
    for c in &mut checks {
        let rejected = match verdict {
            Some(SepCdfForm::TwoBranch) => c.name.contains("SingleExp"),
            Some(SepCdfForm::SingleExp) => c.name.contains("TwoBranch"),
            None => false,
        };
        if rejected {
            c.required = false;
        }
    }
    Ok((checks, verdict))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Closed forms against the general machinery: the single-user rate
/// through the engine in both integral forms, the Lambert-W outage
/// thresholds against direct maximization, and the ergodic capacities
/// against quadrature.
pub fn analytic_suite() -> Result<Vec<Check>> {
    const S: &str = "analytic";
    let mut checks = Vec::new();
    let su = alloc_single_user_opt(1.0)?;
    let lb = bounds::broadcast_lb(1.0)?;
    let engine = broadcast_rate(&Rayleigh, &su)?;
    let closed = crate::rate_engine::broadcast_rate_closed(&Rayleigh, 1.0)?;
    checks.push(Check::new(
        S,
        "broadcast_lb(1) vs layered-rate integral",
        (engine - lb).abs(),
        1e-6,
    ));
    checks.push(Check::new(
        S,
        "broadcast_lb(1) vs optimal-layering integral",
        (closed - lb).abs(),
        1e-6,
    ));
    for ps in [0.5, 1.0, 10.0, 100.0] {
        let o = outage_rate(&Rayleigh, ps)?;
        let u = bounds::outage_threshold(ps)?;
        checks.push(Check::new(
            S,
            format!("outage threshold Ps={ps}"),
            rel(o.threshold, u),
            1e-6,
        ));
    }
    let c = bounds::ergodic_capacity(2, 1.0)?;
    checks.push(Check::new(S, "C_erg(2, 1) = 1", (c - 1.0).abs(), 0.0));
    let q = bounds::ergodic_capacity_quadrature(2, 1.0)?;
    checks.push(Check::new(
        S,
        "C_erg(2, 1) by quadrature",
        (q - 1.0).abs(),
        1e-6,
    ));
    let q1 = bounds::ergodic_capacity_quadrature(1, 1.0)?;
    checks.push(Check::new(
        S,
        "C_erg(1, 1) by quadrature",
        (q1 - bounds::ergodic_capacity(1, 1.0)?).abs(),
        1e-6,
    ));
    Ok(checks)
}

/// Draws `(pair, I)` with `I` spread over `[0, Ps]`.
fn draws(seed: u64, n: usize, ps: f64) -> impl Iterator<Item = (FadingPair, f64)> {
    (0..n).map(move |k| {
        let pair = sample_pair(seed, 2 * k);
        let u = sample_pair(seed, 2 * k + 1).s1;
        (pair, ps * (-(-u).exp_m1()))
    })
}

/// Multi-session checks:
///
/// - AF with `I ≡ 0` against `s_b = s_min + s_max Pr/(1 + Pr)` and
///   `s_a = s_max + s_min Pr/(1 + Pr)`;
/// - AF continuum against 1000 uniform sessions on `pairs` draws at
///   `Ps = Pr = 10` with the joint layering, for both `Z` forms;
/// - one CF session from a near-infinite noise variance against the
///   single-session CF variance, over 1000 draws.
pub fn session_suite(pairs: usize, seed: u64) -> Result<(Vec<Check>, Option<ZForm>)> {
    const S: &str = "sessions";
    let mut checks = Vec::new();
    let (ps, pr) = (10.0, 10.0);

    let none = PowerAllocation::constant(0.0, ps)?;
    let mut worst: f64 = 0.0;
    for (p, _) in draws(seed, 100, ps) {
        let (lo, hi) = (p.min(), p.max());
        let g = af::multisession_gains(p, &none, pr, ZForm::Limit)?;
        worst = worst.max((g.s_b - (lo + hi * pr / (1.0 + pr))).abs());
        worst = worst.max((g.s_a - (hi + lo * pr / (1.0 + pr))).abs());
    }
    checks.push(Check::new(
        S,
        "multi-session AF, I = 0 closed form",
        worst,
        1e-8,
    ));

    let joint = alloc_joint_opt(ps)?;
    let schedule = SessionSchedule::Uniform(1000);
    let mut worst = [0f64; 2];
    for (p, _) in draws(seed ^ 0x5eed, pairs, ps) {
        let (da, db) = af::discrete_session_oracle(p, &joint, &schedule, pr)?;
        for (k, form) in [ZForm::Limit, ZForm::Reduced].into_iter().enumerate() {
            let g = af::multisession_gains(p, &joint, pr, form)?;
            worst[k] = worst[k].max(rel(g.s_a, da)).max(rel(g.s_b, db));
        }
    }
    let verdict = if worst[0] <= 0.01 {
        Some(ZForm::Limit)
    } else if worst[1] <= 0.01 {
        Some(ZForm::Reduced)
    } else {
        None
    };
    for (k, form) in [ZForm::Limit, ZForm::Reduced].into_iter().enumerate() {
        let c = Check::new(
            S,
            format!("1000 AF sessions vs continuum ({form:?}), {pairs} pairs"),
            worst[k],
            0.01,
        );
        checks.push(if verdict.is_some() && verdict != Some(form) {
            c.informational()
        } else {
            c
        });
    }

    let nb = PowerConfig::new(ps, pr, CoopMode::NarrowBand)?;
    let mut worst: f64 = 0.0;
    for (p, level) in draws(seed ^ 0xcf, 1000, ps) {
        let alloc = PowerAllocation::constant(level, ps)?;
        let start = CompressionState {
            sigma2_1: 1e12,
            sigma2_2: 1e12,
            ..CompressionState::initial(p)
        };
        let s = cf::multisession_step(start, p, &alloc, pr, pr)?;
        worst = worst.max(rel(s.sigma2_2, cf::sep_sigma2(p, &alloc, &nb)));
        worst = worst.max(rel(s.sigma2_1, cf::sep_sigma2(p.swapped(), &alloc, &nb)));
    }
    checks.push(Check::new(
        S,
        "one CF session reproduces separate CF",
        worst,
        1e-6,
    ));
    Ok((checks, verdict))
}

/// Cooperative strategies held between the broadcasting bounds.
pub const COOPERATIVE: [&str; 9] = [
    "af:naive",
    "af:separate",
    "af:multisession",
    "cf:naive_nb",
    "cf:naive_wb",
    "cf:separate",
    "cf:multisession",
    "df:nb",
    "df:wb",
];

fn leq(suite: &'static str, name: String, a: &RatePoint, b: &RatePoint) -> Check {
    let se = (a.stderr.unwrap_or(0.0).powi(2) + b.stderr.unwrap_or(0.0).powi(2)).sqrt();
    let slack = 3.0 * se + 1e-9 * b.rate.abs().max(1.0);
    Check::new(suite, name, a.rate - b.rate, slack)
}

/// The rate ordering at every `(Ps dB, Pr/Ps dB)` grid point:
/// `outage_lb <= broadcast_lb <= cooperative <= broadcast_ub <= C_erg(2)`,
/// naive AF below separate AF, narrow-band naive CF above naive AF, and
/// wide-band DF with the selection layering within 5% of the strongest-user
/// bound at `Pr = Ps = 40 dB`. Monte Carlo rates get three standard errors.
pub fn ordering_suite(ps_db: &[f64], rel_db: &[f64], sc: &SampleConfig) -> Result<Vec<Check>> {
    const S: &str = "ordering";
    let opts = EvalOptions::new(*sc);
    let mut checks = Vec::new();
    for &p_db in ps_db {
        for &r_db in rel_db {
            let cfg = PowerConfig::new(
                db_to_linear(p_db),
                db_to_linear(p_db + r_db),
                CoopMode::NarrowBand,
            )?;
            let at = |name: &str| -> Result<RatePoint> {
                evaluate(&name.parse::<StrategySpec>()?, &cfg, &opts)
            };
            let tag = format!("Ps={p_db}dB Pr/Ps={r_db}dB");
            let olb = at("bound:outage_lb")?;
            let blb = at("bound:broadcast_lb")?;
            let bub = at("bound:broadcast_ub")?;
            let cap = at("bound:ergodic2")?;
            checks.push(leq(
                S,
                format!("outage_lb <= broadcast_lb, {tag}"),
                &olb,
                &blb,
            ));
            checks.push(leq(
                S,
                format!("broadcast_ub <= ergodic2, {tag}"),
                &bub,
                &cap,
            ));
            let mut rates = std::collections::HashMap::new();
            for name in COOPERATIVE {
                let r = at(name)?;
                checks.push(leq(S, format!("broadcast_lb <= {name}, {tag}"), &blb, &r));
                checks.push(leq(S, format!("{name} <= broadcast_ub, {tag}"), &r, &bub));
                rates.insert(name, r);
            }
            checks.push(leq(
                S,
                format!("af:naive <= af:separate, {tag}"),
                &rates["af:naive"],
                &rates["af:separate"],
            ));
            checks.push(leq(
                S,
                format!("af:naive <= cf:naive_nb, {tag}"),
                &rates["af:naive"],
                &rates["cf:naive_nb"],
            ));
            if p_db == 40.0 && r_db == 0.0 {
                let dfw = at("df:wb@sel")?;
                let top = at("bound:strongest")?;
                let gap = (top.rate - dfw.rate) / top.rate;
                checks.push(Check::new(
                    S,
                    format!("df:wb@sel within 5% of strongest, {tag}"),
                    gap,
                    0.05,
                ));
            }
        }
    }
    Ok(checks)
}

/// Runs every suite at the given level.
pub fn validate(level: Level, seed: u64) -> Result<ValidationReport> {
    let sc = SampleConfig::new(level.samples(), seed)?;
    let mut checks = Vec::new();
    let (ks, sep_form) = ks_suite(&sc)?;
    checks.extend(ks);
    checks.extend(analytic_suite()?);
    let pairs = match level {
        Level::Fast => 10,
        Level::Full => 100,
    };
    let (sessions, z_form) = session_suite(pairs, seed)?;
    checks.extend(sessions);
    let (grid, rel): (&[f64], &[f64]) = match level {
        Level::Fast => (&[10.0], &[-6.0, 0.0]),
        Level::Full => (&[10.0, 20.0, 40.0], &[-6.0, 0.0]),
    };
    checks.extend(ordering_suite(grid, rel, &sc)?);
    let passed =
        checks.iter().all(|c| c.passed || !c.required) && sep_form.is_some() && z_form.is_some();
    Ok(ValidationReport {
        level,
        n_samples: sc.n_samples,
        seed,
        checks,
        forms: FormVerdict {
            sep_af_cdf: sep_form,
            multisession_z: z_form,
        },
        passed,
    })
}
