//! Named strategies and a single dispatch point.
//!
//! A strategy name reads `family:variant[@alloc][+rte]`, for example
//! `af:naive`, `af:separate@joint`, `cf:multisession+rte` or `df:wb@sel`.
//! `+rte` replaces the destination's gain by the smaller of the two
//! role-swapped gains, the throughput both users can rely on.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::af::{self, SepStrategy, ZForm};
use crate::cf;
use crate::df;
use crate::fading::{
    alloc_joint_opt, alloc_selection_opt, alloc_single_user_opt, JointUpperBound, PowerAllocation,
    SessionSchedule,
};
use crate::oracle::{mc_mean, Estimate, SampleConfig};
use crate::rate_engine::{broadcast_rate, outage_rate, Outage};
use crate::{bounds, CoopMode, Error, FadingPair, PowerConfig, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bound,
    Af,
    Cf,
    Df,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Bound => "bound",
            Family::Af => "af",
            Family::Cf => "cf",
            Family::Df => "df",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    OutageLb,
    BroadcastLb,
    OutageUb,
    BroadcastUb,
    Strongest,
    Ergodic1,
    Ergodic2,
    Cutset,
    Naive,
    NaiveOutage,
    Separate,
    SeparateIter,
    Multisession,
    NaiveNb,
    NaiveWb,
    NaiveNbOutage,
    NaiveWbOutage,
    Nb,
    Wb,
}

const VARIANTS: &[(Family, Variant, &str)] = &[
    (Family::Bound, Variant::OutageLb, "outage_lb"),
    (Family::Bound, Variant::BroadcastLb, "broadcast_lb"),
    (Family::Bound, Variant::OutageUb, "outage_ub"),
    (Family::Bound, Variant::BroadcastUb, "broadcast_ub"),
    (Family::Bound, Variant::Strongest, "strongest"),
    (Family::Bound, Variant::Ergodic1, "ergodic1"),
    (Family::Bound, Variant::Ergodic2, "ergodic2"),
    (Family::Bound, Variant::Cutset, "cutset"),
    (Family::Af, Variant::Naive, "naive"),
    (Family::Af, Variant::NaiveOutage, "naive_outage"),
    (Family::Af, Variant::Separate, "separate"),
    (Family::Af, Variant::SeparateIter, "separate_iter"),
    (Family::Af, Variant::Multisession, "multisession"),
    (Family::Cf, Variant::NaiveNb, "naive_nb"),
    (Family::Cf, Variant::NaiveWb, "naive_wb"),
    (Family::Cf, Variant::NaiveNbOutage, "naive_nb_outage"),
    (Family::Cf, Variant::NaiveWbOutage, "naive_wb_outage"),
    (Family::Cf, Variant::Separate, "separate"),
    (Family::Cf, Variant::Multisession, "multisession"),
    (Family::Df, Variant::Nb, "nb"),
    (Family::Df, Variant::Wb, "wb"),
];

/// Source layerings a strategy can be pinned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocName {
    /// Single-user optimum.
    Su,
    /// Optimum for the joint decoder `s1 + s2`.
    Joint,
    /// Optimum for the stronger receiver `max(s1, s2)`.
    Sel,
    /// Optimum for the naive AF gain.
    Naf,
    /// Optimum for the naive CF gain.
    Nwz,
}

impl AllocName {
    pub fn as_str(self) -> &'static str {
        match self {
            AllocName::Su => "su",
            AllocName::Joint => "joint",
            AllocName::Sel => "sel",
            AllocName::Naf => "naf",
            AllocName::Nwz => "nwz",
        }
    }

    /// The layering at the configured powers. `naf` and `nwz` depend on
    /// the relay power and link as well.
    pub fn build(self, cfg: &PowerConfig) -> Result<PowerAllocation> {
        let ps = cfg.ps();
        match self {
            AllocName::Su => alloc_single_user_opt(ps),
            AllocName::Joint => alloc_joint_opt(ps),
            AllocName::Sel => alloc_selection_opt(ps),
            AllocName::Naf => af::naive_allocation(cfg),
            AllocName::Nwz => cf::naive_allocation(cfg),
        }
    }
}

impl FromStr for AllocName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "su" => AllocName::Su,
            "joint" => AllocName::Joint,
            "sel" => AllocName::Sel,
            "naf" => AllocName::Naf,
            "nwz" => AllocName::Nwz,
            _ => {
                return Err(Error::Config(format!(
                    "unknown allocation `{s}` (su, joint, sel, naf, nwz)"
                )))
            }
        })
    }
}

/// A parsed strategy name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StrategySpec {
    pub family: Family,
    pub variant: Variant,
    /// Explicit layering; `None` means the strategy's own default.
    pub alloc: Option<AllocName>,
    pub rte: bool,
}

impl StrategySpec {
    fn variant_name(&self) -> &'static str {
        VARIANTS
            .iter()
            .find(|(f, v, _)| *f == self.family && *v == self.variant)
            .map(|t| t.2)
            .expect("specs are built from the variant table")
    }

    fn takes_alloc(&self) -> bool {
        !matches!(
            (self.family, self.variant),
            (Family::Bound, _)
                | (
                    _,
                    Variant::NaiveOutage | Variant::NaiveNbOutage | Variant::NaiveWbOutage
                )
        ) && self.variant != Variant::SeparateIter
    }

    fn takes_rte(&self) -> bool {
        matches!(
            self.variant,
            Variant::Naive
                | Variant::Separate
                | Variant::Multisession
                | Variant::NaiveNb
                | Variant::NaiveWb
        )
    }

    /// Layering used when none is given.
    pub fn default_alloc(&self) -> Option<AllocName> {
        match (self.family, self.variant) {
            (Family::Bound, _) => None,
            (_, Variant::NaiveOutage | Variant::NaiveNbOutage | Variant::NaiveWbOutage) => None,
            (Family::Af, Variant::Multisession) | (Family::Cf, Variant::Multisession) => {
                Some(AllocName::Joint)
            }
            (Family::Af, _) => Some(AllocName::Naf),
            (Family::Cf, _) => Some(AllocName::Nwz),
            (Family::Df, _) => Some(AllocName::Sel),
        }
    }

    pub fn alloc_name(&self) -> Option<AllocName> {
        self.alloc.or_else(|| self.default_alloc())
    }

    /// Cooperation link the strategy runs on: fixed by the scheme where it
    /// needs one, otherwise the configured link.
    pub fn coop_mode(&self, configured: CoopMode) -> CoopMode {
        match (self.family, self.variant) {
            (_, Variant::Multisession)
            | (Family::Cf, Variant::NaiveWb | Variant::NaiveWbOutage) => CoopMode::WideBand,
            (Family::Df, Variant::Wb) => CoopMode::WideBand,
            (Family::Cf, Variant::NaiveNb | Variant::NaiveNbOutage) | (Family::Df, Variant::Nb) => {
                CoopMode::NarrowBand
            }
            _ => configured,
        }
    }

    /// Whether the rate is a Monte Carlo estimate.
    pub fn is_monte_carlo(&self) -> bool {
        self.rte
            || matches!(
                (self.family, self.variant),
                (Family::Af, Variant::Multisession)
                    | (Family::Cf, Variant::Separate | Variant::Multisession)
            )
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family.as_str(), self.variant_name())?;
        if let Some(a) = self.alloc {
            write!(f, "@{}", a.as_str())?;
        }
        if self.rte {
            write!(f, "+rte")?;
        }
        Ok(())
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownStrategy(s.to_string());
        let (body, rte) = match s.trim().strip_suffix("+rte") {
            Some(b) => (b, true),
            None => (s.trim(), false),
        };
        let (body, alloc) = match body.split_once('@') {
            Some((b, a)) => (b, Some(a.parse::<AllocName>()?)),
            None => (body, None),
        };
        let (family, variant) = body.split_once(':').ok_or_else(unknown)?;
        let &(family, variant, _) = VARIANTS
            .iter()
            .find(|(f, _, name)| f.as_str() == family && *name == variant)
            .ok_or_else(unknown)?;
        let spec = StrategySpec {
            family,
            variant,
            alloc,
            rte,
        };
        if alloc.is_some() && !spec.takes_alloc() {
            return Err(Error::Config(format!(
                "`{body}` does not take an allocation"
            )));
        }
        if rte && !spec.takes_rte() {
            return Err(Error::Config(format!("`{body}` has no RTE variant")));
        }
        Ok(spec)
    }
}

/// Every strategy with its default layering, RTE variants included.
pub fn registry() -> Vec<StrategySpec> {
    let mut out = Vec::new();
    for &(family, variant, _) in VARIANTS {
        let base = StrategySpec {
            family,
            variant,
            alloc: None,
            rte: false,
        };
        out.push(base);
        if base.takes_rte() {
            out.push(StrategySpec { rte: true, ..base });
        }
    }
    out
}

/// Monte Carlo and multi-session settings of an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalOptions {
    pub samples: SampleConfig,
    /// Schedule of the finite multi-session CF exchange.
    pub cf_schedule: SessionSchedule,
}

impl EvalOptions {
    pub fn new(samples: SampleConfig) -> Self {
        EvalOptions {
            samples,
            cf_schedule: SessionSchedule::Uniform(DEFAULT_CF_SESSIONS),
        }
    }
}

/// Sessions of the default uniform multi-session CF schedule.
pub const DEFAULT_CF_SESSIONS: usize = 16;

/// One evaluated strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub strategy: String,
    /// Layering used, if any.
    pub alloc: Option<String>,
    pub ps: f64,
    pub pr: f64,
    pub coop_mode: CoopMode,
    /// Average rate in nats.
    pub rate: f64,
    /// Standard error of a Monte Carlo estimate.
    pub stderr: Option<f64>,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    /// Threshold gain of an outage (single-level) strategy.
    pub threshold: Option<f64>,
    pub warnings: Vec<String>,
}

impl RatePoint {
    fn new(spec: &StrategySpec, cfg: &PowerConfig, rate: f64) -> Self {
        RatePoint {
            strategy: spec.to_string(),
            alloc: None,
            ps: cfg.ps(),
            pr: cfg.pr(),
            coop_mode: cfg.mode(),
            rate,
            stderr: None,
            n_samples: None,
            seed: None,
            threshold: None,
            warnings: Vec::new(),
        }
    }

    fn with_estimate(mut self, e: Estimate) -> Self {
        self.rate = e.mean;
        self.stderr = Some(e.stderr);
        self.n_samples = Some(e.n_samples);
        self.seed = Some(e.seed);
        self
    }

    fn with_outage(mut self, o: Outage) -> Self {
        self.rate = o.rate;
        self.threshold = Some(o.threshold);
        if o.multimodal {
            self.warnings
                .push("outage objective has several local maxima".into());
        }
        self
    }
}

/// Smaller of the two role-swapped gains.
pub fn rte_gain(base: impl Fn(FadingPair) -> f64, pair: FadingPair) -> f64 {
    base(pair).min(base(pair.swapped()))
}

/// Evaluates a strategy at the configured powers.
pub fn evaluate(spec: &StrategySpec, cfg: &PowerConfig, opts: &EvalOptions) -> Result<RatePoint> {
    let cfg = cfg.with_mode(spec.coop_mode(cfg.mode()));
    let ps = cfg.ps();
    let mut point = RatePoint::new(spec, &cfg, f64::NAN);
    let alloc = match spec.alloc_name() {
        Some(a) => Some(a.build(&cfg)?),
        None => None,
    };
    point.alloc = alloc.as_ref().map(|a| a.name().to_string());
    let sc = &opts.samples;
    let layered = |a: &PowerAllocation, gain: &(dyn Fn(FadingPair) -> Result<f64> + Sync)| {
        mc_mean(sc, |p| Ok(a.layered_rate(gain(p)?)))
    };

    if spec.rte {
        let a = alloc.as_ref().expect("RTE strategies are layered");
        let est = match (spec.family, spec.variant) {
            (Family::Af, Variant::Naive) => {
                layered(a, &|p| Ok(rte_gain(|q| af::naive_gain(q, &cfg), p)))?
            }
            (Family::Af, Variant::Separate) => {
                layered(a, &|p| Ok(rte_gain(|q| af::sep_gain(q, a, &cfg), p)))?
            }
            (Family::Af, Variant::Multisession) => layered(a, &|p| {
                Ok(af::multisession_gains(p, a, cfg.pr(), ZForm::Limit)?.s_b)
            })?,
            (Family::Cf, Variant::NaiveNb | Variant::NaiveWb) => {
                layered(a, &|p| Ok(rte_gain(|q| cf::naive_gain(q, &cfg), p)))?
            }
            (Family::Cf, Variant::Separate) => {
                layered(a, &|p| Ok(rte_gain(|q| cf::sep_gain(q, a, &cfg), p)))?
            }
            (Family::Cf, Variant::Multisession) => {
                let deltas = SessionSchedule::Explicit(opts.cf_schedule.deltas(cfg.pr())?);
                layered(a, &|p| {
                    let (sa, sb) = cf::multisession_gains(p, a, &deltas, cfg.pr())?;
                    Ok(sa.min(sb))
                })?
            }
            _ => unreachable!("parsing admits RTE only for the variants above"),
        };
        return Ok(point.with_estimate(est));
    }

    let rate = match (spec.family, spec.variant) {
        (Family::Bound, v) => match v {
            Variant::OutageLb => {
                point.threshold = Some(bounds::outage_threshold(ps)?);
                bounds::outage_lb(ps)?
            }
            Variant::BroadcastLb => bounds::broadcast_lb(ps)?,
            Variant::OutageUb => return Ok(point.with_outage(outage_rate(&JointUpperBound, ps)?)),
            Variant::BroadcastUb => bounds::broadcast_ub(ps)?,
            Variant::Strongest => bounds::strongest_user_bound(ps)?,
            Variant::Ergodic1 => bounds::ergodic_capacity(1, ps)?,
            Variant::Ergodic2 => bounds::ergodic_capacity(2, ps)?,
            Variant::Cutset => bounds::cut_set(&cfg)?,
            _ => unreachable!("bound variants only"),
        },
        (Family::Af, Variant::NaiveOutage) => {
            return Ok(point.with_outage(outage_rate(&af::naive_distribution(&cfg)?, ps)?))
        }
        (Family::Cf, Variant::NaiveNbOutage | Variant::NaiveWbOutage) => {
            return Ok(point.with_outage(outage_rate(&cf::naive_distribution(&cfg)?, ps)?))
        }
        (Family::Af, Variant::Naive) => {
            let a = alloc.as_ref().expect("layered");
            broadcast_rate(&af::naive_distribution(&cfg)?, a)?
        }
        (Family::Af, Variant::Separate) if spec.alloc.is_some() => {
            let a = alloc.as_ref().expect("layered");
            broadcast_rate(&af::sep_distribution(a, &cfg)?, a)?
        }
        (Family::Af, Variant::Separate | Variant::SeparateIter) => {
            let strategy = if spec.variant == Variant::Separate {
                SepStrategy::OneStep
            } else {
                SepStrategy::Iterative
            };
            let r = af::sep_rate(&cfg, strategy)?;
            point.alloc = Some(r.alloc.name().to_string());
            point.warnings.extend(r.warnings);
            r.rate
        }
        (Family::Af, Variant::Multisession) => {
            let a = alloc.as_ref().expect("layered");
            return Ok(point.with_estimate(af::multisession_rate(a, &cfg, sc)?));
        }
        (Family::Cf, Variant::NaiveNb | Variant::NaiveWb) => {
            let a = alloc.as_ref().expect("layered");
            broadcast_rate(&cf::naive_distribution(&cfg)?, a)?
        }
        (Family::Cf, Variant::Separate) => {
            let a = alloc.as_ref().expect("layered");
            return Ok(point.with_estimate(cf::sep_rate(a, &cfg, sc)?));
        }
        (Family::Cf, Variant::Multisession) => {
            let a = alloc.as_ref().expect("layered");
            return Ok(point.with_estimate(cf::multisession_avg_rate(
                a,
                &opts.cf_schedule,
                &cfg,
                sc,
            )?));
        }
        (Family::Df, _) => df::df_avg_rate(alloc.as_ref().expect("layered"), &cfg)?,
        _ => unreachable!("the variant table pairs families and variants"),
    };
    point.rate = rate;
    Ok(point)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(ps: f64, pr: f64) -> PowerConfig {
        PowerConfig::new(ps, pr, CoopMode::NarrowBand).unwrap()
    }

    fn opts(n: usize) -> EvalOptions {
        EvalOptions::new(SampleConfig::new(n, 5).unwrap())
    }

    #[test]
    fn names_round_trip() {
        for spec in registry() {
            let back: StrategySpec = spec.to_string().parse().unwrap();
            assert_eq!(back, spec);
        }
        let s: StrategySpec = "af:separate@joint+rte".parse().unwrap();
        assert_eq!(
            (s.family, s.variant, s.alloc, s.rte),
            (Family::Af, Variant::Separate, Some(AllocName::Joint), true)
        );
        assert_eq!(s.to_string(), "af:separate@joint+rte");
    }

    #[test]
    fn bad_names_are_config_errors() {
        for bad in [
            "af",
            "af:unknown",
            "bound:cutset+rte",
            "bound:broadcast_lb@joint",
            "cf:naive_nb@xyz",
            "zz:naive",
        ] {
            let e = bad.parse::<StrategySpec>().unwrap_err();
            assert!(e.is_config(), "{bad}");
        }
    }

    #[test]
    fn rte_example() {
        let c = PowerConfig::new(10.0, 10.0, CoopMode::NarrowBand).unwrap();
        let p = FadingPair::new(2.0, 1.0).unwrap();
        let g = rte_gain(|q| af::naive_gain(q, &c), p);
        assert!((g - (1.0 + 20.0 / 31.0)).abs() < 1e-14);
        assert!((g - 1.645_161).abs() < 1e-6);
        let same = FadingPair::new(1.5, 1.5).unwrap();
        assert_eq!(
            rte_gain(|q| af::naive_gain(q, &c), same),
            af::naive_gain(same, &c)
        );
    }

    #[test]
    fn bound_points() {
        let p = evaluate(
            &"bound:broadcast_lb".parse().unwrap(),
            &cfg(1.0, 1.0),
            &opts(10),
        )
        .unwrap();
        assert!((p.rate - 0.266_652_609_325_656_5).abs() < 1e-13);
        assert!(p.stderr.is_none() && p.alloc.is_none());
        let o = evaluate(
            &"bound:outage_lb".parse().unwrap(),
            &cfg(1.0, 1.0),
            &opts(10),
        )
        .unwrap();
        assert!(o.threshold.is_some());
    }

    #[test]
    fn outage_points_carry_thresholds() {
        let p = evaluate(
            &"cf:naive_nb_outage".parse().unwrap(),
            &cfg(10.0, 10.0),
            &opts(10),
        )
        .unwrap();
        assert!(p.threshold.unwrap() > 0.0 && p.rate > 0.0);
        assert_eq!(p.coop_mode, CoopMode::NarrowBand);
    }

    #[test]
    fn vanishing_relay_is_single_user() {
        let lb = bounds::broadcast_lb(10.0).unwrap();
        let p = evaluate(&"af:naive".parse().unwrap(), &cfg(10.0, 0.0), &opts(10)).unwrap();
        assert!((p.rate - lb).abs() < 1e-6);
    }

    #[test]
    fn rte_never_beats_the_destination_gain() {
        let c = cfg(10.0, 10.0);
        let o = opts(20_000);
        for name in [
            "af:naive",
            "af:separate@joint",
            "cf:naive_nb",
            "cf:separate",
            "af:multisession",
            "cf:multisession",
        ] {
            let base: StrategySpec = name.parse().unwrap();
            let rte = StrategySpec { rte: true, ..base };
            let b = evaluate(&base, &c, &o).unwrap();
            let r = evaluate(&rte, &c, &o).unwrap();
            let slack = 3.0 * (b.stderr.unwrap_or(0.0).powi(2) + r.stderr.unwrap().powi(2)).sqrt();
            assert!(r.rate <= b.rate + slack, "{name}: {} {}", r.rate, b.rate);
        }
    }

    #[test]
    fn registry_respects_the_bounds() {
        let c = PowerConfig::new(10.0, 10.0, CoopMode::NarrowBand).unwrap();
        let o = opts(20_000);
        let olb = bounds::outage_lb(10.0).unwrap();
        let bub = bounds::broadcast_ub(10.0).unwrap();
        let cap = bounds::ergodic_capacity(2, 10.0).unwrap();
        for spec in registry() {
            let p = evaluate(&spec, &c, &o).unwrap();
            let slack = 3.0 * p.stderr.unwrap_or(0.0);
            assert!(p.rate.is_finite(), "{spec}");
            if spec.family != Family::Bound {
                assert!(
                    p.rate + slack >= olb && p.rate - slack <= bub,
                    "{spec}: {}",
                    p.rate
                );
            } else {
                assert!(p.rate <= cap + 1e-12, "{spec}");
            }
        }
    }
}
