//! Wyner-Ziv compress-and-forward cooperation.
//!
//! The helper sends a compressed description of its received signal, using
//! the destination's own observation as side information. The compression
//! noise variance is set so the description just fits the cooperation link.
//! On the wide-band link the capacity is `Pr` instead of `ln(1 + Pr)`, which
//! acts on every expression below as the relay power `e^{Pr} - 1`.

use serde::Serialize;

use crate::fading::{JointUpperBound, PowerAllocation, Rayleigh, SessionSchedule};
use crate::numerics::{exp_e1_scaled, Quadrature};
use crate::oracle::{mc_mean, Estimate, SampleConfig};
use crate::rate_engine::{broadcast_rate, optimal_allocation, outage_rate, Outage};
use crate::{CoopMode, Error, FadingPair, GainDistribution, PowerConfig, Result};

const DIST_TOL: f64 = 1e-11;

/// Compression noise variance of naive CF, user 1 describing its signal to
/// user 2: `(1 + s1 Ps + s2 Ps) / (P (1 + s2 Ps))` with `P` the effective
/// relay power.
pub fn naive_sigma2(pair: FadingPair, cfg: &PowerConfig) -> f64 {
    let ps = cfg.ps();
    let p = cfg.effective_relay_power();
    (1.0 + pair.s1 * ps + pair.s2 * ps) / (p * (1.0 + pair.s2 * ps))
}

/// Equivalent gain of naive CF, `s2 + s1 / (1 + sigma^2)`.
///
/// The letters follow the closed-form law: user 2 decodes with user 1's
/// description. The law is symmetric in the two users.
pub fn naive_gain(pair: FadingPair, cfg: &PowerConfig) -> f64 {
    pair.s2 + pair.s1 / (1.0 + naive_sigma2(pair, cfg))
}

/// Law of the naive CF gain `v + g(s1)` with `v = s2` and
/// `g(s1) = s1 A / (B + s1 Ps)`, `A = P (1 + v Ps)`, `B = (1 + P)(1 + v Ps)`.
///
/// The cdf is in closed form with `E1`. With `T(v, w) = w B / (A - w Ps)`
/// the inverse of `g` (infinite once `w Ps >= A`):
///
/// ```text
/// F(u) = ∫_0^u e^{-v} (1 - e^{-T(v, u - v)}) dv
/// f(u) = ∫_0^u e^{-v - T} T_w dv
/// ```
#[derive(Debug, Clone, Copy)]
pub struct NaiveCf {
    ps: f64,
    p: f64,
}

impl NaiveCf {
    /// `(T, T_w, T_ww)` at `(v, w)`, `None` where `T` is infinite.
    fn inverse(&self, v: f64, w: f64) -> Option<(f64, f64, f64)> {
        let c = 1.0 + v * self.ps;
        let (a, b) = (self.p * c, (1.0 + self.p) * c);
        let d = a - w * self.ps;
        if d <= 0.0 {
            return None;
        }
        let tw = a * b / (d * d);
        Some((w * b / d, tw, 2.0 * self.ps * tw / d))
    }

    /// Smallest `v` at which `T(v, u - v)` is finite.
    fn v_star(&self, u: f64) -> f64 {
        ((u * self.ps - self.p) / (self.ps * (1.0 + self.p))).max(0.0)
    }

    fn quadrature(&self, u: f64) -> Quadrature {
        Quadrature::new(DIST_TOL)
            .rel_tol(1e-10)
            .max_intervals(20_000)
            .breakpoints([self.v_star(u)])
    }

    /// The cdf by quadrature of its defining integral.
    pub fn cdf_quadrature(&self, u: f64) -> Result<f64> {
        let u = check_u("naive CF cdf", u)?;
        if let Some(d) = self.degenerate() {
            return d.cdf(u);
        }
        self.quadrature(u).integrate(
            |v| {
                let tail = self.inverse(v, u - v).map_or(0.0, |(t, _, _)| (-t).exp());
                (-v).exp() * (1.0 - tail)
            },
            0.0,
            u,
        )
    }

    fn degenerate(&self) -> Option<&'static dyn GainDistribution> {
        if self.p == 0.0 {
            Some(&Rayleigh)
        } else if self.p.is_infinite() {
            Some(&JointUpperBound)
        } else {
            None
        }
    }
}

fn check_u(what: &'static str, u: f64) -> Result<f64> {
    if u >= 0.0 {
        Ok(u)
    } else {
        Err(Error::Domain { what, value: u })
    }
}

impl GainDistribution for NaiveCf {
    /// With `a = (u Ps + 1) / (Ps (1 + P))` and
    /// `c = P (u Ps + 1)^2 / (Ps^2 (1 + P)^2)`, for `u >= P/Ps`
    ///
    /// ```text
    /// F(u) = 1 - e^{-u} (1 + P (u Ps + 1) / (Ps (1 + P))) + c e^{a - u} E1(a)
    /// ```
    ///
    /// and below `P/Ps`, with `b = P (u Ps + 1)^2 / (Ps (1 + P)(P - u Ps))`,
    ///
    /// ```text
    /// F(u) = 1 - e^{-u} (1 + P (u Ps + 1) / (Ps (1 + P)))
    ///        + (P - u Ps) / ((1 + P) Ps) e^{-u (1 + P) / (P - u Ps)}
    ///        + c e^{a - u} (E1(a) - E1(b))
    /// ```
    fn cdf(&self, u: f64) -> Result<f64> {
        let u = check_u("naive CF cdf", u)?;
        if let Some(d) = self.degenerate() {
            return d.cdf(u);
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        let (ps, p) = (self.ps, self.p);
        let q = u * ps + 1.0;
        let a = q / (ps * (1.0 + p));
        let c = p * q * q / (ps * ps * (1.0 + p) * (1.0 + p));
        let head = -(-u).exp_m1() - (-u).exp() * p * q / (ps * (1.0 + p));
        let mut f = head + c * (-u).exp() * exp_e1_scaled(a)?;
        let gap = p - u * ps;
        if gap > 0.0 {
            let b = p * q * q / (ps * (1.0 + p) * gap);
            f += gap / ((1.0 + p) * ps) * (-u * (1.0 + p) / gap).exp();
            f -= c * (a - u - b).exp() * exp_e1_scaled(b)?;
        }
        Ok(f.clamp(0.0, 1.0))
    }

    fn pdf(&self, u: f64) -> Result<f64> {
        let u = check_u("naive CF pdf", u)?;
        if let Some(d) = self.degenerate() {
            return d.pdf(u);
        }
        self.quadrature(u).integrate(
            |v| match self.inverse(v, u - v) {
                Some((t, tw, _)) if t < 745.0 => (-v - t).exp() * tw,
                _ => 0.0,
            },
            0.0,
            u,
        )
    }

    fn pdf_derivative(&self, u: f64) -> Result<f64> {
        let u = check_u("naive CF pdf", u)?;
        if let Some(d) = self.degenerate() {
            return d.pdf_derivative(u);
        }
        let boundary = (-u).exp() * (1.0 + self.p) / self.p;
        let inner = self.quadrature(u).integrate(
            |v| match self.inverse(v, u - v) {
                Some((t, tw, tww)) if t < 745.0 => (-v - t).exp() * (tww - tw * tw),
                _ => 0.0,
            },
            0.0,
            u,
        )?;
        Ok(boundary + inner)
    }

    fn kinks(&self) -> Vec<f64> {
        if self.p > 0.0 && self.p.is_finite() {
            vec![self.p / self.ps]
        } else {
            Vec::new()
        }
    }
}

/// Naive CF gain law for the configured powers and link.
pub fn naive_distribution(cfg: &PowerConfig) -> Result<NaiveCf> {
    Ok(NaiveCf {
        ps: cfg.ps(),
        p: cfg.effective_relay_power(),
    })
}

/// Optimal layering for the naive CF gain.
pub fn naive_allocation(cfg: &PowerConfig) -> Result<PowerAllocation> {
    Ok(optimal_allocation(&naive_distribution(cfg)?, cfg.ps())?.with_name("nwz"))
}

#[derive(Debug, Clone)]
pub struct NaiveRates {
    pub outage: Outage,
    pub broadcast: f64,
    pub alloc: PowerAllocation,
}

/// Single-level and optimally layered rates of naive CF.
pub fn naive_rates(cfg: &PowerConfig) -> Result<NaiveRates> {
    let dist = naive_distribution(cfg)?;
    let outage = outage_rate(&dist, cfg.ps())?;
    let alloc = naive_allocation(cfg)?;
    let broadcast = broadcast_rate(&dist, &alloc)?;
    Ok(NaiveRates {
        outage,
        broadcast,
        alloc,
    })
}

/// Compression noise of user 2's description to the destination after
/// both users strip the layers decodable at `min(s1, s2)`:
/// `(1 + s2 I + s1 I) / (P (1 + s1 I))`, `I = I(min(s1, s2))`.
pub fn sep_sigma2(pair: FadingPair, alloc: &PowerAllocation, cfg: &PowerConfig) -> f64 {
    let i = alloc.interference(pair.min());
    (1.0 + pair.s2 * i + pair.s1 * i) / (cfg.effective_relay_power() * (1.0 + pair.s1 * i))
}

/// Destination gain of CF with separate preprocessing,
/// `s1 + s2 / (1 + sigma^2)`.
pub fn sep_gain(pair: FadingPair, alloc: &PowerAllocation, cfg: &PowerConfig) -> f64 {
    pair.s1 + pair.s2 / (1.0 + sep_sigma2(pair, alloc, cfg))
}

/// Monte Carlo average layered rate of CF with separate preprocessing.
pub fn sep_rate(alloc: &PowerAllocation, cfg: &PowerConfig, sc: &SampleConfig) -> Result<Estimate> {
    mc_mean(sc, |p| Ok(alloc.layered_rate(sep_gain(p, alloc, cfg))))
}

/// Compression state of the successive-refinement exchange.
///
/// `sigma2_1` is the noise of user 1's accumulated description as seen by
/// user 2, `sigma2_2` the reverse. Both start infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompressionState {
    pub sigma2_1: f64,
    pub sigma2_2: f64,
    /// Sessions completed.
    pub session: usize,
    /// Highest layer decoded by both users, whose signal is stripped before
    /// the next session.
    pub s_common: f64,
}

impl CompressionState {
    pub fn initial(pair: FadingPair) -> Self {
        CompressionState {
            sigma2_1: f64::INFINITY,
            sigma2_2: f64::INFINITY,
            session: 0,
            s_common: pair.min(),
        }
    }

    /// `(s_a, s_b)`: user 1's gain `s1 + s2 / (1 + sigma2_2)` and user 2's
    /// gain `s2 + s1 / (1 + sigma2_1)`.
    pub fn gains(&self, pair: FadingPair) -> (f64, f64) {
        (
            pair.s1 + pair.s2 / (1.0 + self.sigma2_2),
            pair.s2 + pair.s1 / (1.0 + self.sigma2_1),
        )
    }
}

/// Refined noise variance of one user's description after a session of
/// power `delta`, with `a = s_j I` for the describing user and `b` for the
/// receiving one:
///
/// ```text
/// sigma'^2 = sigma^2 (1 + a + b) / ((1 + b)(1 + delta (1 + sigma^2)) + a (1 + delta))
/// ```
///
/// which tends to `(1 + a + b) / ((1 + b) delta)` from an infinite `sigma^2`.
pub fn refine_sigma2(sigma2: f64, a: f64, b: f64, delta: f64) -> f64 {
    if sigma2.is_infinite() {
        return if delta > 0.0 {
            (1.0 + a + b) / ((1.0 + b) * delta)
        } else {
            sigma2
        };
    }
    sigma2 * (1.0 + a + b) / ((1.0 + b) * (1.0 + delta * (1.0 + sigma2)) + a * (1.0 + delta))
}

/// One session of the exchange: user `j` spends `delta_j` on refining its
/// description, with `I` taken at the common layer of the previous session.
pub fn multisession_step(
    state: CompressionState,
    pair: FadingPair,
    alloc: &PowerAllocation,
    delta1: f64,
    delta2: f64,
) -> Result<CompressionState> {
    if !(delta1 >= 0.0 && delta2 >= 0.0) {
        return Err(Error::Config(format!(
            "session powers must be nonnegative, got {delta1}, {delta2}"
        )));
    }
    let i = alloc.interference(state.s_common);
    let (a1, a2) = (pair.s1 * i, pair.s2 * i);
    let mut next = CompressionState {
        sigma2_1: refine_sigma2(state.sigma2_1, a1, a2, delta1),
        sigma2_2: refine_sigma2(state.sigma2_2, a2, a1, delta2),
        session: state.session + 1,
        s_common: state.s_common,
    };
    let (sa, sb) = next.gains(pair);
    next.s_common = sa.min(sb).max(state.s_common);
    Ok(next)
}

/// Gains and single-level rates after one session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SessionOutcome {
    pub s_a: f64,
    pub s_b: f64,
    /// `ln(1 + s_a Ps)`.
    pub r1: f64,
    /// `ln(1 + s_b Ps)`.
    pub r2: f64,
}

/// Runs a schedule whose session powers add up to `pr` for each user.
pub fn multisession_run(
    pair: FadingPair,
    alloc: &PowerAllocation,
    schedule: &SessionSchedule,
    pr: f64,
) -> Result<Vec<SessionOutcome>> {
    let ps = alloc.ps();
    let mut state = CompressionState::initial(pair);
    schedule
        .deltas(pr)?
        .into_iter()
        .map(|d| {
            state = multisession_step(state, pair, alloc, d, d)?;
            let (s_a, s_b) = state.gains(pair);
            Ok(SessionOutcome {
                s_a,
                s_b,
                r1: (s_a * ps).ln_1p(),
                r2: (s_b * ps).ln_1p(),
            })
        })
        .collect()
}

/// `(s_a, s_b)` after the last session of the schedule.
pub fn multisession_gains(
    pair: FadingPair,
    alloc: &PowerAllocation,
    schedule: &SessionSchedule,
    pr: f64,
) -> Result<(f64, f64)> {
    let mut state = CompressionState::initial(pair);
    for d in schedule.deltas(pr)? {
        state = multisession_step(state, pair, alloc, d, d)?;
    }
    Ok(state.gains(pair))
}

fn require_wide_band(cfg: &PowerConfig) -> Result<()> {
    match cfg.mode() {
        CoopMode::WideBand => Ok(()),
        CoopMode::NarrowBand => Err(Error::Config(
            "multi-session cooperation needs the wide-band link".into(),
        )),
    }
}

/// Monte Carlo average layered rate at the destination's final gain `s_a`.
pub fn multisession_avg_rate(
    alloc: &PowerAllocation,
    schedule: &SessionSchedule,
    cfg: &PowerConfig,
    sc: &SampleConfig,
) -> Result<Estimate> {
    require_wide_band(cfg)?;
    let deltas = schedule.deltas(cfg.pr())?;
    let explicit = SessionSchedule::Explicit(deltas);
    mc_mean(sc, |p| {
        let (sa, _) = multisession_gains(p, alloc, &explicit, cfg.pr())?;
        Ok(alloc.layered_rate(sa))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::alloc_joint_opt;
    use crate::numerics::{linspace, logspace};

    fn nb(ps: f64, pr: f64) -> PowerConfig {
        PowerConfig::new(ps, pr, CoopMode::NarrowBand).unwrap()
    }

    fn pair(s1: f64, s2: f64) -> FadingPair {
        FadingPair::new(s1, s2).unwrap()
    }

    #[test]
    fn naive_values() {
        let c = nb(1.0, 1.0);
        let w = c.with_mode(CoopMode::WideBand);
        let p = pair(1.0, 1.0);
        assert!((naive_sigma2(p, &c) - 1.5).abs() < 1e-15);
        assert!((naive_sigma2(p, &w) - 1.5 / (1f64.exp() - 1.0)).abs() < 1e-14);
        assert!((naive_sigma2(p, &w) - 0.872_965_060_303_989_7).abs() < 1e-14);
        assert!((naive_gain(p, &c) - 1.4).abs() < 1e-15);
        assert!((naive_gain(p, &w) - 1.533_912_789_509_109_1).abs() < 1e-14);
        let big = nb(1.0, 1e15);
        assert!((naive_gain(pair(0.3, 0.9), &big) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn rational_form_agrees() {
        let c = nb(7.0, 3.0);
        for (s1, s2) in [(0.1, 2.0), (1.0, 1.0), (3.0, 0.2)] {
            let (ps, pr) = (c.ps(), c.pr());
            let r = s2 + s1 * (1.0 + s2 * ps) * pr / ((1.0 + pr) * (1.0 + s2 * ps) + s1 * ps);
            assert!((naive_gain(pair(s1, s2), &c) - r).abs() < 1e-13);
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for (ps, pr) in [(10.0, 10.0), (10.0, 2.5), (1.0, 3.0), (100.0, 25.0)] {
            let d = naive_distribution(&nb(ps, pr)).unwrap();
            for u in linspace(0.01, 6.0, 25) {
                let (a, b) = (d.cdf(u).unwrap(), d.cdf_quadrature(u).unwrap());
                assert!((a - b).abs() < 1e-9, "{ps} {pr} {u}: {a} {b}");
            }
        }
    }

    #[test]
    fn branch_is_continuous() {
        for (ps, pr) in [(10.0, 10.0), (10.0, 2.5), (2.0, 0.5)] {
            let d = naive_distribution(&nb(ps, pr)).unwrap();
            let b = pr / ps;
            let (l, r) = (d.cdf(b * (1.0 - 1e-12)).unwrap(), d.cdf(b).unwrap());
            assert!((l - r).abs() < 1e-8);
        }
    }

    #[test]
    fn density_is_consistent() {
        let d = naive_distribution(&nb(10.0, 2.5)).unwrap();
        let kinks = d.kinks();
        for (a, b) in [(0.05, 0.2), (0.1, 1.0), (0.5, 4.0)] {
            let q = Quadrature::new(1e-10)
                .breakpoints(kinks.clone())
                .try_integrate(|x| d.pdf(x), a, b)
                .unwrap();
            assert!((d.cdf(b).unwrap() - d.cdf(a).unwrap() - q).abs() < 1e-8);
        }
        for u in [0.05, 0.2, 0.6, 1.5, 3.0] {
            let h = 1e-5;
            let fd = (d.pdf(u + h).unwrap() - d.pdf(u - h).unwrap()) / (2.0 * h);
            assert!((fd - d.pdf_derivative(u).unwrap()).abs() < 1e-5, "{u}");
        }
    }

    #[test]
    fn wide_band_law_reuses_the_closed_form() {
        let w = PowerConfig::new(10.0, 2.0, CoopMode::WideBand).unwrap();
        let d = naive_distribution(&w).unwrap();
        for u in logspace(0.01, 5.0, 12) {
            assert!((d.cdf(u).unwrap() - d.cdf_quadrature(u).unwrap()).abs() < 1e-9);
        }
        let huge = PowerConfig::new(10.0, 1e4, CoopMode::WideBand).unwrap();
        let j = naive_distribution(&huge).unwrap();
        assert_eq!(j.cdf(1.0).unwrap(), JointUpperBound.cdf(1.0).unwrap());
        let none = naive_distribution(&nb(10.0, 0.0)).unwrap();
        assert_eq!(none.cdf(1.0).unwrap(), Rayleigh.cdf(1.0).unwrap());
    }

    #[test]
    fn naive_rates_limits_and_ordering() {
        let lb = crate::bounds::broadcast_lb(10.0).unwrap();
        let r = naive_rates(&nb(10.0, 1e-6)).unwrap();
        assert!((r.broadcast - lb).abs() < 1e-3);
        let r = naive_rates(&nb(100.0, 100.0)).unwrap();
        assert!(r.broadcast <= crate::bounds::broadcast_ub(100.0).unwrap());
        let af = crate::af::naive_rates(&nb(100.0, 25.0)).unwrap();
        let cf = naive_rates(&nb(100.0, 25.0)).unwrap();
        assert!(cf.broadcast >= af.broadcast);
        assert_eq!(cf.alloc.name(), "nwz");
    }

    #[test]
    fn sep_gain_values() {
        let c = nb(1.0, 1.0);
        let joint = alloc_joint_opt(1.0).unwrap();
        let p = pair(2.0, 1.0);
        assert!((sep_sigma2(p, &joint, &c) - 4.0 / 3.0).abs() < 1e-12);
        assert!((sep_gain(p, &joint, &c) - 2.428_571_428_571_428_5).abs() < 1e-12);
        let full = PowerAllocation::constant(1.0, 1.0).unwrap();
        assert!((sep_gain(p, &full, &c) - naive_gain(p.swapped(), &c)).abs() < 1e-14);
        let none = PowerAllocation::constant(0.0, 1.0).unwrap();
        let c3 = nb(1.0, 3.0);
        assert!((sep_gain(p, &none, &c3) - (2.0 + 0.75)).abs() < 1e-14);
    }

    #[test]
    fn refinement_limits() {
        assert_eq!(refine_sigma2(2.5, 0.3, 0.7, 0.0), 2.5);
        assert!(refine_sigma2(f64::INFINITY, 1.0, 2.0, 0.0).is_infinite());
        let big = refine_sigma2(1e12, 1.0, 2.0, 0.5);
        let lim = refine_sigma2(f64::INFINITY, 1.0, 2.0, 0.5);
        assert!((big - lim).abs() / lim < 1e-11);
        for s in [0.1, 1.0, 10.0] {
            assert!(refine_sigma2(s, 1.0, 2.0, 0.3) <= s);
        }
    }

    #[test]
    fn one_session_is_separate_cf() {
        let c = nb(10.0, 10.0);
        let joint = alloc_joint_opt(10.0).unwrap();
        for p in [pair(2.0, 1.0), pair(0.4, 1.7), pair(0.9, 0.9)] {
            let run = multisession_run(p, &joint, &SessionSchedule::Uniform(1), 10.0).unwrap();
            assert_eq!(run.len(), 1);
            assert!((run[0].s_a - sep_gain(p, &joint, &c)).abs() < 1e-12);
            assert!((run[0].s_b - sep_gain(p.swapped(), &joint, &c)).abs() < 1e-12);
        }
    }

    #[test]
    fn sessions_improve_monotonically() {
        let joint = alloc_joint_opt(10.0).unwrap();
        let p = pair(2.0, 1.0);
        let run = multisession_run(p, &joint, &SessionSchedule::Uniform(8), 10.0).unwrap();
        for w in run.windows(2) {
            assert!(w[1].s_a >= w[0].s_a && w[1].s_b >= w[0].s_b);
            assert!(w[1].r1 >= w[0].r1);
        }
        let last = run.last().unwrap();
        assert!(last.s_a <= p.sum() && last.s_b <= p.sum());
        assert!(
            (last.s_a - 2.998_232_006_507_983_7).abs() < 1e-9,
            "{}",
            last.s_a
        );
        assert!(
            (last.s_b - 2.995_784_015_519_037_6).abs() < 1e-9,
            "{}",
            last.s_b
        );
    }

    #[test]
    fn multisession_needs_wide_band() {
        let joint = alloc_joint_opt(10.0).unwrap();
        let sc = SampleConfig::new(100, 1).unwrap();
        assert!(
            multisession_avg_rate(&joint, &SessionSchedule::Uniform(2), &nb(10.0, 1.0), &sc)
                .is_err()
        );
    }
}
