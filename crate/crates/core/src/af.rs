//! Amplify-and-forward cooperation.
//!
//! The helper scales and forwards its received signal once (naive), after
//! first stripping the commonly decoded layers (separate preprocessing), or
//! over an unlimited number of wide-band sessions (multi-session).

use serde::Serialize;

use crate::fading::{PowerAllocation, SessionSchedule};
use crate::numerics::{try_find_root, Bracket, Quadrature};
use crate::oracle::{mc_mean, Estimate, SampleConfig};
use crate::rate_engine::{
    broadcast_rate, broadcast_rate_closed_on, optimal_allocation, outage_rate, Outage,
};
use crate::{CoopMode, Error, FadingPair, GainDistribution, PowerConfig, Result};

const DIST_TOL: f64 = 1e-11;

/// Equivalent gain of naive AF, `s1 + Pr s2 / (1 + Ps s2 + Pr)`.
pub fn naive_gain(pair: FadingPair, cfg: &PowerConfig) -> f64 {
    let (ps, pr) = (cfg.ps(), cfg.pr());
    pair.s1 + pr * pair.s2 / (1.0 + ps * pair.s2 + pr)
}

/// Law of the naive AF gain `s1 + g(s2)`, `g(v) = Pr v / (1 + Ps v + Pr)`.
///
/// With `V = g^{-1}(x) = x (1 + Pr) / (Pr - Ps x)` (infinite once
/// `x >= Pr/Ps`, where `g` saturates):
///
/// ```text
/// F(x) = 1 - e^{-V} - ∫_0^V e^{-v - x + g(v)} dv
/// f(x) = ∫_0^V e^{-v - x + g(v)} dv
/// ```
#[derive(Debug, Clone, Copy)]
pub struct NaiveAf {
    ps: f64,
    pr: f64,
}

impl NaiveAf {
    fn g(&self, v: f64) -> f64 {
        self.pr * v / (1.0 + self.ps * v + self.pr)
    }

    fn upper(&self, x: f64) -> f64 {
        let d = self.pr - self.ps * x;
        if d <= 0.0 {
            f64::INFINITY
        } else {
            x * (1.0 + self.pr) / d
        }
    }

    fn inner(&self, x: f64, v_max: f64) -> Result<f64> {
        // Mapped onto [0, inf) even for finite V: V blows up near Pr/Ps and
        // a plain finite range would hide the mass near the origin.
        Quadrature::new(DIST_TOL)
            .rel_tol(1e-12)
            .breakpoints([v_max])
            .integrate(
                |v| {
                    if v > v_max {
                        0.0
                    } else {
                        (-v - x + self.g(v)).exp()
                    }
                },
                0.0,
                f64::INFINITY,
            )
    }
}

fn check_x(what: &'static str, x: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(Error::Domain { what, value: x })
    }
}

impl GainDistribution for NaiveAf {
    fn cdf(&self, x: f64) -> Result<f64> {
        let x = check_x("naive AF cdf", x)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        let v = self.upper(x);
        Ok((-(-v).exp_m1() - self.inner(x, v)?).clamp(0.0, 1.0))
    }

    fn pdf(&self, x: f64) -> Result<f64> {
        let x = check_x("naive AF pdf", x)?;
        self.inner(x, self.upper(x))
    }

    fn pdf_derivative(&self, x: f64) -> Result<f64> {
        let x = check_x("naive AF pdf", x)?;
        let v = self.upper(x);
        let f = self.inner(x, v)?;
        if v.is_infinite() {
            return Ok(-f);
        }
        let d = self.pr - self.ps * x;
        let dv = (1.0 + self.pr) * self.pr / (d * d);
        Ok(-f + dv * (-v).exp())
    }

    fn kinks(&self) -> Vec<f64> {
        if self.pr > 0.0 {
            vec![self.pr / self.ps]
        } else {
            Vec::new()
        }
    }
}

/// Naive AF gain law for the configured powers.
pub fn naive_distribution(cfg: &PowerConfig) -> Result<NaiveAf> {
    Ok(NaiveAf {
        ps: cfg.ps(),
        pr: cfg.pr(),
    })
}

/// Optimal layering for the naive AF gain.
pub fn naive_allocation(cfg: &PowerConfig) -> Result<PowerAllocation> {
    Ok(optimal_allocation(&naive_distribution(cfg)?, cfg.ps())?.with_name("naf"))
}

#[derive(Debug, Clone)]
pub struct NaiveRates {
    pub outage: Outage,
    pub broadcast: f64,
    pub alloc: PowerAllocation,
}

/// Single-level and optimally layered rates of naive AF.
pub fn naive_rates(cfg: &PowerConfig) -> Result<NaiveRates> {
    let dist = naive_distribution(cfg)?;
    let outage = outage_rate(&dist, cfg.ps())?;
    let alloc = naive_allocation(cfg)?;
    let broadcast = broadcast_rate_closed_on(&dist, &alloc)?;
    Ok(NaiveRates {
        outage,
        broadcast,
        alloc,
    })
}

/// Equivalent gain with separate preprocessing: both receivers first
/// remove the layers decodable at `min(s1, s2)`, so the forwarded noise
/// carries interference `I(min(s1, s2)) = max(I(s1), I(s2))`:
/// `s1 + Pr s2 / (1 + s2 I + Pr)`.
pub fn sep_gain(pair: FadingPair, alloc: &PowerAllocation, cfg: &PowerConfig) -> f64 {
    let pr = cfg.pr();
    let i = alloc.interference(pair.min());
    pair.s1 + pr * pair.s2 / (1.0 + pair.s2 * i + pr)
}

/// Form of the separate-AF cdf integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SepCdfForm {
    /// `2 e^{-2u} - e^{-u - phi2} - e^{-u - phi3}`, from conditioning on
    /// which receiver is weaker.
    TwoBranch,
    /// The same with a single `e^{-2u}`.
    SingleExp,
}

/// Law of the separate-preprocessing AF gain for a fixed layering.
///
/// Conditioning on the weaker receiver `u = min(s1, s2)` gives
///
/// ```text
/// F(x) = ∫_0^U (2 e^{-2u} - e^{-u - phi2(u)} - e^{-u - phi3(u)}) du
/// ```
///
/// with `psi(u) = u Pr / (1 + u I(u) + Pr)`, `U = phi1^{-1}(x)` for
/// `phi1(u) = u + psi(u)`, `phi2 = max(u, x - psi(u))`,
/// `phi3 = max(u, phi4(x - u))` and
/// `phi4(w) = (1 + Pr) w / (Pr - w I(u))` (infinite when the denominator is
/// not positive).
#[derive(Debug, Clone)]
pub struct SeparateAf {
    alloc: PowerAllocation,
    pr: f64,
}

impl SeparateAf {
    pub fn allocation(&self) -> &PowerAllocation {
        &self.alloc
    }

    fn psi(&self, u: f64) -> f64 {
        u * self.pr / (1.0 + u * self.alloc.interference(u) + self.pr)
    }

    fn phi1(&self, u: f64) -> f64 {
        u + self.psi(u)
    }

    fn phi1_prime(&self, u: f64) -> f64 {
        let i = self.alloc.interference(u);
        let d = 1.0 + u * i + self.pr;
        1.0 + self.pr * (1.0 + self.pr + u * u * self.alloc.density(u)) / (d * d)
    }

    fn upper(&self, x: f64) -> Result<f64> {
        if self.pr == 0.0 {
            return Ok(x);
        }
        try_find_root(
            |u| Ok(self.phi1(u) - x),
            Bracket::new(0.0, x)?,
            1e-15 * x.max(1e-300),
        )
    }

    // Returns (phi4, dphi4/dw, d2phi4/dw2) at w = x - u, or None where phi4
    // is infinite.
    fn phi4(&self, u: f64, w: f64) -> Option<(f64, f64, f64)> {
        let i = self.alloc.interference(u);
        let d = self.pr - w * i;
        if d <= 0.0 {
            return None;
        }
        let k = (1.0 + self.pr) * self.pr;
        Some((
            (1.0 + self.pr) * w / d,
            k / (d * d),
            2.0 * i * k / (d * d * d),
        ))
    }

    fn quadrature(&self, x: f64, big_u: f64) -> Quadrature {
        let (x0, x1) = self.alloc.support();
        // The phi4 terms vary on the scale w ~ Pr / (1 + Pr + I), which is
        // a spike just below U when Pr is small.
        let scale = self.pr / (1.0 + self.pr + self.alloc.interference(0.0));
        let near_u = (0..8)
            .map(move |k| x - scale * 4f64.powi(k))
            .filter(move |&u| u > 0.0 && u < big_u);
        Quadrature::new(DIST_TOL)
            .rel_tol(1e-10)
            .max_intervals(20_000)
            .breakpoints([x0, x1].into_iter().chain(near_u))
    }

    fn cdf_with(&self, x: f64, form: SepCdfForm) -> Result<f64> {
        let x = check_x("separate AF cdf", x)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        let big_u = self.upper(x)?;
        let c = match form {
            SepCdfForm::TwoBranch => 2.0,
            SepCdfForm::SingleExp => 1.0,
        };
        let v = self.quadrature(x, big_u).integrate(
            |u| {
                let p2 = u.max(x - self.psi(u));
                let t3 = match self.phi4(u, x - u) {
                    Some((p4, _, _)) => (-u - u.max(p4)).exp(),
                    None => 0.0,
                };
                c * (-2.0 * u).exp() - (-u - p2).exp() - t3
            },
            0.0,
            big_u,
        )?;
        Ok(v)
    }

    /// Cdf with the single-`e^{-2u}` integrand, kept for comparison against
    /// Monte Carlo.
    pub fn cdf_single_exp(&self, x: f64) -> Result<f64> {
        self.cdf_with(x, SepCdfForm::SingleExp)
    }

    /// The cdf in the requested form.
    pub fn cdf_form(&self, x: f64, form: SepCdfForm) -> Result<f64> {
        self.cdf_with(x, form)
    }

    fn pdf_term(&self, u: f64, x: f64) -> f64 {
        let a = (-u - x + self.psi(u)).exp();
        let b = match self.phi4(u, x - u) {
            Some((p4, d1, _)) if u + p4 < 745.0 => (-u - p4).exp() * d1,
            _ => 0.0,
        };
        a + b
    }
}

impl GainDistribution for SeparateAf {
    fn cdf(&self, x: f64) -> Result<f64> {
        self.cdf_with(x, SepCdfForm::TwoBranch)
    }

    fn pdf(&self, x: f64) -> Result<f64> {
        let x = check_x("separate AF pdf", x)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        let big_u = self.upper(x)?;
        self.quadrature(x, big_u)
            .integrate(|u| self.pdf_term(u, x), 0.0, big_u)
    }

    fn pdf_derivative(&self, x: f64) -> Result<f64> {
        let x = check_x("separate AF pdf", x)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        let big_u = self.upper(x)?;
        let boundary = {
            let d1 = self.phi4(big_u, x - big_u).map_or(0.0, |p| p.1);
            (-2.0 * big_u).exp() * (1.0 + d1) / self.phi1_prime(big_u)
        };
        let inner = self.quadrature(x, big_u).integrate(
            |u| {
                let a = -(-u - x + self.psi(u)).exp();
                let b = match self.phi4(u, x - u) {
                    Some((p4, d1, d2)) if u + p4 < 745.0 => (-u - p4).exp() * (d2 - d1 * d1),
                    _ => 0.0,
                };
                a + b
            },
            0.0,
            big_u,
        )?;
        Ok(boundary + inner)
    }

    fn kinks(&self) -> Vec<f64> {
        let (x0, x1) = self.alloc.support();
        [x0, x1]
            .into_iter()
            .filter(|v| v.is_finite())
            .map(|v| self.phi1(v))
            .collect()
    }
}

/// Separate-preprocessing AF gain law for a fixed layering.
pub fn sep_distribution(alloc: &PowerAllocation, cfg: &PowerConfig) -> Result<SeparateAf> {
    Ok(SeparateAf {
        alloc: alloc.clone(),
        pr: cfg.pr(),
    })
}

/// How the layering for separate preprocessing is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SepStrategy {
    /// Optimal layering for the gain law induced by the naive AF layering.
    OneStep,
    /// Repeats the one-step update until the rate settles.
    Iterative,
}

#[derive(Debug, Clone)]
pub struct SepRate {
    pub rate: f64,
    pub alloc: PowerAllocation,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

const SEP_MAX_ITER: usize = 20;
const SEP_TOL: f64 = 1e-5;

/// Average rate of separate-preprocessing AF.
///
/// Each step takes the current layering `I_k`, builds the gain law it
/// induces and returns that law's optimal layering `I_{k+1}` with its rate.
/// The first layering is the naive AF optimum.
///
/// The induced law can have a non-monotone `I_r`, in which case no valid
/// optimal layering exists for it. The first step then falls back to the
/// rate of the induced law under the naive AF layering itself, with a
/// warning; that rate is achievable and never below naive AF.
pub fn sep_rate(cfg: &PowerConfig, strategy: SepStrategy) -> Result<SepRate> {
    let ps = cfg.ps();
    let step = |alloc: &PowerAllocation| -> Result<(f64, PowerAllocation)> {
        let dist = sep_distribution(alloc, cfg)?;
        let next = optimal_allocation(&dist, ps)?.with_name("opt");
        let rate = broadcast_rate(&dist, &next)?;
        Ok((rate, next))
    };
    let naf = naive_allocation(cfg)?;
    let (mut rate, mut alloc) = match step(&naf) {
        Ok(v) => v,
        Err(e @ Error::NonMonotone { .. }) => {
            let rate = broadcast_rate(&sep_distribution(&naf, cfg)?, &naf)?;
            let warnings = vec![format!("{e}; rate evaluated with the naive AF layering")];
            return Ok(SepRate {
                rate,
                alloc: naf,
                iterations: 1,
                converged: false,
                warnings,
            });
        }
        Err(e) => return Err(e),
    };
    if strategy == SepStrategy::OneStep {
        return Ok(SepRate {
            rate,
            alloc,
            iterations: 1,
            converged: true,
            warnings: Vec::new(),
        });
    }
    let mut best = (rate, alloc.clone());
    let mut warnings = Vec::new();
    for it in 2..=SEP_MAX_ITER {
        match step(&alloc) {
            Ok((r, a)) => {
                let delta = (r - rate).abs();
                rate = r;
                alloc = a;
                if rate > best.0 {
                    best = (rate, alloc.clone());
                }
                if delta < SEP_TOL {
                    return Ok(SepRate {
                        rate: best.0,
                        alloc: best.1,
                        iterations: it,
                        converged: true,
                        warnings,
                    });
                }
            }
            Err(e) => {
                warnings.push(format!("iteration {it} stopped: {e}"));
                return Ok(SepRate {
                    rate: best.0,
                    alloc: best.1,
                    iterations: it,
                    converged: false,
                    warnings,
                });
            }
        }
    }
    warnings.push(format!(
        "no convergence to {SEP_TOL} in {SEP_MAX_ITER} iterations"
    ));
    Ok(SepRate {
        rate: best.0,
        alloc: best.1,
        iterations: SEP_MAX_ITER,
        converged: false,
        warnings,
    })
}

/// Form of the integrand that accumulates the stronger receiver's
/// forwarded power in the multi-session limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZForm {
    /// `s_max (1 + s_max I) / ((1 + s_min I) (S - sigma)^2)`, the limit of
    /// the finite-session sums.
    Limit,
    /// `(1 + s_max I) / ((1 + s_min I) (S - sigma))`.
    Reduced,
}

/// Multi-session AF gains of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SessionGains {
    /// Gain of the stronger receiver, `s_max + s_min Z / (1 + Z)`.
    pub s_a: f64,
    /// Gain of the weaker receiver, the root `s_b*`.
    pub s_b: f64,
    pub z: f64,
    /// `s_b*` could not be separated from `s1 + s2` in floating point.
    pub saturated: bool,
}

impl SessionGains {
    /// Gain of the destination (user 1): `s_a` when it is the stronger
    /// receiver, ties included, and `s_b` otherwise.
    pub fn destination(&self, pair: FadingPair) -> f64 {
        if pair.s1 >= pair.s2 {
            self.s_a
        } else {
            self.s_b
        }
    }
}

/// Solves the continuum multi-session recursion for one pair with total
/// wide-band relay budget `pr`.
///
/// Writing `S = s_max + s_min` and `t = 1 / (S - sigma)`, the budget equation
/// `∫ s_max (1 + s_max I(sigma)) / (S - sigma)^2 dsigma = Pr` over
/// `[s_min, s_b*]` becomes `∫ s_max (1 + s_max I(S - 1/t)) dt = Pr` from
/// `1/s_max`, whose integrand is bounded. It is constant where `I` is
/// (below `x0` and above `x1`) and integrated numerically in between.
pub fn multisession_gains(
    pair: FadingPair,
    alloc: &PowerAllocation,
    pr: f64,
    z_form: ZForm,
) -> Result<SessionGains> {
    let (s_min, s_max) = (pair.min(), pair.max());
    if s_max == 0.0 {
        return Ok(SessionGains {
            s_a: 0.0,
            s_b: 0.0,
            z: 0.0,
            saturated: false,
        });
    }
    let big_s = s_max + s_min;
    let t_min = 1.0 / s_max;
    let (x0, x1) = alloc.support();
    let i_low = alloc.interference(0.0);
    let i_high = alloc.interference(f64::INFINITY);
    // t at which sigma = x0 and sigma = x1, clamped to [t_min, inf].
    let t_of = |sigma: f64| {
        if sigma <= s_min {
            t_min
        } else if sigma >= big_s {
            f64::INFINITY
        } else {
            1.0 / (big_s - sigma)
        }
    };
    let (ta, tb) = (t_of(x0), t_of(x1));
    let i_at = |t: f64| alloc.interference(big_s - 1.0 / t);
    let slope = |i: f64| s_max * (1.0 + s_max * i);
    let quad = Quadrature::new(1e-13).rel_tol(1e-13);

    // Budget spent up to t.
    let g = |t: f64| -> Result<f64> {
        let mut acc = slope(i_low) * (t.min(ta) - t_min);
        if t > ta {
            acc += quad.integrate(|tau| slope(i_at(tau)), ta, t.min(tb))?;
        }
        if t > tb {
            acc += slope(i_high) * (t - tb);
        }
        Ok(acc)
    };

    let g_a = slope(i_low) * (ta - t_min);
    let t_star = if pr <= g_a {
        t_min + pr / slope(i_low)
    } else {
        let g_b = if tb.is_finite() {
            g(tb)?
        } else {
            f64::INFINITY
        };
        if pr <= g_b {
            let hi = if tb.is_finite() {
                tb
            } else {
                // I is never zero on the path: grow the bracket.
                let mut hi = 2.0 * ta.max(t_min);
                while g(hi)? < pr {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return Err(Error::NoConvergence {
                            what: "multi-session budget",
                            iterations: 0,
                        });
                    }
                }
                hi
            };
            try_find_root(|t| Ok(g(t)? - pr), Bracket::new(ta, hi)?, 1e-14 * hi)?
        } else {
            tb + (pr - g_b) / slope(i_high)
        }
    };

    let ratio = |i: f64| (1.0 + s_max * i) / (1.0 + s_min * i);
    let z = match z_form {
        ZForm::Limit => {
            let w = |i: f64| s_max * ratio(i);
            let mut acc = w(i_low) * (t_star.min(ta) - t_min);
            if t_star > ta {
                acc += quad.integrate(|tau| w(i_at(tau)), ta, t_star.min(tb))?;
            }
            if t_star > tb {
                acc += w(i_high) * (t_star - tb);
            }
            acc
        }
        ZForm::Reduced => {
            let mut acc = ratio(i_low) * (t_star.min(ta) / t_min).ln();
            if t_star > ta {
                acc += quad.integrate(|tau| ratio(i_at(tau)) / tau, ta, t_star.min(tb))?;
            }
            if t_star > tb {
                acc += ratio(i_high) * (t_star / tb).ln();
            }
            acc
        }
    };

    let s_b = big_s - 1.0 / t_star;
    let saturated = !(s_b < big_s);
    let s_a = s_max + s_min * z / (1.0 + z);
    Ok(SessionGains {
        s_a,
        s_b,
        z,
        saturated,
    })
}

fn require_wide_band(cfg: &PowerConfig) -> Result<()> {
    match cfg.mode() {
        CoopMode::WideBand => Ok(()),
        CoopMode::NarrowBand => Err(Error::Config(
            "multi-session cooperation needs the wide-band link".into(),
        )),
    }
}

/// Destination gain of multi-session AF.
pub fn multisession_gain(
    pair: FadingPair,
    alloc: &PowerAllocation,
    cfg: &PowerConfig,
) -> Result<f64> {
    require_wide_band(cfg)?;
    Ok(multisession_gains(pair, alloc, cfg.pr(), ZForm::Limit)?.destination(pair))
}

/// Monte Carlo average layered rate of multi-session AF.
pub fn multisession_rate(
    alloc: &PowerAllocation,
    cfg: &PowerConfig,
    sc: &SampleConfig,
) -> Result<Estimate> {
    require_wide_band(cfg)?;
    mc_mean(sc, |p| {
        Ok(alloc.layered_rate(multisession_gain(p, alloc, cfg)?))
    })
}

const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_MAX: usize = 100;

/// Finite-session AF recursion with the given session powers.
///
/// In session `i` the weaker receiver forwards with power `delta_i`, the
/// stronger one too, each after removing the layers decodable at the
/// current `s_b^{(i)}`:
///
/// ```text
/// X_a += delta_i / (1 + s_max I(s_b^{(i)}))
/// X_b += delta_i / (1 + s_min I(s_b^{(i)}))
/// s_b^{(i)} = s_min + s_max X_a / (1 + X_a)
/// s_a^{(i)} = s_max + s_min X_b / (1 + X_b)
/// ```
///
/// `s_b^{(i)}` appears on both sides and is found by fixed-point iteration
/// from `s_b^{(i-1)}`; the iteration increases monotonically to the root.
/// Returns `(s_a, s_b)` after the last session.
pub fn discrete_session_oracle(
    pair: FadingPair,
    alloc: &PowerAllocation,
    schedule: &SessionSchedule,
    pr: f64,
) -> Result<(f64, f64)> {
    let path = discrete_session_path(pair, alloc, schedule, pr)?;
    Ok(*path.last().expect("schedules have at least one session"))
}

/// [`discrete_session_oracle`] returning `(s_a, s_b)` after every session.
pub fn discrete_session_path(
    pair: FadingPair,
    alloc: &PowerAllocation,
    schedule: &SessionSchedule,
    pr: f64,
) -> Result<Vec<(f64, f64)>> {
    let deltas = schedule.deltas(pr)?;
    let (s_min, s_max) = (pair.min(), pair.max());
    let (mut xa, mut xb) = (0.0, 0.0);
    let mut s_b = s_min;
    let mut out = Vec::with_capacity(deltas.len());
    for delta in deltas {
        let mut s = s_b;
        let mut converged = false;
        for _ in 0..FIXED_POINT_MAX {
            let i = alloc.interference(s);
            let xa_new = xa + delta / (1.0 + s_max * i);
            let next = s_min + s_max * xa_new / (1.0 + xa_new);
            let done = (next - s).abs() <= FIXED_POINT_TOL * next.max(1.0);
            s = next;
            if done {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: "session fixed point",
                iterations: FIXED_POINT_MAX,
            });
        }
        let i = alloc.interference(s);
        xa += delta / (1.0 + s_max * i);
        xb += delta / (1.0 + s_min * i);
        s_b = s_min + s_max * xa / (1.0 + xa);
        let s_a = s_max + s_min * xb / (1.0 + xb);
        out.push((s_a, s_b));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::{alloc_joint_opt, Rayleigh};
    use crate::numerics::linspace;

    fn cfg(ps: f64, pr: f64) -> PowerConfig {
        PowerConfig::new(ps, pr, CoopMode::NarrowBand).unwrap()
    }

    #[test]
    fn naive_gain_values() {
        let c = cfg(10.0, 10.0);
        let p = FadingPair::new(1.0, 1.0).unwrap();
        assert!((naive_gain(p, &c) - (1.0 + 10.0 / 21.0)).abs() < 1e-15);
        assert_eq!(naive_gain(p, &cfg(10.0, 0.0)), 1.0);
        let far = FadingPair::new(1.0, 1e12).unwrap();
        assert!((naive_gain(far, &c) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn naive_law_is_continuous_and_normalized() {
        for (ps, pr) in [(10.0, 10.0), (10.0, 2.5), (1.0, 3.0)] {
            let d = naive_distribution(&cfg(ps, pr)).unwrap();
            assert_eq!(d.cdf(0.0).unwrap(), 0.0);
            let b = pr / ps;
            let (l, r) = (d.cdf(b * (1.0 - 1e-12)).unwrap(), d.cdf(b).unwrap());
            assert!((l - r).abs() < 1e-8, "{l} {r}");
            let mass = Quadrature::new(1e-10)
                .breakpoints([b])
                .try_integrate(|x| d.pdf(x), 0.0, f64::INFINITY)
                .unwrap();
            assert!((mass - 1.0).abs() < 1e-6);
            for (a, c) in [(0.1, 0.7), (0.5, 3.0), (0.05, 0.2)] {
                let q = Quadrature::new(1e-10)
                    .breakpoints([b])
                    .try_integrate(|x| d.pdf(x), a, c)
                    .unwrap();
                assert!((d.cdf(c).unwrap() - d.cdf(a).unwrap() - q).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn naive_pdf_derivative_matches_difference() {
        let d = naive_distribution(&cfg(10.0, 10.0)).unwrap();
        for x in [0.2, 0.7, 0.99, 1.5, 3.0] {
            let h = 1e-5;
            let fd = (d.pdf(x + h).unwrap() - d.pdf(x - h).unwrap()) / (2.0 * h);
            assert!((fd - d.pdf_derivative(x).unwrap()).abs() < 1e-5, "{x}");
        }
    }

    #[test]
    fn naive_rates_vanishing_relay_match_single_user() {
        let r = naive_rates(&cfg(10.0, 1e-6)).unwrap();
        let lb = crate::bounds::broadcast_lb(10.0).unwrap();
        assert!((r.broadcast - lb).abs() < 1e-3);
        let olb = crate::bounds::outage_lb(10.0).unwrap();
        assert!((r.outage.rate - olb).abs() < 1e-3);
        assert!(r.broadcast >= r.outage.rate);
        assert!(r.broadcast <= crate::bounds::broadcast_ub(10.0).unwrap());
    }

    #[test]
    fn sep_gain_reductions() {
        let c = cfg(1.0, 2.0);
        let p = FadingPair::new(2.0, 1.0).unwrap();
        let full = PowerAllocation::constant(1.0, 1.0).unwrap();
        assert!((sep_gain(p, &full, &c) - naive_gain(p, &c)).abs() < 1e-15);
        let none = PowerAllocation::constant(0.0, 1.0).unwrap();
        assert!((sep_gain(p, &none, &c) - (2.0 + 2.0 / 3.0)).abs() < 1e-15);
        let joint = alloc_joint_opt(1.0).unwrap();
        assert!((sep_gain(p, &joint, &c) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn sep_law_with_full_interference_is_naive() {
        let c = cfg(10.0, 2.5);
        let naive = naive_distribution(&c).unwrap();
        let sep = sep_distribution(&PowerAllocation::constant(10.0, 10.0).unwrap(), &c).unwrap();
        for x in [0.05, 0.2, 0.25, 0.6, 1.3, 4.0] {
            assert!(
                (naive.cdf(x).unwrap() - sep.cdf(x).unwrap()).abs() < 1e-6,
                "{x}"
            );
            assert!(
                (naive.pdf(x).unwrap() - sep.pdf(x).unwrap()).abs() < 1e-6,
                "{x}"
            );
        }
    }

    #[test]
    fn sep_law_is_normalized_and_consistent() {
        let c = cfg(10.0, 10.0);
        let sep = sep_distribution(&alloc_joint_opt(10.0).unwrap(), &c).unwrap();
        assert_eq!(sep.cdf(0.0).unwrap(), 0.0);
        assert!((sep.cdf(60.0).unwrap() - 1.0).abs() < 1e-9);
        let kinks = sep.kinks();
        for (a, b) in [(0.1, 0.9), (0.3, 2.5), (1.0, 5.0)] {
            let q = Quadrature::new(1e-10)
                .breakpoints(kinks.clone())
                .try_integrate(|x| sep.pdf(x), a, b)
                .unwrap();
            assert!((sep.cdf(b).unwrap() - sep.cdf(a).unwrap() - q).abs() < 1e-7);
        }
        for x in [0.15, 0.5, 1.1, 2.0] {
            let h = 1e-5;
            let fd = (sep.pdf(x + h).unwrap() - sep.pdf(x - h).unwrap()) / (2.0 * h);
            assert!((fd - sep.pdf_derivative(x).unwrap()).abs() < 1e-5, "{x}");
        }
        // The single-exponential variant loses half the mass.
        assert!((sep.cdf_single_exp(60.0).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn multisession_zero_interference_closed_form() {
        let none = PowerAllocation::constant(0.0, 10.0).unwrap();
        let cases = [((1.0, 1.0, 1.0), 1.5, 1.5), ((2.0, 1.0, 1.0), 2.0, 2.5)];
        for ((s1, s2, pr), sb, sa) in cases {
            let g = multisession_gains(FadingPair::new(s1, s2).unwrap(), &none, pr, ZForm::Limit)
                .unwrap();
            assert!((g.s_b - sb).abs() < 1e-12);
            assert!((g.s_a - sa).abs() < 1e-12);
            assert!((g.z - pr).abs() < 1e-12);
        }
        let g = multisession_gains(
            FadingPair::new(2.0, 1.0).unwrap(),
            &none,
            1.0,
            ZForm::Reduced,
        )
        .unwrap();
        assert!((g.z - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn multisession_matches_direct_sigma_quadrature() {
        let joint = alloc_joint_opt(10.0).unwrap();
        let p = FadingPair::new(1.3, 0.4).unwrap();
        let g = multisession_gains(p, &joint, 2.0, ZForm::Limit).unwrap();
        let big_s = p.sum();
        let (x0, x1) = joint.support();
        let budget = Quadrature::new(1e-12)
            .breakpoints([x0, x1])
            .integrate(
                |s| p.max() * (1.0 + p.max() * joint.interference(s)) / (big_s - s).powi(2),
                p.min(),
                g.s_b,
            )
            .unwrap();
        assert!((budget - 2.0).abs() < 1e-9);
        let z = Quadrature::new(1e-12)
            .breakpoints([x0, x1])
            .integrate(
                |s| {
                    let i = joint.interference(s);
                    p.max() * (1.0 + p.max() * i) / ((1.0 + p.min() * i) * (big_s - s).powi(2))
                },
                p.min(),
                g.s_b,
            )
            .unwrap();
        assert!((z - g.z).abs() < 1e-9);
    }

    #[test]
    fn multisession_saturates_at_sum() {
        let joint = alloc_joint_opt(10.0).unwrap();
        let p = FadingPair::new(0.7, 0.2).unwrap();
        let g = multisession_gains(p, &joint, 1e9, ZForm::Limit).unwrap();
        assert!((g.s_a - 0.9).abs() < 1e-6 && (g.s_b - 0.9).abs() < 1e-6);
    }

    #[test]
    fn discrete_single_session() {
        let none = PowerAllocation::constant(0.0, 10.0).unwrap();
        let p = FadingPair::new(0.5, 2.0).unwrap();
        let (_, sb) = discrete_session_oracle(p, &none, &SessionSchedule::Uniform(1), 3.0).unwrap();
        assert!((sb - (0.5 + 2.0 * 3.0 / 4.0)).abs() < 1e-14);
    }

    #[test]
    fn discrete_sessions_approach_the_limit() {
        let joint = alloc_joint_opt(10.0).unwrap();
        let p = FadingPair::new(1.1, 0.6).unwrap();
        let limit = multisession_gains(p, &joint, 10.0, ZForm::Limit).unwrap();
        let path = discrete_session_path(p, &joint, &SessionSchedule::Uniform(1000), 10.0).unwrap();
        let (sa, sb) = *path.last().unwrap();
        assert!((sa - limit.s_a).abs() / limit.s_a < 1e-3);
        assert!((sb - limit.s_b).abs() / limit.s_b < 1e-3);
        for w in path.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            assert!(w[1].0 <= p.sum() + 1e-12);
        }
    }

    #[test]
    fn rayleigh_marginal_sanity() {
        // With no relay power every AF gain is s1.
        let c = cfg(10.0, 0.0);
        let d = naive_distribution(&c).unwrap();
        for x in linspace(0.1, 4.0, 9) {
            assert!((d.cdf(x).unwrap() - Rayleigh.cdf(x).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn sep_rate_vanishing_relay_matches_single_user() {
        let r = sep_rate(&cfg(10.0, 1e-3), SepStrategy::OneStep).unwrap();
        assert!(r.converged);
        assert!((r.rate - crate::bounds::broadcast_lb(10.0).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn sep_rate_beats_naive() {
        let c = cfg(1.0, 1.0);
        let one = sep_rate(&c, SepStrategy::OneStep).unwrap();
        assert!(one.converged && one.warnings.is_empty());
        assert!((one.rate - 0.357_870_418_5).abs() < 1e-7);
        assert!(one.rate >= naive_rates(&c).unwrap().broadcast);
        let it = sep_rate(&c, SepStrategy::Iterative).unwrap();
        assert!(it.converged && it.rate >= one.rate - SEP_TOL);
    }

    #[test]
    fn sep_rate_falls_back_on_non_monotone_layering() {
        let c = cfg(10.0, 10.0);
        let one = sep_rate(&c, SepStrategy::OneStep).unwrap();
        assert!(!one.converged);
        assert_eq!(one.alloc.name(), "naf");
        assert_eq!(one.warnings.len(), 1);
        assert!((one.rate - 1.614_967_305).abs() < 1e-7);
        assert!(one.rate >= naive_rates(&c).unwrap().broadcast);
    }
}
