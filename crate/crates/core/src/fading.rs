//! Power configuration, fading realizations, the canonical gain
//! distributions and the closed-form layering power allocations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::numerics::{find_root, gauss_legendre_8, logspace, Bracket};
use crate::{Error, Result};

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Capacity model of the link between the two receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoopMode {
    /// One real-time session of capacity `ln(1 + Pr)`.
    NarrowBand,
    /// Unlimited bandwidth, power limited: capacity `Pr`.
    WideBand,
}

impl CoopMode {
    pub fn capacity(self, pr: f64) -> f64 {
        match self {
            CoopMode::NarrowBand => pr.ln_1p(),
            CoopMode::WideBand => pr,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CoopMode::NarrowBand => "narrow_band",
            CoopMode::WideBand => "wide_band",
        }
    }
}

impl fmt::Display for CoopMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CoopMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "narrow_band" | "nb" => Ok(CoopMode::NarrowBand),
            "wide_band" | "wb" => Ok(CoopMode::WideBand),
            _ => Err(Error::Config(format!("unknown cooperation mode `{s}`"))),
        }
    }
}

/// Source power `Ps`, relay power `Pr` (both linear) and the cooperation
/// link model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    ps: f64,
    pr: f64,
    mode: CoopMode,
}

impl PowerConfig {
    pub fn new(ps: f64, pr: f64, mode: CoopMode) -> Result<Self> {
        if !(ps > 0.0 && ps.is_finite()) {
            return Err(Error::Config(format!(
                "source power must be positive, got {ps}"
            )));
        }
        if !(pr >= 0.0) || pr.is_nan() {
            return Err(Error::Config(format!(
                "relay power must be nonnegative, got {pr}"
            )));
        }
        Ok(Self { ps, pr, mode })
    }

    pub fn from_db(ps_db: f64, pr_db: f64, mode: CoopMode) -> Result<Self> {
        Self::new(db_to_linear(ps_db), db_to_linear(pr_db), mode)
    }

    pub fn ps(&self) -> f64 {
        self.ps
    }

    pub fn pr(&self) -> f64 {
        self.pr
    }

    pub fn mode(&self) -> CoopMode {
        self.mode
    }

    pub fn with_pr(self, pr: f64) -> Result<Self> {
        Self::new(self.ps, pr, self.mode)
    }

    pub fn with_mode(self, mode: CoopMode) -> Self {
        Self { mode, ..self }
    }

    /// Capacity of the cooperation link in nats.
    pub fn coop_capacity(&self) -> f64 {
        self.mode.capacity(self.pr)
    }

    /// Relay power of a narrow-band link with the same capacity, i.e.
    /// `e^C - 1`. Equals `Pr` in narrow band and `e^Pr - 1` in wide band.
    pub fn effective_relay_power(&self) -> f64 {
        self.coop_capacity().exp_m1()
    }
}

/// One block-fading realization of the squared channel magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingPair {
    pub s1: f64,
    pub s2: f64,
}

impl FadingPair {
    pub fn new(s1: f64, s2: f64) -> Result<Self> {
        if !(s1 >= 0.0) {
            return Err(Error::Domain {
                what: "fading gain s1",
                value: s1,
            });
        }
        if !(s2 >= 0.0) {
            return Err(Error::Domain {
                what: "fading gain s2",
                value: s2,
            });
        }
        Ok(Self { s1, s2 })
    }

    pub fn swapped(self) -> Self {
        Self {
            s1: self.s2,
            s2: self.s1,
        }
    }

    pub fn min(&self) -> f64 {
        self.s1.min(self.s2)
    }

    pub fn max(&self) -> f64 {
        self.s1.max(self.s2)
    }

    pub fn sum(&self) -> f64 {
        self.s1 + self.s2
    }
}

/// Law of a scalar equivalent fading gain.
pub trait GainDistribution: Send + Sync {
    fn cdf(&self, x: f64) -> Result<f64>;

    fn pdf(&self, x: f64) -> Result<f64>;

    /// Defaults to a central difference of the pdf with step
    /// `max(1e-4, 1e-3 x)`, one-sided near the origin.
    fn pdf_derivative(&self, x: f64) -> Result<f64> {
        let h = (1e-3 * x).max(1e-4);
        if x - h < 0.0 {
            return Ok((self.pdf(x + h)? - self.pdf(x)?) / h);
        }
        Ok((self.pdf(x + h)? - self.pdf(x - h)?) / (2.0 * h))
    }

    /// Points where the cdf changes analytic form.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<D: GainDistribution + ?Sized> GainDistribution for &D {
    fn cdf(&self, x: f64) -> Result<f64> {
        (**self).cdf(x)
    }
    fn pdf(&self, x: f64) -> Result<f64> {
        (**self).pdf(x)
    }
    fn pdf_derivative(&self, x: f64) -> Result<f64> {
        (**self).pdf_derivative(x)
    }
    fn kinks(&self) -> Vec<f64> {
        (**self).kinks()
    }
}

fn check_gain(what: &'static str, u: f64) -> Result<f64> {
    if u >= 0.0 {
        Ok(u)
    } else {
        Err(Error::Domain { what, value: u })
    }
}

/// `1 - e^{-u}`: a single Rayleigh-faded receiver.
pub fn rayleigh_cdf(u: f64) -> Result<f64> {
    Ok(-(-check_gain("rayleigh_cdf", u)?).exp_m1())
}

/// `1 - e^{-u} - u e^{-u}`: the law of `s1 + s2` (two fully cooperating
/// receivers).
pub fn joint_ub_cdf(u: f64) -> Result<f64> {
    let u = check_gain("joint_ub_cdf", u)?;
    if u.is_infinite() {
        return Ok(1.0);
    }
    Ok(-(-u).exp_m1() - u * (-u).exp())
}

/// `(1 - e^{-u})^2`: the law of `max(s1, s2)`.
pub fn strongest_cdf(u: f64) -> Result<f64> {
    let f = rayleigh_cdf(u)?;
    Ok(f * f)
}

/// Unit-mean exponential gain.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayleigh;

/// Gain `s1 + s2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct JointUpperBound;

/// Gain `max(s1, s2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Strongest;

impl GainDistribution for Rayleigh {
    fn cdf(&self, x: f64) -> Result<f64> {
        rayleigh_cdf(x)
    }
    fn pdf(&self, x: f64) -> Result<f64> {
        Ok((-check_gain("rayleigh pdf", x)?).exp())
    }
    fn pdf_derivative(&self, x: f64) -> Result<f64> {
        Ok(-(-check_gain("rayleigh pdf", x)?).exp())
    }
}

impl GainDistribution for JointUpperBound {
    fn cdf(&self, x: f64) -> Result<f64> {
        joint_ub_cdf(x)
    }
    fn pdf(&self, x: f64) -> Result<f64> {
        let x = check_gain("joint pdf", x)?;
        Ok(if x.is_infinite() { 0.0 } else { x * (-x).exp() })
    }
    fn pdf_derivative(&self, x: f64) -> Result<f64> {
        let x = check_gain("joint pdf", x)?;
        Ok(if x.is_infinite() {
            0.0
        } else {
            (1.0 - x) * (-x).exp()
        })
    }
}

impl GainDistribution for Strongest {
    fn cdf(&self, x: f64) -> Result<f64> {
        strongest_cdf(x)
    }
    fn pdf(&self, x: f64) -> Result<f64> {
        let e = (-check_gain("strongest pdf", x)?).exp();
        Ok(2.0 * e * (1.0 - e))
    }
    fn pdf_derivative(&self, x: f64) -> Result<f64> {
        let e = (-check_gain("strongest pdf", x)?).exp();
        Ok(-2.0 * e + 4.0 * e * e)
    }
}

/// Number of nodes of a tabulated allocation.
pub const TABLE_NODES: usize = 1025;

/// Residual interference `I(s)` of a continuum layering: the power of all
/// layers above `s`. `I = Ps` below `x0`, `I = 0` above `x1`, and the layer
/// density is `rho = -I'`.
#[derive(Debug, Clone)]
pub struct PowerAllocation {
    name: String,
    ps: f64,
    x0: f64,
    x1: f64,
    shape: Shape,
}

#[derive(Debug, Clone)]
enum Shape {
    Constant(f64),
    SingleUser,
    Joint,
    Table(Box<Table>),
}

#[derive(Debug, Clone)]
struct Table {
    x: Vec<f64>,
    i: Vec<f64>,
    di: Vec<f64>,
    // Cumulative layered rate at each node.
    rate: Vec<f64>,
}

impl Table {
    fn locate(&self, s: f64) -> usize {
        let k = self.x.partition_point(|&x| x <= s);
        k.clamp(1, self.x.len() - 1) - 1
    }

    fn eval(&self, s: f64) -> (f64, f64) {
        let k = self.locate(s);
        let h = self.x[k + 1] - self.x[k];
        let t = (s - self.x[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let (y0, y1) = (self.i[k], self.i[k + 1]);
        let (m0, m1) = (self.di[k] * h, self.di[k + 1] * h);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let d = ((6.0 * t2 - 6.0 * t) * (y0 - y1)
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        (v, d)
    }

    fn rate_element(&self, u: f64) -> f64 {
        let (i, d) = self.eval(u);
        -u * d / (1.0 + u * i)
    }
}

impl PowerAllocation {
    /// `I ≡ level` everywhere: no layering at all. Useful as a degenerate
    /// case of the gain maps.
    pub fn constant(level: f64, ps: f64) -> Result<Self> {
        if !(0.0..=ps).contains(&level) {
            return Err(Error::Config(format!(
                "constant interference {level} outside [0, {ps}]"
            )));
        }
        Ok(Self {
            name: "const".into(),
            ps,
            x0: f64::INFINITY,
            x1: f64::INFINITY,
            shape: Shape::Constant(level),
        })
    }

    /// Builds a tabulated allocation on `[x0, x1]` from a callback returning
    /// `(I(x), I'(x))`. The end values are pinned to `Ps` and `0`.
    pub fn tabulated(
        name: impl Into<String>,
        ps: f64,
        x0: f64,
        x1: f64,
        profile: impl Fn(f64) -> Result<(f64, f64)>,
    ) -> Result<Self> {
        if !(x0 > 0.0 && x1 > x0 && x1.is_finite()) {
            return Err(Error::InvalidBracket { lo: x0, hi: x1 });
        }
        let x = logspace(x0, x1, TABLE_NODES);
        let mut i = Vec::with_capacity(x.len());
        let mut di = Vec::with_capacity(x.len());
        for &xk in &x {
            let (v, d) = profile(xk)?;
            i.push(v.clamp(0.0, ps));
            di.push(d.min(0.0));
        }
        i[0] = ps;
        *i.last_mut().unwrap() = 0.0;
        let mut table = Table {
            x,
            i,
            di,
            rate: Vec::new(),
        };
        let mut rate = vec![0.0; table.x.len()];
        for k in 1..table.x.len() {
            let seg = gauss_legendre_8(|u| table.rate_element(u), table.x[k - 1], table.x[k]);
            rate[k] = rate[k - 1] + seg;
        }
        table.rate = rate;
        Ok(Self {
            name: name.into(),
            ps,
            x0,
            x1,
            shape: Shape::Table(Box::new(table)),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn ps(&self) -> f64 {
        self.ps
    }

    /// `[x0, x1]`; both infinite for a constant allocation.
    pub fn support(&self) -> (f64, f64) {
        (self.x0, self.x1)
    }

    pub fn is_layered(&self) -> bool {
        !matches!(self.shape, Shape::Constant(_))
    }

    /// Residual interference `I(s)`.
    pub fn interference(&self, s: f64) -> f64 {
        if let Shape::Constant(c) = self.shape {
            return c;
        }
        if s <= self.x0 {
            return self.ps;
        }
        if s >= self.x1 {
            return 0.0;
        }
        let v = match &self.shape {
            Shape::SingleUser => (1.0 - s) / (s * s),
            Shape::Joint => (1.0 + s - s * s) / (s * s * s),
            Shape::Table(t) => t.eval(s).0,
            Shape::Constant(_) => unreachable!(),
        };
        v.clamp(0.0, self.ps)
    }

    /// Layer power density `rho(s) = -I'(s)`.
    pub fn density(&self, s: f64) -> f64 {
        if !self.is_layered() || s < self.x0 || s > self.x1 {
            return 0.0;
        }
        match &self.shape {
            Shape::SingleUser => (2.0 - s) / (s * s * s),
            Shape::Joint => {
                let s2 = s * s;
                3.0 / (s2 * s2) + 2.0 / (s2 * s) - 1.0 / s2
            }
            Shape::Table(t) => -t.eval(s).1,
            Shape::Constant(_) => 0.0,
        }
    }

    /// Cumulative layered rate `R(s) = ∫_0^s u rho(u) / (1 + u I(u)) du`,
    /// i.e. the rate decodable at equivalent gain `s`.
    pub fn layered_rate(&self, s: f64) -> f64 {
        if !self.is_layered() || s <= self.x0 {
            return 0.0;
        }
        let s = s.min(self.x1);
        match &self.shape {
            Shape::SingleUser => 2.0 * (s / self.x0).ln() - (s - self.x0),
            Shape::Joint => 3.0 * (s / self.x0).ln() - (s - self.x0),
            Shape::Table(t) => {
                let k = t.locate(s);
                t.rate[k] + gauss_legendre_8(|u| t.rate_element(u), t.x[k], s)
            }
            Shape::Constant(_) => 0.0,
        }
    }

    /// `R(x1)`, the rate of a receiver that decodes every layer.
    pub fn max_rate(&self) -> f64 {
        self.layered_rate(self.x1)
    }

    /// Smallest gain `s` with `R(s) >= r`; infinite when `r` exceeds the
    /// total rate.
    pub fn gain_for_rate(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return if self.is_layered() { self.x0 } else { 0.0 };
        }
        let top = self.max_rate();
        if r > top || !self.is_layered() {
            return f64::INFINITY;
        }
        if r == top {
            return self.x1;
        }
        let b = Bracket::new(self.x0, self.x1).expect("layered support is a proper interval");
        find_root(|s| self.layered_rate(s) - r, b, 1e-13 * self.x1)
            .expect("R is continuous and brackets every rate below its maximum")
    }
}

/// Single-user optimal layering, `I(s) = (1 - s)/s^2` on
/// `[2/(1 + sqrt(1 + 4 Ps)), 1]`.
pub fn alloc_single_user_opt(ps: f64) -> Result<PowerAllocation> {
    check_power(ps)?;
    let x0 = 2.0 / (1.0 + (1.0 + 4.0 * ps).sqrt());
    Ok(PowerAllocation {
        name: "su".into(),
        ps,
        x0,
        x1: 1.0,
        shape: Shape::SingleUser,
    })
}

/// Golden ratio, the upper end of the joint-decoding layering.
pub const GOLDEN: f64 = 1.618_033_988_749_895;

/// Layering matched to `s1 + s2`, `I(s) = (1 + s - s^2)/s^3`, with `x0`
/// the root of `Ps s^3 + s^2 - s - 1` and `x1` the golden ratio.
pub fn alloc_joint_opt(ps: f64) -> Result<PowerAllocation> {
    check_power(ps)?;
    let b = Bracket::new(0.0, GOLDEN)?;
    let x0 = find_root(|s| ps * s * s * s + s * s - s - 1.0, b, 1e-15)?;
    Ok(PowerAllocation {
        name: "joint".into(),
        ps,
        x0,
        x1: GOLDEN,
        shape: Shape::Joint,
    })
}

/// Optimal layering for the strongest-user gain `max(s1, s2)`.
pub fn alloc_selection_opt(ps: f64) -> Result<PowerAllocation> {
    check_power(ps)?;
    Ok(crate::rate_engine::optimal_allocation(&Strongest, ps)?.with_name("sel"))
}

fn check_power(ps: f64) -> Result<()> {
    if ps > 0.0 && ps.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "source power must be positive, got {ps}"
        )))
    }
}

/// Per-session relay powers of a finite multi-session exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionSchedule {
    /// `K` sessions of power `Pr / K`.
    Uniform(usize),
    /// `K` sessions with powers proportional to `1, q, q^2, ...`.
    Geometric { sessions: usize, ratio: f64 },
    /// Explicit per-session powers.
    Explicit(Vec<f64>),
}

impl SessionSchedule {
    pub fn sessions(&self) -> usize {
        match self {
            SessionSchedule::Uniform(k) => *k,
            SessionSchedule::Geometric { sessions, .. } => *sessions,
            SessionSchedule::Explicit(d) => d.len(),
        }
    }

    /// Session powers for a total budget, checked against it.
    pub fn deltas(&self, budget: f64) -> Result<Vec<f64>> {
        let d = match self {
            SessionSchedule::Uniform(0) | SessionSchedule::Geometric { sessions: 0, .. } => {
                return Err(Error::Config(
                    "a schedule needs at least one session".into(),
                ))
            }
            SessionSchedule::Uniform(k) => vec![budget / *k as f64; *k],
            SessionSchedule::Geometric { sessions, ratio } => {
                if !(*ratio > 0.0) {
                    return Err(Error::Config(format!(
                        "geometric ratio must be positive, got {ratio}"
                    )));
                }
                let w: Vec<f64> = (0..*sessions).map(|k| ratio.powi(k as i32)).collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|x| budget * x / total).collect()
            }
            SessionSchedule::Explicit(d) => {
                if d.is_empty() {
                    return Err(Error::Config(
                        "a schedule needs at least one session".into(),
                    ));
                }
                if d.iter().any(|x| !(*x >= 0.0)) {
                    return Err(Error::Config("session powers must be nonnegative".into()));
                }
                let total: f64 = d.iter().sum();
                if total > budget * (1.0 + 1e-12) {
                    return Err(Error::Config(format!(
                        "session powers sum to {total}, above the budget {budget}"
                    )));
                }
                d.clone()
            }
        };
        Ok(d)
    }
}
