//! Optimal continuum layering for an arbitrary equivalent-gain law and the
//! resulting average rates.
//!
//! For a gain with cdf `F` and pdf `f`, the rate-maximizing residual
//! interference is the clipped
//!
//! ```text
//! I_r(x) = (1 - F(x) - x f(x)) / (f(x) x^2)
//! ```
//!
//! with `I = Ps` below the point `x0` where `I_r = Ps` and `I = 0` above the
//! point `x1` where `I_r = 0`.

use serde::Serialize;

use crate::fading::PowerAllocation;
use crate::numerics::{logspace, try_find_root, try_maximize_1d, Bracket, Quadrature};
use crate::{Error, GainDistribution, Result};

const SCAN_LO: f64 = 1e-6;
const SCAN_HI: f64 = 1e3;
const SCAN_POINTS: usize = 400;
const OUTAGE_HI: f64 = 200.0;
const RATE_TOL: f64 = 1e-10;

/// `I_r(x)` and its derivative.
pub fn residual_interference(dist: &dyn GainDistribution, x: f64) -> Result<(f64, f64)> {
    let big_f = dist.cdf(x)?;
    let f = dist.pdf(x)?;
    let fp = dist.pdf_derivative(x)?;
    let n = 1.0 - big_f - x * f;
    let d = f * x * x;
    let np = -2.0 * f - x * fp;
    let dp = fp * x * x + 2.0 * x * f;
    Ok((n / d, (np * d - n * dp) / (d * d)))
}

fn ir_value(dist: &dyn GainDistribution, x: f64) -> Result<f64> {
    let big_f = dist.cdf(x)?;
    let f = dist.pdf(x)?;
    Ok((1.0 - big_f - x * f) / (f * x * x))
}

/// Optimal layering for `dist` at source power `ps`.
///
/// The support ends are bracketed by a log-spaced scan of `[1e-6, 1e3]` and
/// refined by Brent's method. A non-monotone `I_r` on the support is an
/// error, not something to be patched up here.
pub fn optimal_allocation(dist: &dyn GainDistribution, ps: f64) -> Result<PowerAllocation> {
    if !(ps > 0.0 && ps.is_finite()) {
        return Err(Error::Config(format!(
            "source power must be positive, got {ps}"
        )));
    }
    let grid = logspace(SCAN_LO, SCAN_HI, SCAN_POINTS);
    let mut vals = Vec::with_capacity(grid.len());
    let mut x1_idx = None;
    for (k, &x) in grid.iter().enumerate() {
        let v = ir_value(dist, x)?;
        if v.is_nan() {
            return Err(Error::Boundary(format!(
                "I_r undefined at x = {x} (zero density)"
            )));
        }
        vals.push(v);
        if v <= 0.0 {
            x1_idx = Some(k);
            break;
        }
    }
    let k1 = x1_idx.ok_or_else(|| Error::Boundary("I_r stays positive on [1e-6, 1e3]".into()))?;
    if k1 == 0 {
        return Err(Error::Boundary(
            "I_r is not positive near the origin".into(),
        ));
    }
    let x1 = try_find_root(
        |x| ir_value(dist, x),
        Bracket::new(grid[k1 - 1], grid[k1])?,
        1e-13 * grid[k1],
    )?;
    let k0 = (1..=k1)
        .rev()
        .find(|&k| vals[k - 1] > ps && vals[k] <= ps)
        .ok_or_else(|| Error::Boundary(format!("I_r never exceeds Ps = {ps} below x1 = {x1}")))?;
    let x0 = try_find_root(
        |x| Ok(ir_value(dist, x)? - ps),
        Bracket::new(grid[k0 - 1], grid[k0].min(x1))?,
        1e-13 * grid[k0],
    )?;
    if !(x0 < x1) {
        return Err(Error::Boundary(format!(
            "support collapsed: x0 = {x0}, x1 = {x1}"
        )));
    }

    let alloc = PowerAllocation::tabulated("opt", ps, x0, x1, |x| residual_interference(dist, x))?;
    check_monotone(dist, &alloc)?;
    Ok(alloc)
}

fn check_monotone(dist: &dyn GainDistribution, alloc: &PowerAllocation) -> Result<()> {
    let (x0, x1) = alloc.support();
    let ps = alloc.ps();
    // Slope tolerance scaled by the average slope over the support.
    let tol = 1e-7 * ps / (x1 - x0);
    let nodes = logspace(x0, x1, 257);
    let mut bad: Option<(f64, f64)> = None;
    for &x in &nodes[1..nodes.len() - 1] {
        let (_, d) = residual_interference(dist, x)?;
        if d > tol {
            bad = Some(match bad {
                None => (x, x),
                Some((lo, _)) => (lo, x),
            });
        }
    }
    match bad {
        Some((lo, hi)) => Err(Error::NonMonotone { lo, hi }),
        None => Ok(()),
    }
}

/// Average layered rate `∫ (1 - F(x)) x rho(x) / (1 + x I(x)) dx` of a fixed
/// allocation under `dist`.
pub fn broadcast_rate(dist: &dyn GainDistribution, alloc: &PowerAllocation) -> Result<f64> {
    if !alloc.is_layered() {
        return Ok(0.0);
    }
    let (x0, x1) = alloc.support();
    Quadrature::new(RATE_TOL)
        .max_intervals(20_000)
        .breakpoints(dist.kinks())
        .try_integrate(
            |x| {
                let tail = 1.0 - dist.cdf(x)?;
                Ok(tail * x * alloc.density(x) / (1.0 + x * alloc.interference(x)))
            },
            x0,
            x1,
        )
}

/// Average rate of the optimal layering in the form
/// `∫_{x0}^{x1} [2 (1 - F)/x + (1 - F) f'/f] dx`.
pub fn broadcast_rate_closed(dist: &dyn GainDistribution, ps: f64) -> Result<f64> {
    let alloc = optimal_allocation(dist, ps)?;
    broadcast_rate_closed_on(dist, &alloc)
}

/// [`broadcast_rate_closed`] with the optimal allocation already built.
pub fn broadcast_rate_closed_on(
    dist: &dyn GainDistribution,
    alloc: &PowerAllocation,
) -> Result<f64> {
    let (x0, x1) = alloc.support();
    Quadrature::new(RATE_TOL)
        .max_intervals(20_000)
        .breakpoints(dist.kinks())
        .try_integrate(
            |x| {
                let tail = 1.0 - dist.cdf(x)?;
                let f = dist.pdf(x)?;
                let fp = dist.pdf_derivative(x)?;
                Ok(2.0 * tail / x + tail * fp / f)
            },
            x0,
            x1,
        )
}

/// Best single-level code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outage {
    pub rate: f64,
    pub threshold: f64,
    /// The objective showed several local maxima.
    pub multimodal: bool,
}

/// `max_x (1 - F(x)) ln(1 + x Ps)`.
pub fn outage_rate(dist: &dyn GainDistribution, ps: f64) -> Result<Outage> {
    if !(ps > 0.0 && ps.is_finite()) {
        return Err(Error::Config(format!(
            "source power must be positive, got {ps}"
        )));
    }
    let m = try_maximize_1d(
        |x| Ok((1.0 - dist.cdf(x)?) * (x * ps).ln_1p()),
        Bracket::new(SCAN_LO, OUTAGE_HI)?,
        1e-12,
    )?;
    Ok(Outage {
        rate: m.value,
        threshold: m.argmax,
        multimodal: m.multimodal,
    })
}

/// Rate decodable at equivalent gain `s`.
pub fn layered_rate(alloc: &PowerAllocation, s: f64) -> f64 {
    alloc.layered_rate(s)
}
