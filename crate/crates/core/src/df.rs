//! Decode-and-forward cooperation.
//!
//! When the helper is the stronger receiver it forwards the layers it
//! decoded beyond the destination's, up to the capacity of the cooperation
//! link. There is nothing to gain from a second session.

use crate::fading::PowerAllocation;
use crate::numerics::Quadrature;
use crate::{Error, FadingPair, PowerConfig, Result};

const OUTER_TOL: f64 = 1e-10;
const INNER_TOL: f64 = 1e-12;

/// Destination rate for one realization, `min{R(s1) + C, R(s2)}` when the
/// helper is stronger and `R(s1)` otherwise.
pub fn df_rate_pair(pair: FadingPair, alloc: &PowerAllocation, c_coop: f64) -> Result<f64> {
    if !(c_coop >= 0.0) {
        return Err(Error::Domain {
            what: "cooperation capacity",
            value: c_coop,
        });
    }
    let r1 = alloc.layered_rate(pair.s1);
    if pair.s2 > pair.s1 {
        Ok((r1 + c_coop).min(alloc.layered_rate(pair.s2)))
    } else {
        Ok(r1)
    }
}

// Rate density R'(s) = s rho(s) / (1 + s I(s)).
fn rate_density(alloc: &PowerAllocation, s: f64) -> f64 {
    s * alloc.density(s) / (1.0 + s * alloc.interference(s))
}

/// Average DF rate over independent Rayleigh gains for a fixed layering and
/// cooperation capacity.
///
/// Integrating the helper's gain by parts reduces the expectation to
///
/// ```text
/// E[R(s1)] + ∫ e^{-s1} ∫_{s1}^{s*(s1)} e^{-s} R'(s) ds ds1
/// ```
///
/// with `s*` the gain where `R(s*) = R(s1) + C`, beyond which the link
/// capacity binds.
pub fn df_avg_rate_with_capacity(alloc: &PowerAllocation, c_coop: f64) -> Result<f64> {
    if !(c_coop >= 0.0) {
        return Err(Error::Domain {
            what: "cooperation capacity",
            value: c_coop,
        });
    }
    if !alloc.is_layered() {
        return Ok(0.0);
    }
    let (x0, x1) = alloc.support();
    let r_max = alloc.max_rate();
    let inner = |s1: f64| -> Result<f64> {
        let lo = s1.max(x0);
        let hi = alloc.gain_for_rate(alloc.layered_rate(s1) + c_coop).min(x1);
        if hi <= lo {
            return Ok(0.0);
        }
        Quadrature::new(INNER_TOL).rel_tol(1e-12).try_integrate(
            |s| Ok((-s).exp() * rate_density(alloc, s)),
            lo,
            hi,
        )
    };
    // Beyond s_c the capacity no longer binds for any stronger helper.
    let s_c = if c_coop >= r_max {
        x0
    } else {
        alloc.gain_for_rate(r_max - c_coop)
    };
    let own = Quadrature::new(OUTER_TOL).breakpoints([x1]).integrate(
        |s| (-s).exp() * rate_density(alloc, s),
        x0,
        f64::INFINITY,
    )?;
    let help = Quadrature::new(OUTER_TOL)
        .breakpoints([x0, s_c])
        .try_integrate(|s1| Ok((-s1).exp() * inner(s1)?), 0.0, x1)?;
    Ok(own + help)
}

/// Average DF rate with the capacity of the configured cooperation link.
pub fn df_avg_rate(alloc: &PowerAllocation, cfg: &PowerConfig) -> Result<f64> {
    df_avg_rate_with_capacity(alloc, cfg.coop_capacity())
}
