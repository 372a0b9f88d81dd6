//! Reference rates: single-user and joint-decoding outage and broadcasting
//! bounds, ergodic capacities and the relay cut-set bound.

use crate::fading::{alloc_joint_opt, JointUpperBound, Strongest, GOLDEN};
use crate::numerics::{exp_e1_scaled, exp_integral_e1, integrate, lambert_w0};
use crate::rate_engine::{broadcast_rate_closed, outage_rate};
use crate::{Error, PowerConfig, Result};

fn check_power(ps: f64) -> Result<()> {
    if ps > 0.0 && ps.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "source power must be positive, got {ps}"
        )))
    }
}

/// Optimal single-level threshold of one Rayleigh receiver,
/// `(Ps - W(Ps)) / (W(Ps) Ps)`.
pub fn outage_threshold(ps: f64) -> Result<f64> {
    check_power(ps)?;
    let w = lambert_w0(ps)?;
    Ok((ps - w) / (w * ps))
}

/// Single-user outage rate `e^{-u*} ln(1 + u* Ps)`.
pub fn outage_lb(ps: f64) -> Result<f64> {
    let u = outage_threshold(ps)?;
    Ok((-u).exp() * (u * ps).ln_1p())
}

/// Single-user broadcasting rate
/// `e^{-1} - e^{-s0} + 2 E1(s0) - 2 E1(1)`, `s0 = 2/(1 + sqrt(1 + 4 Ps))`.
pub fn broadcast_lb(ps: f64) -> Result<f64> {
    check_power(ps)?;
    let s0 = 2.0 / (1.0 + (1.0 + 4.0 * ps).sqrt());
    Ok((-1f64).exp() - (-s0).exp() + 2.0 * exp_integral_e1(s0)? - 2.0 * exp_integral_e1(1.0)?)
}

/// Outage rate of the joint decoder (gain `s1 + s2`).
pub fn outage_ub(ps: f64) -> Result<f64> {
    Ok(outage_rate(&JointUpperBound, ps)?.rate)
}

/// Broadcasting rate of the joint decoder, `g(s1) - g(s0)` with
/// `g(s) = s e^{-s} - e^{-s} - 3 E1(s)`.
pub fn broadcast_ub(ps: f64) -> Result<f64> {
    let s0 = alloc_joint_opt(ps)?.support().0;
    let g = |s: f64| -> Result<f64> {
        let e = (-s).exp();
        Ok(s * e - e - 3.0 * exp_integral_e1(s)?)
    };
    Ok(g(GOLDEN)? - g(s0)?)
}

/// Broadcasting rate of the strongest of the two receivers, the ceiling for
/// decode-and-forward.
pub fn strongest_user_bound(ps: f64) -> Result<f64> {
    broadcast_rate_closed(&Strongest, ps)
}

/// Ergodic capacity with `m` receive antennas, in closed form:
/// `m = 1` gives `e^{1/Ps} E1(1/Ps)` and
/// `m = 2` gives `1 + (1 - 1/Ps) e^{1/Ps} E1(1/Ps)`.
pub fn ergodic_capacity(m: u32, ps: f64) -> Result<f64> {
    check_power(ps)?;
    let a = 1.0 / ps;
    let c1 = exp_e1_scaled(a)?;
    match m {
        1 => Ok(c1),
        2 => Ok(1.0 + (1.0 - a) * c1),
        _ => Err(Error::Config(format!(
            "ergodic capacity implemented for m in {{1, 2}}, got {m}"
        ))),
    }
}

/// Ergodic capacity by direct quadrature of `E ln(1 + s Ps)` with `s`
/// Gamma(m, 1) distributed.
pub fn ergodic_capacity_quadrature(m: u32, ps: f64) -> Result<f64> {
    check_power(ps)?;
    let density = match m {
        1 => |u: f64| (-u).exp(),
        2 => |u: f64| u * (-u).exp(),
        _ => {
            return Err(Error::Config(format!(
                "ergodic capacity implemented for m in {{1, 2}}, got {m}"
            )))
        }
    };
    integrate(|u| density(u) * (u * ps).ln_1p(), 0.0, f64::INFINITY, 1e-11)
}

/// `min{C_erg(1) + C_coop, C_erg(2)}` with the cooperation capacity of the
/// configured link.
pub fn cut_set(cfg: &PowerConfig) -> Result<f64> {
    let c1 = ergodic_capacity(1, cfg.ps())?;
    let c2 = ergodic_capacity(2, cfg.ps())?;
    Ok((c1 + cfg.coop_capacity()).min(c2))
}
