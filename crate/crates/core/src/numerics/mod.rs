//! Special functions, adaptive quadrature, bracketed root finding and 1-D
//! maximization. Everything here is pure and reentrant.

mod optimize;
mod quadrature;
mod roots;
mod special;

pub use optimize::{maximize_1d, try_maximize_1d, Maximum};
pub use quadrature::{
    gauss_legendre_8, integrate, Quadrature, DEFAULT_INNER_TOL, DEFAULT_OUTER_TOL,
};
pub use roots::{find_root, try_find_root, Bracket};
pub use special::{exp_e1_scaled, exp_integral_e1, lambert_w0, EULER_GAMMA};

/// Log-spaced grid of `n >= 2` points from `lo` to `hi` (both positive).
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(lo > 0.0 && hi > 0.0 && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + step * i as f64).exp(),
        })
        .collect()
}

/// Linearly spaced grid of `n >= 2` points from `lo` to `hi`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}
