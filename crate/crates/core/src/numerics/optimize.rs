use super::{linspace, logspace, Bracket};
use crate::Result;

/// Result of [`maximize_1d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub argmax: f64,
    pub value: f64,
    /// The scan saw more than one strict local maximum.
    pub multimodal: bool,
    /// The scan saw (numerically) the same value everywhere.
    pub plateau: bool,
}

const SCAN_POINTS: usize = 512;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes `f` over `bracket`: a 512-point scan (log-spaced when the
/// bracket is positive, linear otherwise) followed by golden-section
/// refinement around the best scan point, to an argmax width of `tol`.
pub fn maximize_1d(f: impl Fn(f64) -> f64, bracket: Bracket, tol: f64) -> Maximum {
    try_maximize_1d(|x| Ok(f(x)), bracket, tol).expect("infallible objective")
}

/// [`maximize_1d`] for a fallible objective. Non-finite values count as
/// `-inf`.
pub fn try_maximize_1d(
    f: impl Fn(f64) -> Result<f64>,
    bracket: Bracket,
    tol: f64,
) -> Result<Maximum> {
    let eval = |x: f64| -> Result<f64> {
        let v = f(x)?;
        Ok(if v.is_nan() { f64::NEG_INFINITY } else { v })
    };
    let grid = if bracket.lo() > 0.0 {
        logspace(bracket.lo(), bracket.hi(), SCAN_POINTS)
    } else {
        linspace(bracket.lo(), bracket.hi(), SCAN_POINTS)
    };
    let values = grid.iter().map(|&x| eval(x)).collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let vmax = values[best];
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = vmax.abs().max(vmin.abs()).max(f64::MIN_POSITIVE);
    let plateau = (vmax - vmin) <= 1e-12 * scale;

    let mut peaks = 0;
    let n = values.len();
    for i in 0..n {
        let left = if i == 0 {
            f64::NEG_INFINITY
        } else {
            values[i - 1]
        };
        let right = if i + 1 == n {
            f64::NEG_INFINITY
        } else {
            values[i + 1]
        };
        if values[i] > left && values[i] > right {
            peaks += 1;
        }
    }
    let multimodal = !plateau && peaks > 1;

    if plateau {
        return Ok(Maximum {
            argmax: grid[best],
            value: vmax,
            multimodal,
            plateau,
        });
    }

    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(n - 1)];
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while (b - a) > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1)?;
        }
        if x2 <= x1 {
            break;
        }
    }
    let (mut argmax, mut value) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if vmax > value {
        argmax = grid[best];
        value = vmax;
    }
    Ok(Maximum {
        argmax,
        value,
        multimodal,
        plateau,
    })
}
