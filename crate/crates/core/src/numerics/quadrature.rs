use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result};

/// Default absolute tolerance for inner (1-D) integrals.
pub const DEFAULT_INNER_TOL: f64 = 1e-9;
/// Default absolute tolerance for outer expectations.
pub const DEFAULT_OUTER_TOL: f64 = 1e-7;

// 7-point Gauss / 15-point Kronrod abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_804_939_476_142_360_184,
    0.525_532_409_916_328_985_817_739_049_189_254,
    0.796_666_477_413_626_739_591_553_936_475_831,
    0.960_289_856_497_536_231_683_560_868_569_473,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_361_982_965_150_449_277_196,
    0.313_706_645_877_887_287_337_962_201_986_601,
    0.222_381_034_453_374_470_544_355_994_426_241,
    0.101_228_536_290_376_259_152_531_354_309_962,
];

/// Fixed 8-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre_8(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut sum = 0.0;
    for (x, w) in GL8_X.iter().zip(GL8_W.iter()) {
        sum += w * (f(c - h * x) + f(c + h * x));
    }
    sum * h
}

/// Adaptive Gauss-Kronrod integration, `∫_a^b f(x) dx` with `b` possibly
/// `+∞`, to absolute tolerance `abs_tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    Quadrature::new(abs_tol).integrate(f, a, b)
}

/// Adaptive quadrature settings.
///
/// A semi-infinite range `[a, ∞)` is mapped onto `[0, 1)` with
/// `t = a + u / (1 - u)`, which keeps the adaptive refinement near the finite
/// endpoint where the fading densities live.
#[derive(Debug, Clone)]
pub struct Quadrature {
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
    points: Vec<f64>,
}

impl Quadrature {
    pub fn new(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol: 0.0,
            max_intervals: 4000,
            points: Vec::new(),
        }
    }

    pub fn rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n.max(1);
        self
    }

    /// Interior points where the integrand has kinks; the initial partition
    /// is split at every one that falls inside the range.
    pub fn breakpoints(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.points = points.into_iter().filter(|p| p.is_finite()).collect();
        self
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        self.try_integrate(|x| Ok(f(x)), a, b)
    }

    /// Same as [`Quadrature::integrate`] for an integrand that can fail; the
    /// first error aborts the integration.
    pub fn try_integrate(&self, f: impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
        if a.is_nan() || b.is_nan() || a == f64::INFINITY || a == f64::NEG_INFINITY {
            return Err(Error::InvalidBracket { lo: a, hi: b });
        }
        if a == b {
            return Ok(0.0);
        }
        if b < a {
            return self.try_integrate(f, b, a).map(|v| -v);
        }
        if b.is_infinite() {
            let g = |u: f64| -> Result<f64> {
                let om = 1.0 - u;
                let t = a + u / om;
                if !t.is_finite() {
                    return Ok(0.0);
                }
                let v = f(t)? / (om * om);
                Ok(if v.is_finite() { v } else { 0.0 })
            };
            let pts: Vec<f64> = self
                .points
                .iter()
                .filter(|&&p| p > a)
                .map(|&p| (p - a) / (1.0 + p - a))
                .collect();
            return self.adapt(g, 0.0, 1.0, &pts);
        }
        let pts: Vec<f64> = self
            .points
            .iter()
            .copied()
            .filter(|&p| p > a && p < b)
            .collect();
        self.adapt(f, a, b, &pts)
    }

    fn adapt(&self, f: impl Fn(f64) -> Result<f64>, a: f64, b: f64, points: &[f64]) -> Result<f64> {
        let mut edges = Vec::with_capacity(points.len() + 2);
        edges.push(a);
        let mut inner = points.to_vec();
        inner.sort_by(f64::total_cmp);
        edges.extend(inner);
        edges.push(b);
        edges.dedup();

        let mut heap = BinaryHeap::new();
        let (mut total, mut total_err) = (0.0, 0.0);
        for w in edges.windows(2) {
            let seg = Segment::new(&f, w[0], w[1])?;
            total += seg.value;
            total_err += seg.error;
            heap.push(seg);
        }

        let mut n = heap.len();
        loop {
            let tol = self.abs_tol.max(self.rel_tol * total.abs());
            if total_err <= tol {
                break;
            }
            if n >= self.max_intervals {
                return Err(Error::Integration {
                    estimate: total,
                    error: total_err,
                });
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // Interval can no longer be split in floating point.
                return Err(Error::Integration {
                    estimate: total,
                    error: total_err,
                });
            }
            let left = Segment::new(&f, worst.a, mid)?;
            let right = Segment::new(&f, mid, worst.b)?;
            total += left.value + right.value - worst.value;
            total_err += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
            n += 1;
            // Recompute the running sums now and then to keep cancellation
            // from drifting them.
            if n % 64 == 0 {
                total = heap.iter().map(|s| s.value).sum();
                total_err = heap.iter().map(|s| s.error).sum();
            }
        }
        let total: f64 = heap.iter().map(|s| s.value).sum();
        if !total.is_finite() {
            return Err(Error::Integration {
                estimate: total,
                error: f64::INFINITY,
            });
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl Segment {
    fn new(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<Self> {
        let (value, error) = kronrod15(f, a, b)?;
        Ok(Self { a, b, value, error })
    }
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    if !value.is_finite() {
        return Err(Error::Integration {
            estimate: value,
            error: f64::INFINITY,
        });
    }
    Ok((value, err))
}
