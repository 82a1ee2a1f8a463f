//! One-dimensional quadrature: adaptive Gauss–Kronrod for smooth pieces,
//! tanh–sinh for integrable endpoint singularities, and Gauss–Legendre
//! nodes for fixed-order rules.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error}")]
    NoConvergence { a: f64, b: f64, estimate: f64, error: f64 },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn met(&self, err: f64, value: f64) -> bool {
        err <= self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-14, 1e-12)
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
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

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment, QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite { x: c });
    }
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let (f1, f2) = (f(c - x), f(c + x));
        if !f1.is_finite() {
            return Err(QuadError::NonFinite { x: c - x });
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite { x: c + x });
        }
        k += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    Ok(Segment { a, b, value: k * h, error: ((k - g) * h).abs() })
}

/// Globally adaptive Gauss–Kronrod (7/15) on a finite interval.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64, QuadError> {
    if a == b {
        return Ok(0.0);
    }
    let first = kronrod15(&f, a, b)?;
    let mut total = first.value;
    let mut err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    for _ in 0..4000 {
        if tol.met(err, total) {
            return Ok(total);
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = kronrod15(&f, worst.a, mid)?;
        let right = kronrod15(&f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Recompute from the leaves to drop accumulated round-off in the running sums.
    let total: f64 = heap.iter().map(|s| s.value).sum();
    let err: f64 = heap.iter().map(|s| s.error).sum();
    if tol.met(err, total) {
        Ok(total)
    } else {
        Err(QuadError::NoConvergence { a, b, estimate: total, error: err })
    }
}

/// Tanh–sinh quadrature on `[a, b]`. The integrand receives
/// `(x, x - a, b - x)` with both distances computed without cancellation,
/// so algebraic singularities at either endpoint can be evaluated exactly.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64, QuadError> {
    if a == b {
        return Ok(0.0);
    }
    let half = 0.5 * (b - a);
    let width = b - a;

    // Sum over nodes t = k h for odd k (or all k at level 0).
    let level_sum = |h: f64, step: usize, start: usize| -> Result<f64, QuadError> {
        let mut sum = 0.0;
        let mut small = 0;
        let mut k = start;
        loop {
            let t = k as f64 * h;
            let u = FRAC_PI_2 * t.sinh();
            let e = (-2.0 * u).exp();
            // distance from the nearer endpoint: (b - a) e^{-2u} / (1 + e^{-2u})
            let d = width * e / (1.0 + e);
            if d <= f64::MIN_POSITIVE * 1e3 || d == 0.0 {
                break;
            }
            let cu = u.cosh();
            let w = half * FRAC_PI_2 * t.cosh() / (cu * cu);
            let mut term = 0.0;
            if k == 0 {
                let x = a + half;
                term += w * f(x, half, half);
            } else {
                let (xl, xr) = (a + d, b - d);
                term += w * f(xl, d, width - d);
                term += w * f(xr, width - d, d);
            }
            if !term.is_finite() {
                return Err(QuadError::NonFinite { x: a + d });
            }
            sum += term;
            if term.abs() <= 1e-20 * sum.abs() {
                small += 1;
                if small >= 3 {
                    break;
                }
            } else {
                small = 0;
            }
            k += step;
        }
        Ok(sum)
    };

    let mut h = 1.0;
    let mut sum = level_sum(h, 1, 0)?;
    let mut estimate = sum * h;
    for level in 1..=14 {
        h *= 0.5;
        sum += level_sum(h, 2, 1)?;
        let next = sum * h;
        let err = (next - estimate).abs();
        estimate = next;
        if level >= 3 && tol.met(err, estimate) {
            return Ok(estimate);
        }
    }
    Err(QuadError::NoConvergence { a, b, estimate, error: f64::NAN })
}

/// Plain integrand adapter for [`tanh_sinh`].
pub fn tanh_sinh_plain<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64, QuadError> {
    tanh_sinh(|x, _, _| f(x), a, b, tol)
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = x;
                p0 = 1.0;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
