//! Vertical-line Mellin–Barnes integrals.
//!
//! Two integrands are handled, both real on the real axis so that the line
//! integral folds onto `(1/π) ∫_0^∞ Re F(c + iy) dy`:
//!
//! * the density `Π_j Γ(b_j + β_j s) / Π_i Γ(a_i + α_i s) · τ^{-s}`;
//! * the continuation of Ψ to negative arguments,
//!   `Γ(t) Π_j Γ(B_j - β_j t) / Π_i Γ(A_i - α_i t) · x^{-t}` with
//!   `B = b + β`, `A = a + α`, whose residues at `t = -k` rebuild the series.
//!
//! Integrands are analytic in a strip around the line, so the trapezoid rule
//! converges geometrically; the node spacing is tied to the distance from
//! the nearest pole and checked against the half-resolution sum.

use num_complex::Complex64;

use crate::fhdam::FhdamSpec;
use crate::special::{ln_gamma, ln_gamma_complex, ln_rgamma_envelope};

use super::{WrightError, WrightParams};

/// `ln(1e16)`: integrand magnitudes this far below the peak are dropped.
const LN_TRUNCATION: f64 = 36.841_361_487_904_734;
const MAX_SCAN_Y: f64 = 1e6;
const MAX_NODES: usize = 1 << 22;
/// Relative agreement (to the L1 norm) between the full and half-resolution
/// trapezoid sums. The full sum is then accurate to roughly its square.
const HALF_STEP_TOL: f64 = 1e-7;

/// Result of a line integral together with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineIntegral {
    pub value: f64,
    /// `(1/π) ∫ |F| dy`, the scale against which cancellation is judged.
    pub l1: f64,
    pub line: f64,
    pub step: f64,
    pub nodes: usize,
    /// `|I_h - I_{2h}|`.
    pub half_step_diff: f64,
}

fn log_density_integrand(params: &WrightParams, ln_tau: f64, s: Complex64) -> Complex64 {
    let mut acc = -s * ln_tau;
    for q in &params.lower {
        acc += ln_gamma_complex(s * q.weight + q.shift);
    }
    for q in &params.upper {
        acc -= ln_gamma_complex(s * q.weight + q.shift);
    }
    acc
}

fn log_continuation_integrand(params: &WrightParams, ln_x: f64, t: Complex64) -> Complex64 {
    let mut acc = ln_gamma_complex(t) - t * ln_x;
    for q in &params.lower {
        acc += ln_gamma_complex(-t * q.weight + (q.shift + q.weight));
    }
    for q in &params.upper {
        acc -= ln_gamma_complex(-t * q.weight + (q.shift + q.weight));
    }
    acc
}

/// Smallest `y` beyond which `|F(c+iy)|` stays below `peak · 1e-16`.
fn truncation_point<G: Fn(Complex64) -> Complex64>(g: &G, c: f64) -> Result<f64, WrightError> {
    let mut peak = f64::NEG_INFINITY;
    let mut y = 0.0;
    let mut below = 0;
    let mut last_above = 0.0_f64;
    while y <= MAX_SCAN_Y {
        let v = g(Complex64::new(c, y)).re;
        if v > peak {
            peak = v;
        }
        if v < peak - LN_TRUNCATION {
            below += 1;
            if below >= 3 {
                return Ok(last_above.max(1.0));
            }
        } else {
            below = 0;
            last_above = y;
        }
        y += (0.01 * y).max(0.25);
    }
    Err(WrightError::QuadratureNonConvergent(format!(
        "integrand on Re = {c} still above 1e-16 of its peak at |Im| = {MAX_SCAN_Y}"
    )))
}

/// Trapezoid sum of `(1/π) ∫_0^Y Re exp(g(c+iy) - shift) dy`, rescaled by `e^{shift}`.
fn trapezoid<G: Fn(Complex64) -> Complex64>(g: &G, c: f64, y_max: f64, h: f64, shift: f64) -> Result<LineIntegral, WrightError> {
    let n = (y_max / h).ceil() as usize;
    if n > MAX_NODES {
        return Err(WrightError::QuadratureNonConvergent(format!(
            "{n} nodes needed on Re = {c} (step {h}, cut-off {y_max})"
        )));
    }
    let (mut even, mut odd, mut l1) = (0.0, 0.0, 0.0);
    for k in 0..=n {
        let v = (g(Complex64::new(c, k as f64 * h)) - shift).exp();
        if !(v.re.is_finite()) {
            return Err(WrightError::QuadratureNonConvergent(format!(
                "non-finite integrand at {c} + {}i",
                k as f64 * h
            )));
        }
        let w = if k == 0 { 0.5 } else { 1.0 };
        if k % 2 == 0 {
            even += w * v.re;
        } else {
            odd += v.re;
        }
        l1 += w * v.norm();
    }
    let scale = shift.exp() * h / std::f64::consts::PI;
    let full = (even + odd) * scale;
    let coarse = 2.0 * even * scale;
    Ok(LineIntegral {
        value: full,
        l1: l1 * scale,
        line: c,
        step: h,
        nodes: n + 1,
        half_step_diff: (full - coarse).abs(),
    })
}

/// Refines the step until the full and half-resolution sums agree.
fn adaptive_line<G: Fn(Complex64) -> Complex64>(g: &G, c: f64, pole_distance: f64, shift: f64) -> Result<LineIntegral, WrightError> {
    let y_max = truncation_point(g, c)?;
    let mut h = pole_distance.min(2.0) / 6.0;
    let mut last = None;
    for _ in 0..4 {
        let r = trapezoid(g, c, y_max, h, shift)?;
        if r.half_step_diff <= HALF_STEP_TOL * r.l1 {
            return Ok(r);
        }
        last = Some(r);
        h *= 0.5;
    }
    let r = last.expect("at least one pass");
    Err(WrightError::QuadratureNonConvergent(format!(
        "half-step difference {} against L1 {} on Re = {c}",
        r.half_step_diff, r.l1
    )))
}

/// Grid search followed by golden-section refinement of a 1-d function.
fn minimize(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    const GRID: usize = 200;
    let geometric = lo > 0.0 && hi / lo > 50.0;
    let at = |i: usize| {
        let u = i as f64 / GRID as f64;
        if geometric {
            lo * (hi / lo).powf(u)
        } else {
            lo + (hi - lo) * u
        }
    };
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..=GRID {
        let v = f(at(i));
        if v < best_v {
            best_v = v;
            best = i;
        }
    }
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(GRID)));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    if f(x) <= best_v {
        x
    } else {
        at(best)
    }
}

/// Real-axis envelope of `ln|F|` for the density integrand.
fn density_envelope(params: &WrightParams, ln_tau: f64, s: f64) -> f64 {
    let num: f64 = params.lower.iter().map(|q| ln_gamma(q.shift + q.weight * s)).sum();
    let den: f64 = params.upper.iter().map(|q| ln_rgamma_envelope(q.shift + q.weight * s)).sum();
    num + den - s * ln_tau
}

fn check_line(params: &WrightParams, gamma_line: f64) -> Result<f64, WrightError> {
    let rightmost = params.rightmost_pole();
    if !gamma_line.is_finite() {
        return Err(WrightError::InvalidArgument(format!("gamma_line must be finite, got {gamma_line}")));
    }
    for q in &params.lower {
        // poles -(b + l)/β, l = 0, 1, ...; nearest l to the line
        let l = (-(gamma_line * q.weight) - q.shift).round().max(0.0);
        let pole = -(q.shift + l) / q.weight;
        if (gamma_line - pole).abs() < 1e-6 {
            return Err(WrightError::ContourTooClose { gamma_line, pole });
        }
    }
    if gamma_line <= rightmost {
        return Err(WrightError::ContourLeftOfPoles { gamma_line, pole: rightmost });
    }
    Ok(rightmost)
}

/// Saddle-point choice of the vertical line for the density integrand at `tau`.
pub fn auto_gamma_line(params: &WrightParams, tau: f64) -> f64 {
    let rightmost = params.rightmost_pole();
    let base = if rightmost.is_finite() { rightmost } else { 0.0 };
    let ln_tau = tau.ln();
    base + minimize(|d| density_envelope(params, ln_tau, base + d), 0.25, 200.0)
}

fn density_preconditions(spec: &FhdamSpec, tau: f64) -> Result<(), WrightError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(WrightError::InvalidArgument(format!("tau must be positive and finite, got {tau}")));
    }
    if spec.params().lower.is_empty() {
        return Err(WrightError::InvalidArgument(
            "the degenerate law has no density".to_string(),
        ));
    }
    Ok(())
}

/// Density at `tau` from the Mellin–Barnes integral on `Re s = gamma_line`,
/// with `n_nodes` trapezoid nodes on the folded half-line. Intended as an
/// independent check on closed forms, not as the production path.
///
/// Fails with `QuadratureNonConvergent` when the sums over all nodes and
/// over every other node disagree by more than `1e-7` of the L1 norm.
pub fn mellin_barnes_density(spec: &FhdamSpec, tau: f64, gamma_line: f64, n_nodes: usize) -> Result<f64, WrightError> {
    density_preconditions(spec, tau)?;
    if n_nodes < 3 {
        return Err(WrightError::InvalidArgument(format!("n_nodes must be at least 3, got {n_nodes}")));
    }
    let params = spec.params();
    check_line(params, gamma_line)?;
    let ln_tau = tau.ln();
    let g = |s: Complex64| log_density_integrand(params, ln_tau, s);
    let y_max = truncation_point(&g, gamma_line)?;
    let h = y_max / (n_nodes - 1) as f64;
    let shift = density_envelope(params, ln_tau, gamma_line);
    let r = trapezoid(&g, gamma_line, y_max, h, shift)?;
    if r.half_step_diff > HALF_STEP_TOL * r.l1 {
        return Err(WrightError::QuadratureNonConvergent(format!(
            "{n_nodes} nodes on Re = {gamma_line}: half-step difference {} against L1 {}",
            r.half_step_diff, r.l1
        )));
    }
    Ok(r.value / spec.constants().k_norm)
}

/// [`mellin_barnes_density`] with the line placed at the saddle point of the
/// integrand and the node spacing chosen from the distance to the poles.
pub fn mellin_barnes_density_auto(spec: &FhdamSpec, tau: f64) -> Result<LineIntegral, WrightError> {
    density_preconditions(spec, tau)?;
    let params = spec.params();
    let gamma_line = auto_gamma_line(params, tau);
    let rightmost = check_line(params, gamma_line)?;
    let ln_tau = tau.ln();
    let g = |s: Complex64| log_density_integrand(params, ln_tau, s);
    let shift = density_envelope(params, ln_tau, gamma_line);
    let mut r = adaptive_line(&g, gamma_line, gamma_line - rightmost, shift)?;
    let k = spec.constants().k_norm;
    r.value /= k;
    r.l1 /= k;
    r.half_step_diff /= k;
    Ok(r)
}

/// Ψ(-x) for `x > 0` from its Mellin–Barnes representation.
pub fn gwf_contour(params: &WrightParams, x: f64) -> Result<f64, WrightError> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(WrightError::InvalidArgument(format!("contour evaluation needs x > 0, got {x}")));
    }
    // strip of analyticity 0 < Re t < min (b_j + β_j)/β_j
    let c_max = params
        .lower
        .iter()
        .map(|q| (q.shift + q.weight) / q.weight)
        .fold(f64::INFINITY, f64::min);
    let ln_x = x.ln();
    let envelope = |c: f64| {
        let mut acc = ln_gamma(c) - c * ln_x;
        for q in &params.lower {
            acc += ln_gamma(q.shift + q.weight - q.weight * c);
        }
        for q in &params.upper {
            acc += ln_rgamma_envelope(q.shift + q.weight - q.weight * c);
        }
        acc
    };
    let (c, dist) = if c_max.is_finite() {
        let margin = (0.25f64).min(c_max / 4.0);
        let c = minimize(envelope, margin, c_max - margin);
        (c, c.min(c_max - c))
    } else {
        let c = minimize(envelope, 0.25, 2.0 * x + 10.0);
        (c, c)
    };
    let g = |t: Complex64| log_continuation_integrand(params, ln_x, t);
    let r = adaptive_line(&g, c, dist, envelope(c))?;
    Ok(r.value)
}
