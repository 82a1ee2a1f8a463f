//! Fractional-operator kernels applied to indicators of `[0, t)`.

use std::f64::consts::PI;

use crate::quad::{gauss_kronrod, tanh_sinh, QuadError, Tolerance};
use crate::special::gamma;

use super::{check_hurst, FbmError};

/// Split point between the near and far pieces of half-line integrals.
const FAR: f64 = 10.0;

/// Value of `M^H_- 1_{[0,t)}` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    /// `x` sits on a point where the kernel is unbounded nearby (`H < 1/2`,
    /// `x ∈ {0, t}`); integrals through it must be treated as improper.
    pub singular: bool,
}

/// `u_+^d`, zero for `u ≤ 0` (including `d = 0`).
fn pos_pow(u: f64, d: f64) -> f64 {
    if u > 0.0 {
        u.powf(d)
    } else {
        0.0
    }
}

/// `(t + v)^d - v^d` for `v > 0` without cancellation.
fn left_difference(t: f64, v: f64, d: f64) -> f64 {
    v.powf(d) * (d * (t / v).ln_1p()).exp_m1()
}

/// `(M^H_- 1_{[0,t)})(x) = (K_H / Γ(H + 1/2)) ((t - x)_+^{H-1/2} - (-x)_+^{H-1/2})`.
pub fn frac_indicator_kernel(hurst: f64, t: f64, x: f64) -> Result<KernelValue, FbmError> {
    check_hurst(hurst)?;
    if !(t > 0.0) {
        return Err(FbmError::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let d = hurst - 0.5;
    let singular = d < 0.0 && (x == 0.0 || x == t);
    let raw = if x < 0.0 { left_difference(t, -x, d) } else { pos_pow(t - x, d) };
    let c = if d == 0.0 { 1.0 } else { k_constant(hurst)? / gamma(hurst + 0.5) };
    Ok(KernelValue { value: c * raw, singular })
}

/// `K_H = Γ(H + 1/2) (∫_0^∞ ((1+s)^{H-1/2} - s^{H-1/2})² ds + 1/(2H))^{-1/2}`,
/// with the integral done numerically.
pub fn k_constant(hurst: f64) -> Result<f64, FbmError> {
    check_hurst(hurst)?;
    let d = hurst - 0.5;
    if d == 0.0 {
        return Ok(1.0);
    }
    let i = half_line_product(1.0, 1.0, d)?;
    Ok(gamma(hurst + 0.5) / (i + 1.0 / (2.0 * hurst)).sqrt())
}

/// `∫_0^∞ ((t1+v)^d - v^d)((t2+v)^d - v^d) dv`.
fn half_line_product(t1: f64, t2: f64, d: f64) -> Result<f64, QuadError> {
    let tol = Tolerance::new(1e-15, 1e-12);
    let g = |v: f64| left_difference(t1, v, d) * left_difference(t2, v, d);
    // near zero: v^{2d}-type endpoint behaviour
    let near = tanh_sinh(|_, v, _| if v > 0.0 { g(v) } else { 0.0 }, 0.0, 1.0, tol)?;
    let mid = gauss_kronrod(g, 1.0, FAR, tol)?;
    // far: v = 1/w, integrand ~ w^{-2d}
    let far = tanh_sinh(
        |_, w, _| {
            if w <= 0.0 {
                return 0.0;
            }
            let a = (d * (t1 * w).ln_1p()).exp_m1() / w;
            let b = (d * (t2 * w).ln_1p()).exp_m1() / w;
            a * b * w.powf(-2.0 * d)
        },
        0.0,
        1.0 / FAR,
        tol,
    )?;
    Ok(near + mid + far)
}

/// `⟨M^H_- 1_{[0,t1)}, M^H_- 1_{[0,t2)}⟩_{L²(ℝ)}` by quadrature, treating
/// the endpoint singularities for `H < 1/2` as improper integrals.
pub fn kernel_inner_product(hurst: f64, t1: f64, t2: f64) -> Result<f64, FbmError> {
    check_hurst(hurst)?;
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(FbmError::InvalidArgument(format!("times must be positive, got {t1}, {t2}")));
    }
    let d = hurst - 0.5;
    if d == 0.0 {
        return Ok(t1.min(t2));
    }
    let (lo, hi) = (t1.min(t2), t1.max(t2));
    let tol = Tolerance::new(1e-15, 1e-12);
    // x ∈ (0, lo): (lo - x)^d (hi - x)^d, singular at x = lo (and at both ends if lo = hi)
    let gap = hi - lo;
    let right = tanh_sinh(|_, _, to_lo| to_lo.powf(d) * (gap + to_lo).powf(d), 0.0, lo, tol)?;
    let left = half_line_product(t1, t2, d)?;
    let c = k_constant(hurst)? / gamma(hurst + 0.5);
    Ok(c * c * (left + right))
}

/// Closed form `K_H = sqrt(Γ(2H+1) sin(πH))`, used to cross-check [`k_constant`].
pub fn k_constant_closed_form(hurst: f64) -> f64 {
    (gamma(2.0 * hurst + 1.0) * (PI * hurst).sin()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::fbm_covariance;
    use approx::assert_relative_eq;

    #[test]
    fn brownian_case_is_indicator() {
        assert_eq!(frac_indicator_kernel(0.5, 1.0, 0.5).unwrap().value, 1.0);
        assert_eq!(frac_indicator_kernel(0.5, 1.0, 1.0).unwrap().value, 0.0);
        assert_eq!(frac_indicator_kernel(0.5, 1.0, -0.2).unwrap().value, 0.0);
        assert_eq!(k_constant(0.5).unwrap(), 1.0);
    }

    #[test]
    fn vanishes_right_of_t() {
        for &h in &[0.2, 0.7] {
            assert_eq!(frac_indicator_kernel(h, 1.0, 1.5).unwrap().value, 0.0);
        }
    }

    #[test]
    fn singular_points_are_flagged() {
        assert!(frac_indicator_kernel(0.3, 1.0, 1.0).unwrap().singular);
        assert!(frac_indicator_kernel(0.3, 1.0, 0.0).unwrap().singular);
        assert!(!frac_indicator_kernel(0.7, 1.0, 1.0).unwrap().singular);
    }

    #[test]
    fn k_matches_closed_form() {
        for &h in &[0.1, 0.25, 0.4, 0.6, 0.75, 0.9] {
            assert_relative_eq!(k_constant(h).unwrap(), k_constant_closed_form(h), max_relative = 1e-9);
        }
    }

    #[test]
    fn inner_products_reproduce_fbm_covariance() {
        for &h in &[0.2, 0.5, 0.8] {
            for &t1 in &[0.5, 1.0, 2.0] {
                for &t2 in &[0.5, 1.0, 2.0] {
                    let v = kernel_inner_product(h, t1, t2).unwrap();
                    assert!((v - fbm_covariance(h, t1, t2)).abs() < 1e-8, "H={h} ({t1},{t2}): {v}");
                }
            }
        }
    }
}
