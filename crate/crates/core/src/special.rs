//! Gamma-family helpers shared by the series, contour and moment code.
//!
//! Real log-gamma and digamma come from `statrs`; the complex log-gamma used
//! on Mellin–Barnes contours is a Lanczos approximation with reflection.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

pub use statrs::function::gamma::{digamma, gamma, ln_gamma};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-gamma on the complex plane (any branch of the imaginary part; callers
/// only exponentiate or take the real part).
pub fn ln_gamma_complex(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // Γ(z)Γ(1-z) = π / sin(πz)
        Complex64::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma_complex(Complex64::new(1.0, 0.0) - z)
    } else {
        let z = z - 1.0;
        let mut acc = Complex64::new(LANCZOS_COEF[0], 0.0);
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += *c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (z + 0.5) * t.ln() - t + LN_SQRT_2PI + acc.ln()
    }
}

/// ln(sin(πz)) without overflow for large |Im z|.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    if z.im.abs() < 1.0 {
        return (z * PI).sin().ln();
    }
    if z.im < 0.0 {
        return ln_sin_pi(z.conj()).conj();
    }
    // sin(πz) = e^{-iπz} (1 - e^{2iπz}) / (2i), with |e^{2iπz}| = e^{-2π Im z} small.
    let i = Complex64::new(0.0, 1.0);
    let small = (i * 2.0 * PI * z).exp();
    // e^{-iπz}(e^{2iπz} - 1)/(2i) = e^{-iπz}(1 - e^{2iπz}) · i/2
    -i * PI * z + (Complex64::new(1.0, 0.0) - small).ln() + Complex64::new(0.5f64.ln(), FRAC_PI_2)
}

/// ln|1/Γ(x)| together with the sign of 1/Γ(x), for any real x.
/// Zeros of 1/Γ (non-positive integers) give `(-inf, 0.0)`.
pub fn ln_abs_rgamma(x: f64) -> (f64, f64) {
    if x > 0.0 {
        return (-ln_gamma(x), 1.0);
    }
    if x == x.floor() {
        return (f64::NEG_INFINITY, 0.0);
    }
    // 1/Γ(x) = sin(πx) Γ(1-x) / π
    let s = (PI * x).sin();
    (s.abs().ln() + ln_gamma(1.0 - x) - PI.ln(), s.signum())
}

/// 1/Γ(x) for any real x.
pub fn rgamma(x: f64) -> f64 {
    let (l, s) = ln_abs_rgamma(x);
    if s == 0.0 {
        0.0
    } else {
        s * l.exp()
    }
}

/// Upper envelope of ln|1/Γ(x)|: drops the oscillating |sin(πx)| factor for
/// x below 1/2 so the result is smooth in x.
pub fn ln_rgamma_envelope(x: f64) -> f64 {
    if x >= 0.5 {
        -ln_gamma(x)
    } else {
        ln_gamma(1.0 - x) - PI.ln()
    }
}

/// Numerically stable log(e^a + e^b).
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn complex_ln_gamma_matches_real_axis() {
        for &x in &[0.1, 0.5, 1.0, 1.5, 3.7, 10.0, 42.5, 170.3] {
            let z = ln_gamma_complex(Complex64::new(x, 0.0));
            assert_relative_eq!(z.re, ln_gamma(x), max_relative = 1e-13, epsilon = 1e-13);
        }
    }

    #[test]
    fn complex_ln_gamma_reflection_on_negative_axis() {
        for &x in &[-0.3, -1.7, -4.25] {
            let z = ln_gamma_complex(Complex64::new(x, 0.0));
            let (l, _) = ln_abs_rgamma(x);
            assert_relative_eq!(z.re, -l, max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma_of_imaginary_unit() {
        // |Γ(iy)|² = π / (y sinh(πy))
        for &y in &[0.5, 1.0, 3.0, 20.0, 150.0] {
            let z = ln_gamma_complex(Complex64::new(0.0, y));
            let expected = 0.5 * (PI / (y * (PI * y).sinh())).ln();
            assert_relative_eq!(z.re, expected, max_relative = 1e-11);
        }
        // |Γ(1/2 + iy)|² = π / cosh(πy)
        for &y in &[0.5, 4.0, 60.0] {
            let z = ln_gamma_complex(Complex64::new(0.5, y));
            let expected = 0.5 * (PI / (PI * y).cosh()).ln();
            assert_relative_eq!(z.re, expected, max_relative = 1e-11);
        }
    }

    #[test]
    fn complex_recurrence_holds() {
        let z = Complex64::new(0.3, 2.2);
        let lhs = ln_gamma_complex(z + 1.0).exp();
        let rhs = z * ln_gamma_complex(z).exp();
        assert_relative_eq!(lhs.re, rhs.re, max_relative = 1e-12);
        assert_relative_eq!(lhs.im, rhs.im, max_relative = 1e-12);
    }

    #[test]
    fn rgamma_zeros_and_values() {
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-3.0), 0.0);
        assert_relative_eq!(rgamma(-0.5), -1.0 / (2.0 * PI.sqrt()), max_relative = 1e-13);
        assert_relative_eq!(rgamma(5.0), 1.0 / 24.0, max_relative = 1e-13);
    }

    #[test]
    fn log_add_exp_is_stable() {
        assert_relative_eq!(log_add_exp(1000.0, 1000.0), 1000.0 + 2f64.ln());
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
    }
}
