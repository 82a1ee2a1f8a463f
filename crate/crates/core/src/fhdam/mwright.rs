//! The M-Wright function `M_β` on `[0, ∞)` and its sampler.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Exp1, Open01};

use crate::quad::{gauss_kronrod, Tolerance};
use crate::special::{ln_gamma, ln_rgamma_envelope, rgamma};

/// Below this argument the power series is used.
const SERIES_CUTOFF: f64 = 1.0;

/// `ln A(φ)` for the Zolotarev–Kanter function
/// `A(φ) = [sin(βφ)/sin φ]^{1/(1-β)} · sin((1-β)φ)/sin(βφ)`, `φ ∈ (0, π)`.
pub fn ln_kanter(beta: f64, phi: f64) -> f64 {
    let sb = (beta * phi).sin();
    (sb.ln() - phi.sin().ln()) / (1.0 - beta) + ((1.0 - beta) * phi).sin().ln() - sb.ln()
}

/// `A(0+) = β^{β/(1-β)} (1-β)`, the minimum of `A` on `(0, π)`.
fn ln_kanter_at_zero(beta: f64) -> f64 {
    beta * beta.ln() / (1.0 - beta) + (1.0 - beta).ln()
}

fn series(beta: f64, y: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = 1.0;
    for k in 0..400 {
        let x = 1.0 - beta - beta * k as f64;
        sum += pow * rgamma(x);
        // |1/Γ| is bounded by its smooth envelope; stop once that bound is negligible
        let bound = pow.abs() * ln_rgamma_envelope(x).exp();
        if k > 4 && bound < 1e-18 * sum.abs() {
            break;
        }
        pow *= -y / (k as f64 + 1.0);
    }
    sum
}

/// `ln M_β(y)` for `y > 0` from the integral over `φ ∈ (0, π)`.
fn ln_integral(beta: f64, y: f64) -> f64 {
    let e = 1.0 / (1.0 - beta);
    let big_y = y.powf(e);
    let a0 = ln_kanter_at_zero(beta).exp();
    let f = |phi: f64| {
        let la = ln_kanter(beta, phi);
        let a = la.exp();
        if !a.is_finite() {
            return 0.0;
        }
        (la - big_y * (a - a0)).exp()
    };
    let integral = gauss_kronrod(f, 0.0, PI, Tolerance::new(1e-300, 1e-13))
        .unwrap_or_else(|e| match e {
            crate::quad::QuadError::NoConvergence { estimate, .. } => estimate,
            crate::quad::QuadError::NonFinite { .. } => f64::NAN,
        });
    integral.ln() - (PI * (1.0 - beta)).ln() + beta * e * y.ln() - big_y * a0
}

/// `ln M_β(y)` for `y ≥ 0`, `β ∈ (0, 1)`.
pub fn ln_m_wright(beta: f64, y: f64) -> f64 {
    if y <= SERIES_CUTOFF {
        series(beta, y).ln()
    } else {
        ln_integral(beta, y)
    }
}

/// `M_β(y)` for `y ≥ 0`, `β ∈ (0, 1)`. `M_β(0) = 1/Γ(1-β)`.
pub fn m_wright(beta: f64, y: f64) -> f64 {
    if y <= SERIES_CUTOFF {
        series(beta, y)
    } else {
        ln_integral(beta, y).exp()
    }
}

/// `E[Z^q] = Γ(1+q)/Γ(1+βq)` for an M-Wright variable, `q > -1`.
pub fn ln_m_wright_moment(beta: f64, q: f64) -> f64 {
    ln_gamma(1.0 + q) - ln_gamma(1.0 + beta * q)
}

/// Log of one M-Wright draw: `(1-β)(ln E - ln A(U))`, `U ~ U(0, π)`,
/// `E ~ Exp(1)`, equivalently `S^{-β}` for a positive β-stable `S`.
pub fn sample_ln_m_wright<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let e: f64 = rng.sample(Exp1);
    (1.0 - beta) * (e.ln() - ln_kanter(beta, PI * u))
}
