use crate::fhdam::FhdamSpec;
use crate::special::ln_gamma;

use super::contour::gwf_contour;
use super::{SeriesPolicy, WrightError, WrightParams, A_STAR_EPS};

/// Ratio Σ|term| / |sum| above which an alternating series is considered
/// too cancellation-prone and the contour representation is used instead.
const CANCELLATION_LIMIT: f64 = 1e3;

/// Raw result of a power-series summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOutcome {
    pub value: f64,
    pub terms: usize,
    /// Σ|term| / |Σ term|; 1 for series with terms of one sign.
    pub condition: f64,
}

/// Sums the power series of Ψ at `z` without any radius or conditioning
/// checks. Terms are formed on the log scale, so partial sums are kept as
/// `mantissa · e^{scale}` until the end.
pub fn gwf_series(params: &WrightParams, z: f64, policy: &SeriesPolicy) -> Result<SeriesOutcome, WrightError> {
    policy.validate()?;
    if !z.is_finite() {
        return Err(WrightError::InvalidArgument(format!("z must be finite, got {z}")));
    }
    let ln_abs_z = z.abs().ln();
    let negative = z < 0.0;

    let mut scale = f64::NEG_INFINITY;
    let mut sum = 0.0_f64;
    let mut abs_sum = 0.0_f64;
    let mut prev_ln = f64::INFINITY;
    let mut quiet = 0;

    for k in 0..policy.max_terms {
        let kf = k as f64;
        let ln_term = if k == 0 {
            params.ln_moment_kernel(0.0)
        } else {
            params.ln_moment_kernel(kf) - ln_gamma(kf + 1.0) + kf * ln_abs_z
        };
        if ln_term.is_nan() {
            return Err(WrightError::InvalidArgument(format!("non-finite coefficient at k = {k}")));
        }
        let sign = if negative && k % 2 == 1 { -1.0 } else { 1.0 };
        if ln_term > scale {
            let r = (scale - ln_term).exp();
            sum *= r;
            abs_sum *= r;
            scale = ln_term;
        }
        let t = (ln_term - scale).exp();
        sum += sign * t;
        abs_sum += t;

        if k == 0 && z == 0.0 {
            return finish(sum, abs_sum, scale, 1, z);
        }

        let term_abs = ln_term.exp();
        let partial = sum.abs() * scale.exp();
        if term_abs < policy.abs_tol + policy.rel_tol * partial && ln_term < prev_ln {
            quiet += 1;
            if quiet >= 3 {
                return finish(sum, abs_sum, scale, k + 1, z);
            }
        } else {
            quiet = 0;
        }
        prev_ln = ln_term;
    }
    Err(WrightError::NoConvergence { terms: policy.max_terms, z })
}

fn finish(sum: f64, abs_sum: f64, scale: f64, terms: usize, z: f64) -> Result<SeriesOutcome, WrightError> {
    if sum != 0.0 && sum.abs().ln() + scale > f64::MAX.ln() {
        return Err(WrightError::Overflow { z });
    }
    let value = sum * scale.exp();
    let condition = if sum == 0.0 { f64::INFINITY } else { abs_sum / sum.abs() };
    Ok(SeriesOutcome { value, terms, condition })
}

/// Evaluates Ψ at `z` for any parameter set, valid or not.
///
/// Inside the radius of convergence the power series is used. For `z < 0`
/// the Mellin–Barnes representation takes over when the series is outside
/// its radius, fails to converge, or cancels too heavily. The contour needs
/// every `b_j + β_j > 0` and every weight positive.
pub fn gwf_eval_unchecked(params: &WrightParams, z: f64, policy: &SeriesPolicy) -> Result<f64, WrightError> {
    policy.validate()?;
    let radius = params.series_radius();
    let in_radius = radius.is_infinite() || z.abs() < 0.9 * radius;
    let contour_ok = z < 0.0
        && params.lower.iter().all(|q| q.weight > 0.0 && q.shift + q.weight > 0.0)
        && params.upper.iter().all(|q| q.weight > 0.0)
        && params.constants().a_star > -1.0 + A_STAR_EPS;
    if in_radius {
        match gwf_series(params, z, policy) {
            Ok(out) if !contour_ok || out.condition <= CANCELLATION_LIMIT => return Ok(out.value),
            Ok(_) | Err(WrightError::NoConvergence { .. }) if contour_ok => {}
            other => return other.map(|o| o.value),
        }
    }
    if contour_ok {
        return gwf_contour(params, -z);
    }
    Err(WrightError::OutsideRadius { z, radius })
}

/// Evaluates the generalized Wright function of a validated spec at `z`.
///
/// Returns the unnormalized value, so `gwf_eval(spec, 0, _) = K`.
pub fn gwf_eval(spec: &FhdamSpec, z: f64, policy: &SeriesPolicy) -> Result<f64, WrightError> {
    gwf_eval_unchecked(spec.params(), z, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wright::{validate_params, Pair};
    use approx::assert_relative_eq;
    use libm::erfc;

    fn ml_half(z: f64) -> f64 {
        // E_{1/2}(z) = e^{z²} erfc(-z)
        (z * z).exp() * erfc(-z)
    }

    #[test]
    fn empty_lists_give_exponential() {
        let spec = validate_params(WrightParams::degenerate()).unwrap();
        assert_relative_eq!(gwf_eval(&spec, 1.0, &SeriesPolicy::default()).unwrap(), std::f64::consts::E, max_relative = 1e-14);
        assert_relative_eq!(gwf_eval(&spec, -30.0, &SeriesPolicy::default()).unwrap(), (-30f64).exp(), max_relative = 1e-6);
    }

    #[test]
    fn equal_gamma_ratio_gives_exponential() {
        let p = WrightParams::new(vec![Pair::new(0.0, 1.0)], vec![Pair::new(0.0, 1.0)]);
        let v = gwf_eval_unchecked(&p, -2.0, &SeriesPolicy::default()).unwrap();
        assert_relative_eq!(v, (-2f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn mittag_leffler_half_matches_erfc_identity() {
        let spec = validate_params(WrightParams::m_wright(0.5)).unwrap();
        for &z in &[-0.5, -1.0, -2.0, -5.0, -12.0, 0.7] {
            let v = gwf_eval(&spec, z, &SeriesPolicy::default()).unwrap();
            assert_relative_eq!(v, ml_half(z), max_relative = 1e-9);
        }
    }

    #[test]
    fn zero_argument_returns_k() {
        let p = WrightParams::new(vec![Pair::new(0.3, 0.4)], vec![Pair::new(0.2, 0.9)]);
        let spec = validate_params(p.clone()).unwrap();
        let v = gwf_eval(&spec, 0.0, &SeriesPolicy::default()).unwrap();
        assert_eq!(v, spec.constants().k_norm);
    }

    #[test]
    fn exponential_law_laplace_transform_past_radius() {
        // Ψ for Exp(1) is Σ k! z^k / k! = 1/(1-z), radius 1.
        let spec = validate_params(WrightParams::gamma(0.0, 1.0)).unwrap();
        for &s in &[0.5, 2.0, 5.0, 40.0] {
            let v = gwf_eval(&spec, -s, &SeriesPolicy::default()).unwrap();
            assert_relative_eq!(v, 1.0 / (1.0 + s), max_relative = 1e-10);
        }
        let err = gwf_eval(&spec, 2.0, &SeriesPolicy::default()).unwrap_err();
        assert_eq!(err.kind(), "OutsideRadius");
    }

    #[test]
    fn max_terms_surfaces_no_convergence() {
        let spec = validate_params(WrightParams::degenerate()).unwrap();
        let policy = SeriesPolicy { max_terms: 3, ..Default::default() };
        assert_eq!(gwf_eval(&spec, 5.0, &policy).unwrap_err().kind(), "NoConvergence");
    }

    #[test]
    fn overflow_is_reported() {
        let spec = validate_params(WrightParams::degenerate()).unwrap();
        assert_eq!(gwf_eval(&spec, 800.0, &SeriesPolicy::default()).unwrap_err().kind(), "Overflow");
        // e^{700} is representable even though individual partial sums pass through large scales
        let v = gwf_eval(&spec, 700.0, &SeriesPolicy::default()).unwrap();
        assert_relative_eq!(v, 700f64.exp(), max_relative = 1e-10);
    }
}
