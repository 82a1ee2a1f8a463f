//! Generalized Wright functions and Fox-H parameter sets.
//!
//! A parameter set is two lists of `(shift, weight)` pairs: the upper list
//! `(a_i, α_i)` and the lower list `(b_j, β_j)` of `H^{m,0}_{p,m}`. The
//! associated generalized Wright function is
//!
//! ```text
//! Ψ(z) = Σ_k Π_j Γ(b_j + β_j (k+1)) / Π_i Γ(a_i + α_i (k+1)) · z^k / k!
//! ```
//!
//! which equals `K · E[exp(z Y)]` for `z ≤ 0` when `Y` has the Fox-H density
//! of the same parameters.

mod contour;
mod series;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fhdam::FhdamSpec;
use crate::special::ln_gamma;

pub use contour::{
    auto_gamma_line, gwf_contour, mellin_barnes_density, mellin_barnes_density_auto, LineIntegral,
};
pub use series::{gwf_eval, gwf_eval_unchecked, gwf_series, SeriesOutcome};

/// One `(shift, weight)` pair. Serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Pair {
    pub shift: f64,
    pub weight: f64,
}

impl Pair {
    pub const fn new(shift: f64, weight: f64) -> Self {
        Self { shift, weight }
    }
}

impl From<(f64, f64)> for Pair {
    fn from((shift, weight): (f64, f64)) -> Self {
        Self { shift, weight }
    }
}

impl From<Pair> for (f64, f64) {
    fn from(p: Pair) -> Self {
        (p.shift, p.weight)
    }
}

/// Which parameter list an offending pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamList {
    Upper,
    Lower,
}

impl std::fmt::Display for ParamList {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamList::Upper => f.write_str("upper"),
            ParamList::Lower => f.write_str("lower"),
        }
    }
}

/// Upper `(a_i, α_i)` and lower `(b_j, β_j)` lists of a Fox-H density.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WrightParams {
    #[serde(default)]
    pub upper: Vec<Pair>,
    #[serde(default)]
    pub lower: Vec<Pair>,
}

impl WrightParams {
    pub fn new(upper: Vec<Pair>, lower: Vec<Pair>) -> Self {
        Self { upper, lower }
    }

    /// Empty lists: the degenerate law concentrated at 1.
    pub fn degenerate() -> Self {
        Self::default()
    }

    /// Gamma-type single factor `lower = [(b, β)]`.
    pub fn gamma(b: f64, beta: f64) -> Self {
        Self::new(vec![], vec![Pair::new(b, beta)])
    }

    /// Beta-type single factor `upper = [(a, β)]`, `lower = [(b, β)]`.
    pub fn beta(a: f64, b: f64, weight: f64) -> Self {
        Self::new(vec![Pair::new(a, weight)], vec![Pair::new(b, weight)])
    }

    /// M-Wright density `M_β`: `upper = [(1-β, β)]`, `lower = [(0, 1)]`.
    /// Its generalized Wright function is the Mittag-Leffler function `E_β`.
    pub fn m_wright(beta: f64) -> Self {
        Self::generalized_m_wright(beta, 0.0, 1.0)
    }

    /// Generalized M-Wright density with parameters `(β, a, α)`:
    /// `upper = [(1-β+βa, βα)]`, `lower = [(a, α)]`.
    pub fn generalized_m_wright(beta: f64, a: f64, alpha: f64) -> Self {
        Self::new(
            vec![Pair::new(1.0 - beta + beta * a, beta * alpha)],
            vec![Pair::new(a, alpha)],
        )
    }

    pub fn p(&self) -> usize {
        self.upper.len()
    }

    pub fn m(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty() && self.lower.is_empty()
    }

    /// Derived constants; assumes weights are positive.
    pub fn constants(&self) -> DerivedConstants {
        let sum_beta: f64 = self.lower.iter().map(|q| q.weight).sum();
        let sum_alpha: f64 = self.upper.iter().map(|q| q.weight).sum();
        let sum_b: f64 = self.lower.iter().map(|q| q.shift).sum();
        let sum_a: f64 = self.upper.iter().map(|q| q.shift).sum();
        let ln_delta: f64 = self.lower.iter().map(|q| q.weight * q.weight.ln()).sum::<f64>()
            - self.upper.iter().map(|q| q.weight * q.weight.ln()).sum::<f64>();
        let rho = self
            .lower
            .iter()
            .map(|q| q.shift / q.weight)
            .fold(f64::INFINITY, f64::min);
        let a_star = sum_beta - sum_alpha;
        DerivedConstants {
            a_star,
            delta_cap: a_star,
            delta_small: ln_delta.exp(),
            mu: sum_b - sum_a + (self.p() as f64 - self.m() as f64) / 2.0,
            rho,
            k_norm: self.ln_moment_kernel(0.0).exp(),
        }
    }

    /// `ln( Π_j Γ(b_j + β_j (l+1)) / Π_i Γ(a_i + α_i (l+1)) )` for real `l`.
    /// Finite only where every gamma argument is positive.
    pub fn ln_moment_kernel(&self, l: f64) -> f64 {
        let s = l + 1.0;
        let num: f64 = self.lower.iter().map(|q| ln_gamma(q.shift + q.weight * s)).sum();
        let den: f64 = self.upper.iter().map(|q| ln_gamma(q.shift + q.weight * s)).sum();
        num - den
    }

    /// Parameters of the derivative: `d/dz Ψ[params](z) = Ψ[shifted](z)`.
    pub fn derivative(&self) -> WrightParams {
        let shift = |q: &Pair| Pair::new(q.shift + q.weight, q.weight);
        WrightParams {
            upper: self.upper.iter().map(shift).collect(),
            lower: self.lower.iter().map(shift).collect(),
        }
    }

    /// Radius of convergence of the power series of Ψ.
    pub fn series_radius(&self) -> f64 {
        let c = self.constants();
        if c.a_star < 1.0 - A_STAR_EPS {
            f64::INFINITY
        } else if c.a_star <= 1.0 + A_STAR_EPS {
            1.0 / c.delta_small
        } else {
            0.0
        }
    }

    /// Non-coincidence of the lower-list poles `-(b_j + l)/β_j` across
    /// distinct `j`, checked for `l < POLE_WINDOW`.
    pub fn has_simple_poles(&self) -> bool {
        for (j, p) in self.lower.iter().enumerate() {
            for q in self.lower.iter().skip(j + 1) {
                for l in 0..POLE_WINDOW {
                    let lhs = (p.shift + l as f64) / p.weight;
                    for k in 0..POLE_WINDOW {
                        let rhs = (q.shift + k as f64) / q.weight;
                        if (lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Rightmost pole of the Mellin–Barnes integrand `Π_j Γ(b_j + β_j s)`.
    pub fn rightmost_pole(&self) -> f64 {
        self.lower
            .iter()
            .map(|q| -q.shift / q.weight)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Scans `α_i (b_j + l) = β_j (a_i - k - 1)` over `l, k < POLE_WINDOW`.
///
/// For densities of type `H^{m,0}_{p,m}` there are no numerator factors
/// `Γ(1 - a_i - α_i s)`, so a hit here means a pole of `Γ(b_j + β_j s)` is
/// cancelled by a zero of `1/Γ(a_i + α_i s)` (as for every beta law with an
/// integer shape gap). [`validate_params`] therefore does not call this.
pub fn check_pole_collision(params: &WrightParams) -> Result<(), WrightError> {
    for (i, u) in params.upper.iter().enumerate() {
        for (j, q) in params.lower.iter().enumerate() {
            for l in 0..POLE_WINDOW {
                let lhs = u.weight * (q.shift + l as f64);
                for k in 0..POLE_WINDOW {
                    let rhs = q.weight * (u.shift - k as f64 - 1.0);
                    if (lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()) {
                        return Err(WrightError::PoleCollision { upper: i, lower: j, l, k });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Window for the finite pole-coincidence scan.
pub const POLE_WINDOW: usize = 64;

/// Tolerance used when deciding `a* = 0` or `a* = 1` for floating-point input.
pub const A_STAR_EPS: f64 = 1e-12;

/// Constants of a parameter set. `delta_cap` (Δ) coincides with `a_star`
/// for densities of type `H^{m,0}_{p,m}`; both are kept for readability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub a_star: f64,
    pub delta_cap: f64,
    pub delta_small: f64,
    pub mu: f64,
    pub rho: f64,
    pub k_norm: f64,
}

impl DerivedConstants {
    /// Large-argument envelope `x^{(μ+1/2)/Δ} exp(-Δ δ^{-1/Δ} x^{1/Δ})`
    /// of the unnormalized density, on the log scale. `None` when Δ = 0.
    pub fn ln_tail_envelope(&self, x: f64) -> Option<f64> {
        if self.delta_cap <= A_STAR_EPS {
            return None;
        }
        let d = self.delta_cap;
        let rate = d * self.delta_small.powf(-1.0 / d);
        Some((self.mu + 0.5) / d * x.ln() - rate * x.powf(1.0 / d))
    }
}

/// Truncation policy for the power series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPolicy {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-12, max_terms: 10_000 }
    }
}

impl SeriesPolicy {
    pub fn validate(&self) -> Result<(), WrightError> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.max_terms >= 1) {
            return Err(WrightError::InvalidArgument(format!(
                "series policy needs positive tolerances and max_terms >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WrightError {
    #[error("{list} pair {index} has non-positive weight {value}")]
    NonPositiveWeight { list: ParamList, index: usize, value: f64 },
    #[error("{list} pair {index} violates shift + weight > 0 (got {sum})")]
    ShiftViolation { list: ParamList, index: usize, sum: f64 },
    #[error("a* = {a_star}, mu = {mu}: need a* > 0, or a* = 0 with mu < -1")]
    AStarViolation { a_star: f64, mu: f64 },
    #[error("upper pair {upper} and lower pair {lower} collide at l = {l}, k = {k}")]
    PoleCollision { upper: usize, lower: usize, l: usize, k: usize },
    #[error("{list} pair {index} is not finite")]
    NonFinite { list: ParamList, index: usize },
    #[error("series did not converge after {terms} terms at z = {z}")]
    NoConvergence { terms: usize, z: f64 },
    #[error("series value overflows at z = {z}")]
    Overflow { z: f64 },
    #[error("z = {z} lies outside the series radius {radius}")]
    OutsideRadius { z: f64, radius: f64 },
    #[error("contour Re(s) = {gamma_line} is within 1e-6 of the pole at {pole}")]
    ContourTooClose { gamma_line: f64, pole: f64 },
    #[error("contour Re(s) = {gamma_line} is not right of the rightmost pole {pole}")]
    ContourLeftOfPoles { gamma_line: f64, pole: f64 },
    #[error("Mellin-Barnes quadrature did not converge: {0}")]
    QuadratureNonConvergent(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl WrightError {
    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            WrightError::NonPositiveWeight { .. } => "NonPositiveWeight",
            WrightError::ShiftViolation { .. } => "ShiftViolation",
            WrightError::AStarViolation { .. } => "AStarViolation",
            WrightError::PoleCollision { .. } => "PoleCollision",
            WrightError::NonFinite { .. } => "NonFinite",
            WrightError::NoConvergence { .. } => "NoConvergence",
            WrightError::Overflow { .. } => "Overflow",
            WrightError::OutsideRadius { .. } => "OutsideRadius",
            WrightError::ContourTooClose { .. } => "ContourTooClose",
            WrightError::ContourLeftOfPoles { .. } => "ContourLeftOfPoles",
            WrightError::QuadratureNonConvergent(_) => "QuadratureNonConvergent",
            WrightError::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

/// Parameters of the derivative of a spec's generalized Wright function.
pub fn gwf_derivative_params(spec: &FhdamSpec) -> WrightParams {
    spec.params().derivative()
}

/// Checks a parameter set against the admissibility conditions and bundles
/// it with its derived constants.
///
/// Rejects non-positive weights, `shift + weight ≤ 0`, and sets violating
/// `a* > 0 or (a* = 0 and μ < -1)`. The empty set is admitted as the
/// degenerate law at 1. Non-negativity of the density is not verified here;
/// [`FhdamSpec::nonnegativity`] records whether the class guarantees it.
pub fn validate_params(params: WrightParams) -> Result<FhdamSpec, WrightError> {
    for (list, pairs) in [(ParamList::Upper, &params.upper), (ParamList::Lower, &params.lower)] {
        for (index, q) in pairs.iter().enumerate() {
            if !q.shift.is_finite() || !q.weight.is_finite() {
                return Err(WrightError::NonFinite { list, index });
            }
            if q.weight <= 0.0 {
                return Err(WrightError::NonPositiveWeight { list, index, value: q.weight });
            }
        }
    }
    for (list, pairs) in [(ParamList::Upper, &params.upper), (ParamList::Lower, &params.lower)] {
        for (index, q) in pairs.iter().enumerate() {
            let sum = q.shift + q.weight;
            if sum <= 0.0 {
                return Err(WrightError::ShiftViolation { list, index, sum });
            }
        }
    }
    let constants = params.constants();
    if !params.is_empty() {
        let ok = constants.a_star > A_STAR_EPS
            || (constants.a_star.abs() <= A_STAR_EPS && constants.mu < -1.0);
        if !ok {
            return Err(WrightError::AStarViolation { a_star: constants.a_star, mu: constants.mu });
        }
    }
    Ok(FhdamSpec::from_validated(params, constants))
}
