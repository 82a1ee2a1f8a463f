//! Fox-H densities with moments of all orders: the law of the mixing
//! variable `Y`. Moments, Laplace transform, closed-form densities for the
//! single-factor classes, and sampling from explicit factor decompositions.

mod decomp;
pub mod mwright;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{gauss_kronrod, tanh_sinh, QuadError, Tolerance};
use crate::special::ln_gamma;
use crate::wright::{
    gwf_eval, mellin_barnes_density_auto, validate_params, DerivedConstants, Pair, SeriesPolicy,
    WrightError, WrightParams, A_STAR_EPS,
};

pub use decomp::{
    moment_table, sample, verify_decomposition, Factor, FactorDecomposition, MomentRow, SampleBatch,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FhdamError {
    #[error(transparent)]
    Wright(#[from] WrightError),
    #[error("the degenerate law (empty parameter lists) has no density")]
    DegenerateClass,
    #[error("decomposition moment {decomposition} differs from spec moment {spec} at order {order}")]
    MomentMismatch { order: u32, decomposition: f64, spec: f64 },
    #[error("invalid factor {0:?}")]
    InvalidFactor(Factor),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl FhdamError {
    pub fn kind(&self) -> &'static str {
        match self {
            FhdamError::Wright(e) => e.kind(),
            FhdamError::DegenerateClass => "DegenerateClass",
            FhdamError::MomentMismatch { .. } => "MomentMismatch",
            FhdamError::InvalidFactor(_) => "InvalidFactor",
            FhdamError::Quadrature(_) => "QuadratureNonConvergent",
            FhdamError::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

/// Structural class of a parameter set.
///
/// `C1`: gamma factors; `C2`: beta factors; `C4`: generalized M-Wright
/// factors; `C3`, `C5`, `C6`, `C7` are the products C1·C2, C1·C4, C2·C4 and
/// C1·C2·C4. `Custom` covers upper pairs that match none of these shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FhdamClass {
    C0,
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    Custom,
}

/// One recognised building block of a parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Block {
    /// `lower = (b, β)`: `Y = G^β`, `G ~ Gamma(b + β)`.
    Gamma { b: f64, beta: f64 },
    /// `upper = (a, β)`, `lower = (b, β)`, `a > b`: `Y = B^β`, `B ~ Beta(b + β, a - b)`.
    Beta { a: f64, b: f64, weight: f64 },
    /// `upper = (1 - β + β a, β α)`, `lower = (a, α)`.
    GenMWright { beta: f64, a: f64, alpha: f64 },
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs()))
}

/// Splits a parameter set into blocks; `None` when an upper pair cannot be
/// paired with a lower pair.
pub fn blocks(params: &WrightParams) -> Option<Vec<Block>> {
    let mut used = vec![false; params.lower.len()];
    let mut out = Vec::new();
    for u in &params.upper {
        let hit = params.lower.iter().enumerate().find_map(|(j, q)| {
            if used[j] {
                return None;
            }
            if close(u.weight, q.weight) && u.shift > q.shift {
                return Some((j, Block::Beta { a: u.shift, b: q.shift, weight: q.weight }));
            }
            let beta = u.weight / q.weight;
            if beta < 1.0 && close(u.shift, 1.0 - beta + beta * q.shift) {
                return Some((j, Block::GenMWright { beta, a: q.shift, alpha: q.weight }));
            }
            None
        })?;
        used[hit.0] = true;
        out.push(hit.1);
    }
    for (j, q) in params.lower.iter().enumerate() {
        if !used[j] {
            out.push(Block::Gamma { b: q.shift, beta: q.weight });
        }
    }
    Some(out)
}

fn classify(params: &WrightParams) -> FhdamClass {
    let Some(blocks) = blocks(params) else {
        return FhdamClass::Custom;
    };
    let g = blocks.iter().any(|b| matches!(b, Block::Gamma { .. }));
    let be = blocks.iter().any(|b| matches!(b, Block::Beta { .. }));
    let w = blocks.iter().any(|b| matches!(b, Block::GenMWright { .. }));
    match (g, be, w) {
        (false, false, false) => FhdamClass::C0,
        (true, false, false) => FhdamClass::C1,
        (false, true, false) => FhdamClass::C2,
        (true, true, false) => FhdamClass::C3,
        (false, false, true) => FhdamClass::C4,
        (true, false, true) => FhdamClass::C5,
        (false, true, true) => FhdamClass::C6,
        (true, true, true) => FhdamClass::C7,
    }
}

/// Whether non-negativity of the density is known for a spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonnegativity {
    /// Every block is a probability law, so the product is one.
    Structural,
    /// Not established; see [`nonnegativity_spot_check`].
    Unverified,
}

/// A validated parameter set with its derived constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WrightParams", into = "WrightParams")]
pub struct FhdamSpec {
    params: WrightParams,
    constants: DerivedConstants,
    class: FhdamClass,
    simple_poles: bool,
}

impl FhdamSpec {
    pub(crate) fn from_validated(params: WrightParams, constants: DerivedConstants) -> Self {
        let class = classify(&params);
        let simple_poles = params.has_simple_poles();
        Self { params, constants, class, simple_poles }
    }

    pub fn params(&self) -> &WrightParams {
        &self.params
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.constants
    }

    pub fn class(&self) -> FhdamClass {
        self.class
    }

    /// Poles of `Π Γ(b_j + β_j s)` are simple within the scanned window.
    pub fn simple_poles(&self) -> bool {
        self.simple_poles
    }

    pub fn nonnegativity(&self) -> Nonnegativity {
        if self.class == FhdamClass::Custom {
            Nonnegativity::Unverified
        } else {
            Nonnegativity::Structural
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.params.is_empty()
    }
}

impl TryFrom<WrightParams> for FhdamSpec {
    type Error = WrightError;
    fn try_from(p: WrightParams) -> Result<Self, Self::Error> {
        validate_params(p)
    }
}

impl From<FhdamSpec> for WrightParams {
    fn from(s: FhdamSpec) -> Self {
        s.params
    }
}

/// `E[Y^l] = (1/K) Π Γ(b_j + β_j(l+1)) / Π Γ(a_i + α_i(l+1))`.
pub fn fhdam_moment(spec: &FhdamSpec, l: u32) -> f64 {
    fhdam_moment_real(spec, l as f64).expect("integer orders are finite for validated specs")
}

/// Moment formula at real order `l`; `None` when a gamma argument is not
/// positive (the moment is then infinite or the formula does not apply).
pub fn fhdam_moment_real(spec: &FhdamSpec, l: f64) -> Option<f64> {
    let s = l + 1.0;
    let p = spec.params();
    if p.lower.iter().chain(&p.upper).any(|q| q.shift + q.weight * s <= 0.0) {
        return None;
    }
    Some((p.ln_moment_kernel(l) - p.ln_moment_kernel(0.0)).exp())
}

/// How a density value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityRoute {
    ClosedForm,
    /// No closed form for this class; the Mellin–Barnes integral was used.
    MellinBarnes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityValue {
    pub value: f64,
    pub route: DensityRoute,
}

fn single_block(spec: &FhdamSpec) -> Option<Block> {
    match blocks(spec.params()) {
        Some(b) if b.len() == 1 => Some(b[0]),
        _ => None,
    }
}

/// Unnormalized `H^{1,0}_{0,1}` gamma kernel: `(1/β) τ^{b/β} e^{-τ^{1/β}}`.
fn ln_gamma_kernel(b: f64, beta: f64, tau: f64) -> f64 {
    -beta.ln() + b / beta * tau.ln() - tau.powf(1.0 / beta)
}

/// Normalized density of `B^w`, `B ~ Beta(b + w, a - b)`, at `x ∈ (0, 1)`.
/// Also used for parameter sets outside the admissible range.
pub fn beta_block_density(a: f64, b: f64, w: f64, x: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return 0.0;
    }
    let ln_k = ln_gamma(b + w) - ln_gamma(a + w);
    let ln_h = -w.ln() + b / w * x.ln() + (a - b - 1.0) * (-(x.powf(1.0 / w))).ln_1p() - ln_gamma(a - b);
    (ln_h - ln_k).exp()
}

/// Normalized generalized M-Wright density
/// `[Γ(1-β+βa+βα)/Γ(a+α)] (1/α) x^{a/α} M_β(x^{1/α})`.
pub fn gen_m_wright_density(beta: f64, a: f64, alpha: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let y = x.powf(1.0 / alpha);
    let ln = ln_gamma(1.0 - beta + beta * a + beta * alpha) - ln_gamma(a + alpha) - alpha.ln()
        + a / alpha * x.ln()
        + mwright::ln_m_wright(beta, y);
    ln.exp()
}

/// Density of `Y` at `tau > 0`, with the route taken.
pub fn density_eval_detailed(spec: &FhdamSpec, tau: f64) -> Result<DensityValue, FhdamError> {
    if spec.is_degenerate() {
        return Err(FhdamError::DegenerateClass);
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(FhdamError::InvalidArgument(format!("tau must be positive and finite, got {tau}")));
    }
    let closed = |value: f64| Ok(DensityValue { value, route: DensityRoute::ClosedForm });
    match single_block(spec) {
        Some(Block::Gamma { b, beta }) => closed((ln_gamma_kernel(b, beta, tau) - ln_gamma(b + beta)).exp()),
        Some(Block::Beta { a, b, weight }) => closed(beta_block_density(a, b, weight, tau)),
        Some(Block::GenMWright { beta, a, alpha }) => closed(gen_m_wright_density(beta, a, alpha, tau)),
        None => {
            let r = mellin_barnes_density_auto(spec, tau)?;
            Ok(DensityValue { value: r.value, route: DensityRoute::MellinBarnes })
        }
    }
}

/// Density of `Y` at `tau > 0`.
pub fn density_eval(spec: &FhdamSpec, tau: f64) -> Result<f64, FhdamError> {
    density_eval_detailed(spec, tau).map(|d| d.value)
}

/// `(lhs, rhs)` of the Laplace identity at `s ≥ 0`: the quadrature of
/// `∫ e^{-sτ} ρ(τ) dτ` and `Ψ(-s)/K`.
pub fn laplace_identity_check(spec: &FhdamSpec, s: f64) -> Result<(f64, f64), FhdamError> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(FhdamError::InvalidArgument(format!("s must be non-negative, got {s}")));
    }
    let rhs = gwf_eval(spec, -s, &SeriesPolicy::default())? / spec.constants().k_norm;
    if spec.is_degenerate() {
        return Ok(((-s).exp(), rhs));
    }
    let lhs = mixture_integral(spec, |tau| (-s * tau).exp())?;
    Ok((lhs, rhs))
}

/// `∫ g(τ) ρ(τ) dτ` for a bounded, smooth weight `g`.
///
/// Densities with `a* = 0` live on `(0, 1/δ)` and are integrated with
/// tanh–sinh in `τ`. Otherwise the integral is taken over `u = ln τ`,
/// truncated at the lower end by a scan and at the upper end where the
/// tail envelope falls below `1e-16` of the peak.
pub fn mixture_integral<G: Fn(f64) -> f64>(spec: &FhdamSpec, g: G) -> Result<f64, FhdamError> {
    let tol = Tolerance::new(1e-300, 1e-12);
    let c = spec.constants();
    if c.a_star.abs() <= A_STAR_EPS {
        let top = 1.0 / c.delta_small;
        let f = |tau: f64, _: f64, _: f64| {
            if tau <= 0.0 || tau >= top {
                0.0
            } else {
                g(tau) * density_eval(spec, tau).unwrap_or(f64::NAN)
            }
        };
        return Ok(tanh_sinh(f, 0.0, top, tol)?);
    }
    let f = |u: f64| {
        let tau = u.exp();
        g(tau) * density_eval(spec, tau).unwrap_or(f64::NAN) * tau
    };
    let (lo, hi) = log_axis_range(spec, &f)?;
    Ok(gauss_kronrod(f, lo, hi, tol)?)
}

/// Range in `u = ln τ` carrying all but ~1e-16 of `f`'s mass.
pub fn log_axis_range<F: Fn(f64) -> f64>(spec: &FhdamSpec, f: &F) -> Result<(f64, f64), FhdamError> {
    let c = spec.constants();
    // start near the mode of τ ρ(τ), roughly where the mean sits
    let center = fhdam_moment_real(spec, 1.0).map_or(0.0, |m| m.ln());
    let mut peak = f(center).abs();
    let mut hi = center;
    let ln_k = c.k_norm.ln();
    let mut below = 0;
    while below < 3 {
        hi += 0.5;
        let v = f(hi).abs();
        peak = peak.max(v);
        let env_small = c
            .ln_tail_envelope(hi.exp())
            .is_none_or(|e| e - ln_k + hi < (peak.max(1e-300)).ln() - 36.84);
        if v <= 1e-16 * peak && env_small {
            below += 1;
        } else {
            below = 0;
        }
        if hi > 700.0 {
            return Err(FhdamError::InvalidArgument("density tail does not decay on the log axis".into()));
        }
    }
    let mut lo = center;
    below = 0;
    while below < 3 {
        lo -= 0.5;
        let v = f(lo).abs();
        peak = peak.max(v);
        if v <= 1e-16 * peak {
            below += 1;
        } else {
            below = 0;
        }
        if lo < -700.0 {
            return Err(FhdamError::InvalidArgument("density does not decay towards zero".into()));
        }
    }
    Ok((lo, hi))
}

/// Result of evaluating a density on a set of points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonnegativityReport {
    pub status: Nonnegativity,
    pub points: usize,
    pub min_value: f64,
    pub argmin: f64,
    pub all_nonnegative: bool,
}

/// Evaluates the density on `taus` and reports the smallest value seen.
/// A pass is evidence, not a proof.
pub fn nonnegativity_spot_check(spec: &FhdamSpec, taus: &[f64]) -> Result<NonnegativityReport, FhdamError> {
    let mut min_value = f64::INFINITY;
    let mut argmin = f64::NAN;
    for &t in taus {
        let v = density_eval(spec, t)?;
        if v < min_value {
            min_value = v;
            argmin = t;
        }
    }
    Ok(NonnegativityReport {
        status: spec.nonnegativity(),
        points: taus.len(),
        min_value,
        argmin,
        all_nonnegative: min_value >= 0.0,
    })
}

/// Builds the parameter list of a single block.
pub fn block_params(block: Block) -> WrightParams {
    match block {
        Block::Gamma { b, beta } => WrightParams::gamma(b, beta),
        Block::Beta { a, b, weight } => WrightParams::beta(a, b, weight),
        Block::GenMWright { beta, a, alpha } => WrightParams::new(
            vec![Pair::new(1.0 - beta + beta * a, beta * alpha)],
            vec![Pair::new(a, alpha)],
        ),
    }
}
