//! The process `X_t = √Y · B^H_t`: simulation and analytic evaluators.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fbm::{self, fbm_paths_auto, CirculantPlan, FbmError, Generator, TimeGrid, TrajectorySet};
use crate::fhdam::{
    density_eval, fhdam_moment, fhdam_moment_real, log_axis_range, sample, verify_decomposition, FactorDecomposition,
    FhdamError, FhdamSpec, MomentRow,
};
use crate::quad::gauss_legendre;
use crate::rng;
use crate::special::ln_gamma;
use crate::wright::{gwf_eval, SeriesPolicy, WrightError, A_STAR_EPS};

/// Highest order and tolerance used when a config checks its decomposition.
pub const VERIFY_MAX_ORDER: u32 = 6;
pub const VERIFY_REL_TOL: f64 = 1e-9;

/// Bounds on the fine grid used by the time-change mode.
const FINE_MIN: usize = 1 << 14;
const FINE_MAX: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GfhpError {
    #[error(transparent)]
    Wright(#[from] WrightError),
    #[error(transparent)]
    Fhdam(#[from] FhdamError),
    #[error(transparent)]
    Fbm(#[from] FbmError),
    #[error("covariance matrix for times {0:?} is singular")]
    SingularCovariance(Vec<f64>),
    #[error("mixture quadrature did not converge: {0}")]
    QuadratureNonConvergent(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl GfhpError {
    pub fn kind(&self) -> &'static str {
        match self {
            GfhpError::Wright(e) => e.kind(),
            GfhpError::Fhdam(e) => e.kind(),
            GfhpError::Fbm(e) => e.kind(),
            GfhpError::SingularCovariance(_) => "SingularCovariance",
            GfhpError::QuadratureNonConvergent(_) => "QuadratureNonConvergent",
            GfhpError::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

/// A mixing law, a sampler for it, and a Hurst index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GfhpConfig {
    spec: FhdamSpec,
    decomp: FactorDecomposition,
    hurst: f64,
    #[serde(skip)]
    moment_table: Vec<MomentRow>,
}

impl GfhpConfig {
    /// Checks `hurst ∈ (0, 1)` and matches the decomposition's moments
    /// against the spec up to order [`VERIFY_MAX_ORDER`].
    pub fn new(spec: FhdamSpec, decomp: FactorDecomposition, hurst: f64) -> Result<Self, GfhpError> {
        fbm::k_constant(hurst).map(|_| ())?;
        let moment_table = verify_decomposition(&decomp, &spec, VERIFY_MAX_ORDER, VERIFY_REL_TOL)?;
        Ok(Self { spec, decomp, hurst, moment_table })
    }

    pub fn spec(&self) -> &FhdamSpec {
        &self.spec
    }

    pub fn decomposition(&self) -> &FactorDecomposition {
        &self.decomp
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn moment_table(&self) -> &[MomentRow] {
        &self.moment_table
    }

    /// Same law and decomposition, different Hurst index.
    pub fn with_hurst(&self, hurst: f64) -> Result<Self, GfhpError> {
        fbm::k_constant(hurst).map(|_| ())?;
        Ok(Self { hurst, ..self.clone() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// `X = √Y · B^H` path-wise.
    Scale,
    /// `X_t = B^H(t · Y^{1/(2H)})`, interpolated from a common fine grid.
    TimeChange,
}

/// `Σ_{lk} = (t_l^{2H} + t_k^{2H} - |t_l - t_k|^{2H}) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    pub times: Vec<f64>,
    pub entries: DMatrix<f64>,
}

impl CovMatrix {
    pub fn new(hurst: f64, times: &[f64]) -> Result<Self, GfhpError> {
        check_times(times)?;
        let n = times.len();
        let entries = DMatrix::from_fn(n, n, |i, j| fbm::fbm_covariance(hurst, times[i], times[j]));
        Ok(Self { times: times.to_vec(), entries })
    }

    /// `λᵀ Σ λ`.
    pub fn quadratic_form(&self, lambda: &[f64]) -> f64 {
        let n = lambda.len();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += lambda[i] * self.entries[(i, j)] * lambda[j];
            }
        }
        q
    }
}

fn check_times(times: &[f64]) -> Result<(), GfhpError> {
    if times.is_empty() {
        return Err(GfhpError::InvalidArgument("at least one time is required".into()));
    }
    if times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|t| !t.is_finite()) {
        return Err(GfhpError::InvalidArgument(format!(
            "times must be positive and strictly increasing, got {times:?}"
        )));
    }
    Ok(())
}

/// Simulates `n_paths` paths of the process on `grid`.
///
/// The mixing values use a seed derived from `seed` and the fBm another, so
/// the two modes see the same `Y` sample for the same seed. Both modes
/// produce the same finite-dimensional laws; the time-change mode carries an
/// interpolation error of order `(fine spacing)^H`.
pub fn simulate(
    config: &GfhpConfig,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
    mode: SimulationMode,
) -> Result<TrajectorySet, GfhpError> {
    grid.validate()?;
    let y = sample(&config.decomp, n_paths, rng::derive_seed(seed, 1))?.values;
    let h = config.hurst;
    match mode {
        SimulationMode::Scale => {
            let mut paths = fbm_paths_auto(h, grid, n_paths, rng::derive_seed(seed, 2))?;
            let w = grid.len();
            paths.data_mut().par_chunks_mut(w).zip(y.par_iter()).for_each(|(row, &yi)| {
                let s = yi.sqrt();
                row.iter_mut().for_each(|v| *v *= s);
            });
            paths.seed = seed;
            Ok(paths)
        }
        SimulationMode::TimeChange => time_change(h, grid, &y, seed),
    }
}

fn time_change(h: f64, grid: TimeGrid, y: &[f64], seed: u64) -> Result<TrajectorySet, GfhpError> {
    let stretch: Vec<f64> = y.iter().map(|v| v.powf(1.0 / (2.0 * h))).collect();
    let max_stretch = stretch.iter().cloned().fold(0.0, f64::max);
    let target = (8.0 * grid.n_steps as f64 * max_stretch).ceil().max(1.0) as usize;
    let n_fine = target.next_power_of_two().clamp(FINE_MIN, FINE_MAX);
    let fine_t_max = grid.t_max * max_stretch;
    let fine_dt = fine_t_max / n_fine as f64;
    let plan = CirculantPlan::new(h, n_fine)?;
    let scale = fine_dt.powf(h);
    let w = grid.len();
    let fbm_seed = rng::derive_seed(seed, 3);
    let mut data = vec![0.0; y.len() * w];

    data.par_chunks_mut(2 * w).enumerate().for_each(|(p, rows)| {
        let mut r = rng::stream(fbm_seed, p as u64);
        let mut buf: Vec<Complex64> = Vec::with_capacity(2 * n_fine);
        let (a, b) = plan.draw_pair(&mut r, &mut buf);
        let mut fine = vec![0.0; n_fine + 1];
        for (half, noise) in [(0usize, a), (1usize, b)] {
            let start = half * w;
            if start >= rows.len() {
                break;
            }
            let i = 2 * p + half;
            let mut acc = 0.0;
            fine[0] = 0.0;
            for (f, z) in fine[1..].iter_mut().zip(&noise) {
                acc += scale * z;
                *f = acc;
            }
            let c = stretch[i];
            for (k, out) in rows[start..start + w].iter_mut().enumerate() {
                let u = grid.time(k) * c / fine_dt;
                let j = (u.floor() as usize).min(n_fine - 1);
                let frac = u - j as f64;
                *out = fine[j] + frac * (fine[j + 1] - fine[j]);
            }
        }
    });
    Ok(TrajectorySet::from_flat(grid, h, seed, Generator::Circulant, data))
}

/// `E[exp(i ⟨λ, X_times⟩)] = Ψ(-λᵀΣλ/2) / K`.
pub fn char_fn(config: &GfhpConfig, times: &[f64], lambda: &[f64]) -> Result<f64, GfhpError> {
    if times.len() != lambda.len() {
        return Err(GfhpError::InvalidArgument(format!(
            "{} times but {} frequencies",
            times.len(),
            lambda.len()
        )));
    }
    let cov = CovMatrix::new(config.hurst, times)?;
    let q = cov.quadratic_form(lambda).max(0.0);
    mixed_gaussian_chf(config, q)
}

fn mixed_gaussian_chf(config: &GfhpConfig, q: f64) -> Result<f64, GfhpError> {
    let k = config.spec.constants().k_norm;
    Ok(gwf_eval(&config.spec, -q / 2.0, &SeriesPolicy::default())? / k)
}

/// `E[exp(iλ(X_t - X_s))] = Ψ(-λ²|t-s|^{2H}/2) / K`.
pub fn increment_chf(config: &GfhpConfig, t: f64, s: f64, lambda: f64) -> Result<f64, GfhpError> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(GfhpError::InvalidArgument(format!("times must be non-negative, got {t}, {s}")));
    }
    let q = lambda * lambda * (t - s).abs().powf(2.0 * config.hurst);
    mixed_gaussian_chf(config, q)
}

/// `E[X_t^order]`: zero for odd orders, `E[Y^n] (2n-1)!! t^{2nH}` for `order = 2n`.
pub fn analytic_moment(config: &GfhpConfig, t: f64, order: u32) -> f64 {
    if order % 2 == 1 {
        return 0.0;
    }
    let n = order / 2;
    let ln_double_fact = ln_gamma(order as f64 + 1.0) - ln_gamma(n as f64 + 1.0) - n as f64 * 2f64.ln();
    let y = fhdam_moment(&config.spec, n);
    y * ln_double_fact.exp() * t.powf(2.0 * n as f64 * config.hurst)
}

/// `Cov(X_t, X_s) = E[Y] (t^{2H} + s^{2H} - |t-s|^{2H}) / 2`.
pub fn covariance(config: &GfhpConfig, t: f64, s: f64) -> f64 {
    fhdam_moment(&config.spec, 1) * fbm::fbm_covariance(config.hurst, t, s)
}

/// Default number of Gauss–Legendre nodes for [`joint_density`].
pub const DEFAULT_QUAD_NODES: usize = 256;
const PANEL_WIDTH: f64 = 2.0;

/// Joint density of `(X_{t_1}, …, X_{t_n})` at `x`:
/// `∫ (2πτ)^{-n/2} det(Σ)^{-1/2} exp(-xᵀΣ⁻¹x / (2τ)) ρ(τ) dτ`, integrated by
/// composite Gauss–Legendre over `u = ln τ` (panels at most 2 wide,
/// about `quad_nodes` nodes in total, at least 8 per panel). The result is
/// checked against the same rule with half the nodes; on disagreement the
/// node count is doubled, up to three times.
pub fn joint_density(config: &GfhpConfig, times: &[f64], x: &[f64], quad_nodes: usize) -> Result<f64, GfhpError> {
    if times.len() != x.len() {
        return Err(GfhpError::InvalidArgument(format!("{} times but {} points", times.len(), x.len())));
    }
    if quad_nodes < 16 {
        return Err(GfhpError::InvalidArgument(format!("quad_nodes must be at least 16, got {quad_nodes}")));
    }
    let cov = CovMatrix::new(config.hurst, times)?;
    let chol = cov
        .entries
        .clone()
        .cholesky()
        .ok_or_else(|| GfhpError::SingularCovariance(times.to_vec()))?;
    let n = x.len() as f64;
    let xv = nalgebra::DVector::from_column_slice(x);
    let q = xv.dot(&chol.solve(&xv));
    let ln_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    if !ln_det.is_finite() {
        return Err(GfhpError::SingularCovariance(times.to_vec()));
    }
    let ln_gauss = |tau: f64| -0.5 * n * (2.0 * std::f64::consts::PI * tau).ln() - 0.5 * ln_det - q / (2.0 * tau);

    let spec = &config.spec;
    if spec.is_degenerate() {
        return Ok(ln_gauss(1.0).exp());
    }
    let f = |u: f64| {
        let tau = u.exp();
        let rho = density_eval(spec, tau).unwrap_or(f64::NAN);
        (ln_gauss(tau) + u).exp() * rho
    };
    let (lo, mut hi) = log_axis_range(spec, &f)?;
    let c = spec.constants();
    if c.a_star.abs() <= A_STAR_EPS {
        hi = hi.min(-c.delta_small.ln());
    }
    let mut nodes = quad_nodes;
    let mut last = (f64::NAN, f64::NAN);
    for _ in 0..4 {
        let full = composite_gl(&f, lo, hi, nodes);
        let half = composite_gl(&f, lo, hi, nodes / 2);
        if !full.is_finite() {
            return Err(GfhpError::QuadratureNonConvergent("non-finite integrand".into()));
        }
        if (full - half).abs() <= 1e-9 * full.abs() + 1e-300 {
            return Ok(full);
        }
        last = (full, half);
        nodes *= 2;
    }
    Err(GfhpError::QuadratureNonConvergent(format!(
        "{} nodes give {}, half as many give {}",
        nodes / 2,
        last.0,
        last.1
    )))
}

fn composite_gl<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, nodes: usize) -> f64 {
    let panels = ((hi - lo) / PANEL_WIDTH).ceil().max(1.0) as usize;
    let per = nodes.div_ceil(panels).max(8);
    let (xs, ws) = gauss_legendre(per);
    let width = (hi - lo) / panels as f64;
    (0..panels)
        .map(|p| {
            let a = lo + p as f64 * width;
            let mid = a + 0.5 * width;
            xs.iter().zip(&ws).map(|(x, w)| w * f(mid + 0.5 * width * x)).sum::<f64>() * 0.5 * width
        })
        .sum()
}

/// `E[Y^l]` for real `l`, where the moment formula applies.
pub fn mixing_moment(config: &GfhpConfig, l: f64) -> Option<f64> {
    fhdam_moment_real(&config.spec, l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fhdam::Factor;
    use crate::special::gamma;
    use crate::wright::{validate_params, WrightParams};
    use approx::assert_relative_eq;
    use libm::erfc;

    fn brownian() -> GfhpConfig {
        GfhpConfig::new(validate_params(WrightParams::degenerate()).unwrap(), FactorDecomposition::default(), 0.5).unwrap()
    }

    fn ggbm(beta: f64, h: f64) -> GfhpConfig {
        GfhpConfig::new(
            validate_params(WrightParams::m_wright(beta)).unwrap(),
            FactorDecomposition::new(vec![Factor::MWright { beta, power: 1.0 }]),
            h,
        )
        .unwrap()
    }

    #[test]
    fn config_rejects_bad_hurst_and_mismatch() {
        let s = validate_params(WrightParams::gamma(0.0, 1.0)).unwrap();
        let d = FactorDecomposition::new(vec![Factor::Gamma { shape: 1.0, scale: 1.0, power: 1.0 }]);
        assert!(GfhpConfig::new(s.clone(), d.clone(), 1.0).is_err());
        let bad = FactorDecomposition::new(vec![Factor::Gamma { shape: 2.0, scale: 1.0, power: 1.0 }]);
        assert_eq!(GfhpConfig::new(s, bad, 0.5).unwrap_err().kind(), "MomentMismatch");
    }

    #[test]
    fn brownian_reductions() {
        let c = brownian();
        assert_relative_eq!(char_fn(&c, &[1.0], &[1.0]).unwrap(), (-0.5f64).exp(), max_relative = 1e-12);
        assert_eq!(char_fn(&c, &[1.0, 2.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_relative_eq!(covariance(&c, 0.7, 2.0), 0.7, max_relative = 1e-14);
        assert_relative_eq!(analytic_moment(&c, 1.0, 4), 3.0, max_relative = 1e-13);
        assert_eq!(analytic_moment(&c, 1.0, 1), 0.0);
        let d = joint_density(&c, &[1.0], &[0.0], DEFAULT_QUAD_NODES).unwrap();
        assert_relative_eq!(d, 1.0 / (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn ggbm_chf_and_moments() {
        let c = ggbm(0.5, 0.3);
        let v = char_fn(&c, &[1.0], &[1.0]).unwrap();
        assert_relative_eq!(v, 0.25f64.exp() * erfc(0.5), max_relative = 1e-10);
        let c = ggbm(0.75, 0.375);
        assert_relative_eq!(analytic_moment(&c, 1.0, 2), 1.0 / gamma(1.75), max_relative = 1e-13);
        assert_relative_eq!(covariance(&c, 1.0, 2.0), 2f64.powf(0.75) / (2.0 * gamma(1.75)), max_relative = 1e-13);
        assert_relative_eq!(covariance(&c, 1.3, 1.3), analytic_moment(&c, 1.3, 2), max_relative = 1e-13);
    }

    #[test]
    fn increments_depend_on_lag_only() {
        let c = ggbm(0.75, 0.375);
        assert_eq!(increment_chf(&c, 1.0, 1.0, 2.0).unwrap(), 1.0);
        let a = increment_chf(&c, 1.5, 0.5, 1.0).unwrap();
        let b = increment_chf(&c, 3.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
        assert_relative_eq!(a, char_fn(&c, &[1.0], &[1.0]).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn ggbm_density_at_origin() {
        let c = ggbm(0.5, 0.4);
        let d = joint_density(&c, &[1.0], &[0.0], DEFAULT_QUAD_NODES).unwrap();
        let expected = gamma(0.5) / gamma(0.75) / (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(expected, 0.577_033_738_616_469_7, max_relative = 1e-14);
        assert_relative_eq!(d, expected, max_relative = 1e-8);
    }

    #[test]
    fn singular_covariance_and_arity() {
        let c = ggbm(0.5, 0.4);
        assert!(joint_density(&c, &[1.0, 1.0], &[0.0, 0.0], 256).is_err());
        assert!(char_fn(&c, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn simulate_is_reproducible_and_starts_at_zero() {
        let c = ggbm(0.75, 0.375);
        let g = TimeGrid::new(1.0, 16).unwrap();
        for mode in [SimulationMode::Scale, SimulationMode::TimeChange] {
            let a = simulate(&c, g, 5, 3, mode).unwrap();
            let b = simulate(&c, g, 5, 3, mode).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.n_paths(), 5);
            assert!(a.paths().all(|p| p[0] == 0.0));
        }
    }
}
