//! Statistical checks on simulated ensembles: mean squared displacement,
//! occupation densities, the Berman integrability ingredients, quadratic
//! variation and KS-based law comparisons.

mod ks;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::fbm::{FbmError, TimeGrid, TrajectorySet};
use crate::fhdam::{mixture_integral, FhdamError, FhdamSpec};
use crate::gfhp::{simulate, GfhpConfig, GfhpError, SimulationMode};
use crate::rng;

pub use ks::{ks_two_sample, KsResult};

/// Number of path batches used for the MSD slope interval.
const MSD_BATCHES: usize = 20;

/// Hurst values this close to 1 make the Berman time integral blow up.
const HURST_POLE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least 3 distinct lags, got {got}")]
    InsufficientLags { got: usize },
    #[error("lag of {lag} steps is outside 1..={n_steps}")]
    InvalidLag { lag: usize, n_steps: usize },
    #[error("interval ({start}, {end}) has no overlap with the grid")]
    EmptyInterval { start: f64, end: f64 },
    #[error("invalid bins: {0}")]
    InvalidBins(String),
    #[error("2b + β = {value} ≤ 0 for lower pair {index}; the local-time criterion is not established")]
    ParameterConditionFailed { index: usize, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Gfhp(#[from] GfhpError),
    #[error(transparent)]
    Fhdam(#[from] FhdamError),
    #[error(transparent)]
    Fbm(#[from] FbmError),
}

impl AnalysisError {
    pub fn kind(&self) -> &'static str {
        match self {
            AnalysisError::InsufficientLags { .. } => "InsufficientLags",
            AnalysisError::InvalidLag { .. } => "InvalidLag",
            AnalysisError::EmptyInterval { .. } => "EmptyInterval",
            AnalysisError::InvalidBins(_) => "InvalidBins",
            AnalysisError::ParameterConditionFailed { .. } => "ParameterConditionFailed",
            AnalysisError::InvalidArgument(_) => "InvalidArgument",
            AnalysisError::Gfhp(e) => e.kind(),
            AnalysisError::Fhdam(e) => e.kind(),
            AnalysisError::Fbm(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diffusion {
    Sub,
    Normal,
    Super,
}

impl Diffusion {
    /// Sub or super only when the whole interval sits on one side of 1.
    pub fn from_interval(ci: (f64, f64)) -> Self {
        if ci.1 < 1.0 {
            Diffusion::Sub
        } else if ci.0 > 1.0 {
            Diffusion::Super
        } else {
            Diffusion::Normal
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsdReport {
    /// Lags in time units.
    pub lags: Vec<f64>,
    pub msd: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// 95% interval for the slope.
    pub slope_ci: (f64, f64),
    pub classification: Diffusion,
}

/// Powers of two from 1 up to a quarter of the grid.
pub fn default_lags(grid: &TimeGrid) -> Vec<usize> {
    let cap = (grid.n_steps / 4).max(grid.n_steps.min(3));
    std::iter::successors(Some(1usize), |l| Some(l * 2)).take_while(|&l| l <= cap).collect()
}

/// Mean squared displacement at the given lags (in grid steps), pooled over
/// paths and over every start time, with a log–log slope fit.
///
/// The slope interval comes from the spread of slopes fitted on disjoint
/// batches of paths. With a single path it falls back to the regression
/// residuals.
pub fn msd(trajs: &TrajectorySet, lags: &[usize]) -> Result<MsdReport, AnalysisError> {
    let n_steps = trajs.grid.n_steps;
    let mut lags = lags.to_vec();
    lags.sort_unstable();
    lags.dedup();
    if lags.len() < 3 {
        return Err(AnalysisError::InsufficientLags { got: lags.len() });
    }
    if let Some(&lag) = lags.iter().find(|&&l| l == 0 || l > n_steps) {
        return Err(AnalysisError::InvalidLag { lag, n_steps });
    }

    // per-path sums of squared displacements, one entry per lag
    let per_path: Vec<Vec<f64>> = (0..trajs.n_paths())
        .into_par_iter()
        .map(|i| {
            let p = trajs.path(i);
            lags.iter().map(|&l| p.windows(l + 1).map(|w| (w[l] - w[0]).powi(2)).sum()).collect()
        })
        .collect();
    let ensemble_msd = |rows: &[Vec<f64>]| -> Vec<f64> {
        lags.iter()
            .enumerate()
            .map(|(j, &l)| {
                let total: f64 = rows.iter().map(|r| r[j]).sum();
                total / (rows.len() * (n_steps - l + 1)) as f64
            })
            .collect()
    };

    let msd = ensemble_msd(&per_path);
    if let Some(j) = msd.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(AnalysisError::InvalidArgument(format!("MSD at lag {} is {}", lags[j], msd[j])));
    }
    let x: Vec<f64> = lags.iter().map(|&l| (l as f64 * trajs.grid.dt()).ln()).collect();
    let y: Vec<f64> = msd.iter().map(|v| v.ln()).collect();
    let fit = ols(&x, &y);

    let batches = MSD_BATCHES.min(trajs.n_paths());
    let (half_width, df) = if batches >= 2 {
        let size = trajs.n_paths() / batches;
        let slopes: Vec<f64> = (0..batches)
            .map(|b| {
                let end = if b + 1 == batches { trajs.n_paths() } else { (b + 1) * size };
                let m = ensemble_msd(&per_path[b * size..end]);
                let yb: Vec<f64> = m.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
                ols(&x, &yb).slope
            })
            .collect();
        let mean = slopes.iter().sum::<f64>() / batches as f64;
        let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        ((var / batches as f64).sqrt(), (batches - 1) as f64)
    } else {
        (fit.slope_se, (lags.len() - 2) as f64)
    };
    let t = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom").inverse_cdf(0.975);
    let slope_ci = (fit.slope - t * half_width, fit.slope + t * half_width);
    Ok(MsdReport {
        lags: lags.iter().map(|&l| l as f64 * trajs.grid.dt()).collect(),
        msd,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_ci,
        classification: Diffusion::from_interval(slope_ci),
    })
}

struct Fit {
    slope: f64,
    intercept: f64,
    slope_se: f64,
}

fn ols(x: &[f64], y: &[f64]) -> Fit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    Fit { slope, intercept, slope_se }
}

/// Occupation density of one path over a time interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalTimeEstimate {
    pub x_bins: Vec<f64>,
    /// Time spent in each bin divided by its width.
    pub values: Vec<f64>,
    pub interval: (f64, f64),
    /// Time spent outside the outermost bin edges.
    pub unbinned_time: f64,
}

impl LocalTimeEstimate {
    /// `Σ values · width + unbinned_time`, which equals the interval length.
    pub fn total_time(&self) -> f64 {
        self.binned_time() + self.unbinned_time
    }

    pub fn binned_time(&self) -> f64 {
        self.values.iter().zip(self.x_bins.windows(2)).map(|(v, e)| v * (e[1] - e[0])).sum()
    }

    /// `∫ g(x) L(x) dx` with `g` taken at the bin midpoints.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        self.values
            .iter()
            .zip(self.x_bins.windows(2))
            .map(|(v, e)| g(0.5 * (e[0] + e[1])) * v * (e[1] - e[0]))
            .sum()
    }
}

/// Occupation density of `path` (sampled on `grid`, linear in between)
/// over `interval`, on the bins delimited by `edges`. Each linear segment
/// contributes its exact time in each bin.
pub fn local_time(path: &[f64], grid: &TimeGrid, interval: (f64, f64), edges: &[f64]) -> Result<LocalTimeEstimate, AnalysisError> {
    check_path(path, grid)?;
    let (a, b) = clip_interval(grid, interval)?;
    if edges.len() < 3 {
        return Err(AnalysisError::InvalidBins(format!("need at least 2 bins, got {} edges", edges.len())));
    }
    if edges.windows(2).any(|w| !(w[1] > w[0])) || edges.iter().any(|e| !e.is_finite()) {
        return Err(AnalysisError::InvalidBins("edges must be finite and strictly increasing".into()));
    }

    let mut time = vec![0.0; edges.len() - 1];
    let mut outside = 0.0;
    for_each_segment(path, grid, (a, b), |x0, x1, d| {
        outside += spread(edges, x0, x1, d, &mut time);
    });
    let values = time.iter().zip(edges.windows(2)).map(|(t, e)| t / (e[1] - e[0])).collect();
    Ok(LocalTimeEstimate { x_bins: edges.to_vec(), values, interval: (a, b), unbinned_time: outside })
}

/// `∫_interval g(X_s) ds` for the piecewise-linear path, by Simpson's rule
/// on each segment (exact for polynomial `g` up to degree 3).
pub fn path_time_integral<G: Fn(f64) -> f64>(path: &[f64], grid: &TimeGrid, interval: (f64, f64), g: G) -> Result<f64, AnalysisError> {
    check_path(path, grid)?;
    let range = clip_interval(grid, interval)?;
    let mut total = 0.0;
    for_each_segment(path, grid, range, |x0, x1, d| {
        total += d * (g(x0) + 4.0 * g(0.5 * (x0 + x1)) + g(x1)) / 6.0;
    });
    Ok(total)
}

fn check_path(path: &[f64], grid: &TimeGrid) -> Result<(), AnalysisError> {
    if path.len() != grid.len() {
        return Err(AnalysisError::InvalidArgument(format!("path has {} points, grid has {}", path.len(), grid.len())));
    }
    Ok(())
}

fn clip_interval(grid: &TimeGrid, (start, end): (f64, f64)) -> Result<(f64, f64), AnalysisError> {
    let a = start.max(0.0);
    let b = end.min(grid.t_max);
    if !(b > a) {
        return Err(AnalysisError::EmptyInterval { start, end });
    }
    Ok((a, b))
}

/// Calls `f(x_start, x_end, duration)` for each linear piece of the path
/// restricted to `[a, b]`.
fn for_each_segment<F: FnMut(f64, f64, f64)>(path: &[f64], grid: &TimeGrid, (a, b): (f64, f64), mut f: F) {
    let dt = grid.dt();
    let first = ((a / dt).floor() as usize).min(grid.n_steps - 1);
    for k in first..grid.n_steps {
        let t0 = grid.time(k);
        if t0 >= b {
            break;
        }
        let s0 = t0.max(a);
        let s1 = grid.time(k + 1).min(b);
        if s1 <= s0 {
            continue;
        }
        let slope = (path[k + 1] - path[k]) / dt;
        f(path[k] + slope * (s0 - t0), path[k] + slope * (s1 - t0), s1 - s0);
    }
}

/// Splits `d` time units over the bins crossed by a linear move from `x0`
/// to `x1`; returns the part spent outside all bins.
fn spread(edges: &[f64], x0: f64, x1: f64, d: f64, time: &mut [f64]) -> f64 {
    let (lo, hi) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
    let first = edges[0];
    let last = edges[edges.len() - 1];
    let width = hi - lo;
    if width == 0.0 {
        if lo < first || lo > last {
            return d;
        }
        // right edge of the last bin counts as inside
        let j = (edges.partition_point(|&e| e <= lo) - 1).min(time.len() - 1);
        time[j] += d;
        return 0.0;
    }
    let below = (hi.min(first) - lo).max(0.0);
    let above = (hi - lo.max(last)).max(0.0);
    let start = edges.partition_point(|&e| e <= lo).saturating_sub(1);
    for j in start..time.len() {
        if edges[j] >= hi {
            break;
        }
        let overlap = hi.min(edges[j + 1]) - lo.max(edges[j]);
        if overlap > 0.0 {
            time[j] += d * overlap / width;
        }
    }
    d * (below + above) / width
}

/// Ingredients of the Berman criterion for a square-integrable local time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BermanReport {
    /// `∫ r^{-1/2} ρ_H(r) dr`, with `ρ_H = K ρ` the unnormalized density.
    pub mellin_half: f64,
    /// `∫∫ |t - s|^{-H} ds dt` over the unit square, `2/((2-H)(1-H))`.
    pub time_integral: f64,
    pub finite: bool,
}

pub fn berman_time_integral(hurst: f64) -> f64 {
    2.0 / ((2.0 - hurst) * (1.0 - hurst))
}

/// Checks `2b_j + β_j > 0` and evaluates both factors of the criterion.
pub fn berman_check(config: &GfhpConfig) -> Result<BermanReport, AnalysisError> {
    berman_check_spec(config.spec(), config.hurst())
}

/// Same as [`berman_check`] for a bare spec and Hurst index.
pub fn berman_check_spec(spec: &FhdamSpec, hurst: f64) -> Result<BermanReport, AnalysisError> {
    for (index, q) in spec.params().lower.iter().enumerate() {
        let value = 2.0 * q.shift + q.weight;
        if value <= 0.0 {
            return Err(AnalysisError::ParameterConditionFailed { index, value });
        }
    }
    let mellin_half = if spec.is_degenerate() {
        1.0
    } else {
        spec.constants().k_norm * mixture_integral(spec, |r| r.powf(-0.5))?
    };
    let time_integral = berman_time_integral(hurst);
    let finite = mellin_half.is_finite() && time_integral.is_finite() && hurst < 1.0 - HURST_POLE_EPS;
    Ok(BermanReport { mellin_half, time_integral, finite })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QvRow {
    /// Number of partition intervals.
    pub n: usize,
    /// Ensemble mean of `Σ (ΔX)²`.
    pub qv: f64,
    pub std_err: f64,
}

/// Realized quadratic variation over the whole grid for each partition size.
/// Every size must divide `n_steps`.
pub fn quadratic_variation_scan(trajs: &TrajectorySet, partitions: &[usize]) -> Result<Vec<QvRow>, AnalysisError> {
    let n_steps = trajs.grid.n_steps;
    partitions
        .iter()
        .map(|&n| {
            if n == 0 || !n_steps.is_multiple_of(n) {
                return Err(AnalysisError::InvalidArgument(format!(
                    "partition size {n} does not divide the {n_steps} grid steps"
                )));
            }
            let stride = n_steps / n;
            let per_path: Vec<f64> = trajs
                .paths()
                .map(|p| (0..n).map(|k| (p[(k + 1) * stride] - p[k * stride]).powi(2)).sum())
                .collect();
            let (mean, std_err) = mean_and_se(&per_path);
            Ok(QvRow { n, qv: mean, std_err })
        })
        .collect()
}

/// `E[Y] t_max^{2H} n^{1-2H}`, the mean quadratic variation over `n` equal steps.
pub fn qv_expected(mean_y: f64, hurst: f64, t_max: f64, n: usize) -> f64 {
    mean_y * t_max.powf(2.0 * hurst) * (n as f64).powf(1.0 - 2.0 * hurst)
}

pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Marginal sample of `X_t` from `n` independent paths.
fn marginal(config: &GfhpConfig, t: f64, n: usize, seed: u64) -> Result<Vec<f64>, AnalysisError> {
    let trajs = simulate(config, TimeGrid::new(t, 1)?, n, seed, SimulationMode::Scale)?;
    Ok(trajs.column(1))
}

/// KS comparison of `c^{-exponent} X_{ct}` against `X_t`, each drawn from
/// its own ensemble of `n` paths. With `exponent = H` the laws coincide.
pub fn self_similarity_ks(config: &GfhpConfig, c: f64, t: f64, n: usize, seed: u64, exponent: f64) -> Result<KsResult, AnalysisError> {
    if !(c > 0.0 && c.is_finite() && t > 0.0 && t.is_finite()) {
        return Err(AnalysisError::InvalidArgument(format!("need c > 0 and t > 0, got c = {c}, t = {t}")));
    }
    if n == 0 {
        return Err(AnalysisError::InvalidArgument("sample size must be positive".into()));
    }
    let base = marginal(config, t, n, rng::derive_seed(seed, 1))?;
    let factor = c.powf(-exponent);
    let scaled: Vec<f64> = marginal(config, c * t, n, rng::derive_seed(seed, 2))?.iter().map(|x| factor * x).collect();
    Ok(ks_two_sample(&scaled, &base))
}

/// p-value for `c^{-H} X_{ct} = X_t` in law.
pub fn self_similarity_test(config: &GfhpConfig, c: f64, t: f64, n: usize, seed: u64) -> Result<f64, AnalysisError> {
    Ok(self_similarity_ks(config, c, t, n, seed, config.hurst())?.p_value)
}

/// Same comparison on an existing ensemble: the first half of the paths
/// supplies `X_t`, the second half `X_{ct}`. Both times must be grid points.
pub fn self_similarity_ensemble(trajs: &TrajectorySet, c: f64, t: f64, exponent: f64) -> Result<KsResult, AnalysisError> {
    if trajs.n_paths() < 2 {
        return Err(AnalysisError::InvalidArgument("need at least 2 paths to split the ensemble".into()));
    }
    let grid = trajs.grid;
    let at = |s: f64| {
        grid.index_of(s)
            .filter(|&k| k > 0)
            .ok_or_else(|| AnalysisError::InvalidArgument(format!("time {s} is not a positive grid point")))
    };
    let (k_t, k_ct) = (at(t)?, at(c * t)?);
    let half = trajs.n_paths() / 2;
    let base: Vec<f64> = (0..half).map(|i| trajs.path(i)[k_t]).collect();
    let factor = c.powf(-exponent);
    let scaled: Vec<f64> = (half..trajs.n_paths()).map(|i| factor * trajs.path(i)[k_ct]).collect();
    Ok(ks_two_sample(&scaled, &base))
}

/// KS comparison of `X_{(start+lag)Δ} - X_{start Δ}` against `X_{lag Δ}`,
/// each from its own ensemble on `grid`.
pub fn stationarity_test(
    config: &GfhpConfig,
    grid: TimeGrid,
    start: usize,
    lag: usize,
    n: usize,
    seed: u64,
) -> Result<KsResult, AnalysisError> {
    if lag == 0 || start + lag > grid.n_steps {
        return Err(AnalysisError::InvalidLag { lag: start + lag, n_steps: grid.n_steps });
    }
    let a = simulate(config, grid, n, rng::derive_seed(seed, 1), SimulationMode::Scale)?;
    let b = simulate(config, grid, n, rng::derive_seed(seed, 2), SimulationMode::Scale)?;
    let shifted: Vec<f64> = a.paths().map(|p| p[start + lag] - p[start]).collect();
    let origin: Vec<f64> = b.paths().map(|p| p[lag] - p[0]).collect();
    Ok(ks_two_sample(&shifted, &origin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{fbm_paths, Generator};
    use crate::fhdam::{fhdam_moment_real, Factor, FactorDecomposition};
    use crate::wright::{validate_params, WrightParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ggbm(beta: f64, h: f64) -> GfhpConfig {
        GfhpConfig::new(
            validate_params(WrightParams::m_wright(beta)).unwrap(),
            FactorDecomposition::new(vec![Factor::MWright { beta, power: 1.0 }]),
            h,
        )
        .unwrap()
    }

    #[test]
    fn msd_needs_three_lags() {
        let t = fbm_paths(0.5, TimeGrid::new(1.0, 16).unwrap(), 4, 1, Generator::Circulant).unwrap();
        assert_eq!(msd(&t, &[1, 2, 2]).unwrap_err().kind(), "InsufficientLags");
        assert_eq!(msd(&t, &[1, 2, 17]).unwrap_err().kind(), "InvalidLag");
    }

    #[test]
    fn msd_of_a_straight_line_has_slope_two() {
        // X_t = t on every path: MSD(ℓ) = ℓ² exactly
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let rows = vec![grid.times(); 3];
        let t = TrajectorySet::from_rows(grid, 0.5, 0, Generator::Circulant, rows).unwrap();
        let r = msd(&t, &[1, 2, 4, 8]).unwrap();
        assert_relative_eq!(r.slope, 2.0, max_relative = 1e-12);
        assert_eq!(r.classification, Diffusion::Super);
    }

    #[test]
    fn msd_recovers_hurst_scaling() {
        let grid = TimeGrid::new(1.0, 256).unwrap();
        for (h, class) in [(0.25, Diffusion::Sub), (0.5, Diffusion::Normal), (0.75, Diffusion::Super)] {
            let t = fbm_paths(h, grid, 2000, 7, Generator::Circulant).unwrap();
            let r = msd(&t, &default_lags(&grid)).unwrap();
            assert!((r.slope - 2.0 * h).abs() < 0.05, "H = {h}: slope {}", r.slope);
            assert_eq!(r.classification, class, "H = {h}: ci {:?}", r.slope_ci);
        }
    }

    #[test]
    fn local_time_of_a_constant_path() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let path = vec![0.0; 11];
        let lt = local_time(&path, &grid, (0.0, 1.0), &[-1.0, -0.5, 0.5, 1.0]).unwrap();
        assert_eq!(lt.values, vec![0.0, 1.0, 0.0]);
        assert_eq!(lt.total_time(), 1.0);
        assert_eq!(local_time(&path, &grid, (2.0, 3.0), &[-1.0, 0.0, 1.0]).unwrap_err().kind(), "EmptyInterval");
        assert_eq!(local_time(&path, &grid, (0.0, 1.0), &[0.0, 1.0]).unwrap_err().kind(), "InvalidBins");
    }

    #[test]
    fn local_time_of_a_ramp_is_uniform() {
        // X_t = t spends time h in each bin of width h
        let grid = TimeGrid::new(1.0, 7).unwrap();
        let edges: Vec<f64> = (0..=4).map(|k| k as f64 * 0.25).collect();
        let lt = local_time(&grid.times(), &grid, (0.0, 1.0), &edges).unwrap();
        for v in &lt.values {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-12);
        }
        let part = local_time(&grid.times(), &grid, (0.3, 0.6), &edges).unwrap();
        assert_relative_eq!(part.values[1], 0.8, max_relative = 1e-12);
        assert_relative_eq!(part.total_time(), 0.3, max_relative = 1e-12);
    }

    #[test]
    fn occupation_formula_residual_shrinks_with_bin_width() {
        let grid = TimeGrid::new(1.0, 512).unwrap();
        let t = fbm_paths(0.5, grid, 1, 11, Generator::Circulant).unwrap();
        let path = t.path(0);
        let lo = path.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-9;
        let hi = path.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1e-9;
        let exact = path_time_integral(path, &grid, (0.0, 1.0), |x| x * x).unwrap();
        let mut last = f64::INFINITY;
        for bins in [16, 64, 256, 1024] {
            let edges: Vec<f64> = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
            let lt = local_time(path, &grid, (0.0, 1.0), &edges).unwrap();
            let res = (lt.integrate(|x| x * x) - exact).abs();
            assert!(res < last, "{bins} bins: residual {res} after {last}");
            last = res;
        }
        assert!(last < 1e-3);
    }

    proptest! {
        #[test]
        fn local_time_conserves_mass(seed in 0u64..1000, a in 0.0..0.5f64, len in 0.01..0.5f64, bins in 2usize..40) {
            let grid = TimeGrid::new(1.0, 64).unwrap();
            let t = fbm_paths(0.3, grid, 1, seed, Generator::Circulant).unwrap();
            let edges: Vec<f64> = (0..=bins).map(|k| -1.0 + 2.0 * k as f64 / bins as f64).collect();
            let lt = local_time(t.path(0), &grid, (a, a + len), &edges).unwrap();
            prop_assert!((lt.total_time() - len).abs() <= 1e-12);
        }
    }

    #[test]
    fn berman_for_exponential_and_ggbm() {
        let e = validate_params(WrightParams::gamma(0.0, 1.0)).unwrap();
        let r = berman_check_spec(&e, 0.5).unwrap();
        assert_relative_eq!(r.mellin_half, std::f64::consts::PI.sqrt(), max_relative = 1e-8);
        assert_eq!(r.time_integral, 8.0 / 3.0);
        assert!(r.finite);

        let c = ggbm(0.75, 0.375);
        let r = berman_check(&c).unwrap();
        let oracle = fhdam_moment_real(c.spec(), -0.5).unwrap() * c.spec().constants().k_norm;
        assert_relative_eq!(r.mellin_half, oracle, max_relative = 1e-8);

        assert!(!berman_check_spec(&e, 1.0 - 1e-10).unwrap().finite);
        let degenerate = validate_params(WrightParams::degenerate()).unwrap();
        assert_eq!(berman_check_spec(&degenerate, 0.5).unwrap().mellin_half, 1.0);
    }

    #[test]
    fn berman_condition_failure_is_reported() {
        // b + β > 0 but 2b + β < 0
        let s = validate_params(WrightParams::gamma(-0.7, 1.0)).unwrap();
        let err = berman_check_spec(&s, 0.5).unwrap_err();
        assert_eq!(err.kind(), "ParameterConditionFailed");
    }

    #[test]
    fn qv_scaling() {
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        for h in [0.25, 0.5, 0.75] {
            let t = fbm_paths(h, grid, 400, 5, Generator::Circulant).unwrap();
            let rows = quadratic_variation_scan(&t, &[64, 128, 256, 512]).unwrap();
            for r in &rows {
                let expected = qv_expected(1.0, h, 1.0, r.n);
                assert!((r.qv - expected).abs() < 5.0 * r.std_err, "H = {h}, n = {}: {} vs {expected}", r.n, r.qv);
            }
            let ratio = rows[1].qv / rows[0].qv;
            assert_relative_eq!(ratio, 2f64.powf(1.0 - 2.0 * h), max_relative = 0.05);
        }
        let t = fbm_paths(0.5, TimeGrid::new(1.0, 8).unwrap(), 2, 1, Generator::Circulant).unwrap();
        assert!(quadratic_variation_scan(&t, &[3]).is_err());
    }

    #[test]
    fn self_similarity_has_power() {
        let c = ggbm(0.75, 0.375);
        assert!(self_similarity_test(&c, 1.0, 1.0, 2000, 3).unwrap() > 0.01);
        assert!(self_similarity_test(&c, 2.0, 1.0, 2000, 3).unwrap() > 0.01);
        let wrong = self_similarity_ks(&c, 2.0, 1.0, 10_000, 3, 0.375 + 0.2).unwrap();
        assert!(wrong.p_value < 1e-3, "p = {}", wrong.p_value);
    }

    #[test]
    fn increments_are_stationary() {
        let c = ggbm(0.5, 0.3);
        let r = stationarity_test(&c, TimeGrid::new(4.0, 8).unwrap(), 5, 2, 4000, 9).unwrap();
        assert!(r.p_value > 0.01, "p = {}", r.p_value);
    }
}
