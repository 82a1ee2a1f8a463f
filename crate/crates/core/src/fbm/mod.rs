//! Fractional Brownian motion on uniform grids, and the fractional-operator
//! kernels whose inner products give its covariance.

mod kernel;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

pub use kernel::{frac_indicator_kernel, k_constant, k_constant_closed_form, kernel_inner_product, KernelValue};

/// Default cap on the number of steps for the Cholesky generator.
pub const CHOLESKY_CAP: usize = 4096;

/// Eigenvalues of the circulant embedding above this are clipped to zero.
const EIGEN_FLOOR: f64 = -1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FbmError {
    #[error("Hurst parameter must lie in (0, 1), got {0}")]
    InvalidHurst(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("circulant embedding has eigenvalue {min_eigenvalue} below -1e-10")]
    EmbeddingNotPsd { min_eigenvalue: f64 },
    #[error("{n_steps} steps exceed the Cholesky cap of {cap}")]
    GridTooLarge { n_steps: usize, cap: usize },
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] crate::quad::QuadError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl FbmError {
    pub fn kind(&self) -> &'static str {
        match self {
            FbmError::InvalidHurst(_) => "InvalidHurst",
            FbmError::InvalidGrid(_) => "InvalidGrid",
            FbmError::EmbeddingNotPsd { .. } => "EmbeddingNotPsd",
            FbmError::GridTooLarge { .. } => "GridTooLarge",
            FbmError::Quadrature(_) => "QuadratureNonConvergent",
            FbmError::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

pub(crate) fn check_hurst(h: f64) -> Result<(), FbmError> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(FbmError::InvalidHurst(h))
    }
}

/// Uniform grid `t_k = k · t_max / n_steps`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self, FbmError> {
        let g = Self { t_max, n_steps };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), FbmError> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(FbmError::InvalidGrid(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.n_steps == 0 {
            return Err(FbmError::InvalidGrid("n_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.t_max / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the grid point equal to `t`, if there is one (to 1e-9 relative).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.dt()).round();
        if k < 0.0 || k > self.n_steps as f64 {
            return None;
        }
        let k = k as usize;
        ((self.time(k) - t).abs() <= 1e-9 * self.t_max.max(1.0)).then_some(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Circulant,
    Cholesky,
}

impl std::fmt::Display for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Generator::Circulant => "circulant",
            Generator::Cholesky => "cholesky",
        })
    }
}

/// An ensemble of paths on a common grid. Paths are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub grid: TimeGrid,
    pub hurst: f64,
    pub seed: u64,
    pub generator_tag: Generator,
    n_paths: usize,
    data: Vec<f64>,
}

impl TrajectorySet {
    /// Wraps existing path data; every row must have `grid.len()` points.
    pub fn from_rows(grid: TimeGrid, hurst: f64, seed: u64, generator_tag: Generator, rows: Vec<Vec<f64>>) -> Result<Self, FbmError> {
        let width = grid.len();
        if rows.is_empty() {
            return Err(FbmError::InvalidArgument("a trajectory set needs at least one path".into()));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(FbmError::InvalidArgument(format!("path {i} has {} points, grid has {width}", r.len())));
        }
        let n_paths = rows.len();
        Ok(Self { grid, hurst, seed, generator_tag, n_paths, data: rows.concat() })
    }

    pub(crate) fn from_flat(grid: TimeGrid, hurst: f64, seed: u64, generator_tag: Generator, data: Vec<f64>) -> Self {
        let n_paths = data.len() / grid.len();
        Self { grid, hurst, seed, generator_tag, n_paths, data }
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.grid.len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.grid.len())
    }

    /// Values of every path at grid index `k`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.paths().map(|p| p[k]).collect()
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// `Cov(B_t, B_s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(hurst: f64, t: f64, s: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2))
}

/// Autocovariance of unit-spacing fractional Gaussian noise at lag `k`.
fn fgn_autocov(hurst: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Circulant embedding of fractional Gaussian noise with `n` increments.
pub struct CirculantPlan {
    n: usize,
    /// `sqrt(λ_j / 2n)`
    amplitudes: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    /// Smallest eigenvalue before clipping.
    pub min_eigenvalue: f64,
}

impl CirculantPlan {
    pub fn new(hurst: f64, n: usize) -> Result<Self, FbmError> {
        check_hurst(hurst)?;
        let m = 2 * n;
        let mut row: Vec<Complex64> = (0..m)
            .map(|j| {
                let lag = if j <= n { j } else { m - j };
                Complex64::new(fgn_autocov(hurst, lag), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let min_eigenvalue = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min_eigenvalue < EIGEN_FLOOR {
            return Err(FbmError::EmbeddingNotPsd { min_eigenvalue });
        }
        let amplitudes = row.iter().map(|c| (c.re.max(0.0) / m as f64).sqrt()).collect();
        Ok(Self { n, amplitudes, fft, min_eigenvalue })
    }

    /// Two independent unit-spacing noise sequences of length `n`.
    pub fn draw_pair<R: Rng + ?Sized>(&self, rng: &mut R, buf: &mut Vec<Complex64>) -> (Vec<f64>, Vec<f64>) {
        buf.clear();
        buf.extend(self.amplitudes.iter().map(|&a| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(a * re, a * im)
        }));
        self.fft.process(buf);
        let first = buf[..self.n].iter().map(|c| c.re).collect();
        let second = buf[..self.n].iter().map(|c| c.im).collect();
        (first, second)
    }
}

fn cumulate(out: &mut [f64], noise: &[f64], scale: f64) {
    out[0] = 0.0;
    let mut acc = 0.0;
    for (o, z) in out[1..].iter_mut().zip(noise) {
        acc += scale * z;
        *o = acc;
    }
}

/// Samples `n_paths` fBm paths on `grid`.
///
/// `Circulant` embeds the increment covariance in a circulant matrix of
/// size `2 n_steps` and synthesizes pairs of paths from one complex FFT;
/// pair `p` uses stream `p` of `seed`. `Cholesky` factors the increment
/// covariance directly (capped at [`CHOLESKY_CAP`] steps); path `i` uses
/// stream `i`.
pub fn fbm_paths(hurst: f64, grid: TimeGrid, n_paths: usize, seed: u64, method: Generator) -> Result<TrajectorySet, FbmError> {
    fbm_paths_capped(hurst, grid, n_paths, seed, method, CHOLESKY_CAP)
}

/// [`fbm_paths`] with an explicit Cholesky cap.
pub fn fbm_paths_capped(
    hurst: f64,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
    method: Generator,
    cholesky_cap: usize,
) -> Result<TrajectorySet, FbmError> {
    check_hurst(hurst)?;
    grid.validate()?;
    if n_paths == 0 {
        return Err(FbmError::InvalidArgument("n_paths must be at least 1".into()));
    }
    let n = grid.n_steps;
    let w = grid.len();
    let scale = grid.dt().powf(hurst);
    let mut data = vec![0.0; n_paths * w];
    match method {
        Generator::Circulant => {
            let plan = CirculantPlan::new(hurst, n)?;
            data.par_chunks_mut(2 * w).enumerate().for_each(|(p, rows)| {
                let mut r = rng::stream(seed, p as u64);
                let mut buf = Vec::with_capacity(2 * n);
                let (a, b) = plan.draw_pair(&mut r, &mut buf);
                cumulate(&mut rows[..w], &a, scale);
                if rows.len() == 2 * w {
                    cumulate(&mut rows[w..], &b, scale);
                }
            });
        }
        Generator::Cholesky => {
            if n > cholesky_cap {
                return Err(FbmError::GridTooLarge { n_steps: n, cap: cholesky_cap });
            }
            let cov = DMatrix::from_fn(n, n, |i, j| fgn_autocov(hurst, i.abs_diff(j)));
            let chol = cov.cholesky().ok_or_else(|| {
                FbmError::InvalidArgument("increment covariance is not positive definite".into())
            })?;
            let l = chol.l();
            data.par_chunks_mut(w).enumerate().for_each(|(i, row)| {
                let mut r = rng::stream(seed, i as u64);
                let z = DVector::from_fn(n, |_, _| r.sample::<f64, _>(StandardNormal));
                let x = &l * z;
                cumulate(row, x.as_slice(), scale);
            });
        }
    }
    Ok(TrajectorySet::from_flat(grid, hurst, seed, method, data))
}

/// Circulant generation, falling back to Cholesky if the embedding is not
/// positive semidefinite.
pub fn fbm_paths_auto(hurst: f64, grid: TimeGrid, n_paths: usize, seed: u64) -> Result<TrajectorySet, FbmError> {
    match fbm_paths(hurst, grid, n_paths, seed, Generator::Circulant) {
        Err(FbmError::EmbeddingNotPsd { .. }) => fbm_paths(hurst, grid, n_paths, seed, Generator::Cholesky),
        other => other,
    }
}
