//! Product-of-independent-factors representations of a mixing variable.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mwright::{ln_m_wright_moment, sample_ln_m_wright};
use super::{fhdam_moment_real, FhdamError, FhdamSpec};
use crate::rng;
use crate::special::{ln_gamma, log_add_exp};

/// One independent factor, raised to `power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Factor {
    Gamma { shape: f64, scale: f64, power: f64 },
    Beta { a: f64, b: f64, power: f64 },
    MWright { beta: f64, power: f64 },
}

impl Factor {
    pub fn power(&self) -> f64 {
        match *self {
            Factor::Gamma { power, .. } | Factor::Beta { power, .. } | Factor::MWright { power, .. } => power,
        }
    }

    pub fn validate(&self) -> Result<(), FhdamError> {
        let ok = match *self {
            Factor::Gamma { shape, scale, power } => shape > 0.0 && scale > 0.0 && power != 0.0 && power.is_finite(),
            Factor::Beta { a, b, power } => a > 0.0 && b > 0.0 && power != 0.0 && power.is_finite(),
            Factor::MWright { beta, power } => beta > 0.0 && beta < 1.0 && power != 0.0 && power.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(FhdamError::InvalidFactor(*self))
        }
    }

    /// `ln E[F^q]` of the underlying (unpowered) variable, `None` if infinite.
    pub fn ln_base_moment(&self, q: f64) -> Option<f64> {
        match *self {
            Factor::Gamma { shape, scale, .. } => {
                (shape + q > 0.0).then(|| q * scale.ln() + ln_gamma(shape + q) - ln_gamma(shape))
            }
            Factor::Beta { a, b, .. } => {
                (a + q > 0.0).then(|| ln_gamma(a + q) + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(a + b + q))
            }
            Factor::MWright { beta, .. } => (q > -1.0).then(|| ln_m_wright_moment(beta, q)),
        }
    }

    /// `ln E[(F^power)^l]`.
    pub fn ln_moment(&self, l: f64) -> Option<f64> {
        self.ln_base_moment(self.power() * l)
    }

    /// Log of one draw of `F^power`.
    pub fn sample_ln<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let base = match *self {
            Factor::Gamma { shape, scale, .. } => ln_gamma_draw(shape, rng) + scale.ln(),
            Factor::Beta { a, b, .. } => {
                let (ga, gb) = (ln_gamma_draw(a, rng), ln_gamma_draw(b, rng));
                ga - log_add_exp(ga, gb)
            }
            Factor::MWright { beta, .. } => sample_ln_m_wright(beta, rng),
        };
        self.power() * base
    }
}

/// Log of a unit-scale gamma draw; shapes below 1 use
/// `G_k = G_{k+1} U^{1/k}` so the result never underflows to `-inf`.
fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("shape checked positive").sample(rng);
        g.ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("shape checked positive").sample(rng);
        let u: f64 = rng.sample(Open01);
        g.ln() + u.ln() / shape
    }
}

/// An explicit product of independent factors; empty means the constant 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FactorDecomposition {
    pub factors: Vec<Factor>,
}

impl FactorDecomposition {
    pub fn new(factors: Vec<Factor>) -> Self {
        Self { factors }
    }

    pub fn validate(&self) -> Result<(), FhdamError> {
        self.factors.iter().try_for_each(Factor::validate)
    }

    /// `E[Y^l] = Π_f E[F_f^{power_f l}]`, `None` if any factor moment is infinite.
    pub fn moment(&self, l: f64) -> Option<f64> {
        let mut acc = 0.0;
        for f in &self.factors {
            acc += f.ln_moment(l)?;
        }
        Some(acc.exp())
    }

    /// Stable identifier: first 16 hex digits of the SHA-256 of the JSON form.
    pub fn spec_id(&self) -> String {
        let json = serde_json::to_string(self).expect("factor lists always serialize");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// One draw of `Y` from the given stream.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let ln_y: f64 = self.factors.iter().map(|f| f.sample_ln(rng)).sum();
        ln_y.exp().clamp(f64::MIN_POSITIVE, f64::MAX)
    }
}

/// Samples with their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub seed: u64,
    pub spec_id: String,
}

const CHUNK: usize = 4096;

/// Draws `n` independent values of `Y`. Chunk `c` of 4096 values uses
/// stream `c` of the seed, so the output does not depend on thread count.
pub fn sample(decomp: &FactorDecomposition, n: usize, seed: u64) -> Result<SampleBatch, FhdamError> {
    decomp.validate()?;
    if n == 0 {
        return Err(FhdamError::InvalidArgument("sample size must be at least 1".into()));
    }
    let mut values = vec![0.0; n];
    values.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut r = rng::stream(seed, c as u64);
        for v in chunk.iter_mut() {
            *v = decomp.draw(&mut r);
        }
    });
    Ok(SampleBatch { values, seed, spec_id: decomp.spec_id() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRow {
    pub order: u32,
    pub decomposition: f64,
    pub spec: f64,
    pub rel_err: f64,
}

/// Factor-product moments against the spec's moments for `l = 1..=max_order`.
pub fn moment_table(decomp: &FactorDecomposition, spec: &FhdamSpec, max_order: u32) -> Vec<MomentRow> {
    (1..=max_order)
        .map(|l| {
            let d = decomp.moment(l as f64).unwrap_or(f64::INFINITY);
            let s = fhdam_moment_real(spec, l as f64).unwrap_or(f64::INFINITY);
            let rel_err = if d == s { 0.0 } else { (d - s).abs() / s.abs() };
            MomentRow { order: l, decomposition: d, spec: s, rel_err }
        })
        .collect()
}

/// Checks the decomposition against the spec by matching moments of orders
/// `1..=max_order`; the first order whose relative error reaches `rel_tol`
/// is reported.
pub fn verify_decomposition(
    decomp: &FactorDecomposition,
    spec: &FhdamSpec,
    max_order: u32,
    rel_tol: f64,
) -> Result<Vec<MomentRow>, FhdamError> {
    decomp.validate()?;
    let table = moment_table(decomp, spec, max_order);
    if let Some(row) = table.iter().find(|r| !(r.rel_err < rel_tol)) {
        return Err(FhdamError::MomentMismatch {
            order: row.order,
            decomposition: row.decomposition,
            spec: row.spec,
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;
    use crate::wright::{validate_params, WrightParams};
    use approx::assert_relative_eq;

    fn mean_and_se(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn empty_decomposition_is_constant_one() {
        let b = sample(&FactorDecomposition::default(), 5, 1).unwrap();
        assert_eq!(b.values, vec![1.0; 5]);
    }

    #[test]
    fn exponential_mean() {
        let d = FactorDecomposition::new(vec![Factor::Gamma { shape: 1.0, scale: 1.0, power: 1.0 }]);
        let b = sample(&d, 100_000, 11).unwrap();
        let (m, _) = mean_and_se(&b.values);
        assert!((m - 1.0).abs() < 3.0 / (1e5f64).sqrt());
    }

    #[test]
    fn m_wright_mean() {
        let d = FactorDecomposition::new(vec![Factor::MWright { beta: 0.5, power: 1.0 }]);
        let b = sample(&d, 100_000, 5).unwrap();
        let (m, se) = mean_and_se(&b.values);
        let target = gamma(2.0) / gamma(1.5);
        assert_relative_eq!(target, std::f64::consts::FRAC_2_SQRT_PI, max_relative = 1e-14);
        assert!((m - target).abs() < 3.0 * se, "{m} vs {target} (se {se})");
    }

    #[test]
    fn small_shape_gamma_stays_positive() {
        let d = FactorDecomposition::new(vec![Factor::Gamma { shape: 0.01, scale: 1.0, power: 1.0 }]);
        let b = sample(&d, 20_000, 3).unwrap();
        assert!(b.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn verify_matches_and_mismatches() {
        let exp1 = validate_params(WrightParams::gamma(0.0, 1.0)).unwrap();
        let good = FactorDecomposition::new(vec![Factor::Gamma { shape: 1.0, scale: 1.0, power: 1.0 }]);
        let rows = verify_decomposition(&good, &exp1, 5, 1e-9).unwrap();
        assert!(rows.iter().all(|r| r.rel_err < 1e-12));

        let bad = FactorDecomposition::new(vec![Factor::Gamma { shape: 2.0, scale: 1.0, power: 1.0 }]);
        match verify_decomposition(&bad, &exp1, 5, 1e-9).unwrap_err() {
            FhdamError::MomentMismatch { order, decomposition, spec } => {
                assert_eq!(order, 1);
                assert_relative_eq!(decomposition, 2.0, max_relative = 1e-12);
                assert_relative_eq!(spec, 1.0, max_relative = 1e-12);
            }
            e => panic!("unexpected {e}"),
        }

        let mw = validate_params(WrightParams::m_wright(0.5)).unwrap();
        let d = FactorDecomposition::new(vec![Factor::MWright { beta: 0.5, power: 1.0 }]);
        assert!(verify_decomposition(&d, &mw, 6, 1e-9).is_ok());
    }

    #[test]
    fn same_seed_same_batch_any_thread_count() {
        let d = FactorDecomposition::new(vec![
            Factor::Beta { a: 2.0, b: 3.0, power: 0.5 },
            Factor::MWright { beta: 0.3, power: 2.0 },
        ]);
        let a = sample(&d, 10_000, 99).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| sample(&d, 10_000, 99).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.spec_id.len(), 16);
    }
}
