use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{GeneralizedFunction, MeasureTerm};
use crate::error::{Error, Result};
use crate::regression::log_log_fit;

/// Margin added to the required small-ball exponent `n + |alpha|`.
pub const DEFAULT_SLACK: f64 = 0.1;

const MIN_SCALES: usize = 4;

/// `|mu|(B(x0, eps))` of the term's base measure (closed balls), per scale.
pub fn small_ball_mass(term: &MeasureTerm, x0: f64, eps: &[f64]) -> Vec<f64> {
    eps.iter()
        .map(|e| term.weight.norm() * term.base.variation(x0 - e, x0 + e))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermCertificate {
    pub term: String,
    pub order: usize,
    pub masses: Vec<f64>,
    /// Fitted exponent in `|mu|(B(x0, eps)) ~ eps^sigma`; infinite when the masses vanish.
    pub sigma: f64,
    pub required: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointValueCertificate {
    pub x0: f64,
    pub gamma_re: f64,
    pub gamma_im: f64,
    pub order: usize,
    pub slack: f64,
    pub eps: Vec<f64>,
    pub terms: Vec<TermCertificate>,
    pub pass: bool,
}

/// Certifies `f(x0) = gamma` of order `r` from the stored decomposition: every
/// term must satisfy `|mu_k|(B(x0, eps)) = o(eps^{1 + k})`, read as a fitted
/// log-log slope of at least `1 + k + slack`.
pub fn certify_point_value(
    f: &GeneralizedFunction,
    x0: f64,
    eps: &[f64],
    slack: f64,
) -> Result<PointValueCertificate> {
    if eps.len() < MIN_SCALES {
        return Err(Error::InsufficientScales {
            needed: MIN_SCALES,
            got: eps.len(),
        });
    }
    let terms: Vec<TermCertificate> = f
        .terms()
        .iter()
        .map(|t| {
            let masses = small_ball_mass(t, x0, eps);
            let required = 1.0 + t.order as f64 + slack;
            let nonzero: Vec<(f64, f64)> = eps
                .iter()
                .zip(&masses)
                .filter(|(_, m)| **m > 0.0)
                .map(|(e, m)| (*e, *m))
                .collect();
            let finest_zero = eps
                .iter()
                .zip(&masses)
                .min_by(|a, b| a.0.total_cmp(b.0))
                .is_some_and(|(_, m)| *m == 0.0);
            let sigma = if finest_zero {
                f64::INFINITY
            } else {
                let (es, ms): (Vec<f64>, Vec<f64>) = nonzero.into_iter().unzip();
                log_log_fit(&es, &ms).map_or(f64::NAN, |fit| fit.slope)
            };
            TermCertificate {
                term: t.label(),
                order: t.order,
                masses,
                sigma,
                required,
                pass: sigma >= required,
            }
        })
        .collect();
    let pass = terms.iter().all(|t| t.pass);
    Ok(PointValueCertificate {
        x0,
        gamma_re: f.gamma().re,
        gamma_im: f.gamma().im,
        order: f.order(),
        slack,
        eps: eps.to_vec(),
        terms,
        pass,
    })
}

/// Sets shrinking to `x0` over which density ratios are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ShrinkingFamily {
    /// `[x0 - eps, x0 + eps]`.
    Balls,
    /// Intervals `[x0 - u, x0 + v]` with `max(u, v) = eps` and `u + v >= 2 a eps`.
    Intervals {
        regularity: f64,
        samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleDispersion {
    pub eps: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityPointReport {
    pub x0: f64,
    pub family: ShrinkingFamily,
    /// Mean ratio `mu(I) / |I|` at the finest scale.
    pub gamma_hat: f64,
    /// Largest spread `max - min` of the ratios within one scale.
    pub dispersion: f64,
    /// Largest `|ratio|` seen at any scale.
    pub max_abs_ratio: f64,
    pub scales: Vec<ScaleDispersion>,
}

/// Ratios `mu(I) / m(I)` over sets of a regularly shrinking family.
pub fn density_point_check(
    mu: &GeneralizedFunction,
    x0: f64,
    eps: &[f64],
    family: ShrinkingFamily,
) -> Result<DensityPointReport> {
    if eps.is_empty() {
        return Err(Error::InsufficientScales { needed: 1, got: 0 });
    }
    let ratio = |u: f64, v: f64| -> Result<f64> {
        let m: Complex64 = mu.interval_mass(x0 - u, x0 + v)?;
        Ok(m.re / (u + v))
    };
    let mut rng = match family {
        ShrinkingFamily::Intervals { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        ShrinkingFamily::Balls => None,
    };
    let mut scales = Vec::with_capacity(eps.len());
    for &e in eps {
        let ratios = match (family, rng.as_mut()) {
            (
                ShrinkingFamily::Intervals {
                    regularity, samples, ..
                },
                Some(rng),
            ) => {
                let short_min = ((2.0 * regularity - 1.0) * e).max(0.0);
                (0..samples.max(2))
                    .map(|i| {
                        let short = rng.random_range(short_min..=e);
                        // Alternate the long side so both one-sided extremes are reached.
                        if i % 2 == 0 {
                            ratio(e, short)
                        } else {
                            ratio(short, e)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            _ => vec![ratio(e, e)?],
        };
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        scales.push(ScaleDispersion {
            eps: e,
            min,
            max,
            mean,
        });
    }
    let finest = scales
        .iter()
        .min_by(|a, b| a.eps.total_cmp(&b.eps))
        .expect("non-empty scales");
    Ok(DensityPointReport {
        x0,
        family,
        gamma_hat: finest.mean,
        dispersion: scales.iter().map(|s| s.max - s.min).fold(0.0, f64::max),
        max_abs_ratio: scales
            .iter()
            .map(|s| s.min.abs().max(s.max.abs()))
            .fold(0.0, f64::max),
        scales,
    })
}
