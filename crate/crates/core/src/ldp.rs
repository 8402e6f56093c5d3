//! Clip-and-Laplace gradient privatization, its budget, and a histogram check of the
//! resulting density-ratio bound.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    /// Elementwise clipping bound δ.
    pub clip_scale: f64,
    /// Laplace scale λ; zero disables noise.
    pub laplace_scale: f64,
}

impl PrivacyParams {
    pub fn new(clip_scale: f64, laplace_scale: f64) -> Result<Self> {
        let p = Self {
            clip_scale,
            laplace_scale,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters reaching budget `epsilon` at clipping scale `clip_scale` (λ = 2δ/ε).
    pub fn for_budget(clip_scale: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid("epsilon must be positive and finite"));
        }
        Self::new(clip_scale, 2.0 * clip_scale / epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_scale > 0.0) || !self.clip_scale.is_finite() {
            return Err(Error::invalid("clip scale must be positive and finite"));
        }
        if !(self.laplace_scale >= 0.0) || !self.laplace_scale.is_finite() {
            return Err(Error::invalid("laplace scale must be non-negative and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    /// Per-coordinate L1 sensitivity after clipping, 2δ.
    pub sensitivity: f64,
}

pub fn budget(params: &PrivacyParams) -> Result<PrivacyBudget> {
    params.validate()?;
    if params.laplace_scale == 0.0 {
        return Err(Error::UnboundedPrivacyCost);
    }
    let sensitivity = 2.0 * params.clip_scale;
    Ok(PrivacyBudget {
        epsilon: sensitivity / params.laplace_scale,
        sensitivity,
    })
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Elementwise clamp to `[-δ, δ]`.
pub fn clip(values: &[f64], clip_scale: f64) -> Result<Vec<f64>> {
    let mut out = values.to_vec();
    clip_in_place(&mut out, clip_scale)?;
    Ok(out)
}

pub fn clip_in_place(values: &mut [f64], clip_scale: f64) -> Result<()> {
    if !(clip_scale > 0.0) {
        return Err(Error::invalid("clip scale must be positive"));
    }
    check_finite(values)?;
    for v in values.iter_mut() {
        *v = v.clamp(-clip_scale, clip_scale);
    }
    Ok(())
}

/// One Laplace(0, scale) draw by inverting the CDF of a uniform on (-1/2, 1/2).
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        if u > -0.5 {
            return -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
    }
}

pub fn privatize<R: Rng + ?Sized>(values: &[f64], params: &PrivacyParams, rng: &mut R) -> Result<Vec<f64>> {
    let mut out = values.to_vec();
    privatize_in_place(&mut out, params, rng)?;
    Ok(out)
}

/// `clip(values, δ) + Laplace(0, λ)` per entry. Noise draws do not depend on the input, so two
/// calls from identically seeded streams add identical noise.
pub fn privatize_in_place<R: Rng + ?Sized>(
    values: &mut [f64],
    params: &PrivacyParams,
    rng: &mut R,
) -> Result<()> {
    params.validate()?;
    clip_in_place(values, params.clip_scale)?;
    if params.laplace_scale > 0.0 {
        for v in values.iter_mut() {
            *v += sample_laplace(params.laplace_scale, rng);
        }
    }
    Ok(())
}

/// Minimum number of bins with enough mass in both histograms.
pub const MIN_USABLE_BINS: usize = 10;

/// Largest `|ln(p̂_x / p̂_y)|` over shared histogram bins of `M(x)` and `M(y)`.
///
/// Bins span `[min(x,y) - 2λ, max(x,y) + 2λ]`. A bin is usable only if both histograms hold at
/// least `num_samples / (10 · num_bins)` draws in it, which keeps the per-bin sampling error of
/// the log ratio small.
pub fn empirical_ldp_check<R: Rng + ?Sized>(
    x: f64,
    y: f64,
    params: &PrivacyParams,
    num_samples: usize,
    num_bins: usize,
    rng: &mut R,
) -> Result<f64> {
    params.validate()?;
    let delta = params.clip_scale;
    if x.abs() > delta || y.abs() > delta {
        return Err(Error::invalid("inputs must already lie within the clipping range"));
    }
    if params.laplace_scale == 0.0 {
        return Err(Error::UnboundedPrivacyCost);
    }
    if num_samples < 100_000 {
        return Err(Error::invalid("at least 1e5 samples are required"));
    }
    if num_bins < MIN_USABLE_BINS {
        return Err(Error::Inconclusive {
            usable: num_bins,
            required: MIN_USABLE_BINS,
        });
    }
    let lambda = params.laplace_scale;
    let lo = x.min(y) - 2.0 * lambda;
    let hi = x.max(y) + 2.0 * lambda;
    let width = (hi - lo) / num_bins as f64;

    let histogram = |input: f64, rng: &mut R| -> Result<Vec<u64>> {
        let mut counts = vec![0u64; num_bins];
        let mut buf = [input];
        for _ in 0..num_samples {
            buf[0] = input;
            privatize_in_place(&mut buf, params, rng)?;
            let z = buf[0];
            if z >= lo && z < hi {
                let b = (((z - lo) / width) as usize).min(num_bins - 1);
                counts[b] += 1;
            }
        }
        Ok(counts)
    };
    let hx = histogram(x, rng)?;
    let hy = histogram(y, rng)?;

    let min_count = (num_samples / (10 * num_bins)).max(1) as u64;
    let ratios: Vec<f64> = hx
        .iter()
        .zip(&hy)
        .filter(|(a, b)| **a >= min_count && **b >= min_count)
        .map(|(&a, &b)| (a as f64 / b as f64).ln().abs())
        .collect();
    if ratios.len() < MIN_USABLE_BINS {
        return Err(Error::Inconclusive {
            usable: ratios.len(),
            required: MIN_USABLE_BINS,
        });
    }
    Ok(ratios.into_iter().fold(0.0, f64::max))
}
