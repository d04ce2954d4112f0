//! Normalized forecast errors, box-plot summaries and the Jarque-Bera test.
//!
//! nRMSE and nMAE divide by the mean of the observations by default. The
//! normalizer changes the magnitude of every reported error, so it is
//! selectable through [`Normalizer`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominator of the normalized error metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// Mean of the observations.
    #[default]
    Mean,
    /// `max(obs) - min(obs)`.
    Range,
}

impl Normalizer {
    fn value(&self, obs: &[f64]) -> Result<f64> {
        let v = match self {
            Normalizer::Mean => obs.iter().sum::<f64>() / obs.len() as f64,
            Normalizer::Range => {
                let (lo, hi) = obs
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                        (lo.min(x), hi.max(x))
                    });
                hi - lo
            }
        };
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::ZeroNormalizer(v))
        }
    }
}

fn check_pair(pred: &[f64], obs: &[f64]) -> Result<()> {
    if pred.len() != obs.len() {
        return Err(Error::InputShape {
            expected: obs.len(),
            got: pred.len(),
        });
    }
    if obs.is_empty() {
        return Err(Error::EmptyData("no observations"));
    }
    Ok(())
}

/// Root mean square error over the observation mean.
pub fn nrmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    nrmse_with(pred, obs, Normalizer::Mean)
}

/// Mean absolute error over the observation mean.
pub fn nmae(pred: &[f64], obs: &[f64]) -> Result<f64> {
    nmae_with(pred, obs, Normalizer::Mean)
}

pub fn nrmse_with(pred: &[f64], obs: &[f64], norm: Normalizer) -> Result<f64> {
    check_pair(pred, obs)?;
    let d = norm.value(obs)?;
    let mse = pred
        .iter()
        .zip(obs)
        .map(|(p, o)| (p - o).powi(2))
        .sum::<f64>()
        / obs.len() as f64;
    Ok(mse.sqrt() / d)
}

pub fn nmae_with(pred: &[f64], obs: &[f64], norm: Normalizer) -> Result<f64> {
    check_pair(pred, obs)?;
    let d = norm.value(obs)?;
    let mae = pred
        .iter()
        .zip(obs)
        .map(|(p, o)| (p - o).abs())
        .sum::<f64>()
        / obs.len() as f64;
    Ok(mae / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub nrmse: f64,
    pub nmae: f64,
    pub n: usize,
    pub obs_mean: f64,
}

impl ErrorSummary {
    pub fn compute(pred: &[f64], obs: &[f64], norm: Normalizer) -> Result<Self> {
        Ok(Self {
            nrmse: nrmse_with(pred, obs, norm)?,
            nmae: nmae_with(pred, obs, norm)?,
            n: obs.len(),
            obs_mean: obs.iter().sum::<f64>() / obs.len() as f64,
        })
    }
}

/// Type-7 quantile (linear interpolation between order statistics) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Tukey box-plot statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Smallest observation within `q1 - 1.5 IQR`.
    pub whisker_low: f64,
    /// Largest observation within `q3 + 1.5 IQR`.
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::EmptyData("box stats of an empty sequence"));
    }
    let sorted = sorted_copy(values);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = || {
        sorted
            .iter()
            .copied()
            .filter(|v| (lo_fence..=hi_fence).contains(v))
    };
    let whisker_low = inside().next().unwrap_or(q1);
    let whisker_high = inside().next_back().unwrap_or(q3);
    let outliers = sorted
        .iter()
        .copied()
        .filter(|v| !(lo_fence..=hi_fence).contains(v))
        .collect();
    Ok(BoxStats {
        q1,
        median,
        q3,
        whisker_low,
        whisker_high,
        outliers,
    })
}

/// Elementwise `mlp / pmlp`; values above 1 mean the pruned network did better.
pub fn nrmse_ratio(mlp: &[f64], pmlp: &[f64]) -> Result<Vec<f64>> {
    if mlp.len() != pmlp.len() {
        return Err(Error::InputShape {
            expected: mlp.len(),
            got: pmlp.len(),
        });
    }
    mlp.iter()
        .zip(pmlp)
        .map(|(&a, &b)| {
            if b > 0.0 {
                Ok(a / b)
            } else {
                Err(Error::ZeroNormalizer(b))
            }
        })
        .collect()
}

/// 95% critical value of χ² with two degrees of freedom.
pub const CHI2_2DF_95: f64 = 5.991_464_547_107_979;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JarqueBera {
    pub statistic: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub normal_at_5pct: bool,
}

/// `JB = n/6 (S² + (K-3)²/4)` with moment-based skewness and kurtosis.
pub fn jarque_bera(values: &[f64]) -> Result<JarqueBera> {
    let n = values.len();
    if n < 8 {
        return Err(Error::InsufficientData {
            needed: 8,
            available: n,
        });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if !(m2 > 0.0) {
        return Err(Error::InvariantViolation(
            "Jarque-Bera needs non-zero variance".into(),
        ));
    }
    let skewness = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2);
    let statistic = nf / 6.0 * (skewness * skewness + (kurtosis - 3.0).powi(2) / 4.0);
    Ok(JarqueBera {
        statistic,
        skewness,
        kurtosis,
        normal_at_5pct: statistic < CHI2_2DF_95,
    })
}
