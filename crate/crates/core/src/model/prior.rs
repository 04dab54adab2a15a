use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use libm::erfc;

use super::ModelError;

/// Prior over the oscillator frequency, in phase accumulated per probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum PriorSpec {
    Gaussian { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    Discrete { points: Vec<f64>, weights: Vec<f64> },
}

impl PriorSpec {
    pub fn gaussian(mean: f64, std: f64) -> Self {
        Self::Gaussian { mean, std }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self::Uniform { lo, hi }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            Self::Gaussian { mean, std } => {
                if !(mean.is_finite() && std.is_finite() && *std > 0.0) {
                    return Err(ModelError::Invalid(format!("gaussian prior needs finite mean and std > 0, got ({mean}, {std})")));
                }
            }
            Self::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(ModelError::Invalid(format!("uniform prior needs lo < hi, got ({lo}, {hi})")));
                }
            }
            Self::Discrete { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(ModelError::Invalid("discrete prior needs equally many points and weights".into()));
                }
                if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                    return Err(ModelError::Invalid("discrete prior weights must be nonnegative".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(ModelError::Invalid(format!("discrete prior weights sum to {total}, not 1")));
                }
                if points.windows(2).any(|w| !(w[0] < w[1])) || points.iter().any(|p| !p.is_finite()) {
                    return Err(ModelError::Invalid("discrete prior points must be finite and strictly increasing".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, Self::Discrete { .. })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Gaussian { mean, .. } => *mean,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Discrete { points, weights } => points.iter().zip(weights).map(|(p, w)| p * w).sum(),
        }
    }

    pub fn std(&self) -> f64 {
        match self {
            Self::Gaussian { std, .. } => *std,
            Self::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
            Self::Discrete { points, weights } => {
                let m = self.mean();
                points.iter().zip(weights).map(|(p, w)| w * (p - m) * (p - m)).sum::<f64>().sqrt()
            }
        }
    }

    /// Density; a discrete prior has none and is rejected.
    pub fn pdf(&self, x: f64) -> Result<f64, ModelError> {
        match self {
            Self::Gaussian { mean, std } => {
                let z = (x - mean) / std;
                Ok((-0.5 * z * z).exp() / (std * (2.0 * PI).sqrt()))
            }
            Self::Uniform { lo, hi } => Ok(if x >= *lo && x <= *hi { 1.0 / (hi - lo) } else { 0.0 }),
            Self::Discrete { .. } => Err(ModelError::Domain("discrete prior has no density".into())),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { mean, std } => std_normal_cdf((x - mean) / std),
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Discrete { points, weights } => {
                points.iter().zip(weights).filter(|(p, _)| **p <= x).map(|(_, w)| w).sum::<f64>().min(1.0)
            }
        }
    }

    pub fn invcdf(&self, q: f64) -> Result<f64, ModelError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(ModelError::Domain(format!("inverse cdf argument {q} outside (0, 1)")));
        }
        match self {
            Self::Gaussian { mean, std } => Ok(mean + std * std_normal_invcdf(q)),
            Self::Uniform { lo, hi } => Ok(lo + q * (hi - lo)),
            Self::Discrete { .. } => Err(ModelError::Domain("inverse cdf undefined for a discrete prior".into())),
        }
    }

    /// Interval carrying all but a negligible tail of the mass: ±8σ for a
    /// Gaussian, the exact support otherwise.
    pub fn effective_support(&self) -> (f64, f64) {
        match self {
            Self::Gaussian { mean, std } => (mean - GAUSSIAN_TRUNCATION * std, mean + GAUSSIAN_TRUNCATION * std),
            Self::Uniform { lo, hi } => (*lo, *hi),
            Self::Discrete { points, .. } => (points[0], points[points.len() - 1]),
        }
    }
}

/// Half-width, in standard deviations, of the integration window for Gaussian priors.
pub const GAUSSIAN_TRUNCATION: f64 = 8.0;

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Rational approximation of the standard normal quantile (relative error
/// around 1e-9), used only as the starting point for Newton's method.
fn normal_quantile_seed(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383_577_518_672_69e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Standard normal quantile: Newton on the cdf from a rational seed.
pub fn std_normal_invcdf(p: f64) -> f64 {
    let mut x = normal_quantile_seed(p);
    for _ in 0..50 {
        // Work in the tail that keeps the residual relative to a small number.
        let (resid, scale) = if x <= 0.0 {
            (std_normal_cdf(x) - p, p)
        } else {
            ((1.0 - p) - std_normal_cdf(-x), 1.0 - p)
        };
        let dens = std_normal_pdf(x);
        if dens == 0.0 {
            break;
        }
        let step = resid / dens;
        x -= step;
        if resid.abs() <= 1e-12 * scale || step.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}
