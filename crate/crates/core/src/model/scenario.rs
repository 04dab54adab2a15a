use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{CostModel, ModelError, PriorSpec};
use crate::linalg::{CMatrix, HermitianMatrix};

/// One clock interrogation problem: `atoms` two-level atoms (Dicke levels
/// `0..=atoms`), `queries` coherent oracle calls, and a fixed estimate set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockScenario {
    pub atoms: usize,
    pub queries: usize,
    pub prior: PriorSpec,
    pub cost: CostModel,
    pub d: usize,
    pub estimates: Vec<f64>,
}

impl ClockScenario {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.atoms < 1 {
            return Err(ModelError::Invalid("need at least one atom".into()));
        }
        if self.queries < 1 {
            return Err(ModelError::Invalid("need at least one query".into()));
        }
        if self.d < 2 && self.prior.is_continuous() {
            return Err(ModelError::Invalid("oracle discretization d must be at least 2".into()));
        }
        if self.estimates.is_empty() {
            return Err(ModelError::Invalid("estimate set is empty".into()));
        }
        if self.estimates.windows(2).any(|w| !(w[0] < w[1])) || self.estimates.iter().any(|f| !f.is_finite()) {
            return Err(ModelError::Invalid("estimates must be finite and strictly increasing".into()));
        }
        self.prior.validate()
    }

    /// Dicke levels `N + 1`.
    pub fn levels(&self) -> usize {
        self.atoms + 1
    }

    pub fn with_estimates(&self, estimates: Vec<f64>) -> Self {
        Self { estimates, ..self.clone() }
    }
}

/// Finite oracle: frequencies `ω_x` with probabilities `p_x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedPrior {
    pub omegas: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscretizedPrior {
    pub fn new(omegas: Vec<f64>, weights: Vec<f64>) -> Result<Self, ModelError> {
        let dp = Self { omegas, weights };
        dp.validate()?;
        Ok(dp)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.omegas.is_empty() || self.omegas.len() != self.weights.len() {
            return Err(ModelError::Invalid("discretized prior needs equally many points and weights".into()));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(ModelError::Invalid("negative weight in discretized prior".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ModelError::Invalid(format!("discretized weights sum to {total}")));
        }
        if self.omegas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ModelError::Invalid("discretized points must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Uses a discrete prior's own points; continuous priors need `discretize_prior`.
    pub fn from_discrete(prior: &PriorSpec) -> Result<Self, ModelError> {
        match prior {
            PriorSpec::Discrete { points, weights } => Self::new(points.clone(), weights.clone()),
            _ => Err(ModelError::Domain("prior is continuous; discretize it first".into())),
        }
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

/// `Φ_k(x, y) = exp(i k (ω_x − ω_y))`: the entrywise action of one query on
/// the oracle block paired with Dicke level `k`.
pub fn oracle_phase_matrix(omegas: &[f64], k: usize) -> CMatrix<f64> {
    let kf = k as f64;
    CMatrix::from_fn(omegas.len(), omegas.len(), |x, y| Complex::from_polar(1.0, kf * (omegas[x] - omegas[y])))
}

/// `A_a = diag(C(ω_x − f_a))`
pub fn cost_operator(omegas: &[f64], f: f64, cost: CostModel) -> HermitianMatrix<f64> {
    let diag: Vec<f64> = omegas.iter().map(|&w| cost.value(w - f)).collect();
    HermitianMatrix::from_real_diag(&diag)
}

/// `ρ₀ = |p⟩⟨p|` with `|p⟩ = Σ_x √p_x |x⟩`.
pub fn initial_oracle_state(weights: &[f64]) -> Result<HermitianMatrix<f64>, ModelError> {
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(ModelError::Invalid("negative weight".into()));
    }
    let amp: Vec<Complex<f64>> = weights.iter().map(|&w| Complex::new(w.sqrt(), 0.0)).collect();
    Ok(HermitianMatrix::projector(&amp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn phase_matrix_examples() {
        let ones = oracle_phase_matrix(&[0.3, -1.2, 2.0], 0);
        assert!(ones.as_slice().iter().all(|z| (z - Complex::new(1.0, 0.0)).norm() < 1e-15));
        let p1 = oracle_phase_matrix(&[0.0, PI], 1);
        let want = [1.0, -1.0, -1.0, 1.0];
        for (z, w) in p1.as_slice().iter().zip(want) {
            assert!((z - Complex::new(w, 0.0)).norm() < 1e-15);
        }
        let p2 = oracle_phase_matrix(&[0.0, PI], 2);
        assert!(p2.as_slice().iter().all(|z| (z - Complex::new(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn phase_matrix_is_power_of_first() {
        let om = [-0.7, 0.1, 1.9];
        let p1 = oracle_phase_matrix(&om, 1);
        let p3 = oracle_phase_matrix(&om, 3);
        let cube = p1.hadamard(&p1).hadamard(&p1);
        assert!(cube.max_abs_diff(&p3) < 1e-14);
    }

    #[test]
    fn cost_operator_examples() {
        assert_eq!(cost_operator(&[-1.0, 0.0, 1.0], 0.0, CostModel::Quadratic).matrix().diag_real(), vec![1.0, 0.0, 1.0]);
        let p = cost_operator(&[0.0, PI], 0.0, CostModel::Periodic).matrix().diag_real();
        assert!(p[0].abs() < 1e-15 && (p[1] - 4.0).abs() < 1e-15);
        assert_eq!(cost_operator(&[-2.0, 3.0], 1.0, CostModel::Absolute).matrix().diag_real(), vec![3.0, 2.0]);
    }

    #[test]
    fn initial_state_examples() {
        let r = initial_oracle_state(&[0.5, 0.5]).unwrap();
        assert!(r.matrix().as_slice().iter().all(|z| (z.re - 0.5).abs() < 1e-15 && z.im == 0.0));
        let r = initial_oracle_state(&[1.0, 0.0]).unwrap();
        assert_eq!(r.matrix().diag_real(), vec![1.0, 0.0]);
        assert_eq!(r[(0, 1)].re, 0.0);
        let r = initial_oracle_state(&[0.25, 0.75]).unwrap();
        assert!((r[(0, 1)].re - 0.1875f64.sqrt()).abs() < 1e-15);
        assert!(initial_oracle_state(&[1.5, -0.5]).is_err());
    }
}
