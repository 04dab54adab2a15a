//! Oracle discretization by inverse transform, the offset-averaged lower
//! bound, the integrated upper bound, and the querier discretization gap.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{golden_section, ClockScenario, CostModel, DiscretizedPrior, ModelError, PriorSpec};
use crate::program::{solve_interrogation, InterrogationSolution, ProgramError};
use crate::quadrature::{integrate, QuadOptions, QuadratureNotConverged};
use crate::reconstruct::{reconstruct, verify_protocol, ReconstructError, ReconstructedProtocol, VerifyReport};
use crate::rng::XorShift64Star;
use crate::sdp::SolverOptions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureNotConverged),
    #[error("every offset failed ({0} attempted)")]
    NoSamples(usize),
}

/// Offsets are kept this far (relative to `1/d`) inside the open interval.
pub const OFFSET_CLAMP: f64 = 1e-12;

/// `ω_k = P^{-1}(o + k/d)`, equal weights.
pub fn discretize_prior(prior: &PriorSpec, d: usize, o: f64) -> Result<DiscretizedPrior, ModelError> {
    if !prior.is_continuous() {
        return Err(ModelError::Domain("discretization requires a continuous prior".into()));
    }
    if d == 0 {
        return Err(ModelError::Domain("d must be positive".into()));
    }
    let step = 1.0 / d as f64;
    if !(o > 0.0 && o < step) {
        return Err(ModelError::Domain(format!("offset {o} outside (0, 1/{d})")));
    }
    let omegas = (0..d).map(|k| prior.invcdf(o + k as f64 * step)).collect::<Result<Vec<_>, _>>()?;
    DiscretizedPrior::new(omegas, vec![step; d])
}

/// `k` offsets uniform on `(0, 1/d)`, clamped away from the ends.
pub fn offsets(d: usize, k: usize, seed: u64) -> Vec<f64> {
    let mut rng = XorShift64Star::new(seed);
    let step = 1.0 / d as f64;
    (0..k).map(|_| (rng.next_f64() * step).clamp(OFFSET_CLAMP * step, (1.0 - OFFSET_CLAMP) * step)).collect()
}

/// Panel width used when integrating a protocol: the outcome probabilities
/// are trigonometric polynomials of degree `N t_f` in `ω`.
pub fn protocol_quad_options(protocol: &ReconstructedProtocol, prior: &PriorSpec) -> QuadOptions {
    let degree = (protocol.atoms * protocol.queries).max(1) as f64;
    let width = (std::f64::consts::PI / (4.0 * degree)).min(0.25 * prior.std());
    QuadOptions { max_panel: width, ..QuadOptions::default() }
}

/// `Σ_a ∫ C(ω − f_a) q(a|ω) p(ω) dω` over the prior's effective support.
pub fn continuous_cost(
    protocol: &ReconstructedProtocol,
    prior: &PriorSpec,
    cost: CostModel,
    opts: &QuadOptions,
) -> Result<f64, BoundsError> {
    if !prior.is_continuous() {
        return Err(ModelError::Domain("continuous cost needs a continuous prior".into()).into());
    }
    let (lo, hi) = prior.effective_support();
    let f = |w: f64| {
        let q = protocol.simulate(w);
        let c: f64 = q.iter().zip(&protocol.estimates).map(|(qa, &fa)| qa * cost.value(w - fa)).sum();
        c * prior.pdf(w).unwrap_or(0.0)
    };
    Ok(integrate(f, lo, hi, opts)?)
}

/// `∫ M(ω) p(ω) dω`: cost of falling outside the estimate range.
pub fn tail_integral(prior: &PriorSpec, estimates: &[f64], cost: CostModel) -> Result<f64, BoundsError> {
    let (lo, hi) = prior.effective_support();
    let f1 = estimates[0];
    let fm = estimates[estimates.len() - 1];
    let opts = QuadOptions { max_panel: 0.125 * prior.std().max(1e-300), ..QuadOptions::default() };
    let left = integrate(|w| cost.value(w - f1) * prior.pdf(w).unwrap_or(0.0), lo, f1.min(hi), &opts)?;
    let right = integrate(|w| cost.value(w - fm) * prior.pdf(w).unwrap_or(0.0), fm.max(lo), hi, &opts)?;
    Ok(left + right)
}

/// `max_j (b/8)(f_{j+1} − f_j)² + ∫ M p`, or `None` when the cost has no
/// curvature bound of the required form.
pub fn querier_gap(prior: &PriorSpec, estimates: &[f64], cost: CostModel) -> Option<f64> {
    gap_formula(prior, estimates, cost, cost.curvature_bound()?)
}

fn gap_formula(prior: &PriorSpec, estimates: &[f64], cost: CostModel, b: f64) -> Option<f64> {
    if estimates.len() < 2 || !prior.is_continuous() {
        return None;
    }
    let spacing = estimates.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let tail = tail_integral(prior, estimates, cost).ok()?;
    Some(b / 8.0 * spacing * spacing + tail)
}

fn equispaced(center: f64, half_width: f64, m: usize) -> Vec<f64> {
    (0..m).map(|a| center - half_width + 2.0 * half_width * a as f64 / (m - 1) as f64).collect()
}

/// `f_a = P^{-1}((a − ½)/m)`
pub fn quantile_estimates(prior: &PriorSpec, m: usize) -> Result<Vec<f64>, ModelError> {
    if m < 1 {
        return Err(ModelError::Invalid("need at least one estimate".into()));
    }
    (0..m).map(|a| prior.invcdf((a as f64 + 0.5) / m as f64)).collect()
}

/// `m` equispaced estimates centered on the prior mean, half-width chosen
/// to minimize the querier gap formula. For the periodic cost the formula is
/// not a bound but still sets the width. Costs with unbounded curvature
/// fall back to quantile placement.
pub fn choose_estimates(prior: &PriorSpec, cost: CostModel, m: usize) -> Result<Vec<f64>, ModelError> {
    if m < 2 {
        return Err(ModelError::Invalid("need at least two estimates".into()));
    }
    let Some(b) = cost.curvature_sup().filter(|_| prior.is_continuous()) else {
        return quantile_estimates(prior, m);
    };
    let mu = prior.mean();
    let (lo, hi) = prior.effective_support();
    let wmax = (hi - mu).max(mu - lo);
    let gap = |w: f64| gap_formula(prior, &equispaced(mu, w, m), cost, b).unwrap_or(f64::INFINITY);
    let w = golden_section(gap, 1e-9 * wmax, wmax, 1e-6);
    Ok(equispaced(mu, w, m))
}

#[derive(Clone, Debug)]
pub struct LowerBound {
    pub c_l: f64,
    pub s_l: f64,
    pub offsets: Vec<f64>,
    /// Optima of the successful offsets, in offset order.
    pub samples: Vec<f64>,
    pub solutions: Vec<InterrogationSolution>,
    pub excluded: usize,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn solve_offsets(
    scenario: &ClockScenario,
    offs: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<Result<InterrogationSolution, BoundsError>>, BoundsError> {
    if !scenario.prior.is_continuous() {
        return Err(ModelError::Domain("discretization requires a continuous prior".into()).into());
    }
    scenario.validate()?;
    Ok(offs
        .par_iter()
        .map(|&o| {
            let dp = discretize_prior(&scenario.prior, scenario.d, o)?;
            Ok(solve_interrogation(&dp, scenario, opts)?)
        })
        .collect())
}

/// Mean of per-offset optima over `k` seeded offsets.
pub fn lower_bound(scenario: &ClockScenario, k: usize, seed: u64, opts: &SolverOptions) -> Result<LowerBound, BoundsError> {
    if k < 2 {
        return Err(ModelError::Invalid("lower bound needs k >= 2".into()).into());
    }
    let offs = offsets(scenario.d, k, seed);
    let results = solve_offsets(scenario, &offs, opts)?;
    let mut solutions = Vec::with_capacity(k);
    let mut excluded = 0;
    for (o, r) in offs.iter().zip(results) {
        match r {
            Ok(s) => solutions.push(s),
            Err(e) => {
                warn!("offset {o:.6e} excluded: {e}");
                excluded += 1;
            }
        }
    }
    if solutions.is_empty() {
        return Err(BoundsError::NoSamples(k));
    }
    let samples: Vec<f64> = solutions.iter().map(|s| s.cost).collect();
    let (c_l, s_l) = mean_and_stderr(&samples);
    Ok(LowerBound { c_l, s_l, offsets: offs, samples, solutions, excluded })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub c_l: f64,
    pub s_l: f64,
    pub c_u: f64,
    pub eps_q: Option<f64>,
    pub d: usize,
    pub k: usize,
    pub seed: u64,
    pub excluded: usize,
    pub offsets: Vec<f64>,
    /// Discretized optimum per successful offset.
    pub lower_samples: Vec<f64>,
    /// Integrated cost of each offset's protocol.
    pub upper_samples: Vec<f64>,
    /// Largest duality gap and constraint violation across offsets.
    pub max_gap: f64,
    pub max_feas: f64,
    /// Worst verification residuals across offsets.
    pub verify: VerifyReport,
    pub caveat: Option<String>,
}

impl BoundsReport {
    /// `c_l − ε_q` (`c_l` when no gap is available).
    pub fn lower(&self) -> f64 {
        self.c_l - self.eps_q.unwrap_or(0.0)
    }
}

/// Lower bound, per-offset protocols integrated against the continuous
/// prior (`c_u` is the best of them), and the querier gap.
pub fn bounds_report(
    scenario: &ClockScenario,
    k: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<BoundsReport, BoundsError> {
    let lb = lower_bound(scenario, k, seed, opts)?;
    let uppers: Vec<(f64, VerifyReport)> = lb
        .solutions
        .par_iter()
        .map(|sol| {
            let p = reconstruct(sol)?;
            let v = verify_protocol(&p, sol, &sol.prior);
            let q = protocol_quad_options(&p, &scenario.prior);
            Ok((continuous_cost(&p, &scenario.prior, scenario.cost, &q)?, v))
        })
        .collect::<Result<_, BoundsError>>()?;
    let c_u = uppers.iter().map(|u| u.0).fold(f64::INFINITY, f64::min);
    let verify = uppers.iter().map(|u| u.1).reduce(VerifyReport::merge).expect("at least one sample");
    let eps_q = querier_gap(&scenario.prior, &scenario.estimates, scenario.cost);
    let caveat = eps_q.is_none().then(|| "no querier gap for this cost: bounds apply to the discretized estimate set".to_string());
    if lb.c_l > c_u + 3.0 * lb.s_l {
        warn!("c_l = {} exceeds c_u + 3 s_l = {}", lb.c_l, c_u + 3.0 * lb.s_l);
    }
    info!("bounds: c_l {:.5} ± {:.5}, c_u {:.5}, eps_q {:?}", lb.c_l, lb.s_l, c_u, eps_q);
    Ok(BoundsReport {
        c_l: lb.c_l,
        s_l: lb.s_l,
        c_u,
        eps_q,
        d: scenario.d,
        k,
        seed,
        excluded: lb.excluded,
        offsets: lb.offsets,
        lower_samples: lb.samples,
        upper_samples: uppers.iter().map(|u| u.0).collect(),
        max_gap: lb.solutions.iter().map(|s| s.gap.abs()).fold(0.0, f64::max),
        max_feas: lb.solutions.iter().map(|s| s.feas).fold(0.0, f64::max),
        verify,
        caveat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::std_normal_cdf;

    #[test]
    fn uniform_discretization() {
        let dp = discretize_prior(&PriorSpec::uniform(0.0, 1.0), 4, 0.125).unwrap();
        for (w, want) in dp.omegas.iter().zip([0.125, 0.375, 0.625, 0.875]) {
            assert!((w - want).abs() < 1e-12);
        }
        assert!(dp.weights.iter().all(|&w| w == 0.25));
    }

    #[test]
    fn gaussian_quartiles() {
        let dp = discretize_prior(&PriorSpec::gaussian(0.0, 1.0), 2, 0.25).unwrap();
        // bisection on the cdf as an independent root
        let root = |q: f64| {
            let (mut a, mut b) = (-10.0, 10.0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if std_normal_cdf(m) < q {
                    a = m
                } else {
                    b = m
                }
            }
            0.5 * (a + b)
        };
        assert!((dp.omegas[0] - root(0.25)).abs() < 1e-9);
        assert!((dp.omegas[1] - 0.6745).abs() < 1e-4);
    }

    #[test]
    fn discretization_errors() {
        let g = PriorSpec::gaussian(0.0, 1.0);
        assert!(discretize_prior(&g, 4, 0.3).is_err());
        assert!(discretize_prior(&g, 4, 0.0).is_err());
        let disc = PriorSpec::Discrete { points: vec![0.0, 1.0], weights: vec![0.5, 0.5] };
        assert!(matches!(discretize_prior(&disc, 2, 0.1), Err(ModelError::Domain(_))));
    }

    #[test]
    fn pooled_offsets_reproduce_prior() {
        let g = PriorSpec::gaussian(0.3, 1.7);
        let d = 5;
        let mut pts: Vec<f64> = offsets(d, 10_000, 9)
            .into_iter()
            .flat_map(|o| discretize_prior(&g, d, o).unwrap().omegas)
            .collect();
        pts.sort_by(|a, b| a.total_cmp(b));
        let n = pts.len() as f64;
        let ks = pts
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = g.cdf(x);
                (c - i as f64 / n).abs().max((c - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "Kolmogorov distance {ks}");
    }

    #[test]
    fn offsets_are_seeded_and_in_range() {
        let a = offsets(15, 50, 3);
        assert_eq!(a, offsets(15, 50, 3));
        assert_ne!(a, offsets(15, 50, 4));
        assert!(a.iter().all(|&o| o > 0.0 && o < 1.0 / 15.0));
    }

    /// `∫_a^∞ (ω − a)² φ(ω) dω = (1 + a²) Q(a) − a φ(a)`
    fn gaussian_quadratic_tail(a: f64) -> f64 {
        let q = 1.0 - std_normal_cdf(a);
        let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
        (1.0 + a * a) * q - a * phi
    }

    #[test]
    fn querier_gap_matches_closed_form() {
        let f: Vec<f64> = (0..25).map(|i| -4.0 + i as f64 / 3.0).collect();
        let g = PriorSpec::gaussian(0.0, 1.0);
        let eps = querier_gap(&g, &f, CostModel::Quadratic).unwrap();
        let want = 0.25 / 9.0 + 2.0 * gaussian_quadratic_tail(4.0);
        assert!((eps - want).abs() < 1e-9, "{eps} vs {want}");
        assert!((eps - 0.02779).abs() < 1e-5);

        let wide: Vec<f64> = (0..201).map(|i| -10.0 + 0.1 * i as f64).collect();
        let e = querier_gap(&g, &wide, CostModel::Quadratic).unwrap();
        assert!((e - 0.25 * 0.01).abs() < 1e-12);
        assert!(querier_gap(&g, &f, CostModel::Periodic).is_none());
        assert!(querier_gap(&g, &f, CostModel::Absolute).is_none());
    }

    #[test]
    fn chosen_width_is_grid_optimal() {
        let g = PriorSpec::gaussian(0.0, 1.0);
        let f = choose_estimates(&g, CostModel::Quadratic, 2).unwrap();
        assert!((f[0] + f[1]).abs() < 1e-12);
        let best = querier_gap(&g, &f, CostModel::Quadratic).unwrap();
        for i in 1..=400 {
            let w = 0.01 * i as f64;
            let v = 0.25 * (2.0 * w).powi(2) + 2.0 * gaussian_quadratic_tail(w);
            assert!(best <= v + 1e-9, "w = {w}: {v} < {best}");
        }
    }

    #[test]
    fn more_estimates_shrink_the_gap() {
        let g = PriorSpec::gaussian(1.0, 2.0);
        let e = |m| querier_gap(&g, &choose_estimates(&g, CostModel::Quadratic, m).unwrap(), CostModel::Quadratic).unwrap();
        let (a, b, c) = (e(5), e(25), e(100));
        assert!(a > b && b > c && c < 5e-3);
        let f = choose_estimates(&g, CostModel::Quadratic, 7).unwrap();
        for i in 0..7 {
            assert!((f[i] - 1.0 + f[6 - i] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn quantile_fallback() {
        let u = PriorSpec::uniform(0.0, 1.0);
        let f = choose_estimates(&u, CostModel::Absolute, 4).unwrap();
        for (x, want) in f.iter().zip([0.125, 0.375, 0.625, 0.875]) {
            assert!((x - want).abs() < 1e-12);
        }
    }

    #[test]
    fn table_two_gap_for_optimal_width() {
        let g = PriorSpec::gaussian(0.0, 1.0);
        let f = choose_estimates(&g, CostModel::Quadratic, 25).unwrap();
        let eps = querier_gap(&g, &f, CostModel::Quadratic).unwrap();
        assert!((eps - 0.0152).abs() < 0.003, "{eps}");
    }

    #[test]
    fn bounds_need_continuous_prior() {
        let sc = ClockScenario {
            atoms: 1,
            queries: 1,
            prior: PriorSpec::Discrete { points: vec![-1.0, 1.0], weights: vec![0.5, 0.5] },
            cost: CostModel::Quadratic,
            d: 2,
            estimates: vec![-1.0, 1.0],
        };
        let e = bounds_report(&sc, 4, 0, &SolverOptions::default());
        assert!(matches!(e, Err(BoundsError::Model(ModelError::Domain(_)))));
    }
}
