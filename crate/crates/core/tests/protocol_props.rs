use chronos_core::model::{ClockScenario, CostModel, DiscretizedPrior, PriorSpec};
use chronos_core::program::{posteriors, solve_interrogation, InterrogationSolution};
use chronos_core::reconstruct::{reconstruct, verify_protocol, ReconstructedProtocol};
use chronos_core::refine::ACTIVE_OUTCOME_TOL;
use chronos_core::sdp::SolverOptions;
use num_complex::Complex;
use proptest::prelude::*;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
struct Case {
    atoms: usize,
    queries: usize,
    omegas: Vec<f64>,
    weights: Vec<f64>,
    estimates: Vec<f64>,
    cost: CostModel,
}

/// Sorted points at least `gap` apart, drawn as cumulative positive steps.
fn spaced(n: usize, lo: f64, gap: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(gap..gap + 1.0, n).prop_map(move |steps| {
        let mut x = lo;
        steps.iter().map(|s| {
            x += s;
            x
        }).collect()
    })
}

fn case() -> impl Strategy<Value = Case> {
    (1usize..=3, 1usize..=2, 3usize..=6, 2usize..=5, prop::bool::ANY)
        .prop_flat_map(|(atoms, queries, d, m, periodic)| {
            (
                Just((atoms, queries, periodic)),
                spaced(d, -2.5, 0.05),
                prop::collection::vec(0.05f64..1.0, d),
                spaced(m, -2.0, 0.1),
            )
        })
        .prop_map(|((atoms, queries, periodic), omegas, w, estimates)| {
            let total: f64 = w.iter().sum();
            Case {
                atoms,
                queries,
                omegas,
                weights: w.iter().map(|v| v / total).collect(),
                estimates,
                cost: if periodic { CostModel::Periodic } else { CostModel::Quadratic },
            }
        })
}

fn scenario(c: &Case) -> (DiscretizedPrior, ClockScenario) {
    let dp = DiscretizedPrior::new(c.omegas.clone(), c.weights.clone()).unwrap();
    let sc = ClockScenario {
        atoms: c.atoms,
        queries: c.queries,
        prior: PriorSpec::Discrete { points: c.omegas.clone(), weights: c.weights.clone() },
        cost: c.cost,
        d: c.omegas.len(),
        estimates: c.estimates.clone(),
    };
    (dp, sc)
}

fn solved(c: &Case) -> (DiscretizedPrior, InterrogationSolution, ReconstructedProtocol) {
    let (dp, sc) = scenario(c);
    let sol = solve_interrogation(&dp, &sc, &SolverOptions::default()).unwrap();
    let p = reconstruct(&sol).unwrap();
    (dp, sol, p)
}

/// Fits the `2D + 1` Fourier coefficients of a degree-`D` trigonometric
/// polynomial from `4D + 1` equispaced samples over one period.
fn fourier_fit(samples: &[f64], degree: usize) -> impl Fn(f64) -> f64 {
    let n = samples.len() as f64;
    let coeffs: Vec<Complex<f64>> = (0..=degree)
        .map(|j| {
            samples
                .iter()
                .enumerate()
                .map(|(m, &q)| q * Complex::from_polar(1.0, -(j as f64) * 2.0 * PI * m as f64 / n))
                .sum::<Complex<f64>>()
                / n
        })
        .collect();
    move |w: f64| {
        coeffs[0].re
            + coeffs[1..].iter().enumerate().map(|(j, c)| 2.0 * (c * Complex::from_polar(1.0, (j + 1) as f64 * w)).re).sum::<f64>()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn solutions_are_accurate_and_protocols_verify(c in case()) {
        let (dp, sol, p) = solved(&c);
        prop_assert!(sol.gap <= 1e-7, "gap {}", sol.gap);
        prop_assert!(sol.feas <= 1e-8, "feas {}", sol.feas);
        let v = verify_protocol(&p, &sol, &dp);
        prop_assert!(v.passing, "{v:?}");
        prop_assert!(v.completeness_residual <= 1e-8, "{v:?}");
        prop_assert!(v.povm_min_eigenvalue >= -1e-8, "{v:?}");
        prop_assert!(v.unitarity_residual <= 1e-9, "{v:?}");
        prop_assert!((p.discrete_cost(&dp, c.cost) - sol.cost).abs() <= 1e-5);
    }

    #[test]
    fn outcome_distribution_sums_to_one(c in case(), omegas in prop::collection::vec(-6.0f64..6.0, 100)) {
        let (_, _, p) = solved(&c);
        for w in omegas {
            let total: f64 = p.simulate(w).iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9, "Σq = {total} at {w}");
        }
    }

    #[test]
    fn outcome_probabilities_are_trig_polynomials(c in case(), held_out in prop::collection::vec(-PI..PI, 8)) {
        let (_, _, p) = solved(&c);
        let degree = c.atoms * c.queries;
        let n = 4 * degree + 1;
        let grid: Vec<Vec<f64>> = (0..n).map(|m| p.simulate(2.0 * PI * m as f64 / n as f64)).collect();
        for a in 0..p.povm.outcomes() {
            let fit = fourier_fit(&grid.iter().map(|q| q[a]).collect::<Vec<_>>(), degree);
            for &w in &held_out {
                let q = p.simulate(w)[a];
                prop_assert!((fit(w) - q).abs() <= 1e-8, "outcome {a} at {w}: {} vs {q}", fit(w));
            }
        }
    }

    #[test]
    fn cost_is_shift_invariant(c in case(), shift in -3.0f64..3.0) {
        let (_, sol, _) = solved(&c);
        let moved = Case {
            omegas: c.omegas.iter().map(|w| w + shift).collect(),
            estimates: c.estimates.iter().map(|f| f + shift).collect(),
            ..c.clone()
        };
        let (dp, sc) = scenario(&moved);
        let other = solve_interrogation(&dp, &sc, &SolverOptions::default()).unwrap();
        prop_assert!((sol.cost - other.cost).abs() <= 1e-7, "{} vs {}", sol.cost, other.cost);
    }

    #[test]
    fn more_resources_never_hurt(c in case()) {
        let (dp, sc) = scenario(&c);
        let opts = SolverOptions::default();
        let base = solve_interrogation(&dp, &sc, &opts).unwrap().cost;
        let atoms = solve_interrogation(&dp, &ClockScenario { atoms: sc.atoms + 1, ..sc.clone() }, &opts).unwrap().cost;
        let queries = solve_interrogation(&dp, &ClockScenario { queries: sc.queries + 1, ..sc.clone() }, &opts).unwrap().cost;
        prop_assert!(atoms <= base + 1e-6, "{atoms} > {base}");
        prop_assert!(queries <= base + 1e-6, "{queries} > {base}");
    }

    #[test]
    fn used_outcomes_within_rank_bound(c in case()) {
        let (_, sol, _) = solved(&c);
        let r = sol.final_oracle_state().eigenvalues().iter().filter(|&&l| l > 1e-9).count();
        // unused outcomes keep ~1e-8 of interior point mass at the default gap
        let used = posteriors(&sol).outcome_probs.iter().filter(|&&q| q > ACTIVE_OUTCOME_TOL).count();
        prop_assert!(used <= r * r, "{used} outcomes, rank {r}");
    }
}
