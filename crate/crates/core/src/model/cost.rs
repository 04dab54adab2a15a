use serde::{Deserialize, Serialize};

/// Penalty `C(ω − f)` for answering `f` when the frequency is `ω`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// `x²`
    Quadratic,
    /// `4 sin²(x/2)`
    Periodic,
    /// `|x|`
    Absolute,
}

/// Bayes-optimal point estimate for a posterior under a cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BayesStatistic {
    Mean,
    Median,
    NumericArgmin,
}

impl CostModel {
    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            Self::Quadratic => x * x,
            Self::Periodic => {
                let s = (0.5 * x).sin();
                4.0 * s * s
            }
            Self::Absolute => x.abs(),
        }
    }

    /// Upper bound `b` on `C''`, when the cost admits one with `C` monotone on `[0, ∞)`.
    pub fn curvature_bound(self) -> Option<f64> {
        match self {
            Self::Quadratic => Some(2.0),
            Self::Periodic | Self::Absolute => None,
        }
    }

    /// `sup C''`, when finite. Unlike [`Self::curvature_bound`] this ignores
    /// monotonicity, so it only guides estimate placement.
    pub fn curvature_sup(self) -> Option<f64> {
        match self {
            Self::Quadratic | Self::Periodic => Some(2.0),
            Self::Absolute => None,
        }
    }

    pub fn bayes_statistic(self) -> BayesStatistic {
        match self {
            Self::Quadratic => BayesStatistic::Mean,
            Self::Absolute => BayesStatistic::Median,
            Self::Periodic => BayesStatistic::NumericArgmin,
        }
    }

    /// Expected cost `Σ_x w_x C(ω_x − g)`.
    pub fn expected(self, omegas: &[f64], weights: &[f64], g: f64) -> f64 {
        omegas.iter().zip(weights).map(|(&w, &p)| p * self.value(w - g)).sum()
    }

    /// Point estimate minimizing the expected cost under the (possibly
    /// unnormalized) weights on `omegas`, which must be sorted ascending.
    pub fn optimal_estimate(self, omegas: &[f64], weights: &[f64]) -> f64 {
        let total: f64 = weights.iter().sum();
        match self.bayes_statistic() {
            BayesStatistic::Mean => omegas.iter().zip(weights).map(|(o, w)| o * w).sum::<f64>() / total,
            BayesStatistic::Median => weighted_median(omegas, weights),
            BayesStatistic::NumericArgmin => numeric_argmin(|g| self.expected(omegas, weights, g), omegas),
        }
    }
}

/// Lower weighted median: the smallest point where the cumulative weight
/// reaches half the total.
pub fn weighted_median(omegas: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (&o, &w) in omegas.iter().zip(weights) {
        acc += w;
        if acc >= 0.5 * total {
            return o;
        }
    }
    omegas[omegas.len() - 1]
}

const ARGMIN_GRID: usize = 256;

/// Minimizes `f` on `[min ω, max ω]`: a grid scan through the support points
/// and a uniform grid picks the bracket, golden-section refines it.
fn numeric_argmin(f: impl Fn(f64) -> f64, omegas: &[f64]) -> f64 {
    let lo = omegas[0];
    let hi = omegas[omegas.len() - 1];
    if hi <= lo {
        return lo;
    }
    let mut grid: Vec<f64> = (0..=ARGMIN_GRID).map(|i| lo + (hi - lo) * i as f64 / ARGMIN_GRID as f64).collect();
    grid.extend_from_slice(omegas);
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let vals: Vec<f64> = grid.iter().map(|&g| f(g)).collect();
    let best = (0..grid.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("nonempty grid");
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(grid.len() - 1)];
    let g = golden_section(&f, a, b, 1e-12);
    if f(g) <= vals[best] {
        g
    } else {
        grid[best]
    }
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(CostModel::Quadratic.value(-3.0), 9.0);
        assert!((CostModel::Periodic.value(std::f64::consts::PI) - 4.0).abs() < 1e-15);
        assert_eq!(CostModel::Absolute.value(-2.5), 2.5);
        for c in [CostModel::Quadratic, CostModel::Periodic, CostModel::Absolute] {
            assert_eq!(c.value(0.0), 0.0);
        }
    }

    #[test]
    fn statistics() {
        let om = [-1.0, 0.0, 2.0];
        let w = [0.25, 0.25, 0.5];
        assert!((CostModel::Quadratic.optimal_estimate(&om, &w) - 0.75).abs() < 1e-15);
        assert_eq!(CostModel::Absolute.optimal_estimate(&om, &w), 0.0);
    }

    #[test]
    fn periodic_argmin_is_circular_mean() {
        let om: [f64; 4] = [-1.0, -0.2, 0.4, 1.3];
        let w: [f64; 4] = [0.1, 0.4, 0.3, 0.2];
        let (s, c) = om.iter().zip(&w).fold((0.0, 0.0), |(s, c), (o, p)| (s + p * o.sin(), c + p * o.cos()));
        let want = s.atan2(c);
        let got = CostModel::Periodic.optimal_estimate(&om, &w);
        assert!((got - want).abs() < 1e-7, "{got} vs {want}");
    }

    #[test]
    fn periodic_argmin_stays_in_support() {
        // mass concentrated at the ends of a wide support
        let om = [-3.0, 3.0];
        let w = [0.5, 0.5];
        let g = CostModel::Periodic.optimal_estimate(&om, &w);
        assert!((-3.0..=3.0).contains(&g));
        let best = CostModel::Periodic.expected(&om, &w, g);
        for i in 0..=600 {
            let t = -3.0 + 6.0 * i as f64 / 600.0;
            assert!(best <= CostModel::Periodic.expected(&om, &w, t) + 1e-12);
        }
    }

    #[test]
    fn golden_section_quadratic() {
        let x = golden_section(|x| (x - 0.3) * (x - 0.3), -2.0, 5.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9);
    }
}
