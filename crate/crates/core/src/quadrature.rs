//! Composite Gauss–Legendre quadrature with a panel-halving error check.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("quadrature did not converge: halving changed the result by {change:e}")]
pub struct QuadratureNotConverged {
    pub change: f64,
}

/// Nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        h * self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(c + h * x)).sum::<f64>()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadOptions {
    /// Upper bound on the panel width before halving.
    pub max_panel: f64,
    /// Nodes per panel, at least 10.
    pub nodes: usize,
    /// Accept once halving changes the result by at most this.
    pub target: f64,
    /// Fail if the last halving still changes the result by more than this.
    pub fail: f64,
    pub max_halvings: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { max_panel: 0.25, nodes: 10, target: 1e-7, fail: 1e-6, max_halvings: 4 }
    }
}

/// Sum over `panels` equal panels of `[a, b]`.
pub fn composite(rule: &GaussLegendre, f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels).map(|i| rule.integrate(f, a + h * i as f64, a + h * (i + 1) as f64)).sum()
}

/// Integrates on `[a, b]`, halving panels until two successive results agree.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, opts: &QuadOptions) -> Result<f64, QuadratureNotConverged> {
    if b <= a {
        return Ok(0.0);
    }
    let rule = GaussLegendre::new(opts.nodes.max(10));
    let mut panels = ((b - a) / opts.max_panel).ceil().max(1.0) as usize;
    let mut prev = composite(&rule, &f, a, b, panels);
    let mut change = f64::INFINITY;
    for _ in 0..=opts.max_halvings {
        panels *= 2;
        let next = composite(&rule, &f, a, b, panels);
        change = (next - prev).abs();
        prev = next;
        if change <= opts.target {
            return Ok(next);
        }
    }
    if change <= opts.fail {
        Ok(prev)
    } else {
        Err(QuadratureNotConverged { change })
    }
}
