//! The four commands and their report formats.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chronos_core::bounds::{bounds_report, discretize_prior, BoundsReport};
use chronos_core::experiments::{query_comparison, QueryComparison};
use chronos_core::program::{build_reduced_clock_sdp, posteriors, ProgramError};
use chronos_core::reconstruct::ProtocolExport;
use chronos_core::refine::{refine_estimates, refine_on_midpoint, ChainNode, Refined, ACTIVE_OUTCOME_TOL};
use chronos_core::sdp::{write_dump, SolverOptions};
use chronos_core::{
    classical_chain, reconstruct, solve_interrogation, verify_protocol, ClockScenario, DiscretizedPrior, VerifyReport,
};
use log::info;
use serde::Serialize;

use crate::config::{Overrides, Resolved, RunConfig};
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Bounds,
    Refine,
    Chain,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Bounds => "bounds",
            Self::Refine => "refine",
            Self::Chain => "chain",
        }
    }
}

/// Everything a command needs besides the runs themselves.
pub struct Context {
    pub out: PathBuf,
    pub overrides: Overrides,
    /// Name used for files that collect every run (CSV tables).
    pub name: String,
}

#[derive(Serialize)]
struct RefineSummary {
    iterations: usize,
    costs: Vec<f64>,
    initial_estimates: Vec<f64>,
    estimates: Vec<f64>,
    active_outcomes: usize,
}

impl RefineSummary {
    fn new(initial: &[f64], r: &Refined) -> Self {
        let post = posteriors(&r.solution);
        Self {
            iterations: r.iterations,
            costs: r.costs.clone(),
            initial_estimates: initial.to_vec(),
            estimates: r.estimates.clone(),
            active_outcomes: post.outcome_probs.iter().filter(|&&p| p >= ACTIVE_OUTCOME_TOL).count(),
        }
    }
}

#[derive(Serialize)]
struct SolveReport {
    config: RunConfig,
    label: String,
    /// `None` for discrete priors.
    offset: Option<f64>,
    omegas: Vec<f64>,
    weights: Vec<f64>,
    estimates: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refine: Option<RefineSummary>,
    cost: f64,
    gap: f64,
    feas: f64,
    iterations: usize,
    outcome_probs: Vec<f64>,
    posteriors: Vec<Vec<f64>>,
    dicke_amplitudes: Vec<f64>,
    ancilla_dim: usize,
    verify: VerifyReport,
    wall_time_s: f64,
    protocol: ProtocolExport,
}

#[derive(Serialize)]
struct BoundsFile {
    config: RunConfig,
    label: String,
    estimates: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refine: Option<RefineSummary>,
    bounds: BoundsReport,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct BoundsRow {
    prior_sigma: f64,
    #[serde(rename = "N")]
    atoms: usize,
    t_f: usize,
    d: usize,
    m: usize,
    k: usize,
    c_l: f64,
    s_l: f64,
    c_u: f64,
    eps_q: Option<f64>,
    seed: u64,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct RefineFile {
    config: RunConfig,
    label: String,
    offset: Option<f64>,
    refine: RefineSummary,
    cost: f64,
    verify: VerifyReport,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct NodeSummary {
    stage: usize,
    path: Vec<usize>,
    probability: f64,
    /// Cost of this stage's interrogation conditional on reaching it.
    cost: f64,
    outcome_probs: Vec<f64>,
    children: Vec<NodeSummary>,
}

impl NodeSummary {
    fn new(node: &ChainNode) -> Self {
        Self {
            stage: node.stage,
            path: node.path.clone(),
            probability: node.probability,
            cost: node.solution.cost,
            outcome_probs: posteriors(&node.solution).outcome_probs,
            children: node.children.iter().map(NodeSummary::new).collect(),
        }
    }
}

#[derive(Serialize)]
struct MeanSe {
    mean: f64,
    se: f64,
}

impl From<(f64, f64)> for MeanSe {
    fn from((mean, se): (f64, f64)) -> Self {
        Self { mean, se }
    }
}

#[derive(Serialize)]
struct ComparisonSummary {
    single: MeanSe,
    chained: MeanSe,
    coherent: MeanSe,
    /// Paired `single − chained`.
    single_minus_chained: MeanSe,
    /// Paired `chained − coherent`.
    chained_minus_coherent: MeanSe,
    samples: QueryComparison,
}

#[derive(Serialize)]
struct ChainFile {
    config: RunConfig,
    label: String,
    offset: Option<f64>,
    stages: usize,
    total_cost: f64,
    pruned_mass: f64,
    leaves: usize,
    tree: NodeSummary,
    verify: VerifyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<ComparisonSummary>,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct ComparisonRow {
    sigma: f64,
    #[serde(rename = "N")]
    atoms: usize,
    d: usize,
    k: usize,
    single: f64,
    single_se: f64,
    chained: f64,
    chained_se: f64,
    coherent: f64,
    coherent_se: f64,
    seed: u64,
    wall_time_s: f64,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

fn options(r: &Resolved) -> SolverOptions {
    r.config.scenario.tolerances
}

fn discretization(r: &Resolved) -> Result<(DiscretizedPrior, Option<f64>), CliError> {
    let prior = &r.scenario.prior;
    if prior.is_continuous() {
        Ok((discretize_prior(prior, r.scenario.d, r.offset())?, Some(r.offset())))
    } else {
        Ok((DiscretizedPrior::from_discrete(prior)?, None))
    }
}

/// Applies the config's `refine` block, if any, on the midpoint
/// discretization (the prior itself when discrete).
fn prepared(r: &Resolved) -> Result<(ClockScenario, Option<RefineSummary>), CliError> {
    let Some(params) = r.config.refine else {
        return Ok((r.scenario.clone(), None));
    };
    let sc = &r.scenario;
    let refined = if sc.prior.is_continuous() {
        refine_on_midpoint(sc, params.max_iter, params.tol, &options(r))?
    } else {
        refine_estimates(&DiscretizedPrior::from_discrete(&sc.prior)?, sc, params.max_iter, params.tol, &options(r))?
    };
    let summary = RefineSummary::new(&sc.estimates, &refined);
    Ok((sc.with_estimates(refined.estimates), Some(summary)))
}

struct Files {
    report: PathBuf,
    echo: PathBuf,
    stem: PathBuf,
}

fn files(out: &Path, cmd: Command, label: &str) -> Files {
    let stem = out.join(format!("{}-{label}", cmd.name()));
    let with = |ext: &str| PathBuf::from(format!("{}.{ext}", stem.display()));
    Files { report: with("json"), echo: with("config.json"), stem }
}

/// Runs `cmd` on every labelled config. Returns whether every embedded
/// verification passed.
pub fn run(cmd: Command, runs: Vec<(String, RunConfig)>, ctx: &Context) -> Result<bool, CliError> {
    fs::create_dir_all(&ctx.out)?;
    let resolved = runs
        .into_iter()
        .map(|(label, cfg)| cfg.resolve(&ctx.overrides).map(|r| (label, r)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut all_pass = true;
    let mut bounds_rows = Vec::new();
    let mut comparison_rows = Vec::new();
    for (label, r) in &resolved {
        let f = files(&ctx.out, cmd, label);
        write_json(&f.echo, &r.config)?;
        let start = Instant::now();
        let pass = match cmd {
            Command::Solve => solve(label, r, &f, start)?,
            Command::Bounds => {
                let (pass, row) = bounds(label, r, &f, start)?;
                bounds_rows.push(row);
                pass
            }
            Command::Refine => refine(label, r, &f, start)?,
            Command::Chain => {
                let (pass, row) = chain(label, r, &f, start)?;
                comparison_rows.extend(row);
                pass
            }
        };
        if !pass {
            log::error!("{label}: verification residuals above tolerance");
        }
        all_pass &= pass;
    }
    if !bounds_rows.is_empty() {
        let path = ctx.out.join(format!("bounds-{}.csv", ctx.name));
        write_csv(&path, &bounds_rows)?;
        println!("wrote {}", path.display());
    }
    if !comparison_rows.is_empty() {
        let path = ctx.out.join(format!("chain-{}.csv", ctx.name));
        write_csv(&path, &comparison_rows)?;
        println!("wrote {}", path.display());
    }
    Ok(all_pass)
}

#[derive(Serialize)]
struct Failure<'a> {
    config: &'a RunConfig,
    error: String,
    dump: String,
}

fn solve(label: &str, r: &Resolved, f: &Files, start: Instant) -> Result<bool, CliError> {
    let (sc, refine) = prepared(r)?;
    let (dp, offset) = discretization(r)?;
    let sol = match solve_interrogation(&dp, &sc, &options(r)) {
        Ok(s) => s,
        Err(e) => {
            if !matches!(e, ProgramError::Model(_) | ProgramError::DimensionMismatch(_)) {
                let dump = PathBuf::from(format!("{}.sdp.txt", f.stem.display()));
                if let Ok(red) = build_reduced_clock_sdp(&dp, &sc) {
                    fs::write(&dump, write_dump(&red.problem))?;
                }
                let failure = Failure { config: &r.config, error: e.to_string(), dump: dump.display().to_string() };
                write_json(&PathBuf::from(format!("{}.failure.json", f.stem.display())), &failure)?;
            }
            return Err(e.into());
        }
    };
    let protocol = reconstruct(&sol)?;
    let verify = verify_protocol(&protocol, &sol, &dp);
    let post = posteriors(&sol);
    let report = SolveReport {
        config: r.config.clone(),
        label: label.to_string(),
        offset,
        omegas: dp.omegas.clone(),
        weights: dp.weights.clone(),
        estimates: sc.estimates.clone(),
        refine,
        cost: sol.cost,
        gap: sol.gap,
        feas: sol.feas,
        iterations: sol.iterations,
        outcome_probs: post.outcome_probs,
        posteriors: post.posterior,
        dicke_amplitudes: protocol.dicke_amplitudes(),
        ancilla_dim: protocol.ancilla_dim,
        verify,
        wall_time_s: start.elapsed().as_secs_f64(),
        protocol: ProtocolExport::from(&protocol),
    };
    write_json(&f.report, &report)?;
    println!("solve {label}: cost {:.6}, amplitudes {:.4?} -> {}", sol.cost, report.dicke_amplitudes, f.report.display());
    Ok(verify.passing)
}

fn bounds(label: &str, r: &Resolved, f: &Files, start: Instant) -> Result<(bool, BoundsRow), CliError> {
    let (sc, refine) = prepared(r)?;
    let cfg = &r.config.scenario;
    let b = bounds_report(&sc, cfg.samples, cfg.seed, &options(r))?;
    let wall = start.elapsed().as_secs_f64();
    let row = BoundsRow {
        prior_sigma: sc.prior.std(),
        atoms: sc.atoms,
        t_f: sc.queries,
        d: sc.d,
        m: sc.estimates.len(),
        k: b.k,
        c_l: b.c_l,
        s_l: b.s_l,
        c_u: b.c_u,
        eps_q: b.eps_q,
        seed: b.seed,
        wall_time_s: wall,
    };
    let pass = b.verify.passing;
    let eps = b.eps_q.map_or("n/a".to_string(), |e| format!("{e:.4}"));
    println!("bounds {label}: c_l {:.4} ± {:.4}, c_u {:.4}, eps_q {eps} -> {}", b.c_l, b.s_l, b.c_u, f.report.display());
    let file = BoundsFile {
        config: r.config.clone(),
        label: label.to_string(),
        estimates: sc.estimates.clone(),
        refine,
        bounds: b,
        wall_time_s: wall,
    };
    write_json(&f.report, &file)?;
    Ok((pass, row))
}

fn refine(label: &str, r: &Resolved, f: &Files, start: Instant) -> Result<bool, CliError> {
    let params = r.refine_params();
    let (dp, offset) = discretization(r)?;
    let refined = refine_estimates(&dp, &r.scenario, params.max_iter, params.tol, &options(r))?;
    let protocol = reconstruct(&refined.solution)?;
    let verify = verify_protocol(&protocol, &refined.solution, &dp);
    let file = RefineFile {
        config: r.config.clone(),
        label: label.to_string(),
        offset,
        refine: RefineSummary::new(&r.scenario.estimates, &refined),
        cost: refined.solution.cost,
        verify,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_json(&f.report, &file)?;
    println!(
        "refine {label}: {} iterations, cost {:.6}, {} active estimates -> {}",
        file.refine.iterations,
        file.cost,
        file.refine.active_outcomes,
        f.report.display()
    );
    Ok(verify.passing)
}

fn tree_verify(node: &ChainNode) -> Result<VerifyReport, CliError> {
    let p = reconstruct(&node.solution)?;
    let mut v = verify_protocol(&p, &node.solution, &node.prior);
    for c in &node.children {
        v = v.merge(tree_verify(c)?);
    }
    Ok(v)
}

fn chain(
    label: &str,
    r: &Resolved,
    f: &Files,
    start: Instant,
) -> Result<(bool, Option<ComparisonRow>), CliError> {
    let (mut sc, _) = prepared(r)?;
    let (dp, offset) = discretization(r)?;
    let stages = r.config.stages;
    let opts = options(r);
    let comparison = if r.config.compare {
        let coherent = ClockScenario { queries: sc.queries * stages, ..sc.clone() };
        let c = query_comparison(&coherent, r.config.scenario.samples, r.config.scenario.seed, &opts)?;
        // the tree uses the same estimates as the comparison
        sc = sc.with_estimates(c.estimates.clone());
        Some(c)
    } else {
        None
    };
    let result = classical_chain(&dp, &sc, stages, &opts)?;
    let verify = tree_verify(&result.root)?;
    let wall = start.elapsed().as_secs_f64();
    let summary = comparison.map(|c| {
        let [single, chained, coherent] = c.means();
        let [g1, g2] = c.gaps();
        ComparisonSummary {
            single: single.into(),
            chained: chained.into(),
            coherent: coherent.into(),
            single_minus_chained: g1.into(),
            chained_minus_coherent: g2.into(),
            samples: c,
        }
    });
    let row = summary.as_ref().map(|s| ComparisonRow {
        sigma: sc.prior.std(),
        atoms: sc.atoms,
        d: sc.d,
        k: s.samples.offsets.len(),
        single: s.single.mean,
        single_se: s.single.se,
        chained: s.chained.mean,
        chained_se: s.chained.se,
        coherent: s.coherent.mean,
        coherent_se: s.coherent.se,
        seed: r.config.scenario.seed,
        wall_time_s: wall,
    });
    if let Some(s) = &summary {
        info!("{label}: single {:.4} chained {:.4} coherent {:.4}", s.single.mean, s.chained.mean, s.coherent.mean);
    }
    let file = ChainFile {
        config: r.config.clone(),
        label: label.to_string(),
        offset,
        stages,
        total_cost: result.total_cost,
        pruned_mass: result.pruned_mass,
        leaves: result.root.leaves(),
        tree: NodeSummary::new(&result.root),
        verify,
        comparison: summary,
        wall_time_s: wall,
    };
    write_json(&f.report, &file)?;
    println!("chain {label}: {stages} stages, cost {:.6} -> {}", result.total_cost, f.report.display());
    Ok((verify.passing, row))
}
