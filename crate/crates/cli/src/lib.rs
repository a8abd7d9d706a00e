//! Experiment subcommands behind the `hardcore` binary.
//!
//! Every command returns an [`Outcome`]: a JSON-serialisable
//! [`ExperimentRecord`], an optional table for CSV output, and whether all
//! asserted bounds held.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use hardcore::exact::worst_pinning_si;
use hardcore::glauber::{
    empirical_tv_curve, exact_mixing_time, run_chain, spectral_quantities, transition_matrix,
    tv_curve, MAX_DENSE_STATES,
};
use hardcore::graph_enum::graphs_up_to;
use hardcore::saw::verify_saw_domination;
use hardcore::tree::{
    build_truncated_regular_tree, enumerate_rooted_trees, enumerate_rooted_trees_with,
    root_influence_sum, truncated_influence_series, truncated_regular_tree_size, TreeFamily,
};
use hardcore::uniqueness::{
    d_ary_influence_bound, fixed_point, fixed_point_upper_bound, mixing_bound, mixing_exponent,
    proof_functions_at, regular_influence_bound, si_upper_constant, HardcoreParams,
};
use hardcore::{Configuration, Graph};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Slack on influence-sum bounds.
pub const BOUND_TOL: f64 = 1e-10;
/// Slack on graph-level SI bounds and SAW domination.
pub const GRAPH_TOL: f64 = 1e-9;
/// Largest truncated tree built explicitly by lb-convergence.
pub const MAX_BUILT_TREE: usize = 2_000_000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] hardcore::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub command: String,
    pub params: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub duration_ms: u64,
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Usage(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub record: ExperimentRecord,
    pub table: Option<Table>,
    pub passed: bool,
    /// Human-readable context lines for the terminal.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// λ given directly or through the slack δ, λ = (1 − δ)·λ_c(Δ).
#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct FugacityArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
}

impl FugacityArgs {
    pub fn lambda(lambda: f64) -> Self {
        FugacityArgs {
            lambda: Some(lambda),
            delta: None,
        }
    }

    pub fn delta(delta: f64) -> Self {
        FugacityArgs {
            lambda: None,
            delta: Some(delta),
        }
    }

    fn resolve(&self, max_degree: u32) -> CliResult<HardcoreParams> {
        Ok(match (self.lambda, self.delta) {
            (Some(l), None) => HardcoreParams::from_fugacity(max_degree, l)?,
            (None, Some(d)) => HardcoreParams::from_slack(max_degree, d)?,
            _ => {
                return Err(CliError::Usage(
                    "give exactly one of --lambda and --delta".into(),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fixed point of the tree recursion and the spectral-independence constants.
    FixedPoint(FixedPointArgs),
    /// Worst-pinning SI constants of a graph, or an exhaustive tree sweep.
    SiVerify(SiVerifyArgs),
    /// Φ on truncated regular trees against its limit.
    LbConvergence(LbConvergenceArgs),
    /// Exhaustive SAW-tree domination sweep.
    SawVerify(SawVerifyArgs),
    /// Exact or simulated mixing of Glauber dynamics.
    Mix(MixArgs),
    /// Grid check of the auxiliary functions in the influence-sum bound.
    ProofCheck(ProofCheckArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FixedPointArgs {
    #[arg(long)]
    pub degree: u32,
    #[command(flatten)]
    pub fugacity: FugacityArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SiVerifyArgs {
    /// Edge-list file.
    #[arg(
        long,
        conflicts_with = "tree_sweep",
        required_unless_present = "tree_sweep"
    )]
    pub graph: Option<PathBuf>,
    /// Sweep all rooted trees instead of a single graph.
    #[arg(long)]
    pub tree_sweep: bool,
    /// Children per vertex in the tree sweep (Δ = d + 1).
    #[arg(long = "d", requires = "tree_sweep")]
    pub branching: Option<u32>,
    #[arg(long, default_value_t = 10)]
    pub n_max: usize,
    /// Δ used to resolve --delta and the bound; defaults to the graph's, at least 3.
    #[arg(long)]
    pub degree: Option<u32>,
    #[command(flatten)]
    pub fugacity: FugacityArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LbConvergenceArgs {
    #[arg(long)]
    pub degree: u32,
    #[command(flatten)]
    pub fugacity: FugacityArgs,
    #[arg(long)]
    pub h_max: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SawVerifyArgs {
    #[arg(long, default_value_t = 7)]
    pub n_max: usize,
    #[arg(long, default_value_t = 3)]
    pub max_degree: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 4.0])]
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["exact", "simulate"]))]
pub struct MixArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Δ used to resolve --delta; defaults to the graph's maximum degree.
    #[arg(long)]
    pub degree: Option<u32>,
    #[command(flatten)]
    pub fugacity: FugacityArgs,
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub simulate: bool,
    /// Replicas per start when simulating.
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    /// Steps per replica when simulating.
    #[arg(long, default_value_t = 1000)]
    pub horizon: u64,
    /// Also dump one trajectory of this many steps (simulation only).
    #[arg(long, requires = "trajectory")]
    pub trajectory_steps: Option<u64>,
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProofCheckArgs {
    #[arg(long = "d")]
    pub branching: u32,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub grid: usize,
}

/// Runs one command. `seed` is required by randomised commands.
pub fn run(command: &Command, seed: Option<u64>) -> CliResult<Outcome> {
    let start = Instant::now();
    let (name, params, mut out) = match command {
        Command::FixedPoint(a) => ("fixed-point", to_value(a)?, cmd_fixed_point(a)?),
        Command::SiVerify(a) => ("si-verify", to_value(a)?, cmd_si_verify(a)?),
        Command::LbConvergence(a) => ("lb-convergence", to_value(a)?, cmd_lb_convergence(a)?),
        Command::SawVerify(a) => ("saw-verify", to_value(a)?, cmd_saw_verify(a)?),
        Command::Mix(a) => ("mix", to_value(a)?, cmd_mix(a, seed)?),
        Command::ProofCheck(a) => ("proof-check", to_value(a)?, cmd_proof_check(a)?),
    };
    out.record.command = name.to_string();
    out.record.params = params;
    out.record.seed = seed;
    out.record.duration_ms = start.elapsed().as_millis() as u64;
    Ok(out)
}

fn to_value<T: Serialize>(t: &T) -> CliResult<Value> {
    Ok(serde_json::to_value(t)?)
}

/// Result payloads carry their own failure list.
#[derive(Debug, Clone, Serialize)]
struct Checked<T: Serialize> {
    #[serde(flatten)]
    body: T,
    failures: Vec<String>,
    passed: bool,
}

fn finish<T: Serialize>(
    body: T,
    failures: Vec<String>,
    table: Option<Table>,
    notes: Vec<String>,
) -> CliResult<Outcome> {
    let passed = failures.is_empty();
    let result = serde_json::to_value(Checked {
        body,
        failures,
        passed,
    })?;
    Ok(Outcome {
        record: ExperimentRecord {
            command: String::new(),
            params: Value::Null,
            seed: None,
            version: VERSION.to_string(),
            duration_ms: 0,
            result,
        },
        table,
        passed,
        notes,
    })
}

pub fn read_graph(path: &Path) -> CliResult<Graph> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Graph::parse(&text)?)
}

#[derive(Serialize)]
struct FixedPointResult {
    params: HardcoreParams,
    x_hat: f64,
    residual: f64,
    /// (1+x̂)/(1−dx̂); absent at zero slack.
    si_exact: Option<f64>,
    /// (2/δ)(1 + 2/(d−1)); absent at zero slack.
    si_closed_form: Option<f64>,
    /// 1/(1−dx̂); absent at zero slack.
    d_ary_bound: Option<f64>,
    /// (1/d)(1 − (d−1)δ/(2d)); present for δ in (0, 1).
    fixed_point_bound: Option<f64>,
}

pub fn cmd_fixed_point(a: &FixedPointArgs) -> CliResult<Outcome> {
    let params = a.fugacity.resolve(a.degree)?;
    let fp = fixed_point(params.d, params.lambda)?;
    let mut failures = Vec::new();
    let (si_exact, si_closed_form, d_ary_bound) = if params.delta > 0.0 {
        let si = si_upper_constant(&params)?;
        if si.exact > si.closed_form + BOUND_TOL {
            failures.push(format!(
                "exact constant {} exceeds closed form {}",
                si.exact, si.closed_form
            ));
        }
        (
            Some(si.exact),
            Some(si.closed_form),
            Some(d_ary_influence_bound(params.d, fp.x_hat)),
        )
    } else {
        (None, None, None)
    };
    let fixed_point_bound = if params.delta > 0.0 && params.delta < 1.0 {
        let b = fixed_point_upper_bound(params.d, params.delta)?;
        if fp.x_hat > b + 1e-12 {
            failures.push(format!("x_hat {} exceeds linear bound {b}", fp.x_hat));
        }
        Some(b)
    } else {
        None
    };
    let mut notes = vec![format!("x_hat = {}", fp.x_hat)];
    if let (Some(e), Some(c)) = (si_exact, si_closed_form) {
        notes.push(format!("SI constant {e} (closed-form bound {c})"));
    } else {
        notes.push("zero slack: SI constants diverge".into());
    }
    finish(
        FixedPointResult {
            params,
            x_hat: fp.x_hat,
            residual: fp.residual,
            si_exact,
            si_closed_form,
            d_ary_bound,
            fixed_point_bound,
        },
        failures,
        None,
        notes,
    )
}

#[derive(Serialize)]
struct GraphSiResult {
    params: HardcoreParams,
    n: usize,
    measured_max_degree: usize,
    inf_norm: f64,
    inf_witness: Vec<(usize, bool)>,
    max_eigenvalue: f64,
    eigen_witness: Vec<(usize, bool)>,
    pinnings_evaluated: usize,
    bound: f64,
}

#[derive(Serialize)]
struct FamilyReport {
    family: String,
    trees: usize,
    max_phi: f64,
    bound: f64,
}

#[derive(Serialize)]
struct TreeSweepResult {
    params: HardcoreParams,
    x_hat: f64,
    n_max: usize,
    families: Vec<FamilyReport>,
}

pub fn cmd_si_verify(a: &SiVerifyArgs) -> CliResult<Outcome> {
    if a.tree_sweep {
        return si_tree_sweep(a);
    }
    let path = a
        .graph
        .as_ref()
        .ok_or_else(|| CliError::Usage("--graph or --tree-sweep is required".into()))?;
    let g = read_graph(path)?;
    let measured = g.max_degree();
    let degree = a.degree.unwrap_or((measured as u32).max(3));
    if (degree as usize) < measured {
        return Err(CliError::Usage(format!(
            "--degree {degree} is below the graph's maximum degree {measured}"
        )));
    }
    let params = a.fugacity.resolve(degree)?;
    let wp = worst_pinning_si(&g, params.lambda)?;
    let x_hat = fixed_point(params.d, params.lambda)?.x_hat;
    let bound = regular_influence_bound(params.d, x_hat);
    let mut failures = Vec::new();
    if wp.inf_norm > bound + GRAPH_TOL {
        failures.push(format!(
            "worst-pinning inf-norm {} exceeds {bound}",
            wp.inf_norm
        ));
    }
    let notes = vec![format!(
        "worst inf-norm {} vs bound {bound}; worst max eigenvalue {}",
        wp.inf_norm, wp.max_eigenvalue
    )];
    finish(
        GraphSiResult {
            params,
            n: g.n(),
            measured_max_degree: measured,
            inf_norm: wp.inf_norm,
            inf_witness: wp.inf_witness.iter().collect(),
            max_eigenvalue: wp.max_eigenvalue,
            eigen_witness: wp.eigen_witness.iter().collect(),
            pinnings_evaluated: wp.evaluated,
            bound: if bound.is_finite() { bound } else { f64::MAX },
        },
        failures,
        None,
        notes,
    )
}

fn si_tree_sweep(a: &SiVerifyArgs) -> CliResult<Outcome> {
    let d = match (a.branching, a.degree) {
        (Some(d), _) => d,
        (None, Some(deg)) => deg.saturating_sub(1),
        (None, None) => return Err(CliError::Usage("tree sweep needs --d or --degree".into())),
    };
    let params = a.fugacity.resolve(d + 1)?;
    if params.delta <= 0.0 {
        return Err(CliError::Usage("tree sweep needs positive slack".into()));
    }
    let x_hat = fixed_point(d, params.lambda)?.x_hat;
    let du = d as usize;
    let families = [
        (
            format!("at most {d} children per vertex"),
            enumerate_rooted_trees(a.n_max, du)?,
            d_ary_influence_bound(d, x_hat),
        ),
        (
            format!("maximum degree {}", d + 1),
            enumerate_rooted_trees_with(TreeFamily {
                max_n: a.n_max,
                root_children: du + 1,
                max_children: du,
            })?,
            regular_influence_bound(d, x_hat),
        ),
    ];
    let mut failures = Vec::new();
    let mut reports = Vec::new();
    for (family, trees, bound) in families {
        let phis = trees
            .par_iter()
            .map(|t| Ok(root_influence_sum(t, params.lambda)?.phi))
            .collect::<CliResult<Vec<f64>>>()?;
        let max_phi = phis.iter().copied().fold(0.0, f64::max);
        for (t, phi) in trees.iter().zip(&phis) {
            if *phi > bound + BOUND_TOL {
                failures.push(format!(
                    "{family}: tree {} has Φ = {phi} > {bound}",
                    t.to_text().trim()
                ));
            }
        }
        reports.push(FamilyReport {
            family,
            trees: trees.len(),
            max_phi,
            bound,
        });
    }
    let notes = reports
        .iter()
        .map(|r| {
            format!(
                "{}: {} trees, max Φ {} vs bound {}",
                r.family, r.trees, r.max_phi, r.bound
            )
        })
        .collect();
    finish(
        TreeSweepResult {
            params,
            x_hat,
            n_max: a.n_max,
            families: reports,
        },
        failures,
        None,
        notes,
    )
}

#[derive(Serialize)]
struct LbRow {
    h: u32,
    phi: f64,
    gap: f64,
    relative_gap: f64,
    /// Φ on the explicitly built tree, when small enough to build.
    built_phi: Option<f64>,
}

#[derive(Serialize)]
struct LbResult {
    params: HardcoreParams,
    x_hat: f64,
    limit: f64,
    /// Smallest h with (dx̂)^h < 1e-4, if within h_max.
    h_converged: Option<u32>,
    rows: Vec<LbRow>,
}

pub fn cmd_lb_convergence(a: &LbConvergenceArgs) -> CliResult<Outcome> {
    let params = a.fugacity.resolve(a.degree)?;
    if params.delta <= 0.0 {
        return Err(CliError::Usage("the limit diverges at zero slack".into()));
    }
    if a.h_max == 0 {
        return Err(CliError::Usage("--h-max must be at least 1".into()));
    }
    let x_hat = fixed_point(params.d, params.lambda)?.x_hat;
    let limit = regular_influence_bound(params.d, x_hat);
    let dx = f64::from(params.d) * x_hat;
    let h_converged = (1..=a.h_max).find(|&h| dx.powi(h as i32) < 1e-4);
    let mut failures = Vec::new();
    let rows = (1..=a.h_max)
        .into_par_iter()
        .map(|h| {
            let phi = truncated_influence_series(a.degree, h, params.lambda)?.phi;
            let built_phi = match truncated_regular_tree_size(a.degree, h) {
                Some(size) if size <= MAX_BUILT_TREE => {
                    let t = build_truncated_regular_tree(a.degree, h)?;
                    Some(root_influence_sum(&t, params.lambda)?.phi)
                }
                _ => None,
            };
            Ok(LbRow {
                h,
                phi,
                gap: limit - phi,
                relative_gap: (limit - phi) / limit,
                built_phi,
            })
        })
        .collect::<CliResult<Vec<LbRow>>>()?;
    let mut table = Table::new(&["h", "phi", "gap", "relative_gap", "built_phi"]);
    for r in &rows {
        if let Some(b) = r.built_phi {
            if (b - r.phi).abs() > BOUND_TOL * r.phi.max(1.0) {
                failures.push(format!("h = {}: series {} vs built tree {b}", r.h, r.phi));
            }
        }
        if r.phi > limit + BOUND_TOL {
            failures.push(format!(
                "h = {}: Φ = {} exceeds the limit {limit}",
                r.h, r.phi
            ));
        }
        table.push(vec![
            r.h.to_string(),
            r.phi.to_string(),
            r.gap.to_string(),
            r.relative_gap.to_string(),
            r.built_phi.map(|b| b.to_string()).unwrap_or_default(),
        ]);
    }
    if let Some(h) = h_converged {
        let r = &rows[h as usize - 1];
        if r.relative_gap.abs() > 1e-3 {
            failures.push(format!(
                "at h = {h}, where (d·x_hat)^h < 1e-4, relative gap is {}",
                r.relative_gap
            ));
        }
    }
    let notes = vec![format!(
        "limit (1+x_hat)/(1-d·x_hat) = {limit}; Φ at h = {}: {}",
        a.h_max,
        rows.last().map_or(f64::NAN, |r| r.phi)
    )];
    finish(
        LbResult {
            params,
            x_hat,
            limit,
            h_converged,
            rows,
        },
        failures,
        Some(table),
        notes,
    )
}

#[derive(Serialize)]
struct SawResult {
    graphs: usize,
    checks: usize,
    acyclic_checks: usize,
    /// max of graph row sum − SAW-tree sum (≤ 0 when dominated).
    max_excess: f64,
    /// max |graph row sum − SAW-tree sum| over acyclic inputs.
    max_acyclic_gap: f64,
}

pub fn cmd_saw_verify(a: &SawVerifyArgs) -> CliResult<Outcome> {
    if a.lambdas.is_empty() {
        return Err(CliError::Usage("--lambdas must not be empty".into()));
    }
    let levels = graphs_up_to(a.n_max, a.max_degree, true)?;
    let graphs: Vec<&Graph> = levels.iter().flatten().collect();
    struct Check {
        excess: f64,
        acyclic: bool,
        failure: Option<String>,
    }
    let checks = graphs
        .par_iter()
        .map(|g| {
            let mut out = Vec::new();
            for &lambda in &a.lambdas {
                for u in 0..g.n() {
                    let r = verify_saw_domination(g, lambda, u)?;
                    let excess = r.graph_row_sum - r.tree_sum;
                    let acyclic = g.is_forest();
                    let failure = if !r.dominated {
                        Some(format!(
                            "graph [{}] root {u} λ {lambda}: row sum {} > tree sum {}",
                            g.to_edge_list().trim().replace('\n', "; "),
                            r.graph_row_sum,
                            r.tree_sum
                        ))
                    } else if acyclic && excess.abs() > 1e-12 {
                        Some(format!(
                            "tree [{}] root {u} λ {lambda}: sums differ by {excess}",
                            g.to_edge_list().trim().replace('\n', "; ")
                        ))
                    } else {
                        None
                    };
                    out.push(Check {
                        excess,
                        acyclic,
                        failure,
                    });
                }
            }
            Ok(out)
        })
        .collect::<CliResult<Vec<Vec<Check>>>>()?;
    let all: Vec<&Check> = checks.iter().flatten().collect();
    let failures: Vec<String> = all.iter().filter_map(|c| c.failure.clone()).collect();
    let result = SawResult {
        graphs: graphs.len(),
        checks: all.len(),
        acyclic_checks: all.iter().filter(|c| c.acyclic).count(),
        max_excess: all
            .iter()
            .map(|c| c.excess)
            .fold(f64::NEG_INFINITY, f64::max),
        max_acyclic_gap: all
            .iter()
            .filter(|c| c.acyclic)
            .map(|c| c.excess.abs())
            .fold(0.0, f64::max),
    };
    let notes = vec![format!(
        "{} graphs, {} (graph, root, λ) checks, max excess {}",
        result.graphs, result.checks, result.max_excess
    )];
    finish(result, failures, None, notes)
}

#[derive(Serialize)]
struct ExactMix {
    states: usize,
    t_mix: u64,
    worst_start: Vec<usize>,
    second_eigenvalue_modulus: Option<f64>,
    relaxation_time: Option<f64>,
    max_row_sum_error: f64,
    max_detailed_balance_error: f64,
    max_stationarity_error: f64,
}

#[derive(Serialize)]
struct SimulatedMix {
    label: &'static str,
    starts: Vec<Vec<usize>>,
    reps: u64,
    horizon: u64,
    final_proxy: f64,
    final_half_width: f64,
}

#[derive(Serialize)]
struct MixResult {
    lambda: f64,
    max_degree: usize,
    n: usize,
    /// Exponent of n in the mixing-time upper bound at criticality.
    theoretical_exponent: Option<String>,
    /// (24/23)ρ ≤ n is needed for the explicit integral; absent below it.
    log_integral: Option<f64>,
    exact: Option<ExactMix>,
    simulated: Option<SimulatedMix>,
}

fn greedy_independent_set(g: &Graph, order: impl Iterator<Item = usize>) -> Configuration {
    let mut c = Configuration::empty(g.n());
    for v in order {
        if g.neighbors(v).iter().all(|&w| !c.is_occupied(w)) {
            c.set(v, true);
        }
    }
    c
}

pub fn cmd_mix(a: &MixArgs, seed: Option<u64>) -> CliResult<Outcome> {
    let g = read_graph(&a.graph)?;
    if g.n() == 0 {
        return Err(CliError::Usage("the graph has no vertices".into()));
    }
    let measured = g.max_degree();
    let lambda = match (a.fugacity.lambda, a.fugacity.delta) {
        (Some(l), None) => {
            if !(l.is_finite() && l > 0.0) {
                return Err(CliError::Usage(format!(
                    "fugacity must be positive, got {l}"
                )));
            }
            l
        }
        _ => {
            a.fugacity
                .resolve(a.degree.unwrap_or(measured as u32))?
                .lambda
        }
    };
    let context_degree = a.degree.unwrap_or(measured as u32);
    let theoretical_exponent = mixing_exponent(context_degree).ok().map(|(p, q)| {
        if q == 1 {
            p.to_string()
        } else {
            format!("{p}/{q}")
        }
    });
    let log_integral = mixing_bound(context_degree, g.n() as u64)
        .ok()
        .map(|b| b.log_integral);
    let mut notes = Vec::new();
    match &theoretical_exponent {
        Some(e) => notes.push(format!(
            "theoretical exponent {e} (upper bound at criticality for Δ = {context_degree}; not checkable at this size)"
        )),
        None => notes.push(format!("no theoretical exponent for Δ = {context_degree} < 3")),
    }
    let mut failures = Vec::new();
    let table;
    let (exact, simulated) = if a.exact {
        let p = transition_matrix(&g, lambda).map_err(|e| match e {
            hardcore::Error::SizeLimit { .. } => {
                CliError::Usage(format!("{e}; use --simulate for graphs of this size"))
            }
            other => other.into(),
        })?;
        let mix = exact_mixing_time(&p)?;
        let spectral = if p.num_states() <= MAX_DENSE_STATES {
            Some(spectral_quantities(&p)?)
        } else {
            None
        };
        let (rs, db, st) = (
            p.max_row_sum_error(),
            p.max_detailed_balance_error(),
            p.max_stationarity_error(),
        );
        for (what, err) in [
            ("row sum", rs),
            ("detailed balance", db),
            ("stationarity", st),
        ] {
            if err > 1e-12 {
                failures.push(format!("{what} error {err}"));
            }
        }
        let mut t = Table::new(&["t", "tv"]);
        for (step, tv) in tv_curve(&p, mix.worst_start, mix.t_mix).iter().enumerate() {
            t.push(vec![step.to_string(), tv.to_string()]);
        }
        table = Some(t);
        notes.push(format!(
            "exact mixing time {} over {} states",
            mix.t_mix,
            p.num_states()
        ));
        (
            Some(ExactMix {
                states: p.num_states(),
                t_mix: mix.t_mix,
                worst_start: p.state(mix.worst_start).occupied_vertices(),
                second_eigenvalue_modulus: spectral.map(|s| s.second_eigenvalue_modulus),
                relaxation_time: spectral.map(|s| s.relaxation_time),
                max_row_sum_error: rs,
                max_detailed_balance_error: db,
                max_stationarity_error: st,
            }),
            None,
        )
    } else {
        let seed = seed.ok_or_else(|| CliError::Usage("--simulate requires --seed".into()))?;
        let starts = vec![
            Configuration::empty(g.n()),
            greedy_independent_set(&g, 0..g.n()),
            greedy_independent_set(&g, (0..g.n()).rev()),
        ];
        let curve = empirical_tv_curve(&g, lambda, &starts, a.reps, a.horizon, seed)?;
        let mut t = Table::new(&["step", "proxy", "half_width"]);
        for pt in &curve.points {
            t.push(vec![
                pt.step.to_string(),
                pt.proxy.to_string(),
                pt.half_width.to_string(),
            ]);
        }
        table = Some(t);
        if let (Some(steps), Some(path)) = (a.trajectory_steps, &a.trajectory) {
            let run = run_chain(&g, lambda, &starts[0], steps, seed, true)?;
            write_trajectory(path, run.trajectory.as_deref().unwrap_or_default())?;
        }
        let last = *curve.points.last().expect("horizon + 1 points");
        notes.push(format!(
            "{} (final proxy {} ± {})",
            curve.label, last.proxy, last.half_width
        ));
        (
            None,
            Some(SimulatedMix {
                label: curve.label,
                starts: starts
                    .iter()
                    .map(Configuration::occupied_vertices)
                    .collect(),
                reps: a.reps,
                horizon: a.horizon,
                final_proxy: last.proxy,
                final_half_width: last.half_width,
            }),
        )
    };
    finish(
        MixResult {
            lambda,
            max_degree: measured,
            n: g.n(),
            theoretical_exponent,
            log_integral,
            exact,
            simulated,
        },
        failures,
        table,
        notes,
    )
}

fn write_trajectory(path: &Path, rows: &[hardcore::glauber::TrajectoryRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize)]
struct ProofCheckResult {
    params: HardcoreParams,
    x_hat: f64,
    grid: usize,
    max_validity_lhs: f64,
    argmax_f: f64,
    max_f: f64,
    f_at_x_hat: f64,
    argmin_g: f64,
    argmax_a: f64,
    /// max over the grid of |1/f − (1 − dλ/g)|.
    identity_residual: f64,
    /// |f(x̂) − 1/(1−dx̂)|.
    f_fixed_point_residual: f64,
    /// |1 + d·a(x̂) − 1/(1−dx̂)|.
    a_fixed_point_residual: f64,
}

pub fn cmd_proof_check(a: &ProofCheckArgs) -> CliResult<Outcome> {
    if a.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let d = a.branching;
    let params = HardcoreParams::from_slack(d + 1, a.delta)?;
    if params.delta <= 0.0 {
        return Err(CliError::Usage(
            "f diverges at zero slack (λ = λ_c); choose δ > 0".into(),
        ));
    }
    let lambda = params.lambda;
    let x_hat = fixed_point(d, lambda)?.x_hat;
    let df = f64::from(d);
    let step = 1.0 / a.grid as f64;
    let points = (0..=a.grid)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 * step;
            Ok((x, proof_functions_at(d, lambda, x_hat, x)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut r = ProofCheckResult {
        params,
        x_hat,
        grid: a.grid,
        max_validity_lhs: f64::NEG_INFINITY,
        argmax_f: 0.0,
        max_f: f64::NEG_INFINITY,
        f_at_x_hat: 0.0,
        argmin_g: 0.0,
        argmax_a: 0.0,
        identity_residual: 0.0,
        f_fixed_point_residual: 0.0,
        a_fixed_point_residual: 0.0,
    };
    let (mut min_g, mut max_a) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, pf) in &points {
        r.max_validity_lhs = r.max_validity_lhs.max(pf.validity_lhs);
        if pf.f > r.max_f {
            r.max_f = pf.f;
            r.argmax_f = *x;
        }
        if pf.g < min_g {
            min_g = pf.g;
            r.argmin_g = *x;
        }
        if pf.a > max_a {
            max_a = pf.a;
            r.argmax_a = *x;
        }
        if pf.g.is_finite() {
            let res = (1.0 / pf.f - (1.0 - df * lambda / pf.g)).abs();
            r.identity_residual = r.identity_residual.max(res);
        }
    }
    let at = proof_functions_at(d, lambda, x_hat, x_hat)?;
    let phi_star = d_ary_influence_bound(d, x_hat);
    r.f_at_x_hat = at.f;
    r.f_fixed_point_residual = (at.f - phi_star).abs();
    r.a_fixed_point_residual = (1.0 + df * at.a - phi_star).abs();

    let mut failures = Vec::new();
    if r.max_validity_lhs >= 1.0 {
        failures.push(format!("validity quantity reaches {}", r.max_validity_lhs));
    }
    for (what, arg) in [("f", r.argmax_f), ("g", r.argmin_g), ("a", r.argmax_a)] {
        if (arg - x_hat).abs() > step {
            failures.push(format!("extremum of {what} at {arg}, x_hat = {x_hat}"));
        }
    }
    if r.max_f > phi_star * (1.0 + 1e-9) {
        failures.push(format!(
            "grid max of f {} exceeds f(x_hat) {phi_star}",
            r.max_f
        ));
    }
    let scale = phi_star.max(1.0);
    for (what, res) in [
        ("1/f identity", r.identity_residual),
        ("f(x_hat)", r.f_fixed_point_residual / scale),
        ("1 + d·a(x_hat)", r.a_fixed_point_residual / scale),
    ] {
        if res > 1e-9 {
            failures.push(format!("{what} residual {res}"));
        }
    }
    let notes = vec![format!(
        "max validity {} ; argmax f {} (x_hat {x_hat})",
        r.max_validity_lhs, r.argmax_f
    )];
    finish(r, failures, None, notes)
}

/// Writes the record (JSON) or its table (CSV) to `out`, or returns the text.
pub fn render(outcome: &Outcome, format: Format) -> CliResult<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(&outcome.record)? + "\n"),
        Format::Csv => match &outcome.table {
            Some(t) => t.to_csv(),
            None => Err(CliError::Usage(format!(
                "{} has no tabular output; use --format json",
                outcome.record.command
            ))),
        },
    }
}
