//! Glauber dynamics for the hardcore model.
//!
//! One step picks a vertex v uniformly, removes it, and re-adds it with
//! probability λ/(1+λ) when no neighbour is occupied.
//!
//! Randomness: every chain owns a ChaCha8 generator seeded with
//! `seed_from_u64(seed)` on stream `chain_index`. Each step draws the vertex
//! (`random_range(0..n)` on u64) and then always the coin (`random::<f64>()`),
//! blocked or not, so trajectories depend only on (seed, chain_index, σ0).

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_fugacity, Error, Result};
use crate::exact::{gibbs_distribution, independent_masks, MAX_ENUM_VERTICES};
use crate::graph::{Configuration, Graph};

/// Largest |I(G)| accepted by [`transition_matrix`].
pub const MAX_STATES: usize = 20_000;
/// Largest |I(G)| accepted by [`spectral_quantities`] and [`TransitionMatrix::dense`].
pub const MAX_DENSE_STATES: usize = 4_000;
/// Cutoff for [`exact_mixing_time`].
pub const MAX_MIXING_STEPS: u64 = 10_000_000;
/// Slack allowed in the monotonicity check on TV distances.
pub const TV_MONOTONE_TOL: f64 = 1e-12;

/// Parses a 64-bit seed written in decimal or as `0x`-prefixed hex.
pub fn parse_seed(text: &str) -> Result<u64> {
    let t = text.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse::<u64>(),
    };
    parsed.map_err(|e| Error::Domain(format!("invalid seed {t:?}: {e}")))
}

#[derive(Debug, Clone)]
pub struct ChainRng(ChaCha8Rng);

impl ChainRng {
    pub fn new(seed: u64, chain_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chain_index);
        ChainRng(rng)
    }

    fn vertex(&mut self, n: usize) -> usize {
        self.0.random_range(0..n as u64) as usize
    }

    fn coin(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Add,
    Remove,
    /// Unblocked update that left σ_v unchanged.
    Keep,
    /// A neighbour of v is occupied; v stays empty.
    Blocked,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Add => "add",
            Action::Remove => "remove",
            Action::Keep => "keep",
            Action::Blocked => "blocked",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepOutcome {
    pub vertex: usize,
    pub action: Action,
}

fn check_start(g: &Graph, sigma: &Configuration) -> Result<()> {
    if sigma.is_independent(g) {
        Ok(())
    } else {
        Err(Error::NotIndependent)
    }
}

fn update(g: &Graph, p_occupy: f64, sigma: &mut Configuration, v: usize, coin: f64) -> Action {
    let was = sigma.is_occupied(v);
    if g.neighbors(v).iter().any(|&w| sigma.is_occupied(w)) {
        debug_assert!(!was);
        return Action::Blocked;
    }
    let now = coin < p_occupy;
    sigma.set(v, now);
    match (was, now) {
        (false, true) => Action::Add,
        (true, false) => Action::Remove,
        _ => Action::Keep,
    }
}

/// One Glauber update of σ.
pub fn glauber_step(
    g: &Graph,
    lambda: f64,
    sigma: &Configuration,
    rng: &mut ChainRng,
) -> Result<(Configuration, StepOutcome)> {
    check_fugacity(lambda)?;
    check_start(g, sigma)?;
    if g.n() == 0 {
        return Err(Error::Domain(
            "Glauber dynamics needs at least one vertex".into(),
        ));
    }
    let mut next = sigma.clone();
    let v = rng.vertex(g.n());
    let coin = rng.coin();
    let action = update(g, lambda / (1.0 + lambda), &mut next, v, coin);
    Ok((next, StepOutcome { vertex: v, action }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    pub config: Configuration,
    pub step: u64,
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrajectoryRow {
    pub step: u64,
    pub vertex_picked: usize,
    pub action: Action,
    pub popcount: usize,
}

/// A running chain that owns its state and generator.
#[derive(Debug, Clone)]
pub struct Chain<'g> {
    graph: &'g Graph,
    p_occupy: f64,
    state: ChainState,
    rng: ChainRng,
}

impl<'g> Chain<'g> {
    pub fn new(
        graph: &'g Graph,
        lambda: f64,
        start: Configuration,
        seed: u64,
        chain_index: u64,
    ) -> Result<Self> {
        check_fugacity(lambda)?;
        check_start(graph, &start)?;
        if graph.n() == 0 {
            return Err(Error::Domain(
                "Glauber dynamics needs at least one vertex".into(),
            ));
        }
        Ok(Chain {
            graph,
            p_occupy: lambda / (1.0 + lambda),
            state: ChainState {
                config: start,
                step: 0,
            },
            rng: ChainRng::new(seed, chain_index),
        })
    }

    pub fn step(&mut self) -> StepOutcome {
        let v = self.rng.vertex(self.graph.n());
        let coin = self.rng.coin();
        let action = update(self.graph, self.p_occupy, &mut self.state.config, v, coin);
        self.state.step += 1;
        StepOutcome { vertex: v, action }
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn config(&self) -> &Configuration {
        &self.state.config
    }

    pub fn into_state(self) -> ChainState {
        self.state
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub state: ChainState,
    pub trajectory: Option<Vec<TrajectoryRow>>,
}

/// Runs `steps` updates from σ0 on chain stream 0.
pub fn run_chain(
    g: &Graph,
    lambda: f64,
    start: &Configuration,
    steps: u64,
    seed: u64,
    record_trajectory: bool,
) -> Result<ChainRun> {
    check_fugacity(lambda)?;
    check_start(g, start)?;
    if steps == 0 {
        return Ok(ChainRun {
            state: ChainState {
                config: start.clone(),
                step: 0,
            },
            trajectory: record_trajectory.then(Vec::new),
        });
    }
    let mut chain = Chain::new(g, lambda, start.clone(), seed, 0)?;
    let mut rows = Vec::new();
    let mut popcount = start.popcount();
    for _ in 0..steps {
        let out = chain.step();
        match out.action {
            Action::Add => popcount += 1,
            Action::Remove => popcount -= 1,
            Action::Keep | Action::Blocked => {}
        }
        if record_trajectory {
            rows.push(TrajectoryRow {
                step: chain.state.step,
                vertex_picked: out.vertex,
                action: out.action,
                popcount,
            });
        }
    }
    Ok(ChainRun {
        state: chain.into_state(),
        trajectory: record_trajectory.then_some(rows),
    })
}

/// Time-averaged occupancy of one vertex with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccupancyEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Estimates Pr[σ_v = 1] for every v from one trajectory: the first
/// `burn_in` steps are discarded and the remaining `steps` are split into
/// `batches` consecutive batches.
pub fn estimate_occupancy(
    g: &Graph,
    lambda: f64,
    start: &Configuration,
    burn_in: u64,
    steps: u64,
    batches: u64,
    seed: u64,
) -> Result<Vec<OccupancyEstimate>> {
    if batches < 2 || steps < batches {
        return Err(Error::Domain(format!(
            "need at least two batches and one step per batch, got {batches} batches over {steps} steps"
        )));
    }
    let mut chain = Chain::new(g, lambda, start.clone(), seed, 0)?;
    for _ in 0..burn_in {
        chain.step();
    }
    let n = g.n();
    let per_batch = steps / batches;
    let mut batch_means = vec![Vec::with_capacity(batches as usize); n];
    let mut counts = vec![0u64; n];
    for _ in 0..batches {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..per_batch {
            chain.step();
            for (v, c) in counts.iter_mut().enumerate() {
                *c += u64::from(chain.config().is_occupied(v));
            }
        }
        for v in 0..n {
            batch_means[v].push(counts[v] as f64 / per_batch as f64);
        }
    }
    let b = batches as f64;
    Ok(batch_means
        .into_iter()
        .map(|m| {
            let mean = m.iter().sum::<f64>() / b;
            let var = m.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0);
            OccupancyEstimate {
                mean,
                std_error: (var / b).sqrt(),
            }
        })
        .collect())
}

/// P_GD over I(G). States follow the exact oracle's enumeration order; rows
/// are stored sparsely as (column, probability) pairs sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n_vertices: usize,
    lambda: f64,
    states: Vec<u64>,
    rows: Vec<Vec<(usize, f64)>>,
    stationary: Vec<f64>,
}

impl TransitionMatrix {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_masks(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, i: usize) -> Configuration {
        Configuration::from_mask(self.n_vertices, self.states[i])
    }

    pub fn index_of(&self, sigma: &Configuration) -> Option<usize> {
        let mask = sigma.to_mask()?;
        if sigma.len() != self.n_vertices {
            return None;
        }
        self.states.iter().position(|&m| m == mask)
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    /// The Gibbs distribution μ in state order.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let s = self.num_states();
        guard(s, MAX_DENSE_STATES, "states for a dense transition matrix")?;
        let mut m = DMatrix::zeros(s, s);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                m[(i, j)] = p;
            }
        }
        Ok(m)
    }

    /// max_σ |Σ_σ' P(σ,σ′) − 1|.
    pub fn max_row_sum_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// max over pairs of |μ(σ)P(σ,σ′) − μ(σ′)P(σ′,σ)|.
    pub fn max_detailed_balance_error(&self) -> f64 {
        let mu = &self.stationary;
        (0..self.num_states())
            .into_par_iter()
            .map(|i| {
                self.rows[i]
                    .iter()
                    .map(|&(j, p)| (mu[i] * p - mu[j] * self.entry(j, i)).abs())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// max_σ′ |(μP)(σ′) − μ(σ′)|.
    pub fn max_stationarity_error(&self) -> f64 {
        let mu_p = self.step_distribution(&self.stationary);
        mu_p.iter()
            .zip(&self.stationary)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// νP for a row vector ν.
    pub fn step_distribution(&self, nu: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; nu.len()];
        for (i, &w) in nu.iter().enumerate() {
            if w != 0.0 {
                for &(j, p) in &self.rows[i] {
                    next[j] += w * p;
                }
            }
        }
        next
    }

    /// Total-variation distance from ν to μ.
    pub fn tv_to_stationary(&self, nu: &[f64]) -> f64 {
        0.5 * nu
            .iter()
            .zip(&self.stationary)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// The law of σ_t started from state `start`, for t = 0..=horizon.
    pub fn distributions_from(&self, start: usize, horizon: u64) -> Vec<Vec<f64>> {
        let mut nu = vec![0.0; self.num_states()];
        nu[start] = 1.0;
        let mut out = vec![nu.clone()];
        for _ in 0..horizon {
            nu = self.step_distribution(&nu);
            out.push(nu.clone());
        }
        out
    }
}

fn guard(size: usize, limit: usize, what: &'static str) -> Result<()> {
    if size > limit {
        Err(Error::SizeLimit { what, size, limit })
    } else {
        Ok(())
    }
}

pub fn transition_matrix(g: &Graph, lambda: f64) -> Result<TransitionMatrix> {
    check_fugacity(lambda)?;
    let n = g.n();
    guard(n, MAX_ENUM_VERTICES, "vertices for a transition matrix")?;
    let mut states = Vec::new();
    for m in independent_masks(g, None)? {
        states.push(m);
        guard(
            states.len(),
            MAX_STATES,
            "independent sets for a transition matrix",
        )?;
    }
    let stationary: Vec<f64> = gibbs_distribution(g, lambda)?
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    if n == 0 {
        return Ok(TransitionMatrix {
            n_vertices: 0,
            lambda,
            rows: vec![vec![(0, 1.0)]],
            states,
            stationary,
        });
    }
    let index: HashMap<u64, usize> = states.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let nbr: Vec<u64> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0u64, |m, &w| m | 1 << w))
        .collect();
    let pick = 1.0 / n as f64;
    let add = pick * (lambda / (1.0 + lambda));
    let drop = pick * (1.0 / (1.0 + lambda));
    let rows = states
        .par_iter()
        .map(|&sigma| {
            let mut acc: Vec<(usize, f64)> = Vec::with_capacity(n + 1);
            for v in 0..n {
                let without = sigma & !(1 << v);
                if without & nbr[v] != 0 {
                    acc.push((index[&without], pick));
                } else {
                    acc.push((index[&(without | 1 << v)], add));
                    acc.push((index[&without], drop));
                }
            }
            acc.sort_by_key(|&(j, _)| j);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
            for (j, p) in acc {
                match row.last_mut() {
                    Some(last) if last.0 == j => last.1 += p,
                    _ => row.push((j, p)),
                }
            }
            row
        })
        .collect();
    Ok(TransitionMatrix {
        n_vertices: n,
        lambda,
        states,
        rows,
        stationary,
    })
}

/// TV(P^t(σ0,·), μ) for t = 0..=horizon.
pub fn tv_curve(p: &TransitionMatrix, start: usize, horizon: u64) -> Vec<f64> {
    let mut nu = vec![0.0; p.num_states()];
    nu[start] = 1.0;
    let mut out = Vec::with_capacity(horizon as usize + 1);
    out.push(p.tv_to_stationary(&nu));
    for _ in 0..horizon {
        nu = p.step_distribution(&nu);
        out.push(p.tv_to_stationary(&nu));
    }
    out
}

/// First t with TV(P^t(σ0,·), μ) ≤ threshold, checking that TV never
/// increases along the way.
pub fn hitting_time(p: &TransitionMatrix, start: usize, threshold: f64) -> Result<u64> {
    let mut nu = vec![0.0; p.num_states()];
    nu[start] = 1.0;
    let mut prev = p.tv_to_stationary(&nu);
    let mut t = 0u64;
    while prev > threshold {
        if t >= MAX_MIXING_STEPS {
            return Err(Error::NonConvergence(MAX_MIXING_STEPS));
        }
        nu = p.step_distribution(&nu);
        t += 1;
        let tv = p.tv_to_stationary(&nu);
        if tv > prev + TV_MONOTONE_TOL {
            return Err(Error::Invariant(format!(
                "TV increased from {prev} to {tv} at step {t} from state {start}"
            )));
        }
        prev = tv;
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingTime {
    /// max over starts of the first t with TV ≤ 1/4.
    pub t_mix: u64,
    /// A start attaining the maximum (smallest index).
    pub worst_start: usize,
    pub per_start: Vec<u64>,
}

pub fn exact_mixing_time(p: &TransitionMatrix) -> Result<MixingTime> {
    let per_start = (0..p.num_states())
        .into_par_iter()
        .map(|s| hitting_time(p, s, 0.25))
        .collect::<Result<Vec<u64>>>()?;
    let t_mix = per_start.iter().copied().max().unwrap_or(0);
    let worst_start = per_start.iter().position(|&t| t == t_mix).unwrap_or(0);
    Ok(MixingTime {
        t_mix,
        worst_start,
        per_start,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spectral {
    pub largest_eigenvalue: f64,
    /// max |β| over the eigenvalues β other than the top one.
    pub second_eigenvalue_modulus: f64,
    /// 1/(1 − second modulus).
    pub relaxation_time: f64,
}

/// Eigenvalues of P through the similar symmetric matrix D^{1/2} P D^{-1/2},
/// D = diag(μ), which reversibility makes available.
pub fn spectral_quantities(p: &TransitionMatrix) -> Result<Spectral> {
    let dense = p.dense()?;
    let s = p.num_states();
    let sq: Vec<f64> = p.stationary().iter().map(|m| m.sqrt()).collect();
    let sym = DMatrix::from_fn(s, s, |i, j| {
        let a = sq[i] * dense[(i, j)] / sq[j];
        let b = sq[j] * dense[(j, i)] / sq[i];
        0.5 * (a + b)
    });
    if sym.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenSolver("non-finite symmetrised matrix".into()));
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let largest = eig[0];
    if (largest - 1.0).abs() > 1e-10 {
        return Err(Error::Invariant(format!(
            "largest eigenvalue {largest} is not 1"
        )));
    }
    let second = eig[1..].iter().map(|b| b.abs()).fold(0.0, f64::max);
    if second >= 1.0 {
        return Err(Error::Invariant(format!(
            "second eigenvalue modulus {second} is not below 1"
        )));
    }
    Ok(Spectral {
        largest_eigenvalue: largest,
        second_eigenvalue_modulus: second,
        relaxation_time: 1.0 / (1.0 - second),
    })
}

pub const PROXY_LABEL: &str =
    "heuristic: largest per-vertex occupancy gap between starts, not a bound on total variation";

/// One point of the empirical distance proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProxyPoint {
    pub step: u64,
    /// max over vertices v and start pairs (s, s′) of |p̂_s(v) − p̂_s′(v)|.
    pub proxy: f64,
    /// 1.96 standard errors of the difference attaining the maximum.
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvProxyCurve {
    pub label: &'static str,
    pub reps: u64,
    pub points: Vec<ProxyPoint>,
}

/// Runs `reps` replicas from every start and reports the occupancy-gap proxy
/// at each step. Replica r uses chain stream r from every start, so
/// identical starts give identical trajectories.
pub fn empirical_tv_curve(
    g: &Graph,
    lambda: f64,
    starts: &[Configuration],
    reps: u64,
    horizon: u64,
    seed: u64,
) -> Result<TvProxyCurve> {
    check_fugacity(lambda)?;
    for s in starts {
        check_start(g, s)?;
    }
    if reps == 0 {
        return Err(Error::Domain("need at least one replica".into()));
    }
    let n = g.n();
    let k = starts.len();
    let cells = (horizon as usize + 1) * k * n;
    guard(cells, 50_000_000, "occupancy cells for an empirical curve")?;
    // counts[(t * k + s) * n + v] = replicas with σ_v = 1 at time t from start s.
    let counts = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<u32>> {
            let mut c = vec![0u32; cells];
            for (si, start) in starts.iter().enumerate() {
                let record = |c: &mut Vec<u32>, t: usize, config: &Configuration| {
                    for v in 0..n {
                        c[(t * k + si) * n + v] += u32::from(config.is_occupied(v));
                    }
                };
                record(&mut c, 0, start);
                if horizon == 0 {
                    continue;
                }
                let mut chain = Chain::new(g, lambda, start.clone(), seed, r)?;
                for t in 1..=horizon as usize {
                    chain.step();
                    record(&mut c, t, chain.config());
                }
            }
            Ok(c)
        })
        .try_reduce(
            || vec![0u32; cells],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let rf = reps as f64;
    let points = (0..=horizon as usize)
        .map(|t| {
            let mut best = ProxyPoint {
                step: t as u64,
                proxy: 0.0,
                half_width: 0.0,
            };
            for v in 0..n {
                for a in 0..k {
                    for b in a + 1..k {
                        let pa = f64::from(counts[(t * k + a) * n + v]) / rf;
                        let pb = f64::from(counts[(t * k + b) * n + v]) / rf;
                        let gap = (pa - pb).abs();
                        if gap > best.proxy {
                            best.proxy = gap;
                            best.half_width =
                                1.96 * ((pa * (1.0 - pa) + pb * (1.0 - pb)) / rf).sqrt();
                        }
                    }
                }
            }
            best
        })
        .collect();
    Ok(TvProxyCurve {
        label: PROXY_LABEL,
        reps,
        points,
    })
}

/// The exact counterpart of the empirical proxy, computed from P^t.
pub fn exact_proxy_curve(
    p: &TransitionMatrix,
    starts: &[Configuration],
    horizon: u64,
) -> Result<Vec<f64>> {
    let idx = starts
        .iter()
        .map(|s| p.index_of(s).ok_or(Error::NotIndependent))
        .collect::<Result<Vec<usize>>>()?;
    let n = p.n_vertices;
    let laws: Vec<Vec<Vec<f64>>> = idx
        .iter()
        .map(|&s| p.distributions_from(s, horizon))
        .collect();
    let occupancy = |law: &[f64], v: usize| -> f64 {
        law.iter()
            .zip(&p.states)
            .filter(|(_, &m)| m >> v & 1 == 1)
            .map(|(w, _)| w)
            .sum()
    };
    Ok((0..=horizon as usize)
        .map(|t| {
            let mut best: f64 = 0.0;
            for v in 0..n {
                let occ: Vec<f64> = laws.iter().map(|l| occupancy(&l[t], v)).collect();
                for a in 0..occ.len() {
                    for b in a + 1..occ.len() {
                        best = best.max((occ[a] - occ[b]).abs());
                    }
                }
            }
            best
        })
        .collect())
}
