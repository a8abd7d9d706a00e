//! Exhaustive ground truth for small instances.
//!
//! Everything here is computed by walking the independent sets of the graph.
//! Weights are never summed as floats: each quantity is first accumulated as
//! an integer polynomial in λ (number of independent sets of each size with a
//! given occupancy pattern) and only then evaluated in the log domain, so
//! conditional probabilities are ratios of exactly counted polynomials.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{check_fugacity, Error, Result};
use crate::graph::{Configuration, Graph, Pinning};

/// Largest graph for which independent sets are enumerated.
pub const MAX_ENUM_VERTICES: usize = 30;
/// Largest graph accepted by the branching partition-function solver.
pub const MAX_DP_VERTICES: usize = 60;
/// Largest graph for the exhaustive worst-pinning scan.
pub const MAX_PINNING_SCAN_VERTICES: usize = 16;
/// Memo entries allowed in the branching solver before giving up.
const MAX_DP_MEMO: usize = 5_000_000;
/// Tolerance on imaginary parts of influence-matrix eigenvalues.
pub const EIGEN_IMAG_TOL: f64 = 1e-9;

fn guard_enum(g: &Graph) -> Result<()> {
    if g.n() > MAX_ENUM_VERTICES {
        return Err(Error::SizeLimit {
            what: "vertices for enumeration",
            size: g.n(),
            limit: MAX_ENUM_VERTICES,
        });
    }
    Ok(())
}

/// Lazy depth-first walk over independent sets as bitmasks.
///
/// Vertices are decided in ascending order, "unoccupied" before "occupied",
/// so the empty set always comes first and the order is reproducible.
#[derive(Debug, Clone)]
pub struct IndependentMasks {
    n: usize,
    nbr: Vec<u64>,
    forced_zero: u64,
    forced_one: u64,
    stack: Vec<(usize, u64)>,
}

impl IndependentMasks {
    fn new(g: &Graph, pinning: Option<&Pinning>) -> Result<Self> {
        guard_enum(g)?;
        let nbr = g.neighbor_masks();
        let (mut forced_zero, mut forced_one) = (0u64, 0u64);
        if let Some(p) = pinning {
            let p = Pinning::new(g, p.iter())?;
            for (v, b) in p.iter() {
                if b {
                    forced_one |= 1 << v;
                    forced_zero |= nbr[v];
                } else {
                    forced_zero |= 1 << v;
                }
            }
        }
        Ok(IndependentMasks {
            n: g.n(),
            nbr,
            forced_zero,
            forced_one,
            stack: vec![(0, 0)],
        })
    }
}

impl Iterator for IndependentMasks {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        while let Some((v, mask)) = self.stack.pop() {
            if v == self.n {
                return Some(mask);
            }
            let bit = 1u64 << v;
            if self.forced_zero & bit == 0 && mask & self.nbr[v] == 0 {
                self.stack.push((v + 1, mask | bit));
            }
            if self.forced_one & bit == 0 {
                self.stack.push((v + 1, mask));
            }
        }
        None
    }
}

/// Iterator over I(G) as [`Configuration`]s.
#[derive(Debug, Clone)]
pub struct IndependentSets(IndependentMasks);

impl Iterator for IndependentSets {
    type Item = Configuration;

    fn next(&mut self) -> Option<Configuration> {
        let n = self.0.n;
        self.0.next().map(|m| Configuration::from_mask(n, m))
    }
}

/// Every σ ∈ I(G) exactly once, in deterministic backtracking order.
pub fn enumerate_independent_sets(g: &Graph) -> Result<IndependentSets> {
    Ok(IndependentSets(IndependentMasks::new(g, None)?))
}

/// Bitmask form of [`enumerate_independent_sets`], optionally restricted to
/// sets agreeing with a pinning.
pub fn independent_masks(g: &Graph, pinning: Option<&Pinning>) -> Result<IndependentMasks> {
    IndependentMasks::new(g, pinning)
}

/// log Σ_k c_k λ^k; `-inf` for the zero polynomial.
fn log_poly(coeffs: &[u64], ln_lambda: f64) -> f64 {
    let terms: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (c as f64).ln() + k as f64 * ln_lambda)
        .collect();
    log_sum_exp(&terms)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn sub_poly(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Occupancy counts by set size over the (conditioned) independent sets.
struct Counts {
    n: usize,
    total: Vec<u64>,
    single: Vec<Vec<u64>>,
    pair: Option<Vec<Vec<u64>>>,
}

impl Counts {
    fn collect(g: &Graph, pinning: Option<&Pinning>, pairs: bool) -> Result<Counts> {
        let n = g.n();
        let mut c = Counts {
            n,
            total: vec![0; n + 1],
            single: vec![vec![0; n + 1]; n],
            pair: pairs.then(|| vec![vec![0; n + 1]; n * n]),
        };
        let mut occupied = Vec::with_capacity(n);
        for mask in independent_masks(g, pinning)? {
            let k = mask.count_ones() as usize;
            c.total[k] += 1;
            occupied.clear();
            occupied.extend((0..n).filter(|&v| mask >> v & 1 == 1));
            for &i in &occupied {
                c.single[i][k] += 1;
            }
            if let Some(pair) = c.pair.as_mut() {
                for &i in &occupied {
                    for &j in &occupied {
                        pair[i * n + j][k] += 1;
                    }
                }
            }
        }
        Ok(c)
    }

    fn pair(&self, i: usize, j: usize) -> &[u64] {
        &self.pair.as_ref().expect("pair counts collected")[i * self.n + j]
    }

    /// Pr[σ_v = 1].
    fn marginal(&self, v: usize, ln_lambda: f64) -> f64 {
        (log_poly(&self.single[v], ln_lambda) - log_poly(&self.total, ln_lambda)).exp()
    }

    /// Vertices with 0 < Pr[σ_v = 1] < 1.
    fn unfixed(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&v| self.single[v].iter().any(|&c| c > 0) && self.single[v] != self.total)
            .collect()
    }
}

/// ln Z together with Z itself when it is representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionValue {
    pub log_value: f64,
    /// Plain value, reported for graphs with at most 40 vertices.
    pub exact_value: Option<f64>,
}

impl PartitionValue {
    fn from_log(log_value: f64, n: usize) -> Self {
        let v = log_value.exp();
        PartitionValue {
            log_value,
            exact_value: (n <= 40 && v.is_finite()).then_some(v),
        }
    }
}

/// Z_{G,λ} by branching on vertices (Z(G) = Z(G−v) + λ·Z(G−N[v])) with
/// component splitting and memoisation. Exact for any graph up to
/// [`MAX_DP_VERTICES`] whose branching tree stays small (trees, sparse graphs).
pub fn partition_function(g: &Graph, lambda: f64) -> Result<PartitionValue> {
    check_fugacity(lambda)?;
    if g.n() > MAX_DP_VERTICES {
        return Err(Error::SizeLimit {
            what: "vertices for partition function",
            size: g.n(),
            limit: MAX_DP_VERTICES,
        });
    }
    let mut solver = Branching {
        nbr: g.neighbor_masks(),
        ln_lambda: lambda.ln(),
        memo: HashMap::new(),
    };
    let all = if g.n() == 64 {
        u64::MAX
    } else {
        (1u64 << g.n()) - 1
    };
    let log_value = solver.log_z(all)?;
    Ok(PartitionValue::from_log(log_value, g.n()))
}

struct Branching {
    nbr: Vec<u64>,
    ln_lambda: f64,
    memo: HashMap<u64, f64>,
}

impl Branching {
    fn component_of_lowest(&self, alive: u64) -> u64 {
        let mut comp = alive & alive.wrapping_neg();
        let mut frontier = comp;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let fresh = self.nbr[v] & alive & !comp;
            comp |= fresh;
            frontier |= fresh;
        }
        comp
    }

    fn log_z(&mut self, alive: u64) -> Result<f64> {
        if alive == 0 {
            return Ok(0.0);
        }
        if alive.count_ones() == 1 {
            return Ok(self.ln_lambda.exp().ln_1p());
        }
        if let Some(&v) = self.memo.get(&alive) {
            return Ok(v);
        }
        let comp = self.component_of_lowest(alive);
        let value = if comp != alive {
            self.log_z(comp)? + self.log_z(alive & !comp)?
        } else {
            let mut rest = alive;
            let mut best = (0u32, 0usize);
            while rest != 0 {
                let v = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let deg = (self.nbr[v] & alive).count_ones();
                if deg > best.0 {
                    best = (deg, v);
                }
            }
            let v = best.1;
            let without = self.log_z(alive & !(1u64 << v))?;
            let with = self.ln_lambda + self.log_z(alive & !(1u64 << v) & !self.nbr[v])?;
            log_sum_exp(&[without, with])
        };
        if self.memo.len() >= MAX_DP_MEMO {
            return Err(Error::SizeLimit {
                what: "partition-function memo entries",
                size: self.memo.len(),
                limit: MAX_DP_MEMO,
            });
        }
        self.memo.insert(alive, value);
        Ok(value)
    }
}

/// Z_{G,λ} by summing over every independent set (n ≤ 30).
pub fn partition_function_by_enumeration(g: &Graph, lambda: f64) -> Result<PartitionValue> {
    check_fugacity(lambda)?;
    let counts = Counts::collect(g, None, false)?;
    Ok(PartitionValue::from_log(
        log_poly(&counts.total, lambda.ln()),
        g.n(),
    ))
}

/// Number of independent sets of each size, i.e. the coefficients of the
/// independence polynomial.
pub fn independence_polynomial(g: &Graph) -> Result<Vec<u64>> {
    Ok(Counts::collect(g, None, false)?.total)
}

/// The Gibbs distribution μ_{G,λ} as (independent set, probability) pairs in
/// enumeration order.
pub fn gibbs_distribution(g: &Graph, lambda: f64) -> Result<Vec<(u64, f64)>> {
    check_fugacity(lambda)?;
    let ln_lambda = lambda.ln();
    let log_z = log_poly(&Counts::collect(g, None, false)?.total, ln_lambda);
    Ok(independent_masks(g, None)?
        .map(|m| (m, (m.count_ones() as f64 * ln_lambda - log_z).exp()))
        .collect())
}

/// Pr_{μ^τ}[σ_v = 1] by conditioned enumeration.
pub fn marginal(g: &Graph, lambda: f64, v: usize, pinning: Option<&Pinning>) -> Result<f64> {
    check_fugacity(lambda)?;
    if v >= g.n() {
        return Err(Error::VertexOutOfRange {
            vertex: v,
            n: g.n(),
            line: None,
        });
    }
    if pinning.is_some_and(|p| p.is_pinned(v)) {
        return Err(Error::PinnedVertex(v));
    }
    let counts = Counts::collect(g, pinning, false)?;
    Ok(counts.marginal(v, lambda.ln()))
}

/// Marginals of every vertex under μ^τ (pinned vertices included).
pub fn marginals(g: &Graph, lambda: f64, pinning: Option<&Pinning>) -> Result<Vec<f64>> {
    check_fugacity(lambda)?;
    let counts = Counts::collect(g, pinning, false)?;
    let ln_lambda = lambda.ln();
    Ok((0..g.n()).map(|v| counts.marginal(v, ln_lambda)).collect())
}

/// Ψ over the unfixed vertices A of μ^τ, rows and columns in ascending
/// vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    /// A, as vertex indices of the graph the matrix was computed on.
    pub free: Vec<usize>,
    pub entries: DMatrix<f64>,
    /// Pr[σ_i = 1] for each i ∈ A.
    pub marginals: Vec<f64>,
}

impl InfluenceMatrix {
    pub fn size(&self) -> usize {
        self.free.len()
    }

    /// Position of a vertex in A.
    pub fn index_of(&self, v: usize) -> Option<usize> {
        self.free.binary_search(&v).ok()
    }

    /// Σ_j |Ψ(i, j)| for row index `i`.
    pub fn row_abs_sum(&self, i: usize) -> f64 {
        self.entries.row(i).iter().map(|x| x.abs()).sum()
    }

    /// D^{1/2} Ψ D^{-1/2} with D = diag(Var σ_i). Ψ = D⁻¹·Cov, so this
    /// matrix is symmetric and shares Ψ's spectrum.
    pub fn symmetric_form(&self) -> DMatrix<f64> {
        let sd: Vec<f64> = self
            .marginals
            .iter()
            .map(|p| (p * (1.0 - p)).sqrt())
            .collect();
        DMatrix::from_fn(self.size(), self.size(), |i, j| {
            sd[i] * self.entries[(i, j)] / sd[j]
        })
    }
}

/// Ψ_{μ^τ}(i, j) = Pr[σ_j = 1 | σ_i = 1] − Pr[σ_j = 1 | σ_i = 0], from exact
/// conditional counts.
pub fn influence_matrix(
    g: &Graph,
    lambda: f64,
    pinning: Option<&Pinning>,
) -> Result<InfluenceMatrix> {
    check_fugacity(lambda)?;
    let counts = Counts::collect(g, pinning, true)?;
    let ln_lambda = lambda.ln();
    let free = counts.unfixed();
    let k = free.len();
    let log_total = log_poly(&counts.total, ln_lambda);
    let log_single: Vec<f64> = free
        .iter()
        .map(|&v| log_poly(&counts.single[v], ln_lambda))
        .collect();
    let log_absent: Vec<f64> = free
        .iter()
        .map(|&v| log_poly(&sub_poly(&counts.total, &counts.single[v]), ln_lambda))
        .collect();
    let mut entries = DMatrix::zeros(k, k);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            entries[(a, b)] = if a == b {
                1.0
            } else {
                let both = log_poly(counts.pair(i, j), ln_lambda);
                let only_j = log_poly(&sub_poly(&counts.single[j], counts.pair(i, j)), ln_lambda);
                (both - log_single[a]).exp() - (only_j - log_absent[a]).exp()
            };
        }
    }
    let marginals = log_single.iter().map(|l| (l - log_total).exp()).collect();
    Ok(InfluenceMatrix {
        free,
        entries,
        marginals,
    })
}

/// ‖Ψ‖_∞ and λ_max(Ψ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SIReport {
    pub inf_norm: f64,
    pub max_eigenvalue: f64,
}

/// Row-sum norm and largest eigenvalue from a dense nonsymmetric eigensolve.
/// Fails if the solver does not converge or returns an eigenvalue whose
/// imaginary part exceeds [`EIGEN_IMAG_TOL`].
pub fn si_constants(psi: &InfluenceMatrix) -> Result<SIReport> {
    let k = psi.size();
    if k == 0 {
        return Ok(SIReport {
            inf_norm: 0.0,
            max_eigenvalue: 0.0,
        });
    }
    let inf_norm = (0..k).map(|i| psi.row_abs_sum(i)).fold(0.0, f64::max);
    let schur = Schur::try_new(psi.entries.clone(), 1e-15, 100_000)
        .ok_or_else(|| Error::EigenSolver("Schur iteration did not converge".into()))?;
    let eig = schur.complex_eigenvalues();
    let worst_imag = eig.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst_imag > EIGEN_IMAG_TOL {
        return Err(Error::ComplexEigenvalue(worst_imag));
    }
    let max_eigenvalue = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(SIReport {
        inf_norm,
        max_eigenvalue,
    })
}

/// Eigenvalues of Ψ through its symmetric form, ascending.
pub fn symmetric_eigenvalues(psi: &InfluenceMatrix) -> Result<Vec<f64>> {
    if psi.size() == 0 {
        return Ok(Vec::new());
    }
    let eig = SymmetricEigen::try_new(psi.symmetric_form(), 1e-15, 100_000)
        .ok_or_else(|| Error::EigenSolver("symmetric eigensolver did not converge".into()))?;
    let mut v: Vec<f64> = DVector::from(eig.eigenvalues).iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Worst-case spectral-independence constants over all pinnings.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstPinning {
    pub inf_norm: f64,
    pub inf_witness: Pinning,
    pub max_eigenvalue: f64,
    pub eigen_witness: Pinning,
    /// Number of conditional models whose influence matrix was evaluated.
    pub evaluated: usize,
}

/// max over pinnings τ of ‖Ψ_{μ^τ}‖_∞ and of λ_max(Ψ_{μ^τ}).
///
/// μ^τ only depends on the set U = V \ (S_0 ∪ S_1 ∪ ∂S_1) of vertices left
/// free, and every U is produced by pinning V \ U to 0, so the scan runs over
/// U instead of all 3^n partial assignments. Ψ is block diagonal over the
/// components of G[U], so only connected U (plus U = V, the empty pinning)
/// are evaluated. Each evaluation is a conditioned enumeration on G itself.
pub fn worst_pinning_si(g: &Graph, lambda: f64) -> Result<WorstPinning> {
    check_fugacity(lambda)?;
    let n = g.n();
    if n > MAX_PINNING_SCAN_VERTICES {
        return Err(Error::SizeLimit {
            what: "vertices for pinning scan",
            size: n,
            limit: MAX_PINNING_SCAN_VERTICES,
        });
    }
    if n == 0 {
        return Ok(WorstPinning {
            inf_norm: 0.0,
            inf_witness: Pinning::none(),
            max_eigenvalue: 0.0,
            eigen_witness: Pinning::none(),
            evaluated: 0,
        });
    }
    let full = (1u64 << n) - 1;
    let nbr = g.neighbor_masks();
    let candidates: Vec<u64> = (1..=full)
        .rev()
        .filter(|&u| u == full || mask_connected(&nbr, u))
        .collect();
    let reports: Vec<(u64, SIReport)> = candidates
        .par_iter()
        .map(|&u| {
            let pin = zero_pinning(g, full & !u)?;
            let psi = influence_matrix(g, lambda, Some(&pin))?;
            Ok((u, si_constants(&psi)?))
        })
        .collect::<Result<_>>()?;

    let (mut inf_best, mut eig_best) = ((0.0, full), (f64::NEG_INFINITY, full));
    for &(u, r) in &reports {
        if r.inf_norm > inf_best.0 {
            inf_best = (r.inf_norm, u);
        }
        if r.max_eigenvalue > eig_best.0 {
            eig_best = (r.max_eigenvalue, u);
        }
    }
    Ok(WorstPinning {
        inf_norm: inf_best.0,
        inf_witness: zero_pinning(g, full & !inf_best.1)?,
        max_eigenvalue: eig_best.0,
        eigen_witness: zero_pinning(g, full & !eig_best.1)?,
        evaluated: reports.len(),
    })
}

fn zero_pinning(g: &Graph, mask: u64) -> Result<Pinning> {
    Pinning::zeros(g, (0..g.n()).filter(|&v| mask >> v & 1 == 1))
}

fn mask_connected(nbr: &[u64], alive: u64) -> bool {
    let mut comp = alive & alive.wrapping_neg();
    let mut frontier = comp;
    while frontier != 0 {
        let v = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let fresh = nbr[v] & alive & !comp;
        comp |= fresh;
        frontier |= fresh;
    }
    comp == alive
}
