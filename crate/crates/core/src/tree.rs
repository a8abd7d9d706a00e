//! Rooted trees and the hardcore tree recursion.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{check_fugacity, Error, Result};
use crate::graph::Graph;
use crate::uniqueness::{critical_fugacity, recurrence};

/// Node-count guard for [`build_truncated_regular_tree`].
pub const MAX_TREE_NODES: usize = 10_000_000;
/// Vertex-count guard for [`enumerate_rooted_trees`].
pub const MAX_ENUM_TREE_N: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl RootedTree {
    /// Single vertex.
    pub fn singleton() -> Self {
        RootedTree {
            root: 0,
            parent: vec![None],
            children: vec![Vec::new()],
        }
    }

    /// From a parent array with exactly one `None` (the root).
    pub fn from_parents(parent: Vec<Option<usize>>) -> Result<Self> {
        let n = parent.len();
        if n == 0 {
            return Err(Error::NotATree("no vertices".into()));
        }
        let roots: Vec<usize> = (0..n).filter(|&v| parent[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::NotATree(format!("{} roots", roots.len())));
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return Err(Error::VertexOutOfRange {
                        vertex: p,
                        n,
                        line: None,
                    });
                }
                if p == v {
                    return Err(Error::NotATree(format!("vertex {v} is its own parent")));
                }
                children[p].push(v);
            }
        }
        let tree = RootedTree {
            root: roots[0],
            parent,
            children,
        };
        if tree.preorder().len() != n {
            return Err(Error::NotATree("parent array contains a cycle".into()));
        }
        Ok(tree)
    }

    /// Roots the connected acyclic graph `g` at `root`.
    pub fn from_graph(g: &Graph, root: usize) -> Result<Self> {
        let n = g.n();
        if root >= n {
            return Err(Error::VertexOutOfRange {
                vertex: root,
                n,
                line: None,
            });
        }
        if !g.is_connected() || !g.is_forest() {
            return Err(Error::NotATree(
                "graph is not a connected acyclic graph".into(),
            ));
        }
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut queue = vec![root];
        let mut i = 0;
        while i < queue.len() {
            let v = queue[i];
            i += 1;
            for &w in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(v);
                    queue.push(w);
                }
            }
        }
        RootedTree::from_parents(parent)
    }

    /// Text format: line 1 is n, line 2 the parent array with −1 for the root.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, first) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "missing vertex count".into(),
        })?;
        let n: usize = first.parse().map_err(|_| Error::Parse {
            line,
            message: format!("not a vertex count: {first:?}"),
        })?;
        let (line, second) = lines.next().ok_or(Error::Parse {
            line: line + 1,
            message: "missing parent array".into(),
        })?;
        let parent = second
            .split_whitespace()
            .map(|tok| match tok.parse::<i64>() {
                Ok(-1) => Ok(None),
                Ok(p) if p >= 0 => Ok(Some(p as usize)),
                _ => Err(Error::Parse {
                    line,
                    message: format!("bad parent entry {tok:?}"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        if parent.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("expected {n} parent entries, found {}", parent.len()),
            });
        }
        if let Some((line, extra)) = lines.next() {
            return Err(Error::Parse {
                line,
                message: format!("unexpected trailing content {extra:?}"),
            });
        }
        RootedTree::from_parents(parent)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n());
        let entries: Vec<String> = self
            .parent
            .iter()
            .map(|p| p.map_or("-1".to_string(), |p| p.to_string()))
            .collect();
        let _ = writeln!(out, "{}", entries.join(" "));
        out
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn max_children(&self) -> usize {
        self.children.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Maximum degree of the underlying undirected tree.
    pub fn max_degree(&self) -> usize {
        (0..self.n())
            .map(|v| self.children[v].len() + usize::from(self.parent[v].is_some()))
            .max()
            .unwrap_or(0)
    }

    /// Vertices with every parent before its children.
    pub fn preorder(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.n());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            if order.len() > self.n() {
                break;
            }
            stack.extend(self.children[v].iter().rev());
        }
        order
    }

    /// L_k(r) for k = 0, 1, …
    pub fn levels(&self) -> Vec<Vec<usize>> {
        let mut levels = vec![vec![self.root]];
        loop {
            let next: Vec<usize> = levels
                .last()
                .unwrap()
                .iter()
                .flat_map(|&v| self.children[v].iter().copied())
                .collect();
            if next.is_empty() {
                return levels;
            }
            levels.push(next);
        }
    }

    pub fn to_graph(&self) -> Graph {
        let edges: Vec<(usize, usize)> = (0..self.n())
            .filter_map(|v| self.parent[v].map(|p| (p, v)))
            .collect();
        Graph::from_edges(self.n(), &edges).expect("tree edges are simple")
    }

    /// AHU code: an isomorphism invariant of the rooted tree.
    pub fn canonical_code(&self) -> String {
        let mut codes = vec![String::new(); self.n()];
        for &v in self.preorder().iter().rev() {
            let mut kids: Vec<&str> = self.children[v]
                .iter()
                .map(|&w| codes[w].as_str())
                .collect();
            kids.sort_unstable();
            codes[v] = format!("({})", kids.concat());
        }
        std::mem::take(&mut codes[self.root])
    }
}

/// p_v = Pr[σ_v = 1] in the hardcore model on the subtree T_v.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeMarginals {
    pub p: Vec<f64>,
}

/// Bottom-up evaluation of p_v/(1−p_v) = λ ∏_{w ∈ L(v)} (1 − p_w).
pub fn tree_marginals(t: &RootedTree, lambda: f64) -> Result<TreeMarginals> {
    check_fugacity(lambda)?;
    let mut p = vec![0.0; t.n()];
    for &v in t.preorder().iter().rev() {
        let ratio = lambda * t.children(v).iter().map(|&w| 1.0 - p[w]).product::<f64>();
        p[v] = ratio / (1.0 + ratio);
    }
    Ok(TreeMarginals { p })
}

/// Φ(T, λ) = Σ_v |Ψ(r, v)| with per-level contributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceSum {
    pub phi: f64,
    /// Entry k is Σ_{v ∈ L_k(r)} |Ψ(r, v)|; entry 0 is the self-influence 1.
    pub per_level: Vec<f64>,
}

/// |Ψ(r, v)| is the product of p_u over the path from r (exclusive) to v
/// (inclusive); accumulated in one pass from the root down.
pub fn root_influence_sum(t: &RootedTree, lambda: f64) -> Result<InfluenceSum> {
    let m = tree_marginals(t, lambda)?;
    let n = t.n();
    let mut path = vec![0.0; n];
    let mut depth = vec![0usize; n];
    let mut per_level = vec![0.0];
    for v in t.preorder() {
        match t.parent(v) {
            None => path[v] = 1.0,
            Some(u) => {
                path[v] = path[u] * m.p[v];
                depth[v] = depth[u] + 1;
            }
        }
        if per_level.len() <= depth[v] {
            per_level.push(0.0);
        }
        per_level[depth[v]] += path[v];
    }
    Ok(InfluenceSum {
        phi: per_level.iter().sum(),
        per_level,
    })
}

/// Number of vertices of T_{Δ,h}: 1 + Σ_{k=1}^h Δ(Δ−1)^{k−1}.
pub fn truncated_regular_tree_size(max_degree: u32, h: u32) -> Option<usize> {
    let (delta, d) = (max_degree as usize, max_degree as usize - 1);
    let mut total = 1usize;
    let mut level = delta;
    for _ in 0..h {
        total = total.checked_add(level)?;
        level = level.checked_mul(d)?;
    }
    Some(total)
}

/// The Δ-regular tree truncated at depth h: the root has Δ children, every
/// other internal vertex Δ − 1, leaves sit at depth h.
pub fn build_truncated_regular_tree(max_degree: u32, h: u32) -> Result<RootedTree> {
    if max_degree < 3 {
        return Err(Error::Domain(format!(
            "maximum degree must be >= 3, got {max_degree}"
        )));
    }
    if h < 1 {
        return Err(Error::Domain("depth must be >= 1".into()));
    }
    let size = truncated_regular_tree_size(max_degree, h).unwrap_or(usize::MAX);
    if size > MAX_TREE_NODES {
        return Err(Error::SizeLimit {
            what: "truncated tree nodes",
            size,
            limit: MAX_TREE_NODES,
        });
    }
    let mut parent = Vec::with_capacity(size);
    parent.push(None);
    let mut frontier = vec![0usize];
    for depth in 0..h {
        let fanout = if depth == 0 {
            max_degree
        } else {
            max_degree - 1
        };
        let mut next = Vec::with_capacity(frontier.len() * fanout as usize);
        for &v in &frontier {
            for _ in 0..fanout {
                next.push(parent.len());
                parent.push(Some(v));
            }
        }
        frontier = next;
    }
    RootedTree::from_parents(parent)
}

/// Φ(T_{Δ,h}, λ) from the iterates F^{(t)}(0) alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedSeries {
    pub phi: f64,
    /// a_k^{(h)} = ∏_{j=1}^k F^{(h−j+1)}(0) for k = 1..=h (index k − 1).
    pub a: Vec<f64>,
}

/// Φ = 1 + Σ_k (d+1)d^{k−1} a_k^{(h)}, without building the tree.
///
/// The sum is accumulated from the leaves up: with q_t = d·F^{(t)}(0),
/// Σ_k d^k a_k = q_h(1 + q_{h−1}(1 + … (1 + q_1))), which only needs the
/// forward iterates and adds positive terms, so no truncation is needed.
pub fn truncated_influence_series(max_degree: u32, h: u32, lambda: f64) -> Result<TruncatedSeries> {
    check_fugacity(lambda)?;
    let lambda_c = critical_fugacity(max_degree)?;
    if lambda > lambda_c {
        return Err(Error::Domain(format!(
            "fugacity {lambda} exceeds the critical value {lambda_c}"
        )));
    }
    let d = max_degree - 1;
    let df = f64::from(d);
    // iterates[t - 1] = F^{(t)}(0)
    let mut iterates = Vec::with_capacity(h as usize);
    let mut x = 0.0;
    let mut nested = 0.0;
    for _ in 0..h {
        x = recurrence(d, lambda, x);
        iterates.push(x);
        nested = df * x * (1.0 + nested);
    }
    let mut a = Vec::with_capacity(h as usize);
    let mut prod = 1.0;
    for k in 1..=h as usize {
        prod *= iterates[h as usize - k];
        a.push(prod);
    }
    Ok(TruncatedSeries {
        phi: 1.0 + (df + 1.0) / df * nested,
        a,
    })
}

/// Which rooted trees [`enumerate_rooted_trees_with`] produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeFamily {
    pub max_n: usize,
    /// Cap on the number of children of the root.
    pub root_children: usize,
    /// Cap on the number of children of every other vertex.
    pub max_children: usize,
}

/// Every rooted tree with at most `max_n` vertices in which each vertex has at
/// most `max_children` children, one per isomorphism class.
pub fn enumerate_rooted_trees(max_n: usize, max_children: usize) -> Result<Vec<RootedTree>> {
    enumerate_rooted_trees_with(TreeFamily {
        max_n,
        root_children: max_children,
        max_children,
    })
}

/// Trees grow one leaf at a time (the family is closed under deleting a
/// leaf); duplicates are dropped by canonical code. Output is ordered by size,
/// then by discovery order.
pub fn enumerate_rooted_trees_with(family: TreeFamily) -> Result<Vec<RootedTree>> {
    if family.max_n > MAX_ENUM_TREE_N {
        return Err(Error::SizeLimit {
            what: "vertices for tree enumeration",
            size: family.max_n,
            limit: MAX_ENUM_TREE_N,
        });
    }
    if family.max_n == 0 {
        return Ok(Vec::new());
    }
    let cap = |t: &RootedTree, v: usize| {
        if v == t.root() {
            family.root_children
        } else {
            family.max_children
        }
    };
    let mut all = vec![RootedTree::singleton()];
    let mut layer = vec![RootedTree::singleton()];
    for _ in 2..=family.max_n {
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for t in &layer {
            for v in 0..t.n() {
                if t.children(v).len() >= cap(t, v) {
                    continue;
                }
                let mut parent = t.parent.clone();
                parent.push(Some(v));
                let grown = RootedTree::from_parents(parent)?;
                if seen.insert(grown.canonical_code()) {
                    next.push(grown);
                }
            }
        }
        all.extend(next.iter().cloned());
        layer = next;
    }
    Ok(all)
}

/// Number of rooted trees with exactly `n` vertices in the family, by
/// counting multisets of child subtrees (no trees are built).
pub fn count_rooted_trees(n: usize, root_children: usize, max_children: usize) -> u128 {
    // inner[s]: trees of size s where every vertex has ≤ max_children children.
    let mut inner = vec![0u128; n + 1];
    for s in 1..=n {
        inner[s] = forests(s - 1, max_children, &inner)[max_children.min(s - 1)];
    }
    if n == 0 {
        return 0;
    }
    forests(n - 1, root_children, &inner)[root_children.min(n - 1)]
}

/// cumulative[c] = number of multisets of at most c trees (sizes from
/// `inner`) with total size `total`.
fn forests(total: usize, max_count: usize, inner: &[u128]) -> Vec<u128> {
    // ways[m][c]: multisets of exactly c trees of total size m, built size by size.
    let mut ways = vec![vec![0u128; max_count + 1]; total + 1];
    ways[0][0] = 1;
    let mut memo: HashMap<(u128, usize), u128> = HashMap::new();
    for s in 1..=total {
        let kinds = inner[s];
        if kinds == 0 {
            continue;
        }
        let mut next = ways.clone();
        for m in 0..=total {
            for c in 0..=max_count {
                if ways[m][c] == 0 {
                    continue;
                }
                let mut j = 1;
                while m + j * s <= total && c + j <= max_count {
                    let choose = *memo
                        .entry((kinds, j))
                        .or_insert_with(|| multichoose(kinds, j));
                    next[m + j * s][c + j] += ways[m][c] * choose;
                    j += 1;
                }
            }
        }
        ways = next;
    }
    let mut cumulative = vec![0u128; max_count + 1];
    let mut acc = 0;
    for (c, slot) in cumulative.iter_mut().enumerate() {
        acc += ways[total][c];
        *slot = acc;
    }
    cumulative
}

/// C(k + j − 1, j).
fn multichoose(k: u128, j: usize) -> u128 {
    let mut r = 1u128;
    for i in 0..j as u128 {
        r = r * (k + i) / (i + 1);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn star2() -> RootedTree {
        RootedTree::from_parents(vec![None, Some(0), Some(0)]).unwrap()
    }

    fn path3() -> RootedTree {
        RootedTree::from_parents(vec![None, Some(0), Some(1)]).unwrap()
    }

    #[test]
    fn marginal_examples() {
        let m = tree_marginals(&RootedTree::singleton(), 1.0).unwrap();
        assert_eq!(m.p, vec![0.5]);
        let m = tree_marginals(&star2(), 1.0).unwrap();
        assert!(close(m.p[0], 0.2, 1e-16) && m.p[1] == 0.5 && m.p[2] == 0.5);
        let m = tree_marginals(&path3(), 1.0).unwrap();
        assert!(close(m.p[2], 0.5, 0.0));
        assert!(close(m.p[1], 1.0 / 3.0, 1e-16));
        assert!(close(m.p[0], 0.4, 1e-16));
    }

    #[test]
    fn influence_sum_examples() {
        assert!(close(
            root_influence_sum(&star2(), 1.0).unwrap().phi,
            2.0,
            1e-15
        ));
        let s = root_influence_sum(&path3(), 1.0).unwrap();
        assert!(close(s.phi, 1.5, 1e-15));
        assert!(close(s.per_level[1], 1.0 / 3.0, 1e-16));
        assert!(close(s.per_level[2], 1.0 / 6.0, 1e-16));
        assert_eq!(
            root_influence_sum(&RootedTree::singleton(), 2.0)
                .unwrap()
                .phi,
            1.0
        );
    }

    #[test]
    fn truncated_tree_sizes() {
        assert_eq!(build_truncated_regular_tree(3, 1).unwrap().n(), 4);
        assert_eq!(build_truncated_regular_tree(3, 2).unwrap().n(), 10);
        assert_eq!(build_truncated_regular_tree(4, 2).unwrap().n(), 17);
        let t = build_truncated_regular_tree(4, 3).unwrap();
        assert_eq!(t.max_degree(), 4);
        assert_eq!(t.levels().len(), 4);
        assert!(matches!(
            build_truncated_regular_tree(3, 40),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn series_examples() {
        let s = truncated_influence_series(3, 1, 1.0).unwrap();
        assert_eq!(s.a, vec![0.5]);
        assert!(close(s.phi, 2.5, 1e-15));
        let s = truncated_influence_series(3, 2, 1.0).unwrap();
        assert!(close(s.a[0], 0.2, 1e-16) && close(s.a[1], 0.1, 1e-16));
        assert!(close(s.phi, 2.2, 1e-15));
        assert!(truncated_influence_series(3, 2, 4.1).is_err());
    }

    #[test]
    fn tree_enumeration_small_cases() {
        assert_eq!(enumerate_rooted_trees(1, 3).unwrap().len(), 1);
        assert_eq!(enumerate_rooted_trees(2, 2).unwrap().len(), 2);
        assert!(enumerate_rooted_trees(15, 2).is_err());
    }

    #[test]
    fn counter_matches_known_values() {
        // Unrestricted rooted trees: 1, 1, 2, 4, 9, 20, 48, 115, 286, 719.
        let counts: Vec<u128> = (1..=10).map(|n| count_rooted_trees(n, n, n)).collect();
        assert_eq!(counts, vec![1, 1, 2, 4, 9, 20, 48, 115, 286, 719]);
        // Rooted trees with at most two children per vertex: 1, 1, 2, 3, 6, 11, 23.
        let counts: Vec<u128> = (1..=7).map(|n| count_rooted_trees(n, 2, 2)).collect();
        assert_eq!(counts, vec![1, 1, 2, 3, 6, 11, 23]);
    }

    #[test]
    fn text_format_round_trip() {
        let t = build_truncated_regular_tree(3, 2).unwrap();
        assert_eq!(RootedTree::parse(&t.to_text()).unwrap(), t);
        assert_eq!(RootedTree::parse("3\n-1 0 1\n").unwrap(), path3());
        assert!(RootedTree::parse("3\n-1 0\n").is_err());
        assert!(RootedTree::parse("2\n-1 -1\n").is_err());
        assert!(RootedTree::parse("3\n-1 2 1\n").is_err());
    }

    #[test]
    fn from_graph_rejects_cycles() {
        let k3 = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(RootedTree::from_graph(&k3, 0).is_err());
        let p = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let t = RootedTree::from_graph(&p, 1).unwrap();
        assert_eq!(t.children(1).len(), 2);
    }
}
