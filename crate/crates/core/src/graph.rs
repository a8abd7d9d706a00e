//! Simple undirected graphs, spin configurations and pinnings.
//!
//! Vertices are dense `0..n` indices. A graph produced by
//! [`Graph::induced_subgraph`] or [`apply_pinning`] remembers, for every
//! vertex, the label it had in the graph it was cut from, so results computed
//! on the subgraph can be reported in original coordinates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Graph on `n` vertices with no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); n],
            labels: None,
        }
    }

    /// Builds a canonical graph, rejecting self-loops, duplicates and
    /// out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(u, v) in edges {
            g.insert_edge(u, v, None)?;
        }
        g.canonicalize();
        Ok(g)
    }

    fn insert_edge(&mut self, u: usize, v: usize, line: Option<usize>) -> Result<()> {
        let n = self.n();
        for w in [u, v] {
            if w >= n {
                return Err(Error::VertexOutOfRange { vertex: w, n, line });
            }
        }
        if u == v {
            return Err(Error::SelfLoop { vertex: u, line });
        }
        if self.adj[u].contains(&v) {
            return Err(Error::DuplicateEdge {
                u: u.min(v),
                v: u.max(v),
                line,
            });
        }
        self.adj[u].push(v);
        self.adj[v].push(u);
        Ok(())
    }

    fn canonicalize(&mut self) {
        for list in &mut self.adj {
            list.sort_unstable();
        }
    }

    /// Parses the edge-list format: the first non-comment line holds `n`,
    /// every following non-comment line an edge `u v`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut graph: Option<Graph> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            match graph.as_mut() {
                None => {
                    if fields.len() != 1 {
                        return Err(Error::Parse {
                            line,
                            message: format!("expected vertex count, found {content:?}"),
                        });
                    }
                    let n = parse_index(fields[0], line)?;
                    graph = Some(Graph::empty(n));
                }
                Some(g) => {
                    if fields.len() != 2 {
                        return Err(Error::Parse {
                            line,
                            message: format!("expected edge \"u v\", found {content:?}"),
                        });
                    }
                    let u = parse_index(fields[0], line)?;
                    let v = parse_index(fields[1], line)?;
                    g.insert_edge(u, v, Some(line))?;
                }
            }
        }
        let mut g = graph.ok_or(Error::Parse {
            line: 0,
            message: "missing vertex count".into(),
        })?;
        g.canonicalize();
        Ok(g)
    }

    /// Edge-list serialization; edges sorted lexicographically with `u < v`.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.n());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n() && self.adj[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Label of `v` in the graph this one was derived from (or `v` itself).
    pub fn label(&self, v: usize) -> usize {
        match &self.labels {
            Some(l) => l[v],
            None => v,
        }
    }

    pub fn labels(&self) -> Vec<usize> {
        (0..self.n()).map(|v| self.label(v)).collect()
    }

    /// Index of the vertex carrying `label`, if any.
    pub fn vertex_with_label(&self, label: usize) -> Option<usize> {
        match &self.labels {
            Some(l) => l.iter().position(|&x| x == label),
            None => (label < self.n()).then_some(label),
        }
    }

    /// Bitmask of neighbours for each vertex; requires `n <= 64`.
    pub(crate) fn neighbor_masks(&self) -> Vec<u64> {
        debug_assert!(self.n() <= 64);
        self.adj
            .iter()
            .map(|list| list.iter().fold(0u64, |m, &v| m | (1u64 << v)))
            .collect()
    }

    /// `G[keep]`; `keep` is sorted and deduplicated first. Labels compose.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Result<Graph> {
        let keep: Vec<usize> = keep
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let n = self.n();
        let mut index = vec![usize::MAX; n];
        for (new, &old) in keep.iter().enumerate() {
            if old >= n {
                return Err(Error::VertexOutOfRange {
                    vertex: old,
                    n,
                    line: None,
                });
            }
            index[old] = new;
        }
        let adj = keep
            .iter()
            .map(|&old| {
                self.adj[old]
                    .iter()
                    .filter(|&&w| index[w] != usize::MAX)
                    .map(|&w| index[w])
                    .collect()
            })
            .collect();
        Ok(Graph {
            adj,
            labels: Some(keep.iter().map(|&v| self.label(v)).collect()),
        })
    }

    /// Connected components as sorted vertex lists, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut i = 0;
            while i < comp.len() {
                let v = comp[i];
                i += 1;
                for &w in &self.adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// True when the graph has no cycles.
    pub fn is_forest(&self) -> bool {
        self.num_edges() + self.components().len() == self.n()
    }
}

fn parse_index(s: &str, line: usize) -> Result<usize> {
    s.parse::<usize>().map_err(|_| Error::Parse {
        line,
        message: format!("not a non-negative integer: {s:?}"),
    })
}

/// A spin configuration σ ∈ {0,1}^V.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    occupied: Vec<bool>,
}

impl Configuration {
    pub fn empty(n: usize) -> Self {
        Configuration {
            occupied: vec![false; n],
        }
    }

    pub fn from_vertices(n: usize, vertices: &[usize]) -> Result<Self> {
        let mut c = Configuration::empty(n);
        for &v in vertices {
            if v >= n {
                return Err(Error::VertexOutOfRange {
                    vertex: v,
                    n,
                    line: None,
                });
            }
            c.occupied[v] = true;
        }
        Ok(c)
    }

    pub fn from_mask(n: usize, mask: u64) -> Self {
        Configuration {
            occupied: (0..n).map(|v| mask >> v & 1 == 1).collect(),
        }
    }

    pub fn to_mask(&self) -> Option<u64> {
        if self.occupied.len() > 64 {
            return None;
        }
        Some(
            self.occupied
                .iter()
                .enumerate()
                .fold(0u64, |m, (v, &b)| if b { m | 1 << v } else { m }),
        )
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn is_occupied(&self, v: usize) -> bool {
        self.occupied[v]
    }

    pub fn set(&mut self, v: usize, value: bool) {
        self.occupied[v] = value;
    }

    /// Number of occupied vertices, |σ|.
    pub fn popcount(&self) -> usize {
        self.occupied.iter().filter(|&&b| b).count()
    }

    pub fn occupied_vertices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.occupied[v]).collect()
    }

    pub fn is_independent(&self, g: &Graph) -> bool {
        self.len() == g.n()
            && g.edges()
                .all(|(u, v)| !(self.occupied[u] && self.occupied[v]))
    }

    pub fn hamming(&self, other: &Configuration) -> usize {
        self.occupied
            .iter()
            .zip(&other.occupied)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// A partial assignment τ ∈ {0,1}^Λ with positive probability under the
/// hardcore model: no two vertices pinned to 1 are adjacent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Pinning {
    values: BTreeMap<usize, bool>,
}

impl Pinning {
    pub fn none() -> Self {
        Pinning::default()
    }

    pub fn new(g: &Graph, assignments: impl IntoIterator<Item = (usize, bool)>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (v, value) in assignments {
            if v >= g.n() {
                return Err(Error::VertexOutOfRange {
                    vertex: v,
                    n: g.n(),
                    line: None,
                });
            }
            if let Some(prev) = values.insert(v, value) {
                if prev != value {
                    return Err(Error::InvalidPinning(format!(
                        "vertex {v} pinned to both 0 and 1"
                    )));
                }
            }
        }
        let p = Pinning { values };
        for u in p.ones() {
            if let Some(&w) = g.neighbors(u).iter().find(|&&w| p.get(w) == Some(true)) {
                return Err(Error::InvalidPinning(format!(
                    "adjacent vertices {u} and {w} both pinned occupied"
                )));
            }
        }
        Ok(p)
    }

    /// Pins every vertex of `vertices` to 0.
    pub fn zeros(g: &Graph, vertices: impl IntoIterator<Item = usize>) -> Result<Self> {
        Pinning::new(g, vertices.into_iter().map(|v| (v, false)))
    }

    pub fn get(&self, v: usize) -> Option<bool> {
        self.values.get(&v).copied()
    }

    pub fn is_pinned(&self, v: usize) -> bool {
        self.values.contains_key(&v)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.values.iter().map(|(&v, &b)| (v, b))
    }

    /// Λ, ascending.
    pub fn domain(&self) -> Vec<usize> {
        self.values.keys().copied().collect()
    }

    /// S_0 = τ⁻¹(0).
    pub fn zeros_set(&self) -> Vec<usize> {
        self.iter().filter(|&(_, b)| !b).map(|(v, _)| v).collect()
    }

    /// S_1 = τ⁻¹(1).
    pub fn ones(&self) -> Vec<usize> {
        self.iter().filter(|&(_, b)| b).map(|(v, _)| v).collect()
    }

    /// Whether a configuration agrees with τ on Λ.
    pub fn agrees(&self, sigma: &Configuration) -> bool {
        self.iter().all(|(v, b)| sigma.is_occupied(v) == b)
    }
}

/// ∂S: vertices outside `s` with a neighbour in `s`, ascending.
pub fn boundary(g: &Graph, s: &[usize]) -> Result<Vec<usize>> {
    let n = g.n();
    let mut inside = vec![false; n];
    for &v in s {
        if v >= n {
            return Err(Error::VertexOutOfRange {
                vertex: v,
                n,
                line: None,
            });
        }
        inside[v] = true;
    }
    let mut out = BTreeSet::new();
    for &u in s {
        for &w in g.neighbors(u) {
            if !inside[w] {
                out.insert(w);
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// The conditional hardcore model μ^τ as an unconditioned model:
/// `G[V \ (S_0 ∪ S_1 ∪ ∂S_1)]`, with labels pointing back into `g`.
pub fn apply_pinning(g: &Graph, p: &Pinning) -> Result<Graph> {
    // Re-validate: the pinning may have been built against a different graph.
    let p = Pinning::new(g, p.iter())?;
    let ones = p.ones();
    let blocked = boundary(g, &ones)?;
    let mut removed = vec![false; g.n()];
    for v in p.domain().into_iter().chain(blocked) {
        removed[v] = true;
    }
    let keep: Vec<usize> = (0..g.n()).filter(|&v| !removed[v]).collect();
    g.induced_subgraph(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::parse("3\n0 1\n1 2").unwrap()
    }

    #[test]
    fn parses_smallest_graphs() {
        let k2 = Graph::parse("2\n0 1").unwrap();
        assert_eq!(k2.n(), 2);
        assert_eq!(k2.edges().collect::<Vec<_>>(), vec![(0, 1)]);

        let p3 = path3();
        assert_eq!(p3.neighbors(1), &[0, 2]);
        assert_eq!(p3.max_degree(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert_eq!(
            Graph::parse("3\n0 0"),
            Err(Error::SelfLoop {
                vertex: 0,
                line: Some(2)
            })
        );
        assert!(matches!(
            Graph::parse("3\n0 1\n# dup\n1 0"),
            Err(Error::DuplicateEdge { line: Some(4), .. })
        ));
        assert!(matches!(
            Graph::parse("3\n0 3"),
            Err(Error::VertexOutOfRange {
                vertex: 3,
                line: Some(2),
                ..
            })
        ));
        assert!(matches!(
            Graph::parse("3\n0 x"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Graph::parse("# nothing"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let g = Graph::parse("# header\n\n4 # count\n2 3\n0 1 # edge\n").unwrap();
        assert_eq!(g.to_edge_list(), "4\n0 1\n2 3\n");
    }

    #[test]
    fn boundary_examples() {
        let k2 = Graph::parse("2\n0 1").unwrap();
        assert_eq!(boundary(&k2, &[0]).unwrap(), vec![1]);
        assert_eq!(boundary(&path3(), &[1]).unwrap(), vec![0, 2]);
        assert!(boundary(&path3(), &[]).unwrap().is_empty());
        assert!(boundary(&path3(), &[7]).is_err());
    }

    #[test]
    fn pinning_rejects_adjacent_ones() {
        let p3 = path3();
        assert!(matches!(
            Pinning::new(&p3, [(0, true), (1, true)]),
            Err(Error::InvalidPinning(_))
        ));
        assert!(Pinning::new(&p3, [(0, true), (2, true)]).is_ok());
        assert!(Pinning::new(&p3, [(0, true), (0, false)]).is_err());
    }

    #[test]
    fn apply_pinning_examples() {
        let k2 = Graph::parse("2\n0 1").unwrap();
        let g = apply_pinning(&k2, &Pinning::new(&k2, [(0, true)]).unwrap()).unwrap();
        assert_eq!(g.n(), 0);

        let p3 = path3();
        let g = apply_pinning(&p3, &Pinning::new(&p3, [(1, false)]).unwrap()).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.num_edges(), 0);
        assert_eq!(g.labels(), vec![0, 2]);

        let g = apply_pinning(&p3, &Pinning::new(&p3, [(0, true)]).unwrap()).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.labels(), vec![2]);
    }

    #[test]
    fn labels_compose_through_nested_subgraphs() {
        let c5 = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap();
        let a = c5.induced_subgraph(&[1, 2, 3, 4]).unwrap();
        let b = a.induced_subgraph(&[1, 3]).unwrap();
        assert_eq!(b.labels(), vec![2, 4]);
        assert_eq!(b.vertex_with_label(4), Some(1));
        assert_eq!(b.vertex_with_label(0), None);
    }

    #[test]
    fn independence_check() {
        let p3 = path3();
        assert!(Configuration::from_vertices(3, &[0, 2])
            .unwrap()
            .is_independent(&p3));
        assert!(!Configuration::from_vertices(3, &[0, 1])
            .unwrap()
            .is_independent(&p3));
        let c = Configuration::from_mask(3, 0b101);
        assert_eq!(c.to_mask(), Some(0b101));
        assert_eq!(c.popcount(), 2);
    }

    #[test]
    fn forest_detection() {
        assert!(path3().is_forest());
        let k3 = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(!k3.is_forest());
        assert!(Graph::empty(4).is_forest());
    }
}
