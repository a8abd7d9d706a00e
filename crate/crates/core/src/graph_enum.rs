//! Small graphs up to isomorphism.
//!
//! Canonical forms come from colour refinement plus individualisation: the
//! certificate of a graph is the lexicographically smallest upper-triangle
//! adjacency string over all discrete colourings reachable from the refined
//! degree colouring. Enumeration grows graphs one vertex at a time and keeps
//! one representative per certificate.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Upper bound on `n` for canonical forms (the certificate is a `u128`).
pub const MAX_CANONICAL_N: usize = 16;
/// Upper bound on `n` for exhaustive enumeration.
pub const MAX_ENUM_N: usize = 10;

/// Isomorphism-invariant certificate; equal iff the graphs are isomorphic.
pub fn certificate(g: &Graph) -> Result<u128> {
    Ok(canonical_labeling(g)?.0)
}

/// The canonical relabelling of `g` (vertex `v` of `g` becomes `perm[v]`).
pub fn canonical_form(g: &Graph) -> Result<Graph> {
    let (_, perm) = canonical_labeling(g)?;
    relabel(g, &perm)
}

fn canonical_labeling(g: &Graph) -> Result<(u128, Vec<usize>)> {
    let n = g.n();
    if n > MAX_CANONICAL_N {
        return Err(Error::SizeLimit {
            what: "vertices for canonical form",
            size: n,
            limit: MAX_CANONICAL_N,
        });
    }
    let colors = refine(g, vec![0; n]);
    let mut best: Option<(u128, Vec<usize>)> = None;
    search(g, colors, &mut best);
    Ok(best.unwrap_or((0, Vec::new())))
}

fn relabel(g: &Graph, perm: &[usize]) -> Result<Graph> {
    let edges: Vec<(usize, usize)> = g.edges().map(|(u, v)| (perm[u], perm[v])).collect();
    Graph::from_edges(g.n(), &edges)
}

/// Replaces colours by their rank among distinct signatures, iterating until
/// the partition stops splitting.
fn refine(g: &Graph, mut colors: Vec<usize>) -> Vec<usize> {
    let n = g.n();
    let mut classes = count_distinct(&colors);
    loop {
        let sigs: Vec<(usize, Vec<usize>)> = (0..n)
            .map(|v| {
                let mut nb: Vec<usize> = g.neighbors(v).iter().map(|&w| colors[w]).collect();
                nb.sort_unstable();
                (colors[v], nb)
            })
            .collect();
        colors = rank(&sigs);
        let now = count_distinct(&colors);
        if now == classes {
            return colors;
        }
        classes = now;
    }
}

fn rank<T: Ord + Clone>(keys: &[T]) -> Vec<usize> {
    let mut sorted: Vec<T> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

fn count_distinct(colors: &[usize]) -> usize {
    colors.iter().collect::<HashSet<_>>().len()
}

fn search(g: &Graph, colors: Vec<usize>, best: &mut Option<(u128, Vec<usize>)>) {
    let n = g.n();
    let mut cell_sizes = vec![0usize; n];
    for &c in &colors {
        cell_sizes[c] += 1;
    }
    match (0..n).find(|&c| cell_sizes[c] > 1) {
        None => {
            let cert = adjacency_code(g, &colors);
            if best.as_ref().is_none_or(|(b, _)| cert < *b) {
                *best = Some((cert, colors));
            }
        }
        Some(target) => {
            for v in (0..n).filter(|&v| colors[v] == target) {
                let split: Vec<usize> = (0..n)
                    .map(|u| 2 * colors[u] + usize::from(u != v))
                    .collect();
                search(g, refine(g, rank(&split)), best);
            }
        }
    }
}

/// Upper-triangle adjacency bits of the relabelled graph, most significant first.
fn adjacency_code(g: &Graph, perm: &[usize]) -> u128 {
    let n = g.n();
    let mut inv = vec![0usize; n];
    for (v, &p) in perm.iter().enumerate() {
        inv[p] = v;
    }
    let mut code = 0u128;
    for i in 0..n {
        for j in i + 1..n {
            code = code << 1 | u128::from(g.has_edge(inv[i], inv[j]));
        }
    }
    code
}

/// All graphs on exactly `n` vertices with maximum degree at most
/// `max_degree`, one per isomorphism class, in canonical labelling.
pub fn graphs(n: usize, max_degree: usize, connected: bool) -> Result<Vec<Graph>> {
    Ok(graphs_up_to(n, max_degree, connected)?
        .pop()
        .unwrap_or_default())
}

/// `graphs(k, ..)` for every `k` in `1..=n_max`, indexed by `k - 1`.
pub fn graphs_up_to(n_max: usize, max_degree: usize, connected: bool) -> Result<Vec<Vec<Graph>>> {
    if n_max > MAX_ENUM_N {
        return Err(Error::SizeLimit {
            what: "vertices for graph enumeration",
            size: n_max,
            limit: MAX_ENUM_N,
        });
    }
    let mut levels: Vec<Vec<Graph>> = Vec::new();
    if n_max == 0 {
        return Ok(levels);
    }
    levels.push(vec![Graph::empty(1)]);
    for n in 2..=n_max {
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for parent in &levels[n - 2] {
            let open: Vec<usize> = (0..n - 1)
                .filter(|&v| parent.degree(v) < max_degree)
                .collect();
            for subset in subsets_up_to(&open, max_degree) {
                if connected && subset.is_empty() {
                    continue;
                }
                let mut edges: Vec<(usize, usize)> = parent.edges().collect();
                edges.extend(subset.iter().map(|&u| (u, n - 1)));
                let g = Graph::from_edges(n, &edges)?;
                let (cert, perm) = canonical_labeling(&g)?;
                if seen.insert(cert) {
                    next.push(relabel(&g, &perm)?);
                }
            }
        }
        levels.push(next);
    }
    Ok(levels)
}

fn subsets_up_to(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &x in items {
        let extended: Vec<Vec<usize>> = out
            .iter()
            .filter(|s| s.len() < k)
            .map(|s| {
                let mut t = s.clone();
                t.push(x);
                t
            })
            .collect();
        out.extend(extended);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn certificate_is_relabelling_invariant() {
        let p4a = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let p4b = Graph::from_edges(4, &[(2, 0), (0, 3), (3, 1)]).unwrap();
        let star = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(certificate(&p4a).unwrap(), certificate(&p4b).unwrap());
        assert_ne!(certificate(&p4a).unwrap(), certificate(&star).unwrap());
    }

    #[test]
    fn regular_graphs_are_distinguished() {
        // C6 and two disjoint triangles are both 2-regular on 6 vertices.
        let c6 = cycle(6);
        let two_k3 =
            Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        assert_ne!(certificate(&c6).unwrap(), certificate(&two_k3).unwrap());
        let c6_shuffled =
            Graph::from_edges(6, &[(0, 3), (3, 5), (5, 1), (1, 4), (4, 2), (2, 0)]).unwrap();
        assert_eq!(
            certificate(&c6).unwrap(),
            certificate(&c6_shuffled).unwrap()
        );
    }

    #[test]
    fn known_connected_graph_counts() {
        // Connected graphs on n unlabelled vertices: 1, 1, 2, 6, 21, 112.
        let levels = graphs_up_to(6, 5, true).unwrap();
        let counts: Vec<usize> = levels.iter().map(Vec::len).collect();
        assert_eq!(counts, vec![1, 1, 2, 6, 21, 112]);
    }

    #[test]
    fn known_graph_counts() {
        // All graphs on n unlabelled vertices: 1, 2, 4, 11, 34, 156.
        let levels = graphs_up_to(6, 5, false).unwrap();
        let counts: Vec<usize> = levels.iter().map(Vec::len).collect();
        assert_eq!(counts, vec![1, 2, 4, 11, 34, 156]);
    }

    #[test]
    fn degree_cap_is_respected() {
        for g in graphs(7, 3, true).unwrap() {
            assert!(g.max_degree() <= 3);
            assert!(g.is_connected());
        }
        // Connected graphs with max degree 2 are paths and cycles.
        assert_eq!(graphs(7, 2, true).unwrap().len(), 2);
    }

    #[test]
    fn enumeration_guard() {
        assert!(matches!(graphs(11, 3, true), Err(Error::SizeLimit { .. })));
    }
}
