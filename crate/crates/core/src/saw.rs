//! Self-avoiding-walk trees.
//!
//! Tree vertices are self-avoiding walks from the root vertex u. The children
//! of a walk ending at v are its one-step extensions; a neighbour w of v that
//! already lies on the walk (other than v's predecessor) closes a cycle, and
//! contributes a pinned leaf copy of w instead. The copy is pinned occupied
//! when the closing edge {v, w} is larger than the edge by which the walk
//! left w, and unoccupied otherwise, comparing edges as sorted endpoint
//! pairs. With these pins the root marginal of the tree equals the marginal
//! of u in G.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{influence_matrix, MAX_PINNING_SCAN_VERTICES};
use crate::graph::{apply_pinning, Graph, Pinning};
use crate::tree::{root_influence_sum, RootedTree};

/// Node-count guard for SAW trees.
pub const MAX_SAW_NODES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SawTree {
    pub tree: RootedTree,
    /// Pins on the cycle-closing leaf copies, in tree coordinates.
    pub leaf_pins: Pinning,
    /// Graph vertex represented by each tree vertex.
    pub origin: Vec<usize>,
}

impl SawTree {
    /// The hardcore model on the tree conditioned on its leaf pins, as an
    /// unconditioned model on the root's component. Vertex 0 is the root.
    pub fn pinned_component(&self) -> Result<RootedTree> {
        let g = self.tree.to_graph();
        let reduced = apply_pinning(&g, &self.leaf_pins)?;
        let root = reduced
            .vertex_with_label(self.tree.root())
            .ok_or_else(|| Error::Invariant("SAW-tree root removed by pinning".into()))?;
        let comp = reduced
            .components()
            .into_iter()
            .find(|c| c.contains(&root))
            .expect("root lies in some component");
        let sub = reduced.induced_subgraph(&comp)?;
        let new_root = comp.binary_search(&root).expect("root in component");
        RootedTree::from_graph(&sub, new_root)
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// T_SAW(G, u), restricted to the component of u.
pub fn build_saw_tree(g: &Graph, u: usize) -> Result<SawTree> {
    if u >= g.n() {
        return Err(Error::VertexOutOfRange {
            vertex: u,
            n: g.n(),
            line: None,
        });
    }
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut origin = vec![u];
    let mut pins: Vec<(usize, bool)> = Vec::new();
    // Depth-first over walks; `walk` holds the current walk's vertices and
    // `position[v]` the index of v on it.
    let mut position = vec![usize::MAX; g.n()];
    let mut walk = vec![u];
    position[u] = 0;
    // (tree node, next neighbour index to try)
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    while let Some(top) = stack.last_mut() {
        let (node, next) = *top;
        let v = *walk.last().unwrap();
        let nbrs = g.neighbors(v);
        if next == nbrs.len() {
            stack.pop();
            walk.pop();
            position[v] = usize::MAX;
            continue;
        }
        top.1 += 1;
        let w = nbrs[next];
        let depth = walk.len() - 1;
        if depth > 0 && w == walk[depth - 1] {
            continue;
        }
        if parent.len() >= MAX_SAW_NODES {
            return Err(Error::SizeLimit {
                what: "SAW tree nodes",
                size: parent.len() + 1,
                limit: MAX_SAW_NODES,
            });
        }
        let child = parent.len();
        parent.push(Some(node));
        origin.push(w);
        match position[w] {
            usize::MAX => {
                position[w] = walk.len();
                walk.push(w);
                stack.push((child, 0));
            }
            at => {
                let leaving = edge_key(w, walk[at + 1]);
                let closing = edge_key(v, w);
                pins.push((child, closing > leaving));
            }
        }
    }
    let tree = RootedTree::from_parents(parent)?;
    let leaf_pins = Pinning::new(&tree.to_graph(), pins)?;
    Ok(SawTree {
        tree,
        leaf_pins,
        origin,
    })
}

/// Both sides of the SAW-tree influence domination inequality for one root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SawReport {
    /// Σ_{v ∈ V(G)} |Ψ_G(u, v)|.
    pub graph_row_sum: f64,
    /// Σ_{v ∈ V(T)} |Ψ_T(r, v)| on the pinned SAW tree.
    pub tree_sum: f64,
    pub dominated: bool,
}

/// Slack allowed when declaring domination.
pub const DOMINATION_TOL: f64 = 1e-9;

pub fn verify_saw_domination(g: &Graph, lambda: f64, u: usize) -> Result<SawReport> {
    if g.n() > MAX_PINNING_SCAN_VERTICES {
        return Err(Error::SizeLimit {
            what: "vertices for SAW verification",
            size: g.n(),
            limit: MAX_PINNING_SCAN_VERTICES,
        });
    }
    let psi = influence_matrix(g, lambda, None)?;
    let row = psi
        .index_of(u)
        .ok_or_else(|| Error::Invariant(format!("vertex {u} not free")))?;
    let graph_row_sum = psi.row_abs_sum(row);
    let saw = build_saw_tree(g, u)?;
    let tree_sum = root_influence_sum(&saw.pinned_component()?, lambda)?.phi;
    Ok(SawReport {
        graph_row_sum,
        tree_sum,
        dominated: tree_sum >= graph_row_sum - DOMINATION_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::marginal;
    use crate::tree::tree_marginals;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, edges).unwrap()
    }

    #[test]
    fn tree_input_gives_rerooted_copy() {
        let g = graph(4, &[(0, 1), (1, 2), (1, 3)]);
        let saw = build_saw_tree(&g, 2).unwrap();
        assert_eq!(saw.tree.n(), 4);
        assert!(saw.leaf_pins.is_empty());
        assert_eq!(saw.origin[0], 2);
        let mut origins = saw.origin.clone();
        origins.sort_unstable();
        assert_eq!(origins, vec![0, 1, 2, 3]);
    }

    #[test]
    fn triangle_has_two_pinned_leaves() {
        let k3 = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let saw = build_saw_tree(&k3, 0).unwrap();
        // 0, 0-1, 0-1-2, 0-1-2-(0), and the mirror branch.
        assert_eq!(saw.tree.n(), 7);
        assert_eq!(saw.tree.children(0).len(), 2);
        assert_eq!(saw.leaf_pins.len(), 2);
        for (leaf, _) in saw.leaf_pins.iter() {
            assert_eq!(saw.origin[leaf], 0);
            assert!(saw.tree.children(leaf).is_empty());
        }
        // Walk 0-1-2-0 closes with {0,2} after leaving by {0,1}: occupied.
        // Walk 0-2-1-0 closes with {0,1} after leaving by {0,2}: unoccupied.
        let mut pins: Vec<(Vec<usize>, bool)> = saw
            .leaf_pins
            .iter()
            .map(|(leaf, b)| {
                let mut path = vec![saw.origin[leaf]];
                let mut x = leaf;
                while let Some(p) = saw.tree.parent(x) {
                    path.push(saw.origin[p]);
                    x = p;
                }
                path.reverse();
                (path, b)
            })
            .collect();
        pins.sort();
        assert_eq!(
            pins,
            vec![(vec![0, 1, 2, 0], true), (vec![0, 2, 1, 0], false)]
        );
    }

    #[test]
    fn four_cycle_branches() {
        let c4 = graph(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let saw = build_saw_tree(&c4, 0).unwrap();
        // Two walks of length 3 around the cycle, each closed by a pinned copy of 0.
        assert_eq!(saw.tree.n(), 1 + 2 * 4);
        assert_eq!(saw.leaf_pins.len(), 2);
        assert_eq!(saw.tree.levels().len(), 5);
    }

    #[test]
    fn root_marginal_matches_graph() {
        let graphs = [
            graph(3, &[(0, 1), (1, 2), (0, 2)]),
            graph(4, &[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]),
            graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]),
        ];
        for g in &graphs {
            for u in 0..g.n() {
                for lambda in [0.5, 1.0, 4.0] {
                    let saw = build_saw_tree(g, u).unwrap();
                    let t = saw.pinned_component().unwrap();
                    let p_tree = tree_marginals(&t, lambda).unwrap().p[t.root()];
                    let p_graph = marginal(g, lambda, u, None).unwrap();
                    assert!((p_tree - p_graph).abs() < 1e-12, "{p_tree} vs {p_graph}");
                }
            }
        }
    }

    #[test]
    fn domination_examples() {
        let k3 = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let r = verify_saw_domination(&k3, 1.0, 0).unwrap();
        assert!((r.graph_row_sum - 5.0 / 3.0).abs() < 1e-14);
        assert!(r.dominated && r.tree_sum >= 5.0 / 3.0);

        let path = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let r = verify_saw_domination(&path, 2.0, 1).unwrap();
        assert!((r.graph_row_sum - r.tree_sum).abs() < 1e-12);
    }
}
