//! Immutable sparse undirected graphs in CSR form.

use crate::error::{Error, Result};

/// Undirected graph stored as CSR neighbor lists.
///
/// Both directions of every edge are stored, neighbor lists are sorted
/// ascending, and the structure never contains self-loops or duplicates.
/// Immutable after construction, so it is safe to share across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    m: usize,
}

impl Graph {
    /// Build a graph from an arbitrary edge list.
    ///
    /// Self-loops are dropped, duplicates merged, and the edge set is
    /// symmetrized, so any input that respects the index range produces a
    /// valid graph.
    pub fn from_edges(edges: &[(usize, usize)], n: usize) -> Result<Graph> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n {
                return Err(Error::IndexOutOfRange { index: u, n });
            }
            if v >= n {
                return Err(Error::IndexOutOfRange { index: v, n });
            }
            if u == v {
                continue;
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for list in adjacency.iter_mut() {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        debug_assert_eq!(neighbors.len() % 2, 0);
        let m = neighbors.len() / 2;
        Ok(Graph {
            n,
            offsets,
            neighbors,
            m,
        })
    }

    /// Number of nodes.
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.m
    }

    /// Degree of node `i`.
    pub fn degree(&self, i: usize) -> Result<usize> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        Ok(self.offsets[i + 1] - self.offsets[i])
    }

    /// Sorted neighbor list of node `i`. Panics if `i` is out of range.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Iterator over all undirected edges `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| u < v)
                .map(move |&v| (u, v))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_symmetrized() {
        let g = Graph::from_edges(&[(0, 1)], 2).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn self_loop_and_duplicate_cleanup() {
        let g = Graph::from_edges(&[(0, 0), (0, 1), (1, 0)], 2).unwrap();
        let reference = Graph::from_edges(&[(0, 1)], 2).unwrap();
        assert_eq!(g, reference);
    }

    #[test]
    fn triangle_degrees() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 0)], 3).unwrap();
        for i in 0..3 {
            assert_eq!(g.degree(i).unwrap(), 2);
        }
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn isolated_node_degree_zero() {
        let g = Graph::from_edges(&[(0, 1)], 3).unwrap();
        assert_eq!(g.degree(2).unwrap(), 0);
    }

    #[test]
    fn path_middle_degree() {
        let g = Graph::from_edges(&[(0, 1), (1, 2)], 3).unwrap();
        assert_eq!(g.degree(1).unwrap(), 2);
    }

    #[test]
    fn endpoint_out_of_range() {
        assert_eq!(
            Graph::from_edges(&[(0, 5)], 3).unwrap_err(),
            Error::IndexOutOfRange { index: 5, n: 3 }
        );
    }

    #[test]
    fn empty_graph_rejected() {
        assert_eq!(Graph::from_edges(&[], 0).unwrap_err(), Error::EmptyGraph);
    }

    #[test]
    fn degree_out_of_range() {
        let g = Graph::from_edges(&[(0, 1)], 2).unwrap();
        assert!(g.degree(2).is_err());
    }

    #[test]
    fn degree_sum_is_twice_edge_count() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], 4).unwrap();
        let sum: usize = (0..4).map(|i| g.degree(i).unwrap()).sum();
        assert_eq!(sum, 2 * g.edge_count());
    }

    #[test]
    fn rebuild_from_own_edges_is_identity() {
        let g = Graph::from_edges(&[(2, 1), (0, 3), (1, 0), (1, 0)], 4).unwrap();
        let edges: Vec<_> = g.edges().collect();
        let g2 = Graph::from_edges(&edges, 4).unwrap();
        assert_eq!(g, g2);
    }
}
