//! Partition of a graph without isolated vertices into cells of two or
//! three vertices, each of graph diameter at most 2.
//!
//! Works on a BFS spanning tree of each component: the deepest remaining
//! leaf is grouped with a sister leaf when it has one, otherwise with its
//! parent. Removing either pair leaves the rest of the tree connected.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// `adjacency[v]` lists the neighbours of `v`. Cells are returned sorted,
/// ordered by smallest member.
pub fn pair_2_or_3(adjacency: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    let k = adjacency.len();
    for (v, nb) in adjacency.iter().enumerate() {
        if let Some(&bad) = nb.iter().find(|&&u| u >= k) {
            return Err(Error::domain(format!(
                "vertex {v} lists unknown neighbour {bad}"
            )));
        }
        if nb.iter().all(|&u| u == v) {
            return Err(Error::domain(format!("vertex {v} is isolated")));
        }
    }

    const NONE: usize = usize::MAX;
    let mut parent = vec![NONE; k];
    let mut depth = vec![0u32; k];
    let mut seen = vec![false; k];
    let mut cells = Vec::new();

    for root in 0..k {
        if seen[root] {
            continue;
        }
        // BFS tree rooted at the smallest vertex of the component.
        let mut order = vec![root];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let mut nb = adjacency[u].clone();
            nb.sort_unstable();
            for w in nb {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = u;
                    depth[w] = depth[u] + 1;
                    order.push(w);
                    queue.push_back(w);
                }
            }
        }
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); k];
        for &w in &order[1..] {
            children[parent[w]].push(w);
        }
        let mut by_depth = order.clone();
        by_depth.sort_by_key(|&w| (std::cmp::Reverse(depth[w]), w));

        let mut removed = vec![false; k];
        let mut remaining = order.len();
        let mut cursor = 0;
        while remaining > 3 {
            while removed[by_depth[cursor]] {
                cursor += 1;
            }
            let x = by_depth[cursor];
            let z = parent[x];
            let sister = children[z]
                .iter()
                .copied()
                .filter(|&y| y != x && !removed[y])
                .min();
            let mate = sister.unwrap_or(z);
            removed[x] = true;
            removed[mate] = true;
            remaining -= 2;
            children[z].retain(|&y| y != x && y != mate);
            if mate == z && parent[z] != NONE {
                let gz = parent[z];
                children[gz].retain(|&y| y != z);
            }
            let mut cell = vec![x, mate];
            cell.sort_unstable();
            cells.push(cell);
        }
        let mut last: Vec<usize> = order.iter().copied().filter(|&w| !removed[w]).collect();
        last.sort_unstable();
        cells.push(last);
    }
    cells.sort_by_key(|c| c[0]);
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(k: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); k];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    #[test]
    fn triangle_is_one_cell() {
        assert_eq!(
            pair_2_or_3(&graph(3, &[(0, 1), (1, 2), (0, 2)])).unwrap(),
            vec![vec![0, 1, 2]]
        );
    }

    #[test]
    fn path_of_four() {
        let cells = pair_2_or_3(&graph(4, &[(0, 1), (1, 2), (2, 3)])).unwrap();
        assert_eq!(cells, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn star_pairs_two_leaves() {
        // centre 0, leaves 1, 2, 3
        let cells = pair_2_or_3(&graph(4, &[(0, 1), (0, 2), (0, 3)])).unwrap();
        assert_eq!(cells, vec![vec![0, 3], vec![1, 2]]);
    }

    #[test]
    fn isolated_vertex_is_rejected() {
        assert!(pair_2_or_3(&graph(3, &[(0, 1)])).is_err());
        assert!(pair_2_or_3(&graph(1, &[])).is_err());
    }

    #[test]
    fn two_components() {
        let cells = pair_2_or_3(&graph(5, &[(0, 4), (1, 2), (2, 3)])).unwrap();
        assert_eq!(cells, vec![vec![0, 4], vec![1, 2, 3]]);
    }
}
