//! Minimum cycle basis of a small undirected graph.
//!
//! Horton's construction: for every vertex v and edge (x, y), the candidate
//! cycle is shortest-path(v→x) + (x,y) + shortest-path(y→v). Candidates are
//! sorted by length (ties broken lexicographically by edge indices) and
//! filtered greedily for independence over GF(2), which yields a minimum
//! cycle basis of E − V + 1 elements. Shortest paths come from BFS with
//! neighbors visited in index order, so the result is deterministic.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CycleBasisError {
    #[error("graph is disconnected; a cycle basis needs a connected graph")]
    Disconnected,
}

/// Edge-index bitset with deterministic lowest-bit pivoting.
#[derive(Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] ^= 1 << (i % 64);
    }
    fn xor(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }
    fn lowest(&self) -> Option<usize> {
        for (w, &word) in self.0.iter().enumerate() {
            if word != 0 {
                return Some(w * 64 + word.trailing_zeros() as usize);
            }
        }
        None
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn ones(&self, total: usize) -> Vec<usize> {
        (0..total).filter(|&i| self.get(i)).collect()
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Computes a minimum cycle basis. `edges` are undirected vertex pairs;
/// returns E − V + 1 cycles, each as a sorted list of edge indices.
pub fn minimum_cycle_basis(
    num_vertices: usize,
    edges: &[(usize, usize)],
) -> Result<Vec<Vec<usize>>, CycleBasisError> {
    let nv = num_vertices;
    let ne = edges.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv]; // (neighbor, edge)
    for (e, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
    }

    // Connectivity check via BFS from vertex 0.
    if nv > 0 {
        let mut seen = vec![false; nv];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        if count != nv {
            return Err(CycleBasisError::Disconnected);
        }
    }

    let dim = ne + 1 - nv; // cycle-space dimension of a connected graph
    if dim == 0 {
        return Ok(Vec::new());
    }

    // BFS trees from every root: parent edge and depth per vertex.
    let mut candidates: Vec<(usize, Vec<usize>, Bits)> = Vec::new(); // (weight, sorted edges, bits)
    for root in 0..nv {
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; nv]; // (parent vertex, edge)
        let mut depth = vec![usize::MAX; nv];
        depth[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(u, e) in &adj[v] {
                if depth[u] == usize::MAX {
                    depth[u] = depth[v] + 1;
                    parent[u] = Some((v, e));
                    queue.push_back(u);
                }
            }
        }
        let path_vertices = |mut v: usize| -> Vec<usize> {
            let mut p = vec![v];
            while let Some((pv, _)) = parent[v] {
                p.push(pv);
                v = pv;
            }
            p
        };
        for (e, &(x, y)) in edges.iter().enumerate() {
            if depth[x] == usize::MAX || depth[y] == usize::MAX {
                continue;
            }
            // Horton validity: the two root paths must share only the root,
            // otherwise the xor is not a single simple cycle.
            let px = path_vertices(x);
            let py = path_vertices(y);
            if px.contains(&y) || py.contains(&x) {
                continue; // tree edge or nested paths
            }
            let mut shared = 0;
            for v in &px {
                if py.contains(v) {
                    shared += 1;
                }
            }
            if shared != 1 {
                continue;
            }
            let mut bits = Bits::new(ne);
            bits.set(e);
            let mut v = x;
            while let Some((pv, pe)) = parent[v] {
                bits.set(pe);
                v = pv;
            }
            let mut v = y;
            while let Some((pv, pe)) = parent[v] {
                bits.set(pe);
                v = pv;
            }
            let weight = bits.count();
            if weight >= 3 {
                candidates.push((weight, bits.ones(ne), bits));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    candidates.dedup_by(|a, b| a.2 == b.2);

    // Greedy GF(2) independence filter.
    let mut basis: Vec<(usize, Bits)> = Vec::new(); // (pivot, reduced form)
    let mut chosen: Vec<Vec<usize>> = Vec::new();
    for (_, edges_sorted, bits) in candidates {
        let mut reduced = bits.clone();
        for (pivot, vec) in &basis {
            if reduced.get(*pivot) {
                reduced.xor(vec);
            }
        }
        if let Some(pivot) = reduced.lowest() {
            basis.push((pivot, reduced));
            chosen.push(edges_sorted);
            if chosen.len() == dim {
                break;
            }
        }
    }
    debug_assert_eq!(chosen.len(), dim, "Horton candidates must span the cycle space");
    Ok(chosen)
}

/// Symmetric (GF(2)) sum of edge-index cycles, as a sorted edge list.
pub fn symmetric_sum(cycles: &[Vec<usize>]) -> Vec<usize> {
    let mut count: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for cycle in cycles {
        for &e in cycle {
            *count.entry(e).or_insert(0) += 1;
        }
    }
    count
        .into_iter()
        .filter_map(|(e, c)| (c % 2 == 1).then_some(e))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_single_cycle() {
        let cycles = minimum_cycle_basis(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].len(), 3);
    }

    #[test]
    fn k4_three_triangles() {
        let edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let cycles = minimum_cycle_basis(4, &edges).unwrap();
        assert_eq!(cycles.len(), 3);
        for c in &cycles {
            assert_eq!(c.len(), 3, "K4 minimum cycles are triangles");
        }
    }

    #[test]
    fn cube_graph_five_squares_plus_symmetric_sum() {
        // Vertices are 3-bit strings; edges connect Hamming-1 pairs.
        let mut edges = Vec::new();
        for v in 0..8u32 {
            for bit in 0..3 {
                let u = v ^ (1 << bit);
                if v < u {
                    edges.push((v as usize, u as usize));
                }
            }
        }
        assert_eq!(edges.len(), 12);
        let cycles = minimum_cycle_basis(8, &edges).unwrap();
        assert_eq!(cycles.len(), 5);
        for c in &cycles {
            assert_eq!(c.len(), 4, "cube faces are 4-cycles");
        }
        // The symmetric sum closes the sixth face.
        let extra = symmetric_sum(&cycles);
        assert_eq!(extra.len(), 4);
    }

    #[test]
    fn tree_has_empty_basis() {
        let cycles = minimum_cycle_basis(4, &[(0, 1), (1, 2), (1, 3)]).unwrap();
        assert!(cycles.is_empty());
    }

    #[test]
    fn disconnected_graph_rejected() {
        assert!(minimum_cycle_basis(4, &[(0, 1), (2, 3)]).is_err());
    }

    #[test]
    fn basis_cycles_have_even_degree_everywhere() {
        // Petersen graph: 15 edges, 10 vertices, cycle space dim 6,
        // all minimum cycles length 5.
        let outer = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)];
        let spokes = [(0, 5), (1, 6), (2, 7), (3, 8), (4, 9)];
        let inner = [(5, 7), (7, 9), (9, 6), (6, 8), (8, 5)];
        let edges: Vec<_> = outer
            .iter()
            .chain(&spokes)
            .chain(&inner)
            .copied()
            .collect();
        let cycles = minimum_cycle_basis(10, &edges).unwrap();
        assert_eq!(cycles.len(), 6);
        for c in &cycles {
            assert_eq!(c.len(), 5, "Petersen girth is 5");
            let mut deg = vec![0; 10];
            for &e in c {
                deg[edges[e].0] += 1;
                deg[edges[e].1] += 1;
            }
            assert!(deg.iter().all(|&d| d % 2 == 0));
        }
    }
}
