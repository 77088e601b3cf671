//! Hopcroft-Karp maximum bipartite matching with a Hall-violation
//! certificate for the uncovered case.

use std::collections::VecDeque;

/// Maximum matching between `left` (0..n_left) and `right` (0..n_right)
/// vertices of a bipartite graph given as left adjacency lists.
#[derive(Clone, Debug)]
pub struct BipartiteMatching {
    /// Matched right vertex per left vertex.
    pub left_match: Vec<Option<usize>>,
    /// Matched left vertex per right vertex.
    pub right_match: Vec<Option<usize>>,
    pub size: usize,
}

const UNSEEN: usize = usize::MAX;

/// Hopcroft-Karp in O(E sqrt(V)).
pub fn hopcroft_karp(n_left: usize, n_right: usize, adj: &[Vec<usize>]) -> BipartiteMatching {
    assert_eq!(adj.len(), n_left);
    let mut left_match = vec![None; n_left];
    let mut right_match = vec![None; n_right];
    let mut dist = vec![UNSEEN; n_left];
    let mut queue = VecDeque::new();

    loop {
        // BFS layer labelling from unmatched left vertices.
        queue.clear();
        for u in 0..n_left {
            if left_match[u].is_none() {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = UNSEEN;
            }
        }
        let mut found_free = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                match right_match[v] {
                    None => found_free = true,
                    Some(u2) if dist[u2] == UNSEEN => {
                        dist[u2] = dist[u] + 1;
                        queue.push_back(u2);
                    }
                    _ => {}
                }
            }
        }
        if !found_free {
            break;
        }
        // DFS along layered augmenting paths.
        for u in 0..n_left {
            if left_match[u].is_none() {
                augment(u, adj, &mut left_match, &mut right_match, &mut dist);
            }
        }
    }

    let size = left_match.iter().filter(|m| m.is_some()).count();
    BipartiteMatching {
        left_match,
        right_match,
        size,
    }
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    left_match: &mut [Option<usize>],
    right_match: &mut [Option<usize>],
    dist: &mut [usize],
) -> bool {
    let d = std::mem::replace(&mut dist[u], UNSEEN);
    for &v in &adj[u] {
        let extend = match right_match[v] {
            None => true,
            Some(u2) => dist[u2] == d + 1 && augment(u2, adj, left_match, right_match, dist),
        };
        if extend {
            left_match[u] = Some(v);
            right_match[v] = Some(u);
            return true;
        }
    }
    false
}

/// König-style certificate: when the matching does not cover the left side,
/// returns a left subset S with |N(S)| < |S| (vertices reachable from some
/// unmatched left vertex by alternating paths). Returns None when covered.
pub fn hall_witness(adj: &[Vec<usize>], matching: &BipartiteMatching) -> Option<Vec<usize>> {
    let n_left = adj.len();
    if matching.size == n_left {
        return None;
    }
    let mut visited = vec![false; n_left];
    let mut queue: VecDeque<usize> = (0..n_left)
        .filter(|&u| matching.left_match[u].is_none())
        .collect();
    for &u in &queue {
        visited[u] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            // v must be matched here, otherwise an augmenting path existed.
            if let Some(u2) = matching.right_match[v] {
                if !visited[u2] {
                    visited[u2] = true;
                    queue.push_back(u2);
                }
            }
        }
    }
    Some((0..n_left).filter(|&u| visited[u]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive maximum matching by backtracking over injective assignments.
    fn brute_force_matching(n_left: usize, adj: &[Vec<usize>], n_right: usize) -> usize {
        fn rec(u: usize, adj: &[Vec<usize>], used: &mut [bool]) -> usize {
            if u == adj.len() {
                return 0;
            }
            let mut best = rec(u + 1, adj, used); // leave u unmatched
            for &v in &adj[u] {
                if !used[v] {
                    used[v] = true;
                    best = best.max(1 + rec(u + 1, adj, used));
                    used[v] = false;
                }
            }
            best
        }
        let mut used = vec![false; n_right];
        rec(0, adj, &mut used).min(n_left)
    }

    fn neighborhood_size(adj: &[Vec<usize>], subset: &[usize]) -> usize {
        let mut seen = std::collections::BTreeSet::new();
        for &u in subset {
            seen.extend(adj[u].iter().copied());
        }
        seen.len()
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let n_left = rng.random_range(1..=7);
            let n_right = rng.random_range(1..=9);
            let adj: Vec<Vec<usize>> = (0..n_left)
                .map(|_| {
                    (0..n_right)
                        .filter(|_| rng.random_bool(0.35))
                        .collect::<Vec<_>>()
                })
                .collect();
            let m = hopcroft_karp(n_left, n_right, &adj);
            assert_eq!(m.size, brute_force_matching(n_left, &adj, n_right));
            if let Some(witness) = hall_witness(&adj, &m) {
                assert!(neighborhood_size(&adj, &witness) < witness.len());
            } else {
                assert_eq!(m.size, n_left);
            }
        }
    }

    #[test]
    fn perfect_matching_has_no_witness() {
        let adj = vec![vec![0, 1], vec![1, 2], vec![0, 2]];
        let m = hopcroft_karp(3, 3, &adj);
        assert_eq!(m.size, 3);
        assert!(hall_witness(&adj, &m).is_none());
    }

    #[test]
    fn empty_adjacency_yields_full_witness() {
        let adj = vec![Vec::new(), Vec::new()];
        let m = hopcroft_karp(2, 4, &adj);
        assert_eq!(m.size, 0);
        assert_eq!(hall_witness(&adj, &m).unwrap(), vec![0, 1]);
    }
}
