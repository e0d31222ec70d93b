//! Fill-reducing ordering for symmetric sparsity patterns.

use super::CscMatrix;
use crate::Scalar;

/// Minimum-degree ordering of the symmetric pattern of `m`.
///
/// Runs on the explicit elimination graph. Nodes whose initial degree
/// exceeds `max(16, 10·√n)` are treated as dense: they are removed from the
/// graph up front and ordered last. Ties go to the lowest index, so the
/// ordering is deterministic for a given pattern.
///
/// Returns `perm` with `perm[k]` = original index eliminated at step `k`.
pub fn minimum_degree<T: Scalar>(m: &CscMatrix<T>) -> Vec<usize> {
    let n = m.ncols();
    let mut adj: Vec<Vec<usize>> = (0..n)
        .map(|j| m.col(j).0.iter().copied().filter(|&i| i != j).collect())
        .collect();
    // Patterns from form_normal_matrix are symmetric already; symmetrize anyway.
    for j in 0..n {
        for &i in m.col(j).0 {
            if i != j && adj[i].binary_search(&j).is_err() {
                let pos = adj[i].binary_search(&j).unwrap_err();
                adj[i].insert(pos, j);
            }
        }
    }

    let dense_limit = 16usize.max((10.0 * (n as f64).sqrt()) as usize);
    let dense: Vec<bool> = adj.iter().map(|a| a.len() > dense_limit).collect();
    if dense.iter().any(|&d| d) {
        for list in adj.iter_mut() {
            list.retain(|&k| !dense[k]);
        }
    }

    let mut alive: Vec<bool> = dense.iter().map(|&d| !d).collect();
    let mut remaining = alive.iter().filter(|&&a| a).count();
    let mut perm = Vec::with_capacity(n);
    let mut merged: Vec<usize> = Vec::new();

    while remaining > 0 {
        let mut best = usize::MAX;
        let mut best_deg = usize::MAX;
        for (v, list) in adj.iter().enumerate() {
            if alive[v] && list.len() < best_deg {
                best = v;
                best_deg = list.len();
            }
        }
        let p = best;
        alive[p] = false;
        remaining -= 1;
        perm.push(p);

        let clique = std::mem::take(&mut adj[p]);
        for &u in &clique {
            // adj[u] ← (adj[u] ∪ clique) \ {u, p}
            merged.clear();
            let (a, b) = (&adj[u], &clique);
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let next = match (a.get(i), b.get(j)) {
                    (Some(&x), Some(&y)) if x < y => {
                        i += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x > y => {
                        j += 1;
                        y
                    }
                    (Some(&x), Some(_)) => {
                        i += 1;
                        j += 1;
                        x
                    }
                    (Some(&x), None) => {
                        i += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        j += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != u && next != p {
                    merged.push(next);
                }
            }
            adj[u].clear();
            adj[u].extend_from_slice(&merged);
        }
    }
    perm.extend((0..n).filter(|&v| dense[v]));
    perm
}

/// Inverse of a permutation.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_permutation(p: &[usize]) -> bool {
        let mut seen = vec![false; p.len()];
        p.iter().all(|&i| i < p.len() && !std::mem::replace(&mut seen[i], true))
    }

    #[test]
    fn arrow_matrix_eliminates_leaves_first() {
        // node 0 couples to everything; minimum degree must order it last
        let n = 6;
        let mut t = vec![(0, 0, 10.0)];
        for i in 1..n {
            t.push((i, i, 2.0));
            t.push((0, i, 1.0));
            t.push((i, 0, 1.0));
        }
        let m = CscMatrix::<f64>::from_triplets(n, n, &t).unwrap();
        let perm = minimum_degree(&m);
        assert!(is_permutation(&perm));
        // once the leaves are gone the hub ties with the last leaf
        let hub = perm.iter().position(|&v| v == 0).unwrap();
        assert!(hub >= n - 2);
    }

    #[test]
    fn dense_pattern_keeps_identity_order() {
        let n = 40;
        let data = vec![1.0; n * n];
        let m = CscMatrix::<f64>::from_dense(n, n, &data).unwrap();
        let perm = minimum_degree(&m);
        assert_eq!(perm, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn inverse_round_trip() {
        let perm = vec![2, 0, 3, 1];
        let inv = invert_permutation(&perm);
        for (k, &p) in perm.iter().enumerate() {
            assert_eq!(inv[p], k);
        }
    }
}
