use std::collections::BTreeSet;

use crate::sparse::SparseSymMatrix;

/// Greedy minimum-degree fill-reducing ordering on the symmetric pattern.
///
/// Eliminates the node of smallest current degree (ties broken by index) and
/// connects its neighbors into a clique. Returns `perm` with
/// `perm[new] = old`. Degrees are tracked exactly on the elimination graph,
/// which is affordable at the problem sizes this library targets.
pub fn min_degree_order(a: &SparseSymMatrix) -> Vec<usize> {
    let n = a.n();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for i in 0..n {
        let (cols, _) = a.row(i);
        for &j in cols {
            if j != i {
                adj[i].insert(j);
            }
        }
    }
    let mut alive = vec![true; n];
    let mut perm = Vec::with_capacity(n);
    // simple bucketed degree selection
    for _ in 0..n {
        let mut best = usize::MAX;
        let mut best_deg = usize::MAX;
        for v in 0..n {
            if alive[v] && adj[v].len() < best_deg {
                best_deg = adj[v].len();
                best = v;
            }
        }
        let v = best;
        alive[v] = false;
        perm.push(v);
        let neighbors: Vec<usize> = adj[v].iter().copied().collect();
        for &u in &neighbors {
            adj[u].remove(&v);
        }
        for (idx, &u) in neighbors.iter().enumerate() {
            for &w in &neighbors[idx + 1..] {
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
        adj[v].clear();
    }
    perm
}
