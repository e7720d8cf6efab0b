//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use qbench_core::topology::{CouplingGraph, Pair};
use rand::Rng;

/// Best matching by exhaustive enumeration: maximum cardinality, then
/// minimum total weight, then lexicographically smallest sorted pair list.
/// Weights are looked up per edge index; totals within `tol` count as ties.
pub fn brute_force_matching(graph: &CouplingGraph, weights: &[f64], tol: f64) -> (Vec<Pair>, f64) {
    let n = graph.num_qubits();
    let mut w = vec![vec![None; n]; n];
    for (e, &x) in graph.edges().iter().zip(weights) {
        w[e.a][e.b] = Some(x);
        w[e.b][e.a] = Some(x);
    }
    let mut best: Option<(Vec<Pair>, f64)> = None;
    let mut used = vec![false; n];
    let mut current = Vec::new();
    enumerate(0, &w, tol, &mut used, &mut current, &mut best);
    best.expect("the empty matching always exists")
}

fn enumerate(
    start: usize,
    w: &[Vec<Option<f64>>],
    tol: f64,
    used: &mut [bool],
    current: &mut Vec<Pair>,
    best: &mut Option<(Vec<Pair>, f64)>,
) {
    let n = w.len();
    let Some(v) = (start..n).find(|&v| !used[v]) else {
        let total: f64 = current.iter().map(|&(a, b)| w[a][b].unwrap()).sum();
        let better = match best {
            None => true,
            Some((bp, bw)) => {
                current.len() > bp.len()
                    || (current.len() == bp.len()
                        && (total < *bw - tol
                            || ((total - *bw).abs() <= tol && current[..] < bp[..])))
            }
        };
        if better {
            *best = Some((current.clone(), total));
        }
        return;
    };
    used[v] = true;
    for u in v + 1..n {
        if !used[u] && w[v][u].is_some() {
            used[u] = true;
            current.push((v, u));
            enumerate(v + 1, w, tol, used, current, best);
            current.pop();
            used[u] = false;
        }
    }
    // leave v unpaired
    enumerate(v + 1, w, tol, used, current, best);
    used[v] = false;
}

/// Random simple graph with `n` nodes and edge probability `density`.
pub fn random_graph<R: Rng>(n: usize, density: f64, rng: &mut R) -> CouplingGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(density) {
                edges.push((a, b));
            }
        }
    }
    CouplingGraph::new(format!("random_{n}"), n, &edges).unwrap()
}
