//! Minimum-weight matching used to deduce pairings from inferred angles.
//!
//! Perfect matchings do not exist on odd-sized devices, so the objective is
//! generalized: among all maximum-cardinality matchings, pick one of minimum
//! total weight. Ties are broken towards the lexicographically smallest sorted
//! pair list.

pub mod blossom;
pub mod cardinality;

use thiserror::Error;

use crate::topology::{CouplingGraph, Matching, Pair};

#[derive(Debug, Error, PartialEq)]
pub enum MatchingError {
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weight of edge ({a},{b}) is {weight}; weights must be finite and non-negative")]
    BadWeight { a: usize, b: usize, weight: f64 },
    #[error("expected {expected} angles, got {got}")]
    AngleCount { expected: usize, got: usize },
}

/// Coupling graph with a non-negative weight on every edge (edge-list order).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    base: CouplingGraph,
    weights: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(base: CouplingGraph, weights: Vec<f64>) -> Result<Self, MatchingError> {
        if weights.len() != base.edges().len() {
            return Err(MatchingError::WeightCount {
                expected: base.edges().len(),
                got: weights.len(),
            });
        }
        for (e, &w) in base.edges().iter().zip(&weights) {
            if !w.is_finite() || w < 0.0 {
                return Err(MatchingError::BadWeight {
                    a: e.a,
                    b: e.b,
                    weight: w,
                });
            }
        }
        Ok(WeightedGraph { base, weights })
    }

    pub fn base(&self) -> &CouplingGraph {
        &self.base
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        let p = crate::topology::ordered(a, b);
        self.base
            .edges()
            .iter()
            .position(|e| e.pair() == p)
            .map(|i| self.weights[i])
    }

    /// Sum of the weights of `matching`'s pairs, in sorted pair order.
    pub fn total_weight(&self, matching: &Matching) -> f64 {
        matching
            .pairs()
            .iter()
            .map(|&(a, b)| self.weight(a, b).expect("pair is an edge"))
            .sum()
    }
}

/// Weights each edge `(j, k)` by `|theta_j - theta_k|`.
pub fn weights_from_angles(
    graph: &CouplingGraph,
    theta: &[f64],
) -> Result<WeightedGraph, MatchingError> {
    if theta.len() != graph.num_qubits() {
        return Err(MatchingError::AngleCount {
            expected: graph.num_qubits(),
            got: theta.len(),
        });
    }
    let weights = graph
        .edges()
        .iter()
        .map(|e| (theta[e.a] - theta[e.b]).abs())
        .collect();
    WeightedGraph::new(graph.clone(), weights)
}

/// Weights are scaled by a power of two so the largest lands in
/// `(2^39, 2^40]`, then rounded to integers for the exact solver. Weights that
/// are small multiples of a common power of two keep their exact ratios.
const QUANT_BITS: i32 = 40;

fn quantize(weights: &[f64]) -> Vec<i64> {
    let max = weights.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return vec![0; weights.len()];
    }
    let unit = 2f64.powi(-(max.log2().ceil() as i32));
    let scale = 2f64.powi(QUANT_BITS);
    weights
        .iter()
        .map(|&w| (w * unit * scale).round() as i64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Optimum {
    cardinality: usize,
    weight: i64,
}

/// Maximum-cardinality minimum-weight matching over the listed edges.
fn solve(num_vertices: usize, edges: &[(usize, usize, i64)]) -> (Optimum, Vec<Pair>) {
    if edges.is_empty() {
        return (
            Optimum {
                cardinality: 0,
                weight: 0,
            },
            Vec::new(),
        );
    }
    let ceiling = edges.iter().map(|e| e.2).max().unwrap_or(0) + 1;
    let flipped: Vec<(usize, usize, i64)> =
        edges.iter().map(|&(a, b, w)| (a, b, ceiling - w)).collect();
    let mate = blossom::max_weight_matching(num_vertices, &flipped, true);
    let mut pairs = Vec::new();
    let mut weight = 0;
    for &(a, b, w) in edges {
        if mate[a] == Some(b) {
            pairs.push((a, b));
            weight += w;
        }
    }
    (
        Optimum {
            cardinality: pairs.len(),
            weight,
        },
        pairs,
    )
}

/// Among all maximum-cardinality matchings, returns one of minimum total
/// weight; ties go to the lexicographically smallest sorted pair list.
/// Totals that differ by less than about `2^-40` of the largest weight per
/// pair count as ties.
pub fn min_weight_matching(wg: &WeightedGraph) -> Matching {
    let graph = wg.base();
    let n = graph.num_qubits();
    let q = quantize(wg.weights());
    let mut ranked: Vec<(usize, usize, i64)> = graph
        .edges()
        .iter()
        .zip(&q)
        .map(|(e, &w)| (e.a, e.b, w))
        .collect();
    ranked.sort_unstable_by_key(|&(a, b, _)| (a, b));

    let (target, first) = solve(n, &ranked);
    // Each quantized weight carries up to half a unit of rounding, so
    // matchings whose real totals tie can differ by up to one unit per pair.
    let slack = target.cardinality as i64;
    let mut witness: Vec<Pair> = first;
    witness.sort_unstable();

    // Greedy over edges in lexicographic order: keep an edge whenever some
    // optimal matching contains it together with everything kept so far and
    // nothing rejected so far. `witness` is such a matching at every step.
    let mut used = vec![false; n];
    let mut kept: Vec<Pair> = Vec::with_capacity(target.cardinality);
    let mut kept_weight = 0i64;
    for (idx, &(a, b, w)) in ranked.iter().enumerate() {
        if kept.len() == target.cardinality {
            break;
        }
        if used[a] || used[b] {
            continue;
        }
        let accept = if witness.binary_search(&(a, b)).is_ok() {
            true
        } else {
            let residual: Vec<(usize, usize, i64)> = ranked[idx + 1..]
                .iter()
                .copied()
                .filter(|&(x, y, _)| !used[x] && !used[y] && x != a && x != b && y != a && y != b)
                .collect();
            let (rest, rest_pairs) = solve(n, &residual);
            let feasible = kept.len() + 1 + rest.cardinality == target.cardinality
                && kept_weight + w + rest.weight <= target.weight + slack;
            if feasible {
                witness = kept.clone();
                witness.push((a, b));
                witness.extend(rest_pairs);
                witness.sort_unstable();
            }
            feasible
        };
        if accept {
            used[a] = true;
            used[b] = true;
            kept.push((a, b));
            kept_weight += w;
        }
    }
    Matching::new(graph, kept).expect("solver output is a matching of the graph")
}
