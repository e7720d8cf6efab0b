//! Per-round figures of merit and mutual-information mitigation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::{min_weight_matching, weights_from_angles, MatchingError};
use crate::protocol::{infer_angles, EntanglingSlice};
use crate::simulator::PairJoint;
use crate::topology::{random_maximal_matching, CouplingGraph, Matching};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("slice has no pairs")]
    NoPairs,
    #[error("true matching has no pairs")]
    EmptyTrueMatching,
    #[error("expected {expected} per-qubit values, got {got}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Matching(#[from] MatchingError),
}

fn check_len(expected: usize, got: usize) -> Result<(), AnalysisError> {
    if expected == got {
        Ok(())
    } else {
        Err(AnalysisError::Length { expected, got })
    }
}

/// Mean within-pair discrepancy `sum |p_j - p_k| / n` over the slice's pairs.
pub fn compute_fuzz(slice: &EntanglingSlice, p: &[f64]) -> Result<f64, AnalysisError> {
    let pairs = slice.matching.pairs();
    if pairs.is_empty() {
        return Err(AnalysisError::NoPairs);
    }
    check_len(slice.matching.num_qubits(), p.len())?;
    let total: f64 = pairs.iter().map(|&(j, k)| (p[j] - p[k]).abs()).sum();
    Ok(total / pairs.len() as f64)
}

/// Fraction of the true pairs recovered by minimum-weight matching on `theta`.
pub fn compute_success(
    graph: &CouplingGraph,
    true_matching: &Matching,
    theta: &[f64],
) -> Result<f64, AnalysisError> {
    if true_matching.is_empty() {
        return Err(AnalysisError::EmptyTrueMatching);
    }
    let deduced = min_weight_matching(&weights_from_angles(graph, theta)?);
    Ok(success_fraction(true_matching, &deduced))
}

/// `|deduced ∩ truth| / |truth|`.
pub fn success_fraction(truth: &Matching, deduced: &Matching) -> f64 {
    truth.overlap(deduced) as f64 / truth.len() as f64
}

/// Mean absolute deviation of inferred angles from the slice's true angles,
/// each qubit of each pair counted once.
pub fn compute_diff(slice: &EntanglingSlice, theta: &[f64]) -> Result<f64, AnalysisError> {
    let pairs = slice.matching.pairs();
    if pairs.is_empty() {
        return Err(AnalysisError::NoPairs);
    }
    check_len(slice.matching.num_qubits(), theta.len())?;
    let total: f64 = pairs
        .iter()
        .zip(&slice.angles)
        .map(|(&(j, k), &t)| (theta[j] - t).abs() + (theta[k] - t).abs())
        .sum();
    Ok(total / (2 * pairs.len()) as f64)
}

/// Entropy in bits of a biased coin.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    h(p) + h(1.0 - p)
}

/// `I(j;k)` in bits from a joint distribution indexed `[a * 2 + b]`.
pub fn pair_mutual_information(joint: &PairJoint) -> f64 {
    let pa = [joint[0] + joint[1], joint[2] + joint[3]];
    let pb = [joint[0] + joint[2], joint[1] + joint[3]];
    let mut total = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let pab = joint[a * 2 + b];
            if pab > 0.0 {
                total += pab * (pab / (pa[a] * pb[b])).log2();
            }
        }
    }
    total.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    /// Symmetric matrix of pairwise mutual information in bits.
    pub mi: Vec<Vec<f64>>,
    /// Most-correlated other qubit for each qubit, lowest index on ties.
    pub partner: Vec<usize>,
}

/// Builds the correlation table from joints for every pair `j < k` in
/// row-major triangular order.
pub fn mutual_information(
    num_qubits: usize,
    joints: &[PairJoint],
) -> Result<CorrelationTable, AnalysisError> {
    let n = num_qubits;
    check_len(n * n.saturating_sub(1) / 2, joints.len())?;
    let mut mi = vec![vec![0.0; n]; n];
    let mut idx = 0;
    for j in 0..n {
        for k in j + 1..n {
            let v = pair_mutual_information(&joints[idx]);
            mi[j][k] = v;
            mi[k][j] = v;
            idx += 1;
        }
    }
    let partner = (0..n)
        .map(|j| {
            let mut best: Option<(usize, f64)> = None;
            for (k, &v) in mi[j].iter().enumerate() {
                if k != j && best.is_none_or(|(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
            best.map_or(j, |(k, _)| k)
        })
        .collect();
    Ok(CorrelationTable { mi, partner })
}

/// `p_bar_j = (p_j + p_{c(j)}) / 2`.
pub fn mitigate(p: &[f64], table: &CorrelationTable) -> Result<Vec<f64>, AnalysisError> {
    check_len(table.partner.len(), p.len())?;
    Ok(table
        .partner
        .iter()
        .enumerate()
        .map(|(j, &c)| (p[j] + p[c]) / 2.0)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub fuzz: f64,
    pub success: f64,
    pub diff: f64,
}

impl MetricSet {
    /// All three metrics from per-qubit probabilities measured after `slice`.
    pub fn evaluate(
        graph: &CouplingGraph,
        slice: &EntanglingSlice,
        p: &[f64],
    ) -> Result<Self, AnalysisError> {
        let theta = infer_angles(p);
        Ok(MetricSet {
            fuzz: compute_fuzz(slice, p)?,
            success: compute_success(graph, &slice.matching, &theta)?,
            diff: compute_diff(slice, &theta)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub raw: MetricSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mitigated: Option<MetricSet>,
}

/// Expected success fraction of a guess that ignores the data: minimum-weight
/// matching on independent uniform angles scored against an independent
/// random matching, averaged over `trials`.
pub fn random_guess_baseline<R: Rng + ?Sized>(
    graph: &CouplingGraph,
    trials: usize,
    rng: &mut R,
) -> Result<f64, AnalysisError> {
    let mut total = 0.0;
    for _ in 0..trials {
        let truth = random_maximal_matching(graph, rng);
        let theta: Vec<f64> = (0..graph.num_qubits())
            .map(|_| rng.random_range(0.0..std::f64::consts::FRAC_PI_2))
            .collect();
        total += compute_success(graph, &truth, &theta)?;
    }
    Ok(total / trials.max(1) as f64)
}
