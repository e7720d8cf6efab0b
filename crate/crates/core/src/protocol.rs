//! The iterative round structure of the benchmark.
//!
//! Round `k` measures the circuit made of every completed round followed by
//! the bare entangling slice `E_k`. From the measured probabilities an
//! inverse slice `I_k` is deduced with a pairing strategy; the completed
//! round is then executed as `S_k I_k E_k S_k^dagger` in every later circuit,
//! where `S_k` is a layer of random single-qubit rotations.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{mitigate, mutual_information, AnalysisError, MetricSet, RoundMetrics};
use crate::backend::{Backend, LocalSimulator};
use crate::matching::{min_weight_matching, weights_from_angles, MatchingError};
use crate::seed::{stream, RunSeeds, StreamRng};
use crate::simulator::{
    Axis, Circuit, Layer, Measurement, NoiseModel, PairGate, Rotation, Shots, SimError,
};
use crate::topology::{random_maximal_matching, CouplingGraph, Matching, TopologyError};

/// Smallest entangling angle drawn for a slice.
pub const THETA_MIN: f64 = PI / 40.0;
/// Largest entangling angle drawn for a slice.
pub const THETA_MAX: f64 = FRAC_PI_4;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("device {0} has no edges")]
    Edgeless(String),
    #[error("rounds must be at least 1")]
    ZeroRounds,
    #[error("strategy player-pairs needs a pairing from the player")]
    MissingPlayerPairing,
    #[error("invalid pairing: {0}")]
    InvalidPairing(TopologyError),
    #[error("no round is awaiting an inverse slice")]
    NotPending,
    #[error("round {0} is still awaiting an inverse slice")]
    AlreadyPending(usize),
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
}

/// How the pairing of an inverse slice is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// The pairing actually used by the entangling slice.
    TruePairs,
    /// A fresh random pairing, ignoring the data.
    RandomPairs,
    /// Minimum-weight matching on the inferred angles.
    MwpmPairs,
    /// A pairing supplied from outside (the game).
    PlayerPairs,
    /// True pairs with true angles shifted by the expected shot-noise scale.
    EmulatedStatNoise,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::TruePairs,
        Strategy::RandomPairs,
        Strategy::MwpmPairs,
        Strategy::PlayerPairs,
        Strategy::EmulatedStatNoise,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::TruePairs => "true-pairs",
            Strategy::RandomPairs => "random-pairs",
            Strategy::MwpmPairs => "mwpm-pairs",
            Strategy::PlayerPairs => "player-pairs",
            Strategy::EmulatedStatNoise => "emulated-stat-noise",
        }
    }

    /// Stable numeric id used in seed derivation.
    pub fn id(&self) -> u64 {
        match self {
            Strategy::TruePairs => 1,
            Strategy::RandomPairs => 2,
            Strategy::MwpmPairs => 3,
            Strategy::PlayerPairs => 4,
            Strategy::EmulatedStatNoise => 5,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| ProtocolError::UnknownStrategy(s.to_string()))
    }
}

/// Sign rule for the shift applied by [`Strategy::EmulatedStatNoise`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatNoise {
    /// Always add `+0.1/sqrt(shots)`.
    #[default]
    Constant,
    /// Add `±0.1/sqrt(shots)` with an independent fair sign per pair.
    RandomSign,
}

/// A layer of pair gates with angles aligned to `matching.pairs()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglingSlice {
    pub matching: Matching,
    pub angles: Vec<f64>,
}

impl EntanglingSlice {
    pub fn gates(&self) -> Vec<PairGate> {
        self.matching
            .pairs()
            .iter()
            .zip(&self.angles)
            .map(|(&(a, b), &theta)| PairGate { a, b, theta })
            .collect()
    }

    pub fn angle(&self, a: usize, b: usize) -> Option<f64> {
        let p = (a.min(b), a.max(b));
        self.matching
            .pairs()
            .iter()
            .position(|&q| q == p)
            .map(|i| self.angles[i])
    }
}

/// The attempted inversion of an entangling slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseSlice {
    pub assumed_matching: Matching,
    pub assumed_angles: Vec<f64>,
    pub mode: Strategy,
}

impl InverseSlice {
    /// Gates with negated angles.
    pub fn gates(&self) -> Vec<PairGate> {
        self.assumed_matching
            .pairs()
            .iter()
            .zip(&self.assumed_angles)
            .map(|(&(a, b), &theta)| PairGate { a, b, theta: -theta })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitRotation {
    pub axis: Axis,
    pub phi: f64,
}

/// One random x- or y-rotation per qubit, `phi` in `[0, pi/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugationLayer {
    pub rotations: Vec<QubitRotation>,
}

impl ConjugationLayer {
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Self {
        let rotations = (0..num_qubits)
            .map(|_| QubitRotation {
                axis: if rng.random::<bool>() { Axis::Y } else { Axis::X },
                phi: rng.random_range(0.0..=FRAC_PI_2),
            })
            .collect();
        ConjugationLayer { rotations }
    }

    fn layer(&self, sign: f64) -> Layer {
        Layer::Rotations(
            self.rotations
                .iter()
                .enumerate()
                .map(|(qubit, r)| Rotation {
                    qubit,
                    axis: r.axis,
                    phi: sign * r.phi,
                })
                .collect(),
        )
    }

    pub fn forward(&self) -> Layer {
        self.layer(1.0)
    }

    pub fn backward(&self) -> Layer {
        self.layer(-1.0)
    }
}

/// Draws a random maximum matching and a uniform angle in
/// `[THETA_MIN, THETA_MAX]` for each pair.
pub fn next_entangling_slice<R: Rng + ?Sized>(graph: &CouplingGraph, rng: &mut R) -> EntanglingSlice {
    let matching = random_maximal_matching(graph, rng);
    let angles = (0..matching.len())
        .map(|_| rng.random_range(THETA_MIN..=THETA_MAX))
        .collect();
    EntanglingSlice { matching, angles }
}

/// `theta_j = asin(sqrt(p_j))`, with `p_j` clamped to `[0, 1]` first.
pub fn infer_angle(p: f64) -> f64 {
    p.clamp(0.0, 1.0).sqrt().asin()
}

pub fn infer_angles(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&x| infer_angle(x)).collect()
}

/// Angle assumed for a pair from its two measured probabilities.
pub fn pair_angle(pj: f64, pk: f64) -> f64 {
    infer_angle((pj + pk) / 2.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InverseOptions {
    pub shots: Option<u32>,
    pub stat_noise: StatNoise,
}

/// Deduces the inverse of `entangling` from measured probabilities.
pub fn build_inverse<R: Rng + ?Sized>(
    graph: &CouplingGraph,
    entangling: &EntanglingSlice,
    p_tilde: &[f64],
    strategy: Strategy,
    player: Option<&Matching>,
    options: InverseOptions,
    rng: &mut R,
) -> Result<InverseSlice, ProtocolError> {
    let from_data = |m: Matching| {
        let angles = m
            .pairs()
            .iter()
            .map(|&(j, k)| pair_angle(p_tilde[j], p_tilde[k]))
            .collect();
        (m, angles)
    };
    let (assumed_matching, assumed_angles) = match strategy {
        Strategy::TruePairs => from_data(entangling.matching.clone()),
        Strategy::RandomPairs => from_data(random_maximal_matching(graph, rng)),
        Strategy::MwpmPairs => {
            let theta = infer_angles(p_tilde);
            from_data(min_weight_matching(&weights_from_angles(graph, &theta)?))
        }
        Strategy::PlayerPairs => {
            let m = player.ok_or(ProtocolError::MissingPlayerPairing)?;
            let m = Matching::new(graph, m.pairs().to_vec()).map_err(ProtocolError::InvalidPairing)?;
            from_data(m)
        }
        Strategy::EmulatedStatNoise => {
            let shift = options.shots.map_or(0.0, |s| 0.1 / (s as f64).sqrt());
            let angles = entangling
                .angles
                .iter()
                .map(|&t| {
                    let sign = match options.stat_noise {
                        StatNoise::Constant => 1.0,
                        StatNoise::RandomSign if shift > 0.0 => {
                            if rng.random::<bool>() {
                                1.0
                            } else {
                                -1.0
                            }
                        }
                        StatNoise::RandomSign => 1.0,
                    };
                    (t + sign * shift).clamp(0.0, FRAC_PI_2)
                })
                .collect();
            (entangling.matching.clone(), angles)
        }
    };
    Ok(InverseSlice {
        assumed_matching,
        assumed_angles,
        mode: strategy,
    })
}

/// What was measured in a round, without the full outcome distribution in
/// exact mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementSummary {
    /// Outcome counts keyed by basis-state index (qubit 0 = lowest bit).
    Shots { shots: u32, counts: BTreeMap<u64, u32> },
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    pub entangling: EntanglingSlice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<InverseSlice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjugation: Option<ConjugationLayer>,
    pub measurement: MeasurementSummary,
    pub p_tilde: Vec<f64>,
    pub theta_tilde: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_bar: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partners: Option<Vec<usize>>,
    pub metrics: RoundMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSettings {
    pub shots: Shots,
    /// Also compute mutual-information-mitigated probabilities and metrics.
    pub mitigation: bool,
    pub stat_noise: StatNoise,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        ProtocolSettings {
            shots: Shots::Exact,
            mitigation: false,
            stat_noise: StatNoise::Constant,
        }
    }
}

/// Drives one protocol run round by round.
#[derive(Debug, Clone)]
pub struct ProtocolRunner<B = LocalSimulator> {
    graph: CouplingGraph,
    settings: ProtocolSettings,
    circuit_rng: StreamRng,
    strategy_rng: StreamRng,
    backend: B,
    circuit: Circuit,
    records: Vec<RoundRecord>,
    pending: bool,
}

impl ProtocolRunner<LocalSimulator> {
    /// Runner on the local simulator, seeded from `seeds`.
    pub fn local(
        graph: CouplingGraph,
        settings: ProtocolSettings,
        noise: NoiseModel,
        seeds: RunSeeds,
    ) -> Result<Self, ProtocolError> {
        let backend = LocalSimulator::new(noise, seeds.noise)?;
        Self::new(graph, settings, seeds, backend)
    }
}

impl<B: Backend> ProtocolRunner<B> {
    pub fn new(
        graph: CouplingGraph,
        settings: ProtocolSettings,
        seeds: RunSeeds,
        backend: B,
    ) -> Result<Self, ProtocolError> {
        if graph.edges().is_empty() {
            return Err(ProtocolError::Edgeless(graph.name().to_string()));
        }
        if settings.shots == Shots::Count(0) {
            return Err(SimError::ZeroShots.into());
        }
        let circuit = Circuit::new(graph.num_qubits());
        Ok(ProtocolRunner {
            graph,
            settings,
            circuit_rng: stream(seeds.circuit),
            strategy_rng: stream(seeds.strategy),
            backend,
            circuit,
            records: Vec::new(),
            pending: false,
        })
    }

    pub fn graph(&self) -> &CouplingGraph {
        &self.graph
    }

    pub fn settings(&self) -> &ProtocolSettings {
        &self.settings
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    /// Layers of all completed rounds.
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<RoundRecord> {
        self.records
    }

    /// The measured round awaiting its inverse slice, if any.
    pub fn pending(&self) -> Option<&RoundRecord> {
        if self.pending {
            self.records.last()
        } else {
            None
        }
    }

    /// Draws the next entangling slice, runs the circuit and records the
    /// measurement and metrics.
    pub fn begin_round(&mut self) -> Result<&RoundRecord, ProtocolError> {
        if self.pending {
            return Err(ProtocolError::AlreadyPending(self.records.len()));
        }
        let slice = next_entangling_slice(&self.graph, &mut self.circuit_rng);
        let mut circuit = self.circuit.clone();
        circuit.layers.push(Layer::Pairs(slice.gates()));
        let measurement = self.backend.execute(&circuit, self.settings.shots)?;

        let p_tilde = measurement.marginals();
        let theta_tilde = infer_angles(&p_tilde);
        let raw = MetricSet::evaluate(&self.graph, &slice, &p_tilde)?;
        let (p_bar, partners, mitigated) = if self.settings.mitigation {
            let table = mutual_information(self.graph.num_qubits(), &measurement.pair_joints())?;
            let p_bar = mitigate(&p_tilde, &table)?;
            let metrics = MetricSet::evaluate(&self.graph, &slice, &p_bar)?;
            (Some(p_bar), Some(table.partner), Some(metrics))
        } else {
            (None, None, None)
        };
        let summary = match measurement {
            Measurement::Shots(rec) => MeasurementSummary::Shots {
                shots: rec.shots,
                counts: rec.counts,
            },
            Measurement::Exact(_) => MeasurementSummary::Exact,
        };
        self.records.push(RoundRecord {
            round: self.records.len() + 1,
            entangling: slice,
            inverse: None,
            conjugation: None,
            measurement: summary,
            p_tilde,
            theta_tilde,
            p_bar,
            partners,
            metrics: RoundMetrics { raw, mitigated },
        });
        self.pending = true;
        Ok(self.records.last().expect("just pushed"))
    }

    /// Deduces the inverse slice for the pending round with `strategy`,
    /// draws its conjugation layer and appends the completed round to the
    /// circuit.
    pub fn complete_round(
        &mut self,
        strategy: Strategy,
        player: Option<&Matching>,
    ) -> Result<&RoundRecord, ProtocolError> {
        if !self.pending {
            return Err(ProtocolError::NotPending);
        }
        let record = self.records.last_mut().expect("pending round exists");
        let options = InverseOptions {
            shots: self.settings.shots.count(),
            stat_noise: self.settings.stat_noise,
        };
        let inverse = build_inverse(
            &self.graph,
            &record.entangling,
            &record.p_tilde,
            strategy,
            player,
            options,
            &mut self.strategy_rng,
        )?;
        let conjugation = ConjugationLayer::random(self.graph.num_qubits(), &mut self.circuit_rng);
        self.circuit.layers.extend([
            conjugation.backward(),
            Layer::Pairs(record.entangling.gates()),
            Layer::Pairs(inverse.gates()),
            conjugation.forward(),
        ]);
        record.inverse = Some(inverse);
        record.conjugation = Some(conjugation);
        self.pending = false;
        Ok(record)
    }
}

/// Runs `rounds` complete rounds with a fixed strategy on the local simulator.
pub fn run_protocol(
    graph: &CouplingGraph,
    rounds: usize,
    strategy: Strategy,
    settings: ProtocolSettings,
    noise: NoiseModel,
    seeds: RunSeeds,
) -> Result<Vec<RoundRecord>, ProtocolError> {
    if rounds == 0 {
        return Err(ProtocolError::ZeroRounds);
    }
    if strategy == Strategy::PlayerPairs {
        return Err(ProtocolError::MissingPlayerPairing);
    }
    let mut runner = ProtocolRunner::local(graph.clone(), settings, noise, seeds)?;
    for _ in 0..rounds {
        runner.begin_round()?;
        runner.complete_round(strategy, None)?;
    }
    Ok(runner.into_records())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::catalog_device;

    #[test]
    fn angle_inference_points() {
        assert!((infer_angle(0.5) - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(infer_angle(0.0), 0.0);
        assert!((infer_angle(THETA_MIN.sin().powi(2)) - THETA_MIN).abs() < 1e-12);
        assert_eq!(infer_angle(-0.1), 0.0);
        assert_eq!(infer_angle(1.2), FRAC_PI_2);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!("best-pairs".parse::<Strategy>().is_err());
    }

    #[test]
    fn stat_noise_shift() {
        let g = catalog_device("line_2").unwrap();
        let slice = EntanglingSlice {
            matching: Matching::new(&g, vec![(0, 1)]).unwrap(),
            angles: vec![0.3],
        };
        let opts = InverseOptions {
            shots: Some(100),
            stat_noise: StatNoise::Constant,
        };
        let inv = build_inverse(
            &g,
            &slice,
            &[0.9, 0.9],
            Strategy::EmulatedStatNoise,
            None,
            opts,
            &mut stream(0),
        )
        .unwrap();
        assert!((inv.assumed_angles[0] - 0.31).abs() < 1e-12);
        let exact = InverseOptions { shots: None, ..opts };
        let inv = build_inverse(&g, &slice, &[0.9, 0.9], Strategy::EmulatedStatNoise, None, exact, &mut stream(0))
            .unwrap();
        assert_eq!(inv.assumed_angles[0], 0.3);
    }

    #[test]
    fn player_pairs_needs_valid_pairing() {
        let g = catalog_device("line_3").unwrap();
        let slice = EntanglingSlice {
            matching: Matching::new(&g, vec![(0, 1)]).unwrap(),
            angles: vec![0.3],
        };
        let opts = InverseOptions::default();
        let err = build_inverse(&g, &slice, &[0.0; 3], Strategy::PlayerPairs, None, opts, &mut stream(0));
        assert!(matches!(err, Err(ProtocolError::MissingPlayerPairing)));
        let bogus = Matching::from_pairs(3, vec![(0, 2)]).unwrap();
        let err = build_inverse(&g, &slice, &[0.0; 3], Strategy::PlayerPairs, Some(&bogus), opts, &mut stream(0));
        assert!(matches!(err, Err(ProtocolError::InvalidPairing(_))));
    }

    #[test]
    fn runner_enforces_round_order() {
        let g = catalog_device("line_3").unwrap();
        let mut r = ProtocolRunner::local(
            g,
            ProtocolSettings::default(),
            NoiseModel::noiseless(),
            RunSeeds::from_master(1),
        )
        .unwrap();
        assert!(matches!(r.complete_round(Strategy::TruePairs, None), Err(ProtocolError::NotPending)));
        r.begin_round().unwrap();
        assert!(matches!(r.begin_round(), Err(ProtocolError::AlreadyPending(1))));
        r.complete_round(Strategy::TruePairs, None).unwrap();
        assert_eq!(r.circuit().layers.len(), 4);
    }

    #[test]
    fn edgeless_graph_rejected() {
        let g = CouplingGraph::new("dots", 3, &[]).unwrap();
        let err = run_protocol(
            &g,
            1,
            Strategy::TruePairs,
            ProtocolSettings::default(),
            NoiseModel::noiseless(),
            RunSeeds::from_master(0),
        );
        assert!(matches!(err, Err(ProtocolError::Edgeless(_))));
    }
}
