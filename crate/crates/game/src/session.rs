//! One player's game: a live protocol run or a replay of recorded rounds.

use qbench_core::analysis::success_fraction;
use qbench_core::campaign::CampaignResult;
use qbench_core::protocol::{ProtocolError, ProtocolRunner, ProtocolSettings, RoundRecord, Strategy};
use qbench_core::seed::RunSeeds;
use qbench_core::simulator::{NoiseModel, Shots};
use qbench_core::topology::{CouplingGraph, DeviceCatalog, Matching, TopologyError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::puzzle::Puzzle;

#[derive(Debug, Error)]
pub enum GameError {
    #[error(transparent)]
    Device(#[from] TopologyError),
    #[error("{reason}")]
    Pairing { label: String, reason: String },
    #[error("game is over: all recorded rounds have been played")]
    Finished,
    #[error("saved data: {0}")]
    SavedData(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Everything needed to start a live game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSettings {
    pub device: String,
    pub shots: Shots,
    pub noise: NoiseModel,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum GameOrigin {
    Live(GameSettings),
    Saved { device: String, sample: usize },
}

/// The origin plus every submitted pairing, in order. Replaying it rebuilds
/// the session exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub origin: GameOrigin,
    pub moves: Vec<Vec<String>>,
}

/// Recorded rounds from a campaign results file.
#[derive(Debug, Clone)]
pub struct SavedGames {
    graph: CouplingGraph,
    runs: Vec<Vec<RoundRecord>>,
}

impl SavedGames {
    /// Uses the true-pairs samples of `result` when present, otherwise the
    /// samples of its first strategy.
    pub fn from_result(result: &CampaignResult, catalog: &DeviceCatalog) -> Result<Self, GameError> {
        let graph = catalog.get(&result.spec.device)?;
        let samples = result.samples.as_ref().ok_or_else(|| {
            GameError::SavedData("results file has no per-sample records; rerun the campaign with --full".into())
        })?;
        let wanted = if result.spec.strategies.contains(&Strategy::TruePairs) {
            Strategy::TruePairs
        } else {
            *result
                .spec
                .strategies
                .first()
                .ok_or_else(|| GameError::SavedData("campaign lists no strategies".into()))?
        };
        let runs: Vec<Vec<RoundRecord>> = samples
            .iter()
            .filter(|s| s.strategy == wanted && !s.rounds.is_empty())
            .map(|s| s.rounds.clone())
            .collect();
        if runs.is_empty() {
            return Err(GameError::SavedData(format!("no recorded {wanted} rounds")));
        }
        for rounds in &runs {
            for r in rounds {
                if r.theta_tilde.len() != graph.num_qubits() {
                    return Err(GameError::SavedData(format!(
                        "round {} has {} angles, device {} has {} qubits",
                        r.round,
                        r.theta_tilde.len(),
                        graph.name(),
                        graph.num_qubits()
                    )));
                }
            }
        }
        Ok(SavedGames { graph, runs })
    }

    pub fn device(&self) -> &str {
        self.graph.name()
    }

    pub fn graph(&self) -> &CouplingGraph {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

#[derive(Debug, Clone)]
enum Source {
    Live(Box<ProtocolRunner>),
    Saved { rounds: Vec<RoundRecord>, next: usize },
}

/// Result of a submitted pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    /// Fraction of the round's true pairs the player found.
    pub feedback: f64,
    /// Next puzzle, absent once saved data runs out.
    pub puzzle: Option<Puzzle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSummary {
    pub device: String,
    pub mode: String,
    /// Round of the current puzzle, or the number of rounds played once the
    /// game is finished.
    pub round: usize,
    pub finished: bool,
    pub scores: Vec<f64>,
    pub puzzles: Vec<Puzzle>,
}

#[derive(Debug, Clone)]
pub struct GameSession {
    graph: CouplingGraph,
    source: Source,
    transcript: Transcript,
    scores: Vec<f64>,
    puzzles: Vec<Puzzle>,
}

impl GameSession {
    pub fn live(catalog: &DeviceCatalog, settings: GameSettings) -> Result<Self, GameError> {
        let graph = catalog.get(&settings.device)?;
        let protocol = ProtocolSettings {
            shots: settings.shots,
            ..ProtocolSettings::default()
        };
        let mut runner = ProtocolRunner::local(
            graph.clone(),
            protocol,
            settings.noise,
            RunSeeds::from_master(settings.seed),
        )?;
        let first = runner.begin_round()?;
        let puzzle = Puzzle::new(&graph, first.round, &first.theta_tilde);
        Ok(GameSession {
            graph,
            source: Source::Live(Box::new(runner)),
            transcript: Transcript {
                origin: GameOrigin::Live(settings),
                moves: Vec::new(),
            },
            scores: Vec::new(),
            puzzles: vec![puzzle],
        })
    }

    /// Game over the recorded run `sample % saved.len()`.
    pub fn saved(saved: &SavedGames, sample: usize) -> Self {
        let sample = sample % saved.runs.len();
        let rounds = saved.runs[sample].clone();
        let puzzle = Puzzle::new(&saved.graph, rounds[0].round, &rounds[0].theta_tilde);
        GameSession {
            graph: saved.graph.clone(),
            source: Source::Saved { rounds, next: 0 },
            transcript: Transcript {
                origin: GameOrigin::Saved {
                    device: saved.device().to_string(),
                    sample,
                },
                moves: Vec::new(),
            },
            scores: Vec::new(),
            puzzles: vec![puzzle],
        }
    }

    /// Rebuilds a session by replaying every move of `transcript`.
    pub fn replay(
        transcript: &Transcript,
        catalog: &DeviceCatalog,
        saved: Option<&SavedGames>,
    ) -> Result<Self, GameError> {
        let mut session = match &transcript.origin {
            GameOrigin::Live(settings) => GameSession::live(catalog, settings.clone())?,
            GameOrigin::Saved { device, sample } => {
                let saved = saved
                    .filter(|s| s.device() == device)
                    .ok_or_else(|| GameError::SavedData(format!("no saved data for {device}")))?;
                GameSession::saved(saved, *sample)
            }
        };
        for labels in &transcript.moves {
            session.submit(labels)?;
        }
        Ok(session)
    }

    pub fn graph(&self) -> &CouplingGraph {
        &self.graph
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Puzzles shown so far, oldest first.
    pub fn puzzles(&self) -> &[Puzzle] {
        &self.puzzles
    }

    pub fn is_finished(&self) -> bool {
        matches!(&self.source, Source::Saved { rounds, next } if *next >= rounds.len())
    }

    /// The puzzle awaiting a pairing.
    pub fn current_puzzle(&self) -> Option<&Puzzle> {
        if self.is_finished() {
            None
        } else {
            self.puzzles.last()
        }
    }

    /// Protocol records behind the puzzles, true pairings included. Server
    /// side only.
    pub fn records(&self) -> &[RoundRecord] {
        match &self.source {
            Source::Live(runner) => runner.records(),
            Source::Saved { rounds, next } => &rounds[..(*next + 1).min(rounds.len())],
        }
    }

    /// Checks the labels and turns them into a matching, naming the first
    /// offending label on failure.
    pub fn parse_pairing<S: AsRef<str>>(&self, labels: &[S]) -> Result<Matching, GameError> {
        let mut owner: Vec<Option<&str>> = vec![None; self.graph.num_qubits()];
        for label in labels {
            let label = label.as_ref();
            let edge = self.graph.edge_by_label(label).ok_or_else(|| GameError::Pairing {
                label: label.to_string(),
                reason: format!("unknown edge label `{label}`"),
            })?;
            for q in [edge.a, edge.b] {
                if let Some(other) = owner[q] {
                    let reason = if other == label {
                        format!("edge `{label}` is listed twice")
                    } else {
                        format!("edge `{label}` shares qubit {q} with edge `{other}`")
                    };
                    return Err(GameError::Pairing {
                        label: label.to_string(),
                        reason,
                    });
                }
                owner[q] = Some(label);
            }
        }
        self.graph
            .matching_from_labels(labels)
            .map_err(GameError::Device)
    }

    /// Scores the pairing against the current round, uses it as the inverse
    /// slice and advances to the next puzzle.
    pub fn submit<S: AsRef<str>>(&mut self, labels: &[S]) -> Result<Turn, GameError> {
        if self.is_finished() {
            return Err(GameError::Finished);
        }
        let pairing = self.parse_pairing(labels)?;
        let (feedback, puzzle) = match &mut self.source {
            Source::Live(runner) => {
                let current = runner.pending().expect("live game always has a pending round");
                let feedback = success_fraction(&current.entangling.matching, &pairing);
                runner.complete_round(Strategy::PlayerPairs, Some(&pairing))?;
                let next = runner.begin_round()?;
                (feedback, Some(Puzzle::new(&self.graph, next.round, &next.theta_tilde)))
            }
            Source::Saved { rounds, next } => {
                let feedback = success_fraction(&rounds[*next].entangling.matching, &pairing);
                *next += 1;
                let puzzle = rounds
                    .get(*next)
                    .map(|r| Puzzle::new(&self.graph, r.round, &r.theta_tilde));
                (feedback, puzzle)
            }
        };
        self.scores.push(feedback);
        self.transcript
            .moves
            .push(labels.iter().map(|l| l.as_ref().to_string()).collect());
        if let Some(p) = &puzzle {
            self.puzzles.push(p.clone());
        }
        Ok(Turn { feedback, puzzle })
    }

    pub fn summary(&self) -> GameSummary {
        let (device, mode) = match &self.transcript.origin {
            GameOrigin::Live(s) => (s.device.clone(), "live"),
            GameOrigin::Saved { device, .. } => (device.clone(), "saved"),
        };
        GameSummary {
            device,
            mode: mode.to_string(),
            round: if self.is_finished() {
                self.scores.len()
            } else {
                self.puzzles.last().map_or(1, |p| p.round)
            },
            finished: self.is_finished(),
            scores: self.scores.clone(),
            puzzles: self.puzzles.clone(),
        }
    }
}
