//! Many-sample benchmark campaigns: execution, aggregation, persistence.

mod plot;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub use plot::{plot_svg, render_plot};

use crate::analysis::RoundMetrics;
use crate::protocol::{
    run_protocol, ProtocolError, ProtocolSettings, RoundRecord, StatNoise, Strategy,
};
use crate::seed::RunSeeds;
use crate::simulator::{NoiseModel, Shots};
use crate::topology::{DeviceCatalog, TopologyError};

pub const SCHEMA_VERSION: u32 = 1;
pub const BIT_ORDER: &str = "little-endian";

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Device(#[from] TopologyError),
    #[error("invalid campaign: {0}")]
    InvalidSpec(String),
    #[error("{strategy} sample {sample}: {source}")]
    Run {
        strategy: Strategy,
        sample: usize,
        source: ProtocolError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: at `{field}`: {message}")]
    Parse {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("unsupported results schema {0}")]
    Schema(u32),
    #[error("nothing to plot: {0}")]
    EmptyPlot(String),
}

/// Which metric variants a campaign reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mitigation {
    /// Raw metrics only.
    #[default]
    Off,
    /// Mitigated metrics only.
    On,
    /// Raw and mitigated metrics.
    Both,
}

impl Mitigation {
    fn raw(&self) -> bool {
        matches!(self, Mitigation::Off | Mitigation::Both)
    }

    fn mitigated(&self) -> bool {
        matches!(self, Mitigation::On | Mitigation::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Fuzz,
    Success,
    Diff,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Fuzz, Metric::Success, Metric::Diff];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Fuzz => "fuzz",
            Metric::Success => "success",
            Metric::Diff => "diff",
        }
    }

    /// Series key for the mitigated variant.
    pub fn mitigated_name(&self) -> String {
        format!("{}_mitigated", self.name())
    }

    fn pick(&self, m: &crate::analysis::MetricSet) -> f64 {
        match self {
            Metric::Fuzz => m.fuzz,
            Metric::Success => m.success,
            Metric::Diff => m.diff,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric {s:?} (expected fuzz, success or diff)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub device: String,
    pub strategies: Vec<Strategy>,
    pub rounds: usize,
    pub shots: Shots,
    pub samples: usize,
    pub noise: NoiseModel,
    pub seed: u64,
    #[serde(default)]
    pub mitigation: Mitigation,
    #[serde(default)]
    pub stat_noise: StatNoise,
    /// Keep every sample's round records in the result.
    #[serde(default)]
    pub full: bool,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl CampaignSpec {
    pub fn new(device: impl Into<String>, strategies: Vec<Strategy>) -> Self {
        CampaignSpec {
            device: device.into(),
            strategies,
            rounds: 10,
            shots: Shots::Exact,
            samples: 100,
            noise: NoiseModel::noiseless(),
            seed: 0,
            mitigation: Mitigation::Off,
            stat_noise: StatNoise::Constant,
            full: false,
            extra: Map::new(),
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: &str| Err(CampaignError::InvalidSpec(m.to_string()));
        if self.samples == 0 {
            return bad("samples must be at least 1");
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required");
        }
        if self.strategies.contains(&Strategy::PlayerPairs) {
            return bad("player-pairs needs a player and cannot run in a campaign");
        }
        let mut seen = self.strategies.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.strategies.len() {
            return bad("strategies are listed more than once");
        }
        if self.shots == Shots::Count(0) {
            return bad("shots must be at least 1");
        }
        self.noise
            .validate()
            .map_err(|e| CampaignError::InvalidSpec(e.to_string()))
    }
}

/// Per-round mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Stat {
    /// Aggregates `values[sample][round]`.
    pub fn from_samples(values: &[Vec<f64>]) -> Stat {
        let rounds = values.first().map_or(0, Vec::len);
        let n = values.len() as f64;
        let mut mean = vec![0.0; rounds];
        let mut std = vec![0.0; rounds];
        for r in 0..rounds {
            let m = values.iter().map(|v| v[r]).sum::<f64>() / n;
            let var = values.iter().map(|v| (v[r] - m).powi(2)).sum::<f64>() / n;
            mean[r] = m;
            std[r] = var.sqrt();
        }
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub strategy: Strategy,
    pub sample: usize,
    pub rounds: Vec<RoundRecord>,
}

/// Strategy name → metric key → per-round statistics.
pub type Series = BTreeMap<String, BTreeMap<String, Stat>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub schema: u32,
    pub bit_order: String,
    /// Seconds since the Unix epoch.
    pub generated_at: u64,
    pub spec: CampaignSpec,
    pub series: Series,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<SampleRecord>>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl CampaignResult {
    pub fn stat(&self, strategy: Strategy, key: &str) -> Option<&Stat> {
        self.series.get(strategy.name())?.get(key)
    }
}

/// Runs every (strategy, sample) pair on the current rayon pool and
/// aggregates per-round statistics.
pub fn run_campaign(
    spec: &CampaignSpec,
    catalog: &DeviceCatalog,
) -> Result<CampaignResult, CampaignError> {
    spec.validate()?;
    let graph = catalog.get(&spec.device)?;
    let settings = ProtocolSettings {
        shots: spec.shots,
        mitigation: spec.mitigation.mitigated(),
        stat_noise: spec.stat_noise,
    };
    let jobs: Vec<(Strategy, usize)> = spec
        .strategies
        .iter()
        .flat_map(|&s| (0..spec.samples).map(move |i| (s, i)))
        .collect();
    let runs: Vec<(Strategy, Vec<RoundMetrics>, Option<SampleRecord>)> = jobs
        .par_iter()
        .map(|&(strategy, sample)| {
            let seeds = RunSeeds::for_sample(spec.seed, sample as u64, strategy.id());
            let rounds = run_protocol(&graph, spec.rounds, strategy, settings, spec.noise, seeds)
                .map_err(|source| CampaignError::Run {
                    strategy,
                    sample,
                    source,
                })?;
            let metrics = rounds.iter().map(|r| r.metrics).collect();
            let record = spec.full.then_some(SampleRecord {
                strategy,
                sample,
                rounds,
            });
            Ok((strategy, metrics, record))
        })
        .collect::<Result<_, CampaignError>>()?;

    let metrics: Vec<(Strategy, Vec<RoundMetrics>)> =
        runs.iter().map(|(s, m, _)| (*s, m.clone())).collect();
    let series = aggregate(spec, &metrics);
    let samples = spec
        .full
        .then(|| runs.into_iter().filter_map(|(_, _, r)| r).collect());
    Ok(CampaignResult {
        schema: SCHEMA_VERSION,
        bit_order: BIT_ORDER.to_string(),
        generated_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        spec: spec.clone(),
        series,
        samples,
        extra: Map::new(),
    })
}

/// Recomputes the series from persisted per-sample records.
pub fn aggregate_records(spec: &CampaignSpec, records: &[SampleRecord]) -> Series {
    let metrics: Vec<(Strategy, Vec<RoundMetrics>)> = records
        .iter()
        .map(|r| (r.strategy, r.rounds.iter().map(|x| x.metrics).collect()))
        .collect();
    aggregate(spec, &metrics)
}

/// Per-round statistics from each run's metrics, in run order.
pub fn aggregate(spec: &CampaignSpec, runs: &[(Strategy, Vec<RoundMetrics>)]) -> Series {
    let mut series = Series::new();
    for &strategy in &spec.strategies {
        let mine: Vec<&Vec<RoundMetrics>> = runs
            .iter()
            .filter(|(s, _)| *s == strategy)
            .map(|(_, m)| m)
            .collect();
        let mut stats = BTreeMap::new();
        for metric in Metric::ALL {
            if spec.mitigation.raw() {
                let values: Vec<Vec<f64>> = mine
                    .iter()
                    .map(|rounds| rounds.iter().map(|x| metric.pick(&x.raw)).collect())
                    .collect();
                stats.insert(metric.name().to_string(), Stat::from_samples(&values));
            }
            if spec.mitigation.mitigated() {
                let values: Vec<Vec<f64>> = mine
                    .iter()
                    .map(|rounds| {
                        rounds
                            .iter()
                            .map(|x| x.mitigated.as_ref().map_or(f64::NAN, |m| metric.pick(m)))
                            .collect()
                    })
                    .collect();
                stats.insert(metric.mitigated_name(), Stat::from_samples(&values));
            }
        }
        series.insert(strategy.name().to_string(), stats);
    }
    series
}

pub fn to_json(result: &CampaignResult) -> String {
    let mut text = serde_json::to_string_pretty(result).expect("results serialize");
    text.push('\n');
    text
}

pub fn write_result(result: &CampaignResult, path: &Path) -> Result<(), CampaignError> {
    fs::write(path, to_json(result)).map_err(|source| CampaignError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a results document; errors name the offending field path.
pub fn parse_result(text: &str, path: &Path) -> Result<CampaignResult, CampaignError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let result: CampaignResult =
        serde_path_to_error::deserialize(de).map_err(|e| CampaignError::Parse {
            path: path.to_path_buf(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    if result.schema != SCHEMA_VERSION {
        return Err(CampaignError::Schema(result.schema));
    }
    Ok(result)
}

pub fn read_result(path: &Path) -> Result<CampaignResult, CampaignError> {
    let text = fs::read_to_string(path).map_err(|source| CampaignError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_result(&text, path)
}
