//! Coupling graphs for real and example devices, and random pairings on them.
//!
//! Real-device graphs are loaded from JSON documents (one per device). Copies
//! of the shipped files are embedded in the binary; a catalog directory can
//! override them without a rebuild. Parametric families (`line_N`, `ladder_N`,
//! `square_N`, `complete_N`) are generated on demand.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::cardinality;

/// Real devices shipped with the crate, in catalog order.
pub const REAL_DEVICES: [&str; 4] = ["ibmqx4", "ibmqx5", "8Q-Agave", "19Q-Acorn"];

const EMBEDDED_DEVICES: [(&str, &str); 4] = [
    ("ibmqx4", include_str!("../devices/ibmqx4.json")),
    ("ibmqx5", include_str!("../devices/ibmqx5.json")),
    ("8Q-Agave", include_str!("../devices/8Q-Agave.json")),
    ("19Q-Acorn", include_str!("../devices/19Q-Acorn.json")),
];

/// Example families used for the simulated-device study.
pub const EXAMPLE_DEVICES: [&str; 15] = [
    "line_5",
    "line_11",
    "line_15",
    "line_19",
    "ladder_4",
    "ladder_10",
    "ladder_16",
    "ladder_20",
    "square_4",
    "square_9",
    "square_16",
    "complete_5",
    "complete_11",
    "complete_16",
    "complete_19",
];

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("device `{name}`: {reason}")]
    FamilyConstraint { name: String, reason: String },
    #[error("invalid graph `{name}`: {reason}")]
    InvalidGraph { name: String, reason: String },
    #[error("invalid matching: {0}")]
    InvalidMatching(String),
    #[error("unknown edge label `{0}`")]
    UnknownLabel(String),
    #[error("reading device file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing device file {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Unordered qubit pair stored with the smaller index first.
pub type Pair = (usize, usize);

pub(crate) fn ordered(a: usize, b: usize) -> Pair {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Bijective base-26 label: 0 -> "a", 25 -> "z", 26 -> "aa", ...
pub fn edge_label(index: usize) -> String {
    let mut n = index + 1;
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push(b'a' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub label: String,
}

impl Edge {
    pub fn pair(&self) -> Pair {
        (self.a, self.b)
    }
}

/// Device connectivity: qubits are nodes, entangling-capable pairs are edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DeviceFile", into = "DeviceFile")]
pub struct CouplingGraph {
    name: String,
    num_qubits: usize,
    edges: Vec<Edge>,
    layout: Option<Vec<[f64; 2]>>,
    provenance: Option<String>,
}

/// On-disk device document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceFile {
    pub name: String,
    pub num_qubits: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Vec<[f64; 2]>>,
}

impl TryFrom<DeviceFile> for CouplingGraph {
    type Error = TopologyError;

    fn try_from(file: DeviceFile) -> Result<Self, Self::Error> {
        let pairs: Vec<Pair> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        let mut graph = CouplingGraph::new(file.name, file.num_qubits, &pairs)?;
        if let Some(layout) = &file.layout {
            if layout.len() != graph.num_qubits {
                return Err(TopologyError::InvalidGraph {
                    name: graph.name,
                    reason: format!(
                        "layout has {} positions for {} qubits",
                        layout.len(),
                        file.num_qubits
                    ),
                });
            }
        }
        graph.layout = file.layout;
        graph.provenance = file.provenance;
        Ok(graph)
    }
}

impl From<CouplingGraph> for DeviceFile {
    fn from(g: CouplingGraph) -> Self {
        DeviceFile {
            edges: g.edges.iter().map(|e| [e.a, e.b]).collect(),
            name: g.name,
            num_qubits: g.num_qubits,
            provenance: g.provenance,
            layout: g.layout,
        }
    }
}

impl CouplingGraph {
    /// Builds a simple graph; edges are labelled in the order given.
    pub fn new(
        name: impl Into<String>,
        num_qubits: usize,
        edges: &[Pair],
    ) -> Result<Self, TopologyError> {
        let name = name.into();
        let invalid = |reason: String| TopologyError::InvalidGraph {
            name: name.clone(),
            reason,
        };
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a == b {
                return Err(invalid(format!("self-loop on qubit {a}")));
            }
            if a >= num_qubits || b >= num_qubits {
                return Err(invalid(format!(
                    "edge ({a},{b}) exceeds {num_qubits} qubits"
                )));
            }
            let (a, b) = ordered(a, b);
            if !seen.insert((a, b)) {
                return Err(invalid(format!("duplicate edge ({a},{b})")));
            }
            out.push(Edge {
                a,
                b,
                label: edge_label(i),
            });
        }
        Ok(CouplingGraph {
            name,
            num_qubits,
            edges: out,
            layout: None,
            provenance: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn layout(&self) -> Option<&[[f64; 2]]> {
        self.layout.as_deref()
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn edge_pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.edges.iter().map(Edge::pair)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let p = ordered(a, b);
        self.edges.iter().any(|e| e.pair() == p)
    }

    pub fn edge_by_label(&self, label: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.label == label)
    }

    pub fn label_of(&self, a: usize, b: usize) -> Option<&str> {
        let p = ordered(a, b);
        self.edges
            .iter()
            .find(|e| e.pair() == p)
            .map(|e| e.label.as_str())
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_qubits];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        adj
    }

    /// Converts a list of edge labels into a validated matching.
    pub fn matching_from_labels<S: AsRef<str>>(
        &self,
        labels: &[S],
    ) -> Result<Matching, TopologyError> {
        let mut used = vec![false; self.num_qubits];
        let mut pairs = Vec::with_capacity(labels.len());
        for label in labels {
            let label = label.as_ref();
            let edge = self
                .edge_by_label(label)
                .ok_or_else(|| TopologyError::UnknownLabel(label.to_string()))?;
            if used[edge.a] || used[edge.b] {
                return Err(TopologyError::InvalidMatching(format!(
                    "edge `{label}` overlaps another selected edge"
                )));
            }
            used[edge.a] = true;
            used[edge.b] = true;
            pairs.push(edge.pair());
        }
        Matching::new(self, pairs)
    }
}

impl fmt::Display for CouplingGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} qubits, {} edges)",
            self.name,
            self.num_qubits,
            self.edges.len()
        )
    }
}

/// A set of vertex-disjoint pairs drawn from a coupling graph's edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pairs: Vec<Pair>,
    unpaired: Vec<usize>,
}

impl Matching {
    /// Validates `pairs` against `graph` and normalizes their order.
    pub fn new(graph: &CouplingGraph, pairs: Vec<Pair>) -> Result<Self, TopologyError> {
        for &(a, b) in &pairs {
            if !graph.has_edge(a, b) {
                return Err(TopologyError::InvalidMatching(format!(
                    "({a},{b}) is not an edge of {}",
                    graph.name()
                )));
            }
        }
        Self::from_pairs(graph.num_qubits(), pairs)
    }

    /// Builds a matching on `num_qubits` qubits without consulting a graph.
    pub fn from_pairs(num_qubits: usize, pairs: Vec<Pair>) -> Result<Self, TopologyError> {
        let mut used = vec![false; num_qubits];
        let mut normalized = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            if a == b || a >= num_qubits || b >= num_qubits {
                return Err(TopologyError::InvalidMatching(format!(
                    "({a},{b}) is not a valid pair on {num_qubits} qubits"
                )));
            }
            if used[a] || used[b] {
                return Err(TopologyError::InvalidMatching(format!(
                    "({a},{b}) overlaps another pair"
                )));
            }
            used[a] = true;
            used[b] = true;
            normalized.push(ordered(a, b));
        }
        normalized.sort_unstable();
        let unpaired = (0..num_qubits).filter(|&q| !used[q]).collect();
        Ok(Matching {
            pairs: normalized,
            unpaired,
        })
    }

    pub fn empty(num_qubits: usize) -> Self {
        Matching {
            pairs: Vec::new(),
            unpaired: (0..num_qubits).collect(),
        }
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn unpaired(&self) -> &[usize] {
        &self.unpaired
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn num_qubits(&self) -> usize {
        self.pairs.len() * 2 + self.unpaired.len()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.binary_search(&ordered(a, b)).is_ok()
    }

    /// Number of pairs shared with `other`.
    pub fn overlap(&self, other: &Matching) -> usize {
        self.pairs
            .iter()
            .filter(|&&(a, b)| other.contains(a, b))
            .count()
    }

    /// Partner of each qubit, `None` when unpaired.
    pub fn partners(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.num_qubits()];
        for &(a, b) in &self.pairs {
            out[a] = Some(b);
            out[b] = Some(a);
        }
        out
    }
}

/// Draws a random maximum-cardinality matching of `graph`.
///
/// The edge list is shuffled and disjoint edges are accepted greedily; the
/// resulting maximal matching is then grown along augmenting paths until no
/// larger matching exists. The result is not uniform over maximum matchings.
/// On an edgeless graph every qubit is left unpaired.
pub fn random_maximal_matching<R: Rng + ?Sized>(graph: &CouplingGraph, rng: &mut R) -> Matching {
    let n = graph.num_qubits();
    let mut order: Vec<Pair> = graph.edge_pairs().collect();
    order.shuffle(rng);

    let mut mate = vec![None; n];
    for &(a, b) in &order {
        if mate[a].is_none() && mate[b].is_none() {
            mate[a] = Some(b);
            mate[b] = Some(a);
        }
    }

    // Adjacency in shuffled edge order so augmentation choices follow the draw.
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &order {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mate = cardinality::augment_to_maximum(&adj, mate);
    let pairs = mate
        .iter()
        .enumerate()
        .filter_map(|(a, m)| m.filter(|&b| a < b).map(|b| (a, b)))
        .collect();
    Matching::from_pairs(n, pairs).expect("augmentation yields a valid matching")
}

/// Generates a parametric family member from its name, e.g. `ladder_16`.
pub fn parametric_device(name: &str) -> Result<CouplingGraph, TopologyError> {
    let (family, size) = name
        .rsplit_once('_')
        .ok_or_else(|| TopologyError::UnknownDevice(name.to_string()))?;
    let n: usize = size
        .parse()
        .map_err(|_| TopologyError::UnknownDevice(name.to_string()))?;
    let constraint = |reason: &str| TopologyError::FamilyConstraint {
        name: name.to_string(),
        reason: reason.to_string(),
    };
    if n < 2 {
        return Err(constraint("needs at least 2 qubits"));
    }
    let mut edges = Vec::new();
    match family {
        "line" => edges.extend((0..n - 1).map(|i| (i, i + 1))),
        "ladder" => {
            if !n.is_multiple_of(2) {
                return Err(constraint("ladder size must be even"));
            }
            let half = n / 2;
            for rail in [0, half] {
                edges.extend((0..half - 1).map(|i| (rail + i, rail + i + 1)));
            }
            edges.extend((0..half).map(|i| (i, i + half)));
        }
        "square" => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(constraint("square size must be a perfect square"));
            }
            for r in 0..side {
                for c in 0..side {
                    let q = r * side + c;
                    if c + 1 < side {
                        edges.push((q, q + 1));
                    }
                    if r + 1 < side {
                        edges.push((q, q + side));
                    }
                }
            }
        }
        "complete" => {
            for a in 0..n {
                edges.extend((a + 1..n).map(|b| (a, b)));
            }
        }
        _ => return Err(TopologyError::UnknownDevice(name.to_string())),
    }
    CouplingGraph::new(name, n, &edges)
}

/// Named real devices plus the parametric families.
#[derive(Debug, Clone)]
pub struct DeviceCatalog {
    devices: BTreeMap<String, CouplingGraph>,
}

impl DeviceCatalog {
    /// Catalog built from the device files embedded at compile time.
    pub fn builtin() -> Self {
        let devices = EMBEDDED_DEVICES
            .iter()
            .map(|(name, text)| {
                let graph: CouplingGraph = serde_json::from_str(text)
                    .unwrap_or_else(|e| panic!("embedded device {name} is invalid: {e}"));
                (graph.name().to_string(), graph)
            })
            .collect();
        DeviceCatalog { devices }
    }

    /// Builtin catalog with every `*.json` file in `dir` added or overriding.
    pub fn with_dir(dir: &Path) -> Result<Self, TopologyError> {
        let mut catalog = Self::builtin();
        let io = |source| TopologyError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let graph = load_device_file(&path)?;
            catalog.devices.insert(graph.name().to_string(), graph);
        }
        Ok(catalog)
    }

    /// Names of file-backed devices, real devices first.
    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = REAL_DEVICES
            .iter()
            .filter(|n| self.devices.contains_key(**n))
            .map(|n| n.to_string())
            .collect();
        names.extend(
            self.devices
                .keys()
                .filter(|k| !REAL_DEVICES.contains(&k.as_str()))
                .cloned(),
        );
        names
    }

    pub fn get(&self, name: &str) -> Result<CouplingGraph, TopologyError> {
        match self.devices.get(name) {
            Some(g) => Ok(g.clone()),
            None => parametric_device(name),
        }
    }
}

impl Default for DeviceCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Looks a device up in the builtin catalog.
pub fn catalog_device(name: &str) -> Result<CouplingGraph, TopologyError> {
    DeviceCatalog::builtin().get(name)
}

pub fn load_device_file(path: &Path) -> Result<CouplingGraph, TopologyError> {
    let text = fs::read_to_string(path).map_err(|source| TopologyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| TopologyError::Parse {
        path: path.to_path_buf(),
        source,
    })
}
