//! Dense statevector simulation of the benchmark gate set.
//!
//! Qubit 0 is the least-significant bit of a basis-state index. Gates are
//! `exp(i theta X_j X_k)` on pairs and `exp(i phi P)` (P in {X, Y}) on single
//! qubits. Gate noise is sampled as Pauli trajectories; readout noise flips
//! measured bits independently.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("qubit count {0} outside 1..={MAX_QUBITS}")]
    QubitCount(usize),
    #[error("qubit {qubit} out of range for {num_qubits} qubits")]
    QubitIndex { qubit: usize, num_qubits: usize },
    #[error("two-qubit gate needs distinct qubits, got {0} twice")]
    SameQubit(usize),
    #[error("probability {name} = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("shot count must be at least 1")]
    ZeroShots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

const PAULIS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0...0> on `num_qubits` qubits.
    pub fn new(num_qubits: usize) -> Result<Self, SimError> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(SimError::QubitCount(num_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check(&self, qubit: usize) -> Result<(), SimError> {
        if qubit >= self.num_qubits {
            Err(SimError::QubitIndex {
                qubit,
                num_qubits: self.num_qubits,
            })
        } else {
            Ok(())
        }
    }

    /// Applies `exp(i theta X_j X_k)`.
    pub fn apply_xx(&mut self, j: usize, k: usize, theta: f64) -> Result<(), SimError> {
        self.check(j)?;
        self.check(k)?;
        if j == k {
            return Err(SimError::SameQubit(j));
        }
        if theta == 0.0 {
            return Ok(());
        }
        let (c, s) = (theta.cos(), theta.sin());
        let flip = (1usize << j) | (1usize << k);
        for t in 0..self.amps.len() / 2 {
            let i = insert_zero_bit(t, j);
            let p = i ^ flip;
            let (a, b) = (self.amps[i], self.amps[p]);
            // (c + i s X X): a' = c a + i s b
            self.amps[i] = Complex64::new(c * a.re - s * b.im, c * a.im + s * b.re);
            self.amps[p] = Complex64::new(c * b.re - s * a.im, c * b.im + s * a.re);
        }
        Ok(())
    }

    /// Applies `exp(i phi sigma_axis)` to qubit `j`.
    pub fn apply_rot(&mut self, j: usize, axis: Axis, phi: f64) -> Result<(), SimError> {
        self.check(j)?;
        if phi == 0.0 {
            return Ok(());
        }
        let (c, s) = (phi.cos(), phi.sin());
        let bit = 1usize << j;
        for t in 0..self.amps.len() / 2 {
            let i0 = insert_zero_bit(t, j);
            let i1 = i0 | bit;
            let (a, b) = (self.amps[i0], self.amps[i1]);
            match axis {
                Axis::X => {
                    self.amps[i0] = Complex64::new(c * a.re - s * b.im, c * a.im + s * b.re);
                    self.amps[i1] = Complex64::new(c * b.re - s * a.im, c * b.im + s * a.re);
                }
                Axis::Y => {
                    // i sigma_y = [[0, 1], [-1, 0]]
                    self.amps[i0] = a * c + b * s;
                    self.amps[i1] = b * c - a * s;
                }
            }
        }
        Ok(())
    }

    pub fn apply_pauli(&mut self, j: usize, pauli: Pauli) -> Result<(), SimError> {
        self.check(j)?;
        let bit = 1usize << j;
        let im = Complex64::new(0.0, 1.0);
        for t in 0..self.amps.len() / 2 {
            let i0 = insert_zero_bit(t, j);
            let i1 = i0 | bit;
            match pauli {
                Pauli::X => self.amps.swap(i0, i1),
                Pauli::Y => {
                    let (a, b) = (self.amps[i0], self.amps[i1]);
                    self.amps[i0] = -im * b;
                    self.amps[i1] = im * a;
                }
                Pauli::Z => self.amps[i1] = -self.amps[i1],
            }
        }
        Ok(())
    }
}

#[inline]
fn insert_zero_bit(t: usize, bit: usize) -> usize {
    let low = t & ((1usize << bit) - 1);
    ((t >> bit) << (bit + 1)) | low
}

/// `exp(i theta X_a X_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGate {
    pub a: usize,
    pub b: usize,
    pub theta: f64,
}

/// `exp(i phi sigma_axis)` on one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub qubit: usize,
    pub axis: Axis,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Pairs(Vec<PairGate>),
    Rotations(Vec<Rotation>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub num_qubits: usize,
    pub layers: Vec<Layer>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit {
            num_qubits,
            layers: Vec::new(),
        }
    }
}

/// Depolarizing rates per gate plus a symmetric readout flip probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p1: f64,
    pub p2: f64,
    pub readout: f64,
}

impl NoiseModel {
    pub fn new(p1: f64, p2: f64, readout: f64) -> Result<Self, SimError> {
        let model = NoiseModel { p1, p2, readout };
        model.validate()?;
        Ok(model)
    }

    pub const fn noiseless() -> Self {
        NoiseModel {
            p1: 0.0,
            p2: 0.0,
            readout: 0.0,
        }
    }

    /// Rates in the range of early cloud-accessible superconducting devices.
    pub const fn typical() -> Self {
        NoiseModel {
            p1: 0.001,
            p2: 0.02,
            readout: 0.03,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, value) in [("p1", self.p1), ("p2", self.p2), ("readout", self.readout)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::Probability { name, value });
            }
        }
        Ok(())
    }

    pub fn has_gate_noise(&self) -> bool {
        self.p1 > 0.0 || self.p2 > 0.0
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

/// A Pauli error inserted by the trajectory sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEvent {
    /// Qubits of the gate the error followed.
    pub after_gate: Vec<usize>,
    pub errors: Vec<(usize, Pauli)>,
}

fn sample_one_qubit_error<R: Rng + ?Sized>(rng: &mut R) -> Pauli {
    PAULIS[rng.random_range(0..3)]
}

/// Uniform over the 15 non-identity two-qubit Paulis.
fn sample_two_qubit_error<R: Rng + ?Sized>(rng: &mut R) -> (Option<Pauli>, Option<Pauli>) {
    let idx = rng.random_range(1..16usize);
    let pick = |i: usize| match i {
        0 => None,
        i => Some(PAULIS[i - 1]),
    };
    (pick(idx / 4), pick(idx % 4))
}

/// Applies one layer, inserting Pauli errors after each gate with the
/// model's per-gate probability. No random numbers are drawn for zero rates.
pub fn apply_layer<R: Rng + ?Sized>(
    state: &mut StateVector,
    layer: &Layer,
    noise: &NoiseModel,
    rng: &mut R,
    mut trace: Option<&mut Vec<NoiseEvent>>,
) -> Result<(), SimError> {
    match layer {
        Layer::Pairs(gates) => {
            for g in gates {
                state.apply_xx(g.a, g.b, g.theta)?;
                if noise.p2 > 0.0 && rng.random::<f64>() < noise.p2 {
                    let (pa, pb) = sample_two_qubit_error(rng);
                    let mut errors = Vec::with_capacity(2);
                    if let Some(p) = pa {
                        state.apply_pauli(g.a, p)?;
                        errors.push((g.a, p));
                    }
                    if let Some(p) = pb {
                        state.apply_pauli(g.b, p)?;
                        errors.push((g.b, p));
                    }
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(NoiseEvent {
                            after_gate: vec![g.a, g.b],
                            errors,
                        });
                    }
                }
            }
        }
        Layer::Rotations(rots) => {
            for r in rots {
                state.apply_rot(r.qubit, r.axis, r.phi)?;
                if noise.p1 > 0.0 && rng.random::<f64>() < noise.p1 {
                    let p = sample_one_qubit_error(rng);
                    state.apply_pauli(r.qubit, p)?;
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(NoiseEvent {
                            after_gate: vec![r.qubit],
                            errors: vec![(r.qubit, p)],
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Applies one pair-gate layer (an entangling or inverse slice).
pub fn apply_slice<R: Rng + ?Sized>(
    state: &mut StateVector,
    slice: &[PairGate],
    noise: &NoiseModel,
    rng: &mut R,
    trace: Option<&mut Vec<NoiseEvent>>,
) -> Result<(), SimError> {
    apply_layer(state, &Layer::Pairs(slice.to_vec()), noise, rng, trace)
}

/// Finite-shot or exact measurement mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Exact,
    Count(u32),
}

impl Shots {
    pub fn count(&self) -> Option<u32> {
        match self {
            Shots::Exact => None,
            Shots::Count(n) => Some(*n),
        }
    }
}

impl Serialize for Shots {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => s.serialize_str("exact"),
            Shots::Count(n) => s.serialize_u32(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err(serde::de::Error::custom("shots must be at least 1")),
            Raw::Count(n) => Ok(Shots::Count(n)),
            Raw::Text(t) if t == "exact" => Ok(Shots::Exact),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a shot count or \"exact\", got {t:?}"
            ))),
        }
    }
}

/// Joint distribution of two measured bits, indexed `[bit_j * 2 + bit_k]`.
pub type PairJoint = [f64; 4];

/// Sampled outcomes as counts per basis-state index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub num_qubits: usize,
    pub shots: u32,
    pub counts: BTreeMap<u64, u32>,
}

impl ShotRecord {
    /// Fraction of shots with qubit `j` reading 1, for every qubit.
    pub fn marginals(&self) -> Vec<f64> {
        let mut ones = vec![0u64; self.num_qubits];
        for (&outcome, &c) in &self.counts {
            for (j, slot) in ones.iter_mut().enumerate() {
                if outcome >> j & 1 == 1 {
                    *slot += c as u64;
                }
            }
        }
        ones.iter()
            .map(|&n| n as f64 / self.shots as f64)
            .collect()
    }

    /// Joint frequencies for every pair `j < k`, in row-major triangular order.
    pub fn pair_joints(&self) -> Vec<PairJoint> {
        let n = self.num_qubits;
        let mut ones = vec![0u64; n];
        let mut both = vec![0u64; n * n];
        let mut set = Vec::with_capacity(n);
        for (&outcome, &c) in &self.counts {
            set.clear();
            set.extend((0..n).filter(|&j| outcome >> j & 1 == 1));
            for (x, &j) in set.iter().enumerate() {
                ones[j] += c as u64;
                for &k in &set[x + 1..] {
                    both[j * n + k] += c as u64;
                }
            }
        }
        let total = self.shots as u64;
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for j in 0..n {
            for k in j + 1..n {
                let n11 = both[j * n + k];
                let n10 = ones[j] - n11;
                let n01 = ones[k] - n11;
                let n00 = total - n11 - n10 - n01;
                let t = total as f64;
                out.push([n00 as f64 / t, n01 as f64 / t, n10 as f64 / t, n11 as f64 / t]);
            }
        }
        out
    }
}

/// Exact outcome distribution with readout error applied analytically.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub num_qubits: usize,
    pub probabilities: Vec<f64>,
    pub readout: f64,
}

impl ExactDistribution {
    fn raw_marginals(&self) -> Vec<f64> {
        let n = self.num_qubits;
        let mut out = vec![0.0; n];
        for (j, slot) in out.iter_mut().enumerate() {
            let bit = 1usize << j;
            let mut acc = 0.0;
            for block in self.probabilities.chunks_exact(bit << 1) {
                acc += block[bit..].iter().sum::<f64>();
            }
            *slot = acc;
        }
        out
    }

    /// Probability that qubit `j` reads 1, readout flips included.
    pub fn marginals(&self) -> Vec<f64> {
        let r = self.readout;
        self.raw_marginals()
            .into_iter()
            .map(|p| p * (1.0 - r) + (1.0 - p) * r)
            .collect()
    }

    /// Joint distributions for every pair `j < k`, readout flips included.
    pub fn pair_joints(&self) -> Vec<PairJoint> {
        let n = self.num_qubits;
        let marg = self.raw_marginals();
        let mut both = vec![0.0; n * n];
        let mut set = Vec::with_capacity(n);
        for (i, &p) in self.probabilities.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            set.clear();
            set.extend((0..n).filter(|&j| i >> j & 1 == 1));
            for (x, &j) in set.iter().enumerate() {
                for &k in &set[x + 1..] {
                    both[j * n + k] += p;
                }
            }
        }
        let r = self.readout;
        let flip = |from: usize, to: usize| if from == to { 1.0 - r } else { r };
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for j in 0..n {
            for k in j + 1..n {
                let p11 = both[j * n + k];
                let p10 = (marg[j] - p11).max(0.0);
                let p01 = (marg[k] - p11).max(0.0);
                let p00 = (1.0 - p11 - p10 - p01).max(0.0);
                let raw = [p00, p01, p10, p11];
                let mut joint = [0.0; 4];
                for (to, slot) in joint.iter_mut().enumerate() {
                    for (from, &q) in raw.iter().enumerate() {
                        *slot += q * flip(from >> 1, to >> 1) * flip(from & 1, to & 1);
                    }
                }
                out.push(joint);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measurement {
    Shots(ShotRecord),
    Exact(ExactDistribution),
}

impl Measurement {
    pub fn num_qubits(&self) -> usize {
        match self {
            Measurement::Shots(s) => s.num_qubits,
            Measurement::Exact(e) => e.num_qubits,
        }
    }

    pub fn marginals(&self) -> Vec<f64> {
        match self {
            Measurement::Shots(s) => s.marginals(),
            Measurement::Exact(e) => e.marginals(),
        }
    }

    pub fn pair_joints(&self) -> Vec<PairJoint> {
        match self {
            Measurement::Shots(s) => s.pair_joints(),
            Measurement::Exact(e) => e.pair_joints(),
        }
    }
}

/// Samples `shots` outcomes (or returns the exact distribution), then
/// applies readout error.
pub fn measure<R: Rng + ?Sized>(
    state: &StateVector,
    shots: Shots,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Measurement, SimError> {
    let n = state.num_qubits();
    match shots {
        Shots::Exact => Ok(Measurement::Exact(ExactDistribution {
            num_qubits: n,
            probabilities: state.probabilities(),
            readout: noise.readout,
        })),
        Shots::Count(0) => Err(SimError::ZeroShots),
        Shots::Count(count) => {
            let mut draws: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
            draws.sort_unstable_by(|a, b| a.total_cmp(b));
            let total = state.norm_sqr();
            let mut outcomes = Vec::with_capacity(count as usize);
            let mut cumulative = 0.0;
            let mut next = 0;
            let amps = state.amplitudes();
            for (i, a) in amps.iter().enumerate() {
                cumulative += a.norm_sqr() / total;
                while next < draws.len() && draws[next] < cumulative {
                    outcomes.push(i as u64);
                    next += 1;
                }
            }
            // rounding can leave the last draws above the final cumulative sum
            let last = amps.iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0) as u64;
            outcomes.extend(std::iter::repeat_n(last, draws.len() - next));

            let mut counts = BTreeMap::new();
            for mut outcome in outcomes {
                if noise.readout > 0.0 {
                    for j in 0..n {
                        if rng.random::<f64>() < noise.readout {
                            outcome ^= 1 << j;
                        }
                    }
                }
                *counts.entry(outcome).or_insert(0) += 1;
            }
            Ok(Measurement::Shots(ShotRecord {
                num_qubits: n,
                shots: count,
                counts,
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_8};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn fresh_states() {
        let s = StateVector::new(1).unwrap();
        assert_eq!(s.amplitudes(), &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let s = StateVector::new(2).unwrap();
        assert_eq!(s.amplitudes().len(), 4);
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        let s = StateVector::new(20).unwrap();
        assert_eq!(s.amplitudes().len(), 1_048_576);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        assert_eq!(StateVector::new(0), Err(SimError::QubitCount(0)));
        assert_eq!(StateVector::new(25), Err(SimError::QubitCount(25)));
    }

    #[test]
    fn xx_creates_pair_state() {
        let mut s = StateVector::new(2).unwrap();
        s.apply_xx(0, 1, FRAC_PI_8).unwrap();
        let a = s.amplitudes();
        assert!(close(a[0], Complex64::new(FRAC_PI_8.cos(), 0.0), 1e-15));
        assert!(close(a[3], Complex64::new(0.0, FRAC_PI_8.sin()), 1e-15));
        assert_eq!(a[1], Complex64::new(0.0, 0.0));
        assert_eq!(a[2], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn xx_errors() {
        let mut s = StateVector::new(2).unwrap();
        assert_eq!(s.apply_xx(1, 1, 0.3), Err(SimError::SameQubit(1)));
        assert!(matches!(s.apply_xx(0, 2, 0.3), Err(SimError::QubitIndex { .. })));
        assert!(s.apply_rot(2, Axis::X, 0.3).is_err());
    }

    #[test]
    fn rotation_conventions() {
        let mut s = StateVector::new(1).unwrap();
        s.apply_rot(0, Axis::X, FRAC_PI_2).unwrap();
        assert!(close(s.amplitudes()[1], Complex64::new(0.0, 1.0), 1e-15));
        assert!(s.amplitudes()[0].norm() < 1e-15);

        let mut s = StateVector::new(1).unwrap();
        s.apply_rot(0, Axis::Y, FRAC_PI_2).unwrap();
        assert!(close(s.amplitudes()[1], Complex64::new(-1.0, 0.0), 1e-15));

        let mut s = StateVector::new(1).unwrap();
        s.apply_rot(0, Axis::X, 0.0).unwrap();
        assert_eq!(s, StateVector::new(1).unwrap());
    }

    #[test]
    fn gates_invert() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = StateVector::new(4).unwrap();
        for q in 0..4 {
            s.apply_rot(q, Axis::Y, rng.random::<f64>()).unwrap();
        }
        let reference = s.clone();
        s.apply_xx(1, 3, 0.7).unwrap();
        s.apply_xx(1, 3, -0.7).unwrap();
        s.apply_rot(2, Axis::X, 0.4).unwrap();
        s.apply_rot(2, Axis::X, -0.4).unwrap();
        for (a, b) in s.amplitudes().iter().zip(reference.amplitudes()) {
            assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn paulis_square_to_identity() {
        let mut s = StateVector::new(2).unwrap();
        s.apply_rot(0, Axis::X, 0.3).unwrap();
        s.apply_xx(0, 1, 0.5).unwrap();
        let reference = s.clone();
        for p in PAULIS {
            s.apply_pauli(1, p).unwrap();
            s.apply_pauli(1, p).unwrap();
        }
        for (a, b) in s.amplitudes().iter().zip(reference.amplitudes()) {
            assert!(close(*a, *b, 1e-15));
        }
    }

    #[test]
    fn empty_slice_and_exact_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = NoiseModel::noiseless();
        let mut s = StateVector::new(4).unwrap();
        let start = s.clone();
        apply_slice(&mut s, &[][..], &noise, &mut rng, None).unwrap();
        assert_eq!(s, start);

        let fwd = [PairGate { a: 0, b: 2, theta: 0.3 }, PairGate { a: 1, b: 3, theta: 0.7 }];
        let inv: Vec<PairGate> = fwd.iter().map(|g| PairGate { theta: -g.theta, ..*g }).collect();
        apply_slice(&mut s, &fwd[..], &noise, &mut rng, None).unwrap();
        apply_slice(&mut s, &inv[..], &noise, &mut rng, None).unwrap();
        for (a, b) in s.amplitudes().iter().zip(start.amplitudes()) {
            assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn full_two_qubit_noise_hits_every_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = NoiseModel::new(0.0, 1.0, 0.0).unwrap();
        let mut s = StateVector::new(4).unwrap();
        let gates = [PairGate { a: 0, b: 1, theta: 0.2 }, PairGate { a: 2, b: 3, theta: 0.4 }];
        let mut trace = Vec::new();
        apply_slice(&mut s, &gates[..], &noise, &mut rng, Some(&mut trace)).unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(trace[0].after_gate, vec![0, 1]);
        assert_eq!(trace[1].after_gate, vec![2, 3]);
        assert!(trace.iter().all(|e| !e.errors.is_empty()));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_qubit_error_sampler_covers_fifteen_paulis() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..2000 {
            let e = sample_two_qubit_error(&mut rng);
            assert_ne!(e, (None, None));
            seen.insert(format!("{e:?}"));
        }
        assert_eq!(seen.len(), 15);
    }

    #[test]
    fn zero_noise_is_bit_identical_to_noiseless() {
        let layers = vec![
            Layer::Rotations(vec![Rotation { qubit: 0, axis: Axis::Y, phi: 0.4 }]),
            Layer::Pairs(vec![PairGate { a: 0, b: 1, theta: 0.6 }]),
        ];
        let mut a = StateVector::new(2).unwrap();
        let mut b = StateVector::new(2).unwrap();
        let mut rng_a = ChaCha8Rng::seed_from_u64(1);
        let mut rng_b = ChaCha8Rng::seed_from_u64(999);
        for l in &layers {
            apply_layer(&mut a, l, &NoiseModel::noiseless(), &mut rng_a, None).unwrap();
            apply_layer(&mut b, l, &NoiseModel::new(0.0, 0.0, 0.0).unwrap(), &mut rng_b, None)
                .unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn all_zero_state_measures_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = StateVector::new(3).unwrap();
        let Measurement::Shots(rec) = measure(&s, Shots::Count(50), &NoiseModel::noiseless(), &mut rng).unwrap() else {
            panic!("expected shots");
        };
        assert_eq!(rec.counts.len(), 1);
        assert_eq!(rec.counts[&0], 50);
    }

    #[test]
    fn pair_state_bits_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta = 0.5;
        let mut s = StateVector::new(2).unwrap();
        s.apply_xx(0, 1, theta).unwrap();
        let m = measure(&s, Shots::Count(500), &NoiseModel::noiseless(), &mut rng).unwrap();
        let Measurement::Shots(rec) = &m else { unreachable!() };
        assert!(rec.counts.keys().all(|&o| o == 0 || o == 3));
        let exact = measure(&s, Shots::Exact, &NoiseModel::noiseless(), &mut rng).unwrap();
        let marg = exact.marginals();
        assert!((marg[0] - theta.sin().powi(2)).abs() < 1e-15);
        assert!((marg[1] - theta.sin().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn exact_readout_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = StateVector::new(1).unwrap();
        let noise = NoiseModel::new(0.0, 0.0, 0.05).unwrap();
        let m = measure(&s, Shots::Exact, &noise, &mut rng).unwrap();
        assert!((m.marginals()[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn exact_pair_joints_with_readout() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = StateVector::new(2).unwrap();
        s.apply_xx(0, 1, 0.4).unwrap();
        let r = 0.1;
        let m = measure(&s, Shots::Exact, &NoiseModel::new(0.0, 0.0, r).unwrap(), &mut rng).unwrap();
        let joint = m.pair_joints()[0];
        let (c2, s2) = (0.4f64.cos().powi(2), 0.4f64.sin().powi(2));
        let expect00 = c2 * (1.0 - r) * (1.0 - r) + s2 * r * r;
        let expect01 = c2 * (1.0 - r) * r + s2 * r * (1.0 - r);
        assert!((joint[0] - expect00).abs() < 1e-15);
        assert!((joint[1] - expect01).abs() < 1e-15);
        assert!((joint[2] - expect01).abs() < 1e-15);
        assert!((joint.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_marginals_match_exact_within_binomial_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut s = StateVector::new(5).unwrap();
        for q in 0..5 {
            s.apply_rot(q, Axis::Y, 0.2 + 0.25 * q as f64).unwrap();
        }
        s.apply_xx(0, 3, 0.6).unwrap();
        s.apply_xx(1, 4, 0.3).unwrap();
        let noise = NoiseModel::noiseless();
        let exact = measure(&s, Shots::Exact, &noise, &mut rng).unwrap().marginals();
        let shots = 100_000u32;
        let sampled = measure(&s, Shots::Count(shots), &noise, &mut rng).unwrap().marginals();
        for (p, q) in exact.iter().zip(&sampled) {
            let sigma = (p * (1.0 - p) / shots as f64).sqrt();
            assert!((p - q).abs() <= 4.0 * sigma, "{p} vs {q}");
        }
    }

    #[test]
    fn shots_serde() {
        assert_eq!(serde_json::to_string(&Shots::Exact).unwrap(), "\"exact\"");
        assert_eq!(serde_json::to_string(&Shots::Count(100)).unwrap(), "100");
        assert_eq!(serde_json::from_str::<Shots>("100").unwrap(), Shots::Count(100));
        assert_eq!(serde_json::from_str::<Shots>("\"exact\"").unwrap(), Shots::Exact);
        assert!(serde_json::from_str::<Shots>("0").is_err());
        assert!(serde_json::from_str::<Shots>("\"many\"").is_err());
    }

    #[test]
    fn noise_model_validation() {
        assert!(NoiseModel::new(0.1, 0.2, 0.3).is_ok());
        assert!(matches!(
            NoiseModel::new(-0.1, 0.0, 0.0),
            Err(SimError::Probability { name: "p1", .. })
        ));
        assert!(NoiseModel::new(0.0, 1.5, 0.0).is_err());
    }
}
