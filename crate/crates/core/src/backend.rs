//! Execution backends for protocol circuits.

use crate::seed::{stream, StreamRng};
use crate::simulator::{
    apply_layer, measure, Circuit, Layer, Measurement, NoiseModel, Shots, SimError, StateVector,
};

/// Runs a circuit from `|0...0>` and measures every qubit in the Z basis.
pub trait Backend {
    fn execute(&mut self, circuit: &Circuit, shots: Shots) -> Result<Measurement, SimError>;
}

/// Applies all layers of `circuit` to a fresh state.
pub fn simulate(
    circuit: &Circuit,
    noise: &NoiseModel,
    rng: &mut StreamRng,
) -> Result<StateVector, SimError> {
    let mut state = StateVector::new(circuit.num_qubits)?;
    for layer in &circuit.layers {
        apply_layer(&mut state, layer, noise, rng, None)?;
    }
    Ok(state)
}

#[derive(Debug, Clone)]
struct Checkpoint {
    layers: Vec<Layer>,
    state: StateVector,
}

/// In-process statevector backend.
///
/// With gate noise every execution is an independent trajectory simulated
/// from scratch. Without gate noise the state before the final layer is kept
/// and reused when the next circuit extends the same prefix; the arithmetic
/// is identical to a full re-simulation.
#[derive(Debug, Clone)]
pub struct LocalSimulator {
    noise: NoiseModel,
    rng: StreamRng,
    checkpoint: Option<Checkpoint>,
}

impl LocalSimulator {
    pub fn new(noise: NoiseModel, seed: u64) -> Result<Self, SimError> {
        noise.validate()?;
        Ok(LocalSimulator {
            noise,
            rng: stream(seed),
            checkpoint: None,
        })
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    fn prepare(&mut self, circuit: &Circuit) -> Result<StateVector, SimError> {
        if self.noise.has_gate_noise() {
            return simulate(circuit, &self.noise, &mut self.rng);
        }
        let split = circuit.layers.len().saturating_sub(1);
        let reusable = self.checkpoint.take().filter(|cp| {
            cp.state.num_qubits() == circuit.num_qubits
                && cp.layers.len() <= split
                && circuit.layers[..cp.layers.len()] == cp.layers[..]
        });
        let (start, mut state) = match reusable {
            Some(cp) => (cp.layers.len(), cp.state),
            None => (0, StateVector::new(circuit.num_qubits)?),
        };
        for layer in &circuit.layers[start..split] {
            apply_layer(&mut state, layer, &self.noise, &mut self.rng, None)?;
        }
        self.checkpoint = Some(Checkpoint {
            layers: circuit.layers[..split].to_vec(),
            state: state.clone(),
        });
        for layer in &circuit.layers[split..] {
            apply_layer(&mut state, layer, &self.noise, &mut self.rng, None)?;
        }
        Ok(state)
    }
}

impl Backend for LocalSimulator {
    fn execute(&mut self, circuit: &Circuit, shots: Shots) -> Result<Measurement, SimError> {
        let state = self.prepare(circuit)?;
        measure(&state, shots, &self.noise, &mut self.rng)
    }
}
