//! Random-circuit benchmarking of qubit devices.
//!
//! Circuits are built round by round from random entangling slices on a
//! device's coupling graph and attempted inverses deduced from measurement
//! data. How quickly the attempted inversions fail, as seen through the
//! fuzz, pairing-success and angle-difference metrics, characterizes the
//! device.

pub mod analysis;
pub mod backend;
pub mod campaign;
pub mod matching;
pub mod protocol;
pub mod seed;
pub mod simulator;
pub mod topology;
