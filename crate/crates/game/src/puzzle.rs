//! What the player sees each round.

use std::f64::consts::FRAC_PI_2;

use qbench_core::topology::CouplingGraph;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const BLUE: Rgb = Rgb { r: 0, g: 0, b: 255 };
    pub const RED: Rgb = Rgb { r: 255, g: 0, b: 0 };

    pub fn hex(&self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzleNode {
    pub qubit: usize,
    pub percent: u8,
    pub color: Rgb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzleEdge {
    pub label: String,
    pub endpoints: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Puzzle {
    pub round: usize,
    pub nodes: Vec<PuzzleNode>,
    pub edges: Vec<PuzzleEdge>,
}

/// `theta / (pi/2)` as a whole percentage, halves rounded away from zero.
pub fn percent(theta: f64) -> u8 {
    let value = (theta / FRAC_PI_2 * 100.0).round();
    if value.is_nan() {
        0
    } else {
        value.clamp(0.0, 100.0) as u8
    }
}

/// Linear blue (0%) to red (100%) ramp.
pub fn color(percent: u8) -> Rgb {
    let t = f64::from(percent.min(100)) / 100.0;
    let mix = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8;
    Rgb {
        r: mix(Rgb::BLUE.r, Rgb::RED.r),
        g: mix(Rgb::BLUE.g, Rgb::RED.g),
        b: mix(Rgb::BLUE.b, Rgb::RED.b),
    }
}

impl Puzzle {
    pub fn new(graph: &CouplingGraph, round: usize, theta_tilde: &[f64]) -> Puzzle {
        let layout = graph.layout();
        let nodes = theta_tilde
            .iter()
            .enumerate()
            .map(|(qubit, &theta)| {
                let percent = percent(theta);
                PuzzleNode {
                    qubit,
                    percent,
                    color: color(percent),
                    position: layout.map(|l| l[qubit]),
                }
            })
            .collect();
        let edges = graph
            .edges()
            .iter()
            .map(|e| PuzzleEdge {
                label: e.label.clone(),
                endpoints: [e.a, e.b],
            })
            .collect();
        Puzzle { round, nodes, edges }
    }
}
