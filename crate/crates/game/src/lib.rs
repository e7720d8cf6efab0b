//! Pairing-puzzle game over the benchmarking protocol: each round the
//! player sees per-qubit angle percentages, proposes a pairing, and that
//! pairing becomes the inverse slice of the live run.

pub mod puzzle;
pub mod service;
pub mod session;

pub use puzzle::{Puzzle, PuzzleEdge, PuzzleNode, Rgb};
pub use service::{router, serve, ApiError, AppState, GameConfig};
pub use session::{GameError, GameSession, GameSettings, SavedGames, Transcript, Turn};
