//! Trains instruction-conditioned generator agents that emit scene programs
//! (brush strokes or 3D-editor commands) whose rendered images match a goal
//! distribution, using a learned conditional discriminator as the reward
//! signal, with a fixed L2 pixel-reward baseline and an evaluation suite for
//! correctness and diversity.
//!
//! The crate is self-contained: it ships its own reverse-mode autodiff engine
//! (with the second-order path needed by the gradient penalty), deterministic
//! renderers for both domains, and classifier-based metrics.

pub mod env;
pub mod glyphs;
pub mod graph;
pub mod instructions;
pub mod io;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod training;

pub mod cli;
