//! Driving-scene tooling: synthetic scene generation, rule-based spatial
//! question-answer generation, open-loop planning / grounding / text metrics,
//! and a numerically verified gated-fusion attention kernel.

pub mod codec;
pub mod fusion;
pub mod geom;
pub mod metrics;
pub mod pipeline;
pub mod qa;
pub mod scene;
