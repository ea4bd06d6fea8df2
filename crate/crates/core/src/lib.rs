//! Hierarchical reinforcement learning for semantic-aware QP selection over a
//! synthetic rate–fidelity video model.
//!
//! A parent agent picks the QPs of the first two frames of each GOP; a child
//! agent picks a ΔQP for semantically related and unrelated CTUs. Both are
//! trained with advantage actor–critic against [`env::Environment`], and
//! compared with fixed-QP, rate-control, handcrafted and flat-RL baselines and
//! with an exhaustive oracle.

pub mod agent;
pub mod baselines;
pub mod env;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod mode;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
pub use exec::Exec;
