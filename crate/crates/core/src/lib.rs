//! Core of the information-power assessment platform: the reactor task
//! simulator, the decision-tree advisor and its trainer, explanation
//! selection, the information-power metric and the synthetic-user harness.

pub mod fixtures;
pub mod harness;
pub mod metrics;
pub mod plant;
pub mod policy;
pub mod tree;
pub mod xai;
