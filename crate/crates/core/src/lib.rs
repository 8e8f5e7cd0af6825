//! Guarded search over ERGM specifications.

pub mod cli;
pub mod estim;
pub mod fixtures;
pub mod float;
pub mod gof;
pub mod ingest;
pub mod network;
pub mod pipeline;
pub mod proposer;
pub mod sampler;
pub mod terms;
