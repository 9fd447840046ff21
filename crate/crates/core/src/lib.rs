//! Multi-robot pose-graph consistency through spectral graph wavelets.

pub mod par;
pub mod posegraph;
pub mod proxy;
pub mod discrepancy;
pub mod monitor;
pub mod optimizer;
pub mod spectral;
pub mod sim;
