//! Lorenz-curve iteration, curve-based risk measures and mean-risk
//! portfolio selection.

pub mod curves;
pub mod format;
pub mod normal;
pub mod lorenz;
pub mod iterate;
pub mod risk;
pub mod data;
pub mod portfolio;
