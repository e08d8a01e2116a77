//! Multi-head attention labeller.

pub mod corpus;
pub mod engine;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod trainer;
