//! Entropy-guided variable fixing for recurrent mixed-integer programs.

pub mod bnb;
pub mod forest;
pub mod harness;
pub mod lapgen;
pub mod metrics;
pub mod model;
pub mod mps;
pub mod policy;
pub mod simplex;
pub mod stats;
