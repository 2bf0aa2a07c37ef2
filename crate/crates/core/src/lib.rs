//! Progressive Frontier multi-objective optimization over black-box models.

pub mod baselines;
pub mod error;
pub mod frontier;
pub mod io;
pub mod mogd;
pub mod models;
pub mod oracle;
pub mod problem;
pub mod recommend;
pub mod rng;
pub mod space;
