//! Finite-population Neymanian and Bayesian inference for randomized 2^K
//! factorial designs with binary outcomes.
//!
//! Arms are 0-based (`j = 0..J`); factorial effects are indexed by their
//! model-matrix column `l = 1..J`.

pub mod assignment;
pub mod bayes;
pub mod design;
pub mod cli;
pub mod harness;
pub mod error;
pub mod neyman;
pub mod population;
pub mod rng;
pub mod sensitivity;
pub mod stats;

pub use assignment::{Assignment, ObservedData};
pub use bayes::{MarginalProbs, PriorSpec};
pub use design::ModelMatrix;
pub use error::{Error, Result};
pub use neyman::{IntervalReport, Method};
pub use population::{CellCounts, Estimands, PotentialTable};
pub use sensitivity::{GammaStructure, SweepReport};
pub use harness::{CoverageReport, SimulationCase, StudyConfig, StudyReport};
