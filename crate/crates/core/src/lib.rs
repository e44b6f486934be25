//! Differentially private release of answers to 3-way marginal and parity
//! queries over binary data.
//!
//! The release is a zero-sum game between a query player, who keeps
//! multiplicative weights over the (negation-closed) query class, and a data
//! player, who best-responds to a sample of those queries by solving a small
//! MAXCSP. The records chosen by the data player form the synthetic database.
//! Only the query sampling touches the private data, so privacy follows from
//! the exponential mechanism and composition across rounds.

pub mod accountant;
pub mod data;
pub mod driver;
pub mod error;
pub mod model;
pub mod queries;
pub mod solver;
pub mod weights;

pub use accountant::{Accountant, PrivacyReport, RunParams};
pub use data::{BiasVector, FeatureMap, SchemaSpec};
pub use driver::{run, ErrorReport, RunConfig, RunMode, RunOutput, RunTrace};
pub use error::{Error, Result};
pub use model::{Database, Query, QueryClass, QueryKind, Record};
pub use queries::{close_under_negation, evaluate_all, WorkloadSpec};
pub use solver::{CspInstance, FreePolicy, SolveStatus, SolverConfig, SolverMode};
pub use weights::WeightState;
