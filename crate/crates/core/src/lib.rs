//! Correlation-robust expectations of set functions.
//!
//! Given a set function `f` over a small ground set and per-element marginals
//! `p`, this crate computes the worst-case expectation of `f` over every joint
//! distribution with those marginals (an LP over all subsets), the expectation
//! under the independent product distribution, and their ratio, the
//! correlation gap. Around that core sit cost-sharing certification, the
//! element-splitting reduction, robust two-stage decision scans, welfare
//! maximization with identical utilities, and a library of named instances.

pub mod cli;
pub mod correlation_gap;
pub mod cost_sharing;
pub mod distributions;
pub mod error;
pub mod instances;
pub mod model;
pub mod robust;
pub mod simplex;
pub mod split;
pub mod verify;
pub mod welfare;
pub mod worst_case;

pub use error::{Error, Result};
pub use model::{GroundSet, Instance, SetFunction, SubsetMask};
pub use simplex::LpOptions;
