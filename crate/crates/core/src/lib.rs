//! Incentive-mechanism solvers for a monopoly RF energy-trading market.
//!
//! A data access point (DAP) buys wireless charging service for its sensors
//! from third-party energy access points (EAPs). Each EAP is characterized by
//! a scalar market type θ = G²/a (channel gain squared over energy-cost
//! coefficient). This crate computes and audits the four schemes the DAP can
//! run:
//!
//! - an incentive-compatible contract menu of energy-reward pairs, designed
//!   without knowledge of individual types ([`contract::solve_contract`]);
//! - Stackelberg per-unit pricing with complete information, in closed form
//!   ([`stackelberg::solve_complete`]);
//! - Stackelberg pricing under asymmetric information, via a scalar fixed
//!   point over the type-count distribution ([`stackelberg::solve_asymmetric`]);
//! - the centralized full-information benchmark that upper-bounds social
//!   welfare ([`contract::solve_centralized`]).
//!
//! [`harness`] generates markets from physical parameters, compares the
//! schemes by exact composition expectations and Monte Carlo, and emits CSV.

// `!(x > 0.0)` is the NaN-rejecting validation idiom here; numeric kernels
// index several parallel slices per loop.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod combinatorics;
pub mod contract;
pub mod harness;
pub mod model;
pub mod solver;
pub mod stackelberg;

pub use contract::{ContractSolution, FeasibilityReport};
pub use harness::{ComparisonRow, ScenarioConfig, Scheme};
pub use model::{
    ContractItem, ContractMenu, EapPhysical, EapType, Market, PhysicalParams, PriceVector,
};
pub use solver::{SolveOptions, SolveReport};
pub use stackelberg::StackelbergOutcome;
