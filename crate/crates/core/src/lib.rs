//! Cournot equilibria of collaborative oligopolies with degree-dependent
//! marginal costs, on a single market or on spatially separated markets,
//! together with pairwise-stability checks of the collaboration graph.
//!
//! - [`graph`]: collaboration graphs, degree sequences, enumeration
//! - [`cost`]: marginal-cost models
//! - [`cournot`], [`spatial`]: closed-form equilibria, sufficient
//!   conditions, and closed-form deviation deltas
//! - [`vi`]: best-response and projected solvers for the general model
//! - [`solver`]: equilibrium strategies registered by name
//! - [`stability`]: pairwise stability, stable-graph search, verification
//!   of degree-sequence classes

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod cournot;
pub mod error;
pub mod graph;
pub mod market;
pub mod solver;
pub mod spatial;
pub mod stability;
pub mod vi;

pub use cost::{CostModel, CostSpec, GeneralCost, LinearCost, QuantityCost, ShiftedConvexCost};
pub use cournot::{
    analytic_deviation_delta, aspatial_condition, cournot_quantities, AspatialMarket,
    EquilibriumOutcome,
};
pub use error::{Error, Result};
pub use graph::{CollaborationGraph, DegreeSequence};
pub use market::{Market, MarketSpec};
pub use solver::{EquilibriumSolver, SolverRegistry};
pub use spatial::{
    spatial_condition, spatial_deviation_delta, spatial_quantities, ConditionReport,
    DeviationAudit, Direction, OutcomeFlag, SolverPath, SpatialMarket, SpatialOutcome,
};
pub use stability::{
    enumerate_stable_graphs, is_pairwise_stable, verify_theorem_class, EquilibriumOracle,
    PayoffOracle, StabilityReport, TheoremReport, TheoremStatus, Verdict, VerificationMode,
};
pub use vi::{best_response_iterate, solve_general, vi_residual, SolverConfig, ViProblem};
