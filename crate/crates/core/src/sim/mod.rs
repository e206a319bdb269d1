// SPDX-License-Identifier: Apache-2.0

//! Multi-replica scenario runner and brute-force oracles.

mod network;
mod oracle;
mod scenario;
mod session;

pub use network::{Network, NetworkModel};
pub use oracle::{
    oracle_join_laws, oracle_state_set, random_trace, JoinCounterexample, ORACLE_MAX_OPS,
};
pub use scenario::{Check, Event, PlanSpec, RegRef, RegisterDecl, Scenario};
pub use session::{
    build_schema, run_scenario, AssertRecord, ConvergenceReport, ResidualConflict, RunOptions,
    Session, StepOutcome,
};
