// SPDX-License-Identifier: Apache-2.0

pub mod action;
pub mod dot;
pub mod error;
pub mod graph;
pub mod history;
pub mod ids;
pub mod journal;
pub mod register;
pub mod server;
pub mod sim;
pub mod sync;
pub mod wire;

pub use action::{Action, ActionDesc, ActionKind, Operation, Value};
pub use error::{Error, Result};
pub use graph::EntailmentGraph;
pub use history::History;
pub use ids::{ActionId, OpId, RegisterId, ReplicaId};
pub use journal::Journal;
