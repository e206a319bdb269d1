// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::ids::{ActionId, OpId, RegisterId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid replica id {0:?}")]
    InvalidReplicaId(String),
    #[error("invalid operation id {0:?}")]
    InvalidOpId(String),
    #[error("unknown register {0}")]
    UnknownRegister(RegisterId),
    #[error("unknown operation {0}")]
    UnknownOperation(OpId),
    #[error("unknown premise {premise} of operation {op}")]
    UnknownPremise { op: OpId, premise: OpId },
    #[error("operation {0} already present")]
    DuplicateOperation(OpId),
    #[error("operation {0} has the same id but different content on the two sides")]
    DivergentOperation(OpId),
    #[error("constructor of register {0} differs between graphs")]
    ConstructorMismatch(RegisterId),
    #[error("cycle detected through {0}")]
    CycleDetected(OpId),
    #[error("operations must contain at least one action")]
    EmptyOperation,
    #[error("action {kind} is not in the basis of {register_kind} register {reg}")]
    NotInBasis {
        reg: RegisterId,
        kind: String,
        register_kind: String,
    },
    #[error("action {0} is missing its value")]
    MissingValue(String),
    #[error("action {0} carries a value of the wrong type")]
    WrongValueType(String),
    #[error("lww write is missing its timestamp")]
    MissingTimestamp,
    #[error("register {0} has no visible value to touch")]
    NoVisibleValue(RegisterId),
    #[error("actions {0} and {1} belong to different registers")]
    RegisterMismatch(ActionId, ActionId),
    #[error("action {0} not found in history")]
    UnknownAction(ActionId),
    #[error("operation {0} conflicts with the local history")]
    LocalConflict(OpId),
    #[error("illegal merge plan: {0}")]
    IllegalPlan(String),
    #[error("merged actions introduce premise {0} outside the participants' ancestry")]
    ForeignPremise(OpId),
    #[error("no pending conflict with trigger {0}")]
    NoPendingConflict(OpId),
    #[error("graph too large for exhaustive enumeration: {0} operations")]
    TooLarge(usize),
    #[error("scenario error: {0}")]
    Script(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
