// SPDX-License-Identifier: Apache-2.0

//! Actions and operations, the units stored in the journal.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{ActionId, OpId, RegisterId};

/// Payload carried by `mov`, `add` and `mul` actions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Text(String),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Text(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Mov,
    Add,
    Mul,
    Touch,
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionKind::Mov => "mov",
            ActionKind::Add => "add",
            ActionKind::Mul => "mul",
            ActionKind::Touch => "touch",
        })
    }
}

/// An action as written by a client: `{op, reg, value?, t?}`.
///
/// Field order is alphabetical so the canonical serialization has sorted keys.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionDesc {
    pub op: ActionKind,
    pub reg: RegisterId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

impl ActionDesc {
    pub fn mov(reg: u32, value: impl Into<Value>) -> Self {
        ActionDesc {
            op: ActionKind::Mov,
            reg: RegisterId(reg),
            t: None,
            value: Some(value.into()),
        }
    }

    pub fn mov_at(reg: u32, value: impl Into<Value>, t: i64) -> Self {
        ActionDesc {
            t: Some(t),
            ..ActionDesc::mov(reg, value)
        }
    }

    pub fn add(reg: u32, value: i64) -> Self {
        ActionDesc {
            op: ActionKind::Add,
            reg: RegisterId(reg),
            t: None,
            value: Some(Value::Int(value)),
        }
    }

    pub fn mul(reg: u32, value: i64) -> Self {
        ActionDesc {
            op: ActionKind::Mul,
            reg: RegisterId(reg),
            t: None,
            value: Some(Value::Int(value)),
        }
    }

    pub fn touch(reg: u32) -> Self {
        ActionDesc {
            op: ActionKind::Touch,
            reg: RegisterId(reg),
            t: None,
            value: None,
        }
    }

    /// Same action retargeted at another register.
    pub fn on(mut self, reg: RegisterId) -> Self {
        self.reg = reg;
        self
    }
}

impl fmt::Display for ActionDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.op, self.reg)?;
        if let Some(v) = &self.value {
            write!(f, " {v}")?;
        }
        if let Some(t) = self.t {
            write!(f, " @{t}")?;
        }
        Ok(())
    }
}

/// An action instance placed in a projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub id: ActionId,
    pub desc: ActionDesc,
}

/// A transactional sequence of actions with its immutable premise set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub actions: Vec<ActionDesc>,
    pub id: OpId,
    pub premises: BTreeSet<OpId>,
}

impl Operation {
    pub fn new(id: OpId, actions: Vec<ActionDesc>, premises: BTreeSet<OpId>) -> Self {
        Operation {
            actions,
            id,
            premises,
        }
    }

    /// Actions with their instance ids.
    pub fn instances(&self) -> impl Iterator<Item = Action> + '_ {
        self.actions
            .iter()
            .enumerate()
            .map(move |(pos, desc)| Action {
                id: ActionId::new(self.id.clone(), pos as u32),
                desc: desc.clone(),
            })
    }

    pub fn touches(&self, reg: RegisterId) -> bool {
        self.actions.iter().any(|a| a.reg == reg)
    }

    pub fn registers(&self) -> BTreeSet<RegisterId> {
        self.actions.iter().map(|a| a.reg).collect()
    }

    /// Short human summary, e.g. `[touch M3, mov M2 1pm-2pm]`.
    pub fn summary(&self) -> String {
        let parts: Vec<String> = self.actions.iter().map(ToString::to_string).collect();
        format!("[{}]", parts.join(", "))
    }
}
