// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{RegisterSpec, RegisterState};
use crate::action::{Action, ActionDesc, ActionKind, Value};
use crate::error::{Error, Result};
use crate::ids::{ActionId, RegisterId};

/// How equal greatest timestamps are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LwwPolicy {
    /// Equal maxima are a conflict: no write is visible.
    #[default]
    #[serde(rename = "strict")]
    Strict,
    /// The write with the smallest operation id wins a tie.
    #[serde(rename = "opid-tiebreak")]
    OpidTiebreak,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct LwwWrite {
    pub t: i64,
    pub id: ActionId,
    pub value: Value,
}

/// All writes seen so far, as a set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LwwState {
    pub writes: BTreeSet<LwwWrite>,
    pub policy: LwwPolicy,
}

impl LwwState {
    pub fn max_t(&self) -> Option<i64> {
        self.writes.iter().map(|w| w.t).max()
    }

    /// Writes carrying the greatest timestamp.
    pub fn top(&self) -> Vec<&LwwWrite> {
        match self.max_t() {
            None => Vec::new(),
            Some(m) => self.writes.iter().filter(|w| w.t == m).collect(),
        }
    }

    /// The writes that `val` reports and that new writes entail.
    pub fn winners(&self) -> Vec<&LwwWrite> {
        let top = self.top();
        match self.policy {
            LwwPolicy::Strict => top,
            LwwPolicy::OpidTiebreak => top
                .into_iter()
                .min_by(|a, b| a.id.cmp(&b.id))
                .into_iter()
                .collect(),
        }
    }

    pub fn val(&self) -> serde_json::Value {
        let mut values: Vec<&Value> = self.winners().into_iter().map(|w| &w.value).collect();
        values.sort();
        values.dedup();
        serde_json::to_value(values).expect("values serialize")
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LwwRegister {
    pub policy: LwwPolicy,
}

impl LwwRegister {
    pub fn new(policy: LwwPolicy) -> Self {
        LwwRegister { policy }
    }

    fn interpret_writes(&self, projection: &[Action]) -> Result<LwwState> {
        let mut writes = BTreeSet::new();
        for action in projection {
            match action.desc.op {
                ActionKind::Touch => {}
                ActionKind::Mov => {
                    let t = action.desc.t.ok_or(Error::MissingTimestamp)?;
                    let value = action
                        .desc
                        .value
                        .clone()
                        .ok_or_else(|| Error::MissingValue(action.desc.to_string()))?;
                    writes.insert(LwwWrite {
                        t,
                        id: action.id.clone(),
                        value,
                    });
                }
                other => {
                    return Err(Error::NotInBasis {
                        reg: action.desc.reg,
                        kind: other.to_string(),
                        register_kind: "lww".into(),
                    })
                }
            }
        }
        Ok(LwwState {
            writes,
            policy: self.policy,
        })
    }
}

impl RegisterSpec for LwwRegister {
    fn kind(&self) -> &'static str {
        "lww"
    }

    fn accepts(&self, kind: ActionKind) -> bool {
        matches!(kind, ActionKind::Mov | ActionKind::Touch)
    }

    fn validate(&self, desc: &ActionDesc) -> Result<()> {
        if desc.t.is_none() {
            return Err(Error::MissingTimestamp);
        }
        if desc.value.is_none() {
            return Err(Error::MissingValue(desc.to_string()));
        }
        Ok(())
    }

    fn interpret(&self, projection: &[Action]) -> Result<RegisterState> {
        self.interpret_writes(projection).map(RegisterState::Lww)
    }

    fn entail_write(&self, _desc: &ActionDesc, state: &RegisterState) -> BTreeSet<ActionId> {
        match state {
            RegisterState::Lww(s) => s.winners().into_iter().map(|w| w.id.clone()).collect(),
            _ => BTreeSet::new(),
        }
    }

    fn observed(&self, state: &RegisterState) -> Option<BTreeSet<ActionId>> {
        match state {
            RegisterState::Lww(s) => match s.winners().as_slice() {
                [only] => Some(BTreeSet::from([only.id.clone()])),
                _ => None,
            },
            _ => None,
        }
    }

    fn visible_write(&self, id: &ActionId, projection: &[Action]) -> bool {
        match self.interpret_writes(projection) {
            Ok(s) => matches!(s.winners().as_slice(), [only] if &only.id == id),
            Err(_) => false,
        }
    }

    fn sample_actions(&self, reg: RegisterId) -> Vec<ActionDesc> {
        vec![
            ActionDesc::mov_at(0, "x", 0).on(reg),
            ActionDesc::mov_at(0, "y", 1).on(reg),
            ActionDesc::mov_at(0, "z", 2).on(reg),
            ActionDesc::mov_at(0, "w", 2).on(reg),
            ActionDesc::touch(0).on(reg),
        ]
    }
}
