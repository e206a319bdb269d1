// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use serde::Serialize;

use super::{RegisterSpec, RegisterState};
use crate::action::{Action, ActionDesc, ActionKind, Value};
use crate::error::{Error, Result};
use crate::ids::{ActionId, RegisterId};

/// State `(ν, α)`: the current value and the action that set it.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct PlainState {
    pub value: Option<Value>,
    pub setter: Option<ActionId>,
}

impl PlainState {
    pub fn val(&self) -> serde_json::Value {
        serde_json::to_value(&self.value).expect("values serialize")
    }
}

/// Single-value register with basis `{mov}` (plus `touch`).
#[derive(Debug, Clone, Copy, Default)]
pub struct PlainRegister;

pub(super) fn interpret_movs(projection: &[Action]) -> Result<PlainState> {
    let mut state = PlainState::default();
    for action in projection {
        match action.desc.op {
            ActionKind::Mov => {
                state.value = action.desc.value.clone();
                state.setter = Some(action.id.clone());
            }
            ActionKind::Touch => {}
            other => {
                return Err(Error::NotInBasis {
                    reg: action.desc.reg,
                    kind: other.to_string(),
                    register_kind: "plain".into(),
                })
            }
        }
    }
    Ok(state)
}

impl RegisterSpec for PlainRegister {
    fn kind(&self) -> &'static str {
        "plain"
    }

    fn accepts(&self, kind: ActionKind) -> bool {
        matches!(kind, ActionKind::Mov | ActionKind::Touch)
    }

    fn validate(&self, desc: &ActionDesc) -> Result<()> {
        if desc.value.is_none() {
            return Err(Error::MissingValue(desc.to_string()));
        }
        Ok(())
    }

    fn interpret(&self, projection: &[Action]) -> Result<RegisterState> {
        interpret_movs(projection).map(RegisterState::Plain)
    }

    fn entail_write(&self, _desc: &ActionDesc, state: &RegisterState) -> BTreeSet<ActionId> {
        match state {
            RegisterState::Plain(s) => s.setter.iter().cloned().collect(),
            _ => BTreeSet::new(),
        }
    }

    fn observed(&self, state: &RegisterState) -> Option<BTreeSet<ActionId>> {
        match state {
            RegisterState::Plain(PlainState {
                setter: Some(id), ..
            }) => Some(BTreeSet::from([id.clone()])),
            _ => None,
        }
    }

    fn visible_write(&self, id: &ActionId, projection: &[Action]) -> bool {
        interpret_movs(projection)
            .map(|s| s.setter.as_ref() == Some(id))
            .unwrap_or(false)
    }

    fn sample_actions(&self, reg: RegisterId) -> Vec<ActionDesc> {
        vec![
            ActionDesc::mov(0, 1).on(reg),
            ActionDesc::mov(0, 2).on(reg),
            ActionDesc::touch(0).on(reg),
        ]
    }
}
