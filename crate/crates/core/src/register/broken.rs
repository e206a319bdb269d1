// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use super::plain::interpret_movs;
use super::{RegisterSpec, RegisterState};
use crate::action::{Action, ActionDesc, ActionKind};
use crate::error::{Error, Result};
use crate::ids::{ActionId, RegisterId};

/// A deliberately wrong register used as a negative control for the
/// discard-completeness checker: visibility is last-writer-wins like the
/// plain register, but writes never record any premise, so a hidden write is
/// never entailed by the write that hides it.
#[derive(Debug, Clone, Copy, Default)]
pub struct BrokenDemoRegister;

impl RegisterSpec for BrokenDemoRegister {
    fn kind(&self) -> &'static str {
        "broken-demo"
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

    fn entail_write(&self, _desc: &ActionDesc, _state: &RegisterState) -> BTreeSet<ActionId> {
        BTreeSet::new()
    }

    fn observed(&self, state: &RegisterState) -> Option<BTreeSet<ActionId>> {
        match state {
            RegisterState::Plain(s) => s.setter.clone().map(|id| BTreeSet::from([id])),
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
