// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use serde::Serialize;

use super::{RegisterSpec, RegisterState};
use crate::action::{Action, ActionDesc, ActionKind};
use crate::error::{Error, Result};
use crate::ids::{ActionId, RegisterId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArithMode {
    #[serde(rename = "=")]
    Assign,
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "*")]
    Mul,
}

/// State `(ω, ν, α)`: computation mode, initial value of the current run,
/// and the actions accumulated in that mode.
///
/// Equality treats `α` as a set: within a mode the actions commute, so two
/// orders of the same concurrent additions are the same state.
#[derive(Debug, Clone, Serialize)]
pub struct ArithState {
    pub mode: ArithMode,
    pub base: i64,
    pub actions: Vec<(ActionId, i64)>,
}

impl PartialEq for ArithState {
    fn eq(&self, other: &Self) -> bool {
        let sorted = |s: &ArithState| {
            let mut v = s.actions.clone();
            v.sort();
            v
        };
        self.mode == other.mode && self.base == other.base && sorted(self) == sorted(other)
    }
}

impl Eq for ArithState {}

impl Default for ArithState {
    fn default() -> Self {
        ArithState {
            mode: ArithMode::Assign,
            base: 0,
            actions: Vec::new(),
        }
    }
}

impl ArithState {
    /// Fold of the accumulated payloads over the base value.
    pub fn val(&self) -> i64 {
        match self.mode {
            ArithMode::Add => self
                .actions
                .iter()
                .fold(self.base, |acc, (_, v)| acc.wrapping_add(*v)),
            ArithMode::Mul => self
                .actions
                .iter()
                .fold(self.base, |acc, (_, v)| acc.wrapping_mul(*v)),
            ArithMode::Assign => self.actions.last().map_or(self.base, |(_, v)| *v),
        }
    }

    fn apply(&mut self, id: ActionId, kind: ActionKind, value: i64) {
        let mode = match kind {
            ActionKind::Add => ArithMode::Add,
            ActionKind::Mul => ArithMode::Mul,
            ActionKind::Mov => ArithMode::Assign,
            ActionKind::Touch => return,
        };
        if mode == self.mode && mode != ArithMode::Assign {
            self.actions.push((id, value));
        } else if mode == ArithMode::Assign && self.mode == ArithMode::Assign {
            // consecutive assignments replace each other, the base stays
            self.actions = vec![(id, value)];
        } else {
            self.base = self.val();
            self.mode = mode;
            self.actions = vec![(id, value)];
        }
    }
}

/// Integer register with basis `{mov, add, mul}` (plus `touch`).
#[derive(Debug, Clone, Copy, Default)]
pub struct ArithRegister;

fn interpret_arith(projection: &[Action]) -> Result<ArithState> {
    let mut state = ArithState::default();
    for action in projection {
        if action.desc.op == ActionKind::Touch {
            continue;
        }
        let value = action
            .desc
            .value
            .as_ref()
            .and_then(|v| v.as_int())
            .ok_or_else(|| Error::WrongValueType(action.desc.to_string()))?;
        state.apply(action.id.clone(), action.desc.op, value);
    }
    Ok(state)
}

impl RegisterSpec for ArithRegister {
    fn kind(&self) -> &'static str {
        "arith"
    }

    fn accepts(&self, _kind: ActionKind) -> bool {
        true
    }

    fn validate(&self, desc: &ActionDesc) -> Result<()> {
        match &desc.value {
            None => Err(Error::MissingValue(desc.to_string())),
            Some(v) if v.as_int().is_none() => Err(Error::WrongValueType(desc.to_string())),
            Some(_) => Ok(()),
        }
    }

    fn interpret(&self, projection: &[Action]) -> Result<RegisterState> {
        interpret_arith(projection).map(RegisterState::Arith)
    }

    fn entail_write(&self, _desc: &ActionDesc, state: &RegisterState) -> BTreeSet<ActionId> {
        self.observed(state).unwrap_or_default()
    }

    fn observed(&self, state: &RegisterState) -> Option<BTreeSet<ActionId>> {
        match state {
            RegisterState::Arith(s) => s.actions.last().map(|(id, _)| BTreeSet::from([id.clone()])),
            _ => None,
        }
    }

    fn visible_write(&self, id: &ActionId, projection: &[Action]) -> bool {
        interpret_arith(projection)
            .map(|s| s.actions.iter().any(|(a, _)| a == id))
            .unwrap_or(false)
    }

    fn sample_actions(&self, reg: RegisterId) -> Vec<ActionDesc> {
        vec![
            ActionDesc::add(0, 1).on(reg),
            ActionDesc::add(0, 2).on(reg),
            ActionDesc::mul(0, 3).on(reg),
            ActionDesc::mov(0, 5).on(reg),
            ActionDesc::touch(0).on(reg),
        ]
    }
}
