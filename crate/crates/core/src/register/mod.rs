// SPDX-License-Identifier: Apache-2.0

//! Register definitions.
//!
//! A register type is fully described by four parts: its action basis, an
//! interpreter from an action projection to a state, an entailment rule that
//! yields the premises of a new action, and a visibility predicate. The
//! [`RegisterSpec`] trait captures exactly those parts; the journal and the
//! sync engine only ever talk to registers through it.

mod arith;
mod broken;
mod discard;
mod lww;
mod plain;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionDesc, ActionKind, Operation};
use crate::error::{Error, Result};
use crate::ids::{ActionId, OpId, RegisterId};

pub use arith::{ArithMode, ArithRegister, ArithState};
pub use broken::BrokenDemoRegister;
pub use discard::{check_discard_complete, Counterexample, DiscardCheck};
pub use lww::{LwwPolicy, LwwRegister, LwwState, LwwWrite};
pub use plain::{PlainRegister, PlainState};

/// Interpreted state of one register.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegisterState {
    Plain(PlainState),
    Arith(ArithState),
    Lww(LwwState),
}

impl RegisterState {
    /// The register's `val` query rendered as JSON.
    pub fn val(&self) -> serde_json::Value {
        match self {
            RegisterState::Plain(s) => s.val(),
            RegisterState::Arith(s) => serde_json::Value::from(s.val()),
            RegisterState::Lww(s) => s.val(),
        }
    }
}

pub trait RegisterSpec: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;

    /// Whether `kind` belongs to the action basis.
    fn accepts(&self, kind: ActionKind) -> bool;

    /// Payload checks beyond basis membership.
    fn validate(&self, desc: &ActionDesc) -> Result<()>;

    /// Interprets a projection starting from the empty context.
    fn interpret(&self, projection: &[Action]) -> Result<RegisterState>;

    /// Premises of a non-touch action issued against `state`.
    fn entail_write(&self, desc: &ActionDesc, state: &RegisterState) -> BTreeSet<ActionId>;

    /// Actions providing the currently observed value, if one is observable.
    fn observed(&self, state: &RegisterState) -> Option<BTreeSet<ActionId>>;

    /// Visibility of a non-touch action inside `projection`.
    fn visible_write(&self, id: &ActionId, projection: &[Action]) -> bool;

    /// Small action alphabet used by exhaustive discard-completeness checks.
    fn sample_actions(&self, reg: RegisterId) -> Vec<ActionDesc>;

    /// Premises of `desc` issued against `state`. A touch entails the
    /// operation that set the currently observed value.
    fn entail(&self, desc: &ActionDesc, state: &RegisterState) -> Result<BTreeSet<ActionId>> {
        match desc.op {
            ActionKind::Touch => self.observed(state).ok_or(Error::NoVisibleValue(desc.reg)),
            _ => Ok(self.entail_write(desc, state)),
        }
    }

    /// Touches never change state and are always visible.
    fn visible(&self, id: &ActionId, projection: &[Action]) -> bool {
        match projection.iter().find(|a| &a.id == id) {
            None => false,
            Some(a) if a.desc.op == ActionKind::Touch => true,
            Some(_) => self.visible_write(id, projection),
        }
    }

    fn check(&self, desc: &ActionDesc) -> Result<()> {
        if !self.accepts(desc.op) {
            return Err(Error::NotInBasis {
                reg: desc.reg,
                kind: desc.op.to_string(),
                register_kind: self.kind().to_owned(),
            });
        }
        if desc.op == ActionKind::Touch {
            return Ok(());
        }
        self.validate(desc)
    }
}

/// Register kinds available to scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegisterKind {
    #[serde(rename = "plain")]
    Plain,
    #[serde(rename = "arith")]
    Arith,
    #[serde(rename = "lww")]
    Lww,
    #[serde(rename = "broken-demo")]
    BrokenDemo,
}

impl RegisterKind {
    pub fn build(self, policy: LwwPolicy) -> Arc<dyn RegisterSpec> {
        match self {
            RegisterKind::Plain => Arc::new(PlainRegister),
            RegisterKind::Arith => Arc::new(ArithRegister),
            RegisterKind::Lww => Arc::new(LwwRegister::new(policy)),
            RegisterKind::BrokenDemo => Arc::new(BrokenDemoRegister),
        }
    }

    /// Constructor used when a scenario does not give one.
    pub fn default_constructor(self, reg: RegisterId) -> Vec<ActionDesc> {
        match self {
            RegisterKind::Plain | RegisterKind::BrokenDemo => {
                vec![ActionDesc::mov(0, 0).on(reg)]
            }
            RegisterKind::Arith => vec![ActionDesc::add(0, 0).on(reg)],
            RegisterKind::Lww => vec![ActionDesc::mov_at(0, 0, 0).on(reg)],
        }
    }
}

impl FromStr for RegisterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(RegisterKind::Plain),
            "arith" => Ok(RegisterKind::Arith),
            "lww" => Ok(RegisterKind::Lww),
            "broken-demo" => Ok(RegisterKind::BrokenDemo),
            other => Err(Error::Parse(format!("unknown register kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegisterDef {
    pub spec: Arc<dyn RegisterSpec>,
    pub constructor: Vec<ActionDesc>,
}

/// The shared memory layout: one spec and one constructor per register.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    registers: Vec<RegisterDef>,
}

impl Schema {
    pub fn new(registers: Vec<RegisterDef>) -> Result<Self> {
        for (i, def) in registers.iter().enumerate() {
            let reg = RegisterId(i as u32);
            if def.constructor.is_empty() {
                return Err(Error::EmptyOperation);
            }
            for action in &def.constructor {
                if action.reg != reg {
                    return Err(Error::UnknownRegister(action.reg));
                }
                def.spec.check(action)?;
            }
        }
        Ok(Schema { registers })
    }

    /// Convenience constructor from kinds with default constructors.
    pub fn of_kinds(kinds: &[RegisterKind], policy: LwwPolicy) -> Self {
        let defs = kinds
            .iter()
            .enumerate()
            .map(|(i, kind)| RegisterDef {
                spec: kind.build(policy),
                constructor: kind.default_constructor(RegisterId(i as u32)),
            })
            .collect();
        Schema::new(defs).expect("default constructors are valid")
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn registers(&self) -> impl Iterator<Item = RegisterId> {
        (0..self.registers.len() as u32).map(RegisterId)
    }

    pub fn spec(&self, reg: RegisterId) -> Result<&dyn RegisterSpec> {
        self.registers
            .get(reg.index())
            .map(|d| d.spec.as_ref())
            .ok_or(Error::UnknownRegister(reg))
    }

    pub fn constructor(&self, reg: RegisterId) -> Result<Operation> {
        let def = self
            .registers
            .get(reg.index())
            .ok_or(Error::UnknownRegister(reg))?;
        Ok(Operation::new(
            OpId::constructor(reg),
            def.constructor.clone(),
            BTreeSet::new(),
        ))
    }

    pub fn constructors(&self) -> Vec<Operation> {
        self.registers()
            .map(|r| self.constructor(r).expect("register in range"))
            .collect()
    }

    /// Validates an action against its register's basis.
    pub fn check(&self, desc: &ActionDesc) -> Result<()> {
        self.spec(desc.reg)?.check(desc)
    }
}

fn ops_of(ids: BTreeSet<ActionId>) -> BTreeSet<OpId> {
    ids.into_iter().map(|a| a.op).collect()
}

/// Premises of a whole action sequence issued against the given states.
///
/// Actions are evaluated in order, each against the state left by the
/// previous ones; premises pointing back into the operation itself are
/// dropped.
pub fn entail_sequence(
    schema: &Schema,
    own_id: &OpId,
    actions: &[ActionDesc],
    base: &[Action],
) -> Result<BTreeSet<OpId>> {
    let mut premises = BTreeSet::new();
    let mut projections: Vec<Vec<Action>> = vec![Vec::new(); schema.len()];
    for action in base {
        if let Some(p) = projections.get_mut(action.desc.reg.index()) {
            p.push(action.clone());
        }
    }
    for (pos, desc) in actions.iter().enumerate() {
        let spec = schema.spec(desc.reg)?;
        spec.check(desc)?;
        let projection = &mut projections[desc.reg.index()];
        let state = spec.interpret(projection)?;
        premises.extend(ops_of(spec.entail(desc, &state)?));
        projection.push(Action {
            id: ActionId::new(own_id.clone(), pos as u32),
            desc: desc.clone(),
        });
    }
    premises.remove(own_id);
    Ok(premises)
}
