// SPDX-License-Identifier: Apache-2.0

//! Linear histories: operations in an order compatible with entailment.

use std::collections::{BTreeMap, BTreeSet};

use crate::action::{Action, Operation};
use crate::error::{Error, Result};
use crate::ids::{ActionId, OpId, RegisterId};
use crate::register::{entail_sequence, RegisterState, Schema};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    ops: Vec<Operation>,
}

impl History {
    pub fn new(ops: Vec<Operation>) -> Self {
        History { ops }
    }

    pub fn ops(&self) -> &[Operation] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &OpId> {
        self.ops.iter().map(|o| &o.id)
    }

    pub fn contains(&self, id: &OpId) -> bool {
        self.ops.iter().any(|o| &o.id == id)
    }

    /// The history with the given operations removed.
    pub fn rollback(&self, removed: &BTreeSet<OpId>) -> History {
        History {
            ops: self
                .ops
                .iter()
                .filter(|o| !removed.contains(&o.id))
                .cloned()
                .collect(),
        }
    }

    pub fn push(&mut self, op: Operation) {
        self.ops.push(op);
    }

    /// All action instances, in order.
    pub fn actions(&self) -> Vec<Action> {
        self.ops.iter().flat_map(|o| o.instances()).collect()
    }

    /// Subsequence of actions applied to `reg`.
    pub fn projection(&self, reg: RegisterId) -> Vec<Action> {
        self.ops
            .iter()
            .flat_map(|o| o.instances())
            .filter(|a| a.desc.reg == reg)
            .collect()
    }

    pub fn interpret(&self, schema: &Schema) -> Result<BTreeMap<RegisterId, RegisterState>> {
        schema
            .registers()
            .map(|reg| {
                let spec = schema.spec(reg)?;
                Ok((reg, spec.interpret(&self.projection(reg))?))
            })
            .collect()
    }

    pub fn vals(&self, schema: &Schema) -> Result<BTreeMap<RegisterId, serde_json::Value>> {
        Ok(self
            .interpret(schema)?
            .into_iter()
            .map(|(r, s)| (r, s.val()))
            .collect())
    }

    fn find_action(&self, id: &ActionId) -> Option<Action> {
        let op = self.ops.iter().find(|o| o.id == id.op)?;
        op.instances().nth(id.pos as usize)
    }

    /// Whether action `id` still contributes to its register's value.
    pub fn is_visible(&self, schema: &Schema, id: &ActionId) -> Result<bool> {
        let action = self
            .find_action(id)
            .ok_or_else(|| Error::UnknownAction(id.clone()))?;
        let spec = schema.spec(action.desc.reg)?;
        Ok(spec.visible(id, &self.projection(action.desc.reg)))
    }

    /// Whether some action of `op` on one of `regs` is visible.
    pub fn op_visible_on(
        &self,
        schema: &Schema,
        op: &OpId,
        regs: &BTreeSet<RegisterId>,
    ) -> Result<bool> {
        let Some(o) = self.ops.iter().find(|o| &o.id == op) else {
            return Ok(false);
        };
        for a in o.instances() {
            if regs.contains(&a.desc.reg) && self.is_visible(schema, &a.id)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Action-level discard: `a2` hides `a1`, which is visible once the
    /// operation carrying `a2` is rolled back.
    pub fn action_discards(&self, schema: &Schema, a1: &ActionId, a2: &ActionId) -> Result<bool> {
        let x1 = self
            .find_action(a1)
            .ok_or_else(|| Error::UnknownAction(a1.clone()))?;
        let x2 = self
            .find_action(a2)
            .ok_or_else(|| Error::UnknownAction(a2.clone()))?;
        if x1.desc.reg != x2.desc.reg {
            return Err(Error::RegisterMismatch(a1.clone(), a2.clone()));
        }
        if self.is_visible(schema, a1)? {
            return Ok(false);
        }
        let without = self.rollback(&BTreeSet::from([a2.op.clone()]));
        without.is_visible(schema, a1)
    }

    /// Checks that every operation's premises precede it and match the
    /// premises recomputed against its prefix.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        let mut seen: BTreeSet<&OpId> = BTreeSet::new();
        let mut prefix: Vec<Action> = Vec::new();
        for op in &self.ops {
            for p in &op.premises {
                if !seen.contains(p) {
                    return Err(Error::UnknownPremise {
                        op: op.id.clone(),
                        premise: p.clone(),
                    });
                }
            }
            if !op.id.is_constructor() {
                let expect = entail_sequence(schema, &op.id, &op.actions, &prefix)?;
                if !expect.is_subset(&op.premises) {
                    return Err(Error::IllegalPlan(format!(
                        "premises of {} do not cover its observations",
                        op.id
                    )));
                }
            }
            prefix.extend(op.instances());
            seen.insert(&op.id);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ActionDesc;
    use crate::ids::ReplicaId;
    use crate::register::{LwwPolicy, RegisterKind};

    fn id(n: u64) -> OpId {
        OpId::new(ReplicaId::new("r").unwrap(), n)
    }

    fn plain2() -> Schema {
        Schema::of_kinds(
            &[RegisterKind::Plain, RegisterKind::Plain],
            LwwPolicy::Strict,
        )
    }

    #[test]
    fn rollback_restores_visibility() {
        let schema = plain2();
        let mut h = History::new(schema.constructors());
        let c0 = h.ops()[0].id.clone();
        h.push(Operation::new(
            id(1),
            vec![ActionDesc::mov(0, 7)],
            BTreeSet::from([c0.clone()]),
        ));
        let a0 = ActionId::new(c0.clone(), 0);
        let a1 = ActionId::new(id(1), 0);
        assert!(!h.is_visible(&schema, &a0).unwrap());
        assert!(h.is_visible(&schema, &a1).unwrap());
        assert!(h.action_discards(&schema, &a0, &a1).unwrap());
        assert!(!h.action_discards(&schema, &a1, &a0).unwrap());
        let back = h.rollback(&BTreeSet::from([id(1)]));
        assert!(back.is_visible(&schema, &a0).unwrap());
        h.validate(&schema).unwrap();
    }

    #[test]
    fn discard_across_registers_is_an_error() {
        let schema = plain2();
        let h = History::new(schema.constructors());
        let a = ActionId::new(h.ops()[0].id.clone(), 0);
        let b = ActionId::new(h.ops()[1].id.clone(), 0);
        assert_eq!(
            h.action_discards(&schema, &a, &b).unwrap_err(),
            Error::RegisterMismatch(a, b)
        );
    }

    #[test]
    fn validate_rejects_missing_observation() {
        let schema = plain2();
        let mut h = History::new(schema.constructors());
        h.push(Operation::new(
            id(1),
            vec![ActionDesc::mov(0, 7)],
            BTreeSet::new(),
        ));
        assert!(h.validate(&schema).is_err());
    }
}
