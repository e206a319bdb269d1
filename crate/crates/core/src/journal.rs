// SPDX-License-Identifier: Apache-2.0

//! Conflict detection over an entailment graph.
//!
//! An operation `o` discards a premise `p` when, in the causal past of `o`,
//! `p` is visible without `o` and hidden with it (on the registers `o`
//! writes). Two concurrent operations conflict when a premise of one is
//! discarded by the other.

use std::collections::{BTreeMap, BTreeSet};

use crate::action::Operation;
use crate::error::Result;
use crate::graph::EntailmentGraph;
use crate::history::History;
use crate::ids::{OpId, RegisterId};
use crate::register::{RegisterState, Schema};

/// A read view of a graph, optionally treating extra operations as dead.
#[derive(Clone, Copy)]
pub struct Journal<'a> {
    pub graph: &'a EntailmentGraph,
    pub schema: &'a Schema,
    dead: Option<&'a BTreeSet<OpId>>,
}

impl<'a> Journal<'a> {
    pub fn new(graph: &'a EntailmentGraph, schema: &'a Schema) -> Self {
        Journal {
            graph,
            schema,
            dead: None,
        }
    }

    pub fn with_dead(mut self, dead: &'a BTreeSet<OpId>) -> Self {
        self.dead = Some(dead);
        self
    }

    /// Neither rebased nor tombstoned (nor in the dead overlay).
    pub fn is_live(&self, id: &OpId) -> bool {
        !self.graph.is_rebased(id) && !self.dead.is_some_and(|d| d.contains(id))
    }

    /// Live operations in topological order.
    pub fn live_ops(&self) -> Result<Vec<OpId>> {
        Ok(self
            .graph
            .topological_order()?
            .into_iter()
            .filter(|id| self.is_live(id))
            .collect())
    }

    /// The induced history: live operations in topological order.
    pub fn history(&self) -> Result<History> {
        self.history_within(None)
    }

    fn history_within(&self, keep: Option<&BTreeSet<OpId>>) -> Result<History> {
        let mut ops = Vec::new();
        for id in self.graph.topological_order()? {
            if keep.is_some_and(|k| !k.contains(&id)) || !self.is_live(&id) {
                continue;
            }
            ops.push(self.graph.node(&id)?.clone());
        }
        Ok(History::new(ops))
    }

    /// Induced history restricted to `ids`.
    pub fn history_of(&self, ids: &BTreeSet<OpId>) -> Result<History> {
        self.history_within(Some(ids))
    }

    pub fn state(&self) -> Result<BTreeMap<RegisterId, RegisterState>> {
        self.history()?.interpret(self.schema)
    }

    pub fn vals(&self) -> Result<BTreeMap<RegisterId, serde_json::Value>> {
        self.history()?.vals(self.schema)
    }

    pub fn concurrent(&self, a: &OpId, b: &OpId) -> bool {
        !self.graph.reaches(a, b) && !self.graph.reaches(b, a)
    }

    /// Reflexive-transitive entailment over premise edges only.
    pub fn entails_star(&self, p: &OpId, o: &OpId) -> bool {
        if p == o {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![o.clone()];
        while let Some(x) = stack.pop() {
            let Ok(node) = self.graph.node(&x) else {
                continue;
            };
            for q in &node.premises {
                if q == p {
                    return true;
                }
                if seen.insert(q.clone()) {
                    stack.push(q.clone());
                }
            }
        }
        false
    }

    fn past_history(&self, o: &OpId) -> Result<History> {
        let past = self.graph.ancestry(o);
        let mut ops = Vec::new();
        for id in self.graph.topological_order()? {
            if !past.contains(&id) || (&id != o && !self.is_live(&id)) {
                continue;
            }
            ops.push(self.graph.node(&id)?.clone());
        }
        Ok(History::new(ops))
    }

    /// Whether `o` discards `p`.
    pub fn discards(&self, p: &OpId, o: &OpId) -> Result<bool> {
        if p == o || !self.entails_star(p, o) {
            return Ok(false);
        }
        let node = self.graph.node(o)?;
        let regs = node.registers();
        let with = self.past_history(o)?;
        if with.op_visible_on(self.schema, p, &regs)? {
            return Ok(false);
        }
        let without = with.rollback(&BTreeSet::from([o.clone()]));
        without.op_visible_on(self.schema, p, &regs)
    }

    /// Direct premises of `o` that `o` discards.
    pub fn discarded_by(&self, o: &OpId) -> Result<BTreeSet<OpId>> {
        let mut out = BTreeSet::new();
        for p in self.graph.premises_of(o)? {
            if self.discards(p, o)? {
                out.insert(p.clone());
            }
        }
        Ok(out)
    }

    /// Premises shared by all of `ops`.
    pub fn common_premises(&self, ops: &[OpId]) -> Result<BTreeSet<OpId>> {
        let mut iter = ops.iter();
        let Some(first) = iter.next() else {
            return Ok(BTreeSet::new());
        };
        let mut common = self.graph.premises_of(first)?.clone();
        for o in iter {
            let ps = self.graph.premises_of(o)?;
            common.retain(|p| ps.contains(p));
        }
        Ok(common)
    }

    /// Premises of some member that another member discards.
    pub fn conflicting_premises(&self, ops: &[OpId]) -> Result<BTreeSet<OpId>> {
        let mut out = BTreeSet::new();
        for (i, oi) in ops.iter().enumerate() {
            for p in self.graph.premises_of(oi)? {
                if out.contains(p) {
                    continue;
                }
                for (j, oj) in ops.iter().enumerate() {
                    if i != j && self.discards(p, oj)? {
                        out.insert(p.clone());
                        break;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Causally related operations are always compatible; concurrent ones
    /// are compatible when they share no discarded premise.
    pub fn compatible(&self, a: &OpId, b: &OpId) -> Result<bool> {
        if !self.concurrent(a, b) {
            return Ok(true);
        }
        Ok(self
            .conflicting_premises(&[a.clone(), b.clone()])?
            .is_empty())
    }

    /// Live operations concurrent with `o` that conflict with it.
    pub fn conflicts_with(&self, o: &OpId) -> Result<BTreeSet<OpId>> {
        let mut out = BTreeSet::new();
        if !self.is_live(o) {
            return Ok(out);
        }
        for x in self.live_ops()? {
            if &x != o && !self.compatible(o, &x)? {
                out.insert(x);
            }
        }
        Ok(out)
    }

    /// All conflicting live pairs `(a, b)` with `a < b`.
    pub fn conflicting_pairs(&self) -> Result<Vec<(OpId, OpId)>> {
        let live = self.live_ops()?;
        let mut out = Vec::new();
        for (i, a) in live.iter().enumerate() {
            for b in &live[i + 1..] {
                if !self.compatible(a, b)? {
                    let (x, y) = if a < b { (a, b) } else { (b, a) };
                    out.push((x.clone(), y.clone()));
                }
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn node(&self, id: &OpId) -> Result<&'a Operation> {
        self.graph.node(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ActionDesc;
    use crate::ids::ReplicaId;
    use crate::register::{LwwPolicy, RegisterKind};

    fn id(r: &str, n: u64) -> OpId {
        OpId::new(ReplicaId::new(r).unwrap(), n)
    }

    fn add(g: &mut EntailmentGraph, oid: OpId, actions: Vec<ActionDesc>, premises: &[&OpId]) {
        g.add(Operation::new(
            oid,
            actions,
            premises.iter().map(|p| (*p).clone()).collect(),
        ))
        .unwrap();
    }

    #[test]
    fn concurrent_overwrites_conflict() {
        let schema = Schema::of_kinds(&[RegisterKind::Plain], LwwPolicy::Strict);
        let mut g = EntailmentGraph::with_constructors(schema.constructors());
        let c = OpId::constructor(RegisterId(0));
        add(&mut g, id("a", 1), vec![ActionDesc::mov(0, 1)], &[&c]);
        add(&mut g, id("b", 1), vec![ActionDesc::mov(0, 2)], &[&c]);
        let j = Journal::new(&g, &schema);
        assert!(j.discards(&c, &id("a", 1)).unwrap());
        assert_eq!(
            j.conflicting_premises(&[id("a", 1), id("b", 1)]).unwrap(),
            BTreeSet::from([c.clone()])
        );
        assert!(!j.compatible(&id("a", 1), &id("b", 1)).unwrap());
        assert_eq!(j.conflicting_pairs().unwrap().len(), 1);
    }

    #[test]
    fn sequential_overwrite_is_compatible() {
        let schema = Schema::of_kinds(&[RegisterKind::Plain], LwwPolicy::Strict);
        let mut g = EntailmentGraph::with_constructors(schema.constructors());
        let c = OpId::constructor(RegisterId(0));
        add(&mut g, id("a", 1), vec![ActionDesc::mov(0, 1)], &[&c]);
        add(
            &mut g,
            id("a", 2),
            vec![ActionDesc::mov(0, 2)],
            &[&id("a", 1)],
        );
        let j = Journal::new(&g, &schema);
        assert!(j.conflicting_pairs().unwrap().is_empty());
        assert_eq!(j.vals().unwrap()[&RegisterId(0)], serde_json::json!(2));
    }

    #[test]
    fn concurrent_additions_commute() {
        let schema = Schema::of_kinds(&[RegisterKind::Arith], LwwPolicy::Strict);
        let mut g = EntailmentGraph::with_constructors(schema.constructors());
        let c = OpId::constructor(RegisterId(0));
        add(&mut g, id("a", 1), vec![ActionDesc::add(0, 2)], &[&c]);
        add(&mut g, id("b", 1), vec![ActionDesc::add(0, 4)], &[&c]);
        let j = Journal::new(&g, &schema);
        assert!(j.compatible(&id("a", 1), &id("b", 1)).unwrap());
    }

    #[test]
    fn touch_does_not_discard() {
        let schema = Schema::of_kinds(&[RegisterKind::Plain], LwwPolicy::Strict);
        let mut g = EntailmentGraph::with_constructors(schema.constructors());
        let c = OpId::constructor(RegisterId(0));
        add(&mut g, id("a", 1), vec![ActionDesc::touch(0)], &[&c]);
        add(&mut g, id("b", 1), vec![ActionDesc::touch(0)], &[&c]);
        let j = Journal::new(&g, &schema);
        assert!(j.discarded_by(&id("a", 1)).unwrap().is_empty());
        assert!(j.compatible(&id("a", 1), &id("b", 1)).unwrap());
    }

    #[test]
    fn dead_overlay_hides_operations() {
        let schema = Schema::of_kinds(&[RegisterKind::Plain], LwwPolicy::Strict);
        let mut g = EntailmentGraph::with_constructors(schema.constructors());
        let c = OpId::constructor(RegisterId(0));
        add(&mut g, id("a", 1), vec![ActionDesc::mov(0, 1)], &[&c]);
        let dead = BTreeSet::from([id("a", 1)]);
        let j = Journal::new(&g, &schema).with_dead(&dead);
        assert_eq!(j.live_ops().unwrap(), vec![c]);
    }
}
