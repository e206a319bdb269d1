// SPDX-License-Identifier: Apache-2.0

//! The entailment graph: a grow-only DAG of operations.
//!
//! Nodes carry their immutable premise sets, which are the entailment edges
//! (`premise -> op`). Rebasing `o` onto a merge operation `m` adds the edge
//! `m -> o`, so `o` (now an empty action sequence) and everything after it is
//! ordered behind the merge. Rebase targets per operation form a grow-only
//! set; the tombstone is a target that is never a node.
//!
//! Join is componentwise union, which makes graphs a join-semilattice.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::action::Operation;
use crate::error::{Error, Result};
use crate::ids::OpId;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntailmentGraph {
    nodes: BTreeMap<OpId, Operation>,
    /// op -> ops listing it as a premise
    children: BTreeMap<OpId, BTreeSet<OpId>>,
    /// op -> merge operations (or the tombstone) it was rebased to
    rebases: BTreeMap<OpId, BTreeSet<OpId>>,
    /// merge operation -> ops rebased onto it
    rebased_onto: BTreeMap<OpId, BTreeSet<OpId>>,
}

impl EntailmentGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// A graph holding only the given constructors.
    pub fn with_constructors(constructors: impl IntoIterator<Item = Operation>) -> Self {
        let mut g = Self::new();
        for c in constructors {
            g.add(c).expect("constructors have no premises");
        }
        g
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &OpId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node(&self, id: &OpId) -> Result<&Operation> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::UnknownOperation(id.clone()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Operation> {
        self.nodes.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &OpId> {
        self.nodes.keys()
    }

    pub fn premises_of(&self, id: &OpId) -> Result<&BTreeSet<OpId>> {
        self.node(id).map(|o| &o.premises)
    }

    pub fn children_of(&self, id: &OpId) -> impl Iterator<Item = &OpId> {
        self.children.get(id).into_iter().flatten()
    }

    /// Rebase targets recorded for `id` (empty when live).
    pub fn rebase_targets(&self, id: &OpId) -> impl Iterator<Item = &OpId> {
        self.rebases.get(id).into_iter().flatten()
    }

    /// Operations rebased onto `merge`.
    pub fn rebased_onto(&self, merge: &OpId) -> impl Iterator<Item = &OpId> {
        self.rebased_onto.get(merge).into_iter().flatten()
    }

    pub fn rebases(&self) -> &BTreeMap<OpId, BTreeSet<OpId>> {
        &self.rebases
    }

    pub fn is_rebased(&self, id: &OpId) -> bool {
        self.rebases.get(id).is_some_and(|t| !t.is_empty())
    }

    pub fn is_tombstoned(&self, id: &OpId) -> bool {
        self.rebases
            .get(id)
            .is_some_and(|t| t.contains(&OpId::tombstone()))
    }

    /// Adds `op` with entailment edges from each of its premises.
    pub fn add(&mut self, op: Operation) -> Result<()> {
        if op.id.is_tombstone() {
            return Err(Error::IllegalPlan(
                "the tombstone is not an operation".into(),
            ));
        }
        if self.nodes.contains_key(&op.id) {
            return Err(Error::DuplicateOperation(op.id));
        }
        for p in &op.premises {
            if !self.nodes.contains_key(p) {
                return Err(Error::UnknownPremise {
                    op: op.id.clone(),
                    premise: p.clone(),
                });
            }
        }
        for p in &op.premises {
            self.children
                .entry(p.clone())
                .or_default()
                .insert(op.id.clone());
        }
        self.nodes.insert(op.id.clone(), op);
        Ok(())
    }

    /// Records that `op` is rebased to `target` (a node or the tombstone).
    pub fn rebase(&mut self, op: &OpId, target: &OpId) -> Result<()> {
        if !self.nodes.contains_key(op) {
            return Err(Error::UnknownOperation(op.clone()));
        }
        if op == target {
            return Err(Error::CycleDetected(op.clone()));
        }
        if !target.is_tombstone() {
            if !self.nodes.contains_key(target) {
                return Err(Error::UnknownOperation(target.clone()));
            }
            if self.reaches(op, target) {
                return Err(Error::CycleDetected(target.clone()));
            }
            self.rebased_onto
                .entry(target.clone())
                .or_default()
                .insert(op.clone());
        }
        self.rebases
            .entry(op.clone())
            .or_default()
            .insert(target.clone());
        Ok(())
    }

    /// Direct successors over entailment and rebase edges.
    pub fn successors(&self, id: &OpId) -> impl Iterator<Item = &OpId> {
        self.children_of(id).chain(self.rebased_onto(id))
    }

    /// Direct predecessors over entailment and rebase edges.
    pub fn predecessors<'a>(&'a self, id: &OpId) -> impl Iterator<Item = &'a OpId> + 'a {
        let premises = self
            .nodes
            .get(id)
            .map(|o| &o.premises)
            .into_iter()
            .flatten();
        let merges = self
            .rebases
            .get(id)
            .into_iter()
            .flatten()
            .filter(|t| !t.is_tombstone());
        premises.chain(merges)
    }

    /// Reflexive-transitive reachability over entailment and rebase edges.
    pub fn reaches(&self, from: &OpId, to: &OpId) -> bool {
        if from == to {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            for s in self.successors(x) {
                if s == to {
                    return true;
                }
                if seen.insert(s) {
                    stack.push(s);
                }
            }
        }
        false
    }

    /// Strict descendants of `root`.
    pub fn descendants(&self, root: &OpId) -> BTreeSet<OpId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![root.clone()];
        while let Some(x) = stack.pop() {
            for s in self.successors(&x) {
                if out.insert(s.clone()) {
                    stack.push(s.clone());
                }
            }
        }
        out
    }

    /// `root` and all of its ancestors.
    pub fn ancestry(&self, root: &OpId) -> BTreeSet<OpId> {
        let mut out = BTreeSet::from([root.clone()]);
        let mut stack = vec![root.clone()];
        while let Some(x) = stack.pop() {
            for p in self.predecessors(&x) {
                if out.insert(p.clone()) {
                    stack.push(p.clone());
                }
            }
        }
        out
    }

    /// Deterministic topological order of every node: among ready nodes the
    /// smallest id goes first. Concurrent resolutions can make rebase edges
    /// cyclic; then rebase edges are admitted in (merge, op) order and the
    /// ones that would close a cycle are ignored for ordering.
    pub fn topological_order(&self) -> Result<Vec<OpId>> {
        let all: BTreeMap<&OpId, Vec<&OpId>> = self
            .nodes
            .keys()
            .map(|id| (id, self.predecessors(id).collect()))
            .collect();
        if let Some(order) = kahn(&all) {
            return Ok(order);
        }
        let mut preds: BTreeMap<&OpId, Vec<&OpId>> = self
            .nodes
            .iter()
            .map(|(id, op)| (id, op.premises.iter().collect()))
            .collect();
        let mut succs: BTreeMap<&OpId, Vec<&OpId>> = BTreeMap::new();
        for (id, ps) in &preds {
            for p in ps {
                succs.entry(*p).or_default().push(*id);
            }
        }
        for (merge, ops) in &self.rebased_onto {
            for op in ops {
                if reaches_in(&succs, op, merge) {
                    continue;
                }
                preds.get_mut(op).expect("rebased op is a node").push(merge);
                succs.entry(merge).or_default().push(op);
            }
        }
        kahn(&preds).ok_or_else(|| {
            let stuck = self
                .nodes
                .keys()
                .next()
                .cloned()
                .unwrap_or_else(OpId::tombstone);
            Error::CycleDetected(stuck)
        })
    }

    /// Records a rebase made elsewhere, without the local cycle check.
    pub fn adopt_rebase(&mut self, op: &OpId, target: &OpId) -> Result<()> {
        if !self.nodes.contains_key(op) {
            return Err(Error::UnknownOperation(op.clone()));
        }
        if !target.is_tombstone() {
            if !self.nodes.contains_key(target) {
                return Err(Error::UnknownOperation(target.clone()));
            }
            self.rebased_onto
                .entry(target.clone())
                .or_default()
                .insert(op.clone());
        }
        self.rebases
            .entry(op.clone())
            .or_default()
            .insert(target.clone());
        Ok(())
    }

    /// Least upper bound of two graphs.
    pub fn join(&self, other: &EntailmentGraph) -> Result<EntailmentGraph> {
        let mut out = self.clone();
        out.join_in(other)?;
        Ok(out)
    }

    pub fn join_in(&mut self, other: &EntailmentGraph) -> Result<()> {
        for (id, op) in &other.nodes {
            if let Some(mine) = self.nodes.get(id) {
                if mine != op {
                    return Err(match id.constructed_register() {
                        Some(reg) => Error::ConstructorMismatch(reg),
                        None => Error::DivergentOperation(id.clone()),
                    });
                }
            }
        }
        for id in other.topological_order()? {
            if !self.nodes.contains_key(&id) {
                self.add(other.nodes[&id].clone())?;
            }
        }
        for (op, targets) in &other.rebases {
            for t in targets {
                if !t.is_tombstone() {
                    self.rebased_onto
                        .entry(t.clone())
                        .or_default()
                        .insert(op.clone());
                }
                self.rebases
                    .entry(op.clone())
                    .or_default()
                    .insert(t.clone());
            }
        }
        self.topological_order()?;
        Ok(())
    }

    /// True when `other` is contained in `self` (the join order).
    pub fn contains_graph(&self, other: &EntailmentGraph) -> bool {
        other
            .nodes
            .iter()
            .all(|(id, op)| self.nodes.get(id) == Some(op))
            && other
                .rebases
                .iter()
                .all(|(id, ts)| self.rebases.get(id).is_some_and(|mine| ts.is_subset(mine)))
    }
}

fn kahn(preds: &BTreeMap<&OpId, Vec<&OpId>>) -> Option<Vec<OpId>> {
    let mut indegree: BTreeMap<&OpId, usize> = BTreeMap::new();
    let mut succs: BTreeMap<&OpId, Vec<&OpId>> = BTreeMap::new();
    for (id, ps) in preds {
        indegree.insert(*id, ps.len());
        for p in ps {
            succs.entry(*p).or_default().push(*id);
        }
    }
    let mut ready: BinaryHeap<Reverse<&OpId>> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| Reverse(*id))
        .collect();
    let mut order = Vec::with_capacity(preds.len());
    while let Some(Reverse(id)) = ready.pop() {
        order.push(id.clone());
        for s in succs.get(id).into_iter().flatten() {
            let d = indegree.get_mut(s).expect("successor is a node");
            *d -= 1;
            if *d == 0 {
                ready.push(Reverse(*s));
            }
        }
    }
    (order.len() == preds.len()).then_some(order)
}

fn reaches_in(succs: &BTreeMap<&OpId, Vec<&OpId>>, from: &OpId, to: &OpId) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(x) = stack.pop() {
        if x == to {
            return true;
        }
        for s in succs.get(x).into_iter().flatten() {
            if seen.insert(*s) {
                stack.push(*s);
            }
        }
    }
    false
}
