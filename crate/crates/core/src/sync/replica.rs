// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use super::reconcile::{apply_plan, group_conflicts, Conflict, MergePlan, Reconciler, Resolution};
use crate::action::{ActionDesc, Operation};
use crate::error::{Error, Result};
use crate::graph::EntailmentGraph;
use crate::ids::{OpId, RegisterId, ReplicaId};
use crate::journal::Journal;
use crate::register::{entail_sequence, RegisterState, Schema};

/// How many follow-up resolutions a single merge may trigger.
const MAX_RESOLVE_DEPTH: usize = 4;

/// What one `sync` did.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SyncReport {
    pub applied: Vec<OpId>,
    /// Known operations that picked up new rebase targets.
    pub rolled_back: Vec<OpId>,
    /// Operations received already cancelled.
    pub skipped_cancelled: Vec<OpId>,
    /// Triggers quarantined because no plan was available.
    pub conflicts: Vec<OpId>,
    /// Operations held back because a premise was quarantined.
    pub blocked: Vec<OpId>,
    pub resolutions: Vec<Resolution>,
}

impl SyncReport {
    pub fn changed(&self) -> bool {
        !(self.applied.is_empty()
            && self.rolled_back.is_empty()
            && self.skipped_cancelled.is_empty()
            && self.conflicts.is_empty()
            && self.resolutions.is_empty())
    }
}

/// One replica: its graph plus quarantined remote operations.
#[derive(Debug, Clone)]
pub struct Replica {
    id: ReplicaId,
    schema: Arc<Schema>,
    graph: EntailmentGraph,
    clock: u64,
    pending: BTreeMap<OpId, Operation>,
}

impl Replica {
    pub fn new(id: ReplicaId, schema: Arc<Schema>) -> Self {
        let graph = EntailmentGraph::with_constructors(schema.constructors());
        Replica {
            id,
            schema,
            graph,
            clock: 0,
            pending: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> &ReplicaId {
        &self.id
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn graph(&self) -> &EntailmentGraph {
        &self.graph
    }

    pub fn journal(&self) -> Journal<'_> {
        Journal::new(&self.graph, &self.schema)
    }

    pub fn pending(&self) -> &BTreeMap<OpId, Operation> {
        &self.pending
    }

    pub fn state(&self) -> Result<BTreeMap<RegisterId, RegisterState>> {
        self.journal().state()
    }

    pub fn vals(&self) -> Result<BTreeMap<RegisterId, serde_json::Value>> {
        self.journal().vals()
    }

    /// Published snapshot of the graph.
    pub fn publish(&self) -> EntailmentGraph {
        self.graph.clone()
    }

    /// Lamport-style: above every counter seen so far.
    fn next_id(&mut self) -> OpId {
        let seen = self.graph.ids().map(OpId::counter).max().unwrap_or(0);
        self.tick(seen)
    }

    fn tick(&mut self, seen: u64) -> OpId {
        self.clock = self.clock.max(seen) + 1;
        OpId::new(self.id.clone(), self.clock)
    }

    /// Issues a local operation. Premises are what the actions observe in the
    /// induced history; concurrent local operations it would conflict with
    /// are added as premises too, so a replica never conflicts with itself.
    pub fn issue(&mut self, actions: Vec<ActionDesc>) -> Result<OpId> {
        if actions.is_empty() {
            return Err(Error::EmptyOperation);
        }
        let history = self.journal().history()?;
        let id = self.next_id();
        let mut premises = entail_sequence(&self.schema, &id, &actions, &history.actions())?;
        loop {
            let mut g = self.graph.clone();
            g.add(Operation::new(
                id.clone(),
                actions.clone(),
                premises.clone(),
            ))?;
            let clash = Journal::new(&g, &self.schema).conflicts_with(&id)?;
            if clash.is_empty() {
                self.graph = g;
                return Ok(id);
            }
            if clash.is_subset(&premises) {
                return Err(Error::LocalConflict(id));
            }
            premises.extend(clash);
        }
    }

    /// Integrates another replica's published graph.
    ///
    /// Remote operations are visited in causal order. Conflicting arrivals
    /// are quarantined and everything causally after them is held back; at
    /// the end of the pass the reconciler gets one chance per conflict group
    /// this remote delivered into, and if it resolved anything the pass is
    /// repeated so held-back operations can land. Groups left waiting by
    /// earlier syncs are untouched unless the remote carries them again.
    pub fn sync(
        &mut self,
        remote: &EntailmentGraph,
        reconciler: &dyn Reconciler,
    ) -> Result<SyncReport> {
        for c in self.schema.constructors() {
            match remote.node(&c.id) {
                Ok(theirs) if theirs == &c => {}
                Ok(_) | Err(_) => {
                    return Err(Error::ConstructorMismatch(
                        c.id.constructed_register().expect("constructor id"),
                    ))
                }
            }
        }
        let mut report = SyncReport::default();
        loop {
            let touched = self.integrate(remote, &mut report)?;
            let waiting = self.pending.len();
            let done = self.resolve_groups(reconciler, Some(&touched))?;
            if done.is_empty() && self.pending.len() == waiting {
                break;
            }
            report.resolutions.extend(done);
        }
        report.conflicts.retain(|t| self.pending.contains_key(t));
        report.conflicts.dedup();
        let mut seen = BTreeSet::new();
        report
            .blocked
            .retain(|b| !self.graph.contains(b) && seen.insert(b.clone()));
        Ok(report)
    }

    /// Returns the pending operations this remote carried.
    fn integrate(
        &mut self,
        remote: &EntailmentGraph,
        report: &mut SyncReport,
    ) -> Result<BTreeSet<OpId>> {
        let mut touched = BTreeSet::new();
        let overlay: BTreeSet<OpId> = remote
            .rebases()
            .iter()
            .filter(|(_, t)| !t.is_empty())
            .map(|(id, _)| id.clone())
            .collect();
        let mut blocked: BTreeSet<OpId> = BTreeSet::new();
        // rebases whose merge comes later in the remote order
        let mut late: Vec<(OpId, OpId)> = Vec::new();

        for id in remote.topological_order()? {
            let node = remote.node(&id)?;
            if remote.predecessors(&id).any(|p| blocked.contains(p)) {
                blocked.insert(id.clone());
                report.blocked.push(id);
                continue;
            }
            if self.graph.contains(&id) {
                if self.graph.node(&id)? != node {
                    return Err(Error::DivergentOperation(id));
                }
                let mine: BTreeSet<OpId> = self.graph.rebase_targets(&id).cloned().collect();
                let fresh: Vec<OpId> = remote
                    .rebase_targets(&id)
                    .filter(|t| !mine.contains(*t))
                    .cloned()
                    .collect();
                for t in &fresh {
                    if self.graph.contains(t) || t.is_tombstone() {
                        self.graph.adopt_rebase(&id, t)?;
                    } else {
                        late.push((id.clone(), t.clone()));
                    }
                }
                if !fresh.is_empty() {
                    report.rolled_back.push(id);
                }
                continue;
            }
            if remote.is_rebased(&id) {
                // someone already resolved it; their resolution wins over ours
                self.pending.remove(&id);
                self.graph.add(node.clone())?;
                for t in remote.rebase_targets(&id) {
                    if self.graph.contains(t) || t.is_tombstone() {
                        self.graph.adopt_rebase(&id, t)?;
                    } else {
                        late.push((id.clone(), t.clone()));
                    }
                }
                if remote.is_tombstoned(&id) {
                    report.skipped_cancelled.push(id);
                } else {
                    report.applied.push(id);
                }
                continue;
            }
            if self.pending.contains_key(&id) {
                touched.insert(id.clone());
                blocked.insert(id.clone());
                report.blocked.push(id);
                continue;
            }
            let mut g = self.graph.clone();
            g.add(node.clone())?;
            let clash = Journal::new(&g, &self.schema)
                .with_dead(&overlay)
                .conflicts_with(&id)?;
            if clash.is_empty() {
                self.graph = g;
                report.applied.push(id);
            } else {
                self.pending.insert(id.clone(), node.clone());
                touched.insert(id.clone());
                blocked.insert(id.clone());
                report.conflicts.push(id);
            }
        }
        for (id, t) in late {
            if self.graph.contains(&t) {
                self.graph.adopt_rebase(&id, &t)?;
            }
        }
        Ok(touched)
    }

    /// Graph with every pending trigger added.
    fn with_pending(&self, only: Option<&BTreeSet<OpId>>) -> Result<EntailmentGraph> {
        let mut g = self.graph.clone();
        let mut todo: Vec<&Operation> = self
            .pending
            .values()
            .filter(|o| only.is_none_or(|s| s.contains(&o.id)))
            .collect();
        while !todo.is_empty() {
            let before = todo.len();
            let mut rest = Vec::new();
            for op in todo {
                if op.premises.iter().all(|p| g.contains(p)) {
                    g.add(op.clone())?;
                } else {
                    rest.push(op);
                }
            }
            if rest.len() == before {
                return Err(Error::UnknownPremise {
                    op: rest[0].id.clone(),
                    premise: rest[0]
                        .premises
                        .iter()
                        .find(|p| !g.contains(p))
                        .cloned()
                        .expect("missing premise"),
                });
            }
            todo = rest;
        }
        Ok(g)
    }

    /// Pending conflicts, grouped so that overlapping ones resolve together.
    pub fn conflicts(&self) -> Result<Vec<Conflict>> {
        if self.pending.is_empty() {
            return Ok(Vec::new());
        }
        let g = self.with_pending(None)?;
        let j = Journal::new(&g, &self.schema);
        let mut each = Vec::new();
        for t in self.pending.keys() {
            each.push(Conflict::compute(&j, &BTreeSet::from([t.clone()]))?);
        }
        Ok(group_conflicts(each))
    }

    /// Resolves the pending conflict containing `trigger`, with an explicit
    /// plan or by asking `reconciler`. `Ok(None)` means no plan was produced.
    pub fn resolve(
        &mut self,
        trigger: &OpId,
        plan: Option<MergePlan>,
        reconciler: Option<&dyn Reconciler>,
    ) -> Result<Option<Vec<Resolution>>> {
        let group = self
            .conflicts()?
            .into_iter()
            .find(|c| c.triggers.contains(trigger))
            .ok_or_else(|| Error::NoPendingConflict(trigger.clone()))?;
        let g = self.with_pending(Some(&group.triggers))?;
        let done = self.resolve_in(g, &group.triggers, plan, reconciler)?;
        if done.is_some() {
            for t in &group.triggers {
                self.pending.remove(t);
            }
        }
        Ok(done)
    }

    /// Resolves every pending conflict the reconciler has a plan for.
    pub fn resolve_all(&mut self, reconciler: &dyn Reconciler) -> Result<Vec<Resolution>> {
        self.resolve_groups(reconciler, None)
    }

    fn resolve_groups(
        &mut self,
        reconciler: &dyn Reconciler,
        among: Option<&BTreeSet<OpId>>,
    ) -> Result<Vec<Resolution>> {
        let mut out = Vec::new();
        loop {
            let groups = self.conflicts()?;
            let mut progressed = false;
            for group in groups {
                if among.is_some_and(|a| a.is_disjoint(&group.triggers)) {
                    continue;
                }
                let Some(t) = group.triggers.first() else {
                    continue;
                };
                if !self.pending.contains_key(t) {
                    continue;
                }
                if let Some(done) = self.resolve(&t.clone(), None, Some(reconciler))? {
                    out.extend(done);
                    progressed = true;
                }
            }
            if !progressed {
                return Ok(out);
            }
        }
    }

    fn resolve_in(
        &mut self,
        g: EntailmentGraph,
        triggers: &BTreeSet<OpId>,
        plan: Option<MergePlan>,
        reconciler: Option<&dyn Reconciler>,
    ) -> Result<Option<Vec<Resolution>>> {
        let mut g = g;
        let mut triggers = triggers.clone();
        let mut plan = plan;
        let mut done = Vec::new();
        let schema = Arc::clone(&self.schema);
        for _ in 0..=MAX_RESOLVE_DEPTH {
            let journal = Journal::new(&g, &schema);
            let conflict = Conflict::compute(&journal, &triggers)?;
            if conflict.local.is_empty() && done.is_empty() && plan.is_none() {
                // nothing left to fight over
                self.graph = g;
                return Ok(Some(done));
            }
            let chosen = match plan.take() {
                Some(p) => Some(p),
                None => reconciler.and_then(|r| r.plan(&journal, &conflict)),
            };
            let Some(chosen) = chosen else {
                if done.is_empty() {
                    return Ok(None);
                }
                break;
            };
            let saved = self.clock;
            let merge_id = self.tick(g.ids().map(OpId::counter).max().unwrap_or(0));
            let (next, resolution) = match apply_plan(&journal, &conflict, &chosen, merge_id) {
                Ok(applied) => applied,
                Err(e) => {
                    // a refused plan leaves no trace
                    self.clock = saved;
                    return Err(e);
                }
            };
            g = next;
            let follow = resolution.merge.clone();
            done.push(resolution);
            let Some(m) = follow else { break };
            let j = Journal::new(&g, &schema);
            if j.conflicts_with(&m)?.is_empty() {
                break;
            }
            triggers = BTreeSet::from([m]);
        }
        self.graph = g;
        Ok(Some(done))
    }
}
