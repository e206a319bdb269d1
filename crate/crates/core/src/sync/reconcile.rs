// SPDX-License-Identifier: Apache-2.0

//! Conflicts, merge plans and the strategies that produce plans.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::action::{ActionDesc, ActionKind, Operation};
use crate::error::{Error, Result};
use crate::graph::EntailmentGraph;
use crate::ids::OpId;
use crate::journal::Journal;
use crate::register::{entail_sequence, RegisterState};

/// A conflict between incoming triggers and local operations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Conflict {
    /// Remote operations whose arrival raised the conflict.
    pub triggers: BTreeSet<OpId>,
    /// Live operations the triggers conflict with.
    pub local: BTreeSet<OpId>,
    /// Shared premises discarded by some participant.
    pub premises: BTreeSet<OpId>,
    /// Live operations entailed by those premises; a plan partitions them.
    pub scope: BTreeSet<OpId>,
}

impl Conflict {
    /// Computes the conflict raised by `triggers`, which must be in the graph.
    pub fn compute(journal: &Journal<'_>, triggers: &BTreeSet<OpId>) -> Result<Conflict> {
        let mut local = BTreeSet::new();
        let mut premises = BTreeSet::new();
        for t in triggers {
            for x in journal.conflicts_with(t)? {
                premises.extend(journal.conflicting_premises(&[t.clone(), x.clone()])?);
                if !triggers.contains(&x) {
                    local.insert(x);
                }
            }
        }
        // ancestors of a conflicting premise stay out: rebasing one would
        // put it below the merge that still depends on that premise
        let below: BTreeSet<OpId> = premises
            .iter()
            .flat_map(|p| journal.graph.ancestry(p))
            .collect();
        let mut scope = BTreeSet::new();
        for x in journal.live_ops()? {
            if !below.contains(&x) && premises.iter().any(|p| journal.entails_star(p, &x)) {
                scope.insert(x);
            }
        }
        scope.extend(triggers.iter().filter(|t| journal.is_live(t)).cloned());
        Ok(Conflict {
            triggers: triggers.clone(),
            local,
            premises,
            scope,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.local.is_empty() && self.premises.is_empty()
    }

    pub fn participants(&self) -> BTreeSet<OpId> {
        self.triggers.union(&self.local).cloned().collect()
    }
}

/// How a conflict is to be resolved: which scope operations survive inside
/// the merge operation, which are cancelled, and the merge's actions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergePlan {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<OpId>,
    #[serde(default)]
    pub keep: BTreeSet<OpId>,
    #[serde(default)]
    pub cancel: BTreeSet<OpId>,
    #[serde(default)]
    pub merged: Vec<ActionDesc>,
}

/// Outcome of applying a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub merge: Option<OpId>,
    pub kept: BTreeSet<OpId>,
    pub cancelled: BTreeSet<OpId>,
}

/// Checks `plan` against `conflict` and applies it to `graph`, creating the
/// merge operation `merge_id` when there is anything to merge.
pub fn apply_plan(
    journal: &Journal<'_>,
    conflict: &Conflict,
    plan: &MergePlan,
    merge_id: OpId,
) -> Result<(EntailmentGraph, Resolution)> {
    let scope = &conflict.scope;
    if !plan.keep.is_disjoint(&plan.cancel) {
        return Err(Error::IllegalPlan("keep and cancel overlap".into()));
    }
    let covered: BTreeSet<OpId> = plan.keep.union(&plan.cancel).cloned().collect();
    if &covered != scope {
        let list: Vec<String> = scope.iter().map(ToString::to_string).collect();
        return Err(Error::IllegalPlan(format!(
            "keep and cancel must partition the scope [{}]",
            list.join(", ")
        )));
    }
    for k in &plan.keep {
        if let Some(p) = journal
            .graph
            .premises_of(k)?
            .intersection(&plan.cancel)
            .next()
        {
            return Err(Error::IllegalPlan(format!(
                "kept operation {k} depends on cancelled {p}"
            )));
        }
    }
    for desc in &plan.merged {
        journal.schema.check(desc)?;
    }

    // the merge is built on the participants' causal past only
    let mut context: BTreeSet<OpId> = journal
        .graph
        .ids()
        .filter(|i| i.is_constructor())
        .cloned()
        .collect();
    let mut allowed = BTreeSet::new();
    for x in scope.iter().chain(conflict.local.iter()) {
        context.extend(journal.graph.ancestry(x));
        allowed.extend(journal.graph.premises_of(x)?.iter().cloned());
    }
    let base = journal.history_of(&context)?.rollback(scope);
    let merged_premises =
        entail_sequence(journal.schema, &merge_id, &plan.merged, &base.actions())?;
    for p in &merged_premises {
        if !allowed.iter().any(|q| journal.entails_star(p, q)) {
            return Err(Error::ForeignPremise(p.clone()));
        }
    }

    let mut graph = journal.graph.clone();
    let merge = if plan.keep.is_empty() && plan.merged.is_empty() {
        None
    } else {
        let mut premises = merged_premises;
        for k in &plan.keep {
            premises.extend(
                journal
                    .graph
                    .premises_of(k)?
                    .iter()
                    .filter(|p| !scope.contains(*p) && journal.is_live(p))
                    .cloned(),
            );
        }
        graph.add(Operation::new(
            merge_id.clone(),
            plan.merged.clone(),
            premises,
        ))?;
        Some(merge_id)
    };
    for k in &plan.keep {
        graph.rebase(k, merge.as_ref().expect("merge exists when keeping"))?;
    }
    for c in &plan.cancel {
        graph.rebase(c, &OpId::tombstone())?;
    }
    Ok((
        graph,
        Resolution {
            merge,
            kept: plan.keep.clone(),
            cancelled: plan.cancel.clone(),
        },
    ))
}

/// Produces merge plans; returning `None` leaves the conflict pending.
pub trait Reconciler: Send + Sync {
    fn name(&self) -> &str;
    fn plan(&self, journal: &Journal<'_>, conflict: &Conflict) -> Option<MergePlan>;
}

/// Keeps everything and replays the scope's actions in induced order.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReplayAll;

impl Reconciler for ReplayAll {
    fn name(&self) -> &str {
        "replay-all"
    }

    fn plan(&self, journal: &Journal<'_>, conflict: &Conflict) -> Option<MergePlan> {
        let order = journal.graph.topological_order().ok()?;
        let merged = order
            .iter()
            .filter(|id| conflict.scope.contains(*id))
            .flat_map(|id| {
                journal
                    .graph
                    .node(id)
                    .map(|o| o.actions.clone())
                    .unwrap_or_default()
            })
            .collect();
        Some(MergePlan {
            trigger: conflict.triggers.first().cloned(),
            keep: conflict.scope.clone(),
            cancel: BTreeSet::new(),
            merged,
        })
    }
}

/// Replays the winning write of every last-writer-wins register in scope.
/// Gives up on ties under the strict policy and on other register kinds.
#[derive(Debug, Clone, Copy, Default)]
pub struct LwwAuto;

impl Reconciler for LwwAuto {
    fn name(&self) -> &str {
        "lww-auto"
    }

    fn plan(&self, journal: &Journal<'_>, conflict: &Conflict) -> Option<MergePlan> {
        let mut regs = BTreeSet::new();
        for id in &conflict.scope {
            let op = journal.graph.node(id).ok()?;
            for a in &op.actions {
                if journal.schema.spec(a.reg).ok()?.kind() != "lww" {
                    return None;
                }
                if a.op == ActionKind::Mov {
                    regs.insert(a.reg);
                }
            }
        }
        let state = journal.state().ok()?;
        let mut merged = Vec::new();
        for reg in regs {
            let RegisterState::Lww(s) = state.get(&reg)? else {
                return None;
            };
            let [w] = s.winners()[..] else {
                return None;
            };
            merged.push(ActionDesc::mov_at(reg.0, w.value.clone(), w.t));
        }
        Some(MergePlan {
            trigger: conflict.triggers.first().cloned(),
            keep: conflict.scope.clone(),
            cancel: BTreeSet::new(),
            merged,
        })
    }
}

/// Never produces a plan: conflicts wait for an explicit resolution.
#[derive(Debug, Clone, Copy, Default)]
pub struct Manual;

impl Reconciler for Manual {
    fn name(&self) -> &str {
        "manual"
    }

    fn plan(&self, _journal: &Journal<'_>, _conflict: &Conflict) -> Option<MergePlan> {
        None
    }
}

/// Pre-recorded plans, matched by trigger or else by scope.
#[derive(Debug, Clone, Default)]
pub struct Scripted {
    pub plans: Vec<MergePlan>,
}

impl Reconciler for Scripted {
    fn name(&self) -> &str {
        "scripted"
    }

    fn plan(&self, _journal: &Journal<'_>, conflict: &Conflict) -> Option<MergePlan> {
        let by_trigger = self.plans.iter().find(|p| {
            p.trigger
                .as_ref()
                .is_some_and(|t| conflict.triggers.contains(t))
        });
        let by_scope = || {
            self.plans.iter().find(|p| {
                let covered: BTreeSet<OpId> = p.keep.union(&p.cancel).cloned().collect();
                covered == conflict.scope
            })
        };
        by_trigger.or_else(by_scope).cloned()
    }
}

/// Named reconciler selection used by scenarios and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ReconcilerKind {
    #[default]
    #[serde(rename = "replay-all")]
    ReplayAll,
    #[serde(rename = "lww-auto")]
    LwwAuto,
    #[serde(rename = "manual")]
    Manual,
}

impl ReconcilerKind {
    pub fn build(self) -> Box<dyn Reconciler> {
        match self {
            ReconcilerKind::ReplayAll => Box::new(ReplayAll),
            ReconcilerKind::LwwAuto => Box::new(LwwAuto),
            ReconcilerKind::Manual => Box::new(Manual),
        }
    }
}

/// Groups per-trigger conflicts whose scopes (or participants) overlap.
pub fn group_conflicts(conflicts: Vec<Conflict>) -> Vec<Conflict> {
    let mut groups: Vec<Conflict> = Vec::new();
    for c in conflicts {
        let touching = |g: &Conflict| {
            !g.scope.is_disjoint(&c.scope) || !g.participants().is_disjoint(&c.participants())
        };
        let (mut hit, rest): (Vec<Conflict>, Vec<Conflict>) =
            groups.into_iter().partition(touching);
        let mut merged = c;
        for g in hit.drain(..) {
            merged.triggers.extend(g.triggers);
            merged.local.extend(g.local);
            merged.premises.extend(g.premises);
            merged.scope.extend(g.scope);
        }
        merged.local.retain(|x| !merged.triggers.contains(x));
        groups = rest;
        groups.push(merged);
    }
    groups.sort_by(|a, b| a.triggers.first().cmp(&b.triggers.first()));
    groups
}
