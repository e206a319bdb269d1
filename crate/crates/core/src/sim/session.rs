// SPDX-License-Identifier: Apache-2.0

//! Scenario execution.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::action::ActionDesc;
use crate::error::{Error, Result};
use crate::graph::EntailmentGraph;
use crate::ids::{OpId, RegisterId, ReplicaId};
use crate::register::{RegisterDef, RegisterKind, Schema};
use crate::sync::{
    Conflict, Manual, MergePlan, Reconciler, ReconcilerKind, Replica, Resolution, SyncReport,
};

use super::network::Network;
use super::scenario::{Check, Event, PlanSpec, RegRef, RegisterDecl, Scenario};

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub drop_probability: Option<f64>,
    pub stop_at_conflict: bool,
    /// Syncs never resolve on their own; conflicts wait for a submitted plan.
    pub interactive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssertRecord {
    pub step: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replica: Option<String>,
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResidualConflict {
    pub replica: String,
    #[serde(flatten)]
    pub conflict: Conflict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub scenario: String,
    pub seed: u64,
    pub converged: bool,
    pub graphs_equal: bool,
    pub stopped_at_conflict: bool,
    pub events_executed: usize,
    pub rounds: usize,
    pub states: BTreeMap<String, BTreeMap<String, serde_json::Value>>,
    pub residual_conflicts: Vec<ResidualConflict>,
    pub resolves: usize,
    pub fanout_resolves: usize,
    pub dropped_syncs: usize,
    pub asserts: Vec<AssertRecord>,
    pub asserts_passed: bool,
    pub labels: BTreeMap<String, OpId>,
    pub tombstoned: BTreeMap<String, Vec<OpId>>,
}

/// What one step did, for interactive drivers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutcome {
    pub step: usize,
    pub event: String,
    pub detail: serde_json::Value,
}

/// Builds the schema and register names for scenario-style declarations.
pub fn build_schema(registers: &[RegisterDecl]) -> Result<(Schema, Vec<String>)> {
    let mut defs = Vec::new();
    let mut names = Vec::new();
    for (i, decl) in registers.iter().enumerate() {
        let reg = RegisterId(i as u32);
        let constructor = match &decl.init {
            None => decl.kind.default_constructor(reg),
            Some(v) => vec![match decl.kind {
                RegisterKind::Arith => {
                    let n = v
                        .as_int()
                        .ok_or_else(|| Error::WrongValueType(format!("init of {reg}")))?;
                    ActionDesc::add(reg.0, n)
                }
                RegisterKind::Lww => ActionDesc::mov_at(reg.0, v.clone(), decl.t.unwrap_or(0)),
                RegisterKind::Plain | RegisterKind::BrokenDemo => ActionDesc::mov(reg.0, v.clone()),
            }],
        };
        defs.push(RegisterDef {
            spec: decl.kind.build(decl.policy),
            constructor,
        });
        names.push(decl.name.clone().unwrap_or_else(|| reg.to_string()));
    }
    let unique: BTreeSet<&String> = names.iter().collect();
    if unique.len() != names.len() {
        return Err(Error::Script("register names must be unique".into()));
    }
    Ok((Schema::new(defs)?, names))
}

pub struct Session {
    scenario: Scenario,
    options: RunOptions,
    seed: u64,
    reg_names: Vec<String>,
    replicas: BTreeMap<String, Replica>,
    published: BTreeMap<String, Vec<(usize, EntailmentGraph)>>,
    labels: BTreeMap<String, OpId>,
    network: Network,
    cursor: usize,
    frozen: bool,
    asserts: Vec<AssertRecord>,
    resolves: usize,
    fanout_resolves: usize,
    dropped_syncs: usize,
    rounds: usize,
    stopped: bool,
    /// (replica, trigger) -> replica the trigger came from
    sources: BTreeMap<(String, OpId), String>,
}

impl Session {
    pub fn new(scenario: Scenario, options: RunOptions) -> Result<Session> {
        scenario.validate()?;
        let (schema, reg_names) = build_schema(&scenario.registers)?;
        let schema = Arc::new(schema);
        let mut model = scenario.network.clone();
        let seed = options.seed.unwrap_or(model.seed);
        model.seed = seed;
        if let Some(p) = options.drop_probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Script(
                    "drop probability must be within [0, 1]".into(),
                ));
            }
            model.drop_probability = p;
        }
        let mut replicas = BTreeMap::new();
        let mut published = BTreeMap::new();
        for name in &scenario.replicas {
            let r = Replica::new(ReplicaId::new(name.as_str())?, schema.clone());
            published.insert(name.clone(), vec![(0, r.publish())]);
            replicas.insert(name.clone(), r);
        }
        Ok(Session {
            scenario,
            options,
            seed,
            reg_names,
            replicas,
            published,
            labels: BTreeMap::new(),
            network: Network::new(model),
            cursor: 0,
            frozen: false,
            asserts: Vec::new(),
            resolves: 0,
            fanout_resolves: 0,
            dropped_syncs: 0,
            rounds: 0,
            stopped: false,
            sources: BTreeMap::new(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn is_done(&self) -> bool {
        self.stopped || self.cursor >= self.scenario.events.len()
    }

    pub fn replica_names(&self) -> &[String] {
        &self.scenario.replicas
    }

    pub fn replica(&self, name: &str) -> Result<&Replica> {
        self.replicas
            .get(name)
            .ok_or_else(|| Error::Script(format!("unknown replica {name:?}")))
    }

    fn replica_mut(&mut self, name: &str) -> Result<&mut Replica> {
        self.replicas
            .get_mut(name)
            .ok_or_else(|| Error::Script(format!("unknown replica {name:?}")))
    }

    pub fn register_names(&self) -> &[String] {
        &self.reg_names
    }

    pub fn labels(&self) -> &BTreeMap<String, OpId> {
        &self.labels
    }

    /// Resolves a label or id text.
    pub fn op(&self, r: &str) -> Result<OpId> {
        if let Some(id) = self.labels.get(r) {
            return Ok(id.clone());
        }
        r.parse()
            .map_err(|_| Error::Script(format!("unknown operation reference {r:?}")))
    }

    fn ops(&self, refs: &[String]) -> Result<BTreeSet<OpId>> {
        refs.iter().map(|r| self.op(r)).collect()
    }

    fn reg(&self, r: &RegRef) -> Result<RegisterId> {
        match r {
            RegRef::Index(i) if (*i as usize) < self.reg_names.len() => Ok(RegisterId(*i)),
            RegRef::Index(i) => Err(Error::UnknownRegister(RegisterId(*i))),
            RegRef::Name(n) => self
                .reg_names
                .iter()
                .position(|x| x == n)
                .map(|i| RegisterId(i as u32))
                .ok_or_else(|| Error::Script(format!("unknown register {n:?}"))),
        }
    }

    pub fn plan_from_spec(&self, spec: &PlanSpec) -> Result<MergePlan> {
        Ok(MergePlan {
            trigger: spec.trigger.as_deref().map(|t| self.op(t)).transpose()?,
            keep: self.ops(&spec.keep)?,
            cancel: self.ops(&spec.cancel)?,
            merged: spec.merged.clone(),
        })
    }

    fn reconciler(&self, kind: Option<ReconcilerKind>) -> Box<dyn Reconciler> {
        if self.options.interactive {
            return Box::new(Manual);
        }
        kind.unwrap_or(self.scenario.reconciler).build()
    }

    fn publish(&mut self, name: &str) -> Result<()> {
        let g = self.replica(name)?.publish();
        let step = self.cursor;
        self.published
            .get_mut(name)
            .expect("every replica has a publish log")
            .push((step, g));
        Ok(())
    }

    fn changed(&mut self, name: &str) -> Result<()> {
        if self.scenario.auto_publish {
            self.publish(name)?;
        }
        Ok(())
    }

    fn snapshot(&self, name: &str) -> EntailmentGraph {
        let delay = self.network.model.delay;
        let log = &self.published[name];
        log.iter()
            .rev()
            .find(|(step, _)| step + delay <= self.cursor)
            .unwrap_or(&log[0])
            .1
            .clone()
    }

    fn record_sync(&mut self, from: &str, to: &str, report: &SyncReport) {
        for t in &report.conflicts {
            self.sources
                .insert((to.to_owned(), t.clone()), from.to_owned());
        }
    }

    fn label_merge(&mut self, label: &Option<String>, done: &[Resolution]) {
        if let (Some(l), Some(m)) = (label, done.iter().find_map(|r| r.merge.clone())) {
            self.labels.insert(l.clone(), m);
        }
    }

    /// One sync from `from`'s visible snapshot into `to`, subject to the
    /// network. Returns `None` when every attempt was dropped.
    fn sync_pair(
        &mut self,
        from: &str,
        to: &str,
        graph: Option<EntailmentGraph>,
        reconciler: &dyn Reconciler,
        attempts: u32,
    ) -> Result<Option<SyncReport>> {
        if from == to {
            return Err(Error::Script(format!(
                "replica {from:?} cannot sync from itself"
            )));
        }
        for _ in 0..attempts.max(1) {
            if !self.network.delivers(from, to) {
                self.dropped_syncs += 1;
                continue;
            }
            let remote = graph.unwrap_or_else(|| self.snapshot(from));
            let report = self.replica_mut(to)?.sync(&remote, reconciler)?;
            self.resolves += report.resolutions.len();
            self.record_sync(from, to, &report);
            if report.changed() {
                self.changed(to)?;
            }
            return Ok(Some(report));
        }
        Ok(None)
    }

    fn sync_all(&mut self, reconciler: &dyn Reconciler) -> Result<serde_json::Value> {
        let names = self.scenario.replicas.clone();
        let n = names.len();
        let bound = 4 * n * n;
        let mut pairs: Vec<(String, String)> = Vec::new();
        for a in &names {
            for b in &names {
                if a != b && !self.network.model.severed(a, b) {
                    pairs.push((a.clone(), b.clone()));
                }
            }
        }
        let mut rounds = 0;
        let mut quiet = pairs.is_empty();
        while !quiet && rounds < bound {
            rounds += 1;
            pairs.shuffle(self.network.rng());
            quiet = true;
            for (a, b) in pairs.clone() {
                let fresh = self.replica(&a)?.publish();
                match self.sync_pair(&a, &b, Some(fresh), reconciler, 1)? {
                    Some(r) if !r.changed() => {}
                    _ => quiet = false,
                }
            }
        }
        self.rounds += rounds;
        Ok(serde_json::json!({"rounds": rounds, "quiescent": quiet}))
    }

    /// Executes the next event.
    pub fn step(&mut self) -> Result<Option<StepOutcome>> {
        if self.is_done() {
            return Ok(None);
        }
        let step = self.cursor;
        let event = self.scenario.events[step].clone();
        let detail = self.execute(&event)?;
        self.cursor += 1;
        if self.options.stop_at_conflict && self.has_pending() {
            self.stopped = true;
        }
        Ok(Some(StepOutcome {
            step,
            event: event.kind().to_owned(),
            detail,
        }))
    }

    /// Runs to the end (or to the first conflict when asked to stop there).
    pub fn run(&mut self) -> Result<()> {
        while self.step()?.is_some() {}
        Ok(())
    }

    fn execute(&mut self, event: &Event) -> Result<serde_json::Value> {
        use serde_json::json;
        match event {
            Event::Issue {
                replica,
                label,
                actions,
            } => {
                if self.frozen {
                    return Err(Error::Script(format!("issue on {replica:?} after freeze")));
                }
                let id = self.replica_mut(replica)?.issue(actions.clone())?;
                if let Some(l) = label {
                    self.labels.insert(l.clone(), id.clone());
                }
                self.changed(replica)?;
                Ok(json!({"op": id}))
            }
            Event::Publish { replica } => {
                self.publish(replica)?;
                Ok(json!({}))
            }
            Event::Sync {
                from,
                to,
                reconciler,
                merge_label,
                retries,
            } => {
                let rec = self.reconciler(*reconciler);
                match self.sync_pair(from, to, None, rec.as_ref(), retries + 1)? {
                    Some(report) => {
                        self.label_merge(merge_label, &report.resolutions);
                        Ok(serde_json::to_value(&report).expect("report serializes"))
                    }
                    None => Ok(json!({"dropped": true})),
                }
            }
            Event::SyncAll { reconciler } => {
                let rec = self.reconciler(*reconciler);
                self.sync_all(rec.as_ref())
            }
            Event::Resolve {
                replica,
                plan,
                reconciler,
                label,
                expect_reject,
            } => {
                let done = match plan {
                    Some(spec) if *expect_reject => {
                        let plan = self.plan_from_spec(spec)?;
                        let outcome = self.apply_plan(replica, plan);
                        let detail = match &outcome {
                            Ok(_) => "plan was accepted".to_owned(),
                            Err(e) => e.to_string(),
                        };
                        self.asserts.push(AssertRecord {
                            step: self.cursor,
                            replica: Some(replica.clone()),
                            check: "rejected".into(),
                            passed: outcome.is_err(),
                            detail: detail.clone(),
                        });
                        return Ok(json!({"rejected": outcome.is_err(), "detail": detail}));
                    }
                    Some(spec) => {
                        let plan = self.plan_from_spec(spec)?;
                        self.apply_plan(replica, plan)?
                    }
                    None => {
                        let rec = reconciler.unwrap_or(self.scenario.reconciler).build();
                        let done = self.replica_mut(replica)?.resolve_all(rec.as_ref())?;
                        self.resolves += done.len();
                        if !done.is_empty() {
                            self.changed(replica)?;
                        }
                        done
                    }
                };
                self.label_merge(label, &done);
                Ok(serde_json::to_value(&done).expect("resolutions serialize"))
            }
            Event::Freeze => {
                self.frozen = true;
                Ok(json!({}))
            }
            Event::Fanout { from } => {
                let rec = self.reconciler(None);
                let mut resolves = 0;
                for to in self.scenario.replicas.clone() {
                    if &to == from {
                        continue;
                    }
                    let fresh = self.replica(from)?.publish();
                    let report = self.replica_mut(&to)?.sync(&fresh, rec.as_ref())?;
                    resolves += report.resolutions.len();
                    self.record_sync(from, &to, &report);
                    if report.changed() {
                        self.changed(&to)?;
                    }
                }
                self.resolves += resolves;
                self.fanout_resolves += resolves;
                Ok(json!({"resolves": resolves}))
            }
            Event::Assert { replica, check } => {
                let (passed, detail) = self.evaluate(replica.as_deref(), check)?;
                let kind = serde_json::to_value(check).expect("check serializes")["kind"]
                    .as_str()
                    .unwrap_or_default()
                    .to_owned();
                self.asserts.push(AssertRecord {
                    step: self.cursor,
                    replica: replica.clone(),
                    check: kind,
                    passed,
                    detail: detail.clone(),
                });
                Ok(json!({"passed": passed, "detail": detail}))
            }
        }
    }

    /// Resolves with an explicit plan on `replica` and re-syncs from the
    /// trigger's source so held-back operations land.
    fn apply_plan(&mut self, replica: &str, plan: MergePlan) -> Result<Vec<Resolution>> {
        let trigger = match &plan.trigger {
            Some(t) => t.clone(),
            None => self
                .replica(replica)?
                .pending()
                .keys()
                .next()
                .cloned()
                .ok_or_else(|| Error::Script(format!("no pending conflict on {replica:?}")))?,
        };
        let done = self
            .replica_mut(replica)?
            .resolve(&trigger, Some(plan), None)?
            .unwrap_or_default();
        self.resolves += done.len();
        self.changed(replica)?;
        let resolved: Vec<(String, OpId)> = self
            .sources
            .keys()
            .filter(|(r, t)| r == replica && !self.replicas[replica].pending().contains_key(t))
            .cloned()
            .collect();
        let mut resume = BTreeSet::new();
        for key in resolved {
            if let Some(from) = self.sources.remove(&key) {
                resume.insert(from);
            }
        }
        let rec = self.reconciler(None);
        for from in resume {
            let snap = self.snapshot(&from);
            let report = self.replica_mut(replica)?.sync(&snap, rec.as_ref())?;
            self.resolves += report.resolutions.len();
            self.record_sync(&from, replica, &report);
            if report.changed() {
                self.changed(replica)?;
            }
        }
        Ok(done)
    }

    /// Submits a plan from outside the script (service API). Without a
    /// replica, the one holding the plan's trigger is used.
    pub fn submit_plan(
        &mut self,
        replica: Option<&str>,
        plan: MergePlan,
    ) -> Result<Vec<Resolution>> {
        let name = match replica {
            Some(r) => r.to_owned(),
            None => {
                let holds = |r: &Replica| match &plan.trigger {
                    Some(t) => r.pending().contains_key(t),
                    None => !r.pending().is_empty(),
                };
                self.scenario
                    .replicas
                    .iter()
                    .find(|n| holds(&self.replicas[n.as_str()]))
                    .cloned()
                    .ok_or_else(|| match &plan.trigger {
                        Some(t) => Error::NoPendingConflict(t.clone()),
                        None => Error::Script("no pending conflict".into()),
                    })?
            }
        };
        self.apply_plan(&name, plan)
    }

    /// Ad hoc sync outside the script, honouring the network model.
    pub fn sync_now(&mut self, from: &str, to: &str) -> Result<Option<SyncReport>> {
        self.replica(from)?;
        self.replica(to)?;
        let rec = self.reconciler(None);
        self.sync_pair(from, to, None, rec.as_ref(), 1)
    }

    pub fn has_pending(&self) -> bool {
        self.replicas.values().any(|r| !r.pending().is_empty())
    }

    pub fn conflicts(&self) -> Result<Vec<ResidualConflict>> {
        let mut out = Vec::new();
        for name in &self.scenario.replicas {
            for conflict in self.replicas[name].conflicts()? {
                out.push(ResidualConflict {
                    replica: name.clone(),
                    conflict,
                });
            }
        }
        Ok(out)
    }

    pub fn states(&self) -> Result<BTreeMap<String, BTreeMap<String, serde_json::Value>>> {
        let mut out = BTreeMap::new();
        for (name, r) in &self.replicas {
            let vals = r
                .vals()?
                .into_iter()
                .map(|(reg, v)| (self.reg_names[reg.index()].clone(), v))
                .collect();
            out.insert(name.clone(), vals);
        }
        Ok(out)
    }

    pub fn converged(&self) -> Result<bool> {
        if self.has_pending() {
            return Ok(false);
        }
        let states = self.states()?;
        let mut it = states.values();
        let first = it.next();
        Ok(it.all(|s| Some(s) == first))
    }

    fn graphs_equal(&self) -> bool {
        let mut it = self.replicas.values().map(Replica::graph);
        let first = it.next();
        it.all(|g| Some(g) == first)
    }

    pub fn report(&self) -> Result<ConvergenceReport> {
        let tombstoned = self
            .replicas
            .iter()
            .map(|(name, r)| {
                let ids = r
                    .graph()
                    .ids()
                    .filter(|id| r.graph().is_tombstoned(id))
                    .cloned()
                    .collect();
                (name.clone(), ids)
            })
            .collect();
        Ok(ConvergenceReport {
            scenario: self.scenario.name.clone().unwrap_or_default(),
            seed: self.seed,
            converged: self.converged()?,
            graphs_equal: self.graphs_equal(),
            stopped_at_conflict: self.stopped,
            events_executed: self.cursor,
            rounds: self.rounds,
            states: self.states()?,
            residual_conflicts: self.conflicts()?,
            resolves: self.resolves,
            fanout_resolves: self.fanout_resolves,
            dropped_syncs: self.dropped_syncs,
            asserts_passed: self.asserts.iter().all(|a| a.passed),
            asserts: self.asserts.clone(),
            labels: self.labels.clone(),
            tombstoned,
        })
    }

    fn names(ids: &BTreeSet<OpId>) -> String {
        let v: Vec<String> = ids.iter().map(ToString::to_string).collect();
        format!("{{{}}}", v.join(", "))
    }

    fn evaluate(&self, replica: Option<&str>, check: &Check) -> Result<(bool, String)> {
        let need = || -> Result<&Replica> {
            let name = replica.ok_or_else(|| Error::Script("this check needs a replica".into()))?;
            self.replica(name)
        };
        Ok(match check {
            Check::Val { register, equals } => {
                let reg = self.reg(register)?;
                let got = need()?
                    .vals()?
                    .remove(&reg)
                    .unwrap_or(serde_json::Value::Null);
                (
                    &got == equals,
                    format!("{} = {got}", self.reg_names[reg.index()]),
                )
            }
            Check::Pending { count } => {
                let got = match replica {
                    Some(_) => need()?.conflicts()?.len(),
                    None => self.conflicts()?.len(),
                };
                (got == *count, format!("{got} pending conflict group(s)"))
            }
            Check::Conflict {
                index,
                triggers,
                local,
                premises,
                scope,
            } => {
                let groups = need()?.conflicts()?;
                let Some(c) = groups.get(*index) else {
                    return Ok((false, format!("only {} conflict group(s)", groups.len())));
                };
                let mut ok = true;
                for (want, got) in [
                    (triggers, &c.triggers),
                    (local, &c.local),
                    (premises, &c.premises),
                    (scope, &c.scope),
                ] {
                    if let Some(w) = want {
                        ok &= &self.ops(w)? == got;
                    }
                }
                let detail = format!(
                    "triggers {} local {} premises {} scope {}",
                    Self::names(&c.triggers),
                    Self::names(&c.local),
                    Self::names(&c.premises),
                    Self::names(&c.scope)
                );
                (ok, detail)
            }
            Check::Tombstoned { op } => {
                let id = self.op(op)?;
                let g = need()?.graph();
                (
                    g.is_tombstoned(&id),
                    format!("{id} tombstoned: {}", g.is_tombstoned(&id)),
                )
            }
            Check::Rebased { op, to } => {
                let id = self.op(op)?;
                let g = need()?.graph();
                let targets: BTreeSet<OpId> = g.rebase_targets(&id).cloned().collect();
                let ok = match to {
                    Some(t) => targets.contains(&self.op(t)?),
                    None => !targets.is_empty(),
                };
                (ok, format!("{id} rebased to {}", Self::names(&targets)))
            }
            Check::Live { op, expect } => {
                let id = self.op(op)?;
                let r = need()?;
                let live = r.graph().contains(&id) && r.journal().is_live(&id);
                (live == *expect, format!("{id} live: {live}"))
            }
            Check::Discards {
                premise,
                op,
                expect,
            } => {
                let (p, o) = (self.op(premise)?, self.op(op)?);
                let got = need()?.journal().discards(&p, &o)?;
                (got == *expect, format!("{o} discards {p}: {got}"))
            }
            Check::Premises { op, equals } => {
                let id = self.op(op)?;
                let got = need()?.graph().premises_of(&id)?.clone();
                (
                    got == self.ops(equals)?,
                    format!("premises of {id}: {}", Self::names(&got)),
                )
            }
            Check::Converged => {
                let ok = self.converged()?;
                (ok, format!("converged: {ok}"))
            }
            Check::Resolves { count } => (
                self.resolves == *count,
                format!("{} resolve(s)", self.resolves),
            ),
        })
    }
}

/// Convenience: parse, run, report.
pub fn run_scenario(scenario: Scenario, options: RunOptions) -> Result<ConvergenceReport> {
    let mut s = Session::new(scenario, options)?;
    s.run()?;
    s.report()
}
