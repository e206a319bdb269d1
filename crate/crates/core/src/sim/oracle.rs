// SPDX-License-Identifier: Apache-2.0

//! Brute-force checks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{ActionDesc, Operation};
use crate::error::{Error, Result};
use crate::graph::EntailmentGraph;
use crate::ids::{OpId, RegisterId, ReplicaId};
use crate::journal::Journal;
use crate::register::{LwwPolicy, RegisterKind, RegisterState, Schema};

/// Largest number of non-constructor live operations enumerated.
pub const ORACLE_MAX_OPS: usize = 8;

/// Interprets every topological order of the live operations and returns
/// the distinct per-register states. Constructors are placed first; they
/// touch disjoint registers so their relative order is irrelevant.
pub fn oracle_state_set(
    g: &EntailmentGraph,
    schema: &Schema,
) -> Result<Vec<BTreeMap<RegisterId, RegisterState>>> {
    let journal = Journal::new(g, schema);
    let live = journal.live_ops()?;
    let (ctors, ops): (Vec<OpId>, Vec<OpId>) = live.into_iter().partition(OpId::is_constructor);
    if ops.len() > ORACLE_MAX_OPS {
        return Err(Error::TooLarge(ops.len()));
    }
    // before[i] = indices that must precede ops[i]
    let before: Vec<Vec<usize>> = ops
        .iter()
        .map(|o| {
            let past = g.ancestry(o);
            (0..ops.len())
                .filter(|&j| ops[j] != *o && past.contains(&ops[j]))
                .collect()
        })
        .collect();
    let base: Vec<Operation> = ctors
        .iter()
        .map(|c| g.node(c).cloned())
        .collect::<Result<_>>()?;
    let nodes: Vec<Operation> = ops
        .iter()
        .map(|o| g.node(o).cloned())
        .collect::<Result<_>>()?;

    let mut states = Vec::new();
    let mut order = Vec::with_capacity(ops.len());
    let mut placed = vec![false; ops.len()];
    enumerate(&before, &mut placed, &mut order, &mut |order| {
        let mut seq = base.clone();
        seq.extend(order.iter().map(|&i| nodes[i].clone()));
        let s = crate::history::History::new(seq).interpret(schema)?;
        if !states.contains(&s) {
            states.push(s);
        }
        Ok(())
    })?;
    Ok(states)
}

fn enumerate(
    before: &[Vec<usize>],
    placed: &mut Vec<bool>,
    order: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if order.len() == before.len() {
        return visit(order);
    }
    for i in 0..before.len() {
        if placed[i] || before[i].iter().any(|&j| !placed[j]) {
            continue;
        }
        placed[i] = true;
        order.push(i);
        enumerate(before, placed, order, visit)?;
        order.pop();
        placed[i] = false;
    }
    Ok(())
}

/// A failing join-law trial.
#[derive(Debug, Clone)]
pub struct JoinCounterexample {
    pub trial: usize,
    pub law: &'static str,
    /// The update snapshots, in generation order.
    pub trace: Vec<EntailmentGraph>,
}

const ORIGINS: [&str; 3] = ["p", "q", "r"];

/// Builds a random trace of at most `max_ops` operations and `max_rebases`
/// rebases spread over three origins, returning every intermediate
/// snapshot. A rebase goes either to the tombstone or to a merge operation
/// created on the spot, as a resolution would.
pub fn random_trace(
    rng: &mut ChaCha8Rng,
    max_ops: usize,
    max_rebases: usize,
) -> Vec<EntailmentGraph> {
    let schema = Schema::of_kinds(
        &[RegisterKind::Plain, RegisterKind::Arith],
        LwwPolicy::Strict,
    );
    let start = EntailmentGraph::with_constructors(schema.constructors());
    let mut graphs = vec![start.clone(); ORIGINS.len()];
    let mut clocks = [0u64; 3];
    let mut snaps = vec![start];
    let ops = rng.gen_range(1..=max_ops);
    let rebases = rng.gen_range(0..=max_rebases);
    let (mut issued, mut rebased) = (0, 0);
    let mut guard = 0;
    while (issued < ops || rebased < rebases) && guard < 200 {
        guard += 1;
        let o = rng.gen_range(0..ORIGINS.len());
        if rng.gen_bool(0.4) {
            let src = rng.gen_range(0..ORIGINS.len());
            let other = graphs[src].clone();
            graphs[o].join_in(&other).expect("origins never diverge");
        }
        let g = &mut graphs[o];
        let ids: Vec<OpId> = g.ids().cloned().collect();
        let mut fresh_id = |rng: &mut ChaCha8Rng| {
            let seen = ids.iter().map(OpId::counter).max().unwrap_or(0);
            clocks[o] = clocks[o].max(seen) + 1;
            let id = OpId::new(ReplicaId::new(ORIGINS[o]).expect("valid"), clocks[o]);
            let action = if rng.gen_bool(0.5) {
                ActionDesc::mov(0, rng.gen_range(0..4i64))
            } else {
                ActionDesc::add(1, rng.gen_range(1..4))
            };
            (id, action)
        };
        if issued < ops && (rebased >= rebases || rng.gen_bool(0.7)) {
            let k = rng.gen_range(1..=ids.len().min(3));
            let premises: BTreeSet<OpId> = ids.choose_multiple(rng, k).cloned().collect();
            let (id, action) = fresh_id(rng);
            g.add(Operation::new(id, vec![action], premises))
                .expect("premises present");
            issued += 1;
        } else if rebased < rebases {
            let movable: Vec<OpId> = ids
                .iter()
                .filter(|i| !i.is_constructor())
                .cloned()
                .collect();
            let Some(op) = movable.choose(rng).cloned() else {
                continue;
            };
            if issued < ops && rng.gen_bool(0.7) {
                let premises = g.premises_of(&op).expect("present").clone();
                let (merge, action) = fresh_id(rng);
                g.add(Operation::new(merge.clone(), vec![action], premises))
                    .expect("premises present");
                g.rebase(&op, &merge).expect("fresh merge is not reachable");
                issued += 1;
            } else {
                g.rebase(&op, &OpId::tombstone())
                    .expect("tombstone is always a target");
            }
            rebased += 1;
        } else {
            continue;
        }
        snaps.push(graphs[o].clone());
    }
    snaps
}

/// Random traces delivered in random orders to three virtual replicas.
/// Each replica must end structurally identical, and join must be
/// commutative, associative and idempotent on the trial's snapshots.
pub fn oracle_join_laws(seed: u64, trials: usize) -> std::result::Result<(), JoinCounterexample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let trace = random_trace(&mut rng, 10, 3);
        let fail = |law| JoinCounterexample {
            trial,
            law,
            trace: trace.clone(),
        };
        let mut finals = Vec::new();
        for _ in 0..3 {
            let mut order: Vec<&EntailmentGraph> = trace.iter().collect();
            order.shuffle(&mut rng);
            let mut acc = EntailmentGraph::new();
            for u in order {
                acc.join_in(u).map_err(|_| fail("delivery"))?;
            }
            finals.push(acc);
        }
        if finals.windows(2).any(|w| w[0] != w[1]) {
            return Err(fail("convergence"));
        }
        let pick = |rng: &mut ChaCha8Rng| trace.choose(rng).expect("non-empty").clone();
        let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let j = |x: &EntailmentGraph, y: &EntailmentGraph| x.join(y).map_err(|_| fail("join"));
        if j(&a, &b)? != j(&b, &a)? {
            return Err(fail("commutativity"));
        }
        if j(&j(&a, &b)?, &c)? != j(&a, &j(&b, &c)?)? {
            return Err(fail("associativity"));
        }
        if j(&a, &a)? != a {
            return Err(fail("idempotence"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_only_is_a_singleton() {
        let schema = Schema::of_kinds(
            &[RegisterKind::Plain, RegisterKind::Arith],
            LwwPolicy::Strict,
        );
        let g = EntailmentGraph::with_constructors(schema.constructors());
        assert_eq!(oracle_state_set(&g, &schema).unwrap().len(), 1);
    }

    #[test]
    fn concurrent_overwrites_give_two_states() {
        let schema = Schema::of_kinds(&[RegisterKind::Plain], LwwPolicy::Strict);
        let mut g = EntailmentGraph::with_constructors(schema.constructors());
        let c = OpId::constructor(RegisterId(0));
        for (r, v) in [("a", 1), ("b", 2)] {
            let id = OpId::new(ReplicaId::new(r).unwrap(), 1);
            g.add(Operation::new(
                id,
                vec![ActionDesc::mov(0, v)],
                BTreeSet::from([c.clone()]),
            ))
            .unwrap();
        }
        assert_eq!(oracle_state_set(&g, &schema).unwrap().len(), 2);
    }

    #[test]
    fn too_many_ops() {
        let schema = Schema::of_kinds(&[RegisterKind::Arith], LwwPolicy::Strict);
        let mut g = EntailmentGraph::with_constructors(schema.constructors());
        let c = OpId::constructor(RegisterId(0));
        for n in 1..=9 {
            let id = OpId::new(ReplicaId::new("a").unwrap(), n);
            g.add(Operation::new(
                id,
                vec![ActionDesc::add(0, 1)],
                BTreeSet::from([c.clone()]),
            ))
            .unwrap();
        }
        assert!(matches!(
            oracle_state_set(&g, &schema),
            Err(Error::TooLarge(9))
        ));
    }

    #[test]
    fn join_laws_hold_on_a_few_trials() {
        oracle_join_laws(3, 40).unwrap();
    }

    #[test]
    fn duplicate_rebase_from_two_sources_is_absorbed() {
        let schema = Schema::of_kinds(&[RegisterKind::Plain], LwwPolicy::Strict);
        let mut g = EntailmentGraph::with_constructors(schema.constructors());
        let c = OpId::constructor(RegisterId(0));
        let a = OpId::new(ReplicaId::new("a").unwrap(), 1);
        g.add(Operation::new(
            a.clone(),
            vec![ActionDesc::mov(0, 1)],
            BTreeSet::from([c]),
        ))
        .unwrap();
        let mut x = g.clone();
        x.rebase(&a, &OpId::tombstone()).unwrap();
        let y = x.clone();
        assert_eq!(g.join(&x).unwrap().join(&y).unwrap(), x);
    }
}
