// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use entailsync::register::{
    check_discard_complete, ArithMode, ArithRegister, ArithState, BrokenDemoRegister, LwwPolicy,
    LwwRegister, PlainRegister, RegisterKind, RegisterState, Schema,
};
use entailsync::sim::{
    oracle_join_laws, oracle_state_set, Event, RunOptions, Session, ORACLE_MAX_OPS,
};
use entailsync::sync::ReplayAll;
use entailsync::{ActionDesc, ActionId, History, OpId, Operation, RegisterId, ReplicaId};

use common::{corpus, expect_shape, load, run, shape};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn join_laws() -> Outcome {
    let start = Instant::now();
    let trials = 500;
    oracle_join_laws(20_240_601, trials).map_err(|c| {
        format!(
            "trial {} broke {} ({} snapshots)",
            c.trial,
            c.law,
            c.trace.len()
        )
    })?;
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(10), "took {took:?}");
    Ok(format!("{trials} trials in {:.2?}", took))
}

fn central_fanout() -> Outcome {
    let mut s =
        Session::new(load("central_fanout"), RunOptions::default()).map_err(|e| e.to_string())?;
    let mut induced = 0;
    while let Some(step) = s.step().map_err(|e| e.to_string())? {
        if step.event == "freeze" {
            induced = s.conflicts().map_err(|e| e.to_string())?.len();
        }
    }
    let report = s.report().map_err(|e| e.to_string())?;
    ensure!(s.replica_names().len() == 4, "expected 4 replicas");
    let kinds: BTreeSet<_> = s
        .scenario()
        .registers
        .iter()
        .map(|r| format!("{:?}", r.kind))
        .collect();
    ensure!(kinds.len() >= 2, "register kinds not mixed");
    ensure!(induced >= 2, "only {induced} conflict(s) before freeze");
    let first = report.states.values().next().cloned();
    for (name, st) in &report.states {
        ensure!(
            Some(st) == first.as_ref(),
            "{name} differs: {st:?} vs {first:?}"
        );
    }
    ensure!(
        report.residual_conflicts.is_empty(),
        "residual conflicts remain"
    );
    ensure!(
        report.fanout_resolves == 0,
        "{} resolves during fan-out",
        report.fanout_resolves
    );
    Ok(format!(
        "{induced} conflicts resolved centrally, 0 during fan-out"
    ))
}

fn order_independence() -> Outcome {
    let mut checked = 0;
    let mut skipped = 0;
    for (name, scenario) in corpus() {
        let mut s = Session::new(scenario, RunOptions::default()).map_err(|e| e.to_string())?;
        loop {
            for r in s.replica_names().to_vec() {
                let replica = s.replica(&r).map_err(|e| e.to_string())?;
                let j = replica.journal();
                if !j.conflicting_pairs().map_err(|e| e.to_string())?.is_empty() {
                    continue;
                }
                match oracle_state_set(replica.graph(), replica.schema()) {
                    Ok(states) => {
                        ensure!(
                            states.len() == 1,
                            "{name}/{r} step {}: {} states",
                            s.cursor(),
                            states.len()
                        );
                        checked += 1;
                    }
                    Err(entailsync::Error::TooLarge(_)) => skipped += 1,
                    Err(e) => return Err(e.to_string()),
                }
            }
            if s.step().map_err(|e| e.to_string())?.is_none() {
                break;
            }
        }
    }
    ensure!(checked > 0, "no graph checked");
    Ok(format!("{checked} conflict-free graphs (<= {ORACLE_MAX_OPS} ops) singleton, {skipped} larger skipped"))
}

fn golden_scenarios() -> Outcome {
    let mut done = Vec::new();
    let goldens: Vec<(&str, common::Shape)> = vec![
        (
            "arith_merge",
            expect_shape(
                &["$c:0", "o'", "o1", "o2", "fix"],
                &[("$c:0", "o'"), ("o'", "o1"), ("o'", "o2"), ("o'", "fix")],
                &[("fix", "o1"), ("fix", "o2")],
                &[],
            ),
        ),
        (
            "two_premises",
            expect_shape(
                &["$c:0", "$c:1", "o'", "o''", "o1", "o2", "o3", "fix"],
                &[
                    ("$c:0", "o'"),
                    ("$c:1", "o''"),
                    ("o'", "o1"),
                    ("o''", "o1"),
                    ("o'", "o2"),
                    ("o''", "o2"),
                    ("o''", "o3"),
                    ("o'", "fix"),
                    ("o''", "fix"),
                ],
                &[("fix", "o1"), ("fix", "o2"), ("fix", "o3")],
                &[],
            ),
        ),
        (
            "cancel_and_replay",
            expect_shape(
                &["$c:0", "add2", "mov3", "add4", "mul5", "mov8"],
                &[
                    ("$c:0", "add2"),
                    ("add2", "mov3"),
                    ("add2", "add4"),
                    ("add2", "mul5"),
                    ("add2", "mov8"),
                ],
                &[("mov8", "add4"), ("mov8", "mul5")],
                &["mov3"],
            ),
        ),
        (
            "lww_replay",
            expect_shape(
                &["$c:0", "B2", "C2", "D1", "fix"],
                &[
                    ("$c:0", "B2"),
                    ("$c:0", "C2"),
                    ("$c:0", "D1"),
                    ("$c:0", "fix"),
                ],
                &[("fix", "B2"), ("fix", "C2"), ("fix", "D1")],
                &[],
            ),
        ),
        (
            "calendar",
            expect_shape(
                &["$c:0", "$c:1", "$c:2", "oA", "oB", "fix"],
                &[
                    ("$c:1", "oA"),
                    ("$c:2", "oA"),
                    ("$c:2", "oB"),
                    ("$c:1", "fix"),
                    ("$c:2", "fix"),
                ],
                &[("fix", "oA"), ("fix", "oB")],
                &[],
            ),
        ),
    ];
    for (name, want) in goldens {
        let s = run(name);
        let report = s.report().map_err(|e| e.to_string())?;
        ensure!(report.asserts_passed, "{name}: scenario checks failed");
        for r in s.replica_names() {
            let got = shape(s.replica(r).unwrap().graph(), s.labels());
            ensure!(got == want, "{name}/{r}: {got:?}");
        }
        done.push(name);
    }

    // cancel_and_replay specifics.
    let s = run("cancel_and_replay");
    let j = s.replica("p").unwrap().journal();
    let (add2, mov8) = (s.op("add2").unwrap(), s.op("mov8").unwrap());
    ensure!(
        j.discards(&add2, &mov8).unwrap(),
        "mov 8 does not discard add 2"
    );
    ensure!(
        j.node(&mov8).unwrap().actions == vec![ActionDesc::mov(0, 8)],
        "cancel_and_replay merge is not mov 8"
    );

    // lww_replay: the merge replays (B, 2).
    let s = run("lww_replay");
    let fix = s.op("fix").unwrap();
    ensure!(
        s.replica("a").unwrap().graph().node(&fix).unwrap().actions
            == vec![ActionDesc::mov_at(0, "B", 2)],
        "lww_replay merge does not replay (B, 2)"
    );

    // concurrent_merges: exchanging the two merges conflicts again.
    let mut s = Session::new(load("concurrent_merges"), RunOptions::default()).unwrap();
    let mut second = false;
    while s.step().unwrap().is_some() {
        let (Ok(m1), Ok(m2)) = (s.op("m1"), s.op("m2")) else {
            continue;
        };
        for c in s.replica("r1").unwrap().conflicts().unwrap() {
            let p = c.participants();
            second |= p.contains(&m1) && p.contains(&m2);
        }
    }
    ensure!(second, "no conflict between the two concurrent merges");
    ensure!(s.converged().unwrap(), "concurrent_merges did not settle");
    done.push("concurrent_merges");
    Ok(done.join(", "))
}

fn arith_walkthrough() -> Outcome {
    let schema = Schema::of_kinds(&[RegisterKind::Arith], LwwPolicy::Strict);
    let c = OpId::constructor(RegisterId(0));
    let r = ReplicaId::new("w").unwrap();
    let mut ops = vec![schema.constructor(RegisterId(0)).unwrap()];
    let mut prev = c.clone();
    for (n, a) in [
        ActionDesc::add(0, 2),
        ActionDesc::mul(0, 5),
        ActionDesc::mov(0, 3),
    ]
    .into_iter()
    .enumerate()
    {
        let id = OpId::new(r.clone(), n as u64 + 1);
        ops.push(Operation::new(id.clone(), vec![a], BTreeSet::from([prev])));
        prev = id;
    }
    let aid = |k: usize| ActionId::new(ops[k].id.clone(), 0);
    let st = |mode, base, actions: Vec<(ActionId, i64)>| {
        RegisterState::Arith(ArithState {
            mode,
            base,
            actions,
        })
    };
    let want_states = [
        st(ArithMode::Add, 0, vec![(aid(0), 0)]),
        st(ArithMode::Add, 0, vec![(aid(0), 0), (aid(1), 2)]),
        st(ArithMode::Mul, 2, vec![(aid(2), 5)]),
        st(ArithMode::Assign, 10, vec![(aid(3), 3)]),
    ];
    let want_vals = [0, 2, 10, 3];
    let mut got_vals = Vec::new();
    for k in 0..ops.len() {
        let h = History::new(ops[..=k].to_vec());
        let state = h
            .interpret(&schema)
            .map_err(|e| e.to_string())?
            .remove(&RegisterId(0))
            .unwrap();
        ensure!(state == want_states[k], "step {k}: {state:?}");
        got_vals.push(state.val());
    }
    ensure!(
        got_vals == want_vals.map(serde_json::Value::from),
        "vals {got_vals:?}"
    );
    Ok("vals 0, 2, 10, 3 with matching states".into())
}

fn lww_lost_update() -> Outcome {
    // strict: stop right before the manual plan
    let strict = load("lww_lost_update");
    let mut s = Session::new(strict.clone(), RunOptions::default()).unwrap();
    loop {
        let next = &s.scenario().events[s.cursor()];
        if matches!(next, Event::Resolve { .. }) {
            break;
        }
        s.step().unwrap();
    }
    let conflicts = s.conflicts().unwrap();
    ensure!(
        conflicts.len() == 1,
        "{} conflicts under strict",
        conflicts.len()
    );
    let p = conflicts[0].conflict.participants();
    let (b, c) = (s.op("B2").unwrap(), s.op("C2").unwrap());
    ensure!(p.contains(&b) && p.contains(&c), "participants {p:?}");

    // opid-tiebreak: same writes, no manual step
    let mut tie = strict;
    tie.registers[0].policy = LwwPolicy::OpidTiebreak;
    tie.events
        .retain(|e| !matches!(e, Event::Assert { .. } | Event::Resolve { .. }));
    tie.events.push(Event::SyncAll { reconciler: None });
    let first = Session::new(tie.clone(), RunOptions::default()).and_then(|mut s| {
        s.run()?;
        s.report()
    });
    let first = first.map_err(|e| e.to_string())?;
    let again = Session::new(tie, RunOptions::default()).and_then(|mut s| {
        s.run()?;
        s.report()
    });
    ensure!(first.converged, "tiebreak run did not converge");
    ensure!(
        Ok(&first) == again.as_ref(),
        "tiebreak run is not deterministic"
    );
    let val = &first.states["a"]["v"];
    ensure!(val.as_array().is_some_and(|v| v.len() == 1), "val {val}");
    Ok(format!(
        "strict: one conflict over B2 and C2; tiebreak: val {val}"
    ))
}

fn discard_completeness() -> Outcome {
    let mut notes = Vec::new();
    let plain = check_discard_complete(&PlainRegister, &ActionDesc::mov(0, 0), 6);
    let arith = check_discard_complete(&ArithRegister, &ActionDesc::add(0, 0), 6);
    let lww = check_discard_complete(
        &LwwRegister::new(LwwPolicy::Strict),
        &ActionDesc::mov_at(0, 0, 0),
        6,
    );
    let lww_tie = check_discard_complete(
        &LwwRegister::new(LwwPolicy::OpidTiebreak),
        &ActionDesc::mov_at(0, 0, 0),
        6,
    );
    for r in [&plain, &arith, &lww, &lww_tie] {
        ensure!(r.passed, "{} failed: {:?}", r.kind, r.counterexample);
        notes.push(format!("{} ({} histories)", r.kind, r.histories));
    }
    let broken = check_discard_complete(&BrokenDemoRegister, &ActionDesc::mov(0, 0), 6);
    let cex = broken.counterexample.clone().ok_or("broken spec passed")?;
    let smallest = (1..=6)
        .find(|&n| !check_discard_complete(&BrokenDemoRegister, &ActionDesc::mov(0, 0), n).passed)
        .ok_or("no size fails")?;
    ensure!(
        cex.history.len() == smallest,
        "counterexample has {} actions, smallest failing size is {smallest}",
        cex.history.len()
    );
    notes.push(format!(
        "broken-demo fails with {} actions",
        cex.history.len()
    ));
    Ok(notes.join(", "))
}

fn sync_idempotence_and_determinism() -> Outcome {
    let mut syncs = 0;
    for (name, scenario) in corpus() {
        let mut s = Session::new(scenario, RunOptions::default()).unwrap();
        loop {
            for r in s.replica_names().to_vec() {
                let mut replica = s.replica(&r).unwrap().clone();
                let (graph, pending) = (replica.graph().clone(), replica.pending().clone());
                let own = replica.publish();
                let report = replica.sync(&own, &ReplayAll).map_err(|e| e.to_string())?;
                ensure!(
                    !report.changed(),
                    "{name}/{r}: self-sync changed {report:?}"
                );
                ensure!(
                    replica.graph() == &graph && replica.pending() == &pending,
                    "{name}/{r}: state moved"
                );
                syncs += 1;
            }
            if s.step().unwrap().is_none() {
                break;
            }
        }
    }
    let bin = env!("CARGO_BIN_EXE_entailsync");
    let mut runs = 0;
    for (name, _) in corpus() {
        let path = common::scenario_path(&name);
        let mut variants = vec![vec!["--seed".to_owned(), "7".to_owned()]];
        if name == "central_fanout" {
            variants.push(vec![
                "--seed".into(),
                "11".into(),
                "--drop".into(),
                "0.3".into(),
            ]);
        }
        for extra in variants {
            let go = || {
                Command::new(bin)
                    .arg("run")
                    .arg(&path)
                    .args(&extra)
                    .output()
                    .unwrap()
            };
            let (a, b) = (go(), go());
            ensure!(!a.stdout.is_empty(), "{name}: empty output");
            ensure!(
                a.stdout == b.stdout && a.status == b.status,
                "{name} {extra:?}: outputs differ"
            );
            runs += 1;
        }
    }
    Ok(format!(
        "{syncs} self-syncs were no-ops, {runs} runs byte-identical"
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("join semilattice convergence", join_laws),
        ("central resolution then fan-out", central_fanout),
        ("order-independence oracle", order_independence),
        ("golden scenarios", golden_scenarios),
        ("arithmetic walkthrough", arith_walkthrough),
        ("lww lost update", lww_lost_update),
        ("discard-completeness", discard_completeness),
        (
            "sync idempotence and determinism",
            sync_idempotence_and_determinism,
        ),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", n + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
