// SPDX-License-Identifier: Apache-2.0

mod common;

use entailsync::sim::{run_scenario, RunOptions, Scenario, Session};
use entailsync::Error;

use common::{corpus, load, run};

#[test]
fn every_shipped_scenario_converges_with_passing_checks() {
    for (name, scenario) in corpus() {
        let report = run_scenario(scenario, RunOptions::default()).unwrap();
        assert!(report.converged, "{name}");
        assert!(report.graphs_equal, "{name}");
        let failed: Vec<_> = report.asserts.iter().filter(|a| !a.passed).collect();
        assert!(failed.is_empty(), "{name}: {failed:?}");
    }
}

#[test]
fn stop_at_conflict_leaves_one_residual_conflict_in_the_calendar() {
    let opts = RunOptions {
        stop_at_conflict: true,
        ..Default::default()
    };
    let report = run_scenario(load("calendar"), opts).unwrap();
    assert!(report.stopped_at_conflict);
    assert!(!report.converged);
    assert_eq!(report.residual_conflicts.len(), 1);
    let c = &report.residual_conflicts[0];
    assert_eq!(c.replica, "alice");
    assert_eq!(
        c.conflict
            .premises
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>(),
        ["$c:2"]
    );
}

#[test]
fn single_replica_without_network_is_trivially_converged() {
    let s = Scenario::from_json(
        r#"{"registers":[{"kind":"plain"}],"replicas":["solo"],
            "events":[{"event":"issue","replica":"solo","actions":[{"op":"mov","reg":0,"value":5}]}]}"#,
    )
    .unwrap();
    let report = run_scenario(s, RunOptions::default()).unwrap();
    assert!(report.converged);
    assert_eq!(report.states["solo"]["M0"], serde_json::json!(5));
}

#[test]
fn cancel_and_replay_cancels_mov3_everywhere() {
    let s = run("cancel_and_replay");
    let report = s.report().unwrap();
    let mov3 = s.op("mov3").unwrap();
    for (r, ids) in &report.tombstoned {
        assert_eq!(ids, &vec![mov3.clone()], "{r}");
    }
    assert_eq!(report.fanout_resolves, 0);
}

#[test]
fn same_seed_same_report_under_drops() {
    let mut sc = load("central_fanout");
    sc.network.drop_probability = 0.4;
    let go = |seed| {
        let opts = RunOptions {
            seed: Some(seed),
            ..Default::default()
        };
        serde_json::to_string(&run_scenario(sc.clone(), opts).unwrap()).unwrap()
    };
    assert_eq!(go(3), go(3));
    let a: serde_json::Value = serde_json::from_str(&go(3)).unwrap();
    assert!(a["dropped_syncs"].as_u64().unwrap() > 0);
}

#[test]
fn retries_recover_dropped_syncs() {
    let text = r#"{"registers":[{"kind":"arith"}],"replicas":["a","b"],
        "network":{"drop_probability":0.5,"seed":1},
        "events":[
          {"event":"issue","replica":"a","actions":[{"op":"add","reg":0,"value":2}]},
          {"event":"sync","from":"a","to":"b","retries":40},
          {"event":"assert","replica":"b","check":{"kind":"val","register":0,"equals":2}}]}"#;
    let report = run_scenario(Scenario::from_json(text).unwrap(), RunOptions::default()).unwrap();
    assert!(report.asserts_passed, "{:?}", report.asserts);
}

#[test]
fn partitions_keep_replicas_apart_until_healed_by_a_relay() {
    let text = r#"{"registers":[{"kind":"arith"}],"replicas":["a","b","c"],
        "network":{"partitions":[["a","b"]]},
        "events":[
          {"event":"issue","replica":"a","actions":[{"op":"add","reg":0,"value":2}]},
          {"event":"sync","from":"a","to":"b"},
          {"event":"assert","replica":"b","check":{"kind":"val","register":0,"equals":0}},
          {"event":"sync_all"}]}"#;
    let report = run_scenario(Scenario::from_json(text).unwrap(), RunOptions::default()).unwrap();
    assert!(report.asserts_passed);
    assert!(report.converged);
    assert_eq!(report.dropped_syncs, 1);
}

#[test]
fn delay_hides_recent_publishes() {
    let text = r#"{"registers":[{"kind":"arith"}],"replicas":["a","b"],
        "network":{"delay":2},
        "events":[
          {"event":"issue","replica":"a","actions":[{"op":"add","reg":0,"value":2}]},
          {"event":"sync","from":"a","to":"b"},
          {"event":"assert","replica":"b","check":{"kind":"val","register":0,"equals":0}},
          {"event":"sync","from":"a","to":"b"},
          {"event":"assert","replica":"b","check":{"kind":"val","register":0,"equals":2}}]}"#;
    let report = run_scenario(Scenario::from_json(text).unwrap(), RunOptions::default()).unwrap();
    assert!(report.asserts_passed, "{:?}", report.asserts);
}

#[test]
fn issue_after_freeze_is_a_script_error() {
    let text = r#"{"registers":[{"kind":"plain"}],"replicas":["a"],
        "events":[{"event":"freeze"},
          {"event":"issue","replica":"a","actions":[{"op":"mov","reg":0,"value":1}]}]}"#;
    let mut s = Session::new(Scenario::from_json(text).unwrap(), RunOptions::default()).unwrap();
    s.step().unwrap();
    assert!(matches!(s.step(), Err(Error::Script(_))));
}

#[test]
fn failing_assert_is_recorded_not_raised() {
    let text = r#"{"registers":[{"kind":"plain"}],"replicas":["a"],
        "events":[{"event":"assert","replica":"a","check":{"kind":"val","register":0,"equals":9}}]}"#;
    let report = run_scenario(Scenario::from_json(text).unwrap(), RunOptions::default()).unwrap();
    assert!(!report.asserts_passed);
    assert_eq!(report.asserts[0].detail, "M0 = 0");
}

#[test]
fn unknown_label_is_a_script_error() {
    let text = r#"{"registers":[{"kind":"plain"}],"replicas":["a"],
        "events":[{"event":"assert","replica":"a","check":{"kind":"live","op":"nope"}}]}"#;
    let mut s = Session::new(Scenario::from_json(text).unwrap(), RunOptions::default()).unwrap();
    assert!(matches!(s.run(), Err(Error::Script(_))));
}

#[test]
fn resolve_with_nothing_pending_is_skipped() {
    let text = r#"{"registers":[{"kind":"plain"}],"replicas":["a"],
        "events":[{"event":"resolve","replica":"a","reconciler":"replay-all"}]}"#;
    let report = run_scenario(Scenario::from_json(text).unwrap(), RunOptions::default()).unwrap();
    assert_eq!(report.resolves, 0);
    assert!(report.converged);
}
