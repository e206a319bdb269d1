// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use entailsync::sim::{RunOptions, Scenario, Session};
use entailsync::{EntailmentGraph, OpId};

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn scenario_path(name: &str) -> PathBuf {
    scenario_dir().join(format!("{name}.json"))
}

pub fn load(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenario_path(name)).unwrap();
    Scenario::from_json(&text).unwrap()
}

pub fn corpus() -> Vec<(String, Scenario)> {
    let mut names: Vec<String> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "json")
                .then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), load(&n))).collect()
}

pub fn run(name: &str) -> Session {
    let mut s = Session::new(load(name), RunOptions::default()).unwrap();
    s.run().unwrap();
    s
}

/// Graph shape with operations named by scenario label where one exists.
#[derive(Debug, PartialEq, Eq)]
pub struct Shape {
    pub nodes: BTreeSet<String>,
    pub entails: BTreeSet<(String, String)>,
    pub rebases: BTreeSet<(String, String)>,
    pub tombstoned: BTreeSet<String>,
}

pub fn shape(g: &EntailmentGraph, labels: &BTreeMap<String, OpId>) -> Shape {
    let names: BTreeMap<&OpId, &String> = labels.iter().map(|(l, id)| (id, l)).collect();
    let name = |id: &OpId| {
        names
            .get(id)
            .map_or_else(|| id.to_string(), |l| (*l).clone())
    };
    let mut s = Shape {
        nodes: BTreeSet::new(),
        entails: BTreeSet::new(),
        rebases: BTreeSet::new(),
        tombstoned: BTreeSet::new(),
    };
    for op in g.nodes() {
        s.nodes.insert(name(&op.id));
        for p in &op.premises {
            s.entails.insert((name(p), name(&op.id)));
        }
        for t in g.rebase_targets(&op.id) {
            if t.is_tombstone() {
                s.tombstoned.insert(name(&op.id));
            } else {
                s.rebases.insert((name(t), name(&op.id)));
            }
        }
    }
    s
}

pub fn expect_shape(
    nodes: &[&str],
    entails: &[(&str, &str)],
    rebases: &[(&str, &str)],
    tombstoned: &[&str],
) -> Shape {
    let own = |v: &[(&str, &str)]| {
        v.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    };
    Shape {
        nodes: nodes.iter().map(|s| s.to_string()).collect(),
        entails: own(entails),
        rebases: own(rebases),
        tombstoned: tombstoned.iter().map(|s| s.to_string()).collect(),
    }
}
