// SPDX-License-Identifier: Apache-2.0

//! Canonical JSON form of a graph: `{"nodes":[...],"rebases":{...}}` with
//! nodes sorted by id and object keys sorted. Two equal graphs always
//! serialize to the same bytes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::action::Operation;
use crate::error::{Error, Result};
use crate::graph::EntailmentGraph;
use crate::ids::OpId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireGraph {
    pub nodes: Vec<Operation>,
    pub rebases: BTreeMap<String, BTreeSet<OpId>>,
}

impl From<&EntailmentGraph> for WireGraph {
    fn from(g: &EntailmentGraph) -> Self {
        WireGraph {
            nodes: g.nodes().cloned().collect(),
            rebases: g
                .rebases()
                .iter()
                .filter(|(_, t)| !t.is_empty())
                .map(|(id, t)| (id.to_string(), t.clone()))
                .collect(),
        }
    }
}

impl WireGraph {
    pub fn into_graph(self) -> Result<EntailmentGraph> {
        let mut g = EntailmentGraph::new();
        let mut todo = self.nodes;
        while !todo.is_empty() {
            let before = todo.len();
            let mut rest = Vec::new();
            for op in todo {
                if op.premises.iter().all(|p| g.contains(p)) {
                    g.add(op)?;
                } else {
                    rest.push(op);
                }
            }
            if rest.len() == before {
                let op = &rest[0];
                let missing = op.premises.iter().find(|p| !g.contains(p)).cloned();
                return Err(Error::UnknownPremise {
                    op: op.id.clone(),
                    premise: missing.expect("some premise is missing"),
                });
            }
            todo = rest;
        }
        for (id, targets) in self.rebases {
            let id: OpId = id.parse()?;
            for t in targets {
                g.rebase(&id, &t)?;
            }
        }
        Ok(g)
    }
}

pub fn to_json(g: &EntailmentGraph) -> String {
    serde_json::to_string(&WireGraph::from(g)).expect("graph serializes")
}

pub fn to_value(g: &EntailmentGraph) -> serde_json::Value {
    serde_json::to_value(WireGraph::from(g)).expect("graph serializes")
}

pub fn from_json(s: &str) -> Result<EntailmentGraph> {
    let wire: WireGraph = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
    wire.into_graph()
}
