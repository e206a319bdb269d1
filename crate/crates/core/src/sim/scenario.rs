// SPDX-License-Identifier: Apache-2.0

//! Scenario files.
//!
//! ```json
//! {
//!   "name": "two writers",
//!   "registers": [{"kind": "plain", "name": "x", "init": 0}],
//!   "replicas": ["a", "b"],
//!   "reconciler": "replay-all",
//!   "network": {"drop_probability": 0.0, "delay": 0, "partitions": [], "seed": 0},
//!   "events": [
//!     {"event": "issue", "replica": "a", "label": "w1", "actions": [{"op": "mov", "reg": 0, "value": 1}]},
//!     {"event": "sync_all"},
//!     {"event": "assert", "check": {"kind": "converged"}}
//!   ]
//! }
//! ```
//!
//! Operations are referenced by label or by their id text (`a:1`, `$c:0`).

use serde::{Deserialize, Serialize};

use crate::action::{ActionDesc, Value};
use crate::error::{Error, Result};
use crate::register::{LwwPolicy, RegisterKind};
use crate::sync::ReconcilerKind;

use super::network::NetworkModel;

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub registers: Vec<RegisterDecl>,
    #[serde(default)]
    pub replicas: Vec<String>,
    #[serde(default)]
    pub reconciler: ReconcilerKind,
    #[serde(default)]
    pub network: NetworkModel,
    /// Publish after every local change; when off, only `publish` events do.
    #[serde(default = "yes")]
    pub auto_publish: bool,
    #[serde(default)]
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterDecl {
    pub kind: RegisterKind,
    #[serde(default)]
    pub name: Option<String>,
    /// Constructor value; kind default when absent.
    #[serde(default)]
    pub init: Option<Value>,
    /// Constructor timestamp for `lww`.
    #[serde(default)]
    pub t: Option<i64>,
    #[serde(default)]
    pub policy: LwwPolicy,
}

/// A plan written with labels instead of raw ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    #[serde(default)]
    pub trigger: Option<String>,
    #[serde(default)]
    pub keep: Vec<String>,
    #[serde(default)]
    pub cancel: Vec<String>,
    #[serde(default)]
    pub merged: Vec<ActionDesc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    Issue {
        replica: String,
        #[serde(default)]
        label: Option<String>,
        actions: Vec<ActionDesc>,
    },
    Publish {
        replica: String,
    },
    Sync {
        from: String,
        to: String,
        #[serde(default)]
        reconciler: Option<ReconcilerKind>,
        /// Label for the first merge operation this sync creates.
        #[serde(default)]
        merge_label: Option<String>,
        #[serde(default)]
        retries: u32,
    },
    SyncAll {
        #[serde(default)]
        reconciler: Option<ReconcilerKind>,
    },
    Resolve {
        replica: String,
        #[serde(default)]
        plan: Option<PlanSpec>,
        #[serde(default)]
        reconciler: Option<ReconcilerKind>,
        #[serde(default)]
        label: Option<String>,
        /// The plan is expected to be refused; the refusal is recorded as
        /// a passing check and the run continues.
        #[serde(default)]
        expect_reject: bool,
    },
    /// No more issues after this point.
    Freeze,
    /// Every other replica syncs from `from`.
    Fanout {
        from: String,
    },
    Assert {
        #[serde(default)]
        replica: Option<String>,
        check: Check,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Issue { .. } => "issue",
            Event::Publish { .. } => "publish",
            Event::Sync { .. } => "sync",
            Event::SyncAll { .. } => "sync_all",
            Event::Resolve { .. } => "resolve",
            Event::Freeze => "freeze",
            Event::Fanout { .. } => "fanout",
            Event::Assert { .. } => "assert",
        }
    }
}

/// A register named by index or by its declared name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegRef {
    Index(u32),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    Val {
        register: RegRef,
        equals: serde_json::Value,
    },
    Pending {
        count: usize,
    },
    /// Inspects one pending conflict group; absent fields are not checked.
    Conflict {
        #[serde(default)]
        index: usize,
        #[serde(default)]
        triggers: Option<Vec<String>>,
        #[serde(default)]
        local: Option<Vec<String>>,
        #[serde(default)]
        premises: Option<Vec<String>>,
        #[serde(default)]
        scope: Option<Vec<String>>,
    },
    Tombstoned {
        op: String,
    },
    Rebased {
        op: String,
        #[serde(default)]
        to: Option<String>,
    },
    Live {
        op: String,
        #[serde(default = "yes")]
        expect: bool,
    },
    Discards {
        premise: String,
        op: String,
        #[serde(default = "yes")]
        expect: bool,
    },
    Premises {
        op: String,
        equals: Vec<String>,
    },
    Converged,
    Resolves {
        count: usize,
    },
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Checks replica references and register indices.
    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::BTreeSet::new();
        for r in &self.replicas {
            crate::ids::ReplicaId::new(r.as_str())?;
            if !names.insert(r.as_str()) {
                return Err(Error::Script(format!("replica {r:?} declared twice")));
            }
        }
        let known = |r: &str| -> Result<()> {
            if names.contains(r) {
                Ok(())
            } else {
                Err(Error::Script(format!("unknown replica {r:?}")))
            }
        };
        for (a, b) in &self.network.partitions {
            known(a)?;
            known(b)?;
        }
        let reg_ok = |d: &ActionDesc| -> Result<()> {
            if d.reg.index() < self.registers.len() {
                Ok(())
            } else {
                Err(Error::UnknownRegister(d.reg))
            }
        };
        for e in &self.events {
            match e {
                Event::Issue {
                    replica, actions, ..
                } => {
                    known(replica)?;
                    actions.iter().try_for_each(reg_ok)?;
                }
                Event::Publish { replica } => known(replica)?,
                Event::Sync { from, to, .. } => {
                    known(from)?;
                    known(to)?;
                }
                Event::Resolve { replica, plan, .. } => {
                    known(replica)?;
                    if let Some(p) = plan {
                        p.merged.iter().try_for_each(reg_ok)?;
                    }
                }
                Event::Fanout { from } => known(from)?,
                Event::Assert {
                    replica: Some(r), ..
                } => known(r)?,
                _ => {}
            }
        }
        if !(0.0..=1.0).contains(&self.network.drop_probability) {
            return Err(Error::Script(
                "drop_probability must be within [0, 1]".into(),
            ));
        }
        Ok(())
    }
}
