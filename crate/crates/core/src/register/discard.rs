// SPDX-License-Identifier: Apache-2.0

//! Exhaustive discard-completeness check.
//!
//! Every history of up to `max_ops` single-action operations drawn from the
//! register's sample alphabet is generated by sequential issue (each action's
//! premises are computed against its prefix, which keeps the history valid).
//! For each ordered pair `(a1, a2)` we require: if removing `a2` together with
//! its dependents makes `a1` visible again, then `a1` entails `a2`
//! (transitively). Histories are explored by increasing length, so the first
//! counterexample reported is a shortest one.

use std::collections::BTreeSet;

use serde::Serialize;

use super::RegisterSpec;
use crate::action::{Action, ActionDesc};
use crate::ids::{ActionId, OpId, RegisterId, ReplicaId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    /// Actions in history order; index 0 is the constructor.
    pub history: Vec<String>,
    /// Direct premises (history indices) of each action.
    pub premises: Vec<Vec<usize>>,
    /// The action whose visibility is lost.
    pub lost: usize,
    /// The action that hides it without being entailed by it.
    pub by: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscardCheck {
    pub kind: String,
    pub max_ops: usize,
    pub histories: usize,
    pub passed: bool,
    pub counterexample: Option<Counterexample>,
}

struct Trace {
    actions: Vec<Action>,
    premises: Vec<BTreeSet<usize>>,
}

fn op_id(i: usize) -> OpId {
    OpId::new(ReplicaId::new("h").expect("valid"), i as u64)
}

impl Trace {
    fn descendants(&self, root: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::from([root]);
        // premises always point backwards, so one forward sweep suffices
        for k in root + 1..self.actions.len() {
            if self.premises[k].iter().any(|p| out.contains(p)) {
                out.insert(k);
            }
        }
        out
    }

    fn without(&self, removed: &BTreeSet<usize>) -> Vec<Action> {
        self.actions
            .iter()
            .enumerate()
            .filter(|(k, _)| !removed.contains(k))
            .map(|(_, a)| a.clone())
            .collect()
    }

    fn find_violation(&self, spec: &dyn RegisterSpec) -> Option<(usize, usize)> {
        let n = self.actions.len();
        let desc: Vec<BTreeSet<usize>> = (0..n).map(|k| self.descendants(k)).collect();
        for lost in 0..n {
            let id = &self.actions[lost].id;
            if spec.visible(id, &self.actions) {
                continue;
            }
            for by in 0..n {
                if by == lost || desc[lost].contains(&by) {
                    continue;
                }
                if spec.visible(id, &self.without(&desc[by])) {
                    return Some((lost, by));
                }
            }
        }
        None
    }

    fn counterexample(&self, lost: usize, by: usize) -> Counterexample {
        Counterexample {
            history: self.actions.iter().map(|a| a.desc.to_string()).collect(),
            premises: self
                .premises
                .iter()
                .map(|p| p.iter().copied().collect())
                .collect(),
            lost,
            by,
        }
    }
}

/// Runs the check for one register kind; `constructor` is the first action.
pub fn check_discard_complete(
    spec: &dyn RegisterSpec,
    constructor: &ActionDesc,
    max_ops: usize,
) -> DiscardCheck {
    let reg = RegisterId(0);
    let alphabet = spec.sample_actions(reg);
    let mut result = DiscardCheck {
        kind: spec.kind().to_owned(),
        max_ops,
        histories: 0,
        passed: true,
        counterexample: None,
    };
    if max_ops == 0 {
        return result;
    }
    let root = Trace {
        actions: vec![Action {
            id: ActionId::new(op_id(0), 0),
            desc: constructor.clone().on(reg),
        }],
        premises: vec![BTreeSet::new()],
    };
    let mut level = vec![root];
    for len in 1..=max_ops {
        for trace in &level {
            result.histories += 1;
            if let Some((lost, by)) = trace.find_violation(spec) {
                result.passed = false;
                result.counterexample = Some(trace.counterexample(lost, by));
                return result;
            }
        }
        if len == max_ops {
            break;
        }
        level = level
            .iter()
            .flat_map(|trace| extend(spec, trace, &alphabet))
            .collect();
    }
    result
}

fn extend(spec: &dyn RegisterSpec, trace: &Trace, alphabet: &[ActionDesc]) -> Vec<Trace> {
    let Ok(state) = spec.interpret(&trace.actions) else {
        return Vec::new();
    };
    let k = trace.actions.len();
    alphabet
        .iter()
        .filter_map(|desc| {
            let premises = spec.entail(desc, &state).ok()?;
            let premises: BTreeSet<usize> =
                premises.iter().map(|a| a.op.counter() as usize).collect();
            let mut actions = trace.actions.clone();
            actions.push(Action {
                id: ActionId::new(op_id(k), 0),
                desc: desc.clone(),
            });
            let mut all = trace.premises.clone();
            all.push(premises);
            Some(Trace {
                actions,
                premises: all,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::register::{
        ArithRegister, BrokenDemoRegister, LwwPolicy, LwwRegister, PlainRegister,
    };

    #[test]
    fn plain_passes_at_five() {
        let r = check_discard_complete(&PlainRegister, &ActionDesc::mov(0, 0), 5);
        assert!(r.passed, "{:?}", r.counterexample);
        // 1 + 3 + 9 + 27 + 81 sequential histories
        assert_eq!(r.histories, 121);
    }

    #[test]
    fn arith_passes_at_five() {
        let r = check_discard_complete(&ArithRegister, &ActionDesc::add(0, 0), 5);
        assert!(r.passed, "{:?}", r.counterexample);
    }

    #[test]
    fn lww_strict_skips_touch_on_ties() {
        let reg = LwwRegister::new(LwwPolicy::Strict);
        let r = check_discard_complete(&reg, &ActionDesc::mov_at(0, "a", 0), 4);
        assert!(r.passed, "{:?}", r.counterexample);
        // a touch after a tie has no observable value and is pruned
        assert!(r.histories < 1 + 5 + 25 + 125);
    }

    #[test]
    fn broken_spec_fails_with_shortest_counterexample() {
        let r = check_discard_complete(&BrokenDemoRegister, &ActionDesc::mov(0, 0), 6);
        assert!(!r.passed);
        let cx = r.counterexample.unwrap();
        assert_eq!(cx.history.len(), 2);
        assert_eq!(cx.lost, 0);
        assert_eq!(cx.by, 1);
        assert!(cx.premises[1].is_empty());
    }
}
