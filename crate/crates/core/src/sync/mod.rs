// SPDX-License-Identifier: Apache-2.0

//! Replicas, synchronization and conflict resolution.

mod reconcile;
mod replica;

pub use reconcile::{
    apply_plan, group_conflicts, Conflict, LwwAuto, Manual, MergePlan, Reconciler, ReconcilerKind,
    ReplayAll, Resolution, Scripted,
};
pub use replica::{Replica, SyncReport};
