// SPDX-License-Identifier: Apache-2.0

//! Identifiers for replicas, operations, registers and actions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

const CONSTRUCTOR_REPLICA: &str = "$c";
const TOMBSTONE_TEXT: &str = "$tombstone";

/// Name of a replica. Ordered lexicographically for tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReplicaId(String);

impl ReplicaId {
    /// Names must be non-empty, must not contain `:` and must not start
    /// with `$` (reserved for constructors and the tombstone).
    pub fn new(name: impl Into<String>) -> Result<Self, Error> {
        let name = name.into();
        if name.is_empty() || name.contains(':') || name.starts_with('$') {
            return Err(Error::InvalidReplicaId(name));
        }
        Ok(ReplicaId(name))
    }

    fn reserved(name: &str) -> Self {
        ReplicaId(name.to_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ReplicaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReplicaId::new(s)
    }
}

impl Serialize for ReplicaId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ReplicaId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        ReplicaId::new(s).map_err(serde::de::Error::custom)
    }
}

/// Operation identifier: the issuing replica plus its per-replica counter.
///
/// The derived order compares the counter first and the replica name second.
/// It is only used to break ties deterministically and carries no causal
/// meaning.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpId {
    counter: u64,
    replica: ReplicaId,
}

impl OpId {
    pub fn new(replica: ReplicaId, counter: u64) -> Self {
        OpId { counter, replica }
    }

    /// The constructor operation of register `reg`, identical on every replica.
    pub fn constructor(reg: RegisterId) -> Self {
        OpId {
            counter: u64::from(reg.0),
            replica: ReplicaId::reserved(CONSTRUCTOR_REPLICA),
        }
    }

    /// The reserved cancellation target.
    pub fn tombstone() -> Self {
        OpId {
            counter: 0,
            replica: ReplicaId::reserved(TOMBSTONE_TEXT),
        }
    }

    pub fn replica(&self) -> &ReplicaId {
        &self.replica
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn is_tombstone(&self) -> bool {
        self.replica.0 == TOMBSTONE_TEXT
    }

    pub fn is_constructor(&self) -> bool {
        self.replica.0 == CONSTRUCTOR_REPLICA
    }

    /// Register built by this constructor, if this is a constructor id.
    pub fn constructed_register(&self) -> Option<RegisterId> {
        if self.is_constructor() {
            u32::try_from(self.counter).ok().map(RegisterId)
        } else {
            None
        }
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_tombstone() {
            f.write_str(TOMBSTONE_TEXT)
        } else {
            write!(f, "{}:{}", self.replica, self.counter)
        }
    }
}

impl FromStr for OpId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == TOMBSTONE_TEXT {
            return Ok(OpId::tombstone());
        }
        let (name, counter) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::InvalidOpId(s.to_owned()))?;
        let counter: u64 = counter
            .parse()
            .map_err(|_| Error::InvalidOpId(s.to_owned()))?;
        if name == CONSTRUCTOR_REPLICA {
            return Ok(OpId {
                counter,
                replica: ReplicaId::reserved(CONSTRUCTOR_REPLICA),
            });
        }
        let replica = ReplicaId::new(name).map_err(|_| Error::InvalidOpId(s.to_owned()))?;
        Ok(OpId { counter, replica })
    }
}

impl Serialize for OpId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OpId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Position of a register in shared memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegisterId(pub u32);

impl RegisterId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RegisterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

/// An action instance: its operation and its position inside it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionId {
    pub op: OpId,
    pub pos: u32,
}

impl ActionId {
    pub fn new(op: OpId, pos: u32) -> Self {
        ActionId { op, pos }
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.op, self.pos)
    }
}
