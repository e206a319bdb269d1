// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Link behaviour between replicas. Only syncs are affected; local issues
/// always succeed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkModel {
    #[serde(default)]
    pub drop_probability: f64,
    /// A sync sees the latest snapshot published at least this many steps ago.
    #[serde(default)]
    pub delay: usize,
    /// Severed pairs, in either direction.
    #[serde(default)]
    pub partitions: Vec<(String, String)>,
    #[serde(default)]
    pub seed: u64,
}

impl NetworkModel {
    pub fn severed(&self, a: &str, b: &str) -> bool {
        self.partitions
            .iter()
            .any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }
}

/// Seeded link simulator.
#[derive(Debug, Clone)]
pub struct Network {
    pub model: NetworkModel,
    rng: ChaCha8Rng,
}

impl Network {
    pub fn new(model: NetworkModel) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(model.seed);
        Network { model, rng }
    }

    /// Whether a sync from `from` to `to` gets through.
    pub fn delivers(&mut self, from: &str, to: &str) -> bool {
        if self.model.severed(from, to) {
            return false;
        }
        let p = self.model.drop_probability;
        p <= 0.0 || !self.rng.gen_bool(p.min(1.0))
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_drops() {
        let model = NetworkModel {
            drop_probability: 0.5,
            seed: 7,
            ..Default::default()
        };
        let run = || {
            let mut n = Network::new(model.clone());
            (0..64).map(|_| n.delivers("a", "b")).collect::<Vec<_>>()
        };
        let first = run();
        assert_eq!(first, run());
        assert!(first.contains(&true) && first.contains(&false));
    }

    #[test]
    fn partitions_are_symmetric() {
        let mut n = Network::new(NetworkModel {
            partitions: vec![("a".into(), "b".into())],
            ..Default::default()
        });
        assert!(!n.delivers("b", "a"));
        assert!(n.delivers("a", "c"));
    }
}
