//! Frequency-table model of a user's habits: which action they take in
//! which (coarsely binned) plant state.

use std::collections::BTreeMap;

use crate::plant::{Action, PlantConfig, PlantState, NUM_ACTIONS, NUM_FEATURES};

pub type BinKey = [u8; NUM_FEATURES];

/// Continuous features into equal-width bins over their clamping range;
/// rods by level.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    bounds: [(f64, f64); 4],
    bins: u8,
}

impl Discretizer {
    pub const DEFAULT_BINS: u8 = 5;

    pub fn new(config: &PlantConfig, bins: u8) -> Self {
        assert!(bins >= 1, "at least one bin");
        Discretizer {
            bounds: config.continuous_bounds(),
            bins,
        }
    }

    pub fn bin(&self, state: &PlantState) -> BinKey {
        let fv = state.feature_vector();
        let mut key = [0u8; NUM_FEATURES];
        for (f, &(lo, hi)) in self.bounds.iter().enumerate() {
            let frac = if hi > lo { (fv[f] - lo) / (hi - lo) } else { 0.0 };
            let b = (frac * self.bins as f64).floor();
            key[f] = b.clamp(0.0, (self.bins - 1) as f64) as u8;
        }
        for f in 4..NUM_FEATURES {
            key[f] = fv[f] as u8;
        }
        key
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserModel {
    discretizer: Discretizer,
    table: BTreeMap<BinKey, [u32; NUM_ACTIONS]>,
    global: [u32; NUM_ACTIONS],
}

fn modal(counts: &[u32; NUM_ACTIONS]) -> Option<Action> {
    let mut best: Option<usize> = None;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|b| c > counts[b]) {
            best = Some(i);
        }
    }
    best.map(|i| Action::ALL[i])
}

impl UserModel {
    pub fn new(config: &PlantConfig) -> Self {
        UserModel::with_discretizer(Discretizer::new(config, Discretizer::DEFAULT_BINS))
    }

    pub fn with_discretizer(discretizer: Discretizer) -> Self {
        UserModel {
            discretizer,
            table: BTreeMap::new(),
            global: [0; NUM_ACTIONS],
        }
    }

    pub fn observe_action(&mut self, state: &PlantState, action: Action) {
        let key = self.discretizer.bin(state);
        self.table.entry(key).or_insert([0; NUM_ACTIONS])[action.index()] += 1;
        self.global[action.index()] += 1;
    }

    /// Most frequent action in this state's bin, else overall, else Skip.
    /// Ties go to the lowest action id.
    pub fn predict_action(&self, state: &PlantState) -> Action {
        let key = self.discretizer.bin(state);
        self.table
            .get(&key)
            .and_then(modal)
            .or_else(|| modal(&self.global))
            .unwrap_or(Action::Skip)
    }

    pub fn counts(&self, state: &PlantState) -> [u32; NUM_ACTIONS] {
        self.table
            .get(&self.discretizer.bin(state))
            .copied()
            .unwrap_or([0; NUM_ACTIONS])
    }

    pub fn global_counts(&self) -> &[u32; NUM_ACTIONS] {
        &self.global
    }

    pub fn observations(&self) -> u64 {
        self.global.iter().map(|&c| c as u64).sum()
    }
}
