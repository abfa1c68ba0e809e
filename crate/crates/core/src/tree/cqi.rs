//! Conservative Q-Improvement: grow a decision-tree Q-function online.
//!
//! The tree starts as a single leaf. Every transition updates the Q-value of
//! the leaf it lands in and, for each candidate split of that leaf, the
//! Q-value of the side the state falls on. A leaf is split only when the
//! best candidate's visit-weighted improvement of the greedy value exceeds
//! the split threshold; the threshold decays on every update without a split
//! and resets to its initial value after one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{argmax_action, DecisionTreePolicy, QValues, TreeMetadata, TreeShape};
use crate::plant::{
    apply_action, new_plant, Action, Feature, FeatureVector, PlantConfig, PlantError, PlantState,
    NUM_ACTIONS, NUM_FEATURES,
};

/// Leaves with fewer observations in their region use evenly spaced
/// thresholds over the region instead of observed deciles.
const MIN_OBSERVATIONS_FOR_QUANTILES: usize = 20;
/// Cap on the number of visited states kept for threshold quantiles.
const OBSERVATION_CAPACITY: usize = 400_000;
/// Bounds used for quantile fallback when a region is unbounded.
const FALLBACK_BOUNDS: [(f64, f64); 4] = [(0.0, 1000.0), (0.0, 500.0), (0.0, 100.0), (0.0, 1000.0)];

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid hyperparameter `{field}`: {reason}")]
    InvalidHyperparam { field: &'static str, reason: String },
    #[error(transparent)]
    Plant(#[from] PlantError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CqiHyperparams {
    pub discount: f64,
    pub learning_rate: f64,
    /// Initial value of the split threshold.
    pub split_threshold: f64,
    pub threshold_decay: f64,
    pub candidate_thresholds: usize,
    pub max_depth: u32,
    pub episodes: u32,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub damage_penalty: f64,
}

impl Default for CqiHyperparams {
    fn default() -> Self {
        CqiHyperparams {
            discount: 0.99,
            learning_rate: 0.05,
            split_threshold: 5.0,
            threshold_decay: 0.999,
            candidate_thresholds: 9,
            max_depth: 8,
            episodes: 5000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            damage_penalty: 500.0,
        }
    }
}

impl CqiHyperparams {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |field: &'static str, reason: &str| {
            Err(TrainError::InvalidHyperparam {
                field,
                reason: reason.to_string(),
            })
        };
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount", "must be in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate", "must be in (0, 1]");
        }
        if !(self.split_threshold > 0.0 && self.split_threshold.is_finite()) {
            return bad("split_threshold", "must be positive");
        }
        if !(self.threshold_decay > 0.0 && self.threshold_decay < 1.0) {
            return bad("threshold_decay", "must be in (0, 1)");
        }
        if self.candidate_thresholds == 0 {
            return bad("candidate_thresholds", "must be >= 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth", "must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon_start", "exploration rates must be in [0, 1]");
        }
        if self.epsilon_end > self.epsilon_start {
            return bad("epsilon_end", "must not exceed epsilon_start");
        }
        if !(self.damage_penalty >= 0.0 && self.damage_penalty.is_finite()) {
            return bad("damage_penalty", "must be finite and >= 0");
        }
        Ok(())
    }

    /// Linear schedule from `epsilon_start` at the first episode to
    /// `epsilon_end` at the last.
    pub fn epsilon_at(&self, episode: u32) -> f64 {
        if self.episodes <= 1 {
            return self.epsilon_end;
        }
        let frac = episode.min(self.episodes - 1) as f64 / (self.episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

#[derive(Debug, Clone)]
struct SideStats {
    q: QValues,
    visits: u64,
}

#[derive(Debug, Clone)]
struct Candidate {
    feature: usize,
    threshold: f64,
    sides: [SideStats; 2],
}

#[derive(Debug, Clone)]
struct LeafStats {
    q: QValues,
    visits: u64,
    candidates: Vec<Candidate>,
}

#[derive(Debug, Clone)]
enum Kind {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(LeafStats),
}

/// Region of a node: feature `f` ranges over `(lo[f], hi[f]]`.
#[derive(Debug, Clone)]
struct Region {
    lo: [f64; NUM_FEATURES],
    hi: [f64; NUM_FEATURES],
}

impl Region {
    fn everything() -> Self {
        Region {
            lo: [f64::NEG_INFINITY; NUM_FEATURES],
            hi: [f64::INFINITY; NUM_FEATURES],
        }
    }

    fn contains(&self, fv: &FeatureVector) -> bool {
        (0..NUM_FEATURES).all(|f| fv[f] > self.lo[f] && fv[f] <= self.hi[f])
    }
}

#[derive(Debug, Clone)]
struct TrainNode {
    kind: Kind,
    depth: u32,
    region: Region,
}

fn max_q(q: &QValues) -> f64 {
    q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Stateful trainer; [`train_cqi`] drives it for the configured number of
/// episodes. Exposed so callers can snapshot the policy mid-training.
pub struct CqiTrainer {
    config: PlantConfig,
    hp: CqiHyperparams,
    seed: u64,
    rng: ChaCha8Rng,
    nodes: Vec<TrainNode>,
    split_threshold: f64,
    observations: Vec<FeatureVector>,
    episodes_done: u32,
    splits: u32,
}

impl CqiTrainer {
    pub fn new(config: PlantConfig, hp: CqiHyperparams, seed: u64) -> Result<Self, TrainError> {
        config.validate()?;
        hp.validate()?;
        let mut trainer = CqiTrainer {
            split_threshold: hp.split_threshold,
            config,
            hp,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: Vec::new(),
            observations: Vec::new(),
            episodes_done: 0,
            splits: 0,
        };
        let root = trainer.make_leaf([0.0; NUM_ACTIONS], 0, 0, Region::everything());
        trainer.nodes.push(root);
        Ok(trainer)
    }

    pub fn episodes_done(&self) -> u32 {
        self.episodes_done
    }

    pub fn splits(&self) -> u32 {
        self.splits
    }

    fn make_leaf(&self, q: QValues, visits: u64, depth: u32, region: Region) -> TrainNode {
        let mut candidates = Vec::new();
        if depth < self.hp.max_depth {
            for f in 0..NUM_FEATURES {
                for threshold in self.candidate_thresholds(f, &region) {
                    candidates.push(Candidate {
                        feature: f,
                        threshold,
                        sides: [
                            SideStats { q, visits: 0 },
                            SideStats { q, visits: 0 },
                        ],
                    });
                }
            }
        }
        TrainNode {
            kind: Kind::Leaf(LeafStats {
                q,
                visits,
                candidates,
            }),
            depth,
            region,
        }
    }

    fn candidate_thresholds(&self, f: usize, region: &Region) -> Vec<f64> {
        let (lo, hi) = (region.lo[f], region.hi[f]);
        let feature = Feature::from_index(f).expect("feature index in range");
        if feature.is_rod() {
            let levels = feature.rod_levels();
            return levels
                .windows(2)
                .map(|w| (w[0] + w[1]) / 2.0)
                .filter(|&t| t > lo && t < hi)
                // both sides must hold at least one level
                .filter(|&t| levels.iter().any(|&l| l > lo && l <= t))
                .filter(|&t| levels.iter().any(|&l| l > t && l <= hi))
                .collect();
        }
        let k = self.hp.candidate_thresholds;
        let mut values: Vec<f64> = self
            .observations
            .iter()
            .filter(|fv| region.contains(fv))
            .map(|fv| fv[f])
            .collect();
        let mut out: Vec<f64> = if values.len() >= MIN_OBSERVATIONS_FOR_QUANTILES {
            values.sort_by(f64::total_cmp);
            let max = *values.last().expect("non-empty");
            (1..=k)
                .map(|i| values[(i * values.len()) / (k + 1)])
                .filter(|&t| t < max)
                .collect()
        } else {
            let (flo, fhi) = FALLBACK_BOUNDS[f];
            let a = lo.max(flo);
            let b = hi.min(fhi);
            (1..=k)
                .map(|i| a + (b - a) * i as f64 / (k + 1) as f64)
                .collect()
        };
        out.retain(|&t| t > lo && t < hi);
        out.dedup();
        out
    }

    fn leaf_index(&self, fv: &FeatureVector) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i].kind {
                Kind::Leaf(_) => return i,
                Kind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if fv[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    fn leaf_q(&self, idx: usize) -> &QValues {
        match &self.nodes[idx].kind {
            Kind::Leaf(l) => &l.q,
            Kind::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    fn greedy(&self, fv: &FeatureVector) -> Action {
        argmax_action(self.leaf_q(self.leaf_index(fv)))
    }

    fn observe(&mut self, fv: FeatureVector) {
        if self.observations.len() < OBSERVATION_CAPACITY {
            self.observations.push(fv);
        }
    }

    fn update(&mut self, fv: &FeatureVector, action: Action, target: f64) {
        let idx = self.leaf_index(fv);
        let alpha = self.hp.learning_rate;
        let a = action.index();
        let (gain, best) = {
            let Kind::Leaf(leaf) = &mut self.nodes[idx].kind else {
                unreachable!()
            };
            leaf.q[a] += alpha * (target - leaf.q[a]);
            leaf.visits += 1;
            let parent_value = max_q(&leaf.q);
            let mut best: Option<(f64, usize)> = None;
            for (ci, c) in leaf.candidates.iter_mut().enumerate() {
                let side = &mut c.sides[usize::from(fv[c.feature] > c.threshold)];
                side.q[a] += alpha * (target - side.q[a]);
                side.visits += 1;
                let [l, r] = &c.sides;
                if l.visits == 0 || r.visits == 0 {
                    continue;
                }
                let total = (l.visits + r.visits) as f64;
                let value = (l.visits as f64 / total) * max_q(&l.q)
                    + (r.visits as f64 / total) * max_q(&r.q);
                let gain = value - parent_value;
                if best.is_none_or(|(g, _)| gain > g) {
                    best = Some((gain, ci));
                }
            }
            match best {
                Some((g, ci)) => (g, Some(ci)),
                None => (f64::NEG_INFINITY, None),
            }
        };
        match best {
            Some(ci) if gain > self.split_threshold => {
                self.split_leaf(idx, ci);
                self.split_threshold = self.hp.split_threshold;
            }
            _ => self.split_threshold *= self.hp.threshold_decay,
        }
    }

    fn split_leaf(&mut self, idx: usize, candidate: usize) {
        let node = &self.nodes[idx];
        let Kind::Leaf(leaf) = &node.kind else {
            unreachable!()
        };
        let c = leaf.candidates[candidate].clone();
        let depth = node.depth + 1;
        let mut left_region = node.region.clone();
        left_region.hi[c.feature] = c.threshold;
        let mut right_region = node.region.clone();
        right_region.lo[c.feature] = c.threshold;
        let left = self.make_leaf(c.sides[0].q, c.sides[0].visits, depth, left_region);
        let right = self.make_leaf(c.sides[1].q, c.sides[1].visits, depth, right_region);
        let li = self.nodes.len();
        self.nodes.push(left);
        self.nodes.push(right);
        self.nodes[idx].kind = Kind::Split {
            feature: c.feature,
            threshold: c.threshold,
            left: li,
            right: li + 1,
        };
        self.splits += 1;
    }

    /// Play one ε-greedy episode, learning from every transition.
    pub fn run_episode(&mut self) -> Result<f64, TrainError> {
        let epsilon = self.hp.epsilon_at(self.episodes_done);
        let mut state: PlantState = new_plant(&self.config)?;
        while !state.is_terminal(&self.config) {
            let fv = state.feature_vector();
            self.observe(fv);
            let action = if self.rng.random_bool(epsilon) {
                Action::ALL[self.rng.random_range(0..NUM_ACTIONS)]
            } else {
                self.greedy(&fv)
            };
            let out = apply_action(&state, action, &self.config)?;
            let mut reward = out.energy_produced;
            if out.damaged() {
                reward -= self.hp.damage_penalty;
            }
            let next = out.next_state;
            let target = if next.is_terminal(&self.config) {
                reward
            } else {
                let nfv = next.feature_vector();
                reward + self.hp.discount * max_q(self.leaf_q(self.leaf_index(&nfv)))
            };
            self.update(&fv, action, target);
            state = next;
        }
        self.episodes_done += 1;
        Ok(state.energy_total)
    }

    /// Freeze the current tree into an immutable policy.
    pub fn snapshot(&self) -> DecisionTreePolicy {
        fn shape(nodes: &[TrainNode], i: usize) -> TreeShape {
            match &nodes[i].kind {
                Kind::Leaf(l) => TreeShape::Leaf {
                    q_values: l.q,
                    visits: l.visits,
                },
                Kind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => TreeShape::split(
                    Feature::from_index(*feature).expect("feature index in range"),
                    *threshold,
                    shape(nodes, *left),
                    shape(nodes, *right),
                ),
            }
        }
        let metadata = TreeMetadata {
            hyperparams: Some(self.hp.clone()),
            seed: Some(self.seed),
            episodes_trained: self.episodes_done as u64,
            accuracy: None,
        };
        DecisionTreePolicy::from_shape(shape(&self.nodes, 0), metadata)
            .expect("trainer always builds well-formed trees")
    }
}

/// Train a tree policy on `config` for `hp.episodes` episodes. Zero
/// episodes yields the initial single all-zero leaf.
pub fn train_cqi(
    config: &PlantConfig,
    hp: &CqiHyperparams,
    seed: u64,
) -> Result<DecisionTreePolicy, TrainError> {
    let mut trainer = CqiTrainer::new(config.clone(), hp.clone(), seed)?;
    for _ in 0..hp.episodes {
        trainer.run_episode()?;
    }
    Ok(trainer.snapshot())
}
