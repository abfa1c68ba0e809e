//! Random trees and brute-force oracles shared by the integration tests.
//! The oracles work on `TreeShape` directly and never call the tree's own
//! query methods.

#![allow(dead_code)]

use infopower_core::plant::{Action, Feature, FeatureVector, PlantConfig, NUM_ACTIONS, NUM_FEATURES};
use infopower_core::tree::{DecisionTreePolicy, NodeId, QValues, TreeMetadata, TreeShape};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn feature_range(f: Feature, config: &PlantConfig) -> (f64, f64) {
    let bounds = config.continuous_bounds();
    match f.index() {
        i if i < 4 => bounds[i],
        _ => (0.0, *f.rod_levels().last().unwrap()),
    }
}

fn random_q(rng: &mut ChaCha8Rng) -> QValues {
    let mut q = [0.0; NUM_ACTIONS];
    // small integers so ties are common
    for v in q.iter_mut() {
        *v = rng.random_range(-3..4) as f64;
    }
    q
}

/// Random tree with at most `max_depth` levels of splits.
pub fn random_shape(rng: &mut ChaCha8Rng, config: &PlantConfig, max_depth: u32) -> TreeShape {
    if max_depth == 0 || rng.random_bool(0.3) {
        return TreeShape::leaf(random_q(rng));
    }
    let feature = Feature::ALL[rng.random_range(0..NUM_FEATURES)];
    let threshold = if feature.is_rod() {
        let levels = feature.rod_levels();
        let i = rng.random_range(0..levels.len() - 1);
        (levels[i] + levels[i + 1]) / 2.0
    } else {
        let (lo, hi) = feature_range(feature, config);
        let t = rng.random_range(lo..hi);
        // round some thresholds so exact hits happen
        if rng.random_bool(0.5) { t.round() } else { t }
    };
    TreeShape::split(
        feature,
        threshold,
        random_shape(rng, config, max_depth - 1),
        random_shape(rng, config, max_depth - 1),
    )
}

pub fn build(shape: &TreeShape) -> DecisionTreePolicy {
    DecisionTreePolicy::from_shape(shape.clone(), TreeMetadata::default()).unwrap()
}

/// Random feature vector; continuous values sometimes land exactly on one
/// of `hits`.
pub fn random_vector(rng: &mut ChaCha8Rng, config: &PlantConfig, hits: &[(Feature, f64)]) -> FeatureVector {
    let mut fv = [0.0; NUM_FEATURES];
    for f in Feature::ALL {
        fv[f.index()] = if f.is_rod() {
            let levels = f.rod_levels();
            levels[rng.random_range(0..levels.len())]
        } else {
            let (lo, hi) = feature_range(f, config);
            rng.random_range(lo..=hi)
        };
    }
    if !hits.is_empty() && rng.random_bool(0.3) {
        let (f, t) = hits[rng.random_range(0..hits.len())];
        if !f.is_rod() {
            fv[f.index()] = t;
        }
    }
    fv
}

#[derive(Debug, Clone)]
pub enum OracleKind {
    Split { feature: Feature, threshold: f64, left: NodeId, right: NodeId },
    Leaf { q: QValues },
}

#[derive(Debug, Clone)]
pub struct OracleNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub depth: u32,
    pub kind: OracleKind,
    /// Region as per-feature (exclusive lower, inclusive upper) bounds.
    pub lower: [f64; NUM_FEATURES],
    pub upper: [f64; NUM_FEATURES],
}

/// Flattened copy of a shape with pre-order ids, parents and leaf regions.
pub struct Oracle {
    pub nodes: Vec<OracleNode>,
}

impl Oracle {
    pub fn new(shape: &TreeShape) -> Oracle {
        let mut nodes = Vec::new();
        let lower = [f64::NEG_INFINITY; NUM_FEATURES];
        let upper = [f64::INFINITY; NUM_FEATURES];
        Self::walk(shape, None, 0, lower, upper, &mut nodes);
        nodes.sort_by_key(|n: &OracleNode| n.id);
        Oracle { nodes }
    }

    fn walk(
        shape: &TreeShape,
        parent: Option<NodeId>,
        depth: u32,
        lower: [f64; NUM_FEATURES],
        upper: [f64; NUM_FEATURES],
        out: &mut Vec<OracleNode>,
    ) -> NodeId {
        let id = out.len() as NodeId + 1;
        out.push(OracleNode {
            id,
            parent,
            depth,
            kind: OracleKind::Leaf { q: [0.0; NUM_ACTIONS] },
            lower,
            upper,
        });
        let kind = match shape {
            TreeShape::Leaf { q_values, .. } => OracleKind::Leaf { q: *q_values },
            TreeShape::Split { feature, threshold, left, right } => {
                let j = feature.index();
                let mut lu = upper;
                lu[j] = lu[j].min(*threshold);
                let mut rl = lower;
                rl[j] = rl[j].max(*threshold);
                let l = Self::walk(left, Some(id), depth + 1, lower, lu, out);
                let r = Self::walk(right, Some(id), depth + 1, rl, upper, out);
                OracleKind::Split { feature: *feature, threshold: *threshold, left: l, right: r }
            }
        };
        out[id as usize - 1].kind = kind;
        id
    }

    pub fn node(&self, id: NodeId) -> &OracleNode {
        &self.nodes[id as usize - 1]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &OracleNode> {
        self.nodes.iter().filter(|n| matches!(n.kind, OracleKind::Leaf { .. }))
    }

    /// The unique leaf whose region contains `fv`.
    pub fn region_leaf(&self, fv: &FeatureVector) -> NodeId {
        let hits: Vec<NodeId> = self
            .leaves()
            .filter(|n| (0..NUM_FEATURES).all(|j| n.lower[j] < fv[j] && fv[j] <= n.upper[j]))
            .map(|n| n.id)
            .collect();
        assert_eq!(hits.len(), 1, "regions must partition the space: {hits:?}");
        hits[0]
    }

    /// Root-to-leaf chain of ancestors of `id`, root first, excluding `id`.
    pub fn ancestors(&self, id: NodeId) -> Vec<NodeId> {
        let mut chain = Vec::new();
        let mut cur = self.node(id).parent;
        while let Some(p) = cur {
            chain.push(p);
            cur = self.node(p).parent;
        }
        chain.reverse();
        chain
    }

    pub fn lca(&self, a: NodeId, b: NodeId) -> NodeId {
        let mut chain_a = self.ancestors(a);
        chain_a.push(a);
        let mut cur = Some(b);
        while let Some(n) = cur {
            if chain_a.contains(&n) {
                return n;
            }
            cur = self.node(n).parent;
        }
        unreachable!("root is shared")
    }

    pub fn leaf_action(&self, id: NodeId) -> Action {
        match &self.node(id).kind {
            OracleKind::Leaf { q } => argmax_oracle(q),
            OracleKind::Split { .. } => panic!("{id} is a split"),
        }
    }

    /// Exhaustive scan for the foil leaf with the deepest common ancestor.
    pub fn nearest_foil_leaf(&self, fact: NodeId, foil: Action) -> Option<NodeId> {
        self.leaves()
            .filter(|n| n.id != fact && self.leaf_action(n.id) == foil)
            .map(|n| (self.node(self.lca(fact, n.id)).depth, n.id))
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
            .map(|(_, id)| id)
    }
}

/// Largest value, first index among equals.
pub fn argmax_oracle(q: &QValues) -> Action {
    let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let i = q.iter().position(|&v| v == best).unwrap();
    Action::ALL[i]
}

pub fn thresholds(shape: &TreeShape) -> Vec<(Feature, f64)> {
    match shape {
        TreeShape::Leaf { .. } => vec![],
        TreeShape::Split { feature, threshold, left, right } => {
            let mut v = vec![(*feature, *threshold)];
            v.extend(thresholds(left));
            v.extend(thresholds(right));
            v
        }
    }
}
