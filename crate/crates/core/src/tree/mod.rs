//! Decision-tree policy: binary splits on single features, leaves holding
//! one expected Q-value per action.
//!
//! Nodes are numbered from 1 in depth-first pre-order (node, left subtree,
//! right subtree). The numbering is the serialized identity of a node, so
//! the ancestor relation reduces to an id-interval test:
//! `a` is an ancestor-or-self of `b` iff `a <= b <= last_descendant(a)`.

mod cqi;

pub use cqi::{train_cqi, CqiHyperparams, CqiTrainer, TrainError};

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{Action, Feature, FeatureVector, NUM_ACTIONS};

pub type NodeId = u32;
pub type QValues = [f64; NUM_ACTIONS];

pub const TREE_SCHEMA: &str = "dt-policy/v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("tree has no nodes")]
    Empty,
    #[error("node {0} is referenced but does not exist")]
    DanglingChild(NodeId),
    #[error("node ids must be 1..=n in depth-first pre-order; node {found} found where {expected} was expected")]
    BadNumbering { expected: NodeId, found: NodeId },
    #[error("node {node}: threshold {threshold} is not finite")]
    BadThreshold { node: NodeId, threshold: f64 },
    #[error("node {0} is not a leaf of this tree")]
    NotALeaf(NodeId),
    #[error("unsupported tree schema {0:?}")]
    Schema(String),
    #[error("tree file: {0}")]
    Io(String),
    #[error("tree json: {0}")]
    Json(String),
}

/// Which side of a split a value went to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

impl Direction {
    pub fn of(value: f64, threshold: f64) -> Direction {
        if value <= threshold {
            Direction::Le
        } else {
            Direction::Gt
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Le => "≤",
            Direction::Gt => ">",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    pub feature: Feature,
    pub threshold: f64,
    pub left: NodeId,
    pub right: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafNode {
    pub q_values: QValues,
    pub visits: u64,
}

impl LeafNode {
    pub fn best_action(&self) -> Action {
        argmax_action(&self.q_values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split(SplitNode),
    Leaf(LeafNode),
}

/// Highest Q-value wins; ties (and NaNs, which never win) go to the lowest id.
pub fn argmax_action(q: &QValues) -> Action {
    let mut best = 0;
    for i in 1..NUM_ACTIONS {
        if q[i] > q[best] || (q[best].is_nan() && !q[i].is_nan()) {
            best = i;
        }
    }
    Action::ALL[best]
}

/// Recursive description of a tree, used to build one without caring about ids.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeShape {
    Split {
        feature: Feature,
        threshold: f64,
        left: Box<TreeShape>,
        right: Box<TreeShape>,
    },
    Leaf {
        q_values: QValues,
        visits: u64,
    },
}

impl TreeShape {
    pub fn split(feature: Feature, threshold: f64, left: TreeShape, right: TreeShape) -> Self {
        TreeShape::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn leaf(q_values: QValues) -> Self {
        TreeShape::Leaf {
            q_values,
            visits: 0,
        }
    }

    /// A leaf whose greedy action is `action` (Q = 1 there, 0 elsewhere).
    pub fn leaf_for(action: Action) -> Self {
        let mut q = [0.0; NUM_ACTIONS];
        q[action.index()] = 1.0;
        TreeShape::leaf(q)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeMetadata {
    #[serde(default)]
    pub hyperparams: Option<CqiHyperparams>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub episodes_trained: u64,
    /// Agreement with the reference expert, once measured.
    #[serde(default)]
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub node: NodeId,
    pub feature: Feature,
    pub threshold: f64,
    pub direction: Direction,
}

/// Splits met from the root down to a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentPath {
    pub steps: Vec<PathStep>,
    pub leaf: NodeId,
}

impl DescentPath {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn step_at(&self, node: NodeId) -> Option<&PathStep> {
        self.steps.iter().find(|s| s.node == node)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NodeRecord {
    id: NodeId,
    #[serde(flatten)]
    node: Node,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TreeFile {
    schema: String,
    feature_encoding: u32,
    metadata: TreeMetadata,
    nodes: Vec<NodeRecord>,
}

/// An immutable, validated decision tree. Cheap to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTreePolicy {
    nodes: Vec<Node>,
    parent: Vec<Option<NodeId>>,
    depth: Vec<u32>,
    last_descendant: Vec<NodeId>,
    metadata: TreeMetadata,
}

impl DecisionTreePolicy {
    pub fn from_shape(shape: TreeShape, metadata: TreeMetadata) -> Result<Self, TreeError> {
        fn push(shape: TreeShape, nodes: &mut Vec<Node>) -> NodeId {
            let id = nodes.len() as NodeId + 1;
            match shape {
                TreeShape::Leaf { q_values, visits } => {
                    nodes.push(Node::Leaf(LeafNode { q_values, visits }));
                }
                TreeShape::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    nodes.push(Node::Split(SplitNode {
                        feature,
                        threshold,
                        left: 0,
                        right: 0,
                    }));
                    let l = push(*left, nodes);
                    let r = push(*right, nodes);
                    if let Node::Split(s) = &mut nodes[id as usize - 1] {
                        s.left = l;
                        s.right = r;
                    }
                }
            }
            id
        }
        let mut nodes = Vec::new();
        push(shape, &mut nodes);
        Self::from_nodes(nodes, metadata)
    }

    /// Validate a node list (`nodes[i]` has id `i + 1`).
    pub fn from_nodes(nodes: Vec<Node>, metadata: TreeMetadata) -> Result<Self, TreeError> {
        if nodes.is_empty() {
            return Err(TreeError::Empty);
        }
        let n = nodes.len();
        let mut parent = vec![None; n];
        let mut depth = vec![0u32; n];
        let mut last_descendant = vec![0 as NodeId; n];
        // Walk in pre-order, checking that each child id is exactly the next
        // id the walk would assign. This rejects cycles, sharing and gaps.
        let mut next: NodeId = 1;
        let mut stack: Vec<(NodeId, Option<NodeId>, u32)> = vec![(1, None, 0)];
        let mut finished: Vec<NodeId> = Vec::new();
        while let Some((id, par, d)) = stack.pop() {
            if id as usize > n || id == 0 {
                return Err(TreeError::DanglingChild(id));
            }
            if id != next {
                return Err(TreeError::BadNumbering {
                    expected: next,
                    found: id,
                });
            }
            next += 1;
            let idx = id as usize - 1;
            parent[idx] = par;
            depth[idx] = d;
            finished.push(id);
            if let Node::Split(s) = &nodes[idx] {
                if !s.threshold.is_finite() {
                    return Err(TreeError::BadThreshold {
                        node: id,
                        threshold: s.threshold,
                    });
                }
                if s.left != id + 1 {
                    return Err(if s.left as usize > n || s.left == 0 {
                        TreeError::DanglingChild(s.left)
                    } else {
                        TreeError::BadNumbering {
                            expected: id + 1,
                            found: s.left,
                        }
                    });
                }
                if s.right as usize > n || s.right == 0 {
                    return Err(TreeError::DanglingChild(s.right));
                }
                stack.push((s.right, Some(id), d + 1));
                stack.push((s.left, Some(id), d + 1));
            }
        }
        if (next as usize) != n + 1 {
            return Err(TreeError::BadNumbering {
                expected: n as NodeId + 1,
                found: next,
            });
        }
        // Subtree extents, children before parents.
        for &id in finished.iter().rev() {
            let idx = id as usize - 1;
            last_descendant[idx] = match &nodes[idx] {
                Node::Leaf(_) => id,
                Node::Split(s) => last_descendant[s.right as usize - 1],
            };
        }
        // Right child must start right after the left subtree.
        for (idx, node) in nodes.iter().enumerate() {
            if let Node::Split(s) = node {
                let expected = last_descendant[s.left as usize - 1] + 1;
                if s.right != expected {
                    return Err(TreeError::BadNumbering {
                        expected,
                        found: s.right,
                    });
                }
                debug_assert_eq!(parent[s.right as usize - 1], Some(idx as NodeId + 1));
            }
        }
        Ok(DecisionTreePolicy {
            nodes,
            parent,
            depth,
            last_descendant,
            metadata,
        })
    }

    /// One leaf with all-zero Q-values.
    pub fn single_leaf() -> Self {
        Self::from_shape(TreeShape::leaf([0.0; NUM_ACTIONS]), TreeMetadata::default())
            .expect("a single leaf is a valid tree")
    }

    pub fn metadata(&self) -> &TreeMetadata {
        &self.metadata
    }

    pub fn set_accuracy(&mut self, accuracy: f64) {
        self.metadata.accuracy = Some(accuracy);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        1
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        id.checked_sub(1).and_then(|i| self.nodes.get(i as usize))
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate().map(|(i, n)| (i as NodeId + 1, n))
    }

    pub fn leaf(&self, id: NodeId) -> Option<&LeafNode> {
        match self.node(id) {
            Some(Node::Leaf(l)) => Some(l),
            _ => None,
        }
    }

    pub fn split(&self, id: NodeId) -> Option<&SplitNode> {
        match self.node(id) {
            Some(Node::Split(s)) => Some(s),
            _ => None,
        }
    }

    pub fn leaf_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes()
            .filter(|(_, n)| matches!(n, Node::Leaf(_)))
            .map(|(id, _)| id)
    }

    pub fn split_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes()
            .filter(|(_, n)| matches!(n, Node::Split(_)))
            .map(|(id, _)| id)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent.get(id.checked_sub(1)? as usize).copied().flatten()
    }

    /// Root has depth 0.
    pub fn depth(&self, id: NodeId) -> Option<u32> {
        self.depth.get(id.checked_sub(1)? as usize).copied()
    }

    pub fn max_depth(&self) -> u32 {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Largest id in the subtree rooted at `id`.
    pub fn last_descendant(&self, id: NodeId) -> Option<NodeId> {
        self.last_descendant.get(id.checked_sub(1)? as usize).copied()
    }

    pub fn is_ancestor_or_self(&self, ancestor: NodeId, node: NodeId) -> bool {
        match self.last_descendant(ancestor) {
            Some(end) => ancestor <= node && node <= end && self.contains(node),
            None => false,
        }
    }

    pub fn descend(&self, features: &FeatureVector) -> DescentPath {
        let mut steps = Vec::new();
        let mut id = self.root();
        while let Some(s) = self.split(id) {
            let direction = Direction::of(features[s.feature.index()], s.threshold);
            steps.push(PathStep {
                node: id,
                feature: s.feature,
                threshold: s.threshold,
                direction,
            });
            id = match direction {
                Direction::Le => s.left,
                Direction::Gt => s.right,
            };
        }
        DescentPath { steps, leaf: id }
    }

    pub fn best_action(&self, features: &FeatureVector) -> (Action, DescentPath) {
        let path = self.descend(features);
        let action = self
            .leaf(path.leaf)
            .expect("descent always ends on a leaf")
            .best_action();
        (action, path)
    }

    pub fn leaf_action(&self, leaf: NodeId) -> Option<Action> {
        self.leaf(leaf).map(LeafNode::best_action)
    }

    /// The root-to-leaf path leading to `leaf`, reconstructed from the
    /// tree structure rather than from a feature vector.
    pub fn path_to(&self, leaf: NodeId) -> Result<DescentPath, TreeError> {
        if self.leaf(leaf).is_none() {
            return Err(TreeError::NotALeaf(leaf));
        }
        let mut steps = Vec::new();
        let mut child = leaf;
        while let Some(p) = self.parent(child) {
            let s = self.split(p).expect("parents are splits");
            steps.push(PathStep {
                node: p,
                feature: s.feature,
                threshold: s.threshold,
                direction: if s.left == child {
                    Direction::Le
                } else {
                    Direction::Gt
                },
            });
            child = p;
        }
        steps.reverse();
        Ok(DescentPath { steps, leaf })
    }

    pub fn to_json(&self) -> String {
        let file = TreeFile {
            schema: TREE_SCHEMA.to_string(),
            feature_encoding: crate::plant::FEATURE_ENCODING_VERSION,
            metadata: self.metadata.clone(),
            nodes: self
                .nodes()
                .map(|(id, node)| NodeRecord { id, node: *node })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("tree serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let file: TreeFile =
            serde_json::from_str(text).map_err(|e| TreeError::Json(e.to_string()))?;
        if file.schema != TREE_SCHEMA {
            return Err(TreeError::Schema(file.schema));
        }
        if file.feature_encoding != crate::plant::FEATURE_ENCODING_VERSION {
            return Err(TreeError::Schema(format!(
                "feature encoding v{}",
                file.feature_encoding
            )));
        }
        let mut nodes = Vec::with_capacity(file.nodes.len());
        for (i, rec) in file.nodes.into_iter().enumerate() {
            let expected = i as NodeId + 1;
            if rec.id != expected {
                return Err(TreeError::BadNumbering {
                    expected,
                    found: rec.id,
                });
            }
            nodes.push(rec.node);
        }
        Self::from_nodes(nodes, file.metadata)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TreeError> {
        std::fs::write(path.as_ref(), self.to_json() + "\n")
            .map_err(|e| TreeError::Io(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TreeError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| TreeError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }
}

impl crate::policy::Policy for &DecisionTreePolicy {
    fn act(&mut self, state: &crate::plant::PlantState) -> Action {
        self.best_action(&state.feature_vector()).0
    }
}
