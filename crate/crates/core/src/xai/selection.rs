//! Which split on the decision path becomes the explanation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::XaiError;
use crate::plant::Action;
use crate::tree::{DecisionTreePolicy, DescentPath, NodeId};

/// Split nodes already used in explanations, with the step they were last used at.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsedNodeLedger {
    last_used: BTreeMap<NodeId, u64>,
}

impl UsedNodeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mark(&mut self, node: NodeId, step: u64) {
        self.last_used.insert(node, step);
    }

    pub fn last_used(&self, node: NodeId) -> Option<u64> {
        self.last_used.get(&node).copied()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.last_used.contains_key(&node)
    }

    pub fn len(&self) -> usize {
        self.last_used.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last_used.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.last_used.keys().copied()
    }
}

/// Shallowest split on the path that has not been used yet; once every
/// split on the path has been used, the least recently used one (shallowest
/// on ties).
pub fn select_node_classical(
    path: &DescentPath,
    ledger: &UsedNodeLedger,
) -> Result<NodeId, XaiError> {
    if path.is_empty() {
        return Err(XaiError::NoExplainableSplit);
    }
    if let Some(step) = path.steps.iter().find(|s| !ledger.contains(s.node)) {
        return Ok(step.node);
    }
    let lru = path
        .steps
        .iter()
        .min_by_key(|s| ledger.last_used(s.node).unwrap_or(0))
        .expect("path is not empty");
    Ok(lru.node)
}

/// Among the leaves whose greedy action is `foil`, the one whose path leaves
/// the fact path as deep as possible; ties go to the smaller leaf id.
///
/// Returns `None` when no leaf recommends `foil` (or `fact_leaf` is not a
/// leaf of `tree`).
pub fn nearest_foil_leaf(tree: &DecisionTreePolicy, fact_leaf: NodeId, foil: Action) -> Option<NodeId> {
    tree.leaf(fact_leaf)?;
    // Climb from the fact leaf; at each ancestor the sibling subtree holds
    // exactly the leaves whose lowest common ancestor with the fact is that
    // ancestor. Pre-order ids make each subtree a contiguous id range.
    let mut child = fact_leaf;
    while let Some(ancestor) = tree.parent(child) {
        let split = tree.split(ancestor).expect("parents are splits");
        let sibling = if split.left == child { split.right } else { split.left };
        let end = tree.last_descendant(sibling).expect("sibling exists");
        let hit = (sibling..=end).find(|&id| tree.leaf_action(id) == Some(foil));
        if hit.is_some() {
            return hit;
        }
        child = ancestor;
    }
    None
}

/// The split where the fact and foil paths part ways (their lowest common ancestor).
pub fn select_node_user_aware(
    tree: &DecisionTreePolicy,
    fact_leaf: NodeId,
    foil_leaf: NodeId,
) -> Result<NodeId, XaiError> {
    for leaf in [fact_leaf, foil_leaf] {
        if tree.leaf(leaf).is_none() {
            return Err(XaiError::NotALeaf(leaf));
        }
    }
    if fact_leaf == foil_leaf {
        return Err(XaiError::SameLeaf(fact_leaf));
    }
    let mut node = fact_leaf;
    while let Some(ancestor) = tree.parent(node) {
        if tree.is_ancestor_or_self(ancestor, foil_leaf) {
            return Ok(ancestor);
        }
        node = ancestor;
    }
    unreachable!("the root is a common ancestor of any two leaves")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::four_split_tree;

    #[test]
    fn classical_skips_used_nodes() {
        let tree = four_split_tree();
        let path = tree.path_to(5).unwrap();
        let mut ledger = UsedNodeLedger::new();
        assert_eq!(select_node_classical(&path, &ledger).unwrap(), 1);
        ledger.mark(1, 0);
        assert_eq!(select_node_classical(&path, &ledger).unwrap(), 2);
    }

    #[test]
    fn classical_falls_back_to_least_recently_used() {
        let tree = four_split_tree();
        let path = tree.path_to(8).unwrap();
        assert_eq!(path.steps.iter().map(|s| s.node).collect::<Vec<_>>(), vec![1, 2]);
        let mut ledger = UsedNodeLedger::new();
        ledger.mark(1, 3);
        ledger.mark(2, 1);
        assert_eq!(select_node_classical(&path, &ledger).unwrap(), 2);
        ledger.mark(2, 3);
        assert_eq!(select_node_classical(&path, &ledger).unwrap(), 1);
    }

    #[test]
    fn classical_on_empty_path_has_nothing_to_say() {
        let tree = DecisionTreePolicy::single_leaf();
        let path = tree.descend(&[0.0; 8]);
        assert_eq!(
            select_node_classical(&path, &UsedNodeLedger::new()),
            Err(XaiError::NoExplainableSplit)
        );
    }

    #[test]
    fn four_split_user_aware_selection() {
        let tree = four_split_tree();
        let foil = tree.leaf_action(7).unwrap();
        assert_eq!(nearest_foil_leaf(&tree, 5, foil), Some(7));
        assert_eq!(select_node_user_aware(&tree, 5, 7).unwrap(), 3);
    }

    #[test]
    fn siblings_under_root_meet_at_root() {
        let tree = four_split_tree();
        assert_eq!(select_node_user_aware(&tree, 5, 9).unwrap(), 1);
        assert_eq!(select_node_user_aware(&tree, 4, 5).unwrap_err(), XaiError::NotALeaf(4));
        assert_eq!(select_node_user_aware(&tree, 5, 5).unwrap_err(), XaiError::SameLeaf(5));
    }

    #[test]
    fn absent_foil_gives_none() {
        let tree = four_split_tree();
        assert_eq!(nearest_foil_leaf(&tree, 5, Action::SustainMedium), None);
        assert_eq!(nearest_foil_leaf(&tree, 3, Action::Skip), None);
    }
}
