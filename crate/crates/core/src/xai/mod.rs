//! The advisor's answers: *what* it would do (the tree's greedy action) and
//! *why* (one split condition from the decision path).
//!
//! Two selection strategies are implemented. `Classical` walks the fact
//! path from the root and prefers splits not used before. `UserAware`
//! predicts what the user is about to do (the foil), finds the leaf that
//! would recommend it with the smallest contrast, and explains with the
//! split where the two paths part.

mod render;
mod selection;
mod user_model;

pub use render::{
    format_value, render_condition, render_explanation, render_suggestion, NO_CONDITION_TEXT,
};
pub use selection::{
    nearest_foil_leaf, select_node_classical, select_node_user_aware, UsedNodeLedger,
};
pub use user_model::{BinKey, Discretizer, UserModel};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{Action, Feature, PlantState};
use crate::tree::{DecisionTreePolicy, DescentPath, Direction, NodeId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum XaiError {
    #[error("the decision path has no split to explain")]
    NoExplainableSplit,
    #[error("why asked before what in this step")]
    WhyBeforeWhat,
    #[error("unknown feature index {0}")]
    UnknownFeature(usize),
    #[error("node {0} is not a leaf of this tree")]
    NotALeaf(NodeId),
    #[error("fact and foil are the same leaf ({0})")]
    SameLeaf(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XaiMode {
    Classical,
    UserAware,
}

impl XaiMode {
    pub fn key(self) -> &'static str {
        match self {
            XaiMode::Classical => "classical",
            XaiMode::UserAware => "user-aware",
        }
    }
}

impl fmt::Display for XaiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for XaiMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classical" => Ok(XaiMode::Classical),
            "user-aware" | "user_aware" => Ok(XaiMode::UserAware),
            other => Err(format!("unknown XAI mode {other:?} (classical | user-aware)")),
        }
    }
}

/// Answer to a *what* question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub action: Action,
    pub path: DescentPath,
    pub leaf: NodeId,
}

impl Suggestion {
    pub fn text(&self) -> String {
        render_suggestion(self.action)
    }
}

/// Answer to a *why* question. `node_id`, `feature`, `op` and `value` are
/// absent only when the tree is a single leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub node_id: Option<NodeId>,
    pub feature: Option<Feature>,
    pub op: Option<Direction>,
    pub value: Option<f64>,
    pub mode: XaiMode,
    pub foil: Option<Action>,
    pub text: String,
}

impl Explanation {
    pub fn feature_index(&self) -> Option<usize> {
        self.feature.map(Feature::index)
    }
}

pub fn answer_what(tree: &DecisionTreePolicy, state: &PlantState) -> Suggestion {
    let (action, path) = tree.best_action(&state.feature_vector());
    Suggestion {
        action,
        leaf: path.leaf,
        path,
    }
}

fn explain_node(
    path: &DescentPath,
    node: NodeId,
    mode: XaiMode,
    foil: Option<Action>,
) -> Explanation {
    let step = path.step_at(node).expect("selected node lies on the fact path");
    let text = render_explanation(step.feature.index(), step.direction, step.threshold, foil)
        .expect("tree features are always known");
    Explanation {
        node_id: Some(node),
        feature: Some(step.feature),
        op: Some(step.direction),
        value: Some(step.threshold),
        mode,
        foil,
        text,
    }
}

/// Answer a *why* question about `suggestion`, which must have been given
/// for this state. Marks the chosen split as used at `step` in both modes;
/// only the classical selector consults the ledger.
pub fn answer_why(
    tree: &DecisionTreePolicy,
    state: &PlantState,
    mode: XaiMode,
    ledger: &mut UsedNodeLedger,
    user_model: &UserModel,
    suggestion: Option<&Suggestion>,
    step: u64,
) -> Result<Explanation, XaiError> {
    let suggestion = suggestion.ok_or(XaiError::WhyBeforeWhat)?;
    let path = &suggestion.path;
    if path.is_empty() {
        return Ok(Explanation {
            node_id: None,
            feature: None,
            op: None,
            value: None,
            mode: XaiMode::Classical,
            foil: None,
            text: NO_CONDITION_TEXT.to_string(),
        });
    }
    let explanation = match mode {
        XaiMode::UserAware => {
            let foil = user_model.predict_action(state);
            let contrast = (foil != suggestion.action)
                .then(|| nearest_foil_leaf(tree, suggestion.leaf, foil))
                .flatten();
            match contrast {
                Some(foil_leaf) => {
                    let node = select_node_user_aware(tree, suggestion.leaf, foil_leaf)?;
                    explain_node(path, node, XaiMode::UserAware, Some(foil))
                }
                None => {
                    let node = select_node_classical(path, ledger)?;
                    explain_node(path, node, XaiMode::Classical, None)
                }
            }
        }
        XaiMode::Classical => {
            let node = select_node_classical(path, ledger)?;
            explain_node(path, node, XaiMode::Classical, None)
        }
    };
    if let Some(node) = explanation.node_id {
        ledger.mark(node, step);
    }
    Ok(explanation)
}

/// Per-session advisor state: strategy, used-node ledger, user model and
/// the suggestion given in the current step.
#[derive(Debug, Clone, PartialEq)]
pub struct Advisor {
    mode: XaiMode,
    ledger: UsedNodeLedger,
    user_model: UserModel,
    current: Option<(u32, Suggestion)>,
}

impl Advisor {
    pub fn new(mode: XaiMode, user_model: UserModel) -> Self {
        Advisor {
            mode,
            ledger: UsedNodeLedger::new(),
            user_model,
            current: None,
        }
    }

    pub fn mode(&self) -> XaiMode {
        self.mode
    }

    pub fn ledger(&self) -> &UsedNodeLedger {
        &self.ledger
    }

    pub fn user_model(&self) -> &UserModel {
        &self.user_model
    }

    /// The advisor never acts; it only reports what it would do.
    pub fn what(&mut self, tree: &DecisionTreePolicy, state: &PlantState) -> Suggestion {
        let s = answer_what(tree, state);
        self.current = Some((state.step_index, s.clone()));
        s
    }

    pub fn why(
        &mut self,
        tree: &DecisionTreePolicy,
        state: &PlantState,
    ) -> Result<Explanation, XaiError> {
        let suggestion = self
            .current
            .as_ref()
            .filter(|(step, _)| *step == state.step_index)
            .map(|(_, s)| s);
        answer_why(
            tree,
            state,
            self.mode,
            &mut self.ledger,
            &self.user_model,
            suggestion,
            state.step_index as u64,
        )
    }

    /// What the user model expects the user to do now.
    pub fn predicted_action(&self, state: &PlantState) -> Action {
        self.user_model.predict_action(state)
    }

    pub fn observe(&mut self, state: &PlantState, action: Action) {
        self.user_model.observe_action(state, action);
    }
}
