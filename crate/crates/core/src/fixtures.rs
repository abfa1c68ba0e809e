//! Trees shared by tests, examples and the service's golden-file suite:
//! a small hand-built one and the bundled trained advisor.

use crate::plant::{Action, Feature};
use crate::tree::{DecisionTreePolicy, TreeMetadata, TreeShape};

/// Four splits, five leaves, numbered in pre-order:
///
/// ```text
/// 1 temperature <= 800
/// ├─ 2 security_rods <= 1
/// │  ├─ 3 water_level <= 50
/// │  │  ├─ 4 water_level <= 25
/// │  │  │  ├─ 5 add_water
/// │  │  │  └─ 6 skip
/// │  │  └─ 7 regulatory_down
/// │  └─ 8 security_up
/// └─ 9 security_down
/// ```
///
/// With node 1 already used, the classical selector explains leaf 5 with
/// node 2; the counterfactual between leaf 5 and leaf 7 is node 3.
pub fn four_split_tree() -> DecisionTreePolicy {
    let shape = TreeShape::split(
        Feature::Temperature,
        800.0,
        TreeShape::split(
            Feature::SecurityRods,
            1.0,
            TreeShape::split(
                Feature::WaterLevel,
                50.0,
                TreeShape::split(
                    Feature::WaterLevel,
                    25.0,
                    TreeShape::leaf_for(Action::AddWater),
                    TreeShape::leaf_for(Action::Skip),
                ),
                TreeShape::leaf_for(Action::RegulatoryDown),
            ),
            TreeShape::leaf_for(Action::SecurityUp),
        ),
        TreeShape::leaf_for(Action::SecurityDown),
    );
    DecisionTreePolicy::from_shape(shape, TreeMetadata::default()).expect("fixture is well formed")
}

/// Serialized tree trained with default hyperparameters and seed 0
/// (regenerate with `infopower train --seed 0 --out crates/core/fixtures/tree_seed0.json`).
pub const TRAINED_TREE_JSON: &str = include_str!("../fixtures/tree_seed0.json");

pub fn trained_tree() -> DecisionTreePolicy {
    DecisionTreePolicy::from_json(TRAINED_TREE_JSON).expect("bundled tree is valid")
}
