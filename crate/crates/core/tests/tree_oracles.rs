//! Tree queries checked against brute-force oracles on random trees.

mod common;

use common::*;
use infopower_core::plant::{Action, PlantConfig};
use infopower_core::tree::{argmax_action, DecisionTreePolicy, Direction};
use infopower_core::xai::{nearest_foil_leaf, select_node_classical, select_node_user_aware, UsedNodeLedger};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn case(seed: u64) -> (ChaCha8Rng, PlantConfig, infopower_core::tree::TreeShape) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = PlantConfig::default();
    let shape = random_shape(&mut rng, &config, 6);
    (rng, config, shape)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn descend_lands_in_the_region_containing_the_vector(seed in any::<u64>()) {
        let (mut rng, config, shape) = case(seed);
        let tree = build(&shape);
        let oracle = Oracle::new(&shape);
        let hits = thresholds(&shape);
        for _ in 0..20 {
            let fv = random_vector(&mut rng, &config, &hits);
            let path = tree.descend(&fv);
            prop_assert_eq!(path.leaf, oracle.region_leaf(&fv));
            let mut expected = oracle.ancestors(path.leaf);
            prop_assert_eq!(path.steps.iter().map(|s| s.node).collect::<Vec<_>>(), expected.clone());
            expected.push(path.leaf);
            for (step, child) in path.steps.iter().zip(expected.iter().skip(1)) {
                prop_assert_eq!(step.direction, Direction::of(fv[step.feature.index()], step.threshold));
                match oracle.node(step.node).kind {
                    OracleKind::Split { left, right, .. } => {
                        let want = if step.direction == Direction::Le { left } else { right };
                        prop_assert_eq!(want, *child);
                    }
                    OracleKind::Leaf { .. } => prop_assert!(false, "leaf on path"),
                }
            }
        }
    }

    #[test]
    fn best_action_is_the_leaf_argmax(seed in any::<u64>()) {
        let (mut rng, config, shape) = case(seed);
        let tree = build(&shape);
        let oracle = Oracle::new(&shape);
        for _ in 0..20 {
            let fv = random_vector(&mut rng, &config, &thresholds(&shape));
            let (action, path) = tree.best_action(&fv);
            prop_assert_eq!(action, oracle.leaf_action(path.leaf));
        }
    }

    #[test]
    fn nearest_foil_leaf_matches_exhaustive_scan(seed in any::<u64>()) {
        let (_, _, shape) = case(seed);
        let tree = build(&shape);
        let oracle = Oracle::new(&shape);
        for fact in oracle.leaves().map(|n| n.id) {
            let fact_action = oracle.leaf_action(fact);
            for foil in Action::ALL.into_iter().filter(|&a| a != fact_action) {
                prop_assert_eq!(nearest_foil_leaf(&tree, fact, foil), oracle.nearest_foil_leaf(fact, foil));
            }
        }
    }

    #[test]
    fn user_aware_selection_is_the_parent_chain_lca(seed in any::<u64>()) {
        let (_, _, shape) = case(seed);
        let tree = build(&shape);
        let oracle = Oracle::new(&shape);
        let leaves: Vec<_> = oracle.leaves().map(|n| n.id).collect();
        for &a in &leaves {
            for &b in leaves.iter().filter(|&&b| b != a) {
                let node = select_node_user_aware(&tree, a, b).unwrap();
                prop_assert_eq!(node, oracle.lca(a, b));
                prop_assert!(tree.is_ancestor_or_self(node, a) && tree.is_ancestor_or_self(node, b));
            }
        }
    }

    #[test]
    fn classical_selection_stays_on_path(seed in any::<u64>(), used in prop::collection::vec((1u32..64, 0u64..10), 0..12)) {
        let (mut rng, config, shape) = case(seed);
        let tree = build(&shape);
        let fv = random_vector(&mut rng, &config, &[]);
        let path = tree.descend(&fv);
        let mut ledger = UsedNodeLedger::new();
        for (node, step) in used {
            ledger.mark(node, step);
        }
        match select_node_classical(&path, &ledger) {
            Ok(node) => {
                let on_path: Vec<_> = path.steps.iter().map(|s| s.node).collect();
                prop_assert!(on_path.contains(&node));
                // shallowest unused, else least recently used (shallowest on ties)
                let expected = on_path
                    .iter()
                    .copied()
                    .find(|n| ledger.last_used(*n).is_none())
                    .unwrap_or_else(|| {
                        *on_path.iter().min_by_key(|n| ledger.last_used(**n).unwrap()).unwrap()
                    });
                prop_assert_eq!(node, expected);
            }
            Err(_) => prop_assert!(path.is_empty()),
        }
    }

    #[test]
    fn json_round_trip_is_lossless(seed in any::<u64>()) {
        let (_, _, shape) = case(seed);
        let tree = build(&shape);
        let text = tree.to_json();
        let back = DecisionTreePolicy::from_json(&text).unwrap();
        prop_assert_eq!(&back, &tree);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn argmax_prefers_the_lowest_id(q in prop::array::uniform12(-5i8..5)) {
        let q = q.map(f64::from);
        prop_assert_eq!(argmax_action(&q), argmax_oracle(&q));
    }

    #[test]
    fn path_to_matches_descent(seed in any::<u64>()) {
        let (mut rng, config, shape) = case(seed);
        let tree = build(&shape);
        let fv = random_vector(&mut rng, &config, &thresholds(&shape));
        let path = tree.descend(&fv);
        prop_assert_eq!(tree.path_to(path.leaf).unwrap(), path);
    }
}
