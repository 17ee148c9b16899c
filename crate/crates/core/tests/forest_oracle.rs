mod support;

use kpcast_core::forest::{fit, predict, ForestConfig, Mtry, TreeNode};
use kpcast_core::rng::SplitMix64;
use support::oracles::{cart_oracle, OracleTree};

fn single_tree(p: usize, min_leaf: usize) -> ForestConfig {
    ForestConfig {
        n_trees: 1,
        mtry: Mtry::Fixed(p),
        min_leaf,
        seed: 0,
        bootstrap: false,
    }
}

#[test]
fn training_predictions_match_exhaustive_cart() {
    let mut rng = SplitMix64::new(2024);
    for case in 0..200 {
        let (rows, ys) = support::random_problem(&mut rng, 30, 4);
        let data = support::dataset(&rows, &ys);
        let model = fit(&data, &single_tree(rows[0].len(), 1)).unwrap();
        let idx: Vec<usize> = (0..rows.len()).collect();
        let oracle = cart_oracle(&rows, &ys, &idx, 1);
        for (row, y) in rows.iter().zip(&ys) {
            let got = predict(&model, row).unwrap();
            assert_eq!(got.to_bits(), oracle.predict(row).to_bits(), "case {case}, target {y}");
        }
    }
}

fn same_shape(node: &TreeNode, oracle: &OracleTree) -> bool {
    match (node, oracle) {
        (TreeNode::Leaf { prediction, .. }, OracleTree::Leaf(v)) => prediction == v,
        (
            TreeNode::Internal { feature, threshold, left, right },
            OracleTree::Split { feature: f, lo, hi, left: ol, right: or },
        ) => {
            feature == f
                && *threshold >= *lo
                && *threshold < *hi
                && same_shape(left, ol)
                && same_shape(right, or)
        }
        _ => false,
    }
}

#[test]
fn tree_structure_matches_oracle_with_larger_leaves() {
    // Continuous features only, so the best split is unique almost surely.
    let mut rng = SplitMix64::new(99);
    for case in 0..100 {
        let n = 5 + rng.below(40);
        let p = 1 + rng.below(4);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.uniform(0.0, 1.0)).collect()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| (3.0 * r[0] + rng.uniform(0.0, 2.0)).min(9.0)).collect();
        let data = support::dataset(&rows, &ys);
        let model = fit(&data, &single_tree(p, 3)).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        let oracle = cart_oracle(&rows, &ys, &idx, 3);
        assert!(same_shape(&model.trees[0], &oracle), "case {case}");
    }
}

#[test]
fn two_cluster_example() {
    let rows = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
    let ys = [0.0, 0.0, 5.0, 5.0];
    let model = fit(&support::dataset(&rows, &ys), &single_tree(1, 1)).unwrap();
    match &model.trees[0] {
        TreeNode::Internal { feature, threshold, left, right } => {
            assert_eq!(*feature, 0);
            assert!(*threshold > 1.0 && *threshold < 10.0);
            assert_eq!(left.predict(&[0.0]), 0.0);
            assert_eq!(right.predict(&[11.0]), 5.0);
            assert!(left.is_leaf() && right.is_leaf());
        }
        other => panic!("expected a split, got {other:?}"),
    }
}
