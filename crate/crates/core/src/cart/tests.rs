use super::*;
use crate::data::ColumnKind;

const C: ColumnKind = ColumnKind::Continuous;

fn four_rows() -> (Dataset, Vec<f64>) {
    let rows = vec![vec![1.0], vec![2.0], vec![9.0], vec![10.0]];
    let y = vec![0.0, 0.0, 10.0, 10.0];
    (Dataset::from_rows(&[C], &rows, y.clone()).unwrap(), y)
}

fn small_config() -> TreeConfig {
    TreeConfig {
        min_leaf: 1,
        min_branch: 2,
        ..TreeConfig::default()
    }
}

#[test]
fn constant_targets_single_leaf() {
    let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 3) as f64]).collect();
    let y = vec![0.1; 30];
    let d = Dataset::from_rows(&[C, C], &rows, y.clone()).unwrap();
    let t = RegressionTree::fit(&d, &y, &TreeConfig::default()).unwrap();
    assert_eq!(t.nodes().len(), 1);
    assert_eq!(t.predict(&[100.0, 1.0]), 0.1);
}

#[test]
fn four_row_split_at_midpoint() {
    let (d, y) = four_rows();
    let t = RegressionTree::fit(&d, &y, &small_config()).unwrap();
    match &t.nodes()[0] {
        Node::Split { attribute, rule, .. } => {
            assert_eq!(*attribute, 0);
            assert_eq!(*rule, SplitRule::Continuous { threshold: 5.5 });
        }
        other => panic!("expected split, got {other:?}"),
    }
    assert_eq!(t.n_leaves(), 2);
    assert_eq!(t.predict(&[3.0]), 0.0);
    assert_eq!(t.predict(&[7.0]), 10.0);
    let train: Vec<f64> = t.predict_dataset(&d);
    assert_eq!(train, y);
}

#[test]
fn default_min_branch_blocks_small_nodes() {
    let (d, y) = four_rows();
    let t = RegressionTree::fit(&d, &y, &TreeConfig::default()).unwrap();
    assert_eq!(t.nodes().len(), 1);
    assert_eq!(t.predict(&[1.0]), 5.0);
}

#[test]
fn distinct_rows_are_memorized() {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i * 7 % 40) as f64, (i % 5) as f64]).collect();
    let y: Vec<f64> = (0..40).map(|i| ((i * 13) % 17) as f64).collect();
    let d = Dataset::from_rows(&[C, ColumnKind::Categorical { min: 0, max: 4 }], &rows, y.clone()).unwrap();
    let t = RegressionTree::fit(&d, &y, &small_config()).unwrap();
    assert_eq!(t.predict_dataset(&d), y);
}

#[test]
fn categorical_split_groups_levels_by_mean() {
    let kinds = [ColumnKind::Categorical { min: 1, max: 4 }];
    let rows: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0].iter().map(|&v| vec![v]).collect();
    let y = vec![10.0, 0.0, 10.0, 0.0, 10.0, 0.0, 10.0, 0.0];
    let d = Dataset::from_rows(&kinds, &rows, y.clone()).unwrap();
    let t = RegressionTree::fit(&d, &y, &small_config()).unwrap();
    match &t.nodes()[0] {
        Node::Split { rule: SplitRule::Categorical { left, right }, .. } => {
            assert_eq!(left, &vec![2, 4]);
            assert_eq!(right, &vec![1, 3]);
        }
        other => panic!("expected categorical split, got {other:?}"),
    }
    assert_eq!(t.predict_dataset(&d), y);
}

#[test]
fn unseen_level_goes_to_larger_child() {
    let kinds = [ColumnKind::Categorical { min: 1, max: 5 }];
    let rows: Vec<Vec<f64>> = [1.0, 1.0, 1.0, 2.0].iter().map(|&v| vec![v]).collect();
    let y = vec![1.0, 1.0, 1.0, 9.0];
    let d = Dataset::from_rows(&kinds, &rows, y.clone()).unwrap();
    let t = RegressionTree::fit(&d, &y, &small_config()).unwrap();
    assert_eq!(t.predict(&[5.0]), 1.0);
    assert_eq!(t.predict(&[f64::NAN]), 1.0);
}

#[test]
fn missing_values_follow_learned_direction() {
    // Missing rows look like the high group, so they should be routed right.
    let rows: Vec<Vec<f64>> = vec![
        vec![1.0],
        vec![2.0],
        vec![3.0],
        vec![8.0],
        vec![9.0],
        vec![f64::NAN],
        vec![f64::NAN],
    ];
    let y = vec![0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 10.0];
    let d = Dataset::from_rows(&[C], &rows, y.clone()).unwrap();
    let t = RegressionTree::fit(&d, &y, &small_config()).unwrap();
    match &t.nodes()[0] {
        Node::Split { missing_left, .. } => assert!(!missing_left),
        other => panic!("{other:?}"),
    }
    assert_eq!(t.predict(&[f64::NAN]), 10.0);
    assert_eq!(t.predict_dataset(&d), y);
}

#[test]
fn misaligned_targets_rejected() {
    let (d, _) = four_rows();
    assert!(RegressionTree::fit(&d, &[1.0, 2.0], &small_config()).is_err());
}

#[test]
fn invalid_config_rejected() {
    let (d, y) = four_rows();
    let bad = TreeConfig { min_leaf: 5, min_branch: 5, ..TreeConfig::default() };
    assert!(RegressionTree::fit(&d, &y, &bad).is_err());
    let bad = TreeConfig { subspace_size: Some(2), ..small_config() };
    assert!(RegressionTree::fit(&d, &y, &bad).is_err());
}

#[test]
fn max_depth_limits_growth() {
    let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
    let y: Vec<f64> = (0..64).map(|i| (i * i) as f64).collect();
    let d = Dataset::from_rows(&[C], &rows, y.clone()).unwrap();
    let t = RegressionTree::fit(&d, &y, &TreeConfig { max_depth: Some(1), ..small_config() }).unwrap();
    assert_eq!(t.depth(), 1);
    assert_eq!(t.n_leaves(), 2);
    let t = RegressionTree::fit(&d, &y, &TreeConfig { max_depth: Some(3), ..small_config() }).unwrap();
    assert_eq!(t.depth(), 3);
}

#[test]
fn json_round_trip_is_exact() {
    let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64) * 0.37, ((i * 3) % 4 + 1) as f64]).collect();
    let y: Vec<f64> = (0..50).map(|i| ((i as f64) * 1.1).sin() * 3.3).collect();
    let d = Dataset::from_rows(&[C, ColumnKind::Categorical { min: 1, max: 4 }], &rows, y.clone()).unwrap();
    let t = RegressionTree::fit(&d, &y, &small_config()).unwrap();
    let back = RegressionTree::from_json(&t.to_json().unwrap()).unwrap();
    assert_eq!(back, t);
    assert!(RegressionTree::from_json("{\"format\":\"other\",\"n_features\":1,\"depth\":0,\"nodes\":[]}").is_err());
}

#[test]
fn subspace_sampling_is_seeded() {
    let rows: Vec<Vec<f64>> = (0..200).map(|i| (0..6).map(|j| ((i * (j + 3)) % 23) as f64).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[0] + 2.0 * r[3] - r[5]).collect();
    let d = Dataset::from_rows(&[C; 6], &rows, y.clone()).unwrap();
    let cfg = TreeConfig { subspace_size: Some(2), seed: 11, ..TreeConfig::default() };
    let a = RegressionTree::fit(&d, &y, &cfg).unwrap();
    let b = RegressionTree::fit(&d, &y, &cfg).unwrap();
    assert_eq!(a, b);
    let c = RegressionTree::fit(&d, &y, &TreeConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a, c);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn predictions_bounded_and_splits_reduce_sse(
            data in prop::collection::vec((0.0f64..10.0, 0u8..4, -50.0f64..50.0), 2..60),
            min_leaf in 1usize..4,
        ) {
            let rows: Vec<Vec<f64>> = data.iter().map(|(a, b, _)| vec![a.round(), f64::from(*b)]).collect();
            let y: Vec<f64> = data.iter().map(|t| t.2).collect();
            let kinds = [C, ColumnKind::Categorical { min: 0, max: 3 }];
            let d = Dataset::from_rows(&kinds, &rows, y.clone()).unwrap();
            let cfg = TreeConfig { min_leaf, min_branch: min_leaf + 1, ..TreeConfig::default() };
            let t = RegressionTree::fit(&d, &y, &cfg).unwrap();
            let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for probe in [[-1.0, 0.0], [5.0, 9.0], [11.0, f64::NAN]] {
                let p = t.predict(&probe);
                prop_assert!(p >= lo && p <= hi);
            }
            let mut leaf_rows = vec![0usize; t.nodes().len()];
            for r in &rows {
                leaf_rows[t.leaf_index(r)] += 1;
            }
            for (i, n) in t.nodes().iter().enumerate() {
                match n {
                    Node::Leaf { .. } => prop_assert!(i == 0 || leaf_rows[i] >= min_leaf),
                    Node::Split { gain, weight, .. } => {
                        prop_assert!(*gain > 0.0);
                        prop_assert!(*weight >= cfg.min_branch as f64);
                    }
                }
            }
        }
    }
}
