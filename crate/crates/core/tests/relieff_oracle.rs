mod common;

use proptest::prelude::*;
use rand::Rng;
use ridehail::data::{ColumnKind, Dataset};
use ridehail::relieff::{rank_features, rrelieff_weights, RReliefFConfig};
use ridehail::seed;

#[test]
fn weights_match_transcription() {
    let mut rng = seed::rng(seed::derive(1, "relieff-oracle"));
    for case in 0..1000 {
        let (data, cfg) = common::small_relieff_case(&mut rng);
        let got = rrelieff_weights(&data, &cfg).unwrap().weights;
        let want = common::relieff_oracle(&data, &cfg);
        for (a, (g, w)) in got.iter().zip(&want).enumerate() {
            assert!((g - w).abs() <= 1e-12, "case {case}, attribute {a}: {g} vs {w} ({cfg:?})");
        }
    }
}

#[test]
fn informative_attribute_outranks_noise() {
    let mut wins = 0;
    for s in 0..20u64 {
        let mut rng = seed::rng(s);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let data = Dataset::from_rows(&[ColumnKind::Continuous; 2], &rows, y).unwrap();
        let cfg = RReliefFConfig { m: 200, k: 10, sigma: 20.0, seed: s };
        let w = rrelieff_weights(&data, &cfg).unwrap();
        if rank_features(&w)[0].index == 0 {
            wins += 1;
        }
    }
    assert!(wins >= 19, "{wins}/20");
}

proptest! {
    #[test]
    fn constant_attribute_scores_zero(s in any::<u64>(), c in -10.0f64..10.0) {
        let mut rng = seed::rng(s);
        let n = rng.gen_range(3..30);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![c, rng.gen_range(0.0..1.0)]).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
        let data = Dataset::from_rows(&[ColumnKind::Continuous; 2], &rows, y).unwrap();
        let cfg = RReliefFConfig { m: n, k: rng.gen_range(1..n), sigma: 5.0, seed: s };
        prop_assert_eq!(rrelieff_weights(&data, &cfg).unwrap().weights[0], 0.0);
    }

    #[test]
    fn weights_are_bounded(s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let (data, cfg) = common::small_relieff_case(&mut rng);
        for w in rrelieff_weights(&data, &cfg).unwrap().weights {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&w), "{}", w);
        }
    }
}
