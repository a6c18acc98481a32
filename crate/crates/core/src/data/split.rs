use rand::seq::SliceRandom;

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Row indices of a seeded train/validation partition.
///
/// The training part holds `round(train_fraction * n)` rows.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Input("cannot split an empty dataset".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let n_train = (train_fraction * n as f64).round() as usize;
    let valid = order.split_off(n_train);
    Ok((order, valid))
}

pub fn split_train_validation(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, valid) = split_indices(data.n_rows(), train_fraction, seed)?;
    Ok((data.subset(&train), data.subset(&valid)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let (a, b) = split_indices(10, 0.7, 1).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        // 0.7 * 199584 = 139708.8
        let (a, b) = split_indices(199_584, 0.7, 1).unwrap();
        assert_eq!((a.len(), b.len()), (139_709, 59_875));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(split_indices(10, 0.7, 0).unwrap(), split_indices(10, 0.7, 0).unwrap());
        let train_set = |s: u64| {
            let mut t = split_indices(100, 0.7, s).unwrap().0;
            t.sort_unstable();
            t
        };
        let base = train_set(0);
        assert!((1..=100).all(|s| train_set(s) != base));
    }

    #[test]
    fn disjoint_cover() {
        let (mut a, b) = split_indices(57, 0.3, 9).unwrap();
        a.extend(b);
        a.sort_unstable();
        assert_eq!(a, (0..57).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_fraction() {
        assert!(split_indices(10, 1.0, 0).is_err());
        assert!(split_indices(10, 0.0, 0).is_err());
        assert!(split_indices(0, 0.5, 0).is_err());
    }
}
