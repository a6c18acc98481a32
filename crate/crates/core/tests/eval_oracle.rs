mod common;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use ridehail::data::aggregate_to_slots;
use ridehail::eval::{cumulative_distribution, evaluate, fit_scatter, rmse};
use ridehail::seed;
use ridehail::synth::{generate_requests, CityProfile};

#[test]
fn scatter_fit_matches_closed_form() {
    let mut rng = seed::rng(8);
    let noise = Normal::new(0.0, 2.0).unwrap();
    let obs: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..50.0)).collect();
    let pred: Vec<f64> = obs.iter().map(|o| 3.0 + 0.8 * o + noise.sample(&mut rng)).collect();
    let n = obs.len() as f64;
    let (sx, sy) = (obs.iter().sum::<f64>(), pred.iter().sum::<f64>());
    let sxx: f64 = obs.iter().map(|x| x * x).sum();
    let syy: f64 = pred.iter().map(|y| y * y).sum();
    let sxy: f64 = obs.iter().zip(&pred).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let r = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
    let fit = fit_scatter(&pred, &obs).unwrap();
    assert!((fit.slope - slope).abs() < 1e-10);
    assert!((fit.r_square - r * r).abs() < 1e-10);
    assert!((fit.intercept - (sy - slope * sx) / n).abs() < 1e-10);
}

#[test]
fn pooling_identity_on_full_city_grid() {
    let city = generate_requests(&CityProfile::full(), 2, 5).unwrap();
    let data = aggregate_to_slots(city.requests.iter().copied(), city.grid, &city.covariates).unwrap();
    let keys = data.slot_keys().unwrap();
    let obs = data.target();
    let pred: Vec<f64> = city.expected.clone();
    let report = evaluate("expected", &pred, obs, &keys).unwrap();
    let total = obs.len() as f64 * report.rmse * report.rmse;
    for g in &report.grouped {
        let pooled: f64 = g.groups.iter().map(|x| x.n as f64 * x.rmse * x.rmse).sum();
        assert!((pooled - total).abs() <= 1e-9 * total, "{:?}", g.group_by);
    }
    assert_eq!(report.grouped[0].groups.len(), 66);
    assert!((report.rmse - common::rmse(&pred, obs)).abs() < 1e-12);
}

#[test]
fn cumulative_distribution_ends_at_total() {
    let mut rng = seed::rng(9);
    let v: Vec<f64> = (0..1000).map(|_| rng.gen_range(0.0..100.0)).collect();
    let c = cumulative_distribution(&v);
    let total: f64 = v.iter().sum();
    assert!((c[c.len() - 1] - total).abs() <= 1e-12 * total);
    assert!(c.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(rmse(&[3.0], &[7.0]).unwrap(), 4.0);
}
