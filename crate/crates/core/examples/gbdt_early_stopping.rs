//! Boosting curves for two shrinkage values, with the best iteration picked
//! on the validation split and a warm-started continuation.

use ridehail::data::{aggregate_to_slots, split_indices};
use ridehail::gbdt::{continue_fit, fit_gbdt, GbdtConfig};
use ridehail::synth::{generate_requests, CityProfile};

fn main() -> ridehail::Result<()> {
    let city = generate_requests(&CityProfile::reduced(), 7, 5)?;
    let table = aggregate_to_slots(city.requests.iter().copied(), city.grid, &city.covariates)?;
    let (tr, va) = split_indices(table.n_rows(), 0.7, 5)?;
    let (train, valid) = (table.subset(&tr), table.subset(&va));
    let v = Some((&valid, valid.target()));

    for shrinkage in [1.0, 0.1] {
        let config = GbdtConfig { iterations: 150, shrinkage, seed: 5, ..Default::default() };
        let model = fit_gbdt(&train, train.target(), &config, v)?;
        let best = model.best_iteration()?;
        let h = &model.history;
        println!(
            "shrinkage {shrinkage}: best iteration {best} (valid rmse {:.2}), at {} valid rmse {:.2}, train rmse {:.2}",
            h[best - 1].valid_mse.unwrap().sqrt(),
            h.len(),
            h[h.len() - 1].valid_mse.unwrap().sqrt(),
            h[h.len() - 1].train_mse.sqrt()
        );
    }

    let config = GbdtConfig { iterations: 100, seed: 5, ..Default::default() };
    let model = fit_gbdt(&train, train.target(), &config, v)?;
    let model = continue_fit(model, &train, train.target(), 50, v)?;
    println!("continued to {} stages, best iteration {}", model.n_stages(), model.best_iteration()?);
    Ok(())
}
