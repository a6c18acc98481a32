//! Bagging versus random forests over a sweep of subspace sizes.

use ridehail::data::{aggregate_to_slots, split_indices};
use ridehail::ensemble::{fit_bagged, fit_random_forest, EnsembleConfig, Subspace};
use ridehail::eval::rmse;
use ridehail::synth::{generate_requests, CityProfile};

fn main() -> ridehail::Result<()> {
    let city = generate_requests(&CityProfile::reduced(), 7, 4)?;
    let table = aggregate_to_slots(city.requests.iter().copied(), city.grid, &city.covariates)?;
    let (tr, va) = split_indices(table.n_rows(), 0.7, 4)?;
    let (train, valid) = (table.subset(&tr), table.subset(&va));
    let base = EnsembleConfig { n_trees: 50, seed: 4, ..Default::default() };

    let bdt = fit_bagged(&train, train.target(), &base)?;
    println!("model      subspace  valid rmse");
    println!("BDT        {:>8}  {:10.2}", bdt.subspace_size, rmse(&bdt.predict_dataset(&valid), valid.target())?);
    for delta in [10.0, 25.0, 50.0, 75.0, 100.0] {
        let config = EnsembleConfig { subspace: Subspace::Percent { percent: delta }, ..base.clone() };
        let rf = fit_random_forest(&train, train.target(), &config)?;
        let err = rmse(&rf.predict_dataset(&valid), valid.target())?;
        println!("RF d={delta:<5} {:>8}  {err:10.2}", rf.subspace_size);
    }
    Ok(())
}
