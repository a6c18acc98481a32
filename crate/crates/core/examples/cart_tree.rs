//! Fits a single regression tree and shows how it over-fits.

use ridehail::cart::{RegressionTree, TreeConfig};
use ridehail::data::{aggregate_to_slots, split_indices};
use ridehail::eval::rmse;
use ridehail::synth::{generate_requests, CityProfile};

fn main() -> ridehail::Result<()> {
    let city = generate_requests(&CityProfile::reduced(), 7, 3)?;
    let table = aggregate_to_slots(city.requests.iter().copied(), city.grid, &city.covariates)?;
    let (tr, va) = split_indices(table.n_rows(), 0.7, 3)?;
    let (train, valid) = (table.subset(&tr), table.subset(&va));
    for min_branch in [2, 10, 50, 200] {
        let config = TreeConfig { min_branch, ..Default::default() };
        let tree = RegressionTree::fit(&train, train.target(), &config)?;
        println!(
            "min_branch {min_branch:>3}: {:>5} leaves, depth {:>2}, train rmse {:6.2}, valid rmse {:6.2}",
            tree.n_leaves(),
            tree.depth(),
            rmse(&tree.predict_dataset(&train), train.target())?,
            rmse(&tree.predict_dataset(&valid), valid.target())?
        );
    }
    Ok(())
}
