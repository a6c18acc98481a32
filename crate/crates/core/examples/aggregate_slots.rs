//! Aggregates raw requests into the 10-minute slot table and checks that
//! no request is lost.

use ridehail::data::aggregate_to_slots;
use ridehail::synth::{generate_requests, CityProfile};

fn main() -> ridehail::Result<()> {
    let city = generate_requests(&CityProfile::reduced(), 2, 7)?;
    let table = aggregate_to_slots(city.requests.iter().copied(), city.grid, &city.covariates)?;
    let total: f64 = table.target().iter().sum();
    println!("{} rows x {} predictors", table.n_rows(), table.n_predictors());
    println!("requests {} = summed demand {total}", city.requests.len());
    for i in 0..3 {
        println!("row {i}: {:?} -> {}", table.row(i), table.target()[i]);
    }
    Ok(())
}
