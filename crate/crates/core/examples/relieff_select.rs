//! Ranks the slot-table predictors with RReliefF.

use ridehail::data::aggregate_to_slots;
use ridehail::relieff::{rank_features, rrelieff_weights, select_features, RReliefFConfig};
use ridehail::synth::{generate_requests, CityProfile};

fn main() -> ridehail::Result<()> {
    let city = generate_requests(&CityProfile::reduced(), 3, 2)?;
    let table = aggregate_to_slots(city.requests.iter().copied(), city.grid, &city.covariates)?;
    let weights = rrelieff_weights(&table, &RReliefFConfig { m: 500, ..Default::default() })?;
    let ranking = rank_features(&weights);
    for (rank, a) in ranking.iter().enumerate() {
        println!("{:>2}. {:<22} {:+.5}", rank + 1, a.name, a.weight);
    }
    let kept = select_features(&ranking, 0.0)?;
    println!("{} of {} attributes have positive weight", kept.len(), ranking.len());
    Ok(())
}
