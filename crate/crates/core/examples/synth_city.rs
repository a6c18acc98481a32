//! Generates a small synthetic city and prints per-district demand.

use ridehail::synth::{generate_requests, CityProfile};

fn main() -> ridehail::Result<()> {
    let profile = CityProfile::reduced();
    let city = generate_requests(&profile, 7, 1)?;
    println!("{} requests over {} slots", city.requests.len(), city.grid.n_slots());
    let mut per_district = vec![0usize; profile.n_districts as usize];
    for r in &city.requests {
        per_district[r.district_id as usize - 1] += 1;
    }
    for (d, (n, share)) in per_district.iter().zip(profile.district_shares()).enumerate() {
        println!("district {:>2}: {n:>7} requests (expected share {:.1}%)", d + 1, 100.0 * share);
    }
    Ok(())
}
