use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, SlotKey, SlotRecord, SLOTS_PER_DAY};
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
/// Weather, temperature and PM2.5 arrive once per 180 minutes.
pub const SLOTS_PER_WEATHER_BLOCK: u32 = 18;
pub const WEATHER_BLOCKS_PER_DAY: u32 = SLOTS_PER_DAY / SLOTS_PER_WEATHER_BLOCK;

/// A single ride request before aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRequest {
    pub district_id: u32,
    /// Seconds since the start of day 0.
    pub timestamp: f64,
    pub price: f64,
    pub destination_district: u32,
}

/// District-level congestion shares for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficObservation {
    pub district_id: u32,
    pub day_index: u32,
    pub slot_of_day: u32,
    pub shares: [f64; 4],
}

/// City-wide weather for one 180-minute block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherObservation {
    pub day_index: u32,
    pub block: u32,
    pub weather: u32,
    pub temperature: f64,
    pub pm25: f64,
}

/// Slot covariates that do not come from the requests themselves.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    pub traffic: Vec<TrafficObservation>,
    pub weather: Vec<WeatherObservation>,
}

/// Shape of the slot grid being aggregated onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotGrid {
    pub n_districts: u32,
    pub n_days: u32,
    /// Day of week (1..=7) of day 0.
    pub start_dow: u32,
}

impl SlotGrid {
    pub fn n_slots(&self) -> usize {
        self.n_districts as usize * self.n_days as usize * SLOTS_PER_DAY as usize
    }

    fn validate(&self) -> Result<()> {
        if self.n_districts == 0 {
            return Err(Error::Config("n_districts must be at least 1".into()));
        }
        if !(1..=7).contains(&self.start_dow) {
            return Err(Error::Config(format!("start_dow {} not in 1..=7", self.start_dow)));
        }
        Ok(())
    }

    // Row order: day, then slot, then district.
    fn cell(&self, district_id: u32, day: u32, slot: u32) -> usize {
        ((day as usize * SLOTS_PER_DAY as usize) + slot as usize) * self.n_districts as usize
            + (district_id as usize - 1)
    }
}

#[derive(Default)]
struct Cell {
    destinations: Vec<u32>,
    prices: Vec<f64>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Aggregates raw requests into the full slot grid.
///
/// Every (district, day, slot) cell is materialized. Empty slots get zero
/// demand, zero price statistics and one destination. Missing traffic
/// observations default to full free flow; weather is forward-filled from
/// the last observed block (zeros before the first one). City-wide shares are
/// the mean of the district shares in the same slot.
pub fn aggregate_to_slots<I>(requests: I, grid: SlotGrid, covariates: &Covariates) -> Result<Dataset>
where
    I: IntoIterator<Item = RawRequest>,
{
    grid.validate()?;
    let horizon = f64::from(grid.n_days) * SECONDS_PER_DAY;
    let mut cells: Vec<Cell> = Vec::new();
    cells.resize_with(grid.n_slots(), Cell::default);

    for (index, r) in requests.into_iter().enumerate() {
        let reject = |message: String| Error::Record { index, message };
        if r.district_id == 0 || r.district_id > grid.n_districts {
            return Err(reject(format!("district {} outside [1, {}]", r.district_id, grid.n_districts)));
        }
        if r.destination_district == 0 {
            return Err(reject("destination district 0".into()));
        }
        if !(r.timestamp >= 0.0 && r.timestamp < horizon) {
            return Err(reject(format!("timestamp {} outside [0, {horizon})", r.timestamp)));
        }
        if !(r.price.is_finite() && r.price >= 0.0) {
            return Err(reject(format!("price {} is not a non-negative number", r.price)));
        }
        let day = (r.timestamp / SECONDS_PER_DAY) as u32;
        let slot = ((r.timestamp - f64::from(day) * SECONDS_PER_DAY) / 600.0) as u32;
        let cell = &mut cells[grid.cell(r.district_id, day, slot.min(SLOTS_PER_DAY - 1))];
        cell.destinations.push(r.destination_district);
        cell.prices.push(r.price);
    }

    let mut traffic: HashMap<(u32, u32, u32), [f64; 4]> = HashMap::new();
    for (index, t) in covariates.traffic.iter().enumerate() {
        if t.district_id == 0 || t.district_id > grid.n_districts || t.slot_of_day >= SLOTS_PER_DAY {
            return Err(Error::Record {
                index,
                message: "traffic observation outside the slot grid".into(),
            });
        }
        if t.shares.iter().any(|s| !(0.0..=1.0).contains(s)) || t.shares.iter().sum::<f64>() > 1.0 + 1e-6 {
            return Err(Error::Record {
                index,
                message: "LoS shares must lie in [0, 1] and sum to at most 1".into(),
            });
        }
        traffic.insert((t.district_id, t.day_index, t.slot_of_day), t.shares);
    }
    let mut weather: HashMap<(u32, u32), WeatherObservation> = HashMap::new();
    for (index, w) in covariates.weather.iter().enumerate() {
        if w.block >= WEATHER_BLOCKS_PER_DAY || w.weather > 9 || w.pm25 < 0.0 {
            return Err(Error::Record {
                index,
                message: "weather observation out of range".into(),
            });
        }
        weather.insert((w.day_index, w.block), *w);
    }

    let mut records = Vec::with_capacity(grid.n_slots());
    let mut current_weather = (0.0, 0.0, 0.0);
    for day in 0..grid.n_days {
        for slot in 0..SLOTS_PER_DAY {
            if slot % SLOTS_PER_WEATHER_BLOCK == 0 {
                if let Some(w) = weather.get(&(day, slot / SLOTS_PER_WEATHER_BLOCK)) {
                    current_weather = (f64::from(w.weather), w.temperature, w.pm25);
                }
            }
            let district_shares: Vec<[f64; 4]> = (1..=grid.n_districts)
                .map(|d| *traffic.get(&(d, day, slot)).unwrap_or(&[1.0, 0.0, 0.0, 0.0]))
                .collect();
            let mut global = [0.0; 4];
            for s in &district_shares {
                for (g, v) in global.iter_mut().zip(s) {
                    *g += v;
                }
            }
            for g in &mut global {
                *g = (*g / f64::from(grid.n_districts)).clamp(0.0, 1.0);
            }

            for district in 1..=grid.n_districts {
                let cell = &mut cells[grid.cell(district, day, slot)];
                let demand = cell.prices.len();
                let (destinations, avg, med, min, max) = if demand == 0 {
                    (1, 0.0, 0.0, 0.0, 0.0)
                } else {
                    cell.destinations.sort_unstable();
                    cell.destinations.dedup();
                    cell.prices.sort_by(f64::total_cmp);
                    let sum: f64 = cell.prices.iter().sum();
                    (
                        cell.destinations.len(),
                        sum / demand as f64,
                        median(&cell.prices),
                        cell.prices[0],
                        cell.prices[demand - 1],
                    )
                };
                records.push(SlotRecord {
                    key: SlotKey::new(district, day, slot, grid.start_dow),
                    demand: demand as f64,
                    destinations: destinations.min(grid.n_districts as usize) as f64,
                    price_avg: avg,
                    price_median: med,
                    price_min: min,
                    price_max: max,
                    tj_level: district_shares[district as usize - 1],
                    tj_global: global,
                    weather: current_weather.0,
                    temperature: current_weather.1,
                    pm25: current_weather.2,
                });
            }
        }
    }
    Dataset::from_records(grid.n_districts as usize, &records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n_districts: u32, n_days: u32) -> SlotGrid {
        SlotGrid {
            n_districts,
            n_days,
            start_dow: 5,
        }
    }

    #[test]
    fn empty_stream_materializes_every_slot() {
        let d = aggregate_to_slots(Vec::new(), grid(1, 1), &Covariates::default()).unwrap();
        assert_eq!(d.n_rows(), 144);
        assert!(d.target().iter().all(|&y| y == 0.0));
        assert_eq!(d.column(3).iter().copied().fold(f64::NAN, f64::max), 1.0);
    }

    #[test]
    fn full_city_row_count() {
        assert_eq!(grid(66, 21).n_slots(), 199_584);
    }

    #[test]
    fn price_stats_and_destinations() {
        let reqs = vec![
            RawRequest { district_id: 2, timestamp: 605.0, price: 10.0, destination_district: 1 },
            RawRequest { district_id: 2, timestamp: 700.0, price: 30.0, destination_district: 1 },
            RawRequest { district_id: 2, timestamp: 1199.0, price: 2.0, destination_district: 3 },
            RawRequest { district_id: 2, timestamp: 1199.5, price: 4.0, destination_district: 3 },
        ];
        let d = aggregate_to_slots(reqs, grid(3, 1), &Covariates::default()).unwrap();
        // day 0, slot 1, district 2
        let row = 3 + 1;
        assert_eq!(d.target()[row], 4.0);
        let r = d.row(row);
        assert_eq!(r[0], 2.0);
        assert_eq!(r[1], 1.0);
        assert_eq!(r[3], 2.0);
        assert_eq!(r[4], 11.5);
        assert_eq!(r[5], 7.0);
        assert_eq!(r[6], 2.0);
        assert_eq!(r[7], 30.0);
    }

    #[test]
    fn rejects_out_of_range_records() {
        let bad_district = vec![
            RawRequest { district_id: 1, timestamp: 0.0, price: 1.0, destination_district: 1 },
            RawRequest { district_id: 4, timestamp: 0.0, price: 1.0, destination_district: 1 },
        ];
        match aggregate_to_slots(bad_district, grid(3, 1), &Covariates::default()) {
            Err(Error::Record { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        let late = vec![RawRequest { district_id: 1, timestamp: 86_400.0, price: 1.0, destination_district: 1 }];
        assert!(matches!(
            aggregate_to_slots(late, grid(1, 1), &Covariates::default()),
            Err(Error::Record { index: 0, .. })
        ));
    }

    #[test]
    fn weather_forward_fills_blocks() {
        let cov = Covariates {
            traffic: vec![],
            weather: vec![
                WeatherObservation { day_index: 0, block: 1, weather: 3, temperature: 5.0, pm25: 80.0 },
                WeatherObservation { day_index: 0, block: 4, weather: 7, temperature: 9.0, pm25: 20.0 },
            ],
        };
        let d = aggregate_to_slots(Vec::new(), grid(1, 2), &cov).unwrap();
        let w = d.column(16);
        assert_eq!(w[17], 0.0);
        assert_eq!(w[18], 3.0);
        assert_eq!(w[71], 3.0);
        assert_eq!(w[72], 7.0);
        assert_eq!(w[144 + 10], 7.0);
        assert_eq!(d.column(18)[50], 80.0);
    }
}
