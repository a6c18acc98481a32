//! Seeded synthetic city.
//!
//! Produces raw ride requests plus traffic and weather covariates for a city
//! whose aggregate demand has heavy-tailed district volumes, bimodal weekday
//! curves (morning and evening commuting peaks) and flatter weekends. Slot
//! counts are negative binomial: a Gamma-distributed intensity with shape
//! `dispersion` feeds a Poisson draw.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::{Gamma, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::aggregate::{SECONDS_PER_DAY, SLOTS_PER_WEATHER_BLOCK, WEATHER_BLOCKS_PER_DAY};
use crate::data::{dow_of, Covariates, RawRequest, SlotGrid, TrafficObservation, WeatherObservation, SLOTS_PER_DAY};
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::seed;

pub const MORNING_PEAK: (u32, u32) = (42, 60);
pub const EVENING_PEAK: (u32, u32) = (99, 120);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityProfile {
    pub n_districts: u32,
    /// Day of week of day 0, 1 = Monday.
    pub start_dow: u32,
    /// Mean requests per slot for each district on an average weekday.
    pub base_rates: Vec<f64>,
    /// Weekday multipliers before peak amplification.
    pub weekday_curve: Vec<f64>,
    pub weekend_curve: Vec<f64>,
    pub morning_amplification: f64,
    pub evening_amplification: f64,
    /// Gamma shape of the slot intensity; smaller is more overdispersed.
    pub dispersion: f64,
    /// Log-scale sd of a per-district, per-day demand level.
    pub day_noise: f64,
    /// Log-demand response to a one-sd traffic congestion anomaly.
    pub congestion_effect: f64,
    pub price_base: f64,
    /// Relative surge in fares per unit of demand pressure (expected
    /// demand over its usual level for the district and time of day).
    pub price_slope: f64,
    pub price_noise: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn bump(slot: u32, center: f64, width: f64) -> f64 {
    (-0.5 * ((f64::from(slot) - center) / width).powi(2)).exp()
}

/// Heavy-tailed district rates: rank `r` gets `r^-exponent + floor`, scaled
/// so the city-wide mean is `mean_demand`.
pub fn heavy_tailed_rates(n_districts: u32, mean_demand: f64, exponent: f64, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=n_districts).map(|r| f64::from(r).powf(-exponent) + floor).collect();
    let mean = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
    raw.iter().map(|v| v * mean_demand / mean).collect()
}

fn default_weekday_curve() -> Vec<f64> {
    (0..SLOTS_PER_DAY)
        .map(|s| {
            let x = f64::from(s);
            0.12 + 0.88 * logistic((x - 38.0) / 3.0) * logistic((136.0 - x) / 5.0)
        })
        .collect()
}

fn default_weekend_curve() -> Vec<f64> {
    (0..SLOTS_PER_DAY)
        .map(|s| {
            let x = f64::from(s);
            (0.2 + 0.8 * logistic((x - 54.0) / 6.0) * logistic((140.0 - x) / 6.0)) * (1.0 + 0.25 * bump(s, 90.0, 18.0))
        })
        .collect()
}

impl CityProfile {
    pub fn new(n_districts: u32, mean_demand: f64) -> Self {
        CityProfile {
            n_districts,
            start_dow: 5,
            base_rates: heavy_tailed_rates(n_districts, mean_demand, 1.5, 0.03),
            weekday_curve: default_weekday_curve(),
            weekend_curve: default_weekend_curve(),
            morning_amplification: 2.5,
            evening_amplification: 2.2,
            dispersion: 10.0,
            day_noise: 0.1,
            congestion_effect: 1.0,
            price_base: 12.0,
            price_slope: 0.5,
            price_noise: 3.0,
        }
    }

    /// 66 districts, the size of the full experiment.
    pub fn full() -> Self {
        Self::new(66, 20.0)
    }

    /// 12 districts, for quick runs.
    pub fn reduced() -> Self {
        Self::new(12, 20.0)
    }

    pub const KEYS: &'static [&'static str] = &[
        "n_districts",
        "start_dow",
        "mean_demand",
        "rate_exponent",
        "rate_floor",
        "base_rates",
        "morning_amplification",
        "evening_amplification",
        "dispersion",
        "day_noise",
        "congestion_effect",
        "price_base",
        "price_slope",
        "price_noise",
    ];

    /// Builds a profile from `key = value` settings on top of the defaults.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        kv.reject_unknown(Self::KEYS)?;
        let n = kv.get("n_districts")?.unwrap_or(66);
        let mut p = Self::new(n, kv.get("mean_demand")?.unwrap_or(20.0));
        if kv.get_str("rate_exponent").is_some() || kv.get_str("rate_floor").is_some() {
            p.base_rates = heavy_tailed_rates(
                n,
                kv.get("mean_demand")?.unwrap_or(20.0),
                kv.get("rate_exponent")?.unwrap_or(1.5),
                kv.get("rate_floor")?.unwrap_or(0.03),
            );
        }
        if let Some(rates) = kv.get_list("base_rates")? {
            p.base_rates = rates;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = kv.get(stringify!($field))? {
                    p.$field = v;
                }
            )*};
        }
        set!(
            start_dow,
            morning_amplification,
            evening_amplification,
            dispersion,
            day_noise,
            congestion_effect,
            price_base,
            price_slope,
            price_noise
        );
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_districts == 0 {
            return bad("n_districts must be at least 1".into());
        }
        if !(1..=7).contains(&self.start_dow) {
            return bad(format!("start_dow {} not in 1..=7", self.start_dow));
        }
        if self.base_rates.len() != self.n_districts as usize {
            return bad(format!("{} base rates for {} districts", self.base_rates.len(), self.n_districts));
        }
        if self.base_rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return bad("base rates must be finite and non-negative".into());
        }
        let mut sorted = self.base_rates.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
        if sorted[n - 1] < 10.0 * median {
            return bad(format!(
                "largest base rate {} is below 10x the median {median}; the city needs a dominant district",
                sorted[n - 1]
            ));
        }
        for curve in [&self.weekday_curve, &self.weekend_curve] {
            if curve.len() != SLOTS_PER_DAY as usize || curve.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad("diurnal curves need 144 non-negative multipliers".into());
            }
        }
        for (name, v) in [
            ("morning_amplification", self.morning_amplification),
            ("evening_amplification", self.evening_amplification),
            ("day_noise", self.day_noise),
            ("congestion_effect", self.congestion_effect),
            ("price_base", self.price_base),
            ("price_slope", self.price_slope),
            ("price_noise", self.price_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        if !(self.dispersion.is_finite() && self.dispersion > 0.0) {
            return bad("dispersion must be positive".into());
        }
        Ok(())
    }

    fn is_weekend(dow: u32) -> bool {
        dow >= 6
    }

    /// Expected-demand multiplier for a slot on the given day of week.
    pub fn diurnal(&self, dow: u32, slot: u32) -> f64 {
        if Self::is_weekend(dow) {
            self.weekend_curve[slot as usize]
        } else {
            let m = (self.morning_amplification - 1.0) * bump(slot, 51.0, 4.5);
            let e = (self.evening_amplification - 1.0) * bump(slot, 109.0, 5.5);
            self.weekday_curve[slot as usize] * (1.0 + m + e)
        }
    }

    /// Each district's share of expected city demand.
    pub fn district_shares(&self) -> Vec<f64> {
        let total: f64 = self.base_rates.iter().sum();
        self.base_rates.iter().map(|r| if total > 0.0 { r / total } else { 0.0 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCity {
    pub grid: SlotGrid,
    pub requests: Vec<RawRequest>,
    /// Expected demand of every slot before count noise, in slot-table row
    /// order (day, slot, district).
    pub expected: Vec<f64>,
    pub covariates: Covariates,
}

fn weather_multiplier(code: u32) -> f64 {
    match code {
        3..=5 => 1.25,
        6..=9 => 1.1,
        _ => 1.0,
    }
}

fn generate_weather(n_days: u32, seed: u64) -> Vec<WeatherObservation> {
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut code = 1u32;
    let mut pm = 80.0f64;
    let mut out = Vec::with_capacity((n_days * WEATHER_BLOCKS_PER_DAY) as usize);
    for day in 0..n_days {
        let day_temp = 4.0 + 3.0 * noise.sample(&mut rng);
        for block in 0..WEATHER_BLOCKS_PER_DAY {
            if rng.gen_bool(0.3) {
                code = match rng.gen_range(0..100) {
                    0..=44 => 1,
                    45..=74 => 2,
                    75..=86 => 3,
                    87..=92 => 4,
                    93..=95 => 5,
                    _ => rng.gen_range(6..=9),
                };
            }
            let hour = f64::from(block * 3) + 1.5;
            let temperature = day_temp + 4.0 * ((hour - 9.0) * std::f64::consts::PI / 12.0).sin()
                + 0.5 * noise.sample(&mut rng);
            pm = (pm * (0.25 * noise.sample(&mut rng)).exp()).clamp(5.0, 500.0);
            out.push(WeatherObservation {
                day_index: day,
                block,
                weather: code,
                temperature,
                pm25: pm,
            });
        }
    }
    out
}

fn softmax(logits: [f64; 4]) -> [f64; 4] {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|l| (l - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

struct DayOutput {
    requests: Vec<RawRequest>,
    expected: Vec<f64>,
    traffic: Vec<TrafficObservation>,
}

const CONGESTION_PERSISTENCE: f64 = 0.95;

fn ar_step(z: f64, rng: &mut seed::Rng, normal: &Normal<f64>) -> f64 {
    CONGESTION_PERSISTENCE * z + (1.0 - CONGESTION_PERSISTENCE * CONGESTION_PERSISTENCE).sqrt() * normal.sample(rng)
}

/// Demand multiplier from the 3-hour weather block.
fn weather_effect(w: &WeatherObservation) -> f64 {
    weather_multiplier(w.weather) * (-0.03 * (w.temperature - 4.0)).exp() * (0.001 * (w.pm25 - 80.0)).clamp(-0.3, 0.3).exp()
}

fn generate_day(
    profile: &CityProfile,
    day: u32,
    weather: &[WeatherObservation],
    peak_level: f64,
    seed: u64,
) -> Result<DayOutput> {
    let mut rng = seed::rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let nd = profile.n_districts;
    let dow = dow_of(day, profile.start_dow);
    let shares = profile.district_shares();
    let popularity: Vec<f64> = shares.iter().map(|s| s + 0.01).collect();
    let destinations = WeightedIndex::new(&popularity).map_err(|e| Error::Config(e.to_string()))?;
    let fares: Vec<f64> = (0..nd).map(|d| profile.price_base * (0.8 + 0.4 * f64::from(d) / f64::from(nd))).collect();
    let level: Vec<f64> = (0..nd).map(|_| (profile.day_noise * normal.sample(&mut rng)).exp()).collect();

    // Standardized congestion anomalies: one city-wide AR(1) process plus one
    // per district, each starting from its stationary distribution.
    let mut city = normal.sample(&mut rng);
    let mut local: Vec<f64> = (0..nd).map(|_| normal.sample(&mut rng)).collect();
    let anomaly = |city: f64, local: f64| 0.6 * city + 0.8 * local;
    let mut previous: Vec<f64> = local.iter().map(|&l| anomaly(city, l)).collect();

    let mut requests = Vec::new();
    let mut expected = Vec::with_capacity((nd * SLOTS_PER_DAY) as usize);
    let mut traffic = Vec::with_capacity((nd * SLOTS_PER_DAY) as usize);
    for slot in 0..SLOTS_PER_DAY {
        let w = &weather[(day * WEATHER_BLOCKS_PER_DAY + slot / SLOTS_PER_WEATHER_BLOCK) as usize];
        let rush = profile.diurnal(dow, slot.saturating_sub(1)) / peak_level;
        city = ar_step(city, &mut rng, &normal);
        for d in 0..nd {
            let du = d as usize;
            local[du] = ar_step(local[du], &mut rng, &normal);
            let z = anomaly(city, local[du]);
            let drive = (0.8 * z).tanh();

            // Traffic observed over the previous slot.
            let c = 0.6 * rush * (0.7 + 0.6 * shares[du].sqrt()) + 0.5 * previous[du];
            let jitter = |rng: &mut seed::Rng| 0.3 * normal.sample(rng);
            let logits = [
                2.5 - 3.0 * c + jitter(&mut rng),
                0.3 + 0.8 * c + jitter(&mut rng),
                -0.8 + 1.6 * c + jitter(&mut rng),
                -2.0 + 2.4 * c + jitter(&mut rng),
            ];
            traffic.push(TrafficObservation {
                district_id: d + 1,
                day_index: day,
                slot_of_day: slot,
                shares: softmax(logits),
            });
            previous[du] = z;

            let typical = profile.base_rates[du] * profile.diurnal(dow, slot);
            let mu = typical * weather_effect(w) * level[du] * (profile.congestion_effect * drive).exp();
            expected.push(mu);
            let intensity = if mu > 0.0 {
                Gamma::new(profile.dispersion, mu / profile.dispersion)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .sample(&mut rng)
            } else {
                0.0
            };
            // Surge pricing follows demand pressure: the slot's intensity over
            // its usual level for this district and time of day.
            let pressure = if typical > 0.0 { intensity / typical } else { 1.0 };
            let fare = fares[du] * (1.0 + profile.price_slope * (pressure - 1.0)).max(0.2);
            let count = if intensity > 0.0 {
                Poisson::new(intensity).map_err(|e| Error::Config(e.to_string()))?.sample(&mut rng) as u64
            } else {
                0
            };
            let base = f64::from(day) * SECONDS_PER_DAY + f64::from(slot) * 600.0;
            for _ in 0..count {
                let price = fare + profile.price_noise * normal.sample(&mut rng);
                requests.push(RawRequest {
                    district_id: d + 1,
                    timestamp: base + rng.gen_range(0.0..600.0),
                    price: price.max(1.0),
                    destination_district: destinations.sample(&mut rng) as u32 + 1,
                });
            }
        }
    }
    Ok(DayOutput { requests, expected, traffic })
}

/// Generates `n_days` of requests and covariates. Days are generated in
/// parallel from per-day sub-seeds, so the output does not depend on the
/// thread count.
pub fn generate_requests(profile: &CityProfile, n_days: u32, seed: u64) -> Result<SyntheticCity> {
    if n_days == 0 {
        return Err(Error::Config("n_days must be at least 1".into()));
    }
    profile.validate()?;
    let weather = generate_weather(n_days, seed::derive(seed, "weather"));
    let peak_level = (0..SLOTS_PER_DAY).map(|s| profile.diurnal(1, s)).fold(0.0, f64::max).max(1e-12);
    let day_seed = seed::derive(seed, "day");
    let days: Vec<DayOutput> = (0..n_days)
        .into_par_iter()
        .map(|day| generate_day(profile, day, &weather, peak_level, seed::derive_indexed(day_seed, u64::from(day))))
        .collect::<Result<_>>()?;
    let mut requests = Vec::with_capacity(days.iter().map(|d| d.requests.len()).sum());
    let mut traffic = Vec::with_capacity(days.iter().map(|d| d.traffic.len()).sum());
    let mut expected = Vec::with_capacity(traffic.capacity());
    for d in days {
        requests.extend(d.requests);
        expected.extend(d.expected);
        traffic.extend(d.traffic);
    }
    Ok(SyntheticCity {
        grid: SlotGrid {
            n_districts: profile.n_districts,
            n_days,
            start_dow: profile.start_dow,
        },
        requests,
        expected,
        covariates: Covariates { traffic, weather },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::aggregate_to_slots;

    fn slot_means(city: &SyntheticCity, weekday: bool) -> Vec<f64> {
        let mut sums = vec![0.0; SLOTS_PER_DAY as usize];
        let mut days = 0.0;
        for day in 0..city.grid.n_days {
            if (dow_of(day, city.grid.start_dow) < 6) == weekday {
                days += 1.0;
            }
        }
        for r in &city.requests {
            let day = (r.timestamp / SECONDS_PER_DAY) as u32;
            if (dow_of(day, city.grid.start_dow) < 6) == weekday {
                let slot = ((r.timestamp - f64::from(day) * SECONDS_PER_DAY) / 600.0) as usize;
                sums[slot] += 1.0;
            }
        }
        sums.iter().map(|s| s / days).collect()
    }

    #[test]
    fn zero_rates_give_no_requests() {
        let mut p = CityProfile::reduced();
        p.base_rates = vec![0.0; 12];
        let city = generate_requests(&p, 2, 1).unwrap();
        assert!(city.requests.is_empty());
        assert_eq!(city.covariates.traffic.len(), 12 * 2 * 144);
    }

    #[test]
    fn deterministic() {
        let p = CityProfile::reduced();
        assert_eq!(generate_requests(&p, 2, 7).unwrap(), generate_requests(&p, 2, 7).unwrap());
        assert_ne!(generate_requests(&p, 2, 7).unwrap().requests, generate_requests(&p, 2, 8).unwrap().requests);
    }

    #[test]
    fn aggregates_cleanly() {
        let city = generate_requests(&CityProfile::reduced(), 2, 3).unwrap();
        let data = aggregate_to_slots(city.requests.iter().copied(), city.grid, &city.covariates).unwrap();
        assert_eq!(data.n_rows(), 12 * 2 * 144);
        assert_eq!(data.target().iter().sum::<f64>() as usize, city.requests.len());
    }

    #[test]
    fn morning_peak_dominates_night() {
        let mut p = CityProfile::reduced();
        p.morning_amplification = 3.0;
        p.start_dow = 1;
        let (mut peak, mut night) = (0.0, 0.0);
        for s in 0..20 {
            let m = slot_means(&generate_requests(&p, 5, s).unwrap(), true);
            peak += m[42..=60].iter().sum::<f64>() / 19.0;
            night += m[0..=30].iter().sum::<f64>() / 31.0;
        }
        assert!(peak >= 2.0 * night, "{peak} vs {night}");
    }

    #[test]
    fn weekday_curve_is_bimodal() {
        let mut p = CityProfile::reduced();
        p.start_dow = 1;
        let m = slot_means(&generate_requests(&p, 5, 11).unwrap(), true);
        let smooth: Vec<f64> = (0..m.len())
            .map(|i| {
                let lo = i.saturating_sub(3);
                let hi = (i + 3).min(m.len() - 1);
                m[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect();
        let has_max = |(a, b): (u32, u32)| {
            (a as usize..=b as usize).any(|i| smooth[i] >= smooth[i - 1] && smooth[i] >= smooth[i + 1] && {
                let out_lo = smooth[(a as usize).saturating_sub(12)];
                smooth[i] > out_lo
            })
        };
        assert!(has_max(MORNING_PEAK));
        assert!(has_max(EVENING_PEAK));
    }

    #[test]
    fn top_district_share_matches_profile() {
        let p = CityProfile::reduced();
        let target = p.district_shares().iter().cloned().fold(0.0, f64::max);
        for s in 0..20 {
            let city = generate_requests(&p, 3, s).unwrap();
            let top = city.requests.iter().filter(|r| r.district_id == 1).count() as f64 / city.requests.len() as f64;
            assert!((top - target).abs() <= 0.2 * target, "seed {s}: {top} vs {target}");
        }
    }

    #[test]
    fn profile_validation_and_parsing() {
        let kv = KeyValues::parse("n_districts = 12\nmorning_amplification = 3\nmean_demand = 5").unwrap();
        let p = CityProfile::from_key_values(&kv).unwrap();
        assert_eq!(p.n_districts, 12);
        assert_eq!(p.morning_amplification, 3.0);
        assert!((p.base_rates.iter().sum::<f64>() / 12.0 - 5.0).abs() < 1e-9);
        assert!(CityProfile::from_key_values(&KeyValues::parse("bogus = 1").unwrap()).is_err());
        let flat = KeyValues::parse("n_districts = 3\nbase_rates = 1,1,1").unwrap();
        assert!(CityProfile::from_key_values(&flat).is_err());
        assert!(generate_requests(&CityProfile::reduced(), 0, 1).is_err());
    }
}
