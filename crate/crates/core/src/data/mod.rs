//! Slot-table schema, request aggregation, CSV formats and splitting.

pub mod aggregate;
pub mod csvio;
pub mod dataset;
pub mod schema;
pub mod split;

pub use aggregate::{aggregate_to_slots, Covariates, RawRequest, SlotGrid, TrafficObservation, WeatherObservation};
pub use csvio::{load_slot_table, write_slot_table};
pub use dataset::{dow_of, encode_time_of_day, Dataset, SlotKey, SlotRecord, SLOTS_PER_DAY};
pub use schema::{Column, ColumnKind, Schema};
pub use split::{split_indices, split_train_validation};
