//! Shared training setups.
#![allow(dead_code)]

use posdelay::datasets::{gen_interval_task, EventDataset, IntervalConfig};
use posdelay::training::TrainConfig;
use posdelay::DelayMode;

pub const INTERVAL_CONFIG: &str = include_str!("../../../../configs/interval.json");
pub const GAPS: [usize; 4] = [5, 15, 25, 35];

pub fn interval_config(seed: u64, mode: DelayMode) -> TrainConfig {
    let cfg: TrainConfig = serde_json::from_str(INTERVAL_CONFIG).expect("bundled config parses");
    TrainConfig { seed, delay_mode: mode, ..cfg }
}

/// Train and test splits of the interval task, 100 trials per gap.
pub fn interval_data(seed: u64, samples_per_class: usize) -> (EventDataset, EventDataset) {
    let cfg = IntervalConfig { steps: 120, ..IntervalConfig::new(16, GAPS.to_vec(), samples_per_class, seed) };
    gen_interval_task(&cfg).expect("valid interval config").split(0.25, seed)
}
