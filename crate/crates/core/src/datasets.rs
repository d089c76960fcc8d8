//! Synthetic event datasets and their JSON-lines file format.
//!
//! A file starts with a header object `{"n_in", "T", "n_classes", "split"}`,
//! plus an optional `meta` provenance record, followed by one sample per
//! line: `{"label": c, "events": [[step, neuron], ...]}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::snn::SampleEvents;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    n_in: usize,
    #[serde(rename = "T")]
    steps: usize,
    n_classes: usize,
    #[serde(default)]
    split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<DatasetMeta>,
}

/// Where a generated dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    /// `patterns` or `interval`.
    pub generator: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl DatasetMeta {
    fn new<T: Serialize>(generator: &str, config: &T, seed: u64) -> Self {
        Self {
            generator: generator.into(),
            config: serde_json::to_value(config).expect("config serializes"),
            config_hash: crate::training::config_hash(config),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventDataset {
    pub n_in: usize,
    pub n_classes: usize,
    /// Steps per trial.
    pub steps: usize,
    pub split: Split,
    pub samples: Vec<SampleEvents>,
    pub meta: Option<DatasetMeta>,
}

impl EventDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        for (k, s) in self.samples.iter().enumerate() {
            if s.label >= self.n_classes {
                return Err(DatasetError::Invalid(format!("sample {k}: label {} out of range", s.label)));
            }
            if let Some(&(t, i)) = s.events.iter().find(|&&(t, i)| t >= self.steps || i >= self.n_in) {
                return Err(DatasetError::Invalid(format!("sample {k}: event ({t}, {i}) out of range")));
            }
        }
        Ok(())
    }

    /// Number of samples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Shuffles with `seed` and moves `round(test_fraction · len)` samples
    /// into a test split. Both splits keep their shuffled order.
    pub fn split(&self, test_fraction: f64, seed: u64) -> (EventDataset, EventDataset) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((test_fraction.clamp(0.0, 1.0)) * self.len() as f64).round() as usize;
        let pick = |idx: &[usize], split| EventDataset {
            split,
            samples: idx.iter().map(|&k| self.samples[k].clone()).collect(),
            ..self.empty_like()
        };
        (pick(&order[n_test..], Split::Train), pick(&order[..n_test], Split::Test))
    }

    fn empty_like(&self) -> EventDataset {
        EventDataset {
            n_in: self.n_in,
            n_classes: self.n_classes,
            steps: self.steps,
            split: self.split,
            samples: vec![],
            meta: self.meta.clone(),
        }
    }
}

pub fn save_events(dataset: &EventDataset, path: &Path) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_events(dataset, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_events(dataset: &EventDataset, w: &mut impl Write) -> Result<(), DatasetError> {
    let header = Header {
        n_in: dataset.n_in,
        steps: dataset.steps,
        n_classes: dataset.n_classes,
        split: dataset.split,
        meta: dataset.meta.clone(),
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for s in &dataset.samples {
        writeln!(w, "{}", serde_json::to_string(s).expect("sample serializes"))?;
    }
    Ok(())
}

pub fn load_events(path: &Path) -> Result<EventDataset, DatasetError> {
    read_events(BufReader::new(File::open(path)?))
}

pub fn read_events(r: impl BufRead) -> Result<EventDataset, DatasetError> {
    let mut lines = r.lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => return Err(DatasetError::Parse { line: 1, message: "missing header line".into() }),
            Some((k, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)
                    .map_err(|e| DatasetError::Parse { line: k + 1, message: format!("bad header: {e}") })?;
            }
        }
    };
    let mut ds = EventDataset {
        n_in: header.n_in,
        n_classes: header.n_classes,
        steps: header.steps,
        split: header.split,
        samples: Vec::new(),
        meta: header.meta,
    };
    for (k, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| DatasetError::Parse { line: k + 1, message };
        let s: SampleEvents = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if s.label >= ds.n_classes {
            return Err(parse_err(format!("label {} not below n_classes = {}", s.label, ds.n_classes)));
        }
        if let Some(&(t, i)) = s.events.iter().find(|&&(t, i)| t >= ds.steps || i >= ds.n_in) {
            return Err(parse_err(format!("event [{t}, {i}] outside T = {} / n_in = {}", ds.steps, ds.n_in)));
        }
        ds.samples.push(s);
    }
    Ok(ds)
}

fn default_steps() -> usize {
    100
}

/// Spatiotemporal template classification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternConfig {
    pub n_in: usize,
    pub n_classes: usize,
    pub samples_per_class: usize,
    #[serde(default)]
    pub jitter_std: f64,
    #[serde(default)]
    pub drop_prob: f64,
    #[serde(rename = "T", default = "default_steps")]
    pub steps: usize,
    /// Fraction of input neurons active in each template.
    #[serde(default = "default_active_fraction")]
    pub active_fraction: f64,
    /// Mean spikes per active input neuron in a template.
    #[serde(default = "default_spikes_per_neuron")]
    pub spikes_per_neuron: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_active_fraction() -> f64 {
    0.5
}
fn default_spikes_per_neuron() -> usize {
    3
}

impl PatternConfig {
    pub fn new(n_in: usize, n_classes: usize, samples_per_class: usize, seed: u64) -> Self {
        Self {
            n_in,
            n_classes,
            samples_per_class,
            jitter_std: 0.0,
            drop_prob: 0.0,
            steps: default_steps(),
            active_fraction: default_active_fraction(),
            spikes_per_neuron: default_spikes_per_neuron(),
            seed,
        }
    }
}

/// Class templates drawn by [`gen_patterns`], exposed for oracles.
pub fn pattern_templates(cfg: &PatternConfig) -> Vec<Vec<(usize, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    templates(cfg, &mut rng)
}

fn templates(cfg: &PatternConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<(usize, usize)>> {
    let n_active = ((cfg.active_fraction * cfg.n_in as f64).round() as usize).clamp(1, cfg.n_in.max(1));
    (0..cfg.n_classes)
        .map(|_| {
            let mut neurons: Vec<usize> = (0..cfg.n_in).collect();
            neurons.shuffle(rng);
            let mut events = Vec::new();
            for &i in &neurons[..n_active.min(cfg.n_in)] {
                for _ in 0..cfg.spikes_per_neuron {
                    events.push((rng.random_range(0..cfg.steps), i));
                }
            }
            events.sort_unstable();
            events.dedup();
            events
        })
        .collect()
}

/// Each class is a fixed random template; samples jitter every spike by a
/// rounded Gaussian and drop each spike independently.
pub fn gen_patterns(cfg: &PatternConfig) -> Result<EventDataset, DatasetError> {
    if cfg.n_in == 0 || cfg.n_classes == 0 || cfg.steps == 0 {
        return Err(DatasetError::Invalid("n_in, n_classes and T must be positive".into()));
    }
    if !(cfg.jitter_std >= 0.0 && cfg.jitter_std.is_finite()) || !(0.0..=1.0).contains(&cfg.drop_prob) {
        return Err(DatasetError::Invalid("jitter_std must be ≥ 0 and drop_prob in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let templates = templates(cfg, &mut rng);
    let jitter = Normal::new(0.0, cfg.jitter_std).expect("finite std");
    let last = (cfg.steps - 1) as f64;
    let mut samples = Vec::with_capacity(cfg.n_classes * cfg.samples_per_class);
    for _ in 0..cfg.samples_per_class {
        for (label, template) in templates.iter().enumerate() {
            let mut events = Vec::with_capacity(template.len());
            for &(t, i) in template {
                let shift = jitter.sample(&mut rng).round();
                let keep = rng.random::<f64>() >= cfg.drop_prob;
                if keep {
                    events.push(((t as f64 + shift).clamp(0.0, last) as usize, i));
                }
            }
            events.sort_unstable();
            events.dedup();
            samples.push(SampleEvents { label, events });
        }
    }
    Ok(EventDataset {
        n_in: cfg.n_in,
        n_classes: cfg.n_classes,
        steps: cfg.steps,
        split: Split::Train,
        samples,
        meta: Some(DatasetMeta::new("patterns", cfg, cfg.seed)),
    })
}

/// Two population pulses whose separation encodes the class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalConfig {
    pub n_in: usize,
    /// Inter-pulse gap of each class, in steps.
    pub gaps: Vec<usize>,
    pub samples_per_class: usize,
    #[serde(rename = "T", default = "default_interval_steps")]
    pub steps: usize,
    /// The gap is perturbed uniformly within ±jitter steps.
    #[serde(default = "default_gap_jitter")]
    pub jitter: usize,
    /// First pulse onset is uniform in [0, max_onset].
    #[serde(default = "default_max_onset")]
    pub max_onset: usize,
    /// Probability that a given input neuron joins a pulse.
    #[serde(default = "default_pulse_prob")]
    pub pulse_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_interval_steps() -> usize {
    80
}
fn default_gap_jitter() -> usize {
    1
}
fn default_max_onset() -> usize {
    20
}
fn default_pulse_prob() -> f64 {
    1.0
}

impl IntervalConfig {
    pub fn new(n_in: usize, gaps: Vec<usize>, samples_per_class: usize, seed: u64) -> Self {
        Self {
            n_in,
            gaps,
            samples_per_class,
            steps: default_interval_steps(),
            jitter: default_gap_jitter(),
            max_onset: default_max_onset(),
            pulse_prob: default_pulse_prob(),
            seed,
        }
    }
}

pub fn gen_interval_task(cfg: &IntervalConfig) -> Result<EventDataset, DatasetError> {
    if cfg.n_in == 0 || cfg.gaps.is_empty() {
        return Err(DatasetError::Invalid("need at least one input and one gap".into()));
    }
    let mut sorted = cfg.gaps.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != cfg.gaps.len() {
        return Err(DatasetError::Invalid("gaps must be distinct".into()));
    }
    let max_gap = sorted[sorted.len() - 1] + cfg.jitter;
    if cfg.max_onset + max_gap >= cfg.steps {
        return Err(DatasetError::Invalid(format!(
            "T = {} too short for onset {} plus gap {}",
            cfg.steps, cfg.max_onset, max_gap
        )));
    }
    if cfg.gaps.iter().any(|&g| g <= cfg.jitter) {
        return Err(DatasetError::Invalid("every gap must exceed the jitter".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(cfg.gaps.len() * cfg.samples_per_class);
    let j = cfg.jitter as i64;
    for _ in 0..cfg.samples_per_class {
        for (label, &gap) in cfg.gaps.iter().enumerate() {
            let onset = rng.random_range(0..=cfg.max_onset);
            let second = onset + (gap as i64 + rng.random_range(-j..=j)) as usize;
            let mut events = Vec::with_capacity(2 * cfg.n_in);
            for t in [onset, second] {
                for i in 0..cfg.n_in {
                    if cfg.pulse_prob >= 1.0 || rng.random::<f64>() < cfg.pulse_prob {
                        events.push((t, i));
                    }
                }
            }
            samples.push(SampleEvents { label, events });
        }
    }
    Ok(EventDataset {
        n_in: cfg.n_in,
        n_classes: cfg.gaps.len(),
        steps: cfg.steps,
        split: Split::Train,
        samples,
        meta: Some(DatasetMeta::new("interval", cfg, cfg.seed)),
    })
}
