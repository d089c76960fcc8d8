//! Post-training interventions: synapse pruning by delay length, magnitude or
//! at random, hidden-neuron ablation and delay noise, each scored by
//! re-evaluating the unchanged remaining network.
//!
//! Pruning works through the recurrent mask, so pruned models keep their
//! support when saved.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::EventDataset;
use crate::geometry::DelayMatrix;
use crate::matrix::Matrix;
use crate::snn::{ModelParams, Network, NeuronParams};
use crate::topology::{self, TopologyError};
use crate::training::{evaluate_network, TrainError};

/// Synapses with `|w|` above this belong to the support.
pub const SUPPORT_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Eval(#[from] TrainError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneStrategy {
    /// Longest delay first.
    LongestDelay,
    /// Smallest `|w|` first.
    Magnitude,
    Random,
}

impl PruneStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            PruneStrategy::LongestDelay => "longest_delay",
            PruneStrategy::Magnitude => "magnitude",
            PruneStrategy::Random => "random",
        }
    }
}

/// Existing recurrent synapses `(pre, post)` in index order.
pub fn support(params: &ModelParams) -> Vec<(usize, usize)> {
    let n = params.n_hid();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| params.synapse_exists(i, j) && params.w_rec[(i, j)].abs() > SUPPORT_EPS)
        .collect()
}

/// The support in removal order. Ties keep index order.
pub fn prune_order(params: &ModelParams, delays: &DelayMatrix, strategy: PruneStrategy, seed: u64) -> Vec<(usize, usize)> {
    let mut syn = support(params);
    match strategy {
        PruneStrategy::LongestDelay => syn.sort_by(|a, b| delays.d[*b].total_cmp(&delays.d[*a])),
        PruneStrategy::Magnitude => syn.sort_by(|a, b| params.w_rec[*a].abs().total_cmp(&params.w_rec[*b].abs())),
        PruneStrategy::Random => syn.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
    }
    syn
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pruned {
    pub params: ModelParams,
    pub removed: Vec<(usize, usize)>,
    pub support_before: usize,
    /// Set when the requested count exceeded the support and everything was removed.
    pub exhausted: bool,
}

/// Removes `round(fraction · |support|)` synapses in [`prune_order`].
pub fn prune(params: &ModelParams, strategy: PruneStrategy, fraction: f64, seed: u64) -> Result<Pruned, PruneError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(PruneError::Invalid(format!("fraction {fraction} outside [0, 1]")));
    }
    let delays = params.delays.delay_matrix(params.n_hid());
    let order = prune_order(params, &delays, strategy, seed);
    let wanted = (fraction * order.len() as f64).round() as usize;
    let k = wanted.min(order.len());
    let exhausted = k == order.len() && k > 0;
    if exhausted {
        log::warn!("pruning removed all {} recurrent synapses", order.len());
    }
    let mut out = params.clone();
    for &(i, j) in &order[..k] {
        out.remove_synapse(i, j);
    }
    Ok(Pruned { params: out, removed: order[..k].to_vec(), support_before: order.len(), exhausted })
}

fn network_accuracy(params: &ModelParams, neuron: &NeuronParams, data: &EventDataset) -> Result<f64, PruneError> {
    let net = Network::new(params, neuron).map_err(TrainError::from)?;
    Ok(evaluate_network(&net, data)?.accuracy)
}

/// Binary support of the symmetrised recurrent weights.
pub fn binary_support(w_rec: &Matrix) -> Matrix {
    topology::binarize(&topology::preprocess(w_rec).expect("recurrent weights are square"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryTopology {
    pub q: Option<f64>,
    pub gamma: Option<f64>,
    pub density: f64,
}

pub fn binary_topology(a: &Matrix, n_null: usize, seed: u64) -> Result<BinaryTopology, PruneError> {
    let partition = topology::find_partition(a, seed)?;
    let q = topology::modularity(a, &partition).ok();
    let gamma = topology::clustering_binary_normalized(a, n_null, seed)?.normalized;
    Ok(BinaryTopology { q, gamma, density: topology::density(a) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SweepRow {
    /// A [`PruneStrategy`] name, or `random_matrix` for the density-matched baseline.
    pub strategy: String,
    pub fraction: f64,
    pub seed: u64,
    /// Absent for baseline rows, which have no network to evaluate.
    pub accuracy: Option<f64>,
    pub Q: Option<f64>,
    pub Gamma: Option<f64>,
    pub density: f64,
    pub synapses: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub strategy: PruneStrategy,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Null graphs per Gamma estimate.
    pub n_null: usize,
}

/// Accuracy and binary topology after pruning at every (fraction, seed),
/// each followed by a row for an Erdős–Rényi graph of the same density.
pub fn prune_sweep(params: &ModelParams, neuron: &NeuronParams, data: &EventDataset, opts: &SweepOptions) -> Result<Vec<SweepRow>, PruneError> {
    let mut rows = Vec::new();
    for &fraction in &opts.fractions {
        for &seed in &opts.seeds {
            let pruned = prune(params, opts.strategy, fraction, seed)?;
            let accuracy = network_accuracy(&pruned.params, neuron, data)?;
            let a = binary_support(&pruned.params.w_rec);
            let topo = binary_topology(&a, opts.n_null, seed)?;
            let synapses = pruned.support_before - pruned.removed.len();
            rows.push(SweepRow {
                strategy: opts.strategy.as_str().into(),
                fraction,
                seed,
                accuracy: Some(accuracy),
                Q: topo.q,
                Gamma: topo.gamma,
                density: topo.density,
                synapses,
            });
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            let baseline = topology::random_same_density(&a, &mut rng);
            let base = binary_topology(&baseline, opts.n_null, seed)?;
            rows.push(SweepRow {
                strategy: "random_matrix".into(),
                fraction,
                seed,
                accuracy: None,
                Q: base.q,
                Gamma: base.gamma,
                density: base.density,
                synapses,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub fraction: f64,
    pub seed: u64,
    pub ablated: usize,
    pub accuracy: f64,
}

/// Cuts every connection into and out of `neurons`.
pub fn ablate(params: &ModelParams, neurons: &[usize]) -> ModelParams {
    let mut out = params.clone();
    for &j in neurons {
        for i in 0..out.n_in() {
            out.w_in[(i, j)] = 0.0;
        }
        for k in 0..out.n_hid() {
            out.w_rec[(j, k)] = 0.0;
            out.w_rec[(k, j)] = 0.0;
        }
        for o in 0..out.n_out() {
            out.w_out[(j, o)] = 0.0;
        }
    }
    out
}

/// The `round(fraction · n_hid)` neurons ablated for `seed`.
pub fn ablation_set(n_hid: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let k = ((fraction * n_hid as f64).round() as usize).min(n_hid);
    let mut picked = rand::seq::index::sample(&mut ChaCha8Rng::seed_from_u64(seed), n_hid, k).into_vec();
    picked.sort_unstable();
    picked
}

pub fn ablate_neurons(params: &ModelParams, neuron: &NeuronParams, data: &EventDataset, fraction: f64, seeds: &[u64]) -> Result<Vec<AblationRow>, PruneError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(PruneError::Invalid(format!("fraction {fraction} outside [0, 1]")));
    }
    seeds
        .iter()
        .map(|&seed| {
            let set = ablation_set(params.n_hid(), fraction, seed);
            let accuracy = network_accuracy(&ablate(params, &set), neuron, data)?;
            Ok(AblationRow { fraction, seed, ablated: set.len(), accuracy })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbRow {
    pub noise_std: f64,
    pub seed: u64,
    pub accuracy: f64,
}

/// Adds `round(N(0, noise_std))` whole steps to every delay and clamps to
/// `[0, max_steps]`. Positions are left alone; the result is a free delay
/// matrix.
pub fn noisy_delays(delays: &DelayMatrix, noise_std: f64, max_steps: usize, seed: u64) -> Result<DelayMatrix, PruneError> {
    let normal = Normal::new(0.0, noise_std).map_err(|e| PruneError::Invalid(format!("noise std {noise_std}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = delays.d.rows();
    let d = Matrix::from_fn(n, n, |i, j| {
        let shift = normal.sample(&mut rng).round();
        if i == j {
            delays.d[(i, j)]
        } else {
            (delays.d[(i, j)] + shift).clamp(0.0, max_steps as f64)
        }
    });
    Ok(DelayMatrix { d, mode: crate::geometry::DelayMode::Free })
}

pub fn perturb_delays(params: &ModelParams, neuron: &NeuronParams, data: &EventDataset, noise_std: f64, seeds: &[u64]) -> Result<Vec<PerturbRow>, PruneError> {
    let base = params.delays.delay_matrix(params.n_hid());
    seeds
        .iter()
        .map(|&seed| {
            let d = noisy_delays(&base, noise_std, neuron.max_steps(), seed)?;
            let net = Network::with_delays(params, neuron, d).map_err(TrainError::from)?;
            Ok(PerturbRow { noise_std, seed, accuracy: evaluate_network(&net, data)?.accuracy })
        })
        .collect()
}
