//! Mini-batch training with Adam and optional L1 penalties on recurrent weights.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::datasets::EventDataset;
use crate::eventprop::{EventPropError, GradientSet};
use crate::geometry::{DelayMatrix, DelayMode, PositionArray};
use crate::matrix::Matrix;
use crate::snn::{compute_loss, DelayParams, ModelParams, Network, NeuronParams, RecordOptions, Scratch, SimError};

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("distance-scaled L1 needs a positive mean delay, got {0}")]
    ZeroMeanDelay(f64),
    #[error("non-finite {what} at epoch {epoch}, batch {batch}")]
    NonFinite { what: &'static str, epoch: usize, batch: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Adjoint(#[from] EventPropError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    #[default]
    None,
    L1,
    /// L1 scaled by each synapse's delay over the mean off-diagonal delay.
    L1Distance,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerConfig {
    #[serde(default)]
    pub kind: RegularizerKind,
    #[serde(default)]
    pub lambda1: f64,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Adds the penalty's subgradient to `g_w_rec`. Only weights are touched.
pub fn apply_regularizer(
    g_w_rec: &mut Matrix,
    w_rec: &Matrix,
    delays: &DelayMatrix,
    cfg: &RegularizerConfig,
) -> Result<(), TrainError> {
    assert_eq!(g_w_rec.shape(), w_rec.shape(), "gradient and weight shapes differ");
    let lambda = cfg.lambda1;
    match cfg.kind {
        RegularizerKind::None => {}
        RegularizerKind::L1 => {
            for (g, &w) in g_w_rec.as_mut_slice().iter_mut().zip(w_rec.as_slice()) {
                *g += lambda * sign(w);
            }
        }
        RegularizerKind::L1Distance => {
            let mean = delays.off_diagonal_mean();
            if !(mean > 0.0) {
                return Err(TrainError::ZeroMeanDelay(mean));
            }
            let d = delays.d.as_slice();
            for ((g, &w), &dij) in g_w_rec.as_mut_slice().iter_mut().zip(w_rec.as_slice()).zip(d) {
                *g += lambda * sign(w) * (dij / mean);
            }
        }
    }
    Ok(())
}

/// Adam hyper-parameters and the shared step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
}

/// First and second moments for one parameter tensor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len] }
    }
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { beta1, beta2, eps, t: 0 }
    }

    /// Advances the step counter. Call once per optimiser step, before the updates.
    pub fn tick(&mut self) {
        self.t += 1;
    }

    /// Bias-corrected update of one tensor at the current step.
    pub fn update(&self, moments: &mut Moments, params: &mut [f64], grads: &[f64], lr: f64) {
        assert!(self.t > 0, "tick before update");
        assert_eq!(params.len(), grads.len());
        assert_eq!(moments.m.len(), params.len());
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            let g = grads[k];
            let m = self.beta1 * moments.m[k] + (1.0 - self.beta1) * g;
            let v = self.beta2 * moments.v[k] + (1.0 - self.beta2) * g * g;
            moments.m[k] = m;
            moments.v[k] = v;
            params[k] -= lr * (m / c1) / ((v / c2).sqrt() + self.eps);
        }
    }
}

/// Optimiser state for a whole model.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub adam: Adam,
    pub w_in: Moments,
    pub w_rec: Moments,
    pub w_out: Moments,
    pub delays: Moments,
}

impl AdamState {
    pub fn new(params: &ModelParams, cfg: &TrainConfig) -> Self {
        Self {
            adam: Adam::new(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
            w_in: Moments::new(params.w_in.as_slice().len()),
            w_rec: Moments::new(params.w_rec.as_slice().len()),
            w_out: Moments::new(params.w_out.as_slice().len()),
            delays: Moments::new(params.delays.parameter_count()),
        }
    }
}

/// Step sizes per parameter group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearningRates {
    /// Input and recurrent weights.
    pub hidden: f64,
    pub readout: f64,
    /// Coordinates, free or axonal delays.
    pub delays: f64,
}

impl LearningRates {
    pub fn uniform(lr: f64) -> Self {
        Self { hidden: lr, readout: lr, delays: lr }
    }
}

/// One Adam step on every trainable tensor. Free and axonal delays are kept
/// nonnegative; masked synapses stay at zero.
pub fn adam_step(state: &mut AdamState, params: &mut ModelParams, grads: &GradientSet, lr: LearningRates) {
    state.adam.tick();
    let adam = &state.adam;
    let delay_lr = lr.delays;
    adam.update(&mut state.w_in, params.w_in.as_mut_slice(), grads.w_in.as_slice(), lr.hidden);
    adam.update(&mut state.w_rec, params.w_rec.as_mut_slice(), grads.w_rec.as_slice(), lr.hidden);
    adam.update(&mut state.w_out, params.w_out.as_mut_slice(), grads.w_out.as_slice(), lr.readout);
    match &mut params.delays {
        DelayParams::None => {}
        DelayParams::Free(d) => {
            adam.update(&mut state.delays, d.as_mut_slice(), grads.delay.as_slice(), delay_lr);
            d.as_mut_slice().iter_mut().for_each(|x| *x = x.max(0.0));
        }
        DelayParams::Axonal(v) => {
            let g = grads.axonal.as_ref().expect("axonal gradient present");
            adam.update(&mut state.delays, v, g, delay_lr);
            v.iter_mut().for_each(|x| *x = x.max(0.0));
        }
        DelayParams::Positional(p) => {
            let g = grads.positions.as_ref().expect("position gradient present");
            adam.update(&mut state.delays, p.coords_mut().as_mut_slice(), g.as_slice(), delay_lr);
        }
    }
    params.apply_mask();
}

fn d_epochs() -> usize {
    50
}
fn d_batch() -> usize {
    32
}
fn d_lr() -> f64 {
    5e-3
}
fn d_mode() -> DelayMode {
    DelayMode::Positional
}
fn d_beta1() -> f64 {
    0.9
}
fn d_beta2() -> f64 {
    0.999
}
fn d_eps() -> f64 {
    1e-8
}
fn d_hidden() -> usize {
    64
}
fn d_dim() -> usize {
    2
}
fn d_radius() -> f64 {
    2.0
}
fn d_gain() -> f64 {
    1.0
}
fn d_threshold() -> f64 {
    1e-2
}

/// Everything that defines a training run. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    /// Learning rate for delay parameters; defaults to `learning_rate`.
    #[serde(default)]
    pub position_lr: Option<f64>,
    /// Learning rate for hidden→output weights; defaults to `learning_rate`.
    #[serde(default)]
    pub readout_lr: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_mode")]
    pub delay_mode: DelayMode,
    /// Removes self-connections from the recurrent layer.
    #[serde(default)]
    pub mask_diagonal: bool,
    #[serde(default = "d_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "d_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "d_eps")]
    pub adam_eps: f64,
    #[serde(default = "d_hidden")]
    pub n_hidden: usize,
    /// Embedding dimension in positional mode.
    #[serde(default = "d_dim")]
    pub dim: usize,
    /// Initial positions are uniform in [−r, r]^dim; free and axonal delays
    /// start uniform in [0, 2r].
    #[serde(default = "d_radius")]
    pub init_radius: f64,
    /// Initial weight std is gain/sqrt(fan-in) for each layer.
    #[serde(default = "d_gain")]
    pub w_in_gain: f64,
    #[serde(default = "d_gain")]
    pub w_rec_gain: f64,
    #[serde(default = "d_gain")]
    pub w_out_gain: f64,
    /// Recurrent weights with |w| below this count as absent in the sparsity figure.
    #[serde(default = "d_threshold")]
    pub sparsity_threshold: f64,
    #[serde(default)]
    pub regularizer: RegularizerConfig,
    #[serde(default)]
    pub neuron: NeuronParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl TrainConfig {
    pub fn learning_rates(&self) -> LearningRates {
        LearningRates {
            hidden: self.learning_rate,
            readout: self.readout_lr.unwrap_or(self.learning_rate),
            delays: self.position_lr.unwrap_or(self.learning_rate),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        let lr = self.learning_rates();
        // A zero rate freezes its parameter group.
        if ![lr.hidden, lr.readout, lr.delays].iter().all(|r| r.is_finite() && *r >= 0.0) {
            return bad("learning rates must be finite and nonnegative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("adam betas must be in [0, 1) and eps positive");
        }
        if self.n_hidden == 0 {
            return bad("n_hidden must be positive");
        }
        if self.delay_mode == DelayMode::Positional && !(2..=4).contains(&self.dim) {
            return bad("dim must be 2, 3 or 4");
        }
        if !(self.regularizer.lambda1 >= 0.0) {
            return bad("lambda1 must be nonnegative");
        }
        self.neuron.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding, as lowercase hex.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// SHA-256 of a value's JSON encoding, as lowercase hex.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Draws an initial model. Weights are drawn before delay parameters, so runs
/// that differ only in delay mode share their initial weights.
pub fn init_model(cfg: &TrainConfig, n_in: usize, n_out: usize) -> Result<ModelParams, TrainError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_hidden;
    let mut normal = |rows: usize, cols: usize, gain: f64| {
        let dist = Normal::new(0.0, gain / (rows as f64).sqrt()).map_err(|e| TrainError::Config(e.to_string()))?;
        Ok::<_, TrainError>(Matrix::from_fn(rows, cols, |_, _| dist.sample(&mut rng)))
    };
    let w_in = normal(n_in, n, cfg.w_in_gain)?;
    let w_rec = normal(n, n, cfg.w_rec_gain)?;
    let w_out = normal(n, n_out, cfg.w_out_gain)?;
    let r = cfg.init_radius;
    let delays = match cfg.delay_mode {
        DelayMode::None => DelayParams::None,
        DelayMode::Free => DelayParams::Free(Matrix::from_fn(n, n, |i, j| {
            let d = rng.random_range(0.0..=2.0 * r);
            if i == j {
                0.0
            } else {
                d
            }
        })),
        DelayMode::Axonal => DelayParams::Axonal((0..n).map(|_| rng.random_range(0.0..=2.0 * r)).collect()),
        DelayMode::Positional => {
            let coords = Matrix::from_fn(n, cfg.dim, |_, _| rng.random_range(-r..=r));
            DelayParams::Positional(PositionArray::new(coords).map_err(|e| TrainError::Config(e.to_string()))?)
        }
    };
    let mut params = ModelParams { w_in, w_rec, w_out, delays, rec_mask: None };
    if cfg.mask_diagonal {
        for i in 0..n {
            params.remove_synapse(i, i);
        }
    }
    Ok(params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub config_hash: String,
    pub history: Vec<EpochRecord>,
    /// Fraction of existing recurrent synapses with |w| below the threshold.
    pub final_sparsity: f64,
    pub sparsity_threshold: f64,
    /// Excluded from reproducibility guarantees.
    pub wall_clock_secs: f64,
}

/// Loss, accuracy and per-sample predictions on a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
    pub predictions: Vec<usize>,
}

/// Fraction of existing recurrent synapses whose |w| is below `threshold`.
pub fn recurrent_sparsity(params: &ModelParams, threshold: f64) -> f64 {
    let n = params.n_hid();
    let mut total = 0usize;
    let mut small = 0usize;
    for i in 0..n {
        for j in 0..n {
            if params.synapse_exists(i, j) {
                total += 1;
                if params.w_rec[(i, j)].abs() < threshold {
                    small += 1;
                }
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        small as f64 / total as f64
    }
}

pub fn evaluate(params: &ModelParams, neuron: &NeuronParams, data: &EventDataset) -> Result<Evaluation, TrainError> {
    evaluate_network(&Network::new(params, neuron)?, data)
}

/// Argmax of the time-integrated readout against the label, sample by sample.
pub fn evaluate_network(net: &Network<'_>, data: &EventDataset) -> Result<Evaluation, TrainError> {
    let results: Vec<Result<(f64, usize), TrainError>> = data
        .samples
        .par_iter()
        .map_init(Scratch::default, |scratch, s| {
            let r = net.run_with(s, RecordOptions::default(), scratch)?;
            let (loss, _) = compute_loss(&r, s.label)?;
            Ok((loss, r.predicted_class()))
        })
        .collect();
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut predictions = Vec::with_capacity(results.len());
    for (r, s) in results.into_iter().zip(&data.samples) {
        let (l, pred) = r?;
        loss += l;
        correct += (pred == s.label) as usize;
        predictions.push(pred);
    }
    let n = data.len().max(1) as f64;
    Ok(Evaluation { accuracy: correct as f64 / n, loss: loss / n, predictions })
}

/// The network the trainer simulates: delay parameters are ignored in mode none.
fn training_network<'a>(params: &'a ModelParams, cfg: &'a TrainConfig) -> Result<Network<'a>, TrainError> {
    Ok(match cfg.delay_mode {
        DelayMode::None => Network::with_delays(params, &cfg.neuron, DelayMatrix::zeros(params.n_hid()))?,
        _ => Network::new(params, &cfg.neuron)?,
    })
}

/// Trains `model` on `train`, optionally tracking `test` after every epoch.
///
/// In delay mode none the model's delay parameters are dropped before
/// training, so the result never depends on them.
pub fn train(
    train: &EventDataset,
    test: Option<&EventDataset>,
    model: ModelParams,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainReport), TrainError> {
    train_with(train, test, model, cfg, |_| {})
}

/// Like [`train`], calling `on_epoch` after each epoch's evaluation.
pub fn train_with(
    train: &EventDataset,
    test: Option<&EventDataset>,
    mut params: ModelParams,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelParams, TrainReport), TrainError> {
    let start = Instant::now();
    cfg.validate()?;
    if cfg.epochs > 0 && train.is_empty() {
        return Err(TrainError::Config("training set is empty".into()));
    }
    if cfg.delay_mode == DelayMode::None {
        params.delays = DelayParams::None;
    } else if params.delays.mode() != cfg.delay_mode {
        return Err(TrainError::Config(format!(
            "model has {} delays but the config asks for {}",
            params.delays.mode().as_str(),
            cfg.delay_mode.as_str()
        )));
    }
    params.validate()?;
    if params.n_in() != train.n_in || params.n_out() != train.n_classes {
        return Err(TrainError::Config("model shape does not match the dataset".into()));
    }
    params.apply_mask();

    let mut opt = AdamState::new(&params, cfg);
    // Stream 0 of this seed initialises the model; stream 1 drives shuffling.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let net = training_network(&params, cfg)?;
            let per_sample: Vec<Result<(f64, GradientSet), TrainError>> = chunk
                .par_iter()
                .map(|&k| {
                    let (loss, g, _) = net.loss_and_gradient(&train.samples[k])?;
                    Ok((loss, g))
                })
                .collect();
            let mut grads = GradientSet::zeros_like(&params);
            let mut loss = 0.0;
            for r in per_sample {
                let (l, g) = r?;
                loss += l;
                grads.add_scaled(&g, 1.0);
            }
            grads.scale(1.0 / chunk.len() as f64);
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { what: "loss", epoch, batch });
            }
            if let Some(mask) = &params.rec_mask {
                for (g, &keep) in grads.w_rec.as_mut_slice().iter_mut().zip(mask) {
                    if !keep {
                        *g = 0.0;
                    }
                }
            }
            apply_regularizer(&mut grads.w_rec, &params.w_rec, net.delays(), &cfg.regularizer)?;
            if !grads.is_finite() {
                return Err(TrainError::NonFinite { what: "gradient", epoch, batch });
            }
            drop(net);
            adam_step(&mut opt, &mut params, &grads, cfg.learning_rates());
        }
        let net = training_network(&params, cfg)?;
        let tr = evaluate_network(&net, train)?;
        let te = test.map(|t| evaluate_network(&net, t)).transpose()?;
        if !tr.loss.is_finite() {
            return Err(TrainError::NonFinite { what: "loss", epoch, batch: usize::MAX });
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: tr.loss,
            train_accuracy: tr.accuracy,
            test_loss: te.as_ref().map(|e| e.loss),
            test_accuracy: te.as_ref().map(|e| e.accuracy),
        };
        log::info!(
            "epoch {} loss {:.4} train {:.3} test {}",
            record.epoch,
            record.train_loss,
            record.train_accuracy,
            record.test_accuracy.map_or("-".into(), |a| format!("{a:.3}"))
        );
        on_epoch(&record);
        history.push(record);
    }

    let report = TrainReport {
        seed: cfg.seed,
        config_hash: cfg.hash(),
        history,
        final_sparsity: recurrent_sparsity(&params, cfg.sparsity_threshold),
        sparsity_threshold: cfg.sparsity_threshold,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lambda_leaves_gradient_unchanged() {
        let w = Matrix::from_rows(&[vec![0.5, -0.3], vec![0.0, 2.0]]);
        let mut g = Matrix::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]);
        let before = g.clone();
        for kind in [RegularizerKind::None, RegularizerKind::L1] {
            apply_regularizer(&mut g, &w, &DelayMatrix::zeros(2), &RegularizerConfig { kind, lambda1: 0.0 }).unwrap();
        }
        assert_eq!(g, before);
    }

    #[test]
    fn l1_adds_signed_lambda() {
        let w = Matrix::from_rows(&[vec![0.5, -0.3], vec![0.0, 2.0]]);
        let mut g = Matrix::zeros(2, 2);
        let cfg = RegularizerConfig { kind: RegularizerKind::L1, lambda1: 0.25 };
        apply_regularizer(&mut g, &w, &DelayMatrix::zeros(2), &cfg).unwrap();
        assert_eq!(g.as_slice(), &[0.25, -0.25, 0.0, 0.25]);
    }

    #[test]
    fn distance_l1_needs_nonzero_mean_delay() {
        let mut g = Matrix::zeros(2, 2);
        let cfg = RegularizerConfig { kind: RegularizerKind::L1Distance, lambda1: 0.1 };
        let r = apply_regularizer(&mut g, &Matrix::filled(2, 2, 1.0), &DelayMatrix::zeros(2), &cfg);
        assert_eq!(r, Err(TrainError::ZeroMeanDelay(0.0)));
    }

    #[test]
    fn adam_first_step_has_learning_rate_magnitude() {
        let mut adam = Adam::new(0.9, 0.999, 1e-8);
        let mut m = Moments::new(3);
        let mut p = vec![1.0, 1.0, 1.0];
        adam.tick();
        adam.update(&mut m, &mut p, &[0.5, -2.0, 0.0], 0.01);
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] - 1.01).abs() < 1e-9);
        assert_eq!(p[2], 1.0);
    }

    #[test]
    fn adam_zero_gradient_keeps_params_and_decays_moments() {
        let mut adam = Adam::new(0.9, 0.999, 1e-8);
        let mut fresh = Moments::new(2);
        let mut p = vec![3.0, -1.0];
        adam.tick();
        adam.update(&mut fresh, &mut p, &[0.0, 0.0], 0.1);
        assert_eq!(p, vec![3.0, -1.0]);
        assert_eq!(fresh, Moments::new(2));

        let mut m = Moments { m: vec![0.2], v: vec![0.5] };
        adam.update(&mut m, &mut [0.0], &[0.0], 0.1);
        assert_eq!(m.m[0], 0.9 * 0.2);
        assert_eq!(m.v[0], 0.999 * 0.5);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = serde_json::from_str::<TrainConfig>("{\"epochs\": 3, \"learning_rat\": 0.1}").unwrap_err();
        assert!(err.to_string().contains("learning_rat"));
        let nested = serde_json::from_str::<TrainConfig>("{\"neuron\": {\"tau\": 3}}").unwrap_err();
        assert!(nested.to_string().contains("tau"));
    }
}
