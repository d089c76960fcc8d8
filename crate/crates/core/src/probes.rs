//! Structure–function probes: where in space each input channel projects,
//! judged from its weights or from the hidden activity it evokes, and how
//! well hidden positions can be predicted from input weights.
//!
//! Weighted means use absolute weights, so every preferred position is a
//! convex combination of hidden positions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::EventDataset;
use crate::matrix::Matrix;
use crate::snn::{ModelParams, Network, NeuronParams, RecordOptions, Scratch, SimError};

pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_BIN_WIDTH: usize = 10;
pub const DEFAULT_RIDGE_ALPHA: f64 = 1.0;
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One centroid per input channel. Rows whose weights sum to zero are
/// marked invalid and hold zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferredPositions {
    pub coords: Matrix,
    pub valid: Vec<bool>,
}

/// `Σ_j |w_ij| p_j / Σ_j |w_ij|` for every row `i` of `weights`.
pub fn weighted_centroids(weights: &Matrix, positions: &Matrix) -> Result<PreferredPositions, ProbeError> {
    if weights.cols() != positions.rows() {
        return Err(ProbeError::Shape(format!(
            "{} weight columns for {} positions",
            weights.cols(),
            positions.rows()
        )));
    }
    let dim = positions.cols();
    let mut coords = Matrix::zeros(weights.rows(), dim);
    let mut valid = vec![false; weights.rows()];
    for i in 0..weights.rows() {
        let row = weights.row(i);
        let total: f64 = row.iter().map(|w| w.abs()).sum();
        if total == 0.0 || !total.is_finite() {
            continue;
        }
        valid[i] = true;
        for k in 0..dim {
            let s: f64 = row.iter().enumerate().map(|(j, w)| w.abs() * positions[(j, k)]).sum();
            coords[(i, k)] = s / total;
        }
    }
    Ok(PreferredPositions { coords, valid })
}

/// Centroid of hidden positions weighted by each input's outgoing weights.
pub fn preferred_positions_weights(w_in: &Matrix, positions: &Matrix) -> Result<PreferredPositions, ProbeError> {
    weighted_centroids(w_in, positions)
}

/// Mean hidden response after input spikes: `value(i, j, τ)` is the fraction
/// of spikes of input `i` (pooled over samples) followed by a spike of hidden
/// neuron `j` exactly `τ + 1` steps later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTensor {
    pub n_in: usize,
    pub n_hid: usize,
    pub window: usize,
    /// Row-major `n_in × n_hid × window`.
    pub values: Vec<f64>,
    /// Input spikes pooled per channel; channels with none have all-zero values.
    pub input_spikes: Vec<usize>,
}

impl SensitivityTensor {
    pub fn get(&self, i: usize, j: usize, tau: usize) -> f64 {
        self.values[(i * self.n_hid + j) * self.window + tau]
    }

    pub fn silent_inputs(&self) -> Vec<usize> {
        (0..self.n_in).filter(|&i| self.input_spikes[i] == 0).collect()
    }

    /// `n_in × n_hid` average over the window axis.
    pub fn window_mean(&self) -> Matrix {
        Matrix::from_fn(self.n_in, self.n_hid, |i, j| {
            (0..self.window).map(|t| self.get(i, j, t)).sum::<f64>() / self.window as f64
        })
    }
}

/// Counts per time bin of the triggering input spike.
struct Counts {
    hits: Vec<u64>,
    spikes: Vec<u64>,
}

fn binned_counts(
    model: &ModelParams,
    neuron: &NeuronParams,
    data: &EventDataset,
    window: usize,
    bin_width: usize,
) -> Result<(Vec<SensitivityTensor>, usize), ProbeError> {
    if data.is_empty() {
        return Err(ProbeError::EmptyDataset);
    }
    if window == 0 || bin_width == 0 {
        return Err(ProbeError::Invalid("window and bin width must be positive".into()));
    }
    if data.n_in != model.n_in() {
        return Err(ProbeError::Shape(format!("dataset has {} inputs, model {}", data.n_in, model.n_in())));
    }
    let net = Network::new(model, neuron)?;
    let (n_in, n_hid, steps) = (model.n_in(), model.n_hid(), neuron.steps);
    let bins = steps.div_ceil(bin_width).max(1);
    let cell = n_in * n_hid * window;
    let per_sample: Vec<Result<Counts, SimError>> = data
        .samples
        .par_iter()
        .map_init(Scratch::default, |scratch, sample| {
            let rec = net.run_with(sample, RecordOptions::default(), scratch)?;
            let mut raster = vec![false; steps * n_hid];
            for (j, train) in rec.hidden_spikes.iter().enumerate() {
                for &t in train {
                    raster[t * n_hid + j] = true;
                }
            }
            let mut c = Counts { hits: vec![0; bins * cell], spikes: vec![0; bins * n_in] };
            for &(t, i) in &sample.events {
                let b = t / bin_width;
                c.spikes[b * n_in + i] += 1;
                for tau in 0..window {
                    let s = t + tau + 1;
                    if s >= steps {
                        break;
                    }
                    for j in 0..n_hid {
                        if raster[s * n_hid + j] {
                            c.hits[b * cell + (i * n_hid + j) * window + tau] += 1;
                        }
                    }
                }
            }
            Ok(c)
        })
        .collect();
    let mut total = Counts { hits: vec![0; bins * cell], spikes: vec![0; bins * n_in] };
    for c in per_sample {
        let c = c?;
        total.hits.iter_mut().zip(&c.hits).for_each(|(a, b)| *a += b);
        total.spikes.iter_mut().zip(&c.spikes).for_each(|(a, b)| *a += b);
    }
    let tensors = (0..bins)
        .map(|b| {
            let spikes: Vec<usize> = total.spikes[b * n_in..(b + 1) * n_in].iter().map(|&s| s as usize).collect();
            let values = (0..cell)
                .map(|k| {
                    let s = spikes[k / (n_hid * window)];
                    if s == 0 {
                        0.0
                    } else {
                        total.hits[b * cell + k] as f64 / s as f64
                    }
                })
                .collect();
            SensitivityTensor { n_in, n_hid, window, values, input_spikes: spikes }
        })
        .collect();
    Ok((tensors, bins))
}

pub fn activity_sensitivity(
    model: &ModelParams,
    neuron: &NeuronParams,
    data: &EventDataset,
    window: usize,
) -> Result<SensitivityTensor, ProbeError> {
    let (mut t, _) = binned_counts(model, neuron, data, window, neuron.steps.max(1))?;
    Ok(t.remove(0))
}

/// Centroids weighted by the window-averaged sensitivity.
pub fn preferred_positions_activity(tensor: &SensitivityTensor, positions: &Matrix) -> Result<PreferredPositions, ProbeError> {
    weighted_centroids(&tensor.window_mean(), positions)
}

/// Preferred positions from sensitivities conditioned on the time bin of the
/// triggering input spike.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionsOverTime {
    pub bin_width: usize,
    pub bins: Vec<PreferredPositions>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionRow {
    pub input_id: usize,
    pub bin: usize,
    pub coords: Vec<f64>,
    pub valid: bool,
}

impl PositionsOverTime {
    /// One row per (bin, input) in bin-major order.
    pub fn rows(&self) -> Vec<PositionRow> {
        let mut out = Vec::new();
        for (b, p) in self.bins.iter().enumerate() {
            for i in 0..p.coords.rows() {
                out.push(PositionRow { input_id: i, bin: b, coords: p.coords.row(i).to_vec(), valid: p.valid[i] });
            }
        }
        out
    }
}

pub fn preferred_positions_over_time(
    model: &ModelParams,
    neuron: &NeuronParams,
    data: &EventDataset,
    positions: &Matrix,
    window: usize,
    bin_width: usize,
) -> Result<PositionsOverTime, ProbeError> {
    let (tensors, _) = binned_counts(model, neuron, data, window, bin_width)?;
    let bins = tensors.iter().map(|t| preferred_positions_activity(t, positions)).collect::<Result<_, _>>()?;
    Ok(PositionsOverTime { bin_width, bins })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeReport {
    /// Held-out R² per coordinate, averaged over the folds that were used.
    pub r2: Vec<f64>,
    pub mean_r2: f64,
    pub folds_used: usize,
    /// Folds skipped for a singular system or a constant held-out target.
    pub folds_skipped: usize,
}

/// Ridge coefficients for centred data: `(XᵀX + αI)⁻¹ Xᵀ Y`.
pub fn ridge_fit(x: &Matrix, y: &Matrix, alpha: f64) -> Option<Matrix> {
    let xn = x.to_nalgebra();
    let mut gram = xn.transpose() * &xn;
    for k in 0..gram.nrows() {
        gram[(k, k)] += alpha;
    }
    let rhs = xn.transpose() * y.to_nalgebra();
    let chol = gram.cholesky()?;
    Some(Matrix::from_nalgebra(&chol.solve(&rhs)))
}

/// K-fold cross-validated ridge regression of hidden positions on incoming
/// input weights, with features and targets centred on each training fold.
pub fn ridge_r2(w_in: &Matrix, positions: &Matrix, alpha: f64, folds: usize, seed: u64) -> Result<RidgeReport, ProbeError> {
    let n = w_in.cols();
    if positions.rows() != n {
        return Err(ProbeError::Shape(format!("{} hidden neurons but {} positions", n, positions.rows())));
    }
    if folds < 2 || n <= folds {
        return Err(ProbeError::Invalid(format!("need n_hid > folds >= 2, got {n} and {folds}")));
    }
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(ProbeError::Invalid(format!("alpha must be finite and nonnegative, got {alpha}")));
    }
    let features = w_in.transpose();
    let (p, dim) = (features.cols(), positions.cols());
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut sums = vec![0.0; dim];
    let (mut used, mut skipped) = (0, 0);
    for f in 0..folds {
        let test: Vec<usize> = order.iter().enumerate().filter(|(k, _)| k % folds == f).map(|(_, &j)| j).collect();
        let train: Vec<usize> = order.iter().enumerate().filter(|(k, _)| k % folds != f).map(|(_, &j)| j).collect();
        let mean = |m: &Matrix, idx: &[usize]| -> Vec<f64> {
            (0..m.cols()).map(|c| idx.iter().map(|&r| m[(r, c)]).sum::<f64>() / idx.len() as f64).collect()
        };
        let (mx, my) = (mean(&features, &train), mean(positions, &train));
        let x = Matrix::from_fn(train.len(), p, |r, c| features[(train[r], c)] - mx[c]);
        let y = Matrix::from_fn(train.len(), dim, |r, c| positions[(train[r], c)] - my[c]);
        let Some(beta) = ridge_fit(&x, &y, alpha) else {
            skipped += 1;
            continue;
        };
        let ty = mean(positions, &test);
        let mut r2 = vec![0.0; dim];
        let mut degenerate = false;
        for (c, r2c) in r2.iter_mut().enumerate() {
            let (mut ss_res, mut ss_tot) = (0.0, 0.0);
            for &j in &test {
                let pred = my[c] + (0..p).map(|k| (features[(j, k)] - mx[k]) * beta[(k, c)]).sum::<f64>();
                ss_res += (positions[(j, c)] - pred).powi(2);
                ss_tot += (positions[(j, c)] - ty[c]).powi(2);
            }
            if ss_tot == 0.0 {
                degenerate = true;
                break;
            }
            *r2c = 1.0 - ss_res / ss_tot;
        }
        if degenerate {
            skipped += 1;
            continue;
        }
        sums.iter_mut().zip(&r2).for_each(|(s, r)| *s += r);
        used += 1;
    }
    if used == 0 {
        return Err(ProbeError::Invalid("every fold was degenerate".into()));
    }
    let r2: Vec<f64> = sums.iter().map(|s| s / used as f64).collect();
    let mean_r2 = r2.iter().sum::<f64>() / dim as f64;
    Ok(RidgeReport { r2, mean_r2, folds_used: used, folds_skipped: skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_row_picks_its_neuron() {
        let w = Matrix::from_rows(&[vec![0.0, -3.0, 0.0], vec![0.0, 0.0, 0.0]]);
        let pos = Matrix::from_rows(&[vec![1.0, 2.0], vec![-4.0, 0.5], vec![7.0, 7.0]]);
        let p = preferred_positions_weights(&w, &pos).unwrap();
        assert_eq!(p.coords.row(0), &[-4.0, 0.5]);
        assert_eq!(p.valid, vec![true, false]);
    }

    #[test]
    fn ridge_rejects_too_few_neurons() {
        assert!(ridge_r2(&Matrix::zeros(3, 4), &Matrix::zeros(4, 2), 1.0, 5, 0).is_err());
    }
}
