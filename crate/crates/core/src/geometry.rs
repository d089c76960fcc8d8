//! Neuron positions, the delay matrices derived from them, and the chain
//! rule that turns per-synapse delay gradients into coordinate gradients.
//!
//! Coordinates are measured in simulation time units, so the Euclidean
//! distance between two hidden neurons is directly the synaptic delay
//! between them (in both directions).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

/// Distances below this are treated as coincident; their chain factor is 0.
pub const EPS_DIST: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("embedding dimension must be 2, 3 or 4, got {0}")]
    BadDimension(usize),
    #[error("position array has no neurons")]
    Empty,
    #[error("position of neuron {0} is not finite")]
    NonFinite(usize),
}

/// How recurrent delays are parameterised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayMode {
    /// All recurrent delays are zero.
    #[default]
    None,
    /// One independent delay per synapse (n² parameters).
    Free,
    /// One delay per presynaptic neuron, shared by all its outgoing synapses.
    Axonal,
    /// Delays are distances between learnable positions (n·dim parameters).
    Positional,
}

impl DelayMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DelayMode::None => "none",
            DelayMode::Free => "free",
            DelayMode::Axonal => "axonal",
            DelayMode::Positional => "positional",
        }
    }
}

/// Coordinates of the hidden neurons, one row per neuron.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionArray {
    coords: Matrix,
}

impl PositionArray {
    pub fn new(coords: Matrix) -> Result<Self, GeometryError> {
        let (n, dim) = coords.shape();
        if !(2..=4).contains(&dim) {
            return Err(GeometryError::BadDimension(dim));
        }
        if n == 0 {
            return Err(GeometryError::Empty);
        }
        for i in 0..n {
            if !coords.row(i).iter().all(|x| x.is_finite()) {
                return Err(GeometryError::NonFinite(i));
            }
        }
        Ok(Self { coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, GeometryError> {
        Self::new(Matrix::from_rows(rows))
    }

    pub fn n(&self) -> usize {
        self.coords.rows()
    }

    pub fn dim(&self) -> usize {
        self.coords.cols()
    }

    pub fn coords(&self) -> &Matrix {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.coords.row(i)
    }

    /// Mutable access for optimisers. Callers must keep entries finite.
    pub fn coords_mut(&mut self) -> &mut Matrix {
        &mut self.coords
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.dim());
        let coords = Matrix::from_fn(self.n(), self.dim(), |i, k| self.coords[(i, k)] + shift[k]);
        Self { coords }
    }
}

/// Recurrent delays in time units, source-major: `d[(i, j)]` is the delay
/// of the synapse from `i` to `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayMatrix {
    pub d: Matrix,
    pub mode: DelayMode,
}

impl DelayMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { d: Matrix::zeros(n, n), mode: DelayMode::None }
    }

    pub fn n(&self) -> usize {
        self.d.rows()
    }

    /// Mean of the off-diagonal entries.
    ///
    /// Computed as an offset from the first off-diagonal entry so that a
    /// matrix whose off-diagonal entries are all equal to `c` yields exactly
    /// `c`, not `c` plus summation round-off.
    pub fn off_diagonal_mean(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        let anchor = self.d[(0, 1)];
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += self.d[(i, j)] - anchor;
                }
            }
        }
        anchor + acc / (n * (n - 1)) as f64
    }
}

/// Integer delay steps for ring-buffer delivery.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayStepMatrix {
    pub steps: Vec<usize>,
    pub n: usize,
    pub dt: f64,
    pub max_steps: usize,
    /// Number of entries that exceeded `max_steps` and were clamped.
    pub clamped: usize,
}

impl DelayStepMatrix {
    pub fn get(&self, i: usize, j: usize) -> usize {
        self.steps[i * self.n + j]
    }
}

/// Pairwise Euclidean distances between hidden neurons.
pub fn compute_delays(positions: &PositionArray) -> DelayMatrix {
    let n = positions.n();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        let pi = positions.point(i);
        for j in (i + 1)..n {
            let pj = positions.point(j);
            let dist = pi.iter().zip(pj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    DelayMatrix { d, mode: DelayMode::Positional }
}

/// Rounds delays to whole steps (ties to even) and clamps to `max_steps`.
pub fn quantize_delays(delays: &DelayMatrix, dt: f64, max_steps: usize) -> DelayStepMatrix {
    assert!(dt > 0.0, "dt must be positive");
    let n = delays.n();
    let mut clamped = 0;
    let steps = delays
        .d
        .as_slice()
        .iter()
        .map(|&d| {
            let s = (d / dt).round_ties_even().max(0.0);
            if s > max_steps as f64 {
                clamped += 1;
                max_steps
            } else {
                s as usize
            }
        })
        .collect();
    if clamped > 0 {
        log::warn!("{clamped} delays exceeded {max_steps} steps and were clamped");
    }
    DelayStepMatrix { steps, n, dt, max_steps, clamped }
}

/// Accumulates per-synapse delay gradients into coordinate gradients.
///
/// `delay_grads[(i, j)]` is dL/dd for the synapse from `i` to `j`. Both
/// directions of a pair depend on both endpoints, so coordinate `k` of
/// neuron `i` receives `Σ_j (p_ik − p_jk)/d_ij · (G_ij + G_ji)`.
pub fn position_gradient(delay_grads: &Matrix, positions: &PositionArray, eps_dist: f64) -> Matrix {
    let n = positions.n();
    let dim = positions.dim();
    assert_eq!(delay_grads.shape(), (n, n), "delay gradient shape mismatch");
    let mut grad = Matrix::zeros(n, dim);
    for i in 0..n {
        let pi = positions.point(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let pair = delay_grads[(i, j)] + delay_grads[(j, i)];
            if pair == 0.0 {
                continue;
            }
            let pj = positions.point(j);
            let dist = pi.iter().zip(pj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dist < eps_dist {
                continue;
            }
            for k in 0..dim {
                grad[(i, k)] += (pi[k] - pj[k]) / dist * pair;
            }
        }
    }
    grad
}
