//! Recurrent spiking networks whose synaptic delays are distances between
//! learnable neuron positions.
//!
//! The crate covers the whole experiment lifecycle: a fixed-step LIF
//! simulator with delayed recurrent synapses ([`snn`]), an adjoint pass that
//! yields gradients for weights, delays and positions ([`eventprop`],
//! [`geometry`]), a trainer with L1 and distance-scaled L1 penalties
//! ([`training`]), synthetic event datasets ([`datasets`]), graph metrics of
//! trained connectivity ([`topology`]), structure–function probes
//! ([`probes`]) and pruning/robustness sweeps ([`pruning`]).

// `!(x > 0.0)` style comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod datasets;
pub mod eventprop;
pub mod geometry;
pub mod matrix;
pub mod probes;
pub mod pruning;
pub mod snn;
pub mod topology;
pub mod training;

pub use geometry::{compute_delays, position_gradient, quantize_delays, DelayMatrix, DelayMode, PositionArray};
pub use matrix::Matrix;
pub use snn::{compute_loss, simulate_forward, ForwardRecord, ModelParams, NeuronParams, SampleEvents};
