//! Adjoint (backward-sensitivity) pass for the simulator in [`crate::snn`].
//!
//! The sweep runs from the last step to the first and carries, per neuron,
//! the sensitivities of the loss to the synaptic current (`λ_I`) and to the
//! membrane voltage (`λ_V`). Between spikes these decay with the transposed
//! forward propagator: `λ_V` leaks with the membrane factor and feeds `λ_I`
//! through the same `dt/tau_mem` coupling that injects current into voltage.
//! At a hidden spike the sensitivities of every postsynaptic target, sampled
//! at the delivery step `t_k + 1 + delay`, are collected and pushed back into
//! the spiking neuron's `λ_V` through the threshold-crossing phase, scaled by
//! the inverse membrane slope at the crossing.
//!
//! Sensitivities here are plain derivatives of the loss with respect to the
//! discrete state, so parameter gradients are sums of `λ_I` sampled at
//! delivery steps. The continuous-time convention, where gradients read
//! `−tau_syn Σ λ_I`, differs only by that sign and scale.
//!
//! Because the pass is the exact transpose of the discrete forward map, it
//! agrees with central finite differences wherever the spike pattern and
//! delivery slots are locally constant.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{position_gradient, DelayMode, EPS_DIST};
use crate::matrix::Matrix;
use crate::snn::{
    compute_loss, DelayParams, ForwardRecord, ModelParams, Network, NeuronParams, RecordOptions, SampleEvents,
    SimError,
};

/// Upper bound on `1/vdot` in the spike jump.
pub const MAX_INV_VDOT: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum EventPropError {
    #[error("record does not match the network: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Gradients of the loss for every parameter group.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub w_in: Matrix,
    pub w_rec: Matrix,
    pub w_out: Matrix,
    /// dL/dd for each recurrent synapse (source-major, time units).
    pub delay: Matrix,
    /// Coordinate gradients, in positional mode.
    pub positions: Option<Matrix>,
    /// Per-source delay gradients, in axonal mode.
    pub axonal: Option<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(params: &ModelParams) -> Self {
        let n = params.n_hid();
        let (positions, axonal) = match &params.delays {
            DelayParams::Positional(p) => (Some(Matrix::zeros(n, p.dim())), None),
            DelayParams::Axonal(_) => (None, Some(vec![0.0; n])),
            _ => (None, None),
        };
        Self {
            w_in: Matrix::zeros(params.n_in(), n),
            w_rec: Matrix::zeros(n, n),
            w_out: Matrix::zeros(n, params.n_out()),
            delay: Matrix::zeros(n, n),
            positions,
            axonal,
        }
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, other: &GradientSet, s: f64) {
        self.w_in.add_scaled(&other.w_in, s);
        self.w_rec.add_scaled(&other.w_rec, s);
        self.w_out.add_scaled(&other.w_out, s);
        self.delay.add_scaled(&other.delay, s);
        if let (Some(a), Some(b)) = (self.positions.as_mut(), other.positions.as_ref()) {
            a.add_scaled(b, s);
        }
        if let (Some(a), Some(b)) = (self.axonal.as_mut(), other.axonal.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.w_in.scale(s);
        self.w_rec.scale(s);
        self.w_out.scale(s);
        self.delay.scale(s);
        if let Some(p) = self.positions.as_mut() {
            p.scale(s);
        }
        if let Some(a) = self.axonal.as_mut() {
            a.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w_in.is_finite()
            && self.w_rec.is_finite()
            && self.w_out.is_finite()
            && self.delay.is_finite()
            && self.positions.as_ref().is_none_or(Matrix::is_finite)
            && self.axonal.as_ref().is_none_or(|a| a.iter().all(|x| x.is_finite()))
    }
}

/// Backward pass with the model's own delays.
pub fn backward(
    record: &ForwardRecord,
    params: &ModelParams,
    neuron: &NeuronParams,
    dloss_dvout: &Matrix,
) -> Result<GradientSet, EventPropError> {
    Network::new(params, neuron)?.backward(record, dloss_dvout)
}

impl Network<'_> {
    pub fn backward(&self, record: &ForwardRecord, dloss_dvout: &Matrix) -> Result<GradientSet, EventPropError> {
        let p = self.params;
        let n = p.n_hid();
        let n_out = p.n_out();
        let steps = self.neuron.steps;
        if record.steps != steps || record.v_out_trace.shape() != (steps, n_out) {
            return Err(EventPropError::Mismatch(format!(
                "record has {} steps and readout {:?}, network expects {} × {}",
                record.steps,
                record.v_out_trace.shape(),
                steps,
                n_out
            )));
        }
        if dloss_dvout.shape() != (steps, n_out) {
            return Err(EventPropError::Mismatch("loss derivative has the wrong shape".into()));
        }
        if record.hidden_spikes.len() != n || record.spikes.iter().any(|s| s.neuron >= n || s.step >= steps) {
            return Err(EventPropError::Mismatch("spike record refers to neurons outside the hidden layer".into()));
        }
        if record.input_events.iter().any(|&(_, i)| i >= p.n_in()) {
            return Err(EventPropError::Mismatch("input events refer to missing input neurons".into()));
        }

        let k = self.k;
        let dt = self.neuron.dt;
        let theta = self.neuron.theta;
        let tab = &self.table;
        let mut g = GradientSet {
            w_in: Matrix::zeros(p.n_in(), n),
            w_rec: Matrix::zeros(n, n),
            w_out: Matrix::zeros(n, n_out),
            delay: Matrix::zeros(n, n),
            positions: None,
            axonal: None,
        };

        // Row `steps` stays zero: deliveries past the trial have no effect.
        let mut li_hist = Matrix::zeros(steps + 1, n);
        let mut lio_hist = Matrix::zeros(steps + 1, n_out);
        let mut lu_next = vec![0.0; n];
        let mut li_next = vec![0.0; n];
        let mut from_vprev = vec![0.0; n];
        let mut lu = vec![0.0; n];
        let mut from_vprev_new = vec![0.0; n];
        let mut lvo_next = vec![0.0; n_out];
        let mut lio_next = vec![0.0; n_out];

        let mut spike_ptr = record.spikes.len();
        let mut event_ptr = record.input_events.len();

        for t in (0..steps).rev() {
            for o in 0..n_out {
                let lvo = dloss_dvout[(t, o)] + k.alpha * lvo_next[o];
                let lio = k.c * lvo + k.beta * lio_next[o];
                lio_hist[(t, o)] = lio;
                lvo_next[o] = lvo;
                lio_next[o] = lio;
            }

            for j in 0..n {
                lu[j] = k.alpha * lu_next[j] + from_vprev[j];
                from_vprev_new[j] = 0.0;
            }

            while spike_ptr > 0 && record.spikes[spike_ptr - 1].step == t {
                spike_ptr -= 1;
                let sp = record.spikes[spike_ptr];
                let i = sp.neuron;
                let ephase = (-k.g * sp.phase).exp();
                let w_row = p.w_rec.row(i);
                let mut lphi = 0.0;
                for j in 0..n {
                    let syn = i * n + j;
                    let late = tab.frac[syn] > sp.phase;
                    let s = t + 1 + tab.base[syn] + late as usize;
                    if s >= steps {
                        continue;
                    }
                    let lis = li_hist[(s, j)];
                    if lis == 0.0 {
                        continue;
                    }
                    let mut e = ephase * tab.efrac[syn];
                    if late {
                        e *= k.eg;
                    }
                    if p.synapse_exists(i, j) {
                        g.w_rec[(i, j)] += lis * e;
                    }
                    let a = w_row[j] * e;
                    lphi -= k.g * a * lis;
                    if !tab.clamped[syn] {
                        g.delay[(i, j)] += lis * a / self.neuron.tau_syn;
                    }
                }
                let lio_row = lio_hist.row(t + 1);
                let w_out_row = p.w_out.row(i);
                let g_out_row = g.w_out.row_mut(i);
                for o in 0..n_out {
                    g_out_row[o] += lio_row[o] * ephase;
                    lphi -= k.g * w_out_row[o] * ephase * lio_row[o];
                }

                let slope = sp.v_peak - sp.v_prev;
                let inv_slope = (dt / slope).min(MAX_INV_VDOT) / dt;
                lu[i] = lphi * (theta - sp.v_prev) / slope * inv_slope;
                from_vprev_new[i] = lphi * (sp.v_peak - theta) / slope * inv_slope;
            }

            let li_row = li_hist.row_mut(t);
            for j in 0..n {
                let li = k.beta * li_next[j] + k.c * lu[j];
                li_row[j] = li;
                li_next[j] = li;
            }
            std::mem::swap(&mut lu_next, &mut lu);
            std::mem::swap(&mut from_vprev, &mut from_vprev_new);

            while event_ptr > 0 && record.input_events[event_ptr - 1].0 == t {
                event_ptr -= 1;
                let i = record.input_events[event_ptr].1;
                let src = li_hist.row(t + 1).to_vec();
                for (gw, l) in g.w_in.row_mut(i).iter_mut().zip(&src) {
                    *gw += l;
                }
            }
        }

        match (self.delays.mode, &p.delays) {
            (DelayMode::Positional, DelayParams::Positional(pos)) => {
                g.positions = Some(position_gradient(&g.delay, pos, EPS_DIST));
            }
            (DelayMode::Axonal, _) => {
                g.axonal = Some((0..n).map(|i| g.delay.row(i).iter().sum()).collect());
            }
            _ => {}
        }
        Ok(g)
    }

    /// Forward, loss and backward for one sample.
    pub fn loss_and_gradient(&self, sample: &SampleEvents) -> Result<(f64, GradientSet, ForwardRecord), EventPropError> {
        let record = self.run(sample, RecordOptions::default())?;
        let (loss, dl) = compute_loss(&record, sample.label)?;
        let grads = self.backward(&record, &dl)?;
        Ok((loss, grads, record))
    }
}

/// Result of comparing one parameter group against finite differences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupCheck {
    pub group: String,
    pub coordinates: usize,
    /// Coordinates whose perturbation left every discrete event unchanged.
    pub valid: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub worst_rel_error: f64,
    /// Flat indices of coordinates where no tested epsilon gave a usable difference.
    pub invalid_coordinates: Vec<usize>,
}

impl GroupCheck {
    pub fn ok(&self, min_pass_rate: f64) -> bool {
        self.valid == 0 || self.pass_rate >= min_pass_rate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub groups: Vec<GroupCheck>,
    pub epsilons: Vec<f64>,
    pub tolerance: f64,
    /// Denominator floor for relative errors of near-zero gradients.
    pub abs_floor: f64,
    pub base_loss: f64,
    pub hidden_spikes: usize,
}

impl CheckReport {
    pub fn group(&self, name: &str) -> Option<&GroupCheck> {
        self.groups.iter().find(|g| g.group == name)
    }

    pub fn passed(&self, min_pass_rate: f64) -> bool {
        self.groups.iter().all(|g| g.ok(min_pass_rate))
    }
}

/// Relative errors are measured against `max(|analytic|, |fd|, ABS_FLOOR)`.
pub const ABS_FLOOR: f64 = 1e-8;

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(ABS_FLOOR)
}

type Setter = fn(&mut ModelParams, usize, f64);

/// Compares analytic gradients with central finite differences of the loss.
///
/// A coordinate counts for an epsilon only when both perturbed runs take the
/// same discrete decisions as the unperturbed run (same spikes on the same
/// steps, same delivery slots). It passes if any such epsilon gives a
/// relative error within `tolerance`.
pub fn gradient_check(
    params: &ModelParams,
    neuron: &NeuronParams,
    sample: &SampleEvents,
    epsilons: &[f64],
    tolerance: f64,
) -> Result<CheckReport, EventPropError> {
    let net = Network::new(params, neuron)?;
    let (base_loss, grads, record) = net.loss_and_gradient(sample)?;
    let base_sig = record.signature;

    let loss_at = |m: &ModelParams| -> Result<Option<f64>, EventPropError> {
        let net = Network::new(m, neuron)?;
        let r = net.run(sample, RecordOptions::default())?;
        if r.signature != base_sig {
            return Ok(None);
        }
        Ok(Some(compute_loss(&r, sample.label)?.0))
    };

    let mut groups = Vec::new();
    let mut check_group = |name: &str, analytic: &[f64], get: &dyn Fn(&ModelParams, usize) -> f64, set: Setter, skip: &dyn Fn(usize) -> bool| -> Result<(), EventPropError> {
        let mut valid = 0;
        let mut passed = 0;
        let mut worst: f64 = 0.0;
        let mut invalid = Vec::new();
        let mut coords = 0;
        for (idx, &a) in analytic.iter().enumerate() {
            if skip(idx) {
                continue;
            }
            coords += 1;
            let x0 = get(params, idx);
            let mut best: Option<f64> = None;
            for &eps in epsilons {
                let mut plus = params.clone();
                set(&mut plus, idx, x0 + eps);
                let mut minus = params.clone();
                set(&mut minus, idx, x0 - eps);
                if let (Some(lp), Some(lm)) = (loss_at(&plus)?, loss_at(&minus)?) {
                    let fd = (lp - lm) / (2.0 * eps);
                    let e = rel_error(a, fd);
                    best = Some(best.map_or(e, |b: f64| b.min(e)));
                }
            }
            match best {
                Some(e) => {
                    valid += 1;
                    if e <= tolerance {
                        passed += 1;
                    }
                    worst = worst.max(e);
                }
                None => invalid.push(idx),
            }
        }
        groups.push(GroupCheck {
            group: name.to_string(),
            coordinates: coords,
            valid,
            passed,
            pass_rate: if valid == 0 { 1.0 } else { passed as f64 / valid as f64 },
            worst_rel_error: worst,
            invalid_coordinates: invalid,
        });
        Ok(())
    };

    let no_skip = |_: usize| false;
    check_group("w_in", grads.w_in.as_slice(), &|m, i| m.w_in.as_slice()[i], |m, i, v| m.w_in.as_mut_slice()[i] = v, &no_skip)?;
    let n = params.n_hid();
    let masked = |i: usize| !params.synapse_exists(i / n, i % n);
    check_group("w_rec", grads.w_rec.as_slice(), &|m, i| m.w_rec.as_slice()[i], |m, i, v| m.w_rec.as_mut_slice()[i] = v, &masked)?;
    check_group("w_out", grads.w_out.as_slice(), &|m, i| m.w_out.as_slice()[i], |m, i, v| m.w_out.as_mut_slice()[i] = v, &no_skip)?;
    match &params.delays {
        DelayParams::Positional(_) => {
            let a = grads.positions.as_ref().expect("positional gradients");
            check_group(
                "positions",
                a.as_slice(),
                &|m, i| match &m.delays {
                    DelayParams::Positional(p) => p.coords().as_slice()[i],
                    _ => unreachable!(),
                },
                |m, i, v| {
                    if let DelayParams::Positional(p) = &mut m.delays {
                        p.coords_mut().as_mut_slice()[i] = v;
                    }
                },
                &no_skip,
            )?;
        }
        DelayParams::Free(_) => {
            check_group(
                "delays",
                grads.delay.as_slice(),
                &|m, i| match &m.delays {
                    DelayParams::Free(d) => d.as_slice()[i],
                    _ => unreachable!(),
                },
                |m, i, v| {
                    if let DelayParams::Free(d) = &mut m.delays {
                        d.as_mut_slice()[i] = v;
                    }
                },
                // Zero delays sit on the clamp at 0 and have a one-sided derivative.
                &|i| match &params.delays {
                    DelayParams::Free(d) => d.as_slice()[i] <= 0.0 || masked(i),
                    _ => true,
                },
            )?;
        }
        DelayParams::Axonal(_) => {
            let a = grads.axonal.as_ref().expect("axonal gradients");
            check_group(
                "axonal",
                a,
                &|m, i| match &m.delays {
                    DelayParams::Axonal(d) => d[i],
                    _ => unreachable!(),
                },
                |m, i, v| {
                    if let DelayParams::Axonal(d) = &mut m.delays {
                        d[i] = v;
                    }
                },
                &no_skip,
            )?;
        }
        DelayParams::None => {}
    }

    Ok(CheckReport {
        groups,
        epsilons: epsilons.to_vec(),
        tolerance,
        abs_floor: ABS_FLOOR,
        base_loss,
        hidden_spikes: record.spike_count(),
    })
}

fn default_setup_n_in() -> usize {
    5
}
fn default_setup_n_hidden() -> usize {
    8
}
fn default_setup_n_out() -> usize {
    3
}
fn default_setup_steps() -> usize {
    60
}
fn default_setup_dim() -> usize {
    2
}
fn default_input_rate() -> f64 {
    0.08
}
fn default_w_in_scale() -> f64 {
    4.0
}
fn default_w_rec_scale() -> f64 {
    1.5
}
fn default_w_out_scale() -> f64 {
    1.0
}
fn default_position_radius() -> f64 {
    4.0
}
fn default_epsilons() -> Vec<f64> {
    vec![1e-4, 1e-5]
}
fn default_tolerance() -> f64 {
    1e-3
}
fn default_min_pass_rate() -> f64 {
    0.95
}
fn default_setup_mode() -> DelayMode {
    DelayMode::Positional
}

/// A randomly drawn small network and input used for gradient checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSetup {
    #[serde(default = "default_setup_n_in")]
    pub n_in: usize,
    #[serde(default = "default_setup_n_hidden")]
    pub n_hidden: usize,
    #[serde(default = "default_setup_n_out")]
    pub n_out: usize,
    #[serde(rename = "T", default = "default_setup_steps")]
    pub steps: usize,
    #[serde(default = "default_setup_mode")]
    pub delay_mode: DelayMode,
    #[serde(default = "default_setup_dim")]
    pub dim: usize,
    /// Probability that an input neuron spikes on a given step.
    #[serde(default = "default_input_rate")]
    pub input_rate: f64,
    /// Weight standard deviations, before division by sqrt(fan-in).
    #[serde(default = "default_w_in_scale")]
    pub w_in_scale: f64,
    #[serde(default = "default_w_rec_scale")]
    pub w_rec_scale: f64,
    #[serde(default = "default_w_out_scale")]
    pub w_out_scale: f64,
    /// Positions (and free/axonal delays, as a range) are drawn in [-r, r].
    #[serde(default = "default_position_radius")]
    pub position_radius: f64,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_min_pass_rate")]
    pub min_pass_rate: f64,
}

impl Default for CheckSetup {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl CheckSetup {
    /// Draws parameters, neuron constants and one labelled sample.
    pub fn draw(&self, seed: u64) -> (ModelParams, NeuronParams, SampleEvents) {
        use rand::{Rng, SeedableRng};
        use rand_distr::{Distribution, Normal};

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = |rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize, std: f64| {
            let dist = Normal::new(0.0, std).expect("finite std");
            Matrix::from_fn(rows, cols, |_, _| dist.sample(rng))
        };
        let (n_in, n, n_out) = (self.n_in, self.n_hidden, self.n_out);
        let w_in = normal(&mut rng, n_in, n, self.w_in_scale / (n_in as f64).sqrt());
        let w_rec = normal(&mut rng, n, n, self.w_rec_scale / (n as f64).sqrt());
        let w_out = normal(&mut rng, n, n_out, self.w_out_scale / (n as f64).sqrt());
        let r = self.position_radius;
        let delays = match self.delay_mode {
            DelayMode::None => DelayParams::None,
            DelayMode::Free => DelayParams::Free(Matrix::from_fn(n, n, |_, _| rng.random_range(0.0..2.0 * r))),
            DelayMode::Axonal => DelayParams::Axonal((0..n).map(|_| rng.random_range(0.0..2.0 * r)).collect()),
            DelayMode::Positional => {
                let coords = Matrix::from_fn(n, self.dim, |_, _| rng.random_range(-r..r));
                DelayParams::Positional(crate::geometry::PositionArray::new(coords).expect("valid positions"))
            }
        };
        let mut events = Vec::new();
        for t in 0..self.steps {
            for i in 0..n_in {
                if rng.random::<f64>() < self.input_rate {
                    events.push((t, i));
                }
            }
        }
        let label = rng.random_range(0..n_out);
        let params = ModelParams { w_in, w_rec, w_out, delays, rec_mask: None };
        let neuron = NeuronParams { steps: self.steps, ..NeuronParams::default() };
        (params, neuron, SampleEvents { label, events })
    }

    pub fn run(&self, seed: u64) -> Result<CheckReport, EventPropError> {
        let (params, neuron, sample) = self.draw(seed);
        gradient_check(&params, &neuron, &sample, &self.epsilons, self.tolerance)
    }
}
