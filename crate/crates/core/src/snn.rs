//! Fixed-timestep simulation of a recurrent LIF hidden layer with per-synapse
//! delays and non-spiking leaky-integrator readouts.
//!
//! Per step `t` every hidden neuron applies
//!
//! ```text
//! I <- I·exp(-dt/tau_syn) + arrivals[t]
//! V <- V·exp(-dt/tau_mem) + I·dt/tau_mem
//! ```
//!
//! and spikes when `V >= theta`, after which `V` is set to `v_reset`. A spike
//! emitted at step `t` is delivered at step `t + 1 + delay` (a delay of zero
//! arrives on the next step). Input events follow the same rule.
//!
//! Spikes are detected on the grid, but each spike also carries a sub-step
//! phase: the fraction of a step by which the linear interpolation of the
//! membrane trace crossed threshold before the grid point. Delays need not
//! be whole steps. A spike whose continuous arrival time falls between grid
//! points is delivered at the next grid point with the amplitude its
//! exponentially decaying current would have there. With whole-step delays
//! and zero phase this is plain integer-delay ring-buffer delivery; in
//! general it makes the loss a piecewise-smooth function of weights, delays
//! and positions, which is what the adjoint pass differentiates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{compute_delays, DelayMatrix, DelayMode, PositionArray};
use crate::matrix::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("event {index} (step {step}, input {neuron}) is outside the trial (T = {steps}, n_in = {n_in})")]
    EventOutOfRange { index: usize, step: usize, neuron: usize, steps: usize, n_in: usize },
    #[error("label {label} is outside [0, {n_out})")]
    LabelOutOfRange { label: usize, n_out: usize },
    #[error("invalid neuron parameters: {0}")]
    Params(String),
}

fn default_tau_mem() -> f64 {
    20.0
}
fn default_tau_syn() -> f64 {
    5.0
}
fn default_theta() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1.0
}
fn default_steps() -> usize {
    100
}

/// Neuron constants shared by hidden and readout units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronParams {
    #[serde(default = "default_tau_mem")]
    pub tau_mem: f64,
    #[serde(default = "default_tau_syn")]
    pub tau_syn: f64,
    /// Firing threshold. `f64::INFINITY` silences the hidden layer.
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub v_reset: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Steps per trial.
    #[serde(rename = "T", default = "default_steps")]
    pub steps: usize,
    /// Largest representable delay in steps; longer delays are clamped.
    /// Defaults to `T`, beyond which a delivery can never land in the trial.
    #[serde(default)]
    pub max_delay_steps: Option<usize>,
    /// Round delays to whole steps (ties to even) before simulating. The
    /// delay gradient is then a straight-through estimate.
    #[serde(default)]
    pub quantize_delays: bool,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            tau_mem: default_tau_mem(),
            tau_syn: default_tau_syn(),
            theta: default_theta(),
            v_reset: 0.0,
            dt: default_dt(),
            steps: default_steps(),
            max_delay_steps: None,
            quantize_delays: false,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::Params(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("tau_mem", self.tau_mem)?;
        positive("tau_syn", self.tau_syn)?;
        positive("dt", self.dt)?;
        if !(self.theta > 0.0) {
            return Err(SimError::Params(format!("theta must be positive, got {}", self.theta)));
        }
        if !self.v_reset.is_finite() || self.v_reset >= self.theta {
            return Err(SimError::Params("v_reset must be finite and below theta".into()));
        }
        if self.steps == 0 {
            return Err(SimError::Params("T must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_steps(&self) -> usize {
        self.max_delay_steps.unwrap_or(self.steps)
    }

    pub(crate) fn constants(&self) -> Constants {
        Constants {
            alpha: (-self.dt / self.tau_mem).exp(),
            beta: (-self.dt / self.tau_syn).exp(),
            c: self.dt / self.tau_mem,
            g: self.dt / self.tau_syn,
            eg: (-self.dt / self.tau_syn).exp(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Constants {
    /// Membrane decay per step.
    pub alpha: f64,
    /// Synaptic decay per step.
    pub beta: f64,
    /// Current-to-voltage injection per step.
    pub c: f64,
    /// dt / tau_syn.
    pub g: f64,
    /// exp(-g), the amplitude factor for a delivery one full step late.
    pub eg: f64,
}

/// Learnable delay parameterisation of the recurrent layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayParams {
    None,
    /// Source-major n×n delays in time units.
    Free(Matrix),
    /// One delay per presynaptic neuron.
    Axonal(Vec<f64>),
    Positional(PositionArray),
}

impl DelayParams {
    pub fn mode(&self) -> DelayMode {
        match self {
            DelayParams::None => DelayMode::None,
            DelayParams::Free(_) => DelayMode::Free,
            DelayParams::Axonal(_) => DelayMode::Axonal,
            DelayParams::Positional(_) => DelayMode::Positional,
        }
    }

    /// Number of trainable scalars that determine the recurrent delays.
    pub fn parameter_count(&self) -> usize {
        match self {
            DelayParams::None => 0,
            DelayParams::Free(m) => m.rows() * m.cols(),
            DelayParams::Axonal(v) => v.len(),
            DelayParams::Positional(p) => p.n() * p.dim(),
        }
    }

    pub fn delay_matrix(&self, n: usize) -> DelayMatrix {
        match self {
            DelayParams::None => DelayMatrix::zeros(n),
            DelayParams::Free(m) => DelayMatrix { d: m.clone(), mode: DelayMode::Free },
            DelayParams::Axonal(v) => DelayMatrix {
                d: Matrix::from_fn(n, n, |i, _| v[i]),
                mode: DelayMode::Axonal,
            },
            DelayParams::Positional(p) => compute_delays(p),
        }
    }

    pub fn positions(&self) -> Option<&PositionArray> {
        match self {
            DelayParams::Positional(p) => Some(p),
            _ => None,
        }
    }
}

/// All network parameters. Weight matrices are source-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// n_in × n_hid
    pub w_in: Matrix,
    /// n_hid × n_hid, `w_rec[(i, j)]` is the synapse from `i` to `j`.
    pub w_rec: Matrix,
    /// n_hid × n_out
    pub w_out: Matrix,
    pub delays: DelayParams,
    /// Recurrent synapses that exist. `None` means all of them.
    pub rec_mask: Option<Vec<bool>>,
}

impl ModelParams {
    pub fn zeros(n_in: usize, n_hid: usize, n_out: usize) -> Self {
        Self {
            w_in: Matrix::zeros(n_in, n_hid),
            w_rec: Matrix::zeros(n_hid, n_hid),
            w_out: Matrix::zeros(n_hid, n_out),
            delays: DelayParams::None,
            rec_mask: None,
        }
    }

    pub fn n_in(&self) -> usize {
        self.w_in.rows()
    }

    pub fn n_hid(&self) -> usize {
        self.w_rec.rows()
    }

    pub fn n_out(&self) -> usize {
        self.w_out.cols()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.n_hid();
        if self.w_in.cols() != n || !self.w_rec.is_square() || self.w_out.rows() != n {
            return Err(SimError::Shape(format!(
                "w_in {:?}, w_rec {:?}, w_out {:?} are inconsistent",
                self.w_in.shape(),
                self.w_rec.shape(),
                self.w_out.shape()
            )));
        }
        let ok = match &self.delays {
            DelayParams::None => true,
            DelayParams::Free(m) => m.shape() == (n, n),
            DelayParams::Axonal(v) => v.len() == n,
            DelayParams::Positional(p) => p.n() == n,
        };
        if !ok {
            return Err(SimError::Shape(format!("delay parameters do not match {n} hidden neurons")));
        }
        if let Some(mask) = &self.rec_mask {
            if mask.len() != n * n {
                return Err(SimError::Shape("recurrent mask has wrong length".into()));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn synapse_exists(&self, i: usize, j: usize) -> bool {
        self.rec_mask.as_ref().is_none_or(|m| m[i * self.n_hid() + j])
    }

    /// Zeroes masked recurrent weights.
    pub fn apply_mask(&mut self) {
        if let Some(mask) = &self.rec_mask {
            for (w, &keep) in self.w_rec.as_mut_slice().iter_mut().zip(mask) {
                if !keep {
                    *w = 0.0;
                }
            }
        }
    }

    /// Removes a recurrent synapse (weight zeroed and masked).
    pub fn remove_synapse(&mut self, i: usize, j: usize) {
        let n = self.n_hid();
        let mask = self.rec_mask.get_or_insert_with(|| vec![true; n * n]);
        mask[i * n + j] = false;
        self.w_rec[(i, j)] = 0.0;
    }
}

/// One labelled trial: input spikes as `(step, input_neuron)` pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEvents {
    pub label: usize,
    pub events: Vec<(usize, usize)>,
}

/// A hidden spike as seen by the adjoint pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeRecord {
    pub neuron: usize,
    pub step: usize,
    /// Fraction of a step by which the threshold crossing preceded the grid point, in [0, 1).
    pub phase: f64,
    /// Membrane value after the previous step (the left end of the interpolation).
    pub v_prev: f64,
    /// Membrane value before reset.
    pub v_peak: f64,
}

/// Everything the backward pass and the probes consume from one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardRecord {
    pub steps: usize,
    /// Per hidden neuron, strictly increasing spike steps.
    pub hidden_spikes: Vec<Vec<usize>>,
    /// Discrete membrane slope `(V_peak − V_prev)/dt` at each spike, aligned with `hidden_spikes`.
    pub vdot_at_spike: Vec<Vec<f64>>,
    /// All hidden spikes in emission order.
    pub spikes: Vec<SpikeRecord>,
    /// T × n_out readout voltages.
    pub v_out_trace: Matrix,
    /// T × n_hid spike raster, when requested.
    pub hidden_spike_raster: Option<Vec<bool>>,
    /// T × n_hid pre-reset membrane trace, when requested.
    pub hidden_v_trace: Option<Matrix>,
    /// Input events validated and sorted by step.
    pub input_events: Vec<(usize, usize)>,
    /// Hash of every discrete decision taken (spike steps and delivery slots).
    /// Two runs with equal signatures differ only through smooth quantities.
    pub signature: u64,
}

impl ForwardRecord {
    pub fn spike_count(&self) -> usize {
        self.spikes.len()
    }

    pub fn spike_counts(&self) -> Vec<usize> {
        self.hidden_spikes.iter().map(Vec::len).collect()
    }

    /// Time-integrated readout per class (the argmax used by evaluation).
    pub fn integrated_output(&self) -> Vec<f64> {
        let (t, n_out) = self.v_out_trace.shape();
        let mut acc = vec![0.0; n_out];
        for s in 0..t {
            for (a, v) in acc.iter_mut().zip(self.v_out_trace.row(s)) {
                *a += v;
            }
        }
        acc
    }

    pub fn predicted_class(&self) -> usize {
        argmax(&self.integrated_output())
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RecordOptions {
    pub raster: bool,
    pub voltage: bool,
}

/// Per-synapse delivery geometry derived from a delay matrix.
#[derive(Clone, Debug)]
pub(crate) struct DelayTable {
    /// Whole steps of each delay.
    pub base: Vec<usize>,
    /// Fractional part in [0, 1).
    pub frac: Vec<f64>,
    /// exp(g·frac)
    pub efrac: Vec<f64>,
    /// Synapses whose delay was clamped to `[0, max_steps]`; they carry no delay gradient.
    pub clamped: Vec<bool>,
    pub max_base: usize,
}

impl DelayTable {
    pub fn new(delays: &DelayMatrix, neuron: &NeuronParams) -> Self {
        let n = delays.n();
        let k = neuron.constants();
        let max = neuron.max_steps() as f64;
        let mut base = Vec::with_capacity(n * n);
        let mut frac = Vec::with_capacity(n * n);
        let mut efrac = Vec::with_capacity(n * n);
        let mut clamped = Vec::with_capacity(n * n);
        let mut n_clamped = 0;
        for &d in delays.d.as_slice() {
            let mut steps = (d / neuron.dt).max(0.0);
            if neuron.quantize_delays {
                steps = steps.round_ties_even();
            }
            let clip = steps > max || d < 0.0;
            if steps > max {
                steps = max;
                n_clamped += 1;
            }
            let whole = steps.floor();
            let f = steps - whole;
            base.push(whole as usize);
            frac.push(f);
            efrac.push((k.g * f).exp());
            clamped.push(clip);
        }
        if n_clamped > 0 {
            log::warn!("{n_clamped} delays exceed {max} steps and were clamped");
        }
        let max_base = base.iter().copied().max().unwrap_or(0);
        Self { base, frac, efrac, clamped, max_base }
    }
}

/// Reusable per-worker buffers.
#[derive(Default)]
pub struct Scratch {
    ring: Vec<f64>,
    i_syn: Vec<f64>,
    v: Vec<f64>,
    io: Vec<f64>,
    vo: Vec<f64>,
    out_now: Vec<f64>,
    out_next: Vec<f64>,
    spiking: Vec<usize>,
}

/// A model bound to neuron constants and a resolved delay table, ready to
/// simulate many samples.
pub struct Network<'a> {
    pub(crate) params: &'a ModelParams,
    pub(crate) neuron: &'a NeuronParams,
    pub(crate) delays: DelayMatrix,
    pub(crate) table: DelayTable,
    pub(crate) k: Constants,
}

impl<'a> Network<'a> {
    /// Uses the delays implied by the model's own parameterisation.
    pub fn new(params: &'a ModelParams, neuron: &'a NeuronParams) -> Result<Self, SimError> {
        let delays = params.delays.delay_matrix(params.n_hid());
        Self::with_delays(params, neuron, delays)
    }

    /// Uses an explicit delay matrix, ignoring the model's parameterisation.
    pub fn with_delays(
        params: &'a ModelParams,
        neuron: &'a NeuronParams,
        delays: DelayMatrix,
    ) -> Result<Self, SimError> {
        params.validate()?;
        neuron.validate()?;
        if delays.n() != params.n_hid() {
            return Err(SimError::Shape("delay matrix does not match hidden layer".into()));
        }
        let table = DelayTable::new(&delays, neuron);
        Ok(Self { params, neuron, delays, table, k: neuron.constants() })
    }

    pub fn delays(&self) -> &DelayMatrix {
        &self.delays
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    pub fn neuron(&self) -> &NeuronParams {
        self.neuron
    }

    fn check_sample(&self, sample: &SampleEvents) -> Result<Vec<(usize, usize)>, SimError> {
        let steps = self.neuron.steps;
        let n_in = self.params.n_in();
        for (index, &(step, neuron)) in sample.events.iter().enumerate() {
            if step >= steps || neuron >= n_in {
                return Err(SimError::EventOutOfRange { index, step, neuron, steps, n_in });
            }
        }
        let mut events = sample.events.clone();
        events.sort_unstable();
        Ok(events)
    }

    pub fn run(&self, sample: &SampleEvents, opts: RecordOptions) -> Result<ForwardRecord, SimError> {
        self.run_with(sample, opts, &mut Scratch::default())
    }

    pub fn run_with(
        &self,
        sample: &SampleEvents,
        opts: RecordOptions,
        scratch: &mut Scratch,
    ) -> Result<ForwardRecord, SimError> {
        let input_events = self.check_sample(sample)?;
        let p = self.params;
        let k = self.k;
        let n = p.n_hid();
        let n_out = p.n_out();
        let steps = self.neuron.steps;
        let theta = self.neuron.theta;
        let v_reset = self.neuron.v_reset;
        let cap = self.table.max_base + 3;

        let s = scratch;
        reset(&mut s.ring, cap * n);
        reset(&mut s.i_syn, n);
        reset(&mut s.v, n);
        reset(&mut s.io, n_out);
        reset(&mut s.vo, n_out);
        reset(&mut s.out_now, n_out);
        reset(&mut s.out_next, n_out);

        let mut hidden_spikes = vec![Vec::new(); n];
        let mut vdot_at_spike = vec![Vec::new(); n];
        let mut spikes = Vec::new();
        let mut v_out_trace = Matrix::zeros(steps, n_out);
        let mut raster = opts.raster.then(|| vec![false; steps * n]);
        let mut v_trace = opts.voltage.then(|| Matrix::zeros(steps, n));
        let mut hash = Fnv::new();
        let mut next_event = 0;

        for t in 0..steps {
            let slot = (t % cap) * n;
            s.spiking.clear();
            for j in 0..n {
                let arrived = std::mem::take(&mut s.ring[slot + j]);
                let i_new = k.beta * s.i_syn[j] + arrived;
                s.i_syn[j] = i_new;
                let v_prev = s.v[j];
                let u = k.alpha * v_prev + k.c * i_new;
                if let Some(vt) = v_trace.as_mut() {
                    vt[(t, j)] = u;
                }
                if u >= theta {
                    let phase = (u - theta) / (u - v_prev);
                    spikes.push(SpikeRecord { neuron: j, step: t, phase, v_prev, v_peak: u });
                    hidden_spikes[j].push(t);
                    vdot_at_spike[j].push((u - v_prev) / self.neuron.dt);
                    s.spiking.push(spikes.len() - 1);
                    s.v[j] = v_reset;
                    if let Some(r) = raster.as_mut() {
                        r[t * n + j] = true;
                    }
                } else {
                    s.v[j] = u;
                }
            }

            for &idx in &s.spiking {
                let sp = spikes[idx];
                let i = sp.neuron;
                hash.write(t as u64);
                hash.write(i as u64);
                let ephase = (-k.g * sp.phase).exp();
                let row = p.w_rec.row(i);
                let mut bits = 0u64;
                for j in 0..n {
                    let syn = i * n + j;
                    let late = self.table.frac[syn] > sp.phase;
                    bits = bits.wrapping_mul(0x0000_0100_0000_01b3) ^ (late as u64);
                    let w = row[j];
                    if w == 0.0 {
                        continue;
                    }
                    let offset = 1 + self.table.base[syn] + late as usize;
                    let mut amp = w * ephase * self.table.efrac[syn];
                    if late {
                        amp *= k.eg;
                    }
                    s.ring[((t + offset) % cap) * n + j] += amp;
                }
                hash.write(bits);
                for (o, w) in s.out_next.iter_mut().zip(p.w_out.row(i)) {
                    *o += w * ephase;
                }
            }

            while next_event < input_events.len() && input_events[next_event].0 == t {
                let i = input_events[next_event].1;
                let nslot = ((t + 1) % cap) * n;
                for (r, w) in s.ring[nslot..nslot + n].iter_mut().zip(p.w_in.row(i)) {
                    *r += w;
                }
                next_event += 1;
            }

            let trace = v_out_trace.row_mut(t);
            for o in 0..n_out {
                s.io[o] = k.beta * s.io[o] + s.out_now[o];
                s.vo[o] = k.alpha * s.vo[o] + k.c * s.io[o];
                trace[o] = s.vo[o];
            }
            std::mem::swap(&mut s.out_now, &mut s.out_next);
            s.out_next.iter_mut().for_each(|x| *x = 0.0);
        }

        Ok(ForwardRecord {
            steps,
            hidden_spikes,
            vdot_at_spike,
            spikes,
            v_out_trace,
            hidden_spike_raster: raster,
            hidden_v_trace: v_trace,
            input_events,
            signature: hash.finish(),
        })
    }
}

fn reset(buf: &mut Vec<f64>, len: usize) {
    buf.clear();
    buf.resize(len, 0.0);
}

/// FNV-1a over 64-bit words.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, word: u64) {
        for b in word.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Simulates one sample with the model's own delays.
pub fn simulate_forward(
    params: &ModelParams,
    neuron: &NeuronParams,
    sample: &SampleEvents,
) -> Result<ForwardRecord, SimError> {
    Network::new(params, neuron)?.run(sample, RecordOptions::default())
}

/// Softmax cross-entropy on the time-averaged readout voltages.
///
/// Returns the loss and its derivative with respect to every entry of the
/// T × n_out voltage trace.
pub fn compute_loss(record: &ForwardRecord, label: usize) -> Result<(f64, Matrix), SimError> {
    let (steps, n_out) = record.v_out_trace.shape();
    if label >= n_out {
        return Err(SimError::LabelOutOfRange { label, n_out });
    }
    let scale = 1.0 / steps as f64;
    let logits: Vec<f64> = record.integrated_output().into_iter().map(|a| a * scale).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|a| (a - max).exp()).sum();
    let log_z = max + z.ln();
    let loss = log_z - logits[label];
    let mut grad_row = vec![0.0; n_out];
    for (c, g) in grad_row.iter_mut().enumerate() {
        let p = (logits[c] - log_z).exp();
        *g = (p - if c == label { 1.0 } else { 0.0 }) * scale;
    }
    let grad = Matrix::from_fn(steps, n_out, |_, c| grad_row[c]);
    Ok((loss, grad))
}
