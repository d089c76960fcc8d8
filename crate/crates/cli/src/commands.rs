use std::path::Path;

use log::info;
use posdelay::checkpoint::Checkpoint;
use posdelay::datasets::{gen_interval_task, gen_patterns, load_events, save_events, EventDataset, IntervalConfig, PatternConfig};
use posdelay::eventprop::CheckSetup;
use posdelay::probes;
use posdelay::pruning::{self, PruneStrategy, SweepOptions};
use posdelay::topology::{self, AnalysisOptions, GraphMode, TopologyReport};
use posdelay::training::{self, config_hash, TrainConfig};
use posdelay::{DelayMode, Matrix};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{num, read_config, write_csv, write_json, Provenance, VERSION};
use crate::{AblateArgs, AnalyzeArgs, EvalArgs, GenDataArgs, GradcheckArgs, PerturbArgs, ProbeArgs, ProbeKind, PruneArgs, Strategy, Task, TrainArgs};

/// Class `k` of a generated interval task is separated by `5 + 10k` steps.
fn default_gaps(classes: usize) -> Vec<usize> {
    (0..classes).map(|k| 5 + 10 * k).collect()
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("{flag} is required without --config")))
}

pub fn gen_data(a: &GenDataArgs) -> Result<(), CliError> {
    let usage = |e: posdelay::datasets::DatasetError| CliError::Usage(e.to_string());
    let ds = match a.task {
        Task::Patterns => {
            let mut cfg = match &a.config {
                Some(p) => read_config::<PatternConfig>(p)?,
                None => PatternConfig::new(required(a.n_in, "--n-in")?, required(a.classes, "--classes")?, required(a.samples, "--samples")?, 0),
            };
            cfg.n_in = a.n_in.unwrap_or(cfg.n_in);
            cfg.n_classes = a.classes.unwrap_or(cfg.n_classes);
            cfg.samples_per_class = a.samples.unwrap_or(cfg.samples_per_class);
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            cfg.steps = a.steps.unwrap_or(cfg.steps);
            cfg.jitter_std = a.jitter.unwrap_or(cfg.jitter_std);
            gen_patterns(&cfg).map_err(usage)?
        }
        Task::Interval => {
            let mut cfg = match &a.config {
                Some(p) => read_config::<IntervalConfig>(p)?,
                None => IntervalConfig::new(
                    required(a.n_in, "--n-in")?,
                    default_gaps(required(a.classes, "--classes")?),
                    required(a.samples, "--samples")?,
                    0,
                ),
            };
            if let Some(c) = a.classes.filter(|&c| c != cfg.gaps.len()) {
                cfg.gaps = default_gaps(c);
            }
            cfg.n_in = a.n_in.unwrap_or(cfg.n_in);
            cfg.samples_per_class = a.samples.unwrap_or(cfg.samples_per_class);
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            cfg.steps = a.steps.unwrap_or(cfg.steps);
            if let Some(j) = a.jitter {
                if !(j >= 0.0 && j.fract() == 0.0) {
                    return Err(CliError::Usage(format!("interval jitter must be a whole number of steps, got {j}")));
                }
                cfg.jitter = j as usize;
            }
            gen_interval_task(&cfg).map_err(usage)?
        }
    };
    match (a.test_fraction, &a.test_out) {
        (Some(f), Some(test_out)) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(CliError::Usage(format!("--test-fraction {f} outside [0, 1]")));
            }
            let seed = ds.meta.as_ref().map_or(0, |m| m.seed);
            let (train, test) = ds.split(f, seed);
            save_events(&train, &a.out)?;
            save_events(&test, test_out)?;
            info!("wrote {} train and {} test samples", train.len(), test.len());
        }
        _ => {
            save_events(&ds, &a.out)?;
            info!("wrote {} samples", ds.len());
        }
    }
    Ok(())
}

fn load_data(path: &Path) -> Result<EventDataset, CliError> {
    load_events(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Rejects data the network cannot consume.
fn check_compatible(n_in: usize, n_out: usize, steps: usize, data: &EventDataset, what: &str) -> Result<(), CliError> {
    if data.n_in != n_in || data.n_classes != n_out {
        return Err(CliError::Data(format!(
            "{what} has {} inputs and {} classes but the network expects {n_in} and {n_out}",
            data.n_in, data.n_classes
        )));
    }
    if data.steps > steps {
        return Err(CliError::Data(format!("{what} trials last {} steps but the network runs {steps}", data.steps)));
    }
    Ok(())
}

fn checkpoint_data(ck: &Checkpoint, path: &Path) -> Result<EventDataset, CliError> {
    let data = load_data(path)?;
    let p = &ck.params;
    check_compatible(p.n_in(), p.n_out(), ck.config.neuron.steps, &data, &path.display().to_string())?;
    Ok(data)
}

fn provenance(ck: &Checkpoint) -> Provenance {
    Provenance::new(ck.config.hash(), ck.config.seed)
}

#[derive(Serialize)]
struct TrainSummary {
    #[serde(flatten)]
    provenance: Provenance,
    epochs: usize,
    train_accuracy: Option<f64>,
    train_loss: Option<f64>,
    test_accuracy: Option<f64>,
    test_loss: Option<f64>,
    final_sparsity: f64,
    sparsity_threshold: f64,
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let mut cfg: TrainConfig = read_config(&a.config)?;
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.validate()?;
    let data = load_data(&a.data)?;
    let test = a.test_data.as_deref().map(load_data).transpose()?;
    check_compatible(data.n_in, data.n_classes, cfg.neuron.steps, &data, "training data")?;
    if let Some(t) = &test {
        check_compatible(data.n_in, data.n_classes, cfg.neuron.steps, t, "test data")?;
    }
    let model = training::init_model(&cfg, data.n_in, data.n_classes)?;
    let (params, report) = training::train(&data, test.as_ref(), model, &cfg)?;
    info!("trained in {:.1} s", report.wall_clock_secs);
    let prov = Provenance::new(report.config_hash.clone(), cfg.seed);
    if let Some(log) = &a.log {
        let rows: Vec<Vec<String>> = report
            .history
            .iter()
            .map(|r| {
                vec![
                    r.epoch.to_string(),
                    r.train_loss.to_string(),
                    r.train_accuracy.to_string(),
                    num(r.test_loss),
                    num(r.test_accuracy),
                ]
            })
            .collect();
        write_csv(Some(log), &["epoch", "train_loss", "train_accuracy", "test_loss", "test_accuracy"], &rows, &prov)?;
    }
    Checkpoint::new(params, cfg.clone(), cfg.epochs).save(&a.out_checkpoint)?;
    let last = report.history.last();
    write_json(
        &TrainSummary {
            provenance: prov,
            epochs: cfg.epochs,
            train_accuracy: last.map(|r| r.train_accuracy),
            train_loss: last.map(|r| r.train_loss),
            test_accuracy: last.and_then(|r| r.test_accuracy),
            test_loss: last.and_then(|r| r.test_loss),
            final_sparsity: report.final_sparsity,
            sparsity_threshold: report.sparsity_threshold,
        },
        None,
    )
}

#[derive(Serialize)]
struct EvalOutput {
    #[serde(flatten)]
    provenance: Provenance,
    n_samples: usize,
    accuracy: f64,
    loss: f64,
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let data = checkpoint_data(&ck, &a.data)?;
    let e = training::evaluate(&ck.params, &ck.config.neuron, &data)?;
    if !e.loss.is_finite() {
        return Err(CliError::Numeric(format!("non-finite loss {}", e.loss)));
    }
    write_json(&EvalOutput { provenance: provenance(&ck), n_samples: data.len(), accuracy: e.accuracy, loss: e.loss }, None)
}

#[derive(Serialize)]
struct AnalyzeOutput {
    #[serde(flatten)]
    provenance: Provenance,
    analysis: TopologyReport,
}

pub fn analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let p = &ck.params;
    let delays = (p.delays.mode() != DelayMode::None).then(|| p.delays.delay_matrix(p.n_hid()).d);
    let mode = if a.binary { GraphMode::Binary } else { GraphMode::Weighted };
    let opts = AnalysisOptions { mode, n_null: a.null_samples, seed: a.seed };
    let report = topology::analyze(&p.w_rec, delays.as_ref(), &opts)?;
    write_json(&AnalyzeOutput { provenance: provenance(&ck), analysis: report }, a.out.as_ref())
}

const AXES: [&str; 4] = ["x", "y", "z", "w"];

fn position_rows(rows: impl IntoIterator<Item = (usize, usize, Vec<f64>, bool)>) -> Vec<Vec<String>> {
    rows.into_iter()
        .map(|(input, bin, coords, valid)| {
            let mut r = vec![input.to_string(), bin.to_string()];
            r.extend(coords.iter().map(|&c| if valid { c.to_string() } else { String::new() }));
            r.push(valid.to_string());
            r
        })
        .collect()
}

fn static_rows(p: &probes::PreferredPositions) -> Vec<Vec<String>> {
    position_rows((0..p.coords.rows()).map(|i| (i, 0, p.coords.row(i).to_vec(), p.valid[i])))
}

pub fn probe(a: &ProbeArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let prov = provenance(&ck);
    let positions: Matrix = match ck.params.delays.positions() {
        Some(p) => p.coords().clone(),
        None => return Err(CliError::Usage(format!("probes need a positional checkpoint, got delay mode {}", ck.params.delays.mode().as_str()))),
    };
    let dim = positions.cols();
    let mut header = vec!["input_id", "bin"];
    header.extend(&AXES[..dim]);
    header.push("valid");
    let data = || match &a.data {
        Some(p) => checkpoint_data(&ck, p),
        None => Err(CliError::Usage("--data is required for activity probes".into())),
    };
    let neuron = &ck.config.neuron;
    match a.kind {
        ProbeKind::PrefposW => {
            let p = probes::preferred_positions_weights(&ck.params.w_in, &positions)?;
            write_csv(a.out.as_ref(), &header, &static_rows(&p), &prov)
        }
        ProbeKind::PrefposAct => {
            let t = probes::activity_sensitivity(&ck.params, neuron, &data()?, a.window)?;
            let p = probes::preferred_positions_activity(&t, &positions)?;
            write_csv(a.out.as_ref(), &header, &static_rows(&p), &prov)
        }
        ProbeKind::PrefposTime => {
            let over = probes::preferred_positions_over_time(&ck.params, neuron, &data()?, &positions, a.window, a.bin_width)?;
            let rows = position_rows(over.rows().into_iter().map(|r| (r.input_id, r.bin, r.coords, r.valid)));
            write_csv(a.out.as_ref(), &header, &rows, &prov)
        }
        ProbeKind::Ridge => {
            let r = probes::ridge_r2(&ck.params.w_in, &positions, a.alpha, a.folds, a.seed)?;
            let tail = [r.folds_used.to_string(), r.folds_skipped.to_string(), a.alpha.to_string(), a.seed.to_string()];
            let mut rows: Vec<Vec<String>> = r
                .r2
                .iter()
                .zip(AXES)
                .map(|(v, axis)| [axis.to_string(), v.to_string()].into_iter().chain(tail.clone()).collect())
                .collect();
            rows.push(["mean".to_string(), r.mean_r2.to_string()].into_iter().chain(tail.clone()).collect());
            write_csv(a.out.as_ref(), &["coordinate", "r2", "folds_used", "folds_skipped", "alpha", "seed"], &rows, &prov)
        }
    }
}

/// Comma-separated values where an item `lo..hi` expands to `lo, lo + step, …, hi`.
pub fn parse_values(spec: &str, step: f64) -> Result<Vec<f64>, CliError> {
    let bad = |item: &str| CliError::Usage(format!("cannot parse {item:?} as a number or range"));
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = item.split_once("..") {
            let lo: f64 = lo.trim().parse().map_err(|_| bad(item))?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad(item))?;
            if !(step > 0.0) || hi < lo {
                return Err(bad(item));
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize;
            // Rounded so that 0.05 + 2 · 0.05 prints as 0.15.
            out.extend((0..=count).map(|k| ((lo + k as f64 * step) * 1e10).round() / 1e10));
        } else {
            out.push(item.parse().map_err(|_| bad(item))?);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no values given".into()));
    }
    Ok(out)
}

pub fn prune(a: &PruneArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let data = checkpoint_data(&ck, &a.data)?;
    let strategy = match a.strategy {
        Strategy::LongestDelay => PruneStrategy::LongestDelay,
        Strategy::Magnitude => PruneStrategy::Magnitude,
        Strategy::Random => PruneStrategy::Random,
    };
    let opts = SweepOptions { strategy, fractions: parse_values(&a.fractions, a.step)?, seeds: (0..a.seeds).collect(), n_null: a.null_samples };
    let rows = pruning::prune_sweep(&ck.params, &ck.config.neuron, &data, &opts)?;
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.strategy.clone(),
                r.fraction.to_string(),
                r.seed.to_string(),
                num(r.accuracy),
                num(r.Q),
                num(r.Gamma),
                r.density.to_string(),
                r.synapses.to_string(),
            ]
        })
        .collect();
    let header = ["strategy", "fraction", "seed", "accuracy", "Q", "Gamma", "density", "synapses"];
    write_csv(a.out.as_ref(), &header, &rows, &provenance(&ck))
}

pub fn ablate(a: &AblateArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let data = checkpoint_data(&ck, &a.data)?;
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let mut rows = Vec::new();
    for f in parse_values(&a.fractions, 0.1)? {
        for r in pruning::ablate_neurons(&ck.params, &ck.config.neuron, &data, f, &seeds)? {
            rows.push(vec![r.fraction.to_string(), r.seed.to_string(), r.ablated.to_string(), r.accuracy.to_string()]);
        }
    }
    write_csv(a.out.as_ref(), &["fraction", "seed", "ablated", "accuracy"], &rows, &provenance(&ck))
}

pub fn perturb(a: &PerturbArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let data = checkpoint_data(&ck, &a.data)?;
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let mut rows = Vec::new();
    for std in parse_values(&a.noise, 1.0)? {
        for r in pruning::perturb_delays(&ck.params, &ck.config.neuron, &data, std, &seeds)? {
            rows.push(vec![r.noise_std.to_string(), r.seed.to_string(), r.accuracy.to_string()]);
        }
    }
    write_csv(a.out.as_ref(), &["noise_std", "seed", "accuracy"], &rows, &provenance(&ck))
}

#[derive(Serialize)]
struct GradcheckOutput {
    #[serde(flatten)]
    provenance: Provenance,
    passed: bool,
    min_pass_rate: f64,
    setup: CheckSetup,
    report: posdelay::eventprop::CheckReport,
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<(), CliError> {
    let setup: CheckSetup = match &a.config {
        Some(p) => read_config(p)?,
        None => CheckSetup::default(),
    };
    let report = setup.run(a.seed)?;
    let passed = report.passed(setup.min_pass_rate) && report.base_loss.is_finite();
    let out = GradcheckOutput {
        provenance: Provenance { version: VERSION.into(), config_hash: config_hash(&setup), seed: a.seed },
        passed,
        min_pass_rate: setup.min_pass_rate,
        setup,
        report,
    };
    write_json(&out, a.out.as_ref())?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Numeric("gradient check failed".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_expand_inclusively() {
        assert_eq!(parse_values("0.05..0.30", 0.05).unwrap(), vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3]);
        assert_eq!(parse_values("0, 0.1..0.2", 0.1).unwrap(), vec![0.0, 0.1, 0.2]);
        assert!(parse_values("0.3..0.1", 0.1).is_err());
        assert!(parse_values("", 0.1).is_err());
        assert!(parse_values("x", 0.1).is_err());
    }

    #[test]
    fn gaps_are_ten_steps_apart() {
        assert_eq!(default_gaps(4), vec![5, 15, 25, 35]);
    }
}
