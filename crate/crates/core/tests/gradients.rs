use posdelay::eventprop::{gradient_check, CheckSetup};
use posdelay::geometry::{DelayMode, EPS_DIST};
use posdelay::snn::{compute_loss, DelayParams, Network, RecordOptions};
use posdelay::{compute_delays, position_gradient, Matrix, NeuronParams, PositionArray};
use proptest::prelude::*;

fn setup(mode: DelayMode) -> CheckSetup {
    CheckSetup { delay_mode: mode, ..CheckSetup::default() }
}

#[test]
fn zero_loss_derivative_gives_zero_gradients() {
    let (p, nrn, sample) = setup(DelayMode::Positional).draw(0);
    let net = Network::new(&p, &nrn).unwrap();
    let r = net.run(&sample, RecordOptions::default()).unwrap();
    assert!(r.spike_count() > 0);
    let g = net.backward(&r, &Matrix::zeros(nrn.steps, p.n_out())).unwrap();
    for m in [&g.w_in, &g.w_rec, &g.w_out, &g.delay, g.positions.as_ref().unwrap()] {
        assert!(m.as_slice().iter().all(|&x| x == 0.0));
    }
}

#[test]
fn silent_network_has_only_readout_free_gradients() {
    let (p, _, sample) = setup(DelayMode::Positional).draw(1);
    let nrn = NeuronParams { theta: f64::INFINITY, steps: 60, ..NeuronParams::default() };
    let net = Network::new(&p, &nrn).unwrap();
    let (_, g, r) = net.loss_and_gradient(&sample).unwrap();
    assert_eq!(r.spike_count(), 0);
    for m in [&g.w_in, &g.w_rec, &g.w_out, &g.delay, g.positions.as_ref().unwrap()] {
        assert!(m.as_slice().iter().all(|&x| x == 0.0));
    }
    let report = gradient_check(&p, &nrn, &sample, &[1e-4, 1e-5], 1e-3).unwrap();
    for group in &report.groups {
        assert_eq!(group.passed, group.valid, "{}", group.group);
        assert_eq!(group.worst_rel_error, 0.0, "{}", group.group);
    }
}

#[test]
fn adjoint_is_linear_in_the_loss_derivative() {
    let (p, nrn, sample) = setup(DelayMode::Free).draw(2);
    let net = Network::new(&p, &nrn).unwrap();
    let r = net.run(&sample, RecordOptions::default()).unwrap();
    let (_, dl) = compute_loss(&r, sample.label).unwrap();
    let g1 = net.backward(&r, &dl).unwrap();
    let mut dl3 = dl.clone();
    dl3.scale(-3.0);
    let g3 = net.backward(&r, &dl3).unwrap();
    for (a, b) in [(&g1.w_in, &g3.w_in), (&g1.w_rec, &g3.w_rec), (&g1.w_out, &g3.w_out), (&g1.delay, &g3.delay)] {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((y + 3.0 * x).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }
}

#[test]
fn delay_gradient_vanishes_without_a_weight() {
    let (mut p, nrn, sample) = setup(DelayMode::Free).draw(4);
    let n = p.n_hid();
    for i in 0..n {
        p.w_rec[(i, (i + 3) % n)] = 0.0;
    }
    let (_, g, _) = Network::new(&p, &nrn).unwrap().loss_and_gradient(&sample).unwrap();
    assert!(g.delay.as_slice().iter().any(|&x| x != 0.0));
    for i in 0..p.n_hid() {
        assert_eq!(g.delay[(i, (i + 3) % p.n_hid())], 0.0);
    }
}

#[test]
fn positional_gradient_is_chain_rule_of_delay_gradient() {
    for seed in 0..5 {
        let (p, nrn, sample) = setup(DelayMode::Positional).draw(seed);
        let (_, g, _) = Network::new(&p, &nrn).unwrap().loss_and_gradient(&sample).unwrap();
        let pos = p.delays.positions().unwrap();
        assert_eq!(g.positions.as_ref().unwrap(), &position_gradient(&g.delay, pos, EPS_DIST));
    }
}

#[test]
fn axonal_gradient_is_row_sum_of_free_gradient() {
    for seed in 0..5 {
        let (p, nrn, sample) = setup(DelayMode::Axonal).draw(seed);
        let axon = match &p.delays {
            DelayParams::Axonal(v) => v.clone(),
            _ => unreachable!(),
        };
        let mut free = p.clone();
        free.delays = DelayParams::Free(Matrix::from_fn(p.n_hid(), p.n_hid(), |i, _| axon[i]));
        let (_, ga, _) = Network::new(&p, &nrn).unwrap().loss_and_gradient(&sample).unwrap();
        let (_, gf, _) = Network::new(&free, &nrn).unwrap().loss_and_gradient(&sample).unwrap();
        let ga = ga.axonal.unwrap();
        for i in 0..p.n_hid() {
            let row: f64 = gf.delay.row(i).iter().sum();
            assert!((ga[i] - row).abs() <= 1e-14 * (1.0 + row.abs()));
        }
    }
}

#[test]
fn readout_gradients_are_exact() {
    for seed in 0..5 {
        let report = setup(DelayMode::Positional).run(seed).unwrap();
        let g = report.group("w_out").unwrap();
        assert_eq!(g.passed, g.coordinates);
        assert!(g.worst_rel_error <= 1e-6, "seed {seed}: {}", g.worst_rel_error);
    }
}

#[test]
fn gradient_check_passes_in_every_delay_mode() {
    for mode in [DelayMode::None, DelayMode::Free, DelayMode::Axonal, DelayMode::Positional] {
        for seed in 0..4 {
            let report = setup(mode).run(seed).unwrap();
            assert!(report.passed(0.95), "{mode:?} seed {seed}: {report:?}");
        }
    }
}

/// A smooth scalar function of the delay matrix and its gradient.
fn quadratic(d: &Matrix) -> (f64, Matrix) {
    let n = d.rows();
    let coef = |i: usize, j: usize| 0.3 + 0.1 * ((i * 7 + j * 3) % 5) as f64 - 0.2 * (i == 0) as u8 as f64;
    let mut value = 0.0;
    let mut grad = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let a = coef(i, j);
            value += a * d[(i, j)] * d[(i, j)] + 0.5 * (i as f64 - j as f64) * d[(i, j)];
            grad[(i, j)] = 2.0 * a * d[(i, j)] + 0.5 * (i as f64 - j as f64);
        }
    }
    (value, grad)
}

#[test]
fn position_gradient_matches_finite_differences_of_composed_map() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let coords = Matrix::from_fn(5, 3, |_, _| rng.random_range(-3.0..3.0));
        let pos = PositionArray::new(coords.clone()).unwrap();
        let (_, gd) = quadratic(&compute_delays(&pos).d);
        let analytic = position_gradient(&gd, &pos, EPS_DIST);
        let h = 1e-5;
        for i in 0..5 {
            for k in 0..3 {
                let mut plus = coords.clone();
                plus[(i, k)] += h;
                let mut minus = coords.clone();
                minus[(i, k)] -= h;
                let fp = quadratic(&compute_delays(&PositionArray::new(plus).unwrap()).d).0;
                let fm = quadratic(&compute_delays(&PositionArray::new(minus).unwrap()).d).0;
                let fd = (fp - fm) / (2.0 * h);
                let a = analytic[(i, k)];
                assert!((a - fd).abs() <= 1e-6 * a.abs().max(fd.abs()).max(1.0), "({i},{k}) {a} vs {fd}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn delay_gradient_never_depends_on_absent_synapses(seed in 0u64..100_000) {
        let small = CheckSetup { n_in: 3, n_hidden: 4, n_out: 2, steps: 30, input_rate: 0.2, ..setup(DelayMode::Free) };
        let (mut p, nrn, sample) = small.draw(seed);
        p.remove_synapse((seed % 4) as usize, ((seed / 4) % 4) as usize);
        let (_, g, _) = Network::new(&p, &nrn).unwrap().loss_and_gradient(&sample).unwrap();
        prop_assert!(g.is_finite());
        for i in 0..4 {
            for j in 0..4 {
                if p.w_rec[(i, j)] == 0.0 {
                    prop_assert_eq!(g.delay[(i, j)], 0.0);
                }
            }
        }
    }
}
