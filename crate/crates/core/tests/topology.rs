#[path = "support/oracles.rs"]
mod oracles;

use oracles::close;
use posdelay::topology::*;
use posdelay::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn metrics_match_brute_force_on_random_graphs() {
    for seed in 0..60u64 {
        let n = 3 + (seed % 6) as usize;
        let w = oracles::random_signed(n, 0.3 + 0.1 * (seed % 4) as f64, seed);
        let a = preprocess(&w).unwrap();
        assert_eq!(a, oracles::symmetrize(&w));
        assert!(close(clustering_binary(&a).unwrap(), oracles::clustering(&a), 1e-12));
        assert!(close(clustering_weighted(&a).unwrap(), oracles::weighted_clustering(&a), 1e-12));
        let p = path_length_binary(&a, 5, seed).unwrap();
        let (l, missing) = oracles::floyd_path_length(&a);
        assert_eq!(p.disconnected_pairs, missing);
        assert_eq!(p.value.is_some(), l.is_some());
        if let (Some(x), Some(y)) = (p.value, l) {
            assert!(close(x, y, 1e-12));
        }
        if let Some(expected) = oracles::inverse_weight_mean(&a) {
            assert!(close(mean_inverse_weight(&a).0.unwrap(), expected, 1e-12));
        }
        let d = oracles::random_signed(n, 0.0, seed + 1000).abs();
        assert!(close(wiring_efficiency(&w, &d).unwrap().wire_norm, oracles::wire_norm(&w, &d), 1e-10));
        if w.max_abs() > 0.0 {
            assert!(close(shannon_entropy(&w).unwrap(), oracles::entropy(&w), 1e-12));
        }
        if a.sum() > 0.0 {
            let labels: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % 3).collect();
            let q = modularity(&a, &Partition::from_labels(&labels)).unwrap();
            assert!(close(q, oracles::modularity(&a, &labels), 1e-12));
        }
    }
}

#[test]
fn find_partition_reaches_exhaustive_optimum() {
    for seed in 0..40u64 {
        let n = 2 + (seed % 7) as usize;
        let a = preprocess(&oracles::random_signed(n, 0.4, seed)).unwrap();
        if a.sum() == 0.0 {
            continue;
        }
        let p = find_partition(&a, seed).unwrap();
        assert!(close(modularity(&a, &p).unwrap(), oracles::best_modularity(&a), 1e-12), "seed {seed}");
    }
}

/// Cliques of the given sizes joined by a sparse ring of weak bridges.
fn planted(sizes: &[usize], bridge: f64) -> (Matrix, Vec<usize>) {
    let n: usize = sizes.iter().sum();
    let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    let mut a = Matrix::from_fn(n, n, |i, j| if i != j && labels[i] == labels[j] { 1.0 } else { 0.0 });
    let mut start = 0;
    for (c, &s) in sizes.iter().enumerate() {
        let next = (start + s) % n;
        if sizes.len() > 1 && c + 1 < sizes.len() {
            a[(start, next)] = bridge;
            a[(next, start)] = bridge;
        }
        start += s;
    }
    (a, labels)
}

#[test]
fn louvain_recovers_planted_modules() {
    for sizes in [&[4, 4][..], &[3, 5], &[3, 3, 3], &[5, 6, 4, 5], &[8, 8, 8, 8]] {
        let (a, labels) = planted(sizes, 0.1);
        for seed in 0..5 {
            let p = louvain(&a, seed).unwrap();
            assert_eq!(p, Partition::from_labels(&labels), "{sizes:?} seed {seed}");
        }
        if a.rows() <= 8 {
            assert!(close(modularity(&a, &louvain(&a, 0).unwrap()).unwrap(), oracles::best_modularity(&a), 1e-12));
        }
    }
}

#[test]
fn two_disconnected_cliques_have_modularity_one_half() {
    let (a, labels) = planted(&[4, 4], 0.0);
    assert_eq!(modularity(&a, &Partition::from_labels(&labels)).unwrap(), 0.5);
    assert_eq!(oracles::modularity(&a, &labels), 0.5);
    assert_eq!(find_partition(&a, 0).unwrap().labels(), labels.as_slice());
}

#[test]
fn single_edge_partition_is_the_better_of_two() {
    let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
    let together = modularity(&a, &Partition::from_labels(&[0, 0])).unwrap();
    let apart = modularity(&a, &Partition::from_labels(&[0, 1])).unwrap();
    let best = modularity(&a, &find_partition(&a, 0).unwrap()).unwrap();
    assert_eq!(best, together.max(apart));
}

#[test]
fn empty_graph_modularity_is_an_error() {
    assert_eq!(modularity(&Matrix::zeros(3, 3), &Partition::singletons(3)), Err(TopologyError::EmptyGraph));
}

#[test]
fn clustering_fixtures() {
    let k5 = Matrix::from_fn(5, 5, |i, j| if i != j { 1.0 } else { 0.0 });
    assert_eq!(clustering_binary(&k5).unwrap(), 1.0);
    let star = Matrix::from_fn(5, 5, |i, j| if i != j && (i == 0 || j == 0) { 1.0 } else { 0.0 });
    assert_eq!(clustering_binary(&star).unwrap(), 0.0);
    let tri = Matrix::from_fn(3, 3, |i, j| if i != j { 0.3 } else { 0.0 });
    assert!(close(clustering_weighted(&tri).unwrap(), 0.3, 1e-15));
    assert_eq!(clustering_weighted(&Matrix::zeros(4, 4)).unwrap(), 0.0);
    let full = clustering_binary_normalized(&k5, 10, 0).unwrap();
    assert_eq!(full.normalized, None);
    assert_eq!(clustering_binary_normalized(&Matrix::zeros(4, 4), 10, 0).unwrap().normalized, None);
}

#[test]
fn path_length_fixtures() {
    let k4 = Matrix::from_fn(4, 4, |i, j| if i != j { 1.0 } else { 0.0 });
    assert_eq!(path_length_binary(&k4, 5, 0).unwrap().value, Some(1.0));
    let path = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]);
    assert_eq!(path_length_binary(&path, 5, 0).unwrap().value, Some(4.0 / 3.0));
    let none = path_length_binary(&Matrix::zeros(3, 3), 5, 0).unwrap();
    assert_eq!((none.value, none.disconnected_pairs), (None, 6));
    let uniform = Matrix::from_fn(4, 4, |i, j| if i != j { 0.25 } else { 0.0 });
    assert_eq!(path_length_weighted(&uniform, 5, 0).unwrap().value, Some(4.0));
    let w = preprocess(&oracles::random_signed(5, 0.2, 9)).unwrap();
    let mut w2 = w.clone();
    w2.scale(2.0);
    let (a, b) = (mean_inverse_weight(&w).0.unwrap(), mean_inverse_weight(&w2).0.unwrap());
    assert!(close(b, a / 2.0, 1e-15));
    assert!(close(path_length_weighted(&w, 20, 1).unwrap().normalized.unwrap(), 1.0, 1e-12));
    assert_eq!(path_length_weighted(&Matrix::zeros(3, 3), 5, 0), Err(TopologyError::Undefined("weighted path length")));
}

#[test]
fn small_worldness_fixtures() {
    assert_eq!(small_worldness(1.0, 1.0).unwrap(), SmallWorld { sigma: 1.0, small_world: false });
    assert_eq!(small_worldness(2.0, 1.0).unwrap(), SmallWorld { sigma: 2.0, small_world: true });
    assert!(!small_worldness(2.0, 1.2).unwrap().small_world);
    assert!(small_worldness(1.0, 0.0).is_err());
}

/// Ring lattice with `k` neighbours per side, each edge rewired with
/// probability `p`.
fn watts_strogatz(n: usize, k: usize, p: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for s in 1..=k {
            let mut j = (i + s) % n;
            if rng.random::<f64>() < p {
                loop {
                    let c = rng.random_range(0..n);
                    if c != i && a[(i, c)] == 0.0 {
                        j = c;
                        break;
                    }
                }
            }
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
    }
    a
}

#[test]
fn rewired_lattice_is_more_small_world_than_random_graph() {
    let sigma = |a: &Matrix| {
        let g = clustering_binary_normalized(a, 30, 1).unwrap().normalized.unwrap();
        let l = path_length_binary(a, 30, 1).unwrap().normalized.unwrap();
        small_worldness(g, l).unwrap()
    };
    let lattice = sigma(&watts_strogatz(60, 3, 0.1, 0));
    let random = sigma(&watts_strogatz(60, 3, 1.0, 0));
    assert!(lattice.sigma > random.sigma, "{lattice:?} {random:?}");
    assert!(lattice.sigma > 1.5);
}

#[test]
fn wiring_efficiency_sorted_extremes_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.random_range(2..7);
        let mut vals: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..3.0)).collect();
        let mut delays: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..10.0)).collect();
        vals.sort_by(f64::total_cmp);
        delays.sort_by(f64::total_cmp);
        let perm: Vec<usize> = {
            let mut p: Vec<usize> = (0..n * n).collect();
            rand::seq::SliceRandom::shuffle(p.as_mut_slice(), &mut rng);
            p
        };
        let w = Matrix::from_vec(n, n, perm.iter().map(|&k| -vals[k]).collect());
        let co = Matrix::from_vec(n, n, perm.iter().map(|&k| delays[k]).collect());
        let anti = Matrix::from_vec(n, n, perm.iter().map(|&k| delays[n * n - 1 - k]).collect());
        assert_eq!(wiring_efficiency(&w, &co).unwrap().wire_norm, 0.0);
        assert_eq!(wiring_efficiency(&w, &anti).unwrap().wire_norm, 1.0);
    }
}

#[test]
fn entropy_fixtures() {
    for n in 1..40 {
        let w = Matrix::from_fn(n, 3, |_, j| 0.1 * (j + 1) as f64);
        assert_eq!(shannon_entropy(&w).unwrap(), (n as f64).log2());
    }
    let one_hot = Matrix::from_fn(5, 5, |i, j| if i == j { 2.0 } else { 0.0 });
    assert_eq!(shannon_entropy(&one_hot).unwrap(), 0.0);
    assert!(shannon_entropy(&Matrix::zeros(3, 3)).is_err());
}

#[test]
fn two_node_communicability_has_closed_form() {
    for w in [0.2, 1.0, 7.5] {
        let a = Matrix::from_rows(&[vec![0.0, w], vec![w, 0.0]]);
        let c = communicability(&a).unwrap();
        let (ch, sh) = (1f64.cosh(), 1f64.sinh());
        let expected = Matrix::from_rows(&[vec![ch, sh], vec![sh, ch]]);
        for (x, y) in c.matrix.as_slice().iter().zip(expected.as_slice()) {
            assert!(close(*x, *y, 1e-14));
        }
        let (p, q) = (ch / (ch + sh), sh / (ch + sh));
        assert!(close(c.entropy, -(p * p.log2() + q * q.log2()), 1e-14));
    }
}

#[test]
fn isolated_nodes_are_dropped_from_communicability() {
    let mut a = Matrix::zeros(4, 4);
    a[(0, 2)] = 1.0;
    a[(2, 0)] = 1.0;
    let c = communicability(&a).unwrap();
    assert_eq!(c.isolated_nodes, 2);
    assert_eq!(c.matrix.shape(), (2, 2));
}

#[test]
fn expm_matches_taylor_series() {
    for seed in 0..20 {
        let m = oracles::random_signed(5, 0.0, seed);
        let (x, y) = (expm(&m), oracles::taylor_expm(&m));
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            assert!(close(*a, *b, 1e-10), "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn report_serializes_flat_with_nulls() {
    let (a, _) = planted(&[4, 4], 0.0);
    let d = Matrix::from_fn(8, 8, |i, j| (i as f64 - j as f64).abs());
    let r = analyze(&a, Some(&d), &AnalysisOptions { mode: GraphMode::Binary, n_null: 10, seed: 3 }).unwrap();
    assert_eq!(r.Q, Some(0.5));
    assert_eq!(r.n_modules, 2);
    assert_eq!(r.disconnected_pairs, Some(32));
    let json: serde_json::Value = serde_json::to_value(&r).unwrap();
    assert!(json.as_object().unwrap().values().all(|v| !v.is_object() && !v.is_array()));
    assert_eq!(json["mode"], "binary");
}

fn permuted(w: &Matrix, perm: &[usize]) -> Matrix {
    Matrix::from_fn(w.rows(), w.cols(), |i, j| w[(perm[i], perm[j])])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn wire_norm_is_a_fraction(n in 1usize..7, seed in any::<u64>()) {
        let w = oracles::random_signed(n, 0.3, seed);
        let d = oracles::random_signed(n, 0.1, seed ^ 1).abs();
        let e = wiring_efficiency(&w, &d).unwrap();
        prop_assert!((0.0..=1.0).contains(&e.wire_norm));
    }

    #[test]
    fn column_entropy_is_bounded(n in 1usize..9, seed in any::<u64>()) {
        let w = oracles::random_signed(n, 0.5, seed);
        if let Ok(h) = shannon_entropy(&w) {
            prop_assert!(h >= 0.0 && h <= (n as f64).log2());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn metrics_are_permutation_invariant(n in 2usize..8, seed in any::<u64>()) {
        let w = oracles::random_signed(n, 0.3, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let d = oracles::random_signed(n, 0.0, seed ^ 7).abs();
        let opts = AnalysisOptions { mode: GraphMode::Binary, n_null: 8, seed: 1 };
        let (Ok(x), Ok(y)) = (analyze(&w, Some(&d), &opts), analyze(&permuted(&w, &perm), Some(&permuted(&d, &perm)), &opts)) else {
            return Ok(());
        };
        let pairs = [(x.Q, y.Q), (x.C, y.C), (x.L, y.L), (Some(x.C_w), Some(y.C_w)), (x.L_w, y.L_w), (x.wire_norm, y.wire_norm), (x.H, y.H), (Some(x.H_comm), Some(y.H_comm)), (x.Gamma, y.Gamma), (x.Lambda, y.Lambda)];
        for (a, b) in pairs {
            prop_assert_eq!(a.is_some(), b.is_some());
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!(close(a, b, 1e-10), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn modularity_ignores_module_names(n in 2usize..9, seed in any::<u64>(), shift in 1usize..5) {
        let a = preprocess(&oracles::random_signed(n, 0.3, seed)).unwrap();
        prop_assume!(a.sum() > 0.0);
        let labels: Vec<usize> = (0..n).map(|i| (i * 5 + seed as usize) % 3).collect();
        let renamed: Vec<usize> = labels.iter().map(|&l| (l + shift) * 11).collect();
        let q1 = modularity(&a, &Partition::from_labels(&labels)).unwrap();
        let q2 = oracles::modularity(&a, &renamed);
        prop_assert!(close(q1, q2, 1e-12));
        let best = modularity(&a, &find_partition(&a, seed).unwrap()).unwrap();
        prop_assert!(modularity(&a, &Partition::singletons(n)).unwrap() <= best + 1e-15);
    }

    #[test]
    fn partition_is_equivariant_under_relabeling(n in 2usize..9, seed in any::<u64>()) {
        let a = preprocess(&oracles::random_signed(n, 0.2, seed)).unwrap();
        prop_assume!(a.sum() > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let p = find_partition(&a, 0).unwrap();
        let pp = find_partition(&permuted(&a, &perm), 0).unwrap();
        let mapped: Vec<usize> = perm.iter().map(|&k| p.labels()[k]).collect();
        prop_assert_eq!(Partition::from_labels(&mapped), pp);
    }
}
