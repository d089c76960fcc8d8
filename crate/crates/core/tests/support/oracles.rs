//! Brute-force reference implementations of the graph metrics, written
//! directly from their defining sums and independent of the library code.
#![allow(dead_code)]

use posdelay::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random signed directed matrix with roughly `p_zero` of its entries zero.
pub fn random_signed(n: usize, p_zero: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(n, n, |_, _| if rng.random::<f64>() < p_zero { 0.0 } else { rng.random_range(-2.0..2.0) })
}

pub fn symmetrize(w: &Matrix) -> Matrix {
    let n = w.rows();
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[(i, j)] = (w[(i, j)].abs() + w[(j, i)].abs()) / 2.0;
            }
        }
    }
    a
}

pub fn modularity(a: &Matrix, labels: &[usize]) -> f64 {
    let n = a.rows();
    let l: f64 = a.as_slice().iter().sum();
    let k: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).sum()).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[(i, j)] - k[i] * k[j] / l;
            }
        }
    }
    q / l
}

/// Best modularity over all set partitions, built by placing each node into
/// an existing block or a new one.
pub fn best_modularity(a: &Matrix) -> f64 {
    fn go(node: usize, blocks: &mut Vec<Vec<usize>>, a: &Matrix, best: &mut f64) {
        let n = a.rows();
        if node == n {
            let mut labels = vec![0; n];
            for (b, members) in blocks.iter().enumerate() {
                for &m in members {
                    labels[m] = b;
                }
            }
            *best = best.max(modularity(a, &labels));
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(node);
            go(node + 1, blocks, a, best);
            blocks[b].pop();
        }
        blocks.push(vec![node]);
        go(node + 1, blocks, a, best);
        blocks.pop();
    }
    let mut best = f64::NEG_INFINITY;
    go(0, &mut Vec::new(), a, &mut best);
    best
}

pub fn clustering(a: &Matrix) -> f64 {
    let n = a.rows();
    let e = |i: usize, j: usize| i != j && a[(i, j)] != 0.0;
    let mut total = 0.0;
    for i in 0..n {
        let deg = (0..n).filter(|&j| e(i, j)).count();
        if deg < 2 {
            continue;
        }
        let mut tri = 0;
        for j in 0..n {
            for k in 0..n {
                if j < k && e(i, j) && e(i, k) && e(j, k) {
                    tri += 1;
                }
            }
        }
        total += tri as f64 / (deg * (deg - 1) / 2) as f64;
    }
    total / n as f64
}

pub fn weighted_clustering(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut total = 0.0;
    for i in 0..n {
        let deg = (0..n).filter(|&j| j != i && a[(i, j)] != 0.0).count();
        if deg < 2 {
            continue;
        }
        let mut s = 0.0;
        for j in 0..n {
            for k in 0..n {
                s += (a[(i, j)] * a[(j, k)] * a[(i, k)]).powf(1.0 / 3.0);
            }
        }
        total += s / (deg * (deg - 1)) as f64;
    }
    total / n as f64
}

/// Mean all-pairs hop distance by Floyd–Warshall, with the number of
/// unreachable ordered pairs.
pub fn floyd_path_length(a: &Matrix) -> (Option<f64>, usize) {
    let n = a.rows();
    let inf = f64::INFINITY;
    let mut d = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else if a[(i, j)] != 0.0 { 1.0 } else { inf });
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[(i, k)] + d[(k, j)] < d[(i, j)] {
                    d[(i, j)] = d[(i, k)] + d[(k, j)];
                }
            }
        }
    }
    let (mut sum, mut count, mut missing) = (0.0, 0, 0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                if d[(i, j)].is_finite() {
                    sum += d[(i, j)];
                    count += 1;
                } else {
                    missing += 1;
                }
            }
        }
    }
    ((count > 0).then(|| sum / count as f64), missing)
}

pub fn inverse_weight_mean(a: &Matrix) -> Option<f64> {
    let n = a.rows();
    let inv: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| i != j && a[(i, j)] != 0.0).map(|(i, j)| 1.0 / a[(i, j)]).collect();
    (!inv.is_empty()).then(|| inv.iter().sum::<f64>() / inv.len() as f64)
}

/// Wiring efficiency from sorted dot products: the maximum pairs ascending
/// |w| with ascending d, the minimum pairs ascending |w| with descending d.
pub fn wire_norm(w: &Matrix, d: &Matrix) -> f64 {
    let mut ws: Vec<f64> = w.as_slice().iter().map(|x| x.abs()).collect();
    let mut ds: Vec<f64> = d.as_slice().to_vec();
    let wire: f64 = ws.iter().zip(&ds).map(|(a, b)| a * b).sum();
    ws.sort_by(f64::total_cmp);
    ds.sort_by(f64::total_cmp);
    let hi: f64 = ws.iter().zip(&ds).map(|(a, b)| a * b).sum();
    let lo: f64 = ws.iter().zip(ds.iter().rev()).map(|(a, b)| a * b).sum();
    if hi == lo {
        return 1.0;
    }
    (1.0 - (wire - lo) / (hi - lo)).clamp(0.0, 1.0)
}

pub fn entropy(w: &Matrix) -> f64 {
    let (r, c) = w.shape();
    let mut hs = Vec::new();
    for j in 0..c {
        let s: f64 = (0..r).map(|i| w[(i, j)].abs()).sum();
        if s == 0.0 {
            continue;
        }
        let mut h = 0.0;
        for i in 0..r {
            let p = w[(i, j)].abs() / s;
            if p > 0.0 {
                h -= p * p.log2();
            }
        }
        hs.push(h);
    }
    hs.iter().sum::<f64>() / hs.len() as f64
}

/// `exp(M)` as `(Σ_k (M/2^s)^k / k!)^(2^s)` with enough terms to converge.
pub fn taylor_expm(m: &Matrix) -> Matrix {
    let n = m.rows();
    let norm = m.as_slice().iter().map(|x| x.abs()).sum::<f64>();
    let s = norm.log2().ceil().max(0.0) as i32 + 1;
    let mut x = m.clone();
    x.scale(0.5f64.powi(s));
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..40 {
        term = term.matmul(&x);
        term.scale(1.0 / k as f64);
        sum.add_scaled(&term, 1.0);
    }
    for _ in 0..s {
        sum = sum.matmul(&sum);
    }
    sum
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
