//! Graph measurements of recurrent connectivity.
//!
//! Signed, directed weight matrices are first mapped to nonnegative symmetric
//! adjacency by [`preprocess`]: `a_ij = (|w_ij| + |w_ji|) / 2` with the diagonal
//! removed. Modularity, clustering, path length and communicability all act on
//! that adjacency. Wiring efficiency and Shannon entropy act on `|W|`
//! elementwise. Null models are drawn per sample from a ChaCha stream indexed
//! by the sample number, so results do not depend on the thread count.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

/// Graphs up to this many nodes are partitioned by exhaustive search.
pub const EXACT_PARTITION_LIMIT: usize = 10;
pub const DEFAULT_NULL_SAMPLES: usize = 100;
/// Half-width of the band around 1 within which Lambda counts as unchanged.
pub const SMALL_WORLD_LAMBDA_BAND: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("expected a square matrix, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrices have different shapes")]
    ShapeMismatch,
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("{0} is undefined for this input")]
    Undefined(&'static str),
    #[error("partition covers {0} nodes but the graph has {1}")]
    PartitionSize(usize, usize),
}

fn square(w: &Matrix) -> Result<usize, TopologyError> {
    if w.is_square() {
        Ok(w.rows())
    } else {
        Err(TopologyError::NotSquare(w.rows(), w.cols()))
    }
}

/// `(|W| + |W|ᵀ) / 2` with a zero diagonal.
pub fn preprocess(w: &Matrix) -> Result<Matrix, TopologyError> {
    let n = square(w)?;
    Ok(Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 0.5 * (w[(i, j)].abs() + w[(j, i)].abs()) }))
}

/// Unit weights on the nonzero entries of `a`, diagonal excluded.
pub fn binarize(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| if i != j && a[(i, j)] != 0.0 { 1.0 } else { 0.0 })
}

fn null_rng(seed: u64, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample as u64);
    rng
}

/// Mean of `stat` over `n_null` null graphs, skipping samples where it is
/// undefined. `None` when every sample is undefined.
fn null_mean(n_null: usize, seed: u64, draw: impl Fn(&mut ChaCha8Rng) -> Matrix + Sync, stat: impl Fn(&Matrix) -> Option<f64> + Sync) -> Option<f64> {
    let values: Vec<Option<f64>> = (0..n_null).into_par_iter().map(|s| stat(&draw(&mut null_rng(seed, s)))).collect();
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

fn ratio(x: Option<f64>, null: Option<f64>) -> Option<f64> {
    match (x, null) {
        (Some(x), Some(m)) if m != 0.0 => Some(x / m),
        _ => None,
    }
}

/// Erdős–Rényi G(n, m) graph with the same number of undirected edges as `a`.
pub fn random_same_density(a: &Matrix, rng: &mut ChaCha8Rng) -> Matrix {
    let n = a.rows();
    let m = edge_count(a);
    let pairs = n * n.saturating_sub(1) / 2;
    let mut out = Matrix::zeros(n, n);
    for p in rand::seq::index::sample(rng, pairs, m).into_iter() {
        let (i, j) = pair_index(p, n);
        out[(i, j)] = 1.0;
        out[(j, i)] = 1.0;
    }
    out
}

/// Symmetric matrix whose upper-triangle entries are a random permutation of
/// those of `a`. The entries are sorted before shuffling so the draw depends
/// only on their multiset.
pub fn permute_weights(a: &Matrix, rng: &mut ChaCha8Rng) -> Matrix {
    let n = a.rows();
    let mut values: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect();
    values.sort_by(f64::total_cmp);
    values.shuffle(rng);
    let mut out = Matrix::zeros(n, n);
    for (p, v) in values.into_iter().enumerate() {
        let (i, j) = pair_index(p, n);
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    out
}

/// Maps `p` in `0..n(n-1)/2` to the `p`-th pair `i < j` in row-major order.
fn pair_index(mut p: usize, n: usize) -> (usize, usize) {
    for i in 0..n {
        let len = n - 1 - i;
        if p < len {
            return (i, i + 1 + p);
        }
        p -= len;
    }
    unreachable!("pair index out of range")
}

fn edge_count(a: &Matrix) -> usize {
    let n = a.rows();
    (0..n).map(|i| (i + 1..n).filter(|&j| a[(i, j)] != 0.0).count()).sum()
}

/// Edge density of the undirected support of `a`.
pub fn density(a: &Matrix) -> f64 {
    let n = a.rows();
    if n < 2 {
        return 0.0;
    }
    edge_count(a) as f64 / (n * (n - 1) / 2) as f64
}

// ---------------------------------------------------------------------------
// Modularity

/// Module index per node, numbered contiguously from 0 in order of first
/// appearance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition(Vec<usize>);

impl Partition {
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        Self(
            labels
                .iter()
                .map(|&l| {
                    let next = map.len();
                    *map.entry(l).or_insert(next)
                })
                .collect(),
        )
    }

    pub fn singletons(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_modules(&self) -> usize {
        self.0.iter().max().map_or(0, |m| m + 1)
    }
}

/// `Q = (1/l) Σ_ij (a_ij − k_i k_j / l) δ(m_i, m_j)` on an already
/// preprocessed adjacency.
pub fn modularity(a: &Matrix, partition: &Partition) -> Result<f64, TopologyError> {
    let n = square(a)?;
    if partition.len() != n {
        return Err(TopologyError::PartitionSize(partition.len(), n));
    }
    let l = a.sum();
    if l <= 0.0 {
        return Err(TopologyError::EmptyGraph);
    }
    let k: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    Ok(modularity_with(a, &k, l, partition.labels(), partition.n_modules()))
}

fn modularity_with(a: &Matrix, k: &[f64], l: f64, labels: &[usize], n_modules: usize) -> f64 {
    let n = labels.len();
    let mut inner = vec![0.0; n_modules];
    let mut tot = vec![0.0; n_modules];
    for i in 0..n {
        tot[labels[i]] += k[i];
        let row = a.row(i);
        for j in 0..n {
            if labels[i] == labels[j] {
                inner[labels[i]] += row[j];
            }
        }
    }
    inner.iter().zip(&tot).map(|(&e, &t)| e - t * t / l).sum::<f64>() / l
}

/// Louvain modularity maximisation: local moving in a seeded random node
/// order, then aggregation of modules into nodes, repeated until a level
/// produces no move.
pub fn louvain(a: &Matrix, seed: u64) -> Result<Partition, TopologyError> {
    let n = square(a)?;
    let l = a.sum();
    if l <= 0.0 {
        return Ok(Partition::singletons(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut membership: Vec<usize> = (0..n).collect();
    let mut g = a.clone();
    loop {
        let (local, moved) = local_moving(&g, l, &mut rng);
        if !moved {
            break;
        }
        let local = Partition::from_labels(&local);
        let count = local.n_modules();
        for m in membership.iter_mut() {
            *m = local.labels()[*m];
        }
        let mut next = Matrix::zeros(count, count);
        for i in 0..g.rows() {
            for j in 0..g.rows() {
                next[(local.labels()[i], local.labels()[j])] += g[(i, j)];
            }
        }
        g = next;
        if count == 1 {
            break;
        }
    }
    Ok(Partition::from_labels(&membership))
}

fn local_moving(g: &Matrix, l: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = g.rows();
    let k: Vec<f64> = (0..n).map(|i| g.row(i).iter().sum()).collect();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot = k.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut moved_any = false;
    let mut links = vec![0.0; n];
    loop {
        let mut moved = false;
        for &i in &order {
            let own = comm[i];
            links.iter_mut().for_each(|x| *x = 0.0);
            for j in 0..n {
                if j != i {
                    links[comm[j]] += g[(i, j)];
                }
            }
            tot[own] -= k[i];
            let gain = |c: usize| links[c] - tot[c] * k[i] / l;
            let mut best = own;
            let mut best_gain = gain(own);
            for c in 0..n {
                if c != own && links[c] > 0.0 {
                    let gc = gain(c);
                    if gc > best_gain + 1e-12 * l {
                        best = c;
                        best_gain = gc;
                    }
                }
            }
            tot[best] += k[i];
            if best != own {
                comm[i] = best;
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            return (comm, moved_any);
        }
    }
}

/// Highest-modularity partition over all set partitions of the nodes, the
/// first in enumeration order among ties.
pub fn exhaustive_partition(a: &Matrix) -> Result<(Partition, f64), TopologyError> {
    let n = square(a)?;
    let l = a.sum();
    if l <= 0.0 {
        return Err(TopologyError::EmptyGraph);
    }
    let k: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    let mut labels = vec![0usize; n];
    let mut best = (labels.clone(), f64::NEG_INFINITY);
    fn rec(pos: usize, max: usize, labels: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize], usize)) {
        if pos == labels.len() {
            visit(labels, max + 1);
            return;
        }
        for c in 0..=(max + 1).min(pos) {
            labels[pos] = c;
            rec(pos + 1, max.max(c), labels, visit);
        }
    }
    if n == 0 {
        return Ok((Partition::singletons(0), 0.0));
    }
    rec(1, 0, &mut labels, &mut |lab, count| {
        let q = modularity_with(a, &k, l, lab, count);
        if q > best.1 {
            best = (lab.to_vec(), q);
        }
    });
    Ok((Partition(best.0), best.1))
}

/// Modularity-maximising partition: exhaustive search up to
/// [`EXACT_PARTITION_LIMIT`] nodes, Louvain above.
pub fn find_partition(a: &Matrix, seed: u64) -> Result<Partition, TopologyError> {
    let n = square(a)?;
    if a.sum() <= 0.0 {
        return Ok(Partition::singletons(n));
    }
    if n <= EXACT_PARTITION_LIMIT {
        Ok(exhaustive_partition(a)?.0)
    } else {
        louvain(a, seed)
    }
}

// ---------------------------------------------------------------------------
// Clustering and path length

/// Mean over nodes of the fraction of neighbour pairs that are linked.
/// Nodes of degree below 2 contribute 0.
pub fn clustering_binary(a: &Matrix) -> Result<f64, TopologyError> {
    let n = square(a)?;
    if n == 0 {
        return Err(TopologyError::Undefined("clustering"));
    }
    let b = binarize(a);
    let mut total = 0.0;
    for i in 0..n {
        let nb: Vec<usize> = (0..n).filter(|&j| b[(i, j)] != 0.0).collect();
        let deg = nb.len();
        if deg < 2 {
            continue;
        }
        let mut tri = 0usize;
        for (x, &j) in nb.iter().enumerate() {
            tri += nb[x + 1..].iter().filter(|&&k| b[(j, k)] != 0.0).count();
        }
        total += 2.0 * tri as f64 / (deg * (deg - 1)) as f64;
    }
    Ok(total / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMetric {
    pub value: f64,
    /// `value` over its mean across null graphs; absent when undefined.
    pub normalized: Option<f64>,
}

/// Binary clustering normalised by G(n, m) graphs of the same density.
/// The ratio is undefined at density 0 or 1.
pub fn clustering_binary_normalized(a: &Matrix, n_null: usize, seed: u64) -> Result<NormalizedMetric, TopologyError> {
    let value = clustering_binary(a)?;
    let dens = density(a);
    let normalized = if dens == 0.0 || dens == 1.0 {
        None
    } else {
        let b = binarize(a);
        ratio(Some(value), null_mean(n_null, seed, |r| random_same_density(&b, r), |g| clustering_binary(g).ok()))
    };
    Ok(NormalizedMetric { value, normalized })
}

/// `C_w,i = Σ_jk (w_ij w_jk w_ik)^{1/3} / (k_i (k_i − 1))`, averaged over
/// nodes, with `k_i` the degree on the support of `a`.
pub fn clustering_weighted(a: &Matrix) -> Result<f64, TopologyError> {
    let n = square(a)?;
    if n == 0 {
        return Err(TopologyError::Undefined("weighted clustering"));
    }
    let cube = a.map(f64::cbrt);
    let mut total = 0.0;
    for i in 0..n {
        let nb: Vec<usize> = (0..n).filter(|&j| j != i && a[(i, j)] != 0.0).collect();
        let deg = nb.len();
        if deg < 2 {
            continue;
        }
        let mut s = 0.0;
        for &j in &nb {
            for &k in &nb {
                s += cube[(i, j)] * cube[(j, k)] * cube[(i, k)];
            }
        }
        total += s / (deg * (deg - 1)) as f64;
    }
    Ok(total / n as f64)
}

pub fn clustering_weighted_normalized(a: &Matrix, n_null: usize, seed: u64) -> Result<NormalizedMetric, TopologyError> {
    let value = clustering_weighted(a)?;
    let normalized = ratio(Some(value), null_mean(n_null, seed, |r| permute_weights(a, r), |g| clustering_weighted(g).ok()));
    Ok(NormalizedMetric { value, normalized })
}

/// Hop distances from `src` by breadth-first search; `usize::MAX` when
/// unreachable.
fn bfs(b: &Matrix, src: usize) -> Vec<usize> {
    let n = b.rows();
    let mut dist = vec![usize::MAX; n];
    dist[src] = 0;
    let mut queue = std::collections::VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if b[(u, v)] != 0.0 && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLength {
    /// Mean hop distance over connected ordered pairs.
    pub value: Option<f64>,
    pub normalized: Option<f64>,
    /// Ordered pairs `i != j` with no path, excluded from the mean.
    pub disconnected_pairs: usize,
}

fn mean_hops(a: &Matrix) -> (Option<f64>, usize) {
    let n = a.rows();
    let b = binarize(a);
    let mut sum = 0usize;
    let mut count = 0usize;
    let mut missing = 0usize;
    for i in 0..n {
        for (j, &d) in bfs(&b, i).iter().enumerate() {
            if j == i {
                continue;
            }
            if d == usize::MAX {
                missing += 1;
            } else {
                sum += d;
                count += 1;
            }
        }
    }
    ((count > 0).then(|| sum as f64 / count as f64), missing)
}

/// Characteristic path length on the binary support, normalised by G(n, m)
/// graphs of the same density.
pub fn path_length_binary(a: &Matrix, n_null: usize, seed: u64) -> Result<PathLength, TopologyError> {
    square(a)?;
    let (value, disconnected_pairs) = mean_hops(a);
    let normalized = if value.is_some() {
        let b = binarize(a);
        ratio(value, null_mean(n_null, seed, |r| random_same_density(&b, r), |g| mean_hops(g).0))
    } else {
        None
    };
    Ok(PathLength { value, normalized, disconnected_pairs })
}

/// Mean of `1 / a_ij` over ordered pairs `i != j` with nonzero weight.
/// Zero-weight pairs are excluded and counted.
pub fn mean_inverse_weight(a: &Matrix) -> (Option<f64>, usize) {
    let n = a.rows();
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut zeros = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if a[(i, j)] != 0.0 {
                sum += 1.0 / a[(i, j)];
                count += 1;
            } else {
                zeros += 1;
            }
        }
    }
    ((count > 0).then(|| sum / count as f64), zeros)
}

/// Weighted path length as the mean inverse weight, normalised by weight
/// permutations. The mean depends only on the multiset of weights, so the
/// normalised value equals 1 up to rounding.
pub fn path_length_weighted(a: &Matrix, n_null: usize, seed: u64) -> Result<PathLength, TopologyError> {
    square(a)?;
    let (value, zero_pairs) = mean_inverse_weight(a);
    if value.is_none() {
        return Err(TopologyError::Undefined("weighted path length"));
    }
    let normalized = ratio(value, null_mean(n_null, seed, |r| permute_weights(a, r), |g| mean_inverse_weight(g).0));
    Ok(PathLength { value, normalized, disconnected_pairs: zero_pairs })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallWorld {
    pub sigma: f64,
    /// `sigma > 1`, `gamma > 1` and `|lambda − 1| <= SMALL_WORLD_LAMBDA_BAND`.
    pub small_world: bool,
}

pub fn small_worldness(gamma: f64, lambda: f64) -> Result<SmallWorld, TopologyError> {
    if lambda == 0.0 || !lambda.is_finite() || !gamma.is_finite() {
        return Err(TopologyError::Undefined("small-worldness"));
    }
    let sigma = gamma / lambda;
    Ok(SmallWorld { sigma, small_world: sigma > 1.0 && gamma > 1.0 && (lambda - 1.0).abs() <= SMALL_WORLD_LAMBDA_BAND })
}

// ---------------------------------------------------------------------------
// Wiring efficiency and entropy

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WiringEfficiency {
    /// 1 when the strongest weights sit on the shortest delays, 0 when they
    /// sit on the longest. Always in `[0, 1]`.
    pub wire_norm: f64,
    pub wire: f64,
    pub wire_min: f64,
    pub wire_max: f64,
    /// Set when `wire_min == wire_max`; `wire_norm` is then 1.
    pub degenerate: bool,
}

/// Compares `Σ |w_ij| d_ij` against its minimum and maximum over all
/// re-pairings of the same values.
pub fn wiring_efficiency(w: &Matrix, d: &Matrix) -> Result<WiringEfficiency, TopologyError> {
    if w.shape() != d.shape() {
        return Err(TopologyError::ShapeMismatch);
    }
    let ws: Vec<f64> = w.as_slice().iter().map(|x| x.abs()).collect();
    let ds = d.as_slice();
    // All three sums run over |w| in descending order, ties broken by
    // descending delay, so a co-sorted input reproduces wire_max term by term.
    let mut order: Vec<usize> = (0..ws.len()).collect();
    order.sort_by(|&a, &b| ws[b].total_cmp(&ws[a]).then(ds[b].total_cmp(&ds[a])));
    let mut d_desc = ds.to_vec();
    d_desc.sort_by(|a, b| b.total_cmp(a));
    let mut wire = 0.0;
    let mut wire_max = 0.0;
    let mut wire_min = 0.0;
    let m = ws.len();
    for (r, &idx) in order.iter().enumerate() {
        wire += ws[idx] * ds[idx];
        wire_max += ws[idx] * d_desc[r];
        wire_min += ws[idx] * d_desc[m - 1 - r];
    }
    if wire_max <= wire_min {
        return Ok(WiringEfficiency { wire_norm: 1.0, wire, wire_min, wire_max, degenerate: true });
    }
    let wire_norm = if wire >= wire_max {
        0.0
    } else if wire <= wire_min {
        1.0
    } else {
        (1.0 - (wire - wire_min) / (wire_max - wire_min)).clamp(0.0, 1.0)
    };
    Ok(WiringEfficiency { wire_norm, wire, wire_min, wire_max, degenerate: false })
}

/// Mean over target columns of the entropy (bits) of the normalised incoming
/// absolute weights. Columns with zero in-strength are skipped.
pub fn shannon_entropy(w: &Matrix) -> Result<f64, TopologyError> {
    let (rows, cols) = w.shape();
    let cap = (rows as f64).log2();
    // Running mean, so identical columns give exactly their common value.
    let mut mean = 0.0;
    let mut used = 0usize;
    for j in 0..cols {
        let col: Vec<f64> = w.column(j).iter().map(|x| x.abs()).collect();
        let top = col.iter().cloned().fold(0.0, f64::max);
        if top == 0.0 {
            continue;
        }
        // With u = |w| / max and S = Σu, H = log2 S − Σ u log2 u / S; equal
        // entries give u = 1 and H = log2 N without rounding.
        let u: Vec<f64> = col.iter().map(|x| x / top).collect();
        let s: f64 = u.iter().sum();
        let plogp: f64 = u.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum();
        used += 1;
        mean += ((s.log2() - plogp / s).clamp(0.0, cap) - mean) / used as f64;
    }
    if used == 0 {
        return Err(TopologyError::Undefined("Shannon entropy"));
    }
    Ok(mean)
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm(m: &Matrix) -> Matrix {
    Matrix::from_nalgebra(&m.to_nalgebra().exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Communicability {
    /// `exp(S^{-1/2} A S^{-1/2})` over the non-isolated nodes.
    pub matrix: Matrix,
    pub entropy: f64,
    /// Zero-strength nodes dropped before the exponential.
    pub isolated_nodes: usize,
}

/// Strength-normalised communicability of a preprocessed adjacency and the
/// Shannon entropy of its columns. An edgeless graph gives the identity and
/// entropy 0.
pub fn communicability(a: &Matrix) -> Result<Communicability, TopologyError> {
    let n = square(a)?;
    let strength: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    let keep: Vec<usize> = (0..n).filter(|&i| strength[i] > 0.0).collect();
    if keep.is_empty() {
        return Ok(Communicability { matrix: Matrix::identity(n), entropy: 0.0, isolated_nodes: n });
    }
    let inv_sqrt: Vec<f64> = keep.iter().map(|&i| strength[i].sqrt().recip()).collect();
    let m = keep.len();
    let scaled = Matrix::from_fn(m, m, |x, y| inv_sqrt[x] * a[(keep[x], keep[y])] * inv_sqrt[y]);
    let matrix = expm(&scaled);
    let entropy = shannon_entropy(&matrix)?;
    Ok(Communicability { matrix, entropy, isolated_nodes: n - m })
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    #[default]
    Weighted,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub mode: GraphMode,
    pub n_null: usize,
    pub seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { mode: GraphMode::Weighted, n_null: DEFAULT_NULL_SAMPLES, seed: 0 }
    }
}

/// Flat record of every metric. Undefined values serialise as `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct TopologyReport {
    pub mode: GraphMode,
    pub n_null: usize,
    pub seed: u64,
    pub n_nodes: usize,
    pub density: f64,
    pub n_modules: usize,
    pub Q: Option<f64>,
    /// Clustering ratio to the null model: binary in binary mode, weighted otherwise.
    pub Gamma: Option<f64>,
    /// Path-length ratio to the null model, chosen like `Gamma`.
    pub Lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub small_world: bool,
    pub C: Option<f64>,
    pub L: Option<f64>,
    pub disconnected_pairs: Option<usize>,
    pub C_w: f64,
    pub L_w: Option<f64>,
    pub wire_norm: Option<f64>,
    pub wire_degenerate: Option<bool>,
    pub H: Option<f64>,
    pub H_comm: f64,
    pub isolated_nodes: usize,
}

/// Every metric for a recurrent weight matrix and, optionally, its delays.
pub fn analyze(w: &Matrix, delays: Option<&Matrix>, opts: &AnalysisOptions) -> Result<TopologyReport, TopologyError> {
    let n = square(w)?;
    let a = preprocess(w)?;
    let graph = match opts.mode {
        GraphMode::Weighted => a.clone(),
        GraphMode::Binary => binarize(&a),
    };
    let partition = find_partition(&graph, opts.seed)?;
    let q = modularity(&graph, &partition).ok();
    let cw = clustering_weighted_normalized(&a, opts.n_null, opts.seed)?;
    let lw = if a.sum() > 0.0 { Some(path_length_weighted(&a, opts.n_null, opts.seed)?) } else { None };
    let (c, l, disconnected, gamma, lambda) = match opts.mode {
        GraphMode::Weighted => (None, None, None, cw.normalized, lw.and_then(|p| p.normalized)),
        GraphMode::Binary => {
            let c = clustering_binary_normalized(&a, opts.n_null, opts.seed)?;
            let p = path_length_binary(&a, opts.n_null, opts.seed)?;
            (Some(c.value), p.value, Some(p.disconnected_pairs), c.normalized, p.normalized)
        }
    };
    let sw = match (gamma, lambda) {
        (Some(g), Some(l)) => small_worldness(g, l).ok(),
        _ => None,
    };
    let wire = delays.map(|d| wiring_efficiency(w, d)).transpose()?;
    let comm = communicability(&a)?;
    Ok(TopologyReport {
        mode: opts.mode,
        n_null: opts.n_null,
        seed: opts.seed,
        n_nodes: n,
        density: density(&a),
        n_modules: partition.n_modules(),
        Q: q,
        Gamma: gamma,
        Lambda: lambda,
        sigma: sw.map(|s| s.sigma),
        small_world: sw.is_some_and(|s| s.small_world),
        C: c,
        L: l,
        disconnected_pairs: disconnected,
        C_w: cw.value,
        L_w: lw.and_then(|p| p.value),
        wire_norm: wire.map(|x| x.wire_norm),
        wire_degenerate: wire.map(|x| x.degenerate),
        H: shannon_entropy(w).ok(),
        H_comm: comm.entropy,
        isolated_nodes: comm.isolated_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cliques() -> Matrix {
        Matrix::from_fn(8, 8, |i, j| if i != j && i / 4 == j / 4 { 1.0 } else { 0.0 })
    }

    #[test]
    fn one_module_has_zero_modularity() {
        let a = preprocess(&Matrix::from_fn(5, 5, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0)).unwrap();
        let q = modularity(&a, &Partition::from_labels(&[0; 5])).unwrap();
        assert!(q.abs() < 1e-15);
    }

    #[test]
    fn planted_cliques_are_recovered() {
        let a = two_cliques();
        let p = find_partition(&a, 0).unwrap();
        assert_eq!(p.labels(), &[0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(modularity(&a, &p).unwrap(), 0.5);
        assert_eq!(louvain(&a, 3).unwrap(), p);
    }

    #[test]
    fn partition_labels_are_contiguous() {
        assert_eq!(Partition::from_labels(&[7, 7, 2, 9, 2]).labels(), &[0, 0, 1, 2, 1]);
    }

    #[test]
    fn pair_index_enumerates_upper_triangle() {
        let pairs: Vec<_> = (0..6).map(|p| pair_index(p, 4)).collect();
        assert_eq!(pairs, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn null_draws_preserve_edges_and_weights() {
        let a = preprocess(&Matrix::from_fn(6, 6, |i, j| if (i + j) % 3 == 0 { (i + 2 * j) as f64 } else { 0.0 })).unwrap();
        let mut rng = null_rng(1, 0);
        assert_eq!(edge_count(&random_same_density(&a, &mut rng)), edge_count(&a));
        let p = permute_weights(&a, &mut rng);
        assert_eq!(p, p.transpose());
        let mut x: Vec<f64> = a.as_slice().to_vec();
        let mut y: Vec<f64> = p.as_slice().to_vec();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        assert_eq!(x, y);
    }

    #[test]
    fn degenerate_wiring_is_flagged() {
        let w = Matrix::filled(3, 3, 2.0);
        let d = Matrix::from_fn(3, 3, |i, j| (i + j) as f64);
        let e = wiring_efficiency(&w, &d).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.wire_norm, 1.0);
    }

    #[test]
    fn edgeless_communicability_is_identity() {
        let c = communicability(&Matrix::zeros(1, 1)).unwrap();
        assert_eq!(c.matrix, Matrix::identity(1));
        assert_eq!(c.entropy, 0.0);
    }
}
