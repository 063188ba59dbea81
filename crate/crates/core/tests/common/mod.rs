#![allow(dead_code)]

use proxsdca::{Dataset, SparseVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Dense Gaussian rows scaled to unit l2 norm, and a Gaussian truth vector.
pub fn unit_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<SparseVec>, Vec<f64>) {
    let truth: Vec<f64> = (0..d).map(|_| gaussian(rng)).collect();
    let rows = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| gaussian(rng)).collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            SparseVec::from_dense(&x.iter().map(|v| v / norm).collect::<Vec<_>>()).unwrap()
        })
        .collect();
    (rows, truth)
}

/// Binary labels from a linear rule with `flip` label noise; rows have unit norm.
pub fn binary(seed: u64, n: usize, d: usize, flip: f64) -> Dataset {
    let mut rng = rng(seed);
    let (rows, truth) = unit_rows(&mut rng, n, d);
    let labels = rows
        .iter()
        .map(|x| {
            let y = sign(x.dot(&truth));
            if rng.random::<f64>() < flip {
                -y
            } else {
                y
            }
        })
        .collect();
    Dataset::from_rows(rows, labels).unwrap()
}

/// Real targets `x^T w + noise` with targets scaled into `[-1, 1]`, so the
/// squared loss at zero averages at most 1/2.
pub fn regression(seed: u64, n: usize, d: usize) -> Dataset {
    let mut rng = rng(seed);
    let (rows, truth) = unit_rows(&mut rng, n, d);
    let norm = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    let labels = rows
        .iter()
        .map(|x| (x.dot(&truth) / norm + 0.1 * gaussian(&mut rng)).clamp(-1.0, 1.0))
        .collect();
    Dataset::from_rows(rows, labels).unwrap()
}

/// Sparse Gaussian rows with the given density, labels from a sparse truth
/// with `nonzeros` active features, flipped with probability `flip`.
pub fn sparse_binary(seed: u64, n: usize, d: usize, density: f64, nonzeros: usize, flip: f64) -> Dataset {
    let mut rng = rng(seed);
    let mut truth = vec![0.0; d];
    let mut picked = 0;
    while picked < nonzeros {
        let j = rng.random_range(0..d);
        if truth[j] == 0.0 {
            truth[j] = gaussian(&mut rng);
            picked += 1;
        }
    }
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let entries: Vec<(usize, f64)> = (0..d)
            .filter_map(|j| (rng.random::<f64>() < density).then(|| (j, gaussian(&mut rng))))
            .collect();
        let x = SparseVec::new(d, entries).unwrap();
        let y = sign(x.dot(&truth));
        labels.push(if rng.random::<f64>() < flip { -y } else { y });
        rows.push(x);
    }
    Dataset::from_rows(rows, labels).unwrap()
}

/// Rows and 0-based labels from `k` Gaussian class centers; rows have unit norm.
pub fn multiclass_rows(seed: u64, n: usize, d: usize, k: usize) -> (Vec<SparseVec>, Vec<usize>) {
    let mut rng = rng(seed);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| gaussian(&mut rng)).collect()).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng.random_range(0..k);
        let x: Vec<f64> = centers[y].iter().map(|c| 0.5 * c + gaussian(&mut rng)).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        rows.push(SparseVec::from_dense(&x.iter().map(|v| v / norm).collect::<Vec<_>>()).unwrap());
        labels.push(y);
    }
    (rows, labels)
}

pub fn multiclass(seed: u64, n: usize, d: usize, k: usize) -> Dataset {
    let (rows, labels) = multiclass_rows(seed, n, d, k);
    Dataset::class_blocked(&rows, labels, k).unwrap()
}
