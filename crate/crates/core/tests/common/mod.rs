//! Independent dense oracles shared by the integration tests. Nothing here
//! calls into the linear-time kernels it is used to check.
#![allow(dead_code, clippy::needless_range_loop)]

use featgrad::Matrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_matrix(rng: &mut StdRng, n: usize, d: usize) -> Matrix {
    Matrix::from_vec(n, d, random_vec(rng, n * d))
}

pub fn random_labels(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// `triud(z zᵀ)` built entry by entry.
pub fn dense_triud_outer(z: &[f64]) -> Dense {
    let n = z.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            m[i][j] = z[i] * z[j];
        }
    }
    m
}

/// `triud(X diag(s) Xᵀ)` built entry by entry.
pub fn dense_operator(x: &Matrix, s: &[f64]) -> Dense {
    let n = x.rows();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            m[i][j] = (0..x.cols())
                .map(|d| x.get(i, d) * s[d] * x.get(j, d))
                .sum();
        }
    }
    m
}

pub fn transpose(a: &Dense) -> Dense {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| a[j][i]).collect()).collect()
}

pub fn matvec(a: &Dense, v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let m = b[0].len();
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for k in 0..b.len() {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Binomial coefficient by exact integer arithmetic.
pub fn binom(n: u64, r: u64) -> f64 {
    let mut c: u128 = 1;
    for t in 0..r {
        c = c * (n - t) as u128 / (t + 1) as u128;
    }
    c as f64
}

/// The estimate computed from explicit matrix powers of the dense operator.
pub fn dense_objective(x: &Matrix, y: &[f64], s: &[f64], coeffs: &[f64]) -> f64 {
    let n = y.len();
    let m = dense_operator(x, s);
    let mut power = m.clone();
    let mut f = dot(y, y) / n as f64;
    for (i, a) in coeffs.iter().enumerate() {
        if i > 0 {
            power = matmul(&power, &m);
        }
        let t = dot(y, &matvec(&power, y));
        f -= a / binom(n as u64, i as u64 + 2) * t;
    }
    f
}

/// Central finite differences of `f` at `p` with step `h`.
pub fn finite_difference<F: Fn(&[f64]) -> f64>(f: F, p: &[f64], h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|d| {
            q[d] = p[d] + h;
            let up = f(&q);
            q[d] = p[d] - h;
            let down = f(&q);
            q[d] = p[d];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_d |a_d − b_d| / max(max_d |b_d|, floor)`.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let scale = b.iter().fold(floor, |m, x| m.max(x.abs()));
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// AUC by counting every positive/negative pair; returns twice the
/// concordant count plus ties, and the pair count.
pub fn brute_force_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let mut doubled: u64 = 0;
    let mut pairs: u64 = 0;
    for i in 0..scores.len() {
        if labels[i] <= 0.0 {
            continue;
        }
        for j in 0..scores.len() {
            if labels[j] > 0.0 {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                doubled += 2;
            } else if scores[i] == scores[j] {
                doubled += 1;
            }
        }
    }
    doubled as f64 / (2 * pairs) as f64
}
