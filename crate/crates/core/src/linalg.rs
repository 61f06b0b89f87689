//! Small dense helpers shared across modules.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of [`power_iteration`].
#[derive(Debug, Clone)]
pub struct PowerIteration {
    pub eigenvalue: f64,
    pub eigenvector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of a symmetric positive semi-definite operator given
/// only as a matrix-vector product `apply(w, out)`.
///
/// Starts from a seeded random unit vector and stops once the Rayleigh
/// quotient changes by less than `rel_tol` relative, or after `max_iter`
/// products. A zero operator yields eigenvalue 0.
pub fn power_iteration<F>(
    dim: usize,
    mut apply: F,
    max_iter: usize,
    rel_tol: f64,
    seed: u64,
) -> PowerIteration
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut rng = StdRng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n0 = norm(&w);
    if dim == 0 || n0 == 0.0 {
        return PowerIteration {
            eigenvalue: 0.0,
            eigenvector: w,
            iterations: 0,
            converged: true,
        };
    }
    w.iter_mut().for_each(|x| *x /= n0);

    let mut aw = vec![0.0; dim];
    let mut eigenvalue = f64::NAN;
    for it in 1..=max_iter {
        aw.iter_mut().for_each(|x| *x = 0.0);
        apply(&w, &mut aw);
        let rayleigh = dot(&w, &aw);
        let len = norm(&aw);
        if len == 0.0 {
            return PowerIteration {
                eigenvalue: 0.0,
                eigenvector: w,
                iterations: it,
                converged: true,
            };
        }
        for (wi, ai) in w.iter_mut().zip(&aw) {
            *wi = ai / len;
        }
        let converged =
            eigenvalue.is_finite() && (rayleigh - eigenvalue).abs() <= rel_tol * rayleigh.abs();
        eigenvalue = rayleigh;
        if converged {
            return PowerIteration {
                eigenvalue,
                eigenvector: w,
                iterations: it,
                converged: true,
            };
        }
    }
    PowerIteration {
        eigenvalue,
        eigenvector: w,
        iterations: max_iter,
        converged: false,
    }
}
