//! Linear-time kernels for products with strictly upper triangular
//! operators built from columns of the batch.
//!
//! `G_d = triud(x_d x_dᵀ)` has entries `x_id·x_jd` for `j > i` and zero
//! elsewhere, so `(G_d v)_i = x_id · Σ_{j>i} x_jd v_j` is one reverse
//! exclusive cumulative sum. The batch-wide kernels sweep rows once while
//! keeping one running sum per feature, which costs `O(N·D)` time and
//! `O(D)` scratch.
//!
//! In [`Execution::Parallel`] the rows are cut into fixed blocks of
//! [`ROW_BLOCK`] rows. Block totals are combined in block order, so results
//! depend only on the data, never on the thread count.

use rayon::prelude::*;

use crate::matrix::Matrix;

pub const ROW_BLOCK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}

/// `triud(z zᵀ) v`: `out_i = z_i · Σ_{j>i} z_j v_j`.
pub fn triud_outer_apply(z: &[f64], v: &[f64]) -> Vec<f64> {
    assert_eq!(z.len(), v.len(), "length mismatch");
    let mut out = vec![0.0; z.len()];
    let mut suffix = 0.0;
    for i in (0..z.len()).rev() {
        out[i] = z[i] * suffix;
        suffix += z[i] * v[i];
    }
    out
}

/// `triud(z zᵀ)ᵀ v`: `out_i = z_i · Σ_{j<i} z_j v_j`.
pub fn triud_outer_apply_transpose(z: &[f64], v: &[f64]) -> Vec<f64> {
    assert_eq!(z.len(), v.len(), "length mismatch");
    let mut out = vec![0.0; z.len()];
    let mut prefix = 0.0;
    for i in 0..z.len() {
        out[i] = z[i] * prefix;
        prefix += z[i] * v[i];
    }
    out
}

/// Direction of the row sweep: `Upper` computes `M v`, `Lower` computes
/// `Mᵀ v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Upper,
    Lower,
}

/// `out = (Σ_d s_d G_d) v`, or its transpose, overwriting `out`.
pub(crate) fn apply(
    x: &Matrix,
    s: &[f64],
    v: &[f64],
    out: &mut [f64],
    side: Side,
    exec: Execution,
) {
    let n = x.rows();
    debug_assert_eq!(s.len(), x.cols());
    debug_assert_eq!(v.len(), n);
    debug_assert_eq!(out.len(), n);
    let n_blocks = n.div_ceil(ROW_BLOCK);
    if exec == Execution::Sequential || n_blocks < 2 {
        let mut acc = vec![0.0; x.cols()];
        sweep_apply(x, s, v, 0, out, &mut acc, side);
        return;
    }

    let totals: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut t = vec![0.0; x.cols()];
            for i in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n) {
                let c = v[i];
                for ((t, &xd), &sd) in t.iter_mut().zip(x.row(i)).zip(s) {
                    *t += sd * xd * c;
                }
            }
            t
        })
        .collect();
    let starts = carry_in(totals, side);
    out.par_chunks_mut(ROW_BLOCK)
        .zip(starts)
        .enumerate()
        .for_each(|(b, (chunk, mut acc))| {
            sweep_apply(x, s, v, b * ROW_BLOCK, chunk, &mut acc, side);
        });
}

/// Sweeps rows `first..first + out.len()` in the direction of `side`,
/// starting from the running sums in `acc`.
fn sweep_apply(
    x: &Matrix,
    s: &[f64],
    v: &[f64],
    first: usize,
    out: &mut [f64],
    acc: &mut [f64],
    side: Side,
) {
    let len = out.len();
    let mut step = |local: usize| {
        let i = first + local;
        let row = x.row(i);
        let c = v[i];
        let mut o = 0.0;
        for ((a, &xd), &sd) in acc.iter_mut().zip(row).zip(s) {
            o += xd * *a;
            *a += sd * xd * c;
        }
        out[local] = o;
    };
    match side {
        Side::Upper => (0..len).rev().for_each(&mut step),
        Side::Lower => (0..len).for_each(&mut step),
    }
}

/// Running sums each block starts from: totals of all later blocks for
/// `Upper`, of all earlier blocks for `Lower`.
fn carry_in(totals: Vec<Vec<f64>>, side: Side) -> Vec<Vec<f64>> {
    let n_blocks = totals.len();
    let width = totals.first().map_or(0, Vec::len);
    let mut starts = vec![Vec::new(); n_blocks];
    let mut running = vec![0.0; width];
    let order: Box<dyn Iterator<Item = usize>> = match side {
        Side::Upper => Box::new((0..n_blocks).rev()),
        Side::Lower => Box::new(0..n_blocks),
    };
    for b in order {
        starts[b] = running.clone();
        for (r, t) in running.iter_mut().zip(&totals[b]) {
            *r += t;
        }
    }
    starts
}

/// Adds `scale · wᵀ G_d u` to `grad[d]` for every feature `d`.
pub(crate) fn accumulate_bilinear(
    x: &Matrix,
    w: &[f64],
    u: &[f64],
    scale: f64,
    grad: &mut [f64],
    exec: Execution,
) {
    let n = x.rows();
    let d = x.cols();
    debug_assert_eq!(grad.len(), d);
    let n_blocks = n.div_ceil(ROW_BLOCK);
    if exec == Execution::Sequential || n_blocks < 2 {
        let mut acc = vec![0.0; d];
        sweep_bilinear(x, w, u, 0..n, &mut acc, scale, grad);
        return;
    }

    let totals: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut t = vec![0.0; d];
            for i in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n) {
                let c = u[i];
                for (t, &xd) in t.iter_mut().zip(x.row(i)) {
                    *t += xd * c;
                }
            }
            t
        })
        .collect();
    let starts = carry_in(totals, Side::Upper);
    let partials: Vec<Vec<f64>> = starts
        .into_par_iter()
        .enumerate()
        .map(|(b, mut acc)| {
            let mut g = vec![0.0; d];
            let rows = b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n);
            sweep_bilinear(x, w, u, rows, &mut acc, scale, &mut g);
            g
        })
        .collect();
    for g in partials {
        for (dst, src) in grad.iter_mut().zip(g) {
            *dst += src;
        }
    }
}

fn sweep_bilinear(
    x: &Matrix,
    w: &[f64],
    u: &[f64],
    rows: std::ops::Range<usize>,
    acc: &mut [f64],
    scale: f64,
    grad: &mut [f64],
) {
    for i in rows.rev() {
        let row = x.row(i);
        let left = scale * w[i];
        let right = u[i];
        for ((g, a), &xd) in grad.iter_mut().zip(acc.iter_mut()).zip(row) {
            *g += left * xd * *a;
            *a += xd * right;
        }
    }
}
