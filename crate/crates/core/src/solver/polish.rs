//! Active-set polish of an interior-point QP solution.
//!
//! Interior-point duals of slack rows decay only like `mu / slack`, so an
//! inactive resource row can keep a multiplier of order 1e-6. Guessing the
//! active set from the final iterate and solving the equality-constrained KKT
//! system recovers an exact vertex of the optimal face; it is kept only when
//! its KKT violation is smaller.
//!
//! Problem form: `min x'Px/2 + q'x` s.t. `Ax + s = b`, the first `n_eq` rows
//! with `s = 0` and the rest with `s >= 0`; `Px + q + A'z = 0`.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

const REGULARIZATION: f64 = 1e-9;
const REFINEMENTS: usize = 40;

pub(crate) struct Qp<'a> {
    pub p_diag: &'a [f64],
    pub q: &'a [f64],
    pub rows: &'a [usize],
    pub cols: &'a [usize],
    pub vals: &'a [f64],
    pub b: &'a [f64],
    pub n_eq: usize,
}

impl Qp<'_> {
    fn ax(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.b.len()];
        for ((&r, &c), &v) in self.rows.iter().zip(self.cols).zip(self.vals) {
            out[r] += v * x[c];
        }
        out
    }

    /// Largest violation of stationarity, feasibility and complementarity.
    pub fn kkt_violation(&self, x: &[f64], z: &[f64]) -> f64 {
        let mut grad: Vec<f64> = x.iter().zip(self.p_diag).zip(self.q).map(|((x, p), q)| p * x + q).collect();
        for ((&r, &c), &v) in self.rows.iter().zip(self.cols).zip(self.vals) {
            grad[c] += v * z[r];
        }
        let mut worst = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let ax = self.ax(x);
        for (r, (&b, a)) in self.b.iter().zip(&ax).enumerate() {
            let s = b - a;
            worst = if r < self.n_eq {
                worst.max(s.abs())
            } else {
                worst.max(-s).max(-z[r]).max(s.min(z[r]))
            };
        }
        worst
    }

    /// Re-solves with the rows where `z > s` held as equalities.
    pub fn polish(&self, x: &[f64], z: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let nv = x.len();
        let ax = self.ax(x);
        let mut slot = vec![usize::MAX; self.b.len()];
        let mut kept = Vec::new();
        for r in 0..self.b.len() {
            if r < self.n_eq || z[r] > self.b[r] - ax[r] {
                slot[r] = nv + kept.len();
                kept.push(r);
            }
        }
        let dim = nv + kept.len();

        let mut exact: Vec<(usize, usize, f64)> = Vec::with_capacity(dim + 2 * self.vals.len());
        for (c, &p) in self.p_diag.iter().enumerate() {
            if p != 0.0 {
                exact.push((c, c, p));
            }
        }
        for ((&r, &c), &v) in self.rows.iter().zip(self.cols).zip(self.vals) {
            if slot[r] != usize::MAX {
                exact.push((slot[r], c, v));
                exact.push((c, slot[r], v));
            }
        }
        let mut regularized: Vec<Triplet<usize, usize, f64>> =
            exact.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        regularized.extend((0..nv).map(|c| Triplet::new(c, c, REGULARIZATION)));
        regularized.extend((nv..dim).map(|r| Triplet::new(r, r, -REGULARIZATION)));
        let lu = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &regularized)
            .ok()?
            .sp_lu()
            .ok()?;

        let mut rhs: Vec<f64> = self.q.iter().map(|q| -q).collect();
        rhs.extend(kept.iter().map(|&r| self.b[r]));
        let mut sol = vec![0.0; dim];
        for _ in 0..REFINEMENTS {
            let mut resid = rhs.clone();
            for &(r, c, v) in &exact {
                resid[r] -= v * sol[c];
            }
            let size = resid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if size <= 1e-15 * (1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                break;
            }
            let mut step = Mat::<f64>::from_fn(dim, 1, |i, _| resid[i]);
            lu.solve_in_place(step.as_mut());
            for (s, i) in sol.iter_mut().zip(0..dim) {
                *s += step[(i, 0)];
            }
        }
        if !sol.iter().all(|v| v.is_finite()) {
            return None;
        }
        let mut zp = vec![0.0; self.b.len()];
        for (k, &r) in kept.iter().enumerate() {
            zp[r] = sol[nv + k];
        }
        sol.truncate(nv);
        Some((sol, zp))
    }
}
