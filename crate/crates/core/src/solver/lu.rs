//! Sparse LU of Newton matrices `Da + Db (M + mu I)` with a fixed pattern.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub(crate) struct NewtonMatrix {
    n: usize,
    pattern: SymbolicSparseColMat<usize>,
    symbolic: SymbolicLu<usize>,
    /// CSC slot of each entry of `M`, in `M.triplets()` order.
    entry_slot: Vec<usize>,
    entry_row: Vec<usize>,
    entry_val: Vec<f64>,
    diag_slot: Vec<usize>,
    values: Vec<f64>,
}

impl NewtonMatrix {
    pub fn new(m: &SparseMatrix) -> Result<Self> {
        let n = m.n_rows;
        // (col, row, source) with source = Some(entry) or None for the diagonal
        let mut cells: Vec<(usize, usize, Option<usize>)> = m
            .triplets()
            .enumerate()
            .map(|(e, (r, c, _))| (c, r, Some(e)))
            .collect();
        cells.extend((0..n).map(|j| (j, j, None)));
        cells.sort_unstable();

        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(cells.len());
        let mut entry_slot = vec![0usize; m.nnz()];
        let mut diag_slot = vec![0usize; n];
        let mut last = None;
        for (c, r, src) in cells {
            if last != Some((c, r)) {
                row_idx.push(r);
                col_ptr[c + 1] += 1;
                last = Some((c, r));
            }
            let slot = row_idx.len() - 1;
            match src {
                Some(e) => entry_slot[e] = slot,
                None => diag_slot[r] = slot,
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let nnz = row_idx.len();
        let pattern = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        let symbolic = SymbolicLu::try_new(pattern.as_ref())
            .map_err(|e| Error::LinearAlgebra(format!("symbolic LU: {e:?}")))?;
        let (entry_row, entry_val) = m.triplets().map(|(r, _, v)| (r, v)).unzip();
        Ok(Self {
            n,
            pattern,
            symbolic,
            entry_slot,
            entry_row,
            entry_val,
            diag_slot,
            values: vec![0.0; nnz],
        })
    }

    /// Factors `diag(da) + diag(db) (M + mu I)`.
    pub fn factor(&mut self, da: &[f64], db: &[f64], mu: f64) -> Result<Factored<'_>> {
        self.values.iter_mut().for_each(|v| *v = 0.0);
        for (e, &slot) in self.entry_slot.iter().enumerate() {
            self.values[slot] += db[self.entry_row[e]] * self.entry_val[e];
        }
        for j in 0..self.n {
            self.values[self.diag_slot[j]] += da[j] + db[j] * mu;
        }
        let mat = SparseColMatRef::new(self.pattern.as_ref(), &self.values);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), mat)
            .map_err(|e| Error::LinearAlgebra(format!("numeric LU: {e:?}")))?;
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::LinearAlgebra("non-finite Newton matrix".into()));
        }
        Ok(Factored { lu, owner: self })
    }
}

pub(crate) struct Factored<'a> {
    lu: Lu<usize, f64>,
    owner: &'a NewtonMatrix,
}

impl Factored<'_> {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.owner;
        let mut y = vec![0.0; m.n];
        let col_ptr = m.pattern.col_ptr();
        let row_idx = m.pattern.row_idx();
        for c in 0..m.n {
            for slot in col_ptr[c]..col_ptr[c + 1] {
                y[row_idx[slot]] += m.values[slot] * x[c];
            }
        }
        y
    }

    fn raw_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.lu.solve_in_place(b.as_mut());
        (0..rhs.len()).map(|i| b[(i, 0)]).collect()
    }

    /// Solves with one step of iterative refinement.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.raw_solve(rhs);
        let hx = self.apply(&x);
        let resid: Vec<f64> = rhs.iter().zip(&hx).map(|(b, h)| b - h).collect();
        let fix = self.raw_solve(&resid);
        for (xi, d) in x.iter_mut().zip(fix) {
            *xi += d;
        }
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::LinearAlgebra("singular Newton matrix".into()))
        }
    }
}
