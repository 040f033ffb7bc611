//! Sparse matrix storage and linear solvers.
//!
//! The matrix type is CSR with sorted column indices; explicit zeros are kept,
//! which lets the time loop reuse one sparsity pattern (and one symbolic
//! factorization) across steps whose numeric values change.
//!
//! Two solver paths: a direct sparse LU (faer) used by default, and
//! GMRES(restart) with an ILU(0) preconditioner. Both finish with one
//! iterative-refinement pass and enforce the relative-residual contract
//! `||b - A x|| <= rel_tol * ||b||`, returning an error instead of a silently
//! inaccurate solution.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::SparseColMat;

use crate::Error;

/// Compressed sparse row matrix. Column indices are strictly increasing within
/// each row; duplicate triplets are summed on construction and explicit zeros
/// are preserved.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets, summing duplicates.
    ///
    /// Duplicates are summed in emission order, so two slots fed the same
    /// values with opposite signs end up exactly negated (skew parts of
    /// assembled operators cancel to the last bit).
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_unstable_by_key(|&t| (triplets[t].0, triplets[t].1, t));

        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &t in &order {
            let (r, c, v) = triplets[t];
            assert!(r < n_rows && c < n_cols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row `r` as (column indices, values).
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Stored value at (r, c); zero if the slot is not in the pattern.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut s = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c];
            }
            y[r] = s;
        }
        y
    }

    /// y = A^T x.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * x[r];
            }
        }
        y
    }

    /// Iterate stored entries as (row, col, value).
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }
}

/// Solver backend selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    DirectLu,
    GmresIlu0,
}

/// Solver settings; `Default` gives the direct backend at 1e-12 relative
/// residual.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub rel_tol: f64,
    /// Total iteration budget; GMRES only.
    pub max_iter: usize,
    /// Krylov subspace size between restarts; GMRES only.
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::DirectLu,
            rel_tol: 1e-12,
            max_iter: 4000,
            restart: 50,
        }
    }
}

/// Solve `A x = b` with the configured backend.
///
/// Both backends finish with an iterative-refinement pass; if the final
/// relative residual still exceeds `rel_tol` the call fails rather than
/// returning a bad solution.
pub fn solve(a: &SparseMatrix, b: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>, Error> {
    assert_eq!(a.n_rows, a.n_cols, "square system required");
    assert_eq!(b.len(), a.n_rows, "rhs length mismatch");
    let norm_b = norm2(b);
    if norm_b == 0.0 {
        return Ok(vec![0.0; a.n_cols]);
    }
    let x = match cfg.method {
        Method::DirectLu => {
            let mut f = DirectFactorization::new(a)?;
            f.factor(a)?;
            f.solve_refined(a, b, cfg.rel_tol)?
        }
        Method::GmresIlu0 => gmres_ilu0(a, b, cfg)?,
    };
    Ok(x)
}

/// Reusable direct factorization: the symbolic analysis is done once for a
/// sparsity pattern, numeric refactorization once per value set. Values are
/// copied into the retained column-major storage through a precomputed slot
/// permutation, so refactorization never rebuilds or re-sorts the pattern.
pub struct DirectFactorization {
    mat: SparseColMat<usize, f64>,
    /// CSR slot k lives at column-major slot `perm[k]`.
    perm: Vec<usize>,
    symbolic: SymbolicLu<usize>,
    numeric: Option<Lu<usize, f64>>,
    n: usize,
}

impl DirectFactorization {
    pub fn new(a: &SparseMatrix) -> Result<Self, Error> {
        check_no_empty_rows(a)?;
        let (mat, perm) = to_faer(a);
        let symbolic = SymbolicLu::try_new(mat.symbolic())
            .map_err(|e| Error::Singular(format!("symbolic LU failed: {e:?}")))?;
        Ok(Self {
            mat,
            perm,
            symbolic,
            numeric: None,
            n: a.n_rows,
        })
    }

    /// Numeric (re)factorization of a matrix with the pattern given to `new`.
    pub fn factor(&mut self, a: &SparseMatrix) -> Result<(), Error> {
        assert_eq!(a.nnz(), self.perm.len(), "pattern changed since new()");
        let vals = self.mat.val_mut();
        for (k, &v) in a.values.iter().enumerate() {
            vals[self.perm[k]] = v;
        }
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), self.mat.as_ref())
            .map_err(|e| Error::Singular(format!("numeric LU failed: {e:?}")))?;
        self.numeric = Some(lu);
        Ok(())
    }

    /// Back-substitution only; no refinement or residual check.
    pub fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let lu = self.numeric.as_ref().expect("factor() before solve");
        let mut rhs = Mat::<f64>::zeros(self.n, 1);
        for (i, &v) in b.iter().enumerate() {
            rhs[(i, 0)] = v;
        }
        let sol = lu.solve(&rhs);
        (0..self.n).map(|i| sol[(i, 0)]).collect()
    }

    /// Solve with one iterative-refinement pass and enforce the relative
    /// residual contract.
    pub fn solve_refined(
        &self,
        a: &SparseMatrix,
        b: &[f64],
        rel_tol: f64,
    ) -> Result<Vec<f64>, Error> {
        let norm_b = norm2(b);
        if norm_b == 0.0 {
            return Ok(vec![0.0; self.n]);
        }
        let mut x = self.solve_raw(b);
        let r = residual(a, &x, b);
        let dx = self.solve_raw(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        let res = norm2(&residual(a, &x, b));
        if res > rel_tol * norm_b {
            return Err(Error::ResidualContract {
                residual: res / norm_b,
                tolerance: rel_tol,
            });
        }
        Ok(x)
    }
}

/// Transpose the CSR pattern into owned column-major storage, returning the
/// matrix and the CSR-slot to column-slot permutation.
fn to_faer(a: &SparseMatrix) -> (SparseColMat<usize, f64>, Vec<usize>) {
    let nnz = a.nnz();
    let mut col_ptr = vec![0usize; a.n_cols + 1];
    for &c in &a.col_idx {
        col_ptr[c + 1] += 1;
    }
    for c in 0..a.n_cols {
        col_ptr[c + 1] += col_ptr[c];
    }
    let mut cursor = col_ptr.clone();
    let mut row_idx = vec![0usize; nnz];
    let mut vals = vec![0.0f64; nnz];
    let mut perm = vec![0usize; nnz];
    // Row-major traversal fills each column's rows in increasing order, which
    // is the ordering the column-major storage requires.
    for r in 0..a.n_rows {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            let slot = cursor[a.col_idx[k]];
            cursor[a.col_idx[k]] += 1;
            row_idx[slot] = r;
            vals[slot] = a.values[k];
            perm[k] = slot;
        }
    }
    let symbolic = faer::sparse::SymbolicSparseColMat::new_checked(
        a.n_rows, a.n_cols, col_ptr, None, row_idx,
    );
    (SparseColMat::new(symbolic, vals), perm)
}

fn check_no_empty_rows(a: &SparseMatrix) -> Result<(), Error> {
    for r in 0..a.n_rows {
        if a.row_ptr[r] == a.row_ptr[r + 1] {
            return Err(Error::Singular(format!("row {r} has no entries")));
        }
    }
    Ok(())
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// ILU(0): incomplete LU on the existing sparsity pattern, unit lower
/// diagonal. Pivots too close to zero are regularized, trading preconditioner
/// quality for robustness on saddle-point blocks.
struct Ilu0 {
    mat: SparseMatrix,
    diag_slot: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &SparseMatrix) -> Result<Self, Error> {
        let n = a.n_rows;
        let mut mat = a.clone();
        let mut diag_slot = vec![usize::MAX; n];
        for r in 0..n {
            let (lo, hi) = (mat.row_ptr[r], mat.row_ptr[r + 1]);
            for k in lo..hi {
                if mat.col_idx[k] == r {
                    diag_slot[r] = k;
                }
            }
            if diag_slot[r] == usize::MAX {
                return Err(Error::Singular(format!(
                    "ILU(0) needs a diagonal slot in row {r} (explicit zero suffices)"
                )));
            }
        }
        // IKJ factorization restricted to the pattern.
        let mut col_of = vec![usize::MAX; n];
        for i in 0..n {
            let (lo, hi) = (mat.row_ptr[i], mat.row_ptr[i + 1]);
            for k in lo..hi {
                col_of[mat.col_idx[k]] = k;
            }
            for k in lo..hi {
                let j = mat.col_idx[k];
                if j >= i {
                    break;
                }
                let piv = mat.values[diag_slot[j]];
                let lij = mat.values[k] / piv;
                mat.values[k] = lij;
                let (jlo, jhi) = (mat.row_ptr[j], mat.row_ptr[j + 1]);
                for kk in jlo..jhi {
                    let jj = mat.col_idx[kk];
                    if jj <= j {
                        continue;
                    }
                    let slot = col_of[jj];
                    if slot != usize::MAX && slot < hi && slot >= lo {
                        mat.values[slot] -= lij * mat.values[kk];
                    }
                }
            }
            let ds = diag_slot[i];
            let scale = mat.row(i).1.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            if mat.values[ds].abs() < 1e-12 * scale.max(1e-30) {
                mat.values[ds] = if mat.values[ds] >= 0.0 { 1.0 } else { -1.0 }
                    * (1e-12 * scale.max(1e-30));
            }
            for k in lo..hi {
                col_of[mat.col_idx[k]] = usize::MAX;
            }
        }
        Ok(Self { mat, diag_slot })
    }

    /// z = (L U)^-1 r.
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = self.mat.n_rows;
        let mut z = r.to_vec();
        for i in 0..n {
            let (lo, hi) = (self.mat.row_ptr[i], self.mat.row_ptr[i + 1]);
            let mut s = z[i];
            for k in lo..hi {
                let j = self.mat.col_idx[k];
                if j >= i {
                    break;
                }
                s -= self.mat.values[k] * z[j];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let (lo, hi) = (self.mat.row_ptr[i], self.mat.row_ptr[i + 1]);
            let mut s = z[i];
            for k in (lo..hi).rev() {
                let j = self.mat.col_idx[k];
                if j <= i {
                    break;
                }
                s -= self.mat.values[k] * z[j];
            }
            z[i] = s / self.mat.values[self.diag_slot[i]];
        }
        z
    }
}

/// Right-preconditioned restarted GMRES. The right preconditioner keeps the
/// iterated residual equal to the true residual of the original system.
fn gmres_ilu0(a: &SparseMatrix, b: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>, Error> {
    let n = a.n_rows;
    let norm_b = norm2(b);
    let precond = Ilu0::new(a)?;
    let mut x = vec![0.0; n];
    let mut total_iters = 0usize;
    let target = cfg.rel_tol * norm_b;

    'outer: loop {
        let r = residual(a, &x, b);
        let beta = norm2(&r);
        if beta <= target {
            break;
        }
        if total_iters >= cfg.max_iter {
            return Err(Error::NoConvergence {
                residual: beta / norm_b,
                iterations: total_iters,
                tolerance: cfg.rel_tol,
            });
        }
        let m = cfg.restart.max(1);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg in QR form via Givens rotations.
        let mut h = vec![vec![0.0f64; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..m {
            total_iters += 1;
            let z = precond.apply(&basis[k]);
            let mut w = a.matvec(&z);
            for i in 0..=k {
                let dot = dot(&w, &basis[i]);
                h[i][k] = dot;
                for (wj, vj) in w.iter_mut().zip(&basis[i]) {
                    *wj -= dot * vj;
                }
            }
            let hk1 = norm2(&w);
            h[k + 1][k] = hk1;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + hk1 * hk1).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = hk1 / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if hk1 > 0.0 {
                basis.push(w.iter().map(|v| v / hk1).collect());
            }
            let approx_res = g[k + 1].abs();
            if approx_res <= target || hk1 == 0.0 || total_iters >= cfg.max_iter {
                break;
            }
        }

        // y = H^-1 g by back substitution, then x += M^-1 (V y).
        let mut y = vec![0.0f64; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut vy = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (vi, bij) in vy.iter_mut().zip(&basis[j]) {
                *vi += yj * bij;
            }
        }
        let dz = precond.apply(&vy);
        for (xi, di) in x.iter_mut().zip(&dz) {
            *xi += di;
        }
        if k_used == 0 {
            break 'outer;
        }
    }

    // Refinement pass and contract check against the true residual.
    let res = norm2(&residual(a, &x, b));
    if res > target {
        return Err(Error::ResidualContract {
            residual: res / norm_b,
            tolerance: cfg.rel_tol,
        });
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
