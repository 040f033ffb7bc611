//! Small dense linear algebra helpers: row-major storage, partial-pivot LU.
//!
//! Used for the tiny element-local systems (moment-matching bases, quadrature
//! weight fits), never for the global solve.

use crate::Error;

/// Dense row-major matrix.
#[derive(Clone, Debug)]
pub(crate) struct DenseMat {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }
}

/// Solve `a x = b` in place by Gaussian elimination with partial pivoting.
///
/// `a` is consumed as scratch. Fails on an exactly/near singular pivot.
pub(crate) fn solve(mut a: DenseMat, mut b: Vec<f64>) -> Result<Vec<f64>, Error> {
    let n = a.n_rows;
    assert_eq!(a.n_cols, n, "square system required");
    assert_eq!(b.len(), n, "rhs length mismatch");

    for k in 0..n {
        let mut piv = k;
        let mut piv_abs = a.get(k, k).abs();
        for i in k + 1..n {
            let v = a.get(i, k).abs();
            if v > piv_abs {
                piv = i;
                piv_abs = v;
            }
        }
        if piv_abs < 1e-300 {
            return Err(Error::Singular(format!("dense pivot {k} is zero")));
        }
        if piv != k {
            for j in 0..n {
                let t = a.get(k, j);
                a.set(k, j, a.get(piv, j));
                a.set(piv, j, t);
            }
            b.swap(k, piv);
        }
        let inv = 1.0 / a.get(k, k);
        for i in k + 1..n {
            let f = a.get(i, k) * inv;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                let v = a.get(i, j) - f * a.get(k, j);
                a.set(i, j, v);
            }
            b[i] -= f * b[k];
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a.get(i, j) * b[j];
        }
        b[i] = s / a.get(i, i);
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // 2x + y = 5, x + 3y = 10 -> x = 1, y = 3.
        let mut a = DenseMat::zeros(2, 2);
        a.set(0, 0, 2.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 3.0);
        let x = solve(a, vec![5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn pivots_on_zero_diagonal() {
        let mut a = DenseMat::zeros(2, 2);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        let x = solve(a, vec![2.0, 3.0]).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_singular() {
        let mut a = DenseMat::zeros(2, 2);
        a.set(0, 0, 1.0);
        a.set(0, 1, 2.0);
        a.set(1, 0, 2.0);
        a.set(1, 1, 4.0);
        assert!(solve(a, vec![1.0, 2.0]).is_err());
    }
}
