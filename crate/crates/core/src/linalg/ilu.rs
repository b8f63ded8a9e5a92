//! Zero fill-in incomplete LU.

use super::gmres::Preconditioner;
use super::sparse::CsrMatrix;
use crate::{Error, Result};

/// ILU(0) factors stored on the sparsity pattern of the input matrix. The
/// unit lower factor and the upper factor share one value array.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Parameter("ILU(0) needs a square matrix".into()));
        }
        let rp = a.row_ptr();
        let ci = a.col_idx();
        let mut values = a.values().to_vec();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            if let Ok(k) = ci[rp[i]..rp[i + 1]].binary_search(&i) {
                diag[i] = rp[i] + k;
            }
        }
        let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            if diag[i] == usize::MAX {
                return Err(Error::Numerical(format!("ILU(0) breakdown: row {i} has no diagonal entry")));
            }
            for k in rp[i]..rp[i + 1] {
                pos[ci[k]] = k;
            }
            for k in rp[i]..diag[i] {
                let j = ci[k];
                let piv = values[diag[j]];
                values[k] /= piv;
                let lij = values[k];
                for kk in diag[j] + 1..rp[j + 1] {
                    let p = pos[ci[kk]];
                    if p != usize::MAX {
                        values[p] -= lij * values[kk];
                    }
                }
            }
            for k in rp[i]..rp[i + 1] {
                pos[ci[k]] = usize::MAX;
            }
            if values[diag[i]].abs() <= tiny || !values[diag[i]].is_finite() {
                return Err(Error::Numerical(format!("ILU(0) breakdown: zero pivot in row {i}")));
            }
        }
        Ok(Ilu0 { lu: a.clone(), values, diag })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let n = r.len();
        for i in 0..n {
            let mut s = r[i];
            for k in rp[i]..self.diag[i] {
                s -= self.values[k] * z[ci[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..rp[i + 1] {
                s -= self.values[k] * z[ci[k]];
            }
            z[i] = s / self.values[self.diag[i]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_tridiagonal() {
        // No fill-in occurs for a tridiagonal matrix, so ILU(0) is exact LU.
        let a = CsrMatrix::from_dense(&[
            vec![4.0, -1.0, 0.0],
            vec![-2.0, 4.0, -1.0],
            vec![0.0, -2.0, 4.0],
        ]);
        let ilu = Ilu0::new(&a).unwrap();
        let b = [1.0, 2.0, 3.0];
        let mut x = [0.0; 3];
        ilu.apply(&b, &mut x);
        let ax = a.mul_vec(&x);
        for (p, q) in ax.iter().zip(&b) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_diagonal_breaks_down() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(Ilu0::new(&a).is_err());
    }
}
