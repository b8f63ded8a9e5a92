//! Direct factorizations backed by faer.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::gmres::Preconditioner;
use super::sparse::CsrMatrix;
use crate::{Error, Result};

/// Sparse LU with partial pivoting.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Parameter("LU needs a square matrix".into()));
        }
        let triplets: Vec<Triplet<usize, usize, f64>> =
            a.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Numerical(format!("sparse matrix creation failed: {e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu { n, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(&mut rhs);
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

impl Preconditioner for SparseLu {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let x = self.solve(r);
        z.copy_from_slice(&x);
    }
}

/// Dense LU with partial pivoting.
pub struct DenseLu {
    n: usize,
    lu: faer::linalg::solvers::PartialPivLu<f64>,
}

impl DenseLu {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Parameter("LU needs a square matrix".into()));
        }
        let mut m = Mat::<f64>::zeros(n, n);
        for (i, j, v) in a.triplets() {
            m[(i, j)] = v;
        }
        Ok(DenseLu { n, lu: m.partial_piv_lu() })
    }

    /// Errors if the result is not finite (singular matrix).
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(&mut rhs);
        let x: Vec<f64> = (0..self.n).map(|i| rhs[(i, 0)]).collect();
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::Numerical("dense LU produced non-finite values (singular matrix)".into()))
        }
    }
}

pub fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    DenseLu::new(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_and_dense_agree() {
        let a = CsrMatrix::from_dense(&[
            vec![0.0, 2.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 3.0],
        ]);
        let b = [1.0, 2.0, 3.0];
        let x1 = SparseLu::new(&a).unwrap().solve(&b);
        let x2 = dense_solve(&a, &b).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-14);
        }
        assert!((x1[0] - 2.0).abs() < 1e-14);
    }
}
