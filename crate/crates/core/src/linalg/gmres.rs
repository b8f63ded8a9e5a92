//! Restarted GMRES with right preconditioning.

use super::sparse::{dot, norm2, CsrMatrix};

pub trait Preconditioner {
    /// `z = M^{-1} r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True relative residual `|b - A x| / |b|`.
    pub residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` to relative residual `tol`. Because preconditioning is
/// applied on the right, the monitored residual is the true one.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    prec: &dyn Preconditioner,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if bnorm == 0.0 {
        return GmresOutcome { x: vec![0.0; n], iterations: 0, residual: 0.0, converged: true };
    }
    let m = restart.max(1);
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut iterations = 0;

    let residual = |x: &[f64], r: &mut Vec<f64>| -> f64 {
        a.mul_vec_into(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        norm2(r) / bnorm
    };

    let mut rel = residual(&x, &mut r);
    while rel > tol && iterations < max_iter {
        let beta = rel * bnorm;
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            if iterations >= max_iter {
                break;
            }
            iterations += 1;
            prec.apply(&v[k], &mut z);
            let mut w = a.mul_vec(&z);
            for j in 0..=k {
                h[j][k] = dot(&w, &v[j]);
                for (wi, vi) in w.iter_mut().zip(&v[j]) {
                    *wi -= h[j][k] * vi;
                }
            }
            // One reorthogonalization pass keeps the basis usable for the
            // ill-conditioned saddle systems.
            for j in 0..=k {
                let c = dot(&w, &v[j]);
                h[j][k] += c;
                for (wi, vi) in w.iter_mut().zip(&v[j]) {
                    *wi -= c * vi;
                }
            }
            h[k + 1][k] = norm2(&w);
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            let breakdown = h[k + 1][k] == 0.0 && norm2(&w) == 0.0;
            if g[k + 1].abs() / bnorm <= tol * 0.5 || breakdown {
                break;
            }
            let wn = norm2(&w);
            v.push(w.into_iter().map(|wi| wi / wn).collect());
        }
        if k_used == 0 {
            break;
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (ui, vi) in update.iter_mut().zip(&v[j]) {
                *ui += yj * vi;
            }
        }
        prec.apply(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        let prev = rel;
        rel = residual(&x, &mut r);
        if !(rel < prev) && rel > tol {
            break;
        }
    }
    GmresOutcome { converged: rel <= tol, x, iterations, residual: rel }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let out = gmres(&a, &[1.0, 1.0], None, &IdentityPreconditioner, 1e-14, 10, 10);
        assert!(out.converged);
        assert!((out.x[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((out.x[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn restarts_on_nonsymmetric_system() {
        let n = 60;
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            rows[i][i] = 4.0;
            if i + 1 < n {
                rows[i][i + 1] = -1.5;
                rows[i + 1][i] = -0.5;
            }
        }
        let a = CsrMatrix::from_dense(&rows);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let out = gmres(&a, &b, None, &IdentityPreconditioner, 1e-12, 5, 500);
        assert!(out.converged, "{}", out.residual);
        let r: Vec<f64> = a.mul_vec(&out.x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect();
        assert!(norm2(&r) <= 1e-12 * norm2(&b) * 1.0001);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::identity(3);
        let out = gmres(&a, &[0.0; 3], Some(&[1.0, 2.0, 3.0]), &IdentityPreconditioner, 1e-12, 3, 3);
        assert_eq!(out.x, vec![0.0; 3]);
    }
}
