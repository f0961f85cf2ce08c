//! One-sided Jacobi SVD for square complex matrices.
//!
//! Right rotations orthogonalize the columns; column norms are the singular
//! values. Jacobi is slow for large n but bitwise deterministic and accurate
//! to machine precision at the sizes used here.

use num_complex::Complex64;

use crate::matrix::{CMatrix, C_ONE, C_ZERO};

/// Factorization C = U * diag(sigma) * V with U, V unitary and sigma
/// descending. V is the right factor itself, not its adjoint.
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

pub fn svd(c: &CMatrix) -> Svd {
    let n = c.dim();
    let mut a = c.clone();
    let mut j = CMatrix::identity(n);

    let eps = 1e-15_f64;
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0f64;
                let mut aqq = 0.0f64;
                let mut apq = C_ZERO;
                for i in 0..n {
                    let ap = a.at(i, p);
                    let aq = a.at(i, q);
                    app += ap.norm_sqr();
                    aqq += aq.norm_sqr();
                    apq += ap.conj() * aq;
                }
                let g = apq.norm();
                if g * g <= eps * eps * app * aqq {
                    continue;
                }
                rotated = true;
                // phase of the cross term, absorbed into column q
                let phase = apq / g;
                let tau = (aqq - app) / (2.0 * g);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                let sq = phase.conj() * sn; // combines a_q into a_p'
                let cq = phase.conj() * cs; // combines a_q into a_q'
                for i in 0..n {
                    let ap = a.at(i, p);
                    let aq = a.at(i, q);
                    a.set(i, p, ap * cs - aq * sq);
                    a.set(i, q, ap * sn + aq * cq);
                }
                for i in 0..n {
                    let jp = j.at(i, p);
                    let jq = j.at(i, q);
                    j.set(i, p, jp * cs - jq * sq);
                    j.set(i, q, jp * sn + jq * cq);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut norms: Vec<f64> = (0..n)
        .map(|k| (0..n).map(|i| a.at(i, k).norm_sqr()).sum::<f64>().sqrt())
        .collect();
    // descending, stable in the original column order on ties
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap().then(x.cmp(&y)));

    let sig_max = norms.iter().cloned().fold(0.0, f64::max);
    let rank_tol = sig_max * 1e-14 * n as f64;

    let mut u = CMatrix::zeros(n);
    let mut sigma = vec![0.0f64; n];
    let jadj = j.adjoint();
    let mut v = CMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        sigma[col] = norms[k];
        for i in 0..n {
            v.set(col, i, jadj.at(k, i));
        }
        if norms[k] > rank_tol {
            let inv = Complex64::new(1.0 / norms[k], 0.0);
            for i in 0..n {
                u.set(i, col, a.at(i, k) * inv);
            }
        }
    }
    for k in &mut norms {
        if *k <= rank_tol {
            *k = 0.0;
        }
    }
    for s in &mut sigma {
        if *s <= rank_tol {
            *s = 0.0;
        }
    }
    complete_null_columns(&mut u, &sigma, rank_tol);
    Svd { u, sigma, v }
}

/// Replaces the columns belonging to zero singular values with a
/// deterministic orthonormal completion (Gram-Schmidt against the basis
/// vectors in index order).
fn complete_null_columns(u: &mut CMatrix, sigma: &[f64], rank_tol: f64) {
    let n = u.dim();
    let needs: Vec<usize> = (0..n).filter(|&k| sigma[k] <= rank_tol).collect();
    if needs.is_empty() {
        return;
    }
    let mut have: Vec<Vec<Complex64>> = (0..n)
        .filter(|&k| sigma[k] > rank_tol)
        .map(|k| (0..n).map(|i| u.at(i, k)).collect())
        .collect();
    let mut basis_cursor = 0usize;
    for col in needs {
        loop {
            assert!(basis_cursor < n, "orthonormal completion exhausted the basis");
            let mut cand: Vec<Complex64> = vec![C_ZERO; n];
            cand[basis_cursor] = C_ONE;
            basis_cursor += 1;
            for prev in &have {
                let overlap: Complex64 =
                    prev.iter().zip(&cand).map(|(p, c)| p.conj() * c).sum();
                for (ci, pi) in cand.iter_mut().zip(prev) {
                    *ci -= overlap * pi;
                }
            }
            let norm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.5 {
                let inv = Complex64::new(1.0 / norm, 0.0);
                for (i, z) in cand.iter().enumerate() {
                    u.set(i, col, z * inv);
                }
                have.push(cand.iter().map(|z| z * inv).collect());
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn reconstruct(s: &Svd) -> CMatrix {
        s.u.mul(&CMatrix::from_diag(
            &s.sigma.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>(),
        ))
        .mul(&s.v)
    }

    #[test]
    fn reconstructs_generic_2x2() {
        let m = CMatrix::from_slice(2, &[c(0.3, 0.4), c(-0.2, 0.1), c(0.5, -0.6), c(0.1, 0.2)])
            .unwrap();
        let s = svd(&m);
        assert!(reconstruct(&s).max_abs_diff(&m) < 1e-14);
        assert!(s.u.unitarity_defect() < 1e-13);
        assert!(s.v.unitarity_defect() < 1e-13);
        assert!(s.sigma[0] >= s.sigma[1]);
    }

    #[test]
    fn reconstructs_generic_4x4() {
        let mut m = CMatrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                m.set(
                    i,
                    j,
                    c(
                        ((i * 3 + j * 5 + 1) % 7) as f64 / 7.0 - 0.4,
                        ((i * 2 + j * 7 + 4) % 5) as f64 / 5.0 - 0.5,
                    ),
                );
            }
        }
        let s = svd(&m);
        assert!(reconstruct(&s).max_abs_diff(&m) < 1e-13);
        assert!(s.u.unitarity_defect() < 1e-12);
        assert!(s.v.unitarity_defect() < 1e-12);
    }

    #[test]
    fn rank_one_gets_single_singular_value() {
        // outer product of (1, i)/sqrt(2) with (1, 1)/sqrt(2): unit norm, det 0
        let m = CMatrix::from_slice(
            2,
            &[c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.5), c(0.0, 0.5)],
        )
        .unwrap();
        let s = svd(&m);
        assert!((s.sigma[0] - 1.0).abs() < 1e-14);
        assert_eq!(s.sigma[1], 0.0);
        assert!(s.u.unitarity_defect() < 1e-13, "null column must be completed");
        assert!(reconstruct(&s).max_abs_diff(&m) < 1e-14);
    }

    #[test]
    fn diagonal_comes_back_sorted() {
        let m = CMatrix::from_diag(&[c(0.2, 0.0), c(0.0, -0.8)]);
        let s = svd(&m);
        assert!((s.sigma[0] - 0.8).abs() < 1e-15);
        assert!((s.sigma[1] - 0.2).abs() < 1e-15);
    }
}
