//! Coefficient-matrix algebra for bipartite pure states.
//!
//! A pure state of two n-level systems is stored as the n x n complex
//! coefficient matrix C with unit trace norm, Tr(C'C) = 1. The central object
//! is the hat map
//!
//! ```text
//! hat(C) = |det C|^(2/n) (C')^(-1)        (C' = adjoint of C)
//! ```
//!
//! which is homogeneous of degree one, an involution (hat . hat = id), a
//! multiplicative automorphism, and covariant under local unitaries. It is
//! not renormalized.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::CMatrix;
use crate::svd;

/// Factorization threshold, applied to |det C|^(2/n).
pub const EPS_FACT: f64 = 1e-9;

/// Trace-norm tolerance enforced at construction.
pub const NORM_TOL: f64 = 1e-12;

/// Unitarity tolerance for local operations.
pub const UNITARY_TOL: f64 = 1e-12;

/// Bipartite pure state: n x n coefficient matrix with unit trace norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    c: CMatrix,
}

impl BipartiteState {
    /// Normalizes the given coefficient matrix. Rejects non-finite entries
    /// and the zero matrix.
    pub fn from_matrix(c: CMatrix) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::invalid("coefficient matrix has non-finite entries"));
        }
        let norm = c.frobenius_norm();
        if norm == 0.0 {
            return Err(Error::invalid("coefficient matrix is zero"));
        }
        Ok(BipartiteState { c: c.scale(Complex64::new(1.0 / norm, 0.0)) })
    }

    /// Accepts a matrix that is already normalized to within `tol` and
    /// stores it as-is (no rescaling).
    pub fn from_matrix_with_tol(c: CMatrix, tol: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::invalid("coefficient matrix has non-finite entries"));
        }
        let norm = c.frobenius_norm();
        if (norm - 1.0).abs() > tol {
            return Err(Error::invalid(format!(
                "trace norm {norm} deviates from 1 by more than {tol:e}"
            )));
        }
        Ok(BipartiteState { c })
    }

    /// Already-normalized matrix, default tolerance.
    pub fn from_normalized(c: CMatrix) -> Result<Self> {
        Self::from_matrix_with_tol(c, NORM_TOL)
    }

    /// Diagonal two-level state diag(sqrt(alpha), sqrt(1-alpha)).
    pub fn diagonal_2x2(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha = {alpha} outside [0, 1]")));
        }
        let d = [
            Complex64::new(alpha.sqrt(), 0.0),
            Complex64::new((1.0 - alpha).sqrt(), 0.0),
        ];
        Ok(BipartiteState { c: CMatrix::from_diag(&d) })
    }

    /// Diagonal n-level state with occupations y_j (must sum to 1).
    pub fn from_occupations(y: &[f64]) -> Result<Self> {
        let sum: f64 = y.iter().sum();
        if y.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("occupations must be nonnegative and sum to 1"));
        }
        let d: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v.sqrt(), 0.0)).collect();
        Ok(BipartiteState { c: CMatrix::from_diag(&d) })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.c.dim()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.c
    }

    pub fn norm(&self) -> f64 {
        self.c.frobenius_norm()
    }

    pub fn det(&self) -> Complex64 {
        self.c.det()
    }

    pub fn det_magnitude(&self) -> f64 {
        self.c.det().norm()
    }

    /// |det C|^(2/n), the quantity the factorization threshold applies to.
    pub fn det_magnitude_scaled(&self) -> f64 {
        det_magnitude_scaled(&self.c)
    }
}

pub(crate) fn det_magnitude_scaled(c: &CMatrix) -> f64 {
    let n = c.dim();
    let d = c.det().norm();
    if n == 2 {
        d
    } else {
        d.powf(2.0 / n as f64)
    }
}

/// Overlap of two states, Tr(a' b), conjugate-linear in `a`.
pub fn inner(a: &BipartiteState, b: &BipartiteState) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(a.matrix().hs_inner(b.matrix()))
}

/// The hat map on a raw coefficient matrix. Fails on matrices within
/// `eps_fact` of the factorized boundary, where the inverse degenerates.
///
/// Output is generally not normalized.
pub fn hat(c: &CMatrix, eps_fact: f64) -> Result<CMatrix> {
    let n = c.dim();
    let det = c.det();
    let dscaled = if n == 2 { det.norm() } else { det.norm().powf(2.0 / n as f64) };
    if dscaled <= eps_fact {
        return Err(Error::domain(format!(
            "|det C|^(2/n) = {dscaled:e} at or below the factorization threshold {eps_fact:e}"
        )));
    }
    if n == 2 {
        // adjugate closed form: |det| (C')^(-1) = (det/|det|) [[d*, -c*], [-b*, a*]]
        let phase = det / det.norm();
        let out = [
            phase * c.at(1, 1).conj(),
            -phase * c.at(1, 0).conj(),
            -phase * c.at(0, 1).conj(),
            phase * c.at(0, 0).conj(),
        ];
        return CMatrix::from_slice(2, &out);
    }
    let inv_adj = c.adjoint().inverse()?;
    Ok(inv_adj.scale(Complex64::new(dscaled, 0.0)))
}

/// Hat map on a state, with the default threshold.
pub fn hat_state(s: &BipartiteState) -> Result<CMatrix> {
    hat(s.matrix(), EPS_FACT)
}

/// Two-level time reversal, C -> eps C* eps^T with eps = [[0, -1], [1, 0]].
///
/// Relation to the hat map on nonsingular 2x2 matrices:
/// hat(C) = e^{+i arg det C} time_reversal(C). The + sign is tied to this
/// eps convention; the algebra sweep in the test suite pins it.
pub fn time_reversal(c: &CMatrix) -> Result<CMatrix> {
    if c.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: c.dim() });
    }
    let out = [
        c.at(1, 1).conj(),
        -c.at(1, 0).conj(),
        -c.at(0, 1).conj(),
        c.at(0, 0).conj(),
    ];
    CMatrix::from_slice(2, &out)
}

/// Schmidt form C = U * diag(gamma) * V, gamma descending, U and V unitary.
#[derive(Debug, Clone)]
pub struct SchmidtForm {
    pub u: CMatrix,
    pub gamma: Vec<f64>,
    pub v: CMatrix,
}

impl SchmidtForm {
    pub fn reconstruct(&self) -> CMatrix {
        let d: Vec<Complex64> = self.gamma.iter().map(|&g| Complex64::new(g, 0.0)).collect();
        self.u.mul(&CMatrix::from_diag(&d)).mul(&self.v)
    }

    pub fn rank(&self) -> usize {
        self.gamma.iter().filter(|&&g| g > 0.0).count()
    }
}

pub fn schmidt(s: &BipartiteState) -> SchmidtForm {
    let f = svd::svd(s.matrix());
    SchmidtForm { u: f.u, gamma: f.sigma, v: f.v }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntanglementTag {
    Factorized,
    PartiallyEntangled,
    MaximallyEntangled,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EntanglementClass {
    pub tag: EntanglementTag,
    /// |det C|; ranges over [0, (1/n)^(n/2)] for normalized states.
    pub det_magnitude: f64,
}

/// Classifies by determinant magnitude: zero boundary = factorized, the
/// (1/n)^(n/2) ceiling = maximally entangled. For n = 2 the ceiling is 1/2.
pub fn classify(s: &BipartiteState, eps_fact: f64) -> EntanglementClass {
    let n = s.dim();
    let d = s.det_magnitude();
    let dscaled = s.det_magnitude_scaled();
    let ceiling = (1.0 / n as f64).powf(n as f64 / 2.0);
    let tag = if dscaled < eps_fact {
        EntanglementTag::Factorized
    } else if (d - ceiling).abs() < eps_fact {
        EntanglementTag::MaximallyEntangled
    } else {
        EntanglementTag::PartiallyEntangled
    };
    EntanglementClass { tag, det_magnitude: d }
}

/// Local action C -> A C B. Both operators must be unitary to within 1e-12.
pub fn apply_local(a: &CMatrix, s: &BipartiteState, b: &CMatrix) -> Result<BipartiteState> {
    let n = s.dim();
    for (m, name) in [(a, "A"), (b, "B")] {
        if m.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
        }
        let defect = m.unitarity_defect();
        if defect > UNITARY_TOL {
            let _ = name;
            return Err(Error::NotUnitary(defect));
        }
    }
    let c = a.mul(s.matrix()).mul(b);
    BipartiteState::from_matrix_with_tol(c, 1e-10)
}
