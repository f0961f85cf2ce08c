//! Dense square complex matrices, row-major.
//!
//! Everything here is sized for the small dimensions this crate works at
//! (n = 2 in the collapse game, a few tens at most elsewhere), so the
//! algorithms favour determinism and simplicity: closed forms for n <= 2,
//! partial-pivot elimination beyond that.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const C_I: Complex64 = Complex64::new(0.0, 1.0);

/// Square complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix { n, data: vec![C_ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C_ONE;
        }
        m
    }

    pub fn from_diag(d: &[Complex64]) -> Self {
        let n = d.len();
        let mut m = CMatrix::zeros(n);
        for (i, &v) in d.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Builds from a row-major slice of length n*n.
    pub fn from_slice(n: usize, data: &[Complex64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        Ok(CMatrix { n, data: data.to_vec() })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn conj(&self) -> Self {
        CMatrix { n: self.n, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j];
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        CMatrix { n: self.n, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C_ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    /// Hilbert-Schmidt inner product Tr(self† other).
    pub fn hs_inner(&self, other: &Self) -> Complex64 {
        debug_assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    /// Frobenius norm, equals the state trace-norm sqrt(Tr C†C).
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max deviation from hermiticity, max_ij |A_ij - conj(A_ji)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.n;
        let mut d = 0.0f64;
        for i in 0..n {
            for j in i..n {
                d = d.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        d
    }

    /// Max deviation of A†A from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint().mul(self).max_abs_diff(&CMatrix::identity(self.n))
    }

    pub fn det(&self) -> Complex64 {
        let n = self.n;
        match n {
            0 => C_ONE,
            1 => self.data[0],
            2 => self.data[0] * self.data[3] - self.data[1] * self.data[2],
            _ => self.det_lu(),
        }
    }

    /// LU with partial pivoting; the product of pivots carries the sign.
    fn det_lu(&self) -> Complex64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = C_ONE;
        for k in 0..n {
            let mut piv = k;
            let mut best = a[k * n + k].norm();
            for r in (k + 1)..n {
                let v = a[r * n + k].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return C_ZERO;
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                det = -det;
            }
            let pivot = a[k * n + k];
            det *= pivot;
            for r in (k + 1)..n {
                let f = a[r * n + k] / pivot;
                if f == C_ZERO {
                    continue;
                }
                for j in k..n {
                    let v = a[k * n + j];
                    a[r * n + j] -= f * v;
                }
            }
        }
        det
    }

    /// Adjugate closed form at n = 2, Gauss-Jordan with partial pivoting beyond.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        if n == 2 {
            let d = self.det();
            if d.norm() == 0.0 {
                return Err(Error::domain("singular matrix"));
            }
            let inv = [
                self.data[3] / d,
                -self.data[1] / d,
                -self.data[2] / d,
                self.data[0] / d,
            ];
            return CMatrix::from_slice(2, &inv);
        }
        let mut a = self.data.clone();
        let mut inv = CMatrix::identity(n).data;
        for k in 0..n {
            let mut piv = k;
            let mut best = a[k * n + k].norm();
            for r in (k + 1)..n {
                let v = a[r * n + k].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return Err(Error::domain("singular matrix"));
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                    inv.swap(k * n + j, piv * n + j);
                }
            }
            let pivot = a[k * n + k];
            for j in 0..n {
                a[k * n + j] /= pivot;
                inv[k * n + j] /= pivot;
            }
            for r in 0..n {
                if r == k {
                    continue;
                }
                let f = a[r * n + k];
                if f == C_ZERO {
                    continue;
                }
                for j in 0..n {
                    let av = a[k * n + j];
                    let iv = inv[k * n + j];
                    a[r * n + j] -= f * av;
                    inv[r * n + j] -= f * iv;
                }
            }
        }
        Ok(CMatrix { n, data: inv })
    }

    /// Matrix exponential by scaling-and-squaring with a Taylor kernel.
    ///
    /// The scaled norm is kept below 1/2 so the 24-term kernel is at
    /// machine precision; squarings undo the scaling.
    pub fn expm(&self) -> Self {
        let n = self.n;
        let norm = self.data.iter().map(|z| z.norm()).sum::<f64>(); // crude upper bound
        let mut s = 0u32;
        while norm / f64::powi(2.0, s as i32) > 0.5 {
            s += 1;
        }
        let a = self.scale(Complex64::new(1.0 / f64::powi(2.0, s as i32), 0.0));
        let mut term = CMatrix::identity(n);
        let mut sum = CMatrix::identity(n);
        for k in 1..=24 {
            term = term.mul(&a).scale(Complex64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
        }
        for _ in 0..s {
            sum = sum.mul(&sum);
        }
        sum
    }
}
