//! Seeded sampling of states and unitaries for property sweeps.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::matrix::CMatrix;
use crate::state_algebra::BipartiteState;

pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn gaussian_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    // Box-Muller; u in (0,1]
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v: f64 = rng.gen();
    let r = (-2.0 * u.ln()).sqrt();
    let a = 2.0 * std::f64::consts::PI * v;
    (r * a.cos(), r * a.sin())
}

/// Complex Ginibre matrix, entries standard complex gaussian.
pub fn ginibre<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let (re, im) = gaussian_pair(rng);
            m.set(i, j, Complex64::new(re, im));
        }
    }
    m
}

/// Haar-ish unitary from Gram-Schmidt on a Ginibre sample. Exactness of the
/// distribution is irrelevant here; unitarity to machine precision is what
/// the covariance checks need.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    loop {
        let g = ginibre(n, rng);
        if let Some(u) = gram_schmidt(&g) {
            return u;
        }
    }
}

fn gram_schmidt(g: &CMatrix) -> Option<CMatrix> {
    let n = g.dim();
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<Complex64> = (0..n).map(|i| g.at(i, k)).collect();
        for prev in &cols {
            let overlap: Complex64 = prev.iter().zip(&v).map(|(p, x)| p.conj() * x).sum();
            for (xi, pi) in v.iter_mut().zip(prev) {
                *xi -= overlap * pi;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return None;
        }
        let inv = Complex64::new(1.0 / norm, 0.0);
        for xi in &mut v {
            *xi *= inv;
        }
        cols.push(v);
    }
    let mut u = CMatrix::zeros(n);
    for (k, col) in cols.iter().enumerate() {
        for i in 0..n {
            u.set(i, k, col[i]);
        }
    }
    Some(u)
}

/// Normalized random state.
pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> BipartiteState {
    loop {
        let g = ginibre(n, rng);
        if g.frobenius_norm() > 1e-6 {
            return BipartiteState::from_matrix(g).expect("finite nonzero sample");
        }
    }
}

/// Normalized random state with |det C|^(2/n) above the given floor, so the
/// hat map is well-conditioned on it.
pub fn random_nonsingular_state<R: Rng>(n: usize, rng: &mut R, det_floor: f64) -> BipartiteState {
    loop {
        let s = random_state(n, rng);
        if s.det_magnitude_scaled() > det_floor {
            return s;
        }
    }
}

/// Random diagonal-cell state diag(sqrt(y0), sqrt(y1) e^{i phi}).
pub fn random_diagonal_state<R: Rng>(rng: &mut R) -> BipartiteState {
    let y0: f64 = 0.05 + 0.9 * rng.gen::<f64>();
    let phi: f64 = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
    let mut m = CMatrix::zeros(2);
    m.set(0, 0, Complex64::new(y0.sqrt(), 0.0));
    m.set(1, 1, Complex64::from_polar((1.0 - y0).sqrt(), phi));
    BipartiteState::from_matrix(m).expect("normalized by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_samples_are_unitary() {
        let mut rng = rng_from_seed(11);
        for n in [2usize, 3, 4] {
            let u = random_unitary(n, &mut rng);
            assert!(u.unitarity_defect() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = random_state(2, &mut rng_from_seed(7));
        let b = random_state(2, &mut rng_from_seed(7));
        assert_eq!(a.matrix().data(), b.matrix().data());
    }
}
