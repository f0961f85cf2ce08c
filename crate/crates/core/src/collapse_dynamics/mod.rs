//! Collapse flows driven by the hat map.
//!
//! The evolution integrated here is
//!
//! ```text
//! dC/dt = L1 hat(C) + hat(C) L2 - i H1 C - i C H2 + R(C)
//! ```
//!
//! with hermitian measurement generators L1, L2 obeying Tr L1 + Tr L2 = 0
//! (that trace balance is exactly what conserves Tr C'C along the flow),
//! ordinary Hamiltonians H1, H2, and an optional linear two-particle
//! coupling R. The canonical two-level form is L1 = (eta/2) diag(1, -1),
//! L2 = 0: it drains weight from one measurement branch into the other at
//! rate eta sqrt(y0 y1), which is the deterministic half of the collapse
//! game in [`game`].

pub mod flow;
pub mod game;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::CMatrix;
use crate::state_algebra::{self, BipartiteState, EPS_FACT};

pub use flow::{flow_deterministic, StopRule, Trajectory};
pub use game::{born_ensemble, collapse, play, BornEnsemble, BornStats, CollapseRecord, PlayStep, RngStream};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;

/// Default integrator step for a given drive strength.
pub fn default_dt(eta: f64) -> f64 {
    1e-3 / eta.abs()
}

/// Measurement generator pair. `eta` is the scalar drive strength the
/// matrices were built from; for the canonical two-level form it equals
/// twice the leading diagonal entry of `lambda1`.
#[derive(Debug, Clone)]
pub struct MeasurementOperator {
    lambda1: CMatrix,
    lambda2: CMatrix,
    eta: f64,
}

impl MeasurementOperator {
    pub fn new(lambda1: CMatrix, lambda2: CMatrix, eta: f64) -> Result<Self> {
        if lambda1.dim() != lambda2.dim() {
            return Err(Error::DimensionMismatch {
                expected: lambda1.dim(),
                got: lambda2.dim(),
            });
        }
        for l in [&lambda1, &lambda2] {
            let defect = l.hermiticity_defect();
            if defect > HERMITIAN_TOL {
                return Err(Error::NotHermitian(defect));
            }
        }
        let tr = (lambda1.trace() + lambda2.trace()).norm();
        if tr > TRACE_TOL {
            return Err(Error::invalid(format!(
                "Tr(lambda1) + Tr(lambda2) = {tr:e}; probability conservation needs 0"
            )));
        }
        if !eta.is_finite() {
            return Err(Error::invalid("eta must be finite"));
        }
        Ok(MeasurementOperator { lambda1, lambda2, eta })
    }

    /// Canonical two-level form L1 = (eta/2) diag(1, -1), L2 = 0.
    pub fn canonical_2x2(eta: f64) -> Result<Self> {
        if !eta.is_finite() || eta == 0.0 {
            return Err(Error::invalid("eta must be finite and nonzero"));
        }
        let l1 = CMatrix::from_diag(&[
            Complex64::new(eta / 2.0, 0.0),
            Complex64::new(-eta / 2.0, 0.0),
        ]);
        Ok(MeasurementOperator { lambda1: l1, lambda2: CMatrix::zeros(2), eta })
    }

    #[inline]
    pub fn lambda1(&self) -> &CMatrix {
        &self.lambda1
    }

    #[inline]
    pub fn lambda2(&self) -> &CMatrix {
        &self.lambda2
    }

    #[inline]
    pub fn eta(&self) -> f64 {
        self.eta
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lambda1.dim()
    }

    /// Half drive strength of the canonical two-level form, signed. Errors
    /// when the operator is not in that form.
    pub(crate) fn canonical_half_eta(&self) -> Result<f64> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: self.dim() });
        }
        let l1 = &self.lambda1;
        let off = l1.at(0, 1).norm().max(l1.at(1, 0).norm());
        let a = l1.at(0, 0);
        let d = l1.at(1, 1);
        let sym = (a + d).norm();
        if off > 1e-14 || sym > 1e-14 || self.lambda2.max_abs() > 1e-14 {
            return Err(Error::invalid(
                "operator is not in the canonical two-level form diag(eta/2, -eta/2), 0",
            ));
        }
        Ok(a.re)
    }
}

/// Ordinary Hamiltonian pair, both hermitian.
#[derive(Debug, Clone)]
pub struct HamiltonianPair {
    h1: CMatrix,
    h2: CMatrix,
}

impl HamiltonianPair {
    pub fn new(h1: CMatrix, h2: CMatrix) -> Result<Self> {
        for h in [&h1, &h2] {
            let defect = h.hermiticity_defect();
            if defect > HERMITIAN_TOL {
                return Err(Error::NotHermitian(defect));
            }
        }
        if h1.dim() != h2.dim() {
            return Err(Error::DimensionMismatch { expected: h1.dim(), got: h2.dim() });
        }
        Ok(HamiltonianPair { h1, h2 })
    }

    pub fn h1(&self) -> &CMatrix {
        &self.h1
    }

    pub fn h2(&self) -> &CMatrix {
        &self.h2
    }
}

/// Sparse linear two-particle coupling: R(C)_{jk} = sum coeff * C_{mn}.
#[derive(Debug, Clone, Default)]
pub struct TwoParticleCoupling {
    terms: Vec<((usize, usize), (usize, usize), Complex64)>,
}

impl TwoParticleCoupling {
    pub fn new(terms: Vec<((usize, usize), (usize, usize), Complex64)>) -> Self {
        TwoParticleCoupling { terms }
    }

    /// Exchange coupling between the two diagonal cells of a two-level pair:
    /// R(C)_00 = (i gamma / 2) C_11 and R(C)_11 = (i gamma / 2) C_00.
    /// Equal coefficients make the action antihermitian, so the norm
    /// derivative vanishes identically.
    pub fn exchange_2x2(gamma: Complex64) -> Self {
        let g = Complex64::new(0.0, 0.5) * gamma;
        TwoParticleCoupling {
            terms: vec![((0, 0), (1, 1), g), ((1, 1), (0, 0), g)],
        }
    }

    pub fn apply(&self, c: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(c.dim());
        for &((oj, ok), (ij, ik), coeff) in &self.terms {
            let v = out.at(oj, ok) + coeff * c.at(ij, ik);
            out.set(oj, ok, v);
        }
        out
    }
}

/// Right-hand side of the modified evolution at coefficient matrix `c`.
pub fn rhs_modified(
    c: &CMatrix,
    m: &MeasurementOperator,
    h: Option<&HamiltonianPair>,
    r: Option<&TwoParticleCoupling>,
) -> Result<CMatrix> {
    if c.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: c.dim() });
    }
    let hat = state_algebra::hat(c, EPS_FACT)?;
    let mut out = m.lambda1.mul(&hat).add(&hat.mul(&m.lambda2));
    if let Some(h) = h {
        let minus_i = Complex64::new(0.0, -1.0);
        out = out
            .add(&h.h1.mul(c).scale(minus_i))
            .add(&c.mul(&h.h2).scale(minus_i));
    }
    if let Some(r) = r {
        out = out.add(&r.apply(c));
    }
    Ok(out)
}

/// Frame change removing the ordinary Hamiltonian evolution:
/// C -> e^{-i H1 t} C e^{-i H2 t}.
pub fn to_interaction_picture(
    s: &BipartiteState,
    h: &HamiltonianPair,
    t: f64,
) -> Result<BipartiteState> {
    if s.dim() != h.h1.dim() {
        return Err(Error::DimensionMismatch { expected: h.h1.dim(), got: s.dim() });
    }
    let u1 = h.h1.scale(Complex64::new(0.0, -t)).expm();
    let u2 = h.h2.scale(Complex64::new(0.0, -t)).expm();
    BipartiteState::from_matrix_with_tol(u1.mul(s.matrix()).mul(&u2), 1e-10)
}

/// Branch weights of the two measurement outcomes: row sums of |C|^2 in the
/// eigenbasis of the canonical generator (y0 for the +eta/2 branch).
pub fn fortunes(s: &BipartiteState, m: &MeasurementOperator) -> Result<(f64, f64)> {
    m.canonical_half_eta()?;
    if s.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: s.dim() });
    }
    let c = s.matrix();
    let y0 = c.at(0, 0).norm_sqr() + c.at(0, 1).norm_sqr();
    let y1 = c.at(1, 0).norm_sqr() + c.at(1, 1).norm_sqr();
    Ok((y0, y1))
}

/// Hermitian positive-definite kernel V(C) = |det C| (C C')^(-1) of the
/// transfer operator Z = I + L V(C) dt.
pub fn transfer_v(s: &BipartiteState) -> Result<CMatrix> {
    let c = s.matrix();
    let det_mag = c.det().norm();
    if state_algebra::det_magnitude_scaled(c) <= EPS_FACT {
        return Err(Error::domain("transfer kernel degenerates at the factorized boundary"));
    }
    let gram_inv = c.mul(&c.adjoint()).inverse()?;
    Ok(gram_inv.scale(Complex64::new(det_mag, 0.0)))
}

/// One transfer-operator step, Z(dt) C = C + dt L1 V(C) C.
///
/// V(C) C equals hat(C) identically, so this coincides with one explicit
/// Euler step of the measurement flow; the operator form exists for its
/// covariance properties, not as a distinct integrator.
pub fn transfer_step(s: &BipartiteState, m: &MeasurementOperator, dt: f64) -> Result<CMatrix> {
    if m.lambda2.max_abs() > 0.0 {
        return Err(Error::invalid("transfer operator is defined for a left generator only"));
    }
    if s.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: s.dim() });
    }
    let v = transfer_v(s)?;
    let c = s.matrix();
    Ok(c.add(&m.lambda1.mul(&v).mul(c).scale(Complex64::new(dt, 0.0))))
}

/// Progress variable tau(t) of the two-level diagonal flow started from
/// y0 = alpha with positive drive:
/// tau = (1 - 2 alpha + sin(|eta| t - asin(1 - 2 alpha))) / 2.
fn tau_of_t(alpha: f64, eta_abs: f64, t: f64) -> f64 {
    0.5 * (1.0 - 2.0 * alpha + (eta_abs * t - (1.0 - 2.0 * alpha).asin()).sin())
}

/// Closed-form branch weights (y0, y1) of the diagonal two-level flow at
/// time t. Positive eta grows y0, negative eta mirrors the flow.
pub fn analytic_y(alpha: f64, eta: f64, t: f64) -> Result<(f64, f64)> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    if eta == 0.0 || !eta.is_finite() {
        return Err(Error::invalid("eta must be finite and nonzero"));
    }
    let sign = if eta > 0.0 { 1.0 } else { -1.0 };
    let t0 = termination_time(alpha, eta.abs(), if sign > 0.0 { 1 } else { -1 })?;
    if !(0.0..=t0 + 1e-12).contains(&t) {
        return Err(Error::domain(format!(
            "t = {t} outside the flow's lifetime [0, {t0}]"
        )));
    }
    let y0 = if sign > 0.0 {
        alpha + tau_of_t(alpha, eta.abs(), t)
    } else {
        // mirror: the downward flow from alpha is the upward flow from 1-alpha
        1.0 - ((1.0 - alpha) + tau_of_t(1.0 - alpha, eta.abs(), t))
    };
    Ok((y0.clamp(0.0, 1.0), (1.0 - y0).clamp(0.0, 1.0)))
}

/// Lifetime of the deterministic diagonal flow from y0 = alpha:
/// (pi/2 + sign * asin(1 - 2 alpha)) / |eta|.
pub fn termination_time(alpha: f64, eta: f64, sign: i8) -> Result<f64> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha = {alpha} must lie strictly inside (0, 1); the endpoints are already collapsed"
        )));
    }
    if eta == 0.0 || !eta.is_finite() {
        return Err(Error::invalid("eta must be finite and nonzero"));
    }
    if sign != 1 && sign != -1 {
        return Err(Error::invalid("sign must be +1 or -1"));
    }
    let a = (1.0 - 2.0 * alpha).asin();
    Ok((std::f64::consts::FRAC_PI_2 + sign as f64 * a) / eta.abs())
}

/// Single trajectory sample: time and state.
pub type Sample = (f64, BipartiteState);

/// One play of the collapse game.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlayRecord {
    /// Drawn drive sign, +1 or -1.
    pub sign: i8,
    /// Smaller branch weight at the start of the play; also the tau length.
    pub stake: f64,
    pub tau_start: f64,
    pub tau_end: f64,
    pub t_start: f64,
    pub t_end: f64,
}
