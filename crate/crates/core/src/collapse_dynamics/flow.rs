//! Fixed-step RK4 integration of the measurement flow with event location.
//!
//! Stopping events (boundary reached, a branch weight crossing a level, time
//! limit) are located by bisecting the step that first crosses the
//! predicate, re-stepping from the pre-event state, so the reported event
//! time is far tighter than the step size.

use num_complex::Complex64;

use super::{MeasurementOperator, PlayRecord, Sample};
use crate::error::{Error, Result};
use crate::matrix::CMatrix;
use crate::state_algebra::{self, BipartiteState, EPS_FACT};

/// Per-step norm drift above this aborts the run: the step resolves the
/// flow too coarsely near the boundary.
pub(crate) const NORM_DRIFT_TOL: f64 = 1e-8;

/// Stopping condition for [`flow_deterministic`].
#[derive(Debug, Clone, Copy)]
pub enum StopRule {
    /// Run until the factorized boundary, |det C|^(2/n) <= eps.
    Boundary,
    /// Stop at the given time (the boundary still stops the run early).
    TimeLimit(f64),
    /// Stop when branch weight `index` first reaches `level` (two-level
    /// canonical flows only).
    FortuneReaches { index: usize, level: f64 },
}

/// Integrated history of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// (t, state) at every accepted step, including t = 0 and the event.
    pub samples: Vec<Sample>,
    /// Plays of the noisy game; empty for deterministic runs.
    pub plays: Vec<PlayRecord>,
    /// Winning branch when the run ended factorized.
    pub outcome: Option<usize>,
    /// Time the factorized boundary was reached, when it was.
    pub termination_time: Option<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &BipartiteState {
        &self.samples.last().expect("trajectory holds at least the initial sample").1
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().expect("trajectory holds at least the initial sample").0
    }
}

struct FlowState {
    c: CMatrix,
    tau: f64,
}

/// rhs of the measurement-only flow plus the progress rate
/// dtau/dt = |eta| |det C|^(2/n).
fn rhs(c: &CMatrix, m: &MeasurementOperator, eta_abs: f64) -> Result<(CMatrix, f64)> {
    let hat = state_algebra::hat(c, 0.0)?;
    let dc = m.lambda1().mul(&hat).add(&hat.mul(m.lambda2()));
    let dtau = eta_abs * state_algebra::det_magnitude_scaled(c);
    Ok((dc, dtau))
}

fn rk4_step(
    s: &FlowState,
    h: f64,
    m: &MeasurementOperator,
    eta_abs: f64,
    first: &(CMatrix, f64),
) -> Result<FlowState> {
    let half = Complex64::new(h / 2.0, 0.0);
    let (k1, p1) = (first.0.clone(), first.1);
    let (k2, p2) = rhs(&s.c.add(&k1.scale(half)), m, eta_abs)?;
    let (k3, p3) = rhs(&s.c.add(&k2.scale(half)), m, eta_abs)?;
    let (k4, p4) = rhs(&s.c.add(&k3.scale(Complex64::new(h, 0.0))), m, eta_abs)?;
    let w = h / 6.0;
    let c = s
        .c
        .add(&k1.scale(Complex64::new(w, 0.0)))
        .add(&k2.scale(Complex64::new(2.0 * w, 0.0)))
        .add(&k3.scale(Complex64::new(2.0 * w, 0.0)))
        .add(&k4.scale(Complex64::new(w, 0.0)));
    let tau = s.tau + w * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
    Ok(FlowState { c, tau })
}

fn branch_weight(c: &CMatrix, index: usize) -> f64 {
    let mut y = 0.0;
    for k in 0..c.dim() {
        y += c.at(index, k).norm_sqr();
    }
    y
}

/// Integrate the measurement flow from `s0` with drive sign `sign`,
/// recording every step. The factorized boundary always stops the run;
/// `stop` can end it earlier.
pub fn flow_deterministic(
    s0: &BipartiteState,
    m: &MeasurementOperator,
    sign: i8,
    dt: f64,
    stop: StopRule,
) -> Result<Trajectory> {
    if s0.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: s0.dim() });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt must be positive and finite"));
    }
    if sign != 1 && sign != -1 {
        return Err(Error::invalid("sign must be +1 or -1"));
    }
    if m.eta() == 0.0 {
        return Err(Error::invalid("eta must be nonzero"));
    }
    let eta_abs = m.eta().abs();
    // fold the drawn sign and the sign of eta into the generators
    let flip = sign as f64 * m.eta().signum();
    let m_eff = MeasurementOperator::new(
        m.lambda1().scale(Complex64::new(flip, 0.0)),
        m.lambda2().scale(Complex64::new(flip, 0.0)),
        eta_abs,
    )?;

    if let StopRule::FortuneReaches { index, .. } = stop {
        m.canonical_half_eta()?;
        if index > 1 {
            return Err(Error::invalid("branch index must be 0 or 1"));
        }
    }

    let stop_hit = |c: &CMatrix| match stop {
        StopRule::Boundary | StopRule::TimeLimit(_) => false,
        StopRule::FortuneReaches { index, level } => branch_weight(c, index) >= level,
    };
    // det moves along a fixed ray through the origin under the measurement
    // flow, so the boundary event is the signed projection onto the
    // pre-step phase dropping to zero; plain |det| grows again on the far
    // side of a crossing and would hide it
    let eps_det = EPS_FACT.powf(s0.dim() as f64 / 2.0);

    let t_limit = match stop {
        StopRule::TimeLimit(t) if !(t.is_finite() && t >= 0.0) => {
            return Err(Error::invalid("time limit must be nonnegative and finite"))
        }
        StopRule::TimeLimit(t) => Some(t),
        _ => None,
    };

    let mut state = FlowState { c: s0.matrix().clone(), tau: 0.0 };
    let mut t = 0.0;
    let mut samples: Vec<Sample> = Vec::new();
    samples.push((0.0, s0.clone()));

    if state_algebra::det_magnitude_scaled(&state.c) <= EPS_FACT {
        return Err(Error::domain("initial state already lies on the factorized boundary"));
    }

    // any canonical run ends within pi/|eta|; give slack for generic generators
    let max_steps = ((8.0 * std::f64::consts::PI / (eta_abs * dt)).ceil() as usize).max(1024);
    let width_tol = (dt * dt).min(1e-9).max(1e-14);

    for _ in 0..max_steps {
        let det_pre = state.c.det();
        let g0 = det_pre.norm();
        if g0 <= eps_det {
            let outcome = (state.c.dim() == 2).then(|| {
                if branch_weight(&state.c, 0) >= branch_weight(&state.c, 1) { 0 } else { 1 }
            });
            return Ok(Trajectory { samples, plays: vec![], outcome, termination_time: Some(t) });
        }
        let ray = det_pre / g0;
        let at_boundary = |c: &CMatrix| (c.det() * ray.conj()).re <= eps_det;

        let mut h = dt;
        let mut limit_step = false;
        if let Some(tl) = t_limit {
            if t + h >= tl {
                h = tl - t;
                limit_step = true;
                if h <= 0.0 {
                    return Ok(Trajectory { samples, plays: vec![], outcome: None, termination_time: None });
                }
            }
        }

        // a step whose internal stages straddle det = 0 picks up the flipped
        // rhs phase on the far-side stages and the stage sum cancels the net
        // det motion, hiding the crossing from the end-of-step check; cap h
        // by the linear time to the boundary so no step straddles it
        let first = rhs(&state.c, &m_eff, eta_abs)?;
        let shrink = g0 * state.c.inverse()?.mul(&first.0).trace().re;
        if shrink < 0.0 {
            let cap = 0.8 * g0 / (-shrink);
            if cap < h {
                h = cap;
                limit_step = false;
            }
        }

        let trial = rk4_step(&state, h, &m_eff, eta_abs, &first)?;
        let event = at_boundary(&trial.c) || stop_hit(&trial.c);
        // the rhs is discontinuous across det = 0, so a crossing step has
        // inflated one-step error; it is about to be bisected, so the drift
        // check applies only to accepted steps
        if !event {
            let drift = (trial.c.frobenius_norm() - state.c.frobenius_norm()).abs();
            if drift > NORM_DRIFT_TOL {
                return Err(Error::StepTooLarge(drift));
            }
        }
        if event {
            // bisect the crossing inside [0, h], re-stepping from `state`
            let mut lo = 0.0f64;
            let mut hi = h;
            let mut hit = trial;
            while hi - lo > width_tol {
                let mid = 0.5 * (lo + hi);
                let probe = rk4_step(&state, mid, &m_eff, eta_abs, &first)?;
                if at_boundary(&probe.c) || stop_hit(&probe.c) {
                    hi = mid;
                    hit = probe;
                } else {
                    lo = mid;
                }
            }
            let t_hit = t + hi;
            let boundary = at_boundary(&hit.c);
            let outcome = if boundary && hit.c.dim() == 2 {
                Some(if branch_weight(&hit.c, 0) >= branch_weight(&hit.c, 1) { 0 } else { 1 })
            } else {
                None
            };
            let s_hit = BipartiteState::from_matrix_with_tol(hit.c, 1e-6)?;
            samples.push((t_hit, s_hit));
            return Ok(Trajectory {
                samples,
                plays: vec![],
                outcome,
                termination_time: boundary.then_some(t_hit),
            });
        }

        t += h;
        state = trial;
        samples.push((t, BipartiteState::from_matrix_with_tol(state.c.clone(), 1e-6)?));
        if limit_step {
            return Ok(Trajectory { samples, plays: vec![], outcome: None, termination_time: None });
        }
    }
    Err(Error::domain("no stopping event within the step budget"))
}
