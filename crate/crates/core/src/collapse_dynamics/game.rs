//! The noisy collapse game.
//!
//! Each play draws a fair sign, stakes the smaller branch weight z, and
//! integrates the flow until that weight either doubles (the play ends, the
//! game continues) or the state factorizes (the game ends). Because the
//! progress variable tau advances by exactly z per play, fortunes perform a
//! fair double-or-nothing martingale and the branch frequencies reproduce
//! the initial weights.
//!
//! The integrator here is a hand-rolled RK4 on the four matrix entries,
//! kept allocation free so large ensembles stay cheap on one core.

use num_complex::Complex64;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::NORM_DRIFT_TOL;
use super::{MeasurementOperator, PlayRecord, Trajectory};
use crate::error::{Error, Result};
use crate::state_algebra::{BipartiteState, EPS_FACT};

const MAX_PLAYS: usize = 4096;

/// Counter-based randomness: one master seed, one independent stream per
/// trajectory. Draws consume the stream sequentially, so results are
/// reproducible for a (seed, index) pair no matter how work is scheduled.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, trajectory_index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(trajectory_index);
        RngStream { rng }
    }

    /// Fair sign, +1 or -1.
    pub fn draw_sign(&mut self) -> i8 {
        if self.rng.next_u32() & 1 == 1 {
            1
        } else {
            -1
        }
    }
}

type C2 = [Complex64; 4];

#[inline]
fn fortunes2(e: &C2) -> (f64, f64) {
    (
        e[0].norm_sqr() + e[1].norm_sqr(),
        e[2].norm_sqr() + e[3].norm_sqr(),
    )
}

#[inline]
fn det_abs2(e: &C2) -> f64 {
    (e[0] * e[3] - e[1] * e[2]).norm()
}

#[inline]
fn norm2(e: &C2) -> f64 {
    (e[0].norm_sqr() + e[1].norm_sqr() + e[2].norm_sqr() + e[3].norm_sqr()).sqrt()
}

/// L1 hat(C) for L1 = k diag(1, -1): rows of the hat map scaled by +-k.
#[inline]
fn rhs2(e: &C2, k: f64) -> C2 {
    let det = e[0] * e[3] - e[1] * e[2];
    let mag = det.norm();
    // at the boundary the flow direction is the zero matrix's limit; the
    // caller never integrates from there
    let phase = if mag > 0.0 { det / mag } else { Complex64::new(1.0, 0.0) };
    [
        k * phase * e[3].conj(),
        -k * phase * e[2].conj(),
        k * phase * e[1].conj(),
        -k * phase * e[0].conj(),
    ]
}

#[inline]
fn axpy(e: &C2, d: &C2, h: f64) -> C2 {
    [
        e[0] + h * d[0],
        e[1] + h * d[1],
        e[2] + h * d[2],
        e[3] + h * d[3],
    ]
}

/// One RK4 step of the two-level flow, co-integrating
/// dtau/dt = |eta| |det C|.
#[inline]
fn rk4_step2(e: &C2, tau: f64, h: f64, k: f64, eta_abs: f64) -> (C2, f64) {
    let k1 = rhs2(e, k);
    let p1 = eta_abs * det_abs2(e);
    let e2 = axpy(e, &k1, h / 2.0);
    let k2 = rhs2(&e2, k);
    let p2 = eta_abs * det_abs2(&e2);
    let e3 = axpy(e, &k2, h / 2.0);
    let k3 = rhs2(&e3, k);
    let p3 = eta_abs * det_abs2(&e3);
    let e4 = axpy(e, &k3, h);
    let k4 = rhs2(&e4, k);
    let p4 = eta_abs * det_abs2(&e4);
    let w = h / 6.0;
    let out = [
        e[0] + w * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0]),
        e[1] + w * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1]),
        e[2] + w * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2]),
        e[3] + w * (k1[3] + 2.0 * (k2[3] + k3[3]) + k4[3]),
    ];
    (out, tau + w * (p1 + 2.0 * (p2 + p3) + p4))
}

struct PlayEnd {
    e: C2,
    tau: f64,
    t: f64,
    record: PlayRecord,
    game_over: bool,
}

/// Integrate one play from (e, tau, t) with the drawn sign already chosen.
fn play2(
    e0: &C2,
    tau0: f64,
    t0: f64,
    sign: i8,
    half_eta: f64,
    eta_abs: f64,
    dt: f64,
) -> Result<PlayEnd> {
    let (y0, y1) = fortunes2(e0);
    let (stake, staker) = if y0 <= y1 { (y0, 0usize) } else { (y1, 1usize) };
    let target = 2.0 * stake;
    let k = sign as f64 * half_eta;

    let doubled = |e: &C2| {
        let (a, b) = fortunes2(e);
        (if staker == 0 { a } else { b }) >= target
    };

    // events are located to 1e-13 in t: an overshoot eps in the stake makes
    // the next play's target land on the flat top of its weight curve, which
    // turns eps into a sqrt(eps) timing error, so locating coarsely here
    // costs five orders of magnitude downstream
    let width_tol = 1e-13;
    let max_steps = ((4.0 * std::f64::consts::PI / (eta_abs * dt)).ceil() as usize).max(64);

    let mut e = *e0;
    let mut tau = tau0;
    let mut t = t0;
    for _ in 0..max_steps {
        // det keeps its phase along the flow, so ruin is the signed
        // projection onto the pre-step ray reaching zero; the magnitude
        // alone grows back past a crossing and would miss it
        let det_pre = e[0] * e[3] - e[1] * e[2];
        let g0 = det_pre.norm();
        let ray = det_pre / g0;
        let ruined =
            |x: &C2| ((x[0] * x[3] - x[1] * x[2]) * ray.conj()).re <= EPS_FACT;

        // d|det|/dt = k (y1 - y0); cap the step by the linear time to the
        // boundary, else stages past the crossing see the flipped rhs phase
        // and their sum cancels the net det motion, hiding the event
        let (a, b) = fortunes2(&e);
        let shrink = k * (b - a);
        let mut h = dt;
        if shrink < 0.0 {
            h = h.min(0.8 * g0 / (-shrink));
        }

        let (trial, tau_trial) = rk4_step2(&e, tau, h, k, eta_abs);
        // crossing steps get bisected, so only accepted steps are held to
        // the drift bound; the rhs phase flips across det = 0
        if !(ruined(&trial) || doubled(&trial)) {
            let drift = (norm2(&trial) - norm2(&e)).abs();
            if drift > NORM_DRIFT_TOL {
                return Err(Error::StepTooLarge(drift));
            }
        }
        if ruined(&trial) || doubled(&trial) {
            let mut lo = 0.0f64;
            let mut hi = h;
            let mut hit = (trial, tau_trial);
            while hi - lo > width_tol {
                let mid = 0.5 * (lo + hi);
                let probe = rk4_step2(&e, tau, mid, k, eta_abs);
                if ruined(&probe.0) || doubled(&probe.0) {
                    hi = mid;
                    hit = probe;
                } else {
                    lo = mid;
                }
            }
            let game_over = ruined(&hit.0);
            let record = PlayRecord {
                sign,
                stake,
                tau_start: tau0,
                tau_end: hit.1,
                t_start: t0,
                t_end: t + hi,
            };
            return Ok(PlayEnd { e: hit.0, tau: hit.1, t: t + hi, record, game_over });
        }
        e = trial;
        tau = tau_trial;
        t += h;
    }
    Err(Error::domain("play did not settle within the step budget"))
}

fn canonical_c2(s: &BipartiteState, m: &MeasurementOperator) -> Result<(C2, f64, f64)> {
    let half = m.canonical_half_eta()?;
    if s.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: s.dim() });
    }
    let c = s.matrix();
    let e = [c.at(0, 0), c.at(0, 1), c.at(1, 0), c.at(1, 1)];
    Ok((e, half.abs() * 2.0, half.abs()))
}

fn state_of(e: &C2) -> Result<BipartiteState> {
    let m = crate::matrix::CMatrix::from_slice(2, e).expect("fixed 2x2 layout");
    BipartiteState::from_matrix_with_tol(m, 1e-6)
}

/// Outcome of one play as seen by callers.
#[derive(Debug, Clone)]
pub struct PlayStep {
    pub record: PlayRecord,
    pub state: BipartiteState,
    pub game_over: bool,
}

/// Draw a sign and run a single play of the game from `s`.
pub fn play(
    s: &BipartiteState,
    m: &MeasurementOperator,
    rng: &mut RngStream,
    dt: f64,
) -> Result<PlayStep> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt must be positive and finite"));
    }
    let (e, eta_abs, half) = canonical_c2(s, m)?;
    if det_abs2(&e) <= EPS_FACT {
        return Err(Error::domain("state already factorized; no play possible"));
    }
    let sign = rng.draw_sign();
    let end = play2(&e, 0.0, 0.0, sign, half, eta_abs, dt)?;
    Ok(PlayStep { record: end.record, state: state_of(&end.e)?, game_over: end.game_over })
}

/// Run the game to factorization. Returns the play history, the winning
/// branch, and the total collapse time.
///
/// A state entering within `EPS_FACT` of a branch is treated as already
/// collapsed there, with zero plays and zero time.
pub fn collapse(
    s0: &BipartiteState,
    m: &MeasurementOperator,
    rng: &mut RngStream,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt must be positive and finite"));
    }
    let (e, eta_abs, half) = canonical_c2(s0, m)?;
    let (y0, y1) = fortunes2(&e);
    if y0.min(y1) <= EPS_FACT {
        let outcome = if y0 >= y1 { 0 } else { 1 };
        return Ok(Trajectory {
            samples: vec![(0.0, s0.clone())],
            plays: vec![],
            outcome: Some(outcome),
            termination_time: Some(0.0),
        });
    }

    let mut e = e;
    let mut tau = 0.0;
    let mut t = 0.0;
    let mut plays = Vec::new();
    for _ in 0..MAX_PLAYS {
        let sign = rng.draw_sign();
        let end = play2(&e, tau, t, sign, half, eta_abs, dt)?;
        plays.push(end.record);
        e = end.e;
        tau = end.tau;
        t = end.t;
        // a play can end by doubling exactly onto the boundary (stake 1/2
        // puts the target at the whole norm); the loser is then exhausted
        let exhausted = {
            let (a, b) = fortunes2(&e);
            a.min(b) <= EPS_FACT
        };
        if end.game_over || exhausted {
            let (a, b) = fortunes2(&e);
            let outcome = if a >= b { 0 } else { 1 };
            let final_state = state_of(&e)?;
            return Ok(Trajectory {
                samples: vec![(0.0, s0.clone()), (t, final_state)],
                plays,
                outcome: Some(outcome),
                termination_time: Some(t),
            });
        }
    }
    Err(Error::domain("game exceeded the play budget"))
}

/// Compact per-trajectory result of an ensemble run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CollapseRecord {
    pub outcome: u8,
    pub termination_time: f64,
    pub play_count: u32,
}

/// Ensemble summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BornStats {
    pub trajectories: u64,
    pub counts: [u64; 2],
    pub frequency: [f64; 2],
    pub mean_termination_time: f64,
    pub time_p5: f64,
    pub time_p50: f64,
    pub time_p95: f64,
    pub mean_play_count: f64,
}

#[derive(Debug, Clone)]
pub struct BornEnsemble {
    pub records: Vec<CollapseRecord>,
    pub stats: BornStats,
}

/// Interpolated percentile of an ascending-sorted slice.
pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Run `count` independent games of the collapse game, one rng stream per
/// trajectory index. Deterministic for a fixed (seed, count) at any thread
/// count because records are collected in index order.
pub fn born_ensemble(
    s0: &BipartiteState,
    m: &MeasurementOperator,
    count: u64,
    master_seed: u64,
    dt: f64,
) -> Result<BornEnsemble> {
    if count == 0 {
        return Err(Error::invalid("ensemble needs at least one trajectory"));
    }
    canonical_c2(s0, m)?;
    let records: Result<Vec<CollapseRecord>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(master_seed, i);
            let traj = collapse(s0, m, &mut rng, dt)?;
            Ok(CollapseRecord {
                outcome: traj.outcome.expect("finished game always has an outcome") as u8,
                termination_time: traj.termination_time.expect("finished game has a time"),
                play_count: traj.plays.len() as u32,
            })
        })
        .collect();
    let records = records?;

    let mut counts = [0u64; 2];
    let mut times: Vec<f64> = Vec::with_capacity(records.len());
    let mut play_sum = 0u64;
    for r in &records {
        counts[r.outcome as usize] += 1;
        times.push(r.termination_time);
        play_sum += r.play_count as u64;
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("collapse times are finite"));
    let mean_time = times.iter().sum::<f64>() / count as f64;
    let stats = BornStats {
        trajectories: count,
        counts,
        frequency: [counts[0] as f64 / count as f64, counts[1] as f64 / count as f64],
        mean_termination_time: mean_time,
        time_p5: percentile_sorted(&times, 5.0),
        time_p50: percentile_sorted(&times, 50.0),
        time_p95: percentile_sorted(&times, 95.0),
        mean_play_count: play_sum as f64 / count as f64,
    };
    Ok(BornEnsemble { records, stats })
}
