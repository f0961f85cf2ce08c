//! Competition between the nonlinear measurement drive and a linear
//! exchange coupling on the diagonal two-level cell.
//!
//! The coupled system for the two diagonal amplitudes is
//!
//! ```text
//! dc00/dt =  (eta/2) |c00 c11| / c00* + (i gamma / 2) c11
//! dc11/dt = -(eta/2) |c00 c11| / c11* + (i gamma / 2) c00
//! ```
//!
//! Both coupling terms carry the same +i gamma / 2 coefficient: that makes
//! the coupling antihermitian, so Re(c00* dc00 + c11* dc11) = 0 and the
//! norm is conserved exactly, and it is the convention under which the
//! polar reduction below holds.
//!
//! Writing c00 = cos(theta/2) e^{i a}, c11 = sin(theta/2) e^{i b} and
//! phi = b - a gives, in gamma = 1 units,
//!
//! ```text
//! dtheta/dt = -eta + sin phi        dphi/dt = cos phi * cot theta
//! ```
//!
//! with the conserved quantity sin(theta) cos(phi) tan(pi/4 + phi/2)^eta.
//! For |eta| <= 1 the flow has a stationary ray at theta = pi/2,
//! sin(phi) = eta; for |eta| > 1 every trajectory factorizes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::CMatrix;
use crate::state_algebra::BipartiteState;

/// Exchange coupling strength populating the two cross elements of the
/// linear two-particle term.
#[derive(Debug, Clone, Copy)]
pub struct SpinSpinCoupling {
    pub gamma: Complex64,
}

impl SpinSpinCoupling {
    pub fn new(gamma: Complex64) -> Self {
        SpinSpinCoupling { gamma }
    }

    pub fn coupling(&self) -> crate::collapse_dynamics::TwoParticleCoupling {
        crate::collapse_dynamics::TwoParticleCoupling::exchange_2x2(self.gamma)
    }
}

/// Point on the diagonal-state sphere: c00 = cos(theta/2),
/// c11 = sin(theta/2) e^{i phi}.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BlochPoint {
    pub theta: f64,
    pub phi: f64,
}

impl BlochPoint {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0 < theta && theta < std::f64::consts::PI) {
            return Err(Error::domain(format!("theta = {theta} outside (0, pi)")));
        }
        if !phi.is_finite() {
            return Err(Error::invalid("phi must be finite"));
        }
        Ok(BlochPoint { theta, phi })
    }

    /// The diagonal state this point represents.
    pub fn to_state(self) -> Result<BipartiteState> {
        let c00 = Complex64::new((self.theta / 2.0).cos(), 0.0);
        let c11 = Complex64::from_polar((self.theta / 2.0).sin(), self.phi);
        BipartiteState::from_normalized(CMatrix::from_diag(&[c00, c11]))
    }
}

/// Coupled amplitude equations on the diagonal cell.
pub fn coupled_rhs(
    c00: Complex64,
    c11: Complex64,
    eta: f64,
    gamma: f64,
) -> Result<(Complex64, Complex64)> {
    if c00.norm() == 0.0 || c11.norm() == 0.0 {
        return Err(Error::domain("coupled flow is singular at zero amplitude"));
    }
    let mag = (c00 * c11).norm();
    let ig = Complex64::new(0.0, gamma / 2.0);
    let d00 = 0.5 * eta * mag / c00.conj() + ig * c11;
    let d11 = -0.5 * eta * mag / c11.conj() + ig * c00;
    Ok((d00, d11))
}

/// Polar form of the coupled flow in gamma = 1 units.
pub fn polar_rhs(p: BlochPoint, eta: f64) -> Result<(f64, f64)> {
    let s = p.theta.sin();
    if s == 0.0 {
        return Err(Error::domain("polar flow is singular at the poles"));
    }
    Ok((-eta + p.phi.sin(), p.phi.cos() * p.theta.cos() / s))
}

/// Conserved quantity of the polar flow,
/// sin(theta) cos(phi) tan(pi/4 + phi/2)^eta. Defined on |phi| < pi/2.
pub fn motion_invariant(p: BlochPoint, eta: f64) -> Result<f64> {
    if p.phi.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::domain(format!(
            "phi = {} outside (-pi/2, pi/2); the tangent factor diverges",
            p.phi
        )));
    }
    let tanarg = (std::f64::consts::FRAC_PI_4 + p.phi / 2.0).tan();
    Ok(p.theta.sin() * p.phi.cos() * tanarg.powf(eta))
}

/// Stationary entangled state (1/sqrt2)(|00> + e^{i arcsin eta} |11>),
/// in gamma = 1 units. Exists for |eta| <= 1.
pub fn stationary_state(eta: f64) -> Result<BipartiteState> {
    if !(eta.abs() <= 1.0) {
        return Err(Error::domain(format!(
            "|eta| = {} > 1: collapse wins and no stationary state exists",
            eta.abs()
        )));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let c00 = Complex64::new(r, 0.0);
    let c11 = Complex64::from_polar(r, eta.asin());
    BipartiteState::from_normalized(CMatrix::from_diag(&[c00, c11]))
}

/// Residual motion of a diagonal state under the coupled flow, with the
/// global-phase direction projected out. A stationary ray moves only by an
/// overall phase, so this vanishes there while the raw rhs does not.
pub fn stationary_residual(s: &BipartiteState, eta: f64, gamma: f64) -> Result<f64> {
    if s.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: s.dim() });
    }
    let c = s.matrix();
    let off = c.at(0, 1).norm().max(c.at(1, 0).norm());
    if off > 1e-12 {
        return Err(Error::invalid("residual is defined on diagonal states"));
    }
    let (c00, c11) = (c.at(0, 0), c.at(1, 1));
    let (d00, d11) = coupled_rhs(c00, c11, eta, gamma)?;
    let overlap = c00.conj() * d00 + c11.conj() * d11;
    let r0 = d00 - overlap * c00;
    let r1 = d11 - overlap * c11;
    Ok((r0.norm_sqr() + r1.norm_sqr()).sqrt())
}

/// Nonlinearly induced relative phase arcsin(eta / gamma), principal
/// branch, valid for complex parameters.
pub fn induced_phase(eta: Complex64, gamma: Complex64) -> Result<Complex64> {
    if gamma.norm() == 0.0 {
        return Err(Error::domain("gamma must be nonzero"));
    }
    Ok((eta / gamma).asin())
}

/// How a polar trajectory behaved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Reached the factorized pole, or drove theta monotonically toward it.
    Collapsing,
    /// Stayed at its starting point.
    Stationary,
    /// Bounded, non-stationary orbit around the stationary point.
    Oscillating,
}

#[derive(Debug, Clone)]
pub struct CompetitionRun {
    /// (t, theta, phi), decimated.
    pub samples: Vec<(f64, f64, f64)>,
    pub regime: Regime,
    /// Time the pole stop fired, when it did.
    pub t_factorize: Option<f64>,
    pub theta_final: f64,
    pub phi_final: f64,
    /// Max relative drift of the motion invariant over the run, when the
    /// start lies in its domain; evaluated only at |phi| < pi/2 - 1e-6.
    pub invariant_drift: Option<f64>,
}

/// When the distance to a pole falls below this the run stops: the state
/// is factorized to well past the det boundary, and phi has settled onto
/// its limit.
pub const POLE_EPS: f64 = 1e-14;

fn polar_rk4(th: f64, ph: f64, h: f64, eta: f64) -> (f64, f64) {
    let f = |t: f64, p: f64| (-eta + p.sin(), p.cos() * t.cos() / t.sin());
    let (k1t, k1p) = f(th, ph);
    let (k2t, k2p) = f(th + 0.5 * h * k1t, ph + 0.5 * h * k1p);
    let (k3t, k3p) = f(th + 0.5 * h * k2t, ph + 0.5 * h * k2p);
    let (k4t, k4p) = f(th + h * k3t, ph + h * k3p);
    (
        th + h / 6.0 * (k1t + 2.0 * (k2t + k3t) + k4t),
        ph + h / 6.0 * (k1p + 2.0 * (k2p + k3p) + k4p),
    )
}

/// Integrate the polar flow from (theta0, phi0) in gamma = 1 units.
///
/// Steps shrink in proportion to the distance from the poles, so
/// collapsing runs resolve the phi limit instead of stepping over the
/// singularity; the stop fires at [`POLE_EPS`].
pub fn simulate_competition(
    theta0: f64,
    phi0: f64,
    eta: f64,
    tmax: f64,
    dt: f64,
) -> Result<CompetitionRun> {
    let start = BlochPoint::new(theta0, phi0)?;
    if !(dt > 0.0 && dt.is_finite() && tmax > 0.0 && tmax.is_finite()) {
        return Err(Error::invalid("tmax and dt must be positive and finite"));
    }

    let invariant_domain =
        |phi: f64| phi.abs() < std::f64::consts::FRAC_PI_2 - 1e-6;
    let k0 = invariant_domain(phi0)
        .then(|| motion_invariant(start, eta))
        .transpose()?
        .filter(|k| k.abs() > 1e-12);

    let mut th = theta0;
    let mut ph = phi0;
    let mut t = 0.0;
    let mut drift: Option<f64> = k0.map(|_| 0.0);
    let mut monotone_up = true;
    let mut monotone_down = true;
    let mut theta_min = theta0;
    let mut theta_max = theta0;

    let stride = ((tmax / dt) as usize / 4000).max(1);
    let mut samples = vec![(0.0, theta0, phi0)];
    let mut pole_hit = false;

    let max_steps = ((tmax / dt).ceil() as usize).saturating_add(40_000);
    let mut step_idx = 0usize;
    while step_idx < max_steps {
        step_idx += 1;
        let d_pole = th.min(std::f64::consts::PI - th);
        if d_pole.sin() <= POLE_EPS || d_pole <= POLE_EPS {
            pole_hit = true;
            break;
        }
        if t >= tmax {
            break;
        }
        let (dth, _) = polar_rhs(BlochPoint { theta: th, phi: ph }, eta)?;
        // 2% of the pole distance per step: the invariant trades absolute
        // theta error for relative near the pole, so the approach has to be
        // resolved much finer than the orbit
        let h_pole = if dth.abs() > 0.0 { 0.02 * d_pole / dth.abs() } else { dt };
        let h = dt.min(h_pole).min(tmax - t).max(0.0);
        if h == 0.0 {
            break;
        }
        let (th1, ph1) = polar_rk4(th, ph, h, eta);
        if !(th1.is_finite() && ph1.is_finite()) {
            return Err(Error::PoleFailure(th));
        }
        if !(0.0..=std::f64::consts::PI).contains(&th1) {
            return Err(Error::PoleFailure(th1));
        }
        if th1 > th {
            monotone_down = false;
        }
        if th1 < th {
            monotone_up = false;
        }
        th = th1;
        ph = ph1;
        t += h;
        theta_min = theta_min.min(th);
        theta_max = theta_max.max(th);
        if let (Some(k), true) = (k0, invariant_domain(ph)) {
            let know = motion_invariant(BlochPoint { theta: th, phi: ph }, eta)?;
            let rel = ((know - k) / k).abs();
            drift = drift.map(|d| d.max(rel));
        }
        if step_idx % stride == 0 {
            samples.push((t, th, ph));
        }
    }
    samples.push((t, th, ph));

    let excursion = (theta_max - theta0).max(theta0 - theta_min);
    let regime = if pole_hit {
        Regime::Collapsing
    } else if excursion < 1e-6 {
        Regime::Stationary
    } else if (monotone_up || monotone_down) && excursion > 0.3 {
        Regime::Collapsing
    } else {
        Regime::Oscillating
    };

    Ok(CompetitionRun {
        samples,
        regime,
        t_factorize: pole_hit.then_some(t),
        theta_final: th,
        phi_final: ph,
        invariant_drift: drift,
    })
}

/// How a linewidth quoted in hertz is converted to an energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencyConvention {
    /// Ordinary frequency f: E = hbar * 2 pi f.
    OrdinaryHertz,
    /// The quoted number is already an angular rate in rad/s: E = hbar * w.
    RadiansPerSecond,
}

/// hbar in eV s.
pub const HBAR_EV_S: f64 = 6.582e-16;

/// Linewidth energy in eV for a rate quoted in hertz.
pub fn linewidth_energy(rate_hz: f64, convention: FrequencyConvention) -> Result<f64> {
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::invalid("rate must be positive and finite"));
    }
    Ok(match convention {
        FrequencyConvention::OrdinaryHertz => HBAR_EV_S * 2.0 * std::f64::consts::PI * rate_hz,
        FrequencyConvention::RadiansPerSecond => HBAR_EV_S * rate_hz,
    })
}

/// Measurement delay hbar / E in seconds for a linewidth energy in eV.
pub fn ion_trap_delay(linewidth_ev: f64) -> Result<f64> {
    if !(linewidth_ev > 0.0 && linewidth_ev.is_finite()) {
        return Err(Error::invalid("linewidth must be positive and finite"));
    }
    Ok(HBAR_EV_S / linewidth_ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapse_dynamics::{rhs_modified, MeasurementOperator};
    use crate::sample;
    use rand::Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn random_pair<R: Rng>(rng: &mut R) -> (Complex64, Complex64) {
        loop {
            let (a, b) = sample::gaussian_pair(rng);
            let (c, d) = sample::gaussian_pair(rng);
            let c00 = Complex64::new(a, b);
            let c11 = Complex64::new(c, d);
            let n = (c00.norm_sqr() + c11.norm_sqr()).sqrt();
            if n > 1e-3 && c00.norm() > 1e-3 && c11.norm() > 1e-3 {
                return (c00 / n, c11 / n);
            }
        }
    }

    #[test]
    fn coupled_rhs_conserves_norm() {
        let mut rng = sample::rng_from_seed(31);
        for _ in 0..200 {
            let (c00, c11) = random_pair(&mut rng);
            let (d00, d11) = coupled_rhs(c00, c11, 0.8, 1.3).unwrap();
            let ndot = (c00.conj() * d00 + c11.conj() * d11).re;
            assert!(ndot.abs() < 1e-14, "norm derivative {ndot:e}");
        }
        // eta = 0: pure rotation, zero exactly
        let (d00, d11) = coupled_rhs(
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
            0.0,
            1.0,
        )
        .unwrap();
        let ndot = (Complex64::new(0.6, 0.0).conj() * d00
            + Complex64::new(0.0, 0.8).conj() * d11)
            .re;
        assert_eq!(ndot, 0.0);
    }

    #[test]
    fn coupled_rhs_without_coupling_matches_the_matrix_flow() {
        let mut rng = sample::rng_from_seed(8);
        let m = MeasurementOperator::canonical_2x2(0.9).unwrap();
        for _ in 0..50 {
            let (c00, c11) = random_pair(&mut rng);
            let (d00, d11) = coupled_rhs(c00, c11, 0.9, 0.0).unwrap();
            let c = CMatrix::from_diag(&[c00, c11]);
            let full = rhs_modified(&c, &m, None, None).unwrap();
            assert!((full.at(0, 0) - d00).norm() < 1e-12);
            assert!((full.at(1, 1) - d11).norm() < 1e-12);
        }
    }

    #[test]
    fn polar_rhs_point_values() {
        let (dt, dp) =
            polar_rhs(BlochPoint { theta: FRAC_PI_2, phi: FRAC_PI_2 }, 1.0).unwrap();
        assert!(dt.abs() < 1e-15 && dp.abs() < 1e-16);
        let (dt, dp) = polar_rhs(BlochPoint { theta: FRAC_PI_4, phi: 0.0 }, 0.0).unwrap();
        assert!(dt.abs() < 1e-15);
        assert!((dp - 1.0).abs() < 1e-14);
    }

    #[test]
    fn polar_rhs_is_the_chain_rule_image_of_coupled_rhs() {
        let mut rng = sample::rng_from_seed(63);
        for _ in 0..200 {
            let theta = rng.gen_range(0.1..PI - 0.1);
            let phi = rng.gen_range(-1.4..1.4);
            let eta = rng.gen_range(-2.0..2.0);
            let c00 = Complex64::from_polar((theta / 2.0).cos(), 0.37);
            let c11 = Complex64::from_polar((theta / 2.0).sin(), 0.37 + phi);
            let (d00, d11) = coupled_rhs(c00, c11, eta, 1.0).unwrap();
            // theta from |c11|^2 = sin^2(theta/2), phi from the phase split
            let dtheta = 2.0 * (c11.conj() * d11).re / ((theta / 2.0).sin() * (theta / 2.0).cos());
            let dphi = (d11 / c11).im - (d00 / c00).im;
            let (pt, pp) = polar_rhs(BlochPoint { theta, phi }, eta).unwrap();
            assert!((dtheta - pt).abs() < 1e-10, "theta' {dtheta} vs {pt}");
            assert!((dphi - pp).abs() < 1e-10, "phi' {dphi} vs {pp}");
        }
    }

    #[test]
    fn invariant_point_value_and_domain() {
        // frozen reference
        let k = motion_invariant(BlochPoint { theta: 1.0, phi: 0.3 }, 0.7).unwrap();
        assert!((k - 0.9949402238966805).abs() < 1e-12, "k = {k}");
        assert!(motion_invariant(BlochPoint { theta: 1.0, phi: FRAC_PI_2 }, 1.0).is_err());
    }

    #[test]
    fn invariant_is_conserved_along_flows() {
        let run = simulate_competition(FRAC_PI_2, 0.0, 0.5, 5.0, 1e-4).unwrap();
        let drift = run.invariant_drift.unwrap();
        assert!(drift < 1e-6, "relative drift {drift:e}");
        assert_eq!(run.regime, Regime::Oscillating);

        // strong drive: conserved until the boundary neighborhood
        let run = simulate_competition(FRAC_PI_2, 0.0, 3.0, 10.0, 1e-4).unwrap();
        assert_eq!(run.regime, Regime::Collapsing);
        let k0 = motion_invariant(BlochPoint { theta: FRAC_PI_2, phi: 0.0 }, 3.0).unwrap();
        for &(_, th, ph) in &run.samples {
            if th.sin() / 2.0 > 1e-6 && ph.abs() < FRAC_PI_2 - 1e-6 {
                let k = motion_invariant(BlochPoint { theta: th, phi: ph }, 3.0).unwrap();
                assert!(
                    ((k - k0) / k0).abs() < 1e-6,
                    "theta {th} phi {ph}: k {k} vs {k0}"
                );
            }
        }
    }

    #[test]
    fn stationary_states_have_no_transverse_motion() {
        for eta in [-0.9, -0.5, 0.0, 0.5, 0.9] {
            let s = stationary_state(eta).unwrap();
            let r = stationary_residual(&s, eta, 1.0).unwrap();
            assert!(r < 1e-12, "eta = {eta}: residual {r:e}");
        }
        assert!(stationary_state(1.2).is_err());
        // eta = 1 puts the full pi/2 phase on c11
        let s = stationary_state(1.0).unwrap();
        let c11 = s.matrix().at(1, 1);
        assert!((c11 - Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2)).norm() < 1e-15);
        // a generic diagonal state does move
        let s = BipartiteState::diagonal_2x2(0.3).unwrap();
        assert!(stationary_residual(&s, 0.5, 1.0).unwrap() > 1e-3);
    }

    #[test]
    fn induced_phase_values() {
        assert_eq!(induced_phase(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)).unwrap(),
            Complex64::new(0.0, 0.0));
        let p = induced_phase(Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        assert!((p.re - std::f64::consts::FRAC_PI_6).abs() < 1e-15 && p.im == 0.0);
        let p = induced_phase(Complex64::new(0.3, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        assert!((p.re - 0.3046926540153975).abs() < 1e-15);
    }

    #[test]
    fn strong_drive_collapses_with_phase_pinned() {
        let run = simulate_competition(FRAC_PI_2, 0.0, 5.0, 10.0, 1e-3).unwrap();
        assert_eq!(run.regime, Regime::Collapsing);
        let tf = run.t_factorize.unwrap();
        assert!(tf < PI / 4.0, "factorized at {tf}");
        assert!((run.phi_final - FRAC_PI_2).abs() < 1e-3, "phi = {}", run.phi_final);
        // theta monotone: every recorded step decreases
        for w in run.samples.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12);
        }

        let run = simulate_competition(FRAC_PI_2, 0.0, -5.0, 10.0, 1e-3).unwrap();
        assert!((run.phi_final + FRAC_PI_2).abs() < 1e-3);
    }

    #[test]
    fn weak_drive_from_the_stationary_point_stays_put() {
        let run = simulate_competition(FRAC_PI_2, 0.5f64.asin(), 0.5, 100.0, 1e-3).unwrap();
        assert_eq!(run.regime, Regime::Stationary);
        assert!((run.theta_final - FRAC_PI_2).abs() < 1e-8);
        assert!((run.phi_final - 0.5f64.asin()).abs() < 1e-8);
    }

    #[test]
    fn regime_flips_across_the_critical_drive() {
        let below = simulate_competition(FRAC_PI_2, 0.999f64.asin(), 0.999, 1000.0, 1e-2).unwrap();
        assert_eq!(below.regime, Regime::Stationary);
        let above = simulate_competition(FRAC_PI_2, FRAC_PI_2, 1.001, 1000.0, 1e-2).unwrap();
        assert_eq!(above.regime, Regime::Collapsing);
    }

    #[test]
    fn delay_is_the_inverse_linewidth() {
        assert!((ion_trap_delay(HBAR_EV_S).unwrap() - 1.0).abs() < 1e-15);
        let e = linewidth_energy(20e6, FrequencyConvention::OrdinaryHertz).unwrap();
        let delay = ion_trap_delay(e).unwrap();
        assert!((delay - 7.957747154594767e-9).abs() < 1e-20, "delay {delay}");
        let e = linewidth_energy(20e6, FrequencyConvention::RadiansPerSecond).unwrap();
        assert!((ion_trap_delay(e).unwrap() - 5e-8).abs() < 1e-20);
    }
}
