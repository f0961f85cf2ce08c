//! Subspace-filter collapse in n dimensions.
//!
//! A filter splits the basis into an m-dimensional (+) block and its
//! complement, with generator (eta/2) diag(I/m, -I/(n-m)) (traceless). On
//! diagonal occupation vectors the flow is linear in the progress variable
//! tau,
//!
//! ```text
//! y_j = a_j + n tau / m   (j < m),    y_j = a_j - n tau / (n - m)   (j >= m),
//! ```
//!
//! ending at tau_end = (1 - m/n) min_{j >= m} a_j, and physical time is
//! recovered from t = (2/eta) integral of prod_j y_j^{-1/n} d tau. For the
//! uniform start the termination time has the closed form
//! (2/eta)(1 - m/n) F(1, 1; 1 + m/n; 1 - m/n).

use serde::{Deserialize, Serialize};

use crate::collapse_dynamics::{collapse, MeasurementOperator, RngStream};
use crate::error::{Error, Result};
use crate::hyp::hyp2f1_one_one;
use crate::matrix::CMatrix;
use crate::quadrature;
use crate::state_algebra::BipartiteState;
use num_complex::Complex64;

/// Basis split into an m-dimensional favored block out of n.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SubspaceFilter {
    pub n: usize,
    pub m: usize,
    pub eta: f64,
}

impl SubspaceFilter {
    pub fn new(n: usize, m: usize, eta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n must be at least 2"));
        }
        if !(1 <= m && m <= n - 1) {
            return Err(Error::invalid(format!("m = {m} outside 1..={}", n - 1)));
        }
        if !(eta.is_finite() && eta != 0.0) {
            return Err(Error::invalid("eta must be finite and nonzero"));
        }
        Ok(SubspaceFilter { n, m, eta })
    }
}

/// Diagonal occupation probabilities, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalOccupation {
    y: Vec<f64>,
}

impl DiagonalOccupation {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::invalid("occupation vector must be nonempty"));
        }
        if y.iter().any(|v| !(0.0..=1.0 + 1e-12).contains(v)) {
            return Err(Error::invalid("occupations must lie in [0, 1]"));
        }
        let sum: f64 = y.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("occupations sum to {sum}, not 1")));
        }
        Ok(DiagonalOccupation { y })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        Ok(DiagonalOccupation { y: vec![1.0 / n as f64; n] })
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// Diagonal state with these occupations as the squared entries.
    pub fn to_state(&self) -> Result<BipartiteState> {
        let diag: Vec<Complex64> =
            self.y.iter().map(|v| Complex64::new(v.sqrt(), 0.0)).collect();
        BipartiteState::from_normalized(CMatrix::from_diag(&diag))
    }
}

/// The filter's measurement generator, (eta/2) diag(I/m, -I/(n-m)).
pub fn lambda_matrix(f: SubspaceFilter) -> CMatrix {
    let mut d = Vec::with_capacity(f.n);
    for j in 0..f.n {
        let v = if j < f.m {
            f.eta / (2.0 * f.m as f64)
        } else {
            -f.eta / (2.0 * (f.n - f.m) as f64)
        };
        d.push(Complex64::new(v, 0.0));
    }
    CMatrix::from_diag(&d)
}

/// End of the diagonal flow: the first complement occupation to hit zero.
pub fn termination_tau(y0: &DiagonalOccupation, f: SubspaceFilter) -> Result<f64> {
    check_dims(y0, f)?;
    let min = y0.y[f.m..].iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(Error::domain("a complement occupation is already zero"));
    }
    Ok((1.0 - f.m as f64 / f.n as f64) * min)
}

fn check_dims(y0: &DiagonalOccupation, f: SubspaceFilter) -> Result<()> {
    if y0.dim() != f.n {
        return Err(Error::DimensionMismatch { expected: f.n, got: y0.dim() });
    }
    Ok(())
}

/// Occupations after progress tau.
pub fn highdim_flow_tau(
    y0: &DiagonalOccupation,
    f: SubspaceFilter,
    tau: f64,
) -> Result<DiagonalOccupation> {
    let tau_end = termination_tau(y0, f)?;
    if !(0.0..=tau_end + 1e-12).contains(&tau) {
        return Err(Error::domain(format!("tau = {tau} outside [0, {tau_end}]")));
    }
    let n = f.n as f64;
    let up = n * tau / f.m as f64;
    let down = n * tau / (f.n - f.m) as f64;
    let y: Vec<f64> = y0
        .y
        .iter()
        .enumerate()
        .map(|(j, &a)| if j < f.m { a + up } else { (a - down).max(0.0) })
        .collect();
    Ok(DiagonalOccupation { y })
}

/// Physical time spent reaching progress tau, by quadrature of
/// (2/eta) prod_j y_j^{-1/n}.
///
/// The integrand blows up like (tau_end - tau')^(-r/n) at termination, r
/// the multiplicity of the smallest complement occupation; the tail is
/// integrated in the variable u = (tau_end - tau')^(1 - r/n), which removes
/// the power singularity exactly.
pub fn time_of_tau(y0: &DiagonalOccupation, f: SubspaceFilter, tau: f64) -> Result<f64> {
    let tau_end = termination_tau(y0, f)?;
    if y0.y.iter().any(|&a| a <= 0.0) {
        return Err(Error::domain("the time integral needs strictly positive occupations"));
    }
    if !(0.0..=tau_end * (1.0 + 1e-12)).contains(&tau) {
        return Err(Error::domain(format!("tau = {tau} outside [0, {tau_end}]")));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let tau = tau.min(tau_end);
    let n = f.n as f64;
    let m = f.m as f64;
    let a_min = y0.y[f.m..].iter().copied().fold(f64::INFINITY, f64::min);
    let vanishing: Vec<usize> = (f.m..f.n)
        .filter(|&j| y0.y[j] - a_min <= 1e-12 * a_min)
        .collect();
    let r = vanishing.len() as f64;
    let slope = n / (n - m);

    // product over the factors that stay positive at tau_end
    let smooth = |tp: f64| -> f64 {
        let mut prod = 1.0;
        for (j, &a) in y0.y.iter().enumerate() {
            if vanishing.contains(&j) {
                continue;
            }
            let yj = if j < f.m { a + n * tp / m } else { a - slope * tp };
            prod *= yj.powf(-1.0 / n);
        }
        prod
    };
    let p = r / n;
    let full = |tp: f64| smooth(tp) * (slope * (tau_end - tp)).powf(-p);

    let rel_tol = 1e-12;
    let split = 0.9 * tau_end;
    let integral = if tau <= split {
        quadrature::integrate(full, 0.0, tau, rel_tol)?
    } else {
        let head = quadrature::integrate(full, 0.0, split, rel_tol)?;
        // u = (tau_end - tau')^(1-p): du absorbs the singular factor
        let sub = |u: f64| smooth(tau_end - u.powf(1.0 / (1.0 - p)));
        let u_hi = (tau_end - split).powf(1.0 - p);
        let u_lo = (tau_end - tau).powf(1.0 - p);
        let tail = quadrature::integrate(sub, u_lo, u_hi, rel_tol)?
            * slope.powf(-p)
            / (1.0 - p);
        head + tail
    };
    Ok(2.0 / f.eta.abs() * integral)
}

/// Closed-form termination time from the uniform start,
/// (2/eta)(1 - m/n) F(1, 1; 1 + m/n; 1 - m/n).
pub fn termination_time_hyp(f: SubspaceFilter) -> Result<f64> {
    let ratio = f.m as f64 / f.n as f64;
    let value = hyp2f1_one_one(1.0 + ratio, 1.0 - ratio)?;
    Ok(2.0 / f.eta.abs() * (1.0 - ratio) * value)
}

/// One halving stage of a bisection cascade.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StageRecord {
    /// Dimension entering the stage.
    pub dim: usize,
    /// Filter size, always dim/2.
    pub m: usize,
    /// Time the stage took.
    pub time: f64,
    /// Which half survived: 0 = favored block, 1 = complement.
    pub outcome: u8,
    /// Plays the stage's game took (1 in noisy mode, 0 deterministic).
    pub plays: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BisectionRun {
    pub stages: Vec<StageRecord>,
    pub total_time: f64,
}

pub enum BisectionMode<'a> {
    /// Every stage runs the closed-form halving flow.
    Deterministic,
    /// Every stage plays the two-fortune game between the halves.
    Noisy { rng: &'a mut RngStream, dt: f64 },
}

/// Collapse a maximally entangled n-dimensional state (n a power of two)
/// by log2(n) successive halving filters. Each stage starts uniform over
/// the surviving block, so its two halves hold weight 1/2 each and the
/// stage is a single even-odds play lasting pi/(2 eta) either way;
/// deterministically the total is log2(n) pi / (2 eta).
pub fn bisection_collapse(
    n: usize,
    eta: f64,
    mode: BisectionMode<'_>,
) -> Result<BisectionRun> {
    if !(n.is_power_of_two() && n >= 2) {
        return Err(Error::invalid(format!("n = {n} is not a power of two >= 2")));
    }
    if !(eta.is_finite() && eta != 0.0) {
        return Err(Error::invalid("eta must be finite and nonzero"));
    }
    let mut stages = Vec::new();
    let mut total = 0.0;
    let mut dim = n;
    let mut mode = mode;
    while dim >= 2 {
        let m = dim / 2;
        let (time, outcome, plays) = match &mut mode {
            BisectionMode::Deterministic => {
                let f = SubspaceFilter::new(dim, m, eta)?;
                (termination_time_hyp(f)?, 0u8, 0u32)
            }
            BisectionMode::Noisy { rng, dt } => {
                // the two halves carry weight 1/2 each; play them as the
                // two fortunes of the two-level game
                let s = BipartiteState::diagonal_2x2(0.5)?;
                let op = MeasurementOperator::canonical_2x2(eta.abs())?;
                let traj = collapse(&s, &op, rng, *dt)?;
                (
                    traj.termination_time.expect("game ran to the boundary"),
                    traj.outcome.expect("game always has a winner") as u8,
                    traj.plays.len() as u32,
                )
            }
        };
        stages.push(StageRecord { dim, m, time, outcome, plays });
        total += time;
        dim = m;
    }
    Ok(BisectionRun { stages, total_time: total })
}
