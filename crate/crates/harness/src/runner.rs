//! Experiment drivers: a validated config in, a data table and a JSON
//! summary out. File writing and process exit codes stay in the binary
//! so tests can run everything in-process.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use inl_core::collapse_dynamics::{
    born_ensemble, flow_deterministic, fortunes, termination_time, MeasurementOperator,
    RngStream, StopRule,
};
use inl_core::{competition, highdim, kaon, sample, state_algebra, BipartiteState};

use crate::config::{Experiment, ExperimentConfig, HighdimMode};
use crate::output::{matrix_to_json, Cell, Table};
use crate::stats;
use crate::{Error, Result};

pub struct RunOutput {
    pub table: Table,
    /// Printed to stdout and embedded in the manifest. Holds no wall
    /// clock, so identical configs produce identical summaries.
    pub summary: Value,
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Born => run_born(cfg),
        Experiment::CollapseTime => run_collapse_time(cfg),
        Experiment::Competition => run_competition(cfg),
        Experiment::Kaon => run_kaon(cfg),
        Experiment::Highdim => run_highdim(cfg),
        Experiment::Props => run_props(cfg),
    }
}

fn run_born(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let s0 = BipartiteState::diagonal_2x2(cfg.alpha)?;
    let m = MeasurementOperator::canonical_2x2(cfg.eta().abs())?;
    let ens = born_ensemble(&s0, &m, cfg.trajectories, cfg.seed, cfg.dt())?;

    let mut table = Table::new(&["trajectory", "outcome", "termination_time", "play_count"]);
    for (i, r) in ens.records.iter().enumerate() {
        table.push(vec![
            Cell::UInt(i as u64),
            Cell::UInt(r.outcome as u64),
            Cell::Float(r.termination_time),
            Cell::UInt(r.play_count as u64),
        ]);
    }
    let times: Vec<f64> = ens.records.iter().map(|r| r.termination_time).collect();
    let summary = json!({
        "alpha": cfg.alpha,
        "eta": cfg.eta(),
        "seed": cfg.seed,
        "stats": ens.stats,
        "termination_time": stats::summarize(&times)?,
        "expected_frequency": [cfg.alpha, 1.0 - cfg.alpha],
    });
    Ok(RunOutput { table, summary })
}

fn run_collapse_time(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let s0 = BipartiteState::diagonal_2x2(cfg.alpha)?;
    let eta = cfg.eta();
    let m = MeasurementOperator::canonical_2x2(eta.abs())?;
    let sign: i8 = if eta < 0.0 { -1 } else { 1 };
    let traj = flow_deterministic(&s0, &m, sign, cfg.dt(), StopRule::Boundary)?;

    let mut table = Table::new(&["t", "y0", "y1", "det_scaled"]);
    for (t, s) in &traj.samples {
        let (y0, y1) = fortunes(s, &m)?;
        table.push(vec![
            Cell::Float(*t),
            Cell::Float(y0),
            Cell::Float(y1),
            Cell::Float(s.det_magnitude_scaled()),
        ]);
    }
    let measured = traj.termination_time.ok_or_else(|| {
        Error::Numeric(inl_core::Error::Domain(
            "flow stopped before reaching the boundary".into(),
        ))
    })?;
    let closed = termination_time(cfg.alpha, eta.abs(), sign)?;
    let summary = json!({
        "alpha": cfg.alpha,
        "eta": eta,
        "termination_time": measured,
        "closed_form": closed,
        "difference": (measured - closed).abs(),
        "outcome": traj.outcome,
        "samples": traj.samples.len(),
        "final_state": matrix_to_json(traj.final_state().matrix()),
    });
    Ok(RunOutput { table, summary })
}

fn run_competition(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let eta = cfg.eta();
    // the polar flow runs in coupling units and eta = 0 is a valid run,
    // so the step default is flat rather than eta-scaled
    let dt = cfg.dt.unwrap_or(1e-3);
    let run = competition::simulate_competition(cfg.theta0, cfg.phi0, eta, cfg.tmax, dt)?;
    let regime = match run.regime {
        competition::Regime::Collapsing => "collapsing",
        competition::Regime::Stationary => "stationary",
        competition::Regime::Oscillating => "oscillating",
    };

    let mut table = Table::new(&[
        "eta",
        "theta0",
        "phi0",
        "regime",
        "t_factorize",
        "phi_final",
        "invariant_drift",
    ]);
    table.push(vec![
        Cell::Float(eta),
        Cell::Float(cfg.theta0),
        Cell::Float(cfg.phi0),
        Cell::Text(regime.into()),
        Cell::Float(run.t_factorize.unwrap_or(f64::NAN)),
        Cell::Float(run.phi_final),
        Cell::Float(run.invariant_drift.unwrap_or(f64::NAN)),
    ]);
    let summary = json!({
        "eta": eta,
        "theta0": cfg.theta0,
        "phi0": cfg.phi0,
        "tmax": cfg.tmax,
        "dt": dt,
        "regime": regime,
        "t_factorize": run.t_factorize,
        "theta_final": run.theta_final,
        "phi_final": run.phi_final,
        "invariant_drift": run.invariant_drift,
        "samples": run.samples.len(),
    });
    Ok(RunOutput { table, summary })
}

fn run_kaon(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut p = kaon::KaonParams::default();
    if let Some(g) = cfg.gamma {
        // equal real and imaginary parts, as for the measured splitting
        p.gamma = Complex64::new(g, g);
    }
    let eta_ev = match cfg.eta {
        Some(e) => e,
        None => kaon::kaon_eta(&p)?,
    };
    let delta = kaon::kaon_delta(eta_ev, p.gamma)?;
    let rec = kaon::compare_experiment(delta, &p)?;

    let mut table = Table::new(&[
        "eta_ev",
        "delta_theory_re",
        "delta_theory_im",
        "delta_theory_abs",
        "delta_exp_abs",
        "ratio",
    ]);
    table.push(vec![
        Cell::Float(eta_ev),
        Cell::Float(rec.delta_theory.re),
        Cell::Float(rec.delta_theory.im),
        Cell::Float(rec.delta_theory_abs),
        Cell::Float(rec.delta_exp_abs),
        Cell::Float(rec.ratio),
    ]);
    let summary = json!({
        "eta_ev": eta_ev,
        "delta_theory_re": rec.delta_theory.re,
        "delta_theory_im": rec.delta_theory.im,
        "delta_theory_abs": rec.delta_theory_abs,
        "delta_exp_abs": rec.delta_exp_abs,
        "ratio": rec.ratio,
        "within_experiment": rec.within_experiment,
        "collapse_time_s": p.collapse_time(),
    });
    Ok(RunOutput { table, summary })
}

fn run_highdim(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.mode {
        HighdimMode::Table => highdim_table(cfg),
        HighdimMode::Bisect => highdim_bisect(cfg),
        HighdimMode::BisectNoisy => highdim_bisect_noisy(cfg),
    }
}

fn highdim_table(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let eta = cfg.eta();
    let f = highdim::SubspaceFilter::new(cfg.n, cfg.m(), eta)?;
    let y = highdim::DiagonalOccupation::uniform(cfg.n)?;
    let t_quad = highdim::time_of_tau(&y, f, highdim::termination_tau(&y, f)?)?;
    let t_hyp = highdim::termination_time_hyp(f)?;

    let mut table = Table::new(&["n", "m", "t0_quadrature", "t0_hypergeometric"]);
    table.push(vec![
        Cell::UInt(cfg.n as u64),
        Cell::UInt(cfg.m() as u64),
        Cell::Float(t_quad),
        Cell::Float(t_hyp),
    ]);
    let summary = json!({
        "n": cfg.n,
        "m": cfg.m(),
        "eta": eta,
        "t0_quadrature": t_quad,
        "t0_hypergeometric": t_hyp,
        "eta_t0_quadrature": eta.abs() * t_quad,
        "eta_t0_hypergeometric": eta.abs() * t_hyp,
        "difference": (t_quad - t_hyp).abs(),
    });
    Ok(RunOutput { table, summary })
}

fn highdim_bisect(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let eta = cfg.eta();
    let run = highdim::bisection_collapse(cfg.n, eta, highdim::BisectionMode::Deterministic)?;

    let mut table = Table::new(&["stage", "dim", "m", "time", "outcome", "plays"]);
    for (i, s) in run.stages.iter().enumerate() {
        table.push(vec![
            Cell::UInt(i as u64),
            Cell::UInt(s.dim as u64),
            Cell::UInt(s.m as u64),
            Cell::Float(s.time),
            Cell::UInt(s.outcome as u64),
            Cell::UInt(s.plays as u64),
        ]);
    }
    let k = (cfg.n as f64).log2();
    let summary = json!({
        "n": cfg.n,
        "eta": eta,
        "stages": run.stages.len(),
        "total_time": run.total_time,
        "closed_form": k * PI / (2.0 * eta.abs()),
    });
    Ok(RunOutput { table, summary })
}

fn highdim_bisect_noisy(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let n = cfg.n;
    let eta = cfg.eta();
    let dt = cfg.dt();
    let runs: std::result::Result<Vec<highdim::BisectionRun>, inl_core::Error> = (0..cfg
        .trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(cfg.seed, i);
            highdim::bisection_collapse(n, eta, highdim::BisectionMode::Noisy { rng: &mut rng, dt })
        })
        .collect();
    let runs = runs?;

    let mut table = Table::new(&["run", "total_time", "plays"]);
    for (i, r) in runs.iter().enumerate() {
        let plays: u32 = r.stages.iter().map(|s| s.plays).sum();
        table.push(vec![
            Cell::UInt(i as u64),
            Cell::Float(r.total_time),
            Cell::UInt(plays as u64),
        ]);
    }
    let totals: Vec<f64> = runs.iter().map(|r| r.total_time).collect();
    let k = (n as f64).log2();
    let summary = json!({
        "n": n,
        "eta": eta,
        "seed": cfg.seed,
        "trajectories": cfg.trajectories,
        "total_time": stats::summarize(&totals)?,
        // per-stage means lie between pi/(2 eta) (even stakes, one play)
        // and pi/eta (the worst mean over starting splits)
        "mean_window": [k * PI / (2.0 * eta.abs()), k * PI / eta.abs()],
    });
    Ok(RunOutput { table, summary })
}

fn run_props(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let count = cfg.trajectories;
    let mut rng = sample::rng_from_seed(cfg.seed);
    let eps = state_algebra::EPS_FACT;

    let mut dev_duality = 0.0f64;
    let mut dev_homogeneity = 0.0f64;
    let mut dev_automorphism = 0.0f64;
    let mut dev_covariance = 0.0f64;
    let mut dev_time_reversal = 0.0f64;
    let mut max_det = 0.0f64;

    for _ in 0..count {
        let a = sample::random_nonsingular_state(2, &mut rng, 1e-3);
        let b = sample::random_nonsingular_state(2, &mut rng, 1e-3);
        let ca = a.matrix();
        let cb = b.matrix();
        let ha = state_algebra::hat(ca, eps)?;
        let hb = state_algebra::hat(cb, eps)?;

        dev_duality = dev_duality.max(state_algebra::hat(&ha, eps)?.max_abs_diff(ca));

        let lam = Complex64::from_polar(rng.gen_range(0.2..2.0), rng.gen_range(-PI..PI));
        dev_homogeneity = dev_homogeneity
            .max(state_algebra::hat(&ca.scale(lam), eps)?.max_abs_diff(&ha.scale(lam)));

        dev_automorphism = dev_automorphism
            .max(state_algebra::hat(&ca.mul(cb), eps)?.max_abs_diff(&ha.mul(&hb)));

        let u = sample::random_unitary(2, &mut rng);
        let w = sample::random_unitary(2, &mut rng);
        dev_covariance = dev_covariance.max(
            state_algebra::hat(&u.mul(ca).mul(&w), eps)?.max_abs_diff(&u.mul(&ha).mul(&w)),
        );

        let phase = Complex64::from_polar(1.0, ca.det().arg());
        dev_time_reversal = dev_time_reversal
            .max(ha.max_abs_diff(&state_algebra::time_reversal(ca)?.scale(phase)));

        max_det = max_det.max(a.det_magnitude());
    }

    let mut table = Table::new(&["property", "samples", "max_deviation"]);
    let rows: [(&str, f64); 6] = [
        ("duality", dev_duality),
        ("homogeneity", dev_homogeneity),
        ("automorphism", dev_automorphism),
        ("unitary_covariance", dev_covariance),
        ("time_reversal", dev_time_reversal),
        // how far |det| exceeds its 1/2 bound for unit-norm states
        ("det_bound_excess", (max_det - 0.5).max(0.0)),
    ];
    for (name, dev) in rows {
        table.push(vec![
            Cell::Text(name.into()),
            Cell::UInt(count),
            Cell::Float(dev),
        ]);
    }
    let summary = json!({
        "samples": count,
        "seed": cfg.seed,
        "max_deviation": {
            "duality": dev_duality,
            "homogeneity": dev_homogeneity,
            "automorphism": dev_automorphism,
            "unitary_covariance": dev_covariance,
            "time_reversal": dev_time_reversal,
        },
        "max_det_magnitude": max_det,
        "det_bound": 0.5,
    });
    Ok(RunOutput { table, summary })
}
