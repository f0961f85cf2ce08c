//! Run configuration. Values resolve in three layers: built-in defaults,
//! then a flat `key = value` config file, then command-line flags.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Born,
    CollapseTime,
    Competition,
    Kaon,
    Highdim,
    Props,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Born => "born",
            Experiment::CollapseTime => "collapse-time",
            Experiment::Competition => "competition",
            Experiment::Kaon => "kaon",
            Experiment::Highdim => "highdim",
            Experiment::Props => "props",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "born" => Ok(Experiment::Born),
            "collapse-time" => Ok(Experiment::CollapseTime),
            "competition" => Ok(Experiment::Competition),
            "kaon" => Ok(Experiment::Kaon),
            "highdim" => Ok(Experiment::Highdim),
            "props" => Ok(Experiment::Props),
            other => Err(Error::config(format!("unknown experiment {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::config(format!(
                "format must be csv or json, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HighdimMode {
    /// Closed-form termination times for one (n, m) filter.
    Table,
    /// Deterministic halving cascade down to dimension 1.
    Bisect,
    /// Halving cascade where every stage plays the noisy game.
    BisectNoisy,
}

impl HighdimMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(HighdimMode::Table),
            "bisect" => Ok(HighdimMode::Bisect),
            "bisect-noisy" => Ok(HighdimMode::BisectNoisy),
            other => Err(Error::config(format!(
                "mode must be table, bisect, or bisect-noisy, got {other:?}"
            ))),
        }
    }
}

/// One layer of partial configuration: a parsed config file or the set
/// of flags the user actually passed.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub trajectories: Option<u64>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub theta0: Option<f64>,
    pub phi0: Option<f64>,
    pub tmax: Option<f64>,
    pub mode: Option<HighdimMode>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub threads: Option<usize>,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse {value:?}")))
}

impl Overrides {
    /// Assign one key. Shared by the config-file parser and the CLI so
    /// both speak the same vocabulary.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = Some(Experiment::parse(value)?),
            "alpha" => self.alpha = Some(parse_num(key, value)?),
            "eta" => self.eta = Some(parse_num(key, value)?),
            "gamma" => self.gamma = Some(parse_num(key, value)?),
            "n" => self.n = Some(parse_num(key, value)?),
            "m" => self.m = Some(parse_num(key, value)?),
            "trajectories" => self.trajectories = Some(parse_num(key, value)?),
            "seed" => self.seed = Some(parse_num(key, value)?),
            "dt" => self.dt = Some(parse_num(key, value)?),
            "theta0" => self.theta0 = Some(parse_num(key, value)?),
            "phi0" => self.phi0 = Some(parse_num(key, value)?),
            "tmax" => self.tmax = Some(parse_num(key, value)?),
            "mode" => self.mode = Some(HighdimMode::parse(value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = Some(OutputFormat::parse(value)?),
            "threads" => self.threads = Some(parse_num(key, value)?),
            other => return Err(Error::config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parse a flat config file: one `key = value` per line, `#` comments.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("config {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut ov = Overrides::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("config line {}: expected key = value", idx + 1))
            })?;
            ov.set(key.trim(), value.trim())?;
        }
        Ok(ov)
    }

    /// Overlay: fields present in `self` win over `base`.
    pub fn or(self, base: Overrides) -> Overrides {
        Overrides {
            experiment: self.experiment.or(base.experiment),
            alpha: self.alpha.or(base.alpha),
            eta: self.eta.or(base.eta),
            gamma: self.gamma.or(base.gamma),
            n: self.n.or(base.n),
            m: self.m.or(base.m),
            trajectories: self.trajectories.or(base.trajectories),
            seed: self.seed.or(base.seed),
            dt: self.dt.or(base.dt),
            theta0: self.theta0.or(base.theta0),
            phi0: self.phi0.or(base.phi0),
            tmax: self.tmax.or(base.tmax),
            mode: self.mode.or(base.mode),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            threads: self.threads.or(base.threads),
        }
    }
}

/// A fully resolved run. Fields that stay `None` take an
/// experiment-dependent default at the point of use (`eta`, `gamma`,
/// `dt`, `m`), so their echo in the manifest records whether the user
/// pinned them.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub alpha: f64,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub n: usize,
    pub m: Option<usize>,
    pub trajectories: u64,
    pub seed: u64,
    pub dt: Option<f64>,
    pub theta0: f64,
    pub phi0: f64,
    pub tmax: f64,
    pub mode: HighdimMode,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Apply defaults under the merged overrides. The experiment always
    /// comes from the subcommand, so an `experiment` key in a config
    /// file is tolerated but never wins.
    pub fn resolve(experiment: Experiment, ov: Overrides) -> Self {
        ExperimentConfig {
            experiment,
            alpha: ov.alpha.unwrap_or(0.5),
            eta: ov.eta,
            gamma: ov.gamma,
            n: ov.n.unwrap_or(4),
            m: ov.m,
            trajectories: ov.trajectories.unwrap_or(1000),
            seed: ov.seed.unwrap_or(0),
            dt: ov.dt,
            theta0: ov.theta0.unwrap_or(PI / 2.0),
            phi0: ov.phi0.unwrap_or(0.0),
            tmax: ov.tmax.unwrap_or(10.0),
            mode: ov.mode.unwrap_or(HighdimMode::Table),
            out: ov.out,
            format: ov.format.unwrap_or(OutputFormat::Csv),
            threads: ov.threads,
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(1.0)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(1.0)
    }

    pub fn m(&self) -> usize {
        self.m.unwrap_or(self.n / 2)
    }

    /// Integration step; defaults to 1e-3 in drive units.
    pub fn dt(&self) -> f64 {
        self.dt
            .unwrap_or_else(|| inl_core::collapse_dynamics::default_dt(self.eta()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories < 1 {
            return Err(Error::config("trajectories must be at least 1"));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::config(format!("dt = {dt} must be positive and finite")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads must be at least 1"));
        }
        match self.experiment {
            Experiment::Born | Experiment::CollapseTime => {
                if !(self.alpha > 0.0 && self.alpha < 1.0) {
                    return Err(Error::config(format!(
                        "alpha = {} must lie strictly inside (0, 1)",
                        self.alpha
                    )));
                }
                self.require_nonzero_eta()?;
            }
            Experiment::Competition => {
                // eta = 0 is a legitimate stationary run here
                let eta = self.eta();
                if !eta.is_finite() {
                    return Err(Error::config("eta must be finite"));
                }
                if !(self.theta0 > 0.0 && self.theta0 < PI) {
                    return Err(Error::config(format!(
                        "theta0 = {} must lie strictly inside (0, pi)",
                        self.theta0
                    )));
                }
                if !(self.phi0.is_finite() && self.phi0.abs() <= PI) {
                    return Err(Error::config(format!(
                        "phi0 = {} must lie in [-pi, pi]",
                        self.phi0
                    )));
                }
                if !(self.tmax.is_finite() && self.tmax > 0.0) {
                    return Err(Error::config(format!(
                        "tmax = {} must be positive and finite",
                        self.tmax
                    )));
                }
            }
            Experiment::Kaon => {
                if let Some(e) = self.eta {
                    if !(e.is_finite() && e > 0.0) {
                        return Err(Error::config(format!(
                            "eta = {e} (eV) must be positive and finite"
                        )));
                    }
                }
                if let Some(g) = self.gamma {
                    if !(g.is_finite() && g > 0.0) {
                        return Err(Error::config(format!(
                            "gamma = {g} (eV) must be positive and finite"
                        )));
                    }
                }
            }
            Experiment::Highdim => {
                self.require_nonzero_eta()?;
                if self.n < 2 {
                    return Err(Error::config(format!("n = {} must be at least 2", self.n)));
                }
                match self.mode {
                    HighdimMode::Table => {
                        let m = self.m();
                        if !(1 <= m && m < self.n) {
                            return Err(Error::config(format!(
                                "m = {m} must satisfy 1 <= m < n = {}",
                                self.n
                            )));
                        }
                    }
                    HighdimMode::Bisect | HighdimMode::BisectNoisy => {
                        if !self.n.is_power_of_two() {
                            return Err(Error::config(format!(
                                "bisection needs n a power of two, got {}",
                                self.n
                            )));
                        }
                    }
                }
            }
            Experiment::Props => {}
        }
        Ok(())
    }

    fn require_nonzero_eta(&self) -> Result<()> {
        let eta = self.eta();
        if !(eta.is_finite() && eta != 0.0) {
            return Err(Error::config(format!("eta = {eta} must be finite and nonzero")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let cfg = ExperimentConfig::resolve(Experiment::Born, Overrides::default());
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.eta(), 1.0);
        assert_eq!(cfg.trajectories, 1000);
        assert_eq!(cfg.dt(), 1e-3);
        assert_eq!(cfg.m(), 2);
        assert_eq!(cfg.format, OutputFormat::Csv);
        cfg.validate().unwrap();
    }

    #[test]
    fn flags_override_file() {
        let file = Overrides::from_text("alpha = 0.25\nseed = 11\n# comment\n\neta=2").unwrap();
        let mut flags = Overrides::default();
        flags.set("alpha", "0.75").unwrap();
        let cfg = ExperimentConfig::resolve(Experiment::Born, flags.or(file));
        assert_eq!(cfg.alpha, 0.75);
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.eta(), 2.0);
    }

    #[test]
    fn zero_trajectories_rejected() {
        let mut ov = Overrides::default();
        ov.set("trajectories", "0").unwrap();
        let cfg = ExperimentConfig::resolve(Experiment::CollapseTime, ov);
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("trajectories"));
    }

    #[test]
    fn unknown_key_and_bad_values_rejected() {
        assert!(Overrides::from_text("alphq = 0.5").is_err());
        assert!(Overrides::from_text("alpha 0.5").is_err());
        assert!(Overrides::from_text("mode = halve").is_err());
        assert!(Overrides::from_text("trajectories = -3").is_err());
    }

    #[test]
    fn bisection_dimension_must_be_a_power_of_two() {
        let mut ov = Overrides::default();
        ov.set("mode", "bisect").unwrap();
        ov.set("n", "6").unwrap();
        let cfg = ExperimentConfig::resolve(Experiment::Highdim, ov.clone());
        assert!(cfg.validate().is_err());
        ov.set("n", "8").unwrap();
        let cfg = ExperimentConfig::resolve(Experiment::Highdim, ov);
        cfg.validate().unwrap();
    }

    #[test]
    fn competition_allows_zero_eta() {
        let mut ov = Overrides::default();
        ov.set("eta", "0").unwrap();
        let cfg = ExperimentConfig::resolve(Experiment::Competition, ov.clone());
        cfg.validate().unwrap();
        let cfg = ExperimentConfig::resolve(Experiment::Born, ov);
        assert!(cfg.validate().is_err());
    }
}
