//! Experiment configuration, read from a JSON document.
//!
//! Every section is optional. A missing `scenario` section gives the reference
//! setup: Bob at gain 1.5, one Eve at gain 1, noise 0.1 W, 320-bit packets,
//! at most 3000 channel uses and 10 W.

use std::fmt;
use std::path::{Path, PathBuf};

use fblsec::constrained::{Estimator, FadingDistribution, FadingSpec, Thresholds};
use fblsec::oracle::GridSpec;
use fblsec::solver::SolverConfig;
use fblsec::{ChannelSpec, EveModel, Resources, Scenario};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub oracle: Option<OracleSection>,
    #[serde(default)]
    pub output: OutputSection,
    /// Grid for the `eval` command.
    #[serde(default)]
    pub eval: Option<EvalGrid>,
    #[serde(default)]
    pub constraints: ConstraintSection,
    /// Seed of the Monte Carlo estimator.
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    /// Checks every section that the commands may consult.
    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario.build()?;
        self.solver_config()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(CliError::Config("sweep values must not be empty".into()));
            }
            for &v in &sweep.values {
                self.with_value(sweep.variable, v)?;
            }
        }
        Ok(())
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let s = &self.solver;
        let init = match s.init {
            Some(r) => Some(Resources::new(r.m, r.p).map_err(|e| CliError::Config(e.to_string()))?),
            None => None,
        };
        let cfg = SolverConfig { mu_th: s.mu_th, max_iter: s.max_iter, inner_tol: s.inner_tol, init, m_min: s.m_min };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn grid(&self, scenario: &Scenario) -> Option<GridSpec> {
        let o = self.oracle.as_ref()?;
        let base = GridSpec::for_scenario(scenario);
        Some(GridSpec {
            m_lo: o.m_lo.unwrap_or(base.m_lo),
            m_hi: o.m_hi.unwrap_or(base.m_hi),
            p_points: o.p_points.unwrap_or(base.p_points),
            p_min: o.p_min.or(base.p_min),
            refine_rounds: o.refine_rounds.unwrap_or(base.refine_rounds),
        })
    }

    pub fn thresholds(&self) -> Result<Thresholds, CliError> {
        Thresholds::new(self.constraints.delta_max, self.constraints.eps_b_max)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Transmit power of the blocklength-only objectives; defaults to the cap.
    pub fn power(&self) -> f64 {
        self.constraints.power.unwrap_or(self.scenario.p_cap)
    }

    pub fn fading(&self, scenario: &Scenario) -> Result<FadingSpec, CliError> {
        let f = &self.constraints.fading;
        let eve = scenario.sole_eve().map_err(|e| CliError::Config(e.to_string()))?;
        let estimator = match f.estimator {
            EstimatorName::Quadrature => Estimator::GaussQuadrature { nodes: f.nodes },
            EstimatorName::MonteCarlo => Estimator::MonteCarlo { samples: f.samples, seed: self.seed },
        };
        let distribution = match f.distribution {
            DistributionName::Rayleigh => FadingDistribution::ExponentialGain { mean: eve.mean_gain },
            DistributionName::PointMass => FadingDistribution::PointMass { gain: eve.gain },
        };
        let spec = FadingSpec { distribution, estimator };
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    /// Copy of the config with one sweep variable set to `value`.
    pub fn with_value(&self, var: SweepVariable, value: f64) -> Result<Self, CliError> {
        let mut c = self.clone();
        let s = &mut c.scenario;
        match var {
            SweepVariable::ZB => s.z_b = value,
            SweepVariable::ZE => {
                let n = s.z_e.len();
                s.z_e = Gains::Many(vec![value; n]);
            }
            SweepVariable::ZEn(i) => {
                let mut g = s.z_e.to_vec();
                if i > g.len() {
                    return Err(CliError::Config(format!("z_e{i} names eavesdropper {i} of {}", g.len())));
                }
                g[i - 1] = value;
                s.z_e = Gains::Many(g);
            }
            SweepVariable::D => s.d = positive_int(var, value)?,
            SweepVariable::NEves => {
                let first = s.z_e.to_vec()[0];
                s.z_e = Gains::Many(vec![first; positive_int(var, value)? as usize]);
            }
            SweepVariable::PCap => s.p_cap = value,
            SweepVariable::MCap => s.m_cap = positive_int(var, value)?,
            SweepVariable::Sigma2 => s.sigma2 = value,
            SweepVariable::XiE => s.xi_e = Some(value),
            SweepVariable::DeltaMax => c.constraints.delta_max = value,
            SweepVariable::EpsBMax => c.constraints.eps_b_max = value,
            SweepVariable::Power => c.constraints.power = Some(value),
        }
        c.scenario.build()?;
        Ok(c)
    }
}

fn positive_int(var: SweepVariable, v: f64) -> Result<u32, CliError> {
    if v >= 1.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
        Ok(v as u32)
    } else {
        Err(CliError::Config(format!("{var} takes positive integers, got {v}")))
    }
}

/// One gain or one gain per eavesdropper.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Gains {
    One(f64),
    Many(Vec<f64>),
}

impl Gains {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Gains::One(z) => vec![*z],
            Gains::Many(v) => v.clone(),
        }
    }

    fn len(&self) -> usize {
        match self {
            Gains::One(_) => 1,
            Gains::Many(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveModelName {
    Passive,
    Super,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub d: u32,
    pub z_b: f64,
    pub z_e: Gains,
    /// Noise power in watts, shared by all receivers.
    pub sigma2: f64,
    pub eve_model: EveModelName,
    pub m_cap: u32,
    pub p_cap: f64,
    /// Mean gain of Eve's fading channel; defaults to her gain.
    pub xi_e: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            d: 320,
            z_b: 1.5,
            z_e: Gains::One(1.0),
            sigma2: 0.1,
            eve_model: EveModelName::Passive,
            m_cap: 3000,
            p_cap: 10.0,
            xi_e: None,
        }
    }
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<Scenario, CliError> {
        let bad = |e: fblsec::Error| CliError::Config(e.to_string());
        let bob = ChannelSpec::new(self.z_b, self.sigma2).map_err(bad)?;
        let eves = self
            .z_e
            .to_vec()
            .into_iter()
            .map(|z| match self.xi_e {
                Some(xi) => ChannelSpec::with_mean_gain(z, self.sigma2, xi),
                None => ChannelSpec::new(z, self.sigma2),
            })
            .collect::<fblsec::Result<Vec<_>>>()
            .map_err(bad)?;
        let model = match self.eve_model {
            EveModelName::Passive => EveModel::Passive,
            EveModelName::Super => EveModel::Super,
        };
        Scenario::new(self.d, bob, eves, model, self.m_cap, self.p_cap).map_err(bad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    ZB,
    /// All eavesdropper gains at once.
    ZE,
    /// Gain of eavesdropper `n`, counted from one.
    ZEn(usize),
    D,
    NEves,
    PCap,
    MCap,
    Sigma2,
    DeltaMax,
    EpsBMax,
    Power,
    XiE,
}

impl TryFrom<String> for SweepVariable {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        Ok(match s.as_str() {
            "z_b" => Self::ZB,
            "z_e" => Self::ZE,
            "d" => Self::D,
            "n_eves" => Self::NEves,
            "p_cap" => Self::PCap,
            "m_cap" => Self::MCap,
            "sigma2" => Self::Sigma2,
            "delta_max" => Self::DeltaMax,
            "eps_b_max" => Self::EpsBMax,
            "power" => Self::Power,
            "xi_e" => Self::XiE,
            other => match other.strip_prefix("z_e").and_then(|n| n.parse::<usize>().ok()) {
                Some(n) if n >= 1 => Self::ZEn(n),
                _ => return Err(format!("unknown sweep variable `{other}`")),
            },
        })
    }
}

impl<'de> Deserialize<'de> for SweepVariable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Self::try_from(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::ZB => "z_b",
            Self::ZE => "z_e",
            Self::ZEn(n) => return write!(f, "z_e{n}"),
            Self::D => "d",
            Self::NEves => "n_eves",
            Self::PCap => "p_cap",
            Self::MCap => "m_cap",
            Self::Sigma2 => "sigma2",
            Self::DeltaMax => "delta_max",
            Self::EpsBMax => "eps_b_max",
            Self::Power => "power",
            Self::XiE => "xi_e",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Joint blocklength and power allocation.
    #[default]
    Joint,
    /// Blocklength maximizing the secrecy throughput at fixed power.
    Throughput,
    /// Blocklength minimizing the LFP at fixed power.
    Blocklength,
    /// Blocklength minimizing the expected LFP under Eve's fading.
    Statistical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
    Nondecreasing,
    Nonincreasing,
}

impl Direction {
    pub fn holds(self, prev: f64, next: f64) -> bool {
        match self {
            Self::Increasing => next > prev,
            Self::Decreasing => next < prev,
            Self::Nondecreasing => next >= prev,
            Self::Nonincreasing => next <= prev,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Increasing => "increasing",
            Self::Decreasing => "decreasing",
            Self::Nondecreasing => "nondecreasing",
            Self::Nonincreasing => "nonincreasing",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    #[serde(default)]
    pub objective: Objective,
    /// Leakage cap of the fixed-leakage baseline; no baseline when absent.
    #[serde(default)]
    pub baseline_delta_max: Option<f64>,
    /// Expected direction of the objective column (`eps_lf`, or `tau_lf` for
    /// the throughput objective) as the swept value grows.
    #[serde(default)]
    pub trend: Option<Direction>,
    /// Expected direction of both `m` and `p`.
    #[serde(default)]
    pub resource_trend: Option<Direction>,
    /// Require the baseline LFP to be at least the optimized LFP.
    #[serde(default)]
    pub baseline_dominates: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub m: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub mu_th: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub m_min: f64,
    pub init: Option<PointConfig>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self { mu_th: d.mu_th, max_iter: d.max_iter, inner_tol: d.inner_tol, m_min: d.m_min, init: None }
    }
}

/// Grid of the exhaustive search; unset fields take the defaults of
/// [`GridSpec::for_scenario`].
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub m_lo: Option<u32>,
    pub m_hi: Option<u32>,
    pub p_points: Option<usize>,
    pub p_min: Option<f64>,
    pub refine_rounds: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// CSV destination; standard output when absent.
    pub path: Option<PathBuf>,
}

/// Explicit values, or `points` values from `from` to `to`, evenly spaced on a
/// linear or logarithmic scale.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<f64>),
    Range {
        from: f64,
        to: f64,
        points: usize,
        #[serde(default)]
        log: bool,
    },
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match *self {
            Axis::List(ref v) if v.is_empty() => Err(CliError::Config("axis values must not be empty".into())),
            Axis::List(ref v) => Ok(v.clone()),
            Axis::Range { points: 0, .. } => Err(CliError::Config("axis needs at least one point".into())),
            Axis::Range { from, points: 1, .. } => Ok(vec![from]),
            Axis::Range { from, to, points, log } => {
                if log && !(from > 0.0 && to > 0.0) {
                    return Err(CliError::Config("logarithmic axis needs positive ends".into()));
                }
                let n = (points - 1) as f64;
                Ok((0..points)
                    .map(|i| {
                        let t = i as f64 / n;
                        if i == points - 1 {
                            to
                        } else if log {
                            (from.ln() + t * (to.ln() - from.ln())).exp()
                        } else {
                            from + t * (to - from)
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalGrid {
    pub m: Axis,
    pub p: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    #[default]
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionName {
    #[default]
    Rayleigh,
    PointMass,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FadingSection {
    pub distribution: DistributionName,
    pub estimator: EstimatorName,
    pub nodes: usize,
    pub samples: usize,
}

impl Default for FadingSection {
    fn default() -> Self {
        Self { distribution: DistributionName::Rayleigh, estimator: EstimatorName::Quadrature, nodes: 64, samples: 5000 }
    }
}

/// Thresholds, power and fading model of the blocklength-only objectives.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSection {
    pub delta_max: f64,
    pub eps_b_max: f64,
    pub power: Option<f64>,
    pub fading: FadingSection,
}

impl Default for ConstraintSection {
    fn default() -> Self {
        Self { delta_max: 0.1, eps_b_max: 0.1, power: None, fading: FadingSection::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_reference() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c.scenario.build().unwrap(), Scenario::reference());
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"scenari": {}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scenario": {"zb": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"sweep": {"variable": "q", "values": [1]}}"#).is_err());
    }

    #[test]
    fn sweep_variables_parse() {
        for name in ["z_b", "z_e", "z_e2", "d", "n_eves", "p_cap", "m_cap", "sigma2", "delta_max", "eps_b_max", "power", "xi_e"] {
            let v = SweepVariable::try_from(name.to_string()).unwrap();
            assert_eq!(v.to_string(), name);
        }
        assert!(SweepVariable::try_from("z_e0".to_string()).is_err());
    }

    #[test]
    fn applying_values() {
        let c = ExperimentConfig::default();
        let s = c.with_value(SweepVariable::NEves, 3.0).unwrap().scenario.build().unwrap();
        assert_eq!(s.eves.len(), 3);
        assert!(c.with_value(SweepVariable::D, 2.5).is_err());
        assert!(c.with_value(SweepVariable::ZEn(2), 0.5).is_err());
        let two = c.with_value(SweepVariable::NEves, 2.0).unwrap();
        let s = two.with_value(SweepVariable::ZEn(2), 0.5).unwrap().scenario.build().unwrap();
        assert_eq!((s.eves[0].gain, s.eves[1].gain), (1.0, 0.5));
    }

    #[test]
    fn empty_sweep_is_invalid() {
        let c = ExperimentConfig::from_json(r#"{"sweep": {"variable": "z_b", "values": []}}"#).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn axes() {
        let a = Axis::Range { from: 1.0, to: 100.0, points: 3, log: true };
        let v = a.values().unwrap();
        assert_eq!(v[2], 100.0);
        assert!((v[1] - 10.0).abs() < 1e-12);
        assert_eq!(Axis::Range { from: 5.0, to: 9.0, points: 1, log: false }.values().unwrap(), vec![5.0]);
        assert!(Axis::List(vec![]).values().is_err());
    }
}
