//! Experiment configuration, loaded from TOML.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::PhyConfig;
use crate::schemes::{FrequencyPlan, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Scenario1,
    Scenario2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub scheme: SchemeKind,
    pub n_realizations: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Small constant in `R₀ = ε₀·√(ρ′M/(SN))`.
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    /// Record schedules and evaluate the transport-capacity bound.
    #[serde(default = "default_true")]
    pub check_bound: bool,
}

fn default_eps0() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub gamma: f64,
    #[serde(default)]
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub regime: Regime,
    pub rho_or_alpha1: f64,
    /// Derive `ε` from the tuning rule with this constant.
    #[serde(default)]
    pub c_sec: Option<f64>,
    /// Explicit `ε`; ignored when `c_sec` is set.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_one")]
    pub t_prime: f64,
    #[serde(default)]
    pub frequency_plan: FrequencyPlan,
}

/// Parameters that can be swept or coupled to the swept one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    N,
    M,
    S,
    Gamma,
    Q,
    RhoOrAlpha1,
    CSec,
    Epsilon,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::N => "n",
            Self::M => "m",
            Self::S => "s",
            Self::Gamma => "gamma",
            Self::Q => "q",
            Self::RhoOrAlpha1 => "rho_or_alpha1",
            Self::CSec => "c_sec",
            Self::Epsilon => "epsilon",
        }
    }

    fn integral(self) -> bool {
        matches!(self, Self::N | Self::M | Self::S)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    /// `param = factor` sets `param` to `factor × swept value` at each point.
    #[serde(default)]
    pub couple: BTreeMap<SweepParam, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub network: NetworkSection,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub phy: PhyConfig,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

/// Fully resolved parameters of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfig {
    pub index: usize,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub gamma: f64,
    pub q: f64,
    pub rho_or_alpha1: f64,
    pub c_sec: Option<f64>,
    pub epsilon: Option<f64>,
    /// Swept and coupled values at this point, by parameter name.
    pub swept: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn num_points(&self) -> usize {
        self.sweep.as_ref().map_or(1, |s| s.values.len())
    }

    pub fn point(&self, index: usize) -> Result<PointConfig> {
        let net = &self.network;
        let mut p = PointConfig {
            index,
            n: net.n,
            m: net.m,
            s: net.s,
            gamma: net.gamma,
            q: net.q,
            rho_or_alpha1: self.scheme.rho_or_alpha1,
            c_sec: self.scheme.c_sec,
            epsilon: self.scheme.epsilon,
            swept: BTreeMap::new(),
        };
        if let Some(sweep) = &self.sweep {
            let v = *sweep
                .values
                .get(index)
                .ok_or_else(|| Error::Config(format!("sweep has no point {index}")))?;
            set_param(&mut p, sweep.parameter, v)?;
            for (&param, &factor) in &sweep.couple {
                set_param(&mut p, param, factor * v)?;
            }
        }
        Ok(p)
    }

    /// Checks every sweep point; the first invalid one is reported.
    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.n_realizations == 0 {
            return Err(Error::Config("n_realizations must be at least 1".into()));
        }
        if !(e.eps0 > 0.0) {
            return Err(Error::Config("eps0 must be > 0".into()));
        }
        if !(self.scheme.t_prime > 0.0) {
            return Err(Error::Config("t_prime must be > 0".into()));
        }
        self.phy.validate()?;
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::Config("sweep needs at least one value".into()));
            }
            if s.couple.contains_key(&s.parameter) {
                return Err(Error::Config("a parameter cannot be coupled to itself".into()));
            }
        }
        for i in 0..self.num_points() {
            self.point(i)?.validate(self.experiment.scheme, self.scheme.regime)?;
        }
        Ok(())
    }
}

fn set_param(p: &mut PointConfig, param: SweepParam, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::Config(format!("{} = {v} is not finite", param.name())));
    }
    if param.integral() && (v < 0.0 || (v - v.round()).abs() > 1e-9) {
        return Err(Error::Config(format!("{} = {v} must be a non-negative integer", param.name())));
    }
    let int = v.round() as usize;
    match param {
        SweepParam::N => p.n = int,
        SweepParam::M => p.m = int,
        SweepParam::S => p.s = int,
        SweepParam::Gamma => p.gamma = v,
        SweepParam::Q => p.q = v,
        SweepParam::RhoOrAlpha1 => p.rho_or_alpha1 = v,
        SweepParam::CSec => p.c_sec = Some(v),
        SweepParam::Epsilon => p.epsilon = Some(v),
    }
    p.swept.insert(param.name().to_string(), v);
    Ok(())
}

impl PointConfig {
    pub fn validate(&self, scheme: SchemeKind, regime: Regime) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("point {}: {msg}", self.index)));
        if self.n == 0 || self.m == 0 || self.s == 0 {
            return bad("N, M and S must be positive".into());
        }
        if self.s > self.m {
            return bad(format!("S = {} exceeds M = {}", self.s, self.m));
        }
        if !(self.gamma >= 0.0 && self.q >= 0.0 && self.rho_or_alpha1 > 0.0) {
            return bad("need gamma >= 0, q >= 0, rho_or_alpha1 > 0".into());
        }
        match regime {
            Regime::GammaLt1 if self.gamma >= 1.0 => return bad("regime gamma_lt1 needs gamma < 1".into()),
            Regime::GammaGt1 | Regime::ZipfGt1 if self.gamma <= 1.0 => {
                return bad("gamma > 1 regimes need gamma > 1".into())
            }
            Regime::GammaGt1 if self.q <= 0.0 => return bad("regime gamma_gt1 needs q > 0".into()),
            _ => {}
        }
        if scheme == SchemeKind::Scenario2 {
            if !self.s.is_multiple_of(2) {
                return bad(format!("scenario 2 splits the cache; S = {} is odd, round it to even", self.s));
            }
            if self.c_sec.is_none() && self.epsilon.is_none() {
                return bad("scenario 2 needs scheme.c_sec or scheme.epsilon".into());
            }
        }
        if regime == Regime::GammaLt1 && self.q > self.m as f64 {
            log::warn!("point {}: q = {} exceeds M = {}; gamma < 1 analysis assumes q = O(M)", self.index, self.q, self.m);
        }
        if regime == Regime::GammaGt1 && self.q > 0.5 * self.m as f64 {
            log::warn!("point {}: q = {} is not small against M = {}", self.index, self.q, self.m);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[experiment]
scheme = "scenario2"
n_realizations = 10
base_seed = 7

[network]
n = 1000
m = 100
s = 4
gamma = 0.6
q = 10

[scheme]
regime = "gamma_lt1"
rho_or_alpha1 = 4
c_sec = 2.0

[phy]
alpha = 3.5

[sweep]
parameter = "m"
values = [100, 200]
couple = { n = 50 }
"#;

    #[test]
    fn parses_and_resolves_points() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.phy.alpha, 3.5);
        assert_eq!(cfg.phy.reuse_k, 1);
        assert_eq!(cfg.experiment.eps0, 0.1);
        let p = cfg.point(1).unwrap();
        assert_eq!((p.m, p.n), (200, 10_000));
        assert_eq!(p.swept["n"], 10_000.0);
        assert!(cfg.point(2).is_err());
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_invalid() {
        let odd = SAMPLE.replace("s = 4", "s = 3");
        assert!(ExperimentConfig::from_toml_str(&odd).unwrap_err().to_string().contains("odd"));
        let typo = SAMPLE.replace("base_seed", "base_sed");
        assert!(ExperimentConfig::from_toml_str(&typo).is_err());
        let regime = SAMPLE.replace("gamma = 0.6", "gamma = 1.4");
        assert!(ExperimentConfig::from_toml_str(&regime).is_err());
        let frac = SAMPLE.replace("values = [100, 200]", "values = [100.5]");
        assert!(ExperimentConfig::from_toml_str(&frac).is_err());
        let big_s = SAMPLE.replace("values = [100, 200]", "values = [2]");
        assert!(ExperimentConfig::from_toml_str(&big_s).is_err());
    }
}
