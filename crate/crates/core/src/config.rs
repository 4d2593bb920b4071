//! Deployment configuration and the scenario file format.
//!
//! A scenario file is TOML with a `[channel]` and a `[deployment]` table:
//!
//! ```toml
//! [channel]
//! eta = 2.5             # path-loss exponent
//! sigma_db = 8.0        # shadowing standard deviation, dB
//! alpha_gain_db = -30.0 # composite gain alpha / r0^-eta, dB
//! psi_dbm = -75.0       # target mean received power
//! p_rcv_min_dbm = -88.0 # minimum acceptable received power
//! step_m = 2.0          # step length, meters
//! levels_dbm = [-25.0, -20.0, -15.0, -10.0, -5.0, 0.0, 3.0]  # or levels_mw
//! r_max_steps = 10      # forced placement distance, steps
//!
//! [deployment]
//! theta = 0.025         # probability that the line ends at the next step
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{build_pmf, dbm_to_mw, ChannelParams, LinkPowerModel, PowerLevelSet};
use crate::error::{Error, Result};

/// Path cost functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Sum of link powers along the path.
    Sum,
    /// Largest link power along the path.
    Max,
}

impl Objective {
    /// Extends a path whose remaining length is `rest` by a link of power `link`.
    #[inline]
    pub fn combine(self, link: f64, rest: f64) -> f64 {
        match self {
            Objective::Sum => link + rest,
            Objective::Max => link.max(rest),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Sum => "sum",
            Objective::Max => "max",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Objective::Sum),
            "max" => Ok(Objective::Max),
            other => Err(Error::Config(format!("unknown objective `{other}` (sum|max)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentConfig {
    /// Probability that the line ends at the next step.
    pub theta: f64,
    /// Relay cost in mW-equivalent per relay.
    pub xi: f64,
    /// A relay must be placed once the gap to the previous node reaches this
    /// many steps.
    pub r_max_steps: u32,
    pub objective: Objective,
    /// How many previous nodes a link may reach back to.
    pub memory_n: u32,
}

impl DeploymentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(Error::Config(format!("xi must be finite and >= 0, got {}", self.xi)));
        }
        if self.r_max_steps == 0 {
            return Err(Error::Config("r_max_steps must be at least 1".into()));
        }
        if self.memory_n == 0 {
            return Err(Error::Config("memory_n must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    /// Pmf horizon a solver or simulator needs: links may span up to
    /// `memory_n` forced-placement gaps.
    pub fn pmf_horizon(&self) -> u32 {
        self.r_max_steps * self.memory_n + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub eta: f64,
    pub sigma_db: f64,
    pub alpha_gain_db: f64,
    pub psi_dbm: f64,
    pub p_rcv_min_dbm: f64,
    pub step_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels_dbm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels_mw: Option<Vec<f64>>,
    pub r_max_steps: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentSection {
    pub theta: f64,
}

/// A parsed scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub channel: ChannelSection,
    pub deployment: DeploymentSection,
}

pub const INDOOR_DBM_TOML: &str = include_str!("../presets/indoor_dbm.toml");
pub const INDOOR_MW_GRID_TOML: &str = include_str!("../presets/indoor_mw_grid.toml");

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario file: {e}")))?;
        s.channel_params()?;
        s.levels()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Seven levels from -25 to 3 dBm.
    pub fn indoor_dbm() -> Self {
        Self::from_toml(INDOOR_DBM_TOML).expect("bundled preset parses")
    }

    /// Twenty levels 0.1, 0.2, ..., 2.0 mW.
    pub fn indoor_mw_grid() -> Self {
        Self::from_toml(INDOOR_MW_GRID_TOML).expect("bundled preset parses")
    }

    pub fn channel_params(&self) -> Result<ChannelParams> {
        let c = &self.channel;
        let p = ChannelParams {
            eta: c.eta,
            sigma_db: c.sigma_db,
            alpha_gain: dbm_to_mw(c.alpha_gain_db),
            psi_mw: dbm_to_mw(c.psi_dbm),
            p_rcv_min_mw: dbm_to_mw(c.p_rcv_min_dbm),
            step_m: c.step_m,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn levels(&self) -> Result<PowerLevelSet> {
        match (&self.channel.levels_dbm, &self.channel.levels_mw) {
            (Some(dbm), None) => PowerLevelSet::from_dbm(dbm),
            (None, Some(mw)) => PowerLevelSet::new(mw.clone()),
            _ => Err(Error::Config(
                "exactly one of levels_dbm / levels_mw must be given".into(),
            )),
        }
    }

    pub fn deployment(&self, objective: Objective, memory_n: u32, xi: f64) -> DeploymentConfig {
        DeploymentConfig {
            theta: self.deployment.theta,
            xi,
            r_max_steps: self.channel.r_max_steps,
            objective,
            memory_n,
        }
    }

    /// Link model tabulated far enough for memory-`memory_n` policies.
    pub fn link_model(&self, memory_n: u32) -> Result<LinkPowerModel> {
        let horizon = self.channel.r_max_steps * memory_n.max(1) + 1;
        build_pmf(self.channel_params()?, self.levels()?, horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        let s = Scenario::indoor_dbm();
        let p = s.channel_params().unwrap();
        assert!((p.alpha_gain - 1e-3).abs() < 1e-18);
        assert!((p.psi_mw - 10f64.powf(-7.5)).abs() < 1e-20);
        assert_eq!(s.levels().unwrap().len(), 7);
        let g = Scenario::indoor_mw_grid();
        assert_eq!(g.levels().unwrap().len(), 20);
        assert_eq!(g.deployment.theta, 0.025);
    }

    #[test]
    fn both_level_kinds_is_an_error() {
        let text = INDOOR_DBM_TOML.replace("r_max_steps = 10", "r_max_steps = 10\nlevels_mw = [1.0]");
        assert!(Scenario::from_toml(&text).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = INDOOR_DBM_TOML.replace("theta = 0.025", "theta = 0.025\nfoo = 1");
        assert!(Scenario::from_toml(&text).is_err());
    }

    #[test]
    fn deployment_validation() {
        let base = Scenario::indoor_dbm().deployment(Objective::Sum, 1, 0.01);
        assert!(base.validate().is_ok());
        assert!(DeploymentConfig { theta: 0.0, ..base }.validate().is_err());
        assert!(DeploymentConfig { theta: 1.5, ..base }.validate().is_err());
        assert!(DeploymentConfig { xi: -1.0, ..base }.validate().is_err());
        assert!(DeploymentConfig { r_max_steps: 0, ..base }.validate().is_err());
        assert!(DeploymentConfig { memory_n: 0, ..base }.validate().is_err());
    }

    #[test]
    fn objective_parsing() {
        assert_eq!("sum".parse::<Objective>().unwrap(), Objective::Sum);
        assert_eq!("max".parse::<Objective>().unwrap(), Objective::Max);
        assert!("avg".parse::<Objective>().is_err());
        assert_eq!(Objective::Sum.combine(0.2, 0.3), 0.5);
        assert_eq!(Objective::Max.combine(0.2, 0.3), 0.3);
    }
}
