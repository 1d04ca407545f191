use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rate_region_check, ChannelConfig, ChannelSpec, RateTuple, RegionStatus};

/// Coding scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Bernoulli parameters recovered from generating-function roots (`p = 2`).
    Root,
    /// Lattice time sharing with the least-squares decoder.
    Timeshare,
    /// Binary grid time sharing with the difference-matrix decoder (`p = 2`).
    TimeshareBinary,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Root => "root",
            Scheme::Timeshare => "timeshare",
            Scheme::TimeshareBinary => "timeshare-binary",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "root" => Ok(Scheme::Root),
            "timeshare" => Ok(Scheme::Timeshare),
            "timeshare-binary" => Ok(Scheme::TimeshareBinary),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// One experiment: a scheme, a channel, a rate tuple and a grid of blocklengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub d: usize,
    pub p: usize,
    pub rates: Vec<f64>,
    pub blocklengths: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Worker threads for sweeps; defaults to the rayon default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub skip_permutation: bool,
    /// Cycle through every message tuple instead of sampling (tiny codebooks only).
    #[serde(default)]
    pub exhaustive: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn channel_config(&self) -> ChannelConfig {
        ChannelConfig {
            d: self.d,
            p: self.p,
            epsilon: self.epsilon,
            matrix: self.matrix.clone(),
        }
    }

    pub fn rate_tuple(&self) -> Result<RateTuple> {
        RateTuple::new(self.rates.clone())
    }

    /// Checks scheme/parameter compatibility and builds the channel.
    pub fn validate(&self) -> Result<ValidatedConfig> {
        if matches!(self.scheme, Scheme::Root | Scheme::TimeshareBinary) && self.p != 2 {
            return Err(Error::Config(format!(
                "scheme `{}` needs p = 2, got p = {}",
                self.scheme, self.p
            )));
        }
        let spec = self.channel_config().to_spec()?;
        let rates = self.rate_tuple()?;
        let region = rate_region_check(&rates, self.d, self.p)?;
        if matches!(self.scheme, Scheme::Timeshare | Scheme::TimeshareBinary) {
            if let Some(&n) = self.blocklengths.iter().find(|&&n| n == 0 || n % self.d != 0) {
                return Err(Error::Config(format!(
                    "blocklength {n} is not a positive multiple of d = {}",
                    self.d
                )));
            }
            if rates.as_slice().iter().any(|&r| !(r > 0.0)) {
                return Err(Error::Config("time-sharing rates must be positive".into()));
            }
        }
        Ok(ValidatedConfig {
            spec,
            rates,
            region,
        })
    }
}

/// Products of [`ExperimentConfig::validate`].
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub spec: ChannelSpec,
    pub rates: RateTuple,
    pub region: RegionStatus,
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "scheme": "timeshare", "d": 2, "p": 2, "rates": [0.4, 0.4],
        "blocklengths": [1000, 10000], "epsilon": 0.05, "trials": 10, "seed": 7
    }"#;

    #[test]
    fn parses_and_validates() {
        let cfg = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(cfg.scheme, Scheme::Timeshare);
        assert!(!cfg.skip_permutation);
        let v = cfg.validate().unwrap();
        assert_eq!(v.region, RegionStatus::Inside);
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn root_needs_binary_alphabet() {
        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.scheme = Scheme::Root;
        cfg.p = 3;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn outside_region_is_recorded_not_rejected() {
        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.rates = vec![0.8, 0.8];
        assert_eq!(cfg.validate().unwrap().region, RegionStatus::Outside);
    }

    #[test]
    fn odd_blocklength_rejected_for_timeshare() {
        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.blocklengths = vec![1001];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::Root, Scheme::Timeshare, Scheme::TimeshareBinary] {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
    }
}
