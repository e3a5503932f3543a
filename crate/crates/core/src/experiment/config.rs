use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    HsbBt,
    HsbLg,
    HsbAps,
    HsbKary,
    HsbKgroup,
    HsbArb,
    Exp3,
    Sexp3,
    Exp4Flat,
    Hamming,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::HsbBt => "hsb-bt",
            Algorithm::HsbLg => "hsb-lg",
            Algorithm::HsbAps => "hsb-aps",
            Algorithm::HsbKary => "hsb-kary",
            Algorithm::HsbKgroup => "hsb-kgroup",
            Algorithm::HsbArb => "hsb-arb",
            Algorithm::Exp3 => "exp3",
            Algorithm::Sexp3 => "sexp3",
            Algorithm::Exp4Flat => "exp4-flat",
            Algorithm::Hamming => "hamming",
        }
    }

    pub fn is_hierarchical(self) -> bool {
        matches!(
            self,
            Algorithm::HsbBt
                | Algorithm::HsbLg
                | Algorithm::HsbAps
                | Algorithm::HsbKary
                | Algorithm::HsbKgroup
                | Algorithm::HsbArb
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaKeyword {
    Auto,
}

/// A fixed learning rate, or `"auto"` to tune it from the horizon and the
/// structure's constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Fixed(f64),
    Keyword(EtaKeyword),
}

impl Default for EtaSpec {
    fn default() -> Self {
        EtaSpec::Keyword(EtaKeyword::Auto)
    }
}

/// One competitor in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    /// Column name in outputs; defaults to the algorithm name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Levels of binary splitting: the grid has `2^depth` cells (or
    /// `k^depth` for K-ary trees).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    /// Number of grid cells, for structures not parameterized by depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaves: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub eta: EtaSpec,
    /// Expected number of regions of the best partition, used by `"auto"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<usize>,
}

impl AlgorithmSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        AlgorithmSpec {
            algorithm,
            label: None,
            depth: None,
            leaves: None,
            k: None,
            eta: EtaSpec::default(),
            regions: None,
        }
    }

    pub fn depth(mut self, depth: u32) -> Self {
        self.depth = Some(depth);
        self
    }

    pub fn leaves(mut self, leaves: usize) -> Self {
        self.leaves = Some(leaves);
        self
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn regions(mut self, regions: usize) -> Self {
        self.regions = Some(regions);
        self
    }

    pub fn eta(mut self, eta: f64) -> Self {
        self.eta = EtaSpec::Fixed(eta);
        self
    }

    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn display_label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.algorithm.name().to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseName {
    Stationary,
    Switched,
}

fn default_switch_fraction() -> f64 {
    0.25
}

fn default_epochs() -> usize {
    9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    /// The three-arm sinusoidal Bernoulli model on a one-dimensional context.
    Sinusoidal {
        phase: PhaseName,
        #[serde(default = "default_switch_fraction")]
        switch_fraction: f64,
    },
    /// Logged click data. Without a `log` path, a log is generated from the
    /// stationary sinusoidal model with a uniformly random logging policy.
    Replay {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        log: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arms: Option<usize>,
    },
    /// Multi-class classification through one-vs-all codes. Without a
    /// `dataset` path, a linearly separable synthetic set is generated.
    Ecoc {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dataset: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        classes: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        features: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
        #[serde(default = "default_epochs")]
        epochs: usize,
    },
}

fn default_presentations() -> usize {
    1
}

fn default_stride() -> usize {
    1
}

/// A complete, reproducible experiment description.
///
/// Every source of randomness is derived from the listed `seeds`: seed `s`
/// generates dataset `s`, and presentation `p` of that dataset drives the
/// learner with stream `p + 1` of the same seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: u64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_presentations")]
    pub presentations: usize,
    /// Write one curve row every this many rounds.
    #[serde(default = "default_stride")]
    pub curve_stride: usize,
    /// Also write every round of every run.
    #[serde(default)]
    pub record_rounds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub environment: EnvironmentSpec,
    pub algorithms: Vec<AlgorithmSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Checks cross-field constraints; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds: at least one seed is required"));
        }
        if self.presentations == 0 {
            return Err(Error::config("presentations: must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms: at least one algorithm is required"));
        }
        if let EnvironmentSpec::Sinusoidal { switch_fraction, .. } = self.environment {
            if !(0.0..=1.0).contains(&switch_fraction) {
                return Err(Error::config("environment.switch_fraction: must lie in [0, 1]"));
            }
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            let field = |name: &str| format!("algorithms[{i}].{name}");
            match a.eta {
                EtaSpec::Fixed(eta) if !(eta > 0.0 && eta.is_finite()) => {
                    return Err(Error::config(format!("{}: must be positive", field("eta"))));
                }
                EtaSpec::Keyword(EtaKeyword::Auto) if a.algorithm.is_hierarchical() && a.regions.is_none() => {
                    return Err(Error::config(format!(
                        "{}: eta = \"auto\" needs the expected number of regions",
                        field("regions")
                    )));
                }
                _ => {}
            }
            if a.regions == Some(0) {
                return Err(Error::config(format!("{}: must be at least 1", field("regions"))));
            }
            if a.algorithm == Algorithm::Hamming && !matches!(self.environment, EnvironmentSpec::Ecoc { .. }) {
                return Err(Error::config(format!(
                    "{}: hamming decoding needs an ecoc environment",
                    field("algorithm")
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
horizon = 1000
seeds = [1, 2]
presentations = 3
curve_stride = 10

[environment]
kind = "sinusoidal"
phase = "switched"

[[algorithms]]
algorithm = "hsb-bt"
depth = 5
eta = "auto"
regions = 3

[[algorithms]]
algorithm = "exp3"

[[algorithms]]
algorithm = "hsb-kgroup"
leaves = 8
k = 3
eta = 0.05
label = "kg"
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(cfg.algorithms[0].eta, EtaSpec::Keyword(EtaKeyword::Auto));
        assert_eq!(cfg.algorithms[2].eta, EtaSpec::Fixed(0.05));
        assert_eq!(
            cfg.environment,
            EnvironmentSpec::Sinusoidal {
                phase: PhaseName::Switched,
                switch_fraction: 0.25
            }
        );
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn auto_eta_requires_regions() {
        let text = EXAMPLE.replace("regions = 3\n", "");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("algorithms[0].regions"), "{err}");
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(ExperimentConfig::from_toml_str(&EXAMPLE.replace("depth = 5", "dpeth = 5")).is_err());
        let err = ExperimentConfig::from_toml_str(&EXAMPLE.replace("eta = 0.05", "eta = -1.0")).unwrap_err();
        assert!(err.to_string().contains("algorithms[2].eta"));
        assert!(ExperimentConfig::from_toml_str(&EXAMPLE.replace("seeds = [1, 2]", "seeds = []")).is_err());
    }
}
