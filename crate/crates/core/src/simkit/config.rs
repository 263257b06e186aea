//! Experiment configuration file.
//!
//! TOML key/value text. Unknown keys are rejected. Example:
//!
//! ```toml
//! schema_version = 1
//! m = 10
//! k = 2
//! n_iters = 7000
//! n_realizations = 200
//! noise_var = 1e-3
//! plant_seed = 7
//! signal_seed = 1
//! plant = "random-gaussian-factors"   # or "explicit" together with plant_factors
//! # plant_factors = [[...], [...]]
//! # init = "staggered"                # or "staggered-last-tap"
//! # exclude_diverged = false
//! # target_emse_db = -30.0
//!
//! [[algorithm]]
//! kind = "sml-lms"                    # or "volterra-lms"
//! mu = 0.004
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::adaptive::InitScheme;
use crate::error::{Error, Result};

use super::{Algorithm, ExperimentConfig, PlantSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TARGET_EMSE_DB: f64 = -30.0;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    m: usize,
    k: usize,
    n_iters: usize,
    n_realizations: usize,
    noise_var: f64,
    plant_seed: u64,
    signal_seed: u64,
    #[serde(default = "default_plant")]
    plant: String,
    #[serde(default)]
    plant_factors: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_init")]
    init: String,
    #[serde(default)]
    exclude_diverged: bool,
    #[serde(default)]
    target_emse_db: Option<f64>,
    algorithm: Vec<RawAlgorithm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgorithm {
    kind: String,
    mu: f64,
}

fn default_plant() -> String {
    "random-gaussian-factors".into()
}

fn default_init() -> String {
    "staggered".into()
}

/// A parsed config file: shared settings plus one entry per algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub experiments: Vec<ExperimentConfig>,
    pub target_emse_db: f64,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        let plant_spec = match (raw.plant.as_str(), raw.plant_factors) {
            ("random-gaussian-factors", None) => PlantSpec::RandomGaussian,
            ("random-gaussian-factors", Some(_)) => {
                return Err(Error::Config(
                    "plant_factors given but plant = \"random-gaussian-factors\"".into(),
                ))
            }
            ("explicit", Some(f)) => PlantSpec::Explicit(f),
            ("explicit", None) => {
                return Err(Error::Config(
                    "plant = \"explicit\" requires plant_factors".into(),
                ))
            }
            (other, _) => return Err(Error::Config(format!("unknown plant kind {other:?}"))),
        };
        let init = match raw.init.as_str() {
            "staggered" => InitScheme::Staggered,
            "staggered-last-tap" => InitScheme::StaggeredLastTap,
            other => return Err(Error::Config(format!("unknown init scheme {other:?}"))),
        };
        if raw.algorithm.is_empty() {
            return Err(Error::Config(
                "at least one [[algorithm]] entry is required".into(),
            ));
        }
        let target_emse_db = raw.target_emse_db.unwrap_or(DEFAULT_TARGET_EMSE_DB);
        if !target_emse_db.is_finite() {
            return Err(Error::Config("target_emse_db must be finite".into()));
        }

        let experiments = raw
            .algorithm
            .into_iter()
            .map(|a| {
                let cfg = ExperimentConfig {
                    m: raw.m,
                    k: raw.k,
                    n_iters: raw.n_iters,
                    n_realizations: raw.n_realizations,
                    noise_var: raw.noise_var,
                    mu: a.mu,
                    plant_seed: raw.plant_seed,
                    signal_seed: raw.signal_seed,
                    plant_spec: plant_spec.clone(),
                    algorithm: a.kind.parse()?,
                    init,
                    exclude_diverged: raw.exclude_diverged,
                };
                cfg.validate()?;
                Ok(cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConfigFile {
            experiments,
            target_emse_db,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ConfigFile::parse(&std::fs::read_to_string(path)?)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sml-lms" => Ok(Algorithm::SmlLms),
            "volterra-lms" => Ok(Algorithm::VolterraLms),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}
