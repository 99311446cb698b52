//! Scenario files and run configuration. Both are JSON; unknown keys are
//! errors naming the offending path.

use std::fs;
use std::path::Path;

use hdnf_core::deployment::TrainConfig;
use hdnf_core::pipeline::PipelineOptions;
use hdnf_core::scenario::{Scenario, ScenarioConfig, generate_scenario};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiment::ExperimentSpec;

/// Everything a CLI run needs besides the seed and output directory.
/// A config file only lists the keys it changes; they are merged onto
/// [`RunConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub area_side_m: f64,
    pub num_tasks: usize,
    pub scenario: ScenarioConfig,
    pub training: TrainConfig,
    pub pipeline: PipelineOptions,
    /// Final gate cut when extracting a deployment from a policy.
    pub gate_threshold: f64,
    /// Altitude of grid-baseline stations.
    pub grid_altitude_m: f64,
    /// Altitude of the coverage heatmap plane.
    pub heatmap_altitude_m: f64,
    pub experiment: ExperimentSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut scenario = ScenarioConfig::default();
        scenario.fleet.num_delivery_uavs = 2;
        scenario.max_bs = 4;
        let mut training = TrainConfig::default();
        training.env.num_agents = 4;
        training.episodes = 200;
        Self {
            area_side_m: 1000.0,
            num_tasks: 5,
            scenario,
            training,
            pipeline: PipelineOptions::default(),
            gate_threshold: 0.5,
            grid_altitude_m: 120.0,
            heatmap_altitude_m: 0.0,
            experiment: ExperimentSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let overrides: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut base = serde_json::to_value(Self::default()).expect("default config serializes");
        merge(&mut base, overrides);
        let cfg: Self = from_value_strict(base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::input(path, e))?;
        Self::from_json_str(&text).map_err(|e| e.in_file(path))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let mut bad = Vec::new();
        if !(self.area_side_m > 0.0 && self.area_side_m.is_finite()) {
            bad.push("area_side_m must be positive");
        }
        if self.num_tasks == 0 {
            bad.push("num_tasks must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gate_threshold) {
            bad.push("gate_threshold must lie in [0, 1]");
        }
        if !(self.pipeline.prune_eps >= 0.0) {
            bad.push("pipeline.prune_eps must be nonnegative");
        }
        if bad.is_empty() {
            self.experiment.validate()
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    /// Scenario drawn from this configuration.
    pub fn scenario(&self, seed: u64) -> Result<Scenario> {
        Ok(generate_scenario(seed, self.area_side_m, self.num_tasks, &self.scenario)?)
    }

    /// Stable hash of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canon = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(canon).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Objects merge key by key; anything else replaces.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Deserialize reporting the JSON path of the first problem.
pub fn from_value_strict<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

pub fn from_str_strict<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let v = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    Ok(v)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let s: Scenario = from_str_strict(text)?;
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::input(path, e))?;
    parse_scenario(&text).map_err(|e| e.in_file(path))
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenario serializes") + "\n"
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::input(path, e))?;
    from_str_strict(&text).map_err(|e| e.in_file(path))
}
