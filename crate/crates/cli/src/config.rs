//! Experiment configuration: one JSON document, with command-line flags
//! overriding individual fields.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dunkl_core::jumprates::request_key;
use dunkl_core::{Family, Multiplicities, SystemSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const MAX_N: usize = 64;
pub const MAX_SAMPLES: usize = 1_000_000_000;
pub const MAX_REPLICAS: usize = 100_000_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub family: Option<Family>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub beta: Option<f64>,
    pub k: Option<Multiplicities>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: Option<String>,
    pub parameters: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub nsamples: Option<usize>,
    pub replicas: Option<usize>,
    pub dt: Option<f64>,
    pub t0: Option<f64>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub system: SystemSection,
    pub experiment: ExperimentSection,
    pub sampling: SamplingSection,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks ranges of every field that is present.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(n) = self.system.n {
            let min = match self.system.family {
                Some(Family::A) => 2,
                _ => 1,
            };
            if n < min || n > MAX_N {
                return bad(format!("system.N = {n} outside [{min}, {MAX_N}]"));
            }
        }
        if let Some(b) = self.system.beta {
            if !(b.is_finite() && b > 0.0) {
                return bad(format!("system.beta = {b} must be finite and positive"));
            }
        }
        if let Some(k) = &self.system.k {
            if k.0.values().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("system.k values must be finite and positive".into());
            }
        }
        if let Some(n) = self.sampling.nsamples {
            if n == 0 || n > MAX_SAMPLES {
                return bad(format!(
                    "sampling.nsamples = {n} outside [1, {MAX_SAMPLES}]"
                ));
            }
        }
        if let Some(n) = self.sampling.replicas {
            if n == 0 || n > MAX_REPLICAS {
                return bad(format!(
                    "sampling.replicas = {n} outside [1, {MAX_REPLICAS}]"
                ));
            }
        }
        if let Some(dt) = self.sampling.dt {
            if !(dt > 0.0 && dt <= 1.0) {
                return bad(format!("sampling.dt = {dt} outside (0, 1]"));
            }
        }
        for (name, v) in [("t0", self.sampling.t0), ("T", self.sampling.t_end)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return bad(format!("sampling.{name} = {v} must be finite and positive"));
                }
            }
        }
        Ok(())
    }

    /// Hash of everything that determines the numbers: output and cache
    /// locations are excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        c.cache_dir = None;
        request_key(&c).expect("config serializes")
    }

    pub fn family(&self) -> Result<Family, CliError> {
        self.system
            .family
            .ok_or_else(|| missing("system.family (--system)"))
    }

    pub fn n(&self) -> Result<usize, CliError> {
        self.system.n.ok_or_else(|| missing("system.N (--n)"))
    }

    pub fn beta(&self) -> Result<f64, CliError> {
        self.system
            .beta
            .ok_or_else(|| missing("system.beta (--beta)"))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| missing("seed (--seed)"))
    }

    pub fn system_spec(&self) -> Result<SystemSpec, CliError> {
        Ok(SystemSpec {
            family: self.family()?,
            n: self.n()?,
            beta: self.beta()?,
            k: self.system.k.clone().unwrap_or_default(),
        })
    }

    pub fn param<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.experiment.parameters.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::Config(format!("experiment.parameters.{key}: {e}"))),
        }
    }

    pub fn set_param<T: Serialize>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            let v = serde_json::to_value(v).expect("parameter serializes");
            self.experiment.parameters.insert(key.to_string(), v);
        }
    }
}

fn missing(what: &str) -> CliError {
    CliError::Config(format!("missing {what}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_document() {
        let c: SimConfig = serde_json::from_str(
            r#"{"system": {"family": "B", "N": 3, "beta": 4, "k": {"short": 1.5}},
                "experiment": {"kind": "rates", "parameters": {"origin": [0, 0, 0]}},
                "sampling": {"nsamples": 1000, "T": 2.0},
                "seed": 5}"#,
        )
        .unwrap();
        c.validate().unwrap();
        let spec = c.system_spec().unwrap();
        assert_eq!(spec.k.get(dunkl_core::Orbit::Short), 1.5);
        assert_eq!(c.param::<Vec<f64>>("origin").unwrap(), Some(vec![0.0; 3]));
        assert_eq!(c.sampling.t_end, Some(2.0));
    }

    #[test]
    fn rejects_unknown_fields_and_bad_ranges() {
        assert!(serde_json::from_str::<SimConfig>(r#"{"sytem": {}}"#).is_err());
        let mut c = SimConfig::default();
        c.system.family = Some(Family::A);
        c.system.n = Some(1);
        assert!(c.validate().is_err());
        c.system.n = Some(3);
        c.sampling.dt = Some(0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let mut a = SimConfig::default();
        a.seed = Some(1);
        let mut b = a.clone();
        b.output = Some("x.json".into());
        b.cache_dir = Some("/tmp".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = Some(2);
        assert_ne!(a.hash(), b.hash());
    }
}
