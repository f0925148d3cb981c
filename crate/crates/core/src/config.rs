//! The layered configuration file.
//!
//! ```toml
//! [eval]
//! gate_threshold = 0.75
//!
//! [perturb]
//! gamma = 5.0
//!
//! [termination]
//! tau_term = 0.95
//!
//! [loop]
//! eval_window = 20
//! correction_enabled = true
//!
//! [memory]
//! entry_capacity = 10000
//!
//! [sim]
//! grasp_tolerance = 0.02
//! ```
//!
//! Every section and key is optional; omitted values take their defaults.
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{LoopParams, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::memory::MemoryConfig;
use crate::perturb::PerturbParams;
use crate::quality::EvalParams;
use crate::sim::SimParams;
use crate::termination::TermParams;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub eval: EvalParams,
    pub perturb: PerturbParams,
    pub termination: TermParams,
    #[serde(rename = "loop")]
    pub control: LoopParams,
    pub memory: MemoryConfig,
    pub sim: SimParams,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.eval.validate()?;
        self.perturb.validate()?;
        self.termination.validate()?;
        self.control.validate()?;
        self.memory.validate()?;
        self.sim.validate()?;
        if self.memory.feature_dim != FEATURE_DIM {
            return Err(Error::config(format!(
                "memory.feature_dim must be {FEATURE_DIM} to match the featurizer, got {}",
                self.memory.feature_dim
            )));
        }
        if (self.memory.image_width, self.memory.image_height) != (self.termination.width, self.termination.height) {
            return Err(Error::config(
                "memory.image_width/image_height must equal termination.width/height",
            ));
        }
        if self.memory.action_bounds != self.perturb.action_bounds {
            return Err(Error::config("memory.action_bounds must equal perturb.action_bounds"));
        }
        Ok(())
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("configuration serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }
}
