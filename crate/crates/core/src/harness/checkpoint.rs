//! Versioned JSON checkpoints holding the complete state of a run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::write_atomic;
use crate::error::{Error, Result};
use crate::simnet::{RunConfig, TrainerState};

pub const CHECKPOINT_VERSION: &str = "chex-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub iteration: u64,
    pub experiment: ExperimentConfig,
    pub run: RunConfig,
    pub state: TrainerState,
}

impl Checkpoint {
    pub fn new(experiment: ExperimentConfig, run: RunConfig, state: TrainerState) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION.to_string(),
            iteration: state.optimizer.iteration,
            experiment,
            run,
            state,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let found = value
            .get("version")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Parse("missing version tag".into()))?;
        if found != CHECKPOINT_VERSION {
            return Err(Error::Version {
                expected: CHECKPOINT_VERSION.into(),
                found: found.into(),
            });
        }
        let ck: Checkpoint = serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
        if ck.iteration != ck.state.optimizer.iteration {
            return Err(Error::Parse(format!(
                "header iteration {} disagrees with optimizer iteration {}",
                ck.iteration, ck.state.optimizer.iteration
            )));
        }
        Ok(ck)
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    write_atomic(path, checkpoint.to_json()?.as_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_json(&std::fs::read_to_string(path)?)
}
