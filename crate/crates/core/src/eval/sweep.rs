use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{is_json, ExperimentConfig};
use super::run::run_experiment;
use crate::error::{Error, FieldError, Result};

/// Hyperparameter candidates, each a partial config merged over the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub candidates: Vec<Value>,
}

impl Grid {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if is_json(path) {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(vec![FieldError::new("<grid>", e.message().to_string())]))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub index: usize,
    pub false_alarms: usize,
    pub detected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub chosen: usize,
    pub scores: Vec<CandidateScore>,
    /// The base config with the chosen candidate applied.
    pub config: ExperimentConfig,
}

/// Recursively overlay `patch` onto `base`; tables merge, everything else
/// replaces.
pub fn deep_merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

pub fn apply_candidate(base: &ExperimentConfig, candidate: &Value, index: usize) -> Result<ExperimentConfig> {
    let mut v = serde_json::to_value(base)?;
    deep_merge(&mut v, candidate);
    let cfg: ExperimentConfig = serde_json::from_value(v)
        .map_err(|e| Error::Config(vec![FieldError::new(format!("candidates[{index}]"), e.to_string())]))?;
    let errs = cfg.validation_errors();
    if !errs.is_empty() {
        return Err(Error::Config(
            errs.into_iter()
                .map(|e| FieldError::new(format!("candidates[{index}].{}", e.path), e.message))
                .collect(),
        ));
    }
    Ok(cfg)
}

/// Score every candidate on the confounded validation prefix and pick the
/// one with the fewest false alarms, then the most detections; ties go to
/// the earliest candidate in grid order.
pub fn sweep(base: &ExperimentConfig, grid: &Grid) -> Result<SweepOutcome> {
    if grid.candidates.is_empty() {
        return Err(Error::Config(vec![FieldError::new("candidates", "grid is empty")]));
    }
    base.validate()?;
    let configs: Vec<ExperimentConfig> = grid
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| apply_candidate(base, c, i))
        .collect::<Result<_>>()?;
    let scores: Vec<CandidateScore> = configs
        .par_iter()
        .enumerate()
        .map(|(index, cfg)| {
            let mut val = cfg.clone();
            val.confound = true;
            val.total = Some(cfg.validation_prefix.min(cfg.stream_len()?));
            let out = run_experiment(&val)?;
            Ok(CandidateScore {
                index,
                false_alarms: out.report.cells.iter().map(|c| c.outcome.false_alarms).sum(),
                detected: out.report.cells.iter().map(|c| c.outcome.detected).sum(),
            })
        })
        .collect::<Result<_>>()?;
    let chosen = scores
        .iter()
        .min_by(|a, b| {
            a.false_alarms
                .cmp(&b.false_alarms)
                .then(b.detected.cmp(&a.detected))
                .then(a.index.cmp(&b.index))
        })
        .map(|s| s.index)
        .expect("non-empty grid");
    Ok(SweepOutcome {
        chosen,
        scores,
        config: configs[chosen].clone(),
    })
}
