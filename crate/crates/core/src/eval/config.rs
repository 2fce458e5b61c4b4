use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorKind, DetectorParams};
use crate::ebc::{EbcConfig, Method};
use crate::error::{Error, FieldError, Result};
use crate::explain::ExplainerConfig;
use crate::exstream::ExstreamConfig;
use crate::learners::{LearnerKind, LearnerParams};
use crate::streams::{
    apply_confound, gold_drifts, load_csv_stream, stagger_stream, synth_electricity_stream, ConfoundSpec,
    CsvOptions, DatasetId, FeatureSchema, Instance, StreamSpec, ELECTRICITY_LEN,
};

/// Who answers entropy-gated queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    #[default]
    Simulated,
    Human,
    Replay,
}

/// A full experiment description, read from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `stagger`, `electricity` or `synthetic(drift_times=...)`. Required.
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default)]
    pub confound: bool,
    /// Electricity CSV; the synthetic surrogate is used when absent.
    #[serde(default)]
    pub data_path: Option<PathBuf>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    /// Stream length; defaults to the dataset's natural length.
    #[serde(default)]
    pub total: Option<usize>,
    #[serde(default = "default_learners")]
    pub learners: Vec<LearnerKind>,
    #[serde(default = "default_detectors")]
    pub detectors: Vec<DetectorKind>,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub oracle: OracleKind,
    /// Recorded annotations for `oracle = "replay"`.
    #[serde(default)]
    pub annotation_log: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_delay_window")]
    pub delay_window: i64,
    /// Length of the confounded prefix used for hyperparameter selection.
    #[serde(default = "default_validation_prefix")]
    pub validation_prefix: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub reset_background_on_drift: bool,
    #[serde(default)]
    pub learner_params: LearnerParams,
    #[serde(default)]
    pub detector_params: DetectorParams,
    #[serde(default)]
    pub exstream: ExstreamConfig,
    #[serde(default)]
    pub explainer: ExplainerConfig,
    #[serde(default)]
    pub ebc: EbcConfig,
}

fn default_label_column() -> String {
    "class".into()
}

fn default_learners() -> Vec<LearnerKind> {
    vec![LearnerKind::Nb]
}

fn default_detectors() -> Vec<DetectorKind> {
    vec![DetectorKind::Ddm]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_delay_window() -> i64 {
    1000
}

fn default_validation_prefix() -> usize {
    5000
}

fn default_true() -> bool {
    true
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_dataset("stagger")
    }
}

impl ExperimentConfig {
    pub fn for_dataset(dataset: &str) -> Self {
        Self {
            dataset: Some(dataset.into()),
            confound: false,
            data_path: None,
            label_column: default_label_column(),
            total: None,
            learners: default_learners(),
            detectors: default_detectors(),
            method: Method::default(),
            oracle: OracleKind::default(),
            annotation_log: None,
            seeds: default_seeds(),
            delay_window: default_delay_window(),
            validation_prefix: default_validation_prefix(),
            output_dir: None,
            reset_background_on_drift: true,
            learner_params: LearnerParams::default(),
            detector_params: DetectorParams::default(),
            exstream: ExstreamConfig::default(),
            explainer: ExplainerConfig::default(),
            ebc: EbcConfig::default(),
        }
    }

    /// Parse by extension: `.json` as JSON, anything else as TOML. Syntax and
    /// type errors surface as a single field error; use [`Self::validate`]
    /// for semantic checks.
    pub fn from_str_with_format(text: &str, json: bool) -> Result<Self> {
        if json {
            serde_json::from_str(text).map_err(|e| Error::Config(vec![FieldError::new("<json>", e.to_string())]))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(vec![FieldError::new("<toml>", e.message().to_string())]))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg = Self::from_str_with_format(&text, is_json(path))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn dataset_id(&self) -> Result<DatasetId> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Error::Config(vec![FieldError::new("dataset", "missing dataset id")]))?
            .parse()
    }

    pub fn schema(&self) -> Result<FeatureSchema> {
        Ok(match self.dataset_id()? {
            DatasetId::Stagger => FeatureSchema::stagger(),
            _ => FeatureSchema::electricity(),
        })
    }

    pub fn confound_spec(&self) -> Result<Option<ConfoundSpec>> {
        if !self.confound {
            return Ok(None);
        }
        Ok(Some(match self.dataset_id()? {
            DatasetId::Stagger => ConfoundSpec::c_stagger(),
            _ => ConfoundSpec::c_electricity(),
        }))
    }

    /// Ground-truth spurious features: those the confound reads.
    pub fn gt_spurious(&self) -> Result<BTreeSet<usize>> {
        Ok(self.confound_spec()?.map(|c| c.features()).unwrap_or_default())
    }

    pub fn stream_len(&self) -> Result<usize> {
        Ok(match (self.total, self.dataset_id()?) {
            (Some(n), _) => n,
            (None, DatasetId::Stagger) => StreamSpec::standard(0).total,
            (None, DatasetId::Electricity) => ELECTRICITY_LEN,
            (None, DatasetId::Synthetic { .. }) => 40_000,
        })
    }

    /// Gold drifts that fall inside the configured stream.
    pub fn gold(&self) -> Result<Vec<usize>> {
        let n = self.stream_len()?;
        Ok(gold_drifts(&self.dataset_id()?).into_iter().filter(|&g| g < n).collect())
    }

    /// The (possibly confounded) stream for one seed.
    pub fn stream(&self, seed: u64) -> Result<Vec<Instance>> {
        let total = self.stream_len()?;
        let raw = match self.dataset_id()? {
            DatasetId::Stagger => {
                let mut rows = stagger_stream(&StreamSpec::standard(seed))?;
                if total > rows.len() {
                    return Err(Error::invalid(format!("stagger streams hold at most {} steps", rows.len())));
                }
                rows.truncate(total);
                rows
            }
            DatasetId::Electricity => match &self.data_path {
                Some(path) => {
                    let mut opts = CsvOptions::new(&self.label_column);
                    opts.normalize = true;
                    let mut rows = load_csv_stream(path, &FeatureSchema::electricity(), &opts)?.instances;
                    rows.truncate(total);
                    rows
                }
                None => synth_electricity_stream(total, &self.gold()?, seed)?,
            },
            DatasetId::Synthetic { .. } => synth_electricity_stream(total, &self.gold()?, seed)?,
        };
        match self.confound_spec()? {
            Some(c) => apply_confound(raw, &c),
            None => Ok(raw),
        }
    }

    /// Every problem found, addressed by field path.
    pub fn validation_errors(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        match self.dataset.as_deref() {
            None => errs.push(FieldError::new("dataset", "missing dataset id")),
            Some(d) => {
                if let Err(e) = d.parse::<DatasetId>() {
                    errs.push(FieldError::new("dataset", e.to_string()));
                }
            }
        }
        if self.learners.is_empty() {
            errs.push(FieldError::new("learners", "at least one learner required"));
        }
        if self.detectors.is_empty() {
            errs.push(FieldError::new("detectors", "at least one detector required"));
        }
        if self.seeds.is_empty() {
            errs.push(FieldError::new("seeds", "at least one seed required"));
        }
        if self.delay_window < 0 {
            errs.push(FieldError::new("delay_window", "must be non-negative"));
        }
        if self.total == Some(0) {
            errs.push(FieldError::new("total", "must be positive"));
        }
        if self.oracle == OracleKind::Replay && self.annotation_log.is_none() {
            errs.push(FieldError::new("annotation_log", "required when oracle = \"replay\""));
        }
        if let Err(e) = self.exstream.validate() {
            errs.push(FieldError::new("exstream", strip(&e)));
        }
        if self.exstream.ddm_threshold.is_nan() {
            errs.push(FieldError::new("exstream.ddm_threshold", "must be a number"));
        }
        if self.explainer.n_perms == 0 {
            errs.push(FieldError::new("explainer.n_perms", "must be at least 1"));
        }
        if self.explainer.background_size == 0 {
            errs.push(FieldError::new("explainer.background_size", "must be at least 1"));
        }
        if let Ok(schema) = self.schema() {
            if let Err(e) = self.ebc.validate(schema.arity()) {
                errs.push(FieldError::new("ebc", strip(&e)));
            }
        }
        let lp = &self.learner_params;
        if lp.nb_alpha <= 0.0 || lp.nb_alpha.is_nan() {
            errs.push(FieldError::new("learner_params.nb_alpha", "must be positive"));
        }
        if !(lp.nb_decay > 0.0 && lp.nb_decay <= 1.0) {
            errs.push(FieldError::new("learner_params.nb_decay", "must lie in (0, 1]"));
        }
        if lp.lr_eta <= 0.0 || lp.lr_eta.is_nan() {
            errs.push(FieldError::new("learner_params.lr_eta", "must be positive"));
        }
        if lp.svm_lambda <= 0.0 || lp.svm_lambda.is_nan() {
            errs.push(FieldError::new("learner_params.svm_lambda", "must be positive"));
        }
        let dp = &self.detector_params;
        if !(dp.adwin.delta > 0.0 && dp.adwin.delta < 1.0) {
            errs.push(FieldError::new("detector_params.adwin.delta", "must lie in (0, 1)"));
        }
        if dp.adwin.max_buckets == 0 {
            errs.push(FieldError::new("detector_params.adwin.max_buckets", "must be at least 1"));
        }
        if dp.ph.lambda <= 0.0 || dp.ph.lambda.is_nan() {
            errs.push(FieldError::new("detector_params.ph.lambda", "must be positive"));
        }
        if dp.ddm.drift_level < dp.ddm.warning_level {
            errs.push(FieldError::new("detector_params.ddm.drift_level", "must not be below warning_level"));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.validation_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}

pub(crate) fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}
