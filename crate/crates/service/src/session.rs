use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use sdrift_core::detectors::DetectorKind;
use sdrift_core::ebc::{AnnotationRecord, EbcSession, Event, Oracle, QueryEvent};
use sdrift_core::eval::{build_oracle, replay_oracle, session_setup, ExperimentConfig};
use sdrift_core::exstream::AlarmEvent;
use sdrift_core::explain::{Attribution, RelevanceWeights};
use sdrift_core::learners::LearnerKind;
use sdrift_core::streams::{FeatureSchema, FeatureValue, Instance};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Running,
    PausedAwaitingAnnotation,
    Finished,
}

/// One row of the explanation shown to the annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub name: String,
    pub value: Value,
    pub attribution: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationPayload {
    pub t: usize,
    pub features: Vec<FeatureRow>,
    pub entropy: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub mode: Mode,
    /// Steps processed so far.
    pub t: usize,
    pub total: usize,
    pub learner: LearnerKind,
    pub detector: DetectorKind,
    pub seed: u64,
    pub feature_names: Vec<String>,
    /// Known drift positions, for the timeline.
    pub gold: Vec<usize>,
    pub explanation: Option<ExplanationPayload>,
    pub entropy: Option<f64>,
    pub tau: f64,
    pub pending: Option<ExplanationPayload>,
    pub spurious: Vec<String>,
    pub alarms: Vec<AlarmEvent>,
    pub queries: Vec<QueryEvent>,
    /// Digest of model, monitor and log state; equal digests mean nothing moved.
    pub state_hash: String,
}

/// Body of `POST /v1/sessions`. Every field is optional; `config` falls back
/// to the server's default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    #[serde(default)]
    pub config: Option<Value>,
    #[serde(default)]
    pub learner: Option<LearnerKind>,
    #[serde(default)]
    pub detector: Option<DetectorKind>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Answer queries from this log instead of waiting for a human.
    #[serde(default)]
    pub annotations: Option<Vec<AnnotationRecord>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRequest {
    pub spurious: Vec<String>,
}

pub fn parse_config(value: Value) -> Result<ExperimentConfig, ApiError> {
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ApiError::InvalidConfig(vec![crate::error::FieldIssue {
            path,
            message: e.into_inner().to_string(),
        }])
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// A live run over a materialized stream.
pub struct LiveSession {
    id: String,
    session: EbcSession,
    stream: Vec<Instance>,
    schema: FeatureSchema,
    gold: Vec<usize>,
    seed: u64,
}

impl LiveSession {
    pub fn create(id: String, cfg: &ExperimentConfig, req: &CreateRequest) -> Result<Self, ApiError> {
        let learner = req.learner.unwrap_or(cfg.learners[0]);
        let detector = req.detector.unwrap_or(cfg.detectors[0]);
        let seed = req.seed.unwrap_or(cfg.seeds[0]);
        let oracle: Oracle = match &req.annotations {
            Some(log) => replay_oracle(log),
            None => build_oracle(cfg)?,
        };
        let setup = session_setup(cfg, learner, detector, seed)?;
        let schema = setup.schema.clone();
        let session = EbcSession::new(setup, oracle)?;
        Ok(Self {
            id,
            session,
            stream: cfg.stream(seed)?,
            schema,
            gold: cfg.gold()?,
            seed,
        })
    }

    pub fn mode(&self) -> Mode {
        if self.session.pending().is_some() {
            Mode::PausedAwaitingAnnotation
        } else if self.session.steps() >= self.stream.len() {
            Mode::Finished
        } else {
            Mode::Running
        }
    }

    /// Advance up to `n` steps, stopping at a pending query or stream end.
    pub fn step(&mut self, n: usize) -> Result<(), ApiError> {
        if n == 0 {
            return Ok(());
        }
        if self.mode() == Mode::PausedAwaitingAnnotation {
            return Err(ApiError::Conflict("session is awaiting an annotation".into()));
        }
        for _ in 0..n {
            let t = self.session.steps();
            let Some(inst) = self.stream.get(t) else { break };
            self.session.step(inst)?;
            if self.session.pending().is_some() {
                break;
            }
        }
        Ok(())
    }

    pub fn annotate(&mut self, names: &[String]) -> Result<(), ApiError> {
        let unknown: Vec<String> = names.iter().filter(|n| self.schema.index_of(n).is_none()).cloned().collect();
        if !unknown.is_empty() {
            return Err(ApiError::UnknownFeature {
                unknown,
                valid: self.schema.names().into_iter().map(String::from).collect(),
            });
        }
        if self.session.pending().is_none() {
            return Err(ApiError::Conflict("no annotation is pending".into()));
        }
        let features = names.iter().filter_map(|n| self.schema.index_of(n)).collect();
        self.session.annotate(features)?;
        Ok(())
    }

    /// Alarms and answered queries with `t >= since`, ordered by step.
    pub fn events(&self, since: usize) -> Vec<Event> {
        let mut out: Vec<Event> = self.session.events().iter().filter(|e| e.t() >= since).cloned().collect();
        out.sort_by_key(Event::t);
        out
    }

    fn payload(&self, t: usize, x: &[FeatureValue], a: &Attribution, w: &RelevanceWeights, entropy: f64) -> ExplanationPayload {
        let features = (0..self.schema.arity())
            .map(|i| FeatureRow {
                name: self.schema.feature(i).name.clone(),
                value: match x[i] {
                    FeatureValue::Num(v) => Value::from(v),
                    v @ FeatureValue::Cat(_) => Value::from(self.schema.format_value(i, v)),
                },
                attribution: a.values[i],
                weight: w.w[i],
            })
            .collect();
        ExplanationPayload {
            t,
            features,
            entropy,
            tau: self.session.tau(),
        }
    }

    fn state_hash(&self) -> String {
        let mut h = DefaultHasher::new();
        self.session.steps().hash(&mut h);
        serde_json::to_string(self.session.model())
            .expect("model serializes")
            .hash(&mut h);
        let ex = self.session.exstream();
        ex.explanations().hash(&mut h);
        ex.last_dissimilarity().to_bits().hash(&mut h);
        if let Some(r) = ex.reference() {
            r.w.iter().for_each(|v| v.to_bits().hash(&mut h));
        }
        format!("{:?}", ex.baseline()).hash(&mut h);
        self.session.events().len().hash(&mut h);
        self.session.spurious().features.hash(&mut h);
        format!("{:016x}", h.finish())
    }

    pub fn state(&self) -> SessionState {
        let s = &self.session;
        let explanation = s
            .latest()
            .map(|l| self.payload(l.t, &l.x, &l.attribution, &l.weights, l.entropy));
        let pending = s
            .pending()
            .map(|q| self.payload(q.t, &q.x, &q.attribution, &q.weights, q.entropy));
        let mut alarms = Vec::new();
        let mut queries = Vec::new();
        for e in s.events() {
            match e {
                Event::Alarm(a) => alarms.push(a.clone()),
                Event::Query(q) => queries.push(q.clone()),
            }
        }
        SessionState {
            id: self.id.clone(),
            mode: self.mode(),
            t: s.steps(),
            total: self.stream.len(),
            learner: s.setup().learner,
            detector: s.setup().detector,
            seed: self.seed,
            feature_names: self.schema.names().into_iter().map(String::from).collect(),
            gold: self.gold.clone(),
            entropy: explanation.as_ref().map(|e| e.entropy),
            explanation,
            tau: s.tau(),
            pending,
            spurious: s
                .spurious()
                .features
                .iter()
                .map(|&i| self.schema.feature(i).name.clone())
                .collect(),
            alarms,
            queries,
            state_hash: self.state_hash(),
        }
    }
}
