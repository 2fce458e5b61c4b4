//! Explanation-based correction on top of explanation monitoring.
//!
//! At every cadence point the relevance weights of the latest explanation go
//! through an entropy gate: concentrated weights (low entropy) suggest the
//! model leans on a few, possibly spurious, features. Gated points raise a
//! query to an oracle. Features it marks as spurious are randomized, first in
//! augmented copies of the replay buffer and then, with probability `q`, in
//! every later training instance.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorKind, DetectorParams, Verdict};
use crate::error::{Error, Result};
use crate::explain::{entropy, Attribution, Background, ExplainerConfig, RelevanceWeights};
use crate::exstream::{mix_seed, AlarmEvent, ExstreamConfig, ExstreamState};
use crate::learners::{LearnerKind, LearnerParams, OnlineModel};
use crate::streams::{FeatureKind, FeatureSchema, FeatureValue, Instance, Label};

/// `true` iff `entropy(w) < tau`.
pub fn entropy_gate(w: &RelevanceWeights, tau: f64) -> bool {
    entropy(w) < tau
}

/// Confirms the shown features that are truly spurious: the `top_m` features
/// by weight (ties to the lower index) intersected with `gt_spurious`.
pub fn simulated_oracle(gt_spurious: &BTreeSet<usize>, expl: &RelevanceWeights, top_m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..expl.len()).collect();
    order.sort_by(|&a, &b| expl.w[b].total_cmp(&expl.w[a]).then(a.cmp(&b)));
    let mut out: Vec<usize> = order
        .into_iter()
        .take(top_m)
        .filter(|f| gt_spurious.contains(f))
        .collect();
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationSource {
    Simulated,
    Human,
}

/// Features annotated as spurious so far. Only ever grows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpuriousSet {
    pub features: BTreeSet<usize>,
    /// Step of the first non-empty annotation.
    pub since: Option<usize>,
    pub source: Option<AnnotationSource>,
}

impl SpuriousSet {
    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn extend(&mut self, t: usize, features: &[usize], source: AnnotationSource) {
        if features.is_empty() {
            return;
        }
        self.features.extend(features.iter().copied());
        self.since.get_or_insert(t);
        self.source.get_or_insert(source);
    }
}

/// FIFO ring of recent instances.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Instance>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, inst: Instance) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(inst);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Instance> {
        self.items.iter()
    }
}

/// Draws replacement values: uniform over the schema for categorical
/// features, the buffer's empirical marginal for numeric ones (uniform over
/// the schema range while the buffer is empty).
fn resample(schema: &FeatureSchema, pool: &ReplayBuffer, feature: usize, rng: &mut ChaCha8Rng) -> FeatureValue {
    match &schema.feature(feature).kind {
        FeatureKind::Categorical { values } => FeatureValue::Cat(rng.gen_range(0..values.len() as u32)),
        FeatureKind::Numeric { min, max } => {
            if pool.is_empty() {
                FeatureValue::Num(rng.gen_range(*min..=*max))
            } else {
                let donor = &pool.items[rng.gen_range(0..pool.len())];
                donor.x[feature]
            }
        }
    }
}

/// `k` copies of every buffered instance with all features in `spurious`
/// resampled; labels and other features are kept.
pub fn augment(
    buffer: &ReplayBuffer,
    spurious: &BTreeSet<usize>,
    k: usize,
    schema: &FeatureSchema,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Instance>> {
    if spurious.is_empty() {
        return Err(Error::invalid("augmentation needs at least one spurious feature"));
    }
    if let Some(&f) = spurious.iter().find(|&&f| f >= schema.arity()) {
        return Err(Error::invalid(format!("spurious feature {f} outside schema")));
    }
    let mut out = Vec::with_capacity(buffer.len() * k);
    for inst in buffer.iter() {
        for _ in 0..k {
            let mut copy = inst.clone();
            for &f in spurious {
                copy.x[f] = resample(schema, buffer, f, rng);
            }
            out.push(copy);
        }
    }
    Ok(out)
}

/// Resample each feature in `spurious` independently with probability `q`.
pub fn deconfound_transform(
    x: &Instance,
    spurious: &BTreeSet<usize>,
    q: f64,
    schema: &FeatureSchema,
    pool: &ReplayBuffer,
    rng: &mut ChaCha8Rng,
) -> Instance {
    let mut out = x.clone();
    for &f in spurious {
        if rng.gen_bool(q) {
            out.x[f] = resample(schema, pool, f, rng);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EbcConfig {
    /// Entropy threshold as a fraction of `ln d`.
    pub tau_ratio: f64,
    /// Absolute threshold in nats; overrides `tau_ratio` when set.
    pub tau: Option<f64>,
    /// Augmented copies per buffered instance.
    pub copies: usize,
    /// Probability of randomizing each spurious feature of a training instance.
    pub q: f64,
    /// Minimum number of steps between two queries.
    pub cooldown: usize,
    pub buffer_capacity: usize,
    /// How many top-weighted features the simulated annotator inspects.
    pub top_m: usize,
}

impl Default for EbcConfig {
    fn default() -> Self {
        Self {
            tau_ratio: 0.5,
            tau: None,
            copies: 5,
            q: 0.5,
            cooldown: 500,
            buffer_capacity: 200,
            top_m: 2,
        }
    }
}

impl EbcConfig {
    pub fn threshold(&self, d: usize) -> f64 {
        self.tau.unwrap_or(self.tau_ratio * (d as f64).ln())
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let tau = self.threshold(d);
        if !(0.0..=(d as f64).ln() + 1e-12).contains(&tau) {
            return Err(Error::invalid(format!("tau = {tau} outside [0, ln {d}]")));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::invalid("q must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Explanation monitoring only.
    Exstream,
    /// Monitoring plus entropy-gated feedback and deconfounding.
    #[default]
    Ebc,
}

/// Recorded human (or replayed) answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub t: usize,
    pub features: Vec<usize>,
}

/// Who answers queries.
#[derive(Debug, Clone, PartialEq)]
pub enum Oracle {
    /// Answers inline from the known confound features.
    Simulated { gt_spurious: BTreeSet<usize> },
    /// Defers; the session waits for [`EbcSession::annotate`].
    Human,
    /// Answers from a recorded annotation log, in order.
    Replay { log: VecDeque<AnnotationRecord> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEvent {
    pub t: usize,
    /// The explained instance.
    pub x: Vec<FeatureValue>,
    pub attribution: Attribution,
    pub weights: RelevanceWeights,
    pub entropy: f64,
    pub tau: f64,
    /// `None` while awaiting an answer.
    pub response: Option<Vec<usize>>,
    pub source: AnnotationSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Alarm(AlarmEvent),
    Query(QueryEvent),
}

impl Event {
    pub fn t(&self) -> usize {
        match self {
            Event::Alarm(a) => a.t,
            Event::Query(q) => q.t,
        }
    }
}

/// The most recent cadence-point explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatestExplanation {
    pub t: usize,
    pub x: Vec<FeatureValue>,
    pub attribution: Attribution,
    pub weights: RelevanceWeights,
    pub entropy: f64,
}

/// Per-step record for traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub y: Label,
    pub y_pred: Label,
    pub verdict: Verdict,
    pub dissimilarity: Option<f64>,
    pub entropy: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub query: bool,
}

impl StepRecord {
    pub fn error(&self) -> bool {
        self.y != self.y_pred
    }
}

/// Everything needed to build a session.
#[derive(Debug, Clone)]
pub struct SessionSetup {
    pub schema: FeatureSchema,
    pub learner: LearnerKind,
    pub learner_params: LearnerParams,
    pub detector: DetectorKind,
    pub detector_params: DetectorParams,
    pub exstream: ExstreamConfig,
    pub explainer: ExplainerConfig,
    pub ebc: EbcConfig,
    pub method: Method,
    /// Refill the explanation background from scratch after each alarm.
    pub reset_background_on_drift: bool,
    pub seed: u64,
}

/// A single stream run: model, monitor, and feedback state.
#[derive(Debug, Clone)]
pub struct EbcSession {
    setup: SessionSetup,
    model: OnlineModel,
    exstream: ExstreamState,
    background: Background,
    buffer: ReplayBuffer,
    spurious: SpuriousSet,
    oracle: Oracle,
    rng: ChaCha8Rng,
    tau: f64,
    last_query: Option<usize>,
    pending: Option<QueryEvent>,
    latest: Option<LatestExplanation>,
    events: Vec<Event>,
    annotations: Vec<AnnotationRecord>,
    next_t: usize,
}

impl EbcSession {
    pub fn new(setup: SessionSetup, oracle: Oracle) -> Result<Self> {
        let d = setup.schema.arity();
        setup.ebc.validate(d)?;
        let model = OnlineModel::new(setup.learner, &setup.schema, &setup.learner_params);
        let exstream = ExstreamState::new(
            setup.exstream,
            setup.explainer,
            setup.detector,
            &setup.detector_params,
            mix_seed(setup.seed, 1),
        )?;
        let background = Background::new(setup.explainer.background_size, mix_seed(setup.seed, 2));
        let buffer = ReplayBuffer::new(setup.ebc.buffer_capacity);
        let rng = ChaCha8Rng::seed_from_u64(mix_seed(setup.seed, 3));
        let tau = setup.ebc.threshold(d);
        Ok(Self {
            setup,
            model,
            exstream,
            background,
            buffer,
            spurious: SpuriousSet::default(),
            oracle,
            rng,
            tau,
            last_query: None,
            pending: None,
            latest: None,
            events: Vec::new(),
            annotations: Vec::new(),
            next_t: 0,
        })
    }

    pub fn setup(&self) -> &SessionSetup {
        &self.setup
    }

    pub fn model(&self) -> &OnlineModel {
        &self.model
    }

    pub fn exstream(&self) -> &ExstreamState {
        &self.exstream
    }

    pub fn spurious(&self) -> &SpuriousSet {
        &self.spurious
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn pending(&self) -> Option<&QueryEvent> {
        self.pending.as_ref()
    }

    pub fn latest(&self) -> Option<&LatestExplanation> {
        self.latest.as_ref()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Answers given so far, in order; replaying them reproduces the run.
    pub fn annotations(&self) -> &[AnnotationRecord] {
        &self.annotations
    }

    pub fn query_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, Event::Query(_))).count()
            + usize::from(self.pending.is_some())
    }

    /// Steps processed so far.
    pub fn steps(&self) -> usize {
        self.next_t
    }

    /// Prequential step: predict, learn, update buffers, monitor, maybe query.
    pub fn step(&mut self, inst: &Instance) -> Result<StepRecord> {
        if self.pending.is_some() {
            return Err(Error::AwaitingAnnotation);
        }
        let y_pred = self.model.predict_one(&inst.x);

        if self.spurious.is_empty() {
            self.model.learn_one(inst)?;
        } else {
            let train = deconfound_transform(
                inst,
                &self.spurious.features,
                self.setup.ebc.q,
                &self.setup.schema,
                &self.buffer,
                &mut self.rng,
            );
            self.model.learn_one(&train)?;
        }
        self.buffer.push(inst.clone());
        self.background.push(&inst.x);

        let out = self.exstream.step(&self.model, inst, &self.background)?;
        self.next_t = inst.t + 1;
        let mut record = StepRecord {
            t: inst.t,
            y: inst.y,
            y_pred,
            verdict: out.verdict,
            dissimilarity: None,
            entropy: None,
            weights: None,
            query: false,
        };
        if let Some(alarm) = out.alarm {
            self.events.push(Event::Alarm(alarm));
            if self.setup.reset_background_on_drift {
                self.background.clear();
            }
        }
        let Some(explained) = out.explained else {
            return Ok(record);
        };
        let h = entropy(&explained.weights);
        record.dissimilarity = explained.dissimilarity;
        record.entropy = Some(h);
        record.weights = Some(explained.weights.w.clone());
        self.latest = Some(LatestExplanation {
            t: inst.t,
            x: inst.x.clone(),
            attribution: explained.attribution.clone(),
            weights: explained.weights.clone(),
            entropy: h,
        });

        let cooled = self
            .last_query
            .is_none_or(|last| inst.t >= last + self.setup.ebc.cooldown);
        if self.setup.method == Method::Ebc && cooled && h < self.tau {
            record.query = true;
            self.last_query = Some(inst.t);
            let source = match self.oracle {
                Oracle::Simulated { .. } => AnnotationSource::Simulated,
                _ => AnnotationSource::Human,
            };
            let query = QueryEvent {
                t: inst.t,
                x: inst.x.clone(),
                attribution: explained.attribution,
                weights: explained.weights,
                entropy: h,
                tau: self.tau,
                response: None,
                source,
            };
            match &mut self.oracle {
                Oracle::Simulated { gt_spurious } => {
                    let answer = simulated_oracle(gt_spurious, &query.weights, self.setup.ebc.top_m);
                    self.pending = Some(query);
                    self.annotate(answer)?;
                }
                Oracle::Human => self.pending = Some(query),
                Oracle::Replay { log } => {
                    let rec = log.pop_front().ok_or(Error::ReplayMismatch(inst.t))?;
                    if rec.t != inst.t {
                        return Err(Error::ReplayMismatch(inst.t));
                    }
                    self.pending = Some(query);
                    self.annotate(rec.features)?;
                }
            }
        }
        Ok(record)
    }

    /// Answer the pending query. An empty list means nothing is spurious.
    pub fn annotate(&mut self, features: Vec<usize>) -> Result<()> {
        let d = self.setup.schema.arity();
        if let Some(&bad) = features.iter().find(|&&f| f >= d) {
            return Err(Error::invalid(format!("feature index {bad} outside schema of arity {d}")));
        }
        let mut query = self.pending.take().ok_or(Error::NoPendingQuery)?;
        let mut features = features;
        features.sort_unstable();
        features.dedup();
        let source = query.source;
        self.spurious.extend(query.t, &features, source);
        if !features.is_empty() {
            let copies = augment(
                &self.buffer,
                &self.spurious.features,
                self.setup.ebc.copies,
                &self.setup.schema,
                &mut self.rng,
            )?;
            for c in &copies {
                self.model.learn_one(c)?;
            }
        }
        self.annotations.push(AnnotationRecord {
            t: query.t,
            features: features.clone(),
        });
        query.response = Some(features);
        self.events.push(Event::Query(query));
        Ok(())
    }
}
