//! Explanation monitoring: explain the latest instance every `cadence` steps,
//! compare its relevance weights against a running reference and feed the
//! dissimilarity into a baseline detector.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::detectors::{Baseline, ChangeDetector, DetectorKind, DetectorParams, Verdict};
use crate::error::{Error, Result};
use crate::explain::{
    explain_many, explain_model, normalize_relevance, Attribution, Background, Dissimilarity, ExplainerConfig,
    RelevanceWeights,
};
use crate::learners::OnlineModel;
use crate::streams::{FeatureValue, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExstreamConfig {
    /// Explain every `cadence` steps.
    pub cadence: usize,
    /// Weight of the old reference in its moving-average update.
    pub ema_decay: f64,
    /// DDM consumes `1[d > ddm_threshold]`.
    pub ddm_threshold: f64,
    pub dissimilarity: Dissimilarity,
    /// Reasons attached to each alarm.
    pub top_k: usize,
    /// Instances explained per cadence point; their relevance weights are
    /// averaged. `1` explains only the latest instance.
    pub batch: usize,
}

impl Default for ExstreamConfig {
    fn default() -> Self {
        Self {
            cadence: 50,
            ema_decay: 0.95,
            ddm_threshold: 0.3,
            dissimilarity: Dissimilarity::TotalVariation,
            top_k: 3,
            batch: 1,
        }
    }
}

impl ExstreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cadence == 0 {
            return Err(Error::invalid("cadence must be at least 1"));
        }
        if self.batch == 0 {
            return Err(Error::invalid("batch must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.ema_decay) {
            return Err(Error::invalid("ema_decay must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reason {
    pub feature: usize,
    pub delta: f64,
}

/// A drift alarm with the weight shift that triggered it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub t: usize,
    pub dissimilarity: f64,
    pub reference: Vec<f64>,
    pub current: Vec<f64>,
    pub reasons: Vec<Reason>,
}

/// Top-`k` features by `|reference - current|`, largest first, ties to the
/// lower index. `k` is clamped to the arity.
pub fn alarm_reason(event: &AlarmEvent, k: usize) -> Vec<Reason> {
    top_deltas(&event.reference, &event.current, k)
}

fn top_deltas(reference: &[f64], current: &[f64], k: usize) -> Vec<Reason> {
    let mut reasons: Vec<Reason> = reference
        .iter()
        .zip(current)
        .enumerate()
        .map(|(feature, (r, c))| Reason {
            feature,
            delta: (r - c).abs(),
        })
        .collect();
    reasons.sort_by(|a, b| b.delta.total_cmp(&a.delta).then(a.feature.cmp(&b.feature)));
    reasons.truncate(k.min(reference.len()));
    reasons
}

/// What a cadence point produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Explained {
    /// Explanation of the latest instance.
    pub attribution: Attribution,
    /// Relevance weights of the latest instance.
    pub weights: RelevanceWeights,
    /// Weights compared against the reference: `weights` itself, or the
    /// average over the batch.
    pub monitored: RelevanceWeights,
    /// `None` on the very first explanation, which only seeds the reference.
    pub dissimilarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExstreamStep {
    pub verdict: Verdict,
    pub explained: Option<Explained>,
    pub alarm: Option<AlarmEvent>,
}

/// Per-stream monitoring state.
#[derive(Debug, Clone)]
pub struct ExstreamState {
    cfg: ExstreamConfig,
    explainer: ExplainerConfig,
    baseline: Baseline,
    reference: Option<RelevanceWeights>,
    last_dissimilarity: f64,
    explanations: u64,
    recent: VecDeque<Vec<FeatureValue>>,
    seed: u64,
}

/// SplitMix64 finalizer, used to derive per-step seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl ExstreamState {
    pub fn new(
        cfg: ExstreamConfig,
        explainer: ExplainerConfig,
        detector: DetectorKind,
        params: &DetectorParams,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            explainer,
            baseline: Baseline::new(detector, params),
            reference: None,
            last_dissimilarity: 0.0,
            explanations: 0,
            recent: VecDeque::with_capacity(cfg.batch),
            seed,
        })
    }

    pub fn config(&self) -> &ExstreamConfig {
        &self.cfg
    }

    pub fn reference(&self) -> Option<&RelevanceWeights> {
        self.reference.as_ref()
    }

    pub fn baseline(&self) -> &Baseline {
        &self.baseline
    }

    pub fn last_dissimilarity(&self) -> f64 {
        self.last_dissimilarity
    }

    pub fn explanations(&self) -> u64 {
        self.explanations
    }

    pub fn is_cadence(&self, t: usize) -> bool {
        t.is_multiple_of(self.cfg.cadence)
    }

    /// Call once per stream step after the model has been updated on `x`.
    pub fn step(&mut self, model: &OnlineModel, x: &Instance, background: &Background) -> Result<ExstreamStep> {
        if self.cfg.batch > 1 {
            if self.recent.len() == self.cfg.batch {
                self.recent.pop_front();
            }
            self.recent.push_back(x.x.clone());
        }
        if !self.is_cadence(x.t) {
            return Ok(ExstreamStep::default());
        }
        let seed = mix_seed(self.seed, x.t as u64);
        self.explanations += 1;
        let (attribution, latest, current) = if self.recent.len() > 1 {
            // the newest buffered instance is `x` itself
            let jobs: Vec<(&[FeatureValue], u64)> = self
                .recent
                .iter()
                .enumerate()
                .map(|(i, z)| (z.as_slice(), mix_seed(seed, i as u64)))
                .collect();
            let mut attrs = explain_many(model, &jobs, background, &self.explainer)?;
            let mut avg = vec![0.0; x.x.len()];
            for a in &attrs {
                for (s, w) in avg.iter_mut().zip(normalize_relevance(a).w) {
                    *s += w;
                }
            }
            let n = attrs.len() as f64;
            avg.iter_mut().for_each(|s| *s /= n);
            let attribution = attrs.pop().expect("non-empty batch");
            let latest = normalize_relevance(&attribution);
            (attribution, latest, RelevanceWeights { w: avg, degenerate: false })
        } else {
            let attribution = explain_model(model, &x.x, background, &self.explainer, seed)?;
            let latest = normalize_relevance(&attribution);
            (attribution, latest.clone(), latest)
        };
        let Some(reference) = self.reference.as_mut() else {
            self.reference = Some(current.clone());
            return Ok(ExstreamStep {
                verdict: Verdict::None,
                explained: Some(Explained {
                    attribution,
                    weights: latest,
                    monitored: current,
                    dissimilarity: None,
                }),
                alarm: None,
            });
        };

        let d = self.cfg.dissimilarity.eval(reference, &current)?;
        self.last_dissimilarity = d;
        let input = match self.baseline.kind() {
            DetectorKind::Ddm => f64::from(u8::from(d > self.cfg.ddm_threshold)),
            _ => d,
        };
        let verdict = self.baseline.update(input)?;
        let alarm = if verdict == Verdict::Drift {
            let event = AlarmEvent {
                t: x.t,
                dissimilarity: d,
                reference: reference.w.clone(),
                current: current.w.clone(),
                reasons: top_deltas(&reference.w, &current.w, self.cfg.top_k),
            };
            *reference = current.clone();
            self.baseline.reset();
            Some(event)
        } else {
            let a = self.cfg.ema_decay;
            for (r, c) in reference.w.iter_mut().zip(&current.w) {
                *r = a * *r + (1.0 - a) * c;
            }
            // keep exactly on the simplex despite rounding
            let total: f64 = reference.w.iter().sum();
            reference.w.iter_mut().for_each(|r| *r /= total);
            None
        };
        Ok(ExstreamStep {
            verdict,
            explained: Some(Explained {
                attribution,
                weights: latest,
                monitored: current,
                dissimilarity: Some(d),
            }),
            alarm,
        })
    }
}
