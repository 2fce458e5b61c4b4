//! Per-prediction Shapley attributions, relevance weights and explanation
//! dissimilarity.
//!
//! Linear models (LR, SVM) are explained exactly in closed form against the
//! background mean, and naive Bayes log-odds exactly as a sum of per-feature
//! terms. Any other score function goes through the permutation sampling
//! estimator, which averages marginal contributions along random
//! feature orderings starting from random background instances.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{sigmoid, Encoder, LinearForm, OnlineModel};
use crate::streams::{FeatureSchema, FeatureValue};

/// Anything with a real-valued score over raw feature vectors.
pub trait ScoreModel {
    fn score(&self, x: &[FeatureValue]) -> f64;
}

impl ScoreModel for OnlineModel {
    fn score(&self, x: &[FeatureValue]) -> f64 {
        self.raw_score(x)
    }
}

impl<F: Fn(&[FeatureValue]) -> f64> ScoreModel for F {
    fn score(&self, x: &[FeatureValue]) -> f64 {
        self(x)
    }
}

/// Signed per-feature contributions to `target_score - base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub values: Vec<f64>,
    pub base: f64,
    pub target_score: f64,
}

impl Attribution {
    /// `sum(values) - (target_score - base)`; zero up to rounding in exact mode.
    pub fn additivity_gap(&self) -> f64 {
        self.values.iter().sum::<f64>() - (self.target_score - self.base)
    }
}

/// Normalized absolute attributions on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceWeights {
    pub w: Vec<f64>,
    /// Set when every attribution was zero and `w` fell back to uniform.
    #[serde(default)]
    pub degenerate: bool,
}

impl RelevanceWeights {
    pub fn uniform(d: usize) -> Self {
        Self {
            w: vec![1.0 / d as f64; d],
            degenerate: false,
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Fixed-capacity uniform reservoir over the instances seen since the last reset.
#[derive(Debug, Clone)]
pub struct Background {
    capacity: usize,
    seen: u64,
    items: Vec<Vec<FeatureValue>>,
    rng: ChaCha8Rng,
}

impl Background {
    pub fn new(capacity: usize, seed: u64) -> Self {
        Self {
            capacity,
            seen: 0,
            items: Vec::with_capacity(capacity),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn push(&mut self, x: &[FeatureValue]) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(x.to_vec());
        } else if self.capacity > 0 {
            let j = self.rng.gen_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.items[j as usize] = x.to_vec();
            }
        }
    }

    /// Drop all members; the sampling stream continues.
    pub fn clear(&mut self) {
        self.items.clear();
        self.seen = 0;
    }

    pub fn items(&self) -> &[Vec<FeatureValue>] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn encoded_mean(&self, encoder: &Encoder) -> Result<Vec<f64>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBackground);
        }
        let mut mean = vec![0.0; encoder.dim()];
        let mut buf = Vec::new();
        for x in &self.items {
            encoder.encode_into(x, &mut buf);
            for (m, v) in mean.iter_mut().zip(&buf) {
                *m += v;
            }
        }
        let n = self.items.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(mean)
    }
}

/// Closed-form Shapley values of a linear score against a reference mean:
/// `a_i = sum over coordinates j of feature i of w_j * (x_j - mean_j)`.
pub fn explain_linear(
    form: LinearForm<'_>,
    encoder: &Encoder,
    x: &[FeatureValue],
    background_mean: &[f64],
) -> Result<Attribution> {
    if background_mean.len() != encoder.dim() {
        return Err(Error::invalid(format!(
            "background mean has {} coordinates, encoder has {}",
            background_mean.len(),
            encoder.dim()
        )));
    }
    let enc = encoder.encode(x);
    let values = (0..x.len())
        .map(|i| {
            encoder
                .block(i)
                .map(|j| form.weights[j] * (enc[j] - background_mean[j]))
                .sum()
        })
        .collect();
    let dot = |v: &[f64]| form.weights.iter().zip(v).map(|(w, v)| w * v).sum::<f64>();
    Ok(Attribution {
        values,
        base: dot(background_mean) + form.bias,
        target_score: dot(&enc) + form.bias,
    })
}

/// Permutation-sampling Shapley estimate. Each of the `n_perms` samples draws
/// an ordering and a background instance, then switches features to `x` one
/// at a time in that order and credits each score change to the feature
/// switched.
pub fn explain_sampling<M: ScoreModel + ?Sized>(
    model: &M,
    x: &[FeatureValue],
    background: &[Vec<FeatureValue>],
    n_perms: usize,
    seed: u64,
) -> Result<Attribution> {
    if background.is_empty() {
        return Err(Error::EmptyBackground);
    }
    if n_perms == 0 {
        return Err(Error::invalid("n_perms must be at least 1"));
    }
    let d = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..d).collect();
    let mut values = vec![0.0; d];
    let mut cur = Vec::with_capacity(d);
    for _ in 0..n_perms {
        order.shuffle(&mut rng);
        let z = &background[rng.gen_range(0..background.len())];
        cur.clear();
        cur.extend_from_slice(z);
        let mut prev = model.score(&cur);
        for &i in &order {
            cur[i] = x[i];
            let s = model.score(&cur);
            values[i] += s - prev;
            prev = s;
        }
    }
    values.iter_mut().for_each(|v| *v /= n_perms as f64);
    let base = background.iter().map(|z| model.score(z)).sum::<f64>() / background.len() as f64;
    Ok(Attribution {
        values,
        base,
        target_score: model.score(x),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExplainMode {
    /// Exact for linear and additive models, sampling otherwise.
    #[default]
    Auto,
    Sampling,
}

/// Which model output the attributions decompose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExplainedScore {
    /// NB log-odds, LR/SVM margin.
    #[default]
    Raw,
    /// `sigmoid(raw)`: the class-1 probability for NB and LR, a squashed
    /// margin for SVM. Always explained by sampling.
    Probability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerConfig {
    pub n_perms: usize,
    pub background_size: usize,
    pub mode: ExplainMode,
    pub score: ExplainedScore,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            n_perms: 50,
            background_size: 100,
            mode: ExplainMode::Auto,
            score: ExplainedScore::Raw,
        }
    }
}

/// Explain the configured score of `model` at `x`. Raw scores of linear and
/// additive (NB) models are explained exactly.
pub fn explain_model(
    model: &OnlineModel,
    x: &[FeatureValue],
    background: &Background,
    cfg: &ExplainerConfig,
    seed: u64,
) -> Result<Attribution> {
    let mut out = explain_many(model, &[(x, seed)], background, cfg)?;
    Ok(out.pop().expect("one attribution per instance"))
}

/// [`explain_model`] over several instances, sharing the background pass.
pub fn explain_many(
    model: &OnlineModel,
    xs: &[(&[FeatureValue], u64)],
    background: &Background,
    cfg: &ExplainerConfig,
) -> Result<Vec<Attribution>> {
    if background.is_empty() {
        return Err(Error::EmptyBackground);
    }
    let exact = cfg.score == ExplainedScore::Raw && cfg.mode == ExplainMode::Auto;
    if exact {
        if let Some(form) = model.linear_form() {
            let mean = background.encoded_mean(model.encoder())?;
            return xs
                .iter()
                .map(|(x, _)| explain_linear(form, model.encoder(), x, &mean))
                .collect();
        }
        if model.additive_terms(xs.first().map_or(&[][..], |p| p.0)).is_some() {
            return Ok(explain_additive(model, xs, background));
        }
    }
    match cfg.score {
        ExplainedScore::Raw => xs
            .iter()
            .map(|(x, seed)| explain_sampling(model, x, background.items(), cfg.n_perms, *seed))
            .collect(),
        ExplainedScore::Probability => {
            let prob = |z: &[FeatureValue]| sigmoid(model.raw_score(z));
            xs.iter()
                .map(|(x, seed)| explain_sampling(&prob, x, background.items(), cfg.n_perms, *seed))
                .collect()
        }
    }
}

/// Exact Shapley values of an additive score: each feature's term at `x`
/// minus its background mean.
fn explain_additive(model: &OnlineModel, xs: &[(&[FeatureValue], u64)], background: &Background) -> Vec<Attribution> {
    let n = background.len() as f64;
    let mut mean = Vec::new();
    let mut base = 0.0;
    for z in background.items() {
        let (c, terms) = model.additive_terms(z).expect("additive model");
        mean.resize(terms.len(), 0.0);
        for (m, t) in mean.iter_mut().zip(&terms) {
            *m += t / n;
        }
        base += (c + terms.iter().sum::<f64>()) / n;
    }
    xs.iter()
        .map(|(x, _)| {
            let (c, terms) = model.additive_terms(x).expect("additive model");
            Attribution {
                values: terms.iter().zip(&mean).map(|(t, m)| t - m).collect(),
                base,
                target_score: c + terms.iter().sum::<f64>(),
            }
        })
        .collect()
}

/// `w_i = |a_i| / sum_j |a_j|`, or uniform with the degenerate flag when all
/// attributions vanish.
pub fn normalize_relevance(attr: &Attribution) -> RelevanceWeights {
    let total: f64 = attr.values.iter().map(|a| a.abs()).sum();
    let d = attr.values.len();
    if total > 0.0 && total.is_finite() {
        RelevanceWeights {
            w: attr.values.iter().map(|a| a.abs() / total).collect(),
            degenerate: false,
        }
    } else {
        RelevanceWeights {
            w: vec![1.0 / d as f64; d],
            degenerate: true,
        }
    }
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(w: &RelevanceWeights) -> f64 {
    -w.w
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Dissimilarity {
    #[default]
    TotalVariation,
    Cosine,
}

impl Dissimilarity {
    pub fn eval(self, a: &RelevanceWeights, b: &RelevanceWeights) -> Result<f64> {
        match self {
            Dissimilarity::TotalVariation => dissimilarity(a, b),
            Dissimilarity::Cosine => cosine_distance(a, b),
        }
    }
}

fn check_arity(a: &RelevanceWeights, b: &RelevanceWeights) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "relevance weights have arities {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Total-variation distance `0.5 * sum |a_i - b_i|`, in `[0, 1]`.
pub fn dissimilarity(a: &RelevanceWeights, b: &RelevanceWeights) -> Result<f64> {
    check_arity(a, b)?;
    let tv = 0.5 * a.w.iter().zip(&b.w).map(|(p, q)| (p - q).abs()).sum::<f64>();
    Ok(tv.clamp(0.0, 1.0))
}

/// `1 - cos(a, b)`; weights are nonnegative so this lies in `[0, 1]`.
pub fn cosine_distance(a: &RelevanceWeights, b: &RelevanceWeights) -> Result<f64> {
    check_arity(a, b)?;
    let dot: f64 = a.w.iter().zip(&b.w).map(|(p, q)| p * q).sum();
    let na = a.w.iter().map(|p| p * p).sum::<f64>().sqrt();
    let nb = b.w.iter().map(|p| p * p).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(1.0);
    }
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 1.0))
}

/// One row of the explanation payload shown to annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub name: String,
    pub value: String,
    pub attribution: f64,
    pub weight: f64,
}

pub fn feature_rows(
    schema: &FeatureSchema,
    x: &[FeatureValue],
    attr: &Attribution,
    weights: &RelevanceWeights,
) -> Vec<FeatureRow> {
    schema
        .features()
        .iter()
        .enumerate()
        .map(|(i, f)| FeatureRow {
            name: f.name.clone(),
            value: schema.format_value(i, x[i]),
            attribution: attr.values[i],
            weight: weights.w[i],
        })
        .collect()
}
