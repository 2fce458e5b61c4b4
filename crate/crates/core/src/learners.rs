//! Online binary classifiers updated one instance at a time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::streams::{FeatureKind, FeatureSchema, FeatureValue, Instance, Label};

/// One-hot expansion of categorical features; numeric features pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    /// First coordinate of each schema feature.
    offsets: Vec<usize>,
    /// Number of coordinates of each schema feature.
    widths: Vec<usize>,
    dim: usize,
}

impl Encoder {
    pub fn new(schema: &FeatureSchema) -> Self {
        let mut offsets = Vec::with_capacity(schema.arity());
        let mut widths = Vec::with_capacity(schema.arity());
        let mut dim = 0;
        for f in schema.features() {
            let w = f.cardinality().unwrap_or(1);
            offsets.push(dim);
            widths.push(w);
            dim += w;
        }
        Self { offsets, widths, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinate range of schema feature `i`.
    pub fn block(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i] + self.widths[i]
    }

    pub fn encode_into(&self, x: &[FeatureValue], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.dim, 0.0);
        for (i, v) in x.iter().enumerate() {
            match *v {
                FeatureValue::Cat(c) => out[self.offsets[i] + c as usize] = 1.0,
                FeatureValue::Num(n) => out[self.offsets[i]] = n,
            }
        }
    }

    pub fn encode(&self, x: &[FeatureValue]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        self.encode_into(x, &mut out);
        out
    }

    /// Dot product of `weights` with the encoding of `x`, without allocating.
    pub fn dot(&self, weights: &[f64], x: &[FeatureValue]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, v)| match *v {
                FeatureValue::Cat(c) => weights[self.offsets[i] + c as usize],
                FeatureValue::Num(n) => weights[self.offsets[i]] * n,
            })
            .sum()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Nb,
    Lr,
    Svm,
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LearnerKind::Nb => "nb",
            LearnerKind::Lr => "lr",
            LearnerKind::Svm => "svm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerParams {
    /// Laplace smoothing for naive Bayes.
    pub nb_alpha: f64,
    /// Per-step discount of naive Bayes statistics; `1` keeps full counts,
    /// `1 - 1/n` roughly remembers the last `n` instances.
    pub nb_decay: f64,
    /// SGD step size for logistic regression.
    pub lr_eta: f64,
    /// Pegasos regularization for the linear SVM.
    pub svm_lambda: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self {
            nb_alpha: 1.0,
            nb_decay: 1.0,
            lr_eta: 0.05,
            svm_lambda: 1e-4,
        }
    }
}

/// Running mean and variance with optional exponential discounting; with
/// `decay = 1` this is plain Welford.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct Welford {
    /// Total (discounted) weight.
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64, decay: f64) {
        self.n = self.n * decay + 1.0;
        self.m2 *= decay;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn var(&self) -> f64 {
        let v = if self.n > 1.0 { self.m2 / (self.n - 1.0) } else { 1.0 };
        v.max(1e-4)
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let var = self.var();
        -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - self.mean).powi(2) / var)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NbTable {
    /// `counts[class][value]`, discounted when the model forgets.
    Categorical { counts: [Vec<f64>; 2] },
    Gaussian { stats: [Welford; 2] },
}

/// Naive Bayes over raw feature values: Laplace-smoothed counts for categorical
/// features and per-class Gaussians for numeric ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    alpha: f64,
    decay: f64,
    class_counts: [f64; 2],
    tables: Vec<NbTable>,
}

impl NaiveBayes {
    pub fn new(schema: &FeatureSchema, alpha: f64, decay: f64) -> Self {
        let tables = schema
            .features()
            .iter()
            .map(|f| match &f.kind {
                FeatureKind::Categorical { values } => NbTable::Categorical {
                    counts: [vec![0.0; values.len()], vec![0.0; values.len()]],
                },
                FeatureKind::Numeric { .. } => NbTable::Gaussian {
                    stats: [Welford::default(); 2],
                },
            })
            .collect();
        Self {
            alpha,
            decay,
            class_counts: [0.0, 0.0],
            tables,
        }
    }

    pub fn class_count(&self, y: Label) -> f64 {
        self.class_counts[y as usize]
    }

    fn learn(&mut self, x: &[FeatureValue], y: Label) {
        let c = y as usize;
        let g = self.decay;
        if g < 1.0 {
            self.class_counts.iter_mut().for_each(|n| *n *= g);
            for table in &mut self.tables {
                if let NbTable::Categorical { counts } = table {
                    counts.iter_mut().flatten().for_each(|n| *n *= g);
                }
            }
        }
        self.class_counts[c] += 1.0;
        for (table, v) in self.tables.iter_mut().zip(x) {
            match (table, *v) {
                (NbTable::Categorical { counts }, FeatureValue::Cat(k)) => counts[c][k as usize] += 1.0,
                // only the updated class's Gaussian is discounted
                (NbTable::Gaussian { stats }, FeatureValue::Num(n)) => stats[c].push(n, g),
                _ => unreachable!("instance checked against schema"),
            }
        }
    }

    /// Per-feature log-likelihood ratio `ln p(x_i | 1) - ln p(x_i | 0)`.
    pub fn feature_log_ratio(&self, i: usize, v: FeatureValue) -> f64 {
        let a = self.alpha;
        match (&self.tables[i], v) {
            (NbTable::Categorical { counts }, FeatureValue::Cat(k)) => {
                let card = counts[0].len() as f64;
                let lp = |c: usize| {
                    ((counts[c][k as usize] + a) / (self.class_counts[c] + a * card)).ln()
                };
                lp(1) - lp(0)
            }
            (NbTable::Gaussian { stats }, FeatureValue::Num(n)) => {
                if stats[0].n == 0.0 || stats[1].n == 0.0 {
                    0.0
                } else {
                    stats[1].log_pdf(n) - stats[0].log_pdf(n)
                }
            }
            _ => 0.0,
        }
    }

    /// Posterior log-odds of class 1.
    pub fn log_odds(&self, x: &[FeatureValue]) -> f64 {
        let a = self.alpha.max(f64::MIN_POSITIVE);
        let prior = ((self.class_counts[1] + a) / (self.class_counts[0] + a)).ln();
        prior
            + x.iter()
                .enumerate()
                .map(|(i, v)| self.feature_log_ratio(i, *v))
                .sum::<f64>()
    }
}

/// Logistic regression trained by plain SGD on the log-loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub eta: f64,
}

impl LogisticRegression {
    pub fn new(dim: usize, eta: f64) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
            eta,
        }
    }

    /// Gradient of the log-loss with respect to `(weights, bias)`.
    pub fn gradient(&self, enc: &[f64], y: Label) -> (Vec<f64>, f64) {
        let p = sigmoid(self.margin(enc));
        let g = p - f64::from(y);
        (enc.iter().map(|v| g * v).collect(), g)
    }

    pub fn margin(&self, enc: &[f64]) -> f64 {
        self.weights.iter().zip(enc).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    fn learn(&mut self, enc: &[f64], y: Label) {
        let g = sigmoid(self.margin(enc)) - f64::from(y);
        for (w, v) in self.weights.iter_mut().zip(enc) {
            *w -= self.eta * g * v;
        }
        self.bias -= self.eta * g;
    }
}

/// Linear SVM trained with Pegasos steps on the hinge loss. The bias is an
/// extra regularized coordinate fed a constant 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    /// Encoded weights followed by the bias coordinate.
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub steps: u64,
}

impl LinearSvm {
    pub fn new(dim: usize, lambda: f64) -> Self {
        Self {
            weights: vec![0.0; dim + 1],
            lambda,
            steps: 0,
        }
    }

    pub fn bias(&self) -> f64 {
        *self.weights.last().expect("bias coordinate")
    }

    pub fn margin(&self, enc: &[f64]) -> f64 {
        let d = self.weights.len() - 1;
        self.weights[..d].iter().zip(enc).map(|(w, v)| w * v).sum::<f64>() + self.weights[d]
    }

    fn learn(&mut self, enc: &[f64], y: Label) {
        self.steps += 1;
        let eta = 1.0 / (self.lambda * self.steps as f64);
        let sign = if y == 1 { 1.0 } else { -1.0 };
        let violated = sign * self.margin(enc) < 1.0;
        let shrink = 1.0 - eta * self.lambda;
        for w in &mut self.weights {
            *w *= shrink;
        }
        if violated {
            let d = self.weights.len() - 1;
            for (w, v) in self.weights[..d].iter_mut().zip(enc) {
                *w += eta * sign * v;
            }
            self.weights[d] += eta * sign;
        }
        let norm = self.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        let radius = 1.0 / self.lambda.sqrt();
        if norm > radius {
            let s = radius / norm;
            for w in &mut self.weights {
                *w *= s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    NaiveBayes(NaiveBayes),
    Logistic(LogisticRegression),
    Svm(LinearSvm),
}

/// Linear score `w . enc(x) + b` in the encoded space.
#[derive(Debug, Clone, Copy)]
pub struct LinearForm<'a> {
    pub weights: &'a [f64],
    pub bias: f64,
}

/// An online classifier bound to a schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnlineModel {
    schema: FeatureSchema,
    encoder: Encoder,
    model: Model,
    #[serde(skip)]
    scratch: Vec<f64>,
}

impl PartialEq for OnlineModel {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema && self.model == other.model
    }
}

impl OnlineModel {
    pub fn new(kind: LearnerKind, schema: &FeatureSchema, params: &LearnerParams) -> Self {
        let encoder = Encoder::new(schema);
        let model = match kind {
            LearnerKind::Nb => Model::NaiveBayes(NaiveBayes::new(schema, params.nb_alpha, params.nb_decay)),
            LearnerKind::Lr => Model::Logistic(LogisticRegression::new(encoder.dim(), params.lr_eta)),
            LearnerKind::Svm => Model::Svm(LinearSvm::new(encoder.dim(), params.svm_lambda)),
        };
        Self {
            schema: schema.clone(),
            encoder,
            model,
            scratch: Vec::new(),
        }
    }

    pub fn kind(&self) -> LearnerKind {
        match self.model {
            Model::NaiveBayes(_) => LearnerKind::Nb,
            Model::Logistic(_) => LearnerKind::Lr,
            Model::Svm(_) => LearnerKind::Svm,
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut Model {
        &mut self.model
    }

    pub fn learn_one(&mut self, inst: &Instance) -> Result<()> {
        self.schema.check(&inst.x)?;
        if inst.y > 1 {
            return Err(Error::invalid(format!("label {} is not binary", inst.y)));
        }
        match &mut self.model {
            Model::NaiveBayes(nb) => nb.learn(&inst.x, inst.y),
            Model::Logistic(lr) => {
                self.encoder.encode_into(&inst.x, &mut self.scratch);
                lr.learn(&self.scratch, inst.y);
            }
            Model::Svm(svm) => {
                self.encoder.encode_into(&inst.x, &mut self.scratch);
                svm.learn(&self.scratch, inst.y);
            }
        }
        Ok(())
    }

    /// The score the explainers attribute: log-odds for naive Bayes, the
    /// pre-link margin for the linear models.
    pub fn raw_score(&self, x: &[FeatureValue]) -> f64 {
        match &self.model {
            Model::NaiveBayes(nb) => nb.log_odds(x),
            Model::Logistic(lr) => self.encoder.dot(&lr.weights, x) + lr.bias,
            Model::Svm(svm) => self.encoder.dot(&svm.weights, x) + svm.bias(),
        }
    }

    /// Log-odds (NB), probability of class 1 (LR) or signed margin (SVM).
    pub fn predict_score(&self, x: &[FeatureValue]) -> f64 {
        match &self.model {
            Model::Logistic(_) => sigmoid(self.raw_score(x)),
            _ => self.raw_score(x),
        }
    }

    /// Thresholded score; a score exactly on the threshold predicts 1.
    pub fn predict_one(&self, x: &[FeatureValue]) -> Label {
        let threshold = match self.model {
            Model::Logistic(_) => 0.5,
            _ => 0.0,
        };
        Label::from(self.predict_score(x) >= threshold)
    }

    /// Per-feature terms of an additive raw score, `raw = intercept + sum`;
    /// `None` unless the model is NB.
    pub fn additive_terms(&self, x: &[FeatureValue]) -> Option<(f64, Vec<f64>)> {
        match &self.model {
            Model::NaiveBayes(nb) => {
                let terms: Vec<f64> = x.iter().enumerate().map(|(i, v)| nb.feature_log_ratio(i, *v)).collect();
                Some((nb.log_odds(x) - terms.iter().sum::<f64>(), terms))
            }
            _ => None,
        }
    }

    pub fn linear_form(&self) -> Option<LinearForm<'_>> {
        match &self.model {
            Model::NaiveBayes(_) => None,
            Model::Logistic(lr) => Some(LinearForm {
                weights: &lr.weights,
                bias: lr.bias,
            }),
            Model::Svm(svm) => Some(LinearForm {
                weights: &svm.weights[..svm.weights.len() - 1],
                bias: svm.bias(),
            }),
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.model {
            Model::NaiveBayes(_) => true,
            Model::Logistic(lr) => lr.weights.iter().all(|w| w.is_finite()) && lr.bias.is_finite(),
            Model::Svm(svm) => svm.weights.iter().all(|w| w.is_finite()),
        }
    }
}
