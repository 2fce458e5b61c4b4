use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Label = u8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Categorical { values: Vec<String> },
    Numeric { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl Feature {
    pub fn categorical(name: &str, values: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            kind: FeatureKind::Categorical {
                values: values.iter().map(|v| (*v).to_owned()).collect(),
            },
        }
    }

    pub fn numeric(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_owned(),
            kind: FeatureKind::Numeric { min, max },
        }
    }

    /// Number of values for a categorical feature, `None` for numeric ones.
    pub fn cardinality(&self) -> Option<usize> {
        match &self.kind {
            FeatureKind::Categorical { values } => Some(values.len()),
            FeatureKind::Numeric { .. } => None,
        }
    }
}

/// A single observed feature value. Categorical values are stored as an
/// index into the schema's value list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureValue {
    Cat(u32),
    Num(f64),
}

impl FeatureValue {
    pub fn as_cat(self) -> Option<usize> {
        match self {
            FeatureValue::Cat(v) => Some(v as usize),
            FeatureValue::Num(_) => None,
        }
    }

    pub fn as_num(self) -> Option<f64> {
        match self {
            FeatureValue::Num(v) => Some(v),
            FeatureValue::Cat(_) => None,
        }
    }
}

/// Ordered list of named features. Names are unique, categorical value lists
/// are non-empty and numeric ranges satisfy `min < max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureSchema {
    features: Vec<Feature>,
}

impl TryFrom<Vec<Feature>> for FeatureSchema {
    type Error = Error;

    fn try_from(features: Vec<Feature>) -> Result<Self> {
        Self::new(features)
    }
}

impl From<FeatureSchema> for Vec<Feature> {
    fn from(schema: FeatureSchema) -> Self {
        schema.features
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::invalid(format!("duplicate feature name `{}`", f.name)));
            }
            match &f.kind {
                FeatureKind::Categorical { values } if values.is_empty() => {
                    return Err(Error::invalid(format!(
                        "categorical feature `{}` has no values",
                        f.name
                    )));
                }
                FeatureKind::Numeric { min, max } if !(min < max) => {
                    return Err(Error::invalid(format!(
                        "numeric feature `{}` needs min < max",
                        f.name
                    )));
                }
                _ => {}
            }
        }
        Ok(Self { features })
    }

    /// `size`, `color`, `shape`, each with three values.
    pub fn stagger() -> Self {
        Self::new(vec![
            Feature::categorical("size", &["small", "medium", "large"]),
            Feature::categorical("color", &["red", "blue", "green"]),
            Feature::categorical("shape", &["circle", "square", "triangle"]),
        ])
        .expect("static schema")
    }

    /// The six numeric attributes of the electricity market data, normalized to `[0, 1]`.
    pub fn electricity() -> Self {
        Self::new(
            ELECTRICITY_FEATURES
                .iter()
                .map(|n| Feature::numeric(n, 0.0, 1.0))
                .collect(),
        )
        .expect("static schema")
    }

    pub fn arity(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &Feature {
        &self.features[i]
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Index of `value` within categorical feature `feature`.
    pub fn value_index(&self, feature: usize, value: &str) -> Option<u32> {
        match &self.features.get(feature)?.kind {
            FeatureKind::Categorical { values } => {
                values.iter().position(|v| v == value).map(|i| i as u32)
            }
            FeatureKind::Numeric { .. } => None,
        }
    }

    /// Render a value for display or CSV output.
    pub fn format_value(&self, feature: usize, value: FeatureValue) -> String {
        match (&self.features[feature].kind, value) {
            (FeatureKind::Categorical { values }, FeatureValue::Cat(i)) => values
                .get(i as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{i}")),
            (_, FeatureValue::Num(v)) => format!("{v}"),
            (_, FeatureValue::Cat(i)) => format!("#{i}"),
        }
    }

    pub fn check(&self, x: &[FeatureValue]) -> Result<()> {
        if x.len() != self.arity() {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.arity(),
                x.len()
            )));
        }
        for (i, (f, v)) in self.features.iter().zip(x).enumerate() {
            match (&f.kind, v) {
                (FeatureKind::Categorical { values }, FeatureValue::Cat(c))
                    if (*c as usize) < values.len() => {}
                (FeatureKind::Numeric { min, max }, FeatureValue::Num(n))
                    if *n >= *min && *n <= *max => {}
                _ => {
                    return Err(Error::invalid(format!(
                        "feature {i} (`{}`) has out-of-domain value {v:?}",
                        f.name
                    )))
                }
            }
        }
        Ok(())
    }
}

pub const ELECTRICITY_FEATURES: [&str; 6] = [
    "period",
    "nswprice",
    "nswdemand",
    "vicprice",
    "vicdemand",
    "transfer",
];

/// One timestamped observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub t: usize,
    pub x: Vec<FeatureValue>,
    pub y: Label,
}

impl Instance {
    pub fn new(t: usize, x: Vec<FeatureValue>, y: Label) -> Self {
        Self { t, x, y }
    }
}
