//! Stationary confounders realized as label overrides.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::schema::{FeatureSchema, FeatureValue, Instance, Label};
use super::stagger::{GREEN, SQUARE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Condition {
    /// Categorical feature equals the value with the given index.
    Equals { feature: usize, value: u32 },
    /// Numeric feature strictly exceeds `threshold`.
    Above { feature: usize, threshold: f64 },
}

impl Condition {
    pub fn feature(&self) -> usize {
        match self {
            Condition::Equals { feature, .. } | Condition::Above { feature, .. } => *feature,
        }
    }

    fn holds(&self, x: &[FeatureValue]) -> Result<bool> {
        let f = self.feature();
        match (self, x.get(f)) {
            (Condition::Equals { value, .. }, Some(FeatureValue::Cat(v))) => Ok(v == value),
            (Condition::Above { threshold, .. }, Some(FeatureValue::Num(v))) => Ok(v > threshold),
            (_, got) => Err(Error::invalid(format!(
                "confound condition on feature {f} does not match instance value {got:?}"
            ))),
        }
    }
}

/// The hidden confounder: whenever any condition holds, the label is forced.
/// Independent of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfoundSpec {
    pub any_of: Vec<Condition>,
    pub forced_label: Label,
}

impl ConfoundSpec {
    /// Label 1 whenever `color` is green or `shape` is square.
    pub fn c_stagger() -> Self {
        Self {
            any_of: vec![
                Condition::Equals {
                    feature: 1,
                    value: GREEN,
                },
                Condition::Equals {
                    feature: 2,
                    value: SQUARE,
                },
            ],
            forced_label: 1,
        }
    }

    /// Label 1 whenever New South Wales demand exceeds 0.45.
    pub fn c_electricity() -> Self {
        Self {
            any_of: vec![Condition::Above {
                feature: 2,
                threshold: 0.45,
            }],
            forced_label: 1,
        }
    }

    pub fn predicate(&self, x: &[FeatureValue]) -> Result<bool> {
        for c in &self.any_of {
            if c.holds(x)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Features the confounder reads; these are the spurious ones.
    pub fn features(&self) -> BTreeSet<usize> {
        self.any_of.iter().map(Condition::feature).collect()
    }

    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        if self.forced_label > 1 {
            return Err(Error::invalid("forced label must be 0 or 1"));
        }
        for c in &self.any_of {
            let f = c.feature();
            let Some(feat) = schema.features().get(f) else {
                return Err(Error::invalid(format!(
                    "confound references feature {f}, schema has {}",
                    schema.arity()
                )));
            };
            let ok = match c {
                Condition::Equals { value, .. } => {
                    feat.cardinality().is_some_and(|k| (*value as usize) < k)
                }
                Condition::Above { .. } => feat.cardinality().is_none(),
            };
            if !ok {
                return Err(Error::invalid(format!(
                    "confound condition does not fit feature `{}`",
                    feat.name
                )));
            }
        }
        Ok(())
    }
}

/// Overwrite labels where the confound predicate holds; all other instances pass
/// through untouched.
pub fn apply_confound(
    stream: impl IntoIterator<Item = Instance>,
    c: &ConfoundSpec,
) -> Result<Vec<Instance>> {
    stream
        .into_iter()
        .map(|mut inst| {
            if c.predicate(&inst.x)? {
                inst.y = c.forced_label;
            }
            Ok(inst)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::stagger::*;

    fn inst(size: u32, color: u32, shape: u32, y: Label) -> Instance {
        Instance::new(
            0,
            vec![
                FeatureValue::Cat(size),
                FeatureValue::Cat(color),
                FeatureValue::Cat(shape),
            ],
            y,
        )
    }

    #[test]
    fn green_forces_label() {
        let out = apply_confound([inst(SMALL, GREEN, CIRCLE, 0)], &ConfoundSpec::c_stagger()).unwrap();
        assert_eq!(out[0].y, 1);
    }

    #[test]
    fn predicate_false_keeps_label() {
        // (small, red, circle) is positive under phi1 and not confounded
        let out = apply_confound([inst(SMALL, RED, CIRCLE, 1)], &ConfoundSpec::c_stagger()).unwrap();
        assert_eq!(out[0].y, 1);
        let out = apply_confound([inst(LARGE, RED, CIRCLE, 0)], &ConfoundSpec::c_stagger()).unwrap();
        assert_eq!(out[0].y, 0);
    }

    #[test]
    fn electricity_demand_rule() {
        let mut x = vec![FeatureValue::Num(0.1); 6];
        x[2] = FeatureValue::Num(0.50);
        let out = apply_confound([Instance::new(3, x.clone(), 0)], &ConfoundSpec::c_electricity()).unwrap();
        assert_eq!(out[0].y, 1);
        assert_eq!(out[0].x, x);
        assert_eq!(out[0].t, 3);
        x[2] = FeatureValue::Num(0.45);
        let out = apply_confound([Instance::new(3, x, 0)], &ConfoundSpec::c_electricity()).unwrap();
        assert_eq!(out[0].y, 0);
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let x = vec![FeatureValue::Num(0.9); 6];
        assert!(apply_confound([Instance::new(0, x, 0)], &ConfoundSpec::c_stagger()).is_err());
        assert!(ConfoundSpec::c_stagger()
            .check_schema(&FeatureSchema::electricity())
            .is_err());
        ConfoundSpec::c_stagger()
            .check_schema(&FeatureSchema::stagger())
            .unwrap();
    }
}
