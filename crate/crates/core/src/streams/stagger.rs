//! STAGGER concepts over (`size`, `color`, `shape`).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schema::{FeatureValue, Instance, Label};
use crate::error::{Error, Result};

pub const SMALL: u32 = 0;
pub const MEDIUM: u32 = 1;
pub const LARGE: u32 = 2;
pub const RED: u32 = 0;
pub const BLUE: u32 = 1;
pub const GREEN: u32 = 2;
pub const CIRCLE: u32 = 0;
pub const SQUARE: u32 = 1;
pub const TRIANGLE: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Concept {
    /// size = small AND color = red
    Phi1,
    /// color = green OR shape = square
    Phi2,
    /// size = medium OR size = large
    Phi3,
}

impl FromStr for Concept {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "phi1" | "φ1" | "1" => Ok(Concept::Phi1),
            "phi2" | "φ2" | "2" => Ok(Concept::Phi2),
            "phi3" | "φ3" | "3" => Ok(Concept::Phi3),
            other => Err(Error::invalid(format!(
                "unknown STAGGER concept `{other}` (expected phi1, phi2 or phi3)"
            ))),
        }
    }
}

impl TryFrom<String> for Concept {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Concept> for String {
    fn from(c: Concept) -> Self {
        c.to_string()
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Concept::Phi1 => "phi1",
            Concept::Phi2 => "phi2",
            Concept::Phi3 => "phi3",
        };
        f.write_str(s)
    }
}

fn cat(x: &[FeatureValue], i: usize, name: &str) -> Result<u32> {
    match x.get(i) {
        Some(FeatureValue::Cat(v)) if *v < 3 => Ok(*v),
        other => Err(Error::invalid(format!(
            "STAGGER `{name}` must be categorical with 3 values, got {other:?}"
        ))),
    }
}

/// Evaluate a STAGGER concept on `x = (size, color, shape)`.
pub fn stagger_label(x: &[FeatureValue], concept: Concept) -> Result<Label> {
    if x.len() != 3 {
        return Err(Error::invalid(format!(
            "STAGGER instances have 3 features, got {}",
            x.len()
        )));
    }
    let size = cat(x, 0, "size")?;
    let color = cat(x, 1, "color")?;
    let shape = cat(x, 2, "shape")?;
    let holds = match concept {
        Concept::Phi1 => size == SMALL && color == RED,
        Concept::Phi2 => color == GREEN || shape == SQUARE,
        Concept::Phi3 => size == MEDIUM || size == LARGE,
    };
    Ok(Label::from(holds))
}

/// Piecewise-stationary stream layout: `concepts[k]` is active on
/// `[k * segment_len, (k + 1) * segment_len)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub total: usize,
    pub segment_len: usize,
    pub concepts: Vec<Concept>,
    pub seed: u64,
}

impl StreamSpec {
    pub fn new(total: usize, segment_len: usize, concepts: Vec<Concept>, seed: u64) -> Result<Self> {
        let spec = Self {
            total,
            segment_len,
            concepts,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 40,000-step layout with a concept switch every 10,000 steps.
    pub fn standard(seed: u64) -> Self {
        Self {
            total: 40_000,
            segment_len: 10_000,
            concepts: vec![Concept::Phi1, Concept::Phi2, Concept::Phi3, Concept::Phi1],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.concepts.is_empty() || self.segment_len == 0 {
            return Err(Error::invalid("stream needs at least one non-empty segment"));
        }
        if self.total != self.segment_len * self.concepts.len() {
            return Err(Error::invalid(format!(
                "total ({}) must equal segment_len ({}) x number of concepts ({})",
                self.total,
                self.segment_len,
                self.concepts.len()
            )));
        }
        Ok(())
    }

    pub fn concept_at(&self, t: usize) -> Concept {
        let k = (t / self.segment_len).min(self.concepts.len() - 1);
        self.concepts[k]
    }

    pub fn drift_schedule(&self) -> Vec<usize> {
        (1..self.concepts.len()).map(|k| k * self.segment_len).collect()
    }
}

/// Draws attributes uniformly and independently, labels with the active concept.
#[derive(Debug, Clone)]
pub struct StaggerGenerator {
    spec: StreamSpec,
    rng: ChaCha8Rng,
    t: usize,
}

impl StaggerGenerator {
    pub fn new(spec: StreamSpec) -> Result<Self> {
        spec.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(spec.seed);
        Ok(Self { spec, rng, t: 0 })
    }
}

impl Iterator for StaggerGenerator {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        if self.t >= self.spec.total {
            return None;
        }
        let x = vec![
            FeatureValue::Cat(self.rng.gen_range(0..3)),
            FeatureValue::Cat(self.rng.gen_range(0..3)),
            FeatureValue::Cat(self.rng.gen_range(0..3)),
        ];
        let y = stagger_label(&x, self.spec.concept_at(self.t)).expect("generated in-domain");
        let inst = Instance::new(self.t, x, y);
        self.t += 1;
        Some(inst)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.spec.total - self.t;
        (left, Some(left))
    }
}

pub fn stagger_stream(spec: &StreamSpec) -> Result<Vec<Instance>> {
    Ok(StaggerGenerator::new(spec.clone())?.collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(size: u32, color: u32, shape: u32) -> Vec<FeatureValue> {
        vec![
            FeatureValue::Cat(size),
            FeatureValue::Cat(color),
            FeatureValue::Cat(shape),
        ]
    }

    #[test]
    fn concept_examples() {
        assert_eq!(stagger_label(&x(SMALL, RED, CIRCLE), Concept::Phi1).unwrap(), 1);
        assert_eq!(stagger_label(&x(SMALL, GREEN, TRIANGLE), Concept::Phi1).unwrap(), 0);
        assert_eq!(stagger_label(&x(LARGE, BLUE, CIRCLE), Concept::Phi3).unwrap(), 1);
        assert_eq!(stagger_label(&x(SMALL, BLUE, SQUARE), Concept::Phi2).unwrap(), 1);
        assert_eq!(stagger_label(&x(SMALL, BLUE, CIRCLE), Concept::Phi3).unwrap(), 0);
    }

    #[test]
    fn unknown_concept_is_rejected() {
        assert!("phi4".parse::<Concept>().is_err());
        assert_eq!("φ2".parse::<Concept>().unwrap(), Concept::Phi2);
    }

    #[test]
    fn spec_validation() {
        assert!(StreamSpec::new(10, 3, vec![Concept::Phi1, Concept::Phi2], 0).is_err());
        let s = StreamSpec::standard(7);
        s.validate().unwrap();
        assert_eq!(s.drift_schedule(), vec![10_000, 20_000, 30_000]);
    }

    #[test]
    fn segment_boundary() {
        let s = StreamSpec::standard(7);
        let stream = stagger_stream(&s).unwrap();
        assert_eq!(stream.len(), 40_000);
        assert_eq!(s.concept_at(9_999), Concept::Phi1);
        assert_eq!(s.concept_at(10_000), Concept::Phi2);
        for inst in &stream[9_990..10_010] {
            assert_eq!(inst.y, stagger_label(&inst.x, s.concept_at(inst.t)).unwrap());
        }
    }

    #[test]
    fn tiny_stream_is_deterministic() {
        let s = StreamSpec::new(3, 3, vec![Concept::Phi1], 42).unwrap();
        assert_eq!(stagger_stream(&s).unwrap(), stagger_stream(&s).unwrap());
    }
}
