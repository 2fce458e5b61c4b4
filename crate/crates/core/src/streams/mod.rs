//! Ground-truth drifting streams, confound injection and CSV ingestion.

mod confound;
mod electricity;
mod schema;
mod stagger;

use std::str::FromStr;

pub use confound::{apply_confound, Condition, ConfoundSpec};
pub use electricity::{
    load_csv_stream, read_csv_stream, surrogate_regimes, synth_electricity_stream, write_csv_stream,
    CsvLoad, CsvOptions, Regime, RowPolicy, NSW_DEMAND,
};
pub use schema::{Feature, FeatureKind, FeatureSchema, FeatureValue, Instance, Label, ELECTRICITY_FEATURES};
pub use stagger::{
    stagger_label, stagger_stream, Concept, StaggerGenerator, StreamSpec, BLUE, CIRCLE, GREEN, LARGE, MEDIUM, RED,
    SMALL, SQUARE, TRIANGLE,
};

use crate::error::{Error, Result};

/// Drift times estimated for the real electricity market data.
pub const ELECTRICITY_GOLD: [usize; 3] = [3_109, 18_712, 37_187];
/// Length of the real electricity market data.
pub const ELECTRICITY_LEN: usize = 45_312;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetId {
    Stagger,
    Electricity,
    Synthetic { drift_times: Vec<usize> },
}

impl FromStr for DatasetId {
    type Err = Error;

    /// Accepts `stagger`, `electricity` and `synthetic(drift_times=a,b,...)`;
    /// an empty list or `∅` means no drift.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "stagger" => return Ok(DatasetId::Stagger),
            "electricity" => return Ok(DatasetId::Electricity),
            "synthetic" => return Ok(DatasetId::Synthetic { drift_times: vec![] }),
            _ => {}
        }
        let inner = s
            .strip_prefix("synthetic(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::invalid(format!("unknown dataset `{s}`")))?;
        let list = inner
            .strip_prefix("drift_times=")
            .ok_or_else(|| Error::invalid(format!("expected drift_times=... in `{s}`")))?
            .trim();
        let drift_times = if list.is_empty() || list == "∅" {
            vec![]
        } else {
            list.split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad drift time `{v}`")))
                })
                .collect::<Result<Vec<usize>>>()?
        };
        Ok(DatasetId::Synthetic { drift_times })
    }
}

/// Gold-standard drift times. STAGGER uses the standard 10,000-step schedule.
pub fn gold_drifts(dataset: &DatasetId) -> Vec<usize> {
    match dataset {
        DatasetId::Stagger => StreamSpec::standard(0).drift_schedule(),
        DatasetId::Electricity => ELECTRICITY_GOLD.to_vec(),
        DatasetId::Synthetic { drift_times } => {
            let mut d = drift_times.clone();
            d.sort_unstable();
            d.dedup();
            d
        }
    }
}

pub fn gold_drifts_by_name(id: &str) -> Result<Vec<usize>> {
    Ok(gold_drifts(&id.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gold_schedules() {
        assert_eq!(gold_drifts_by_name("stagger").unwrap(), vec![10_000, 20_000, 30_000]);
        assert_eq!(gold_drifts_by_name("electricity").unwrap(), vec![3_109, 18_712, 37_187]);
        assert!(gold_drifts_by_name("synthetic(drift_times=∅)").unwrap().is_empty());
        assert_eq!(
            gold_drifts_by_name("synthetic(drift_times=300, 100)").unwrap(),
            vec![100, 300]
        );
        assert!(gold_drifts_by_name("sea").is_err());
    }
}
