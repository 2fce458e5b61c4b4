use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OracleKind};
use super::matching::{match_alarms, MatchOutcome};
use crate::detectors::{DetectorKind, Verdict};
use crate::ebc::{AnnotationRecord, EbcSession, Event, Method, Oracle, SessionSetup, StepRecord};
use crate::error::{Error, Result};
use crate::learners::LearnerKind;
use crate::streams::Instance;

/// Scores of one (learner, detector, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub learner: LearnerKind,
    pub detector: DetectorKind,
    pub seed: u64,
    #[serde(flatten)]
    pub outcome: MatchOutcome,
    pub query_count: usize,
    /// Steps of every drift alarm.
    pub alarms: Vec<usize>,
    /// Warnings are logged but never scored.
    pub warnings: usize,
    /// Prequential accuracy over the whole stream.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub confound: bool,
    pub method: Method,
    pub delay_window: i64,
    pub stream_len: usize,
    pub gold: Vec<usize>,
    pub cells: Vec<CellReport>,
}

impl EvalReport {
    pub fn cells_for(&self, learner: LearnerKind, detector: DetectorKind) -> impl Iterator<Item = &CellReport> {
        self.cells
            .iter()
            .filter(move |c| c.learner == learner && c.detector == detector)
    }
}

/// Full output of one run: scores plus per-step trace and event log.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub report: CellReport,
    pub trace: Vec<StepRecord>,
    pub events: Vec<Event>,
    pub annotations: Vec<AnnotationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: EvalReport,
    pub runs: Vec<CellRun>,
}

pub fn session_setup(cfg: &ExperimentConfig, learner: LearnerKind, detector: DetectorKind, seed: u64) -> Result<SessionSetup> {
    Ok(SessionSetup {
        schema: cfg.schema()?,
        learner,
        learner_params: cfg.learner_params,
        detector,
        detector_params: cfg.detector_params,
        exstream: cfg.exstream,
        explainer: cfg.explainer,
        ebc: cfg.ebc,
        method: cfg.method,
        reset_background_on_drift: cfg.reset_background_on_drift,
        seed,
    })
}

pub fn read_annotation_log(path: &std::path::Path) -> Result<Vec<AnnotationRecord>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn build_oracle(cfg: &ExperimentConfig) -> Result<Oracle> {
    Ok(match cfg.oracle {
        OracleKind::Simulated => Oracle::Simulated {
            gt_spurious: cfg.gt_spurious()?,
        },
        OracleKind::Human => Oracle::Human,
        OracleKind::Replay => {
            let path = cfg
                .annotation_log
                .as_deref()
                .ok_or_else(|| Error::invalid("replay oracle needs annotation_log"))?;
            Oracle::Replay {
                log: read_annotation_log(path)?.into(),
            }
        }
    })
}

/// Prequential run of one cell over a prepared stream.
pub fn run_cell(
    cfg: &ExperimentConfig,
    learner: LearnerKind,
    detector: DetectorKind,
    seed: u64,
    stream: &[Instance],
    oracle: Oracle,
) -> Result<CellRun> {
    if matches!(oracle, Oracle::Human) {
        return Err(Error::invalid("batch runs cannot use a human oracle; use the session service"));
    }
    let gold = cfg.gold()?;
    let mut session = EbcSession::new(session_setup(cfg, learner, detector, seed)?, oracle)?;
    let mut trace = Vec::with_capacity(stream.len());
    for inst in stream {
        trace.push(session.step(inst)?);
    }
    let alarms: Vec<usize> = trace
        .iter()
        .filter(|r| r.verdict == Verdict::Drift)
        .map(|r| r.t)
        .collect();
    let warnings = trace.iter().filter(|r| r.verdict == Verdict::Warning).count();
    let correct = trace.iter().filter(|r| !r.error()).count();
    let outcome = match_alarms(&alarms, &gold, cfg.delay_window)?;
    let report = CellReport {
        learner,
        detector,
        seed,
        outcome,
        query_count: session.query_count(),
        alarms,
        warnings,
        accuracy: if trace.is_empty() {
            0.0
        } else {
            correct as f64 / trace.len() as f64
        },
    };
    Ok(CellRun {
        report,
        trace,
        events: session.events().to_vec(),
        annotations: session.annotations().to_vec(),
    })
}

/// Every (learner, detector, seed) cell of `cfg`, in parallel; output order
/// follows seeds, then learners, then detectors.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let streams: Vec<Vec<Instance>> = cfg
        .seeds
        .par_iter()
        .map(|&s| cfg.stream(s))
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for (si, &seed) in cfg.seeds.iter().enumerate() {
        for &l in &cfg.learners {
            for &d in &cfg.detectors {
                jobs.push((si, seed, l, d));
            }
        }
    }
    let oracle = build_oracle(cfg)?;
    let runs: Vec<CellRun> = jobs
        .par_iter()
        .map(|&(si, seed, l, d)| run_cell(cfg, l, d, seed, &streams[si], oracle.clone()))
        .collect::<Result<_>>()?;
    let report = EvalReport {
        dataset: cfg.dataset.clone().unwrap_or_default(),
        confound: cfg.confound,
        method: cfg.method,
        delay_window: cfg.delay_window,
        stream_len: cfg.stream_len()?,
        gold: cfg.gold()?,
        cells: runs.iter().map(|r| r.report.clone()).collect(),
    };
    Ok(ExperimentOutput { report, runs })
}

/// Mean relevance weight on `features` over cadence points with
/// `from <= t < to`; `None` if no cadence point falls inside.
pub fn mean_feature_weight(trace: &[StepRecord], features: &BTreeSet<usize>, from: usize, to: usize) -> Option<f64> {
    let (sum, n) = trace
        .iter()
        .filter(|r| (from..to).contains(&r.t))
        .filter_map(|r| r.weights.as_ref())
        .fold((0.0, 0usize), |(s, n), w| {
            (s + features.iter().map(|&f| w[f]).sum::<f64>(), n + 1)
        });
    (n > 0).then(|| sum / n as f64)
}

/// Replays `annotations` in order; convenience for tests and the service.
pub fn replay_oracle(annotations: &[AnnotationRecord]) -> Oracle {
    Oracle::Replay {
        log: annotations.iter().cloned().collect::<VecDeque<_>>(),
    }
}
