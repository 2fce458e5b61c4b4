//! Scoring alarm traces against gold drift schedules, experiment runs,
//! reports and hyperparameter sweeps.

mod config;
mod matching;
mod report;
mod run;
mod sweep;

pub use config::{ExperimentConfig, OracleKind};
pub use matching::{match_alarms, MatchOutcome};
pub use report::{
    cell_dir, emit_report, read_events, read_summary, trace_header, write_events, write_summary, write_trace,
    TRACE_COLUMNS,
};
pub use run::{
    build_oracle, mean_feature_weight, read_annotation_log, replay_oracle, run_cell, run_experiment,
    session_setup, CellReport, CellRun, EvalReport, ExperimentOutput,
};
pub use sweep::{apply_candidate, deep_merge, sweep, CandidateScore, Grid, SweepOutcome};
