use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::run::{EvalReport, ExperimentOutput};
use crate::ebc::{Event, StepRecord};
use crate::error::Result;
use crate::streams::FeatureSchema;

/// Fixed leading columns of a trace file; one `w_<feature>` column per
/// schema feature follows. Empty cells mean "not a cadence point".
pub const TRACE_COLUMNS: [&str; 8] = ["t", "y", "y_pred", "error", "verdict", "dissimilarity", "entropy", "query"];

pub fn trace_header(schema: &FeatureSchema) -> Vec<String> {
    TRACE_COLUMNS
        .iter()
        .map(|c| c.to_string())
        .chain(schema.names().into_iter().map(|n| format!("w_{n}")))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_trace<W: Write>(writer: W, schema: &FeatureSchema, trace: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(trace_header(schema))?;
    for r in trace {
        let mut row = vec![
            r.t.to_string(),
            r.y.to_string(),
            r.y_pred.to_string(),
            u8::from(r.error()).to_string(),
            r.verdict.as_str().to_string(),
            opt(r.dissimilarity),
            opt(r.entropy),
            u8::from(r.query).to_string(),
        ];
        match &r.weights {
            Some(ws) => row.extend(ws.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), schema.arity())),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Directory holding one cell's per-seed files.
pub fn cell_dir(root: &Path, learner: impl std::fmt::Display, detector: impl std::fmt::Display) -> PathBuf {
    root.join(format!("{learner}_{detector}"))
}

/// Writes `summary.json` at `root` and, per cell, `trace_<seed>.csv` and
/// `events_<seed>.json` under `<learner>_<detector>/`.
pub fn emit_report(output: &ExperimentOutput, schema: &FeatureSchema, root: &Path) -> Result<()> {
    fs::create_dir_all(root)?;
    write_summary(&output.report, &root.join("summary.json"))?;
    for run in &output.runs {
        let dir = cell_dir(root, run.report.learner, run.report.detector);
        fs::create_dir_all(&dir)?;
        let seed = run.report.seed;
        write_trace(fs::File::create(dir.join(format!("trace_{seed}.csv")))?, schema, &run.trace)?;
        write_events(&run.events, &dir.join(format!("events_{seed}.json")))?;
        if !run.annotations.is_empty() {
            let f = fs::File::create(dir.join(format!("annotations_{seed}.json")))?;
            serde_json::to_writer_pretty(f, &run.annotations)?;
        }
    }
    Ok(())
}

pub fn write_summary(report: &EvalReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<EvalReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_events(events: &[Event], path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(events)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::Verdict;

    #[test]
    fn empty_cadence_cells_stay_blank() {
        let schema = FeatureSchema::stagger();
        let trace = vec![
            StepRecord {
                t: 0,
                y: 1,
                y_pred: 0,
                verdict: Verdict::None,
                dissimilarity: None,
                entropy: Some(0.5),
                weights: Some(vec![0.2, 0.3, 0.5]),
                query: true,
            },
            StepRecord {
                t: 1,
                y: 1,
                y_pred: 1,
                verdict: Verdict::Drift,
                dissimilarity: None,
                entropy: None,
                weights: None,
                query: false,
            },
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &schema, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,y,y_pred,error,verdict,dissimilarity,entropy,query,w_size,w_color,w_shape");
        assert_eq!(lines[1], "0,1,0,1,none,,0.5,1,0.2,0.3,0.5");
        assert_eq!(lines[2], "1,1,1,0,drift,,,0,,,");
    }
}
