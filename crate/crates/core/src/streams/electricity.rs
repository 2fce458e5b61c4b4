//! Electricity-layout streams: CSV ingestion and a synthetic surrogate.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::schema::{FeatureKind, FeatureSchema, FeatureValue, Instance, Label};
use crate::error::{Error, Result};

/// Index of `nswdemand` in the electricity schema.
pub const NSW_DEMAND: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowPolicy {
    #[default]
    FailFast,
    SkipInvalid,
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label_column: String,
    pub policy: RowPolicy,
    /// Min-max scale numeric columns to `[0, 1]` using the schema bounds.
    pub normalize: bool,
}

impl CsvOptions {
    pub fn new(label_column: &str) -> Self {
        Self {
            label_column: label_column.to_owned(),
            policy: RowPolicy::FailFast,
            normalize: false,
        }
    }
}

#[derive(Debug)]
pub struct CsvLoad {
    pub instances: Vec<Instance>,
    /// Rejected rows under [`RowPolicy::SkipInvalid`].
    pub skipped: Vec<Error>,
}

fn parse_label(raw: &str) -> Option<Label> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "up" | "true" => Some(1),
        "0" | "down" | "false" => Some(0),
        _ => None,
    }
}

fn row_err(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Row {
        row,
        column: column.to_owned(),
        message: message.into(),
    }
}

/// Read a header-first CSV. Columns not in the schema are ignored; rows are
/// numbered from 0 and that number becomes the instance step.
pub fn load_csv_stream(path: &Path, schema: &FeatureSchema, opts: &CsvOptions) -> Result<CsvLoad> {
    let file = std::fs::File::open(path)?;
    read_csv_stream(file, schema, opts)
}

pub fn read_csv_stream<R: Read>(reader: R, schema: &FeatureSchema, opts: &CsvOptions) -> Result<CsvLoad> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut feature_cols = Vec::with_capacity(schema.arity());
    for f in schema.features() {
        let c = col(&f.name).ok_or_else(|| row_err(0, &f.name, "missing column in header"))?;
        feature_cols.push(c);
    }
    let label_col = col(&opts.label_column)
        .ok_or_else(|| row_err(0, &opts.label_column, "missing label column in header"))?;

    let mut instances = Vec::new();
    let mut skipped = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        match parse_row(&record, row, instances.len(), schema, &feature_cols, label_col, opts) {
            Ok(inst) => instances.push(inst),
            Err(e) => match opts.policy {
                RowPolicy::FailFast => return Err(e),
                RowPolicy::SkipInvalid => skipped.push(e),
            },
        }
    }
    Ok(CsvLoad { instances, skipped })
}

fn parse_row(
    record: &csv::StringRecord,
    row: usize,
    t: usize,
    schema: &FeatureSchema,
    feature_cols: &[usize],
    label_col: usize,
    opts: &CsvOptions,
) -> Result<Instance> {
    let mut x = Vec::with_capacity(schema.arity());
    for (f, &c) in schema.features().iter().zip(feature_cols) {
        let cell = record.get(c).unwrap_or("").trim();
        let v = match &f.kind {
            FeatureKind::Categorical { values } => {
                let i = values
                    .iter()
                    .position(|v| v == cell)
                    .ok_or_else(|| row_err(row, &f.name, format!("`{cell}` is not a known value")))?;
                FeatureValue::Cat(i as u32)
            }
            FeatureKind::Numeric { min, max } => {
                // str::parse is locale independent and expects a dot separator
                let v: f64 = cell
                    .parse()
                    .map_err(|_| row_err(row, &f.name, format!("`{cell}` is not a number")))?;
                if !v.is_finite() || v < *min || v > *max {
                    return Err(row_err(row, &f.name, format!("{v} outside [{min}, {max}]")));
                }
                if opts.normalize {
                    FeatureValue::Num((v - min) / (max - min))
                } else {
                    FeatureValue::Num(v)
                }
            }
        };
        x.push(v);
    }
    let raw = record.get(label_col).unwrap_or("");
    let y = parse_label(raw)
        .ok_or_else(|| row_err(row, &opts.label_column, format!("`{raw}` is not a binary label")))?;
    Ok(Instance::new(t, x, y))
}

/// Write a stream as CSV with the schema's feature names followed by `label_column`.
pub fn write_csv_stream<W: Write>(
    writer: W,
    schema: &FeatureSchema,
    label_column: &str,
    stream: &[Instance],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = schema.names();
    header.push(label_column);
    w.write_record(&header)?;
    for inst in stream {
        let mut row: Vec<String> = inst
            .x
            .iter()
            .enumerate()
            .map(|(i, v)| schema.format_value(i, *v))
            .collect();
        row.push(inst.y.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A stationary stretch of the surrogate stream starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub start: usize,
    pub coef: Vec<f64>,
}

impl Regime {
    pub fn label(&self, x: &[f64]) -> Label {
        let score: f64 = x.iter().zip(&self.coef).map(|(v, c)| c * (v - 0.5)).sum();
        Label::from(score > 0.0)
    }
}

/// Coefficient schedule of the surrogate: one regime per drift time plus the
/// initial one. `nswdemand` keeps a large positive coefficient throughout; the
/// other coefficients flip sign at every switch.
pub fn surrogate_regimes(total: usize, drift_times: &[usize], seed: u64) -> Result<Vec<Regime>> {
    let mut drifts = drift_times.to_vec();
    drifts.sort_unstable();
    drifts.dedup();
    if let Some(&bad) = drifts.iter().find(|&&t| t >= total) {
        return Err(Error::invalid(format!("drift time {bad} outside [0, {total})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e1ec);
    let d = super::schema::ELECTRICITY_FEATURES.len();
    let mut coef: Vec<f64> = (0..d)
        .map(|i| {
            if i == NSW_DEMAND {
                1.5
            } else {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                sign * rng.gen_range(0.5..1.5)
            }
        })
        .collect();
    let mut regimes = vec![Regime {
        start: 0,
        coef: coef.clone(),
    }];
    for start in drifts.into_iter().filter(|&t| t > 0) {
        for (i, c) in coef.iter_mut().enumerate() {
            if i != NSW_DEMAND {
                *c = -c.signum() * rng.gen_range(0.5..1.5);
            }
        }
        regimes.push(Regime {
            start,
            coef: coef.clone(),
        });
    }
    Ok(regimes)
}

/// Six uniform features in `[0, 1]` labelled by the active [`Regime`].
pub fn synth_electricity_stream(total: usize, drift_times: &[usize], seed: u64) -> Result<Vec<Instance>> {
    let regimes = surrogate_regimes(total, drift_times, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = super::schema::ELECTRICITY_FEATURES.len();
    let mut active = 0;
    let mut out = Vec::with_capacity(total);
    for t in 0..total {
        while active + 1 < regimes.len() && regimes[active + 1].start <= t {
            active += 1;
        }
        let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let y = regimes[active].label(&x);
        out.push(Instance::new(t, x.into_iter().map(FeatureValue::Num).collect(), y));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "date,period,nswprice,nswdemand,vicprice,vicdemand,transfer,class\n\
        0,0.0,0.05,0.43,0.003,0.42,0.41,UP\n\
        0,0.02,0.05,0.38,0.003,0.42,0.41,DOWN\n\
        0,0.04,0.04,0.60,0.003,0.42,0.41,UP\n";

    #[test]
    fn loads_well_formed_rows() {
        let load = read_csv_stream(GOOD.as_bytes(), &FeatureSchema::electricity(), &CsvOptions::new("class")).unwrap();
        assert_eq!(load.instances.len(), 3);
        let ts: Vec<_> = load.instances.iter().map(|i| i.t).collect();
        assert_eq!(ts, vec![0, 1, 2]);
        assert_eq!(load.instances[1].y, 0);
        assert_eq!(load.instances[2].x[NSW_DEMAND], FeatureValue::Num(0.60));
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let bad = GOOD.replace("0.38", "abc");
        let err = read_csv_stream(bad.as_bytes(), &FeatureSchema::electricity(), &CsvOptions::new("class")).unwrap_err();
        match err {
            Error::Row { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "nswdemand");
            }
            other => panic!("unexpected {other}"),
        }
        let mut opts = CsvOptions::new("class");
        opts.policy = RowPolicy::SkipInvalid;
        let load = read_csv_stream(bad.as_bytes(), &FeatureSchema::electricity(), &opts).unwrap();
        assert_eq!(load.instances.len(), 2);
        assert_eq!(load.skipped.len(), 1);
        assert_eq!(load.instances[1].t, 1);
    }

    #[test]
    fn missing_column_and_out_of_domain() {
        let no_label = GOOD.replace(",class", ",klass");
        assert!(read_csv_stream(no_label.as_bytes(), &FeatureSchema::electricity(), &CsvOptions::new("class")).is_err());
        let ood = GOOD.replace("0.60", "1.60");
        assert!(matches!(
            read_csv_stream(ood.as_bytes(), &FeatureSchema::electricity(), &CsvOptions::new("class")),
            Err(Error::Row { row: 2, .. })
        ));
    }

    #[test]
    fn normalizes_with_schema_bounds() {
        let schema = FeatureSchema::new(vec![super::super::schema::Feature::numeric("v", 10.0, 20.0)]).unwrap();
        let mut opts = CsvOptions::new("y");
        opts.normalize = true;
        let load = read_csv_stream("v,y\n15,1\n".as_bytes(), &schema, &opts).unwrap();
        assert_eq!(load.instances[0].x[0], FeatureValue::Num(0.5));
    }

    #[test]
    fn surrogate_switches_exactly_at_drift() {
        let regimes = surrogate_regimes(5000, &[2500], 3).unwrap();
        assert_eq!(regimes.iter().map(|r| r.start).collect::<Vec<_>>(), vec![0, 2500]);
        assert!(regimes[0].coef[0] * regimes[1].coef[0] < 0.0);
        let s = synth_electricity_stream(5000, &[2500], 3).unwrap();
        for inst in &s {
            let x: Vec<f64> = inst.x.iter().map(|v| v.as_num().unwrap()).collect();
            let r = if inst.t < 2500 { &regimes[0] } else { &regimes[1] };
            assert_eq!(inst.y, r.label(&x));
        }
        assert_eq!(surrogate_regimes(5000, &[], 3).unwrap().len(), 1);
        assert_eq!(s.len(), 5000);
        assert_eq!(s, synth_electricity_stream(5000, &[2500], 3).unwrap());
        assert!(synth_electricity_stream(10, &[10], 3).is_err());
        let schema = FeatureSchema::electricity();
        assert!(s.iter().all(|i| schema.check(&i.x).is_ok()));
    }

    #[test]
    fn csv_round_trip() {
        let s = synth_electricity_stream(50, &[], 1).unwrap();
        let mut buf = Vec::new();
        write_csv_stream(&mut buf, &FeatureSchema::electricity(), "class", &s).unwrap();
        let back = read_csv_stream(buf.as_slice(), &FeatureSchema::electricity(), &CsvOptions::new("class")).unwrap();
        assert_eq!(back.instances, s);
    }
}
