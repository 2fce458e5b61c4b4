//! Baseline change detectors: DDM, ADWIN and Page-Hinkley.
//!
//! All three are single-owner state machines behind [`ChangeDetector`]; a
//! `Drift` verdict always leaves the detector in its post-reset state (ADWIN
//! keeps the retained part of its window).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    #[default]
    None,
    Warning,
    Drift,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::None => "none",
            Verdict::Warning => "warning",
            Verdict::Drift => "drift",
        }
    }
}

pub trait ChangeDetector {
    fn update(&mut self, value: f64) -> Result<Verdict>;
    fn reset(&mut self);
    /// Current test statistic, for traces.
    fn statistic(&self) -> f64;
}

fn finite(value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(format!("detector input {value} is not finite")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdmParams {
    pub warmup: u64,
    pub warning_level: f64,
    pub drift_level: f64,
}

impl Default for DdmParams {
    fn default() -> Self {
        Self {
            warmup: 30,
            warning_level: 2.0,
            drift_level: 3.0,
        }
    }
}

/// Drift detection method over a Bernoulli error stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ddm {
    params: DdmParams,
    n: u64,
    errors: u64,
    p: f64,
    s: f64,
    p_min: f64,
    s_min: f64,
}

impl Ddm {
    pub fn new(params: DdmParams) -> Self {
        Self {
            params,
            n: 0,
            errors: 0,
            p: 0.0,
            s: 0.0,
            p_min: f64::INFINITY,
            s_min: f64::INFINITY,
        }
    }

    pub fn params(&self) -> &DdmParams {
        &self.params
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn error_rate(&self) -> f64 {
        self.p
    }

    pub fn std(&self) -> f64 {
        self.s
    }

    /// `(p_min, s_min)` recorded since the last reset.
    pub fn minimum(&self) -> (f64, f64) {
        (self.p_min, self.s_min)
    }

    /// Feed one error bit (0 = correct, 1 = error).
    pub fn update_bit(&mut self, error: u8) -> Verdict {
        self.n += 1;
        self.errors += u64::from(error);
        self.p = self.errors as f64 / self.n as f64;
        self.s = (self.p * (1.0 - self.p) / self.n as f64).sqrt();
        if self.n < self.params.warmup {
            return Verdict::None;
        }
        let level = self.p + self.s;
        if level < self.p_min + self.s_min {
            self.p_min = self.p;
            self.s_min = self.s;
        }
        // Crossing a level needs the statistic strictly above its minimum;
        // otherwise an all-zero stream (s_min = 0) would sit on every level.
        if level <= self.p_min + self.s_min {
            return Verdict::None;
        }
        if level >= self.p_min + self.params.drift_level * self.s_min {
            self.reset();
            Verdict::Drift
        } else if level >= self.p_min + self.params.warning_level * self.s_min {
            Verdict::Warning
        } else {
            Verdict::None
        }
    }
}

impl ChangeDetector for Ddm {
    /// Accepts only 0.0 and 1.0.
    fn update(&mut self, value: f64) -> Result<Verdict> {
        let bit = if value == 0.0 {
            0
        } else if value == 1.0 {
            1
        } else {
            return Err(Error::invalid(format!("DDM input must be 0 or 1, got {value}")));
        };
        Ok(self.update_bit(bit))
    }

    fn reset(&mut self) {
        *self = Ddm::new(self.params);
    }

    fn statistic(&self) -> f64 {
        self.p + self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdwinParams {
    pub delta: f64,
    /// Buckets kept per row before the two oldest merge.
    pub max_buckets: usize,
    /// Minimum number of elements on each side of an admissible split.
    pub min_side: u64,
}

impl Default for AdwinParams {
    fn default() -> Self {
        Self {
            delta: 0.002,
            max_buckets: 5,
            min_side: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Bucket {
    sum: f64,
    /// Always `2^row`.
    count: u64,
}

/// Adaptive windowing over an exponential histogram of buckets. `rows[k]`
/// holds buckets of size `2^k`, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adwin {
    params: AdwinParams,
    rows: Vec<Vec<Bucket>>,
    n: u64,
    sum: f64,
    last_cut: f64,
}

/// Hoeffding-style cut threshold `sqrt(1/(2m) * ln(4/delta'))`, `m` the
/// harmonic mean of the two sub-window lengths.
pub fn adwin_epsilon(n0: u64, n1: u64, delta_prime: f64) -> f64 {
    let m = 2.0 / (1.0 / n0 as f64 + 1.0 / n1 as f64);
    ((1.0 / (2.0 * m)) * (4.0 / delta_prime).ln()).sqrt()
}

impl Adwin {
    pub fn new(params: AdwinParams) -> Self {
        Self {
            params,
            rows: Vec::new(),
            n: 0,
            sum: 0.0,
            last_cut: 0.0,
        }
    }

    pub fn params(&self) -> &AdwinParams {
        &self.params
    }

    pub fn window_len(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// Bucket sizes per row, for invariant checks.
    pub fn bucket_rows(&self) -> Vec<Vec<u64>> {
        self.rows.iter().map(|r| r.iter().map(|b| b.count).collect()).collect()
    }

    fn insert(&mut self, value: f64) {
        if self.rows.is_empty() {
            self.rows.push(Vec::new());
        }
        self.rows[0].push(Bucket { sum: value, count: 1 });
        self.n += 1;
        self.sum += value;
        let mut k = 0;
        while self.rows[k].len() > self.params.max_buckets {
            let a = self.rows[k].remove(0);
            let b = self.rows[k].remove(0);
            if self.rows.len() == k + 1 {
                self.rows.push(Vec::new());
            }
            self.rows[k + 1].push(Bucket {
                sum: a.sum + b.sum,
                count: a.count + b.count,
            });
            k += 1;
        }
    }

    /// Drop the oldest bucket (highest non-empty row, front).
    fn drop_oldest(&mut self) {
        while let Some(row) = self.rows.last_mut() {
            if row.is_empty() {
                self.rows.pop();
                continue;
            }
            let b = row.remove(0);
            self.n -= b.count;
            self.sum -= b.sum;
            if self.n == 0 {
                self.sum = 0.0;
            }
            return;
        }
    }

    /// Scan splits from oldest to newest at bucket boundaries and report
    /// whether any admissible split violates the bound.
    fn find_cut(&self) -> Option<f64> {
        if self.n < 2 * self.params.min_side.max(1) {
            return None;
        }
        let delta_prime = self.params.delta / self.n as f64;
        let mut n0 = 0u64;
        let mut s0 = 0.0;
        for row in self.rows.iter().rev() {
            for b in row {
                n0 += b.count;
                s0 += b.sum;
                let n1 = self.n - n0;
                if n1 < self.params.min_side.max(1) {
                    return None;
                }
                if n0 < self.params.min_side.max(1) {
                    continue;
                }
                let gap = (s0 / n0 as f64 - (self.sum - s0) / n1 as f64).abs();
                if gap >= adwin_epsilon(n0, n1, delta_prime) {
                    return Some(gap);
                }
            }
        }
        None
    }

    /// Insert `value` and shrink the window while a cut exists; returns the
    /// verdict and the resulting window length.
    pub fn update_window(&mut self, value: f64) -> Result<(Verdict, u64)> {
        let value = finite(value)?;
        self.insert(value);
        let mut cut = false;
        while let Some(gap) = self.find_cut() {
            self.last_cut = gap;
            self.drop_oldest();
            cut = true;
        }
        Ok((if cut { Verdict::Drift } else { Verdict::None }, self.n))
    }
}

impl ChangeDetector for Adwin {
    fn update(&mut self, value: f64) -> Result<Verdict> {
        self.update_window(value).map(|(v, _)| v)
    }

    fn reset(&mut self) {
        *self = Adwin::new(self.params);
    }

    fn statistic(&self) -> f64 {
        self.mean()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhParams {
    /// Tolerated drift of the mean per step.
    pub delta: f64,
    /// Alarm threshold on `m_t - min m`.
    pub lambda: f64,
}

impl Default for PhParams {
    fn default() -> Self {
        Self {
            delta: 0.005,
            lambda: 50.0,
        }
    }
}

/// One-sided Page-Hinkley test for an increase of the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageHinkley {
    params: PhParams,
    n: u64,
    mean: f64,
    cum: f64,
    min: f64,
}

impl PageHinkley {
    pub fn new(params: PhParams) -> Self {
        Self {
            params,
            n: 0,
            mean: 0.0,
            cum: 0.0,
            min: f64::INFINITY,
        }
    }

    pub fn params(&self) -> &PhParams {
        &self.params
    }

    /// `m_t - min m`, never negative.
    pub fn ph_statistic(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.cum - self.min
        }
    }
}

impl ChangeDetector for PageHinkley {
    fn update(&mut self, value: f64) -> Result<Verdict> {
        let value = finite(value)?;
        self.n += 1;
        self.mean += (value - self.mean) / self.n as f64;
        self.cum += value - self.mean - self.params.delta;
        self.min = self.min.min(self.cum);
        if self.ph_statistic() > self.params.lambda {
            self.reset();
            Ok(Verdict::Drift)
        } else {
            Ok(Verdict::None)
        }
    }

    fn reset(&mut self) {
        *self = PageHinkley::new(self.params);
    }

    fn statistic(&self) -> f64 {
        self.ph_statistic()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Ddm,
    Adwin,
    Ph,
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectorKind::Ddm => "ddm",
            DetectorKind::Adwin => "adwin",
            DetectorKind::Ph => "ph",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub ddm: DdmParams,
    pub adwin: AdwinParams,
    pub ph: PhParams,
}

/// A baseline detector chosen at runtime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Baseline {
    Ddm(Ddm),
    Adwin(Adwin),
    Ph(PageHinkley),
}

impl Baseline {
    pub fn new(kind: DetectorKind, params: &DetectorParams) -> Self {
        match kind {
            DetectorKind::Ddm => Baseline::Ddm(Ddm::new(params.ddm)),
            DetectorKind::Adwin => Baseline::Adwin(Adwin::new(params.adwin)),
            DetectorKind::Ph => Baseline::Ph(PageHinkley::new(params.ph)),
        }
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            Baseline::Ddm(_) => DetectorKind::Ddm,
            Baseline::Adwin(_) => DetectorKind::Adwin,
            Baseline::Ph(_) => DetectorKind::Ph,
        }
    }
}

impl ChangeDetector for Baseline {
    fn update(&mut self, value: f64) -> Result<Verdict> {
        match self {
            Baseline::Ddm(d) => d.update(value),
            Baseline::Adwin(d) => d.update(value),
            Baseline::Ph(d) => d.update(value),
        }
    }

    fn reset(&mut self) {
        match self {
            Baseline::Ddm(d) => d.reset(),
            Baseline::Adwin(d) => d.reset(),
            Baseline::Ph(d) => d.reset(),
        }
    }

    fn statistic(&self) -> f64 {
        match self {
            Baseline::Ddm(d) => d.statistic(),
            Baseline::Adwin(d) => d.statistic(),
            Baseline::Ph(d) => d.statistic(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub step: usize,
    pub verdict: Verdict,
    pub statistic: f64,
}

/// Write `step,verdict,statistic` rows.
pub fn write_verdict_trace<W: Write>(writer: W, trace: &[VerdictRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", "verdict", "statistic"])?;
    for r in trace {
        w.write_record([r.step.to_string(), r.verdict.as_str().to_owned(), r.statistic.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Run a detector over a whole input sequence, recording every verdict.
pub fn run_trace<D: ChangeDetector>(det: &mut D, values: &[f64]) -> Result<Vec<VerdictRecord>> {
    values
        .iter()
        .enumerate()
        .map(|(step, &v)| {
            let verdict = det.update(v)?;
            Ok(VerdictRecord {
                step,
                verdict,
                statistic: det.statistic(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ddm_std_formula() {
        let mut d = Ddm::new(DdmParams::default());
        for i in 0..100 {
            d.update_bit(u8::from(i % 5 == 0));
        }
        assert_abs_diff_eq!(d.error_rate(), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(d.std(), 0.04, epsilon = 1e-12);
    }

    #[test]
    fn ddm_warmup_is_silent() {
        let mut d = Ddm::new(DdmParams::default());
        for _ in 0..29 {
            assert_eq!(d.update_bit(1), Verdict::None);
        }
    }

    #[test]
    fn ddm_rejects_non_binary() {
        let mut d = Ddm::new(DdmParams::default());
        assert!(d.update(0.5).is_err());
        assert!(d.update(1.0).is_ok());
    }

    #[test]
    fn ddm_all_zero_never_alarms() {
        let mut d = Ddm::new(DdmParams::default());
        for _ in 0..5_000 {
            assert_eq!(d.update_bit(0), Verdict::None);
        }
    }

    #[test]
    fn adwin_epsilon_spot_value() {
        // m = 100, ln(4e5) / 200
        assert_abs_diff_eq!(adwin_epsilon(100, 100, 1e-5), 0.25396, epsilon = 1e-4);
    }

    #[test]
    fn adwin_constant_stream_keeps_window() {
        let mut a = Adwin::new(AdwinParams::default());
        for _ in 0..5_000 {
            let (v, _) = a.update_window(0.5).unwrap();
            assert_eq!(v, Verdict::None);
        }
        assert_eq!(a.window_len(), 5_000);
        for row in a.bucket_rows().iter() {
            assert!(row.len() <= 5);
        }
    }

    #[test]
    fn adwin_rejects_nan() {
        let mut a = Adwin::new(AdwinParams::default());
        assert!(a.update(f64::NAN).is_err());
    }

    #[test]
    fn ph_constant_is_flat() {
        let mut p = PageHinkley::new(PhParams::default());
        for _ in 0..1_000 {
            assert_eq!(p.update(0.7).unwrap(), Verdict::None);
            assert_eq!(p.ph_statistic(), 0.0);
        }
    }

    #[test]
    fn ph_infinite_threshold_never_alarms() {
        let mut p = PageHinkley::new(PhParams {
            delta: 0.005,
            lambda: f64::INFINITY,
        });
        for i in 0..2_000 {
            let v = if i < 1_000 { 0.0 } else { 100.0 };
            assert_eq!(p.update(v).unwrap(), Verdict::None);
        }
    }

    #[test]
    fn reset_restores_fresh_state() {
        let params = DetectorParams::default();
        for kind in [DetectorKind::Ddm, DetectorKind::Adwin, DetectorKind::Ph] {
            let fresh = Baseline::new(kind, &params);
            let mut b = fresh.clone();
            for i in 0..200 {
                b.update(f64::from(u8::from(i % 3 == 0))).unwrap();
            }
            b.reset();
            assert_eq!(b, fresh);
            b.reset();
            assert_eq!(b, fresh);
        }
    }

    #[test]
    fn verdict_trace_csv() {
        let mut p = PageHinkley::new(PhParams { delta: 0.0, lambda: 1.0 });
        let trace = run_trace(&mut p, &[0.0, 0.0, 5.0, 5.0]).unwrap();
        let mut buf = Vec::new();
        write_verdict_trace(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,verdict,statistic\n"));
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("drift"));
    }
}
