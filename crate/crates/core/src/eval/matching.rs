use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an alarm trace scores against a gold drift schedule.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub detected: usize,
    pub missed: usize,
    pub false_alarms: usize,
    pub duplicates: usize,
    /// One entry per detected drift, in gold order.
    pub delays: Vec<usize>,
    /// Gold drift each detection refers to, parallel to `delays`.
    pub detected_gold: Vec<usize>,
}

/// Greedy left-to-right matching. An alarm `a` detects the earliest
/// undetected gold `g` with `g <= a <= g + window`. An alarm whose windows
/// hold only already-detected drifts is a duplicate, any other unmatched
/// alarm is a false alarm. Repeated alarms at one step count once.
pub fn match_alarms(alarms: &[usize], gold: &[usize], delay_window: i64) -> Result<MatchOutcome> {
    if delay_window < 0 {
        return Err(Error::invalid(format!("delay window must be non-negative, got {delay_window}")));
    }
    let window = delay_window as usize;
    let mut alarms = alarms.to_vec();
    alarms.sort_unstable();
    alarms.dedup();
    let mut gold = gold.to_vec();
    gold.sort_unstable();
    gold.dedup();

    let mut hit = vec![false; gold.len()];
    let mut out = MatchOutcome::default();
    for &a in &alarms {
        let mut covering = gold
            .iter()
            .enumerate()
            .filter(|(_, &g)| g <= a && a <= g.saturating_add(window));
        let mut any = false;
        let free = covering.find_map(|(i, _)| {
            any = true;
            (!hit[i]).then_some(i)
        });
        match free {
            Some(i) => {
                hit[i] = true;
                out.detected_gold.push(gold[i]);
                out.delays.push(a - gold[i]);
            }
            None if any => out.duplicates += 1,
            None => out.false_alarms += 1,
        }
    }
    // report detections in gold order
    let mut pairs: Vec<_> = out.detected_gold.iter().copied().zip(out.delays.iter().copied()).collect();
    pairs.sort_unstable();
    (out.detected_gold, out.delays) = pairs.into_iter().unzip();
    out.detected = out.delays.len();
    out.missed = gold.len() - out.detected;
    Ok(out)
}
