//! Subject records, data cut-offs, risk tables and Kaplan-Meier curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::Arm;

/// A subject in calendar time: entry at `arrival`, event (or end of
/// observation) `event_time` months later.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub arrival: f64,
    pub event_time: f64,
    pub observed_event: bool,
    pub arm: Arm,
}

impl SubjectRecord {
    /// Calendar time of the event, if one is observed.
    #[inline]
    pub fn event_calendar_time(&self) -> Option<f64> {
        self.observed_event.then_some(self.arrival + self.event_time)
    }
}

/// A follow-up observation as seen in an analysis snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub event: bool,
    pub arm: Arm,
}

/// Administrative censoring at calendar time `cutoff`.
///
/// Subjects not yet enrolled (or enrolled exactly at the cut-off) are
/// dropped. An event is kept iff it happened no later than the cut-off.
pub fn apply_cutoff(records: &[SubjectRecord], cutoff: f64) -> Vec<Observation> {
    let mut out = Vec::with_capacity(records.len());
    apply_cutoff_into(records, cutoff, &mut out);
    out
}

pub(crate) fn apply_cutoff_into(records: &[SubjectRecord], cutoff: f64, out: &mut Vec<Observation>) {
    out.clear();
    for r in records {
        let window = cutoff - r.arrival;
        if window <= 0.0 {
            continue;
        }
        let seen = r.observed_event && r.arrival + r.event_time <= cutoff;
        out.push(Observation {
            time: if seen { r.event_time } else { r.event_time.min(window) },
            event: seen,
            arm: r.arm,
        });
    }
}

/// Sorted calendar times of all observed events.
pub fn event_calendar_times(records: &[SubjectRecord]) -> Vec<f64> {
    let mut times: Vec<f64> = records.iter().filter_map(|r| r.event_calendar_time()).collect();
    times.sort_by(f64::total_cmp);
    times
}

/// Calendar time at which the `d`-th event occurs.
pub fn cutoff_for_event_count(records: &[SubjectRecord], d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("event count must be at least 1".into()));
    }
    let times = event_calendar_times(records);
    times.get(d - 1).copied().ok_or(Error::InsufficientEvents {
        requested: d,
        available: times.len(),
    })
}

/// One distinct event time with at-risk and event counts per arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub time: f64,
    pub at_risk: [u32; 2],
    pub events: [u32; 2],
}

impl RiskRow {
    #[inline]
    pub fn n(&self) -> u32 {
        self.at_risk[0] + self.at_risk[1]
    }

    #[inline]
    pub fn o(&self) -> u32 {
        self.events[0] + self.events[1]
    }
}

/// Ordered distinct event times with per-arm risk sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub rows: Vec<RiskRow>,
    /// Subjects contributing follow-up (all arms).
    pub n_subjects: usize,
    /// Largest follow-up time, event or censored.
    pub max_time: f64,
}

impl RiskTable {
    pub fn total_events(&self) -> u32 {
        self.rows.iter().map(RiskRow::o).sum()
    }
}

/// Builds the risk table. Subjects censored exactly at an event time are
/// counted as at risk at that time.
pub fn build_risk_table(obs: &[Observation]) -> Result<RiskTable> {
    let mut sorted = obs.to_vec();
    let table = tabulate(&mut sorted);
    if table.rows.is_empty() {
        return Err(Error::NoEvents);
    }
    Ok(table)
}

/// Tabulates in place (sorts `obs` by time). Rows may be empty.
pub(crate) fn tabulate(obs: &mut [Observation]) -> RiskTable {
    obs.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut at_risk = [0u32; 2];
    for o in obs.iter() {
        at_risk[o.arm.index()] += 1;
    }
    let mut rows = Vec::new();
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].time;
        let mut events = [0u32; 2];
        let mut leaving = [0u32; 2];
        while i < obs.len() && obs[i].time == t {
            let a = obs[i].arm.index();
            leaving[a] += 1;
            if obs[i].event {
                events[a] += 1;
            }
            i += 1;
        }
        if events[0] + events[1] > 0 {
            rows.push(RiskRow {
                time: t,
                at_risk,
                events,
            });
        }
        at_risk[0] -= leaving[0];
        at_risk[1] -= leaving[1];
    }
    RiskTable {
        rows,
        n_subjects: obs.len(),
        max_time: obs.last().map_or(0.0, |o| o.time),
    }
}

/// A Kaplan-Meier step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmStep {
    pub time: f64,
    pub survival: f64,
    pub at_risk: u32,
    pub events: u32,
}

/// Right-continuous Kaplan-Meier step function, `S(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub steps: Vec<KmStep>,
    pub n_start: usize,
    /// Last follow-up time (event or censoring).
    pub max_time: f64,
}

impl KmCurve {
    fn from_rows<'a>(
        rows: impl Iterator<Item = (f64, u32, u32)> + 'a,
        n_start: usize,
        max_time: f64,
    ) -> Self {
        let mut s = 1.0;
        let steps = rows
            .filter(|&(_, _, d)| d > 0)
            .map(|(time, n, d)| {
                s *= 1.0 - d as f64 / n as f64;
                KmStep {
                    time,
                    survival: s,
                    at_risk: n,
                    events: d,
                }
            })
            .collect();
        Self {
            steps,
            n_start,
            max_time,
        }
    }

    /// `S(t)`, including a step at exactly `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.steps.partition_point(|s| s.time <= t);
        if k == 0 {
            1.0
        } else {
            self.steps[k - 1].survival
        }
    }

    /// `S(t-)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.steps.partition_point(|s| s.time < t);
        if k == 0 {
            1.0
        } else {
            self.steps[k - 1].survival
        }
    }

    /// Left limits at each step time, aligned with `steps`.
    pub fn left_limits(&self) -> Vec<f64> {
        let mut prev = 1.0;
        self.steps
            .iter()
            .map(|s| std::mem::replace(&mut prev, s.survival))
            .collect()
    }
}

/// Product-limit estimate of the pooled sample.
pub fn km_pooled(table: &RiskTable) -> KmCurve {
    KmCurve::from_rows(
        table.rows.iter().map(|r| (r.time, r.n(), r.o())),
        table.n_subjects,
        table.max_time,
    )
}

/// Product-limit estimate restricted to one arm.
pub fn km_arm(obs: &[Observation], arm: Arm) -> Result<KmCurve> {
    let mut own: Vec<Observation> = obs.iter().filter(|o| o.arm == arm).copied().collect();
    if own.is_empty() {
        return Err(Error::EmptyArm(arm as u8));
    }
    let table = tabulate(&mut own);
    let a = arm.index();
    Ok(KmCurve::from_rows(
        table.rows.iter().map(|r| (r.time, r.at_risk[a], r.events[a])),
        table.n_subjects,
        table.max_time,
    ))
}

/// Per-arm curves, control first.
pub fn km_per_arm(obs: &[Observation]) -> Result<[KmCurve; 2]> {
    Ok([km_arm(obs, Arm::Control)?, km_arm(obs, Arm::Experimental)?])
}
