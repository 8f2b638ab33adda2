//! Design-stage calculus by numerical integration over a time-since-entry grid.
//!
//! For an analysis at calendar time `t`, a patient is followed for at most
//! `t - r` months when recruited at `r`, so the expected number of arm-`i`
//! events in a small interval `[s, s + ds)` since entry is
//! `n G(t - s) (S_i(s) - S_i(s + ds))`, with `G` the recruitment cdf.
//! The pooled survival that the weights are computed from is the limit of
//! the pooled Kaplan-Meier estimate, `(S_0 + S_1) / 2` under 1:1 allocation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gs::{hsd_alpha, Integrator, Look};
use crate::survival::{PiecewiseExponential, PowerRecruitment};
use crate::wlrt::WeightScheme;

/// Default integration step in months.
pub const DEFAULT_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    CalendarTimes(Vec<f64>),
    EventCounts(Vec<f64>),
}

impl Schedule {
    pub fn len(&self) -> usize {
        match self {
            Schedule::CalendarTimes(v) | Schedule::EventCounts(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn values(&self) -> &[f64] {
        match self {
            Schedule::CalendarTimes(v) | Schedule::EventCounts(v) => v,
        }
    }
}

/// Alpha spending as planned at the design stage; the information scale is
/// the design's own anticipated final information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignSpending {
    Hsd { gamma: f64 },
    Fixed { cum_alphas: Vec<f64> },
}

/// How the expected score under the alternative is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMethod {
    /// Local-alternative form `sum w log(h1/h0) dE / 4`.
    #[default]
    LogHazardRatio,
    /// Expected observed-minus-expected events `sum w (dE_1 - pi dE)`.
    ExactMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignScenario {
    pub control: PiecewiseExponential,
    pub experimental: PiecewiseExponential,
    pub n_per_arm: u32,
    pub recruitment: PowerRecruitment,
    pub scheme: WeightScheme,
    pub schedule: Schedule,
    pub spending: DesignSpending,
    pub alpha: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub drift_method: DriftMethod,
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

/// Expected quantities at one calendar time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub calendar_time: f64,
    /// Expected events on control and experimental.
    pub events: [f64; 2],
    pub information: f64,
    pub mean_score: f64,
}

impl Snapshot {
    pub fn total_events(&self) -> f64 {
        self.events[0] + self.events[1]
    }

    /// Expected z-value under the alternative.
    pub fn drift(&self) -> f64 {
        if self.information > 0.0 {
            self.mean_score / self.information.sqrt()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignLook {
    pub calendar_time: f64,
    pub events_control: f64,
    pub events_experimental: f64,
    pub events_total: f64,
    pub information: f64,
    pub drift: f64,
    pub cum_alpha: f64,
    pub critical: f64,
    /// Probability of the first rejection happening at this look under the alternative.
    pub stop_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEvaluation {
    pub looks: Vec<DesignLook>,
    pub max_info: f64,
    pub power: f64,
    pub expected_duration: f64,
    pub type_one_error: f64,
}

impl DesignScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_arm == 0 {
            return Err(Error::Input("n_per_arm must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Input(format!("alpha {} must lie in (0, 0.5)", self.alpha)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Input("integration step must be positive".into()));
        }
        self.scheme.validate()?;
        let vals = self.schedule.values();
        if vals.is_empty() {
            return Err(Error::Input("schedule needs at least one analysis".into()));
        }
        let mut prev = 0.0;
        for &v in vals {
            if !(v.is_finite() && v > prev) {
                return Err(Error::Input(
                    "analysis schedule must be positive and strictly increasing".into(),
                ));
            }
            prev = v;
        }
        match &self.spending {
            DesignSpending::Hsd { gamma } if *gamma == 0.0 || !gamma.is_finite() => {
                return Err(Error::Input("HSD gamma must be non-zero".into()));
            }
            DesignSpending::Fixed { cum_alphas } => {
                if cum_alphas.len() != vals.len() {
                    return Err(Error::Input("one cumulative alpha per analysis is required".into()));
                }
                if cum_alphas.windows(2).any(|w| w[1] < w[0])
                    || cum_alphas.first().is_some_and(|a| !(*a > 0.0))
                    || (cum_alphas[cum_alphas.len() - 1] - self.alpha).abs() > 1e-12
                {
                    return Err(Error::Input(
                        "cumulative alphas must be non-decreasing and end at alpha".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn with_n(&self, n_per_arm: u32) -> Self {
        Self {
            n_per_arm,
            ..self.clone()
        }
    }

    pub fn with_scheme(&self, scheme: WeightScheme) -> Self {
        Self {
            scheme,
            ..self.clone()
        }
    }

    fn pooled_survival(&self, s: f64) -> f64 {
        0.5 * (self.control.survival_at(s) + self.experimental.survival_at(s))
    }

    /// Expected events, information and score mean at calendar time `t`.
    pub fn snapshot(&self, t: f64) -> Result<Snapshot> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain(format!("calendar time {t} is negative")));
        }
        let n = self.n_per_arm as f64;
        let s_star = match self.scheme {
            WeightScheme::ModestWeight { t_star } => self.pooled_survival(t_star),
            _ => 1.0,
        };
        let cells = (t / self.step).ceil() as usize;
        let mut events = [0.0; 2];
        let mut information = 0.0;
        let mut mean_score = 0.0;
        if cells == 0 {
            return Ok(Snapshot {
                calendar_time: t,
                events,
                information,
                mean_score,
            });
        }
        let ds = t / cells as f64;
        let mut s0_prev = 1.0;
        let mut s1_prev = 1.0;
        for i in 0..cells {
            let a = ds * i as f64;
            let b = if i + 1 == cells { t } else { a + ds };
            let mid = 0.5 * (a + b);
            let g = self.recruitment.cdf(t - mid);
            let s0 = self.control.survival_at(b);
            let s1 = self.experimental.survival_at(b);
            let de0 = n * g * (s0_prev - s0);
            let de1 = n * g * (s1_prev - s1);
            s0_prev = s0;
            s1_prev = s1;
            events[0] += de0;
            events[1] += de1;
            if g == 0.0 {
                continue;
            }
            let sm0 = self.control.survival_at(mid);
            let sm1 = self.experimental.survival_at(mid);
            let w = self.scheme.weight(0.5 * (sm0 + sm1), s_star);
            let de = de0 + de1;
            information += w * w * de / 4.0;
            mean_score += match self.drift_method {
                DriftMethod::LogHazardRatio => {
                    let lhr = (self.experimental.hazard_at(mid) / self.control.hazard_at(mid)).ln();
                    w * lhr * de / 4.0
                }
                DriftMethod::ExactMean => {
                    let pi = sm1 / (sm0 + sm1);
                    w * (de1 - pi * de)
                }
            };
        }
        Ok(Snapshot {
            calendar_time: t,
            events,
            information,
            mean_score,
        })
    }

    /// Expected events per arm at calendar time `t`.
    pub fn expected_events(&self, t: f64) -> Result<[f64; 2]> {
        Ok(self.snapshot(t)?.events)
    }

    pub fn expected_information(&self, t: f64) -> Result<f64> {
        Ok(self.snapshot(t)?.information)
    }

    /// Expected z-statistic under the alternative at calendar time `t`.
    pub fn drift(&self, t: f64) -> Result<f64> {
        Ok(self.snapshot(t)?.drift())
    }

    fn total_events_only(&self, t: f64) -> f64 {
        let n = self.n_per_arm as f64;
        let cells = (t / self.step).ceil() as usize;
        if cells == 0 {
            return 0.0;
        }
        let ds = t / cells as f64;
        let mut total = 0.0;
        let mut s_prev = 2.0;
        for i in 0..cells {
            let a = ds * i as f64;
            let b = if i + 1 == cells { t } else { a + ds };
            let s = self.control.survival_at(b) + self.experimental.survival_at(b);
            total += n * self.recruitment.cdf(t - 0.5 * (a + b)) * (s_prev - s);
            s_prev = s;
        }
        total
    }

    /// Calendar time at which `d` events are expected, to 1e-6 months.
    pub fn events_to_calendar(&self, d: f64) -> Result<f64> {
        if d.is_nan() || d < 0.0 {
            return Err(Error::Domain(format!("event count {d} is negative")));
        }
        if d == 0.0 {
            return Ok(0.0);
        }
        if d >= 2.0 * self.n_per_arm as f64 {
            return Err(Error::Unattainable(format!(
                "{d} events cannot be reached with {} patients",
                2 * self.n_per_arm
            )));
        }
        let mut hi = self.recruitment.duration().max(1.0);
        while self.total_events_only(hi) < d {
            hi *= 2.0;
            if hi > 1e5 {
                return Err(Error::Unattainable(format!("{d} expected events never reached")));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-7 {
            let mid = 0.5 * (lo + hi);
            if self.total_events_only(mid) < d {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Calendar times of the planned analyses.
    pub fn calendar_times(&self) -> Result<Vec<f64>> {
        match &self.schedule {
            Schedule::CalendarTimes(t) => Ok(t.clone()),
            Schedule::EventCounts(d) => d.iter().map(|&d| self.events_to_calendar(d)).collect(),
        }
    }

    /// Snapshots at every planned analysis.
    pub fn snapshots(&self) -> Result<Vec<Snapshot>> {
        self.calendar_times()?
            .into_iter()
            .map(|t| self.snapshot(t))
            .collect()
    }

    /// Planned cumulative alpha at each look and the anticipated final information.
    pub fn planned_spending(&self, snaps: &[Snapshot]) -> Result<(Vec<f64>, f64)> {
        let k = snaps.len();
        let max_info = snaps[k - 1].information;
        let cum = match &self.spending {
            DesignSpending::Hsd { gamma } => snaps
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    if i + 1 == k {
                        Ok(self.alpha)
                    } else {
                        hsd_alpha(*gamma, s.information / max_info, self.alpha)
                    }
                })
                .collect::<Result<Vec<_>>>()?,
            DesignSpending::Fixed { cum_alphas } => cum_alphas.clone(),
        };
        Ok((cum, max_info))
    }

    /// Power, boundaries and expected duration of the design.
    pub fn evaluate(&self, integrator: &Integrator) -> Result<DesignEvaluation> {
        self.validate()?;
        let snaps = self.snapshots()?;
        for w in snaps.windows(2) {
            if !(w[1].information > w[0].information) {
                return Err(Error::Numerical(
                    "expected information does not increase between analyses".into(),
                ));
            }
        }
        if !(snaps[0].information > 0.0) {
            return Err(Error::Numerical("no information at the first analysis".into()));
        }
        let (cum, max_info) = self.planned_spending(&snaps)?;

        let mut criticals = Vec::with_capacity(snaps.len());
        let mut null_looks: Vec<Look> = Vec::with_capacity(snaps.len());
        let mut prev_cum = 0.0;
        for (s, &a) in snaps.iter().zip(&cum) {
            let c = if a <= prev_cum {
                f64::NEG_INFINITY
            } else {
                integrator.solve_critical(&null_looks, Look::null(s.information, 0.0), a)?
            };
            criticals.push(c);
            null_looks.push(Look::null(s.information, c));
            prev_cum = a;
        }

        let alt_looks: Vec<Look> = snaps
            .iter()
            .zip(&criticals)
            .map(|(s, &c)| Look {
                variance: s.information,
                mean: s.drift(),
                critical: c,
            })
            .collect();
        let cont = integrator.continuation_probs(&alt_looks)?;
        let cont_null = integrator.continuation_probs(&null_looks)?;

        let mut prev = 1.0;
        let mut expected_duration = 0.0;
        let mut looks = Vec::with_capacity(snaps.len());
        for (i, s) in snaps.iter().enumerate() {
            let stop = (prev - cont[i]).max(0.0);
            expected_duration += s.calendar_time * stop;
            prev = cont[i];
            looks.push(DesignLook {
                calendar_time: s.calendar_time,
                events_control: s.events[0],
                events_experimental: s.events[1],
                events_total: s.total_events(),
                information: s.information,
                drift: s.drift(),
                cum_alpha: cum[i],
                critical: criticals[i],
                stop_probability: stop,
            });
        }
        let k = snaps.len();
        expected_duration += snaps[k - 1].calendar_time * cont[k - 1];
        Ok(DesignEvaluation {
            looks,
            max_info,
            power: 1.0 - cont[k - 1],
            expected_duration,
            type_one_error: 1.0 - cont_null[k - 1],
        })
    }
}

/// Candidate sample sizes for [`sample_size_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub n_min: u32,
    pub n_max: u32,
    pub step: u32,
    /// Compare power after rounding to this many decimals (reporting precision).
    pub round_decimals: Option<u32>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            n_min: 5,
            n_max: 2000,
            step: 5,
            round_decimals: Some(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    pub n_per_arm: u32,
    pub power: f64,
}

/// Smallest `n` on the grid whose power reaches `target_power`.
pub fn sample_size_search(
    template: &DesignScenario,
    target_power: f64,
    grid: SearchGrid,
    integrator: &Integrator,
) -> Result<SampleSize> {
    if !(target_power > template.alpha && target_power < 1.0) {
        return Err(Error::Domain(format!(
            "target power {target_power} must lie in (alpha, 1)"
        )));
    }
    if grid.step == 0 || grid.n_min == 0 || grid.n_min > grid.n_max {
        return Err(Error::Input("invalid sample-size grid".into()));
    }
    let reported = |p: f64| match grid.round_decimals {
        Some(d) => {
            let f = 10f64.powi(d as i32);
            (p * f).round() / f
        }
        None => p,
    };
    let mut best = SampleSize {
        n_per_arm: grid.n_min,
        power: 0.0,
    };
    let mut n = grid.n_min;
    while n <= grid.n_max {
        let power = template.with_n(n).evaluate(integrator)?.power;
        if reported(power) >= target_power - 1e-12 {
            return Ok(SampleSize { n_per_arm: n, power });
        }
        if power > best.power {
            best = SampleSize { n_per_arm: n, power };
        }
        n += grid.step;
    }
    Err(Error::Unattainable(format!(
        "power {target_power} not reached for n <= {}; best power {:.4} at n = {}",
        grid.n_max, best.power, best.n_per_arm
    )))
}
