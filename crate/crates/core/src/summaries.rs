//! Point summaries of a finished trial: milestone survival, median and
//! restricted mean survival time from Kaplan-Meier curves.

use serde::{Deserialize, Serialize};

use crate::counting::{km_per_arm, KmCurve, Observation};
use crate::error::{Error, Result};
use crate::wlrt::WlrResult;

fn check_tau(km: &KmCurve, tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Domain(format!("tau = {tau} must be non-negative")));
    }
    if tau > km.max_time {
        return Err(Error::BeyondFollowUp {
            tau,
            last: km.max_time,
        });
    }
    Ok(())
}

/// `S(tau)`; fails if `tau` lies past the last follow-up time.
pub fn milestone(km: &KmCurve, tau: f64) -> Result<f64> {
    check_tau(km, tau)?;
    Ok(km.value_at(tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "time", rename_all = "snake_case")]
pub enum Median {
    Reached(f64),
    NotReached,
}

/// First time the curve drops to 0.5 or below.
pub fn km_median(km: &KmCurve) -> Median {
    km.steps
        .iter()
        .find(|s| s.survival <= 0.5)
        .map_or(Median::NotReached, |s| Median::Reached(s.time))
}

/// Area under the step function on `[0, tau]`.
pub fn rmst(km: &KmCurve, tau: f64) -> Result<f64> {
    check_tau(km, tau)?;
    let mut area = 0.0;
    let mut t = 0.0;
    let mut s = 1.0;
    for step in km.steps.iter().take_while(|st| st.time <= tau) {
        area += s * (step.time - t);
        t = step.time;
        s = step.survival;
    }
    Ok(area + s * (tau - t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub milestone: Option<f64>,
    pub median: Median,
    pub rmst: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub milestone_time: Option<f64>,
    pub rmst_tau: Option<f64>,
    pub control: ArmSummary,
    pub experimental: ArmSummary,
    /// Experimental minus control.
    pub milestone_difference: Option<f64>,
    pub rmst_difference: Option<f64>,
    pub statistic: Option<WlrResult>,
    pub stagewise_p: Option<f64>,
}

impl SummaryReport {
    pub fn new(obs: &[Observation], milestone_time: Option<f64>, rmst_tau: Option<f64>) -> Result<Self> {
        let [c, e] = km_per_arm(obs)?;
        let arm = |km: &KmCurve| -> Result<ArmSummary> {
            Ok(ArmSummary {
                milestone: milestone_time.map(|t| milestone(km, t)).transpose()?,
                median: km_median(km),
                rmst: rmst_tau.map(|t| rmst(km, t)).transpose()?,
            })
        };
        let control = arm(&c)?;
        let experimental = arm(&e)?;
        let diff = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(x, y)| x - y);
        Ok(Self {
            milestone_time,
            rmst_tau,
            milestone_difference: diff(experimental.milestone, control.milestone),
            rmst_difference: diff(experimental.rmst, control.rmst),
            control,
            experimental,
            statistic: None,
            stagewise_p: None,
        })
    }
}
