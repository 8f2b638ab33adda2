//! Weighted log-rank statistics.
//!
//! The score is `U = sum_j w_j (O_1j - E_1j)` over distinct event times, with
//! hypergeometric variance `V = sum_j w_j^2 n_0j n_1j O_j (n_j - O_j) / (n_j^2 (n_j - 1))`.
//! Benefit of the experimental arm shows up as `U < 0`.

use serde::{Deserialize, Serialize};

use crate::counting::{build_risk_table, km_pooled, KmCurve, Observation, RiskTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightScheme {
    LogRank,
    #[serde(rename = "fleming_harrington_0_1")]
    FlemingHarrington01,
    /// `w_j = 1 / max(S(t_j-), S(t*))` on the pooled Kaplan-Meier curve.
    ModestWeight { t_star: f64 },
}

impl WeightScheme {
    pub fn modest(t_star: f64) -> Result<Self> {
        if !(t_star.is_finite() && t_star >= 0.0) {
            return Err(Error::Domain(format!("t* = {t_star} must be non-negative")));
        }
        Ok(WeightScheme::ModestWeight { t_star })
    }

    pub fn validate(&self) -> Result<()> {
        if let WeightScheme::ModestWeight { t_star } = *self {
            Self::modest(t_star)?;
        }
        Ok(())
    }

    /// Weight as a function of the pooled survival just before the event
    /// time and the pooled survival at t*.
    #[inline]
    pub fn weight(&self, s_left: f64, s_star: f64) -> f64 {
        match self {
            WeightScheme::LogRank => 1.0,
            WeightScheme::FlemingHarrington01 => 1.0 - s_left,
            WeightScheme::ModestWeight { .. } => 1.0 / s_left.max(s_star),
        }
    }

    pub fn label(&self) -> String {
        match self {
            WeightScheme::LogRank => "log-rank".into(),
            WeightScheme::FlemingHarrington01 => "FH(0,1)".into(),
            WeightScheme::ModestWeight { t_star } => format!("MWLR(t*={t_star})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WlrResult {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub weights: Vec<f64>,
    pub n_events: u32,
}

/// Weights aligned with the rows of `table`; `km` must be the pooled curve of
/// the same data.
pub fn compute_weights(table: &RiskTable, km: &KmCurve, scheme: &WeightScheme) -> Vec<f64> {
    let s_star = match *scheme {
        WeightScheme::ModestWeight { t_star } => km.value_at(t_star),
        _ => 1.0,
    };
    debug_assert_eq!(km.steps.len(), table.rows.len());
    km.left_limits()
        .into_iter()
        .map(|left| scheme.weight(left, s_star))
        .collect()
}

/// Score, variance and standardised statistic for given weights.
pub fn weighted_logrank(table: &RiskTable, weights: &[f64]) -> Result<WlrResult> {
    if weights.len() != table.rows.len() {
        return Err(Error::Input(format!(
            "{} weights for {} risk-table rows",
            weights.len(),
            table.rows.len()
        )));
    }
    let (u, v) = score_and_variance(table, weights);
    if !(v > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    Ok(WlrResult {
        u,
        v,
        z: u / v.sqrt(),
        weights: weights.to_vec(),
        n_events: table.total_events(),
    })
}

pub(crate) fn score_and_variance(table: &RiskTable, weights: &[f64]) -> (f64, f64) {
    let mut u = 0.0;
    let mut v = 0.0;
    for (row, &w) in table.rows.iter().zip(weights) {
        let n = row.n() as f64;
        let o = row.o() as f64;
        let n0 = row.at_risk[0] as f64;
        let n1 = row.at_risk[1] as f64;
        u += w * (row.events[1] as f64 - o * n1 / n);
        if row.n() > 1 {
            v += w * w * n0 * n1 * o * (n - o) / (n * n * (n - 1.0));
        }
    }
    (u, v)
}

/// Risk table, pooled KM, weights and statistic in one pass.
pub fn test_statistic(obs: &[Observation], scheme: &WeightScheme) -> Result<WlrResult> {
    let table = build_risk_table(obs)?;
    let km = km_pooled(&table);
    let w = compute_weights(&table, &km, scheme);
    weighted_logrank(&table, &w)
}
