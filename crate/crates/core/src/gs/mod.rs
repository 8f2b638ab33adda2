//! Group-sequential monitoring of a one-sided weighted log-rank test.
//!
//! Benefit is `Z << 0`: the trial rejects at look `k` when `Z_k < c_k`, and
//! critical values are reported on the negative z-scale.

mod integrator;

pub use integrator::{Integrator, Look};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Default information caps: stop with all alpha spent if the information
/// fraction already exceeds 0.95 at look 1 or 0.975 at look 2.
pub const DEFAULT_INFO_CAPS: [f64; 2] = [0.95, 0.975];

/// Hwang-Shih-DeCani cumulative alpha spend at information fraction `t`.
pub fn hsd_alpha(gamma: f64, info_frac: f64, alpha: f64) -> Result<f64> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::Domain(format!("HSD gamma must be finite and non-zero, got {gamma}")));
    }
    if info_frac.is_nan() || info_frac < 0.0 {
        return Err(Error::Domain(format!("information fraction {info_frac} is negative")));
    }
    if info_frac >= 1.0 {
        return Ok(alpha);
    }
    let frac = (-(-gamma * info_frac).exp_m1()) / (-(-gamma).exp_m1());
    Ok(alpha * frac.min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpendingRule {
    /// Information-based spending with fraction `v_k / max_info`.
    Hsd { gamma: f64, max_info: f64 },
    /// Pre-specified cumulative spend; the last entry equals alpha.
    /// `max_info`, when given, enables the information-cap rule.
    Fixed {
        cum_alphas: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_info: Option<f64>,
    },
}

impl SpendingRule {
    pub fn max_info(&self) -> Option<f64> {
        match self {
            SpendingRule::Hsd { max_info, .. } => Some(*max_info),
            SpendingRule::Fixed { max_info, .. } => *max_info,
        }
    }
}

/// Static configuration of a group-sequential test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GsDesign {
    pub alpha: f64,
    pub spending: SpendingRule,
    pub max_analyses: usize,
    #[serde(default = "default_caps")]
    pub info_caps: Vec<f64>,
}

fn default_caps() -> Vec<f64> {
    DEFAULT_INFO_CAPS.to_vec()
}

impl GsDesign {
    pub fn new(alpha: f64, spending: SpendingRule, max_analyses: usize) -> Result<Self> {
        let d = Self {
            alpha,
            spending,
            max_analyses,
            info_caps: default_caps(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_info_caps(mut self, caps: Vec<f64>) -> Result<Self> {
        self.info_caps = caps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Input(format!("alpha {} must lie in (0, 0.5)", self.alpha)));
        }
        if self.max_analyses == 0 {
            return Err(Error::Input("at least one analysis is required".into()));
        }
        if self.info_caps.iter().any(|c| !(*c > 0.0 && *c <= 1.0)) {
            return Err(Error::Input("information caps must lie in (0, 1]".into()));
        }
        match &self.spending {
            SpendingRule::Hsd { gamma, max_info } => {
                if *gamma == 0.0 || !gamma.is_finite() {
                    return Err(Error::Input(format!("HSD gamma must be non-zero, got {gamma}")));
                }
                check_max_info(*max_info)?;
            }
            SpendingRule::Fixed {
                cum_alphas,
                max_info,
            } => {
                if cum_alphas.len() != self.max_analyses {
                    return Err(Error::Input(format!(
                        "{} cumulative alphas for {} analyses",
                        cum_alphas.len(),
                        self.max_analyses
                    )));
                }
                let mut prev = 0.0;
                for &a in cum_alphas {
                    if !(a > 0.0) || a < prev {
                        return Err(Error::Input(
                            "cumulative alphas must be positive and non-decreasing".into(),
                        ));
                    }
                    prev = a;
                }
                if (prev - self.alpha).abs() > 1e-12 {
                    return Err(Error::Input(format!(
                        "last cumulative alpha {prev} differs from alpha {}",
                        self.alpha
                    )));
                }
                if let Some(m) = max_info {
                    check_max_info(*m)?;
                }
            }
        }
        Ok(())
    }

    /// Planned cumulative spend at look `k` (1-based) with information `v`,
    /// before the information-cap and final-look rules.
    pub fn planned_cum_alpha(&self, k: usize, v: f64) -> Result<f64> {
        match &self.spending {
            SpendingRule::Hsd { gamma, max_info } => hsd_alpha(*gamma, v / max_info, self.alpha),
            SpendingRule::Fixed { cum_alphas, .. } => cum_alphas
                .get(k - 1)
                .copied()
                .ok_or(Error::TooManyAnalyses {
                    requested: k,
                    max: cum_alphas.len(),
                }),
        }
    }
}

fn check_max_info(m: f64) -> Result<()> {
    if m.is_finite() && m > 0.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("max_info {m} must be positive")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Continue,
    Reject,
    /// Final analysis reached without rejection.
    StopAllAlphaSpent,
}

impl Decision {
    pub fn is_terminal(self) -> bool {
        !matches!(self, Decision::Continue)
    }
}

/// Audit record of one completed analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LookRecord {
    pub analysis: usize,
    pub variance: f64,
    /// Running maximum of the observed variances, used for the correlations.
    pub effective_variance: f64,
    pub z: f64,
    pub info_fraction: Option<f64>,
    pub cum_alpha: f64,
    /// `None` encodes a critical value of minus infinity.
    #[serde(with = "neg_inf_as_null")]
    pub critical: f64,
    pub decision: Decision,
    pub final_analysis: bool,
}

mod neg_inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

/// Accumulated analysis history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GsState {
    pub design: GsDesign,
    pub looks: Vec<LookRecord>,
}

impl GsState {
    pub fn new(design: GsDesign) -> Result<Self> {
        design.validate()?;
        Ok(Self {
            design,
            looks: Vec::new(),
        })
    }

    pub fn is_stopped(&self) -> bool {
        self.looks.last().is_some_and(|l| l.decision.is_terminal())
    }

    pub fn last(&self) -> Option<&LookRecord> {
        self.looks.last()
    }

    pub fn criticals(&self) -> Vec<f64> {
        self.looks.iter().map(|l| l.critical).collect()
    }

    fn integrator_looks(&self) -> Vec<Look> {
        self.looks
            .iter()
            .map(|l| Look::null(l.effective_variance, l.critical))
            .collect()
    }

    /// Records analysis `k = looks.len() + 1` with observed variance `v` and
    /// statistic `z`, returning the updated state.
    pub fn step(&self, v: f64, z: f64, is_final: bool, integrator: &Integrator) -> Result<GsState> {
        if let Some(l) = self.looks.last().filter(|l| l.decision.is_terminal()) {
            return Err(Error::TrialStopped(l.analysis));
        }
        let k = self.looks.len() + 1;
        let d = &self.design;
        if k > d.max_analyses {
            return Err(Error::TooManyAnalyses {
                requested: k,
                max: d.max_analyses,
            });
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("observed variance {v} must be positive")));
        }
        if !z.is_finite() {
            return Err(Error::Domain(format!("z-statistic {z} is not finite")));
        }

        let info_fraction = d.spending.max_info().map(|m| v / m);
        let capped = match (d.info_caps.get(k - 1), info_fraction) {
            (Some(cap), Some(f)) => f > *cap,
            _ => false,
        };
        let final_analysis = is_final || k == d.max_analyses || capped;

        let prev_cum = self.looks.last().map_or(0.0, |l| l.cum_alpha);
        let prev_eff = self.looks.last().map_or(0.0, |l| l.effective_variance);
        let decreasing = k > 1 && v <= prev_eff;
        let effective_variance = v.max(prev_eff);

        let cum_alpha = if final_analysis {
            d.alpha
        } else if decreasing {
            prev_cum
        } else {
            d.planned_cum_alpha(k, v)?.clamp(prev_cum, d.alpha)
        };

        let critical = if cum_alpha <= prev_cum || (decreasing && !final_analysis) {
            f64::NEG_INFINITY
        } else {
            integrator.solve_critical(
                &self.integrator_looks(),
                Look::null(effective_variance, 0.0),
                cum_alpha,
            )?
        };

        let decision = if z < critical {
            Decision::Reject
        } else if final_analysis {
            Decision::StopAllAlphaSpent
        } else {
            Decision::Continue
        };

        let mut next = self.clone();
        next.looks.push(LookRecord {
            analysis: k,
            variance: v,
            effective_variance,
            z,
            info_fraction,
            cum_alpha,
            critical,
            decision,
            final_analysis,
        });
        Ok(next)
    }

    /// Stage-wise ordering p-value of a stopped trial.
    pub fn stagewise_p(&self, integrator: &Integrator) -> Result<f64> {
        let last = self
            .looks
            .last()
            .filter(|l| l.decision.is_terminal())
            .ok_or_else(|| Error::State("trial has not stopped".into()))?;
        let m = self.looks.len();
        let criticals: Vec<f64> = self.looks[..m - 1].iter().map(|l| l.critical).collect();
        let variances: Vec<f64> = self.looks.iter().map(|l| l.effective_variance).collect();
        stagewise_p(&criticals, &variances, last.z, integrator)
    }

    /// Structural checks on a state read back from disk.
    pub fn validate(&self) -> Result<()> {
        self.design
            .validate()
            .map_err(|e| Error::State(format!("stored design is invalid: {e}")))?;
        if self.looks.len() > self.design.max_analyses {
            return Err(Error::State("more analyses than the design allows".into()));
        }
        let mut prev_cum = 0.0;
        let mut prev_eff = 0.0;
        for (i, l) in self.looks.iter().enumerate() {
            if l.analysis != i + 1 {
                return Err(Error::State(format!("analysis {} out of sequence", l.analysis)));
            }
            if !(l.variance > 0.0) || l.effective_variance < l.variance.max(prev_eff) {
                return Err(Error::State(format!("analysis {}: inconsistent variance", l.analysis)));
            }
            if l.cum_alpha < prev_cum || l.cum_alpha > self.design.alpha + 1e-15 {
                return Err(Error::State(format!(
                    "analysis {}: cumulative alpha {} decreases or exceeds alpha",
                    l.analysis, l.cum_alpha
                )));
            }
            if l.critical.is_nan() || l.critical > 0.0 {
                return Err(Error::State(format!("analysis {}: invalid critical value", l.analysis)));
            }
            if l.decision.is_terminal() && i + 1 != self.looks.len() {
                return Err(Error::State("analyses recorded after the trial stopped".into()));
            }
            prev_cum = l.cum_alpha;
            prev_eff = l.effective_variance;
        }
        Ok(())
    }
}

/// `1 - P(Z_l > c_l, l < m; Z_m > z_stop)` under the null with variances `variances[..m]`.
pub fn stagewise_p(criticals: &[f64], variances: &[f64], z_stop: f64, integrator: &Integrator) -> Result<f64> {
    if variances.len() != criticals.len() + 1 {
        return Err(Error::Input(format!(
            "{} variances for {} earlier criticals",
            variances.len(),
            criticals.len()
        )));
    }
    let looks: Vec<Look> = criticals
        .iter()
        .chain(std::iter::once(&z_stop))
        .zip(variances)
        .map(|(&c, &v)| Look::null(v, c))
        .collect();
    if looks.len() == 1 {
        return Ok(normal::cdf(z_stop));
    }
    let p = integrator.continuation_probs(&looks)?;
    Ok((1.0 - p[looks.len() - 1]).clamp(0.0, 1.0))
}

/// Critical value for the first look, `Phi^-1(cum_alpha)`.
pub fn first_boundary(cum_alpha: f64) -> Result<f64> {
    if !(cum_alpha > 0.0 && cum_alpha < 1.0) {
        return Err(Error::Domain(format!("cumulative alpha {cum_alpha} not in (0, 1)")));
    }
    Ok(normal::quantile(cum_alpha))
}

/// Critical value for look `k = prior_criticals.len() + 1`.
///
/// `variances` holds `v_1..v_k`; a non-increasing variance at the new look
/// is treated as perfect correlation with the previous look.
pub fn next_boundary(
    prior_criticals: &[f64],
    variances: &[f64],
    prev_cum_alpha: f64,
    cum_alpha: f64,
    integrator: &Integrator,
) -> Result<f64> {
    if variances.len() != prior_criticals.len() + 1 {
        return Err(Error::Input(format!(
            "{} variances for {} earlier criticals",
            variances.len(),
            prior_criticals.len()
        )));
    }
    if cum_alpha < prev_cum_alpha {
        return Err(Error::Domain("cumulative alpha must not decrease".into()));
    }
    if cum_alpha == prev_cum_alpha {
        return Ok(f64::NEG_INFINITY);
    }
    let mut eff = 0.0f64;
    let effective: Vec<f64> = variances
        .iter()
        .map(|&v| {
            eff = eff.max(v);
            eff
        })
        .collect();
    let prior: Vec<Look> = prior_criticals
        .iter()
        .zip(&effective)
        .map(|(&c, &v)| Look::null(v, c))
        .collect();
    integrator.solve_critical(&prior, Look::null(effective[effective.len() - 1], 0.0), cum_alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FutilityDecision {
    Continue,
    StopForFutility,
}

/// Non-binding z-scale futility rule: stop when `z` exceeds the bound.
pub fn futility_check(z: f64, futility_z: Option<f64>) -> FutilityDecision {
    match futility_z {
        Some(b) if z > b => FutilityDecision::StopForFutility,
        _ => FutilityDecision::Continue,
    }
}
