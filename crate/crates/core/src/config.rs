//! JSON configuration files: single designs, design sets and simulation grids.
//!
//! Unknown keys are rejected everywhere. Parse errors carry the field path
//! and the line and column of the offending token.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::design::{DesignScenario, DesignSpending, DriftMethod, Schedule, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::gs::{GsDesign, SpendingRule, DEFAULT_INFO_CAPS};
use crate::sim::{SimCell, SimDesign, SimScenario, SpendingApproach};
use crate::survival::{PiecewiseExponential, PowerRecruitment};
use crate::wlrt::WeightScheme;

/// Hazard model of one arm, by rates or by per-piece medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    #[serde(default)]
    pub change_points: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medians: Option<Vec<f64>>,
}

impl ArmConfig {
    pub fn model(&self, field: &str) -> Result<PiecewiseExponential> {
        let r = match (&self.rates, &self.medians) {
            (Some(r), None) => PiecewiseExponential::new(self.change_points.clone(), r.clone()),
            (None, Some(m)) => PiecewiseExponential::from_medians(self.change_points.clone(), m),
            _ => {
                return Err(Error::Input(format!(
                    "{field}: give exactly one of `rates` or `medians`"
                )))
            }
        };
        r.map_err(|e| Error::Input(format!("{field}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmsConfig {
    pub control: ArmConfig,
    pub experimental: ArmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_counts: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calendar_times: Option<Vec<f64>>,
}

impl ScheduleConfig {
    pub fn schedule(&self) -> Result<Schedule> {
        match (&self.event_counts, &self.calendar_times) {
            (Some(d), None) => Ok(Schedule::EventCounts(d.clone())),
            (None, Some(t)) => Ok(Schedule::CalendarTimes(t.clone())),
            _ => Err(Error::Input(
                "schedule: give exactly one of `event_counts` or `calendar_times`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpendingKind {
    Hsd,
    Fixed,
}

/// `hsd` needs `gamma`; `max_info` defaults to the design's anticipated
/// final information. `fixed` takes `cum_alphas`, or `gamma` to plan them
/// from the design assumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpendingConfig {
    pub kind: SpendingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_info: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cum_alphas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub milestone_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmst_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub arms: ArmsConfig,
    pub recruitment: PowerRecruitment,
    pub test: WeightScheme,
    pub schedule: ScheduleConfig,
    pub spending: SpendingConfig,
    pub alpha: f64,
    pub n_per_arm: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub futility_z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info_caps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<SummaryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_method: Option<DriftMethod>,
}

impl DesignConfig {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.test.label())
    }

    fn design_spending(&self) -> Result<DesignSpending> {
        let s = &self.spending;
        match (s.kind, s.gamma, &s.cum_alphas) {
            (SpendingKind::Hsd, Some(gamma), None) => Ok(DesignSpending::Hsd { gamma }),
            (SpendingKind::Hsd, _, _) => Err(Error::Input(
                "spending: `hsd` needs `gamma` and no `cum_alphas`".into(),
            )),
            (SpendingKind::Fixed, None, Some(c)) => Ok(DesignSpending::Fixed { cum_alphas: c.clone() }),
            (SpendingKind::Fixed, Some(gamma), None) => Ok(DesignSpending::Hsd { gamma }),
            (SpendingKind::Fixed, _, _) => Err(Error::Input(
                "spending: `fixed` needs exactly one of `cum_alphas` or `gamma`".into(),
            )),
        }
    }

    /// The design-stage scenario described by this file.
    pub fn scenario(&self) -> Result<DesignScenario> {
        if self.spending.kind == SpendingKind::Fixed && self.spending.max_info.is_some() {
            return Err(Error::Input("spending: `max_info` applies to `hsd` only".into()));
        }
        let s = DesignScenario {
            control: self.arms.control.model("arms.control")?,
            experimental: self.arms.experimental.model("arms.experimental")?,
            n_per_arm: self.n_per_arm,
            recruitment: self.recruitment,
            scheme: self.test,
            schedule: self.schedule.schedule()?,
            spending: self.design_spending()?,
            alpha: self.alpha,
            step: self.step.unwrap_or(DEFAULT_STEP),
            drift_method: self.drift_method.unwrap_or_default(),
        };
        s.validate().map_err(|e| Error::Input(format!("design: {e}")))?;
        if let Some(f) = self.futility_z {
            if !f.is_finite() {
                return Err(Error::Input("futility_z must be finite".into()));
            }
        }
        Ok(s)
    }

    /// Monitoring rule for analysing accruing data.
    pub fn gs_design(&self) -> Result<GsDesign> {
        let scenario = self.scenario()?;
        let k = scenario.schedule.len();
        let spending = match (self.spending.kind, &self.spending.cum_alphas) {
            (SpendingKind::Fixed, Some(c)) => SpendingRule::Fixed {
                cum_alphas: c.clone(),
                max_info: None,
            },
            _ => {
                let snaps = scenario.snapshots()?;
                let (planned, anticipated) = scenario.planned_spending(&snaps)?;
                match self.spending.kind {
                    SpendingKind::Hsd => SpendingRule::Hsd {
                        gamma: self.spending.gamma.expect("checked by scenario()"),
                        max_info: self.spending.max_info.unwrap_or(anticipated),
                    },
                    SpendingKind::Fixed => SpendingRule::Fixed {
                        cum_alphas: planned,
                        max_info: None,
                    },
                }
            }
        };
        let caps = self.info_caps.clone().unwrap_or_else(|| DEFAULT_INFO_CAPS.to_vec());
        GsDesign::new(self.alpha, spending, k)
            .and_then(|g| g.with_info_caps(caps))
            .map_err(|e| Error::Input(format!("spending: {e}")))
    }

    pub fn summary(&self) -> SummaryConfig {
        self.summary.clone().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignSet {
    designs: Vec<DesignConfig>,
}

/// A labelled recruitment law for a simulation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecruitmentCase {
    pub label: String,
    pub duration: f64,
    #[serde(default = "one")]
    pub exponent: f64,
}

fn one() -> f64 {
    1.0
}

/// A labelled true survival scenario for a simulation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectCase {
    pub effect: String,
    pub control_median: f64,
    pub control: ArmConfig,
    pub experimental: ArmConfig,
}

/// Cross product of recruitments, effects, `t*` values and spending approaches
/// around one fixed design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimGridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub design: DesignConfig,
    pub t_stars: Vec<f64>,
    pub spending: Vec<SpendingApproach>,
    pub recruitments: Vec<RecruitmentCase>,
    pub scenarios: Vec<EffectCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SimGridConfig {
    /// Expands the grid. Cells are ordered recruitment, effect, control
    /// median, `t*`, spending; every cell uses the same seed.
    pub fn cells(&self, replicates: usize, seed: u64) -> Result<Vec<SimCell>> {
        if self.t_stars.is_empty() || self.spending.is_empty() || self.recruitments.is_empty() || self.scenarios.is_empty() {
            return Err(Error::Input(
                "grid: t_stars, spending, recruitments and scenarios must be non-empty".into(),
            ));
        }
        let base = self.design.scenario()?;
        let mut designs = Vec::new();
        for &t in &self.t_stars {
            let scheme = WeightScheme::modest(t).map_err(|e| Error::Input(format!("t_stars: {e}")))?;
            let with = base.with_scheme(scheme);
            for &approach in &self.spending {
                let mut d = SimDesign::from_design(&with, approach)?;
                d.futility_z = self.design.futility_z;
                if let Some(caps) = &self.design.info_caps {
                    d.gs = d.gs.with_info_caps(caps.clone())?;
                }
                designs.push((t, approach, d));
            }
        }
        let mut cells = Vec::new();
        for (i, r) in self.recruitments.iter().enumerate() {
            let recruitment = PowerRecruitment::new(r.duration, r.exponent)
                .map_err(|e| Error::Input(format!("recruitments[{i}]: {e}")))?;
            for (j, s) in self.scenarios.iter().enumerate() {
                let control = s.control.model(&format!("scenarios[{j}].control"))?;
                let experimental = s.experimental.model(&format!("scenarios[{j}].experimental"))?;
                for (t, approach, d) in &designs {
                    cells.push(SimCell {
                        recruitment: r.label.clone(),
                        effect: s.effect.clone(),
                        control_median: s.control_median,
                        t_star: *t,
                        spending: *approach,
                        scenario: SimScenario {
                            design: d.clone(),
                            truth_control: control.clone(),
                            truth_experimental: experimental.clone(),
                            truth_recruitment: recruitment,
                            n_replicates: replicates,
                            seed,
                        },
                    });
                }
            }
        }
        Ok(cells)
    }
}

fn parse<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Input(format!("{origin}: field `{path}`: {}", e.inner()))
    })
}

/// Parses one design, or every entry of `{"designs": [...]}`.
pub fn parse_designs(text: &str, origin: &str) -> Result<Vec<DesignConfig>> {
    let probe: serde_json::Value = parse(text, origin)?;
    let configs = if probe.get("designs").is_some() {
        parse::<DesignSet>(text, origin)?.designs
    } else {
        vec![parse::<DesignConfig>(text, origin)?]
    };
    if configs.is_empty() {
        return Err(Error::Input(format!("{origin}: no designs")));
    }
    for (i, c) in configs.iter().enumerate() {
        c.scenario()
            .map_err(|e| Error::Input(format!("{origin}: designs[{i}]: {e}")))?;
    }
    Ok(configs)
}

pub fn parse_sim_grid(text: &str, origin: &str) -> Result<SimGridConfig> {
    let g: SimGridConfig = parse(text, origin)?;
    g.design
        .scenario()
        .map_err(|e| Error::Input(format!("{origin}: design: {e}")))?;
    Ok(g)
}

pub fn read_designs(path: &Path) -> Result<Vec<DesignConfig>> {
    parse_designs(&std::fs::read_to_string(path)?, &path.display().to_string())
}

pub fn read_sim_grid(path: &Path) -> Result<SimGridConfig> {
    parse_sim_grid(&std::fs::read_to_string(path)?, &path.display().to_string())
}
