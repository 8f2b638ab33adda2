//! Monte-Carlo operating characteristics of event-triggered group-sequential
//! weighted log-rank designs under possibly misspecified truths.
//!
//! Every replicate draws from its own ChaCha8 stream selected by
//! `(seed, replicate_index)`, so a summary does not depend on how replicates
//! are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{apply_cutoff_into, event_calendar_times, tabulate, km_pooled, Observation, SubjectRecord};
use crate::design::{DesignScenario, DesignSpending, Schedule};
use crate::error::{Error, Result};
use crate::gs::{futility_check, Decision, FutilityDecision, GsDesign, GsState, Integrator, SpendingRule};
use crate::survival::{Arm, PiecewiseExponential, PowerRecruitment};
use crate::wlrt::{compute_weights, score_and_variance, WeightScheme};


/// The pre-specified, fixed design that every replicate follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub n_per_arm: u32,
    pub scheme: WeightScheme,
    /// Events that trigger each analysis.
    pub event_counts: Vec<usize>,
    pub gs: GsDesign,
    pub futility_z: Option<f64>,
}

/// Which spending approach a simulated design monitors with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpendingApproach {
    /// HSD on the observed information fraction `v_k / max_info`.
    Information,
    /// Cumulative spend fixed at the design's planned values.
    Fixed,
}

impl SimDesign {
    /// Freezes a design: event triggers, anticipated final information and
    /// planned cumulative alphas all come from the design assumptions.
    pub fn from_design(design: &DesignScenario, approach: SpendingApproach) -> Result<Self> {
        design.validate()?;
        let snaps = design.snapshots()?;
        let event_counts = match &design.schedule {
            Schedule::EventCounts(d) => d.iter().map(|&x| x.round() as usize).collect(),
            Schedule::CalendarTimes(_) => snaps.iter().map(|s| s.total_events().round() as usize).collect(),
        };
        let (planned, max_info) = design.planned_spending(&snaps)?;
        let spending = match (approach, &design.spending) {
            (SpendingApproach::Information, DesignSpending::Hsd { gamma }) => SpendingRule::Hsd {
                gamma: *gamma,
                max_info,
            },
            (SpendingApproach::Information, DesignSpending::Fixed { .. }) => {
                return Err(Error::Input(
                    "information-based spending needs an HSD design spending rule".into(),
                ))
            }
            (SpendingApproach::Fixed, _) => SpendingRule::Fixed {
                cum_alphas: planned,
                max_info: None,
            },
        };
        Ok(Self {
            n_per_arm: design.n_per_arm,
            scheme: design.scheme,
            event_counts,
            gs: GsDesign::new(design.alpha, spending, snaps.len())?,
            futility_z: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.gs.validate()?;
        self.scheme.validate()?;
        if self.n_per_arm == 0 {
            return Err(Error::Input("n_per_arm must be at least 1".into()));
        }
        if self.event_counts.len() != self.gs.max_analyses {
            return Err(Error::Input(format!(
                "{} event triggers for {} analyses",
                self.event_counts.len(),
                self.gs.max_analyses
            )));
        }
        if self.event_counts.first() == Some(&0) || self.event_counts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("event triggers must be positive and strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub design: SimDesign,
    pub truth_control: PiecewiseExponential,
    pub truth_experimental: PiecewiseExponential,
    pub truth_recruitment: PowerRecruitment,
    pub n_replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookOutcome {
    pub analysis: usize,
    pub cutoff: f64,
    pub events: usize,
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub cum_alpha: f64,
    pub critical: f64,
    pub decision: Option<Decision>,
    /// Fewer events than the trigger ever occurred.
    pub insufficient_events: bool,
    /// Zero variance; no test was performed at this look.
    pub degenerate: bool,
    pub futility_stop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub looks: Vec<LookOutcome>,
    pub rejected: bool,
    /// Calendar time at which the trial ended.
    pub duration: f64,
}

impl Trajectory {
    pub fn stop_analysis(&self) -> usize {
        self.looks.len()
    }
}

fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Draws the full cohort of one replicate: control patients first.
pub fn draw_cohort(scenario: &SimScenario, replicate: u64) -> Vec<SubjectRecord> {
    let mut rng = replicate_rng(scenario.seed, replicate);
    let n = scenario.design.n_per_arm as usize;
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..2 * n {
        let (arm, dist) = if i < n {
            (Arm::Control, &scenario.truth_control)
        } else {
            (Arm::Experimental, &scenario.truth_experimental)
        };
        let arrival = scenario.truth_recruitment.quantile_unchecked(rng.random::<f64>());
        let u = 1.0 - rng.random::<f64>();
        out.push(SubjectRecord {
            arrival,
            event_time: dist.quantile_unchecked(u),
            observed_event: true,
            arm,
        });
    }
    out
}

/// Runs one replicate of the event-triggered procedure.
pub fn simulate_trial(scenario: &SimScenario, replicate: u64, integrator: &Integrator) -> Result<Trajectory> {
    let design = &scenario.design;
    let cohort = draw_cohort(scenario, replicate);
    let event_times = event_calendar_times(&cohort);
    let mut state = GsState::new(design.gs.clone())?;
    let mut obs: Vec<Observation> = Vec::with_capacity(cohort.len());
    let mut looks = Vec::with_capacity(design.event_counts.len());
    let k_max = design.event_counts.len();

    for (i, &d) in design.event_counts.iter().enumerate() {
        let is_final = i + 1 == k_max;
        let insufficient = event_times.len() < d;
        let Some(&cutoff) = event_times.get(d.min(event_times.len()).wrapping_sub(1)) else {
            // no events at all
            looks.push(degenerate_look(i + 1, 0.0, 0, insufficient));
            if is_final {
                break;
            }
            continue;
        };
        apply_cutoff_into(&cohort, cutoff, &mut obs);
        let table = tabulate(&mut obs);
        let events = table.total_events() as usize;
        let km = km_pooled(&table);
        let w = compute_weights(&table, &km, &design.scheme);
        let (u, v) = score_and_variance(&table, &w);
        if !(v > 0.0) {
            looks.push(degenerate_look(i + 1, cutoff, events, insufficient));
            continue;
        }
        let z = u / v.sqrt();
        state = state.step(v, z, is_final, integrator)?;
        let rec = state.last().expect("step records a look");
        let mut futility_stop = false;
        if rec.decision == Decision::Continue
            && futility_check(z, design.futility_z) == FutilityDecision::StopForFutility
        {
            futility_stop = true;
        }
        looks.push(LookOutcome {
            analysis: i + 1,
            cutoff,
            events,
            u,
            v,
            z,
            cum_alpha: rec.cum_alpha,
            critical: rec.critical,
            decision: Some(rec.decision),
            insufficient_events: insufficient,
            degenerate: false,
            futility_stop,
        });
        if rec.decision.is_terminal() || futility_stop {
            break;
        }
    }
    let rejected = looks.last().is_some_and(|l| l.decision == Some(Decision::Reject));
    let duration = looks.last().map_or(0.0, |l| l.cutoff);
    Ok(Trajectory {
        looks,
        rejected,
        duration,
    })
}

fn degenerate_look(analysis: usize, cutoff: f64, events: usize, insufficient: bool) -> LookOutcome {
    LookOutcome {
        analysis,
        cutoff,
        events,
        u: 0.0,
        v: 0.0,
        z: f64::NAN,
        cum_alpha: f64::NAN,
        critical: f64::NAN,
        decision: None,
        insufficient_events: insufficient,
        degenerate: true,
        futility_stop: false,
    }
}

/// Aggregated operating characteristics of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub n_replicates: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    /// `sqrt(p (1 - p) / n)`; absent for fewer than two replicates.
    pub mc_se: Option<f64>,
    /// Fraction of trials ending at each analysis (sums to one).
    pub stop_fraction: Vec<f64>,
    /// Fraction rejecting at each analysis.
    pub reject_fraction: Vec<f64>,
    pub mean_duration: f64,
    /// Mean events among trials reaching each analysis.
    pub mean_events: Vec<f64>,
    /// Mean observed variance among trials reaching each analysis.
    pub mean_variance: Vec<f64>,
    pub insufficient_event_rate: f64,
    pub degenerate_rate: f64,
    pub futility_rate: f64,
}

impl SimSummary {
    /// Aggregates trajectories in replicate order.
    pub fn from_trajectories(trajectories: &[Trajectory], k: usize) -> Self {
        let n = trajectories.len();
        let nf = n as f64;
        let mut stops = vec![0usize; k];
        let mut rejects = vec![0usize; k];
        let mut reached = vec![0usize; k];
        let mut ev_sum = vec![0.0; k];
        let mut v_sum = vec![0.0; k];
        let mut duration = 0.0;
        let (mut insufficient, mut degenerate, mut futility) = (0usize, 0usize, 0usize);
        for t in trajectories {
            let last = t.stop_analysis().max(1) - 1;
            stops[last] += 1;
            if t.rejected {
                rejects[last] += 1;
            }
            duration += t.duration;
            if t.looks.iter().any(|l| l.insufficient_events) {
                insufficient += 1;
            }
            if t.looks.iter().any(|l| l.degenerate) {
                degenerate += 1;
            }
            if t.looks.iter().any(|l| l.futility_stop) {
                futility += 1;
            }
            for l in &t.looks {
                reached[l.analysis - 1] += 1;
                ev_sum[l.analysis - 1] += l.events as f64;
                v_sum[l.analysis - 1] += l.v;
            }
        }
        let rejections: usize = rejects.iter().sum();
        let p = rejections as f64 / nf;
        let mean = |s: &[f64]| {
            s.iter()
                .zip(&reached)
                .map(|(x, &r)| if r > 0 { x / r as f64 } else { f64::NAN })
                .collect::<Vec<_>>()
        };
        Self {
            n_replicates: n,
            rejections,
            rejection_rate: p,
            mc_se: (n >= 2).then(|| (p * (1.0 - p) / nf).sqrt()),
            stop_fraction: stops.iter().map(|&s| s as f64 / nf).collect(),
            reject_fraction: rejects.iter().map(|&s| s as f64 / nf).collect(),
            mean_duration: duration / nf,
            mean_events: mean(&ev_sum),
            mean_variance: mean(&v_sum),
            insufficient_event_rate: insufficient as f64 / nf,
            degenerate_rate: degenerate as f64 / nf,
            futility_rate: futility as f64 / nf,
        }
    }
}

/// All trajectories of a scenario, in replicate order.
pub fn run_trajectories(scenario: &SimScenario, integrator: &Integrator) -> Result<Vec<Trajectory>> {
    scenario.design.validate()?;
    if scenario.n_replicates == 0 {
        return Err(Error::Input("at least one replicate is required".into()));
    }
    (0..scenario.n_replicates as u64)
        .into_par_iter()
        .map(|r| simulate_trial(scenario, r, integrator))
        .collect()
}

pub fn run_scenario(scenario: &SimScenario, integrator: &Integrator) -> Result<SimSummary> {
    let t = run_trajectories(scenario, integrator)?;
    Ok(SimSummary::from_trajectories(&t, scenario.design.event_counts.len()))
}

/// One cell of a simulation grid with its layout labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCell {
    pub recruitment: String,
    pub effect: String,
    pub control_median: f64,
    pub t_star: f64,
    pub spending: SpendingApproach,
    pub scenario: SimScenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCellResult {
    pub recruitment: String,
    pub effect: String,
    pub control_median: f64,
    pub t_star: f64,
    pub spending: SpendingApproach,
    pub summary: SimSummary,
}

/// Runs every cell; replicates within a cell run in parallel.
pub fn run_grid(cells: &[SimCell], integrator: &Integrator) -> Result<Vec<SimCellResult>> {
    if cells.is_empty() {
        return Err(Error::Input("simulation grid has no cells".into()));
    }
    cells
        .iter()
        .map(|c| {
            Ok(SimCellResult {
                recruitment: c.recruitment.clone(),
                effect: c.effect.clone(),
                control_median: c.control_median,
                t_star: c.t_star,
                spending: c.spending,
                summary: run_scenario(&c.scenario, integrator)?,
            })
        })
        .collect()
}

/// Writes grid results as CSV, one row per cell.
pub fn write_grid_csv<W: std::io::Write>(results: &[SimCellResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let k = results.first().map_or(0, |r| r.summary.stop_fraction.len());
    let mut header: Vec<String> = [
        "recruitment",
        "effect",
        "control_median",
        "t_star",
        "spending",
        "replicates",
        "power",
        "mc_se",
        "mean_duration",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 1..=k {
        header.push(format!("stop_fraction_{i}"));
    }
    for i in 1..=k {
        header.push(format!("mean_events_{i}"));
    }
    header.push("insufficient_event_rate".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in results {
        let s = &r.summary;
        let mut row = vec![
            r.recruitment.clone(),
            r.effect.clone(),
            r.control_median.to_string(),
            r.t_star.to_string(),
            match r.spending {
                SpendingApproach::Information => "information".into(),
                SpendingApproach::Fixed => "fixed".into(),
            },
            s.n_replicates.to_string(),
            format!("{:.4}", s.rejection_rate),
            s.mc_se.map_or_else(|| "n/a".into(), |x| format!("{x:.4}")),
            format!("{:.3}", s.mean_duration),
        ];
        row.extend(s.stop_fraction.iter().map(|x| format!("{x:.4}")));
        row.extend(s.mean_events.iter().map(|x| format!("{x:.2}")));
        row.push(format!("{:.4}", s.insufficient_event_rate));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Input(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gs::DEFAULT_INFO_CAPS;

    fn scenario(n: u32, reps: usize) -> SimScenario {
        let control = PiecewiseExponential::from_median(8.0).unwrap();
        SimScenario {
            design: SimDesign {
                n_per_arm: n,
                scheme: WeightScheme::ModestWeight { t_star: 6.0 },
                event_counts: vec![122, 170, 203],
                gs: GsDesign::new(
                    0.025,
                    SpendingRule::Hsd {
                        gamma: -4.0,
                        max_info: 103.4,
                    },
                    3,
                )
                .unwrap()
                .with_info_caps(DEFAULT_INFO_CAPS.to_vec())
                .unwrap(),
                futility_z: None,
            },
            truth_control: control.clone(),
            truth_experimental: control,
            truth_recruitment: PowerRecruitment::uniform(8.0).unwrap(),
            n_replicates: reps,
            seed: 42,
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let s = scenario(150, 1);
        let i = Integrator::coarse();
        let a = simulate_trial(&s, 7, &i).unwrap();
        let b = simulate_trial(&s, 7, &i).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let c = simulate_trial(&s, 8, &i).unwrap();
        assert_ne!(format!("{a:?}"), format!("{c:?}"));
    }

    #[test]
    fn tiny_trial_is_flagged_not_fatal() {
        let s = scenario(2, 20);
        let i = Integrator::coarse();
        let sum = run_scenario(&s, &i).unwrap();
        assert_eq!(sum.n_replicates, 20);
        assert_eq!(sum.insufficient_event_rate, 1.0);
        assert!((sum.stop_fraction.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn event_triggers_are_respected() {
        let s = scenario(150, 1);
        let t = simulate_trial(&s, 3, &Integrator::coarse()).unwrap();
        for (l, &d) in t.looks.iter().zip(&s.design.event_counts) {
            assert_eq!(l.events, d);
        }
    }

    #[test]
    fn single_replicate_has_no_standard_error() {
        let s = scenario(150, 1);
        let sum = run_scenario(&s, &Integrator::coarse()).unwrap();
        assert!(sum.mc_se.is_none());
    }

    #[test]
    fn futility_stops_early() {
        let mut s = scenario(150, 50);
        s.design.futility_z = Some(-10.0);
        let sum = run_scenario(&s, &Integrator::coarse()).unwrap();
        assert_eq!(sum.stop_fraction[0], 1.0);
        assert_eq!(sum.futility_rate, 1.0);
    }
}
