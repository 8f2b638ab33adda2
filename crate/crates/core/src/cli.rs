//! Command-line front end: `design`, `analyse`, `simulate` and `km`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{read_designs, read_sim_grid, DesignConfig};
use crate::counting::{km_arm, Observation};
use crate::design::{DesignEvaluation, DesignScenario};
use crate::error::{Error, Result};
use crate::gs::{futility_check, Decision, FutilityDecision, GsState, Integrator, LookRecord};
use crate::sim::{run_grid, write_grid_csv};
use crate::summaries::SummaryReport;
use crate::survival::Arm;
use crate::wlrt::{test_statistic, WlrResult};

#[derive(Debug, Parser)]
#[command(name = "wlrgs", version, about = "Group-sequential weighted log-rank designs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one or more designs (power, boundaries, duration).
    Design(DesignArgs),
    /// Analyse a data snapshot and advance the monitoring state.
    Analyse(AnalyseArgs),
    /// Run a Monte-Carlo grid.
    Simulate(SimulateArgs),
    /// Emit per-arm Kaplan-Meier step data.
    Km(KmArgs),
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Sweep the sample size per arm as `min:max:step`.
    #[arg(long)]
    pub n_grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnalyseArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// State written by the previous analysis; omit at the first look.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the configured non-binding futility bound.
    #[arg(long, allow_hyphen_values = true)]
    pub futility_z: Option<f64>,
    /// Treat this analysis as the final one.
    #[arg(long = "final")]
    pub is_final: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
}

#[derive(Debug, Args)]
pub struct KmArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub const DEFAULT_REPLICATES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Runs a parsed command; the caller maps errors to exit codes.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Design(a) => cmd_design(&a),
        Command::Analyse(a) => cmd_analyse(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Km(a) => cmd_km(&a),
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Parses `min:max:step`.
pub fn parse_n_grid(s: &str) -> Result<Vec<u32>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Input(format!("--n-grid `{s}`: expected min:max:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<u32> = parts
        .iter()
        .map(|p| p.trim().parse::<u32>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    if v[0] == 0 || v[2] == 0 || v[1] < v[0] {
        return Err(bad());
    }
    Ok((v[0]..=v[1]).step_by(v[2] as usize).collect())
}

#[derive(Debug, Serialize)]
struct DesignOutput {
    name: String,
    n_per_arm: u32,
    scheme: String,
    evaluation: DesignEvaluation,
}

fn cmd_design(a: &DesignArgs) -> Result<()> {
    let configs = read_designs(&a.config)?;
    let grid = a.n_grid.as_deref().map(parse_n_grid).transpose()?;
    create_out_dir(&a.out_dir)?;
    let integ = Integrator::precise();
    let mut outputs = Vec::new();
    for c in &configs {
        let base = c.scenario()?;
        let ns = grid.clone().unwrap_or_else(|| vec![base.n_per_arm]);
        for n in ns {
            let s: DesignScenario = base.with_n(n);
            outputs.push(DesignOutput {
                name: c.label(),
                n_per_arm: n,
                scheme: s.scheme.label(),
                evaluation: s.evaluate(&integ)?,
            });
        }
    }
    write_json(&a.out_dir.join("design_eval.json"), &outputs)?;

    let mut w = csv::Writer::from_path(a.out_dir.join("power_table.csv")).map_err(csv_err)?;
    w.write_record([
        "name",
        "scheme",
        "n_per_arm",
        "analyses",
        "final_events",
        "max_info",
        "power",
        "expected_duration",
    ])
    .map_err(csv_err)?;
    let mut stdout = std::io::stdout().lock();
    for o in &outputs {
        let e = &o.evaluation;
        let last = e.looks.last().expect("design has at least one look");
        w.write_record([
            o.name.clone(),
            o.scheme.clone(),
            o.n_per_arm.to_string(),
            e.looks.len().to_string(),
            format!("{:.2}", last.events_total),
            format!("{:.3}", e.max_info),
            format!("{:.4}", e.power),
            format!("{:.3}", e.expected_duration),
        ])
        .map_err(csv_err)?;
        writeln!(
            stdout,
            "{} n={} power={:.4} duration={:.2} events={:.1}",
            o.name, o.n_per_arm, e.power, e.expected_duration, last.events_total
        )?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Input(format!("{other:?}")),
    }
}

/// Reads a `time,event,arm` dataset, reporting the offending data row.
pub fn read_dataset(path: &Path) -> Result<Vec<Observation>> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text, &path.display().to_string())
}

pub fn parse_dataset(text: &str, origin: &str) -> Result<Vec<Observation>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| Error::Input(format!("{origin}: {e}")))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["time", "event", "arm"] {
        return Err(Error::Input(format!(
            "{origin}: header must be `time,event,arm`, found `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Input(format!("{origin}: row {row}: {e}")))?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let time: f64 = field(0)
            .parse()
            .map_err(|_| Error::Input(format!("{origin}: row {row}: time `{}` is not a number", field(0))))?;
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::Input(format!("{origin}: row {row}: time must be positive")));
        }
        let event = match field(1) {
            "0" => false,
            "1" => true,
            other => return Err(Error::Input(format!("{origin}: row {row}: event `{other}` must be 0 or 1"))),
        };
        let arm = match field(2) {
            "0" => Arm::Control,
            "1" => Arm::Experimental,
            other => return Err(Error::Input(format!("{origin}: row {row}: arm `{other}` must be 0 or 1"))),
        };
        out.push(Observation { time, event, arm });
    }
    if out.is_empty() {
        return Err(Error::Input(format!("{origin}: dataset has no rows")));
    }
    Ok(out)
}

/// Statistic without the per-row weights, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticSummary {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub n_events: u32,
}

impl From<&WlrResult> for StatisticSummary {
    fn from(r: &WlrResult) -> Self {
        Self {
            u: r.u,
            v: r.v,
            z: r.z,
            n_events: r.n_events,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub design: String,
    pub scheme: String,
    pub statistic: StatisticSummary,
    pub look: LookRecord,
    pub futility: Option<FutilityDecision>,
    pub stopped: bool,
    pub stagewise_p: Option<f64>,
    pub summary: Option<SummaryReport>,
}

/// One monitoring step from an already computed statistic. `obs` feeds the
/// end-of-trial summaries when given.
pub fn analyse_look(
    config: &DesignConfig,
    state: Option<GsState>,
    stat: &WlrResult,
    obs: Option<&[Observation]>,
    futility_z: Option<f64>,
    force_final: bool,
    integrator: &Integrator,
) -> Result<(GsState, AnalysisReport)> {
    let design = config.gs_design()?;
    let state = match state {
        Some(s) => {
            s.validate()?;
            if s.design != design {
                return Err(Error::State(
                    "state was written under a different spending rule or design".into(),
                ));
            }
            s
        }
        None => GsState::new(design)?,
    };
    let next = state.step(stat.v, stat.z, force_final, integrator)?;
    let look = next.last().expect("step records a look").clone();
    let futility = (look.decision == Decision::Continue)
        .then(|| futility_check(stat.z, futility_z.or(config.futility_z)));
    let stopped = look.decision.is_terminal() || futility == Some(FutilityDecision::StopForFutility);
    let stagewise_p = if look.decision.is_terminal() {
        Some(next.stagewise_p(integrator)?)
    } else {
        None
    };
    let summary = match (stopped, obs) {
        (true, Some(o)) => {
            let sc = config.summary();
            let mut r = SummaryReport::new(o, sc.milestone_time, sc.rmst_tau)?;
            r.statistic = Some(stat.clone());
            r.stagewise_p = stagewise_p;
            Some(r)
        }
        _ => None,
    };
    let report = AnalysisReport {
        design: config.label(),
        scheme: config.test.label(),
        statistic: stat.into(),
        look,
        futility,
        stopped,
        stagewise_p,
        summary,
    };
    Ok((next, report))
}

fn single_design(path: &Path) -> Result<DesignConfig> {
    let mut configs = read_designs(path)?;
    if configs.len() != 1 {
        return Err(Error::Input(format!(
            "{}: analysis needs exactly one design, found {}",
            path.display(),
            configs.len()
        )));
    }
    Ok(configs.remove(0))
}

fn read_state(path: &Path) -> Result<GsState> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::State(format!("{}: {e}", path.display())))
}

fn cmd_analyse(a: &AnalyseArgs) -> Result<()> {
    let config = single_design(&a.config)?;
    let obs = read_dataset(&a.data)?;
    let state = a.state.as_deref().map(read_state).transpose()?;
    let stat = test_statistic(&obs, &config.test)?;
    let integ = Integrator::precise();
    let (next, report) = analyse_look(&config, state, &stat, Some(&obs), a.futility_z, a.is_final, &integ)?;
    create_out_dir(&a.out_dir)?;
    write_json(&a.out_dir.join("state.json"), &next)?;
    write_json(&a.out_dir.join("report.json"), &report)?;
    let l = &report.look;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "analysis {}: z={:.4} v={:.3} cum_alpha={:.5} critical={} decision={}",
        l.analysis,
        l.z,
        l.variance,
        l.cum_alpha,
        if l.critical.is_finite() {
            format!("{:.4}", l.critical)
        } else {
            "-inf".into()
        },
        match l.decision {
            Decision::Continue => "continue",
            Decision::Reject => "reject",
            Decision::StopAllAlphaSpent => "stop_all_alpha_spent",
        }
    )?;
    if report.futility == Some(FutilityDecision::StopForFutility) {
        writeln!(out, "futility bound crossed: stop for futility (non-binding)")?;
    }
    if let Some(p) = report.stagewise_p {
        writeln!(out, "stage-wise p = {p:.5}")?;
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let grid = read_sim_grid(&a.config)?;
    let replicates = a.replicates.or(grid.replicates).unwrap_or(DEFAULT_REPLICATES);
    if replicates == 0 {
        return Err(Error::Input("--replicates must be at least 1".into()));
    }
    let seed = a.seed.or(grid.seed).unwrap_or(DEFAULT_SEED);
    let cells = grid.cells(replicates, seed)?;
    let results = run_grid(&cells, &Integrator::coarse())?;
    create_out_dir(&a.out_dir)?;
    let file = fs::File::create(a.out_dir.join("results.csv"))?;
    write_grid_csv(&results, file)?;
    write_json(&a.out_dir.join("results.json"), &results)?;
    let mut out = std::io::stdout().lock();
    for r in &results {
        writeln!(
            out,
            "{} | {} | median {} | t*={} | {:?}: power {:.4} (se {})",
            r.recruitment,
            r.effect,
            r.control_median,
            r.t_star,
            r.spending,
            r.summary.rejection_rate,
            r.summary.mc_se.map_or_else(|| "n/a".into(), |s| format!("{s:.4}"))
        )?;
    }
    Ok(())
}

fn cmd_km(a: &KmArgs) -> Result<()> {
    let obs = read_dataset(&a.data)?;
    create_out_dir(&a.out_dir)?;
    let mut w = csv::Writer::from_path(a.out_dir.join("km.csv")).map_err(csv_err)?;
    w.write_record(["arm", "time", "survival", "n_at_risk", "events"])
        .map_err(csv_err)?;
    for arm in [Arm::Control, Arm::Experimental] {
        let km = match km_arm(&obs, arm) {
            Ok(k) => k,
            Err(Error::EmptyArm(_)) => continue,
            Err(e) => return Err(e),
        };
        let a = arm.index().to_string();
        w.write_record([a.as_str(), "0", "1", &km.n_start.to_string(), "0"])
            .map_err(csv_err)?;
        for s in &km.steps {
            w.write_record([
                a.clone(),
                s.time.to_string(),
                s.survival.to_string(),
                s.at_risk.to_string(),
                s.events.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
