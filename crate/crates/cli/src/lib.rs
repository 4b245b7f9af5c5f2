//! The `fogsim` command line: validate scenarios, plan one strategy, compare
//! the four canonical strategies, and run the placement optimizer.
//!
//! Exit codes: 0 success, 1 infeasible or invalid, 2 usage error (including
//! an oversized exhaustive search), 3 input error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use fogsim::cost::{evaluate, CostError, TimingSemantics};
use fogsim::model::{CostBreakdown, Placement, ServiceGraph};
use fogsim::optimizer::{
    optimize_exhaustive, optimize_exhaustive_parallel, optimize_greedy, Method, Objective,
    OptimizeError, PlacementProblem,
};
use fogsim::placement::{place, PlaceOptions, Strategy};
use fogsim::report::{format_sig6, render_report, ReportFormat, ReportRow};
use fogsim::scenario::{parse_scenario, Scenario, ScenarioError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fogsim",
    version,
    about = "Fog/cloud service placement simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario file and report every problem found.
    Validate { scenario: PathBuf },
    /// Evaluate several strategies side by side.
    Compare {
        scenario: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "cloud,fog,hybrid,fog+cloud"
        )]
        strategies: Vec<String>,
        #[command(flatten)]
        common: Common,
        /// Evaluate strategies concurrently; output is unchanged.
        #[arg(long)]
        parallel: bool,
    },
    /// Show the placement and cost of a single strategy.
    Plan {
        scenario: PathBuf,
        #[arg(long)]
        strategy: String,
        #[command(flatten)]
        common: Common,
    },
    /// Search for the best placement.
    Optimize {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Exhaustive)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::TotalTime)]
        objective: ObjectiveArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Table)]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        service: Option<String>,
        /// Split the exhaustive search across threads; results are unchanged.
        #[arg(long)]
        parallel: bool,
    },
}

#[derive(Debug, clap::Args)]
struct Common {
    #[arg(long, value_enum, default_value_t = TimingArg::Sequential)]
    timing: TimingArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fog share of the raw data for fog+cloud; defaults to the scenario's.
    #[arg(long)]
    theta: Option<f64>,
    /// Service to use when the scenario defines several.
    #[arg(long)]
    service: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TimingArg {
    Sequential,
    CriticalPath,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    TotalTime,
    CriticalPath,
    DcBytes,
}

impl From<TimingArg> for TimingSemantics {
    fn from(t: TimingArg) -> Self {
        match t {
            TimingArg::Sequential => TimingSemantics::Sequential,
            TimingArg::CriticalPath => TimingSemantics::CriticalPath,
        }
    }
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => ReportFormat::Table,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::TotalTime => Objective::TotalTimeSequential,
            ObjectiveArg::CriticalPath => Objective::TotalTimeCriticalPath,
            ObjectiveArg::DcBytes => Objective::DcBytes,
        }
    }
}

/// A failed run: exit code plus the diagnostic lines for stderr.
struct Failure {
    code: i32,
    lines: Vec<String>,
}

impl Failure {
    fn new(code: i32, line: impl Into<String>) -> Self {
        Failure {
            code,
            lines: vec![line.into()],
        }
    }
}

type Outcome = Result<i32, Failure>;

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };

    let outcome = match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario, stdout, stderr),
        Command::Compare {
            scenario,
            strategies,
            common,
            parallel,
        } => cmd_compare(&scenario, &strategies, &common, parallel, stdout, stderr),
        Command::Plan {
            scenario,
            strategy,
            common,
        } => cmd_plan(&scenario, &strategy, &common, stdout, stderr),
        Command::Optimize {
            scenario,
            method,
            objective,
            format,
            out,
            service,
            parallel,
        } => cmd_optimize(
            &scenario,
            OptimizeArgs {
                method,
                objective,
                format,
                out,
                service,
                parallel,
            },
            stdout,
        ),
    };

    match outcome {
        Ok(code) => code,
        Err(failure) => {
            for line in failure.lines {
                let _ = writeln!(stderr, "error: {line}");
            }
            failure.code
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = read_text(path)?;
    parse_scenario(&text).map_err(|e| Failure {
        code: EXIT_INPUT,
        lines: prefixed(path, &e),
    })
}

fn prefixed(path: &Path, e: &ScenarioError) -> Vec<String> {
    e.diagnostics()
        .into_iter()
        .map(|d| format!("{}: {d}", path.display()))
        .collect()
}

fn pick_service(scenario: &Scenario, wanted: Option<&str>) -> Result<ServiceGraph, Failure> {
    let services = scenario.services().map_err(|e| Failure {
        code: EXIT_INPUT,
        lines: e.diagnostics(),
    })?;
    match wanted {
        Some(id) => services
            .into_iter()
            .find(|g| g.id == id)
            .ok_or_else(|| Failure::new(EXIT_USAGE, format!("no service named `{id}`"))),
        None if services.len() == 1 => Ok(services.into_iter().next().expect("one service")),
        None if services.is_empty() => {
            Err(Failure::new(EXIT_INPUT, "scenario defines no services"))
        }
        None => {
            let ids: Vec<_> = services.iter().map(|g| g.id.as_str()).collect();
            Err(Failure::new(
                EXIT_USAGE,
                format!(
                    "scenario defines several services ({}); choose one with --service",
                    ids.join(", ")
                ),
            ))
        }
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot write output: {e}"))),
    }
}

fn cmd_validate(path: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let text = read_text(path)?;
    let scenario = match parse_scenario(&text) {
        Ok(s) => s,
        Err(e) => {
            for line in prefixed(path, &e) {
                let _ = writeln!(stderr, "{line}");
            }
            return Ok(EXIT_INFEASIBLE);
        }
    };
    match scenario.services() {
        Ok(services) => {
            let _ = writeln!(
                stdout,
                "{}: valid ({} node(s), {} link(s), {} service(s))",
                path.display(),
                scenario.topology.nodes.len(),
                scenario.topology.links.len(),
                services.len()
            );
            Ok(EXIT_OK)
        }
        Err(e) => {
            for line in prefixed(path, &e) {
                let _ = writeln!(stderr, "{line}");
            }
            Ok(EXIT_INFEASIBLE)
        }
    }
}

fn parse_strategy(name: &str, theta: f64) -> Result<Strategy, Failure> {
    name.parse::<Strategy>()
        .map(|s| s.with_theta(theta))
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))
}

fn resolve_theta(scenario: &Scenario, common: &Common) -> Result<f64, Failure> {
    match common.theta {
        Some(t) if !(t > 0.0 && t < 1.0) => Err(Failure::new(
            EXIT_USAGE,
            format!("--theta must lie strictly between 0 and 1, got {t}"),
        )),
        Some(t) => Ok(t),
        None => Ok(scenario.options.theta),
    }
}

/// Places and evaluates one strategy; `Err` carries a human-readable note.
fn run_strategy(
    scenario: &Scenario,
    graph: &ServiceGraph,
    strategy: Strategy,
    semantics: TimingSemantics,
) -> Result<(ServiceGraph, Placement, CostBreakdown), String> {
    let roles = scenario.roles.as_ref().ok_or_else(|| {
        "scenario has no roles; canonical strategies need fog, cloud and source nodes".to_string()
    })?;
    let options = PlaceOptions {
        store_to_cloud: scenario.options.store_to_cloud,
    };
    let (placed, placement) =
        place(strategy, graph, roles, &scenario.topology, options).map_err(|e| e.to_string())?;
    let cost = evaluate(
        &placed,
        &placement,
        &scenario.topology,
        semantics,
        scenario.options.residency,
    )
    .map_err(|e| match e {
        CostError::InfeasiblePlacement(report) => {
            let details: Vec<_> = report.violations.iter().map(|v| v.to_string()).collect();
            format!("infeasible: {}", details.join("; "))
        }
        other => format!("infeasible: {other}"),
    })?;
    Ok((placed, placement, cost))
}

fn cmd_compare(
    path: &Path,
    names: &[String],
    common: &Common,
    parallel: bool,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Outcome {
    let scenario = load(path)?;
    let theta = resolve_theta(&scenario, common)?;
    let strategies = names
        .iter()
        .map(|n| parse_strategy(n, theta))
        .collect::<Result<Vec<_>, _>>()?;
    if strategies.is_empty() {
        return Err(Failure::new(
            EXIT_USAGE,
            "--strategies must name at least one strategy",
        ));
    }
    let graph = pick_service(&scenario, common.service.as_deref())?;
    let semantics = common.timing.into();

    let evaluate_one = |s: &Strategy| match run_strategy(&scenario, &graph, *s, semantics) {
        Ok((_, _, cost)) => ReportRow::evaluated(s.name(), cost),
        Err(note) => ReportRow::failed(s.name(), note),
    };
    let rows: Vec<ReportRow> = if parallel {
        strategies.par_iter().map(evaluate_one).collect()
    } else {
        strategies.iter().map(evaluate_one).collect()
    };

    for row in &rows {
        if let Some(note) = &row.note {
            let _ = writeln!(stderr, "warning: {}: {note}", row.strategy);
        }
    }
    emit(
        &render_report(&rows, common.format.into()),
        common.out.as_deref(),
        stdout,
    )?;

    if rows.iter().any(|r| r.cost.is_some()) {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(stderr, "error: no requested strategy is feasible");
        Ok(EXIT_INFEASIBLE)
    }
}

#[derive(Serialize)]
struct PlanJson<'a> {
    service: &'a str,
    strategy: &'a str,
    placement: &'a Placement,
    cost: &'a CostBreakdown,
}

fn placement_table(graph: &ServiceGraph, placement: &Placement) -> String {
    let width = graph
        .microservices
        .iter()
        .map(|m| m.id.len())
        .max()
        .unwrap_or(0)
        .max(5);
    let mut text = format!("{:<width$}  node\n", "stage");
    for ms in &graph.microservices {
        let node = placement.node_of(&ms.id).unwrap_or("-");
        text.push_str(&format!("{:<width$}  {node}\n", ms.id));
    }
    text
}

fn cmd_plan(
    path: &Path,
    name: &str,
    common: &Common,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Outcome {
    let scenario = load(path)?;
    let theta = resolve_theta(&scenario, common)?;
    let strategy = parse_strategy(name, theta)?;
    let graph = pick_service(&scenario, common.service.as_deref())?;

    let (placed, placement, cost) =
        match run_strategy(&scenario, &graph, strategy, common.timing.into()) {
            Ok(result) => result,
            Err(note) => {
                let _ = writeln!(stderr, "error: {}: {note}", strategy.name());
                return Ok(EXIT_INFEASIBLE);
            }
        };

    let row = [ReportRow::evaluated(strategy.name(), cost)];
    let text = match common.format {
        FormatArg::Table => format!(
            "{}\n{}",
            placement_table(&placed, &placement),
            render_report(&row, ReportFormat::Table)
        ),
        FormatArg::Csv => {
            let mut text = String::from("stage,node\n");
            for ms in &placed.microservices {
                text.push_str(&format!(
                    "{},{}\n",
                    ms.id,
                    placement.node_of(&ms.id).unwrap_or("")
                ));
            }
            text.push('\n');
            text.push_str(&render_report(&row, ReportFormat::Csv));
            text
        }
        FormatArg::Json => to_json(&PlanJson {
            service: &placed.id,
            strategy: strategy.name(),
            placement: &placement,
            cost: &cost,
        }),
    };
    emit(&text, common.out.as_deref(), stdout)?;
    Ok(EXIT_OK)
}

struct OptimizeArgs {
    method: MethodArg,
    objective: ObjectiveArg,
    format: FormatArg,
    out: Option<PathBuf>,
    service: Option<String>,
    parallel: bool,
}

#[derive(Serialize)]
struct OptimizeJson<'a> {
    service: &'a str,
    method: Method,
    objective: Objective,
    objective_value: f64,
    nodes_explored: u64,
    placement: &'a Placement,
    cost: &'a CostBreakdown,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text
}

fn cmd_optimize(path: &Path, args: OptimizeArgs, stdout: &mut dyn Write) -> Outcome {
    let scenario = load(path)?;
    let graph = pick_service(&scenario, args.service.as_deref())?;
    let objective: Objective = args.objective.into();

    let mut problem = PlacementProblem::new(&graph, &scenario.topology, objective)
        .with_residency(scenario.options.residency);
    if let Some(roles) = &scenario.roles {
        for ms in graph
            .microservices
            .iter()
            .filter(|m| m.stage == fogsim::model::Stage::Source)
        {
            problem = problem.pin(ms.id.clone(), roles.source_node.clone());
        }
    }

    let result = match (args.method, args.parallel) {
        (MethodArg::Greedy, _) => optimize_greedy(&problem),
        (MethodArg::Exhaustive, false) => optimize_exhaustive(&problem),
        (MethodArg::Exhaustive, true) => optimize_exhaustive_parallel(&problem),
    }
    .map_err(|e| match e {
        OptimizeError::SearchSpaceTooLarge { .. } => Failure::new(EXIT_USAGE, e.to_string()),
        OptimizeError::NoFeasiblePlacement | OptimizeError::GreedyDeadEnd { .. } => {
            Failure::new(EXIT_INFEASIBLE, e.to_string())
        }
        OptimizeError::InvalidGraph { .. } | OptimizeError::UnknownPin { .. } => {
            Failure::new(EXIT_INPUT, e.to_string())
        }
    })?;

    let strategy_label = match args.method {
        MethodArg::Exhaustive => "optimal",
        MethodArg::Greedy => "greedy",
    };
    let text = match args.format {
        FormatArg::Json => to_json(&OptimizeJson {
            service: &graph.id,
            method: result.method,
            objective,
            objective_value: result.objective_value,
            nodes_explored: result.nodes_explored,
            placement: &result.placement,
            cost: &result.cost,
        }),
        FormatArg::Table => format!(
            "{}\n{}\nobjective {}: {}\nnodes explored: {}\n",
            placement_table(&graph, &result.placement),
            render_report(
                &[ReportRow::evaluated(strategy_label, result.cost)],
                ReportFormat::Table
            ),
            objective_name(objective),
            format_sig6(result.objective_value),
            result.nodes_explored
        ),
        FormatArg::Csv => {
            let mut text = String::from("stage,node\n");
            for ms in &graph.microservices {
                text.push_str(&format!(
                    "{},{}\n",
                    ms.id,
                    result.placement.node_of(&ms.id).unwrap_or("")
                ));
            }
            text.push('\n');
            text.push_str(&render_report(
                &[ReportRow::evaluated(strategy_label, result.cost)],
                ReportFormat::Csv,
            ));
            text
        }
    };
    emit(&text, args.out.as_deref(), stdout)?;
    Ok(EXIT_OK)
}

fn objective_name(o: Objective) -> &'static str {
    match o {
        Objective::TotalTimeSequential => "total-time",
        Objective::TotalTimeCriticalPath => "critical-path",
        Objective::DcBytes => "dc-bytes",
    }
}
