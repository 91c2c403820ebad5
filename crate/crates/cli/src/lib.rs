//! The `mgcheck` command line.
//!
//! Every command writes its artifacts under `--out`. Artifact contents depend
//! only on the arguments; the run time and wall-clock stamp go in the first
//! line of `manifest.txt`.

use clap::{Args, Parser, Subcommand};
use mgcheck_conformance::{
    conformance_run, confirm_violation, mark_known_buggy, replay_with, scenario_for, ActionMapping,
    Confirmation, ReplayOptions, RunBudget, TraceStore,
};
use mgcheck_core::interaction::{analyze_plan, OracleBounds};
use mgcheck_core::{
    bfs_check, compose, list_variants, CheckResult, ComposedSpec, CompositionPlan, ExplorationBounds,
    Outcome, StopMode, Trace,
};
use mgcheck_sim::Scenario;
use mgcheck_zab::{code_invariant, presets, protocol_plan, zab_library, BugFlags, ZabOptions, CODE_IDS, PROTOCOL_IDS};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FOUND: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mgcheck", version, about = "Mixed-grained model checking of Zab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explore a composed spec breadth-first and write violating traces.
    Check(CheckArgs),
    /// Validate a plan and print its actions, variables and invariants.
    Compose(SpecArgs),
    /// Dependency and interaction variables, and coarsening verdicts.
    Analyze(AnalyzeArgs),
    /// Replay random model traces on the simulated implementation.
    Conform(ConformArgs),
    /// Replay one trace file on the simulated implementation.
    Replay(ReplayArgs),
    /// List presets, module variants, invariants and bug flags.
    Describe(OutArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Directory for all artifacts.
    #[arg(long, default_value = "mgcheck-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SpecArgs {
    /// Plan file (JSON).
    #[arg(long, conflicts_with = "preset")]
    pub plan: Option<PathBuf>,
    /// SysSpec, mSpec-1..4, ProtocolSpec or ProtocolSpec-improved.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub max_txns: Option<usize>,
    #[arg(long)]
    pub max_crashes: Option<usize>,
    #[arg(long)]
    pub max_partitions: Option<usize>,
    /// Seeded bug to switch on (repeatable), e.g. zk4646.
    #[arg(long = "bug")]
    pub bugs: Vec<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// first, complete or limit=N.
    #[arg(long, default_value = "first")]
    pub stop: String,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub max_states: Option<u64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Check only these invariant ids (repeatable); default is every
    /// invariant the composed model carries. Code invariants are accepted at any level.
    #[arg(long = "invariant")]
    pub invariants: Vec<String>,
    /// Trace store whose invariants are filtered out as known bugs.
    #[arg(long)]
    pub known: Option<PathBuf>,
    /// Check every access against the declared reads and writes.
    #[arg(long)]
    pub validate: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Granularity each selection is compared against.
    #[arg(long, default_value = "baseline")]
    pub reference: String,
    /// Also run the bounded trace-equivalence oracle.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 12)]
    pub oracle_steps: usize,
    #[arg(long, default_value_t = 100_000)]
    pub oracle_traces: usize,
    #[arg(long, default_value_t = 2_000_000)]
    pub oracle_states: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ConformArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Implementation scenario; by default derived from the model and bugs.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub traces: usize,
    #[arg(long, default_value_t = 30)]
    pub steps: usize,
    #[arg(long, default_value_t = 500)]
    pub step_budget: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Confirm a violation of this invariant instead of checking conformance.
    #[arg(long)]
    pub invariant: Option<String>,
    #[arg(long, default_value_t = 500)]
    pub step_budget: usize,
}

/// A usage or semantic error; reported on one line with status 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError(pub String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

fn fail<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError(msg.into()))
}

/// Parses arguments and runs; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::*;
            if matches!(e.kind(), DisplayHelp | DisplayVersion | DisplayHelpOnMissingArgumentOrSubcommand) {
                print!("{e}");
                return if e.kind() == DisplayHelpOnMissingArgumentOrSubcommand { EXIT_USAGE } else { EXIT_CLEAN };
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("bad arguments");
            eprintln!("mgcheck: {}", line.trim_start_matches("error: "));
            return EXIT_USAGE;
        }
    };
    match run(&cli.command) {
        Ok(code) => code,
        Err(CliError(msg)) => {
            eprintln!("mgcheck: {}", msg.lines().next().unwrap_or(""));
            EXIT_USAGE
        }
    }
}

pub fn run(cmd: &Command) -> Result<i32, CliError> {
    let start = Instant::now();
    let (name, out, artifacts, code) = match cmd {
        Command::Describe(o) => ("describe", &o.out, describe(&o.out)?, EXIT_CLEAN),
        Command::Compose(a) => ("compose", &a.out.out, compose_cmd(a)?, EXIT_CLEAN),
        Command::Check(a) => {
            let (files, code) = check(a)?;
            ("check", &a.spec.out.out, files, code)
        }
        Command::Analyze(a) => {
            let (files, code) = analyze(a)?;
            ("analyze", &a.spec.out.out, files, code)
        }
        Command::Conform(a) => {
            let (files, code) = conform(a)?;
            ("conform", &a.spec.out.out, files, code)
        }
        Command::Replay(a) => {
            let (files, code) = replay_cmd(a)?;
            ("replay", &a.spec.out.out, files, code)
        }
    };
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut manifest = format!(
        "# mgcheck {name} generated-unix={stamp} elapsed-ms={}\n",
        start.elapsed().as_millis()
    );
    let _ = writeln!(manifest, "command\t{name}");
    let _ = writeln!(manifest, "status\t{code}");
    for f in artifacts {
        let _ = writeln!(manifest, "artifact\t{f}");
    }
    write_file(out, "manifest.txt", &manifest)?;
    Ok(code)
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<String, CliError> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(&path, text).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    Ok(name.to_string())
}

/// The protocol-level plan at the bounds of the shipped presets.
fn protocol_preset(improved: bool) -> CompositionPlan {
    let base = &presets()[0];
    protocol_plan(improved, base.scale, base.faults)
}

/// Plan named by a preset, including the two protocol-level specs.
pub fn preset_plan(name: &str) -> Option<CompositionPlan> {
    let key = name.trim().to_ascii_lowercase();
    match key.as_str() {
        "protocolspec" | "protocol" => Some(protocol_preset(false)),
        "protocolspec-improved" | "improved" => Some(protocol_preset(true)),
        _ => mgcheck_zab::preset(name),
    }
}

pub fn bug_flags(names: &[String]) -> Result<BugFlags, CliError> {
    let mut f = BugFlags::none();
    for n in names {
        if !f.set(n, true) {
            return fail(format!("unknown bug {n:?}; known bugs are {}", BugFlags::NAMES.join(", ")));
        }
    }
    Ok(f)
}

/// The plan after command-line overrides, validated before any work.
pub fn resolve_plan(a: &SpecArgs) -> Result<CompositionPlan, CliError> {
    let mut plan = match (&a.plan, &a.preset) {
        (Some(p), None) => {
            if !p.exists() {
                return fail(format!("plan file {} does not exist", p.display()));
            }
            CompositionPlan::load(p)?
        }
        (None, Some(name)) => match preset_plan(name) {
            Some(p) => p,
            None => return fail(format!("unknown preset {name:?}")),
        },
        (None, None) => return fail("one of --plan or --preset is required"),
        (Some(_), Some(_)) => return fail("--plan and --preset are mutually exclusive"),
    };
    if let Some(n) = a.nodes {
        plan.scale.nodes = n;
    }
    if let Some(n) = a.max_txns {
        plan.scale.max_txns = n;
    }
    if let Some(n) = a.max_crashes {
        plan.faults.max_crashes = n;
    }
    if let Some(n) = a.max_partitions {
        plan.faults.max_partitions = n;
    }
    if plan.scale.nodes == 0 {
        return fail("--nodes must be at least 1");
    }
    Ok(plan)
}

fn build_spec(a: &SpecArgs) -> Result<(ComposedSpec, BugFlags), CliError> {
    let flags = bug_flags(&a.bugs)?;
    let plan = resolve_plan(a)?;
    let spec = compose(&plan, &zab_library(ZabOptions::with_flags(flags)))?;
    Ok((spec, flags))
}

fn header(spec: &ComposedSpec, flags: BugFlags) -> String {
    let sel: Vec<String> = spec.selections.iter().map(|(m, g)| format!("{m}={g}")).collect();
    let enabled = flags.enabled();
    format!(
        "spec\t{}\nselections\t{}\nscale\tnodes={} max-txns={} max-crashes={} max-partitions={}\nbugs\t{}\n",
        spec.name,
        sel.join(" "),
        spec.scale.nodes,
        spec.scale.max_txns,
        spec.faults.max_crashes,
        spec.faults.max_partitions,
        if enabled.is_empty() { "none".to_string() } else { enabled.join(",") },
    )
}

fn describe(out: &Path) -> Result<Vec<String>, CliError> {
    let mut s = String::from("presets\n");
    let mut plans = presets();
    plans.push(protocol_preset(false));
    plans.push(protocol_preset(true));
    for p in plans {
        let sel: Vec<String> = p.selections.iter().map(|(m, g)| format!("{m}={g}")).collect();
        let _ = writeln!(s, "  {}\t{}", p.name, sel.join(" "));
    }
    s.push_str("variants\n");
    for (m, vs) in list_variants(&zab_library(ZabOptions::default())) {
        let _ = writeln!(s, "  {m}\t{}", vs.join(" "));
    }
    let _ = writeln!(s, "protocol-invariants\t{}", PROTOCOL_IDS.join(" "));
    let _ = writeln!(s, "code-invariants\t{}", CODE_IDS.join(" "));
    let _ = writeln!(s, "bugs\t{}", BugFlags::NAMES.join(" "));
    print!("{s}");
    Ok(vec![write_file(out, "describe.txt", &s)?])
}

fn compose_cmd(a: &SpecArgs) -> Result<Vec<String>, CliError> {
    let (spec, flags) = build_spec(a)?;
    let mut s = header(&spec, flags);
    let _ = writeln!(s, "variables\t{}", spec.vars.len());
    for v in &spec.vars {
        let _ = writeln!(s, "  {}\t{:?}", v.name, v.class);
    }
    let _ = writeln!(s, "actions\t{}", spec.action_names().len());
    for m in &spec.modules {
        let names: Vec<String> = m.actions.iter().map(|x| x.name.clone()).collect();
        let _ = writeln!(s, "  {}[{}]\t{}", m.name, m.granularity, names.join(" "));
    }
    let _ = writeln!(s, "invariants\t{}", spec.invariants.len());
    for i in &spec.invariants {
        let _ = writeln!(s, "  {}\t{:?}\t{}", i.id, i.level, i.description);
    }
    print!("{s}");
    Ok(vec![write_file(&a.out.out, "compose.txt", &s)?])
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Complete => "complete",
        Outcome::ViolationFound => "violation-found",
        Outcome::BudgetExhausted => "budget-exhausted",
    }
}

fn check(a: &CheckArgs) -> Result<(Vec<String>, i32), CliError> {
    let stop: StopMode = a.stop.parse().map_err(CliError)?;
    if a.workers == 0 {
        return fail("--workers must be at least 1");
    }
    if let Some(k) = &a.known {
        if !k.is_dir() {
            return fail(format!("trace store {} does not exist", k.display()));
        }
    }
    let (spec, flags) = build_spec(&a.spec)?;
    let invariants = if a.invariants.is_empty() {
        spec.invariants.clone()
    } else {
        a.invariants
            .iter()
            .map(|id| {
                spec.invariant(id)
                    .cloned()
                    .or_else(|| code_invariant(id))
                    .ok_or_else(|| CliError(format!("spec has no invariant {id}")))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    let mut bounds = ExplorationBounds {
        max_states: a.max_states,
        max_depth: a.max_depth,
        workers: a.workers,
        validate: a.validate,
        ..ExplorationBounds::default()
    };
    if let Some(k) = &a.known {
        let store = TraceStore::load_dir(k, &spec)?;
        bounds.filter = mark_known_buggy(&store, store.entries.keys().map(String::as_str))?;
    }
    let result = bfs_check(&spec, &invariants, &bounds, stop)?;
    let store = TraceStore::from_check(&result);
    store.write_dir(&a.spec.out.out.join("traces"))?;
    let summary = check_summary(&spec, flags, stop, invariants.len(), &bounds, &result, &store);
    print!("{summary}");
    let mut files = vec![write_file(&a.spec.out.out, "summary.txt", &summary)?];
    files.push("traces/index.tsv".into());
    files.extend(store.entries.keys().map(|id| format!("traces/{id}.trace")));
    let code = if result.violations.is_empty() { EXIT_CLEAN } else { EXIT_FOUND };
    Ok((files, code))
}

fn check_summary(
    spec: &ComposedSpec,
    flags: BugFlags,
    stop: StopMode,
    invariants: usize,
    bounds: &ExplorationBounds,
    r: &CheckResult,
    store: &TraceStore,
) -> String {
    let mut s = header(spec, flags);
    let _ = writeln!(s, "stop\t{stop}");
    let _ = writeln!(s, "invariants\t{invariants}");
    if !bounds.filter.accepts_all() {
        let known: Vec<&str> = bounds.filter.suppressed.iter().map(String::as_str).collect();
        let _ = writeln!(s, "suppressed\t{}", known.join(" "));
    }
    let _ = writeln!(s, "outcome\t{}", outcome_name(r.outcome));
    let _ = writeln!(s, "distinct-states\t{}", r.distinct_states);
    let _ = writeln!(s, "max-depth\t{}", r.max_depth);
    let _ = writeln!(s, "violations\t{}", store.entries.len());
    for (id, e) in &store.entries {
        let _ = writeln!(s, "violation\t{id}\t{}\tlength={}", e.invariant, e.trace.len());
    }
    s
}

fn analyze(a: &AnalyzeArgs) -> Result<(Vec<String>, i32), CliError> {
    if a.oracle && (a.oracle_steps == 0 || a.oracle_traces == 0 || a.oracle_states == 0) {
        return fail("oracle bounds must be positive");
    }
    let flags = bug_flags(&a.spec.bugs)?;
    let plan = resolve_plan(&a.spec)?;
    let bounds = OracleBounds {
        max_steps: a.oracle_steps,
        max_traces: a.oracle_traces,
        max_states: a.oracle_states,
    };
    let lib = zab_library(ZabOptions::with_flags(flags));
    let report = analyze_plan(&plan, &lib, &a.reference, a.oracle.then_some(&bounds))?;
    let text = report.to_text();
    print!("{text}");
    let code = if report.all_preserving() { EXIT_CLEAN } else { EXIT_FOUND };
    Ok((vec![write_file(&a.spec.out.out, "analysis.txt", &text)?], code))
}

fn load_scenario(path: &Option<PathBuf>, spec: &ComposedSpec, flags: BugFlags) -> Result<Scenario, CliError> {
    let sc = match path {
        Some(p) if !p.exists() => return fail(format!("scenario file {} does not exist", p.display())),
        Some(p) => Scenario::load(p)?,
        None => scenario_for(spec, flags),
    };
    if sc.nodes != spec.scale.nodes {
        return fail(format!("scenario has {} nodes but the model has {}", sc.nodes, spec.scale.nodes));
    }
    Ok(sc)
}

fn conform(a: &ConformArgs) -> Result<(Vec<String>, i32), CliError> {
    if a.step_budget == 0 {
        return fail("--step-budget must be at least 1");
    }
    let (spec, flags) = build_spec(&a.spec)?;
    let scenario = load_scenario(&a.scenario, &spec, flags)?;
    let mapping = ActionMapping::for_spec(&spec)?;
    let budget = RunBudget {
        max_traces: a.traces,
        max_steps: a.steps,
        step_budget: a.step_budget,
    };
    let report = conformance_run(&spec, &scenario, &mapping, a.seed, budget)?;
    let text = report.to_text();
    print!("{}", text.lines().next().map(|l| format!("{l}\n")).unwrap_or_default());
    for e in report.problems().take(10) {
        println!("{}\t{}\t{}\t{}", e.trace_id, e.result.status, e.result.step, e.result.detail);
    }
    let code = if report.is_clean() { EXIT_CLEAN } else { EXIT_FOUND };
    Ok((vec![write_file(&a.spec.out.out, "conformance.tsv", &text)?], code))
}

fn replay_cmd(a: &ReplayArgs) -> Result<(Vec<String>, i32), CliError> {
    if !a.trace.exists() {
        return fail(format!("trace file {} does not exist", a.trace.display()));
    }
    let (spec, flags) = build_spec(&a.spec)?;
    let scenario = load_scenario(&a.scenario, &spec, flags)?;
    let text = std::fs::read_to_string(&a.trace)?;
    let trace = Trace::from_file(&text, &spec)?;
    let mapping = ActionMapping::for_spec(&spec)?;
    let mut s = header(&spec, scenario.flags);
    let _ = writeln!(s, "trace\t{}\tlength={}", a.trace.file_name().and_then(|n| n.to_str()).unwrap_or(""), trace.len());
    let code = match &a.invariant {
        Some(inv) => {
            let c = confirm_violation(&spec, &trace, inv, &scenario, &mapping)?;
            match &c {
                Confirmation::Confirmed { detail } => {
                    let _ = writeln!(s, "confirmed\t{inv}\t{detail}");
                }
                Confirmation::NotReproduced(r) => {
                    let _ = writeln!(s, "not-reproduced\t{inv}\t{}\tstep={}\t{}", r.status, r.step, r.detail);
                }
            }
            if c.is_confirmed() { EXIT_FOUND } else { EXIT_CLEAN }
        }
        None => {
            let opts = ReplayOptions { step_budget: a.step_budget };
            let r = replay_with(&trace, &scenario, &mapping, opts)?;
            let res = &r.result;
            let _ = writeln!(s, "status\t{}\tstep={}", res.status, res.step);
            if let Some(act) = &res.action {
                let _ = writeln!(s, "action\t{act}");
            }
            if !res.detail.is_empty() {
                let _ = writeln!(s, "detail\t{}", res.detail);
            }
            for d in &res.discrepancies {
                let _ = writeln!(s, "discrepancy\t{}\tmodel={}\timplementation={}", d.var, d.model, d.implementation);
            }
            for (k, events) in r.events.iter().enumerate() {
                let list: Vec<String> = events.iter().map(|e| e.to_string()).collect();
                let _ = writeln!(s, "events\t{}\t{}", k + 1, list.join(" ; "));
            }
            if res.is_conformant() { EXIT_CLEAN } else { EXIT_FOUND }
        }
    };
    print!("{s}");
    Ok((vec![write_file(&a.spec.out.out, "replay.txt", &s)?], code))
}
