//! Command-line frontend.
//!
//! Exit codes: 0 property true / audits passed, 1 property false / audit
//! violation, 2 unknown or resource limit, 3 usage or input error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::genauto::{AbstractGA, Fault, Strategy};
use crate::mc3::{Formula, ThreeValued};
use crate::oracle::{
    audit_soundness, audit_terminating, build_concrete_ks, check_modal_simulation, AuditReport,
    OracleError, Sampler,
};
use crate::refine::{verify_loop, LimitHit, RunStats, VerifyLimits};
use crate::statespace::{build_pks, export_dot, BuildLimits, Pks};
use crate::sysir::{generate_benchmark, parse_system, BenchmarkKind, SystemIR};

pub const EXIT_TRUE: i32 = 0;
pub const EXIT_FALSE: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

pub const CSV_HEADER: [&str; 12] = [
    "kind",
    "V",
    "U",
    "C",
    "strategy",
    "result",
    "refinements",
    "states_total",
    "states_final",
    "transitions_total",
    "transitions_final",
    "wall_time_s",
];

/// Concrete state cap for audits that need the concrete structure.
const AUDIT_CAP: usize = 1 << 14;

#[derive(Debug, Parser)]
#[command(name = "tvar", version, about = "Explicit-state CTL model checking by three-valued abstraction refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check one property on one system.
    Verify(VerifyArgs),
    /// Run a parameter grid over the parametric benchmarks and write CSV.
    Sweep(SweepArgs),
    /// Verify while auditing every iteration; prints a JSON report.
    Audit(AuditArgs),
    /// Write the abstract state space as GraphViz.
    Dump(DumpArgs),
}

#[derive(Debug, Args)]
struct SystemArgs {
    /// System description file.
    #[arg(long, conflicts_with = "benchmark", required_unless_present = "benchmark")]
    system: Option<PathBuf>,
    /// Built-in system: `landing-gear` or `KIND:V,U,C`.
    #[arg(long)]
    benchmark: Option<String>,
}

#[derive(Debug, Args)]
struct LimitArgs {
    #[arg(long, default_value_t = 10_000)]
    max_refinements: usize,
    #[arg(long, default_value_t = 1 << 20)]
    max_states: usize,
    /// Seconds.
    #[arg(long)]
    timeout: Option<f64>,
}

impl LimitArgs {
    fn limits(&self) -> Result<VerifyLimits, String> {
        let timeout = match self.timeout {
            Some(t) if !(t.is_finite() && t >= 0.0) => return Err(format!("invalid timeout {t}")),
            t => t.map(Duration::from_secs_f64),
        };
        Ok(VerifyLimits {
            max_refinements: self.max_refinements,
            max_states: self.max_states,
            timeout,
        })
    }
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    property: String,
    #[arg(long, default_value = "input")]
    strategy: Strategy,
    #[command(flatten)]
    limits: LimitArgs,
    /// Write run statistics as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Write the refinement trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[cfg(debug_assertions)]
    #[arg(long)]
    inject_fault: Option<Fault>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// e.g. `V=2,4;U=2,6,10;C=2`.
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    #[arg(long, value_delimiter = ',', default_value = "recoverable")]
    kinds: Vec<BenchmarkKind>,
    #[arg(long, value_delimiter = ',', default_value = "input")]
    strategies: Vec<Strategy>,
    #[arg(long, default_value = "AG(EF(v_zero))")]
    property: String,
    #[command(flatten)]
    limits: LimitArgs,
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum AuditKind {
    Soundness,
    Modal,
    Terminating,
    All,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    property: String,
    #[arg(long, default_value = "input")]
    strategy: Strategy,
    #[arg(long, value_enum, default_value = "all")]
    audit: AuditKind,
    #[command(flatten)]
    limits: LimitArgs,
    #[cfg(debug_assertions)]
    #[arg(long)]
    inject_fault: Option<Fault>,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Needed to refine; without it the initial structure is written.
    #[arg(long)]
    property: Option<String>,
    #[arg(long, default_value = "input")]
    strategy: Strategy,
    /// Stop after this many refinements.
    #[arg(long, default_value_t = 0)]
    refinements: usize,
    #[arg(long, default_value_t = 1 << 20)]
    max_states: usize,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Statistics of one run, as written by `--stats`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub system: String,
    pub property: String,
    pub strategy: Strategy,
    pub result: ThreeValued,
    pub refinements: usize,
    pub states_total: usize,
    pub states_final: usize,
    pub transitions_total: usize,
    pub transitions_final: usize,
    pub wall_time_s: f64,
    pub limit_hit: Option<LimitHit>,
}

impl RunRecord {
    fn new(system: &str, property: &str, strategy: Strategy, result: ThreeValued, stats: &RunStats, limit_hit: Option<LimitHit>) -> Self {
        RunRecord {
            system: system.to_string(),
            property: property.to_string(),
            strategy,
            result,
            refinements: stats.refinements,
            states_total: stats.states_total,
            states_final: stats.states_final,
            transitions_total: stats.transitions_total,
            transitions_final: stats.transitions_final,
            wall_time_s: (stats.wall_time * 1000.0).round() / 1000.0,
            limit_hit,
        }
    }
}

fn result_code(result: ThreeValued) -> i32 {
    match result {
        ThreeValued::True => EXIT_TRUE,
        ThreeValued::False => EXIT_FALSE,
        ThreeValued::Unknown => EXIT_UNKNOWN,
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.to_string(),
    }
}

/// Parses `landing-gear` or `KIND:V,U,C`.
pub fn parse_benchmark(spec: &str) -> Result<(BenchmarkKind, [u32; 3]), String> {
    let (kind, params) = match spec.split_once(':') {
        Some((k, p)) => (k, Some(p)),
        None => (spec, None),
    };
    let kind: BenchmarkKind = kind.trim().parse()?;
    let params = match (kind.is_parametric(), params) {
        (false, None) => [0; 3],
        (false, Some(_)) => return Err(format!("{kind} takes no parameters")),
        (true, None) => return Err(format!("{kind} needs parameters V,U,C")),
        (true, Some(p)) => {
            let values = p
                .split(',')
                .map(|x| x.trim().parse::<u32>().map_err(|e| format!("bad parameter '{x}': {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            <[u32; 3]>::try_from(values).map_err(|_| format!("expected three parameters in '{p}'"))?
        }
    };
    Ok((kind, params))
}

/// Parses `V=2,4;U=2,6;C=2` into grid points in V, U, C order. An empty
/// string gives no points.
pub fn parse_grid(grid: &str) -> Result<Vec<[u32; 3]>, String> {
    if grid.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut axes: [Option<Vec<u32>>; 3] = [None, None, None];
    for part in grid.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, values) = part
            .split_once('=')
            .ok_or_else(|| format!("expected NAME=values in '{part}'"))?;
        let slot = match name.trim() {
            "V" => 0,
            "U" => 1,
            "C" => 2,
            other => return Err(format!("unknown grid axis '{other}'")),
        };
        if axes[slot].is_some() {
            return Err(format!("axis {name} given twice"));
        }
        let values = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| v.parse::<u32>().map_err(|e| format!("bad value '{v}': {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        axes[slot] = Some(values);
    }
    let [Some(vs), Some(us), Some(cs)] = axes else {
        return Err("grid needs V, U and C".to_string());
    };
    let mut out = Vec::new();
    for &v in &vs {
        for &u in &us {
            for &c in &cs {
                out.push([v, u, c]);
            }
        }
    }
    Ok(out)
}

fn load_system(args: &SystemArgs) -> Result<(String, SystemIR), Failure> {
    if let Some(path) = &args.system {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let ir = parse_system(&text).map_err(|e| usage(format!("{}:{e}", path.display())))?;
        return Ok((path.display().to_string(), ir));
    }
    let spec = args.benchmark.as_deref().ok_or_else(|| usage("no system given"))?;
    let (kind, [v, u, c]) = parse_benchmark(spec).map_err(usage)?;
    let ir = generate_benchmark(kind, v, u, c).map_err(|e| usage(e.kind))?;
    Ok((spec.to_string(), ir))
}

fn parse_property(text: &str, ir: &SystemIR) -> Result<Formula, Failure> {
    let formula: Formula = text.parse().map_err(|e| usage(format!("property: {e}")))?;
    for atom in formula.atoms() {
        if ir.label_index(atom).is_none() {
            return Err(usage(format!("property: '{atom}' is not a label of {}", ir.name())));
        }
    }
    Ok(formula)
}

fn write_file(path: &PathBuf, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure {
        code: EXIT_USAGE,
        message: format!("{}: {e}", path.display()),
    })
}

#[cfg(debug_assertions)]
fn fault_of(fault: Option<Fault>) -> Fault {
    fault.unwrap_or_default()
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let (name, ir) = load_system(&args.system)?;
    let formula = parse_property(&args.property, &ir)?;
    let limits = args.limits.limits().map_err(usage)?;
    #[cfg(debug_assertions)]
    let fault = fault_of(args.inject_fault);
    #[cfg(not(debug_assertions))]
    let fault = Fault::None;
    let outcome = verify_loop(ir.into_shared(), &formula, args.strategy, limits, fault, |_| {})
        .map_err(usage)?;
    let _ = writeln!(out, "result: {}", outcome.result);
    if let Some(hit) = outcome.limit_hit {
        let _ = writeln!(out, "limit: {}", serde_json::to_string(&hit).unwrap_or_default().trim_matches('"'));
    }
    if let Some(path) = &args.stats {
        let record = RunRecord::new(&name, &args.property, args.strategy, outcome.result, &outcome.stats, outcome.limit_hit);
        write_file(path, &serde_json::to_string_pretty(&record).expect("serializable"))?;
    }
    if let Some(path) = &args.trace {
        let mut text = String::new();
        for entry in &outcome.trace {
            text.push_str(&serde_json::to_string(entry).expect("serializable"));
            text.push('\n');
        }
        write_file(path, &text)?;
    }
    Ok(result_code(outcome.result))
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let points = parse_grid(&args.grid).map_err(usage)?;
    let limits = args.limits.limits().map_err(usage)?;
    if let Some(kind) = args.kinds.iter().find(|k| !k.is_parametric()) {
        return Err(usage(format!("{kind} is not parametric")));
    }
    let mut writer = csv::Writer::from_path(&args.csv).map_err(|e| usage(format!("{}: {e}", args.csv.display())))?;
    let io = |e: csv::Error| usage(format!("{}: {e}", args.csv.display()));
    writer.write_record(CSV_HEADER).map_err(io)?;
    for &kind in &args.kinds {
        for &[v, u, c] in &points {
            let ir = generate_benchmark(kind, v, u, c).map_err(|e| usage(e.kind))?.into_shared();
            let formula = parse_property(&args.property, &ir)?;
            for &strategy in &args.strategies {
                let outcome = verify_loop(ir.clone(), &formula, strategy, limits, Fault::None, |_| {})
                    .map_err(usage)?;
                let s = outcome.stats;
                let row = [
                    kind.to_string(),
                    v.to_string(),
                    u.to_string(),
                    c.to_string(),
                    strategy.to_string(),
                    outcome.result.to_string(),
                    s.refinements.to_string(),
                    s.states_total.to_string(),
                    s.states_final.to_string(),
                    s.transitions_total.to_string(),
                    s.transitions_final.to_string(),
                    format!("{:.3}", s.wall_time),
                ];
                writer.write_record(&row).map_err(io)?;
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
    }
    writer.flush().map_err(|e| usage(format!("{}: {e}", args.csv.display())))?;
    Ok(EXIT_TRUE)
}

#[derive(Debug, Default, Serialize)]
struct AuditOutput {
    result: Option<ThreeValued>,
    iterations: usize,
    /// Set when the loop itself failed; audits up to that point are kept.
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    soundness: Option<AuditReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    modal: Option<AuditReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    terminating: Option<AuditReport>,
    passed: bool,
}

fn soundness_sampler<'a>(ir: &SystemIR, pks: &'a Pks) -> Sampler<'a> {
    if ir.state_width() <= 6 {
        Sampler::Exhaustive
    } else {
        Sampler::Reachable(pks)
    }
}

fn cmd_audit(args: &AuditArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let (_, ir) = load_system(&args.system)?;
    let formula = parse_property(&args.property, &ir)?;
    let limits = args.limits.limits().map_err(usage)?;
    #[cfg(debug_assertions)]
    let fault = fault_of(args.inject_fault);
    #[cfg(not(debug_assertions))]
    let fault = Fault::None;
    let want = |k: AuditKind| args.audit == k || args.audit == AuditKind::All;
    let ir = ir.into_shared();

    let concrete = if want(AuditKind::Modal) || want(AuditKind::Terminating) {
        match build_concrete_ks(&ir, AUDIT_CAP) {
            Ok(ks) => Some(ks),
            Err(e @ (OracleError::StateLimit { .. } | OracleError::InputSpace(_))) => {
                let _ = writeln!(out, "audit infeasible: {e}");
                return Ok(EXIT_UNKNOWN);
            }
            Err(e) => return Err(usage(e)),
        }
    } else {
        None
    };

    let mut report = AuditOutput::default();
    let mut soundness = want(AuditKind::Soundness).then(AuditReport::default);
    let mut modal = want(AuditKind::Modal).then(AuditReport::default);
    let mut modal_error = None;
    let outcome = verify_loop(ir.clone(), &formula, args.strategy, limits, fault, |it| {
        report.iterations += 1;
        if let Some(acc) = soundness.as_mut() {
            let r = audit_soundness(it.aga, soundness_sampler(&ir, it.pks));
            *acc = std::mem::take(acc).merge(r);
        }
        if let (Some(acc), Some(ks)) = (modal.as_mut(), concrete.as_ref()) {
            match check_modal_simulation(ks, it.pks) {
                Ok(r) => *acc = std::mem::take(acc).merge(r),
                Err(e) => modal_error = Some(e),
            }
        }
    });
    if let Some(e) = modal_error {
        return Err(usage(e));
    }
    match outcome {
        Ok(o) => report.result = Some(o.result),
        Err(e) => report.error = Some(e.to_string()),
    }
    report.soundness = soundness;
    report.modal = modal;
    if want(AuditKind::Terminating) {
        let full = AbstractGA::new(ir.clone(), Strategy::Naive);
        let ks = concrete.as_ref().expect("built above");
        let mut r = audit_terminating(&full, Sampler::Reachable(ks));
        if ir.state_width() <= 6 {
            r = r.merge(audit_terminating(&full, Sampler::Exhaustive));
        }
        report.terminating = Some(r);
    }
    report.passed = [&report.soundness, &report.modal, &report.terminating]
        .into_iter()
        .flatten()
        .all(|r| r.passed);
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(match (report.passed, report.error.is_some()) {
        (false, _) => EXIT_FALSE,
        (true, false) => EXIT_TRUE,
        (true, true) => EXIT_USAGE,
    })
}

fn cmd_dump(args: &DumpArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let (_, ir) = load_system(&args.system)?;
    let ir = ir.into_shared();
    let pks = match &args.property {
        Some(text) => {
            let formula = parse_property(text, &ir)?;
            let limits = VerifyLimits {
                max_refinements: args.refinements,
                max_states: args.max_states,
                timeout: None,
            };
            let mut last = None;
            verify_loop(ir, &formula, args.strategy, limits, Fault::None, |it| {
                last = Some(it.pks.clone());
            })
            .map_err(usage)?;
            last.ok_or(Failure {
                code: EXIT_UNKNOWN,
                message: "state limit reached before the first structure was built".to_string(),
            })?
        }
        None => {
            let aga = AbstractGA::new(ir, args.strategy);
            let limits = BuildLimits {
                max_states: args.max_states,
                deadline: None,
            };
            build_pks(&aga, None, limits)
                .map_err(|e| Failure {
                    code: EXIT_UNKNOWN,
                    message: e.to_string(),
                })?
                .0
        }
    };
    let dot = export_dot(&pks);
    match &args.output {
        Some(path) => write_file(path, &dot)?,
        None => {
            let _ = out.write_all(dot.as_bytes());
        }
    }
    Ok(EXIT_TRUE)
}

/// Runs the command line `args` (including the program name), writing
/// normal output to `out` and diagnostics to stderr. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_TRUE };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Verify(a) => cmd_verify(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Audit(a) => cmd_audit(a, out),
        Command::Dump(a) => cmd_dump(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
