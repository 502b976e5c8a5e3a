//! The `tracecheck` command line.
//!
//! Exit codes: 0 when every property holds (or the command succeeded), 1 when
//! some property fails, 2 on any error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{parse_formula, Formula};
use crate::kripke::{close_deadlocks, export_dot, from_portable, to_portable, KripkeStructure, StateId, DEFAULT_VAR};
use crate::mc::{check, McError, VerificationResult};
use crate::pipeline::{run_pipeline, IngestStats, PipelineError, PipelineOptions, SourceStatus, TraceSource};
use crate::tracemodel::{build_model, override_initial, parse_trace, ParsedTrace, TraceOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tracecheck", version, about = "Build Kripke structures from execution traces and model check CTL* properties")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Build a model document from trace files
    Build(BuildArgs),
    /// Check a property file against a model document
    Check(CheckArgs),
    /// Ingest traces concurrently, build and check in one go
    Run(RunArgs),
    /// Render a model document
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct ModelFlags {
    /// Add self-loops to states without successors
    #[arg(long)]
    pub close_deadlocks: bool,
    /// State variable used for labels
    #[arg(long, default_value = DEFAULT_VAR)]
    pub var: String,
    /// Use this state as the only initial state
    #[arg(long, value_name = "STATE")]
    pub initial: Option<String>,
    /// Keep `Enum.` prefixes of state values
    #[arg(long)]
    pub keep_prefix: bool,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Trace file, `-` for standard input
    #[arg(short = 't', required = true, num_args = 1.., value_name = "PATH")]
    pub traces: Vec<PathBuf>,
    /// Output model document, `-` for standard output
    #[arg(short = 'o', value_name = "PATH")]
    pub output: PathBuf,
    #[command(flatten)]
    pub model: ModelFlags,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(short = 'm', value_name = "PATH")]
    pub model: PathBuf,
    #[arg(short = 'p', value_name = "PATH")]
    pub properties: PathBuf,
    /// Print witness or counterexample paths
    #[arg(long)]
    pub witness: bool,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub close_deadlocks: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Shell command whose standard output is a trace
    #[arg(long = "trace-cmd", value_name = "CMD", required_unless_present = "traces")]
    pub trace_cmds: Vec<String>,
    /// Trace file, `-` for standard input
    #[arg(short = 't', num_args = 1.., value_name = "PATH")]
    pub traces: Vec<PathBuf>,
    #[arg(short = 'p', value_name = "PATH")]
    pub properties: PathBuf,
    /// Producer threads
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub witness: bool,
    #[command(flatten)]
    pub model: ModelFlags,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(short = 'm', value_name = "PATH")]
    pub model: PathBuf,
    #[arg(long = "dot", value_name = "PATH")]
    pub dot: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyEntry {
    pub name: String,
    pub text: String,
    pub formula: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct PropertyError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Parses `name: formula` lines. `#` starts a comment; unnamed entries are
/// called `phiN` after their position.
pub fn parse_property_file(text: &str) -> Result<Vec<PropertyEntry>, PropertyError> {
    let mut entries: Vec<PropertyEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let (name, body_start) = match line.split_once(':') {
            Some((head, _)) if is_identifier(head.trim()) => (Some(head.trim().to_string()), head.len() + 1),
            Some((head, _)) => {
                return Err(PropertyError {
                    line: i + 1,
                    column: head.len() - head.trim_start().len() + 1,
                    message: format!("invalid property name {:?}", head.trim()),
                })
            }
            None => (None, 0),
        };
        let body = &line[body_start..];
        let lead = body.len() - body.trim_start().len();
        let formula_text = body.trim();
        let column_base = line[..body_start + lead].chars().count();
        let formula = parse_formula(formula_text).map_err(|e| PropertyError {
            line: i + 1,
            column: column_base + e.position,
            message: e.to_string(),
        })?;
        let name = name.unwrap_or_else(|| format!("phi{}", entries.len() + 1));
        if entries.iter().any(|e| e.name == name) {
            return Err(PropertyError {
                line: i + 1,
                column: 1,
                message: format!("duplicate property name {name:?}"),
            });
        }
        entries.push(PropertyEntry {
            name,
            text: formula_text.to_string(),
            formula,
        });
    }
    Ok(entries)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub formula: String,
    pub result: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub source: String,
    pub sequences: usize,
    pub transitions: usize,
    pub warnings: usize,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceSummary>,
    pub rows: Vec<ReportRow>,
    pub holds: bool,
}

impl Report {
    pub fn new(entries: &[PropertyEntry], results: &[VerificationResult]) -> Self {
        let rows: Vec<ReportRow> = entries
            .iter()
            .zip(results)
            .map(|(e, r)| ReportRow {
                name: e.name.clone(),
                formula: e.text.clone(),
                result: r.holds,
                witness: r.witness.as_ref().map(|w| w.to_string()),
            })
            .collect();
        Report {
            sources: Vec::new(),
            holds: rows.iter().all(|r| r.result),
            rows,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.holds {
            EXIT_OK
        } else {
            EXIT_FAILED
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// Plain rendering: ingest stats (if any), then one row per property.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for s in &self.sources {
            let _ = writeln!(
                out,
                "ingested {}: {} sequences, {} transitions, {} warnings ({})",
                s.source, s.sequences, s.transitions, s.warnings, s.status
            );
        }
        if !self.sources.is_empty() && !self.rows.is_empty() {
            out.push('\n');
        }
        if self.rows.is_empty() {
            return out;
        }
        let name_w = self.rows.iter().map(|r| r.name.chars().count()).max().unwrap_or(0).max(4);
        let _ = writeln!(out, "{:<name_w$}  {:<6}  formula", "name", "result");
        for r in &self.rows {
            let result = if r.result { "True" } else { "False" };
            let _ = writeln!(out, "{:<name_w$}  {:<6}  {}", r.name, result, r.formula);
            if let Some(w) = &r.witness {
                let _ = writeln!(out, "{:<name_w$}  {:<6}  witness: {w}", "", "");
            }
        }
        out
    }
}

fn summarize(stats: &IngestStats) -> SourceSummary {
    SourceSummary {
        source: stats.source.clone(),
        sequences: stats.sequences,
        transitions: stats.transitions,
        warnings: stats.warnings,
        status: match &stats.status {
            SourceStatus::Ok => "ok".into(),
            SourceStatus::OpenFailed(m) => format!("open failed: {m}"),
            SourceStatus::ReadFailed(m) => format!("read failed: {m}"),
            SourceStatus::NonZeroExit(Some(c)) => format!("exit status {c}"),
            SourceStatus::NonZeroExit(None) => "killed by signal".into(),
        },
    }
}

/// Message for the error stream plus exit code 2.
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

fn read_input(path: &Path) -> Result<String, Fatal> {
    if path == Path::new("-") {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text).map_err(|e| Fatal(format!("-: {e}")))?;
        return Ok(text);
    }
    fs::read_to_string(path).map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

fn write_output(path: &Path, text: &str, stdout: &mut dyn Write) -> Result<(), Fatal> {
    if path == Path::new("-") {
        return stdout.write_all(text.as_bytes()).map_err(Fatal::from);
    }
    fs::write(path, text).map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

fn load_properties(path: &Path) -> Result<Vec<PropertyEntry>, Fatal> {
    parse_property_file(&read_input(path)?).map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<KripkeStructure, Fatal> {
    from_portable(&read_input(path)?).map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

fn mc_fatal(name: &str, e: McError) -> Fatal {
    match e {
        McError::NonTotalStructure(_) => Fatal(format!("{name}: {e}\nhint: rerun with --close-deadlocks")),
        _ => Fatal(format!("{name}: {e}")),
    }
}

fn report_diagnostics(source: &str, parsed: &ParsedTrace, stderr: &mut dyn Write) -> Result<(), Fatal> {
    for d in &parsed.diagnostics {
        writeln!(stderr, "{source}: {d}")?;
    }
    if parsed.errors().next().is_some() {
        return Err(Fatal(format!("{source}: malformed trace")));
    }
    Ok(())
}

fn cmd_build(args: &BuildArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Fatal> {
    let options = TraceOptions {
        strip_prefix: !args.model.keep_prefix,
    };
    let mut sequences = Vec::new();
    for path in &args.traces {
        let parsed = if path == Path::new("-") {
            parse_trace(io::stdin().lock(), options)
        } else {
            let file = fs::File::open(path).map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
            parse_trace(io::BufReader::new(file), options)
        }
        .map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
        let name = path.display().to_string();
        report_diagnostics(&name, &parsed, stderr)?;
        if parsed.transition_count() == 0 {
            writeln!(stderr, "{name}: warning: no transitions found")?;
        }
        sequences.extend(parsed.sequences);
    }
    let mut model = build_model(&sequences, &args.model.var);
    if args.model.close_deadlocks {
        model = close_deadlocks(&model);
    }
    if let Some(init) = &args.model.initial {
        model = override_initial(&model, &StateId::from(init.as_str()))?;
    }
    write_output(&args.output, &to_portable(&model), stdout)?;
    Ok(EXIT_OK)
}

fn warn_vacuous(results: &[VerificationResult], stderr: &mut dyn Write) -> Result<(), Fatal> {
    if results.iter().any(|r| r.vacuous) {
        writeln!(stderr, "warning: model has no initial states; every property holds vacuously")?;
    }
    Ok(())
}

fn emit(report: &Report, json: bool, stdout: &mut dyn Write) -> Result<i32, Fatal> {
    let text = if json { report.to_json() } else { report.to_table() };
    stdout.write_all(text.as_bytes())?;
    Ok(report.exit_code())
}

fn cmd_check(args: &CheckArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Fatal> {
    let mut model = load_model(&args.model)?;
    let entries = load_properties(&args.properties)?;
    if args.close_deadlocks {
        model = close_deadlocks(&model);
    }
    let results = entries
        .iter()
        .map(|e| check(&model, &e.formula, args.witness).map_err(|err| mc_fatal(&e.name, err)))
        .collect::<Result<Vec<_>, _>>()?;
    warn_vacuous(&results, stderr)?;
    emit(&Report::new(&entries, &results), args.json, stdout)
}

fn cmd_run(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Fatal> {
    let entries = load_properties(&args.properties)?;
    let sources: Vec<TraceSource> = args
        .trace_cmds
        .iter()
        .map(|c| TraceSource::Command(c.clone()))
        .chain(args.traces.iter().map(|p| {
            if p == Path::new("-") {
                TraceSource::Stdin
            } else {
                TraceSource::File(p.clone())
            }
        }))
        .collect();
    let options = PipelineOptions {
        jobs: args.jobs.max(1),
        var: args.model.var.clone(),
        trace: TraceOptions {
            strip_prefix: !args.model.keep_prefix,
        },
        close_deadlocks: args.model.close_deadlocks,
        initial: args.model.initial.as_deref().map(StateId::from),
        want_witness: args.witness,
        ..Default::default()
    };
    let formulas: Vec<Formula> = entries.iter().map(|e| e.formula.clone()).collect();
    let report = match run_pipeline(sources, &formulas, options) {
        Ok(r) => r,
        Err(PipelineError::Check { formula, error }) => {
            let name = entries.iter().find(|e| e.formula.to_string() == formula).map_or(formula.as_str(), |e| &e.name);
            return Err(mc_fatal(name, error));
        }
        Err(e) => return Err(e.into()),
    };
    for s in &report.ingest_stats {
        for d in &s.diagnostics {
            writeln!(stderr, "{}: {d}", s.source)?;
        }
    }
    if let Some(bad) = report.ingest_stats.iter().find(|s| s.errors > 0) {
        return Err(Fatal(format!("{}: malformed trace", bad.source)));
    }
    let w = report.wall_times;
    warn_vacuous(&report.results, stderr)?;
    writeln!(stderr, "wall time: ingest {} ms, build {} ms, check {} ms", w.ingest_ms, w.build_ms, w.check_ms)?;

    let mut out = Report::new(&entries, &report.results);
    out.sources = report.ingest_stats.iter().map(summarize).collect();
    emit(&out, args.json, stdout)
}

fn cmd_export(args: &ExportArgs, stdout: &mut dyn Write) -> Result<i32, Fatal> {
    let model = load_model(&args.model)?;
    write_output(&args.dot, &export_dot(&model), stdout)?;
    Ok(EXIT_OK)
}

/// Runs the command line `args` (including the program name) and returns
/// the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let outcome = match &cli.command {
        Cmd::Build(a) => cmd_build(a, stdout, stderr),
        Cmd::Check(a) => cmd_check(a, stdout, stderr),
        Cmd::Run(a) => cmd_run(a, stdout, stderr),
        Cmd::Export(a) => cmd_export(a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(Fatal(message)) => {
            let _ = writeln!(stderr, "error: {message}");
            EXIT_ERROR
        }
    }
}
