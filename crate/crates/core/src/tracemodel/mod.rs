//! Instrumentation traces and model reconstruction.
//!
//! A trace is line oriented. Each line (trimmed) is one of:
//!
//! 1. `Exploring <name>` header
//! 2. `[('NAME', INT), ...]` input vector, which starts a new execution
//! 3. `[initialize]`, after which a value line is an initial observation
//! 4. `[BEGIN IF]` / `[END IF]`
//! 5. `->`, joining the value lines before and after it into a transition
//! 6. anything else: a value line
//!
//! Lines are parsed into [`ExecutionSequence`]s, which [`ModelBuilder`]
//! folds into a [`KripkeStructure`](crate::kripke::KripkeStructure).

mod builder;
mod parse;

pub use builder::{build_model, override_initial, BuilderError, BuilderStats, ModelBuilder};
pub use parse::{classify_line, parse_trace, parse_trace_str, TraceParser};

use std::fmt;

use crate::kripke::StateId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Header,
    InputVector,
    InitMarker,
    BeginIf,
    EndIf,
    Arrow,
    ValueLine,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub payload: String,
    pub line_number: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransitionRecord {
    pub source: StateId,
    pub target: StateId,
    pub line_number: usize,
}

/// One driver execution: its input vector, what was observed after
/// `[initialize]`, and the transitions in trace order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecutionSequence {
    pub inputs: Vec<(String, i64)>,
    pub initial_observations: Vec<StateId>,
    pub transitions: Vec<TransitionRecord>,
}

impl ExecutionSequence {
    pub fn input(&self, name: &str) -> Option<i64> {
        self.inputs.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// The `(source, target)` pairs, dropping line numbers.
    pub fn pairs(&self) -> impl Iterator<Item = (&StateId, &StateId)> {
        self.transitions.iter().map(|r| (&r.source, &r.target))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    /// Strip everything up to the last `.` of a value (`TelloState.LEFT` becomes `LEFT`).
    pub strip_prefix: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { strip_prefix: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    /// `->` with no value line directly before or after it.
    ArrowWithoutOperand,
    UnbalancedIfMarkers,
    MalformedInputVector,
    UnrecognizedLine,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line_number: usize,
    pub kind: DiagnosticKind,
    pub detail: String,
}

impl Diagnostic {
    pub fn severity(&self) -> Severity {
        match self.kind {
            DiagnosticKind::ArrowWithoutOperand => Severity::Error,
            _ => Severity::Warning,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity() {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "line {}: {level}: {}", self.line_number, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedTrace {
    pub sequences: Vec<ExecutionSequence>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParsedTrace {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity() == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity() == Severity::Warning)
    }

    pub fn transition_count(&self) -> usize {
        self.sequences.iter().map(|s| s.transitions.len()).sum()
    }
}
