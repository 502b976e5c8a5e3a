use std::io::{self, BufRead};
use std::sync::OnceLock;

use regex::Regex;

use super::{
    Diagnostic, DiagnosticKind, EventKind, ExecutionSequence, ParsedTrace, TraceEvent, TraceOptions,
    TransitionRecord,
};
use crate::kripke::StateId;

fn input_vector_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let pair = r#"\(\s*(?:'[^']*'|"[^"]*")\s*,\s*-?\d+\s*\)"#;
        Regex::new(&format!(r"^\[\s*{pair}(?:\s*,\s*{pair})*\s*\]$")).unwrap()
    })
}

fn pair_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"\(\s*(?:'([^']*)'|"([^"]*)")\s*,\s*(-?\d+)\s*\)"#).unwrap())
}

/// Classifies a trimmed line; `None` for blank lines.
pub fn classify_line(line: &str) -> Option<EventKind> {
    let line = line.trim();
    Some(match line {
        "" => return None,
        "[initialize]" => EventKind::InitMarker,
        "[BEGIN IF]" => EventKind::BeginIf,
        "[END IF]" => EventKind::EndIf,
        "->" => EventKind::Arrow,
        _ if line.starts_with("Exploring ") => EventKind::Header,
        _ if line.starts_with("[(") && line.ends_with(")]") => EventKind::InputVector,
        _ => EventKind::ValueLine,
    })
}

fn parse_inputs(line: &str) -> Option<Vec<(String, i64)>> {
    if !input_vector_re().is_match(line) {
        return None;
    }
    pair_re()
        .captures_iter(line)
        .map(|c| {
            let name = c.get(1).or_else(|| c.get(2)).map_or("", |m| m.as_str());
            c[3].parse::<i64>().ok().map(|v| (name.to_string(), v))
        })
        .collect()
}

/// Incremental parser: feed lines, collect finished sequences as new input
/// vectors arrive, then call [`TraceParser::finish`].
#[derive(Debug, Default)]
pub struct TraceParser {
    options: TraceOptions,
    line_number: usize,
    current: Option<ExecutionSequence>,
    /// Last non-blank event, and its state value if it was a usable value line.
    prev: Option<(EventKind, Option<StateId>)>,
    /// Line and source of an arrow still waiting for its target.
    pending_arrow: Option<(usize, StateId)>,
    if_depth: usize,
    diagnostics: Vec<Diagnostic>,
}

impl TraceParser {
    pub fn new(options: TraceOptions) -> Self {
        TraceParser {
            options,
            ..Default::default()
        }
    }

    fn value_of(&self, text: &str) -> Option<StateId> {
        if text.chars().any(char::is_whitespace) {
            return None;
        }
        let value = match (self.options.strip_prefix, text.rfind('.')) {
            (true, Some(i)) if i + 1 < text.len() => &text[i + 1..],
            _ => text,
        };
        Some(StateId::from(value))
    }

    fn diag(&mut self, line_number: usize, kind: DiagnosticKind, detail: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            line_number,
            kind,
            detail: detail.into(),
        });
    }

    fn current(&mut self) -> &mut ExecutionSequence {
        self.current.get_or_insert_with(ExecutionSequence::default)
    }

    fn close_sequence(&mut self) -> Option<ExecutionSequence> {
        if self.if_depth != 0 {
            let line = self.line_number;
            self.diag(line, DiagnosticKind::UnbalancedIfMarkers, "[BEGIN IF] without matching [END IF]");
            self.if_depth = 0;
        }
        self.current.take()
    }

    /// Feeds one line; returns the sequence this line completed, if any.
    pub fn feed_line(&mut self, raw: &str) -> Option<ExecutionSequence> {
        self.line_number += 1;
        let line_number = self.line_number;
        let text = raw.trim();
        let kind = classify_line(text)?;
        self.feed_event(TraceEvent {
            kind,
            payload: text.to_string(),
            line_number,
        })
    }

    pub fn feed_event(&mut self, event: TraceEvent) -> Option<ExecutionSequence> {
        let line = event.line_number;
        let value = match event.kind {
            EventKind::ValueLine => self.value_of(&event.payload),
            _ => None,
        };

        if let Some((arrow_line, source)) = self.pending_arrow.take() {
            match &value {
                Some(target) => self.current().transitions.push(TransitionRecord {
                    source,
                    target: target.clone(),
                    line_number: arrow_line,
                }),
                None => self.diag(
                    arrow_line,
                    DiagnosticKind::ArrowWithoutOperand,
                    format!("'->' is followed by {:?} instead of a value", event.payload),
                ),
            }
        }

        let mut completed = None;
        match event.kind {
            EventKind::Header => {}
            EventKind::InputVector => {
                completed = self.close_sequence();
                let inputs = parse_inputs(&event.payload).unwrap_or_else(|| {
                    self.diag(line, DiagnosticKind::MalformedInputVector, "malformed input vector, inputs dropped");
                    Vec::new()
                });
                self.current = Some(ExecutionSequence {
                    inputs,
                    ..Default::default()
                });
            }
            EventKind::InitMarker => {
                self.current();
            }
            EventKind::BeginIf => self.if_depth += 1,
            EventKind::EndIf => {
                if self.if_depth == 0 {
                    self.diag(line, DiagnosticKind::UnbalancedIfMarkers, "[END IF] without [BEGIN IF]");
                } else {
                    self.if_depth -= 1;
                }
            }
            EventKind::Arrow => match self.prev.clone() {
                Some((EventKind::ValueLine, Some(source))) => {
                    self.current();
                    self.pending_arrow = Some((line, source));
                }
                _ => self.diag(line, DiagnosticKind::ArrowWithoutOperand, "'->' without a preceding value"),
            },
            EventKind::ValueLine => match &value {
                Some(v) => {
                    let after_init = matches!(self.prev, Some((EventKind::InitMarker, _)));
                    let seq = self.current();
                    if after_init {
                        seq.initial_observations.push(v.clone());
                    }
                }
                None => self.diag(
                    line,
                    DiagnosticKind::UnrecognizedLine,
                    format!("unrecognized line {:?}", event.payload),
                ),
            },
        }
        self.prev = Some((event.kind, value));
        completed
    }

    /// Flushes the open sequence and returns it with all diagnostics.
    pub fn finish(mut self) -> (Option<ExecutionSequence>, Vec<Diagnostic>) {
        if let Some((arrow_line, _)) = self.pending_arrow.take() {
            self.diag(arrow_line, DiagnosticKind::ArrowWithoutOperand, "'->' at end of stream");
        }
        let last = self.close_sequence();
        (last, self.diagnostics)
    }
}

/// Parses a whole stream. Only I/O failures are errors; format problems are
/// reported as diagnostics.
pub fn parse_trace<R: BufRead>(reader: R, options: TraceOptions) -> io::Result<ParsedTrace> {
    let mut parser = TraceParser::new(options);
    let mut sequences = Vec::new();
    for line in reader.lines() {
        if let Some(seq) = parser.feed_line(&line?) {
            sequences.push(seq);
        }
    }
    let (last, diagnostics) = parser.finish();
    sequences.extend(last);
    Ok(ParsedTrace { sequences, diagnostics })
}

pub fn parse_trace_str(text: &str, options: TraceOptions) -> ParsedTrace {
    parse_trace(text.as_bytes(), options).expect("reading from memory cannot fail")
}
