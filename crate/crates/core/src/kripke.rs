//! Kripke structures `M = <S, R, P, S0>` with validation, deadlock closure,
//! a portable JSON document format and DOT rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Atom;

/// Default name of the designated state variable used in labels.
pub const DEFAULT_VAR: &str = "current_state";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(String);

impl StateId {
    pub fn new(name: impl Into<String>) -> Self {
        StateId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn is_well_formed(&self) -> bool {
        !self.0.is_empty() && !self.0.chars().any(char::is_whitespace)
    }
}

impl From<&str> for StateId {
    fn from(s: &str) -> Self {
        StateId(s.to_string())
    }
}

impl From<String> for StateId {
    fn from(s: String) -> Self {
        StateId(s)
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The label a state carries under the single-variable convention.
pub fn state_label(var: &str, state: &StateId) -> Option<Atom> {
    Atom::equality(var, state.as_str()).ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KripkeStructure {
    /// Designated variable the labels refer to.
    pub var: String,
    pub states: BTreeSet<StateId>,
    pub transitions: BTreeSet<(StateId, StateId)>,
    pub labeling: BTreeMap<StateId, BTreeSet<Atom>>,
    pub initial: BTreeSet<StateId>,
}

impl Default for KripkeStructure {
    fn default() -> Self {
        KripkeStructure::new(DEFAULT_VAR)
    }
}

impl KripkeStructure {
    pub fn new(var: impl Into<String>) -> Self {
        KripkeStructure {
            var: var.into(),
            states: BTreeSet::new(),
            transitions: BTreeSet::new(),
            labeling: BTreeMap::new(),
            initial: BTreeSet::new(),
        }
    }

    /// Adds a state labelled `var=<state>`; no-op for known states.
    pub fn add_state(&mut self, state: impl Into<StateId>) -> bool {
        let state = state.into();
        if self.states.contains(&state) {
            return false;
        }
        let labels = state_label(&self.var, &state).into_iter().collect();
        self.labeling.insert(state.clone(), labels);
        self.states.insert(state);
        true
    }

    /// Adds both endpoints (if needed) and the transition.
    pub fn add_transition(&mut self, from: impl Into<StateId>, to: impl Into<StateId>) -> bool {
        let (from, to) = (from.into(), to.into());
        self.add_state(from.clone());
        self.add_state(to.clone());
        self.transitions.insert((from, to))
    }

    pub fn add_initial(&mut self, state: impl Into<StateId>) {
        let state = state.into();
        self.add_state(state.clone());
        self.initial.insert(state);
    }

    pub fn successors<'a>(&'a self, state: &'a StateId) -> impl Iterator<Item = &'a StateId> + 'a {
        self.transitions
            .range((state.clone(), StateId(String::new()))..)
            .take_while(move |(from, _)| from == state)
            .map(|(_, to)| to)
    }

    pub fn deadlocks(&self) -> Vec<&StateId> {
        self.states
            .iter()
            .filter(|s| self.successors(s).next().is_none())
            .collect()
    }

    pub fn is_total(&self) -> bool {
        self.deadlocks().is_empty()
    }

    pub fn validate(&self, require_total: bool) -> Vec<Violation> {
        validate(self, require_total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MalformedState(StateId),
    UnknownEndpoint {
        from: StateId,
        to: StateId,
        missing: StateId,
    },
    UnknownInitial(StateId),
    MissingLabeling(StateId),
    LabelingForUnknownState(StateId),
    Deadlock(StateId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MalformedState(s) => write!(f, "malformed state id: {s:?}"),
            Violation::UnknownEndpoint { from, to, missing } => {
                write!(f, "transition ({from}, {to}) references unknown state {missing}")
            }
            Violation::UnknownInitial(s) => write!(f, "initial state {s} is not a state"),
            Violation::MissingLabeling(s) => write!(f, "no labeling for state {s}"),
            Violation::LabelingForUnknownState(s) => write!(f, "labeling given for unknown state {s}"),
            Violation::Deadlock(s) => write!(f, "deadlock: {s}"),
        }
    }
}

/// Checks the structural invariants; with `require_total`, also that every
/// state has a successor. An empty result means the structure is usable.
pub fn validate(k: &KripkeStructure, require_total: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in &k.states {
        if !s.is_well_formed() {
            out.push(Violation::MalformedState(s.clone()));
        }
        if !k.labeling.contains_key(s) {
            out.push(Violation::MissingLabeling(s.clone()));
        }
    }
    for (from, to) in &k.transitions {
        for end in [from, to] {
            if !k.states.contains(end) {
                out.push(Violation::UnknownEndpoint {
                    from: from.clone(),
                    to: to.clone(),
                    missing: end.clone(),
                });
            }
        }
    }
    for s in &k.initial {
        if !k.states.contains(s) {
            out.push(Violation::UnknownInitial(s.clone()));
        }
    }
    for s in k.labeling.keys() {
        if !k.states.contains(s) {
            out.push(Violation::LabelingForUnknownState(s.clone()));
        }
    }
    if require_total {
        out.extend(k.deadlocks().into_iter().cloned().map(Violation::Deadlock));
    }
    out
}

/// Adds a self-loop to every state without successors.
pub fn close_deadlocks(k: &KripkeStructure) -> KripkeStructure {
    let mut out = k.clone();
    for s in k.deadlocks() {
        out.transitions.insert((s.clone(), s.clone()));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortableDocument {
    var: String,
    states: Vec<PortableState>,
    initial: Vec<String>,
    transitions: Vec<(String, String)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortableState {
    id: String,
    labels: Vec<String>,
}

#[derive(Debug, Error)]
pub enum PortableError {
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("duplicate state id {0:?}")]
    DuplicateState(String),
    #[error("invalid state id {0:?}")]
    InvalidState(String),
    #[error("{context} references unknown state {id:?}")]
    UnknownState { id: String, context: String },
    #[error("invalid label {label:?} on state {state:?}")]
    InvalidLabel { state: String, label: String },
}

pub fn from_portable(document: &str) -> Result<KripkeStructure, PortableError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: PortableDocument = serde_path_to_error::deserialize(de).map_err(|e| PortableError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;

    let mut k = KripkeStructure::new(doc.var);
    for st in doc.states {
        let id = StateId::new(st.id.clone());
        if !id.is_well_formed() {
            return Err(PortableError::InvalidState(st.id));
        }
        if k.states.contains(&id) {
            return Err(PortableError::DuplicateState(st.id));
        }
        let mut labels = BTreeSet::new();
        for label in st.labels {
            let atom = label.parse::<Atom>().map_err(|_| PortableError::InvalidLabel {
                state: st.id.clone(),
                label: label.clone(),
            })?;
            labels.insert(atom);
        }
        k.labeling.insert(id.clone(), labels);
        k.states.insert(id);
    }
    let known = |id: &str, context: String, k: &KripkeStructure| -> Result<StateId, PortableError> {
        let sid = StateId::from(id);
        if k.states.contains(&sid) {
            Ok(sid)
        } else {
            Err(PortableError::UnknownState {
                id: id.to_string(),
                context,
            })
        }
    };
    for (i, s) in doc.initial.iter().enumerate() {
        let sid = known(s, format!("initial[{i}]"), &k)?;
        k.initial.insert(sid);
    }
    for (i, (a, b)) in doc.transitions.iter().enumerate() {
        let from = known(a, format!("transitions[{i}]"), &k)?;
        let to = known(b, format!("transitions[{i}]"), &k)?;
        k.transitions.insert((from, to));
    }
    Ok(k)
}

/// Serializes with states, initial states and transitions in lexicographic
/// order, so equal structures give byte-identical documents.
pub fn to_portable(k: &KripkeStructure) -> String {
    let doc = PortableDocument {
        var: k.var.clone(),
        states: k
            .states
            .iter()
            .map(|s| PortableState {
                id: s.to_string(),
                labels: k
                    .labeling
                    .get(s)
                    .map(|ls| ls.iter().map(Atom::to_string).collect())
                    .unwrap_or_default(),
            })
            .collect(),
        initial: k.initial.iter().map(StateId::to_string).collect(),
        transitions: k
            .transitions
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("portable document serializes");
    text.push('\n');
    text
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: one node per state labelled with its atoms, initial
/// states drawn as double circles.
pub fn export_dot(k: &KripkeStructure) -> String {
    let mut out = String::from("digraph kripke {\n");
    for s in &k.states {
        let shape = if k.initial.contains(s) { "doublecircle" } else { "circle" };
        let mut label = dot_escape(s.as_str());
        for atom in k.labeling.get(s).into_iter().flatten() {
            label.push_str("\\n");
            label.push_str(&dot_escape(&atom.to_string()));
        }
        let _ = writeln!(out, "  \"{}\" [shape={shape}, label=\"{label}\"];", dot_escape(s.as_str()));
    }
    for (a, b) in &k.transitions {
        let _ = writeln!(out, "  \"{}\" -> \"{}\";", dot_escape(a.as_str()), dot_escape(b.as_str()));
    }
    out.push_str("}\n");
    out
}
