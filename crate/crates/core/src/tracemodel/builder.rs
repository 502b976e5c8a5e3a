use thiserror::Error;

use super::ExecutionSequence;
use crate::kripke::{state_label, KripkeStructure, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BuilderStats {
    pub states: usize,
    pub transitions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuilderError {
    #[error("model builder already finalized")]
    Finalized,
    #[error("initial state {0} does not occur in the model")]
    UnknownInitial(StateId),
}

/// Single-owner accumulator for the state set, transition set and labels.
///
/// Initial states are the union of all `[initialize]` observations; they are
/// added to the state set as well so that `S0 ⊆ S` holds.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    model: KripkeStructure,
    finalized: bool,
}

impl ModelBuilder {
    pub fn new(var: impl Into<String>) -> Self {
        ModelBuilder {
            model: KripkeStructure::new(var),
            finalized: false,
        }
    }

    fn insert_state(&mut self, s: &StateId) {
        if self.model.states.insert(s.clone()) {
            let label = state_label(&self.model.var, s);
            self.model.labeling.entry(s.clone()).or_default().extend(label);
        }
    }

    pub fn add_sequence(&mut self, seq: &ExecutionSequence) -> Result<BuilderStats, BuilderError> {
        if self.finalized {
            return Err(BuilderError::Finalized);
        }
        for record in &seq.transitions {
            let (s, t) = (&record.source, &record.target);
            if !self.model.states.contains(s) || !self.model.states.contains(t) {
                self.insert_state(s);
                self.insert_state(t);
            }
            if !self.model.transitions.contains(&(s.clone(), t.clone())) {
                self.model.transitions.insert((s.clone(), t.clone()));
            }
        }
        for s in &seq.initial_observations {
            self.insert_state(s);
            self.model.initial.insert(s.clone());
        }
        Ok(self.stats())
    }

    pub fn stats(&self) -> BuilderStats {
        BuilderStats {
            states: self.model.states.len(),
            transitions: self.model.transitions.len(),
        }
    }

    /// Point-in-time copy of the structure built so far.
    pub fn snapshot(&self) -> KripkeStructure {
        self.model.clone()
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    /// Closes the builder; later `add_sequence` calls fail.
    pub fn finalize(&mut self) -> KripkeStructure {
        self.finalized = true;
        self.model.clone()
    }
}

pub fn build_model<'a>(
    sequences: impl IntoIterator<Item = &'a ExecutionSequence>,
    var: &str,
) -> KripkeStructure {
    let mut builder = ModelBuilder::new(var);
    for seq in sequences {
        builder.add_sequence(seq).expect("fresh builder is open");
    }
    builder.finalize()
}

/// Replaces the initial states with `{state}`; the state must already exist.
pub fn override_initial(k: &KripkeStructure, state: &StateId) -> Result<KripkeStructure, BuilderError> {
    if !k.states.contains(state) {
        return Err(BuilderError::UnknownInitial(state.clone()));
    }
    let mut out = k.clone();
    out.initial = [state.clone()].into();
    Ok(out)
}
