//! CTL* model checking over Kripke structures.
//!
//! State formulas are evaluated bottom-up. A path quantifier `E ψ` is
//! decided either by the CTL fixpoints (when `ψ` is a single temporal
//! operator over state formulas and the engine allows it) or by the general
//! route: maximal state subformulas of `ψ` become fresh propositions, the
//! remaining LTL formula is translated to a Büchi automaton, and a state
//! satisfies `E ψ` iff the product has an accepting run from it. `A ψ` is
//! `¬E¬ψ`.

mod buchi;
mod ctl;
mod graph;
mod product;

pub use buchi::{ltl_to_buchi, BuchiAutomaton, BuchiEdge, Literal};
pub use ctl::{sat_eg, sat_eu, sat_ex};
pub use graph::strongly_connected_components;
pub use product::{Analysis, ProductGraph, ProductLasso};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::formula::{Atom, Formula};
use crate::kripke::{validate, KripkeStructure, StateId, Violation};
use graph::{complement, intersect, union, IndexedModel, StateSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum McError {
    #[error("structure is not total (deadlocks: {}); close deadlocks first", .0.iter().map(StateId::to_string).collect::<Vec<_>>().join(", "))]
    NonTotalStructure(Vec<StateId>),
    #[error("invalid structure: {}", .0.join("; "))]
    InvalidStructure(Vec<String>),
    #[error("not a state formula: {0}")]
    NotAStateFormula(String),
    #[error("path quantifier inside an LTL formula: {0}")]
    QuantifierPresent(String),
}

/// Which decision procedure handles path quantifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// CTL fixpoints where the quantified formula allows it, automata otherwise.
    #[default]
    Auto,
    /// Always the automata route.
    Automata,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatSet {
    pub members: BTreeSet<StateId>,
    pub formula: Formula,
}

/// Ultimately periodic path `prefix · cycle^ω`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lasso {
    pub prefix: Vec<StateId>,
    pub cycle: Vec<StateId>,
}

impl Lasso {
    pub fn start(&self) -> &StateId {
        self.prefix.first().unwrap_or(&self.cycle[0])
    }

    /// Consecutive states, the prefix/cycle junction and the cycle wrap are
    /// all transitions of `k`.
    pub fn is_path_of(&self, k: &KripkeStructure) -> bool {
        if self.cycle.is_empty() {
            return false;
        }
        let walk: Vec<&StateId> = self.prefix.iter().chain(&self.cycle).collect();
        let edge = |a: &StateId, b: &StateId| k.transitions.contains(&(a.clone(), b.clone()));
        walk.windows(2).all(|w| edge(w[0], w[1])) && edge(self.cycle.last().unwrap(), &self.cycle[0])
    }

    /// Same infinite path with a primitive cycle and the shortest prefix.
    pub fn canonical(mut self) -> Lasso {
        let n = self.cycle.len();
        if let Some(p) = (1..=n).find(|&p| n.is_multiple_of(p) && (p..n).all(|i| self.cycle[i] == self.cycle[i - p])) {
            self.cycle.truncate(p);
        }
        while !self.prefix.is_empty() && self.prefix.last() == self.cycle.last() {
            self.prefix.pop();
            self.cycle.rotate_right(1);
        }
        self
    }
}

impl fmt::Display for Lasso {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.prefix {
            write!(f, "{s} -> ")?;
        }
        let cycle: Vec<String> = self.cycle.iter().map(StateId::to_string).collect();
        write!(f, "({})^w", cycle.join(" -> "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationResult {
    pub formula: Formula,
    /// Every initial state satisfies the formula.
    pub holds: bool,
    pub sat: SatSet,
    pub witness: Option<Lasso>,
    /// No initial states, so `holds` is vacuous.
    pub vacuous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckOptions {
    pub engine: Engine,
    pub want_witness: bool,
}

fn precheck(k: &KripkeStructure, f: &Formula) -> Result<(), McError> {
    if !f.is_state_formula() {
        return Err(McError::NotAStateFormula(f.to_string()));
    }
    let violations = validate(k, true);
    if violations.is_empty() {
        return Ok(());
    }
    let deadlocks: Vec<StateId> = violations
        .iter()
        .filter_map(|v| match v {
            Violation::Deadlock(s) => Some(s.clone()),
            _ => None,
        })
        .collect();
    if deadlocks.len() == violations.len() {
        Err(McError::NonTotalStructure(deadlocks))
    } else {
        Err(McError::InvalidStructure(violations.iter().map(Violation::to_string).collect()))
    }
}

pub fn sat_states(k: &KripkeStructure, f: &Formula) -> Result<SatSet, McError> {
    sat_states_with(k, f, Engine::Auto)
}

pub fn sat_states_with(k: &KripkeStructure, f: &Formula, engine: Engine) -> Result<SatSet, McError> {
    precheck(k, f)?;
    let ev = Evaluator::new(k, engine);
    let set = ev.state(f);
    Ok(SatSet {
        members: ev.model.to_ids(&set),
        formula: f.clone(),
    })
}

pub fn check(k: &KripkeStructure, f: &Formula, want_witness: bool) -> Result<VerificationResult, McError> {
    check_with(
        k,
        f,
        CheckOptions {
            engine: Engine::Auto,
            want_witness,
        },
    )
}

pub fn check_with(k: &KripkeStructure, f: &Formula, options: CheckOptions) -> Result<VerificationResult, McError> {
    precheck(k, f)?;
    let ev = Evaluator::new(k, options.engine);
    let set = ev.state(f);
    let members = ev.model.to_ids(&set);
    let holds = k.initial.is_subset(&members);

    let witness = if options.want_witness {
        // Existential witness for `E ψ` when it holds, or a counterexample
        // path for `A ψ` (a witness of `E ¬ψ`) when it fails.
        let target = match f {
            Formula::Exists(p) if holds => Some(((**p).clone(), true)),
            Formula::Not(inner) => match inner.as_ref() {
                Formula::Forall(p) if holds => Some((Formula::not((**p).clone()), true)),
                Formula::Exists(p) if !holds => Some(((**p).clone(), false)),
                _ => None,
            },
            Formula::Forall(p) if !holds => Some((Formula::not((**p).clone()), false)),
            _ => None,
        };
        target.and_then(|(path, in_sat)| {
            // smallest initial state inside (resp. outside) Sat(f)
            let start = k.initial.iter().find(|s| members.contains(*s) == in_sat)?;
            ev.witness(&path, start)
        })
    } else {
        None
    };

    Ok(VerificationResult {
        formula: f.clone(),
        holds,
        sat: SatSet {
            members,
            formula: f.clone(),
        },
        witness,
        vacuous: k.initial.is_empty(),
    })
}

/// Product of the structure with the automaton of an abstracted path formula.
struct PathProduct {
    sat: StateSet,
    graph: ProductGraph,
    starts: Vec<Vec<usize>>,
    analysis: Analysis,
}

struct Evaluator<'k> {
    model: IndexedModel<'k>,
    engine: Engine,
}

impl<'k> Evaluator<'k> {
    fn new(k: &'k KripkeStructure, engine: Engine) -> Self {
        Evaluator {
            model: IndexedModel::new(k),
            engine,
        }
    }

    fn state(&self, f: &Formula) -> StateSet {
        use Formula::*;
        let m = &self.model;
        match f {
            True => m.full(),
            False => vec![false; m.len()],
            Atom(a) => m.atom_set(a),
            Not(a) => complement(&self.state(a)),
            And(a, b) => intersect(&self.state(a), &self.state(b)),
            Or(a, b) => union(&self.state(a), &self.state(b)),
            Implies(a, b) => union(&complement(&self.state(a)), &self.state(b)),
            Exists(p) => self.exists(p),
            Forall(p) => self.forall(p),
            Next(_) | Finally(_) | Globally(_) | Until(..) | Release(..) => {
                unreachable!("path formula {f} evaluated as a state formula")
            }
        }
    }

    fn exists(&self, path: &Formula) -> StateSet {
        if self.engine == Engine::Auto {
            if let Some(set) = self.ctl_exists(path) {
                return set;
            }
        }
        self.path_product(path).sat
    }

    fn forall(&self, path: &Formula) -> StateSet {
        if self.engine == Engine::Auto {
            if let Some(set) = self.ctl_forall(path) {
                return set;
            }
        }
        complement(&self.path_product(&Formula::not(path.clone())).sat)
    }

    fn ctl_exists(&self, path: &Formula) -> Option<StateSet> {
        use Formula::*;
        let m = &self.model;
        let is_state = |g: &Formula| g.is_state_formula();
        Some(match path {
            Next(g) if is_state(g) => ctl::ex(m, &self.state(g)),
            Finally(g) if is_state(g) => ctl::eu(m, &m.full(), &self.state(g)),
            Globally(g) if is_state(g) => ctl::eg(m, &self.state(g)),
            Until(g, h) if is_state(g) && is_state(h) => ctl::eu(m, &self.state(g), &self.state(h)),
            Release(g, h) if is_state(g) && is_state(h) => ctl::er(m, &self.state(g), &self.state(h)),
            _ => return None,
        })
    }

    fn ctl_forall(&self, path: &Formula) -> Option<StateSet> {
        use Formula::*;
        let m = &self.model;
        let is_state = |g: &Formula| g.is_state_formula();
        let not = |g: &Formula| complement(&self.state(g));
        Some(complement(&match path {
            Next(g) if is_state(g) => ctl::ex(m, &not(g)),
            Finally(g) if is_state(g) => ctl::eg(m, &not(g)),
            Globally(g) if is_state(g) => ctl::eu(m, &m.full(), &not(g)),
            Until(g, h) if is_state(g) && is_state(h) => {
                let (ng, nh) = (not(g), not(h));
                union(&ctl::eu(m, &nh, &intersect(&ng, &nh)), &ctl::eg(m, &nh))
            }
            Release(g, h) if is_state(g) && is_state(h) => ctl::eu(m, &not(g), &not(h)),
            _ => return None,
        }))
    }

    /// Replaces maximal state subformulas (other than atoms and constants)
    /// by fresh propositions `$n` and records their satisfaction sets.
    fn abstract_path(&self, f: &Formula, fresh: &mut BTreeMap<Atom, StateSet>) -> Formula {
        use Formula::*;
        match f {
            True | False | Atom(_) => f.clone(),
            _ if f.is_state_formula() => {
                let atom = crate::formula::Atom::new(format!("${}", fresh.len())).expect("fresh atom");
                fresh.insert(atom.clone(), self.state(f));
                Formula::Atom(atom)
            }
            Not(a) => Formula::not(self.abstract_path(a, fresh)),
            And(a, b) => Formula::and(self.abstract_path(a, fresh), self.abstract_path(b, fresh)),
            Or(a, b) => Formula::or(self.abstract_path(a, fresh), self.abstract_path(b, fresh)),
            Implies(a, b) => Formula::implies(self.abstract_path(a, fresh), self.abstract_path(b, fresh)),
            Next(a) => Formula::next(self.abstract_path(a, fresh)),
            Finally(a) => Formula::finally(self.abstract_path(a, fresh)),
            Globally(a) => Formula::globally(self.abstract_path(a, fresh)),
            Until(a, b) => Formula::until(self.abstract_path(a, fresh), self.abstract_path(b, fresh)),
            Release(a, b) => Formula::release(self.abstract_path(a, fresh), self.abstract_path(b, fresh)),
            Exists(_) | Forall(_) => unreachable!("quantified formulas are state formulas"),
        }
    }

    fn path_product(&self, path: &Formula) -> PathProduct {
        let mut fresh = BTreeMap::new();
        let ltl = self.abstract_path(path, &mut fresh);
        let (aut, atoms) = buchi::translate(&ltl).expect("abstracted formula is quantifier free");
        let prop_sets: Vec<StateSet> = atoms
            .iter()
            .map(|a| fresh.get(a).cloned().unwrap_or_else(|| self.model.atom_set(a)))
            .collect();
        let (graph, starts) = aut.product_with(&self.model.succ, |s, p| prop_sets[p][s]);
        let analysis = graph.analyze();
        let sat = starts.iter().map(|st| st.iter().any(|&n| analysis.live[n])).collect();
        PathProduct {
            sat,
            graph,
            starts,
            analysis,
        }
    }

    fn witness(&self, path: &Formula, start: &StateId) -> Option<Lasso> {
        let s = *self.model.index.get(start)?;
        let pp = self.path_product(path);
        let run = pp.graph.accepting_run(&pp.starts[s], &pp.analysis)?;
        let name = |n: &usize| self.model.names[pp.graph.keys[*n].0].clone();
        Some(
            Lasso {
                prefix: run.prefix.iter().map(name).collect(),
                cycle: run.cycle.iter().map(name).collect(),
            }
            .canonical(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::kripke::close_deadlocks;

    fn f(text: &str) -> Formula {
        parse_formula(text).unwrap()
    }

    fn ids(names: &[&str]) -> BTreeSet<StateId> {
        names.iter().map(|s| StateId::from(*s)).collect()
    }

    fn single_p() -> KripkeStructure {
        let mut k = KripkeStructure::new("v");
        k.add_transition("a", "a");
        k.labeling.get_mut(&StateId::from("a")).unwrap().insert("p".parse().unwrap());
        k.add_initial("a");
        k
    }

    fn chain() -> KripkeStructure {
        let mut k = KripkeStructure::new("v");
        k.add_transition("a", "b");
        k.add_transition("b", "b");
        k.add_initial("a");
        k
    }

    #[test]
    fn constant_path() {
        let k = single_p();
        for engine in [Engine::Auto, Engine::Automata] {
            assert_eq!(sat_states_with(&k, &f("A(G p)"), engine).unwrap().members, ids(&["a"]));
            assert_eq!(sat_states_with(&k, &f("E(X !p)"), engine).unwrap().members, ids(&[]));
        }
    }

    #[test]
    fn preconditions() {
        let mut k = KripkeStructure::new("v");
        k.add_transition("a", "b");
        assert_eq!(
            sat_states(&k, &f("E(F p)")),
            Err(McError::NonTotalStructure(vec!["b".into()]))
        );
        assert!(matches!(sat_states(&close_deadlocks(&k), &f("F p")), Err(McError::NotAStateFormula(_))));
    }

    #[test]
    fn witness_on_chain() {
        let k = chain();
        let r = check(&k, &f("E(F v=b)"), true).unwrap();
        assert!(r.holds);
        let w = r.witness.unwrap();
        assert_eq!(w.prefix, vec![StateId::from("a")]);
        assert_eq!(w.cycle, vec![StateId::from("b")]);
        assert!(w.is_path_of(&k));
    }

    #[test]
    fn counterexample_for_failed_universal() {
        let k = chain();
        let r = check(&k, &f("A(G v=a)"), true).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert_eq!(w.to_string(), "a -> (b)^w");
        // no witness when the universal holds or when not asked
        assert!(check(&k, &f("A(F v=b)"), true).unwrap().witness.is_none());
        assert!(check(&k, &f("A(G v=a)"), false).unwrap().witness.is_none());
    }

    #[test]
    fn nested_quantifiers_and_release() {
        let k = chain();
        for engine in [Engine::Auto, Engine::Automata] {
            let sat = |t: &str| sat_states_with(&k, &f(t), engine).unwrap().members;
            assert_eq!(sat("E(F A(G v=b))"), ids(&["a", "b"]));
            assert_eq!(sat("E(v=b R v=a)"), ids(&[]));
            assert_eq!(sat("E(false R v=b)"), ids(&["b"]));
            assert_eq!(sat("A(v=a U v=b)"), ids(&["a", "b"]));
            assert_eq!(sat("E(X X v=b) & !E(G v=a)"), ids(&["a", "b"]));
            assert_eq!(sat("E(v=a)"), ids(&["a"]));
        }
    }

    #[test]
    fn vacuous_without_initial_states() {
        let mut k = chain();
        k.initial.clear();
        let r = check(&k, &f("false"), false).unwrap();
        assert!(r.holds && r.vacuous);
    }

    #[test]
    fn canonical_lasso() {
        let l = Lasso {
            prefix: vec!["a".into(), "b".into()],
            cycle: vec!["c".into(), "b".into(), "c".into(), "b".into()],
        };
        let c = l.canonical();
        assert_eq!(c.prefix, vec![StateId::from("a")]);
        assert_eq!(c.cycle, vec![StateId::from("b"), StateId::from("c")]);
    }
}
