//! Shared test helpers: a brute-force CTL* evaluator over lassos and seeded
//! random generators for structures, formulas and traces.
#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use tracecheck::formula::{Atom, Formula};
use tracecheck::kripke::{KripkeStructure, StateId};
use tracecheck::tracemodel::{ExecutionSequence, TransitionRecord};

pub const ATOMS: [&str; 2] = ["p", "q"];

pub fn atom(name: &str) -> Atom {
    Atom::new(name).unwrap()
}

/// Truth value of the path formula `psi` at every position of the word
/// `prefix · cycle^ω`, where `letter(i, g)` decides the state subformula
/// `g` at position `i` (positions index `prefix ++ cycle`).
pub fn eval_lasso_positions(
    psi: &Formula,
    prefix_len: usize,
    len: usize,
    letter: &dyn Fn(usize, &Formula) -> bool,
) -> Vec<bool> {
    use Formula::*;
    let next = |i: usize| if i + 1 < len { i + 1 } else { prefix_len };
    let rec = |g: &Formula| eval_lasso_positions(g, prefix_len, len, letter);
    match psi {
        _ if psi.is_state_formula() => (0..len).map(|i| letter(i, psi)).collect(),
        Not(a) => rec(a).iter().map(|b| !b).collect(),
        And(a, b) => rec(a).iter().zip(rec(b)).map(|(x, y)| *x && y).collect(),
        Or(a, b) => rec(a).iter().zip(rec(b)).map(|(x, y)| *x || y).collect(),
        Implies(a, b) => rec(a).iter().zip(rec(b)).map(|(x, y)| !*x || y).collect(),
        Next(a) => {
            let v = rec(a);
            (0..len).map(|i| v[next(i)]).collect()
        }
        Finally(a) => fixpoint(&vec![true; len], &rec(a), false, len, &next),
        Globally(a) => fixpoint(&rec(a), &vec![false; len], true, len, &next),
        Until(a, b) => fixpoint(&rec(a), &rec(b), false, len, &next),
        Release(a, b) => {
            // g R h = ¬(¬g U ¬h)
            let ng: Vec<bool> = rec(a).iter().map(|b| !b).collect();
            let nh: Vec<bool> = rec(b).iter().map(|b| !b).collect();
            fixpoint(&ng, &nh, false, len, &next).iter().map(|b| !b).collect()
        }
        True | False | Atom(_) | Exists(_) | Forall(_) => unreachable!(),
    }
}

/// `left U right` as a least fixpoint, or `G left` (with `greatest`) as a
/// greatest fixpoint, by iteration over the positions.
fn fixpoint(left: &[bool], right: &[bool], greatest: bool, len: usize, next: &dyn Fn(usize) -> usize) -> Vec<bool> {
    let mut v = vec![greatest; len];
    loop {
        let new: Vec<bool> = (0..len)
            .map(|i| {
                if greatest {
                    left[i] && v[next(i)]
                } else {
                    right[i] || (left[i] && v[next(i)])
                }
            })
            .collect();
        if new == v {
            return v;
        }
        v = new;
    }
}

/// Quantifier-free state formula under an atom valuation.
pub fn eval_propositional(f: &Formula, atom: &dyn Fn(&Atom) -> bool) -> bool {
    use Formula::*;
    match f {
        True => true,
        False => false,
        Atom(a) => atom(a),
        Not(a) => !eval_propositional(a, atom),
        And(a, b) => eval_propositional(a, atom) && eval_propositional(b, atom),
        Or(a, b) => eval_propositional(a, atom) || eval_propositional(b, atom),
        Implies(a, b) => !eval_propositional(a, atom) || eval_propositional(b, atom),
        _ => panic!("{f} is not propositional"),
    }
}

/// `psi` at position 0 of the word over the letters `prefix · cycle^ω`.
pub fn eval_word<L>(psi: &Formula, prefix: &[L], cycle: &[L], holds: &dyn Fn(&L, &Formula) -> bool) -> bool {
    let word: Vec<&L> = prefix.iter().chain(cycle).collect();
    eval_lasso_positions(psi, prefix.len(), word.len(), &|i, g| holds(word[i], g))[0]
}

/// Index of a path subformula in the closure used by the oracle.
struct Closure {
    nodes: Vec<Formula>,
}

impl Closure {
    fn new(psi: &Formula) -> Self {
        let mut nodes = Vec::new();
        fn walk(f: &Formula, nodes: &mut Vec<Formula>) {
            use Formula::*;
            if !f.is_state_formula() {
                match f {
                    Not(a) | Next(a) | Finally(a) | Globally(a) => walk(a, nodes),
                    And(a, b) | Or(a, b) | Implies(a, b) | Until(a, b) | Release(a, b) => {
                        walk(a, nodes);
                        walk(b, nodes);
                    }
                    _ => {}
                }
            }
            if !nodes.contains(f) {
                nodes.push(f.clone());
            }
        }
        walk(psi, &mut nodes);
        Closure { nodes }
    }

    fn idx(&self, f: &Formula) -> usize {
        self.nodes.iter().position(|g| g == f).unwrap()
    }

    /// Values at a position from the state's letter and the next position's values.
    fn step(&self, letter: &dyn Fn(&Formula) -> bool, next: &[bool]) -> Vec<bool> {
        use Formula::*;
        let mut v = vec![false; self.nodes.len()];
        for (i, f) in self.nodes.iter().enumerate() {
            v[i] = match f {
                _ if f.is_state_formula() => letter(f),
                Not(a) => !v[self.idx(a)],
                And(a, b) => v[self.idx(a)] && v[self.idx(b)],
                Or(a, b) => v[self.idx(a)] || v[self.idx(b)],
                Implies(a, b) => !v[self.idx(a)] || v[self.idx(b)],
                Next(a) => next[self.idx(a)],
                Finally(a) => v[self.idx(a)] || next[i],
                Globally(a) => v[self.idx(a)] && next[i],
                Until(a, b) => v[self.idx(b)] || (v[self.idx(a)] && next[i]),
                Release(a, b) => v[self.idx(b)] && (v[self.idx(a)] || next[i]),
                _ => unreachable!(),
            };
        }
        v
    }
}

/// Brute-force CTL* satisfaction. `E ψ` holds at `s` iff some lasso from `s`
/// with prefix ≤ |S| and cycle ≤ |S|·2^t (t = temporal operators in ψ)
/// satisfies ψ. Lassos sharing a cycle are grouped: closure values at the
/// cycle entry are computed once per distinct cycle word, then propagated
/// backwards over prefixes with the one-step equations.
pub fn oracle_sat(k: &KripkeStructure, f: &Formula) -> BTreeSet<StateId> {
    let oracle = Oracle::new(k);
    oracle.sat(f).into_iter().map(|i| oracle.names[i].clone()).collect()
}

pub struct Oracle<'k> {
    k: &'k KripkeStructure,
    pub names: Vec<StateId>,
    succ: Vec<Vec<usize>>,
    cache: RefCell<Vec<(Formula, Vec<bool>)>>,
}

impl<'k> Oracle<'k> {
    pub fn new(k: &'k KripkeStructure) -> Self {
        let names: Vec<StateId> = k.states.iter().cloned().collect();
        let index: BTreeMap<&StateId, usize> = names.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut succ = vec![Vec::new(); names.len()];
        for (a, b) in &k.transitions {
            succ[index[a]].push(index[b]);
        }
        Oracle {
            k,
            names,
            succ,
            cache: RefCell::new(Vec::new()),
        }
    }

    pub fn sat(&self, f: &Formula) -> BTreeSet<usize> {
        (0..self.names.len()).filter(|&s| self.holds(f, s)).collect()
    }

    pub fn holds(&self, f: &Formula, s: usize) -> bool {
        use Formula::*;
        match f {
            True => true,
            False => false,
            Atom(a) => self.k.labeling.get(&self.names[s]).is_some_and(|l| l.contains(a)),
            Not(a) => !self.holds(a, s),
            And(a, b) => self.holds(a, s) && self.holds(b, s),
            Or(a, b) => self.holds(a, s) || self.holds(b, s),
            Implies(a, b) => !self.holds(a, s) || self.holds(b, s),
            Exists(p) => self.exists(p, s),
            Forall(p) => !self.exists(&Formula::not((**p).clone()), s),
            _ => panic!("path formula {f} at a state"),
        }
    }

    /// Evaluates a path formula on a lasso of state indices.
    pub fn path_holds(&self, psi: &Formula, prefix: &[usize], cycle: &[usize]) -> bool {
        eval_word(psi, prefix, cycle, &|s, g| self.holds(g, *s))
    }

    fn exists(&self, psi: &Formula, s: usize) -> bool {
        if let Some((_, v)) = self.cache.borrow().iter().find(|(f, _)| f == psi) {
            return v[s];
        }
        let v = self.exists_all(psi);
        let out = v[s];
        self.cache.borrow_mut().push((psi.clone(), v));
        out
    }

    fn exists_all(&self, psi: &Formula) -> Vec<bool> {
        let n = self.names.len();
        let max_cycle = n << psi.temporal_count();
        let cl = Closure::new(psi);
        let top = cl.idx(psi);
        let letters: Vec<Vec<bool>> = (0..n)
            .map(|st| cl.nodes.iter().map(|g| g.is_state_formula() && self.holds(g, st)).collect())
            .collect();

        // Walks reading the same word are interchangeable, so the search runs
        // over (word, current state) and each cycle word is evaluated once.
        let mut classes: Vec<Vec<bool>> = Vec::new();
        let class_of: Vec<u64> = letters
            .iter()
            .map(|l| match classes.iter().position(|c| c == l) {
                Some(i) => i as u64,
                None => {
                    classes.push(l.clone());
                    (classes.len() - 1) as u64
                }
            })
            .collect();
        let base = classes.len() as u64;
        assert!((base as f64).powi(max_cycle as i32) < u64::MAX as f64, "cycle words must fit a u64 code");
        let mut evaluated: HashMap<(usize, u64), Vec<bool>> = HashMap::new();
        let mut at: Vec<HashSet<Vec<bool>>> = vec![HashSet::new(); n];
        for c0 in 0..n {
            let mut seen = HashSet::new();
            let mut stack = vec![(1usize, class_of[c0], c0)];
            seen.insert((1usize, class_of[c0], c0));
            while let Some((len, code, last)) = stack.pop() {
                if self.succ[last].contains(&c0) {
                    let vals = evaluated.entry((len, code)).or_insert_with(|| {
                        let word: Vec<usize> = (0..len)
                            .map(|i| ((code / base.pow((len - 1 - i) as u32)) % base) as usize)
                            .collect();
                        eval_cycle_entry(&cl, &word, &classes)
                    });
                    at[c0].insert(vals.clone());
                }
                if len == max_cycle {
                    continue;
                }
                for &t in &self.succ[last] {
                    let key = (len + 1, code * base + class_of[t], t);
                    if seen.insert(key) {
                        stack.push(key);
                    }
                }
            }
        }
        // prefixes of length 1..=n, backwards
        let mut layer = at.clone();
        let mut all = at;
        for _ in 0..n {
            let mut next_layer: Vec<HashSet<Vec<bool>>> = vec![HashSet::new(); n];
            for st in 0..n {
                for &t in &self.succ[st] {
                    for v in &layer[t] {
                        let lt = &letters[st];
                        let w = cl.step(&|g| lt[cl.idx(g)], v);
                        next_layer[st].insert(w);
                    }
                }
            }
            for st in 0..n {
                all[st].extend(next_layer[st].iter().cloned());
            }
            layer = next_layer;
        }
        all.iter().map(|vs| vs.iter().any(|v| v[top])).collect()
    }
}

/// Closure values at position 0 of `cycle^ω`; `cycle` holds letter classes.
fn eval_cycle_entry(cl: &Closure, cycle: &[usize], letters: &[Vec<bool>]) -> Vec<bool> {
    cl.nodes
        .iter()
        .map(|g| {
            eval_lasso_positions(g, 0, cycle.len(), &|i, h| letters[cycle[i]][cl.idx(h)])[0]
        })
        .collect()
}

/// Random total structure over states `s0..s{n-1}` labelled with subsets of
/// [`ATOMS`]; every state is initial with probability 1/2 (at least one).
pub fn random_structure(rng: &mut impl Rng, max_states: usize) -> KripkeStructure {
    let n = rng.gen_range(1..=max_states);
    let density: f64 = rng.gen_range(0.15..0.4);
    let mut k = KripkeStructure::new("v");
    let names: Vec<StateId> = (0..n).map(|i| StateId::from(format!("s{i}"))).collect();
    for s in &names {
        k.states.insert(s.clone());
        let labels = ATOMS.iter().filter(|_| rng.gen_bool(0.5)).map(|a| atom(a)).collect();
        k.labeling.insert(s.clone(), labels);
    }
    for a in &names {
        for b in &names {
            if rng.gen_bool(density) {
                k.transitions.insert((a.clone(), b.clone()));
            }
        }
        if !k.transitions.iter().any(|(x, _)| x == a) {
            let b = names.choose(rng).unwrap().clone();
            k.transitions.insert((a.clone(), b));
        }
        if rng.gen_bool(0.5) {
            k.initial.insert(a.clone());
        }
    }
    if k.initial.is_empty() {
        k.initial.insert(names[0].clone());
    }
    k
}

fn random_leaf(rng: &mut impl Rng) -> Formula {
    match rng.gen_range(0..10) {
        0 => Formula::True,
        1 => Formula::False,
        i => Formula::prop(ATOMS[i % 2]),
    }
}

/// Random state formula with at most `temporal` temporal operators.
pub fn random_state_formula(rng: &mut impl Rng, depth: usize, temporal: usize) -> Formula {
    random_state(rng, depth, &mut temporal.clone())
}

fn random_state(rng: &mut impl Rng, depth: usize, budget: &mut usize) -> Formula {
    if depth == 0 {
        return random_leaf(rng);
    }
    match rng.gen_range(0..10) {
        0 => random_leaf(rng),
        1 => Formula::not(random_state(rng, depth - 1, budget)),
        2 => Formula::and(random_state(rng, depth - 1, budget), random_state(rng, depth - 1, budget)),
        3 => Formula::or(random_state(rng, depth - 1, budget), random_state(rng, depth - 1, budget)),
        4 => Formula::implies(random_state(rng, depth - 1, budget), random_state(rng, depth - 1, budget)),
        5..=7 if *budget > 0 => Formula::exists(random_path(rng, depth - 1, budget)),
        8 | 9 if *budget > 0 => Formula::forall(random_path(rng, depth - 1, budget)),
        _ => random_leaf(rng),
    }
}

/// Random path formula; spends at least one temporal operator when the
/// budget allows.
pub fn random_path(rng: &mut impl Rng, depth: usize, budget: &mut usize) -> Formula {
    if depth == 0 || *budget == 0 {
        return random_state(rng, depth.min(1), budget);
    }
    match rng.gen_range(0..12) {
        0 => Formula::not(random_path(rng, depth - 1, budget)),
        1 => Formula::and(random_path(rng, depth - 1, budget), random_path(rng, depth - 1, budget)),
        2 => Formula::or(random_path(rng, depth - 1, budget), random_state(rng, depth - 1, budget)),
        3 => Formula::implies(random_state(rng, depth - 1, budget), random_path(rng, depth - 1, budget)),
        op => {
            *budget -= 1;
            match op {
                4 | 5 => Formula::next(random_path(rng, depth - 1, budget)),
                6 | 7 => Formula::finally(random_path(rng, depth - 1, budget)),
                8 | 9 => Formula::globally(random_path(rng, depth - 1, budget)),
                10 => Formula::until(random_path(rng, depth - 1, budget), random_path(rng, depth - 1, budget)),
                _ => Formula::release(random_path(rng, depth - 1, budget), random_path(rng, depth - 1, budget)),
            }
        }
    }
}

/// Random formula of any class, for syntax tests.
pub fn random_any_formula(rng: &mut impl Rng, depth: usize) -> Formula {
    if depth == 0 {
        return match rng.gen_range(0..4) {
            0 => Formula::True,
            1 => Formula::False,
            2 => Formula::prop(ATOMS[rng.gen_range(0..2)]),
            _ => Formula::Atom(Atom::equality("current_state", ["LAND", "FIN", "OPEN"][rng.gen_range(0..3)]).unwrap()),
        };
    }
    let choice = rng.gen_range(0..14);
    let mut sub = || random_any_formula(rng, depth - 1);
    match choice {
        0 => sub(),
        1 => Formula::not(sub()),
        2 => Formula::and(sub(), sub()),
        3 => Formula::or(sub(), sub()),
        4 => Formula::implies(sub(), sub()),
        5 => Formula::exists(sub()),
        6 => Formula::forall(sub()),
        7 => Formula::next(sub()),
        8 => Formula::finally(sub()),
        9 => Formula::globally(sub()),
        10 => Formula::until(sub(), sub()),
        11 => Formula::release(sub(), sub()),
        _ => Formula::prop(ATOMS[0]),
    }
}

/// Random execution sequences over states `S0..S{states-1}`.
pub fn random_sequences(rng: &mut impl Rng, count: usize, states: usize, max_len: usize) -> Vec<ExecutionSequence> {
    let state = |i: usize| StateId::from(format!("S{i}"));
    (0..count)
        .map(|_| {
            let len = rng.gen_range(0..=max_len);
            let transitions = (0..len)
                .map(|i| TransitionRecord {
                    source: state(rng.gen_range(0..states)),
                    target: state(rng.gen_range(0..states)),
                    line_number: i + 1,
                })
                .collect();
            let initial_observations = if rng.gen_bool(0.5) { vec![state(rng.gen_range(0..states))] } else { vec![] };
            ExecutionSequence {
                inputs: vec![("x".into(), rng.gen_range(0..20))],
                initial_observations,
                transitions,
            }
        })
        .collect()
}

/// Renders sequences in the trace format understood by the parser.
pub fn render_trace(sequences: &[ExecutionSequence]) -> String {
    let mut out = String::from("Exploring synthetic.driver\n");
    for seq in sequences {
        let inputs: Vec<String> = seq.inputs.iter().map(|(n, v)| format!("('{n}', {v})")).collect();
        out.push_str(&format!("[{}]\n", inputs.join(", ")));
        for s in &seq.initial_observations {
            out.push_str(&format!("[initialize]\nState.{s}\n"));
        }
        for t in &seq.transitions {
            out.push_str(&format!("[BEGIN IF]\nState.{}\n->\nState.{}\n[END IF]\n", t.source, t.target));
        }
    }
    out
}
