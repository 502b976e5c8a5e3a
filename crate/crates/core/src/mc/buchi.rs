//! LTL to generalized Büchi automata by tableau node splitting.
//!
//! The formula is normalized, put into negation normal form over
//! {true, false, literals, ∧, ∨, X, U, R}, and expanded into tableau nodes
//! `(incoming, old, next)`. Node 0 is a synthetic initial node; an edge into
//! node `n` is guarded by the literals in `old(n)`, so the letter at position
//! `i` is read on the `i`-th edge of a run. There is one acceptance set per
//! until-subformula `a U b`: the nodes where it is not pending or `b` holds.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::product::{build_product, ProductGraph};
use super::McError;
use crate::formula::{Atom, Formula};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal<P> {
    pub prop: P,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuchiEdge<P> {
    pub from: usize,
    /// Conjunction of literals; empty means `true`.
    pub guard: Vec<Literal<P>>,
    pub to: usize,
}

/// Generalized Büchi automaton with literal-set guards. Nodes are `0..node_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuchiAutomaton<P> {
    pub node_count: usize,
    pub initial: Vec<usize>,
    pub edges: Vec<BuchiEdge<P>>,
    pub accepting_sets: Vec<BTreeSet<usize>>,
}

impl<P> BuchiAutomaton<P> {
    pub fn out_edges(&self) -> Vec<Vec<&BuchiEdge<P>>> {
        let mut out = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            out[e.from].push(e);
        }
        out
    }

    /// Whether the ultimately periodic word `prefix · cycle^ω` is accepted.
    /// `holds(letter, prop)` evaluates a proposition on a letter.
    pub fn accepts_lasso<V>(&self, prefix: &[V], cycle: &[V], holds: impl Fn(&V, &P) -> bool) -> bool {
        assert!(!cycle.is_empty(), "a lasso word needs a nonempty cycle");
        let word: Vec<&V> = prefix.iter().chain(cycle).collect();
        let next: Vec<Vec<usize>> = (0..word.len())
            .map(|i| vec![if i + 1 < word.len() { i + 1 } else { prefix.len() }])
            .collect();
        let (graph, starts) = build_product(self, &[0], &next, |guard, pos| {
            guard.iter().all(|l| holds(word[pos], &l.prop) == l.positive)
        });
        let analysis = graph.analyze();
        starts[0].iter().any(|&n| analysis.live[n])
    }

    pub(crate) fn map_props<Q>(self, f: impl Fn(P) -> Q) -> BuchiAutomaton<Q> {
        BuchiAutomaton {
            node_count: self.node_count,
            initial: self.initial,
            edges: self
                .edges
                .into_iter()
                .map(|e| BuchiEdge {
                    from: e.from,
                    guard: e
                        .guard
                        .into_iter()
                        .map(|l| Literal {
                            prop: f(l.prop),
                            positive: l.positive,
                        })
                        .collect(),
                    to: e.to,
                })
                .collect(),
            accepting_sets: self.accepting_sets,
        }
    }
}

impl BuchiAutomaton<usize> {
    /// Product with an arbitrary finite system, exposed for tests that want
    /// the raw graph.
    pub fn product_with(&self, succ: &[Vec<usize>], holds: impl Fn(usize, usize) -> bool) -> (ProductGraph, Vec<Vec<usize>>) {
        let sources: Vec<usize> = (0..succ.len()).collect();
        build_product(self, &sources, succ, |guard, s| guard.iter().all(|l| holds(s, l.prop) == l.positive))
    }
}

type Id = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(usize, bool),
    And(Id, Id),
    Or(Id, Id),
    Next(Id),
    Until(Id, Id),
    Release(Id, Id),
}

#[derive(Default)]
struct Arena {
    nodes: Vec<Node>,
    ids: HashMap<Node, Id>,
}

impl Arena {
    fn intern(&mut self, node: Node) -> Id {
        let node = match node {
            Node::And(a, b) => match (self.nodes[a], self.nodes[b]) {
                (Node::False, _) | (_, Node::False) => Node::False,
                (Node::True, _) => return b,
                (_, Node::True) => return a,
                _ if a == b => return a,
                _ => node,
            },
            Node::Or(a, b) => match (self.nodes[a], self.nodes[b]) {
                (Node::True, _) | (_, Node::True) => Node::True,
                (Node::False, _) => return b,
                (_, Node::False) => return a,
                _ if a == b => return a,
                _ => node,
            },
            _ => node,
        };
        if let Some(&id) = self.ids.get(&node) {
            return id;
        }
        self.nodes.push(node);
        self.ids.insert(node, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    /// Negation normal form of a formula in the normalized basis.
    fn nnf(&mut self, f: &Formula, positive: bool, props: &BTreeMap<Atom, usize>) -> Id {
        match f {
            Formula::True => self.intern(if positive { Node::True } else { Node::False }),
            Formula::Atom(a) => self.intern(Node::Lit(props[a], positive)),
            Formula::Not(g) => self.nnf(g, !positive, props),
            Formula::And(a, b) => {
                let (x, y) = (self.nnf(a, positive, props), self.nnf(b, positive, props));
                self.intern(if positive { Node::And(x, y) } else { Node::Or(x, y) })
            }
            Formula::Next(g) => {
                let x = self.nnf(g, positive, props);
                self.intern(Node::Next(x))
            }
            Formula::Until(a, b) => {
                let (x, y) = (self.nnf(a, positive, props), self.nnf(b, positive, props));
                self.intern(if positive { Node::Until(x, y) } else { Node::Release(x, y) })
            }
            other => unreachable!("not in the normalized basis: {other}"),
        }
    }
}

#[derive(Clone)]
struct Pending {
    incoming: BTreeSet<usize>,
    new: BTreeSet<Id>,
    old: BTreeSet<Id>,
    next: BTreeSet<Id>,
}

struct Finished {
    incoming: BTreeSet<usize>,
    old: BTreeSet<Id>,
    next: BTreeSet<Id>,
}

fn expand(arena: &Arena, root: Id) -> Vec<Finished> {
    let mut done: Vec<Finished> = Vec::new();
    let mut stack = vec![Pending {
        incoming: [0].into(),
        new: [root].into(),
        old: BTreeSet::new(),
        next: BTreeSet::new(),
    }];

    'nodes: while let Some(mut node) = stack.pop() {
        loop {
            let Some(eta) = node.new.pop_first() else {
                if let Some(existing) = done.iter_mut().find(|d| d.old == node.old && d.next == node.next) {
                    existing.incoming.extend(node.incoming);
                } else {
                    let id = done.len() + 1;
                    stack.push(Pending {
                        incoming: [id].into(),
                        new: node.next.clone(),
                        old: BTreeSet::new(),
                        next: BTreeSet::new(),
                    });
                    done.push(Finished {
                        incoming: node.incoming,
                        old: node.old,
                        next: node.next,
                    });
                }
                continue 'nodes;
            };
            if node.old.contains(&eta) {
                continue;
            }
            let split = |node: &Pending, now: &[Id], later: Option<Id>| {
                let mut n = node.clone();
                n.new.extend(now.iter().copied().filter(|x| !node.old.contains(x)));
                n.next.extend(later);
                n.old.insert(eta);
                n
            };
            match arena.nodes[eta] {
                Node::False => continue 'nodes,
                Node::True => {
                    node.old.insert(eta);
                }
                Node::Lit(p, pos) => {
                    let clash = arena.ids.get(&Node::Lit(p, !pos)).is_some_and(|n| node.old.contains(n));
                    if clash {
                        continue 'nodes;
                    }
                    node.old.insert(eta);
                }
                Node::And(a, b) => node = split(&node, &[a, b], None),
                Node::Next(a) => {
                    node.old.insert(eta);
                    node.next.insert(a);
                }
                Node::Or(a, b) => {
                    stack.push(split(&node, &[b], None));
                    node = split(&node, &[a], None);
                }
                Node::Until(a, b) => {
                    stack.push(split(&node, &[b], None));
                    node = split(&node, &[a], Some(eta));
                }
                Node::Release(a, b) => {
                    stack.push(split(&node, &[a, b], None));
                    node = split(&node, &[b], Some(eta));
                }
            }
        }
    }
    done
}

/// Translation over proposition indices; returns the automaton and the atom
/// behind each index.
pub(crate) fn translate(psi: &Formula) -> Result<(BuchiAutomaton<usize>, Vec<Atom>), McError> {
    if psi.has_quantifier() {
        return Err(McError::QuantifierPresent(psi.to_string()));
    }
    let atoms: Vec<Atom> = psi.atoms().into_iter().collect();
    let props: BTreeMap<Atom, usize> = atoms.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
    let mut arena = Arena::default();
    let root = arena.nnf(&psi.normalize(), true, &props);
    let done = expand(&arena, root);

    let mut edges = Vec::new();
    for (j, node) in done.iter().enumerate() {
        let guard: Vec<Literal<usize>> = node
            .old
            .iter()
            .filter_map(|&f| match arena.nodes[f] {
                Node::Lit(p, positive) => Some(Literal { prop: p, positive }),
                _ => None,
            })
            .collect();
        for &from in &node.incoming {
            edges.push(BuchiEdge {
                from,
                guard: guard.clone(),
                to: j + 1,
            });
        }
    }
    edges.sort_by_key(|e| (e.from, e.to));

    let mut accepting_sets: Vec<BTreeSet<usize>> = arena
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(u, n)| match n {
            Node::Until(_, b) => Some(
                done.iter()
                    .enumerate()
                    .filter(|(_, d)| !d.old.contains(&u) || d.old.contains(b))
                    .map(|(j, _)| j + 1)
                    .collect(),
            ),
            _ => None,
        })
        .collect();
    if accepting_sets.is_empty() {
        accepting_sets.push((1..=done.len()).collect());
    }

    Ok((
        BuchiAutomaton {
            node_count: done.len() + 1,
            initial: vec![0],
            edges,
            accepting_sets,
        },
        atoms,
    ))
}

/// Automaton accepting exactly the words over sets of atoms that satisfy the
/// quantifier-free formula `psi`.
pub fn ltl_to_buchi(psi: &Formula) -> Result<BuchiAutomaton<Atom>, McError> {
    let (aut, atoms) = translate(psi)?;
    Ok(aut.map_props(|i| atoms[i].clone()))
}
