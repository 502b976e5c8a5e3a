//! Synchronous products with Büchi automata and their emptiness check.
//!
//! A product node `(s, q)` means the system is in `s` and the automaton has
//! just read the letter of `s` on its way into `q`. Acceptance stays
//! generalized: a run is accepting iff it ends in a nontrivial strongly
//! connected component that meets every acceptance set.

use std::collections::{BTreeSet, HashMap, VecDeque};

use super::buchi::{BuchiAutomaton, Literal};
use super::graph::strongly_connected_components;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductGraph {
    /// `(system state, automaton node)` of every product node.
    pub keys: Vec<(usize, usize)>,
    pub succ: Vec<Vec<usize>>,
    /// `accepting[j][n]`: node `n` belongs to acceptance set `j`.
    pub accepting: Vec<Vec<bool>>,
}

/// Infinite run `prefix · cycle^ω` over product nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductLasso {
    pub prefix: Vec<usize>,
    pub cycle: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub component: Vec<usize>,
    /// Node lies in a nontrivial component meeting every acceptance set.
    pub good: Vec<bool>,
    /// An accepting run starts at the node.
    pub live: Vec<bool>,
}

impl ProductGraph {
    /// Plain graph with keys `(i, 0)`; handy for testing the emptiness check.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)], accepting_sets: &[BTreeSet<usize>]) -> Self {
        let mut succ = vec![Vec::new(); node_count];
        for &(a, b) in edges {
            succ[a].push(b);
        }
        for list in &mut succ {
            list.sort_unstable();
            list.dedup();
        }
        ProductGraph {
            keys: (0..node_count).map(|i| (i, 0)).collect(),
            succ,
            accepting: accepting_sets
                .iter()
                .map(|set| (0..node_count).map(|n| set.contains(&n)).collect())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn analyze(&self) -> Analysis {
        let n = self.len();
        let (component, count) = strongly_connected_components(&self.succ);
        let mut size = vec![0usize; count];
        let mut looped = vec![false; count];
        let mut covers = vec![vec![false; self.accepting.len()]; count];
        for v in 0..n {
            let c = component[v];
            size[c] += 1;
            if self.succ[v].contains(&v) {
                looped[c] = true;
            }
            for (j, set) in self.accepting.iter().enumerate() {
                if set[v] {
                    covers[c][j] = true;
                }
            }
        }
        let good_comp: Vec<bool> = (0..count)
            .map(|c| (size[c] > 1 || looped[c]) && covers[c].iter().all(|b| *b))
            .collect();
        let good: Vec<bool> = (0..n).map(|v| good_comp[component[v]]).collect();

        let mut pred = vec![Vec::new(); n];
        for (v, list) in self.succ.iter().enumerate() {
            for &w in list {
                pred[w].push(v);
            }
        }
        let mut live = good.clone();
        let mut work: Vec<usize> = (0..n).filter(|&v| good[v]).collect();
        while let Some(w) = work.pop() {
            for &v in &pred[w] {
                if !live[v] {
                    live[v] = true;
                    work.push(v);
                }
            }
        }
        Analysis { component, good, live }
    }

    /// An accepting run from `from`, if one exists.
    pub fn exists_accepting_run(&self, from: usize) -> Option<ProductLasso> {
        self.accepting_run(&[from], &self.analyze())
    }

    /// Deterministic accepting run from any of `starts`: the prefix is a
    /// shortest path to a node of a good component (smallest key among the
    /// nearest), the cycle then visits every acceptance set inside that
    /// component and returns.
    pub fn accepting_run(&self, starts: &[usize], analysis: &Analysis) -> Option<ProductLasso> {
        if !starts.iter().any(|&s| analysis.live[s]) {
            return None;
        }
        let mut parent: HashMap<usize, Option<usize>> = HashMap::new();
        let mut layer: Vec<usize> = starts.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        for &s in &layer {
            parent.insert(s, None);
        }
        let entry = loop {
            if let Some(&e) = layer.iter().filter(|&&v| analysis.good[v]).min_by_key(|&&v| self.keys[v]) {
                break e;
            }
            let mut next_layer = Vec::new();
            for &v in &layer {
                for &w in &self.succ[v] {
                    if analysis.live[w] && !parent.contains_key(&w) {
                        parent.insert(w, Some(v));
                        next_layer.push(w);
                    }
                }
            }
            if next_layer.is_empty() {
                return None;
            }
            layer = next_layer;
        };

        let mut prefix = Vec::new();
        let mut at = parent[&entry];
        while let Some(v) = at {
            prefix.push(v);
            at = parent[&v];
        }
        prefix.reverse();

        let comp = analysis.component[entry];
        let mut cycle = vec![entry];
        let mut current = entry;
        for set in &self.accepting {
            if cycle.iter().any(|&v| set[v]) {
                continue;
            }
            let path = self.path_within(current, comp, analysis, |v| set[v]);
            current = *path.last().expect("component meets every acceptance set");
            cycle.extend(path);
        }
        let mut back = self.path_within(current, comp, analysis, |v| v == entry);
        back.pop();
        cycle.extend(back);
        Some(ProductLasso { prefix, cycle })
    }

    /// Shortest path of length ≥ 1 from `from` to a node satisfying `goal`,
    /// staying inside component `comp`. Excludes `from`, includes the goal.
    fn path_within(&self, from: usize, comp: usize, analysis: &Analysis, goal: impl Fn(usize) -> bool) -> Vec<usize> {
        let mut parent: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        for &w in &self.succ[from] {
            if analysis.component[w] == comp && !parent.contains_key(&w) {
                parent.insert(w, from);
                queue.push_back(w);
            }
        }
        while let Some(v) = queue.pop_front() {
            if goal(v) {
                // Every node whose parent is `from` is a first step, since
                // BFS never re-expands `from` before its successors.
                let mut path = vec![v];
                let mut at = v;
                while parent[&at] != from {
                    at = parent[&at];
                    path.push(at);
                }
                path.reverse();
                return path;
            }
            for &w in &self.succ[v] {
                if analysis.component[w] == comp && !parent.contains_key(&w) {
                    parent.insert(w, v);
                    queue.push_back(w);
                }
            }
        }
        unreachable!("target lies in the same nontrivial component")
    }
}

/// Explores the product of a finite system (successor lists) with `aut`,
/// starting from each of `sources`. Returns the graph and, per source, its
/// start nodes.
pub(crate) fn build_product<P>(
    aut: &BuchiAutomaton<P>,
    sources: &[usize],
    succ: &[Vec<usize>],
    guard_holds: impl Fn(&[Literal<P>], usize) -> bool,
) -> (ProductGraph, Vec<Vec<usize>>) {
    let out = aut.out_edges();
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut keys: Vec<(usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |key: (usize, usize), keys: &mut Vec<(usize, usize)>, queue: &mut VecDeque<usize>| {
        *ids.entry(key).or_insert_with(|| {
            keys.push(key);
            queue.push_back(keys.len() - 1);
            keys.len() - 1
        })
    };

    let mut starts = Vec::with_capacity(sources.len());
    for &s in sources {
        let mut mine = Vec::new();
        for &q0 in &aut.initial {
            for e in &out[q0] {
                if guard_holds(&e.guard, s) {
                    mine.push(intern((s, e.to), &mut keys, &mut queue));
                }
            }
        }
        mine.sort_unstable();
        mine.dedup();
        starts.push(mine);
    }

    let mut product_succ: Vec<Vec<usize>> = Vec::new();
    while let Some(v) = queue.pop_front() {
        let (s, q) = keys[v];
        let mut list = Vec::new();
        for &t in &succ[s] {
            for e in &out[q] {
                if guard_holds(&e.guard, t) {
                    list.push(intern((t, e.to), &mut keys, &mut queue));
                }
            }
        }
        list.sort_unstable();
        list.dedup();
        if product_succ.len() <= v {
            product_succ.resize(v + 1, Vec::new());
        }
        product_succ[v] = list;
    }
    product_succ.resize(keys.len(), Vec::new());

    let accepting = aut
        .accepting_sets
        .iter()
        .map(|set| keys.iter().map(|(_, q)| set.contains(q)).collect())
        .collect();
    (
        ProductGraph {
            keys,
            succ: product_succ,
            accepting,
        },
        starts,
    )
}
