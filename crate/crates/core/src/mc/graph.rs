//! Dense index view of a Kripke structure plus graph utilities shared by the
//! fixpoint and automata engines.

use std::collections::{BTreeMap, BTreeSet};

use crate::formula::Atom;
use crate::kripke::{KripkeStructure, StateId};

/// Membership vector over state indices.
pub(crate) type StateSet = Vec<bool>;

pub(crate) struct IndexedModel<'k> {
    pub k: &'k KripkeStructure,
    pub names: Vec<&'k StateId>,
    pub index: BTreeMap<&'k StateId, usize>,
    pub succ: Vec<Vec<usize>>,
    pub pred: Vec<Vec<usize>>,
}

impl<'k> IndexedModel<'k> {
    pub fn new(k: &'k KripkeStructure) -> Self {
        let names: Vec<&StateId> = k.states.iter().collect();
        let index: BTreeMap<&StateId, usize> = names.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut succ = vec![Vec::new(); names.len()];
        let mut pred = vec![Vec::new(); names.len()];
        for (a, b) in &k.transitions {
            if let (Some(&i), Some(&j)) = (index.get(a), index.get(b)) {
                succ[i].push(j);
                pred[j].push(i);
            }
        }
        for list in succ.iter_mut().chain(pred.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        IndexedModel {
            k,
            names,
            index,
            succ,
            pred,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn full(&self) -> StateSet {
        vec![true; self.len()]
    }

    pub fn atom_set(&self, atom: &Atom) -> StateSet {
        self.names
            .iter()
            .map(|s| self.k.labeling.get(*s).is_some_and(|ls| ls.contains(atom)))
            .collect()
    }

    pub fn to_ids(&self, set: &StateSet) -> BTreeSet<StateId> {
        set.iter()
            .zip(&self.names)
            .filter(|(m, _)| **m)
            .map(|(_, s)| (*s).clone())
            .collect()
    }

    pub fn set_of(&self, ids: &BTreeSet<StateId>) -> StateSet {
        let mut out = vec![false; self.len()];
        for id in ids {
            if let Some(&i) = self.index.get(id) {
                out[i] = true;
            }
        }
        out
    }
}

pub(crate) fn complement(set: &StateSet) -> StateSet {
    set.iter().map(|b| !b).collect()
}

pub(crate) fn intersect(a: &StateSet, b: &StateSet) -> StateSet {
    a.iter().zip(b).map(|(x, y)| *x && *y).collect()
}

pub(crate) fn union(a: &StateSet, b: &StateSet) -> StateSet {
    a.iter().zip(b).map(|(x, y)| *x || *y).collect()
}

/// Iterative Tarjan. Returns the component of every node and the number of
/// components; components are numbered in reverse topological order.
pub fn strongly_connected_components(succ: &[Vec<usize>]) -> (Vec<usize>, usize) {
    const UNSEEN: usize = usize::MAX;
    let n = succ.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next_index = 0;
    let mut count = 0;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, 0));

        while let Some(&(v, edge)) = call.last() {
            if edge < succ[v].len() {
                call.last_mut().unwrap().1 += 1;
                let w = succ[v][edge];
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(u, _)) = call.last() {
                low[u] = low[u].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack holds the component");
                    on_stack[w] = false;
                    comp[w] = count;
                    if w == v {
                        break;
                    }
                }
                count += 1;
            }
        }
    }
    (comp, count)
}
