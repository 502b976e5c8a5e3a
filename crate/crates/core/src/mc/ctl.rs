//! Backward fixpoints for the CTL fragment.

use std::collections::BTreeSet;

use super::graph::{intersect, strongly_connected_components, IndexedModel, StateSet};
use crate::kripke::{KripkeStructure, StateId};

/// States with some successor in `target`.
pub(crate) fn ex(m: &IndexedModel, target: &StateSet) -> StateSet {
    (0..m.len()).map(|s| m.succ[s].iter().any(|&t| target[t])).collect()
}

/// Least fixpoint of `right ∪ (left ∩ EX Z)`.
pub(crate) fn eu(m: &IndexedModel, left: &StateSet, right: &StateSet) -> StateSet {
    let mut sat = right.clone();
    let mut work: Vec<usize> = (0..m.len()).filter(|&s| right[s]).collect();
    while let Some(t) = work.pop() {
        for &p in &m.pred[t] {
            if !sat[p] && left[p] {
                sat[p] = true;
                work.push(p);
            }
        }
    }
    sat
}

/// Greatest fixpoint of `operand ∩ EX Z`: states of `operand` that can reach,
/// inside `operand`, a nontrivial strongly connected component of `operand`.
pub(crate) fn eg(m: &IndexedModel, operand: &StateSet) -> StateSet {
    let n = m.len();
    let restricted: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            if operand[s] {
                m.succ[s].iter().copied().filter(|&t| operand[t]).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    let (comp, count) = strongly_connected_components(&restricted);
    let mut size = vec![0usize; count];
    for &c in &comp {
        size[c] += 1;
    }
    let mut sat = vec![false; n];
    let mut work = Vec::new();
    for s in 0..n {
        let nontrivial = size[comp[s]] > 1 || restricted[s].contains(&s);
        if operand[s] && nontrivial {
            sat[s] = true;
            work.push(s);
        }
    }
    while let Some(t) = work.pop() {
        for &p in &m.pred[t] {
            if !sat[p] && operand[p] {
                sat[p] = true;
                work.push(p);
            }
        }
    }
    sat
}

/// `E(g R h) = E(h U (g ∧ h)) ∪ EG h`.
pub(crate) fn er(m: &IndexedModel, g: &StateSet, h: &StateSet) -> StateSet {
    let until = eu(m, h, &intersect(g, h));
    let always = eg(m, h);
    until.iter().zip(&always).map(|(a, b)| *a || *b).collect()
}

pub fn sat_ex(k: &KripkeStructure, target: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    let m = IndexedModel::new(k);
    m.to_ids(&ex(&m, &m.set_of(target)))
}

pub fn sat_eu(k: &KripkeStructure, left: &BTreeSet<StateId>, right: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    let m = IndexedModel::new(k);
    m.to_ids(&eu(&m, &m.set_of(left), &m.set_of(right)))
}

pub fn sat_eg(k: &KripkeStructure, operand: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    let m = IndexedModel::new(k);
    m.to_ids(&eg(&m, &m.set_of(operand)))
}
