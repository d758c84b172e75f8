//! Finite-trace satisfaction and a brute-force satisfiability oracle.
//!
//! Both are driven by the same backward pass: the truth of every subformula
//! on the suffix starting at position `i` depends only on the valuation at
//! `i` and the truth vector of the suffix at `i + 1` (absent at the last
//! position).

use crate::formula::{FiniteTrace, Formula, Kind};
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

/// Largest alphabet `brute_force_sat` accepts.
pub const MAX_BRUTE_FORCE_ATOMS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("alphabet of {0} atoms exceeds the brute-force limit of {MAX_BRUTE_FORCE_ATOMS}")]
    AlphabetTooLarge(usize),
    #[error("trace length bound must be positive")]
    ZeroBound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BruteForceOutcome {
    /// A shortest satisfying trace.
    Sat(FiniteTrace),
    /// No trace of length at most the bound satisfies the formula.
    UnsatUpToBound(usize),
}

impl BruteForceOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, BruteForceOutcome::Sat(_))
    }
}

enum Op {
    True,
    False,
    Atom(String),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Next(usize),
    WeakNext(usize),
    Until(usize, usize),
    Release(usize, usize),
}

/// Subformula table in post order; the root is the last entry.
struct SuffixTable {
    ops: Vec<Op>,
}

impl SuffixTable {
    fn new(f: &Formula) -> Self {
        let subs = f.subformulas_postorder();
        let index: HashMap<&Formula, usize> = subs.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let ops = subs
            .iter()
            .map(|s| match s.kind() {
                Kind::True => Op::True,
                Kind::False => Op::False,
                Kind::Atom(name) => Op::Atom(name.to_string()),
                Kind::Not(a) => Op::Not(index[a]),
                Kind::And(a, b) => Op::And(index[a], index[b]),
                Kind::Or(a, b) => Op::Or(index[a], index[b]),
                Kind::Next(a) => Op::Next(index[a]),
                Kind::WeakNext(a) => Op::WeakNext(index[a]),
                Kind::Until(a, b) => Op::Until(index[a], index[b]),
                Kind::Release(a, b) => Op::Release(index[a], index[b]),
            })
            .collect();
        SuffixTable { ops }
    }

    fn root(&self) -> usize {
        self.ops.len() - 1
    }

    fn step(&self, holds: impl Fn(&str) -> bool, next: Option<&[bool]>) -> Vec<bool> {
        let mut v: Vec<bool> = Vec::with_capacity(self.ops.len());
        let later = |i: usize| next.is_some_and(|n| n[i]);
        for (idx, op) in self.ops.iter().enumerate() {
            let val = match op {
                Op::True => true,
                Op::False => false,
                Op::Atom(name) => holds(name),
                Op::Not(a) => !v[*a],
                Op::And(a, b) => v[*a] && v[*b],
                Op::Or(a, b) => v[*a] || v[*b],
                Op::Next(a) => later(*a),
                Op::WeakNext(a) => next.is_none() || later(*a),
                Op::Until(a, b) => v[*b] || (v[*a] && later(idx)),
                Op::Release(a, b) => v[*b] && (v[*a] || next.is_none() || later(idx)),
            };
            v.push(val);
        }
        v
    }
}

/// Whether `trace` satisfies `f`. Atoms missing from a position are false.
pub fn evaluate(trace: &FiniteTrace, f: &Formula) -> bool {
    let table = SuffixTable::new(f);
    let mut next: Option<Vec<bool>> = None;
    for i in (0..trace.len()).rev() {
        let v = table.step(|a| trace.holds(i, a), next.as_deref());
        next = Some(v);
    }
    next.expect("traces are nonempty")[table.root()]
}

/// Searches traces over the atoms of `f` by increasing length, and within a
/// length in binary-counting order of valuations over the sorted alphabet.
/// Suffixes with identical subformula truth vectors are explored once, so
/// the search stops early when no new vector appears.
pub fn brute_force_sat(f: &Formula, max_len: usize) -> Result<BruteForceOutcome, SemanticsError> {
    if max_len == 0 {
        return Err(SemanticsError::ZeroBound);
    }
    let alphabet: Vec<String> = f.atoms().into_iter().collect();
    if alphabet.len() > MAX_BRUTE_FORCE_ATOMS {
        return Err(SemanticsError::AlphabetTooLarge(alphabet.len()));
    }
    let table = SuffixTable::new(f);
    let root = table.root();
    let valuations: Vec<u32> = (0..1u32 << alphabet.len()).collect();
    let alpha = &alphabet;
    let holds = |bits: u32| move |a: &str| alpha.iter().position(|x| x == a).is_some_and(|k| bits >> k & 1 == 1);

    // Each node: (truth vector, valuation at its first position, suffix node).
    let mut nodes: Vec<(Vec<bool>, u32, Option<usize>)> = Vec::new();
    let mut seen: HashMap<Vec<bool>, usize> = HashMap::new();
    let witness = |nodes: &Vec<(Vec<bool>, u32, Option<usize>)>, mut id: usize| {
        let mut positions = Vec::new();
        loop {
            let (_, bits, parent) = &nodes[id];
            let pos: BTreeSet<String> = alphabet
                .iter()
                .enumerate()
                .filter(|(k, _)| bits >> k & 1 == 1)
                .map(|(_, a)| a.clone())
                .collect();
            positions.push(pos);
            match parent {
                Some(p) => id = *p,
                None => break,
            }
        }
        FiniteTrace::new(positions).expect("nonempty")
    };

    let mut frontier: Vec<Option<usize>> = vec![None];
    for _len in 1..=max_len {
        let mut next_frontier = Vec::new();
        for parent in &frontier {
            for &bits in &valuations {
                let v = table.step(holds(bits), parent.map(|p| nodes[p].0.as_slice()));
                if seen.contains_key(&v) {
                    continue;
                }
                let sat = v[root];
                let id = nodes.len();
                seen.insert(v.clone(), id);
                nodes.push((v, bits, *parent));
                if sat {
                    let trace = witness(&nodes, id);
                    assert!(evaluate(&trace, f), "brute-force witness fails evaluation");
                    return Ok(BruteForceOutcome::Sat(trace));
                }
                next_frontier.push(Some(id));
            }
        }
        if next_frontier.is_empty() {
            break;
        }
        frontier = next_frontier;
    }
    Ok(BruteForceOutcome::UnsatUpToBound(max_len))
}
