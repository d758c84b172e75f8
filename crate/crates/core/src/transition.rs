//! The transition system over formula-set states, explored one SAT query at
//! a time, and the exhaustive breadth-first oracle built on it.

use crate::abstraction::{AbstractionError, Assignment, Context, Encoder, Group, QueryResult, UnsatCore};
use crate::formula::{to_nnf, to_tnf, FiniteTrace, Formula, Kind, NormalFormError};
use crate::semantics::evaluate;
use std::collections::{HashMap, VecDeque};
use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Default cap on the number of states an exhaustive build may create.
pub const DEFAULT_STATE_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InputError {
    #[error(transparent)]
    NormalForm(#[from] NormalFormError),
    #[error("raw TNF input must not use weak next after negation normal form: {0}")]
    WeakNext(Formula),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("state limit of {0} exceeded")]
    StateLimit(usize),
    #[error("timed out")]
    Timeout,
    #[error("internal error: witness {0:?} does not satisfy the input formula")]
    WitnessRejected(FiniteTrace),
}

impl From<AbstractionError> for SearchError {
    fn from(e: AbstractionError) -> Self {
        match e {
            AbstractionError::WeakNext(f) => SearchError::Input(InputError::WeakNext(f)),
            AbstractionError::Interrupted(_) => SearchError::Timeout,
        }
    }
}

/// The formula the search runs on: `tnf(nnf(f))`, or in raw mode `nnf(f)`
/// taken as already being in tail normal form.
pub fn prepare(f: &Formula, raw_tnf: bool) -> Result<Formula, InputError> {
    let nnf = to_nnf(f);
    if !raw_tnf {
        return Ok(to_tnf(&nnf)?);
    }
    if nnf.contains_weak_next() {
        return Err(InputError::WeakNext(nnf));
    }
    Ok(nnf)
}

/// Whether a `Tail`-free witness satisfies the input. In raw mode the input
/// speaks about `Tail` itself, so the marker is put back on the last position.
pub fn witness_holds(original: &Formula, trace: &FiniteTrace, raw_tnf: bool) -> bool {
    if raw_tnf {
        evaluate(&trace.with_tail_marker(), original)
    } else {
        evaluate(trace, original)
    }
}

/// A set of formulas read as their conjunction. Top-level conjunctions are
/// split into their conjuncts; the empty set is represented as `{true}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(Vec<Formula>);

impl State {
    pub fn new(formulas: impl IntoIterator<Item = Formula>) -> State {
        let mut members: Vec<Formula> = formulas
            .into_iter()
            .flat_map(|f| f.conjuncts())
            .filter(|f| !matches!(f.kind(), Kind::True))
            .collect();
        members.sort();
        members.dedup();
        if members.is_empty() {
            members.push(Formula::tt());
        }
        State(members)
    }

    pub fn initial(f: &Formula) -> State {
        State::new([f.clone()])
    }

    /// Sorted members.
    pub fn members(&self) -> &[Formula] {
        &self.0
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.0.binary_search(f).is_ok()
    }

    /// Whether some core lies inside this state.
    pub fn covered_by<'a>(&self, cores: impl IntoIterator<Item = &'a UnsatCore>) -> bool {
        cores.into_iter().any(|c| c.is_subset_of(&self.0))
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finality {
    /// The model's literals form the last position of a witness.
    Final(Assignment),
    NotFinal(UnsatCore),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Edge { label: Assignment, target: State },
    /// No successor avoids the blocked cores, already for this core.
    Blocked(UnsatCore),
}

/// Successor and finality queries for the states of one formula.
pub struct Explorer {
    enc: Encoder,
}

impl Explorer {
    pub fn new(root: &Formula) -> Self {
        Explorer {
            enc: Encoder::new(root),
        }
    }

    pub fn encoder(&mut self) -> &mut Encoder {
        &mut self.enc
    }

    pub fn sat_calls(&self) -> u64 {
        self.enc.sat_calls()
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.enc.set_deadline(deadline);
    }

    pub fn is_final(&mut self, s: &State) -> Result<Finality, AbstractionError> {
        Ok(match self.enc.query(s.members(), Context::Final, &[])? {
            QueryResult::Sat(a) => Finality::Final(a),
            QueryResult::Unsat(c) => Finality::NotFinal(c),
        })
    }

    /// One successor of `s` that avoids every core blocked in `groups`.
    pub fn step(&mut self, s: &State, groups: &[Group]) -> Result<Step, AbstractionError> {
        Ok(match self.enc.query(s.members(), Context::Step, groups)? {
            QueryResult::Sat(label) => {
                let target = State::new(label.successor());
                Step::Edge { label, target }
            }
            QueryResult::Unsat(c) => Step::Blocked(c),
        })
    }

    /// Like [`Explorer::step`] with an explicit list of blocked cores.
    pub fn next_state(&mut self, s: &State, blocked: &[UnsatCore]) -> Result<Step, AbstractionError> {
        let g = self.enc.new_group();
        for c in blocked {
            self.enc.block_core(g, c);
        }
        let r = self.step(s, &[g]);
        self.enc.retire(g);
        r
    }

    /// Every successor of `s`, one edge per distinct set of true next atoms.
    pub fn successors(&mut self, s: &State) -> Result<Vec<(Assignment, State)>, AbstractionError> {
        let g = self.enc.new_group();
        let mut out = Vec::new();
        let r = loop {
            match self.enc.query(s.members(), Context::Step, &[g]) {
                Ok(QueryResult::Sat(a)) => {
                    self.enc.block_projection(g, &a);
                    let t = State::new(a.successor());
                    out.push((a, t));
                }
                Ok(QueryResult::Unsat(_)) => break Ok(out),
                Err(e) => break Err(e),
            }
        };
        self.enc.retire(g);
        r
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub label: Assignment,
    pub to: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Keep going after the first final state.
    pub exhaustive: bool,
    pub state_limit: usize,
    pub timeout: Option<Duration>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            exhaustive: false,
            state_limit: DEFAULT_STATE_LIMIT,
            timeout: None,
        }
    }
}

/// States discovered breadth first from the initial state. State 0 is the
/// initial state; every other state records the edge it was discovered by.
#[derive(Debug, Clone)]
pub struct TransitionSystem {
    states: Vec<State>,
    index: HashMap<State, usize>,
    edges: Vec<Edge>,
    finals: Vec<Option<Assignment>>,
    parent: Vec<Option<usize>>,
    complete: bool,
    sat_calls: u64,
}

impl TransitionSystem {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &State {
        &self.states[i]
    }

    pub fn index_of(&self, s: &State) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Targets of the edges leaving state `i`.
    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.from == i).map(|e| e.to)
    }

    pub fn is_final(&self, i: usize) -> bool {
        self.finals[i].is_some()
    }

    pub fn final_model(&self, i: usize) -> Option<&Assignment> {
        self.finals[i].as_ref()
    }

    pub fn first_final(&self) -> Option<usize> {
        (0..self.len()).find(|i| self.is_final(*i))
    }

    /// Whether every reachable state was expanded.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn sat_calls(&self) -> u64 {
        self.sat_calls
    }

    /// Edge indices of the discovery path from the initial state to `i`.
    pub fn path_to(&self, mut i: usize) -> Vec<usize> {
        let mut path = Vec::new();
        while let Some(e) = self.parent[i] {
            path.push(e);
            i = self.edges[e].from;
        }
        path.reverse();
        path
    }

    /// The trace spelled by the discovery path to final state `i`, closed by
    /// the final model, with `Tail` dropped.
    pub fn witness(&self, i: usize) -> Option<FiniteTrace> {
        let last = self.finals[i].as_ref()?;
        let mut positions: Vec<_> = self
            .path_to(i)
            .into_iter()
            .map(|e| self.edges[e].label.position())
            .collect();
        positions.push(last.position());
        Some(FiniteTrace::new(positions).expect("nonempty"))
    }

    /// Graphviz rendering; final states are drawn with a double circle.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph ts {\n  node [shape=box];\n");
        for (i, s) in self.states.iter().enumerate() {
            let shape = if self.is_final(i) { ", peripheries=2" } else { "" };
            let _ = writeln!(out, "  n{i} [label=\"{}\"{shape}];", escape(&s.to_string()));
        }
        for e in &self.edges {
            let label = e
                .label
                .literals()
                .into_iter()
                .map(|(n, v)| if v { n } else { format!("!{n}") })
                .collect::<Vec<_>>()
                .join(", ");
            let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", e.from, e.to, escape(&label));
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Breadth-first construction from `{f}`, where `f` is already prepared.
/// Stops at the first final state unless `exhaustive` is set.
pub fn build_full_system(f: &Formula, opts: &BuildOptions) -> Result<TransitionSystem, SearchError> {
    let mut ex = Explorer::new(f);
    ex.set_deadline(opts.timeout.map(|t| Instant::now() + t));
    let s0 = State::initial(f);
    let mut ts = TransitionSystem {
        states: vec![],
        index: HashMap::new(),
        edges: vec![],
        finals: vec![],
        parent: vec![],
        complete: false,
        sat_calls: 0,
    };
    let mut queue = VecDeque::new();
    let discover = |ts: &mut TransitionSystem,
                        ex: &mut Explorer,
                        s: State,
                        parent: Option<usize>|
     -> Result<(usize, bool), SearchError> {
        if let Some(&i) = ts.index.get(&s) {
            return Ok((i, false));
        }
        if ts.states.len() >= opts.state_limit {
            return Err(SearchError::StateLimit(opts.state_limit));
        }
        let fin = match ex.is_final(&s)? {
            Finality::Final(a) => Some(a),
            Finality::NotFinal(_) => None,
        };
        let i = ts.states.len();
        ts.index.insert(s.clone(), i);
        ts.states.push(s);
        ts.finals.push(fin);
        ts.parent.push(parent);
        Ok((i, true))
    };

    let (i0, _) = discover(&mut ts, &mut ex, s0, None)?;
    queue.push_back(i0);
    let stop_early = |ts: &TransitionSystem, i: usize| !opts.exhaustive && ts.is_final(i);
    if stop_early(&ts, i0) {
        ts.sat_calls = ex.sat_calls();
        return Ok(ts);
    }
    while let Some(i) = queue.pop_front() {
        let s = ts.states[i].clone();
        for (label, t) in ex.successors(&s)? {
            let edge = ts.edges.len();
            let (j, fresh) = discover(&mut ts, &mut ex, t, Some(edge))?;
            ts.edges.push(Edge { from: i, label, to: j });
            if fresh {
                if stop_early(&ts, j) {
                    ts.sat_calls = ex.sat_calls();
                    return Ok(ts);
                }
                queue.push_back(j);
            }
        }
    }
    ts.complete = true;
    ts.sat_calls = ex.sat_calls();
    Ok(ts)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NaiveVerdict {
    Sat(FiniteTrace),
    Unsat,
}

#[derive(Debug, Clone)]
pub struct NaiveOutcome {
    pub verdict: NaiveVerdict,
    pub states_expanded: usize,
    pub sat_calls: u64,
    pub elapsed: Duration,
}

/// Complete check by exhaustive search for a final state.
pub fn naive_check(
    original: &Formula,
    raw_tnf: bool,
    opts: &BuildOptions,
) -> Result<NaiveOutcome, SearchError> {
    let start = Instant::now();
    let f = prepare(original, raw_tnf)?;
    let ts = build_full_system(&f, &BuildOptions { exhaustive: false, ..*opts })?;
    let verdict = match ts.first_final() {
        Some(i) => {
            let w = ts.witness(i).expect("final state");
            if !witness_holds(original, &w, raw_tnf) {
                return Err(SearchError::WitnessRejected(w));
            }
            NaiveVerdict::Sat(w)
        }
        None => NaiveVerdict::Unsat,
    };
    Ok(NaiveOutcome {
        verdict,
        states_expanded: ts.len(),
        sat_calls: ts.sat_calls(),
        elapsed: start.elapsed(),
    })
}
