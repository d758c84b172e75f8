//! Conflict-driven satisfiability checking.
//!
//! Frame `C[i]` of the conflict sequence holds unsat cores; a state is in the
//! frame when it contains one of them, and then it cannot reach a final state
//! in `i` steps. The search deepens one frame per iteration, asking at each
//! level for a successor outside the frame below, and stops when a final
//! state is reached or when the frames stop shrinking.

use crate::abstraction::{Assignment, Group, UnsatCore};
use crate::formula::{closure, FiniteTrace, Formula};
use crate::satengine::{Lit, SatEngine, SolveError, SolveResult};
use crate::transition::{prepare, witness_holds, Explorer, Finality, InputError, SearchError, State, Step};
use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("frame limit of {0} reached")]
    FrameLimit(usize),
    #[error("SAT call limit of {0} reached")]
    SatCallLimit(u64),
    #[error("timed out")]
    Timeout,
    #[error("internal error: witness {0:?} does not satisfy the input formula")]
    WitnessRejected(FiniteTrace),
}

impl From<SearchError> for CheckError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Input(e) => CheckError::Input(e),
            SearchError::Timeout => CheckError::Timeout,
            SearchError::WitnessRejected(w) => CheckError::WitnessRejected(w),
            SearchError::StateLimit(_) => unreachable!("the conflict-driven search keeps no state table"),
        }
    }
}

impl From<crate::abstraction::AbstractionError> for CheckError {
    fn from(e: crate::abstraction::AbstractionError) -> Self {
        SearchError::from(e).into()
    }
}

impl From<SolveError> for CheckError {
    fn from(_: SolveError) -> Self {
        CheckError::Timeout
    }
}

/// Frames of unsat cores. Cores are only ever added.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConflictSequence {
    frames: Vec<Vec<UnsatCore>>,
}

impl ConflictSequence {
    pub fn new() -> Self {
        ConflictSequence::default()
    }

    pub fn from_frames(frames: Vec<Vec<UnsatCore>>) -> Self {
        ConflictSequence { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[UnsatCore] {
        &self.frames[i]
    }

    pub fn frames(&self) -> &[Vec<UnsatCore>] {
        &self.frames
    }

    /// Whether `s` is in frame `i`, i.e. contains one of its cores.
    pub fn contains(&self, i: usize, s: &State) -> bool {
        i < self.frames.len() && s.covered_by(&self.frames[i])
    }

    /// Grows the sequence so that frame `i` exists.
    pub fn ensure(&mut self, i: usize) {
        while self.frames.len() <= i {
            self.frames.push(Vec::new());
        }
    }

    /// Returns false if the core was already present.
    pub fn add(&mut self, i: usize, core: UnsatCore) -> bool {
        self.ensure(i);
        if self.frames[i].contains(&core) {
            return false;
        }
        self.frames[i].push(core);
        true
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Limits {
    /// Defaults to `2^|cl(f)|`.
    pub max_frames: Option<usize>,
    pub max_sat_calls: Option<u64>,
    pub timeout: Option<Duration>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    /// Treat the input as already in tail normal form.
    pub raw_tnf: bool,
    pub limits: Limits,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    /// Distinct states computed, the initial state included.
    pub states_expanded: usize,
    pub sat_calls: u64,
    pub frames: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Sat { witness: FiniteTrace, stats: Stats },
    Unsat { invariant_level: usize, stats: Stats },
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat { .. })
    }

    pub fn stats(&self) -> &Stats {
        match self {
            Verdict::Sat { stats, .. } | Verdict::Unsat { stats, .. } => stats,
        }
    }
}

/// What a run looked like from the inside, for checking its invariants.
#[derive(Debug, Clone)]
pub struct Instrumentation {
    /// The formula actually searched.
    pub formula: Formula,
    /// The sequence after every iteration that found no model.
    pub snapshots: Vec<ConflictSequence>,
    /// States from the initial state to the final one, on success.
    pub spine: Vec<State>,
    /// The sequence at the moment of success.
    pub frames_at_success: Option<ConflictSequence>,
}

pub fn check(f: &Formula, opts: &Options) -> Result<Verdict, CheckError> {
    check_instrumented(f, opts).map(|(v, _)| v)
}

pub fn check_instrumented(f: &Formula, opts: &Options) -> Result<(Verdict, Instrumentation), CheckError> {
    let start = Instant::now();
    let prepared = prepare(f, opts.raw_tnf)?;
    let max_frames = opts.limits.max_frames.unwrap_or_else(|| {
        let n = closure(&prepared).len();
        if n >= 63 {
            usize::MAX
        } else {
            1usize << n
        }
    });
    let deadline = opts.limits.timeout.map(|t| start + t);
    let mut ex = Explorer::new(&prepared);
    ex.set_deadline(deadline);
    let mut run = Run {
        ex,
        seq: ConflictSequence::new(),
        groups: Vec::new(),
        seen: HashSet::new(),
        path: Vec::new(),
        spine: Vec::new(),
        final_model: None,
        inv_calls: 0,
        max_sat_calls: opts.limits.max_sat_calls,
        deadline,
    };
    let mut info = Instrumentation {
        formula: prepared.clone(),
        snapshots: Vec::new(),
        spine: Vec::new(),
        frames_at_success: None,
    };

    let s0 = State::initial(&prepared);
    run.seen.insert(s0.clone());
    run.spine.push(s0.clone());
    run.budget()?;
    let outcome = match run.ex.is_final(&s0)? {
        Finality::Final(model) => {
            run.final_model = Some(model);
            None
        }
        Finality::NotFinal(core) => {
            run.add_core(0, core);
            let mut level = 0;
            loop {
                if level + 2 > max_frames {
                    return Err(CheckError::FrameLimit(max_frames));
                }
                run.ensure_frame(level + 1);
                run.path.clear();
                run.spine.truncate(1);
                if run.try_satisfy(&s0, level)? {
                    break None;
                }
                info.snapshots.push(run.seq.clone());
                run.budget()?;
                let (found, calls) = inv_found_counted(&run.seq, level, deadline)?;
                run.inv_calls += calls;
                if let Some(i) = found {
                    break Some(i);
                }
                level += 1;
            }
        }
    };

    let stats = Stats {
        states_expanded: run.seen.len(),
        sat_calls: run.ex.sat_calls() + run.inv_calls,
        frames: run.seq.len(),
        elapsed: start.elapsed(),
    };
    let verdict = match outcome {
        Some(invariant_level) => Verdict::Unsat { invariant_level, stats },
        None => {
            let model = run.final_model.as_ref().expect("final model recorded on success");
            let witness = reconstruct_witness(&run.path, model, f, opts.raw_tnf)?;
            info.spine = run.spine.clone();
            info.frames_at_success = Some(run.seq.clone());
            Verdict::Sat { witness, stats }
        }
    };
    Ok((verdict, info))
}

/// Edge labels followed by the final model's literals, `Tail` dropped, and
/// checked against the input formula.
pub fn reconstruct_witness(
    path: &[Assignment],
    final_model: &Assignment,
    original: &Formula,
    raw_tnf: bool,
) -> Result<FiniteTrace, CheckError> {
    let positions = path
        .iter()
        .chain(std::iter::once(final_model))
        .map(Assignment::position)
        .collect();
    let trace = FiniteTrace::new(positions).expect("nonempty");
    assert!(!trace.mentions_tail());
    if !witness_holds(original, &trace, raw_tnf) {
        return Err(CheckError::WitnessRejected(trace));
    }
    Ok(trace)
}

struct Run {
    ex: Explorer,
    seq: ConflictSequence,
    groups: Vec<Group>,
    seen: HashSet<State>,
    path: Vec<Assignment>,
    spine: Vec<State>,
    final_model: Option<Assignment>,
    inv_calls: u64,
    max_sat_calls: Option<u64>,
    deadline: Option<Instant>,
}

impl Run {
    fn budget(&self) -> Result<(), CheckError> {
        if let Some(max) = self.max_sat_calls {
            if self.ex.sat_calls() + self.inv_calls >= max {
                return Err(CheckError::SatCallLimit(max));
            }
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(CheckError::Timeout);
        }
        Ok(())
    }

    fn ensure_frame(&mut self, i: usize) {
        self.seq.ensure(i);
        while self.groups.len() <= i {
            let g = self.ex.encoder().new_group();
            self.groups.push(g);
        }
    }

    fn add_core(&mut self, i: usize, core: UnsatCore) {
        self.ensure_frame(i);
        if self.seq.add(i, core.clone()) {
            let g = self.groups[i];
            self.ex.encoder().block_core(g, &core);
        }
    }

    /// Looks for a path of `level + 1` steps from `s` to a final state. The
    /// blocking clauses of `C[level]` are live in the solver, so cores added
    /// inside the loop take effect on the next query.
    fn try_satisfy(&mut self, s: &State, level: usize) -> Result<bool, CheckError> {
        loop {
            self.budget()?;
            let g = self.groups[level];
            match self.ex.step(s, &[g])? {
                Step::Edge { label, target } => {
                    self.seen.insert(target.clone());
                    if level == 0 {
                        self.budget()?;
                        match self.ex.is_final(&target)? {
                            Finality::Final(model) => {
                                self.path.push(label);
                                self.spine.push(target);
                                self.final_model = Some(model);
                                return Ok(true);
                            }
                            Finality::NotFinal(core) => {
                                self.add_core(0, core);
                                continue;
                            }
                        }
                    }
                    self.path.push(label);
                    self.spine.push(target.clone());
                    if self.try_satisfy(&target, level - 1)? {
                        return Ok(true);
                    }
                    self.path.pop();
                    self.spine.pop();
                }
                Step::Blocked(core) => {
                    self.add_core(level + 1, core);
                    return Ok(false);
                }
            }
        }
    }
}

/// Smallest `i <= frame_level` such that every state in all of
/// `C[0..=i]` is also in `C[i + 1]`, if any.
pub fn inv_found(seq: &ConflictSequence, frame_level: usize) -> Option<usize> {
    inv_found_counted(seq, frame_level, None)
        .expect("no deadline")
        .0
}

/// Frames are read as monotone formulas over one variable per formula:
/// `C[j] = OR_c AND_{f in c} v_f`. The inclusion for level `i` holds iff
/// `C[0] & .. & C[i] & !C[i+1]` is unsatisfiable.
fn inv_found_counted(
    seq: &ConflictSequence,
    frame_level: usize,
    deadline: Option<Instant>,
) -> Result<(Option<usize>, u64), SolveError> {
    let top = (frame_level + 1).min(seq.len().saturating_sub(1));
    let mut engine = SatEngine::new();
    engine.set_deadline(deadline);
    let mut vars: HashMap<Formula, Lit> = HashMap::new();
    let mut var = |engine: &mut SatEngine, f: &Formula| -> Lit {
        *vars
            .entry(f.clone())
            .or_insert_with(|| Lit::positive(engine.new_var()))
    };
    // per frame: `h` switches on "some core holds", `n` "no core holds"
    let mut holds = Vec::with_capacity(top + 1);
    let mut fails = Vec::with_capacity(top + 1);
    for frame in seq.frames().iter().take(top + 1) {
        let h = Lit::positive(engine.new_var());
        let n = Lit::positive(engine.new_var());
        let mut some_core = vec![!h];
        for core in frame {
            let d = Lit::positive(engine.new_var());
            some_core.push(d);
            let mut broken = vec![!n];
            for f in core.formulas() {
                let v = var(&mut engine, f);
                engine.add_clause(&[!d, v]);
                broken.push(!v);
            }
            engine.add_clause(&broken);
        }
        engine.add_clause(&some_core);
        holds.push(h);
        fails.push(n);
    }
    for i in 0..top {
        let mut assumptions: Vec<Lit> = holds[..=i].to_vec();
        assumptions.push(fails[i + 1]);
        if let SolveResult::Unsat { .. } = engine.solve(&assumptions)? {
            return Ok((Some(i), engine.calls()));
        }
    }
    Ok((None, engine.calls()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::semantics::evaluate;

    fn p(s: &str) -> Formula {
        parse(s).unwrap()
    }

    fn raw() -> Options {
        Options {
            raw_tnf: true,
            ..Default::default()
        }
    }

    #[test]
    fn overview_formula_is_final_at_once() {
        let f = p("(!Tail & a) U b");
        match check(&f, &raw()).unwrap() {
            Verdict::Sat { witness, stats } => {
                assert_eq!(witness.len(), 1);
                assert!(witness.holds(0, "b"));
                assert_eq!(stats.states_expanded, 1);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn five_conjuncts_need_two_positions() {
        let f = p("(!Tail) U a & (!Tail) U !a & (!Tail) U b & (!Tail) U !b & (!Tail) U c");
        match check(&f, &raw()).unwrap() {
            Verdict::Sat { witness, stats } => {
                assert_eq!(witness.len(), 2);
                assert!(stats.states_expanded <= 5, "{stats:?}");
                assert!(evaluate(&witness.with_tail_marker(), &f));
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn unsat_example_visits_one_state() {
        let f = p("(!Tail) U a & Tail R !a & (!Tail) U b");
        match check(&f, &raw()).unwrap() {
            Verdict::Unsat { invariant_level, stats } => {
                assert_eq!(invariant_level, 0);
                assert_eq!(stats.states_expanded, 1);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn propositional_contradiction() {
        let v = check(&p("p & !p"), &Options::default()).unwrap();
        assert!(!v.is_sat());
    }

    #[test]
    fn inv_found_examples() {
        let pair = UnsatCore::new([p("(!Tail) U a"), p("Tail R !a")]);
        let seq = ConflictSequence::from_frames(vec![vec![pair.clone()], vec![pair]]);
        assert_eq!(inv_found(&seq, 0), Some(0));

        let seq = ConflictSequence::from_frames(vec![
            vec![UnsatCore::new([p("p")])],
            vec![UnsatCore::new([p("q")])],
        ]);
        assert_eq!(inv_found(&seq, 0), None);
    }

    #[test]
    fn inv_found_with_empty_core_in_next_frame() {
        let seq = ConflictSequence::from_frames(vec![
            vec![UnsatCore::new([p("p")])],
            vec![UnsatCore::new([])],
        ]);
        assert_eq!(inv_found(&seq, 0), Some(0));
    }

    #[test]
    fn inv_found_uses_all_lower_frames() {
        // C[0] = p, C[1] = q, C[2] = p & q: only the intersection up to 1 fits
        let seq = ConflictSequence::from_frames(vec![
            vec![UnsatCore::new([p("p")])],
            vec![UnsatCore::new([p("q")])],
            vec![UnsatCore::new([p("p"), p("q")])],
        ]);
        assert_eq!(inv_found(&seq, 1), Some(1));
        assert_eq!(inv_found(&seq, 0), None);
    }

    #[test]
    fn blocked_successors_feed_the_next_frame() {
        // every successor of the initial state is non-final, so the level-0
        // attempt fails and leaves a core in C[1]
        let f = p("(!Tail) U a & Tail R !a & (!Tail) U b");
        let (_, info) = check_instrumented(&f, &raw()).unwrap();
        let first = &info.snapshots[0];
        assert_eq!(first.len(), 2);
        let s0 = State::initial(&info.formula);
        assert!(first.contains(0, &s0));
        assert!(first.contains(1, &s0));
    }

    #[test]
    fn frame_limit_aborts() {
        let f = p("F (a & X (b & X (c & X d)))");
        let opts = Options {
            limits: Limits {
                max_frames: Some(2),
                ..Default::default()
            },
            ..Default::default()
        };
        assert_eq!(check(&f, &opts), Err(CheckError::FrameLimit(2)));
    }

    #[test]
    fn sat_call_limit_aborts() {
        let f = p("F (a & X (b & X (c & X d)))");
        let opts = Options {
            limits: Limits {
                max_sat_calls: Some(2),
                ..Default::default()
            },
            ..Default::default()
        };
        assert_eq!(check(&f, &opts), Err(CheckError::SatCallLimit(2)));
    }

    #[test]
    fn longer_witnesses_verify() {
        for s in ["F (a & X (b & X (c & X d)))", "G (a -> X !a) & a & X X a", "a U (b & X X !b)"] {
            let f = p(s);
            match check(&f, &Options::default()).unwrap() {
                Verdict::Sat { witness, .. } => assert!(evaluate(&witness, &f), "{s}"),
                v => panic!("{s}: {v:?}"),
            }
        }
    }

    #[test]
    fn reconstruct_length_one() {
        let model = Assignment::new([(Formula::tail(), true), (p("b"), true)].into_iter().collect());
        let t = reconstruct_witness(&[], &model, &p("a U b"), false).unwrap();
        assert_eq!(t, FiniteTrace::from_slices(&[&["b"]]).unwrap());
        let bad = Assignment::new([(p("a"), true)].into_iter().collect());
        assert!(matches!(
            reconstruct_witness(&[], &bad, &p("a U b"), false),
            Err(CheckError::WitnessRejected(_))
        ));
    }
}
