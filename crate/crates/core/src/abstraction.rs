//! The propositional view of temporal formulas.
//!
//! Atoms, next formulas, untils and releases are opaque Boolean variables.
//! After the XNF rewrite only atoms and next formulas remain, and a state
//! query becomes a plain SAT query: each state member `ψ` gets an assumption
//! literal `p_ψ` guarding `xnf(ψ)`, so a failed-assumption set maps straight
//! back to a subset of the state.

use crate::formula::{closure, Formula, Kind, TAIL};
use crate::satengine::{Lit, SatEngine, SolveError, SolveResult, Var};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, Write};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbstractionError {
    #[error("weak next must be eliminated before the XNF rewrite: {0}")]
    WeakNext(Formula),
    #[error(transparent)]
    Interrupted(#[from] SolveError),
}

/// Atoms, next, weak next, until and release formulas are propositional
/// atoms; Boolean connectives are looked through.
pub fn propositional_atoms(f: &Formula) -> BTreeSet<Formula> {
    let mut out = BTreeSet::new();
    let mut stack = vec![f];
    while let Some(g) = stack.pop() {
        match g.kind() {
            Kind::True | Kind::False => {}
            Kind::Not(a) => stack.push(a),
            Kind::And(a, b) | Kind::Or(a, b) => {
                stack.push(a);
                stack.push(b);
            }
            _ => {
                out.insert(g.clone());
            }
        }
    }
    out
}

/// Unfolds every until and release that is not under a next:
/// `a U b = b | (a & X(a U b))`, `a R b = b & (a | X(a R b))`.
pub fn xnf(f: &Formula) -> Result<Formula, AbstractionError> {
    xnf_memo(f, &mut HashMap::new())
}

fn xnf_memo(f: &Formula, memo: &mut HashMap<Formula, Formula>) -> Result<Formula, AbstractionError> {
    if let Some(r) = memo.get(f) {
        return Ok(r.clone());
    }
    let r = match f.kind() {
        Kind::True | Kind::False | Kind::Atom(_) | Kind::Next(_) => f.clone(),
        Kind::WeakNext(_) => return Err(AbstractionError::WeakNext(f.clone())),
        Kind::Not(a) => Formula::not(xnf_memo(a, memo)?),
        Kind::And(a, b) => Formula::and(xnf_memo(a, memo)?, xnf_memo(b, memo)?),
        Kind::Or(a, b) => Formula::or(xnf_memo(a, memo)?, xnf_memo(b, memo)?),
        Kind::Until(a, b) => Formula::or(
            xnf_memo(b, memo)?,
            Formula::and(xnf_memo(a, memo)?, Formula::next(f.clone())),
        ),
        Kind::Release(a, b) => Formula::and(
            xnf_memo(b, memo)?,
            Formula::or(xnf_memo(a, memo)?, Formula::next(f.clone())),
        ),
    };
    memo.insert(f.clone(), r.clone());
    Ok(r)
}

/// A valuation of the propositional atoms (atoms and next formulas) that a
/// query depends on.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    values: BTreeMap<Formula, bool>,
}

impl Assignment {
    pub fn new(values: BTreeMap<Formula, bool>) -> Self {
        Assignment { values }
    }

    pub fn values(&self) -> &BTreeMap<Formula, bool> {
        &self.values
    }

    pub fn value(&self, atom: &Formula) -> Option<bool> {
        self.values.get(atom).copied()
    }

    /// `L(A)`: the signed input atoms, `Tail` included.
    pub fn literals(&self) -> BTreeMap<String, bool> {
        self.values
            .iter()
            .filter_map(|(f, v)| f.atom_name().map(|n| (n.to_string(), *v)))
            .collect()
    }

    /// `X(A)`: bodies of the next atoms assigned true.
    pub fn successor(&self) -> Vec<Formula> {
        self.values
            .iter()
            .filter(|(_, v)| **v)
            .filter_map(|(f, _)| match f.kind() {
                Kind::Next(body) => Some(body.clone()),
                _ => None,
            })
            .collect()
    }

    /// Trace position for this label: true atoms other than `Tail`, every
    /// unconstrained atom false.
    pub fn position(&self) -> BTreeSet<String> {
        self.literals()
            .into_iter()
            .filter(|(n, v)| *v && n != TAIL)
            .map(|(n, _)| n)
            .collect()
    }

    /// The assignment read as a conjunction of signed atoms.
    pub fn to_formula(&self) -> Formula {
        Formula::conjunction(self.values.iter().map(|(f, v)| {
            if *v {
                f.clone()
            } else {
                Formula::not(f.clone())
            }
        }))
    }
}

/// A subset of a queried state that is unsatisfiable on its own under the
/// same query context. Kept sorted for subset tests.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnsatCore(Vec<Formula>);

impl UnsatCore {
    pub fn new(members: impl IntoIterator<Item = Formula>) -> Self {
        let mut v: Vec<Formula> = members.into_iter().collect();
        v.sort();
        v.dedup();
        UnsatCore(v)
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Whether every member occurs in `sorted`, which must be sorted.
    pub fn is_subset_of(&self, sorted: &[Formula]) -> bool {
        let mut rest = sorted.iter();
        self.0.iter().all(|c| rest.by_ref().any(|s| s == c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryResult {
    Sat(Assignment),
    Unsat(UnsatCore),
}

/// Side constraint of a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Context {
    /// Plain `xnf(s)^p`.
    Free,
    /// `Tail` holds and every next atom is false: `s` read as a last position.
    Final,
    /// `Tail` is false: `s` read as a position with a successor.
    Step,
}

/// Handle for a set of retractable clauses, switched on per query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Group(Lit);

/// Incremental encoder for the states of one formula. Every state queried
/// must consist of members of the closure of the formula given to `new`.
pub struct Encoder {
    engine: SatEngine,
    truth: Lit,
    tail: Var,
    final_act: Lit,
    step_act: Lit,
    atoms: HashMap<Formula, Var>,
    defs: HashMap<Formula, Lit>,
    xnf_memo: HashMap<Formula, Formula>,
    relevant: HashMap<Formula, Vec<Formula>>,
    assumption: HashMap<Formula, Lit>,
    assumed: HashMap<Lit, Formula>,
    // conjunct -> next atoms whose body has it as a conjunct
    containers: HashMap<Formula, Vec<Formula>>,
    member: HashMap<Formula, Lit>,
}

impl Encoder {
    pub fn new(root: &Formula) -> Self {
        let mut engine = SatEngine::new();
        let truth = Lit::positive(engine.new_var());
        engine.add_clause(&[truth]);
        let tail = engine.new_var();
        let final_act = Lit::positive(engine.new_var());
        let step_act = Lit::positive(engine.new_var());
        engine.add_clause(&[!final_act, Lit::positive(tail)]);
        engine.add_clause(&[!step_act, Lit::negative(tail)]);

        let mut containers: HashMap<Formula, Vec<Formula>> = HashMap::new();
        for g in closure(root) {
            let next = match g.kind() {
                Kind::Next(_) => g.clone(),
                Kind::Until(..) | Kind::Release(..) => Formula::next(g.clone()),
                _ => continue,
            };
            let Kind::Next(body) = next.kind() else { unreachable!() };
            for c in body.conjuncts() {
                let list = containers.entry(c).or_default();
                if !list.contains(&next) {
                    list.push(next.clone());
                }
            }
        }

        let mut atoms = HashMap::new();
        atoms.insert(Formula::tail(), tail);
        Encoder {
            engine,
            truth,
            tail,
            final_act,
            step_act,
            atoms,
            defs: HashMap::new(),
            xnf_memo: HashMap::new(),
            relevant: HashMap::new(),
            assumption: HashMap::new(),
            assumed: HashMap::new(),
            containers,
            member: HashMap::new(),
        }
    }

    /// SAT calls made through this encoder.
    pub fn sat_calls(&self) -> u64 {
        self.engine.calls()
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.engine.set_deadline(deadline);
    }

    pub fn new_group(&mut self) -> Group {
        Group(Lit::positive(self.engine.new_var()))
    }

    /// Permanently disables a group; its clauses become satisfied.
    pub fn retire(&mut self, group: Group) {
        self.engine.add_clause(&[!group.0]);
    }

    /// Adds `!X(c)` under `group`: no successor may contain every member of
    /// `core`. An empty core blocks every successor.
    pub fn block_core(&mut self, group: Group, core: &UnsatCore) {
        let mut clause = vec![!group.0];
        for f in core.formulas() {
            let m = self.member_lit(f);
            clause.push(!m);
        }
        self.engine.add_clause(&clause);
    }

    /// Excludes assignments agreeing with `a` on all its next atoms.
    pub fn block_projection(&mut self, group: Group, a: &Assignment) {
        let mut clause = vec![!group.0];
        for (f, v) in a.values() {
            if matches!(f.kind(), Kind::Next(_)) {
                clause.push(Lit::new(self.atom_var(f), !v));
            }
        }
        self.engine.add_clause(&clause);
    }

    /// Excludes assignments agreeing with `a` on all its atoms.
    pub fn block_assignment(&mut self, group: Group, a: &Assignment) {
        let mut clause = vec![!group.0];
        for (f, v) in a.values() {
            clause.push(Lit::new(self.atom_var(f), !v));
        }
        self.engine.add_clause(&clause);
    }

    /// Solves `xnf(s)^p` under the context and the given groups. On UNSAT
    /// the core is the set of state members whose assumptions failed.
    pub fn query(
        &mut self,
        state: &[Formula],
        ctx: Context,
        groups: &[Group],
    ) -> Result<QueryResult, AbstractionError> {
        let assumptions = self.assumptions(state, ctx, groups)?;
        match self.engine.solve(&assumptions)? {
            SolveResult::Sat(model) => {
                let mut values = BTreeMap::new();
                for f in state {
                    for atom in &self.relevant[f] {
                        let v = self.atoms[atom];
                        values.insert(atom.clone(), model.value(Lit::positive(v)));
                    }
                }
                if ctx != Context::Free {
                    values.insert(Formula::tail(), model.value(Lit::positive(self.tail)));
                }
                Ok(QueryResult::Sat(Assignment::new(values)))
            }
            SolveResult::Unsat { failed } => Ok(QueryResult::Unsat(UnsatCore::new(
                failed.iter().filter_map(|l| self.assumed.get(l).cloned()),
            ))),
        }
    }

    /// Writes the clause database together with the query's assumptions as
    /// unit clauses.
    pub fn write_query<W: Write>(
        &mut self,
        out: &mut W,
        state: &[Formula],
        ctx: Context,
        groups: &[Group],
    ) -> Result<io::Result<()>, AbstractionError> {
        let assumptions = self.assumptions(state, ctx, groups)?;
        Ok(self.engine.write_dimacs(out, &assumptions))
    }

    fn assumptions(
        &mut self,
        state: &[Formula],
        ctx: Context,
        groups: &[Group],
    ) -> Result<Vec<Lit>, AbstractionError> {
        let mut out = Vec::with_capacity(state.len() + groups.len() + 1);
        match ctx {
            Context::Free => {}
            Context::Final => out.push(self.final_act),
            Context::Step => out.push(self.step_act),
        }
        out.extend(groups.iter().map(|g| g.0));
        for f in state {
            out.push(self.assumption_lit(f)?);
        }
        Ok(out)
    }

    fn assumption_lit(&mut self, f: &Formula) -> Result<Lit, AbstractionError> {
        if let Some(p) = self.assumption.get(f) {
            return Ok(*p);
        }
        let x = xnf_memo(f, &mut self.xnf_memo)?;
        let body = self.lit(&x);
        let p = Lit::positive(self.engine.new_var());
        self.engine.add_clause(&[!p, body]);
        self.relevant
            .insert(f.clone(), propositional_atoms(&x).into_iter().collect());
        self.assumption.insert(f.clone(), p);
        self.assumed.insert(p, f.clone());
        Ok(p)
    }

    fn atom_var(&mut self, f: &Formula) -> Var {
        if let Some(v) = self.atoms.get(f) {
            return *v;
        }
        let v = self.engine.new_var();
        if matches!(f.kind(), Kind::Next(_)) {
            debug_assert!(
                f.children()[0].conjuncts().iter().all(|c| self.containers.get(c).is_some_and(|l| l.contains(f))),
                "next atom {f} lies outside the encoder's closure"
            );
            self.engine.add_clause(&[!self.final_act, Lit::negative(v)]);
        }
        self.atoms.insert(f.clone(), v);
        v
    }

    /// Full-equivalence Tseitin literal for an XNF formula.
    fn lit(&mut self, f: &Formula) -> Lit {
        if let Some(l) = self.defs.get(f) {
            return *l;
        }
        let l = match f.kind() {
            Kind::True => self.truth,
            Kind::False => !self.truth,
            Kind::Atom(_) | Kind::Next(_) => Lit::positive(self.atom_var(f)),
            Kind::Not(a) => !self.lit(a),
            Kind::And(a, b) => {
                let (x, y) = (self.lit(a), self.lit(b));
                let v = Lit::positive(self.engine.new_var());
                self.engine.add_clause(&[!v, x]);
                self.engine.add_clause(&[!v, y]);
                self.engine.add_clause(&[v, !x, !y]);
                v
            }
            Kind::Or(a, b) => {
                let (x, y) = (self.lit(a), self.lit(b));
                let v = Lit::positive(self.engine.new_var());
                self.engine.add_clause(&[v, !x]);
                self.engine.add_clause(&[v, !y]);
                self.engine.add_clause(&[!v, x, y]);
                v
            }
            Kind::WeakNext(_) | Kind::Until(..) | Kind::Release(..) => {
                unreachable!("temporal operator outside a next after XNF: {f}")
            }
        };
        self.defs.insert(f.clone(), l);
        l
    }

    /// Literal that is true iff the successor state contains `f`, i.e. some
    /// next atom true in the model has `f` among its body's conjuncts.
    fn member_lit(&mut self, f: &Formula) -> Lit {
        if let Some(m) = self.member.get(f) {
            return *m;
        }
        let holders = self.containers.get(f).cloned().unwrap_or_default();
        let m = match holders.as_slice() {
            [] => !self.truth,
            [only] if only.children()[0] == f => Lit::positive(self.atom_var(only)),
            _ => {
                let m = Lit::positive(self.engine.new_var());
                let mut def = vec![!m];
                for h in &holders {
                    let x = Lit::positive(self.atom_var(h));
                    self.engine.add_clause(&[!x, m]);
                    def.push(x);
                }
                self.engine.add_clause(&def);
                m
            }
        };
        self.member.insert(f.clone(), m);
        m
    }
}
