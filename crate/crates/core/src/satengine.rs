//! Thin incremental SAT interface. This is the only module that talks to the
//! underlying engine (batsat, a Minisat 2.2 descendant).

use batsat::intmap::AsIndex;
use batsat::{lbool, Callbacks, SolverInterface};
use std::fmt;
use std::io::{self, Write};
use std::ops::Not;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A variable with a sign, packed as `2 * var + negated`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn positive(v: Var) -> Lit {
        Lit(v.0 << 1)
    }

    pub fn negative(v: Var) -> Lit {
        Lit(v.0 << 1 | 1)
    }

    pub fn new(v: Var, positive: bool) -> Lit {
        if positive {
            Lit::positive(v)
        } else {
            Lit::negative(v)
        }
    }

    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    /// DIMACS integer form, 1-based.
    pub fn to_dimacs(self) -> i64 {
        let v = i64::from(self.var().0) + 1;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }

    fn to_batsat(self) -> batsat::Lit {
        batsat::Lit::new(batsat::Var::from_index(self.var().index()), self.is_positive())
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A total valuation of all variables known to the engine at solve time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model(Vec<bool>);

impl Model {
    pub fn value(&self, lit: Lit) -> bool {
        self.0[lit.var().index()] == lit.is_positive()
    }

    pub fn num_vars(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Model),
    /// `failed` is a subset of the assumptions that is already unsatisfiable
    /// together with the clause database.
    Unsat { failed: Vec<Lit> },
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("SAT call interrupted by the deadline")]
    Interrupted,
}

#[derive(Default)]
struct Deadline(Option<Instant>);

impl Callbacks for Deadline {
    fn stop(&self) -> bool {
        self.0.is_some_and(|d| Instant::now() >= d)
    }
}

pub struct SatEngine {
    solver: batsat::Solver<Deadline>,
    num_vars: u32,
    clauses: Vec<Vec<Lit>>,
    calls: u64,
}

impl Default for SatEngine {
    fn default() -> Self {
        SatEngine::new()
    }
}

impl SatEngine {
    pub fn new() -> Self {
        SatEngine {
            solver: batsat::Solver::new(batsat::SolverOpts::default(), Deadline::default()),
            num_vars: 0,
            clauses: Vec::new(),
            calls: 0,
        }
    }

    pub fn new_var(&mut self) -> Var {
        let v = self.solver.new_var_default();
        debug_assert_eq!(v.idx(), self.num_vars);
        self.num_vars += 1;
        Var(v.idx())
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars as usize
    }

    /// Number of `solve` calls so far.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// Any later `solve` aborts with [`SolveError::Interrupted`] once the
    /// deadline has passed.
    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.solver.cb_mut().0 = deadline;
    }

    pub fn add_clause(&mut self, clause: &[Lit]) {
        debug_assert!(clause.iter().all(|l| l.var().0 < self.num_vars));
        self.clauses.push(clause.to_vec());
        let mut c: Vec<batsat::Lit> = clause.iter().map(|l| l.to_batsat()).collect();
        self.solver.add_clause_reuse(&mut c);
    }

    pub fn add_clauses<'a>(&mut self, clauses: impl IntoIterator<Item = &'a [Lit]>) {
        for c in clauses {
            self.add_clause(c);
        }
    }

    pub fn solve(&mut self, assumptions: &[Lit]) -> Result<SolveResult, SolveError> {
        self.calls += 1;
        if self.solver.cb().stop() {
            return Err(SolveError::Interrupted);
        }
        let assumps: Vec<batsat::Lit> = assumptions.iter().map(|l| l.to_batsat()).collect();
        let r = self.solver.solve_limited(&assumps);
        if r == lbool::TRUE {
            let model = (0..self.num_vars)
                .map(|v| self.solver.value_var(batsat::Var::from_index(v as usize)) == lbool::TRUE)
                .collect();
            Ok(SolveResult::Sat(Model(model)))
        } else if r == lbool::FALSE {
            // the engine reports the negations of the failed assumptions
            let failed = assumptions
                .iter()
                .copied()
                .filter(|l| self.solver.unsat_core_contains_lit(!l.to_batsat()))
                .collect();
            Ok(SolveResult::Unsat { failed })
        } else {
            Err(SolveError::Interrupted)
        }
    }

    /// Writes the clause database plus the assumptions as unit clauses in
    /// DIMACS CNF.
    pub fn write_dimacs<W: Write>(&self, out: &mut W, assumptions: &[Lit]) -> io::Result<()> {
        writeln!(out, "c assumptions: {assumptions:?}")?;
        writeln!(
            out,
            "p cnf {} {}",
            self.num_vars,
            self.clauses.len() + assumptions.len()
        )?;
        for c in &self.clauses {
            for l in c {
                write!(out, "{} ", l.to_dimacs())?;
            }
            writeln!(out, "0")?;
        }
        for l in assumptions {
            writeln!(out, "{} 0", l.to_dimacs())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_clause() {
        let mut e = SatEngine::new();
        let x = e.new_var();
        e.add_clause(&[Lit::positive(x)]);
        match e.solve(&[]).unwrap() {
            SolveResult::Sat(m) => assert!(m.value(Lit::positive(x))),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn contradiction() {
        let mut e = SatEngine::new();
        let x = e.new_var();
        e.add_clauses([&[Lit::positive(x)][..], &[Lit::negative(x)][..]]);
        assert_eq!(e.solve(&[]).unwrap(), SolveResult::Unsat { failed: vec![] });
    }

    #[test]
    fn failed_assumptions() {
        let mut e = SatEngine::new();
        let x = e.new_var();
        let y = e.new_var();
        let z = e.new_var();
        e.add_clause(&[Lit::positive(x), Lit::positive(y)]);
        let assumps = [Lit::negative(x), Lit::negative(y), Lit::positive(z)];
        match e.solve(&assumps).unwrap() {
            SolveResult::Unsat { failed } => {
                assert!(!failed.is_empty());
                assert!(failed.iter().all(|l| *l == assumps[0] || *l == assumps[1]));
                // the failed set alone is still unsatisfiable
                assert!(!e.solve(&failed).unwrap().is_sat());
            }
            r => panic!("{r:?}"),
        }
        // clauses persist and the engine stays usable
        assert!(e.solve(&[Lit::negative(x)]).unwrap().is_sat());
    }

    #[test]
    fn repeated_solve_same_verdict() {
        let mut e = SatEngine::new();
        let v: Vec<Var> = (0..4).map(|_| e.new_var()).collect();
        e.add_clause(&[Lit::positive(v[0]), Lit::negative(v[1])]);
        e.add_clause(&[Lit::positive(v[1]), Lit::positive(v[2])]);
        let a = e.solve(&[Lit::negative(v[0])]).unwrap().is_sat();
        let b = e.solve(&[Lit::negative(v[0])]).unwrap().is_sat();
        assert_eq!(a, b);
        assert_eq!(e.calls(), 2);
    }

    #[test]
    fn past_deadline_interrupts() {
        let mut e = SatEngine::new();
        let x = e.new_var();
        e.add_clause(&[Lit::positive(x)]);
        e.set_deadline(Some(Instant::now()));
        assert_eq!(e.solve(&[]), Err(SolveError::Interrupted));
        e.set_deadline(None);
        assert!(e.solve(&[]).unwrap().is_sat());
    }

    #[test]
    fn dimacs_dump() {
        let mut e = SatEngine::new();
        let x = e.new_var();
        let y = e.new_var();
        e.add_clause(&[Lit::positive(x), Lit::negative(y)]);
        let mut out = Vec::new();
        e.write_dimacs(&mut out, &[Lit::positive(y)]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("p cnf 2 2\n1 -2 0\n2 0\n"));
    }

    fn truth_table_sat(nvars: usize, clauses: &[Vec<(usize, bool)>], assumps: &[(usize, bool)]) -> bool {
        (0u32..1 << nvars).any(|bits| {
            let val = |(v, pos): (usize, bool)| (bits >> v & 1 == 1) == pos;
            assumps.iter().all(|a| val(*a)) && clauses.iter().all(|c| c.iter().any(|l| val(*l)))
        })
    }

    fn cnf_strategy() -> impl Strategy<Value = (usize, Vec<Vec<(usize, bool)>>, Vec<(usize, bool)>)> {
        (1usize..=12).prop_flat_map(|n| {
            let lit = (0..n, any::<bool>());
            (
                Just(n),
                prop::collection::vec(prop::collection::vec(lit.clone(), 1..4), 0..30),
                prop::collection::vec(lit, 0..4),
            )
        })
    }

    proptest! {
        #[test]
        fn verdicts_match_truth_table((n, clauses, assumps) in cnf_strategy()) {
            let mut e = SatEngine::new();
            let vars: Vec<Var> = (0..n).map(|_| e.new_var()).collect();
            let to_lit = |(v, pos): (usize, bool)| Lit::new(vars[v], pos);
            for c in &clauses {
                let c: Vec<Lit> = c.iter().copied().map(to_lit).collect();
                e.add_clause(&c);
            }
            let a: Vec<Lit> = assumps.iter().copied().map(to_lit).collect();
            let expect = truth_table_sat(n, &clauses, &assumps);
            match e.solve(&a).unwrap() {
                SolveResult::Sat(m) => {
                    prop_assert!(expect);
                    for c in &clauses {
                        prop_assert!(c.iter().any(|l| m.value(to_lit(*l))));
                    }
                    prop_assert!(a.iter().all(|l| m.value(*l)));
                }
                SolveResult::Unsat { failed } => {
                    prop_assert!(!expect);
                    prop_assert!(failed.iter().all(|l| a.contains(l)));
                    let failed_idx: Vec<(usize, bool)> = failed
                        .iter()
                        .map(|l| (vars.iter().position(|v| *v == l.var()).unwrap(), l.is_positive()))
                        .collect();
                    prop_assert!(!truth_table_sat(n, &clauses, &failed_idx));
                }
            }
        }
    }
}
