//! Benchmark formula generators and the suite runner.
//!
//! Generators draw only integers from a seeded ChaCha stream, so a bench spec and
//! a seed give the same formulas on every platform.

use crate::cdlsc::{self, CheckError, Limits, Verdict};
use crate::formula::{parse, Formula, Kind};
use crate::semantics::{brute_force_sat, BruteForceOutcome};
use crate::transition::{naive_check, BuildOptions, NaiveVerdict, SearchError, DEFAULT_STATE_LIMIT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown pattern family `{0}`")]
    UnknownPattern(String),
    #[error("unknown solver `{0}`")]
    UnknownSolver(String),
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{file}: {message}")]
    Corpus { file: String, message: String },
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of nodes with `G` and `F` counted as single unary operators.
pub fn generated_size(f: &Formula) -> usize {
    match f.kind() {
        Kind::Release(l, r) if matches!(l.kind(), Kind::False) => 1 + generated_size(r),
        Kind::Until(l, r) if matches!(l.kind(), Kind::True) => 1 + generated_size(r),
        _ => 1 + f.children().into_iter().map(generated_size).sum::<usize>(),
    }
}

/// Random formula with exactly `length` nodes over atoms `p0..p{vars-1}`.
/// Each operator is temporal (`X U R G F`) with probability `temporal_prob`
/// and Boolean (`! | &`) otherwise.
pub fn gen_random(vars: usize, length: usize, temporal_prob: f64, seed: u64) -> Formula {
    assert!(vars >= 1 && length >= 1, "vars and length must be positive");
    assert!((0.0..=1.0).contains(&temporal_prob));
    let ppm = (temporal_prob * 1e6).round() as u32;
    let mut r = rng(seed);
    random_node(&mut r, vars as u32, length as u32, ppm)
}

fn random_node(r: &mut ChaCha8Rng, vars: u32, n: u32, ppm: u32) -> Formula {
    if n == 1 {
        return Formula::atom(&format!("p{}", r.gen_range(0..vars)));
    }
    let temporal = r.gen_range(0..1_000_000u32) < ppm;
    let unary = n == 2 || {
        let pool: u32 = if temporal { 5 } else { 3 };
        // unary operators are X G F or !
        let unary_count: u32 = if temporal { 3 } else { 1 };
        r.gen_range(0..pool) < unary_count
    };
    if unary {
        let sub = random_node(r, vars, n - 1, ppm);
        return if temporal {
            match r.gen_range(0..3u32) {
                0 => Formula::next(sub),
                1 => Formula::globally(sub),
                _ => Formula::eventually(sub),
            }
        } else {
            Formula::not(sub)
        };
    }
    let left = r.gen_range(1..n - 1);
    let a = random_node(r, vars, left, ppm);
    let b = random_node(r, vars, n - 1 - left, ppm);
    match (temporal, r.gen_range(0..2u32)) {
        (true, 0) => Formula::until(a, b),
        (true, _) => Formula::release(a, b),
        (false, 0) => Formula::or(a, b),
        (false, _) => Formula::and(a, b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    AlternateResponse,
    AlternatePrecedence,
    ChainPrecedence,
    ChainResponse,
    Precedence,
    RespondedExistence,
    Response,
}

impl Pattern {
    pub const ALL: [Pattern; 7] = [
        Pattern::AlternateResponse,
        Pattern::AlternatePrecedence,
        Pattern::ChainPrecedence,
        Pattern::ChainResponse,
        Pattern::Precedence,
        Pattern::RespondedExistence,
        Pattern::Response,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::AlternateResponse => "alternate-response",
            Pattern::AlternatePrecedence => "alternate-precedence",
            Pattern::ChainPrecedence => "chain-precedence",
            Pattern::ChainResponse => "chain-response",
            Pattern::Precedence => "precedence",
            Pattern::RespondedExistence => "responded-existence",
            Pattern::Response => "response",
        }
    }

    /// The constraint between `a` and `b`, which may be any formulas.
    pub fn template(self, a: Formula, b: Formula) -> Formula {
        use Formula as F;
        let not = F::not;
        // (!b U a) | G !b
        let precedence = |a: &Formula, b: &Formula| {
            F::or(
                F::until(not(b.clone()), a.clone()),
                F::globally(not(b.clone())),
            )
        };
        match self {
            Pattern::Response => F::globally(F::implies(a, F::eventually(b))),
            Pattern::Precedence => precedence(&a, &b),
            Pattern::RespondedExistence => F::implies(F::eventually(a), F::eventually(b)),
            Pattern::AlternateResponse => F::globally(F::implies(
                a.clone(),
                F::next(F::until(not(a), b)),
            )),
            Pattern::AlternatePrecedence => F::and(
                precedence(&a, &b),
                F::globally(F::implies(b.clone(), F::next(precedence(&a, &b)))),
            ),
            Pattern::ChainResponse => F::globally(F::implies(a, F::next(b))),
            Pattern::ChainPrecedence => F::globally(F::implies(F::next(b), a)),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace(['_', ' '], "-");
        Pattern::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| BenchError::UnknownPattern(s.to_string()))
    }
}

/// The `n`-th instance of a family: `n` copies of the template over the
/// fresh atom pairs `a1,b1 .. an,bn`.
pub fn gen_pattern(pattern: Pattern, n: usize) -> Formula {
    assert!(n >= 1);
    Formula::conjunction((1..=n).map(|i| {
        pattern.template(Formula::atom(&format!("a{i}")), Formula::atom(&format!("b{i}")))
    }))
}

/// Shared variables the conjunction pool draws its literals from.
pub const CONJUNCTION_VARS: u32 = 4;
/// Number of constraints in a conjunction pool.
pub const CONJUNCTION_POOL: u32 = 24;

/// A pool of pattern constraints whose slots are filled with random literals
/// over a few shared variables, so that conjunctions of them can clash.
pub fn conjunction_pool(pool_seed: u64) -> Vec<Formula> {
    let mut r = rng(pool_seed);
    let literal = |r: &mut ChaCha8Rng, avoid: Option<u32>| {
        let v = loop {
            let v = r.gen_range(0..CONJUNCTION_VARS);
            if Some(v) != avoid {
                break v;
            }
        };
        let atom = Formula::atom(&format!("v{v}"));
        let f = if r.gen_range(0..2u32) == 0 { atom } else { Formula::not(atom) };
        (v, f)
    };
    (0..CONJUNCTION_POOL)
        .map(|_| {
            let pattern = Pattern::ALL[r.gen_range(0..Pattern::ALL.len() as u32) as usize];
            let (va, a) = literal(&mut r, None);
            let (_, b) = literal(&mut r, Some(va));
            pattern.template(a, b)
        })
        .collect()
}

/// Conjunction of `k` distinct members of the pool, chosen by `seed`.
pub fn gen_conjunction(pool_seed: u64, k: usize, seed: u64) -> Formula {
    let mut pool = conjunction_pool(pool_seed);
    let k = k.clamp(1, pool.len());
    let mut r = rng(seed);
    // partial Fisher-Yates
    for i in 0..k {
        let j = r.gen_range(i as u32..pool.len() as u32) as usize;
        pool.swap(i, j);
    }
    Formula::conjunction(pool.into_iter().take(k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Random {
        vars: usize,
        min_len: usize,
        max_len: usize,
        temporal_prob: f64,
    },
    /// Instances `n = first, first + 1, ..`.
    Pattern { pattern: Pattern, first: usize },
    Conjunction { pool_seed: u64, k_min: usize, k_max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub family: Family,
    pub seed: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub id: String,
    pub family: String,
    pub formula: Formula,
}

impl BenchSpec {
    pub fn instances(&self) -> Vec<Instance> {
        (0..self.count)
            .map(|i| {
                let seed = self.seed.wrapping_add(i as u64);
                let (family, formula) = match &self.family {
                    Family::Random {
                        vars,
                        min_len,
                        max_len,
                        temporal_prob,
                    } => {
                        let len = rng(seed ^ 0x5eed).gen_range(*min_len as u32..=*max_len as u32);
                        ("random".to_string(), gen_random(*vars, len as usize, *temporal_prob, seed))
                    }
                    Family::Pattern { pattern, first } => (pattern.to_string(), gen_pattern(*pattern, first + i)),
                    Family::Conjunction { pool_seed, k_min, k_max } => {
                        let k = rng(seed ^ 0x5eed).gen_range(*k_min as u32..=*k_max as u32);
                        ("conjunction".to_string(), gen_conjunction(*pool_seed, k as usize, seed))
                    }
                };
                Instance {
                    id: format!("{family}-{i:04}"),
                    family,
                    formula,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Solver {
    Cdlsc,
    Naive,
    Brute,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Cdlsc => "cdlsc",
            Solver::Naive => "naive",
            Solver::Brute => "brute",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cdlsc" => Ok(Solver::Cdlsc),
            "naive" => Ok(Solver::Naive),
            "brute" => Ok(Solver::Brute),
            _ => Err(BenchError::UnknownSolver(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunLimits {
    pub timeout: Option<Duration>,
    pub max_frames: Option<usize>,
    pub state_limit: usize,
    /// Trace length bound for the brute-force solver.
    pub brute_bound: usize,
    pub jobs: usize,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            timeout: None,
            max_frames: None,
            state_limit: DEFAULT_STATE_LIMIT,
            brute_bound: 8,
            jobs: 1,
        }
    }
}

/// One instance solved by one solver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub id: String,
    pub family: String,
    /// `sat`, `unsat`, `timeout`, `limit` or `error`.
    pub verdict: String,
    pub states_expanded: usize,
    pub sat_calls: u64,
    pub elapsed_ms: u64,
    /// The witness was checked against the formula (SAT rows only).
    pub verified: bool,
}

impl Row {
    pub fn is_verdict(&self) -> bool {
        self.verdict == "sat" || self.verdict == "unsat"
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BenchReport {
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Totals {
    pub instances: usize,
    pub sat: usize,
    pub unsat: usize,
    pub aborted: usize,
    pub states_expanded: usize,
    pub sat_calls: u64,
    pub elapsed_ms: u64,
}

impl BenchReport {
    pub fn totals(&self) -> Totals {
        self.rows.iter().fold(Totals::default(), |mut t, r| {
            t.instances += 1;
            match r.verdict.as_str() {
                "sat" => t.sat += 1,
                "unsat" => t.unsat += 1,
                _ => t.aborted += 1,
            }
            t.states_expanded += r.states_expanded;
            t.sat_calls += r.sat_calls;
            t.elapsed_ms += r.elapsed_ms;
            t
        })
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<BenchReport, BenchError> {
        let mut rd = csv::Reader::from_reader(input);
        let rows = rd.deserialize().collect::<Result<Vec<Row>, _>>()?;
        Ok(BenchReport { rows })
    }
}

/// Solves one instance. Witnesses are always checked; a rejected witness is
/// reported as an error row, never as a verdict.
pub fn solve_one(inst: &Instance, solver: Solver, limits: &RunLimits) -> Row {
    let start = Instant::now();
    let mut row = Row {
        id: inst.id.clone(),
        family: inst.family.clone(),
        verdict: String::new(),
        states_expanded: 0,
        sat_calls: 0,
        elapsed_ms: 0,
        verified: false,
    };
    match solver {
        Solver::Cdlsc => {
            let opts = cdlsc::Options {
                raw_tnf: false,
                limits: Limits {
                    max_frames: limits.max_frames,
                    max_sat_calls: None,
                    timeout: limits.timeout,
                },
            };
            match cdlsc::check(&inst.formula, &opts) {
                Ok(v) => {
                    row.states_expanded = v.stats().states_expanded;
                    row.sat_calls = v.stats().sat_calls;
                    row.verified = v.is_sat();
                    row.verdict = if v.is_sat() { "sat" } else { "unsat" }.into();
                    if let Verdict::Sat { witness, .. } = &v {
                        row.verified = crate::semantics::evaluate(witness, &inst.formula);
                    }
                }
                Err(CheckError::Timeout) => row.verdict = "timeout".into(),
                Err(CheckError::FrameLimit(_) | CheckError::SatCallLimit(_)) => row.verdict = "limit".into(),
                Err(e) => {
                    log::error!("{}: {e}", inst.id);
                    row.verdict = "error".into();
                }
            }
        }
        Solver::Naive => {
            let opts = BuildOptions {
                exhaustive: false,
                state_limit: limits.state_limit,
                timeout: limits.timeout,
            };
            match naive_check(&inst.formula, false, &opts) {
                Ok(out) => {
                    row.states_expanded = out.states_expanded;
                    row.sat_calls = out.sat_calls;
                    match &out.verdict {
                        NaiveVerdict::Sat(w) => {
                            row.verdict = "sat".into();
                            row.verified = crate::semantics::evaluate(w, &inst.formula);
                        }
                        NaiveVerdict::Unsat => row.verdict = "unsat".into(),
                    }
                }
                Err(SearchError::Timeout) => row.verdict = "timeout".into(),
                Err(SearchError::StateLimit(_)) => row.verdict = "limit".into(),
                Err(e) => {
                    log::error!("{}: {e}", inst.id);
                    row.verdict = "error".into();
                }
            }
        }
        Solver::Brute => match brute_force_sat(&inst.formula, limits.brute_bound) {
            Ok(BruteForceOutcome::Sat(w)) => {
                row.verdict = "sat".into();
                row.verified = crate::semantics::evaluate(&w, &inst.formula);
            }
            Ok(BruteForceOutcome::UnsatUpToBound(_)) => row.verdict = "unsat".into(),
            Err(e) => {
                log::warn!("{}: {e}", inst.id);
                row.verdict = "limit".into();
            }
        },
    }
    row.elapsed_ms = start.elapsed().as_millis() as u64;
    row
}

#[derive(Debug, Clone, Default)]
pub struct SuiteResult {
    pub reports: Vec<(Solver, BenchReport)>,
    /// Instance ids on which two solvers returned different verdicts, or
    /// where a SAT witness failed verification.
    pub failures: Vec<String>,
}

/// Runs every solver on every instance on a pool of `limits.jobs` workers.
/// Rows keep instance order.
pub fn run_suite(instances: &[Instance], solvers: &[Solver], limits: &RunLimits) -> Result<SuiteResult, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(limits.jobs.max(1)).build()?;
    let rows: Vec<Vec<Row>> = pool.install(|| {
        instances
            .par_iter()
            .map(|inst| solvers.iter().map(|s| solve_one(inst, *s, limits)).collect())
            .collect()
    });
    let mut result = SuiteResult::default();
    for (k, solver) in solvers.iter().enumerate() {
        let report = BenchReport {
            rows: rows.iter().map(|r| r[k].clone()).collect(),
        };
        result.reports.push((*solver, report));
    }
    for (inst, per_solver) in instances.iter().zip(&rows) {
        let verdicts: Vec<&str> = per_solver
            .iter()
            .filter(|r| r.is_verdict())
            .map(|r| r.verdict.as_str())
            .collect();
        let unverified = per_solver.iter().any(|r| r.verdict == "sat" && !r.verified);
        if unverified || verdicts.windows(2).any(|w| w[0] != w[1]) {
            result.failures.push(inst.id.clone());
        }
    }
    Ok(result)
}

/// Writes one `<id>.ltlf` file per instance plus `manifest.csv`.
pub fn write_corpus(dir: &Path, instances: &[Instance]) -> Result<(), BenchError> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("manifest.csv"))?;
    w.write_record(["id", "family", "file"])?;
    for inst in instances {
        let file = format!("{}.ltlf", inst.id);
        fs::write(dir.join(&file), format!("{}\n", inst.formula))?;
        w.write_record([inst.id.as_str(), inst.family.as_str(), file.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus(dir: &Path) -> Result<Vec<Instance>, BenchError> {
    let mut rd = csv::Reader::from_path(dir.join("manifest.csv"))?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let (id, family, file) = (&rec[0], &rec[1], &rec[2]);
        let text = fs::read_to_string(dir.join(file))?;
        let formula = parse(&text).map_err(|e| BenchError::Corpus {
            file: file.to_string(),
            message: e.to_string(),
        })?;
        out.push(Instance {
            id: id.to_string(),
            family: family.to_string(),
            formula,
        });
    }
    Ok(out)
}
