//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use itertools::Itertools;
use ltlfsat::abstraction::xnf;
use ltlfsat::bench::{gen_conjunction, gen_pattern, gen_random, Pattern};
use ltlfsat::cdlsc::{self, check_instrumented, CheckError, ConflictSequence, Limits, Options, Verdict};
use ltlfsat::formula::{parse, to_nnf, to_tnf, FiniteTrace, Formula, TAIL};
use ltlfsat::semantics::{brute_force_sat, evaluate, BruteForceOutcome};
use ltlfsat::transition::{
    build_full_system, naive_check, prepare, witness_holds, BuildOptions, NaiveVerdict, TransitionSystem,
};
use std::collections::{BTreeSet, VecDeque};
use std::process::Command;
use std::time::{Duration, Instant};

/// Tally of every SAT witness produced anywhere in the suite.
#[derive(Default)]
struct Witnesses {
    checked: usize,
    rejected: Vec<String>,
}

impl Witnesses {
    fn record(&mut self, f: &Formula, w: &FiniteTrace, raw: bool) {
        self.checked += 1;
        let ok = !w.mentions_tail() && witness_holds(f, w, raw);
        if !ok {
            self.rejected.push(format!("{f} with {w:?}"));
        }
    }
}

type Outcome = Result<String, String>;

fn cdlsc(f: &Formula, raw: bool, ws: &mut Witnesses) -> Result<Verdict, CheckError> {
    let v = cdlsc::check(f, &Options { raw_tnf: raw, limits: Limits::default() })?;
    if let Verdict::Sat { witness, .. } = &v {
        ws.record(f, witness, raw);
    }
    Ok(v)
}

fn naive(f: &Formula, ws: &mut Witnesses) -> (bool, usize, Duration) {
    let out = naive_check(f, false, &BuildOptions::default()).expect("naive check");
    if let NaiveVerdict::Sat(w) = &out.verdict {
        ws.record(f, w, false);
    }
    (matches!(out.verdict, NaiveVerdict::Sat(_)), out.states_expanded, out.elapsed)
}

fn exhaustive(prepared: &Formula) -> TransitionSystem {
    build_full_system(
        prepared,
        &BuildOptions {
            exhaustive: true,
            ..BuildOptions::default()
        },
    )
    .expect("exhaustive system")
}

fn random_small(seed: u64, max_vars: u64, max_len: u64) -> Formula {
    let vars = 1 + seed % max_vars;
    let len = 1 + (seed / max_vars) % max_len;
    gen_random(vars as usize, len as usize, 0.5, seed)
}

fn oracle_equivalence(ws: &mut Witnesses) -> Outcome {
    let start = Instant::now();
    let mut disagreements = Vec::new();
    let (mut sat, mut unsat) = (0, 0);
    for seed in 0..500u64 {
        let f = random_small(seed, 3, 12);
        let cd = cdlsc(&f, false, ws).map_err(|e| format!("{f}: {e}"))?.is_sat();
        let (nv, _, _) = naive(&f, ws);
        let bound = exhaustive(&prepare(&f, false).unwrap()).len() + 1;
        let bf = match brute_force_sat(&f, bound).map_err(|e| e.to_string())? {
            BruteForceOutcome::Sat(w) => {
                ws.record(&f, &w, false);
                true
            }
            BruteForceOutcome::UnsatUpToBound(_) => false,
        };
        if cd != nv || cd != bf {
            disagreements.push(format!("seed {seed}: {f} cdlsc={cd} naive={nv} brute={bf}"));
        }
        if cd {
            sat += 1
        } else {
            unsat += 1
        }
    }
    let elapsed = start.elapsed();
    if !disagreements.is_empty() {
        return Err(disagreements.join("; "));
    }
    if elapsed >= Duration::from_secs(600) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("500 formulas ({sat} sat, {unsat} unsat) agree, {elapsed:.1?}"))
}

fn worked_examples(ws: &mut Witnesses) -> Outcome {
    let a = parse("(!Tail & a) U b").unwrap();
    match cdlsc(&a, true, ws).map_err(|e| e.to_string())? {
        Verdict::Sat { witness, .. } if witness.len() == 1 && witness.holds(0, "b") => {}
        v => return Err(format!("(a) gave {v:?}")),
    }
    let b = parse("(!Tail) U a & (!Tail) U !a & (!Tail) U b & (!Tail) U !b & (!Tail) U c").unwrap();
    let states_b = match cdlsc(&b, true, ws).map_err(|e| e.to_string())? {
        Verdict::Sat { witness, stats } if witness.len() == 2 && stats.states_expanded <= 5 => stats.states_expanded,
        v => return Err(format!("(b) gave {v:?}")),
    };
    let c = parse("(!Tail) U a & Tail R !a & (!Tail) U b").unwrap();
    match cdlsc(&c, true, ws).map_err(|e| e.to_string())? {
        Verdict::Unsat { invariant_level: 0, stats } if stats.states_expanded == 1 => {}
        v => return Err(format!("(c) gave {v:?}")),
    }
    Ok(format!("(a) length-1 witness, (b) length 2 with {states_b} states, (c) unsat at frame 0 with 1 state"))
}

fn pattern_rows(ws: &mut Witnesses) -> Outcome {
    for p in Pattern::ALL {
        for n in 1..=20 {
            let f = gen_pattern(p, n);
            if !cdlsc(&f, false, ws).map_err(|e| format!("{p} n={n}: {e}"))?.is_sat() {
                return Err(format!("{p} n={n} reported unsat"));
            }
        }
    }
    let (mut sat, mut unsat) = (0, 0);
    let mut unsat_seed = None;
    for seed in 0..100u64 {
        let k = 3 + (seed % 8) as usize;
        let f = gen_conjunction(0, k, seed);
        let cd = cdlsc(&f, false, ws).map_err(|e| e.to_string())?.is_sat();
        let (nv, _, _) = naive(&f, ws);
        if cd != nv {
            return Err(format!("conjunction seed {seed}: cdlsc={cd} naive={nv}"));
        }
        if cd {
            sat += 1;
        } else {
            unsat += 1;
            unsat_seed.get_or_insert(seed);
        }
    }
    if sat == 0 || unsat == 0 {
        return Err(format!("conjunctions: {sat} sat, {unsat} unsat"));
    }
    Ok(format!(
        "7 families x 20 sizes sat; conjunctions {sat} sat / {unsat} unsat (first unsat seed {})",
        unsat_seed.unwrap()
    ))
}

/// Every trace of length `1..=max_len` over `atoms`.
fn all_traces(atoms: &[String], max_len: usize) -> Vec<FiniteTrace> {
    let valuations: Vec<BTreeSet<String>> = atoms.iter().cloned().powerset().map(|s| s.into_iter().collect()).collect();
    (1..=max_len)
        .flat_map(|len| {
            std::iter::repeat_n(valuations.clone(), len)
                .multi_cartesian_product()
                .map(|ps| FiniteTrace::new(ps).unwrap())
        })
        .collect()
}

fn normal_forms() -> Outcome {
    let mut violations = Vec::new();
    let two: Vec<String> = vec!["p0".into(), "p1".into()];
    let traces = all_traces(&two, 4);
    let with_tail: Vec<String> = vec!["p0".into(), "p1".into(), TAIL.into()];
    let tail_traces = all_traces(&with_tail, 4);
    for seed in 0..200u64 {
        let f = to_nnf(&random_small(seed, 2, 12));
        let t = to_tnf(&f).unwrap();
        let s1 = brute_force_sat(&f, 5).unwrap().is_sat();
        let s2 = brute_force_sat(&t, 5).unwrap().is_sat();
        if s1 != s2 {
            violations.push(format!("sat mismatch for {f}"));
        }
        for tr in &traces {
            if evaluate(tr, &f) != evaluate(&tr.with_tail_marker(), &t) {
                violations.push(format!("trace correspondence for {f} on {tr:?}"));
                break;
            }
        }
        let x = xnf(&t).map_err(|e| e.to_string())?;
        for tr in &tail_traces {
            if evaluate(tr, &t) != evaluate(tr, &x) {
                violations.push(format!("xnf changes {t} on {tr:?}"));
                break;
            }
        }
    }
    if violations.is_empty() {
        Ok("200 NNF formulas each for satisfiability, trace correspondence and xnf equivalence".into())
    } else {
        Err(violations.join("; "))
    }
}

/// Distance from every state to the nearest final state.
fn distances_to_final(ts: &TransitionSystem) -> Vec<Option<usize>> {
    let n = ts.len();
    let mut preds = vec![Vec::new(); n];
    for i in 0..n {
        for j in ts.successors(i) {
            preds[j].push(i);
        }
    }
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    for (i, d) in dist.iter_mut().enumerate() {
        if ts.is_final(i) {
            *d = Some(0);
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let d = dist[i].unwrap();
        for &p in &preds[i] {
            if dist[p].is_none() {
                dist[p] = Some(d + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}

fn sequence_violations(seq: &ConflictSequence, ts: &TransitionSystem, dist: &[Option<usize>]) -> Option<String> {
    let s0 = ts.state(0);
    for i in 0..seq.len() {
        if !seq.contains(i, s0) {
            return Some(format!("initial state missing from frame {i}"));
        }
    }
    for s in 0..ts.len() {
        let state = ts.state(s);
        if seq.contains(0, state) && ts.is_final(s) {
            return Some(format!("final state {state} in frame 0"));
        }
        for i in 0..seq.len() {
            if !seq.contains(i, state) {
                continue;
            }
            if dist[s].is_some_and(|d| d <= i) {
                return Some(format!("{state} in frame {i} reaches a final state in {:?} steps", dist[s]));
            }
        }
        for i in 0..seq.len().saturating_sub(1) {
            if seq.contains(i + 1, state) {
                if let Some(t) = ts.successors(s).find(|&t| !seq.contains(i, ts.state(t))) {
                    return Some(format!("{state} in frame {} has successor {} outside frame {i}", i + 1, ts.state(t)));
                }
            }
        }
    }
    None
}

fn conflict_sequences(ws: &mut Witnesses) -> Outcome {
    let mut runs = 0;
    let mut snapshots = 0;
    let mut seed = 10_000u64;
    while runs < 100 {
        seed += 1;
        if seed > 20_000 {
            return Err(format!("only {runs} instrumented runs found"));
        }
        let f = random_small(seed, 3, 10);
        let (verdict, info) = check_instrumented(&f, &Options::default()).map_err(|e| e.to_string())?;
        if let Verdict::Sat { witness, .. } = &verdict {
            ws.record(&f, witness, false);
        }
        if info.snapshots.is_empty() {
            continue;
        }
        runs += 1;
        let ts = exhaustive(&info.formula);
        let dist = distances_to_final(&ts);
        for seq in &info.snapshots {
            snapshots += 1;
            if let Some(v) = sequence_violations(seq, &ts, &dist) {
                return Err(format!("{f}: {v}"));
            }
        }
        if let Some(seq) = &info.frames_at_success {
            let n = info.spine.len() - 1;
            for (i, s) in info.spine.iter().enumerate() {
                if n - i < seq.len() && seq.contains(n - i, s) {
                    return Err(format!("{f}: spine state {s} lies in frame {}", n - i));
                }
            }
        }
    }
    Ok(format!("{runs} runs, {snapshots} sequences checked against the exhaustive system"))
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

fn efficiency(ws: &mut Witnesses) -> Outcome {
    let (mut cd_states, mut nv_states) = (Vec::new(), Vec::new());
    let (mut cd_time, mut nv_time) = (Duration::ZERO, Duration::ZERO);
    for seed in 0..100u64 {
        let k = 5 + (seed % 6) as usize;
        let f = gen_conjunction(1, k, 1000 + seed);
        let v = cdlsc(&f, false, ws).map_err(|e| e.to_string())?;
        cd_states.push(v.stats().states_expanded);
        cd_time += v.stats().elapsed;
        let (sat, states, elapsed) = naive(&f, ws);
        if sat != v.is_sat() {
            return Err(format!("verdicts differ on seed {seed}"));
        }
        nv_states.push(states);
        nv_time += elapsed;
    }
    let (mc, mn) = (median(cd_states), median(nv_states));
    let detail = format!("median states {mc} vs {mn}, total time {cd_time:.1?} vs {nv_time:.1?}");
    if mc < mn && cd_time <= nv_time {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn termination() -> Outcome {
    let mut checked = 0;
    for seed in 0..60u64 {
        let f = gen_conjunction(2, 5 + (seed % 4) as usize, seed);
        let full = cdlsc::check(&f, &Options::default()).map_err(|e| e.to_string())?;
        let calls = full.stats().sat_calls;
        for max in [1, calls / 2, calls.saturating_sub(1)] {
            let limited = Options {
                raw_tnf: false,
                limits: Limits {
                    max_sat_calls: Some(max.max(1)),
                    ..Limits::default()
                },
            };
            match cdlsc::check(&f, &limited) {
                Err(CheckError::SatCallLimit(_)) => {}
                Ok(v) if max.max(1) >= calls => {
                    if v.is_sat() != full.is_sat() {
                        return Err(format!("seed {seed}: verdict changed under a limit"));
                    }
                }
                other => return Err(format!("seed {seed}: {max} of {calls} calls gave {other:?}")),
            }
            checked += 1;
        }
        let zero = Options {
            raw_tnf: false,
            limits: Limits {
                timeout: Some(Duration::ZERO),
                ..Limits::default()
            },
        };
        if !matches!(cdlsc::check(&f, &zero), Err(CheckError::Timeout)) {
            return Err(format!("seed {seed}: zero timeout did not abort"));
        }
        checked += 1;
    }
    let bin = env!("CARGO_BIN_EXE_ltlfsat");
    let cases: [(&[&str], i32); 6] = [
        (&["check", "--formula", "a U b"], 10),
        (&["check", "--formula", "a & !a"], 20),
        (&["check", "--oracle", "naive", "--formula", "G a & F !a"], 20),
        (&["check", "--timeout", "0", "--formula", "G (a -> X b) & F a"], 2),
        (&["check", "--max-frames", "1", "--formula", "G a & F !a"], 2),
        (&["check", "--formula", "a U"], 1),
    ];
    for (args, code) in cases {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        if out.status.code() != Some(code) {
            return Err(format!("{args:?} exited with {:?}, expected {code}", out.status.code()));
        }
        if code == 2 && String::from_utf8_lossy(&out.stdout).contains("sat") {
            return Err(format!("{args:?} printed a verdict after aborting"));
        }
    }
    Ok(format!("{checked} limited runs aborted cleanly; exit codes 10/20/2/1 observed"))
}

fn main() {
    let mut ws = Witnesses::default();
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "oracle equivalence", oracle_equivalence(&mut ws)),
        (3, "worked examples", worked_examples(&mut ws)),
        (4, "pattern and conjunction verdicts", pattern_rows(&mut ws)),
        (5, "normal forms", normal_forms()),
        (6, "conflict sequence invariants", conflict_sequences(&mut ws)),
        (7, "efficiency", efficiency(&mut ws)),
        (8, "termination and exit codes", termination()),
    ];
    let soundness = if ws.rejected.is_empty() && ws.checked > 0 {
        Ok(format!("{} witnesses verified", ws.checked))
    } else {
        Err(format!("{} of {} witnesses rejected: {}", ws.rejected.len(), ws.checked, ws.rejected.join("; ")))
    };
    results.insert(1, (2, "witness soundness", soundness));
    let mut failed = false;
    for (n, name, r) in &results {
        match r {
            Ok(d) => println!("PASS criterion {n} ({name}): {d}"),
            Err(d) => {
                failed = true;
                println!("FAIL criterion {n} ({name}): {d}");
            }
        }
    }
    if failed {
        std::process::exit(1);
    }
}
