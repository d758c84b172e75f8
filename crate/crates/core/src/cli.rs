//! Command-line front end.
//!
//! Exit codes: 10 SAT, 20 UNSAT, 0 success without a verdict, 1 usage or
//! input error, 2 resource abort (timeout, frame, state or SAT-call limit).

use crate::abstraction::{Context, Encoder};
use crate::bench::{
    read_corpus, run_suite, write_corpus, BenchSpec, Family, Instance, Pattern, RunLimits, Solver,
};
use crate::cdlsc::{self, CheckError, Limits, Verdict};
use crate::formula::{parse, FiniteTrace, Formula};
use crate::semantics::{brute_force_sat, evaluate, BruteForceOutcome};
use crate::transition::{
    build_full_system, naive_check, prepare, witness_holds, BuildOptions, NaiveVerdict, SearchError, State,
    DEFAULT_STATE_LIMIT,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use itertools::Itertools;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ABORT: i32 = 2;
pub const EXIT_SAT: i32 = 10;
pub const EXIT_UNSAT: i32 = 20;

#[derive(Debug, Parser)]
#[command(name = "ltlfsat", version, about = "Satisfiability checking for LTL over finite traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide satisfiability of a formula.
    Check(CheckArgs),
    /// Run every applicable solver and compare their verdicts.
    Oracle(OracleArgs),
    /// Check a trace file against a formula.
    Verify(VerifyArgs),
    /// Generate benchmark formulas.
    Gen(GenArgs),
    /// Run solvers over a generated suite or a corpus directory.
    Bench(BenchArgs),
    /// Write the reachable transition system in DOT format.
    DumpTs(DumpArgs),
}

#[derive(Debug, Args)]
struct Input {
    /// File holding the formula (`-` for stdin).
    #[arg(short = 'f', long = "file", value_name = "FILE", conflicts_with = "formula")]
    file: Option<PathBuf>,
    /// The formula itself.
    #[arg(long, value_name = "STR")]
    formula: Option<String>,
    /// Take the input as already in tail normal form; it may mention `Tail`.
    #[arg(long)]
    raw_tnf: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleKind {
    Cdlsc,
    Naive,
    Brute,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, default_value = "cdlsc")]
    oracle: OracleKind,
    #[arg(long, value_name = "N")]
    max_frames: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long, value_name = "SECS")]
    timeout: Option<f64>,
    /// Trace length bound for the brute-force oracle.
    #[arg(long, value_name = "N", default_value_t = 8)]
    bound: usize,
    /// Also write the witness trace to this file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write the initial final-state query as DIMACS CNF.
    #[arg(long, value_name = "FILE")]
    dump_cnf: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_name = "SECS")]
    timeout: Option<f64>,
    #[arg(long, value_name = "N", default_value_t = 8)]
    bound: usize,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: Input,
    /// Trace file: one position per line, atoms separated by commas.
    #[arg(short = 't', long = "trace", value_name = "FILE")]
    trace: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenFamily {
    Random,
    Pattern,
    Conjunction,
}

#[derive(Debug, Args)]
struct FamilyArgs {
    #[arg(long, value_enum, default_value = "random")]
    family: GenFamily,
    /// Pattern name, for `--family pattern`.
    #[arg(long, value_name = "NAME")]
    pattern: Option<String>,
    #[arg(long, default_value_t = 3)]
    vars: usize,
    #[arg(long, default_value_t = 5)]
    min_len: usize,
    #[arg(long, default_value_t = 20)]
    max_len: usize,
    #[arg(long, default_value_t = 0.5)]
    temporal_prob: f64,
    /// First pattern instance size.
    #[arg(long, default_value_t = 1)]
    first: usize,
    #[arg(long, default_value_t = 0)]
    pool_seed: u64,
    #[arg(long, default_value_t = 3)]
    k_min: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Corpus directory; without it formulas are printed one per line.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Read instances from a corpus directory instead of generating them.
    #[arg(long, value_name = "DIR")]
    corpus: Option<PathBuf>,
    /// Comma-separated solvers; the first one's report is written.
    #[arg(long, value_name = "LIST", default_value = "cdlsc,naive", value_delimiter = ',')]
    oracle: Vec<String>,
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_name = "SECS")]
    timeout: Option<f64>,
    #[arg(long, value_name = "N")]
    max_frames: Option<usize>,
    #[arg(long, value_name = "N", default_value_t = 8)]
    bound: usize,
    /// CSV report destination; stdout by default. With several solvers the
    /// other reports go next to it as `<stem>.<solver>.csv`.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_name = "N", default_value_t = DEFAULT_STATE_LIMIT)]
    max_states: usize,
    #[arg(long, value_name = "SECS")]
    timeout: Option<f64>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// An error carrying the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn input_error(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: e.to_string(),
    }
}

fn abort(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_ABORT,
        message: e.to_string(),
    }
}

fn io_error(e: io::Error) -> Failure {
    input_error(e)
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Check(a) => cmd_check(a, out),
        Command::Oracle(a) => cmd_oracle(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Gen(a) => cmd_gen(a, out),
        Command::Bench(a) => cmd_bench(a, out, err),
        Command::DumpTs(a) => cmd_dump(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn read_formula(input: &Input) -> Result<Formula, Failure> {
    let text = match (&input.file, &input.formula) {
        (Some(p), _) if p == Path::new("-") => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(io_error)?;
            s
        }
        (Some(p), _) => fs::read_to_string(p).map_err(|e| input_error(format!("{}: {e}", p.display())))?,
        (None, Some(s)) => s.clone(),
        (None, None) => return Err(input_error("give a formula with -f FILE or --formula STR")),
    };
    parse(&text).map_err(input_error)
}

fn timeout(secs: Option<f64>) -> Result<Option<Duration>, Failure> {
    secs.map(|s| Duration::try_from_secs_f64(s).map_err(|_| input_error(format!("invalid timeout {s}"))))
        .transpose()
}

fn check_error(e: CheckError) -> Failure {
    match e {
        CheckError::FrameLimit(_) | CheckError::SatCallLimit(_) | CheckError::Timeout => abort(e),
        CheckError::Input(_) | CheckError::WitnessRejected(_) => input_error(e),
    }
}

fn search_error(e: SearchError) -> Failure {
    match e {
        SearchError::Input(_) | SearchError::WitnessRejected(_) => input_error(e),
        SearchError::StateLimit(_) | SearchError::Timeout => abort(e),
    }
}

fn w(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<(), Failure> {
    out.write_fmt(text).map_err(io_error)
}

fn write_witness(out: &mut dyn Write, trace: &FiniteTrace, file: Option<&Path>) -> Result<(), Failure> {
    w(out, format_args!("witness ({} positions):\n", trace.len()))?;
    for pos in trace.positions() {
        w(out, format_args!("  {{{}}}\n", pos.iter().join(", ")))?;
    }
    if let Some(p) = file {
        fs::write(p, trace.to_string()).map_err(io_error)?;
    }
    Ok(())
}

fn cmd_check(a: CheckArgs, out: &mut dyn Write) -> CmdResult {
    let f = read_formula(&a.input)?;
    let raw = a.input.raw_tnf;
    let limit = timeout(a.timeout)?;
    if let Some(path) = &a.dump_cnf {
        let prepared = prepare(&f, raw).map_err(input_error)?;
        let mut enc = Encoder::new(&prepared);
        let mut file = fs::File::create(path).map_err(io_error)?;
        enc.write_query(&mut file, State::initial(&prepared).members(), Context::Final, &[])
            .map_err(input_error)?
            .map_err(io_error)?;
    }
    match a.oracle {
        OracleKind::Cdlsc => {
            let opts = cdlsc::Options {
                raw_tnf: raw,
                limits: Limits {
                    max_frames: a.max_frames,
                    max_sat_calls: None,
                    timeout: limit,
                },
            };
            let verdict = cdlsc::check(&f, &opts).map_err(check_error)?;
            let s = *verdict.stats();
            let code = match &verdict {
                Verdict::Sat { witness, .. } => {
                    w(out, format_args!("sat\n"))?;
                    write_witness(out, witness, a.out.as_deref())?;
                    EXIT_SAT
                }
                Verdict::Unsat { invariant_level, .. } => {
                    w(out, format_args!("unsat\ninvariant at frame {invariant_level}\n"))?;
                    EXIT_UNSAT
                }
            };
            w(
                out,
                format_args!(
                    "states_expanded={} sat_calls={} frames={} elapsed_ms={}\n",
                    s.states_expanded,
                    s.sat_calls,
                    s.frames,
                    s.elapsed.as_millis()
                ),
            )?;
            Ok(code)
        }
        OracleKind::Naive => {
            let opts = BuildOptions {
                timeout: limit,
                ..BuildOptions::default()
            };
            let r = naive_check(&f, raw, &opts).map_err(search_error)?;
            let code = match &r.verdict {
                NaiveVerdict::Sat(t) => {
                    w(out, format_args!("sat\n"))?;
                    write_witness(out, t, a.out.as_deref())?;
                    EXIT_SAT
                }
                NaiveVerdict::Unsat => {
                    w(out, format_args!("unsat\n"))?;
                    EXIT_UNSAT
                }
            };
            w(
                out,
                format_args!(
                    "states_expanded={} sat_calls={} elapsed_ms={}\n",
                    r.states_expanded,
                    r.sat_calls,
                    r.elapsed.as_millis()
                ),
            )?;
            Ok(code)
        }
        OracleKind::Brute => {
            if raw {
                return Err(input_error("the brute-force oracle does not take --raw-tnf"));
            }
            match brute_force_sat(&f, a.bound).map_err(input_error)? {
                BruteForceOutcome::Sat(t) => {
                    w(out, format_args!("sat\n"))?;
                    write_witness(out, &t, a.out.as_deref())?;
                    Ok(EXIT_SAT)
                }
                BruteForceOutcome::UnsatUpToBound(b) => {
                    // bounded search settles nothing about longer traces
                    w(out, format_args!("unknown: no model of length at most {b}\n"))?;
                    Ok(EXIT_OK)
                }
            }
        }
    }
}

fn cmd_oracle(a: OracleArgs, out: &mut dyn Write) -> CmdResult {
    let f = read_formula(&a.input)?;
    let raw = a.input.raw_tnf;
    let limit = timeout(a.timeout)?;
    let opts = cdlsc::Options {
        raw_tnf: raw,
        limits: Limits {
            timeout: limit,
            ..Limits::default()
        },
    };
    let cd = cdlsc::check(&f, &opts).map_err(check_error)?.is_sat();
    w(out, format_args!("cdlsc: {}\n", if cd { "sat" } else { "unsat" }))?;
    let naive_opts = BuildOptions {
        timeout: limit,
        ..BuildOptions::default()
    };
    let nv = matches!(
        naive_check(&f, raw, &naive_opts).map_err(search_error)?.verdict,
        NaiveVerdict::Sat(_)
    );
    w(out, format_args!("naive: {}\n", if nv { "sat" } else { "unsat" }))?;
    let mut agree = cd == nv;
    if !raw {
        match brute_force_sat(&f, a.bound) {
            Ok(BruteForceOutcome::Sat(_)) => {
                w(out, format_args!("brute: sat\n"))?;
                agree &= cd;
            }
            Ok(BruteForceOutcome::UnsatUpToBound(b)) => {
                // only contradicts a SAT verdict whose witness fits the bound
                w(out, format_args!("brute: no model up to length {b}\n"))?;
            }
            Err(e) => w(out, format_args!("brute: skipped ({e})\n"))?,
        }
    }
    if !agree {
        return Err(input_error("solvers disagree"));
    }
    Ok(if cd { EXIT_SAT } else { EXIT_UNSAT })
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let f = read_formula(&a.input)?;
    let text = fs::read_to_string(&a.trace).map_err(|e| input_error(format!("{}: {e}", a.trace.display())))?;
    let trace = FiniteTrace::parse(&text).map_err(input_error)?;
    let holds = if a.input.raw_tnf {
        witness_holds(&f, &trace.strip_tail(), true)
    } else {
        evaluate(&trace, &f)
    };
    if holds {
        w(out, format_args!("accepted\n"))?;
        Ok(EXIT_OK)
    } else {
        Err(input_error("trace does not satisfy the formula"))
    }
}

fn bench_spec(a: &FamilyArgs) -> Result<BenchSpec, Failure> {
    let family = match a.family {
        GenFamily::Random => {
            if a.vars == 0 || a.min_len == 0 || a.min_len > a.max_len || !(0.0..=1.0).contains(&a.temporal_prob) {
                return Err(input_error("need vars >= 1, 1 <= min-len <= max-len, 0 <= temporal-prob <= 1"));
            }
            Family::Random {
                vars: a.vars,
                min_len: a.min_len,
                max_len: a.max_len,
                temporal_prob: a.temporal_prob,
            }
        }
        GenFamily::Pattern => {
            let name = a.pattern.as_deref().ok_or_else(|| input_error("--family pattern needs --pattern NAME"))?;
            if a.first == 0 {
                return Err(input_error("--first must be positive"));
            }
            Family::Pattern {
                pattern: name.parse::<Pattern>().map_err(input_error)?,
                first: a.first,
            }
        }
        GenFamily::Conjunction => {
            if a.k_min == 0 || a.k_min > a.k_max {
                return Err(input_error("need 1 <= k-min <= k-max"));
            }
            Family::Conjunction {
                pool_seed: a.pool_seed,
                k_min: a.k_min,
                k_max: a.k_max,
            }
        }
    };
    Ok(BenchSpec {
        family,
        seed: a.seed,
        count: a.count,
    })
}

fn cmd_gen(a: GenArgs, out: &mut dyn Write) -> CmdResult {
    let insts = bench_spec(&a.family)?.instances();
    match &a.out {
        Some(dir) => {
            write_corpus(dir, &insts).map_err(input_error)?;
            w(out, format_args!("wrote {} formulas to {}\n", insts.len(), dir.display()))?;
        }
        None => {
            for i in &insts {
                w(out, format_args!("{}\t{}\n", i.id, i.formula))?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let solvers: Vec<Solver> = a
        .oracle
        .iter()
        .map(|s| s.trim().parse::<Solver>())
        .collect::<Result<_, _>>()
        .map_err(input_error)?;
    if solvers.is_empty() {
        return Err(input_error("no solver selected"));
    }
    let insts: Vec<Instance> = match &a.corpus {
        Some(dir) => read_corpus(dir).map_err(input_error)?,
        None => bench_spec(&a.family)?.instances(),
    };
    let limits = RunLimits {
        timeout: timeout(a.timeout)?,
        max_frames: a.max_frames,
        brute_bound: a.bound,
        jobs: a.jobs,
        ..RunLimits::default()
    };
    let result = run_suite(&insts, &solvers, &limits).map_err(input_error)?;
    for (k, (solver, report)) in result.reports.iter().enumerate() {
        match &a.out {
            Some(path) if k == 0 => report.write_csv(fs::File::create(path).map_err(io_error)?),
            Some(path) => {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
                report.write_csv(fs::File::create(path.with_file_name(format!("{stem}.{solver}.csv"))).map_err(io_error)?)
            }
            None if k == 0 => report.write_csv(&mut *out),
            None => Ok(()),
        }
        .map_err(input_error)?;
        let t = report.totals();
        let _ = writeln!(
            err,
            "{solver}: {} instances, {} sat, {} unsat, {} aborted, states_expanded={} sat_calls={} elapsed_ms={}",
            t.instances, t.sat, t.unsat, t.aborted, t.states_expanded, t.sat_calls, t.elapsed_ms
        );
    }
    if !result.failures.is_empty() {
        return Err(input_error(format!("verdict mismatch on {}", result.failures.join(", "))));
    }
    Ok(EXIT_OK)
}

fn cmd_dump(a: DumpArgs, out: &mut dyn Write) -> CmdResult {
    let f = read_formula(&a.input)?;
    let prepared = prepare(&f, a.input.raw_tnf).map_err(input_error)?;
    let opts = BuildOptions {
        exhaustive: true,
        state_limit: a.max_states,
        timeout: timeout(a.timeout)?,
    };
    let ts = build_full_system(&prepared, &opts).map_err(search_error)?;
    let dot = ts.to_dot();
    match &a.out {
        Some(p) => fs::write(p, dot).map_err(io_error)?,
        None => w(out, format_args!("{dot}"))?,
    }
    Ok(EXIT_OK)
}
