use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use qsym::codes::{
    self, initial_state, verify_decoder, BasisKind, CodeSpec, Verdict, VerifyOptions, VerifyReport,
};
use qsym::engine::{concrete_run, CVal, ConcreteStore, Externals, HostResolver, RngChooser};
use qsym::expr::{Symbol, Valuation};
use qsym::program::{parse, validate, Program};
use qsym::sampler::{bench_row, compile_sampler, gen_layered_random_circuit};
use qsym::smt::SolverConfig;

const EXIT_USAGE: u8 = 64;
const EXIT_UNAVAILABLE: u8 = 69;

#[derive(Parser)]
#[command(name = "qsym", version, about = "Symbolic execution of QEC programs over symbolic stabilizer states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a decoder against all admissible error patterns.
    Verify(VerifyArgs),
    /// Like `verify`, but print only the counterexample (or `null`).
    Findbug(VerifyArgs),
    /// Sample measurement outcomes of a branch-free program.
    Sample(SampleArgs),
    /// Time sampler compilation and throughput on layered random circuits.
    Bench(BenchArgs),
    /// Run a program concretely and print the trace.
    Run(RunArgs),
    /// Print a code's checks and logicals as JSON.
    Code(CodeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Repetition,
    Toric,
    Tanner,
}

#[derive(Args, Clone)]
struct CodeArgs {
    #[arg(long, value_enum)]
    code: Family,
    /// Repetition code length.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Toric code lattice size.
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Tanner code group exponent.
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// Tanner code group multiplier.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// X-error budget.
    #[arg(long, default_value_t = 1)]
    dmax: usize,
    /// Z-error budget; defaults to `--dmax` for CSS codes and 0 for repetition codes.
    #[arg(long)]
    dmax_z: Option<usize>,
    /// Use the decoder with a seeded bug.
    #[arg(long)]
    buggy: bool,
    /// Decoder program file replacing the generated decoder.
    #[arg(long)]
    program: Option<PathBuf>,
    /// Solver command line, e.g. "z3 -in".
    #[arg(long)]
    solver: Option<String>,
    /// Per-query solver timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long, default_value_t = 1 << 16)]
    fork_budget: usize,
    /// Keep single-Pauli conditionals as branches.
    #[arg(long)]
    no_lift: bool,
    /// Stop after symbolic execution.
    #[arg(long)]
    skip_smt: bool,
    /// Verify the two initial states on separate threads when > 1.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, conflicts_with = "program", required_unless_present = "program")]
    random_circuit: Option<usize>,
    #[arg(long)]
    program: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    shots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Binds a program input, `name=0|1`.
    #[arg(long = "bind", value_parser = parse_binding)]
    bindings: Vec<(String, u64)>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![40, 100, 200])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    shots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    program: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "bind", value_parser = parse_binding)]
    bindings: Vec<(String, u64)>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_binding(s: &str) -> Result<(String, u64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v = v.trim().parse().map_err(|_| format!("bad value in `{s}`"))?;
    Ok((k.trim().to_string(), v))
}

/// Failures mapped to their exit codes.
enum Failure {
    Usage(String),
    Unavailable(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn build_code(a: &CodeArgs) -> Result<CodeSpec, Failure> {
    let r = match a.code {
        Family::Repetition => codes::repetition_code(a.n),
        Family::Toric => codes::toric_code(a.d),
        Family::Tanner => codes::tanner(a.m, a.k),
    };
    r.map_err(|e| Failure::Usage(e.to_string()))
}

fn load_program(path: &PathBuf) -> Result<Program, Failure> {
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let p = parse(&src).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let diags = validate(&p);
    if let Some(d) = diags.first() {
        return Err(Failure::Usage(format!("{}: {d}", path.display())));
    }
    Ok(p)
}

fn decoder_for(a: &VerifyArgs, code: &CodeSpec, dmax_z: usize) -> Result<(Program, Externals), Failure> {
    let (program, ext) = match a.code.code {
        Family::Repetition => {
            let (_, p, ext) = codes::repetition(a.code.n, a.buggy).map_err(|e| Failure::Usage(e.to_string()))?;
            (p, ext)
        }
        Family::Toric => {
            let (_, p, ext) = codes::toric(a.code.d, a.buggy).map_err(|e| Failure::Usage(e.to_string()))?;
            (p, ext)
        }
        Family::Tanner => codes::css_decoder(code, a.dmax, dmax_z, a.buggy),
    };
    match &a.program {
        Some(path) => {
            let p = load_program(path)?;
            if p.num_qubits != code.n {
                return Err(Failure::Usage(format!("program has {} qubits, code has {}", p.num_qubits, code.n)));
            }
            Ok((p, ext))
        }
        None => Ok((program, ext)),
    }
}

fn merge(a: VerifyReport, b: VerifyReport) -> VerifyReport {
    let verdict = match (a.verdict, b.verdict) {
        (v @ Verdict::Bug(_), _) | (_, v @ Verdict::Bug(_)) => v,
        (v @ Verdict::Inconclusive(_), _) | (_, v @ Verdict::Inconclusive(_)) => v,
        _ => Verdict::Verified,
    };
    let mut timing = a.timing;
    timing.init_ms += b.timing.init_ms;
    timing.qse_ms += b.timing.qse_ms;
    timing.smt_ms += b.timing.smt_ms;
    VerifyReport { verdict, timing, terminals: a.terminals + b.terminals, queries: a.queries + b.queries }
}

fn run_verify(a: &VerifyArgs) -> Result<(VerifyReport, CodeSpec, f64), Failure> {
    let code = build_code(&a.code)?;
    let dmax_z = a.dmax_z.unwrap_or(if a.code.code == Family::Repetition { 0 } else { a.dmax });
    let (decoder, ext) = decoder_for(a, &code, dmax_z)?;
    let solver = match &a.solver {
        Some(cmd) => SolverConfig::from_command(cmd).ok_or_else(|| Failure::Usage("empty --solver".into()))?,
        None => SolverConfig::from_env(),
    }
    .with_timeout(a.timeout.map(Duration::from_secs_f64));
    if !a.skip_smt && !solver.available() {
        return Err(Failure::Unavailable(format!("SMT solver `{}` not found", solver.command_line())));
    }
    let opts = VerifyOptions {
        solver,
        fork_budget: a.fork_budget,
        lift_pauli_conditionals: !a.no_lift,
        bases: vec![BasisKind::Z, BasisKind::X],
        skip_smt: a.skip_smt,
    };
    let start = Instant::now();
    let report = if a.jobs > 1 {
        let one = |basis| VerifyOptions { bases: vec![basis], ..opts.clone() };
        let (oz, ox) = (one(BasisKind::Z), one(BasisKind::X));
        let (rz, rx) = std::thread::scope(|s| {
            let hz = s.spawn(|| verify_decoder(&code, &decoder, &ext, a.dmax, dmax_z, &oz));
            let hx = s.spawn(|| verify_decoder(&code, &decoder, &ext, a.dmax, dmax_z, &ox));
            (hz.join().expect("verifier thread"), hx.join().expect("verifier thread"))
        });
        merge(rz.map_err(anyhow::Error::from)?, rx.map_err(anyhow::Error::from)?)
    } else {
        verify_decoder(&code, &decoder, &ext, a.dmax, dmax_z, &opts).map_err(anyhow::Error::from)?
    };
    Ok((report, code, start.elapsed().as_secs_f64() * 1e3))
}

fn verdict_exit(v: &Verdict) -> u8 {
    match v {
        Verdict::Verified => 0,
        Verdict::Bug(_) => 1,
        Verdict::Inconclusive(_) => 2,
    }
}

fn report_json(a: &VerifyArgs, r: &VerifyReport, code: &CodeSpec, total_ms: f64) -> Value {
    let (reason, cx) = match &r.verdict {
        Verdict::Verified => (Value::Null, Value::Null),
        Verdict::Bug(c) => (Value::Null, c.to_json()),
        Verdict::Inconclusive(why) => (json!(why), Value::Null),
    };
    json!({
        "code": { "name": code.name, "n": code.n, "k": code.k },
        "buggy": a.buggy,
        "dmax": a.dmax,
        "dmax_z": a.dmax_z.unwrap_or(if a.code.code == Family::Repetition { 0 } else { a.dmax }),
        "verdict": r.verdict.name(),
        "reason": reason,
        "counterexample": cx,
        "terminals": r.terminals,
        "queries": r.queries,
        "timing": { "init_ms": r.timing.init_ms, "qse_ms": r.timing.qse_ms, "smt_ms": r.timing.smt_ms, "total_ms": total_ms },
    })
}

fn cmd_verify(a: &VerifyArgs, only_counterexample: bool) -> Result<u8, Failure> {
    let (report, code, total) = run_verify(a)?;
    let text = if only_counterexample {
        match &report.verdict {
            Verdict::Bug(c) => serde_json::to_string_pretty(&c.to_json()),
            _ => Ok("null".to_string()),
        }
    } else {
        serde_json::to_string_pretty(&report_json(a, &report, &code, total))
    }
    .map_err(anyhow::Error::from)?;
    emit(&a.code.output, &text)?;
    if let Verdict::Inconclusive(why) = &report.verdict {
        eprintln!("inconclusive: {why}");
    }
    Ok(verdict_exit(&report.verdict))
}

fn bindings(list: &[(String, u64)]) -> Valuation {
    let mut v = Valuation::new();
    for (k, x) in list {
        v.set(Symbol::new(k), *x);
    }
    v
}

fn cmd_sample(a: &SampleArgs) -> Result<u8, Failure> {
    let program = match (a.random_circuit, &a.program) {
        (Some(n), _) if n < 2 => return Err(Failure::Usage("--random-circuit needs at least 2 qubits".into())),
        (Some(n), _) => gen_layered_random_circuit(n, a.seed),
        (None, Some(path)) => load_program(path)?,
        (None, None) => return Err(Failure::Usage("sample needs --random-circuit or --program".into())),
    };
    let sampler = compile_sampler(&program).map_err(|e| Failure::Usage(e.to_string()))?;
    let m = sampler.sample(a.shots, a.seed, &bindings(&a.bindings), a.jobs).map_err(|e| Failure::Usage(e.to_string()))?;
    let text = match a.format {
        Format::Text => m.to_text(),
        Format::Json => {
            let mut v = m.to_json();
            v["names"] = json!(sampler.names);
            serde_json::to_string(&v).map_err(anyhow::Error::from)?
        }
    };
    emit(&a.output, &text)?;
    Ok(0)
}

fn cmd_bench(a: &BenchArgs) -> Result<u8, Failure> {
    let mut csv = String::from("n,init_ms,samples_per_sec\n");
    for &n in &a.sizes {
        if n < 2 {
            return Err(Failure::Usage(format!("bench size {n} is below 2")));
        }
        let p = gen_layered_random_circuit(n, a.seed);
        let t = Instant::now();
        let s = compile_sampler(&p).map_err(anyhow::Error::from)?;
        let init_ms = t.elapsed().as_secs_f64() * 1e3;
        let t = Instant::now();
        s.sample(a.shots, a.seed, &Valuation::new(), a.jobs).map_err(anyhow::Error::from)?;
        let rate = a.shots as f64 / t.elapsed().as_secs_f64().max(1e-9);
        csv.push_str(&bench_row(n, init_ms, rate));
        csv.push('\n');
    }
    emit(&a.output, &csv)?;
    Ok(0)
}

fn cmd_run(a: &RunArgs) -> Result<u8, Failure> {
    let p = load_program(&a.program)?;
    let mut inputs = ConcreteStore::new();
    for name in &p.inputs {
        let v = a
            .bindings
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Failure::Usage(format!("input `{name}` needs --bind {name}=0|1")))?;
        inputs.insert(name.clone(), CVal::Bit(v == 1));
    }
    let state = qsym::concrete::ConcreteTableau::zero_state(p.num_qubits);
    let mut chooser = RngChooser(ChaCha8Rng::seed_from_u64(a.seed));
    let run = concrete_run(&p, &inputs, state, &mut chooser, &mut HostResolver, &Externals::new())
        .map_err(|e| Failure::Other(anyhow!(e)))?;
    let store: serde_json::Map<String, Value> = run.store.iter().map(|(k, v)| (k.clone(), json!(v.as_u64()))).collect();
    let stabilizers: Vec<String> = run
        .state
        .canonical_stabilizers()
        .into_iter()
        .map(|(p, neg)| format!("{}{p}", if neg { '-' } else { '+' }))
        .collect();
    let v = json!({
        "measurements": run.measurements,
        "store": store,
        "stabilizers": stabilizers,
        "probability": run.probability(),
    });
    emit(&a.output, &serde_json::to_string_pretty(&v).map_err(anyhow::Error::from)?)?;
    Ok(0)
}

fn cmd_code(a: &CodeArgs) -> Result<u8, Failure> {
    let code = build_code(a)?;
    let mut v = code.to_json();
    if let Ok((state, _)) = initial_state(&code, BasisKind::Z) {
        v["initial_generators"] = json!(state.stabilizers().len());
    }
    emit(&a.output, &serde_json::to_string_pretty(&v).map_err(anyhow::Error::from)?)?;
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Verify(a) => cmd_verify(&a, false),
        Command::Findbug(a) => cmd_verify(&a, true),
        Command::Sample(a) => cmd_sample(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Code(a) => cmd_code(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Unavailable(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_UNAVAILABLE)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(70)
        }
    }
}
