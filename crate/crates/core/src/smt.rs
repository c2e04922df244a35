//! SMT-LIB 2 emission and an external solver driver.
//!
//! Each query runs in a fresh solver process fed over stdin. The solver
//! command comes from `QSE_SOLVER` (a command line such as `z3 -in`), else
//! `bitwuzla` if it is on `PATH`, else `z3 -in`.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::expr::{BoolExpr, BvExpr, Formula, Sort, Symbol, Valuation};

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("solver `{0}` could not be started: {1}")]
    SolverMissing(String, String),
    #[error("solver failed: {0}")]
    Crash(String),
    #[error("unparsable solver output: {0}")]
    Parse(String),
}

/// Outcome of a satisfiability query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverVerdict {
    Sat(Valuation),
    Unsat,
    Unknown(String),
}

/// A rendered query together with the symbols it declares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtScript {
    pub text: String,
    pub declarations: Vec<(Symbol, Sort)>,
}

/// Renders `assumptions ∧ goal` as a QF_BV script. Declarations follow first
/// use across the assumptions and then the goal.
pub fn emit_script(goal: &Formula, assumptions: &[Formula]) -> SmtScript {
    let mut seen = HashSet::new();
    let mut decls = Vec::new();
    for f in assumptions.iter().chain(std::iter::once(goal)) {
        f.visit_symbols(&mut |s, sort| {
            if seen.insert(s) {
                decls.push((s, sort));
            }
        });
    }
    let mut text = String::from("(set-logic QF_BV)\n(set-option :produce-models true)\n");
    for (s, sort) in &decls {
        text.push_str(&format!("(declare-fun {} () {})\n", s.name(), sort.to_smt()));
    }
    for f in assumptions.iter().chain(std::iter::once(goal)) {
        text.push_str(&format!("(assert {})\n", f.to_smt()));
    }
    text.push_str("(check-sat)\n");
    SmtScript { text, declarations: decls }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Option<Duration>,
}

impl SolverConfig {
    pub fn z3() -> Self {
        SolverConfig { program: "z3".into(), args: vec!["-in".into()], timeout: None }
    }

    pub fn bitwuzla() -> Self {
        SolverConfig { program: "bitwuzla".into(), args: vec![], timeout: None }
    }

    /// Parses a command line such as `"z3 -in"`.
    pub fn from_command(cmd: &str) -> Option<Self> {
        let mut parts = cmd.split_whitespace().map(String::from);
        let program = parts.next()?;
        Some(SolverConfig { program, args: parts.collect(), timeout: None })
    }

    /// Solver selected by the environment.
    pub fn from_env() -> Self {
        if let Some(c) = std::env::var("QSE_SOLVER").ok().and_then(|c| Self::from_command(&c)) {
            return c;
        }
        if which("bitwuzla").is_some() {
            Self::bitwuzla()
        } else {
            Self::z3()
        }
    }

    pub fn with_timeout(mut self, t: Option<Duration>) -> Self {
        self.timeout = t;
        self
    }

    /// Whether the solver binary can be found.
    pub fn available(&self) -> bool {
        if self.program.contains('/') {
            PathBuf::from(&self.program).is_file()
        } else {
            which(&self.program).is_some()
        }
    }

    pub fn command_line(&self) -> String {
        std::iter::once(self.program.as_str()).chain(self.args.iter().map(String::as_str)).collect::<Vec<_>>().join(" ")
    }
}

fn which(program: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).map(|d| d.join(program)).find(|p| p.is_file())
}

/// Runs `script` and decodes the verdict. On `sat` the model is requested for
/// every declared symbol.
pub fn check(script: &SmtScript, cfg: &SolverConfig) -> Result<SolverVerdict, SmtError> {
    let mut input = script.text.clone();
    if !script.declarations.is_empty() {
        input.push_str("(get-value (");
        for (i, (s, _)) in script.declarations.iter().enumerate() {
            if i > 0 {
                input.push(' ');
            }
            input.push_str(&s.name());
        }
        input.push_str("))\n");
    }
    input.push_str("(exit)\n");

    let mut child = Command::new(&cfg.program)
        .args(&cfg.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SmtError::SolverMissing(cfg.command_line(), e.to_string()))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(input.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let mut stderr = child.stderr.take().expect("piped stderr");
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });

    let start = Instant::now();
    let status = loop {
        if let Some(st) = child.try_wait().map_err(|e| SmtError::Crash(e.to_string()))? {
            break Some(st);
        }
        if cfg.timeout.is_some_and(|t| start.elapsed() >= t) {
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(1));
    };
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    let Some(status) = status else {
        return Ok(SolverVerdict::Unknown("timeout".into()));
    };
    parse_response(&out, script).map_err(|e| match e {
        SmtError::Parse(msg) if !status.success() => SmtError::Crash(format!("{msg}; exit {status}; stderr: {err}")),
        other => other,
    })
}

/// Emits and checks `assumptions ∧ goal`.
pub fn solve(goal: &Formula, assumptions: &[Formula], cfg: &SolverConfig) -> Result<SolverVerdict, SmtError> {
    if goal.as_const() == Some(false) || assumptions.iter().any(|a| a.as_const() == Some(false)) {
        return Ok(SolverVerdict::Unsat);
    }
    check(&emit_script(goal, assumptions), cfg)
}

fn parse_response(out: &str, script: &SmtScript) -> Result<SolverVerdict, SmtError> {
    let sexps = parse_sexps(out)?;
    let mut it = sexps.into_iter();
    let first = it.next().ok_or_else(|| SmtError::Parse(format!("empty output: {out:?}")))?;
    match first {
        Sexp::Atom(a) if a == "unsat" => Ok(SolverVerdict::Unsat),
        Sexp::Atom(a) if a == "unknown" => Ok(SolverVerdict::Unknown("solver returned unknown".into())),
        Sexp::Atom(a) if a == "sat" => {
            let mut v = Valuation::new();
            if script.declarations.is_empty() {
                return Ok(SolverVerdict::Sat(v));
            }
            let model = it.next().ok_or_else(|| SmtError::Parse(format!("missing model: {out:?}")))?;
            let Sexp::List(pairs) = model else {
                return Err(SmtError::Parse(format!("bad model: {out:?}")));
            };
            for p in pairs {
                let Sexp::List(kv) = p else { return Err(SmtError::Parse(format!("bad model entry in {out:?}"))) };
                let [Sexp::Atom(k), Sexp::Atom(val)] = kv.as_slice() else {
                    return Err(SmtError::Parse(format!("bad model entry in {out:?}")));
                };
                v.set(Symbol::new(k.trim_matches('|')), parse_value(val)?);
            }
            for (s, _) in &script.declarations {
                if !v.contains(*s) {
                    return Err(SmtError::Parse(format!("model misses {s}")));
                }
            }
            Ok(SolverVerdict::Sat(v))
        }
        other => Err(SmtError::Parse(format!("unexpected response {other:?} in {out:?}"))),
    }
}

fn parse_value(s: &str) -> Result<u64, SmtError> {
    let bad = || SmtError::Parse(format!("bad value {s}"));
    match s {
        "true" => Ok(1),
        "false" => Ok(0),
        _ if s.starts_with("#b") => u64::from_str_radix(&s[2..], 2).map_err(|_| bad()),
        _ if s.starts_with("#x") => u64::from_str_radix(&s[2..], 16).map_err(|_| bad()),
        _ => Err(bad()),
    }
}

/// S-expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

/// Parses a sequence of s-expressions.
pub fn parse_sexps(src: &str) -> Result<Vec<Sexp>, SmtError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = src.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let done = stack.pop().filter(|_| !stack.is_empty()).ok_or_else(|| SmtError::Parse("unbalanced `)`".into()))?;
                stack.last_mut().unwrap().push(Sexp::List(done));
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '"' => {
                let mut s = String::from('"');
                for c in chars.by_ref() {
                    s.push(c);
                    if c == '"' {
                        break;
                    }
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
            c if c.is_whitespace() => {}
            c => {
                let mut s = String::from(c);
                if c == '|' {
                    for c in chars.by_ref() {
                        s.push(c);
                        if c == '|' {
                            break;
                        }
                    }
                } else {
                    while let Some(&d) = chars.peek() {
                        if d.is_whitespace() || d == '(' || d == ')' {
                            break;
                        }
                        s.push(d);
                        chars.next();
                    }
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return Err(SmtError::Parse("unbalanced `(`".into()));
    }
    Ok(stack.pop().unwrap())
}

/// Reads back a formula in the form produced by [`Formula::to_smt`].
/// Bit-vector variables need their widths from `sorts`.
pub fn parse_formula(src: &str, sorts: &[(Symbol, Sort)]) -> Result<Formula, SmtError> {
    let mut all = parse_sexps(src)?;
    if all.len() != 1 {
        return Err(SmtError::Parse(format!("expected one term in {src:?}")));
    }
    formula_of(&all.pop().unwrap(), sorts)
}

fn formula_of(s: &Sexp, sorts: &[(Symbol, Sort)]) -> Result<Formula, SmtError> {
    if let Sexp::List(items) = s {
        if let [Sexp::Atom(op), args @ ..] = items.as_slice() {
            match op.as_str() {
                "bvule" | "=" if args.len() == 2 && is_bv(&args[0], sorts) => {
                    let (a, b) = (bv_of(&args[0], sorts)?, bv_of(&args[1], sorts)?);
                    return Ok(if op == "=" { Formula::BvEq(a, b) } else { Formula::BvLe(a, b) });
                }
                "and" | "or" | "not" if args.iter().any(|a| !is_pure_bool(a, sorts)) => {
                    let fs = args.iter().map(|a| formula_of(a, sorts)).collect::<Result<Vec<_>, _>>()?;
                    return Ok(match op.as_str() {
                        "and" => Formula::And(fs),
                        "or" => Formula::Or(fs),
                        _ => Formula::Not(Box::new(fs.into_iter().next().ok_or_else(|| SmtError::Parse("empty not".into()))?)),
                    });
                }
                _ => {}
            }
        }
    }
    Ok(Formula::Atom(bool_of(s)?))
}

fn is_bv(s: &Sexp, sorts: &[(Symbol, Sort)]) -> bool {
    match s {
        Sexp::Atom(a) => a.starts_with('#') || sort_of(a, sorts).is_some_and(|s| matches!(s, Sort::BitVec(_))),
        Sexp::List(items) => match items.first() {
            Some(Sexp::Atom(op)) => op == "bvadd" || op == "ite",
            Some(Sexp::List(_)) => true,
            None => false,
        },
    }
}

fn is_pure_bool(s: &Sexp, sorts: &[(Symbol, Sort)]) -> bool {
    match s {
        Sexp::Atom(_) => true,
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), args @ ..] => match op.as_str() {
                "and" | "or" | "not" | "xor" => args.iter().all(|a| is_pure_bool(a, sorts)),
                "=" | "bvule" => false,
                _ => true,
            },
            _ => false,
        },
    }
}

fn sort_of(name: &str, sorts: &[(Symbol, Sort)]) -> Option<Sort> {
    sorts.iter().find(|(s, _)| &*s.name() == name).map(|(_, t)| *t)
}

fn bool_of(s: &Sexp) -> Result<BoolExpr, SmtError> {
    match s {
        Sexp::Atom(a) => Ok(match a.as_str() {
            "true" => BoolExpr::Const(true),
            "false" => BoolExpr::Const(false),
            name => BoolExpr::var(name.trim_matches('|')),
        }),
        Sexp::List(items) => {
            let [Sexp::Atom(op), args @ ..] = items.as_slice() else {
                return Err(SmtError::Parse(format!("bad Boolean term {s:?}")));
            };
            let args = args.iter().map(bool_of).collect::<Result<Vec<_>, _>>()?;
            match op.as_str() {
                "not" if args.len() == 1 => Ok(BoolExpr::not(args.into_iter().next().unwrap())),
                "and" => Ok(BoolExpr::and_all(args)),
                "or" => Ok(BoolExpr::or_all(args)),
                "xor" => Ok(BoolExpr::xor_all(args)),
                "=" if args.len() == 2 => {
                    let mut it = args.into_iter();
                    Ok(BoolExpr::iff(it.next().unwrap(), it.next().unwrap()))
                }
                _ => Err(SmtError::Parse(format!("unsupported Boolean operator {op}"))),
            }
        }
    }
}

fn bv_of(s: &Sexp, sorts: &[(Symbol, Sort)]) -> Result<BvExpr, SmtError> {
    let bad = || SmtError::Parse(format!("bad bit-vector term {s:?}"));
    match s {
        Sexp::Atom(a) if a.starts_with("#b") => {
            let w = (a.len() - 2) as u32;
            BvExpr::constant(w, parse_value(a)?).map_err(|_| bad())
        }
        Sexp::Atom(a) => match sort_of(a, sorts) {
            Some(Sort::BitVec(w)) => BvExpr::var(Symbol::new(a), w).map_err(|_| bad()),
            _ => Err(bad()),
        },
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), c, Sexp::Atom(one), Sexp::Atom(zero)] if op == "ite" && one == "#b1" && zero == "#b0" => {
                Ok(BvExpr::FromBool(bool_of(c)?))
            }
            [Sexp::Atom(op), a, b] if op == "bvadd" => BvExpr::add(bv_of(a, sorts)?, bv_of(b, sorts)?).map_err(|_| bad()),
            [Sexp::List(head), inner] => match head.as_slice() {
                [Sexp::Atom(u), Sexp::Atom(z), Sexp::Atom(k)] if u == "_" && z == "zero_extend" => {
                    let k: u32 = k.parse().map_err(|_| bad())?;
                    let inner = bv_of(inner, sorts)?;
                    let w = inner.width();
                    inner.zero_extend(w + k).map_err(|_| bad())
                }
                _ => Err(bad()),
            },
            _ => Err(bad()),
        },
    }
}
