//! Decoder verification on the two symbolic logical states and
//! counterexample replay.
//!
//! A decoder is correct on the whole code space iff it restores both
//! `⟨checks, (−1)^{s_j} Z̄_j⟩` and `⟨checks, (−1)^{s_j} X̄_j⟩` for every
//! admissible error pattern. Each terminal of the symbolic run yields one
//! query `pc ∧ budget ∧ ¬(final = initial)`; a model is a bug candidate and
//! is replayed concretely before it is reported.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use super::{inject_errors, CodeSpec, ErrorKind};
use crate::concrete::ConcreteTableau;
use crate::engine::{
    concrete_run, explore, CVal, ConcreteStore, EngineError, ExploreOptions, Externals, ScriptedChooser,
    ScriptedResolver, Terminal,
};
use crate::expr::{BoolExpr, Formula, Symbol, Valuation};
use crate::program::Program;
use crate::smt::{solve, SmtError, SolverConfig, SolverVerdict};
use crate::tableau::{SymTableau, TableauError};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error(transparent)]
    Tableau(#[from] TableauError),
}

/// Which logical operators carry the symbolic signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BasisKind {
    Z,
    X,
}

/// The symbolic initial state for `kind` and its logical sign symbols
/// (`s` for one logical qubit, else `s_1 … s_k`).
pub fn initial_state(code: &CodeSpec, kind: BasisKind) -> Result<(SymTableau, Vec<Symbol>), TableauError> {
    let syms: Vec<Symbol> = if code.k == 1 {
        vec![Symbol::new("s")]
    } else {
        (1..=code.k).map(|j| Symbol::new(&format!("s_{j}"))).collect()
    };
    let logicals = match kind {
        BasisKind::Z => &code.logical_z,
        BasisKind::X => &code.logical_x,
    };
    let mut gens: Vec<_> = code.independent_checks().into_iter().map(|c| (c, BoolExpr::Const(false))).collect();
    gens.extend(logicals.iter().zip(&syms).map(|(l, s)| (l.clone(), BoolExpr::Var(*s))));
    Ok((SymTableau::from_generators(&gens)?, syms))
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub solver: SolverConfig,
    pub fork_budget: usize,
    pub lift_pauli_conditionals: bool,
    pub bases: Vec<BasisKind>,
    /// Stop after symbolic execution; the verdict is then inconclusive.
    pub skip_smt: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            solver: SolverConfig::from_env(),
            fork_budget: 1 << 16,
            lift_pauli_conditionals: true,
            bases: vec![BasisKind::Z, BasisKind::X],
            skip_smt: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageTiming {
    pub init_ms: f64,
    pub qse_ms: f64,
    pub smt_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub initial: Vec<String>,
    #[serde(rename = "final")]
    pub final_state: Vec<String>,
    pub differs: bool,
    /// Why the model does not describe a real run, if it does not.
    pub spurious: Option<String>,
}

impl ReplayReport {
    pub fn confirms_bug(&self) -> bool {
        self.spurious.is_none() && self.differs
    }
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    pub basis: BasisKind,
    pub valuation: Valuation,
    pub path_condition: Formula,
    pub replay: ReplayReport,
}

impl Counterexample {
    /// Errors set to 1 in the model, by variable name.
    pub fn active_errors(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .valuation
            .0
            .iter()
            .filter(|(s, v)| **v == 1 && is_error_name(&s.name()))
            .map(|(s, _)| s.name().to_string())
            .collect();
        out.sort_by_key(|n| {
            let (p, i) = n.rsplit_once('_').unwrap_or((n, "0"));
            (p.to_string(), i.parse::<usize>().unwrap_or(0))
        });
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let val: BTreeMap<String, u64> = self.valuation.0.iter().map(|(s, v)| (s.name().to_string(), *v)).collect();
        serde_json::json!({
            "basis": self.basis,
            "valuation": val,
            "path_condition": self.path_condition.to_smt(),
            "initial": self.replay.initial,
            "final": self.replay.final_state,
            "differs": self.replay.differs,
        })
    }
}

fn is_error_name(n: &str) -> bool {
    let Some((p, i)) = n.rsplit_once('_') else { return false };
    (p == "e" || p == "ez") && i.parse::<usize>().is_ok()
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Verified,
    Bug(Box<Counterexample>),
    Inconclusive(String),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Verified => "verified",
            Verdict::Bug(_) => "bug",
            Verdict::Inconclusive(_) => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub timing: StageTiming,
    pub terminals: usize,
    pub queries: usize,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// The decoder with error injection prepended, and the budget constraints.
/// Budgets of 0 inject nothing.
pub fn with_errors(decoder: &Program, n: usize, nerr_x: usize, nerr_z: usize) -> (Program, Vec<Formula>) {
    let mut body = Vec::new();
    let mut inputs = decoder.inputs.clone();
    let mut constraints = Vec::new();
    for (kind, budget) in [(ErrorKind::X, nerr_x), (ErrorKind::Z, nerr_z)] {
        if budget == 0 {
            continue;
        }
        let (stmts, f, names) = inject_errors(n, kind, budget);
        body.extend(stmts);
        inputs.extend(names);
        constraints.push(f);
    }
    body.extend(decoder.body.iter().cloned());
    (Program { num_qubits: decoder.num_qubits, inputs, body }, constraints)
}

/// Checks `decoder` against up to `nerr_x` X errors and `nerr_z` Z errors.
pub fn verify_decoder(
    code: &CodeSpec,
    decoder: &Program,
    ext: &Externals,
    nerr_x: usize,
    nerr_z: usize,
    opts: &VerifyOptions,
) -> Result<VerifyReport, VerifyError> {
    let mut timing = StageTiming::default();
    let mut terminals_seen = 0;
    let mut queries = 0;
    let mut inconclusive = None;
    for &basis in &opts.bases {
        let t0 = Instant::now();
        let (init, _) = initial_state(code, basis)?;
        let (program, constraints) = with_errors(decoder, code.n, nerr_x, nerr_z);
        timing.init_ms += ms(t0.elapsed());

        let t1 = Instant::now();
        let eopts = ExploreOptions {
            fork_budget: opts.fork_budget,
            lift_pauli_conditionals: opts.lift_pauli_conditionals,
            prune: None,
        };
        let terminals = explore(&program, init.clone(), ext, &eopts)?;
        let goals: Vec<Formula> =
            terminals.iter().map(|t| t.state.equality_formula(&init).map(Formula::not)).collect::<Result<_, _>>()?;
        timing.qse_ms += ms(t1.elapsed());
        terminals_seen += terminals.len();
        if opts.skip_smt {
            inconclusive = Some("SMT stage skipped".to_string());
            continue;
        }

        let t2 = Instant::now();
        for (t, goal) in terminals.iter().zip(goals) {
            if goal.as_const() == Some(false) {
                continue;
            }
            let mut assumptions = vec![t.pc.clone()];
            assumptions.extend(constraints.iter().cloned());
            queries += 1;
            match solve(&goal, &assumptions, &opts.solver)? {
                SolverVerdict::Unsat => {}
                SolverVerdict::Unknown(r) => inconclusive = Some(format!("solver: {r}")),
                SolverVerdict::Sat(v) => {
                    let report = replay(code, decoder, ext, basis, (nerr_x, nerr_z), t, &v)?;
                    if report.confirms_bug() {
                        timing.smt_ms += ms(t2.elapsed());
                        let cx = Counterexample { basis, valuation: v, path_condition: t.pc.clone(), replay: report };
                        return Ok(VerifyReport {
                            verdict: Verdict::Bug(Box::new(cx)),
                            timing,
                            terminals: terminals_seen,
                            queries,
                        });
                    }
                    inconclusive = Some(format!(
                        "solver model failed replay: {}",
                        report.spurious.unwrap_or_else(|| "final state equals initial".into())
                    ));
                }
            }
        }
        timing.smt_ms += ms(t2.elapsed());
    }
    let verdict = match inconclusive {
        Some(r) => Verdict::Inconclusive(r),
        None => Verdict::Verified,
    };
    Ok(VerifyReport { verdict, timing, terminals: terminals_seen, queries })
}

/// Re-runs the decoder concretely under `v`: errors, logical signs, random
/// outcomes and external outputs are read from the model (unbound symbols
/// default to 0). Reports the initial and final canonical stabilizers.
pub fn replay(
    code: &CodeSpec,
    decoder: &Program,
    ext: &Externals,
    basis: BasisKind,
    (nerr_x, nerr_z): (usize, usize),
    terminal: &Terminal,
    v: &Valuation,
) -> Result<ReplayReport, VerifyError> {
    let (init, logical) = initial_state(code, basis)?;
    let (program, constraints) = with_errors(decoder, code.n, nerr_x, nerr_z);
    let mut full = v.clone();
    let mut bind_default = |s: Symbol| {
        if !full.contains(s) {
            full.set(s, 0);
        }
    };
    logical.iter().for_each(|s| bind_default(*s));
    program.inputs.iter().for_each(|n| bind_default(Symbol::new(n)));
    terminal.probs.iter().for_each(|s| bind_default(*s));
    terminal.ext_calls.iter().flat_map(|r| &r.outputs).for_each(|(s, _)| bind_default(*s));

    let initial = init.instantiate(&full)?;
    let show = |t: &ConcreteTableau| -> Vec<String> {
        t.canonical_stabilizers().into_iter().map(|(p, neg)| format!("{}{p}", if neg { '-' } else { '+' })).collect()
    };
    let mut report = ReplayReport { initial: show(&initial), final_state: vec![], differs: false, spurious: None };

    for c in &constraints {
        if !c.eval(&full).map_err(EngineError::from)? {
            report.spurious = Some(format!("error budget violated: {}", c.to_smt()));
            return Ok(report);
        }
    }
    if !terminal.pc.eval(&full).map_err(EngineError::from)? {
        report.spurious = Some("path condition does not hold".into());
        return Ok(report);
    }

    let inputs: ConcreteStore =
        program.inputs.iter().map(|n| (n.clone(), CVal::Bit(full.bit(Symbol::new(n)).unwrap_or(false)))).collect();
    let outcomes: Vec<bool> = terminal.probs.iter().map(|s| full.bit(*s).unwrap_or(false)).collect();
    let outputs: Vec<Vec<CVal>> = terminal
        .ext_calls
        .iter()
        .map(|r| {
            r.outputs
                .iter()
                .map(|(s, w)| {
                    let value = full.get(*s).unwrap_or(0);
                    if *w == 1 {
                        CVal::Bit(value == 1)
                    } else {
                        CVal::Word { value, width: *w }
                    }
                })
                .collect()
        })
        .collect();
    let run = concrete_run(
        &program,
        &inputs,
        initial.clone(),
        &mut ScriptedChooser::new(outcomes),
        &mut ScriptedResolver(outputs),
        ext,
    );
    let run = match run {
        Ok(r) => r,
        Err(e @ (EngineError::ConditionViolated { .. } | EngineError::ScriptExhausted(_))) => {
            report.spurious = Some(e.to_string());
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    report.final_state = show(&run.state);
    report.differs = !run.state.same_state(&initial);
    let symbolic_final = terminal.state.instantiate(&full)?;
    if !symbolic_final.same_state(&run.state) {
        report.spurious = Some("concrete run diverges from the symbolic path".into());
    }
    Ok(report)
}
