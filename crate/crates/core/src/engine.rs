//! Symbolic execution of programs over symbolic stabilizer states, plus the
//! concrete reference interpreter.
//!
//! A [`Config`] is one symbolic path: the remaining statements, the classical
//! store, the symbolic tableau, the random-outcome symbols drawn so far and
//! the path condition. [`step`] executes one statement; [`explore`] runs a
//! depth-first closure and returns the terminal configurations.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::concrete::ConcreteTableau;
use crate::expr::{BoolExpr, BvExpr, ExprError, Formula, FreshGen, Symbol, Valuation};
use crate::pauli::Gate;
use crate::program::{Expr, Program, Stmt};
use crate::tableau::{MeasKind, SymTableau, TableauError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown external function `{0}`")]
    UnknownExternal(String),
    #[error("external `{func}` expects {expected} {what}, got {got}")]
    ExternalArity { func: String, what: &'static str, expected: usize, got: usize },
    #[error("variable `{0}` is not bound")]
    Unbound(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("invalid gate: {0}")]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("fork budget of {budget} paths exceeded at branch `if ({site})`")]
    ForkBudget { budget: usize, site: String },
    #[error("external `{0}` has no concrete implementation")]
    MissingConcrete(String),
    #[error("external `{func}` call #{call}: outputs violate its condition")]
    ConditionViolated { func: String, call: usize },
    #[error("scripted input exhausted: {0}")]
    ScriptExhausted(&'static str),
}

type Result<T> = std::result::Result<T, EngineError>;

/// Symbolic value of a classical variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SymValue {
    Bit(BoolExpr),
    Word(BvExpr),
}

impl SymValue {
    pub fn as_bit(&self) -> Option<&BoolExpr> {
        match self {
            SymValue::Bit(b) => Some(b),
            SymValue::Word(_) => None,
        }
    }

    pub fn to_smt(&self) -> String {
        match self {
            SymValue::Bit(b) => b.to_smt(),
            SymValue::Word(w) => w.to_smt(),
        }
    }

    pub fn eval(&self, v: &Valuation) -> std::result::Result<CVal, ExprError> {
        Ok(match self {
            SymValue::Bit(b) => CVal::Bit(b.eval(v)?),
            SymValue::Word(w) => CVal::Word { value: w.eval(v)?, width: w.width() },
        })
    }

    fn from_concrete(c: &CVal) -> std::result::Result<SymValue, ExprError> {
        Ok(match *c {
            CVal::Bit(b) => SymValue::Bit(BoolExpr::Const(b)),
            CVal::Word { value, width } => SymValue::Word(BvExpr::constant(width, value)?),
        })
    }
}

impl fmt::Display for SymValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymValue::Bit(b) => write!(f, "{b}"),
            SymValue::Word(w) => write!(f, "{w}"),
        }
    }
}

/// Concrete value of a classical variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CVal {
    Bit(bool),
    Word { value: u64, width: u32 },
}

impl CVal {
    pub fn as_u64(self) -> u64 {
        match self {
            CVal::Bit(b) => b as u64,
            CVal::Word { value, .. } => value,
        }
    }
}

pub type Store = BTreeMap<String, SymValue>;
pub type ConcreteStore = BTreeMap<String, CVal>;

pub type ConditionFn = dyn Fn(&[SymValue], &[SymValue]) -> Formula + Send + Sync;
pub type ConcreteFn = dyn Fn(&[CVal]) -> Vec<CVal> + Send + Sync;

/// A host-registered external function: its arity, the widths of its
/// outputs (1 means a Boolean) and the condition `C_F(inputs, outputs)`
/// relating inputs to outputs.
#[derive(Clone)]
pub struct ExternalFn {
    pub name: String,
    pub inputs: usize,
    pub output_widths: Vec<u32>,
    pub condition: Arc<ConditionFn>,
    pub concrete: Option<Arc<ConcreteFn>>,
}

impl ExternalFn {
    pub fn new(
        name: impl Into<String>,
        inputs: usize,
        output_widths: Vec<u32>,
        condition: impl Fn(&[SymValue], &[SymValue]) -> Formula + Send + Sync + 'static,
    ) -> Self {
        ExternalFn { name: name.into(), inputs, output_widths, condition: Arc::new(condition), concrete: None }
    }

    pub fn with_concrete(mut self, f: impl Fn(&[CVal]) -> Vec<CVal> + Send + Sync + 'static) -> Self {
        self.concrete = Some(Arc::new(f));
        self
    }

    /// Evaluates the condition on concrete inputs and outputs.
    pub fn holds(&self, inputs: &[CVal], outputs: &[CVal]) -> Result<bool> {
        let i: Vec<SymValue> = inputs.iter().map(SymValue::from_concrete).collect::<std::result::Result<_, _>>()?;
        let o: Vec<SymValue> = outputs.iter().map(SymValue::from_concrete).collect::<std::result::Result<_, _>>()?;
        Ok((self.condition)(&i, &o).eval(&Valuation::new())?)
    }
}

impl fmt::Debug for ExternalFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalFn")
            .field("name", &self.name)
            .field("inputs", &self.inputs)
            .field("output_widths", &self.output_widths)
            .finish()
    }
}

/// Registry of external functions by name.
#[derive(Debug, Clone, Default)]
pub struct Externals(BTreeMap<String, ExternalFn>);

impl Externals {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, f: ExternalFn) {
        self.0.insert(f.name.clone(), f);
    }

    pub fn get(&self, name: &str) -> Result<&ExternalFn> {
        self.0.get(name).ok_or_else(|| EngineError::UnknownExternal(name.to_string()))
    }
}

/// One recorded measurement along a path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasRecord {
    pub var: String,
    pub qubit: usize,
    pub outcome: BoolExpr,
    pub kind: MeasKind,
}

/// One external call along a path, with the symbols standing for its outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtRecord {
    pub func: String,
    pub inputs: Vec<SymValue>,
    pub outputs: Vec<(Symbol, u32)>,
    pub condition: Formula,
}

/// A symbolic configuration.
#[derive(Debug, Clone)]
pub struct Config<'p> {
    cont: Vec<&'p [Stmt]>,
    pub store: Store,
    pub state: SymTableau,
    /// Symbols of random measurement outcomes, each uniform on {0, 1}.
    pub probs: Vec<Symbol>,
    pub pc: Vec<Formula>,
    pub measurements: Vec<MeasRecord>,
    pub ext_calls: Vec<ExtRecord>,
    pub fresh: FreshGen,
}

impl<'p> Config<'p> {
    /// Starts executing `body` from `state`. Every symbol occurring in the
    /// store or the state is reserved so fresh symbols never clash with it.
    pub fn new(body: &'p [Stmt], store: Store, state: SymTableau) -> Self {
        let mut fresh = FreshGen::new();
        for i in 0..state.num_qubits() {
            for s in state.stabilizer(i).1.symbols().into_iter().chain(state.destabilizer(i).1.symbols()) {
                fresh.reserve(s);
            }
        }
        for v in store.values() {
            match v {
                SymValue::Bit(b) => b.symbols().into_iter().for_each(|s| fresh.reserve(s)),
                SymValue::Word(w) => {
                    for (s, _) in Formula::BvEq(w.clone(), w.clone()).declarations() {
                        fresh.reserve(s);
                    }
                }
            }
        }
        Config {
            cont: vec![body],
            store,
            state,
            probs: Vec::new(),
            pc: Vec::new(),
            measurements: Vec::new(),
            ext_calls: Vec::new(),
            fresh,
        }
    }

    /// Binds each program input to a Boolean symbol of the same name.
    pub fn for_program(p: &'p Program, state: SymTableau) -> Self {
        let store = p.inputs.iter().map(|v| (v.clone(), SymValue::Bit(BoolExpr::var(v)))).collect();
        Config::new(&p.body, store, state)
    }

    pub fn reserve(&mut self, s: Symbol) {
        self.fresh.reserve(s);
    }

    pub fn is_terminal(&self) -> bool {
        self.cont.iter().all(|f| f.is_empty())
    }

    pub fn path_condition(&self) -> Formula {
        Formula::and_all(self.pc.iter().cloned())
    }

    fn into_terminal(self) -> Terminal {
        let pc = self.path_condition();
        Terminal {
            store: self.store,
            state: self.state,
            probs: self.probs,
            pc,
            measurements: self.measurements,
            ext_calls: self.ext_calls,
        }
    }
}

/// A finished path.
#[derive(Debug, Clone)]
pub struct Terminal {
    pub store: Store,
    pub state: SymTableau,
    pub probs: Vec<Symbol>,
    pub pc: Formula,
    pub measurements: Vec<MeasRecord>,
    pub ext_calls: Vec<ExtRecord>,
}

impl Terminal {
    /// `{pc, store, stabilizers, probs}` as JSON.
    pub fn to_json(&self) -> serde_json::Value {
        let store: BTreeMap<&String, String> = self.store.iter().map(|(k, v)| (k, v.to_smt())).collect();
        serde_json::json!({
            "pc": self.pc.to_smt(),
            "store": store,
            "stabilizers": self.state.stabilizer_rows_json(),
            "probs": self.probs.iter().map(|s| serde_json::json!({"symbol": s.name().to_string(), "p": 0.5})).collect::<Vec<_>>(),
        })
    }

    /// Probability of this path for any valuation satisfying its condition.
    pub fn probability(&self) -> f64 {
        0.5f64.powi(self.probs.len() as i32)
    }
}

/// Intermediate result of evaluating a classical expression.
enum SVal {
    Bit(BoolExpr),
    Word(BvExpr),
    Int(u64),
    Cond(Formula),
}

fn int_bit(v: u64) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(EngineError::Type(format!("integer {v} used as a bit"))),
    }
}

impl SVal {
    fn bit(self) -> Result<BoolExpr> {
        match self {
            SVal::Bit(b) => Ok(b),
            SVal::Int(v) => Ok(BoolExpr::Const(int_bit(v)?)),
            SVal::Cond(Formula::Atom(b)) => Ok(b),
            SVal::Cond(f) => Err(EngineError::Type(format!("word comparison `{f}` where a bit is needed"))),
            SVal::Word(w) => Err(EngineError::Type(format!("word `{w}` where a bit is needed"))),
        }
    }

    fn formula(self) -> Result<Formula> {
        match self {
            SVal::Cond(f) => Ok(f),
            other => Ok(Formula::atom(other.bit()?)),
        }
    }

    fn is_bitlike(&self) -> bool {
        matches!(self, SVal::Bit(_) | SVal::Int(_) | SVal::Cond(Formula::Atom(_)))
    }
}

fn eval_sym(e: &Expr, store: &Store) -> Result<SVal> {
    Ok(match e {
        Expr::Const(c) => SVal::Int(*c),
        Expr::Var(v) => match store.get(v) {
            Some(SymValue::Bit(b)) => SVal::Bit(b.clone()),
            Some(SymValue::Word(w)) => SVal::Word(w.clone()),
            None => return Err(EngineError::Unbound(v.clone())),
        },
        Expr::Not(a) => match eval_sym(a, store)? {
            SVal::Cond(f) => SVal::Cond(Formula::not(f)),
            other => SVal::Bit(BoolExpr::not(other.bit()?)),
        },
        Expr::And(a, b) | Expr::Or(a, b) => {
            let (x, y) = (eval_sym(a, store)?, eval_sym(b, store)?);
            let is_and = matches!(e, Expr::And(..));
            if x.is_bitlike() && y.is_bitlike() {
                let (x, y) = (x.bit()?, y.bit()?);
                SVal::Bit(if is_and { BoolExpr::and(x, y) } else { BoolExpr::or(x, y) })
            } else {
                let fs = [x.formula()?, y.formula()?];
                SVal::Cond(if is_and { Formula::and_all(fs) } else { Formula::or_all(fs) })
            }
        }
        Expr::Xor(a, b) => SVal::Bit(BoolExpr::xor(eval_sym(a, store)?.bit()?, eval_sym(b, store)?.bit()?)),
        Expr::Eq(a, b) | Expr::Ne(a, b) => {
            let (x, y) = (eval_sym(a, store)?, eval_sym(b, store)?);
            let eq = matches!(e, Expr::Eq(..));
            match (x, y) {
                (SVal::Word(w), other) | (other, SVal::Word(w)) => {
                    let rhs = match other {
                        SVal::Word(v) => v,
                        SVal::Int(c) => BvExpr::constant(w.width(), c)?,
                        _ => return Err(EngineError::Type("comparing a word with a bit".into())),
                    };
                    if rhs.width() != w.width() {
                        return Err(ExprError::WidthMismatch(w.width(), rhs.width()).into());
                    }
                    let f = Formula::BvEq(w, rhs);
                    SVal::Cond(if eq { f } else { Formula::not(f) })
                }
                (SVal::Int(p), SVal::Int(q)) => SVal::Bit(BoolExpr::Const((p == q) == eq)),
                (x, y) => {
                    let d = BoolExpr::xor(x.bit()?, y.bit()?);
                    SVal::Bit(if eq { BoolExpr::not(d) } else { d })
                }
            }
        }
    })
}

/// Evaluates `e` to a Boolean expression (guards, assignments).
pub fn eval_bit(e: &Expr, store: &Store) -> Result<BoolExpr> {
    eval_sym(e, store)?.bit()
}

/// Evaluates a branch condition.
pub fn eval_condition(e: &Expr, store: &Store) -> Result<Formula> {
    eval_sym(e, store)?.formula()
}

/// Executes the next statement of `c`. Returns one successor, or two for
/// `if` (then-branch first).
pub fn step<'p>(mut c: Config<'p>, ext: &Externals) -> Result<Vec<Config<'p>>> {
    let s = loop {
        let Some(top) = c.cont.last_mut() else { return Ok(vec![c]) };
        match top.split_first() {
            Some((s, rest)) => {
                *top = rest;
                break s;
            }
            None => {
                c.cont.pop();
            }
        }
    };
    match s {
        Stmt::Assign { var, expr } => {
            let v = match eval_sym(expr, &c.store)? {
                SVal::Word(w) => SymValue::Word(w),
                other => SymValue::Bit(other.bit()?),
            };
            c.store.insert(var.clone(), v);
        }
        Stmt::ExtCall { outs, func, args } => {
            let f = ext.get(func)?;
            if args.len() != f.inputs {
                return Err(EngineError::ExternalArity {
                    func: func.clone(),
                    what: "inputs",
                    expected: f.inputs,
                    got: args.len(),
                });
            }
            if outs.len() != f.output_widths.len() {
                return Err(EngineError::ExternalArity {
                    func: func.clone(),
                    what: "outputs",
                    expected: f.output_widths.len(),
                    got: outs.len(),
                });
            }
            let inputs: Vec<SymValue> = args
                .iter()
                .map(|a| c.store.get(a).cloned().ok_or_else(|| EngineError::Unbound(a.clone())))
                .collect::<Result<_>>()?;
            let mut out_syms = Vec::with_capacity(outs.len());
            let mut out_vals = Vec::with_capacity(outs.len());
            for (o, &w) in outs.iter().zip(&f.output_widths) {
                let sym = c.fresh.fresh(o);
                let v = if w == 1 { SymValue::Bit(BoolExpr::Var(sym)) } else { SymValue::Word(BvExpr::var(sym, w)?) };
                out_syms.push((sym, w));
                out_vals.push(v.clone());
                c.store.insert(o.clone(), v);
            }
            let cond = (f.condition)(&inputs, &out_vals);
            c.pc.push(cond.clone());
            c.ext_calls.push(ExtRecord { func: func.clone(), inputs, outputs: out_syms, condition: cond });
        }
        Stmt::Unitary { gate, qubits } => c.state.apply_clifford(*gate, qubits)?,
        Stmt::SymPauli { pauli, guard, qubit } => {
            let g = eval_bit(guard, &c.store)?;
            c.state.apply_sym_pauli(*pauli, &g, *qubit)?;
        }
        Stmt::Measure { qubit, var } => {
            if *qubit >= c.state.num_qubits() {
                return Err(TableauError::Pauli(crate::pauli::PauliError::TargetOutOfRange {
                    qubit: *qubit,
                    n: c.state.num_qubits(),
                })
                .into());
            }
            let r = c.state.measure(*qubit, &mut c.fresh);
            if r.kind == MeasKind::Random {
                if let BoolExpr::Var(s) = &r.outcome {
                    c.probs.push(*s);
                }
            }
            c.store.insert(var.clone(), SymValue::Bit(r.outcome.clone()));
            c.measurements.push(MeasRecord { var: var.clone(), qubit: *qubit, outcome: r.outcome, kind: r.kind });
        }
        Stmt::Seq(b) => c.cont.push(b),
        Stmt::If { cond, then_branch, else_branch } => {
            let f = eval_condition(cond, &c.store)?;
            let mut t = c.clone();
            t.pc.push(f.clone());
            t.cont.push(then_branch);
            c.pc.push(Formula::not(f));
            c.cont.push(else_branch);
            return Ok(vec![t, c]);
        }
    }
    Ok(vec![c])
}

/// Feasibility oracle for path pruning: `Some(false)` means the formula is
/// unsatisfiable.
pub type Feasibility<'a> = &'a dyn Fn(&Formula) -> Option<bool>;

#[derive(Clone, Copy)]
pub struct ExploreOptions<'a> {
    /// Maximum number of paths (initial path plus forks).
    pub fork_budget: usize,
    /// Rewrite single-Pauli conditionals into guarded Paulis before running.
    pub lift_pauli_conditionals: bool,
    /// Optional solver check run on each fork.
    pub prune: Option<Feasibility<'a>>,
}

impl Default for ExploreOptions<'_> {
    fn default() -> Self {
        ExploreOptions { fork_budget: 1 << 16, lift_pauli_conditionals: true, prune: None }
    }
}

/// Depth-first exploration of all paths from `init`. Paths whose newest
/// path-condition conjunct is syntactically false are dropped.
pub fn explore_from(init: Config<'_>, ext: &Externals, opts: &ExploreOptions) -> Result<Vec<Terminal>> {
    let mut stack = vec![init];
    let mut paths = 1usize;
    let mut out = Vec::new();
    while let Some(c) = stack.pop() {
        if c.is_terminal() {
            out.push(c.into_terminal());
            continue;
        }
        let site = next_branch_site(&c);
        let mut succ = step(c, ext)?;
        if succ.len() == 2 {
            succ.retain(|s| s.pc.last().and_then(Formula::as_const) != Some(false));
            if let Some(check) = opts.prune {
                succ.retain(|s| check(&s.path_condition()) != Some(false));
            }
            if succ.len() == 2 {
                paths += 1;
                if paths > opts.fork_budget {
                    return Err(EngineError::ForkBudget { budget: opts.fork_budget, site: site.unwrap_or_default() });
                }
            }
        }
        // push else first so the then-branch is explored first
        stack.extend(succ.into_iter().rev());
    }
    Ok(out)
}

fn next_branch_site(c: &Config<'_>) -> Option<String> {
    let s = c.cont.iter().rev().find_map(|f| f.first())?;
    match s {
        Stmt::If { cond, .. } => Some(cond.to_string()),
        _ => None,
    }
}

/// Explores `p` from `state`, binding the program inputs to same-named
/// symbols.
pub fn explore(p: &Program, state: SymTableau, ext: &Externals, opts: &ExploreOptions) -> Result<Vec<Terminal>> {
    if opts.lift_pauli_conditionals {
        let lifted = p.lift_pauli_conditionals();
        explore_from(Config::for_program(&lifted, state), ext, opts)
    } else {
        explore_from(Config::for_program(p, state), ext, opts)
    }
}

/// Source of random measurement outcomes for concrete runs.
pub trait Chooser {
    fn choose(&mut self, qubit: usize) -> Result<bool>;
}

/// Draws outcomes from an RNG.
pub struct RngChooser<R>(pub R);

impl<R: rand::Rng> Chooser for RngChooser<R> {
    fn choose(&mut self, _qubit: usize) -> Result<bool> {
        Ok(self.0.gen())
    }
}

/// Replays a fixed sequence of outcomes.
pub struct ScriptedChooser {
    outcomes: std::vec::IntoIter<bool>,
}

impl ScriptedChooser {
    pub fn new(outcomes: Vec<bool>) -> Self {
        ScriptedChooser { outcomes: outcomes.into_iter() }
    }
}

impl Chooser for ScriptedChooser {
    fn choose(&mut self, _qubit: usize) -> Result<bool> {
        self.outcomes.next().ok_or(EngineError::ScriptExhausted("measurement outcomes"))
    }
}

/// Answers external calls during concrete runs.
pub trait Resolver {
    fn call(&mut self, f: &ExternalFn, inputs: &[CVal], index: usize) -> Result<Vec<CVal>>;
}

/// Uses the host implementations registered with each external.
pub struct HostResolver;

impl Resolver for HostResolver {
    fn call(&mut self, f: &ExternalFn, inputs: &[CVal], _index: usize) -> Result<Vec<CVal>> {
        let imp = f.concrete.as_ref().ok_or_else(|| EngineError::MissingConcrete(f.name.clone()))?;
        Ok(imp(inputs))
    }
}

/// Replays recorded outputs call by call.
pub struct ScriptedResolver(pub Vec<Vec<CVal>>);

impl Resolver for ScriptedResolver {
    fn call(&mut self, _f: &ExternalFn, _inputs: &[CVal], index: usize) -> Result<Vec<CVal>> {
        self.0.get(index).cloned().ok_or(EngineError::ScriptExhausted("external outputs"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConcreteMeas {
    pub var: String,
    pub qubit: usize,
    pub value: bool,
    pub random: bool,
}

#[derive(Debug, Clone)]
pub struct ConcreteRun {
    pub store: ConcreteStore,
    pub state: ConcreteTableau,
    pub measurements: Vec<ConcreteMeas>,
    /// Number of random measurements; the path probability is `2^-k`.
    pub random_count: usize,
    pub ext_calls: Vec<(String, Vec<CVal>, Vec<CVal>)>,
}

impl ConcreteRun {
    pub fn probability(&self) -> f64 {
        0.5f64.powi(self.random_count as i32)
    }
}

fn eval_concrete(e: &Expr, store: &ConcreteStore) -> Result<CVal> {
    let bit = |v: CVal| -> Result<bool> {
        match v {
            CVal::Bit(b) => Ok(b),
            CVal::Word { value, width: 0 } => int_bit(value),
            CVal::Word { .. } => Err(EngineError::Type("word where a bit is needed".into())),
        }
    };
    // integer literals are carried as zero-width words until compared
    Ok(match e {
        Expr::Const(c) => CVal::Word { value: *c, width: 0 },
        Expr::Var(v) => *store.get(v).ok_or_else(|| EngineError::Unbound(v.clone()))?,
        Expr::Not(a) => CVal::Bit(!bit(eval_concrete(a, store)?)?),
        Expr::And(a, b) => CVal::Bit(bit(eval_concrete(a, store)?)? & bit(eval_concrete(b, store)?)?),
        Expr::Or(a, b) => CVal::Bit(bit(eval_concrete(a, store)?)? | bit(eval_concrete(b, store)?)?),
        Expr::Xor(a, b) => CVal::Bit(bit(eval_concrete(a, store)?)? ^ bit(eval_concrete(b, store)?)?),
        Expr::Eq(a, b) | Expr::Ne(a, b) => {
            let (x, y) = (eval_concrete(a, store)?, eval_concrete(b, store)?);
            let same = match (x, y) {
                (CVal::Word { value: p, width: wp }, CVal::Word { value: q, width: wq }) => {
                    if wp != 0 && wq != 0 && wp != wq {
                        return Err(ExprError::WidthMismatch(wp, wq).into());
                    }
                    p == q
                }
                (x, y) => bit(x)? == bit(y)?,
            };
            CVal::Bit(same == matches!(e, Expr::Eq(..)))
        }
    })
}

/// Runs `p` concretely from `state` with inputs bound by `inputs`.
pub fn concrete_run(
    p: &Program,
    inputs: &ConcreteStore,
    state: ConcreteTableau,
    chooser: &mut dyn Chooser,
    resolver: &mut dyn Resolver,
    ext: &Externals,
) -> Result<ConcreteRun> {
    let mut run = ConcreteRun {
        store: inputs.clone(),
        state,
        measurements: Vec::new(),
        random_count: 0,
        ext_calls: Vec::new(),
    };
    exec_block(&p.body, &mut run, chooser, resolver, ext)?;
    Ok(run)
}

fn exec_block(
    b: &[Stmt],
    run: &mut ConcreteRun,
    chooser: &mut dyn Chooser,
    resolver: &mut dyn Resolver,
    ext: &Externals,
) -> Result<()> {
    for s in b {
        exec_stmt(s, run, chooser, resolver, ext)?;
    }
    Ok(())
}

fn exec_stmt(
    s: &Stmt,
    run: &mut ConcreteRun,
    chooser: &mut dyn Chooser,
    resolver: &mut dyn Resolver,
    ext: &Externals,
) -> Result<()> {
    let as_bit = |v: CVal| match v {
        CVal::Word { value, width: 0 } => int_bit(value),
        CVal::Bit(b) => Ok(b),
        CVal::Word { .. } => Err(EngineError::Type("word where a bit is needed".into())),
    };
    match s {
        Stmt::Assign { var, expr } => {
            let v = match eval_concrete(expr, &run.store)? {
                w @ CVal::Word { width, .. } if width > 0 => w,
                other => CVal::Bit(as_bit(other)?),
            };
            run.store.insert(var.clone(), v);
        }
        Stmt::ExtCall { outs, func, args } => {
            let f = ext.get(func)?;
            if args.len() != f.inputs || outs.len() != f.output_widths.len() {
                return Err(EngineError::ExternalArity {
                    func: func.clone(),
                    what: "arguments",
                    expected: f.inputs,
                    got: args.len(),
                });
            }
            let inputs: Vec<CVal> = args
                .iter()
                .map(|a| run.store.get(a).copied().ok_or_else(|| EngineError::Unbound(a.clone())))
                .collect::<Result<_>>()?;
            let index = run.ext_calls.len();
            let outputs = resolver.call(f, &inputs, index)?;
            if outputs.len() != outs.len() || !f.holds(&inputs, &outputs)? {
                return Err(EngineError::ConditionViolated { func: func.clone(), call: index });
            }
            for (o, v) in outs.iter().zip(&outputs) {
                run.store.insert(o.clone(), *v);
            }
            run.ext_calls.push((func.clone(), inputs, outputs));
        }
        Stmt::Unitary { gate, qubits } => run.state.apply(*gate, qubits).map_err(TableauError::from)?,
        Stmt::SymPauli { pauli, guard, qubit } => {
            if as_bit(eval_concrete(guard, &run.store)?)? {
                run.state.apply(pauli.gate(), &[*qubit]).map_err(TableauError::from)?;
            } else {
                Gate::I.check_targets(&[*qubit], run.state.num_qubits()).map_err(TableauError::from)?;
            }
        }
        Stmt::Measure { qubit, var } => {
            Gate::I.check_targets(&[*qubit], run.state.num_qubits()).map_err(TableauError::from)?;
            let mut drawn = None;
            let (value, random) = run.state.measure_bit(*qubit, || {
                let b = chooser.choose(*qubit);
                let v = *b.as_ref().unwrap_or(&false);
                drawn = Some(b);
                v
            });
            if let Some(b) = drawn {
                b?;
            }
            if random {
                run.random_count += 1;
            }
            run.store.insert(var.clone(), CVal::Bit(value));
            run.measurements.push(ConcreteMeas { var: var.clone(), qubit: *qubit, value, random });
        }
        Stmt::Seq(b) => exec_block(b, run, chooser, resolver, ext)?,
        Stmt::If { cond, then_branch, else_branch } => {
            if as_bit(eval_concrete(cond, &run.store)?)? {
                exec_block(then_branch, run, chooser, resolver, ext)?;
            } else {
                exec_block(else_branch, run, chooser, resolver, ext)?;
            }
        }
    }
    Ok(())
}

/// The valuation that makes terminal `t` describe the concrete run `r`:
/// inputs, random outcomes in order and external outputs in order.
pub fn path_valuation(t: &Terminal, inputs: &ConcreteStore, r: &ConcreteRun) -> Valuation {
    let mut v = Valuation::new();
    for (name, val) in inputs {
        v.set(Symbol::new(name), val.as_u64());
    }
    let random: Vec<bool> = r.measurements.iter().filter(|m| m.random).map(|m| m.value).collect();
    for (s, b) in t.probs.iter().zip(random) {
        v.set_bit(*s, b);
    }
    for (rec, (_, _, outs)) in t.ext_calls.iter().zip(&r.ext_calls) {
        for ((s, _), o) in rec.outputs.iter().zip(outs) {
            v.set(*s, o.as_u64());
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{Pauli, PauliString};
    use crate::program::parse;

    #[test]
    fn measuring_plus_adds_probability_entry() {
        let p = parse("qubits 1; H q1; measure q1 -> c;").unwrap();
        let ts = explore(&p, SymTableau::zero_state(1), &Externals::new(), &Default::default()).unwrap();
        assert_eq!(ts.len(), 1);
        let t = &ts[0];
        assert_eq!(t.probs.len(), 1);
        assert_eq!(t.store["c"], SymValue::Bit(BoolExpr::Var(t.probs[0])));
        assert_eq!(t.probability(), 0.5);
    }

    #[test]
    fn if_forks_with_complementary_conditions() {
        let p = parse("qubits 1; input a; if (a == 1) { H q1; } else { S q1; }").unwrap();
        let c = Config::for_program(&p, SymTableau::zero_state(1));
        let succ = step(c, &Externals::new()).unwrap();
        assert_eq!(succ.len(), 2);
        let a = BoolExpr::var("a");
        assert_eq!(succ[0].pc, vec![Formula::atom(a.clone())]);
        assert_eq!(succ[1].pc, vec![Formula::atom(BoolExpr::not(a))]);
    }

    #[test]
    fn guarded_pauli_does_not_fork() {
        let p = parse("qubits 1; input a, b; X[a == 1 & b == 0] q1;").unwrap();
        let c = Config::for_program(&p, SymTableau::zero_state(1));
        let succ = step(c, &Externals::new()).unwrap();
        assert_eq!(succ.len(), 1);
        assert!(succ[0].pc.is_empty());
        let (z, ph) = succ[0].state.stabilizer(0);
        assert_eq!(z, PauliString::single(1, 0, Pauli::Z));
        assert_eq!(ph, BoolExpr::and(BoolExpr::var("a"), BoolExpr::not(BoolExpr::var("b"))));
    }

    #[test]
    fn constant_branch_is_not_forked() {
        let p = parse("qubits 1; x := 1; if (x == 1) { X q1; } measure q1 -> m;").unwrap();
        let ts = explore(&p, SymTableau::zero_state(1), &Externals::new(), &Default::default()).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].store["m"], SymValue::Bit(BoolExpr::Const(true)));
    }

    #[test]
    fn fork_budget_is_enforced() {
        let src = "qubits 1; input a, b, c; if (a) { H q1; } if (b) { H q1; } if (c) { H q1; }";
        let p = parse(src).unwrap();
        let opts = ExploreOptions { fork_budget: 4, ..Default::default() };
        let err = explore(&p, SymTableau::zero_state(1), &Externals::new(), &opts).unwrap_err();
        assert!(matches!(err, EngineError::ForkBudget { budget: 4, ref site } if site == "c"), "{err}");
    }

    #[test]
    fn external_outputs_are_fresh_and_constrained() {
        let mut ext = Externals::new();
        ext.register(
            ExternalFn::new("copy", 1, vec![1], |i, o| {
                Formula::atom(BoolExpr::iff(i[0].as_bit().unwrap().clone(), o[0].as_bit().unwrap().clone()))
            })
            .with_concrete(|i| vec![i[0]]),
        );
        let p = parse("qubits 1; input a; r := copy(a); X[r] q1; measure q1 -> m;").unwrap();
        let ts = explore(&p, SymTableau::zero_state(1), &ext, &Default::default()).unwrap();
        assert_eq!(ts[0].ext_calls.len(), 1);
        assert_eq!(ts[0].ext_calls[0].outputs[0].0.name().as_ref(), "r_0");
        let inputs = ConcreteStore::from([("a".to_string(), CVal::Bit(true))]);
        let run = concrete_run(
            &p,
            &inputs,
            ConcreteTableau::zero_state(1),
            &mut ScriptedChooser::new(vec![]),
            &mut HostResolver,
            &ext,
        )
        .unwrap();
        assert_eq!(run.store["m"], CVal::Bit(true));
        let bad = concrete_run(
            &p,
            &inputs,
            ConcreteTableau::zero_state(1),
            &mut ScriptedChooser::new(vec![]),
            &mut ScriptedResolver(vec![vec![CVal::Bit(false)]]),
            &ext,
        );
        assert!(matches!(bad, Err(EngineError::ConditionViolated { call: 0, .. })));
        let missing = parse("qubits 1; input a; r := nope(a);").unwrap();
        assert!(matches!(
            explore(&missing, SymTableau::zero_state(1), &ext, &Default::default()),
            Err(EngineError::UnknownExternal(_))
        ));
    }

    #[test]
    fn concrete_probabilities() {
        let p = parse("qubits 2; H q1; measure q1 -> a; measure q2 -> b; x := 1; if (x == 1) { X q2; }").unwrap();
        let mut ch = ScriptedChooser::new(vec![true]);
        let r = concrete_run(&p, &ConcreteStore::new(), ConcreteTableau::zero_state(2), &mut ch, &mut HostResolver, &Externals::new())
            .unwrap();
        assert_eq!(r.probability(), 0.5);
        assert_eq!(r.store["a"], CVal::Bit(true));
        assert_eq!(r.store["b"], CVal::Bit(false));
        assert!(!r.measurements[1].random);
        let (z2, neg) = r.state.stabilizer(1);
        assert_eq!((z2.get(1), neg), (Pauli::Z, true));
    }
}
