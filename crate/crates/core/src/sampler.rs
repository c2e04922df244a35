//! Measurement sampling from a single symbolic run.
//!
//! The outcome expressions of a branch-free program are compiled once into a
//! straight-line bit program; each batch of 64 shots then draws one random
//! word per coin-flip symbol and evaluates the program word-parallel.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::concrete::ConcreteTableau;
use crate::engine::{explore, EngineError, ExploreOptions, Externals};
use crate::expr::{BoolExpr, Symbol, Valuation};
use crate::pauli::Gate;
use crate::program::{Expr, Program, Stmt};
use crate::tableau::SymTableau;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("program has {0} paths; sampling needs exactly one")]
    Branching(usize),
    #[error("fixed symbol `{0}` is not bound")]
    Unbound(String),
    #[error("unsupported statement for lane simulation: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(bool),
    Not(u32),
    And(u32, u32),
    Or(u32, u32),
    Xor(u32, u32),
}

/// Compiled measurement sampler.
#[derive(Debug, Clone)]
pub struct Sampler {
    /// Classical variable of each measurement, in program order.
    pub names: Vec<String>,
    pub exprs: Vec<BoolExpr>,
    /// Coin-flip symbols, each uniform.
    pub random: Vec<Symbol>,
    /// Symbols the caller must bind.
    pub fixed: Vec<Symbol>,
    ops: Vec<Op>,
    outputs: Vec<u32>,
}

struct Compiler {
    slots: HashMap<Symbol, u32>,
    memo: HashMap<BoolExpr, u32>,
    ops: Vec<Op>,
    base: u32,
}

impl Compiler {
    fn push(&mut self, op: Op) -> u32 {
        self.ops.push(op);
        self.base + self.ops.len() as u32 - 1
    }

    fn compile(&mut self, e: &BoolExpr) -> u32 {
        if let BoolExpr::Var(s) = e {
            return self.slots[s];
        }
        if let Some(&slot) = self.memo.get(e) {
            return slot;
        }
        let slot = match e {
            BoolExpr::Const(b) => self.push(Op::Const(*b)),
            BoolExpr::Var(_) => unreachable!(),
            BoolExpr::Not(a) => {
                let a = self.compile(a);
                self.push(Op::Not(a))
            }
            BoolExpr::And(xs) => self.fold(xs, Op::And),
            BoolExpr::Or(xs) => self.fold(xs, Op::Or),
            BoolExpr::Xor(xs) => self.fold(xs, Op::Xor),
        };
        self.memo.insert(e.clone(), slot);
        slot
    }

    fn fold(&mut self, xs: &[BoolExpr], op: fn(u32, u32) -> Op) -> u32 {
        let mut acc = self.compile(&xs[0]);
        for x in &xs[1..] {
            let b = self.compile(x);
            acc = self.push(op(acc, b));
        }
        acc
    }
}

/// Runs `p` symbolically from `|0…0⟩` and compiles its measurement
/// expressions. Program inputs become fixed symbols.
pub fn compile_sampler(p: &Program) -> Result<Sampler, SamplerError> {
    let terminals = explore(p, SymTableau::zero_state(p.num_qubits), &Externals::new(), &ExploreOptions::default())?;
    if terminals.len() != 1 {
        return Err(SamplerError::Branching(terminals.len()));
    }
    let t = terminals.into_iter().next().expect("one terminal");
    let exprs: Vec<BoolExpr> = t.measurements.iter().map(|m| m.outcome.clone()).collect();
    let random = t.probs.clone();
    let mut all = std::collections::BTreeSet::new();
    for e in &exprs {
        e.collect_symbols(&mut all);
    }
    let fixed: Vec<Symbol> = all.into_iter().filter(|s| !random.contains(s)).collect();
    let slots: HashMap<Symbol, u32> = random.iter().chain(&fixed).enumerate().map(|(i, s)| (*s, i as u32)).collect();
    let mut c = Compiler { base: slots.len() as u32, slots, memo: HashMap::new(), ops: Vec::new() };
    let outputs = exprs.iter().map(|e| c.compile(e)).collect();
    Ok(Sampler {
        names: t.measurements.iter().map(|m| m.var.clone()).collect(),
        exprs,
        random,
        fixed,
        ops: c.ops,
        outputs,
    })
}

/// Shots × columns bit matrix, stored column-major in 64-shot words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMatrix {
    pub shots: usize,
    pub cols: usize,
    words: Vec<u64>,
}

impl SampleMatrix {
    fn new(shots: usize, cols: usize) -> Self {
        SampleMatrix { shots, cols, words: vec![0; cols * shots.div_ceil(64)] }
    }

    fn batches(&self) -> usize {
        self.shots.div_ceil(64)
    }

    pub fn get(&self, shot: usize, col: usize) -> bool {
        (self.words[col * self.batches() + shot / 64] >> (shot % 64)) & 1 == 1
    }

    /// Column `col` as 64-shot words; bits past `shots` are zero.
    pub fn column(&self, col: usize) -> &[u64] {
        let b = self.batches();
        &self.words[col * b..(col + 1) * b]
    }

    fn set_word(&mut self, col: usize, batch: usize, w: u64) {
        let b = self.batches();
        let valid = self.shots - batch * 64;
        let mask = if valid >= 64 { u64::MAX } else { (1u64 << valid) - 1 };
        self.words[col * b + batch] = w & mask;
    }

    pub fn ones(&self, col: usize) -> usize {
        self.column(col).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// One line of '0'/'1' characters per shot.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.shots * (self.cols + 1));
        for shot in 0..self.shots {
            for c in 0..self.cols {
                s.push(if self.get(shot, c) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<String> = (0..self.shots)
            .map(|shot| (0..self.cols).map(|c| if self.get(shot, c) { '1' } else { '0' }).collect())
            .collect();
        serde_json::json!({ "shots": self.shots, "columns": self.cols, "rows": rows })
    }
}

fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

/// Evaluates `f` on every batch index, split over `jobs` threads in order.
fn run_batches<T: Send>(batches: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let jobs = jobs.clamp(1, batches.max(1));
    if jobs == 1 {
        return (0..batches).map(f).collect();
    }
    let chunk = batches.div_ceil(jobs);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| scope.spawn(move || (j * chunk..((j + 1) * chunk).min(batches)).map(f).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sampler worker panicked")).collect()
    })
}

impl Sampler {
    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    fn eval_batch(&self, slots: &mut Vec<u64>, rng: &mut ChaCha8Rng, fixed: &[u64]) -> Vec<u64> {
        slots.clear();
        slots.extend(self.random.iter().map(|_| rng.next_u64()));
        slots.extend_from_slice(fixed);
        for op in &self.ops {
            let v = match *op {
                Op::Const(b) => if b { u64::MAX } else { 0 },
                Op::Not(a) => !slots[a as usize],
                Op::And(a, b) => slots[a as usize] & slots[b as usize],
                Op::Or(a, b) => slots[a as usize] | slots[b as usize],
                Op::Xor(a, b) => slots[a as usize] ^ slots[b as usize],
            };
            slots.push(v);
        }
        self.outputs.iter().map(|&o| slots[o as usize]).collect()
    }

    /// Draws `shots` samples; output depends only on `seed`, not on `jobs`.
    pub fn sample(&self, shots: usize, seed: u64, fixed: &Valuation, jobs: usize) -> Result<SampleMatrix, SamplerError> {
        let fixed_words: Vec<u64> = self
            .fixed
            .iter()
            .map(|s| {
                fixed.bit(*s).map(|b| if b { u64::MAX } else { 0 }).map_err(|_| SamplerError::Unbound(s.name().to_string()))
            })
            .collect::<Result<_, _>>()?;
        let mut out = SampleMatrix::new(shots, self.exprs.len());
        let batches = out.batches();
        let results = run_batches(batches, jobs, |b| {
            let mut slots = Vec::with_capacity(self.random.len() + self.fixed.len() + self.ops.len());
            self.eval_batch(&mut slots, &mut batch_rng(seed, b), &fixed_words)
        });
        for (b, words) in results.into_iter().enumerate() {
            for (c, w) in words.into_iter().enumerate() {
                out.set_word(c, b, w);
            }
        }
        Ok(out)
    }
}

/// The layered random circuit benchmark: `n` layers, each applying one of
/// H, S, I to every qubit, CNOTs on `min(10, ⌊n/2⌋)` disjoint random pairs
/// and measuring `⌈n/20⌉` random qubits; a final layer measures every qubit.
/// Measured qubits are not reset.
pub fn gen_layered_random_circuit(n: usize, seed: u64) -> Program {
    assert!(n >= 2, "layered circuits need at least two qubits");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut body = Vec::new();
    let mut meas = 0;
    let mut measure = |body: &mut Vec<Stmt>, q: usize| {
        meas += 1;
        body.push(Stmt::measure(q, format!("c_{meas}")));
    };
    let pairs = 10.min(n / 2);
    let per_layer = n.div_ceil(20);
    let mut qubits: Vec<usize> = (0..n).collect();
    for _ in 0..n {
        for q in 0..n {
            let g = [Gate::H, Gate::S, Gate::I][rng.gen_range(0..3)];
            body.push(Stmt::gate(g, &[q]));
        }
        qubits.shuffle(&mut rng);
        for pair in qubits[..2 * pairs].chunks(2) {
            body.push(Stmt::gate(Gate::Cnot, pair));
        }
        qubits.shuffle(&mut rng);
        for &q in &qubits[..per_layer] {
            measure(&mut body, q);
        }
    }
    for q in 0..n {
        measure(&mut body, q);
    }
    Program::new(n, body)
}

fn lane_guard(e: &Expr, store: &HashMap<&str, u64>) -> Result<u64, SamplerError> {
    Ok(match e {
        Expr::Const(c) => match c {
            0 => 0,
            1 => u64::MAX,
            _ => return Err(SamplerError::Unsupported(format!("constant {c} in a guard"))),
        },
        Expr::Var(v) => *store.get(v.as_str()).ok_or_else(|| SamplerError::Unbound(v.clone()))?,
        Expr::Not(a) => !lane_guard(a, store)?,
        Expr::And(a, b) => lane_guard(a, store)? & lane_guard(b, store)?,
        Expr::Or(a, b) => lane_guard(a, store)? | lane_guard(b, store)?,
        Expr::Xor(a, b) | Expr::Ne(a, b) => lane_guard(a, store)? ^ lane_guard(b, store)?,
        Expr::Eq(a, b) => !(lane_guard(a, store)? ^ lane_guard(b, store)?),
    })
}

fn lane_block<'a>(
    body: &'a [Stmt],
    t: &mut ConcreteTableau,
    store: &mut HashMap<&'a str, u64>,
    out: &mut Vec<u64>,
    rng: &mut ChaCha8Rng,
) -> Result<(), SamplerError> {
    for s in body {
        match s {
            Stmt::Unitary { gate, qubits } => t.apply(*gate, qubits).map_err(|e| EngineError::Tableau(e.into()))?,
            Stmt::SymPauli { pauli, guard, qubit } => {
                let mask = lane_guard(guard, store)?;
                t.apply_pauli_masked(pauli.gate(), *qubit, mask).map_err(|e| EngineError::Tableau(e.into()))?;
            }
            Stmt::Measure { qubit, var } => {
                let (v, _) = t.measure(*qubit, || rng.next_u64());
                store.insert(var, v);
                out.push(v);
            }
            Stmt::Seq(b) => lane_block(b, t, store, out, rng)?,
            other => {
                let text = Program::new(t.num_qubits(), vec![other.clone()]).to_text();
                return Err(SamplerError::Unsupported(text.lines().last().unwrap_or_default().trim().to_string()));
            }
        }
    }
    Ok(())
}

/// Concrete Monte-Carlo reference: re-simulates the program for every shot,
/// 64 shots per tableau pass. Supports branch-free programs whose inputs
/// are bound by `inputs`.
pub fn monte_carlo(
    p: &Program,
    shots: usize,
    seed: u64,
    inputs: &Valuation,
    jobs: usize,
) -> Result<SampleMatrix, SamplerError> {
    let input_words: Vec<(&str, u64)> = p
        .inputs
        .iter()
        .map(|n| {
            let b = inputs.bit(Symbol::new(n)).map_err(|_| SamplerError::Unbound(n.clone()))?;
            Ok((n.as_str(), if b { u64::MAX } else { 0 }))
        })
        .collect::<Result<_, SamplerError>>()?;
    let batches = shots.div_ceil(64);
    let results = run_batches(batches, jobs, |b| -> Result<Vec<u64>, SamplerError> {
        let mut rng = batch_rng(seed ^ 0x9e37_79b9_7f4a_7c15, b);
        let mut t = ConcreteTableau::zero_state(p.num_qubits);
        let mut store: HashMap<&str, u64> = input_words.iter().copied().collect();
        let mut out = Vec::new();
        lane_block(&p.body, &mut t, &mut store, &mut out, &mut rng)?;
        Ok(out)
    });
    let mut out: Option<SampleMatrix> = None;
    for (b, words) in results.into_iter().enumerate() {
        let words = words?;
        let m = out.get_or_insert_with(|| SampleMatrix::new(shots, words.len()));
        for (c, w) in words.into_iter().enumerate() {
            m.set_word(c, b, w);
        }
    }
    Ok(out.unwrap_or_else(|| SampleMatrix::new(shots, 0)))
}

/// Total-variation distance between the empirical distributions of the
/// columns `cols` in `a` and `b` (joint over those columns).
pub fn empirical_tv(a: &SampleMatrix, b: &SampleMatrix, cols: &[usize]) -> f64 {
    assert!(cols.len() <= 16, "joint distribution over too many columns");
    let hist = |m: &SampleMatrix| {
        let mut h = vec![0usize; 1 << cols.len()];
        for shot in 0..m.shots {
            let k = cols.iter().enumerate().fold(0, |k, (i, &c)| k | (usize::from(m.get(shot, c)) << i));
            h[k] += 1;
        }
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    let tv: f64 = ha
        .iter()
        .zip(&hb)
        .map(|(&x, &y)| (x as f64 / a.shots as f64 - y as f64 / b.shots as f64).abs())
        .sum();
    tv / 2.0
}

/// Comma-separated summary row for the benchmark CSV.
pub fn bench_row(n: usize, init_ms: f64, samples_per_sec: f64) -> String {
    let mut s = String::new();
    write!(s, "{n},{init_ms:.3},{samples_per_sec:.1}").expect("write to string");
    s
}
