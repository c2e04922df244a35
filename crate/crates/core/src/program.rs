//! Quantum programs: AST, text syntax, pretty-printer and validation.
//!
//! Concrete syntax, one statement per `;`:
//!
//! ```text
//! qubits 3;
//! input e_1, e_2, e_3;            // classical inputs bound by the caller
//! for i in 1..4 { X[e_i == 1] q_i; }
//! CNOT q1, q2; measure q2 -> m1; CNOT q1, q2;
//! r_1, r_2 := decode(m1, m2);    // external call
//! x := m1 ^ r_1;
//! if (m1 == 1 & m2 == 0) { X q1; } else { Z q2; }
//! ```
//!
//! Qubits are written `q1`, `q_1` or `q[1]` and numbered from 1 in the text;
//! the AST uses 0-based indices. `for` loops have constant bounds (integers
//! or arithmetic over enclosing loop variables) and are unrolled while
//! parsing. Inside a loop, an identifier segment equal to the loop variable is
//! replaced by its value (`e_i`), and `_{expr}` splices computed indices
//! (`q_{i+1}`).
//!
//! Operator precedence, loosest first: `|`, `^`, `&`, `==`/`!=`, `*`, `!`.
//! `*` is conjunction, so `r_1*r_2 == 1` reads as `(r_1 & r_2) == 1`.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::pauli::{Gate, Pauli};

/// Classical expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(u64),
    Var(String),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
    Eq(Box<Expr>, Box<Expr>),
    Ne(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    /// `name == 1`.
    pub fn is_one(name: impl Into<String>) -> Expr {
        Expr::Eq(Box::new(Expr::var(name)), Box::new(Expr::Const(1)))
    }

    /// Conjunction of all items; `1` when empty.
    pub fn all(items: impl IntoIterator<Item = Expr>) -> Expr {
        let mut it = items.into_iter();
        let Some(first) = it.next() else { return Expr::Const(1) };
        it.fold(first, |acc, e| Expr::And(Box::new(acc), Box::new(e)))
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Not(e) => e.vars(out),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Xor(a, b) | Expr::Eq(a, b) | Expr::Ne(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Not(e) => write!(f, "!{}", Paren(e)),
            Expr::And(a, b) => write!(f, "{} & {}", Paren(a), Paren(b)),
            Expr::Or(a, b) => write!(f, "{} | {}", Paren(a), Paren(b)),
            Expr::Xor(a, b) => write!(f, "{} ^ {}", Paren(a), Paren(b)),
            Expr::Eq(a, b) => write!(f, "{} == {}", Paren(a), Paren(b)),
            Expr::Ne(a, b) => write!(f, "{} != {}", Paren(a), Paren(b)),
        }
    }
}

struct Paren<'a>(&'a Expr);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Const(_) | Expr::Var(_) => write!(f, "{}", self.0),
            e => write!(f, "({e})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign { var: String, expr: Expr },
    ExtCall { outs: Vec<String>, func: String, args: Vec<String> },
    Unitary { gate: Gate, qubits: Vec<usize> },
    /// `tau[guard] q`: apply `tau` when `guard` holds, without branching.
    SymPauli { pauli: Pauli, guard: Expr, qubit: usize },
    Measure { qubit: usize, var: String },
    Seq(Vec<Stmt>),
    If { cond: Expr, then_branch: Vec<Stmt>, else_branch: Vec<Stmt> },
}

impl Stmt {
    pub fn gate(gate: Gate, qubits: &[usize]) -> Stmt {
        Stmt::Unitary { gate, qubits: qubits.to_vec() }
    }

    pub fn measure(qubit: usize, var: impl Into<String>) -> Stmt {
        Stmt::Measure { qubit, var: var.into() }
    }

    pub fn sym_pauli(pauli: Pauli, guard: Expr, qubit: usize) -> Stmt {
        Stmt::SymPauli { pauli, guard, qubit }
    }

    /// Number of statements counting nested ones (a `Seq`/`If` counts as one
    /// plus its children).
    pub fn size(&self) -> usize {
        match self {
            Stmt::Seq(b) => 1 + b.iter().map(Stmt::size).sum::<usize>(),
            Stmt::If { then_branch, else_branch, .. } => {
                1 + then_branch.iter().chain(else_branch).map(Stmt::size).sum::<usize>()
            }
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub num_qubits: usize,
    /// Classical variables that the caller binds before execution.
    pub inputs: Vec<String>,
    pub body: Vec<Stmt>,
}

impl Program {
    pub fn new(num_qubits: usize, body: Vec<Stmt>) -> Self {
        Program { num_qubits, inputs: Vec::new(), body }
    }

    pub fn with_inputs(mut self, inputs: impl IntoIterator<Item = String>) -> Self {
        self.inputs.extend(inputs);
        self
    }

    /// Rewrites every `if (e) { P q; }` with a single Pauli gate and no else
    /// branch into the non-branching `P[e] q`.
    pub fn lift_pauli_conditionals(&self) -> Program {
        Program { num_qubits: self.num_qubits, inputs: self.inputs.clone(), body: lift_block(&self.body) }
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

fn lift_block(b: &[Stmt]) -> Vec<Stmt> {
    b.iter().map(lift_stmt).collect()
}

fn lift_stmt(s: &Stmt) -> Stmt {
    match s {
        Stmt::If { cond, then_branch, else_branch } => {
            if else_branch.is_empty() && then_branch.len() == 1 {
                if let Stmt::Unitary { gate, qubits } = &then_branch[0] {
                    if let Some(p) = gate.as_pauli() {
                        if p != Pauli::I {
                            return Stmt::SymPauli { pauli: p, guard: cond.clone(), qubit: qubits[0] };
                        }
                    }
                }
            }
            Stmt::If { cond: cond.clone(), then_branch: lift_block(then_branch), else_branch: lift_block(else_branch) }
        }
        Stmt::Seq(b) => Stmt::Seq(lift_block(b)),
        other => other.clone(),
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {};", self.num_qubits)?;
        if !self.inputs.is_empty() {
            writeln!(f, "input {};", self.inputs.join(", "))?;
        }
        let mut s = String::new();
        print_block(&mut s, &self.body, 0);
        f.write_str(&s)
    }
}

fn print_block(out: &mut String, b: &[Stmt], depth: usize) {
    for s in b {
        print_stmt(out, s, depth);
    }
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "  ".repeat(depth);
    let q = |i: &usize| format!("q{}", i + 1);
    match s {
        Stmt::Assign { var, expr } => {
            let _ = writeln!(out, "{pad}{var} := {expr};");
        }
        Stmt::ExtCall { outs, func, args } => {
            let _ = writeln!(out, "{pad}{} := {func}({});", outs.join(", "), args.join(", "));
        }
        Stmt::Unitary { gate, qubits } => {
            let qs: Vec<String> = qubits.iter().map(q).collect();
            let _ = writeln!(out, "{pad}{} {};", gate.name(), qs.join(", "));
        }
        Stmt::SymPauli { pauli, guard, qubit } => {
            let _ = writeln!(out, "{pad}{}[{guard}] {};", pauli.as_char(), q(qubit));
        }
        Stmt::Measure { qubit, var } => {
            let _ = writeln!(out, "{pad}measure {} -> {var};", q(qubit));
        }
        Stmt::Seq(b) => {
            let _ = writeln!(out, "{pad}{{");
            print_block(out, b, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        Stmt::If { cond, then_branch, else_branch } => {
            let _ = writeln!(out, "{pad}if ({cond}) {{");
            print_block(out, then_branch, depth + 1);
            if else_branch.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                print_block(out, else_branch, depth + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: loop bound is not a constant: {what}")]
    NonConstantBound { line: usize, col: usize, what: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCT: [&str; 26] = [
    ":=", "->", "==", "!=", "&&", "||", "..", ";", ",", "(", ")", "{", "}", "[", "]", "|", "^", "&", "*", "!", "~",
    "+", "-", "%", "/", "=",
];

fn lex(src: &str, line0: usize, col0: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0, line0, col0);
    let err = |line, col, msg: String| ParseError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (sl, sc) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let v = text.parse().map_err(|_| err(sl, sc, format!("integer too large: {text}")))?;
            toks.push(Token { tok: Tok::Int(v), line: sl, col: sc });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            loop {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '{' && chars[i - 1] == '_' {
                    let mut depth = 0;
                    while i < chars.len() {
                        if chars[i] == '{' {
                            depth += 1;
                        } else if chars[i] == '}' {
                            depth -= 1;
                            if depth == 0 {
                                i += 1;
                                break;
                            }
                        } else if chars[i] == '\n' {
                            return Err(err(sl, sc, "unterminated index group".into()));
                        }
                        i += 1;
                    }
                    if depth != 0 {
                        return Err(err(sl, sc, "unterminated index group".into()));
                    }
                    continue;
                }
                break;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            toks.push(Token { tok: Tok::Ident(text), line: sl, col: sc });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(p) = PUNCT.iter().find(|p| rest.starts_with(**p)) else {
            return Err(err(sl, sc, format!("unexpected character {c:?}")));
        };
        i += p.chars().count();
        col += p.chars().count();
        toks.push(Token { tok: Tok::Punct(p), line: sl, col: sc });
    }
    toks.push(Token { tok: Tok::Eof, line, col });
    Ok(toks)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    env: HashMap<String, i64>,
    num_qubits: usize,
}

const KEYWORDS: [&str; 7] = ["qubits", "input", "measure", "if", "else", "for", "in"];

/// Parses program text, unrolling loops.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser { toks: lex(src, 1, 1)?, pos: 0, env: HashMap::new(), num_qubits: 0 };
    p.program()
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::Syntax { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat(p) {
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", describe(self.peek())))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn raw_ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", describe(&other))),
        }
    }

    /// Identifier with loop substitutions applied.
    fn name(&mut self) -> Result<String, ParseError> {
        let (line, col) = self.here();
        let raw = self.raw_ident()?;
        if KEYWORDS.contains(&raw.as_str()) {
            return Err(ParseError::Syntax { line, col, msg: format!("`{raw}` is a keyword") });
        }
        self.resolve(&raw, line, col)
    }

    fn resolve(&self, raw: &str, line: usize, col: usize) -> Result<String, ParseError> {
        let mut spliced = String::new();
        let mut rest = raw;
        while let Some(open) = rest.find('{') {
            spliced.push_str(&rest[..open]);
            let close = rest[open..].find('}').map(|c| open + c).expect("lexer balances groups");
            let inner = &rest[open + 1..close];
            let toks = lex(inner, line, col)?;
            let mut sub = Parser { toks, pos: 0, env: self.env.clone(), num_qubits: self.num_qubits };
            let v = sub.arith()?;
            if sub.peek() != &Tok::Eof {
                return sub.error("trailing tokens in index group");
            }
            spliced.push_str(&v.to_string());
            rest = &rest[close + 1..];
        }
        spliced.push_str(rest);
        let parts: Vec<String> = spliced
            .split('_')
            .map(|seg| match self.env.get(seg) {
                Some(v) => v.to_string(),
                None => seg.to_string(),
            })
            .collect();
        Ok(parts.join("_"))
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        if !self.is_kw("qubits") {
            return self.error("program must start with `qubits N`");
        }
        self.bump();
        let n = match self.bump() {
            Tok::Int(n) if n > 0 => n as usize,
            _ => {
                self.pos -= 1;
                return self.error("expected a positive qubit count");
            }
        };
        self.eat(";");
        self.num_qubits = n;
        let mut inputs = Vec::new();
        while self.is_kw("input") {
            self.bump();
            loop {
                inputs.push(self.name()?);
                if !self.eat(",") {
                    break;
                }
            }
            self.expect(";")?;
        }
        let mut body = Vec::new();
        while self.peek() != &Tok::Eof {
            self.stmt(&mut body)?;
        }
        Ok(Program { num_qubits: n, inputs, body })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect("{")?;
        let mut out = Vec::new();
        while !self.is_punct("}") {
            if self.peek() == &Tok::Eof {
                return self.error("unterminated block");
            }
            self.stmt(&mut out)?;
        }
        self.expect("}")?;
        Ok(out)
    }

    fn stmt(&mut self, out: &mut Vec<Stmt>) -> Result<(), ParseError> {
        if self.is_punct("{") {
            let b = self.block()?;
            out.push(Stmt::Seq(b));
            return Ok(());
        }
        let Tok::Ident(head) = self.peek().clone() else {
            return self.error(format!("expected a statement, found {}", describe(self.peek())));
        };
        match head.as_str() {
            "measure" => {
                self.bump();
                let q = self.qubit()?;
                self.expect("->")?;
                let var = self.name()?;
                self.expect(";")?;
                out.push(Stmt::Measure { qubit: q, var });
            }
            "if" => {
                self.bump();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let then_branch = self.block()?;
                let else_branch = if self.is_kw("else") {
                    self.bump();
                    if self.is_kw("if") {
                        let mut nested = Vec::new();
                        self.stmt(&mut nested)?;
                        nested
                    } else {
                        self.block()?
                    }
                } else {
                    Vec::new()
                };
                out.push(Stmt::If { cond, then_branch, else_branch });
            }
            "for" => self.for_loop(out)?,
            _ => {
                let is_gate = Gate::from_name(&head).is_some()
                    && !matches!(self.peek_at(1), Tok::Punct(":=") | Tok::Punct(","));
                if is_gate {
                    self.gate_stmt(out)?;
                } else {
                    self.assignment(out)?;
                }
            }
        }
        Ok(())
    }

    fn for_loop(&mut self, out: &mut Vec<Stmt>) -> Result<(), ParseError> {
        self.bump();
        let var = self.raw_ident()?;
        if !self.is_kw("in") {
            return self.error("expected `in`");
        }
        self.bump();
        let lo = self.bound()?;
        self.expect("..")?;
        let hi = self.bound()?;
        let body_start = self.pos;
        let saved = self.env.get(&var).copied();
        let mut end = None;
        let values: Vec<i64> = if lo < hi { (lo..hi).collect() } else { vec![] };
        for v in &values {
            self.pos = body_start;
            self.env.insert(var.clone(), *v);
            let b = self.block()?;
            out.extend(b);
            end = Some(self.pos);
        }
        if end.is_none() {
            self.pos = body_start;
            self.env.insert(var.clone(), lo);
            self.block()?;
            end = Some(self.pos);
        }
        match saved {
            Some(v) => self.env.insert(var, v),
            None => self.env.remove(&var),
        };
        self.pos = end.unwrap();
        Ok(())
    }

    fn bound(&mut self) -> Result<i64, ParseError> {
        if let Tok::Ident(s) = self.peek().clone() {
            if !self.env.contains_key(&s) {
                let (line, col) = self.here();
                return Err(ParseError::NonConstantBound { line, col, what: s });
            }
        }
        self.arith_sum()
    }

    fn gate_stmt(&mut self, out: &mut Vec<Stmt>) -> Result<(), ParseError> {
        let (line, col) = self.here();
        let name = self.raw_ident()?;
        let gate = Gate::from_name(&name).expect("checked by caller");
        if self.eat("[") {
            let Some(p) = gate.as_pauli().filter(|p| *p != Pauli::I) else {
                return Err(ParseError::Syntax { line, col, msg: format!("`{name}` cannot take a guard") });
            };
            let guard = self.expr()?;
            self.expect("]")?;
            let q = self.qubit()?;
            self.expect(";")?;
            out.push(Stmt::SymPauli { pauli: p, guard, qubit: q });
            return Ok(());
        }
        let mut qubits = vec![self.qubit()?];
        while self.eat(",") {
            qubits.push(self.qubit()?);
        }
        self.expect(";")?;
        if qubits.len() != gate.arity() {
            return Err(ParseError::Syntax {
                line,
                col,
                msg: format!("{} takes {} qubit(s), got {}", gate.name(), gate.arity(), qubits.len()),
            });
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(ParseError::Syntax { line, col, msg: "repeated qubit".into() });
        }
        out.push(Stmt::Unitary { gate, qubits });
        Ok(())
    }

    fn assignment(&mut self, out: &mut Vec<Stmt>) -> Result<(), ParseError> {
        let mut outs = vec![self.name()?];
        while self.eat(",") {
            outs.push(self.name()?);
        }
        self.expect(":=")?;
        let is_call = matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::Punct("(");
        if is_call {
            let func = self.raw_ident()?;
            self.expect("(")?;
            let mut args = Vec::new();
            if !self.is_punct(")") {
                args.push(self.name()?);
                while self.eat(",") {
                    args.push(self.name()?);
                }
            }
            self.expect(")")?;
            self.expect(";")?;
            out.push(Stmt::ExtCall { outs, func, args });
            return Ok(());
        }
        if outs.len() != 1 {
            return self.error("multiple targets need an external call on the right");
        }
        let expr = self.expr()?;
        self.expect(";")?;
        out.push(Stmt::Assign { var: outs.pop().unwrap(), expr });
        Ok(())
    }

    fn qubit(&mut self) -> Result<usize, ParseError> {
        let (line, col) = self.here();
        let raw = self.raw_ident()?;
        let name = self.resolve(&raw, line, col)?;
        let index = if name == "q" && self.is_punct("[") {
            self.bump();
            let v = self.arith_sum()?;
            self.expect("]")?;
            Some(v)
        } else {
            let digits = name.strip_prefix("q_").or_else(|| name.strip_prefix('q'));
            digits.filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit())).and_then(|d| d.parse().ok())
        };
        let Some(k) = index else {
            return Err(ParseError::Syntax { line, col, msg: format!("expected a qubit, found `{name}`") });
        };
        if k < 1 || k as usize > self.num_qubits {
            return Err(ParseError::Syntax {
                line,
                col,
                msg: format!("undeclared qubit q{k} (program has {} qubits)", self.num_qubits),
            });
        }
        Ok(k as usize - 1)
    }

    fn arith(&mut self) -> Result<i64, ParseError> {
        self.arith_sum()
    }

    fn arith_sum(&mut self) -> Result<i64, ParseError> {
        let mut v = self.arith_prod()?;
        loop {
            if self.eat("+") {
                v += self.arith_prod()?;
            } else if self.eat("-") {
                v -= self.arith_prod()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn arith_prod(&mut self) -> Result<i64, ParseError> {
        let mut v = self.arith_atom()?;
        loop {
            if self.eat("*") {
                v *= self.arith_atom()?;
            } else if self.eat("/") {
                let d = self.arith_atom()?;
                if d == 0 {
                    return self.error("division by zero");
                }
                v = v.div_euclid(d);
            } else if self.eat("%") {
                let d = self.arith_atom()?;
                if d == 0 {
                    return self.error("division by zero");
                }
                v = v.rem_euclid(d);
            } else {
                return Ok(v);
            }
        }
    }

    fn arith_atom(&mut self) -> Result<i64, ParseError> {
        let (line, col) = self.here();
        match self.bump() {
            Tok::Int(v) => Ok(v as i64),
            Tok::Ident(s) => match self.env.get(&s) {
                Some(v) => Ok(*v),
                None => Err(ParseError::NonConstantBound { line, col, what: s }),
            },
            Tok::Punct("(") => {
                let v = self.arith_sum()?;
                self.expect(")")?;
                Ok(v)
            }
            Tok::Punct("-") => Ok(-self.arith_atom()?),
            other => {
                self.pos -= 1;
                self.error(format!("expected an integer, found {}", describe(&other)))
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.xor_expr()?;
        while self.eat("|") || self.eat("||") {
            e = Expr::Or(Box::new(e), Box::new(self.xor_expr()?));
        }
        Ok(e)
    }

    fn xor_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.and_expr()?;
        while self.eat("^") {
            e = Expr::Xor(Box::new(e), Box::new(self.and_expr()?));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.cmp_expr()?;
        while self.eat("&") || self.eat("&&") {
            e = Expr::And(Box::new(e), Box::new(self.cmp_expr()?));
        }
        Ok(e)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let e = self.mul_expr()?;
        if self.eat("==") {
            return Ok(Expr::Eq(Box::new(e), Box::new(self.mul_expr()?)));
        }
        if self.eat("!=") {
            return Ok(Expr::Ne(Box::new(e), Box::new(self.mul_expr()?)));
        }
        Ok(e)
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.unary()?;
        while self.eat("*") {
            e = Expr::And(Box::new(e), Box::new(self.unary()?));
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat("!") || self.eat("~") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.eat("(") {
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::Ident(raw) => {
                if let Some(v) = self.env.get(&raw) {
                    let v = *v;
                    self.bump();
                    if v < 0 {
                        return self.error("negative loop value used as a constant");
                    }
                    return Ok(Expr::Const(v as u64));
                }
                Ok(Expr::Var(self.name()?))
            }
            other => self.error(format!("expected an expression, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

/// A validation finding, located by the path of statement indices from the
/// program body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: Vec<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self.path.iter().map(|i| i.to_string()).collect();
        write!(f, "statement {}: {}", p.join("."), self.message)
    }
}

/// Checks qubit ranges, gate arities and definite assignment of classical
/// variables. An empty list means the program is well formed.
pub fn validate(p: &Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut defined: BTreeSet<String> = p.inputs.iter().cloned().collect();
    check_block(p, &p.body, &mut defined, &mut Vec::new(), &mut diags);
    diags
}

fn check_block(
    p: &Program,
    b: &[Stmt],
    defined: &mut BTreeSet<String>,
    path: &mut Vec<usize>,
    diags: &mut Vec<Diagnostic>,
) {
    for (i, s) in b.iter().enumerate() {
        path.push(i);
        check_stmt(p, s, defined, path, diags);
        path.pop();
    }
}

fn check_stmt(
    p: &Program,
    s: &Stmt,
    defined: &mut BTreeSet<String>,
    path: &mut Vec<usize>,
    diags: &mut Vec<Diagnostic>,
) {
    let mut report = |msg: String| diags.push(Diagnostic { path: path.clone(), message: msg });
    let reads = |e: &Expr, report: &mut dyn FnMut(String), defined: &BTreeSet<String>| {
        let mut vs = BTreeSet::new();
        e.vars(&mut vs);
        for v in vs {
            if !defined.contains(&v) {
                report(format!("variable `{v}` is read before it is assigned"));
            }
        }
    };
    match s {
        Stmt::Assign { var, expr } => {
            reads(expr, &mut report, defined);
            defined.insert(var.clone());
        }
        Stmt::ExtCall { outs, args, .. } => {
            for a in args {
                if !defined.contains(a) {
                    report(format!("variable `{a}` is read before it is assigned"));
                }
            }
            defined.extend(outs.iter().cloned());
        }
        Stmt::Unitary { gate, qubits } => {
            if let Err(e) = gate.check_targets(qubits, p.num_qubits) {
                report(e.to_string());
            }
        }
        Stmt::SymPauli { guard, qubit, pauli } => {
            if *qubit >= p.num_qubits {
                report(format!("qubit index {qubit} out of range for {} qubits", p.num_qubits));
            }
            if *pauli == Pauli::I {
                report("identity cannot be guarded".into());
            }
            reads(guard, &mut report, defined);
        }
        Stmt::Measure { qubit, var } => {
            if *qubit >= p.num_qubits {
                report(format!("qubit index {qubit} out of range for {} qubits", p.num_qubits));
            }
            defined.insert(var.clone());
        }
        Stmt::Seq(b) => check_block(p, b, defined, path, diags),
        Stmt::If { cond, then_branch, else_branch } => {
            reads(cond, &mut report, defined);
            let mut d_then = defined.clone();
            let mut d_else = defined.clone();
            path.push(0);
            check_block(p, then_branch, &mut d_then, path, diags);
            path.pop();
            path.push(1);
            check_block(p, else_branch, &mut d_else, path, diags);
            path.pop();
            *defined = d_then.intersection(&d_else).cloned().collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BITFLIP: &str = "qubits 3;
input e_1, e_2, e_3;
X[e_1 == 1] q1; X[e_2 == 1] q2; X[e_3 == 1] q3;
CNOT q1, q2;
measure q2 -> m1;
CNOT q1, q2;
CNOT q2, q3;
measure q3 -> m2;
CNOT q2, q3;
if (m1 == 1 & m2 == 0) { X q1; }
if (m1 == 1 & m2 == 1) { X q2; }
if (m1 == 0 & m2 == 1) { X q3; }
";

    #[test]
    fn parses_bitflip_decoder() {
        let p = parse(BITFLIP).unwrap();
        let decoder = &p.body[3..];
        let count = |f: fn(&Stmt) -> bool| decoder.iter().filter(|s| f(s)).count();
        assert_eq!(count(|s| matches!(s, Stmt::Unitary { .. })), 4);
        assert_eq!(count(|s| matches!(s, Stmt::Measure { .. })), 2);
        assert_eq!(count(|s| matches!(s, Stmt::If { .. })), 3);
        assert!(validate(&p).is_empty());
        let lifted = p.lift_pauli_conditionals();
        assert!(lifted.body.iter().all(|s| !matches!(s, Stmt::If { .. })));
    }

    #[test]
    fn unrolls_loops() {
        let p = parse("qubits 3; input e_1, e_2, e_3; for i in 1..4 { X[e_i==1] q_i; }").unwrap();
        assert_eq!(p.body.len(), 3);
        assert_eq!(p.body[2], Stmt::SymPauli { pauli: Pauli::X, guard: Expr::is_one("e_3"), qubit: 2 });
        let p = parse("qubits 4; for i in 1..4 { CNOT q_i, q_{i+1}; }").unwrap();
        assert_eq!(p.body[2], Stmt::gate(Gate::Cnot, &[2, 3]));
        let p = parse("qubits 4; for i in 0..2 { for j in i..2 { H q[i+j+1]; } }").unwrap();
        assert_eq!(p.body.len(), 3);
        let p = parse("qubits 2; for i in 3..1 { H q1; } H q2;").unwrap();
        assert_eq!(p.body, vec![Stmt::gate(Gate::H, &[1])]);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse("qubits 1; measure q2 -> m1;"), Err(ParseError::Syntax { line: 1, .. })));
        assert!(parse("measure q1 -> m1;").is_err());
        assert!(matches!(parse("qubits 2; for i in 0..n { H q1; }"), Err(ParseError::NonConstantBound { .. })));
        let e = parse("qubits 2;\nH q1;\nCNOT q1 q2;").unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 3, .. }), "{e}");
    }

    #[test]
    fn validation_diagnostics() {
        let p = Program::new(2, vec![Stmt::gate(Gate::H, &[2])]);
        assert_eq!(validate(&p).len(), 1);
        let p = parse("qubits 1; X[m == 1] q1;").unwrap();
        assert_eq!(validate(&p).len(), 1);
        let p = parse("qubits 1; if (1 == 1) { measure q1 -> a; } x := a;").unwrap();
        assert_eq!(validate(&p).len(), 1);
    }

    #[test]
    fn print_parse_fixed_point() {
        let src = "qubits 2; input a;
            r, t := dec(a);
            x := !(a ^ r) | t * a == 1;
            { H q1; }
            if (x != 0) { S q2; } else if (a == 1) { Y q1; } else { Z[a] q2; }";
        let p = parse(src).unwrap();
        let text = p.to_string();
        assert_eq!(parse(&text).unwrap(), p, "{text}");
    }

    #[test]
    fn precedence() {
        let p = parse("qubits 1; input a, b; x := a * b == 1 & b;").unwrap();
        let Stmt::Assign { expr, .. } = &p.body[0] else { panic!() };
        let ab = Expr::And(Box::new(Expr::var("a")), Box::new(Expr::var("b")));
        let eq = Expr::Eq(Box::new(ab), Box::new(Expr::Const(1)));
        assert_eq!(expr, &Expr::And(Box::new(eq), Box::new(Expr::var("b"))));
    }
}
