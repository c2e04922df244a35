//! Symbolic Boolean and bit-vector expressions.
//!
//! [`BoolExpr`] values built through the smart constructors are kept in a
//! normal form: XOR nodes are flattened, sorted and pairwise cancelled, AND/OR
//! nodes are flattened, sorted and deduplicated, and constants are folded.
//! Negation is represented as XOR with `true`, so phases stay XOR-affine over
//! variables and AND terms. Path conditions use [`Formula`], which adds
//! bit-vector counting constraints on top of Boolean atoms.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("unbound variable {0}")]
    Unbound(Symbol),
    #[error("bit-vector width mismatch: {0} vs {1}")]
    WidthMismatch(u32, u32),
    #[error("bit-vector width {0} outside 1..=64")]
    BadWidth(u32),
}

struct Interner {
    ids: HashMap<Arc<str>, u32>,
    names: Vec<Arc<str>>,
}

fn interner() -> &'static RwLock<Interner> {
    static INTERNER: OnceLock<RwLock<Interner>> = OnceLock::new();
    INTERNER.get_or_init(|| RwLock::new(Interner { ids: HashMap::new(), names: Vec::new() }))
}

/// An interned variable name. Ordering follows interning order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(u32);

impl Symbol {
    pub fn new(name: &str) -> Symbol {
        if let Some(&id) = interner().read().unwrap().ids.get(name) {
            return Symbol(id);
        }
        let mut w = interner().write().unwrap();
        if let Some(&id) = w.ids.get(name) {
            return Symbol(id);
        }
        let id = w.names.len() as u32;
        let name: Arc<str> = Arc::from(name);
        w.names.push(name.clone());
        w.ids.insert(name, id);
        Symbol(id)
    }

    pub fn name(&self) -> Arc<str> {
        interner().read().unwrap().names[self.0 as usize].clone()
    }

    pub fn id(&self) -> u32 {
        self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl Serialize for Symbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Symbol::new(&String::deserialize(d)?))
    }
}

/// Issues fresh symbols `prefix_0`, `prefix_1`, ... skipping reserved names.
#[derive(Debug, Clone, Default)]
pub struct FreshGen {
    counters: HashMap<String, u64>,
    taken: HashSet<Symbol>,
}

impl FreshGen {
    pub fn new() -> Self {
        Self::default()
    }

    /// Marks a name as used so that `fresh` never returns it.
    pub fn reserve(&mut self, s: Symbol) {
        self.taken.insert(s);
    }

    pub fn fresh(&mut self, prefix: &str) -> Symbol {
        let counter = self.counters.entry(prefix.to_string()).or_insert(0);
        loop {
            let s = Symbol::new(&format!("{prefix}_{counter}"));
            *counter += 1;
            if self.taken.insert(s) {
                return s;
            }
        }
    }

    pub fn fresh_var(&mut self, prefix: &str) -> BoolExpr {
        BoolExpr::Var(self.fresh(prefix))
    }
}

/// Assignment of symbols to bits or words.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Valuation(pub BTreeMap<Symbol, u64>);

impl Valuation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, s: Symbol, v: u64) {
        self.0.insert(s, v);
    }

    pub fn set_bit(&mut self, s: Symbol, v: bool) {
        self.0.insert(s, v as u64);
    }

    pub fn get(&self, s: Symbol) -> Result<u64, ExprError> {
        self.0.get(&s).copied().ok_or(ExprError::Unbound(s))
    }

    pub fn bit(&self, s: Symbol) -> Result<bool, ExprError> {
        Ok(self.get(s)? & 1 == 1)
    }

    pub fn contains(&self, s: Symbol) -> bool {
        self.0.contains_key(&s)
    }

    pub fn extend(&mut self, other: &Valuation) {
        for (k, v) in &other.0 {
            self.0.insert(*k, *v);
        }
    }
}

/// Boolean expression over named symbols.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoolExpr {
    Const(bool),
    Var(Symbol),
    Not(Arc<BoolExpr>),
    And(Arc<[BoolExpr]>),
    Or(Arc<[BoolExpr]>),
    Xor(Arc<[BoolExpr]>),
}

impl BoolExpr {
    pub const TRUE: BoolExpr = BoolExpr::Const(true);
    pub const FALSE: BoolExpr = BoolExpr::Const(false);

    pub fn var(name: &str) -> BoolExpr {
        BoolExpr::Var(Symbol::new(name))
    }

    pub fn constant(b: bool) -> BoolExpr {
        BoolExpr::Const(b)
    }

    pub fn as_const(&self) -> Option<bool> {
        match self {
            BoolExpr::Const(b) => Some(*b),
            _ => None,
        }
    }

    /// Negation, in normal form (XOR with `true`).
    pub fn not(e: BoolExpr) -> BoolExpr {
        let e = e.simplify_shallow();
        match e {
            BoolExpr::Const(b) => BoolExpr::Const(!b),
            other => {
                let mut s = XorSum::from_normal(&other);
                s.toggle();
                s.to_expr()
            }
        }
    }

    pub fn xor(a: BoolExpr, b: BoolExpr) -> BoolExpr {
        Self::xor_all([a, b])
    }

    pub fn xor_all(items: impl IntoIterator<Item = BoolExpr>) -> BoolExpr {
        let mut constant = false;
        let mut atoms = Vec::new();
        for e in items {
            let e = e.simplify_shallow();
            match e {
                BoolExpr::Const(b) => constant ^= b,
                BoolExpr::Xor(cs) => {
                    for c in cs.iter() {
                        match c {
                            BoolExpr::Const(b) => constant ^= *b,
                            atom => atoms.push(atom.clone()),
                        }
                    }
                }
                atom => atoms.push(atom),
            }
        }
        XorSum::from_unsorted(constant, atoms).to_expr()
    }

    pub fn and(a: BoolExpr, b: BoolExpr) -> BoolExpr {
        Self::and_all([a, b])
    }

    pub fn and_all(items: impl IntoIterator<Item = BoolExpr>) -> BoolExpr {
        let mut out = Vec::new();
        for e in items {
            match e.simplify_shallow() {
                BoolExpr::Const(false) => return BoolExpr::FALSE,
                BoolExpr::Const(true) => {}
                BoolExpr::And(cs) => out.extend(cs.iter().cloned()),
                other => out.push(other),
            }
        }
        out.sort();
        out.dedup();
        if has_complement(&out) {
            return BoolExpr::FALSE;
        }
        match out.len() {
            0 => BoolExpr::TRUE,
            1 => out.pop().unwrap(),
            _ => BoolExpr::And(out.into()),
        }
    }

    pub fn or(a: BoolExpr, b: BoolExpr) -> BoolExpr {
        Self::or_all([a, b])
    }

    pub fn or_all(items: impl IntoIterator<Item = BoolExpr>) -> BoolExpr {
        let mut out = Vec::new();
        for e in items {
            match e.simplify_shallow() {
                BoolExpr::Const(true) => return BoolExpr::TRUE,
                BoolExpr::Const(false) => {}
                BoolExpr::Or(cs) => out.extend(cs.iter().cloned()),
                other => out.push(other),
            }
        }
        out.sort();
        out.dedup();
        if has_complement(&out) {
            return BoolExpr::TRUE;
        }
        match out.len() {
            0 => BoolExpr::FALSE,
            1 => out.pop().unwrap(),
            _ => BoolExpr::Or(out.into()),
        }
    }

    /// `a == b`, i.e. `!(a ^ b)`.
    pub fn iff(a: BoolExpr, b: BoolExpr) -> BoolExpr {
        Self::xor_all([a, b, BoolExpr::TRUE])
    }

    /// Only `Not` needs rewriting at the top; everything else built by the
    /// smart constructors is already normal.
    fn simplify_shallow(self) -> BoolExpr {
        match self {
            BoolExpr::Not(inner) => BoolExpr::not(inner.simplify()),
            other => other,
        }
    }

    /// Full normalization of an arbitrary expression tree.
    pub fn simplify(&self) -> BoolExpr {
        match self {
            BoolExpr::Const(_) | BoolExpr::Var(_) => self.clone(),
            BoolExpr::Not(e) => BoolExpr::not(e.simplify()),
            BoolExpr::And(cs) => BoolExpr::and_all(cs.iter().map(|c| c.simplify())),
            BoolExpr::Or(cs) => BoolExpr::or_all(cs.iter().map(|c| c.simplify())),
            BoolExpr::Xor(cs) => BoolExpr::xor_all(cs.iter().map(|c| c.simplify())),
        }
    }

    pub fn eval(&self, v: &Valuation) -> Result<bool, ExprError> {
        Ok(match self {
            BoolExpr::Const(b) => *b,
            BoolExpr::Var(s) => v.bit(*s)?,
            BoolExpr::Not(e) => !e.eval(v)?,
            BoolExpr::And(cs) => {
                let mut r = true;
                for c in cs.iter() {
                    r &= c.eval(v)?;
                }
                r
            }
            BoolExpr::Or(cs) => {
                let mut r = false;
                for c in cs.iter() {
                    r |= c.eval(v)?;
                }
                r
            }
            BoolExpr::Xor(cs) => {
                let mut r = false;
                for c in cs.iter() {
                    r ^= c.eval(v)?;
                }
                r
            }
        })
    }

    pub fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            BoolExpr::Const(_) => {}
            BoolExpr::Var(s) => {
                out.insert(*s);
            }
            BoolExpr::Not(e) => e.collect_symbols(out),
            BoolExpr::And(cs) | BoolExpr::Or(cs) | BoolExpr::Xor(cs) => {
                for c in cs.iter() {
                    c.collect_symbols(out);
                }
            }
        }
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut s = BTreeSet::new();
        self.collect_symbols(&mut s);
        s
    }

    /// Visits symbols in first-occurrence order.
    pub(crate) fn visit_symbols(&self, f: &mut impl FnMut(Symbol)) {
        match self {
            BoolExpr::Const(_) => {}
            BoolExpr::Var(s) => f(*s),
            BoolExpr::Not(e) => e.visit_symbols(f),
            BoolExpr::And(cs) | BoolExpr::Or(cs) | BoolExpr::Xor(cs) => {
                for c in cs.iter() {
                    c.visit_symbols(f);
                }
            }
        }
    }

    /// Replaces bound symbols by constants and renormalizes.
    pub fn substitute(&self, v: &Valuation) -> BoolExpr {
        match self {
            BoolExpr::Const(_) => self.clone(),
            BoolExpr::Var(s) => match v.0.get(s) {
                Some(b) => BoolExpr::Const(b & 1 == 1),
                None => self.clone(),
            },
            BoolExpr::Not(e) => BoolExpr::not(e.substitute(v)),
            BoolExpr::And(cs) => BoolExpr::and_all(cs.iter().map(|c| c.substitute(v))),
            BoolExpr::Or(cs) => BoolExpr::or_all(cs.iter().map(|c| c.substitute(v))),
            BoolExpr::Xor(cs) => BoolExpr::xor_all(cs.iter().map(|c| c.substitute(v))),
        }
    }

    pub fn to_smt(&self) -> String {
        let mut s = String::new();
        self.write_smt(&mut s);
        s
    }

    fn write_smt(&self, out: &mut String) {
        match self {
            BoolExpr::Const(b) => out.push_str(if *b { "true" } else { "false" }),
            BoolExpr::Var(s) => out.push_str(&s.name()),
            BoolExpr::Not(e) => {
                out.push_str("(not ");
                e.write_smt(out);
                out.push(')');
            }
            BoolExpr::And(cs) => write_nary(out, "and", cs),
            BoolExpr::Or(cs) => write_nary(out, "or", cs),
            BoolExpr::Xor(cs) => {
                if cs[0] == BoolExpr::TRUE {
                    out.push_str("(not ");
                    if cs.len() == 2 {
                        cs[1].write_smt(out);
                    } else {
                        write_nary(out, "xor", &cs[1..]);
                    }
                    out.push(')');
                } else {
                    write_nary(out, "xor", cs);
                }
            }
        }
    }
}

fn has_complement(sorted: &[BoolExpr]) -> bool {
    sorted.iter().any(|e| {
        let neg = BoolExpr::not(e.clone());
        sorted.binary_search(&neg).is_ok()
    })
}

fn write_nary(out: &mut String, op: &str, cs: &[BoolExpr]) {
    out.push('(');
    out.push_str(op);
    for c in cs {
        out.push(' ');
        c.write_smt(out);
    }
    out.push(')');
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::Const(b) => write!(f, "{}", *b as u8),
            BoolExpr::Var(s) => write!(f, "{s}"),
            BoolExpr::Not(e) => write!(f, "!{e}"),
            BoolExpr::And(cs) => join(f, " & ", cs),
            BoolExpr::Or(cs) => join(f, " | ", cs),
            BoolExpr::Xor(cs) => {
                if cs[0] == BoolExpr::TRUE {
                    if cs.len() == 2 {
                        write!(f, "!{}", cs[1])
                    } else {
                        f.write_str("!")?;
                        join(f, " ^ ", &cs[1..])
                    }
                } else {
                    join(f, " ^ ", cs)
                }
            }
        }
    }
}

fn join(f: &mut fmt::Formatter<'_>, sep: &str, cs: &[BoolExpr]) -> fmt::Result {
    f.write_str("(")?;
    for (i, c) in cs.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{c}")?;
    }
    f.write_str(")")
}

impl fmt::Debug for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for BoolExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_smt())
    }
}

/// An XOR of distinct atoms plus a constant: the working form of tableau
/// phases. Atoms are normal-form expressions that are neither constants nor
/// XOR nodes, kept sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct XorSum {
    constant: bool,
    atoms: Vec<BoolExpr>,
}

impl XorSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(b: bool) -> Self {
        XorSum { constant: b, atoms: Vec::new() }
    }

    /// Accepts any expression and normalizes it first.
    pub fn from_expr(e: &BoolExpr) -> Self {
        Self::from_normal(&e.simplify())
    }

    fn from_normal(e: &BoolExpr) -> Self {
        match e {
            BoolExpr::Const(b) => Self::constant(*b),
            BoolExpr::Xor(cs) => {
                let mut s = XorSum::zero();
                for c in cs.iter() {
                    match c {
                        BoolExpr::Const(b) => s.constant ^= *b,
                        atom => s.atoms.push(atom.clone()),
                    }
                }
                s
            }
            atom => XorSum { constant: false, atoms: vec![atom.clone()] },
        }
    }

    fn from_unsorted(constant: bool, mut atoms: Vec<BoolExpr>) -> Self {
        atoms.sort_unstable();
        let mut out: Vec<BoolExpr> = Vec::with_capacity(atoms.len());
        for a in atoms {
            if out.last() == Some(&a) {
                out.pop();
            } else {
                out.push(a);
            }
        }
        XorSum { constant, atoms: out }
    }

    pub fn to_expr(&self) -> BoolExpr {
        match (self.constant, self.atoms.len()) {
            (c, 0) => BoolExpr::Const(c),
            (false, 1) => self.atoms[0].clone(),
            (c, _) => {
                let mut v = Vec::with_capacity(self.atoms.len() + 1);
                if c {
                    v.push(BoolExpr::TRUE);
                }
                v.extend(self.atoms.iter().cloned());
                BoolExpr::Xor(v.into())
            }
        }
    }

    pub fn is_const(&self) -> Option<bool> {
        self.atoms.is_empty().then_some(self.constant)
    }

    pub fn const_part(&self) -> bool {
        self.constant
    }

    pub fn atoms(&self) -> &[BoolExpr] {
        &self.atoms
    }

    #[inline]
    pub fn toggle(&mut self) {
        self.constant = !self.constant;
    }

    pub fn xor_const(&mut self, b: bool) {
        self.constant ^= b;
    }

    pub fn xor_assign(&mut self, other: &XorSum) {
        self.constant ^= other.constant;
        if other.atoms.is_empty() {
            return;
        }
        if other.atoms.len() == 1 {
            self.toggle_atom(&other.atoms[0]);
            return;
        }
        let a = std::mem::take(&mut self.atoms);
        let b = &other.atoms;
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        self.atoms = out;
    }

    fn toggle_atom(&mut self, atom: &BoolExpr) {
        match self.atoms.binary_search(atom) {
            Ok(i) => {
                self.atoms.remove(i);
            }
            Err(i) => self.atoms.insert(i, atom.clone()),
        }
    }

    /// XOR with an arbitrary normal-form expression.
    pub fn xor_expr(&mut self, e: &BoolExpr) {
        match e {
            BoolExpr::Const(b) => self.constant ^= b,
            BoolExpr::Xor(_) | BoolExpr::Not(_) => self.xor_assign(&XorSum::from_expr(e)),
            atom => self.toggle_atom(atom),
        }
    }

    /// XOR of many sums at once.
    pub fn sum<'a>(items: impl IntoIterator<Item = &'a XorSum>) -> XorSum {
        let mut constant = false;
        let mut atoms = Vec::new();
        for s in items {
            constant ^= s.constant;
            atoms.extend(s.atoms.iter().cloned());
        }
        Self::from_unsorted(constant, atoms)
    }

    pub fn eval(&self, v: &Valuation) -> Result<bool, ExprError> {
        let mut r = self.constant;
        for a in &self.atoms {
            r ^= a.eval(v)?;
        }
        Ok(r)
    }
}

/// Bit-vector expression; widths are between 1 and 64.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum BvExpr {
    Const { width: u32, value: u64 },
    Var { sym: Symbol, width: u32 },
    /// A Boolean read as a 1-bit vector.
    FromBool(BoolExpr),
    ZeroExt { extra: u32, inner: Box<BvExpr> },
    Add(Box<BvExpr>, Box<BvExpr>),
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Smallest width holding every value in `0..=v`, at least 1.
pub fn bits_for(v: u64) -> u32 {
    (64 - v.leading_zeros()).max(1)
}

impl BvExpr {
    pub fn constant(width: u32, value: u64) -> Result<BvExpr, ExprError> {
        if width == 0 || width > 64 {
            return Err(ExprError::BadWidth(width));
        }
        Ok(BvExpr::Const { width, value: value & mask(width) })
    }

    pub fn var(sym: Symbol, width: u32) -> Result<BvExpr, ExprError> {
        if width == 0 || width > 64 {
            return Err(ExprError::BadWidth(width));
        }
        Ok(BvExpr::Var { sym, width })
    }

    pub fn width(&self) -> u32 {
        match self {
            BvExpr::Const { width, .. } | BvExpr::Var { width, .. } => *width,
            BvExpr::FromBool(_) => 1,
            BvExpr::ZeroExt { extra, inner } => inner.width() + extra,
            BvExpr::Add(a, _) => a.width(),
        }
    }

    pub fn zero_extend(self, to: u32) -> Result<BvExpr, ExprError> {
        let w = self.width();
        if to < w || to > 64 {
            return Err(ExprError::BadWidth(to));
        }
        if to == w {
            return Ok(self);
        }
        Ok(BvExpr::ZeroExt { extra: to - w, inner: Box::new(self) })
    }

    pub fn add(a: BvExpr, b: BvExpr) -> Result<BvExpr, ExprError> {
        if a.width() != b.width() {
            return Err(ExprError::WidthMismatch(a.width(), b.width()));
        }
        Ok(BvExpr::Add(Box::new(a), Box::new(b)))
    }

    /// Sum of Booleans as a counter wide enough for `bits.len()` and `bound`.
    pub fn count(bits: &[BoolExpr], width: u32) -> BvExpr {
        let mut acc: Option<BvExpr> = None;
        for b in bits {
            let bit = BvExpr::FromBool(b.clone());
            let term = if width == 1 { bit } else { BvExpr::ZeroExt { extra: width - 1, inner: Box::new(bit) } };
            acc = Some(match acc {
                None => term,
                Some(a) => BvExpr::Add(Box::new(a), Box::new(term)),
            });
        }
        acc.unwrap_or(BvExpr::Const { width, value: 0 })
    }

    pub fn eval(&self, v: &Valuation) -> Result<u64, ExprError> {
        Ok(match self {
            BvExpr::Const { value, .. } => *value,
            BvExpr::Var { sym, width } => v.get(*sym)? & mask(*width),
            BvExpr::FromBool(b) => b.eval(v)? as u64,
            BvExpr::ZeroExt { inner, .. } => inner.eval(v)?,
            BvExpr::Add(a, b) => a.eval(v)?.wrapping_add(b.eval(v)?) & mask(self.width()),
        })
    }

    pub(crate) fn visit_symbols(&self, f: &mut impl FnMut(Symbol, Sort)) {
        match self {
            BvExpr::Const { .. } => {}
            BvExpr::Var { sym, width } => f(*sym, Sort::BitVec(*width)),
            BvExpr::FromBool(b) => b.visit_symbols(&mut |s| f(s, Sort::Bool)),
            BvExpr::ZeroExt { inner, .. } => inner.visit_symbols(f),
            BvExpr::Add(a, b) => {
                a.visit_symbols(f);
                b.visit_symbols(f);
            }
        }
    }

    pub fn substitute(&self, v: &Valuation) -> BvExpr {
        match self {
            BvExpr::Const { .. } => self.clone(),
            BvExpr::Var { sym, width } => match v.0.get(sym) {
                Some(x) => BvExpr::Const { width: *width, value: x & mask(*width) },
                None => self.clone(),
            },
            BvExpr::FromBool(b) => BvExpr::FromBool(b.substitute(v)),
            BvExpr::ZeroExt { extra, inner } => BvExpr::ZeroExt { extra: *extra, inner: Box::new(inner.substitute(v)) },
            BvExpr::Add(a, b) => BvExpr::Add(Box::new(a.substitute(v)), Box::new(b.substitute(v))),
        }
    }

    pub fn to_smt(&self) -> String {
        match self {
            BvExpr::Const { width, value } => format!("#b{:0w$b}", value, w = *width as usize),
            BvExpr::Var { sym, .. } => sym.name().to_string(),
            BvExpr::FromBool(b) => format!("(ite {} #b1 #b0)", b.to_smt()),
            BvExpr::ZeroExt { extra, inner } => format!("((_ zero_extend {extra}) {})", inner.to_smt()),
            BvExpr::Add(a, b) => format!("(bvadd {} {})", a.to_smt(), b.to_smt()),
        }
    }
}

impl fmt::Display for BvExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BvExpr::Const { value, .. } => write!(f, "{value}"),
            BvExpr::Var { sym, .. } => write!(f, "{sym}"),
            BvExpr::FromBool(b) => write!(f, "{b}"),
            BvExpr::ZeroExt { inner, .. } => write!(f, "{inner}"),
            BvExpr::Add(a, b) => write!(f, "{a} + {b}"),
        }
    }
}

/// SMT sort of a symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sort {
    Bool,
    BitVec(u32),
}

impl Sort {
    pub fn to_smt(self) -> String {
        match self {
            Sort::Bool => "Bool".to_string(),
            Sort::BitVec(w) => format!("(_ BitVec {w})"),
        }
    }
}

/// Boolean combination of [`BoolExpr`] atoms and bit-vector comparisons.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Formula {
    Atom(BoolExpr),
    BvLe(BvExpr, BvExpr),
    BvEq(BvExpr, BvExpr),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn truth(b: bool) -> Formula {
        Formula::Atom(BoolExpr::Const(b))
    }

    pub fn atom(e: BoolExpr) -> Formula {
        Formula::Atom(e)
    }

    pub fn as_const(&self) -> Option<bool> {
        match self {
            Formula::Atom(e) => e.as_const(),
            _ => None,
        }
    }

    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::Atom(e) => Formula::Atom(BoolExpr::not(e)),
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    pub fn and_all(items: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for f in items {
            match f {
                Formula::And(cs) => out.extend(cs),
                f => match f.as_const() {
                    Some(true) => {}
                    Some(false) => return Formula::truth(false),
                    None => out.push(f),
                },
            }
        }
        match out.len() {
            0 => Formula::truth(true),
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or_all(items: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for f in items {
            match f {
                Formula::Or(cs) => out.extend(cs),
                f => match f.as_const() {
                    Some(false) => {}
                    Some(true) => return Formula::truth(true),
                    None => out.push(f),
                },
            }
        }
        match out.len() {
            0 => Formula::truth(false),
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    /// `Σ bits ≤ bound` over a counter of width ⌈log₂(len+1)⌉ (widened to fit
    /// the bound).
    pub fn count_le(bits: &[BoolExpr], bound: u64) -> Formula {
        let width = bits_for(bits.len() as u64).max(bits_for(bound));
        Formula::BvLe(BvExpr::count(bits, width), BvExpr::Const { width, value: bound })
    }

    pub fn eval(&self, v: &Valuation) -> Result<bool, ExprError> {
        Ok(match self {
            Formula::Atom(e) => e.eval(v)?,
            Formula::BvLe(a, b) => a.eval(v)? <= b.eval(v)?,
            Formula::BvEq(a, b) => a.eval(v)? == b.eval(v)?,
            Formula::Not(f) => !f.eval(v)?,
            Formula::And(cs) => {
                let mut r = true;
                for c in cs {
                    r &= c.eval(v)?;
                }
                r
            }
            Formula::Or(cs) => {
                let mut r = false;
                for c in cs {
                    r |= c.eval(v)?;
                }
                r
            }
        })
    }

    /// Symbols with their sorts, in order of first occurrence.
    pub fn declarations(&self) -> Vec<(Symbol, Sort)> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        self.visit_symbols(&mut |s, sort| {
            if seen.insert(s) {
                out.push((s, sort));
            }
        });
        out
    }

    pub(crate) fn visit_symbols(&self, f: &mut impl FnMut(Symbol, Sort)) {
        match self {
            Formula::Atom(e) => e.visit_symbols(&mut |s| f(s, Sort::Bool)),
            Formula::BvLe(a, b) | Formula::BvEq(a, b) => {
                a.visit_symbols(f);
                b.visit_symbols(f);
            }
            Formula::Not(x) => x.visit_symbols(f),
            Formula::And(cs) | Formula::Or(cs) => {
                for c in cs {
                    c.visit_symbols(f);
                }
            }
        }
    }

    pub fn substitute(&self, v: &Valuation) -> Formula {
        match self {
            Formula::Atom(e) => Formula::Atom(e.substitute(v)),
            Formula::BvLe(a, b) => Formula::BvLe(a.substitute(v), b.substitute(v)),
            Formula::BvEq(a, b) => Formula::BvEq(a.substitute(v), b.substitute(v)),
            Formula::Not(f) => Formula::not(f.substitute(v)),
            Formula::And(cs) => Formula::and_all(cs.iter().map(|c| c.substitute(v))),
            Formula::Or(cs) => Formula::or_all(cs.iter().map(|c| c.substitute(v))),
        }
    }

    pub fn to_smt(&self) -> String {
        match self {
            Formula::Atom(e) => e.to_smt(),
            Formula::BvLe(a, b) => format!("(bvule {} {})", a.to_smt(), b.to_smt()),
            Formula::BvEq(a, b) => format!("(= {} {})", a.to_smt(), b.to_smt()),
            Formula::Not(f) => format!("(not {})", f.to_smt()),
            Formula::And(cs) if cs.is_empty() => "true".to_string(),
            Formula::Or(cs) if cs.is_empty() => "false".to_string(),
            Formula::And(cs) => nary_formula("and", cs),
            Formula::Or(cs) => nary_formula("or", cs),
        }
    }
}

fn nary_formula(op: &str, cs: &[Formula]) -> String {
    let mut s = format!("({op}");
    for c in cs {
        s.push(' ');
        s.push_str(&c.to_smt());
    }
    s.push(')');
    s
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(e) => write!(f, "{e}"),
            Formula::BvLe(a, b) => write!(f, "({a} <= {b})"),
            Formula::BvEq(a, b) => write!(f, "({a} == {b})"),
            Formula::Not(x) => write!(f, "!{x}"),
            Formula::And(cs) | Formula::Or(cs) => {
                let sep = if matches!(self, Formula::And(_)) { " && " } else { " || " };
                f.write_str("(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl Serialize for Formula {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_smt())
    }
}
