//! Symbols, expression handles and the hash-consed atom table.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use super::SymError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub u32);

impl SymbolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomId(pub u32);

impl AtomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// What a symbol stands for. The kind fixes how the symbol behaves under
/// time differentiation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    Coordinate,
    Velocity,
    Acceleration,
    ContactCoordinate,
    ContactVelocity,
    ContactAcceleration,
    Parameter,
    ExternalForce,
    Time,
}

#[derive(Clone, Debug)]
pub struct Symbol {
    pub id: SymbolId,
    pub name: String,
    pub kind: SymbolKind,
    /// Symbol standing for the time derivative of this one, when linked.
    pub rate: Option<SymbolId>,
}

/// Unsigned reference used as an atom operand.
#[derive(Clone, Copy, Debug)]
pub enum Operand {
    Const(f64),
    Sym(SymbolId),
    Atom(AtomId),
}

impl Operand {
    fn key(&self) -> (u8, u64) {
        match *self {
            Operand::Const(v) => (0, v.to_bits()),
            Operand::Sym(s) => (1, s.0 as u64),
            Operand::Atom(a) => (2, a.0 as u64),
        }
    }
}

impl PartialEq for Operand {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Operand {}
impl Hash for Operand {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}
impl PartialOrd for Operand {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Operand {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryFn {
    Sin,
    Cos,
    Sqrt,
    Abs,
    /// Power with a literal exponent (stored as bits so the node hashes).
    Pow(u64),
    Neg,
}

impl UnaryFn {
    pub fn pow(exponent: f64) -> Self {
        UnaryFn::Pow(exponent.to_bits())
    }
}

/// Definition of one atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Binary(BinOp, Operand, Operand),
    Unary(UnaryFn, Operand),
}

impl Node {
    pub fn operands(&self) -> impl Iterator<Item = Operand> {
        let (a, b) = match *self {
            Node::Binary(_, a, b) => (a, Some(b)),
            Node::Unary(_, a) => (a, None),
        };
        std::iter::once(a).chain(b)
    }
}

/// Handle to a symbolic expression: a literal, or a possibly negated symbol
/// or atom. Negation is carried on the handle and costs no atom.
#[derive(Clone, Copy, Debug)]
pub enum Expr {
    Const(f64),
    Sym(SymbolId, bool),
    Atom(AtomId, bool),
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (*self, *other) {
            (Expr::Const(a), Expr::Const(b)) => a.to_bits() == b.to_bits(),
            (Expr::Sym(a, na), Expr::Sym(b, nb)) => a == b && na == nb,
            (Expr::Atom(a, na), Expr::Atom(b, nb)) => a == b && na == nb,
            _ => false,
        }
    }
}
impl Eq for Expr {}

impl Expr {
    pub const ZERO: Expr = Expr::Const(0.0);
    pub const ONE: Expr = Expr::Const(1.0);

    pub fn c(v: f64) -> Expr {
        Expr::Const(if v == 0.0 { 0.0 } else { v })
    }

    pub fn sym(s: SymbolId) -> Expr {
        Expr::Sym(s, false)
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self {
            Expr::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self, Expr::Const(v) if v == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(*self, Expr::Const(v) if v == 1.0)
    }

    pub fn atom(&self) -> Option<AtomId> {
        match *self {
            Expr::Atom(a, _) => Some(a),
            _ => None,
        }
    }

    pub fn negated(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::c(-v),
            Expr::Sym(s, n) => Expr::Sym(s, !n),
            Expr::Atom(a, n) => Expr::Atom(a, !n),
        }
    }

    /// Split into sign and unsigned operand.
    pub(crate) fn split(self) -> (bool, Operand) {
        match self {
            Expr::Const(v) => (false, Operand::Const(v)),
            Expr::Sym(s, n) => (n, Operand::Sym(s)),
            Expr::Atom(a, n) => (n, Operand::Atom(a)),
        }
    }

    pub(crate) fn from_operand(op: Operand, neg: bool) -> Expr {
        let e = match op {
            Operand::Const(v) => Expr::c(v),
            Operand::Sym(s) => Expr::Sym(s, false),
            Operand::Atom(a) => Expr::Atom(a, false),
        };
        if neg {
            e.negated()
        } else {
            e
        }
    }
}

/// Symbol registry plus the append-only atom table. All symbolic
/// construction goes through a `Model`.
#[derive(Clone, Debug, Default)]
pub struct Model {
    symbols: Vec<Symbol>,
    by_name: HashMap<String, SymbolId>,
    atoms: Vec<Node>,
    index: HashMap<Node, AtomId>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    // ---- symbols -------------------------------------------------------

    pub fn make_symbol(&mut self, name: &str, kind: SymbolKind) -> Result<SymbolId, SymError> {
        if self.by_name.contains_key(name) {
            return Err(SymError::DuplicateSymbol(name.to_string()));
        }
        let id = SymbolId(self.symbols.len() as u32);
        self.symbols.push(Symbol {
            id,
            name: name.to_string(),
            kind,
            rate: None,
        });
        self.by_name.insert(name.to_string(), id);

        // "dX" registered as the rate of "X" links automatically.
        if let Some(base) = name.strip_prefix('d') {
            if let Some(&src) = self.by_name.get(base) {
                let src_kind = self.symbols[src.index()].kind;
                let links = matches!(
                    (src_kind, kind),
                    (SymbolKind::Coordinate, SymbolKind::Velocity)
                        | (SymbolKind::Velocity, SymbolKind::Acceleration)
                        | (SymbolKind::ContactCoordinate, SymbolKind::ContactVelocity)
                        | (SymbolKind::ContactVelocity, SymbolKind::ContactAcceleration)
                );
                if links && self.symbols[src.index()].rate.is_none() {
                    self.symbols[src.index()].rate = Some(id);
                }
            }
        }
        Ok(id)
    }

    /// Registers `name`, `dname` and `ddname` as coordinate, velocity and
    /// acceleration. Returns the three ids.
    pub fn coordinate(&mut self, name: &str) -> Result<[SymbolId; 3], SymError> {
        let q = self.make_symbol(name, SymbolKind::Coordinate)?;
        let dq = self.make_symbol(&format!("d{name}"), SymbolKind::Velocity)?;
        let ddq = self.make_symbol(&format!("dd{name}"), SymbolKind::Acceleration)?;
        self.set_rate(q, dq);
        self.set_rate(dq, ddq);
        Ok([q, dq, ddq])
    }

    /// Contact-coordinate analogue of [`Model::coordinate`].
    pub fn contact_coordinate(&mut self, name: &str) -> Result<[SymbolId; 3], SymError> {
        let s = self.make_symbol(name, SymbolKind::ContactCoordinate)?;
        let ds = self.make_symbol(&format!("d{name}"), SymbolKind::ContactVelocity)?;
        let dds = self.make_symbol(&format!("dd{name}"), SymbolKind::ContactAcceleration)?;
        self.set_rate(s, ds);
        self.set_rate(ds, dds);
        Ok([s, ds, dds])
    }

    pub fn parameter(&mut self, name: &str) -> Result<SymbolId, SymError> {
        self.make_symbol(name, SymbolKind::Parameter)
    }

    pub fn set_rate(&mut self, of: SymbolId, rate: SymbolId) {
        self.symbols[of.index()].rate = Some(rate);
    }

    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id.index()]
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn lookup(&self, name: &str) -> Option<SymbolId> {
        self.by_name.get(name).copied()
    }

    pub fn time(&mut self) -> SymbolId {
        match self.lookup("t") {
            Some(t) => t,
            None => self.make_symbol("t", SymbolKind::Time).expect("t is free"),
        }
    }

    pub fn symbol_count(&self) -> usize {
        self.symbols.len()
    }

    // ---- atoms ---------------------------------------------------------

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn node(&self, a: AtomId) -> &Node {
        &self.atoms[a.index()]
    }

    fn intern(&mut self, node: Node) -> AtomId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = AtomId(self.atoms.len() as u32);
        self.atoms.push(node);
        self.index.insert(node, id);
        id
    }

    fn atom_expr(&mut self, node: Node, neg: bool) -> Expr {
        Expr::Atom(self.intern(node), neg)
    }

    /// Materializes a possibly negated handle as an unsigned operand,
    /// creating a `Neg` atom only when unavoidable.
    fn operand_of(&mut self, e: Expr) -> Operand {
        match e.split() {
            (false, op) => op,
            (true, op) => Operand::Atom(self.intern(Node::Unary(UnaryFn::Neg, op))),
        }
    }

    pub fn binop(&mut self, op: BinOp, a: Expr, b: Expr) -> Result<Expr, SymError> {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return match op {
                BinOp::Add => Ok(Expr::c(x + y)),
                BinOp::Sub => Ok(Expr::c(x - y)),
                BinOp::Mul => Ok(Expr::c(x * y)),
                BinOp::Div if y == 0.0 => Err(SymError::DivisionByZero),
                BinOp::Div => Ok(Expr::c(x / y)),
            };
        }
        Ok(match op {
            BinOp::Add => self.add(a, b),
            BinOp::Sub => self.sub(a, b),
            BinOp::Mul => self.mul(a, b),
            BinOp::Div => self.div(a, b)?,
        })
    }

    pub fn add(&mut self, a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Expr::c(x + y);
        }
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        if a == b.negated() {
            return Expr::ZERO;
        }
        let (na, oa) = a.split();
        let (nb, ob) = b.split();
        match (na, nb) {
            (false, false) => {
                let (x, y) = if oa <= ob { (oa, ob) } else { (ob, oa) };
                self.atom_expr(Node::Binary(BinOp::Add, x, y), false)
            }
            (true, true) => {
                let (x, y) = if oa <= ob { (oa, ob) } else { (ob, oa) };
                self.atom_expr(Node::Binary(BinOp::Add, x, y), true)
            }
            (false, true) => self.sub_unsigned(oa, ob),
            (true, false) => self.sub_unsigned(ob, oa),
        }
    }

    /// `x - y` for unsigned operands, canonicalized so the lower-keyed
    /// operand comes first.
    fn sub_unsigned(&mut self, x: Operand, y: Operand) -> Expr {
        if x <= y {
            self.atom_expr(Node::Binary(BinOp::Sub, x, y), false)
        } else {
            self.atom_expr(Node::Binary(BinOp::Sub, y, x), true)
        }
    }

    pub fn sub(&mut self, a: Expr, b: Expr) -> Expr {
        self.add(a, b.negated())
    }

    pub fn neg(&mut self, a: Expr) -> Expr {
        a.negated()
    }

    pub fn mul(&mut self, a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Expr::c(x * y);
        }
        if a.is_zero() || b.is_zero() {
            return Expr::ZERO;
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        if a.as_const() == Some(-1.0) {
            return b.negated();
        }
        if b.as_const() == Some(-1.0) {
            return a.negated();
        }
        let (na, oa) = a.split();
        let (nb, ob) = b.split();
        let (oa, na) = normalize_const(oa, na);
        let (ob, nb) = normalize_const(ob, nb);
        let (x, y) = if oa <= ob { (oa, ob) } else { (ob, oa) };
        self.atom_expr(Node::Binary(BinOp::Mul, x, y), na ^ nb)
    }

    pub fn div(&mut self, a: Expr, b: Expr) -> Result<Expr, SymError> {
        if b.is_zero() {
            return Err(SymError::DivisionByZero);
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Ok(Expr::c(x / y));
        }
        if a.is_zero() {
            return Ok(Expr::ZERO);
        }
        if b.is_one() {
            return Ok(a);
        }
        if b.as_const() == Some(-1.0) {
            return Ok(a.negated());
        }
        let (na, oa) = a.split();
        let (nb, ob) = b.split();
        let (oa, na) = normalize_const(oa, na);
        let (ob, nb) = normalize_const(ob, nb);
        Ok(self.atom_expr(Node::Binary(BinOp::Div, oa, ob), na ^ nb))
    }

    pub fn unary(&mut self, f: UnaryFn, a: Expr) -> Result<Expr, SymError> {
        if let Some(x) = a.as_const() {
            return match f {
                UnaryFn::Sin => Ok(Expr::c(x.sin())),
                UnaryFn::Cos => Ok(Expr::c(x.cos())),
                UnaryFn::Sqrt if x < 0.0 => Err(SymError::SqrtOfNegative(x)),
                UnaryFn::Sqrt => Ok(Expr::c(x.sqrt())),
                UnaryFn::Abs => Ok(Expr::c(x.abs())),
                UnaryFn::Pow(bits) => Ok(Expr::c(x.powf(f64::from_bits(bits)))),
                UnaryFn::Neg => Ok(Expr::c(-x)),
            };
        }
        let (neg, op) = a.split();
        Ok(match f {
            UnaryFn::Neg => a.negated(),
            // odd/even parity only; no other identities
            UnaryFn::Sin => self.atom_expr(Node::Unary(UnaryFn::Sin, op), neg),
            UnaryFn::Cos => self.atom_expr(Node::Unary(UnaryFn::Cos, op), false),
            UnaryFn::Abs => self.atom_expr(Node::Unary(UnaryFn::Abs, op), false),
            UnaryFn::Pow(bits) => {
                let p = f64::from_bits(bits);
                if p == 0.0 {
                    return Ok(Expr::ONE);
                }
                if p == 1.0 {
                    return Ok(a);
                }
                if neg && p.fract() == 0.0 {
                    let odd = (p as i64).rem_euclid(2) == 1;
                    self.atom_expr(Node::Unary(f, op), odd)
                } else {
                    let op = self.operand_of(a);
                    self.atom_expr(Node::Unary(f, op), false)
                }
            }
            UnaryFn::Sqrt => {
                let op = self.operand_of(a);
                self.atom_expr(Node::Unary(UnaryFn::Sqrt, op), false)
            }
        })
    }

    pub fn sin(&mut self, a: Expr) -> Expr {
        self.unary(UnaryFn::Sin, a).expect("sin is total")
    }

    pub fn cos(&mut self, a: Expr) -> Expr {
        self.unary(UnaryFn::Cos, a).expect("cos is total")
    }

    pub fn abs(&mut self, a: Expr) -> Expr {
        self.unary(UnaryFn::Abs, a).expect("abs is total")
    }

    pub fn sqrt(&mut self, a: Expr) -> Result<Expr, SymError> {
        self.unary(UnaryFn::Sqrt, a)
    }

    pub fn powf(&mut self, a: Expr, p: f64) -> Result<Expr, SymError> {
        self.unary(UnaryFn::pow(p), a)
    }

    pub fn square(&mut self, a: Expr) -> Expr {
        self.mul(a, a)
    }

    /// Sum of a sequence, left to right.
    pub fn sum<I: IntoIterator<Item = Expr>>(&mut self, items: I) -> Expr {
        let mut acc = Expr::ZERO;
        for e in items {
            acc = self.add(acc, e);
        }
        acc
    }

    /// Human-readable rendering of an operand (symbol names, `atomN`).
    pub fn operand_name(&self, op: Operand) -> String {
        match op {
            Operand::Const(v) => fmt_const(v),
            Operand::Sym(s) => self.symbols[s.index()].name.clone(),
            Operand::Atom(a) => format!("atom{}", a.0),
        }
    }

    pub fn expr_name(&self, e: Expr) -> String {
        let (neg, op) = e.split();
        let body = self.operand_name(op);
        if neg {
            format!("-{body}")
        } else {
            body
        }
    }
}

/// Constant operands are kept non-negative; their sign moves to the handle.
fn normalize_const(op: Operand, neg: bool) -> (Operand, bool) {
    match op {
        Operand::Const(v) if v < 0.0 => (Operand::Const(-v), !neg),
        other => (other, neg),
    }
}

pub(crate) fn fmt_const(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v:e}")
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
        })
    }
}

impl fmt::Display for UnaryFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnaryFn::Sin => f.write_str("sin"),
            UnaryFn::Cos => f.write_str("cos"),
            UnaryFn::Sqrt => f.write_str("sqrt"),
            UnaryFn::Abs => f.write_str("abs"),
            UnaryFn::Pow(_) => f.write_str("pow"),
            UnaryFn::Neg => f.write_str("neg"),
        }
    }
}
