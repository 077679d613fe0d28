//! Differentiation, substitution and numeric evaluation working directly on
//! the atomized form. Each pass walks the reachable atoms in id order, which
//! is a topological order because the table is append-only.

use std::collections::{HashMap, HashSet};

use super::expr::{AtomId, BinOp, Expr, Model, Node, Operand, SymbolId, SymbolKind, UnaryFn};
use super::SymError;

impl Model {
    /// Atoms reachable from `roots`, sorted ascending (operands first).
    pub fn reachable_atoms(&self, roots: &[Expr]) -> Vec<AtomId> {
        let mut seen: HashSet<AtomId> = HashSet::new();
        let mut stack: Vec<AtomId> = roots.iter().filter_map(|e| e.atom()).collect();
        while let Some(a) = stack.pop() {
            if !seen.insert(a) {
                continue;
            }
            for op in self.node(a).operands() {
                if let Operand::Atom(b) = op {
                    if !seen.contains(&b) {
                        stack.push(b);
                    }
                }
            }
        }
        let mut out: Vec<AtomId> = seen.into_iter().collect();
        out.sort_unstable();
        out
    }

    /// Symbols appearing anywhere under `roots`.
    pub fn free_symbols(&self, roots: &[Expr]) -> Vec<SymbolId> {
        let mut set: HashSet<SymbolId> = roots
            .iter()
            .filter_map(|e| match *e {
                Expr::Sym(s, _) => Some(s),
                _ => None,
            })
            .collect();
        for a in self.reachable_atoms(roots) {
            for op in self.node(a).operands() {
                if let Operand::Sym(s) = op {
                    set.insert(s);
                }
            }
        }
        let mut v: Vec<_> = set.into_iter().collect();
        v.sort_unstable();
        v
    }

    /// Forward-mode derivative of every root, where the derivative of each
    /// leaf symbol is supplied by `leaf`. Per-atom results are memoized so a
    /// shared atom is differentiated once.
    pub fn derive_with<F>(
        &mut self,
        roots: &[Expr],
        atoms: &[AtomId],
        mut leaf: F,
    ) -> Result<Vec<Expr>, SymError>
    where
        F: FnMut(&mut Model, SymbolId) -> Result<Expr, SymError>,
    {
        let mut memo: HashMap<AtomId, Expr> = HashMap::with_capacity(atoms.len());
        let mut leaf_memo: HashMap<SymbolId, Expr> = HashMap::new();
        let mut d_operand =
            |m: &mut Model, memo: &HashMap<AtomId, Expr>, op: Operand| -> Result<Expr, SymError> {
                Ok(match op {
                    Operand::Const(_) => Expr::ZERO,
                    Operand::Atom(a) => memo.get(&a).copied().unwrap_or(Expr::ZERO),
                    Operand::Sym(s) => {
                        if let Some(&d) = leaf_memo.get(&s) {
                            d
                        } else {
                            let d = leaf(m, s)?;
                            leaf_memo.insert(s, d);
                            d
                        }
                    }
                })
            };
        for &a in atoms {
            let node = *self.node(a);
            let this = Expr::Atom(a, false);
            let d = match node {
                Node::Binary(op, x, y) => {
                    let dx = d_operand(self, &memo, x)?;
                    let dy = d_operand(self, &memo, y)?;
                    if dx.is_zero() && dy.is_zero() {
                        Expr::ZERO
                    } else {
                        let ex = Expr::from_operand(x, false);
                        let ey = Expr::from_operand(y, false);
                        match op {
                            BinOp::Add => self.add(dx, dy),
                            BinOp::Sub => self.sub(dx, dy),
                            BinOp::Mul => {
                                let l = self.mul(dx, ey);
                                let r = self.mul(ex, dy);
                                self.add(l, r)
                            }
                            BinOp::Div => {
                                // d(x/y) = (dx - (x/y) dy) / y
                                let t = self.mul(this, dy);
                                let n = self.sub(dx, t);
                                self.div(n, ey)?
                            }
                        }
                    }
                }
                Node::Unary(f, x) => {
                    let dx = d_operand(self, &memo, x)?;
                    if dx.is_zero() {
                        Expr::ZERO
                    } else {
                        let ex = Expr::from_operand(x, false);
                        match f {
                            UnaryFn::Sin => {
                                let c = self.cos(ex);
                                self.mul(c, dx)
                            }
                            UnaryFn::Cos => {
                                let s = self.sin(ex);
                                let t = self.mul(s, dx);
                                t.negated()
                            }
                            UnaryFn::Sqrt => {
                                let den = self.mul(Expr::c(2.0), this);
                                self.div(dx, den)?
                            }
                            UnaryFn::Abs => {
                                let sign = self.div(ex, this)?;
                                self.mul(sign, dx)
                            }
                            UnaryFn::Pow(bits) => {
                                let p = f64::from_bits(bits);
                                let lower = self.powf(ex, p - 1.0)?;
                                let k = self.mul(Expr::c(p), lower);
                                self.mul(k, dx)
                            }
                            UnaryFn::Neg => dx.negated(),
                        }
                    }
                }
            };
            if !d.is_zero() {
                memo.insert(a, d);
            }
        }
        roots
            .iter()
            .map(|&r| {
                let (neg, op) = r.split();
                let d = d_operand(self, &memo, op)?;
                Ok(if neg { d.negated() } else { d })
            })
            .collect()
    }

    /// Partial derivative of `e` with respect to `wrt`.
    pub fn differentiate(&mut self, e: Expr, wrt: SymbolId) -> Expr {
        self.differentiate_all(&[e], wrt).pop().expect("one root")
    }

    pub fn differentiate_all(&mut self, roots: &[Expr], wrt: SymbolId) -> Vec<Expr> {
        let atoms = self.reachable_atoms(roots);
        self.derive_with(roots, &atoms, |_, s| {
            Ok(if s == wrt { Expr::ONE } else { Expr::ZERO })
        })
        .expect("partial differentiation cannot fail")
    }

    /// Jacobian `[∂roots_i/∂wrt_j]`, row-major. The reachable set is shared
    /// across columns.
    pub fn jacobian(&mut self, roots: &[Expr], wrt: &[SymbolId]) -> Vec<Vec<Expr>> {
        let atoms = self.reachable_atoms(roots);
        let mut rows = vec![Vec::with_capacity(wrt.len()); roots.len()];
        for &w in wrt {
            let col = self
                .derive_with(roots, &atoms, |_, s| {
                    Ok(if s == w { Expr::ONE } else { Expr::ZERO })
                })
                .expect("partial differentiation cannot fail");
            for (row, d) in rows.iter_mut().zip(col) {
                row.push(d);
            }
        }
        rows
    }

    /// Total time derivative using each symbol's kind: coordinates map to
    /// their linked rates, parameters and external forces to zero, time to
    /// one.
    pub fn time_derivative(&mut self, e: Expr) -> Result<Expr, SymError> {
        Ok(self.time_derivative_all(&[e])?.pop().expect("one root"))
    }

    pub fn time_derivative_all(&mut self, roots: &[Expr]) -> Result<Vec<Expr>, SymError> {
        let atoms = self.reachable_atoms(roots);
        self.derive_with(roots, &atoms, |m, s| time_rate(m, s))
    }

    /// Time derivative with contact coordinates frozen (ṡ = 0): the rate of
    /// change of a quantity "attached" to the bodies.
    pub fn time_derivative_frozen_contact(
        &mut self,
        roots: &[Expr],
    ) -> Result<Vec<Expr>, SymError> {
        let atoms = self.reachable_atoms(roots);
        self.derive_with(roots, &atoms, |m, s| {
            if m.symbol(s).kind == SymbolKind::ContactCoordinate {
                Ok(Expr::ZERO)
            } else {
                time_rate(m, s)
            }
        })
    }

    /// Replaces symbols according to `bindings`, rebuilding atoms through the
    /// interning constructors so the result stays atomized and folded.
    pub fn substitute(&mut self, e: Expr, bindings: &HashMap<SymbolId, Expr>) -> Expr {
        self.substitute_all(&[e], bindings).pop().expect("one root")
    }

    pub fn substitute_all(
        &mut self,
        roots: &[Expr],
        bindings: &HashMap<SymbolId, Expr>,
    ) -> Vec<Expr> {
        if bindings.is_empty() {
            return roots.to_vec();
        }
        let atoms = self.reachable_atoms(roots);
        let mut memo: HashMap<AtomId, Expr> = HashMap::new();
        let map = |memo: &HashMap<AtomId, Expr>, op: Operand| -> Expr {
            match op {
                Operand::Const(v) => Expr::c(v),
                Operand::Sym(s) => bindings.get(&s).copied().unwrap_or(Expr::Sym(s, false)),
                Operand::Atom(a) => memo.get(&a).copied().unwrap_or(Expr::Atom(a, false)),
            }
        };
        for &a in &atoms {
            let node = *self.node(a);
            let changed = node.operands().any(|op| match op {
                Operand::Sym(s) => bindings.contains_key(&s),
                Operand::Atom(b) => memo.contains_key(&b),
                Operand::Const(_) => false,
            });
            if !changed {
                continue;
            }
            let r = match node {
                Node::Binary(op, x, y) => {
                    let (x, y) = (map(&memo, x), map(&memo, y));
                    match op {
                        BinOp::Div if y.is_zero() => {
                            // substituting a divisor to zero is a modeling error;
                            // keep the original atom so the tape flags NaN at runtime
                            Expr::Atom(a, false)
                        }
                        _ => self.binop(op, x, y).expect("non-zero divisor"),
                    }
                }
                Node::Unary(f, x) => {
                    let x = map(&memo, x);
                    self.unary(f, x).unwrap_or(Expr::Atom(a, false))
                }
            };
            memo.insert(a, r);
        }
        roots
            .iter()
            .map(|&r| {
                let (neg, op) = r.split();
                let v = map(&memo, op);
                if neg {
                    v.negated()
                } else {
                    v
                }
            })
            .collect()
    }

    /// Direct numeric evaluation of expressions (no tape). `values` is
    /// indexed by symbol id.
    pub fn eval(&self, roots: &[Expr], values: &[f64]) -> Vec<f64> {
        let atoms = self.reachable_atoms(roots);
        let mut memo: HashMap<AtomId, f64> = HashMap::with_capacity(atoms.len());
        let get = |memo: &HashMap<AtomId, f64>, op: Operand| match op {
            Operand::Const(v) => v,
            Operand::Sym(s) => values[s.index()],
            Operand::Atom(a) => memo[&a],
        };
        for &a in &atoms {
            let v = match *self.node(a) {
                Node::Binary(op, x, y) => apply_binary(op, get(&memo, x), get(&memo, y)),
                Node::Unary(f, x) => apply_unary(f, get(&memo, x)),
            };
            memo.insert(a, v);
        }
        roots
            .iter()
            .map(|&r| {
                let (neg, op) = r.split();
                let v = get(&memo, op);
                if neg {
                    -v
                } else {
                    v
                }
            })
            .collect()
    }

    pub fn eval_one(&self, e: Expr, values: &[f64]) -> f64 {
        self.eval(&[e], values)[0]
    }
}

fn time_rate(m: &Model, s: SymbolId) -> Result<Expr, SymError> {
    let sym = m.symbol(s);
    match sym.kind {
        SymbolKind::Parameter | SymbolKind::ExternalForce => Ok(Expr::ZERO),
        SymbolKind::Time => Ok(Expr::ONE),
        _ => sym
            .rate
            .map(Expr::sym)
            .ok_or_else(|| SymError::MissingRate(sym.name.clone())),
    }
}

#[inline]
pub(crate) fn apply_binary(op: BinOp, x: f64, y: f64) -> f64 {
    match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div => x / y,
    }
}

#[inline]
pub(crate) fn apply_unary(f: UnaryFn, x: f64) -> f64 {
    match f {
        UnaryFn::Sin => x.sin(),
        UnaryFn::Cos => x.cos(),
        UnaryFn::Sqrt => x.sqrt(),
        UnaryFn::Abs => x.abs(),
        UnaryFn::Pow(bits) => {
            let p = f64::from_bits(bits);
            if p == 2.0 {
                x * x
            } else if p.fract() == 0.0 && p.abs() < 64.0 {
                x.powi(p as i32)
            } else {
                x.powf(p)
            }
        }
        UnaryFn::Neg => -x,
    }
}
