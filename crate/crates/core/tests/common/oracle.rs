use railsym::symcore::{Expr, Model, SymbolId, SymbolKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Plain recursive expression, used as an oracle independent of the atom table.
#[derive(Clone, Debug)]
pub enum Ref {
    C(f64),
    V(usize),
    Add(Box<Ref>, Box<Ref>),
    Sub(Box<Ref>, Box<Ref>),
    Mul(Box<Ref>, Box<Ref>),
    /// a / (b² + 1)
    SafeDiv(Box<Ref>, Box<Ref>),
    Sin(Box<Ref>),
    Cos(Box<Ref>),
    /// sqrt(|a| + 1)
    SafeSqrt(Box<Ref>),
    /// (|a| + 0.5)^p
    SafePow(Box<Ref>, f64),
    Neg(Box<Ref>),
}

impl Ref {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Ref::C(v) => *v,
            Ref::V(i) => x[*i],
            Ref::Add(a, b) => a.eval(x) + b.eval(x),
            Ref::Sub(a, b) => a.eval(x) - b.eval(x),
            Ref::Mul(a, b) => a.eval(x) * b.eval(x),
            Ref::SafeDiv(a, b) => {
                let d = b.eval(x);
                a.eval(x) / (d * d + 1.0)
            }
            Ref::Sin(a) => a.eval(x).sin(),
            Ref::Cos(a) => a.eval(x).cos(),
            Ref::SafeSqrt(a) => (a.eval(x).abs() + 1.0).sqrt(),
            Ref::SafePow(a, p) => (a.eval(x).abs() + 0.5).powf(*p),
            Ref::Neg(a) => -a.eval(x),
        }
    }

    pub fn build(&self, m: &mut Model, syms: &[SymbolId]) -> Expr {
        match self {
            Ref::C(v) => Expr::c(*v),
            Ref::V(i) => Expr::sym(syms[*i]),
            Ref::Add(a, b) => {
                let (a, b) = (a.build(m, syms), b.build(m, syms));
                m.add(a, b)
            }
            Ref::Sub(a, b) => {
                let (a, b) = (a.build(m, syms), b.build(m, syms));
                m.sub(a, b)
            }
            Ref::Mul(a, b) => {
                let (a, b) = (a.build(m, syms), b.build(m, syms));
                m.mul(a, b)
            }
            Ref::SafeDiv(a, b) => {
                let (a, b) = (a.build(m, syms), b.build(m, syms));
                let b2 = m.mul(b, b);
                let d = m.add(b2, Expr::ONE);
                m.div(a, d).unwrap()
            }
            Ref::Sin(a) => {
                let a = a.build(m, syms);
                m.sin(a)
            }
            Ref::Cos(a) => {
                let a = a.build(m, syms);
                m.cos(a)
            }
            Ref::SafeSqrt(a) => {
                let a = a.build(m, syms);
                let a = m.abs(a);
                let a = m.add(a, Expr::ONE);
                m.sqrt(a).unwrap()
            }
            Ref::SafePow(a, p) => {
                let a = a.build(m, syms);
                let a = m.abs(a);
                let a = m.add(a, Expr::c(0.5));
                m.powf(a, *p).unwrap()
            }
            Ref::Neg(a) => {
                let a = a.build(m, syms);
                m.neg(a)
            }
        }
    }

    pub fn has_abs(&self) -> bool {
        match self {
            Ref::C(_) | Ref::V(_) => false,
            Ref::SafeSqrt(_) | Ref::SafePow(..) => true,
            Ref::Add(a, b) | Ref::Sub(a, b) | Ref::Mul(a, b) | Ref::SafeDiv(a, b) => {
                a.has_abs() || b.has_abs()
            }
            Ref::Sin(a) | Ref::Cos(a) | Ref::Neg(a) => a.has_abs(),
        }
    }
}

/// Random DAG: new nodes pick operands from a pool of earlier nodes, so
/// sub-expressions are reused.
pub fn random_dag(rng: &mut ChaCha8Rng, nvars: usize, nodes: usize, smooth: bool) -> Vec<Ref> {
    let mut pool: Vec<Ref> = (0..nvars).map(Ref::V).collect();
    pool.push(Ref::C(rng.gen_range(-2.0..2.0)));
    for _ in 0..nodes {
        let a = Box::new(pool[rng.gen_range(0..pool.len())].clone());
        let b = Box::new(pool[rng.gen_range(0..pool.len())].clone());
        let kinds = if smooth { 8 } else { 10 };
        let r = match rng.gen_range(0..kinds) {
            0 => Ref::Add(a, b),
            1 => Ref::Sub(a, b),
            2 => Ref::Mul(a, b),
            3 => Ref::SafeDiv(a, b),
            4 => Ref::Sin(a),
            5 => Ref::Cos(a),
            6 => Ref::Neg(a),
            7 => Ref::Mul(a, Box::new(Ref::C(rng.gen_range(-1.5..1.5)))),
            8 => Ref::SafeSqrt(a),
            _ => Ref::SafePow(a, [0.5, 1.5, 2.0, 3.0][rng.gen_range(0..4)]),
        };
        // keep magnitudes tame: products of products explode quickly
        if r.eval(&vec![1.3; nvars]).abs() < 1e6 {
            pool.push(r);
        }
    }
    pool
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn symbols(m: &mut Model, n: usize) -> Vec<SymbolId> {
    (0..n)
        .map(|i| {
            m.make_symbol(&format!("x{i}"), SymbolKind::Coordinate)
                .unwrap()
        })
        .collect()
}
