//! Straight-line evaluation tapes exported from atomized expressions.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::diff::{apply_binary, apply_unary};
use super::expr::{fmt_const, AtomId, BinOp, Expr, Model, Node, Operand, SymbolId, UnaryFn};
use super::SymError;

/// Where an instruction reads a value from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Src {
    Input(u32),
    Reg(u32),
    Const(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Instr {
    Bin(BinOp, Src, Src),
    Un(UnaryFn, Src),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutSlot {
    pub src: Src,
    pub neg: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TapeStats {
    pub atoms: usize,
    pub operations: usize,
}

/// Result flags of one evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalStatus {
    pub non_finite: bool,
}

/// Immutable compiled function: instruction `k` writes register `k`.
#[derive(Clone, Debug)]
pub struct Tape {
    pub name: String,
    pub inputs: Vec<SymbolId>,
    pub rows: usize,
    pub cols: usize,
    instrs: Vec<Instr>,
    outputs: Vec<OutSlot>,
    /// Atom behind each register, kept for dumps.
    reg_atoms: Vec<AtomId>,
    input_names: Vec<String>,
    pub stats: TapeStats,
}

impl Model {
    /// Compiles `outputs` (row-major, `rows × cols`) into a tape reading
    /// `inputs`. Dead atoms are pruned; register order follows atom order.
    pub fn export_tape(
        &self,
        name: &str,
        outputs: &[Expr],
        rows: usize,
        cols: usize,
        inputs: &[SymbolId],
    ) -> Result<Tape, SymError> {
        assert_eq!(outputs.len(), rows * cols, "output shape mismatch");
        let input_index: HashMap<SymbolId, u32> = inputs
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, i as u32))
            .collect();
        let free: Vec<String> = self
            .free_symbols(outputs)
            .into_iter()
            .filter(|s| !input_index.contains_key(s))
            .map(|s| self.symbol(s).name.clone())
            .collect();
        if !free.is_empty() {
            return Err(SymError::FreeSymbols {
                tape: name.to_string(),
                symbols: free,
            });
        }
        let atoms = self.reachable_atoms(outputs);
        let reg_of: HashMap<AtomId, u32> = atoms
            .iter()
            .enumerate()
            .map(|(i, &a)| (a, i as u32))
            .collect();
        let src = |op: Operand| match op {
            Operand::Const(v) => Src::Const(v),
            Operand::Sym(s) => Src::Input(input_index[&s]),
            Operand::Atom(a) => Src::Reg(reg_of[&a]),
        };
        let instrs: Vec<Instr> = atoms
            .iter()
            .map(|&a| match *self.node(a) {
                Node::Binary(op, x, y) => Instr::Bin(op, src(x), src(y)),
                Node::Unary(f, x) => Instr::Un(f, src(x)),
            })
            .collect();
        let outs = outputs
            .iter()
            .map(|&e| {
                let (neg, op) = e.split();
                OutSlot { src: src(op), neg }
            })
            .collect();
        let stats = TapeStats {
            atoms: atoms.len(),
            operations: instrs.len(),
        };
        Ok(Tape {
            name: name.to_string(),
            inputs: inputs.to_vec(),
            rows,
            cols,
            instrs,
            outputs: outs,
            reg_atoms: atoms,
            input_names: inputs
                .iter()
                .map(|&s| self.symbol(s).name.clone())
                .collect(),
            stats,
        })
    }
}

impl Tape {
    pub fn instructions(&self) -> &[Instr] {
        &self.instrs
    }

    pub fn output_slots(&self) -> &[OutSlot] {
        &self.outputs
    }

    pub fn register_count(&self) -> usize {
        self.instrs.len()
    }

    pub fn output_len(&self) -> usize {
        self.outputs.len()
    }

    /// Straight-line evaluation. `regs` must hold at least
    /// [`Tape::register_count`] slots and `out` exactly `rows * cols`.
    /// Does not allocate.
    pub fn eval_into(&self, inputs: &[f64], regs: &mut [f64], out: &mut [f64]) -> EvalStatus {
        debug_assert!(inputs.len() >= self.inputs.len());
        debug_assert_eq!(out.len(), self.outputs.len());
        #[inline(always)]
        fn fetch(s: Src, inputs: &[f64], regs: &[f64]) -> f64 {
            match s {
                Src::Input(i) => inputs[i as usize],
                Src::Reg(r) => regs[r as usize],
                Src::Const(v) => v,
            }
        }
        for (k, ins) in self.instrs.iter().enumerate() {
            let v = match *ins {
                Instr::Bin(op, a, b) => {
                    apply_binary(op, fetch(a, inputs, regs), fetch(b, inputs, regs))
                }
                Instr::Un(f, a) => apply_unary(f, fetch(a, inputs, regs)),
            };
            regs[k] = v;
        }
        let mut status = EvalStatus::default();
        for (o, slot) in out.iter_mut().zip(&self.outputs) {
            let v = fetch(slot.src, inputs, regs);
            *o = if slot.neg { -v } else { v };
            if !o.is_finite() {
                status.non_finite = true;
            }
        }
        status
    }

    /// Convenience evaluation with fresh buffers.
    pub fn eval(&self, inputs: &[f64]) -> (Vec<f64>, EvalStatus) {
        let mut regs = vec![0.0; self.register_count()];
        let mut out = vec![0.0; self.output_len()];
        let st = self.eval_into(inputs, &mut regs, &mut out);
        (out, st)
    }

    fn src_name(&self, s: Src) -> String {
        match s {
            Src::Input(i) => self.input_names[i as usize].clone(),
            Src::Reg(r) => format!("atom{}", self.reg_atoms[r as usize].0),
            Src::Const(v) => fmt_const(v),
        }
    }

    /// Debug dump: `atomN = op(args)` lines, `OUT[i,j] = ...` lines and an
    /// `atoms=<n> ops=<m>` footer.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (k, ins) in self.instrs.iter().enumerate() {
            let lhs = format!("atom{}", self.reg_atoms[k].0);
            let rhs = match *ins {
                Instr::Bin(op, a, b) => format!("{op}({}, {})", self.src_name(a), self.src_name(b)),
                Instr::Un(UnaryFn::Pow(bits), a) => {
                    format!(
                        "pow({}, {})",
                        self.src_name(a),
                        fmt_const(f64::from_bits(bits))
                    )
                }
                Instr::Un(f, a) => format!("{f}({})", self.src_name(a)),
            };
            let _ = writeln!(s, "{lhs} = {rhs}");
        }
        for (idx, slot) in self.outputs.iter().enumerate() {
            let (i, j) = (idx / self.cols.max(1), idx % self.cols.max(1));
            let sign = if slot.neg { "-" } else { "" };
            let _ = writeln!(s, "OUT[{i},{j}] = {sign}{}", self.src_name(slot.src));
        }
        let _ = writeln!(
            s,
            "atoms={} ops={}",
            self.stats.atoms, self.stats.operations
        );
        s
    }

    /// C-like source rendering for inspection.
    pub fn to_c(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "void {}(const double *in, double *_out) {{", self.name);
        for (k, ins) in self.instrs.iter().enumerate() {
            let lhs = format!("atom{}", self.reg_atoms[k].0);
            let rhs = match *ins {
                Instr::Bin(op, a, b) => {
                    let sym = match op {
                        BinOp::Add => "+",
                        BinOp::Sub => "-",
                        BinOp::Mul => "*",
                        BinOp::Div => "/",
                    };
                    format!("{} {sym} {}", self.c_src(a), self.c_src(b))
                }
                Instr::Un(UnaryFn::Pow(bits), a) => {
                    format!(
                        "pow({}, {})",
                        self.c_src(a),
                        fmt_const(f64::from_bits(bits))
                    )
                }
                Instr::Un(UnaryFn::Neg, a) => format!("-{}", self.c_src(a)),
                Instr::Un(UnaryFn::Abs, a) => format!("fabs({})", self.c_src(a)),
                Instr::Un(f, a) => format!("{f}({})", self.c_src(a)),
            };
            let _ = writeln!(s, "    double {lhs} = {rhs};");
        }
        for (idx, slot) in self.outputs.iter().enumerate() {
            let sign = if slot.neg { "-" } else { "" };
            let _ = writeln!(s, "    _out[{idx}] = {sign}{};", self.c_src(slot.src));
        }
        s.push_str("}\n");
        s
    }

    fn c_src(&self, s: Src) -> String {
        match s {
            Src::Input(i) => format!("in[{i}] /* {} */", self.input_names[i as usize]),
            _ => self.src_name(s),
        }
    }
}

/// Tape plus owned scratch buffers, for repeated evaluation without
/// allocation.
#[derive(Clone, Debug)]
pub struct TapeRunner {
    pub tape: Tape,
    regs: Vec<f64>,
    pub out: Vec<f64>,
}

impl TapeRunner {
    pub fn new(tape: Tape) -> Self {
        let regs = vec![0.0; tape.register_count()];
        let out = vec![0.0; tape.output_len()];
        Self { tape, regs, out }
    }

    pub fn run(&mut self, inputs: &[f64]) -> EvalStatus {
        self.tape.eval_into(inputs, &mut self.regs, &mut self.out)
    }

    /// Output entry `(i, j)` of the last evaluation.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.out[i * self.tape.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::SymbolKind;

    #[test]
    fn literal_export_has_no_instructions() {
        let m = Model::new();
        let t = m.export_tape("k", &[Expr::c(3.5)], 1, 1, &[]).unwrap();
        assert_eq!(t.instructions().len(), 0);
        assert_eq!(t.eval(&[]).0, vec![3.5]);
    }

    #[test]
    fn free_symbols_rejected_unused_inputs_allowed() {
        let mut m = Model::new();
        let x = m.make_symbol("x", SymbolKind::Coordinate).unwrap();
        let y = m.make_symbol("y", SymbolKind::Coordinate).unwrap();
        let z = m.make_symbol("z", SymbolKind::Coordinate).unwrap();
        let e = m.mul(Expr::sym(x), Expr::sym(y));
        let err = m.export_tape("f", &[e], 1, 1, &[x]).unwrap_err();
        assert!(
            matches!(err, SymError::FreeSymbols { ref symbols, .. } if symbols == &vec!["y".to_string()])
        );
        let t = m.export_tape("f", &[e], 1, 1, &[x, y, z]).unwrap();
        assert_eq!(t.eval(&[2.0, 3.0, 7.0]).0, vec![6.0]);
    }

    #[test]
    fn non_finite_is_flagged() {
        let mut m = Model::new();
        let x = m.make_symbol("x", SymbolKind::Coordinate).unwrap();
        let e = m.div(Expr::ONE, Expr::sym(x)).unwrap();
        let t = m.export_tape("inv", &[e], 1, 1, &[x]).unwrap();
        let (v, st) = t.eval(&[0.0]);
        assert!(st.non_finite);
        assert!(v[0].is_infinite());
    }

    #[test]
    fn dump_format() {
        let mut m = Model::new();
        let th = m.make_symbol("theta2", SymbolKind::Coordinate).unwrap();
        let s = m.sin(Expr::sym(th));
        let t = m.export_tape("f", &[s, s.negated()], 1, 2, &[th]).unwrap();
        let d = t.dump();
        assert!(d.contains("atom0 = sin(theta2)"));
        assert!(d.contains("OUT[0,1] = -atom0"));
        assert!(d.trim_end().ends_with("atoms=1 ops=1"));
        assert!(t.to_c().contains("sin(in[0]"));
    }
}
