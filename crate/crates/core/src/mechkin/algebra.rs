use crate::symcore::{Expr, Model};

use super::BaseId;

/// 3×3 matrix of expressions, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3(pub [[Expr; 3]; 3]);

impl Mat3 {
    pub fn zero() -> Self {
        Mat3([[Expr::ZERO; 3]; 3])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.0[i][i] = Expr::ONE;
        }
        m
    }

    pub fn from_f64(v: [[f64; 3]; 3]) -> Self {
        Mat3(v.map(|row| row.map(Expr::c)))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    pub fn mul(&self, m: &mut Model, rhs: &Mat3) -> Mat3 {
        let mut out = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                let col = [rhs.0[0][j], rhs.0[1][j], rhs.0[2][j]];
                out.0[i][j] = dot3(m, &self.0[i], &col);
            }
        }
        out
    }

    pub fn apply(&self, m: &mut Model, v: &[Expr; 3]) -> [Expr; 3] {
        [0, 1, 2].map(|i| dot3(m, &self.0[i], v))
    }
}

/// Vector with symbolic components in a given base.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3S {
    pub c: [Expr; 3],
    pub base: BaseId,
}

impl Vec3S {
    pub fn new(c: [Expr; 3], base: BaseId) -> Self {
        Self { c, base }
    }

    pub fn zero(base: BaseId) -> Self {
        Self {
            c: [Expr::ZERO; 3],
            base,
        }
    }

    pub fn from_f64(v: [f64; 3], base: BaseId) -> Self {
        Self {
            c: v.map(Expr::c),
            base,
        }
    }
}

pub(crate) fn dot3(m: &mut Model, a: &[Expr; 3], b: &[Expr; 3]) -> Expr {
    let p0 = m.mul(a[0], b[0]);
    let p1 = m.mul(a[1], b[1]);
    let p2 = m.mul(a[2], b[2]);
    let s = m.add(p0, p1);
    m.add(s, p2)
}

pub(crate) fn cross3(m: &mut Model, a: &[Expr; 3], b: &[Expr; 3]) -> [Expr; 3] {
    let mut c = [Expr::ZERO; 3];
    for (i, (j, k)) in [(1, 2), (2, 0), (0, 1)].into_iter().enumerate() {
        let l = m.mul(a[j], b[k]);
        let r = m.mul(a[k], b[j]);
        c[i] = m.sub(l, r);
    }
    c
}
