//! Bases and points trees with recursive kinematic operators.
//!
//! Orientation and position are described by two independent trees. A base
//! is defined by its rotation relative to a parent base; a point by its
//! position relative to a parent point, with components given in any base.
//! Operators walk the trees through the lowest common ancestor and memoize
//! every partial chain, so quantities sharing a path to the root share atoms.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::symcore::{Expr, Model, SymError};

mod algebra;

pub(crate) use algebra::cross3;
pub use algebra::{Mat3, Vec3S};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BaseId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointId(pub u32);

/// Inertial base (root of the bases tree).
pub const GROUND: BaseId = BaseId(0);
/// Inertial origin (root of the points tree).
pub const ORIGIN: PointId = PointId(0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> [f64; 3] {
        let mut u = [0.0; 3];
        u[self.index()] = 1.0;
        u
    }
}

/// A point plus an orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frame {
    pub point: PointId,
    pub base: BaseId,
}

impl Frame {
    pub const GROUND: Frame = Frame {
        point: ORIGIN,
        base: GROUND,
    };
}

#[derive(Clone, Debug)]
struct BaseDef {
    name: String,
    parent: Option<BaseId>,
    depth: usize,
    /// Components in this base mapped to components in the parent.
    rot: Mat3,
    /// Fixed unit axis and angle, when the rotation is about a fixed axis:
    /// the relative angular velocity is then axis·(d angle/dt).
    fixed_axis: Option<([f64; 3], Expr)>,
}

#[derive(Clone, Debug)]
struct PointDef {
    name: String,
    parent: Option<PointId>,
    depth: usize,
    rel: Vec3S,
}

/// Symbolic mechanics workspace: the expression model plus both trees and
/// the operator caches.
#[derive(Clone, Debug)]
pub struct Mech {
    pub model: Model,
    bases: Vec<BaseDef>,
    points: Vec<PointDef>,
    rot_cache: HashMap<(BaseId, BaseId), Mat3>,
    pos_cache: HashMap<(PointId, PointId, BaseId), [Expr; 3]>,
    omega_edge: HashMap<BaseId, [Expr; 3]>,
    omega_cache: HashMap<(BaseId, BaseId, BaseId), [Expr; 3]>,
    vel_cache: HashMap<(PointId, BaseId, PointId), [Expr; 3]>,
}

impl Default for Mech {
    fn default() -> Self {
        Self::new(Model::new())
    }
}

impl Mech {
    pub fn new(model: Model) -> Self {
        Self {
            model,
            bases: vec![BaseDef {
                name: "ground".into(),
                parent: None,
                depth: 0,
                rot: Mat3::identity(),
                fixed_axis: None,
            }],
            points: vec![PointDef {
                name: "origin".into(),
                parent: None,
                depth: 0,
                rel: Vec3S::zero(GROUND),
            }],
            rot_cache: HashMap::new(),
            pos_cache: HashMap::new(),
            omega_edge: HashMap::new(),
            omega_cache: HashMap::new(),
            vel_cache: HashMap::new(),
        }
    }

    // ---- construction ---------------------------------------------------

    /// New base from an arbitrary relative rotation matrix (components in the
    /// new base → components in `parent`).
    pub fn new_base(&mut self, name: &str, parent: BaseId, rot: Mat3) -> BaseId {
        self.push_base(name, parent, rot, None)
    }

    /// Elementary rotation of `angle` about one of the parent's axes.
    pub fn rotated_base(&mut self, name: &str, parent: BaseId, axis: Axis, angle: Expr) -> BaseId {
        let m = &mut self.model;
        let c = m.cos(angle);
        let s = m.sin(angle);
        let (o, z) = (Expr::ONE, Expr::ZERO);
        let ns = s.negated();
        let rot = match axis {
            Axis::X => Mat3([[o, z, z], [z, c, ns], [z, s, c]]),
            Axis::Y => Mat3([[c, z, s], [z, o, z], [ns, z, c]]),
            Axis::Z => Mat3([[c, ns, z], [s, c, z], [z, z, o]]),
        };
        self.push_base(name, parent, rot, Some((axis.unit(), angle)))
    }

    /// Rotation parametrized by Euler parameters `(e0, e1, e2, e3)`.
    pub fn euler_parameter_base(&mut self, name: &str, parent: BaseId, e: [Expr; 4]) -> BaseId {
        let m = &mut self.model;
        let [e0, e1, e2, e3] = e;
        let sq = |m: &mut Model, a: Expr| m.mul(a, a);
        let two = Expr::c(2.0);
        let (s0, s1, s2, s3) = (sq(m, e0), sq(m, e1), sq(m, e2), sq(m, e3));
        let prod2 = |m: &mut Model, a: Expr, b: Expr, c: Expr, d: Expr, plus: bool| {
            let ab = m.mul(a, b);
            let cd = m.mul(c, d);
            let t = if plus { m.add(ab, cd) } else { m.sub(ab, cd) };
            m.mul(two, t)
        };
        let r01 = prod2(m, e1, e2, e0, e3, false);
        let r02 = prod2(m, e1, e3, e0, e2, true);
        let r10 = prod2(m, e1, e2, e0, e3, true);
        let r12 = prod2(m, e2, e3, e0, e1, false);
        let r20 = prod2(m, e1, e3, e0, e2, false);
        let r21 = prod2(m, e2, e3, e0, e1, true);
        let diag = |m: &mut Model, p: Expr, q: Expr, r: Expr, s: Expr| {
            let a = m.add(p, q);
            let b = m.add(r, s);
            m.sub(a, b)
        };
        let r00 = diag(m, s0, s1, s2, s3);
        let r11 = diag(m, s0, s2, s1, s3);
        let r22 = diag(m, s0, s3, s1, s2);
        let rot = Mat3([[r00, r01, r02], [r10, r11, r12], [r20, r21, r22]]);
        self.push_base(name, parent, rot, None)
    }

    /// Rotation of `angle` about a fixed unit axis (Rodrigues' formula).
    pub fn axis_angle_base(
        &mut self,
        name: &str,
        parent: BaseId,
        axis: [f64; 3],
        angle: Expr,
    ) -> BaseId {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let k = [axis[0] / n, axis[1] / n, axis[2] / n];
        let m = &mut self.model;
        let c = m.cos(angle);
        let s = m.sin(angle);
        let omc = m.sub(Expr::ONE, c);
        let mut rot = Mat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                let kk = m.mul(Expr::c(k[i] * k[j]), omc);
                let base = if i == j { m.add(c, kk) } else { kk };
                // skew part: [k]x sin
                let skew = match (i, j) {
                    (0, 1) => -k[2],
                    (0, 2) => k[1],
                    (1, 0) => k[2],
                    (1, 2) => -k[0],
                    (2, 0) => -k[1],
                    (2, 1) => k[0],
                    _ => 0.0,
                };
                let sk = m.mul(Expr::c(skew), s);
                rot.0[i][j] = m.add(base, sk);
            }
        }
        self.push_base(name, parent, rot, Some((k, angle)))
    }

    fn push_base(
        &mut self,
        name: &str,
        parent: BaseId,
        rot: Mat3,
        fixed_axis: Option<([f64; 3], Expr)>,
    ) -> BaseId {
        let id = BaseId(self.bases.len() as u32);
        let depth = self.bases[parent.0 as usize].depth + 1;
        self.bases.push(BaseDef {
            name: name.to_string(),
            parent: Some(parent),
            depth,
            rot,
            fixed_axis,
        });
        id
    }

    /// New point at `rel` from `parent`.
    pub fn new_point(&mut self, name: &str, parent: PointId, rel: Vec3S) -> PointId {
        let id = PointId(self.points.len() as u32);
        let depth = self.points[parent.0 as usize].depth + 1;
        self.points.push(PointDef {
            name: name.to_string(),
            parent: Some(parent),
            depth,
            rel,
        });
        id
    }

    pub fn base_name(&self, b: BaseId) -> &str {
        &self.bases[b.0 as usize].name
    }

    pub fn point_name(&self, p: PointId) -> &str {
        &self.points[p.0 as usize].name
    }

    pub fn base_parent(&self, b: BaseId) -> Option<BaseId> {
        self.bases[b.0 as usize].parent
    }

    pub fn point_parent(&self, p: PointId) -> Option<PointId> {
        self.points[p.0 as usize].parent
    }

    pub fn base_count(&self) -> usize {
        self.bases.len()
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn relative_rotation(&self, b: BaseId) -> &Mat3 {
        &self.bases[b.0 as usize].rot
    }

    pub fn relative_position(&self, p: PointId) -> &Vec3S {
        &self.points[p.0 as usize].rel
    }

    // ---- operators ------------------------------------------------------

    fn base_lca(&self, mut a: BaseId, mut b: BaseId) -> BaseId {
        let depth = |x: BaseId| self.bases[x.0 as usize].depth;
        while depth(a) > depth(b) {
            a = self.bases[a.0 as usize].parent.expect("non-root");
        }
        while depth(b) > depth(a) {
            b = self.bases[b.0 as usize].parent.expect("non-root");
        }
        while a != b {
            a = self.bases[a.0 as usize].parent.expect("non-root");
            b = self.bases[b.0 as usize].parent.expect("non-root");
        }
        a
    }

    fn point_lca(&self, mut a: PointId, mut b: PointId) -> PointId {
        let depth = |x: PointId| self.points[x.0 as usize].depth;
        while depth(a) > depth(b) {
            a = self.points[a.0 as usize].parent.expect("non-root");
        }
        while depth(b) > depth(a) {
            b = self.points[b.0 as usize].parent.expect("non-root");
        }
        while a != b {
            a = self.points[a.0 as usize].parent.expect("non-root");
            b = self.points[b.0 as usize].parent.expect("non-root");
        }
        a
    }

    /// `R_anc^x` for `anc` an ancestor of `x`, built down the chain.
    fn rotation_down(&mut self, anc: BaseId, x: BaseId) -> Mat3 {
        if anc == x {
            return Mat3::identity();
        }
        if let Some(r) = self.rot_cache.get(&(anc, x)) {
            return *r;
        }
        let parent = self.bases[x.0 as usize].parent.expect("anc is an ancestor");
        let upper = self.rotation_down(anc, parent);
        let rel = self.bases[x.0 as usize].rot;
        let r = if anc == parent {
            rel
        } else {
            upper.mul(&mut self.model, &rel)
        };
        self.rot_cache.insert((anc, x), r);
        r
    }

    /// Base-change matrix `R_a^b`: maps components in `b` to components in
    /// `a`.
    pub fn rotation(&mut self, a: BaseId, b: BaseId) -> Mat3 {
        if a == b {
            return Mat3::identity();
        }
        if let Some(r) = self.rot_cache.get(&(a, b)) {
            return *r;
        }
        let lca = self.base_lca(a, b);
        let r = if lca == a {
            self.rotation_down(a, b)
        } else if lca == b {
            self.rotation_down(b, a).transpose()
        } else {
            let ra = self.rotation_down(lca, a).transpose();
            let rb = self.rotation_down(lca, b);
            ra.mul(&mut self.model, &rb)
        };
        self.rot_cache.insert((a, b), r);
        r
    }

    /// Re-expresses `v` in `base`.
    pub fn express(&mut self, v: &Vec3S, base: BaseId) -> Vec3S {
        if v.base == base {
            return *v;
        }
        let r = self.rotation(base, v.base);
        Vec3S {
            c: r.apply(&mut self.model, &v.c),
            base,
        }
    }

    pub fn add(&mut self, u: &Vec3S, v: &Vec3S) -> Vec3S {
        let v = self.express(v, u.base);
        let m = &mut self.model;
        Vec3S {
            c: [0, 1, 2].map(|i| m.add(u.c[i], v.c[i])),
            base: u.base,
        }
    }

    pub fn sub(&mut self, u: &Vec3S, v: &Vec3S) -> Vec3S {
        let v = self.express(v, u.base);
        let m = &mut self.model;
        Vec3S {
            c: [0, 1, 2].map(|i| m.sub(u.c[i], v.c[i])),
            base: u.base,
        }
    }

    pub fn scale(&mut self, k: Expr, v: &Vec3S) -> Vec3S {
        let m = &mut self.model;
        Vec3S {
            c: v.c.map(|x| m.mul(k, x)),
            base: v.base,
        }
    }

    pub fn dot(&mut self, u: &Vec3S, v: &Vec3S) -> Expr {
        let v = self.express(v, u.base);
        algebra::dot3(&mut self.model, &u.c, &v.c)
    }

    pub fn cross(&mut self, u: &Vec3S, v: &Vec3S) -> Vec3S {
        let v = self.express(v, u.base);
        Vec3S {
            c: algebra::cross3(&mut self.model, &u.c, &v.c),
            base: u.base,
        }
    }

    pub fn norm(&mut self, v: &Vec3S) -> Result<Expr, SymError> {
        let n2 = algebra::dot3(&mut self.model, &v.c, &v.c);
        self.model.sqrt(n2)
    }

    /// `v / |v|`.
    pub fn normalize(&mut self, v: &Vec3S) -> Result<Vec3S, SymError> {
        let n = self.norm(v)?;
        let m = &mut self.model;
        let mut c = [Expr::ZERO; 3];
        for i in 0..3 {
            c[i] = m.div(v.c[i], n)?;
        }
        Ok(Vec3S { c, base: v.base })
    }

    /// `r_anc^x` expressed in `base`, with `anc` an ancestor of `x`.
    fn position_down(&mut self, anc: PointId, x: PointId, base: BaseId) -> [Expr; 3] {
        if anc == x {
            return [Expr::ZERO; 3];
        }
        if let Some(r) = self.pos_cache.get(&(anc, x, base)) {
            return *r;
        }
        let parent = self.points[x.0 as usize]
            .parent
            .expect("anc is an ancestor");
        let upper = self.position_down(anc, parent, base);
        let rel = self.points[x.0 as usize].rel;
        let rel = self.express(&rel, base);
        let m = &mut self.model;
        let r = [0, 1, 2].map(|i| m.add(upper[i], rel.c[i]));
        self.pos_cache.insert((anc, x, base), r);
        r
    }

    /// Position vector from `a` to `b`, components in `express_in`.
    pub fn position(&mut self, a: PointId, b: PointId, express_in: BaseId) -> Vec3S {
        let lca = self.point_lca(a, b);
        let rb = self.position_down(lca, b, express_in);
        let ra = self.position_down(lca, a, express_in);
        let m = &mut self.model;
        Vec3S {
            c: [0, 1, 2].map(|i| m.sub(rb[i], ra[i])),
            base: express_in,
        }
    }

    /// Relative angular velocity of `x` w.r.t. its parent, in `x`'s base.
    fn edge_omega(&mut self, x: BaseId) -> Result<[Expr; 3], SymError> {
        if let Some(w) = self.omega_edge.get(&x) {
            return Ok(*w);
        }
        if let Some((k, angle)) = self.bases[x.0 as usize].fixed_axis {
            let rate = self.model.time_derivative(angle)?;
            let w = k.map(|ki| self.model.mul(Expr::c(ki), rate));
            self.omega_edge.insert(x, w);
            return Ok(w);
        }
        // skew(ω) = Rᵀ Ṙ in the child base
        let r = self.bases[x.0 as usize].rot;
        let flat: Vec<Expr> = r.0.iter().flatten().copied().collect();
        let rd = self.model.time_derivative_all(&flat)?;
        let rd = Mat3([
            [rd[0], rd[1], rd[2]],
            [rd[3], rd[4], rd[5]],
            [rd[6], rd[7], rd[8]],
        ]);
        let m = &mut self.model;
        let entry = |m: &mut Model, i: usize, j: usize| {
            let col_i = [r.0[0][i], r.0[1][i], r.0[2][i]];
            let col_j = [rd.0[0][j], rd.0[1][j], rd.0[2][j]];
            algebra::dot3(m, &col_i, &col_j)
        };
        let w = [entry(m, 2, 1), entry(m, 0, 2), entry(m, 1, 0)];
        self.omega_edge.insert(x, w);
        Ok(w)
    }

    fn omega_down(&mut self, anc: BaseId, x: BaseId, base: BaseId) -> Result<[Expr; 3], SymError> {
        if anc == x {
            return Ok([Expr::ZERO; 3]);
        }
        if let Some(w) = self.omega_cache.get(&(anc, x, base)) {
            return Ok(*w);
        }
        let parent = self.bases[x.0 as usize].parent.expect("anc is an ancestor");
        let upper = self.omega_down(anc, parent, base)?;
        let edge = Vec3S {
            c: self.edge_omega(x)?,
            base: x,
        };
        let edge = self.express(&edge, base);
        let m = &mut self.model;
        let w = [0, 1, 2].map(|i| m.add(upper[i], edge.c[i]));
        self.omega_cache.insert((anc, x, base), w);
        Ok(w)
    }

    /// Angular velocity of base `b` relative to base `reference`, components
    /// in `express_in`.
    pub fn angular_velocity_in(
        &mut self,
        reference: BaseId,
        b: BaseId,
        express_in: BaseId,
    ) -> Result<Vec3S, SymError> {
        let lca = self.base_lca(reference, b);
        let wb = self.omega_down(lca, b, express_in)?;
        let wr = self.omega_down(lca, reference, express_in)?;
        let m = &mut self.model;
        Ok(Vec3S {
            c: [0, 1, 2].map(|i| m.sub(wb[i], wr[i])),
            base: express_in,
        })
    }

    /// Angular velocity of `b` relative to `reference`, expressed in `b`.
    pub fn angular_velocity(&mut self, reference: BaseId, b: BaseId) -> Result<Vec3S, SymError> {
        self.angular_velocity_in(reference, b, b)
    }

    /// Angular acceleration of `b` relative to `reference`, in `b`. The
    /// derivative of ω is frame-independent between `reference` and `b`, so
    /// differentiating the components in `b` is exact.
    pub fn angular_acceleration(
        &mut self,
        reference: BaseId,
        b: BaseId,
    ) -> Result<Vec3S, SymError> {
        let w = self.angular_velocity(reference, b)?;
        let c = self.model.time_derivative_all(&w.c)?;
        Ok(Vec3S {
            c: [c[0], c[1], c[2]],
            base: b,
        })
    }

    /// Velocity of point `p` relative to frame `reference`, components in
    /// the frame's base: the derivative of the position components as seen
    /// from that base.
    pub fn velocity(&mut self, reference: Frame, p: PointId) -> Result<Vec3S, SymError> {
        if let Some(v) = self.vel_cache.get(&(reference.point, reference.base, p)) {
            return Ok(Vec3S {
                c: *v,
                base: reference.base,
            });
        }
        let r = self.position(reference.point, p, reference.base);
        let d = self.model.time_derivative_all(&r.c)?;
        let c = [d[0], d[1], d[2]];
        self.vel_cache
            .insert((reference.point, reference.base, p), c);
        Ok(Vec3S {
            c,
            base: reference.base,
        })
    }

    pub fn acceleration(&mut self, reference: Frame, p: PointId) -> Result<Vec3S, SymError> {
        let v = self.velocity(reference, p)?;
        let d = self.model.time_derivative_all(&v.c)?;
        Ok(Vec3S {
            c: [d[0], d[1], d[2]],
            base: reference.base,
        })
    }

    /// Textual listing of both trees.
    pub fn structure_dump(&self) -> String {
        let mut s = String::from("bases:\n");
        for (i, b) in self.bases.iter().enumerate() {
            let parent = b
                .parent
                .map(|p| self.bases[p.0 as usize].name.as_str())
                .unwrap_or("-");
            let syms = self
                .model
                .free_symbols(&b.rot.0.iter().flatten().copied().collect::<Vec<_>>());
            let names: Vec<&str> = syms
                .iter()
                .map(|&x| self.model.symbol(x).name.as_str())
                .collect();
            let _ = writeln!(s, "  [{i}] {} parent={} params={:?}", b.name, parent, names);
        }
        s.push_str("points:\n");
        for (i, p) in self.points.iter().enumerate() {
            let parent = p
                .parent
                .map(|q| self.points[q.0 as usize].name.as_str())
                .unwrap_or("-");
            let syms = self.model.free_symbols(&p.rel.c);
            let names: Vec<&str> = syms
                .iter()
                .map(|&x| self.model.symbol(x).name.as_str())
                .collect();
            let _ = writeln!(
                s,
                "  [{i}] {} parent={} base={} params={:?}",
                p.name, parent, self.bases[p.rel.base.0 as usize].name, names
            );
        }
        s
    }
}
