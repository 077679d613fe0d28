//! Equations of motion by virtual power and the exported model functions.
//!
//! Each body contributes `∂v_G/∂q̇ · m a_G + ∂ω/∂q̇ · (I α + ω × I ω)`; the
//! applied forces are projected on the same velocity Jacobians. From the
//! resulting residual `e(q, q̇, q̈, f)` the mass matrix, the right-hand side
//! and the contact constraint functions are compiled to tapes.

mod eval;

use std::collections::HashMap;

use thiserror::Error;

use crate::contact::ContactExprs;
use crate::mechkin::{cross3, BaseId, Frame, Mat3, Mech, PointId, Vec3S, GROUND, ORIGIN};
use crate::symcore::{Expr, Model, SymError, SymbolId, SymbolKind, Tape, TapeStats};

pub use eval::{ContactNumerics, Evaluator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynError {
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error("coordinate `{0}` has no acceleration symbol")]
    MissingAcceleration(String),
    #[error("body `{0}`: {1}")]
    BadBody(String, String),
    #[error("force element `{0}`: {1}")]
    BadElement(String, String),
}

/// Rigid body attached to a base, with its center of mass at a point of the
/// points tree. Inertia is about the center of mass, in the body base.
#[derive(Clone, Debug)]
pub struct RigidBody {
    pub name: String,
    pub base: BaseId,
    pub com: PointId,
    pub mass: f64,
    pub inertia: [[f64; 3]; 3],
}

impl RigidBody {
    fn check(&self) -> Result<(), DynError> {
        let bad = |msg: &str| Err(DynError::BadBody(self.name.clone(), msg.into()));
        if !(self.mass > 0.0) {
            return bad("mass must be positive");
        }
        let i = &self.inertia;
        for r in 0..3 {
            for c in 0..3 {
                if (i[r][c] - i[c][r]).abs() > 1e-12 * (1.0 + i[r][c].abs()) {
                    return bad("inertia is not symmetric");
                }
            }
            if i[r][r] < 0.0 {
                return bad("negative principal inertia");
            }
        }
        Ok(())
    }
}

/// Role of a linear scalar element; only used for reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    SpringDamper,
    Bushing,
    GearCompliance,
}

#[derive(Clone, Debug)]
pub enum ForceElement {
    /// Uniform field acting on every body, ground components (m/s²).
    Gravity { g: [f64; 3] },
    /// Linear spring-damper on a scalar extension `e(q)`:
    /// force `−(k (e − rest) + c ė)` along `∂ė/∂q̇`.
    Linear {
        name: String,
        kind: ElementKind,
        extension: Expr,
        stiffness: f64,
        damping: f64,
        rest: f64,
    },
    /// Force applied at a point.
    PointForce {
        name: String,
        point: PointId,
        force: Vec3S,
    },
    /// Torque `magnitude · axis` on `base`, with the reaction on `reaction`.
    Torque {
        name: String,
        base: BaseId,
        reaction: Option<BaseId>,
        axis: Vec3S,
        magnitude: Expr,
    },
}

impl ForceElement {
    pub fn name(&self) -> &str {
        match self {
            ForceElement::Gravity { .. } => "gravity",
            ForceElement::Linear { name, .. }
            | ForceElement::PointForce { name, .. }
            | ForceElement::Torque { name, .. } => name,
        }
    }

    /// Spring-damper between two points along their current distance.
    pub fn spring_damper(
        mech: &mut Mech,
        name: &str,
        a: PointId,
        b: PointId,
        stiffness: f64,
        damping: f64,
        rest: f64,
    ) -> Result<Self, DynError> {
        let d = mech.position(a, b, GROUND);
        let len = mech.norm(&d)?;
        Ok(ForceElement::Linear {
            name: name.into(),
            kind: ElementKind::SpringDamper,
            extension: len,
            stiffness,
            damping,
            rest,
        })
    }

    /// Translational bushing: linear elements on the components of `r_a^b`
    /// in `base`, unstretched when the two points coincide.
    pub fn bushing(
        mech: &mut Mech,
        name: &str,
        a: PointId,
        b: PointId,
        base: BaseId,
        stiffness: [f64; 3],
        damping: [f64; 3],
    ) -> Vec<Self> {
        let d = mech.position(a, b, base);
        (0..3)
            .filter(|&k| stiffness[k] != 0.0 || damping[k] != 0.0)
            .map(|k| ForceElement::Linear {
                name: format!("{name}.{}", ["x", "y", "z"][k]),
                kind: ElementKind::Bushing,
                extension: d.c[k],
                stiffness: stiffness[k],
                damping: damping[k],
                rest: 0.0,
            })
            .collect()
    }

    /// Rotational bushing between two bases using the small-rotation angles
    /// of `R_a^b` (skew part), expressed in `a`.
    pub fn rotational_bushing(
        mech: &mut Mech,
        name: &str,
        a: BaseId,
        b: BaseId,
        stiffness: [f64; 3],
        damping: [f64; 3],
    ) -> Vec<Self> {
        let r = mech.rotation(a, b);
        let m = &mut mech.model;
        let half = Expr::c(0.5);
        let ang = [(2, 1), (0, 2), (1, 0)].map(|(i, j)| {
            let d = m.sub(r.0[i][j], r.0[j][i]);
            m.mul(half, d)
        });
        (0..3)
            .filter(|&k| stiffness[k] != 0.0 || damping[k] != 0.0)
            .map(|k| ForceElement::Linear {
                name: format!("{name}.r{}", ["x", "y", "z"][k]),
                kind: ElementKind::Bushing,
                extension: ang[k],
                stiffness: stiffness[k],
                damping: damping[k],
                rest: 0.0,
            })
            .collect()
    }

    fn check(&self) -> Result<(), DynError> {
        if let ForceElement::Linear {
            name,
            stiffness,
            damping,
            ..
        } = self
        {
            if *stiffness < 0.0 || *damping < 0.0 {
                return Err(DynError::BadElement(
                    name.clone(),
                    "negative stiffness or damping".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Everything `assemble` needs.
#[derive(Clone, Debug, Default)]
pub struct SystemSpec {
    /// Generalized coordinates as `[q, q̇, q̈]`.
    pub coords: Vec<[SymbolId; 3]>,
    pub bodies: Vec<RigidBody>,
    pub forces: Vec<ForceElement>,
    pub contacts: Vec<ContactExprs>,
    /// Shear modulus folded into the Kalker blocks, Pa.
    pub shear_modulus: f64,
}

/// Model functions, in the order used by reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Function {
    MassMatrix,
    Delta,
    PhiN,
    PhiD,
    JacNq,
    JacNs,
    JacDq,
    JacDs,
    BetaN,
    GammaN,
    Kalker,
    DeltaNk,
    GammaD,
    ContactKinematics,
    Energy,
}

impl Function {
    pub const ALL: [Function; 15] = [
        Function::MassMatrix,
        Function::Delta,
        Function::PhiN,
        Function::PhiD,
        Function::JacNq,
        Function::JacNs,
        Function::JacDq,
        Function::JacDs,
        Function::BetaN,
        Function::GammaN,
        Function::Kalker,
        Function::DeltaNk,
        Function::GammaD,
        Function::ContactKinematics,
        Function::Energy,
    ];

    /// The function inventory reported in the statistics table.
    pub const INVENTORY: [Function; 11] = [
        Function::MassMatrix,
        Function::Delta,
        Function::PhiN,
        Function::PhiD,
        Function::JacNq,
        Function::JacNs,
        Function::JacDq,
        Function::JacDs,
        Function::BetaN,
        Function::GammaN,
        Function::Kalker,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::MassMatrix => "M_qq",
            Function::Delta => "delta_q",
            Function::PhiN => "phi_n",
            Function::PhiD => "phi_d",
            Function::JacNq => "phidot_n_qdot",
            Function::JacNs => "phidot_n_sdot",
            Function::JacDq => "phidot_d_qdot",
            Function::JacDs => "phidot_d_sdot",
            Function::BetaN => "beta_n",
            Function::GammaN => "gamma_n",
            Function::Kalker => "kalker_blocks",
            Function::DeltaNk => "delta_nk_q",
            Function::GammaD => "gamma_d",
            Function::ContactKinematics => "contact_kinematics",
            Function::Energy => "energy",
        }
    }

    pub fn from_name(name: &str) -> Option<Function> {
        Function::ALL.into_iter().find(|f| f.name() == name)
    }

    fn index(self) -> usize {
        Function::ALL.iter().position(|&f| f == self).unwrap()
    }
}

/// Number of outputs per contact in [`Function::ContactKinematics`]:
/// four curvatures, three creepage numerators and the denominator.
pub const KIN_PER_CONTACT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub nq: usize,
    pub ns: usize,
    pub nc: usize,
}

/// Symbol ids the runtime reads and writes.
#[derive(Clone, Debug)]
pub struct SymbolIndex {
    pub q: Vec<SymbolId>,
    pub dq: Vec<SymbolId>,
    pub ddq: Vec<SymbolId>,
    pub s: Vec<SymbolId>,
    pub ds: Vec<SymbolId>,
    pub dds: Vec<SymbolId>,
    /// Per contact `[f_x, f_y, m_z]`.
    pub forces: Vec<[SymbolId; 3]>,
    /// Per contact `[k11, k22, k23, k33]`.
    pub kalker: Vec<[SymbolId; 4]>,
    /// Total number of symbols (length of a value vector).
    pub n_symbols: usize,
}

/// Symbolic results of the assembly, kept for inspection and tests.
#[derive(Clone, Debug)]
pub struct DynamicsExprs {
    pub e: Vec<Expr>,
    pub mass: Vec<Expr>,
    pub delta: Vec<Expr>,
    pub delta_nk: Vec<Expr>,
    pub kinetic: Expr,
    pub potential: Expr,
}

/// Compiled model functions and their dimensions. Immutable after assembly.
#[derive(Clone, Debug)]
pub struct AssembledDynamics {
    pub dims: Dims,
    pub symbols: SymbolIndex,
    pub exprs: DynamicsExprs,
    tapes: Vec<Tape>,
}

impl AssembledDynamics {
    pub fn tape(&self, f: Function) -> &Tape {
        &self.tapes[f.index()]
    }

    pub fn stats(&self, f: Function) -> TapeStats {
        self.tape(f).stats
    }

    pub fn evaluator(&self) -> Evaluator {
        Evaluator::new(self)
    }
}

fn dot(m: &mut Model, a: &[Expr], b: &[Expr]) -> Expr {
    let terms: Vec<Expr> = a.iter().zip(b).map(|(&x, &y)| m.mul(x, y)).collect();
    m.sum(terms)
}

/// `J[i][j] = ∂v_i/∂q̇_j` for the three components of `v`.
fn vel_jacobian(m: &mut Model, v: &Vec3S, dq: &[SymbolId]) -> Vec<Vec<Expr>> {
    m.jacobian(&v.c, dq)
}

fn column(j: &[Vec<Expr>], col: usize) -> [Expr; 3] {
    [j[0][col], j[1][col], j[2][col]]
}

/// Builds the equations of motion and compiles every model function.
pub fn assemble(mech: &mut Mech, spec: &SystemSpec) -> Result<AssembledDynamics, DynError> {
    for b in &spec.bodies {
        b.check()?;
    }
    for f in &spec.forces {
        f.check()?;
    }
    let nq = spec.coords.len();
    let nc = spec.contacts.len();
    let ns = 4 * nc;
    for c in &spec.coords {
        let sym = mech.model.symbol(c[2]);
        if sym.kind != SymbolKind::Acceleration {
            return Err(DynError::MissingAcceleration(
                mech.model.symbol(c[0]).name.clone(),
            ));
        }
    }
    let q: Vec<SymbolId> = spec.coords.iter().map(|c| c[0]).collect();
    let dq: Vec<SymbolId> = spec.coords.iter().map(|c| c[1]).collect();
    let ddq: Vec<SymbolId> = spec.coords.iter().map(|c| c[2]).collect();
    let s: Vec<SymbolId> = spec
        .contacts
        .iter()
        .flat_map(|c| c.sym.s.map(|x| x[0]))
        .collect();
    let ds: Vec<SymbolId> = spec
        .contacts
        .iter()
        .flat_map(|c| c.sym.s.map(|x| x[1]))
        .collect();
    let dds: Vec<SymbolId> = spec
        .contacts
        .iter()
        .flat_map(|c| c.sym.s.map(|x| x[2]))
        .collect();

    let mut e = vec![Expr::ZERO; nq];
    let mut kinetic = Vec::new();
    let mut potential = Vec::new();
    let gravity: Option<[f64; 3]> = spec.forces.iter().find_map(|f| match f {
        ForceElement::Gravity { g } => Some(*g),
        _ => None,
    });

    // inertia terms, with gravity projected on the same Jacobian
    for body in &spec.bodies {
        let v = mech.velocity(Frame::GROUND, body.com)?;
        let a = mech.acceleration(Frame::GROUND, body.com)?;
        let w = mech.angular_velocity(GROUND, body.base)?;
        let alpha = mech.angular_acceleration(GROUND, body.base)?;
        let r = mech.position(ORIGIN, body.com, GROUND);
        let m = &mut mech.model;
        let inertia = Mat3::from_f64(body.inertia);
        let mut force = [0, 1, 2].map(|k| m.mul(Expr::c(body.mass), a.c[k]));
        if let Some(g) = gravity {
            for k in 0..3 {
                force[k] = m.sub(force[k], Expr::c(body.mass * g[k]));
            }
            let pe = dot(m, &r.c, &g.map(Expr::c));
            potential.push(m.mul(Expr::c(-body.mass), pe));
        }
        let iw = inertia.apply(m, &w.c);
        let ia = inertia.apply(m, &alpha.c);
        let gyro = cross3(m, &w.c, &iw);
        let moment = [0, 1, 2].map(|k| m.add(ia[k], gyro[k]));
        let jv = vel_jacobian(m, &v, &dq);
        let jw = vel_jacobian(m, &w, &dq);
        for j in 0..nq {
            let t1 = dot(m, &column(&jv, j), &force);
            let t2 = dot(m, &column(&jw, j), &moment);
            let t = m.add(t1, t2);
            e[j] = m.add(e[j], t);
        }
        let vv = dot(m, &v.c, &v.c);
        let wiw = dot(m, &w.c, &iw);
        let tv = m.mul(Expr::c(body.mass), vv);
        let sum = m.add(tv, wiw);
        kinetic.push(m.mul(Expr::c(0.5), sum));
    }

    // applied forces
    for f in &spec.forces {
        match f {
            ForceElement::Gravity { .. } => {}
            ForceElement::Linear {
                extension,
                stiffness,
                damping,
                rest,
                ..
            } => {
                let m = &mut mech.model;
                let rate = m.time_derivative(*extension)?;
                let stretch = m.sub(*extension, Expr::c(*rest));
                let fk = m.mul(Expr::c(*stiffness), stretch);
                let fc = m.mul(Expr::c(*damping), rate);
                let force = m.add(fk, fc);
                let grad = m.jacobian(&[rate], &dq);
                for j in 0..nq {
                    let t = m.mul(force, grad[0][j]);
                    e[j] = m.add(e[j], t);
                }
                if *stiffness != 0.0 {
                    let s2 = m.square(stretch);
                    potential.push(m.mul(Expr::c(0.5 * stiffness), s2));
                }
            }
            ForceElement::PointForce { point, force, .. } => {
                let v = mech.velocity(Frame::GROUND, *point)?;
                let fg = mech.express(force, GROUND);
                let m = &mut mech.model;
                let jv = vel_jacobian(m, &v, &dq);
                for j in 0..nq {
                    let t = dot(m, &column(&jv, j), &fg.c);
                    e[j] = m.sub(e[j], t);
                }
            }
            ForceElement::Torque {
                base,
                reaction,
                axis,
                magnitude,
                ..
            } => {
                let w_on = mech.angular_velocity_in(GROUND, *base, GROUND)?;
                let w = match reaction {
                    Some(r) => {
                        let w_re = mech.angular_velocity_in(GROUND, *r, GROUND)?;
                        mech.sub(&w_on, &w_re)
                    }
                    None => w_on,
                };
                let ag = mech.express(axis, GROUND);
                let tq = mech.scale(*magnitude, &ag);
                let m = &mut mech.model;
                let jw = vel_jacobian(m, &w, &dq);
                for j in 0..nq {
                    let t = dot(m, &column(&jw, j), &tq.c);
                    e[j] = m.sub(e[j], t);
                }
            }
        }
    }

    // creep forces at each contact
    for c in &spec.contacts {
        let fr = &c.frames;
        let [fx, fy, mz] = c.sym.force.map(Expr::sym);
        let m = &mut mech.model;
        let force: [Expr; 3] = [0, 1, 2].map(|k| {
            let a = m.mul(fx, fr.t_xr.c[k]);
            let b = m.mul(fy, fr.t_yr.c[k]);
            m.add(a, b)
        });
        let moment = [0, 1, 2].map(|k| m.mul(mz, fr.n_r.c[k]));
        let jv = vel_jacobian(m, &c.v_att, &dq);
        let jw = vel_jacobian(m, &c.omega, &dq);
        for j in 0..nq {
            let t1 = dot(m, &column(&jv, j), &force);
            let t2 = dot(m, &column(&jw, j), &moment);
            let t = m.add(t1, t2);
            e[j] = m.sub(e[j], t);
        }
    }

    let m = &mut mech.model;
    let mass_rows = m.jacobian(&e, &ddq);
    let mass: Vec<Expr> = mass_rows.into_iter().flatten().collect();
    let zero_acc: HashMap<SymbolId, Expr> =
        ddq.iter().chain(&dds).map(|&s| (s, Expr::ZERO)).collect();
    let e0 = m.substitute_all(&e, &zero_acc);
    let delta: Vec<Expr> = e0.iter().map(|x| x.negated()).collect();
    let zero_f: HashMap<SymbolId, Expr> = spec
        .contacts
        .iter()
        .flat_map(|c| c.sym.force)
        .map(|s| (s, Expr::ZERO))
        .collect();
    let delta_nk = m.substitute_all(&delta, &zero_f);

    // constraints
    let phi_n: Vec<Expr> = spec.contacts.iter().map(|c| c.phi_n).collect();
    let phi_d: Vec<Expr> = spec.contacts.iter().flat_map(|c| c.phi_d).collect();
    let flat = |j: Vec<Vec<Expr>>| -> Vec<Expr> { j.into_iter().flatten().collect() };
    let jac_nq = flat(m.jacobian(&phi_n, &q));
    let jac_ns = flat(m.jacobian(&phi_n, &s));
    let jac_dq = flat(m.jacobian(&phi_d, &q));
    let jac_ds = flat(m.jacobian(&phi_d, &s));
    let gamma_n = second_rate_rhs(m, &phi_n, &zero_acc)?;
    let gamma_d = second_rate_rhs(m, &phi_d, &zero_acc)?;
    let beta_n: Vec<Expr> = {
        // rheonomic part: ∂φ/∂t, identically zero here
        let t = m.lookup("t");
        match t {
            Some(t) => m
                .differentiate_all(&phi_n, t)
                .into_iter()
                .map(|x| x.negated())
                .collect(),
            None => vec![Expr::ZERO; nc],
        }
    };

    // Kalker blocks (∂δ/∂f_i)·G·K_i·(∂ν_i/∂q̇), stacked per contact
    let g = spec.shear_modulus;
    let mut kalker = Vec::with_capacity(nc * nq * nq);
    let mut kin = Vec::with_capacity(nc * KIN_PER_CONTACT);
    for c in &spec.contacts {
        let p = m.jacobian(&delta, &c.sym.force); // nq × 3
        let jn = m.jacobian(&c.creep_num, &dq); // 3 × nq
        let [k11, k22, k23, k33] = c.sym.k.map(|s| m.mul(Expr::c(g), Expr::sym(s)));
        let kmat = [
            [k11, Expr::ZERO, Expr::ZERO],
            [Expr::ZERO, k22, k23],
            [Expr::ZERO, k23.negated(), k33],
        ];
        // K·J (3 × nq)
        let kj: Vec<Vec<Expr>> = (0..3)
            .map(|r| {
                (0..nq)
                    .map(|col| {
                        let terms: Vec<Expr> =
                            (0..3).map(|k| m.mul(kmat[r][k], jn[k][col])).collect();
                        m.sum(terms)
                    })
                    .collect()
            })
            .collect();
        for row in 0..nq {
            for col in 0..nq {
                let terms: Vec<Expr> = (0..3).map(|k| m.mul(p[row][k], kj[k][col])).collect();
                kalker.push(m.sum(terms));
            }
        }
        kin.extend(c.curvature);
        kin.extend(c.creep_num);
        kin.push(c.creep_den);
    }

    let kinetic = m.sum(kinetic);
    let potential = m.sum(potential);

    let inputs: Vec<SymbolId> = (0..m.symbol_count() as u32).map(SymbolId).collect();
    let mut tapes = Vec::with_capacity(Function::ALL.len());
    for f in Function::ALL {
        let (outs, rows, cols): (&[Expr], usize, usize) = match f {
            Function::MassMatrix => (&mass, nq, nq),
            Function::Delta => (&delta, nq, 1),
            Function::DeltaNk => (&delta_nk, nq, 1),
            Function::PhiN => (&phi_n, nc, 1),
            Function::PhiD => (&phi_d, 4 * nc, 1),
            Function::JacNq => (&jac_nq, nc, nq),
            Function::JacNs => (&jac_ns, nc, ns),
            Function::JacDq => (&jac_dq, 4 * nc, nq),
            Function::JacDs => (&jac_ds, 4 * nc, ns),
            Function::BetaN => (&beta_n, nc, 1),
            Function::GammaN => (&gamma_n, nc, 1),
            Function::GammaD => (&gamma_d, 4 * nc, 1),
            Function::Kalker => (&kalker, nc * nq, nq),
            Function::ContactKinematics => (&kin, nc, KIN_PER_CONTACT),
            Function::Energy => (&[kinetic, potential][..], 1, 2),
        };
        tapes.push(m.export_tape(f.name(), outs, rows, cols, &inputs)?);
    }

    Ok(AssembledDynamics {
        dims: Dims { nq, ns, nc },
        symbols: SymbolIndex {
            q,
            dq,
            ddq,
            s,
            ds,
            dds,
            forces: spec.contacts.iter().map(|c| c.sym.force).collect(),
            kalker: spec.contacts.iter().map(|c| c.sym.k).collect(),
            n_symbols: m.symbol_count(),
        },
        exprs: DynamicsExprs {
            e,
            mass,
            delta,
            delta_nk,
            kinetic,
            potential,
        },
        tapes,
    })
}

/// `−φ̈` with all second derivatives set to zero.
fn second_rate_rhs(
    m: &mut Model,
    phi: &[Expr],
    zero_acc: &HashMap<SymbolId, Expr>,
) -> Result<Vec<Expr>, DynError> {
    let d1 = m.time_derivative_all(phi)?;
    let d2 = m.time_derivative_all(&d1)?;
    let d2 = m.substitute_all(&d2, zero_acc);
    Ok(d2.into_iter().map(|x| x.negated()).collect())
}
