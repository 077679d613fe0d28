//! Measurements shared by the unit tests and the acceptance run. Each
//! returns the worst normalized error it saw.

use std::collections::HashSet;

use railsym::contact::kalker_forces;
use railsym::dynamics::{
    assemble, AssembledDynamics, ForceElement, Function, RigidBody, SystemSpec, KIN_PER_CONTACT,
};
use railsym::integrator::{FullPivLu, Matrix, SolverState, StepConfig, StepReport};
use railsym::mechkin::{Axis, Mech, Vec3S, GROUND, ORIGIN};
use railsym::symcore::{Expr, Model, SymbolId, SymbolKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::{random_dag, rel, symbols};
use super::{max_abs, Desk};

pub const G: [f64; 3] = [0.0, 0.0, -9.81];

/// Tape against recursive evaluation over `sets` random expression sets.
pub fn tape_vs_recursive(sets: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..sets {
        let nvars = rng.gen_range(1..6);
        let mut m = Model::new();
        let syms = symbols(&mut m, nvars);
        let pool = random_dag(&mut rng, nvars, 60, false);
        let outs: Vec<_> = pool.iter().rev().take(6).collect();
        let exprs: Vec<Expr> = outs.iter().map(|r| r.build(&mut m, &syms)).collect();
        let tape = m.export_tape("t", &exprs, 2, 3, &syms).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..nvars).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (got, _) = tape.eval(&x);
            for (g, r) in got.iter().zip(&outs) {
                worst = worst.max(rel(*g, r.eval(&x)));
            }
        }
    }
    worst
}

/// Atoms created by the rotated-sum example built in its natural order.
pub fn figure_three_atoms() -> usize {
    let mut m = Model::new();
    let th = Expr::sym(m.make_symbol("theta", SymbolKind::Coordinate).unwrap());
    let [ux, uy, uz, vx, vy, vz] =
        ["ux", "uy", "uz", "vx", "vy", "vz"].map(|n| Expr::sym(m.parameter(n).unwrap()));
    let c = m.cos(th);
    let s = m.sin(th);
    let a3 = m.mul(c, vy);
    let a4 = m.mul(s, vz);
    let a5 = m.mul(s, vy);
    let a6 = m.mul(c, vz);
    let a7 = m.sub(a3, a4);
    let a8 = m.add(a5, a6);
    m.add(ux, vx);
    m.add(uy, a7);
    m.add(uz, a8);
    m.atom_count()
}

/// Extra instructions from exporting an expression twice, plus the number
/// of repeated instructions in the doubled tape.
pub fn duplicate_export_overhead(seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Model::new();
    let syms = symbols(&mut m, 3);
    let pool = random_dag(&mut rng, 3, 40, false);
    let e = pool.last().unwrap().build(&mut m, &syms);
    let one = m.export_tape("one", &[e], 1, 1, &syms).unwrap();
    let again = pool.last().unwrap().build(&mut m, &syms);
    let two = m.export_tape("two", &[e, again], 1, 2, &syms).unwrap();
    let mut seen = HashSet::new();
    let repeats = two
        .instructions()
        .iter()
        .filter(|i| !seen.insert(format!("{i:?}")))
        .count();
    (two.instructions().len() - one.instructions().len(), repeats)
}

/// Symbolic gradients of random smooth DAGs against central differences.
pub fn dag_gradient_error(seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..60 {
        let nvars = 3;
        let mut m = Model::new();
        let syms = symbols(&mut m, nvars);
        let pool = random_dag(&mut rng, nvars, 50, true);
        let r = pool.last().unwrap();
        if r.has_abs() {
            continue;
        }
        let e = r.build(&mut m, &syms);
        let grads: Vec<Expr> = syms.iter().map(|&s| m.differentiate(e, s)).collect();
        let tape = m.export_tape("g", &grads, 1, nvars, &syms).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..nvars).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let (g, _) = tape.eval(&x);
            for k in 0..nvars {
                let h = 1e-5;
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[k] += h;
                xm[k] -= h;
                let fd = (r.eval(&xp) - r.eval(&xm)) / (2.0 * h);
                let scale = r.eval(&x).abs().max(fd.abs()).max(1.0);
                worst = worst.max((g[k] - fd).abs() / scale);
                checked += 1;
            }
        }
    }
    (worst, checked)
}

/// Consistent wheelset states with random offsets and velocities.
pub fn random_states(d: &mut Desk, n: usize, seed: u64) -> Vec<SolverState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sym = d.model.dynamics.symbols.clone();
    (0..n)
        .map(|_| {
            let y = rng.gen_range(-0.006..0.006);
            let yaw = rng.gen_range(-0.004..0.004);
            let v = rng.gen_range(1.0..30.0);
            let mut st = d.state(y, yaw, v, rng.gen_range(0.98..1.02));
            for name in ["y", "yaw"] {
                st.x[sym.dq[d.q(name)].index()] = rng.gen_range(-0.05..0.05);
            }
            let mut rep = StepReport::default();
            d.int.project(&mut st.x, &mut rep).unwrap();
            st
        })
        .collect()
}

/// Central differences of tape `f` with respect to `wrt`.
pub fn fd_jacobian(d: &mut Desk, f: Function, x: &[f64], wrt: &[SymbolId], h: f64) -> Vec<f64> {
    let rows = d.model.dynamics.tape(f).output_len();
    let mut out = vec![0.0; rows * wrt.len()];
    let mut xp = x.to_vec();
    for (j, s) in wrt.iter().enumerate() {
        let i = s.index();
        xp[i] = x[i] + h;
        d.int.plant.eval.run(f, &xp);
        let fp = d.int.plant.eval.out(f).to_vec();
        xp[i] = x[i] - h;
        d.int.plant.eval.run(f, &xp);
        let fm = d.int.plant.eval.out(f).to_vec();
        xp[i] = x[i];
        for r in 0..rows {
            out[r * wrt.len() + j] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    out
}

/// Largest difference relative to the largest reference entry.
pub fn scaled_error(got: &[f64], want: &[f64]) -> f64 {
    let scale = max_abs(want).max(1e-3);
    got.iter()
        .zip(want)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs() / scale))
}

/// Constraint Jacobians of the wheelset against central differences.
pub fn constraint_jacobian_error() -> f64 {
    let mut d = Desk::new(StepConfig::default());
    let sym = d.model.dynamics.symbols.clone();
    let mut worst: f64 = 0.0;
    for mut st in random_states(&mut d, 6, 1) {
        d.int.plant.load_profiles(&mut st.x);
        for (jac, phi, wrt) in [
            (Function::JacNq, Function::PhiN, &sym.q),
            (Function::JacNs, Function::PhiN, &sym.s),
            (Function::JacDq, Function::PhiD, &sym.q),
            (Function::JacDs, Function::PhiD, &sym.s),
        ] {
            d.int.plant.eval.run(jac, &st.x);
            let got = d.int.plant.eval.out(jac).to_vec();
            let want = fd_jacobian(&mut d, phi, &st.x, wrt, 1e-6);
            worst = worst.max(scaled_error(&got, &want));
        }
    }
    worst
}

/// Kalker damping blocks against differences of the creep-force part of δ,
/// with patch and creep denominators frozen.
pub fn kalker_block_error() -> f64 {
    let mut d = Desk::new(StepConfig::default());
    let sym = d.model.dynamics.symbols.clone();
    let (nq, nc) = (d.int.dims().nq, d.int.dims().nc);
    let g = d.int.plant.material.g;
    let mut worst: f64 = 0.0;
    for mut st in random_states(&mut d, 4, 3) {
        d.int.plant.load_profiles(&mut st.x);
        d.int.plant.update_contacts(&mut st.x, &st.normal).unwrap();
        let mut ck = Matrix::zeros(nq, nq);
        d.int.plant.eval.kalker_damping(&st.x, &mut ck);
        let frozen: Vec<([f64; 4], f64)> = d
            .int
            .plant
            .eval
            .contacts
            .iter()
            .map(|c| (c.k, c.v))
            .collect();
        let mut creep_part = |x: &mut Vec<f64>| -> Vec<f64> {
            let ev = &mut d.int.plant.eval;
            ev.run(Function::ContactKinematics, x);
            let kin = ev.out(Function::ContactKinematics).to_vec();
            for i in 0..nc {
                let o = &kin[i * KIN_PER_CONTACT..];
                let (k, v) = frozen[i];
                let f = kalker_forces(g, k, [o[4] / v, o[5] / v, o[6] / v]);
                for (s, val) in sym.forces[i].iter().zip(f) {
                    x[s.index()] = val;
                }
            }
            ev.run(Function::Delta, x);
            let with = ev.out(Function::Delta).to_vec();
            ev.clear_forces(x);
            ev.run(Function::Delta, x);
            with.iter()
                .zip(ev.out(Function::Delta))
                .map(|(a, b)| a - b)
                .collect()
        };
        let h = 1e-5;
        let mut x = st.x.clone();
        for j in 0..nq {
            let i = sym.dq[j].index();
            let v0 = x[i];
            x[i] = v0 + h;
            let fp = creep_part(&mut x);
            x[i] = v0 - h;
            let fm = creep_part(&mut x);
            x[i] = v0;
            let col: Vec<f64> = (0..nq).map(|r| -(fp[r] - fm[r]) / (2.0 * h)).collect();
            let got: Vec<f64> = (0..nq).map(|r| ck[(r, j)]).collect();
            worst = worst.max(scaled_error(&got, &col));
        }
    }
    worst
}

pub struct FreeBody {
    pub mech: Mech,
    pub dynamics: AssembledDynamics,
    pub coords: Vec<[SymbolId; 3]>,
    pub mass: f64,
    pub inertia: [[f64; 3]; 3],
}

/// Translation in ground plus yaw-pitch-roll (Z, Y, X) orientation.
pub fn free_body() -> FreeBody {
    let mut mech = Mech::new(Model::new());
    let names = ["x", "y", "z", "psi", "theta", "phi"];
    let coords: Vec<[SymbolId; 3]> = names
        .iter()
        .map(|n| mech.model.coordinate(n).unwrap())
        .collect();
    let s = |k: usize| Expr::sym(coords[k][0]);
    let yaw = mech.rotated_base("yaw", GROUND, Axis::Z, s(3));
    let pitch = mech.rotated_base("pitch", yaw, Axis::Y, s(4));
    let body = mech.rotated_base("body", pitch, Axis::X, s(5));
    let com = mech.new_point("G", ORIGIN, Vec3S::new([s(0), s(1), s(2)], GROUND));
    let inertia = [[3.0, 0.2, -0.1], [0.2, 5.0, 0.3], [-0.1, 0.3, 4.0]];
    let spec = SystemSpec {
        coords: coords.clone(),
        bodies: vec![RigidBody {
            name: "block".into(),
            base: body,
            com,
            mass: 7.5,
            inertia,
        }],
        forces: vec![ForceElement::Gravity { g: G }],
        ..Default::default()
    };
    let dynamics = assemble(&mut mech, &spec).unwrap();
    FreeBody {
        mech,
        dynamics,
        coords,
        mass: 7.5,
        inertia,
    }
}

pub fn random_state(rng: &mut ChaCha8Rng, n_symbols: usize, coords: &[[SymbolId; 3]]) -> Vec<f64> {
    let mut x = vec![0.0; n_symbols];
    for c in coords {
        x[c[0].index()] = rng.gen_range(-1.2..1.2);
        x[c[1].index()] = rng.gen_range(-2.0..2.0);
    }
    x
}

pub fn solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let mut lu = FullPivLu::new(a.rows(), a.cols());
    lu.factor(a).unwrap();
    let mut x = vec![0.0; b.len()];
    lu.solve(b, &mut x);
    x
}

fn mat3_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Assembled free-body accelerations against Newton's and Euler's
/// equations written out for the Z-Y-X angle sequence.
pub fn free_body_error(seed: u64) -> f64 {
    let fb = free_body();
    let n = fb.dynamics.dims.nq;
    let mut ev = fb.dynamics.evaluator();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x = random_state(&mut rng, fb.dynamics.symbols.n_symbols, &fb.coords);
        ev.run(Function::MassMatrix, &x);
        ev.run(Function::Delta, &x);
        let m = Matrix::from_rows(n, n, ev.out(Function::MassMatrix).to_vec());
        for i in 0..3 {
            for j in 0..6 {
                let want = if i == j { fb.mass } else { 0.0 };
                worst = worst.max((m[(i, j)] - want).abs().max((m[(j, i)] - want).abs()) / fb.mass);
            }
        }
        let qdd = solve(&m, ev.out(Function::Delta));
        for k in 0..3 {
            worst = worst.max((qdd[k] - G[k]).abs() / 9.81);
        }
        let v = |k: usize| x[fb.coords[k][0].index()];
        let d = |k: usize| x[fb.coords[k][1].index()];
        let (th, ph) = (v(4), v(5));
        let (dps, dth, dph) = (d(3), d(4), d(5));
        let (ddps, ddth, ddph) = (qdd[3], qdd[4], qdd[5]);
        let (st, ct, sp, cp) = (th.sin(), th.cos(), ph.sin(), ph.cos());
        let w = [
            dph - dps * st,
            dth * cp + dps * ct * sp,
            -dth * sp + dps * ct * cp,
        ];
        let wd = [
            ddph - ddps * st - dps * dth * ct,
            ddth * cp - dth * dph * sp + ddps * ct * sp - dps * dth * st * sp + dps * dph * ct * cp,
            -ddth * sp - dth * dph * cp + ddps * ct * cp
                - dps * dth * st * cp
                - dps * dph * ct * sp,
        ];
        let iwd = mat3_vec(&fb.inertia, wd);
        let gyro = cross(w, mat3_vec(&fb.inertia, w));
        let scale = iwd.iter().chain(&gyro).fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..3 {
            worst = worst.max((iwd[k] + gyro[k]).abs() / scale);
        }
    }
    worst
}

/// Point mass `m` on a massless arm of length `l`, swinging about y.
pub fn pendulum(m: f64, l: f64) -> (AssembledDynamics, [SymbolId; 3]) {
    let mut mech = Mech::new(Model::new());
    let th = mech.model.coordinate("th").unwrap();
    let arm = mech.rotated_base("arm", GROUND, Axis::Y, Expr::sym(th[0]));
    let bob = mech.new_point("bob", ORIGIN, Vec3S::from_f64([0.0, 0.0, -l], arm));
    let spec = SystemSpec {
        coords: vec![th],
        bodies: vec![RigidBody {
            name: "bob".into(),
            base: arm,
            com: bob,
            mass: m,
            inertia: [[0.0; 3]; 3],
        }],
        forces: vec![ForceElement::Gravity { g: G }],
        ..Default::default()
    };
    (assemble(&mut mech, &spec).unwrap(), th)
}

/// Pendulum mass and generalized force against m·l² and −m·g·l·sin θ.
pub fn pendulum_error() -> f64 {
    let (m, l) = (2.5, 0.8);
    let (d, th) = pendulum(m, l);
    let mut ev = d.evaluator();
    let mut x = vec![0.0; d.symbols.n_symbols];
    let mut worst: f64 = 0.0;
    for k in 0..25 {
        let t = -3.0 + 0.25 * k as f64;
        x[th[0].index()] = t;
        x[th[1].index()] = 0.3 * k as f64;
        ev.run(Function::MassMatrix, &x);
        ev.run(Function::Delta, &x);
        let mm = ev.out(Function::MassMatrix)[0];
        let delta = ev.out(Function::Delta)[0];
        worst = worst.max((mm - m * l * l).abs() / (m * l * l));
        worst = worst.max((delta + m * 9.81 * l * t.sin()).abs() / (m * 9.81 * l));
    }
    worst
}

/// Embedded against augmented contact formulation on the wheelset. The
/// embedded form drops J_ns·s̈, which vanishes on the constraint manifold,
/// so states are projected tightly.
pub fn embedded_vs_augmented_error() -> f64 {
    let mut d = Desk::new(StepConfig {
        tol: 1e-12,
        ..Default::default()
    });
    let nq = d.int.dims().nq;
    let mut worst: f64 = 0.0;
    for mut st in random_states(&mut d, 8, 5) {
        d.int.plant.load_profiles(&mut st.x);
        d.int.plant.update_contacts(&mut st.x, &st.normal).unwrap();
        let n = nq + d.int.dims().nc;
        let mut a = Matrix::zeros(n, n);
        let mut rhs = vec![0.0; n];
        d.int.plant.eval.reduced_system(&st.x, &mut a, &mut rhs);
        let e = solve(&a, &rhs);
        let (aa, ra) = d.int.plant.eval.accf_system(&st.x);
        let full = solve(&aa, &ra);
        let scale = max_abs(&e[..nq]).max(1.0);
        for i in 0..nq {
            worst = worst.max((e[i] - full[i]).abs() / scale);
        }
    }
    worst
}

/// δ against δ^NK − C^K·q̇ at random wheelset states.
pub fn delta_split_error(states: usize) -> f64 {
    let mut d = Desk::new(StepConfig::default());
    let sym = d.model.dynamics.symbols.clone();
    let nq = d.int.dims().nq;
    let mut worst: f64 = 0.0;
    for mut st in random_states(&mut d, states, 4) {
        d.int.plant.load_profiles(&mut st.x);
        d.int.plant.update_contacts(&mut st.x, &st.normal).unwrap();
        let ev = &mut d.int.plant.eval;
        ev.run(Function::Delta, &st.x);
        let delta = ev.out(Function::Delta).to_vec();
        ev.run(Function::DeltaNk, &st.x);
        let dnk = ev.out(Function::DeltaNk).to_vec();
        let mut ck = Matrix::zeros(nq, nq);
        ev.kalker_damping(&st.x, &mut ck);
        let qd: Vec<f64> = sym.dq.iter().map(|s| st.x[s.index()]).collect();
        let cq = ck.mul_vec(&qd);
        let scale = max_abs(&delta).max(max_abs(&cq));
        for i in 0..nq {
            worst = worst.max((delta[i] - (dnk[i] - cq[i])).abs() / scale);
        }
    }
    worst
}
