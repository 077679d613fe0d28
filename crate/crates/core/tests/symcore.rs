mod common;

use common::checks;
use common::oracle::{random_dag, symbols};
use proptest::prelude::*;
use railsym::mechkin::{Axis, Mech, Vec3S, GROUND};
use railsym::symcore::{Expr, Instr, Model, SymbolId, SymbolKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn figure_three_builds_eleven_atoms() {
    let mut m = Model::new();
    let th = m.make_symbol("theta", SymbolKind::Coordinate).unwrap();
    let [ux, uy, uz, vx, vy, vz] =
        ["ux", "uy", "uz", "vx", "vy", "vz"].map(|n| Expr::sym(m.parameter(n).unwrap()));
    let a1 = m.cos(Expr::sym(th));
    let a2 = m.sin(Expr::sym(th));
    let a3 = m.mul(a1, vy);
    let a4 = m.mul(a2, vz);
    let a5 = m.mul(a2, vy);
    let a6 = m.mul(a1, vz);
    let a7 = m.sub(a3, a4);
    let a8 = m.add(a5, a6);
    let a9 = m.add(ux, vx);
    let a10 = m.add(uy, a7);
    let a11 = m.add(uz, a8);
    assert_eq!(m.atom_count(), 11);
    assert_eq!(checks::figure_three_atoms(), 11);
    let all = [a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, a11];
    let ids: std::collections::HashSet<_> = all.iter().map(|e| e.atom().unwrap()).collect();
    assert_eq!(ids.len(), 11);

    // Same sum through the vector algebra: the rotated components land on
    // the very same atoms.
    let mut mech = Mech::new(m);
    let b1 = mech.rotated_base("B1", GROUND, Axis::X, Expr::sym(th));
    let u = Vec3S::new([ux, uy, uz], GROUND);
    let v = Vec3S::new([vx, vy, vz], b1);
    let w = mech.add(&u, &v);
    assert_eq!(w.c, [a9, a10, a11]);
    assert_eq!(mech.model.atom_count(), 11);

    let syms: Vec<SymbolId> = (0..mech.model.symbol_count() as u32)
        .map(SymbolId)
        .collect();
    let tape = mech.model.export_tape("fig3", &w.c, 3, 1, &syms).unwrap();
    assert_eq!(tape.stats.atoms, 11);
    let (out, st) = tape.eval(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert!(!st.non_finite);
    assert_eq!(out, vec![5.0, 7.0, 9.0]);
}

#[test]
fn building_the_figure_in_another_order_still_shares() {
    let mut m = Model::new();
    let th = Expr::sym(m.make_symbol("theta", SymbolKind::Coordinate).unwrap());
    let vy = Expr::sym(m.parameter("vy").unwrap());
    let s1 = m.sin(th);
    let p1 = m.mul(s1, vy);
    let p2 = m.mul(vy, s1);
    assert_eq!(p1, p2);
    let c1 = m.cos(th);
    let c2 = m.cos(th);
    assert_eq!(c1, c2);
    assert_eq!(m.atom_count(), 3);
}

#[test]
fn duplicated_output_adds_no_instructions() {
    assert_eq!(checks::duplicate_export_overhead(21), (0, 0));
}

#[test]
fn tape_matches_recursive_evaluation() {
    let start = std::time::Instant::now();
    let worst = checks::tape_vs_recursive(120, 1);
    assert!(worst <= 1e-12, "{worst:e}");
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn derivatives_match_central_differences() {
    let (worst, checked) = checks::dag_gradient_error(2);
    assert!(checked > 300);
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn time_derivative_matches_trajectory_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let mut m = Model::new();
        let q: Vec<[SymbolId; 3]> = (0..3)
            .map(|i| m.coordinate(&format!("q{i}")).unwrap())
            .collect();
        let qs: Vec<SymbolId> = q.iter().map(|s| s[0]).collect();
        let pool = random_dag(&mut rng, 3, 40, true);
        let r = pool.last().unwrap();
        let e = r.build(&mut m, &qs);
        let de = m.time_derivative(e).unwrap();
        let q0: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut vals = vec![0.0; m.symbol_count()];
        for k in 0..3 {
            vals[q[k][0].0 as usize] = q0[k];
            vals[q[k][1].0 as usize] = v[k];
        }
        let h = 1e-5;
        let at = |t: f64| r.eval(&(0..3).map(|k| q0[k] + v[k] * t).collect::<Vec<_>>());
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let got = m.eval_one(de, &vals);
        assert!((got - fd).abs() / fd.abs().max(1.0) < 1e-6);
    }
}

#[test]
fn substitution_with_empty_map_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut m = Model::new();
    let syms = symbols(&mut m, 2);
    let e = random_dag(&mut rng, 2, 30, false)
        .last()
        .unwrap()
        .build(&mut m, &syms);
    let n = m.atom_count();
    assert_eq!(m.substitute(e, &Default::default()), e);
    assert_eq!(m.atom_count(), n);
}

#[test]
fn tape_evaluation_does_not_depend_on_instruction_kinds_only() {
    // sanity on the instruction encoding: sources of a register are earlier
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut m = Model::new();
    let syms = symbols(&mut m, 4);
    let pool = random_dag(&mut rng, 4, 80, false);
    let exprs: Vec<Expr> = pool
        .iter()
        .rev()
        .take(4)
        .map(|r| r.build(&mut m, &syms))
        .collect();
    let tape = m.export_tape("t", &exprs, 4, 1, &syms).unwrap();
    for (k, ins) in tape.instructions().iter().enumerate() {
        let srcs = match *ins {
            Instr::Bin(_, a, b) => vec![a, b],
            Instr::Un(_, a) => vec![a],
        };
        for s in srcs {
            if let railsym::symcore::Src::Reg(r) = s {
                assert!((r as usize) < k);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interning_is_idempotent(seed in any::<u64>(), nodes in 5usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pool = random_dag(&mut rng, 3, nodes, false);
        let mut m = Model::new();
        let syms = symbols(&mut m, 3);
        let first: Vec<Expr> = pool.iter().map(|r| r.build(&mut m, &syms)).collect();
        let n = m.atom_count();
        let second: Vec<Expr> = pool.iter().map(|r| r.build(&mut m, &syms)).collect();
        prop_assert_eq!(first, second);
        prop_assert_eq!(m.atom_count(), n);
    }
}
