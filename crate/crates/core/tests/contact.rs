mod common;

use common::checks::{self, random_states};
use common::{max_abs, Desk};
use railsym::contact::{
    hertz_patch, kalker_entries, kalker_forces, kalker_matrix, CubicSpline, Curvatures, HertzTable,
    KalkerTable, Material, TrackGeometry,
};
use railsym::dynamics::Function;
use railsym::integrator::{SolverState, StepConfig};
use railsym::mechkin::GROUND;

#[test]
fn constraint_jacobians_match_central_differences() {
    let worst = checks::constraint_jacobian_error();
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn normal_constraint_is_stationary_in_contact_coordinates() {
    // vanishes at consistent states; converge the projections fully
    let mut d = Desk::new(StepConfig {
        tol: 1e-13,
        ..Default::default()
    });
    for st in random_states(&mut d, 5, 2) {
        d.int.plant.eval.run(Function::JacNs, &st.x);
        let jns = max_abs(d.int.plant.eval.out(Function::JacNs));
        assert!(jns < 1e-10, "|dphi_n/ds| = {jns:e}");
    }
}

#[test]
fn kalker_blocks_match_finite_differences() {
    let worst = checks::kalker_block_error();
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn delta_split_is_exact() {
    let worst = checks::delta_split_error(20);
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn augmented_and_embedded_formulations_agree() {
    let worst = checks::embedded_vs_augmented_error();
    assert!(worst <= 1e-9, "{worst:e}");
}

#[test]
fn frames_are_orthonormal() {
    let mut d = Desk::new(StepConfig::default());
    let mut mech = d.model.mech.clone();
    let frames: Vec<_> = d.model.contacts.iter().map(|c| c.frames).collect();
    for mut st in random_states(&mut d, 4, 6) {
        d.int.plant.load_profiles(&mut st.x);
        for f in &frames {
            for set in [[&f.t_xr, &f.t_yr, &f.n_r], [&f.t_xw, &f.t_yw, &f.n_w]] {
                let v: Vec<[f64; 3]> = set
                    .iter()
                    .map(|u| {
                        let g = mech.express(u, GROUND);
                        let e = mech.model.eval(&g.c, &st.x);
                        [e[0], e[1], e[2]]
                    })
                    .collect();
                for i in 0..3 {
                    for j in 0..3 {
                        let dot: f64 = (0..3).map(|k| v[i][k] * v[j][k]).sum();
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((dot - want).abs() < 1e-12, "frame dot {i}{j} = {dot}");
                    }
                }
            }
        }
    }
}

#[test]
fn curvatures_at_the_centered_contact() {
    let mut d = Desk::new(StepConfig::default());
    let mut st = d.state(0.0, 0.0, 10.0, 1.0);
    d.int.plant.load_profiles(&mut st.x);
    d.int.plant.update_contacts(&mut st.x, &st.normal).unwrap();
    let sym = &d.model.contacts[0].sym;
    let ur = st.x[sym.s[3][0].index()];
    let uw = st.x[sym.s[1][0].index()];
    // contact where the rail slope matches the conicity
    assert!((ur.abs() - 0.3 * 0.05).abs() < 1e-9, "u_r {ur}");
    let c = d.int.plant.eval.contacts[0].curvature;
    let rail = (1.0 / 0.3) / (1.0 + (ur / 0.3).powi(2)).powf(1.5);
    assert!((c.rail_y - rail).abs() < 1e-9);
    assert_eq!(c.wheel_y, 0.0);
    assert_eq!(c.rail_x, 0.0);
    let radius = 0.45 - 0.05 * uw;
    let cos_delta = 1.0 / (1.0f64 + 0.05 * 0.05).sqrt();
    assert!(
        (c.wheel_x - cos_delta / radius).abs() < 1e-9,
        "{} vs {}",
        c.wheel_x,
        cos_delta / radius
    );
}

fn creep_at(d: &mut Desk, st: &mut SolverState) -> Vec<[f64; 3]> {
    d.int.plant.load_profiles(&mut st.x);
    d.int.plant.update_contacts(&mut st.x, &st.normal).unwrap();
    d.int.plant.eval.contacts.iter().map(|c| c.creep).collect()
}

#[test]
fn pure_rolling_has_no_creepage() {
    let mut d = Desk::new(StepConfig::default());
    let mut st = d.state(0.0, 0.0, 12.0, 1.0);
    let sym = d.model.dynamics.symbols.clone();
    let uw = st.x[d.model.contacts[0].sym.s[1][0].index()];
    st.x[sym.dq[d.q("spin")].index()] = 12.0 / (0.45 - 0.05 * uw);
    for c in creep_at(&mut d, &mut st) {
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12, "{c:?}");
    }
}

#[test]
fn locked_wheel_slides_with_unit_numerator() {
    // denominator is the mean of axle and rolling speeds, so a locked
    // wheel gives ξx = V / (V/2)
    let mut d = Desk::new(StepConfig::default());
    let mut st = d.state(0.0, 0.0, 8.0, 0.0);
    for c in creep_at(&mut d, &mut st) {
        assert!((c[0] - 2.0).abs() < 1e-12, "{c:?}");
        assert!(c[1].abs() < 1e-12);
    }
}

#[test]
fn friction_limit_caps_sliding_forces() {
    let text = common::wheelset_text().replace("shear = 8.0e10", "shear = 8.0e10\nfriction = 0.3");
    let mut capped = Desk::from_text(&text, StepConfig::default());
    let mut free = Desk::new(StepConfig::default());
    for (d, limited) in [(&mut capped, true), (&mut free, false)] {
        let mut st = d.state(0.0, 0.0, 8.0, 0.9);
        creep_at(d, &mut st);
        for (c, n) in d.int.plant.eval.contacts.iter().zip(&st.normal) {
            let t = c.force[0].hypot(c.force[1]);
            assert_eq!(c.saturated, limited);
            if limited {
                assert!((t - 0.3 * n).abs() <= 1e-9 * t, "{t} vs {}", 0.3 * n);
            } else {
                assert!(t > 0.3 * n);
            }
        }
    }
}

#[test]
fn yaw_gives_lateral_creepage() {
    let mut d = Desk::new(StepConfig::default());
    let psi = 2e-3;
    let mut st = d.state(0.0, psi, 10.0, 1.0);
    let sym = d.model.dynamics.symbols.clone();
    let uw = st.x[d.model.contacts[0].sym.s[1][0].index()];
    st.x[sym.dq[d.q("spin")].index()] = 10.0 * psi.cos() / (0.45 - 0.05 * uw);
    for c in creep_at(&mut d, &mut st) {
        assert!(
            (c[1] + psi).abs() < 0.02 * psi,
            "xi_y {} for yaw {psi}",
            c[1]
        );
    }
}

#[test]
fn lifting_the_wheelset_opens_the_gap() {
    let mut d = Desk::new(StepConfig::default());
    let mut st = d.state(0.0, 0.0, 0.0, 0.0);
    d.int.plant.load_profiles(&mut st.x);
    let h = 1e-3;
    let z = d.model.dynamics.symbols.q[d.q("z")].index();
    st.x[z] += h;
    d.int.plant.eval.run(Function::PhiN, &st.x);
    // rail normal leans by the conicity angle
    let cos_delta = 1.0 / (1.0f64 + 0.05 * 0.05).sqrt();
    for &g in d.int.plant.eval.out(Function::PhiN) {
        assert!((g - h * cos_delta).abs() < 1e-9, "{g}");
    }
}

#[test]
fn spline_reproduces_a_sine() {
    let n = 32;
    let u: Vec<f64> = (0..=n)
        .map(|k| std::f64::consts::PI * k as f64 / n as f64)
        .collect();
    let y: Vec<f64> = u.iter().map(|u| u.sin()).collect();
    let s = CubicSpline::natural(&u, &y).unwrap();
    for k in 0..=1000 {
        let x = std::f64::consts::PI * k as f64 / 1000.0;
        let e = s.eval(x);
        assert!((e.f - x.sin()).abs() < 1e-5, "f at {x}");
        assert!((e.ddf + x.sin()).abs() < 1e-2, "f'' at {x}");
    }
}

#[test]
fn spline_arc_has_the_circle_curvature() {
    let rho = 0.3;
    let u: Vec<f64> = (0..=60).map(|k| -0.1 + 0.2 * k as f64 / 60.0).collect();
    let y: Vec<f64> = u.iter().map(|u| (rho * rho - u * u).sqrt()).collect();
    let s = CubicSpline::natural(&u, &y).unwrap();
    for k in 0..=40 {
        let x = -0.05 + 0.1 * k as f64 / 40.0;
        let e = s.eval(x);
        let kappa = e.ddf.abs() / (1.0 + e.df * e.df).powf(1.5);
        assert!(
            (1.0 / kappa - rho).abs() < 0.01 * rho,
            "{} at {x}",
            1.0 / kappa
        );
    }
}

fn sample_curvatures() -> Curvatures {
    Curvatures {
        wheel_x: 1.0 / 0.45,
        wheel_y: 0.0,
        rail_x: 0.0,
        rail_y: 1.0 / 0.3,
    }
}

#[test]
fn patch_grows_with_load() {
    let t = HertzTable::bundled();
    let k = sample_curvatures();
    let mut prev = (0.0, 0.0);
    for i in 0..50 {
        let p = hertz_patch(&t, 1e3 * i as f64, &k, &Material::STEEL).unwrap();
        assert!(p.a >= prev.0 && p.b >= prev.1);
        prev = (p.a, p.b);
    }
}

#[test]
fn unloaded_contact_has_no_creep_stiffness() {
    let p = hertz_patch(
        &HertzTable::bundled(),
        0.0,
        &sample_curvatures(),
        &Material::STEEL,
    )
    .unwrap();
    let (k, _) = kalker_entries(&KalkerTable::bundled(), &p, 0.3);
    assert_eq!(k, [0.0; 4]);
    let c = kalker_matrix(Material::STEEL.g, k);
    assert!(c.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn creep_forces_are_linear_and_dissipative() {
    use rand::{Rng, SeedableRng};
    let p = hertz_patch(
        &HertzTable::bundled(),
        6e4,
        &sample_curvatures(),
        &Material::STEEL,
    )
    .unwrap();
    let (k, _) = kalker_entries(&KalkerTable::bundled(), &p, 0.3);
    let g = Material::STEEL.g;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let mut draw = || [0; 3].map(|_| rng.gen_range(-1e-2..1e-2));
    for _ in 0..200 {
        let (a, b) = (draw(), draw());
        let (alpha, beta) = (1.7, -0.4);
        let mix = [0, 1, 2].map(|i| alpha * a[i] + beta * b[i]);
        let (fa, fb, fm) = (
            kalker_forces(g, k, a),
            kalker_forces(g, k, b),
            kalker_forces(g, k, mix),
        );
        let scale = fm.iter().chain(&fa).fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..3 {
            assert!((fm[i] - alpha * fa[i] - beta * fb[i]).abs() <= 1e-12 * scale);
        }
        let power: f64 = (0..3).map(|i| fa[i] * a[i]).sum();
        assert!(power <= 0.0, "{power}");
    }
}

/// `(t̂, ĉ, n̂)` from the centerline splines: unit tangent, horizontal
/// left normal rotated by the camber, and their cross product.
fn camber_frame(track: &TrackGeometry, s: f64) -> [[f64; 3]; 3] {
    let d = [&track.x, &track.y, &track.z].map(|c| c.eval(s).df);
    let norm = |v: [f64; 3]| {
        let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        v.map(|c| c / l)
    };
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let t = norm(d);
    let h = norm([-t[1], t[0], 0.0]);
    let up = cross(t, h);
    let th = track.camber.eval(s).f;
    let c = [0, 1, 2].map(|j| th.cos() * h[j] + th.sin() * up[j]);
    [t, c, cross(t, c)]
}

#[test]
fn frames_along_a_curve() {
    use railsym::integrator::Integrator;
    use railsym::vehicle::{build_model, bundled, TrackSpec, VehicleConfig};
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;
    let track = TrackSpec::parse(bundled::CURVED_TRACK)
        .unwrap()
        .compile()
        .unwrap();
    let (lo, hi) = track.domain();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let f = camber_frame(&track, rng.gen_range(lo..hi));
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| f[i][k] * f[j][k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "{i}{j}: {dot}");
            }
        }
        // n̂ has a positive vertical part: right-handed with ĉ to the left
        assert!(f[2][2] > 0.0);
    }

    let model = build_model(
        &VehicleConfig::from_toml(&common::wheelset_text()).unwrap(),
        Arc::new(track),
    )
    .unwrap();
    let int = Integrator::new(model.plant(), StepConfig::default());
    let mut mech = model.mech.clone();
    let mut x = model.reference.clone();
    for _ in 0..100 {
        for c in &model.contacts {
            x[c.sym.s[2][0].index()] = rng.gen_range(lo..hi);
            x[c.sym.s[3][0].index()] = rng.gen_range(-0.02..0.02);
        }
        int.plant.load_profiles(&mut x);
        for c in &model.contacts {
            let f = c.frames;
            let v: Vec<[f64; 3]> = [f.t_xr, f.t_yr, f.n_r]
                .iter()
                .map(|u| {
                    let g = mech.express(u, GROUND);
                    let e = mech.model.eval(&g.c, &x);
                    [e[0], e[1], e[2]]
                })
                .collect();
            let dot = |a: [f64; 3], b: [f64; 3]| (0..3).map(|k| a[k] * b[k]).sum::<f64>();
            assert!((dot(v[2], v[2]) - 1.0).abs() < 1e-10);
            assert!(dot(v[0], v[2]).abs() < 1e-10 && dot(v[1], v[2]).abs() < 1e-10);
        }
    }
}
