//! Symbolic wheel/rail surfaces, contact frames, constraints, curvatures and
//! creepage numerators for one wheel-rail pair.

use crate::mechkin::{BaseId, Frame, Mech, PointId, Vec3S, GROUND, ORIGIN};
use crate::symcore::{Expr, Model, SymError, SymbolId, SymbolKind};

use super::spline::CubicSpline;

/// One cubic segment with runtime coefficients: the symbolic model sees a
/// single polynomial, the numeric side swaps in the active segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymCubic {
    pub a: SymbolId,
    pub b: SymbolId,
    pub c: SymbolId,
    pub d: SymbolId,
    pub bp: SymbolId,
}

impl SymCubic {
    pub fn new(model: &mut Model, prefix: &str) -> Result<Self, SymError> {
        let mut p = |s: &str| model.parameter(&format!("{prefix}_{s}"));
        Ok(Self {
            a: p("a")?,
            b: p("b")?,
            c: p("c")?,
            d: p("d")?,
            bp: p("bp")?,
        })
    }

    /// `((a·Δ + b)·Δ + c)·Δ + d`, `Δ = u − bp`.
    pub fn apply(&self, m: &mut Model, u: Expr) -> Expr {
        let x = m.sub(u, Expr::sym(self.bp));
        let mut acc = Expr::sym(self.a);
        for k in [self.b, self.c, self.d] {
            let t = m.mul(acc, x);
            acc = m.add(t, Expr::sym(k));
        }
        acc
    }

    /// Writes the coefficients of the segment active at `u` into the value
    /// vector (indexed by symbol id). Returns true when `u` was clamped.
    pub fn load(&self, spline: &CubicSpline, u: f64, values: &mut [f64]) -> bool {
        let (k, clamped) = spline.segment(u);
        let (bp, [a, b, c, d]) = spline.coefficients(k);
        values[self.a.index()] = a;
        values[self.b.index()] = b;
        values[self.c.index()] = c;
        values[self.d.index()] = d;
        values[self.bp.index()] = bp;
        clamped
    }
}

/// Symbols owned by one contact.
#[derive(Clone, Debug)]
pub struct ContactSymbols {
    /// `[θʷ, uʷ, sʳ, uʳ]`, each as `[s, ṡ, s̈]`.
    pub s: [[SymbolId; 3]; 4],
    pub wheel: SymCubic,
    pub rail: SymCubic,
    /// Track centerline x, y, z and camber.
    pub track: [SymCubic; 4],
    /// Creep force and spin moment `[f_x, f_y, m_z]`.
    pub force: [SymbolId; 3],
    /// Creep stiffness entries `[k11, k22, k23, k33]` (see `kalker_entries`).
    pub k: [SymbolId; 4],
}

/// Where a contact attaches in the kinematic model.
#[derive(Clone, Copy, Debug)]
pub struct ContactSetup {
    /// Wheel reference point on the axle.
    pub wheel_center: PointId,
    /// Non-spinning wheelset base.
    pub nswhs: BaseId,
    /// Spinning wheelset base.
    pub wheel_base: BaseId,
    /// Lateral offset of this rail's base line from the track centerline.
    pub rail_offset: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ContactFrames {
    pub t_xr: Vec3S,
    pub t_yr: Vec3S,
    pub n_r: Vec3S,
    pub t_xw: Vec3S,
    pub t_yw: Vec3S,
    pub n_w: Vec3S,
}

/// All symbolic quantities of one contact.
#[derive(Clone, Debug)]
pub struct ContactExprs {
    pub sym: ContactSymbols,
    pub setup: ContactSetup,
    /// `r_{Oʷ}^{Pʷ}` in the NSWHS base.
    pub wheel_point: Vec3S,
    /// `r_{Oʳ}^{Pʳ}` in the ground base.
    pub rail_point: Vec3S,
    pub p_w: PointId,
    pub p_r: PointId,
    pub frames: ContactFrames,
    pub phi_n: Expr,
    pub phi_d: [Expr; 4],
    /// `[1/R_xʷ, 1/R_yʷ, 1/R_xʳ, 1/R_yʳ]`.
    pub curvature: [Expr; 4],
    /// Creepage numerators `[ν_x, ν_y, ν_φ]`.
    pub creep_num: [Expr; 3],
    /// Shared creepage denominator `V`.
    pub creep_den: Expr,
    /// Velocity of the wheel material point at `Pʷ`, ground base.
    pub v_att: Vec3S,
    /// Wheelset angular velocity, ground base.
    pub omega: Vec3S,
}

/// Curvature `|f″| / (1 + f′²)^{3/2}` of a profile at `u`.
fn profile_curvature(m: &mut Model, f: Expr, u: SymbolId) -> Result<Expr, SymError> {
    let df = m.differentiate(f, u);
    let ddf = m.differentiate(df, u);
    let df2 = m.square(df);
    let base = m.add(Expr::ONE, df2);
    let den = m.powf(base, 1.5)?;
    let num = m.abs(ddf);
    m.div(num, den)
}

/// Builds contact `index` (used in symbol names) on the given setup.
pub fn build_contact(
    mech: &mut Mech,
    index: usize,
    setup: ContactSetup,
) -> Result<ContactExprs, SymError> {
    let i = index;
    let m = &mut mech.model;
    let th_w = m.contact_coordinate(&format!("thw{i}"))?;
    let u_w = m.contact_coordinate(&format!("uw{i}"))?;
    let s_r = m.contact_coordinate(&format!("sr{i}"))?;
    let u_r = m.contact_coordinate(&format!("ur{i}"))?;
    let wheel = SymCubic::new(m, &format!("fw{i}"))?;
    let rail = SymCubic::new(m, &format!("fr{i}"))?;
    let track = [
        SymCubic::new(m, &format!("tx{i}"))?,
        SymCubic::new(m, &format!("ty{i}"))?,
        SymCubic::new(m, &format!("tz{i}"))?,
        SymCubic::new(m, &format!("tth{i}"))?,
    ];
    let force = [
        m.make_symbol(&format!("fx{i}"), SymbolKind::ExternalForce)?,
        m.make_symbol(&format!("fy{i}"), SymbolKind::ExternalForce)?,
        m.make_symbol(&format!("mz{i}"), SymbolKind::ExternalForce)?,
    ];
    let k = [
        m.parameter(&format!("k11_{i}"))?,
        m.parameter(&format!("k22_{i}"))?,
        m.parameter(&format!("k23_{i}"))?,
        m.parameter(&format!("k33_{i}"))?,
    ];
    let sym = ContactSymbols {
        s: [th_w, u_w, s_r, u_r],
        wheel,
        rail,
        track,
        force,
        k,
    };
    let (thw, uw, sr, ur) = (th_w[0], u_w[0], s_r[0], u_r[0]);

    // wheel surface point in the NSWHS base
    let fw = wheel.apply(m, Expr::sym(uw));
    let cth = m.cos(Expr::sym(thw));
    let sth = m.sin(Expr::sym(thw));
    let wx = m.mul(fw, cth);
    let wz = m.mul(fw, sth).negated();
    let wheel_point = Vec3S::new([wx, Expr::sym(uw), wz], setup.nswhs);

    // rail surface point: centerline plus camber frame
    let s = Expr::sym(sr);
    let cx = track[0].apply(m, s);
    let cy = track[1].apply(m, s);
    let cz = track[2].apply(m, s);
    let camber = track[3].apply(m, s);
    let dc = m.differentiate_all(&[cx, cy, cz], sr);
    let tangent = Vec3S::new([dc[0], dc[1], dc[2]], GROUND);
    let t_hat = mech.normalize(&tangent)?;
    let h = Vec3S::new([t_hat.c[1].negated(), t_hat.c[0], Expr::ZERO], GROUND);
    let h = mech.normalize(&h)?;
    let up = mech.cross(&t_hat, &h);
    let m = &mut mech.model;
    let (cc, sc) = (m.cos(camber), m.sin(camber));
    let c_hat = Vec3S::new(
        [0, 1, 2].map(|j| {
            let a = m.mul(cc, h.c[j]);
            let b = m.mul(sc, up.c[j]);
            m.add(a, b)
        }),
        GROUND,
    );
    let n_hat = mech.cross(&t_hat, &c_hat);
    let m = &mut mech.model;
    let lateral = m.add(Expr::c(setup.rail_offset), Expr::sym(ur));
    let fr = rail.apply(m, Expr::sym(ur));
    let rail_point = Vec3S::new(
        [0, 1, 2].map(|j| {
            let a = m.mul(lateral, c_hat.c[j]);
            let b = m.mul(fr, n_hat.c[j]);
            let base = [cx, cy, cz][j];
            let ab = m.add(a, b);
            m.add(base, ab)
        }),
        GROUND,
    );

    // surface frames
    let d_s = m.differentiate_all(&rail_point.c, sr);
    let d_ur = m.differentiate_all(&rail_point.c, ur);
    let t_xr = mech.normalize(&Vec3S::new([d_s[0], d_s[1], d_s[2]], GROUND))?;
    let t_yr = mech.normalize(&Vec3S::new([d_ur[0], d_ur[1], d_ur[2]], GROUND))?;
    let n_r = mech.cross(&t_xr, &t_yr);
    // tangents of a canted transition are not exactly perpendicular
    let n_r = mech.normalize(&n_r)?;
    let m = &mut mech.model;
    let d_th = m.differentiate_all(&wheel_point.c, thw);
    let d_uw = m.differentiate_all(&wheel_point.c, uw);
    let t_xw = mech.normalize(&Vec3S::new([d_th[0], d_th[1], d_th[2]], setup.nswhs))?;
    let t_yw = mech.normalize(&Vec3S::new([d_uw[0], d_uw[1], d_uw[2]], setup.nswhs))?;
    let n_w = mech.cross(&t_xw, &t_yw);
    let n_w = mech.normalize(&n_w)?;

    // constraints
    let p_w = mech.new_point(&format!("Pw{i}"), setup.wheel_center, wheel_point);
    let p_r = mech.new_point(&format!("Pr{i}"), ORIGIN, rail_point);
    let gap = mech.position(p_r, p_w, GROUND);
    let phi_n = mech.dot(&n_r, &gap);
    let phi_d = [
        mech.dot(&t_xr, &gap),
        mech.dot(&t_yr, &gap),
        mech.dot(&t_xw, &n_r),
        mech.dot(&t_yw, &n_r),
    ];

    // curvatures
    let e_y = Vec3S::from_f64([0.0, 1.0, 0.0], setup.nswhs);
    let ny = mech.dot(&n_r, &e_y);
    let m = &mut mech.model;
    let ny2 = m.square(ny);
    let sin_contact = m.sub(Expr::ONE, ny2);
    let sin_contact = m.sqrt(sin_contact)?;
    let rx2 = m.square(wheel_point.c[0]);
    let rz2 = m.square(wheel_point.c[2]);
    let r2 = m.add(rx2, rz2);
    let radial = m.sqrt(r2)?;
    let kx_w = m.div(sin_contact, radial)?;
    let ky_w = profile_curvature(m, fw, uw)?;
    let ky_r = profile_curvature(m, fr, ur)?;
    let curvature = [kx_w, ky_w, Expr::ZERO, ky_r];

    // creepages
    let v_o = mech.velocity(Frame::GROUND, setup.wheel_center)?;
    let omega = mech.angular_velocity_in(GROUND, setup.wheel_base, GROUND)?;
    let w_r = mech.cross(&omega, &wheel_point);
    let v_att = mech.add(&v_o, &w_r);
    let creep_num = [
        mech.dot(&v_att, &t_xr),
        mech.dot(&v_att, &t_yr),
        mech.dot(&omega, &n_r),
    ];
    let nv = mech.norm(&v_o)?;
    let nw = mech.norm(&w_r)?;
    let m = &mut mech.model;
    let sum = m.add(nv, nw);
    let creep_den = m.mul(Expr::c(0.5), sum);

    Ok(ContactExprs {
        sym,
        setup,
        wheel_point,
        rail_point,
        p_w,
        p_r,
        frames: ContactFrames {
            t_xr,
            t_yr,
            n_r,
            t_xw,
            t_yw,
            n_w,
        },
        phi_n,
        phi_d,
        curvature,
        creep_num,
        creep_den,
        v_att,
        omega,
    })
}
