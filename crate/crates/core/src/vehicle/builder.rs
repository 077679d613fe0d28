//! Builds the symbolic model of a vehicle description and compiles it.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use crate::contact::{
    build_contact, ContactExprs, ContactProfiles, ContactSetup, CubicSpline, Material,
    TrackGeometry,
};
use crate::dynamics::{
    assemble, AssembledDynamics, ElementKind, ForceElement, RigidBody, SystemSpec,
};
use crate::integrator::Plant;
use crate::mechkin::{Axis, BaseId, Mech, PointId, Vec3S, GROUND, ORIGIN};
use crate::symcore::{Expr, Model, SymbolId};

use super::config::{Attach, BodyConfig, Dof, ForceConfig, ProfileConfig, VehicleConfig};
use super::VehicleError;

#[derive(Clone, Debug)]
pub struct BodyInfo {
    pub name: String,
    pub base: BaseId,
    pub point: PointId,
    pub com: PointId,
    pub mass: f64,
    /// Indices into the coordinate vector of this body's joint motions.
    pub coords: Vec<usize>,
    pub parent: Option<usize>,
    pub joint: Vec<Dof>,
}

#[derive(Clone, Debug)]
pub struct WheelInfo {
    pub body: usize,
    pub left: bool,
    /// Rolling radius at the profile origin, m.
    pub r0: f64,
    /// Index of the spin coordinate.
    pub spin: usize,
}

#[derive(Clone, Debug)]
pub struct TorqueInfo {
    pub name: String,
    pub symbol: SymbolId,
}

/// A compiled vehicle on a track.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    pub name: String,
    pub mech: Mech,
    pub dynamics: AssembledDynamics,
    pub coord_names: Vec<String>,
    pub bodies: Vec<BodyInfo>,
    pub contacts: Vec<ContactExprs>,
    pub wheels: Vec<WheelInfo>,
    pub profiles: Vec<ContactProfiles>,
    pub torques: Vec<TorqueInfo>,
    /// Effective material (shear modulus already scaled by the creep
    /// factor).
    pub material: Material,
    pub v_min: f64,
    pub track: Arc<TrackGeometry>,
    /// Symbol values at the reference configuration with initial guesses
    /// for the contact coordinates.
    pub reference: Vec<f64>,
    pub gravity: [f64; 3],
}

impl CompiledModel {
    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.coord_names.iter().position(|n| n == name)
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    /// Runtime bundle for the integrator.
    pub fn plant(&self) -> Plant {
        Plant::new(
            &self.dynamics,
            &self.contacts,
            self.profiles.clone(),
            self.material,
            self.v_min,
        )
    }
}

fn schema(msg: impl Into<String>) -> VehicleError {
    VehicleError::Schema(msg.into())
}

fn profile(cfg: &ProfileConfig, left: bool, wheel: bool) -> Result<CubicSpline, VehicleError> {
    let s = match *cfg {
        ProfileConfig::Conical {
            r0,
            conicity,
            width,
        } => {
            if !wheel {
                return Err(schema("conical profiles are for wheels"));
            }
            let g = if left { conicity } else { -conicity };
            CubicSpline::linear(-width, width, r0 + g * width, -g)
        }
        ProfileConfig::Crown { radius, width } => {
            if wheel {
                return Err(schema("crown profiles are for rails"));
            }
            let c = 1.0 / radius;
            CubicSpline::from_segments(
                vec![-width, width],
                vec![[0.0, -0.5 * c, width * c, -0.5 * width * width * c]],
            )
            .map_err(|e| schema(e.to_string()))?
        }
        ProfileConfig::Points { ref u, ref f } => if left {
            CubicSpline::natural(u, f)
        } else {
            let um: Vec<f64> = u.iter().rev().map(|v| -v).collect();
            let fm: Vec<f64> = f.iter().rev().copied().collect();
            CubicSpline::natural(&um, &fm)
        }
        .map_err(|e| schema(format!("profile: {e}")))?,
    };
    Ok(s)
}

struct Builder {
    mech: Mech,
    coords: Vec<[SymbolId; 3]>,
    coord_names: Vec<String>,
    bodies: Vec<BodyInfo>,
    by_name: HashMap<String, usize>,
}

impl Builder {
    fn frame_of(&self, body: &str) -> Result<(PointId, BaseId), VehicleError> {
        if body == "ground" {
            return Ok((ORIGIN, GROUND));
        }
        let i = *self
            .by_name
            .get(body)
            .ok_or_else(|| schema(format!("unknown body `{body}`")))?;
        Ok((self.bodies[i].point, self.bodies[i].base))
    }

    fn attach(&mut self, name: &str, a: &Attach) -> Result<PointId, VehicleError> {
        let (p, b) = self.frame_of(&a.body)?;
        if a.at == [0.0; 3] {
            return Ok(p);
        }
        Ok(self.mech.new_point(name, p, Vec3S::from_f64(a.at, b)))
    }

    fn coordinate(&mut self, name: String) -> Result<usize, VehicleError> {
        let c = self.mech.model.coordinate(&name)?;
        self.coords.push(c);
        self.coord_names.push(name);
        Ok(self.coords.len() - 1)
    }

    fn body(&mut self, b: &BodyConfig) -> Result<Option<(BaseId, BaseId)>, VehicleError> {
        if b.name == "ground" || self.by_name.contains_key(&b.name) {
            return Err(schema(format!(
                "body name `{}` is reserved or duplicated",
                b.name
            )));
        }
        let parent = match b.parent.as_str() {
            "ground" => None,
            p => Some(*self.by_name.get(p).ok_or_else(|| {
                schema(format!(
                    "body `{}`: parent `{p}` must be declared first",
                    b.name
                ))
            })?),
        };
        let (pp, pb) = self.frame_of(&b.parent)?;
        let is_wheelset = b.wheelset.is_some();
        if is_wheelset && b.joint.last() != Some(&Dof::Ry) {
            return Err(schema(format!(
                "wheelset `{}`: last joint motion must be `ry` (spin)",
                b.name
            )));
        }
        let mut trans = b.origin.map(Expr::c);
        let mut base = pb;
        let mut nswhs = pb;
        let mut coords = vec![];
        for (k, &dof) in b.joint.iter().enumerate() {
            let last = k + 1 == b.joint.len();
            let label = if is_wheelset && last {
                "spin"
            } else {
                dof.label()
            };
            let idx = self.coordinate(format!("{}.{label}", b.name))?;
            coords.push(idx);
            let q = Expr::sym(self.coords[idx][0]);
            match dof {
                Dof::Tx | Dof::Ty | Dof::Tz => {
                    let axis = [Dof::Tx, Dof::Ty, Dof::Tz]
                        .iter()
                        .position(|d| *d == dof)
                        .unwrap();
                    if base != pb {
                        return Err(schema(format!(
                            "body `{}`: translations must precede rotations",
                            b.name
                        )));
                    }
                    trans[axis] = self.mech.model.add(trans[axis], q);
                }
                Dof::Rx | Dof::Ry | Dof::Rz => {
                    let axis = match dof {
                        Dof::Rx => Axis::X,
                        Dof::Ry => Axis::Y,
                        _ => Axis::Z,
                    };
                    if last {
                        nswhs = base;
                    }
                    base = self
                        .mech
                        .rotated_base(&format!("{}.{label}", b.name), base, axis, q);
                }
            }
        }
        let point = self.mech.new_point(&b.name, pp, Vec3S::new(trans, pb));
        let com = if b.com == [0.0; 3] {
            point
        } else {
            self.mech.new_point(
                &format!("{}.com", b.name),
                point,
                Vec3S::from_f64(b.com, base),
            )
        };
        self.by_name.insert(b.name.clone(), self.bodies.len());
        self.bodies.push(BodyInfo {
            name: b.name.clone(),
            base,
            point,
            com,
            mass: b.mass,
            coords,
            parent,
            joint: b.joint.clone(),
        });
        Ok(is_wheelset.then_some((nswhs, base)))
    }
}

/// Nearest track parameter to the planar point `(x, y)`.
fn nearest_track_param(track: &TrackGeometry, x: f64, y: f64) -> f64 {
    let (lo, hi) = track.domain();
    let n = 2000;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=n {
        let s = lo + (hi - lo) * k as f64 / n as f64;
        let d = (track.x.eval(s).f - x).powi(2) + (track.y.eval(s).f - y).powi(2);
        if d < best.0 {
            best = (d, s);
        }
    }
    let mut s = best.1;
    for _ in 0..20 {
        let (ex, ey) = (track.x.eval(s), track.y.eval(s));
        let g = (ex.f - x) * ex.df + (ey.f - y) * ey.df;
        let h = ex.df * ex.df + ey.df * ey.df + (ex.f - x) * ex.ddf + (ey.f - y) * ey.ddf;
        if h.abs() < 1e-14 {
            break;
        }
        s = (s - g / h).clamp(lo, hi);
    }
    s
}

pub fn build_model(
    cfg: &VehicleConfig,
    track: Arc<TrackGeometry>,
) -> Result<CompiledModel, VehicleError> {
    let mut bld = Builder {
        mech: Mech::new(Model::new()),
        coords: vec![],
        coord_names: vec![],
        bodies: vec![],
        by_name: HashMap::new(),
    };
    let mut contacts = vec![];
    let mut wheels = vec![];
    let mut profiles = vec![];
    for b in &cfg.bodies {
        let ws = bld.body(b)?;
        let (Some((nswhs, wheel_base)), Some(wcfg)) = (ws, &b.wheelset) else {
            continue;
        };
        let body = bld.bodies.len() - 1;
        let point = bld.bodies[body].point;
        let spin = *bld.bodies[body].coords.last().unwrap();
        let rail_hg = wcfg.rail_half_gauge.unwrap_or(wcfg.half_gauge);
        for left in [true, false] {
            let side = if left { 1.0 } else { -1.0 };
            let tag = if left { "L" } else { "R" };
            let center = bld.mech.new_point(
                &format!("{}.wheel{tag}", b.name),
                point,
                Vec3S::from_f64([0.0, side * wcfg.half_gauge, 0.0], nswhs),
            );
            let setup = ContactSetup {
                wheel_center: center,
                nswhs,
                wheel_base,
                rail_offset: side * rail_hg,
            };
            let c = build_contact(&mut bld.mech, contacts.len(), setup)?;
            let wheel = profile(&wcfg.wheel, left, true)?;
            let rail = profile(&wcfg.rail, left, false)?;
            wheels.push(WheelInfo {
                body,
                left,
                r0: wheel.eval(0.0).f,
                spin,
            });
            profiles.push(ContactProfiles {
                wheel,
                rail,
                track: track.clone(),
            });
            contacts.push(c);
        }
    }

    // force elements
    let mut forces = vec![ForceElement::Gravity { g: cfg.gravity }];
    let mut torques = vec![];
    let mut explicit_rest: Vec<Option<f64>> = vec![None];
    for f in &cfg.forces {
        match f {
            ForceConfig::SpringDamper {
                name,
                a,
                b,
                stiffness,
                damping,
                rest,
            } => {
                let pa = bld.attach(&format!("{name}.a"), a)?;
                let pb = bld.attach(&format!("{name}.b"), b)?;
                forces.push(ForceElement::spring_damper(
                    &mut bld.mech,
                    name,
                    pa,
                    pb,
                    *stiffness,
                    *damping,
                    0.0,
                )?);
                explicit_rest.push(*rest);
            }
            ForceConfig::Bushing {
                name,
                a,
                b,
                stiffness,
                damping,
                rot_stiffness,
                rot_damping,
            } => {
                let pa = bld.attach(&format!("{name}.a"), a)?;
                let pb = bld.attach(&format!("{name}.b"), b)?;
                let ba = bld.frame_of(&a.body)?.1;
                let bb = bld.frame_of(&b.body)?.1;
                let mut els =
                    ForceElement::bushing(&mut bld.mech, name, pa, pb, ba, *stiffness, *damping);
                els.extend(ForceElement::rotational_bushing(
                    &mut bld.mech,
                    name,
                    ba,
                    bb,
                    *rot_stiffness,
                    *rot_damping,
                ));
                explicit_rest.extend(els.iter().map(|_| None));
                forces.extend(els);
            }
            ForceConfig::Coordinate {
                name,
                terms,
                stiffness,
                damping,
                gear,
            } => {
                let mut ext = Expr::ZERO;
                for (cname, k) in terms {
                    let i = bld
                        .coord_names
                        .iter()
                        .position(|n| n == cname)
                        .ok_or_else(|| {
                            schema(format!("force `{name}`: unknown coordinate `{cname}`"))
                        })?;
                    let t = bld.mech.model.mul(Expr::c(*k), Expr::sym(bld.coords[i][0]));
                    ext = bld.mech.model.add(ext, t);
                }
                forces.push(ForceElement::Linear {
                    name: name.clone(),
                    kind: if *gear {
                        ElementKind::GearCompliance
                    } else {
                        ElementKind::SpringDamper
                    },
                    extension: ext,
                    stiffness: *stiffness,
                    damping: *damping,
                    rest: 0.0,
                });
                explicit_rest.push(Some(0.0));
            }
            ForceConfig::Torque {
                name,
                body,
                reaction,
                axis,
            } => {
                let base = bld.frame_of(body)?.1;
                let reaction = match reaction {
                    Some(r) => Some(bld.frame_of(r)?.1),
                    None => None,
                };
                let sym = bld.mech.model.parameter(&format!("torque.{name}"))?;
                torques.push(TorqueInfo {
                    name: name.clone(),
                    symbol: sym,
                });
                forces.push(ForceElement::Torque {
                    name: name.clone(),
                    base,
                    reaction,
                    axis: Vec3S::from_f64(*axis, base),
                    magnitude: Expr::sym(sym),
                });
                explicit_rest.push(None);
            }
        }
    }

    // reference configuration: all coordinates zero, contact coordinates
    // at the wheel bottoms
    let n_sym = bld.mech.model.symbol_count();
    let mut reference = vec![0.0; n_sym];
    for c in &contacts {
        let p = bld.mech.position(ORIGIN, c.setup.wheel_center, GROUND);
        let xy = bld.mech.model.eval(&p.c[..2], &reference);
        let sr = nearest_track_param(&track, xy[0], xy[1]);
        reference[c.sym.s[0][0].index()] = FRAC_PI_2;
        reference[c.sym.s[2][0].index()] = sr;
    }
    for (f, rest) in forces.iter_mut().zip(&explicit_rest) {
        if let ForceElement::Linear {
            extension, rest: r, ..
        } = f
        {
            *r = match rest {
                Some(v) => *v,
                None => bld.mech.model.eval_one(*extension, &reference),
            };
        }
    }

    let mut bodies_spec = vec![];
    for (info, b) in bld.bodies.iter().zip(&cfg.bodies) {
        bodies_spec.push(RigidBody {
            name: info.name.clone(),
            base: info.base,
            com: info.com,
            mass: b.mass,
            inertia: b.inertia_tensor(),
        });
    }
    let material = Material {
        e: cfg.material.young,
        nu: cfg.material.poisson,
        g: cfg.material.shear * cfg.material.creep_factor,
        friction: cfg.material.friction,
    };
    let spec = SystemSpec {
        coords: bld.coords.clone(),
        bodies: bodies_spec,
        forces,
        contacts: contacts.clone(),
        shear_modulus: material.g,
    };
    let dynamics = assemble(&mut bld.mech, &spec)?;
    Ok(CompiledModel {
        name: cfg.name.clone(),
        mech: bld.mech,
        dynamics,
        coord_names: bld.coord_names,
        bodies: bld.bodies,
        contacts,
        wheels,
        profiles,
        torques,
        material,
        v_min: cfg.v_min,
        track,
        reference,
        gravity: cfg.gravity,
    })
}
