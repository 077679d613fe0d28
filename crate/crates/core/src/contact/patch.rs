//! Hertz contact ellipse and Kalker linear creep forces.

use super::tables::{HertzTable, KalkerTable};

/// Elastic constants shared by wheel and rail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    /// Young's modulus, Pa.
    pub e: f64,
    pub nu: f64,
    /// Shear modulus, Pa.
    pub g: f64,
    /// Optional Coulomb limit μ: tangential creep force is capped at μ·N.
    pub friction: Option<f64>,
}

impl Material {
    /// Wheel/rail steel.
    pub const STEEL: Material = Material {
        e: 2.1e11,
        nu: 0.3,
        g: 8.0e10,
        friction: None,
    };
}

/// Principal curvatures at the contact point, 1/m. Zero means a flat
/// direction (infinite radius).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Curvatures {
    pub wheel_x: f64,
    pub wheel_y: f64,
    pub rail_x: f64,
    pub rail_y: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ContactPatch {
    pub normal_force: f64,
    /// Relative curvature sums, 1/m.
    pub a_sum: f64,
    pub b_sum: f64,
    pub theta_deg: f64,
    pub m: f64,
    pub n: f64,
    /// Longitudinal and lateral semi-axes, m.
    pub a: f64,
    pub b: f64,
    /// Normal force was tensile: contact treated as separated.
    pub separated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum PatchError {
    #[error("non-positive relative curvature A+B = {0}")]
    NonConvex(f64),
}

/// Hertz ellipse for normal load `n` (N). The semi-axis along the direction
/// of smaller relative curvature is the major one.
pub fn hertz_patch(
    table: &HertzTable,
    n: f64,
    k: &Curvatures,
    mat: &Material,
) -> Result<ContactPatch, PatchError> {
    let a_sum = 0.5 * (k.wheel_x + k.rail_x);
    let b_sum = 0.5 * (k.wheel_y + k.rail_y);
    let s = a_sum + b_sum;
    if !(s > 0.0) {
        return Err(PatchError::NonConvex(s));
    }
    let theta_deg = ((a_sum - b_sum).abs() / s).min(1.0).acos().to_degrees();
    let (m, nn) = table.coefficients(theta_deg);
    let mut p = ContactPatch {
        normal_force: n,
        a_sum,
        b_sum,
        theta_deg,
        m,
        n: nn,
        ..Default::default()
    };
    if n <= 0.0 {
        p.separated = n < 0.0;
        return Ok(p);
    }
    let k3 = (1.5 * (1.0 - mat.nu * mat.nu) / mat.e / s * n).cbrt();
    if a_sum <= b_sum {
        p.a = m * k3;
        p.b = nn * k3;
    } else {
        p.a = nn * k3;
        p.b = m * k3;
    }
    Ok(p)
}

/// Entries `[k11, k22, k23, k33] = [ab·c11, ab·c22, (ab)^{3/2}·c23, (ab)²·c33]`
/// of the creep stiffness matrix (before the factor `G`). The flag reports a
/// clamped table lookup.
pub fn kalker_entries(table: &KalkerTable, patch: &ContactPatch, nu: f64) -> ([f64; 4], bool) {
    if patch.a <= 0.0 || patch.b <= 0.0 {
        return ([0.0; 4], false);
    }
    let ([c11, c22, c23, c33], clamped) = table.coefficients(patch.a / patch.b, nu);
    let ab = patch.a * patch.b;
    (
        [ab * c11, ab * c22, ab * ab.sqrt() * c23, ab * ab * c33],
        clamped,
    )
}

/// `C = G·[[k11,0,0],[0,k22,k23],[0,−k23,k33]]`, so that
/// `[f_x, f_y, m_z] = −C·[ξ_x, ξ_y, φ_z]`.
pub fn kalker_matrix(g: f64, k: [f64; 4]) -> [[f64; 3]; 3] {
    [
        [g * k[0], 0.0, 0.0],
        [0.0, g * k[1], g * k[2]],
        [0.0, -g * k[2], g * k[3]],
    ]
}

/// Creep force and spin moment from creepages `[ξ_x, ξ_y, φ_z]`.
/// Factor on the Kalker entries that brings the tangential force
/// `|(f_x, f_y)|` down to `mu·n`; 1 when within the limit. Scaling the
/// coefficients keeps the force linear in the creepages.
pub fn saturation_scale(force: [f64; 3], mu: f64, n: f64) -> f64 {
    let t = force[0].hypot(force[1]);
    let limit = mu * n.max(0.0);
    if t > limit {
        limit / t
    } else {
        1.0
    }
}

pub fn kalker_forces(g: f64, k: [f64; 4], creep: [f64; 3]) -> [f64; 3] {
    let c = kalker_matrix(g, k);
    [0, 1, 2].map(|i| -(c[i][0] * creep[0] + c[i][1] * creep[1] + c[i][2] * creep[2]))
}
