//! Vehicle description file (TOML).

use serde::Deserialize;

use super::VehicleError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub name: String,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    #[serde(default)]
    pub material: MaterialConfig,
    /// Lower bound on the creepage denominator, m/s.
    #[serde(default = "default_v_min")]
    pub v_min: f64,
    #[serde(default, rename = "body")]
    pub bodies: Vec<BodyConfig>,
    #[serde(default, rename = "force")]
    pub forces: Vec<ForceConfig>,
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

fn default_v_min() -> f64 {
    crate::contact::DEFAULT_V_MIN
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub young: f64,
    pub poisson: f64,
    pub shear: f64,
    /// Multiplier on the Kalker coefficients (1 = full linear theory,
    /// 0 = frictionless contact).
    #[serde(default = "one")]
    pub creep_factor: f64,
    /// Friction coefficient for the optional creep force cap `|f| ≤ μN`.
    /// Off when absent.
    #[serde(default)]
    pub friction: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for MaterialConfig {
    fn default() -> Self {
        let s = crate::contact::Material::STEEL;
        Self {
            young: s.e,
            poisson: s.nu,
            shear: s.g,
            creep_factor: 1.0,
            friction: None,
        }
    }
}

/// Elementary relative motions of a joint, applied in order. Translations
/// run along the parent base axes; rotations are about the axes of the
/// base produced so far.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Dof {
    Tx,
    Ty,
    Tz,
    Rx,
    Ry,
    Rz,
}

impl Dof {
    pub fn label(self) -> &'static str {
        match self {
            Dof::Tx => "x",
            Dof::Ty => "y",
            Dof::Tz => "z",
            Dof::Rx => "roll",
            Dof::Ry => "pitch",
            Dof::Rz => "yaw",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    pub name: String,
    #[serde(default = "ground")]
    pub parent: String,
    /// Joint origin relative to the parent reference point, parent base.
    #[serde(default)]
    pub origin: [f64; 3],
    #[serde(default)]
    pub joint: Vec<Dof>,
    pub mass: f64,
    /// Center of mass relative to the body reference point, body base.
    #[serde(default)]
    pub com: [f64; 3],
    /// Principal moments `[Ixx, Iyy, Izz]`.
    pub inertia: [f64; 3],
    /// Products `[Ixy, Ixz, Iyz]`.
    #[serde(default)]
    pub products: [f64; 3],
    pub wheelset: Option<WheelsetConfig>,
}

fn ground() -> String {
    "ground".into()
}

impl BodyConfig {
    pub fn inertia_tensor(&self) -> [[f64; 3]; 3] {
        let [ixx, iyy, izz] = self.inertia;
        let [ixy, ixz, iyz] = self.products;
        [[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]]
    }
}

/// Wheel-rail pair description for a body whose last joint motion is the
/// wheel spin (`ry`).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelsetConfig {
    /// Lateral distance from the body reference point to each wheel's
    /// profile origin, m.
    pub half_gauge: f64,
    /// Lateral distance from the track centerline to each rail's profile
    /// origin, m. Defaults to `half_gauge`.
    pub rail_half_gauge: Option<f64>,
    pub wheel: ProfileConfig,
    pub rail: ProfileConfig,
}

/// Profiles are described for the left side; the right side is mirrored.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileConfig {
    /// Wheel tread `r(u) = r0 − conicity·u` over `|u| ≤ width`.
    Conical { r0: f64, conicity: f64, width: f64 },
    /// Rail head `f(u) = −u²/(2·radius)` over `|u| ≤ width`.
    Crown { radius: f64, width: f64 },
    /// Natural spline through `(u, f)` pairs.
    Points { u: Vec<f64>, f: Vec<f64> },
}

/// End of a force element: a body and an offset in its base.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attach {
    pub body: String,
    #[serde(default)]
    pub at: [f64; 3],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceConfig {
    /// Along the line between two points; rest length defaults to the
    /// reference configuration.
    SpringDamper {
        name: String,
        a: Attach,
        b: Attach,
        stiffness: f64,
        damping: f64,
        rest: Option<f64>,
    },
    /// Per-axis translational and rotational stiffness between two bodies,
    /// components in the base of `a`.
    Bushing {
        name: String,
        a: Attach,
        b: Attach,
        #[serde(default)]
        stiffness: [f64; 3],
        #[serde(default)]
        damping: [f64; 3],
        #[serde(default)]
        rot_stiffness: [f64; 3],
        #[serde(default)]
        rot_damping: [f64; 3],
    },
    /// Linear combination of coordinates `Σ cᵢ·qᵢ`, e.g. gear mesh
    /// compliance `r_p·θ_pinion − r_g·θ_gear`.
    Coordinate {
        name: String,
        terms: Vec<(String, f64)>,
        stiffness: f64,
        damping: f64,
        #[serde(default)]
        gear: bool,
    },
    /// Torque about `axis` (body base) on `body`, reaction on `reaction`.
    /// The magnitude is set per run from the scenario's schedule.
    Torque {
        name: String,
        body: String,
        reaction: Option<String>,
        axis: [f64; 3],
    },
}

impl VehicleConfig {
    pub fn from_toml(text: &str) -> Result<Self, VehicleError> {
        toml::from_str(text).map_err(|e| VehicleError::Parse(e.to_string()))
    }
}
