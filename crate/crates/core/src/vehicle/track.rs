//! Track description files and their compilation to centerline splines.
//!
//! One directive per line, `#` starts a comment:
//!
//! ```text
//! spacing 0.5
//! half_gauge 0.7175
//! start x=0 y=0 z=0 heading=0
//! straight length=100
//! transition length=135 radius=600 cant=0.08
//! curve length=50
//! transition length=135 radius=inf cant=0
//! irregularity amplitude=0.01 wavelength=10 phase_left=0 phase_right=1.5708 from=20 to=300
//! ```
//!
//! A transition blends curvature and cant linearly (a clothoid) from the
//! current values to the targets; `curve` keeps them constant.
//! Irregularities fade in and out over one wavelength.

use std::f64::consts::PI;

use crate::contact::{CubicSpline, TrackGeometry};

use super::VehicleError;

#[derive(Clone, Debug, PartialEq)]
pub enum Segment {
    Straight { length: f64 },
    Transition { length: f64, radius: f64, cant: f64 },
    Curve { length: f64 },
}

/// Vertical rail irregularity `A·sin(2π s/λ + φ)` per rail.
#[derive(Clone, Debug, PartialEq)]
pub struct Irregularity {
    pub amplitude: f64,
    pub wavelength: f64,
    pub phase_left: f64,
    pub phase_right: f64,
    pub from: f64,
    pub to: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackSpec {
    pub spacing: f64,
    pub half_gauge: f64,
    pub start: [f64; 3],
    pub heading: f64,
    pub segments: Vec<Segment>,
    pub irregularities: Vec<Irregularity>,
}

impl Default for TrackSpec {
    fn default() -> Self {
        Self {
            spacing: 0.5,
            half_gauge: 0.7175,
            start: [0.0; 3],
            heading: 0.0,
            segments: vec![],
            irregularities: vec![],
        }
    }
}

fn err(line: usize, msg: impl Into<String>) -> VehicleError {
    VehicleError::Track {
        line,
        msg: msg.into(),
    }
}

struct Args<'a> {
    line: usize,
    pairs: Vec<(&'a str, &'a str)>,
    used: Vec<bool>,
}

impl<'a> Args<'a> {
    fn parse(line: usize, toks: &[&'a str]) -> Result<Self, VehicleError> {
        let mut pairs = vec![];
        for t in toks {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected key=value, got `{t}`")))?;
            pairs.push((k, v));
        }
        let used = vec![false; pairs.len()];
        Ok(Self { line, pairs, used })
    }

    fn get(&mut self, key: &str) -> Result<Option<f64>, VehicleError> {
        for (i, (k, v)) in self.pairs.iter().enumerate() {
            if *k == key {
                self.used[i] = true;
                let x = match *v {
                    "inf" => f64::INFINITY,
                    _ => v
                        .parse::<f64>()
                        .map_err(|_| err(self.line, format!("`{key}`: `{v}` is not a number")))?,
                };
                return Ok(Some(x));
            }
        }
        Ok(None)
    }

    fn need(&mut self, key: &str) -> Result<f64, VehicleError> {
        self.get(key)?
            .ok_or_else(|| err(self.line, format!("missing `{key}`")))
    }

    fn finish(self) -> Result<(), VehicleError> {
        match self.used.iter().position(|u| !u) {
            Some(i) => Err(err(self.line, format!("unknown key `{}`", self.pairs[i].0))),
            None => Ok(()),
        }
    }
}

fn positive(line: usize, key: &str, v: f64) -> Result<f64, VehicleError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(err(line, format!("`{key}` must be positive")))
    }
}

impl TrackSpec {
    pub fn parse(text: &str) -> Result<Self, VehicleError> {
        let mut spec = TrackSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let toks: Vec<&str> = content.split_whitespace().collect();
            let (head, rest) = (toks[0], &toks[1..]);
            match head {
                "spacing" | "half_gauge" => {
                    let v: f64 = rest
                        .first()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(line, format!("`{head}` needs one number")))?;
                    let v = positive(line, head, v)?;
                    if head == "spacing" {
                        spec.spacing = v;
                    } else {
                        spec.half_gauge = v;
                    }
                }
                "start" => {
                    let mut a = Args::parse(line, rest)?;
                    spec.start = [
                        a.get("x")?.unwrap_or(0.0),
                        a.get("y")?.unwrap_or(0.0),
                        a.get("z")?.unwrap_or(0.0),
                    ];
                    spec.heading = a.get("heading")?.unwrap_or(0.0);
                    a.finish()?;
                }
                "straight" | "curve" => {
                    let mut a = Args::parse(line, rest)?;
                    let length = positive(line, "length", a.need("length")?)?;
                    a.finish()?;
                    spec.segments.push(if head == "straight" {
                        Segment::Straight { length }
                    } else {
                        Segment::Curve { length }
                    });
                }
                "transition" => {
                    let mut a = Args::parse(line, rest)?;
                    let length = positive(line, "length", a.need("length")?)?;
                    let radius = a.get("radius")?.unwrap_or(f64::INFINITY);
                    if radius == 0.0 {
                        return Err(err(line, "`radius` must be nonzero"));
                    }
                    let cant = a.get("cant")?.unwrap_or(0.0);
                    a.finish()?;
                    spec.segments.push(Segment::Transition {
                        length,
                        radius,
                        cant,
                    });
                }
                "irregularity" => {
                    let mut a = Args::parse(line, rest)?;
                    let irr = Irregularity {
                        amplitude: a.need("amplitude")?,
                        wavelength: positive(line, "wavelength", a.need("wavelength")?)?,
                        phase_left: a.get("phase_left")?.unwrap_or(0.0),
                        phase_right: a.get("phase_right")?.unwrap_or(0.0),
                        from: a.get("from")?.unwrap_or(f64::NEG_INFINITY),
                        to: a.get("to")?.unwrap_or(f64::INFINITY),
                    };
                    a.finish()?;
                    spec.irregularities.push(irr);
                }
                other => return Err(err(line, format!("unknown directive `{other}`"))),
            }
        }
        if spec.segments.is_empty() {
            return Err(err(0, "track has no segments"));
        }
        Ok(spec)
    }

    pub fn length(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Straight { length }
                | Segment::Transition { length, .. }
                | Segment::Curve { length } => *length,
            })
            .sum()
    }

    /// Curvature and cant at arc length `s`.
    fn curvature_cant(&self, s: f64) -> (f64, f64) {
        let (mut k, mut c) = (0.0, 0.0);
        let mut s0 = 0.0;
        for seg in &self.segments {
            match *seg {
                Segment::Straight { length } => {
                    if s < s0 + length {
                        return (0.0, 0.0);
                    }
                    k = 0.0;
                    c = 0.0;
                    s0 += length;
                }
                Segment::Curve { length } => {
                    if s < s0 + length {
                        return (k, c);
                    }
                    s0 += length;
                }
                Segment::Transition {
                    length,
                    radius,
                    cant,
                } => {
                    let k1 = 1.0 / radius;
                    if s < s0 + length {
                        let w = (s - s0) / length;
                        return (k + w * (k1 - k), c + w * (cant - c));
                    }
                    k = k1;
                    c = cant;
                    s0 += length;
                }
            }
        }
        (k, c)
    }

    /// Vertical offsets of the left and right rails at `s`.
    fn rail_offsets(&self, s: f64) -> (f64, f64) {
        let (mut l, mut r) = (0.0, 0.0);
        for irr in &self.irregularities {
            if s < irr.from || s > irr.to {
                continue;
            }
            // smoothstep over one wavelength at either end keeps the rails C¹
            let ramp = |d: f64| {
                let w = (d / irr.wavelength).clamp(0.0, 1.0);
                w * w * (3.0 - 2.0 * w)
            };
            let amp = irr.amplitude * ramp(s - irr.from) * ramp(irr.to - s);
            let arg = 2.0 * PI * s / irr.wavelength;
            l += amp * (arg + irr.phase_left).sin();
            r += amp * (arg + irr.phase_right).sin();
        }
        (l, r)
    }

    /// Samples the centerline every `spacing` metres and fits natural
    /// splines in the track parameter `s`.
    pub fn compile(&self) -> Result<TrackGeometry, VehicleError> {
        let total = self.length();
        let n = (total / self.spacing).ceil() as usize;
        let h = total / n as f64;
        let sub = 16;
        let mut s_knots = Vec::with_capacity(n + 1);
        let mut xs = Vec::with_capacity(n + 1);
        let mut ys = Vec::with_capacity(n + 1);
        let mut zs = Vec::with_capacity(n + 1);
        let mut cants = Vec::with_capacity(n + 1);
        let [mut x, mut y, z0] = self.start;
        let mut heading = self.heading;
        for k in 0..=n {
            let s = k as f64 * h;
            let (_, cant) = self.curvature_cant(s);
            let (l, r) = self.rail_offsets(s);
            s_knots.push(s);
            xs.push(x);
            ys.push(y);
            zs.push(z0 + 0.5 * (l + r));
            cants.push(cant + ((l - r) / (2.0 * self.half_gauge)).asin());
            if k == n {
                break;
            }
            // midpoint rule on the heading ODE, sub-stepped
            let dh = h / sub as f64;
            for j in 0..sub {
                let sm = s + (j as f64 + 0.5) * dh;
                let (km, _) = self.curvature_cant(sm);
                let (ka, _) = self.curvature_cant(s + j as f64 * dh);
                let hm = heading + 0.5 * dh * ka;
                x += dh * hm.cos();
                y += dh * hm.sin();
                heading += dh * km;
            }
        }
        let fit = |v: &[f64]| CubicSpline::natural(&s_knots, v).map_err(|e| err(0, e.to_string()));
        Ok(TrackGeometry {
            x: fit(&xs)?,
            y: fit(&ys)?,
            z: fit(&zs)?,
            camber: fit(&cants)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_name_the_line() {
        let e = TrackSpec::parse("spacing 0.5\nstraight len=10\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = TrackSpec::parse("bogus 1").unwrap_err();
        assert!(e.to_string().contains("line 1"));
        assert!(TrackSpec::parse("# empty\n").is_err());
    }

    #[test]
    fn straight_track_is_a_line() {
        let t = TrackSpec::parse("straight length=20\n")
            .unwrap()
            .compile()
            .unwrap();
        let e = t.x.eval(7.3);
        assert!((e.f - 7.3).abs() < 1e-12 && (e.df - 1.0).abs() < 1e-12);
        assert_eq!(t.y.eval(7.3).f, 0.0);
        assert_eq!(t.domain(), (0.0, 20.0));
    }

    #[test]
    fn constant_curve_has_its_radius() {
        let text = "transition length=0.001 radius=100\ncurve length=60\n";
        let t = TrackSpec::parse(text).unwrap().compile().unwrap();
        // curvature of the planar centerline at mid-curve
        let s = 30.0;
        let (x, y) = (t.x.eval(s), t.y.eval(s));
        let k = (x.df * y.ddf - y.df * x.ddf) / (x.df * x.df + y.df * y.df).powf(1.5);
        assert!((k - 0.01).abs() < 1e-4, "curvature {k}");
    }
}
