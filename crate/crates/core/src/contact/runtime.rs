//! Numeric side of a contact: the spline data behind the symbolic cubics.

use std::sync::Arc;

use super::geometry::ContactSymbols;
use super::spline::CubicSpline;

/// Track centerline `(x, y, z)(sʳ)` and camber `θ(sʳ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackGeometry {
    pub x: CubicSpline,
    pub y: CubicSpline,
    pub z: CubicSpline,
    pub camber: CubicSpline,
}

impl TrackGeometry {
    /// Level straight track along ground x on `[0, length]`.
    pub fn straight(length: f64) -> Self {
        Self {
            x: CubicSpline::linear(0.0, length, 0.0, 1.0),
            y: CubicSpline::linear(0.0, length, 0.0, 0.0),
            z: CubicSpline::linear(0.0, length, 0.0, 0.0),
            camber: CubicSpline::linear(0.0, length, 0.0, 0.0),
        }
    }

    /// Common arc-parameter domain of the four splines.
    pub fn domain(&self) -> (f64, f64) {
        let d = [
            self.x.domain(),
            self.y.domain(),
            self.z.domain(),
            self.camber.domain(),
        ];
        (
            d.iter().map(|r| r.0).fold(f64::MIN, f64::max),
            d.iter().map(|r| r.1).fold(f64::MAX, f64::min),
        )
    }
}

/// Wheel and rail profiles plus the shared track of one contact.
#[derive(Clone, Debug)]
pub struct ContactProfiles {
    pub wheel: CubicSpline,
    pub rail: CubicSpline,
    pub track: Arc<TrackGeometry>,
}

impl ContactProfiles {
    /// Loads the active segment coefficients for the surface parameters
    /// currently stored in `values`. Returns true if any parameter was
    /// outside its spline domain.
    pub fn load(&self, sym: &ContactSymbols, values: &mut [f64]) -> bool {
        let uw = values[sym.s[1][0].index()];
        let sr = values[sym.s[2][0].index()];
        let ur = values[sym.s[3][0].index()];
        let mut clamped = sym.wheel.load(&self.wheel, uw, values);
        clamped |= sym.rail.load(&self.rail, ur, values);
        let t = &self.track;
        for (cubic, spline) in sym.track.iter().zip([&t.x, &t.y, &t.z, &t.camber]) {
            clamped |= cubic.load(spline, sr, values);
        }
        clamped
    }
}
