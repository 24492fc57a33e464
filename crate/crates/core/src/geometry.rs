//! Catenoid geometry.
//!
//! The surface is `X(v, u) = (a cosh(v/a) cos u, a cosh(v/a) sin u, v)` with
//! conformal metric `cosh²(v/a) (dv² + a² du²)`. Everything here is a pure
//! function of the throat radius `a`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Catenoid with throat radius `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatenoidParams {
    a: f64,
}

impl CatenoidParams {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "throat radius must be positive and finite, got {a}"
            )));
        }
        Ok(Self { a })
    }

    /// Unit throat radius.
    pub fn unit() -> Self {
        Self { a: 1.0 }
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    /// `h(v) = cosh(v/a)`.
    #[inline]
    pub fn conformal_factor(&self, v: f64) -> f64 {
        (v / self.a).cosh()
    }

    /// `K(v) = -1 / (a² cosh⁴(v/a))`.
    pub fn gaussian_curvature(&self, v: f64) -> f64 {
        let h2 = self.conformal_factor(v).powi(2);
        -1.0 / (self.a * self.a * h2 * h2)
    }

    /// `K'(v) = (4/a³) sinh(v/a) / cosh⁵(v/a)`.
    pub fn curvature_gradient(&self, v: f64) -> f64 {
        let x = v / self.a;
        4.0 * x.sinh() / (self.a.powi(3) * x.cosh().powi(5))
    }

    /// Primitive of the area density `a h²(v)`; the momentum carried by a unit
    /// circulation at meridional position `v`.
    pub fn momentum_density(&self, v: f64) -> f64 {
        let a = self.a;
        0.5 * a * v + 0.25 * a * a * (2.0 * v / a).sinh()
    }

    pub fn embed(&self, pt: SurfacePoint) -> EmbeddedPoint {
        let u = pt.u.rem_euclid(TAU);
        let r = self.a * self.conformal_factor(pt.v);
        EmbeddedPoint {
            x: r * u.cos(),
            y: r * u.sin(),
            z: pt.v,
        }
    }

    /// Straight-line distance in ambient space between two surface points.
    pub fn chord_distance(&self, p1: SurfacePoint, p2: SurfacePoint) -> f64 {
        let h1 = self.conformal_factor(p1.v);
        let h2 = self.conformal_factor(p2.v);
        let dv = p1.v - p2.v;
        let du = p1.u - p2.u;
        // (h1 - h2)² + 2 h1 h2 (1 - cos du) avoids cancellation for close points.
        let half = (0.5 * du).sin();
        let radial = (h1 - h2).powi(2) + 4.0 * h1 * h2 * half * half;
        (self.a * self.a * radial + dv * dv).sqrt()
    }
}

impl Default for CatenoidParams {
    fn default() -> Self {
        Self::unit()
    }
}

/// A point on the surface. `u` is kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub v: f64,
    pub u: f64,
}

impl SurfacePoint {
    pub const fn new(v: f64, u: f64) -> Self {
        Self { v, u }
    }

    /// Azimuth reduced to `[0, 2π)`.
    pub fn wrapped_u(&self) -> f64 {
        self.u.rem_euclid(TAU)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EmbeddedPoint {
    pub fn distance(&self, other: &EmbeddedPoint) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}
