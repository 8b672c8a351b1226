//! Planar geometry helpers: points, angle wrapping, and the regular
//! hexagon used for the drop area and the mobility bounds.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(radius: f64, azimuth_deg: f64) -> Self {
        let a = azimuth_deg.to_radians();
        Self::new(radius * a.cos(), radius * a.sin())
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Azimuth in degrees of the vector pointing from `self` to `other`.
    pub fn azimuth_to(&self, other: &Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x).to_degrees()
    }
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_deg(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a > 180.0 {
        a -= 360.0;
    } else if a <= -180.0 {
        a += 360.0;
    }
    a
}

/// Regular hexagon centred at the origin whose edge normals point at
/// azimuths 0°, 60°, ..., 300°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hexagon {
    pub apothem: f64,
}

impl Hexagon {
    pub fn new(apothem: f64) -> Self {
        Self { apothem }
    }

    pub fn circumradius(&self) -> f64 {
        self.apothem * 2.0 / 3f64.sqrt()
    }

    fn normal(k: usize) -> (f64, f64) {
        let a = (60.0 * k as f64).to_radians();
        (a.cos(), a.sin())
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.violated_edge(p).is_none()
    }

    /// Outward-normal azimuth (deg) of the edge that `p` lies furthest beyond.
    pub fn violated_edge(&self, p: &Point) -> Option<f64> {
        let mut worst: Option<(f64, usize)> = None;
        for k in 0..6 {
            let (nx, ny) = Self::normal(k);
            let excess = p.x * nx + p.y * ny - self.apothem;
            if excess > 0.0 && worst.is_none_or(|(w, _)| excess > w) {
                worst = Some((excess, k));
            }
        }
        worst.map(|(_, k)| 60.0 * k as f64)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let r = self.circumradius();
        (Point::new(-self.apothem, -r), Point::new(self.apothem, r))
    }

    pub fn area(&self) -> f64 {
        2.0 * 3f64.sqrt() * self.apothem * self.apothem
    }

    /// Uniform sample by rejection from the bounding box.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let (lo, hi) = self.bounding_box();
        loop {
            let p = Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            if self.contains(&p) {
                return p;
            }
        }
    }
}
