//! Planar points in raster coordinates.
//!
//! Origin at the top-left pixel, x grows rightward, y grows downward. Pixel
//! `(i, j)` sits at integer coordinate `(i, j)`.

use core::ops::{Add, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }

    pub fn midpoint(&self, other: &Point2) -> Point2 {
        Point2::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }

    /// Rotates the point by `angle` radians about `center`.
    ///
    /// With y pointing down a positive angle turns clockwise on screen.
    pub fn rotated_about(&self, center: &Point2, angle: f64) -> Point2 {
        let (sin, cos) = libm::sincos(angle);
        let dx = self.x - center.x;
        let dy = self.y - center.y;
        Point2::new(
            center.x + cos * dx - sin * dy,
            center.y + sin * dx + cos * dy,
        )
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}
