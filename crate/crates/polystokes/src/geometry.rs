//! Planar geometry primitives shared by the mesh and basis modules.

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn dist2(self, other: Point2) -> f64 {
        (self.x - other.x).powi(2) + (self.y - other.y).powi(2)
    }
}

/// Rotate a vector by -90 degrees: (x, y) -> (y, -x).
pub fn rotate_minus_90(v: [f64; 2]) -> [f64; 2] {
    [v[1], -v[0]]
}

/// Rotate a vector by +90 degrees: (x, y) -> (-y, x).
pub fn rotate_plus_90(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

/// Cross product (a - o) x (b - o).
pub fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Signed polygon area by the shoelace formula; positive for CCW ordering.
pub fn signed_area(verts: &[Point2]) -> f64 {
    let n = verts.len();
    let mut s = 0.0;
    for i in 0..n {
        let p = verts[i];
        let q = verts[(i + 1) % n];
        s += p.x * q.y - q.x * p.y;
    }
    0.5 * s
}

/// Area centroid of a simple polygon (shoelace moments).
pub fn centroid(verts: &[Point2]) -> Point2 {
    let n = verts.len();
    let a = signed_area(verts);
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = verts[i];
        let q = verts[(i + 1) % n];
        let w = p.x * q.y - q.x * p.y;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Point2::new(cx / (6.0 * a), cy / (6.0 * a))
}

/// Polygon diameter: the maximum pairwise vertex distance.
pub fn diameter(verts: &[Point2]) -> f64 {
    let mut d2: f64 = 0.0;
    for i in 0..verts.len() {
        for j in (i + 1)..verts.len() {
            d2 = d2.max(verts[i].dist2(verts[j]));
        }
    }
    d2.sqrt()
}

/// Convexity test for a CCW polygon: every consecutive cross product must be
/// >= -tol (near-collinear vertices count as convex).
pub fn is_convex_ccw(verts: &[Point2], tol: f64) -> bool {
    let n = verts.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let o = verts[i];
        let a = verts[(i + 1) % n];
        let b = verts[(i + 2) % n];
        if cross(o, a, b) < -tol {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shoelace_unit_square() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert_eq!(signed_area(&sq), 1.0);
        let c = centroid(&sq);
        assert_eq!((c.x, c.y), (0.5, 0.5));
        assert!((diameter(&sq) - 2.0_f64.sqrt()).abs() < 1e-15);
        assert!(is_convex_ccw(&sq, 1e-12));
    }

    #[test]
    fn clockwise_square_has_negative_area() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ];
        assert_eq!(signed_area(&sq), -1.0);
    }

    #[test]
    fn reflex_quad_is_not_convex() {
        let quad = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.9, 0.1), // reflex
            Point2::new(0.0, 2.0),
        ];
        assert!(!is_convex_ccw(&quad, 1e-12));
    }
}
