//! Planar/3D primitives and the closed-form coverage-area formulas used to
//! size beacon deployments.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("beam aperture {0} rad outside (0, pi)")]
    InvalidAperture(f64),
    #[error("negative height {0}")]
    NegativeHeight(f64),
    #[error("negative length {0}")]
    NegativeLength(f64),
    #[error("arc {0} rad outside (0, 2*pi]")]
    InvalidArc(f64),
    #[error("degenerate wall segment (zero length)")]
    DegenerateWall,
    #[error("room needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("room polygon is self-intersecting (walls {0} and {1} cross)")]
    SelfIntersecting(usize, usize),
}

/// 2D point/vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// 3D point/vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn scaled(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn xy(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// Wall segment between two endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Segment { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Intersection parameter pair (t on self, u on other) if the supporting
    /// lines cross within both segments, with `tol` slack at the endpoints.
    pub fn intersect_params(&self, other: &Segment, tol: f64) -> Option<(f64, f64)> {
        let r = self.b - self.a;
        let s = other.b - other.a;
        let denom = r.cross(s);
        if denom.abs() < 1e-15 {
            return None; // parallel or collinear: never a proper crossing
        }
        let qp = other.a - self.a;
        let t = qp.cross(s) / denom;
        let u = qp.cross(r) / denom;
        if t > tol && t < 1.0 - tol && u > -tol && u < 1.0 + tol {
            Some((t, u))
        } else {
            None
        }
    }

    /// True if `other` properly crosses this segment (endpoint touches with
    /// relative slack `tol` do not count).
    pub fn crosses(&self, other: &Segment, tol: f64) -> bool {
        let r = self.b - self.a;
        let s = other.b - other.a;
        let denom = r.cross(s);
        if denom.abs() < 1e-15 {
            return false;
        }
        let qp = other.a - self.a;
        let t = qp.cross(s) / denom;
        let u = qp.cross(r) / denom;
        t > tol && t < 1.0 - tol && u > tol && u < 1.0 - tol
    }

    pub fn point_at(&self, t: f64) -> Vec2 {
        self.a + (self.b - self.a) * t
    }
}

/// Reflect a point across the supporting line of a wall segment.
pub fn mirror_across_wall(p: Vec2, wall: &Segment) -> Result<Vec2, GeometryError> {
    let d = wall.b - wall.a;
    let len2 = d.dot(d);
    if len2 <= 0.0 || !len2.is_finite() {
        return Err(GeometryError::DegenerateWall);
    }
    let t = (p - wall.a).dot(d) / len2;
    let foot = wall.a + d * t;
    Ok(foot + (foot - p))
}

/// Simple polygon room with counter-clockwise vertices; walls close the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Room {
    vertices: Vec<Vec2>,
}

impl Room {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        let room = Room { vertices };
        let walls = room.walls();
        let n = walls.len();
        for i in 0..n {
            for j in (i + 1)..n {
                // neighbouring walls share an endpoint; skip them
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if walls[i].crosses(&walls[j], 1e-12) {
                    return Err(GeometryError::SelfIntersecting(i, j));
                }
            }
        }
        Ok(room)
    }

    pub fn rectangle(width: f64, depth: f64) -> Result<Self, GeometryError> {
        Room::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(width, 0.0),
            Vec2::new(width, depth),
            Vec2::new(0.0, depth),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn walls(&self) -> Vec<Segment> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
            .collect()
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (vi, vj) = (self.vertices[i], self.vertices[j]);
            if (vi.y > p.y) != (vj.y > p.y) {
                let x_cross = vi.x + (p.y - vi.y) / (vj.y - vi.y) * (vj.x - vi.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }
}

/// Directional emission/reception cone in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cone2 {
    pub apex: Vec2,
    pub axis_angle: f64,
    /// Full aperture in radians (half-angle either side of the axis).
    pub aperture: f64,
    pub range: f64,
}

impl Cone2 {
    pub fn new(apex: Vec2, axis_angle: f64, aperture: f64, range: f64) -> Result<Self, GeometryError> {
        if !(aperture > 0.0 && aperture < PI) {
            return Err(GeometryError::InvalidAperture(aperture));
        }
        if range <= 0.0 {
            return Err(GeometryError::NegativeLength(range));
        }
        Ok(Cone2 { apex, axis_angle, aperture, range })
    }
}

/// Smallest signed difference between two angles, in [-pi, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d < -PI {
        d += 2.0 * PI;
    }
    d
}

/// True iff `p` is within the cone's range and within half the aperture of
/// its axis. Boundaries are inclusive.
pub fn in_cone(c: &Cone2, p: Vec2) -> bool {
    let v = p - c.apex;
    let d = v.norm();
    if d > c.range {
        return false;
    }
    if d == 0.0 {
        return true;
    }
    angle_diff(v.angle(), c.axis_angle).abs() <= c.aperture / 2.0 + 1e-12
}

/// Diameter of the circle a downward cone of aperture `beta` paints on a
/// plane `h` meters below its apex: 2*h*tan(beta/2).
pub fn footprint_diameter(h: f64, beta: f64) -> Result<f64, GeometryError> {
    if !(beta > 0.0 && beta < PI) {
        return Err(GeometryError::InvalidAperture(beta));
    }
    if h < 0.0 {
        return Err(GeometryError::NegativeHeight(h));
    }
    Ok(2.0 * h * (beta / 2.0).tan())
}

/// Area of a disc given its diameter.
pub fn disc_area(diameter: f64) -> Result<f64, GeometryError> {
    if diameter < 0.0 {
        return Err(GeometryError::NegativeLength(diameter));
    }
    let r = diameter / 2.0;
    Ok(PI * r * r)
}

/// Area of a circular sector of radius `r` spanning `arc` radians.
pub fn sector_area(r: f64, arc: f64) -> Result<f64, GeometryError> {
    if r < 0.0 {
        return Err(GeometryError::NegativeLength(r));
    }
    if !(arc > 0.0 && arc <= 2.0 * PI + 1e-12) {
        return Err(GeometryError::InvalidArc(arc));
    }
    Ok(r * r * arc / 2.0)
}

/// Area of the lens formed by two equal circles of radius `r` whose centers
/// are `d` apart. Zero at `d >= 2r`, `pi*r^2` at `d = 0`. At `d = r` this
/// reduces to `(2*pi/3 - sqrt(3)/2) * r^2`.
pub fn lens_area(r: f64, d: f64) -> Result<f64, GeometryError> {
    if r <= 0.0 {
        return Err(GeometryError::NegativeLength(r));
    }
    if d < 0.0 {
        return Err(GeometryError::NegativeLength(d));
    }
    if d >= 2.0 * r {
        return Ok(0.0);
    }
    let half = d / (2.0 * r);
    Ok(2.0 * r * r * half.acos() - d / 2.0 * (4.0 * r * r - d * d).sqrt())
}

/// Side view of a horizontal beam as an isoceles triangle of height `h`
/// (linear reach) and apex aperture `beta`: area = h^2 * tan(beta/2).
///
/// At h = 9 m, beta = 30 deg this gives 21.7 m^2; the companion write-up's
/// 18 m^2 figure for the same configuration is not reproduced by the formula.
pub fn triangle_coverage_area(h: f64, beta: f64) -> Result<f64, GeometryError> {
    let b = footprint_diameter(h, beta)?;
    Ok(b * h / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEG: f64 = PI / 180.0;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn footprint_matches_ceiling_case() {
        // 2.5 m ceiling, 30 deg cone -> 1.34 m circle on the floor
        let d = footprint_diameter(2.5, 30.0 * DEG).unwrap();
        close(d, 1.3397, 1e-4);
        assert_eq!(footprint_diameter(0.0, 30.0 * DEG).unwrap(), 0.0);
        close(footprint_diameter(9.0, 30.0 * DEG).unwrap(), 4.823, 1e-3);
    }

    #[test]
    fn footprint_rejects_bad_aperture() {
        assert!(footprint_diameter(1.0, 0.0).is_err());
        assert!(footprint_diameter(1.0, PI).is_err());
        assert!(footprint_diameter(-1.0, 1.0).is_err());
    }

    #[test]
    fn disc_area_cases() {
        close(disc_area(1.34).unwrap(), 1.410, 1e-3);
        assert_eq!(disc_area(0.0).unwrap(), 0.0);
        close(disc_area(18.0).unwrap(), 254.47, 0.01);
    }

    #[test]
    fn sector_area_cases() {
        let quarter = sector_area(9.0, 90.0 * DEG).unwrap();
        close(quarter, 63.617, 1e-3);
        // the write-up rounds this to 63.59; within 0.1%
        assert!((quarter - 63.59).abs() / 63.59 < 1e-3);
        close(sector_area(9.0, 360.0 * DEG).unwrap(), PI * 81.0, 1e-9);
        close(sector_area(5.0, 1e-12).unwrap(), 0.0, 1e-10);
    }

    #[test]
    fn lens_area_cases() {
        let a = lens_area(9.0, 9.0).unwrap();
        // exactly (2*pi/3 - sqrt(3)/2)*81 = 99.498; often quoted as 99.48
        close(a, 99.48, 0.02);
        close(a / 2.0, 49.74, 0.01);
        assert_eq!(lens_area(5.0, 10.0).unwrap(), 0.0);
        close(lens_area(5.0, 0.0).unwrap(), PI * 25.0, 1e-9);
    }

    #[test]
    fn lens_special_case_is_exact() {
        // d = r closed form: (2*pi/3 - sqrt(3)/2) * r^2
        for r in [0.5, 1.0, 9.0, 14.0] {
            let expect = (2.0 * PI / 3.0 - 3.0_f64.sqrt() / 2.0) * r * r;
            close(lens_area(r, r).unwrap(), expect, 1e-12 * r * r);
        }
    }

    #[test]
    fn lens_monotone_in_distance() {
        let mut prev = f64::INFINITY;
        for i in 0..=200 {
            let d = i as f64 * 0.1;
            let a = lens_area(9.0, d).unwrap();
            assert!(a <= prev + 1e-12);
            prev = a;
        }
    }

    #[test]
    fn triangle_figure_is_21_7_not_18() {
        let a = triangle_coverage_area(9.0, 30.0 * DEG).unwrap();
        close(a, 21.7, 0.05);
        assert!((a - 18.0).abs() > 3.0); // the 18 m^2 figure is not what the formula yields
    }

    #[test]
    fn mirror_basics() {
        let wall = Segment::new(Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0));
        let m = mirror_across_wall(Vec2::new(1.0, 2.0), &wall).unwrap();
        close(m.x, 1.0, 1e-12);
        close(m.y, -2.0, 1e-12);
        let on = mirror_across_wall(Vec2::new(3.0, 0.0), &wall).unwrap();
        close(on.distance(Vec2::new(3.0, 0.0)), 0.0, 1e-12);
    }

    #[test]
    fn mirror_image_source_path_length() {
        // emitter (1,1), receiver (4,1), wall = x-axis:
        // reflected path length = |(1,1) - (4,-1)| = sqrt(9+4)
        let wall = Segment::new(Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0));
        let img = mirror_across_wall(Vec2::new(4.0, 1.0), &wall).unwrap();
        close(Vec2::new(1.0, 1.0).distance(img), 13.0_f64.sqrt(), 1e-12);
        close(13.0_f64.sqrt(), 3.606, 1e-3);
    }

    #[test]
    fn mirror_degenerate_wall() {
        let wall = Segment::new(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0));
        assert_eq!(
            mirror_across_wall(Vec2::new(0.0, 0.0), &wall),
            Err(GeometryError::DegenerateWall)
        );
    }

    #[test]
    fn cone_membership() {
        let c = Cone2::new(Vec2::new(0.0, 0.0), 0.0, 30.0 * DEG, 9.0).unwrap();
        assert!(in_cone(&c, Vec2::new(3.0, 0.0)));
        // 16 degrees off-axis is outside a 30 degree cone
        assert!(!in_cone(&c, Vec2::from_angle(16.0 * DEG) * 3.0));
        assert!(!in_cone(&c, Vec2::new(9.01, 0.0)));
        assert!(in_cone(&c, Vec2::new(9.0, 0.0)));
    }

    #[test]
    fn room_validation() {
        assert!(Room::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]).is_err());
        // bow-tie self intersection
        let bowtie = Room::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ]);
        assert!(matches!(bowtie, Err(GeometryError::SelfIntersecting(_, _))));
    }

    #[test]
    fn room_contains() {
        let room = Room::rectangle(9.0, 9.0).unwrap();
        assert!(room.contains(Vec2::new(4.5, 4.5)));
        assert!(!room.contains(Vec2::new(-0.1, 4.5)));
        assert!(!room.contains(Vec2::new(4.5, 9.1)));
    }
}
