//! Core value types and exact geometric primitives.
//!
//! Conventions used throughout the crate: the vertical axis is +z, all
//! box headings are rotations about +z, and wall quads carry an inward
//! unit normal. The in-plane frame of a quad is `u = normalize(normal x z)`
//! (horizontal, along the wall) and `v = (0, 0, 1)`.

use thiserror::Error;

/// Absolute tolerance for geometric predicates.
pub const GEOM_EPS: f64 = 1e-9;

/// Maximum |normal.z| for a wall quad; walls are near-vertical.
pub const MAX_QUAD_NORMAL_Z: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("room center lies on the quad plane (|distance| = {0:.3e})")]
    DegenerateCenter(f64),
    #[error("normal vector too short to normalize (|n| = {0:.3e})")]
    DegenerateNormal(f64),
    #[error("quad normal is not near-vertical (|normal.z| = {0:.3})")]
    TiltedNormal(f64),
    #[error("non-positive extent: {0}")]
    NonPositiveExtent(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("consecutive polygon vertices coincide at index {0}")]
    RepeatedVertex(usize),
}

/// 3D point or direction, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
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

    pub fn normalized(self) -> Result<Vec3, GeomError> {
        let n = self.norm();
        if n < 1e-9 {
            return Err(GeomError::DegenerateNormal(n));
        }
        Ok(self / n)
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn distance_sq(self, o: Vec3) -> f64 {
        (self - o).dot(self - o)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
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

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Plane ax + by + cz + d = 0 with (a, b, c) a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Plane {
    pub fn normal(&self) -> Vec3 {
        Vec3::new(self.a, self.b, self.c)
    }
}

/// Bounded wall rectangle: center, in-plane extents and an inward unit normal.
///
/// `width` is the horizontal extent along `u = normalize(normal x z)`,
/// `height` the vertical extent along `v = (0, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    center: Vec3,
    width: f64,
    height: f64,
    normal: Vec3,
}

impl Quad {
    pub fn new(center: Vec3, width: f64, height: f64, normal: Vec3) -> Result<Self, GeomError> {
        if !center.is_finite() || !normal.is_finite() {
            return Err(GeomError::NonFinite("quad"));
        }
        if !(width > 0.0) {
            return Err(GeomError::NonPositiveExtent("width"));
        }
        if !(height > 0.0) {
            return Err(GeomError::NonPositiveExtent("height"));
        }
        let normal = normal.normalized()?;
        if normal.z.abs() > MAX_QUAD_NORMAL_Z + GEOM_EPS {
            return Err(GeomError::TiltedNormal(normal.z.abs()));
        }
        Ok(Quad { center, width, height, normal })
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    /// In-plane axes (u, v): u = normalize(normal x z) is horizontal along
    /// the wall, v = u x normal is the in-plane vertical, equal to (0, 0, 1)
    /// for exactly vertical quads.
    pub fn axes(&self) -> (Vec3, Vec3) {
        let u = self
            .normal
            .cross(Vec3::new(0.0, 0.0, 1.0))
            .normalized()
            .expect("near-vertical normal cannot be parallel to z");
        (u, u.cross(self.normal))
    }

    /// The four boundary corners, counter-clockwise seen from the normal
    /// side: bottom-left, bottom-right, top-right, top-left in (u, v).
    pub fn corners(&self) -> [Vec3; 4] {
        let (u, v) = self.axes();
        let hw = self.width / 2.0;
        let hh = self.height / 2.0;
        [
            self.center - u * hw - v * hh,
            self.center + u * hw - v * hh,
            self.center + u * hw + v * hh,
            self.center - u * hw + v * hh,
        ]
    }

    fn with_normal(&self, normal: Vec3) -> Quad {
        Quad { normal, ..*self }
    }
}

/// Gravity-aligned 3D bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec3,
    /// Extents (w, l, h): w along the local x axis, l along local y, h vertical.
    pub size: (f64, f64, f64),
    /// Rotation about +z, normalized to [-pi, pi).
    pub heading: f64,
    pub class_id: usize,
    pub score: f64,
}

/// Wrap an angle into [-pi, pi).
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a.rem_euclid(two_pi);
    if r >= std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

impl OrientedBox {
    pub fn new(
        center: Vec3,
        size: (f64, f64, f64),
        heading: f64,
        class_id: usize,
        score: f64,
    ) -> Result<Self, GeomError> {
        if !center.is_finite() || !heading.is_finite() || !score.is_finite() {
            return Err(GeomError::NonFinite("box"));
        }
        if !(size.0 > 0.0 && size.1 > 0.0 && size.2 > 0.0) {
            return Err(GeomError::NonPositiveExtent("size"));
        }
        Ok(OrientedBox {
            center,
            size,
            heading: normalize_angle(heading),
            class_id,
            score,
        })
    }

    pub fn volume(&self) -> f64 {
        self.size.0 * self.size.1 * self.size.2
    }

    /// Corner positions of the box footprint in the xy plane,
    /// counter-clockwise: (-w/2,-l/2), (+w/2,-l/2), (+w/2,+l/2), (-w/2,+l/2).
    pub fn bev_corners(&self) -> [(f64, f64); 4] {
        let (c, s) = (self.heading.cos(), self.heading.sin());
        let hw = self.size.0 / 2.0;
        let hl = self.size.1 / 2.0;
        let mut out = [(0.0, 0.0); 4];
        for (i, (ox, oy)) in [(-hw, -hl), (hw, -hl), (hw, hl), (-hw, hl)].iter().enumerate() {
            out[i] = (
                self.center.x + ox * c - oy * s,
                self.center.y + ox * s + oy * c,
            );
        }
        out
    }

    /// True if the point lies inside the box (boundary inclusive).
    pub fn contains(&self, p: Vec3) -> bool {
        let rel = p - self.center;
        let (c, s) = (self.heading.cos(), self.heading.sin());
        // rotate into the box frame (inverse rotation)
        let lx = rel.x * c + rel.y * s;
        let ly = -rel.x * s + rel.y * c;
        lx.abs() <= self.size.0 / 2.0 + GEOM_EPS
            && ly.abs() <= self.size.1 / 2.0 + GEOM_EPS
            && rel.z.abs() <= self.size.2 / 2.0 + GEOM_EPS
    }
}

/// Which structural element a layout polygon describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolygonKind {
    Wall,
    Ceiling,
    Floor,
}

impl PolygonKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolygonKind::Wall => "wall",
            PolygonKind::Ceiling => "ceiling",
            PolygonKind::Floor => "floor",
        }
    }
}

/// Ordered 3D vertex loop of a structural element.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutPolygon {
    pub vertices: Vec<Vec3>,
    pub kind: PolygonKind,
}

impl LayoutPolygon {
    pub fn new(vertices: Vec<Vec3>, kind: PolygonKind) -> Result<Self, GeomError> {
        if vertices.len() < 3 {
            return Err(GeomError::TooFewVertices(vertices.len()));
        }
        for i in 0..vertices.len() {
            let j = (i + 1) % vertices.len();
            if vertices[i].distance(vertices[j]) <= 1e-6 {
                return Err(GeomError::RepeatedVertex(i));
            }
        }
        Ok(LayoutPolygon { vertices, kind })
    }
}

/// Plane induced by a quad: normal is the quad normal, d = -normal . center.
pub fn plane_of(q: &Quad) -> Plane {
    let n = q.normal();
    Plane {
        a: n.x,
        b: n.y,
        c: n.z,
        d: -n.dot(q.center()),
    }
}

/// Signed side of a point: positive on the interior (normal) side.
pub fn signed_side(p: &Plane, x: Vec3) -> f64 {
    p.a * x.x + p.b * x.y + p.c * x.z + p.d
}

/// Flip the quad normal if needed so it points toward the room center.
pub fn orient_inward(q: &Quad, room_center: Vec3) -> Result<Quad, GeomError> {
    let side = signed_side(&plane_of(q), room_center);
    if side.abs() <= 1e-6 {
        return Err(GeomError::DegenerateCenter(side.abs()));
    }
    if side < 0.0 {
        Ok(q.with_normal(-q.normal()))
    } else {
        Ok(*q)
    }
}

/// Orthogonal projection of a point into the quad's in-plane frame.
///
/// Returns (u, v, inside): u along the horizontal in-plane axis, v along
/// the vertical axis, origin at the quad center. `inside` holds iff
/// |u| <= width/2 and |v| <= height/2.
pub fn project_onto_quad(q: &Quad, x: Vec3) -> (f64, f64, bool) {
    let (ua, va) = q.axes();
    let rel = x - q.center();
    let u = rel.dot(ua);
    let v = rel.dot(va);
    let inside = u.abs() <= q.width() / 2.0 && v.abs() <= q.height() / 2.0;
    (u, v, inside)
}

/// The eight corners of a box: local corners (+-w/2, +-l/2, +-h/2) rotated
/// by the heading about +z and translated by the center. Order: bottom face
/// counter-clockwise from (-w/2, -l/2), then the top face in the same order.
pub fn box_corners(b: &OrientedBox) -> [Vec3; 8] {
    let bev = b.bev_corners();
    let hh = b.size.2 / 2.0;
    let mut out = [Vec3::ZERO; 8];
    for (i, (x, y)) in bev.iter().enumerate() {
        out[i] = Vec3::new(*x, *y, b.center.z - hh);
        out[i + 4] = Vec3::new(*x, *y, b.center.z + hh);
    }
    out
}

/// Area of a simple polygon via the shoelace formula (vertices in order).
fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % poly.len()];
        s += x0 * y1 - x1 * y0;
    }
    s.abs() / 2.0
}

/// Clip a polygon against the half-plane on the left of edge a -> b
/// (Sutherland-Hodgman step; clip polygon must be counter-clockwise).
fn clip_edge(poly: &[(f64, f64)], a: (f64, f64), b: (f64, f64)) -> Vec<(f64, f64)> {
    let side = |p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let cur = poly[i];
        let nxt = poly[(i + 1) % poly.len()];
        let sc = side(cur);
        let sn = side(nxt);
        if sc >= 0.0 {
            out.push(cur);
        }
        if (sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0) {
            let t = sc / (sc - sn);
            out.push((cur.0 + t * (nxt.0 - cur.0), cur.1 + t * (nxt.1 - cur.1)));
        }
    }
    out
}

/// Intersection area of two convex counter-clockwise polygons.
pub(crate) fn convex_intersection_area(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> f64 {
    let mut poly = subject.to_vec();
    for i in 0..clip.len() {
        if poly.is_empty() {
            return 0.0;
        }
        poly = clip_edge(&poly, clip[i], clip[(i + 1) % clip.len()]);
    }
    polygon_area(&poly)
}

/// Exact IoU of two gravity-aligned boxes: rotated-rectangle intersection
/// in the xy plane (polygon clipping) times the vertical interval overlap.
pub fn iou_3d(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let za = (a.center.z - a.size.2 / 2.0, a.center.z + a.size.2 / 2.0);
    let zb = (b.center.z - b.size.2 / 2.0, b.center.z + b.size.2 / 2.0);
    let dz = (za.1.min(zb.1) - za.0.max(zb.0)).max(0.0);
    if dz == 0.0 {
        return 0.0;
    }
    let area = convex_intersection_area(&a.bev_corners(), &b.bev_corners());
    let inter = area * dz;
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    inter / union
}
