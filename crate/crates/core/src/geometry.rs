//! Projection, convex polygons, and the overlap measures every energy term
//! is built from.
//!
//! All polygons handled here are convex (hulls, rectangles, cuboid
//! footprints), so intersection by Sutherland–Hodgman clipping is exact.
//! Yaw-only cuboids are right prisms over convex footprints, so their
//! intersection volume factors into footprint area times z-overlap.

use crate::error::{Error, Result};
use crate::scene::{rotate_z, Camera, Cuboid, HumanPose, Rect2D, Vec2, Vec3};

/// Depth below which a camera-frame point counts as behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

/// Default lateral body-radius margin for the human collision proxy.
pub const HUMAN_MARGIN: f64 = 0.10;

#[inline]
fn cross(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Projects a world point to pixels: `K·R·(p − position)` dehomogenized.
pub fn project_point(cam: &Camera, p: &Vec3) -> Result<Vec2> {
    let pc = cam.to_camera_frame(p);
    if !(pc.z > MIN_DEPTH) {
        return Err(Error::BehindCamera { depth: pc.z });
    }
    let h = cam.intrinsics * pc;
    Ok(Vec2::new(h.x / h.z, h.y / h.z))
}

/// Counterclockwise convex polygon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polygon2D {
    pub vertices: Vec<Vec2>,
}

impl Polygon2D {
    /// Wraps vertices assumed convex, reordering clockwise input to CCW.
    pub fn from_convex(mut vertices: Vec<Vec2>) -> Self {
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Self { vertices }
    }

    pub fn from_rect(r: &Rect2D) -> Self {
        Self {
            vertices: vec![
                r.min,
                Vec2::new(r.max.x, r.min.y),
                r.max,
                Vec2::new(r.min.x, r.max.y),
            ],
        }
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        let n = self.vertices.len();
        n >= 3
            && (0..n).all(|i| cross(&self.vertices[i], &self.vertices[(i + 1) % n], p) >= -1e-12)
    }

    pub fn bounding_rect(&self) -> Option<Rect2D> {
        Rect2D::bounding(&self.vertices)
    }
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let a = &v[i];
        let b = &v[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

/// Minimal convex polygon containing all points (Andrew's monotone chain).
/// Collinear boundary points are dropped.
pub fn convex_hull(points: &[Vec2]) -> Result<Polygon2D> {
    if points.len() < 3 {
        return Err(Error::DegenerateHull);
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return Err(Error::DegenerateHull);
    }
    let poly = Polygon2D { vertices: hull };
    // reject slivers that are numerically a line
    let scale = pts
        .iter()
        .map(|p| (p - pts[0]).norm_squared())
        .fold(0.0, f64::max);
    if poly.area() <= 1e-12 * scale.max(1e-300) {
        return Err(Error::DegenerateHull);
    }
    Ok(poly)
}

/// Clips `subject` against convex CCW `clip`. Vertices of `subject` lying
/// inside every clip edge are passed through unchanged and in order.
pub fn clip_convex(subject: &Polygon2D, clip: &Polygon2D) -> Polygon2D {
    let mut output = subject.vertices.clone();
    let m = clip.vertices.len();
    if m < 3 {
        return Polygon2D::default();
    }
    let mut input = Vec::with_capacity(output.len() + m);
    for i in 0..m {
        if output.is_empty() {
            break;
        }
        let a = clip.vertices[i];
        let b = clip.vertices[(i + 1) % m];
        std::mem::swap(&mut input, &mut output);
        output.clear();
        let n = input.len();
        for k in 0..n {
            let cur = input[k];
            let prev = input[(k + n - 1) % n];
            let dc = cross(&a, &b, &cur);
            let dp = cross(&a, &b, &prev);
            if dc >= 0.0 {
                if dp < 0.0 {
                    output.push(intersect(&prev, &cur, dp, dc));
                }
                output.push(cur);
            } else if dp >= 0.0 {
                output.push(intersect(&prev, &cur, dp, dc));
            }
        }
    }
    Polygon2D { vertices: output }
}

#[inline]
fn intersect(p: &Vec2, q: &Vec2, dp: f64, dq: f64) -> Vec2 {
    let t = dp / (dp - dq);
    p + (q - p) * t
}

/// Area of the intersection of two convex polygons.
pub fn polygon_intersection_area(a: &Polygon2D, b: &Polygon2D) -> f64 {
    clip_convex(a, b).area()
}

/// Either operand shape accepted by [`iou_2d`].
#[derive(Debug, Clone, Copy)]
pub enum Shape2D<'a> {
    Polygon(&'a Polygon2D),
    Rect(&'a Rect2D),
}

impl<'a> From<&'a Polygon2D> for Shape2D<'a> {
    fn from(p: &'a Polygon2D) -> Self {
        Shape2D::Polygon(p)
    }
}

impl<'a> From<&'a Rect2D> for Shape2D<'a> {
    fn from(r: &'a Rect2D) -> Self {
        Shape2D::Rect(r)
    }
}

/// Intersection over union; a zero-area union yields 0.
pub fn iou_2d<'a>(a: impl Into<Shape2D<'a>>, b: &Rect2D) -> f64 {
    let rect_poly = Polygon2D::from_rect(b);
    let (inter, area_a) = match a.into() {
        Shape2D::Polygon(p) => (polygon_intersection_area(p, &rect_poly), p.area()),
        Shape2D::Rect(r) => {
            let w = (r.max.x.min(b.max.x) - r.min.x.max(b.min.x)).max(0.0);
            let h = (r.max.y.min(b.max.y) - r.min.y.max(b.min.y)).max(0.0);
            (w * h, r.area())
        }
    };
    let union = area_a + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn footprint(c: &Cuboid) -> Polygon2D {
    Polygon2D { vertices: c.footprint_xy().to_vec() }
}

/// Fraction of `vi`'s xy footprint covered by `vj`'s footprint.
pub fn footprint_overlap(vi: &Cuboid, vj: &Cuboid) -> f64 {
    polygon_overlap_ratio(&footprint(vi), &footprint(vj))
}

/// `area(a ∩ b) / area(a)`, or 0 when `a` has no area.
pub fn polygon_overlap_ratio(a: &Polygon2D, b: &Polygon2D) -> f64 {
    let area = a.area();
    if area <= 0.0 {
        return 0.0;
    }
    (polygon_intersection_area(a, b) / area).clamp(0.0, 1.0)
}

pub fn z_overlap(a: &Cuboid, b: &Cuboid) -> f64 {
    a.top_z().min(b.top_z()) - a.bottom_z().max(b.bottom_z())
}

/// Volume of `a ∩ b` for yaw-only cuboids.
pub fn intersection_volume(a: &Cuboid, b: &Cuboid) -> f64 {
    let dz = z_overlap(a, b);
    if dz <= 0.0 {
        return 0.0;
    }
    let dx = a.center.x - b.center.x;
    let dy = a.center.y - b.center.y;
    let r = a.footprint_radius() + b.footprint_radius();
    if dx * dx + dy * dy > r * r {
        return 0.0;
    }
    polygon_intersection_area(&footprint(a), &footprint(b)) * dz
}

/// Volume of `v` lying outside `room`.
pub fn volume_outside(v: &Cuboid, room: &Cuboid) -> f64 {
    let fp = footprint(v);
    let own = fp.area() * (v.top_z() - v.bottom_z());
    let dz = z_overlap(v, room);
    let inside = if dz <= 0.0 { 0.0 } else { clip_convex(&fp, &footprint(room)).area() * dz };
    (own - inside).max(0.0)
}

pub fn iou_3d(a: &Cuboid, b: &Cuboid) -> f64 {
    let inter = intersection_volume(a, b);
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Collision volume stand-in for a person: the bounding cuboid of the
/// joints in the person's yaw frame, inflated by `margin` on each lateral
/// side. Vertical extent is the joints' z-range.
pub fn human_hull_volume_proxy(h: &HumanPose, margin: f64) -> Cuboid {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for j in &h.joints {
        let local = rotate_z(&(j - h.center), -h.yaw);
        lo = lo.inf(&local);
        hi = hi.sup(&local);
    }
    let mid = 0.5 * (lo + hi);
    let mut size = hi - lo;
    size.x += 2.0 * margin;
    size.y += 2.0 * margin;
    size.z = size.z.max(1e-6);
    Cuboid {
        center: h.center + rotate_z(&mid, h.yaw),
        size,
        yaw: h.yaw,
        class_label: "human".into(),
        is_container: false,
    }
}

/// Square footprint of side `2·margin` centred at the hip, yaw aligned.
pub fn hip_footprint(h: &HumanPose, margin: f64) -> Polygon2D {
    let c = Cuboid {
        center: h.center,
        size: Vec3::new(2.0 * margin, 2.0 * margin, 1.0),
        yaw: h.yaw,
        class_label: String::new(),
        is_container: false,
    };
    footprint(&c)
}

/// Outcome of projecting a cuboid for the box likelihood.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectedBox {
    /// Fewer than three corners in front of the camera.
    Culled,
    /// Hull of the visible projected corners, clipped to the image.
    Hull(Polygon2D),
}

/// Projects the in-front corners of `c`, hulls them (falling back to their
/// bounding rectangle when the hull is degenerate), and clips the result
/// to the `width × height` image.
pub fn project_cuboid_hull(cam: &Camera, c: &Cuboid, width: f64, height: f64) -> ProjectedBox {
    let pts: Vec<Vec2> = c.corners().iter().filter_map(|p| project_point(cam, p).ok()).collect();
    if pts.len() < 3 {
        return ProjectedBox::Culled;
    }
    let hull = match convex_hull(&pts) {
        Ok(h) => h,
        Err(_) => match Rect2D::bounding(&pts) {
            Some(r) => Polygon2D::from_rect(&r),
            None => return ProjectedBox::Culled,
        },
    };
    let image = Polygon2D::from_rect(&Rect2D::from_xyxy(0.0, 0.0, width, height));
    ProjectedBox::Hull(clip_convex(&hull, &image))
}

/// Bounding rectangle of the projected corners, clamped to the image.
/// `None` when any corner is behind the camera.
pub fn projected_bounding_rect(cam: &Camera, c: &Cuboid, width: f64, height: f64) -> Option<Rect2D> {
    let pts: Option<Vec<Vec2>> = c.corners().iter().map(|p| project_point(cam, p).ok()).collect();
    Rect2D::bounding(&pts?).map(|r| r.clamped(width, height))
}
