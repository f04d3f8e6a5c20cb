//! Parse-graph scene model: cuboids, human poses, the pinhole camera, and
//! the per-image observations the graph is explained against.
//!
//! World frame is z-up. All rotations are yaw-only (about world z). A
//! cuboid's corners are ordered bottom face counterclockwise seen from
//! above starting at local `(-x, -y)`, then the top face in the same order.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

pub const NUM_JOINTS: usize = 17;

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = a - two_pi * ((a + PI) / two_pi).floor();
    if r >= PI {
        r - two_pi
    } else {
        r
    }
}

/// Rotates `v` about the world z-axis by `yaw`.
#[inline]
pub fn rotate_z(v: &Vec3, yaw: f64) -> Vec3 {
    let (s, c) = yaw.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

/// Fixed joint order. External skeletons are remapped to this at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Joint {
    Hip = 0,
    Spine,
    Neck,
    Head,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
    Nose,
}

impl Joint {
    pub const ALL: [Joint; NUM_JOINTS] = [
        Joint::Hip,
        Joint::Spine,
        Joint::Neck,
        Joint::Head,
        Joint::LeftShoulder,
        Joint::RightShoulder,
        Joint::LeftElbow,
        Joint::RightElbow,
        Joint::LeftWrist,
        Joint::RightWrist,
        Joint::LeftHip,
        Joint::RightHip,
        Joint::LeftKnee,
        Joint::RightKnee,
        Joint::LeftAnkle,
        Joint::RightAnkle,
        Joint::Nose,
    ];

    pub const NAMES: [&'static str; NUM_JOINTS] = [
        "hip",
        "spine",
        "neck",
        "head",
        "left_shoulder",
        "right_shoulder",
        "left_elbow",
        "right_elbow",
        "left_wrist",
        "right_wrist",
        "left_hip",
        "right_hip",
        "left_knee",
        "right_knee",
        "left_ankle",
        "right_ankle",
        "nose",
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Joint> {
        Self::NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| Self::ALL[i])
    }
}

/// Bones used for drawing skeletons.
pub const BONES: [(Joint, Joint); 16] = [
    (Joint::Hip, Joint::Spine),
    (Joint::Spine, Joint::Neck),
    (Joint::Neck, Joint::Head),
    (Joint::Head, Joint::Nose),
    (Joint::Neck, Joint::LeftShoulder),
    (Joint::Neck, Joint::RightShoulder),
    (Joint::LeftShoulder, Joint::LeftElbow),
    (Joint::RightShoulder, Joint::RightElbow),
    (Joint::LeftElbow, Joint::LeftWrist),
    (Joint::RightElbow, Joint::RightWrist),
    (Joint::Hip, Joint::LeftHip),
    (Joint::Hip, Joint::RightHip),
    (Joint::LeftHip, Joint::LeftKnee),
    (Joint::RightHip, Joint::RightKnee),
    (Joint::LeftKnee, Joint::LeftAnkle),
    (Joint::RightKnee, Joint::RightAnkle),
];

/// Action vocabulary. The first six are the HOI actions that carry a
/// spatial prior; the rest are plain postures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Read = 0,
    SitAt,
    Sit,
    MakePhoneCall,
    Hold,
    UseLaptop,
    Stand,
    Walk,
    Bend,
}

impl Action {
    pub const ALL: [Action; 9] = [
        Action::Read,
        Action::SitAt,
        Action::Sit,
        Action::MakePhoneCall,
        Action::Hold,
        Action::UseLaptop,
        Action::Stand,
        Action::Walk,
        Action::Bend,
    ];

    pub const HOI: [Action; 6] = [
        Action::Read,
        Action::SitAt,
        Action::Sit,
        Action::MakePhoneCall,
        Action::Hold,
        Action::UseLaptop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::Read => "read",
            Action::SitAt => "sit-at",
            Action::Sit => "sit",
            Action::MakePhoneCall => "make-phone-call",
            Action::Hold => "hold",
            Action::UseLaptop => "use-laptop",
            Action::Stand => "stand",
            Action::Walk => "walk",
            Action::Bend => "bend",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Self::ALL.iter().copied().find(|a| a.name() == name)
    }

    pub fn is_hoi(self) -> bool {
        (self as usize) < Self::HOI.len()
    }

    /// Actions performed seated; they select the seated pose template and
    /// seated anchor heights.
    pub fn is_seated(self) -> bool {
        matches!(self, Action::Sit | Action::SitAt | Action::UseLaptop)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Multi-hot action label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ActionSet(u16);

impl ActionSet {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn single(a: Action) -> Self {
        Self(1 << a as u16)
    }

    pub fn from_actions(actions: &[Action]) -> Self {
        actions.iter().fold(Self::empty(), |s, a| s.with(*a))
    }

    pub fn with(self, a: Action) -> Self {
        Self(self.0 | (1 << a as u16))
    }

    pub fn contains(self, a: Action) -> bool {
        self.0 & (1 << a as u16) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |a| self.contains(*a))
    }

    /// The multi-hot vector over `Action::ALL`.
    pub fn to_multi_hot(self) -> Vec<u8> {
        Action::ALL.iter().map(|a| self.contains(*a) as u8).collect()
    }
}

/// Oriented 3D box: used for the room layout and for objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Cuboid {
    pub center: Vec3,
    /// Full extents along the local axes.
    pub size: Vec3,
    pub yaw: f64,
    pub class_label: String,
    pub is_container: bool,
}

impl Cuboid {
    pub fn new(center: Vec3, size: Vec3, yaw: f64, class_label: impl Into<String>) -> Self {
        Self {
            center,
            size,
            yaw: normalize_angle(yaw),
            class_label: class_label.into(),
            is_container: false,
        }
    }

    pub fn with_container(mut self, is_container: bool) -> Self {
        self.is_container = is_container;
        self
    }

    pub fn corners(&self) -> [Vec3; 8] {
        cuboid_corners(self)
    }

    pub fn bottom_z(&self) -> f64 {
        self.center.z - 0.5 * self.size.z
    }

    pub fn top_z(&self) -> f64 {
        self.center.z + 0.5 * self.size.z
    }

    pub fn volume(&self) -> f64 {
        self.size.x * self.size.y * self.size.z
    }

    /// The four bottom corners projected onto the xy-plane, counterclockwise.
    pub fn footprint_xy(&self) -> [Vec2; 4] {
        let hx = 0.5 * self.size.x;
        let hy = 0.5 * self.size.y;
        let (s, c) = self.yaw.sin_cos();
        let local = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)];
        local.map(|(x, y)| Vec2::new(self.center.x + c * x - s * y, self.center.y + s * x + c * y))
    }

    /// Radius of the circle circumscribing the footprint.
    pub fn footprint_radius(&self) -> f64 {
        0.5 * (self.size.x * self.size.x + self.size.y * self.size.y).sqrt()
    }
}

/// Corners in the documented order: bottom face counterclockwise from
/// above starting at local `(-x, -y)`, then the top face in matching order.
pub fn cuboid_corners(c: &Cuboid) -> [Vec3; 8] {
    let fp = c.footprint_xy();
    let zb = c.bottom_z();
    let zt = c.top_z();
    [
        Vec3::new(fp[0].x, fp[0].y, zb),
        Vec3::new(fp[1].x, fp[1].y, zb),
        Vec3::new(fp[2].x, fp[2].y, zb),
        Vec3::new(fp[3].x, fp[3].y, zb),
        Vec3::new(fp[0].x, fp[0].y, zt),
        Vec3::new(fp[1].x, fp[1].y, zt),
        Vec3::new(fp[2].x, fp[2].y, zt),
        Vec3::new(fp[3].x, fp[3].y, zt),
    ]
}

/// Recovers `(center, size, yaw)` from corners in the documented order.
pub fn cuboid_params_from_corners(corners: &[Vec3; 8]) -> (Vec3, Vec3, f64) {
    let center = corners.iter().fold(Vec3::zeros(), |acc, p| acc + p) / 8.0;
    let ex = corners[1] - corners[0];
    let ey = corners[3] - corners[0];
    let ez = corners[4] - corners[0];
    let size = Vec3::new(ex.norm(), ey.norm(), ez.norm());
    let yaw = normalize_angle(ex.y.atan2(ex.x));
    (center, size, yaw)
}

/// 3D skeleton with its similarity parametrization.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanPose {
    /// World-coordinate joints, in `Joint::ALL` order.
    pub joints: [Vec3; NUM_JOINTS],
    /// Hip position.
    pub center: Vec3,
    pub scale: f64,
    /// Unitless hip-centred template in the person's own frame (facing +x).
    pub rel_joints: [Vec3; NUM_JOINTS],
    pub yaw: f64,
    pub actions: ActionSet,
}

/// Builds a pose via `joints = Rot(yaw)·(scale·rel_joints) + center`.
pub fn pose_from_params(
    center: Vec3,
    scale: f64,
    rel_joints: [Vec3; NUM_JOINTS],
    yaw: f64,
    actions: ActionSet,
) -> Result<HumanPose> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidParameter(format!("pose scale must be positive, got {scale}")));
    }
    let yaw = normalize_angle(yaw);
    let mut pose = HumanPose {
        joints: [Vec3::zeros(); NUM_JOINTS],
        center,
        scale,
        rel_joints,
        yaw,
        actions,
    };
    pose.rematerialize();
    Ok(pose)
}

/// Least-squares yaw-only similarity fit of `rel_joints` onto `joints`,
/// returning `(center, scale, yaw)`. Exact for joints produced by
/// [`pose_from_params`] with a template that is not degenerate in xy.
pub fn params_from_joints(
    joints: &[Vec3; NUM_JOINTS],
    rel_joints: &[Vec3; NUM_JOINTS],
) -> Result<(Vec3, f64, f64)> {
    let n = NUM_JOINTS as f64;
    let jbar = joints.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let rbar = rel_joints.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let (mut cos_term, mut sin_term, mut z_term, mut rel_sq) = (0.0, 0.0, 0.0, 0.0);
    for (j, r) in joints.iter().zip(rel_joints) {
        let b = j - jbar;
        let a = r - rbar;
        cos_term += b.x * a.x + b.y * a.y;
        sin_term += b.y * a.x - b.x * a.y;
        z_term += b.z * a.z;
        rel_sq += a.norm_squared();
    }
    if rel_sq <= 0.0 {
        return Err(Error::InvalidParameter("degenerate pose template".into()));
    }
    let yaw = sin_term.atan2(cos_term);
    let (s, c) = yaw.sin_cos();
    let scale = (c * cos_term + s * sin_term + z_term) / rel_sq;
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter("fitted pose scale is not positive".into()));
    }
    let center = jbar - rotate_z(&(rbar * scale), yaw);
    Ok((center, scale, normalize_angle(yaw)))
}

impl HumanPose {
    /// Recomputes `joints` from the parametrization.
    pub fn rematerialize(&mut self) {
        for (j, r) in self.joints.iter_mut().zip(self.rel_joints.iter()) {
            *j = rotate_z(&(r * self.scale), self.yaw) + self.center;
        }
    }

    pub fn joint(&self, j: Joint) -> Vec3 {
        self.joints[j.index()]
    }

    /// Lowest ankle height; the supported surface of a person.
    pub fn feet_z(&self) -> f64 {
        self.joint(Joint::LeftAnkle).z.min(self.joint(Joint::RightAnkle).z)
    }

    /// Largest deviation between stored joints and the parametrization.
    pub fn param_residual(&self) -> f64 {
        self.joints
            .iter()
            .zip(self.rel_joints.iter())
            .map(|(j, r)| (rotate_z(&(r * self.scale), self.yaw) + self.center - j).amax())
            .fold(0.0, f64::max)
    }

    pub fn translated(&self, t: &Vec3) -> HumanPose {
        let mut p = self.clone();
        p.center += t;
        for j in p.joints.iter_mut() {
            *j += t;
        }
        p
    }
}

/// Pinhole camera. `rotation` maps world directions to the camera frame
/// (x right, y down, z forward).
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub intrinsics: Mat3,
    pub rotation: Mat3,
    pub position: Vec3,
}

impl Camera {
    pub fn new(intrinsics: Mat3, rotation: Mat3, position: Vec3) -> Self {
        Self { intrinsics, rotation, position }
    }

    pub fn intrinsics_from(focal: f64, cx: f64, cy: f64) -> Mat3 {
        Mat3::new(focal, 0.0, cx, 0.0, focal, cy, 0.0, 0.0, 1.0)
    }

    /// A z-up camera at `position`, heading `yaw` about world z (0 looks
    /// along +x) and tilted down by `pitch` radians.
    pub fn looking(intrinsics: Mat3, position: Vec3, yaw: f64, pitch: f64) -> Self {
        let (sy, cy) = yaw.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let forward = Vec3::new(cp * cy, cp * sy, -sp);
        let right = Vec3::new(sy, -cy, 0.0);
        let down = forward.cross(&right);
        let rotation = Mat3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        Self { intrinsics, rotation, position }
    }

    pub fn to_camera_frame(&self, p: &Vec3) -> Vec3 {
        self.rotation * (p - self.position)
    }

    /// Unit world-space direction of the ray through pixel `(u, v)`.
    pub fn pixel_ray(&self, pixel: &Vec2) -> Option<Vec3> {
        let kinv = self.intrinsics.try_inverse()?;
        let d_cam = kinv * Vec3::new(pixel.x, pixel.y, 1.0);
        Some((self.rotation.transpose() * d_cam).normalize())
    }

    pub fn focal_mean(&self) -> f64 {
        0.5 * (self.intrinsics[(0, 0)] + self.intrinsics[(1, 1)])
    }

    /// Orthonormality is checked to 1e-7, loose enough for rotations read
    /// back from 9-digit files.
    pub fn check(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let rtr = self.rotation.transpose() * self.rotation - Mat3::identity();
        if !(rtr.amax() < 1e-7) {
            out.push("rotation not orthonormal");
        }
        let k = &self.intrinsics;
        if k[(2, 2)] != 1.0 || k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            out.push("intrinsics not upper triangular with unit corner");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// The layout node always carries id 0.
pub const LAYOUT_ID: NodeId = NodeId(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Supporter {
    /// Bottom face of the layout.
    Floor,
    /// Any of the four side faces of the layout.
    Wall,
    Object(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportEdge {
    pub supported: NodeId,
    pub supporter: Supporter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoiEdge {
    pub human: NodeId,
    pub object: NodeId,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectNode {
    pub id: NodeId,
    pub cuboid: Cuboid,
    /// Index into `Observations::det_boxes`.
    pub detection: Option<usize>,
    /// Created by top-down sampling; has no 2D evidence.
    pub synthesized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanNode {
    pub id: NodeId,
    pub pose: HumanPose,
    /// Index into `Observations::det_poses`.
    pub detection: Option<usize>,
}

/// Which node a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    Layout,
    Object(usize),
    Human(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseGraph {
    pub layout: Cuboid,
    pub objects: Vec<ObjectNode>,
    pub humans: Vec<HumanNode>,
    pub support_edges: Vec<SupportEdge>,
    pub hoi_edges: Vec<HoiEdge>,
    pub camera: Camera,
}

impl ParseGraph {
    pub fn new(layout: Cuboid, camera: Camera) -> Self {
        Self {
            layout,
            objects: Vec::new(),
            humans: Vec::new(),
            support_edges: Vec::new(),
            hoi_edges: Vec::new(),
            camera,
        }
    }

    pub fn floor_z(&self) -> f64 {
        self.layout.bottom_z()
    }

    pub fn next_id(&self) -> NodeId {
        let max = self
            .objects
            .iter()
            .map(|o| o.id.0)
            .chain(self.humans.iter().map(|h| h.id.0))
            .max()
            .unwrap_or(0);
        NodeId(max + 1)
    }

    pub fn object_index(&self, id: NodeId) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn human_index(&self, id: NodeId) -> Option<usize> {
        self.humans.iter().position(|h| h.id == id)
    }

    pub fn object(&self, id: NodeId) -> Option<&ObjectNode> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn human(&self, id: NodeId) -> Option<&HumanNode> {
        self.humans.iter().find(|h| h.id == id)
    }

    pub fn resolve(&self, id: NodeId) -> Option<NodeRef> {
        if id == LAYOUT_ID {
            return Some(NodeRef::Layout);
        }
        self.object_index(id)
            .map(NodeRef::Object)
            .or_else(|| self.human_index(id).map(NodeRef::Human))
    }

    pub fn node_id(&self, r: NodeRef) -> NodeId {
        match r {
            NodeRef::Layout => LAYOUT_ID,
            NodeRef::Object(i) => self.objects[i].id,
            NodeRef::Human(i) => self.humans[i].id,
        }
    }

    pub fn support_of(&self, id: NodeId) -> Option<&SupportEdge> {
        self.support_edges.iter().find(|e| e.supported == id)
    }

    pub fn has_hoi_pair(&self, human: NodeId, object: NodeId) -> bool {
        self.hoi_edges.iter().any(|e| e.human == human && e.object == object)
    }

    /// Translates every node, the layout, and the camera by `t`.
    pub fn translated(&self, t: &Vec3) -> ParseGraph {
        let mut pg = self.clone();
        pg.layout.center += t;
        for o in pg.objects.iter_mut() {
            o.cuboid.center += t;
        }
        for h in pg.humans.iter_mut() {
            h.pose = h.pose.translated(t);
        }
        pg.camera.position += t;
        pg
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect2D {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect2D {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn from_xyxy(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(Vec2::new(x0, y0), Vec2::new(x1, y1))
    }

    pub fn width(&self) -> f64 {
        (self.max.x - self.min.x).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.max.y - self.min.y).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Vec2 {
        0.5 * (self.min + self.max)
    }

    pub fn clamped(&self, width: f64, height: f64) -> Rect2D {
        Rect2D::from_xyxy(
            self.min.x.clamp(0.0, width),
            self.min.y.clamp(0.0, height),
            self.max.x.clamp(0.0, width),
            self.max.y.clamp(0.0, height),
        )
    }

    pub fn bounding(points: &[Vec2]) -> Option<Rect2D> {
        let first = points.first()?;
        let mut r = Rect2D::new(*first, *first);
        for p in &points[1..] {
            r.min = r.min.inf(p);
            r.max = r.max.sup(p);
        }
        Some(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetBox {
    pub class_label: String,
    pub bbox: Rect2D,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetPose {
    pub joints: [Vec2; NUM_JOINTS],
    pub visible: [bool; NUM_JOINTS],
    pub actions: ActionSet,
    pub action_confidence: BTreeMap<Action, f64>,
    /// Hip-centred 3D pose from an external lifter, z-up with world-aligned
    /// horizontal axes. Optional; templates are used when absent.
    pub local_pose: Option<[Vec3; NUM_JOINTS]>,
}

impl DetPose {
    pub fn confidence(&self, a: Action) -> f64 {
        if !self.actions.contains(a) {
            return 0.0;
        }
        self.action_confidence.get(&a).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub camera: Camera,
    pub image_size: (f64, f64),
    pub det_boxes: Vec<DetBox>,
    pub det_poses: Vec<DetPose>,
    /// Room box hint from an upstream layout estimator.
    pub layout: Option<Cuboid>,
}

impl Observations {
    pub fn image_diagonal(&self) -> f64 {
        self.image_size.0.hypot(self.image_size.1)
    }

    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        let (w, h) = self.image_size;
        if !(w > 0.0 && h > 0.0) {
            out.push("image size must be positive".to_string());
        }
        for (i, b) in self.det_boxes.iter().enumerate() {
            if !(0.0..=1.0).contains(&b.confidence) {
                out.push(format!("det_boxes[{i}]: confidence outside [0,1]"));
            }
            if b.bbox.max.x < b.bbox.min.x || b.bbox.max.y < b.bbox.min.y {
                out.push(format!("det_boxes[{i}]: max corner below min corner"));
            }
        }
        for (i, p) in self.det_poses.iter().enumerate() {
            if p.action_confidence.values().any(|c| !(0.0..=1.0).contains(c)) {
                out.push(format!("det_poses[{i}]: action confidence outside [0,1]"));
            }
        }
        out.extend(self.camera.check().into_iter().map(String::from));
        out
    }
}

/// One structural problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: Option<NodeId>,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NonpositiveExtent,
    YawOutOfRange,
    NonpositiveScale,
    PoseParamMismatch,
    EmptyActionSet,
    DuplicateId,
    SupportEdgeCount,
    DanglingSupportEdge,
    InvalidSupporter,
    DanglingHoiEdge,
    HoiActionNotPerformed,
    CameraInvalid,
}

impl ViolationKind {
    pub fn describe(self) -> &'static str {
        match self {
            ViolationKind::NonpositiveExtent => "nonpositive extent",
            ViolationKind::YawOutOfRange => "yaw outside [-pi, pi)",
            ViolationKind::NonpositiveScale => "nonpositive scale",
            ViolationKind::PoseParamMismatch => "joints disagree with pose parameters",
            ViolationKind::EmptyActionSet => "empty action set",
            ViolationKind::DuplicateId => "duplicate node id",
            ViolationKind::SupportEdgeCount => "not in exactly one support edge",
            ViolationKind::DanglingSupportEdge => "dangling support edge",
            ViolationKind::InvalidSupporter => "invalid supporter",
            ViolationKind::DanglingHoiEdge => "dangling hoi edge",
            ViolationKind::HoiActionNotPerformed => "hoi action not in human's action set",
            ViolationKind::CameraInvalid => "invalid camera",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(id) => write!(f, "{id}: {}", self.kind.describe()),
            None => f.write_str(self.kind.describe()),
        }
    }
}

fn check_cuboid(c: &Cuboid, id: NodeId, out: &mut Vec<Violation>) {
    if !(c.size.x > 0.0 && c.size.y > 0.0 && c.size.z > 0.0) {
        out.push(Violation { node: Some(id), kind: ViolationKind::NonpositiveExtent });
    }
    if !(-PI..PI).contains(&c.yaw) {
        out.push(Violation { node: Some(id), kind: ViolationKind::YawOutOfRange });
    }
}

/// Lists every violated structural invariant; empty means well formed.
pub fn validate(pg: &ParseGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let v = |node, kind| Violation { node, kind };

    if !pg.camera.check().is_empty() {
        out.push(v(None, ViolationKind::CameraInvalid));
    }
    check_cuboid(&pg.layout, LAYOUT_ID, &mut out);

    let mut seen = HashSet::from([LAYOUT_ID]);
    for o in &pg.objects {
        if !seen.insert(o.id) {
            out.push(v(Some(o.id), ViolationKind::DuplicateId));
        }
        check_cuboid(&o.cuboid, o.id, &mut out);
    }
    for h in &pg.humans {
        if !seen.insert(h.id) {
            out.push(v(Some(h.id), ViolationKind::DuplicateId));
        }
        if !(h.pose.scale > 0.0) {
            out.push(v(Some(h.id), ViolationKind::NonpositiveScale));
        } else if !(h.pose.param_residual() <= 1e-9) {
            out.push(v(Some(h.id), ViolationKind::PoseParamMismatch));
        }
        if h.pose.actions.is_empty() {
            out.push(v(Some(h.id), ViolationKind::EmptyActionSet));
        }
    }

    let leaf_ids = pg.objects.iter().map(|o| o.id).chain(pg.humans.iter().map(|h| h.id));
    for id in leaf_ids {
        let n = pg.support_edges.iter().filter(|e| e.supported == id).count();
        if n != 1 {
            out.push(v(Some(id), ViolationKind::SupportEdgeCount));
        }
    }
    for e in &pg.support_edges {
        if pg.resolve(e.supported).is_none() || e.supported == LAYOUT_ID {
            out.push(v(Some(e.supported), ViolationKind::DanglingSupportEdge));
            continue;
        }
        if let Supporter::Object(s) = e.supporter {
            if s == e.supported || pg.human(s).is_some() {
                out.push(v(Some(e.supported), ViolationKind::InvalidSupporter));
            } else if pg.object(s).is_none() {
                out.push(v(Some(e.supported), ViolationKind::DanglingSupportEdge));
            }
        }
    }
    for e in &pg.hoi_edges {
        match (pg.human(e.human), pg.object(e.object)) {
            (Some(h), Some(_)) => {
                if !h.pose.actions.contains(e.action) {
                    out.push(v(Some(e.human), ViolationKind::HoiActionNotPerformed));
                }
            }
            _ => out.push(v(Some(e.human), ViolationKind::DanglingHoiEdge)),
        }
    }
    out
}
