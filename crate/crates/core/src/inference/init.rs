//! Bottom-up initialization: one cuboid per detection back-projected to a
//! class-default height, one lifted skeleton per 2D pose, and support
//! edges chosen by minimum support energy.

use std::collections::BTreeMap;

use crate::classes::ClassTable;
use crate::error::{Error, Result};
use crate::geometry::{footprint, hip_footprint, polygon_overlap_ratio, project_point, Polygon2D};
use crate::scene::{
    normalize_angle, rotate_z, ActionSet, Camera, Cuboid, HumanNode, HumanPose, Joint, NodeId, ObjectNode,
    Observations, ParseGraph, SupportEdge, Supporter, Vec2, Vec3, NUM_JOINTS,
};
use crate::templates::{facing_yaw, Template};

/// Multinoulli support priors `p(supporter class | supported class)`.
/// The floor is named `"floor"` and walls `"wall"`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPriorTable {
    pub probs: BTreeMap<(String, String), f64>,
    pub lambda: f64,
}

impl Default for SupportPriorTable {
    fn default() -> Self {
        Self { probs: BTreeMap::new(), lambda: 1.0 }
    }
}

impl SupportPriorTable {
    /// Listed probability, else 1 for floor and objects and 0 for walls.
    pub fn prob(&self, supported: &str, supporter: &str) -> f64 {
        match self.probs.get(&(supported.to_string(), supporter.to_string())) {
            Some(p) => *p,
            None if supporter == "wall" => 0.0,
            None => 1.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("support lambda must be nonnegative, got {}", self.lambda)));
        }
        for ((a, b), p) in &self.probs {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidParameter(format!("support prior ({a}, {b}) = {p} outside [0,1]")));
            }
        }
        Ok(())
    }

    fn penalty(&self, supported: &str, supporter: &str) -> f64 {
        let p = self.prob(supported, supporter);
        if p <= 0.0 {
            f64::INFINITY
        } else {
            -self.lambda * p.ln()
        }
    }
}

/// Assumed world heights of lifting anchors, standing and seated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorHeights {
    pub hip: f64,
    pub head: f64,
    pub hip_seated: f64,
    pub head_seated: f64,
}

impl Default for AnchorHeights {
    fn default() -> Self {
        Self { hip: 0.9, head: 1.7, hip_seated: 0.45, head_seated: 1.2 }
    }
}

impl AnchorHeights {
    pub fn get(&self, anchor: Joint, seated: bool) -> f64 {
        match (anchor, seated) {
            (Joint::Head, false) => self.head,
            (Joint::Head, true) => self.head_seated,
            (_, false) => self.hip,
            (_, true) => self.hip_seated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitConfig {
    pub classes: ClassTable,
    pub support: SupportPriorTable,
    pub heights: AnchorHeights,
    /// Room box used when the observations carry none.
    pub layout: Option<Cuboid>,
}

/// Point on the ray through `pixel` at world height `h0`.
pub fn lift_anchor(pixel: &Vec2, cam: &Camera, h0: f64) -> Result<Vec3> {
    let d = cam
        .pixel_ray(pixel)
        .ok_or_else(|| Error::UnliftablePose("intrinsics are not invertible".into()))?;
    if d.z.abs() < 1e-9 {
        return Err(Error::UnliftablePose("anchor ray is parallel to the anchor plane".into()));
    }
    let t = (h0 - cam.position.z) / d.z;
    if !(t > 1e-9) {
        return Err(Error::UnliftablePose("anchor plane is behind the camera".into()));
    }
    Ok(cam.position + d * t)
}

/// Places a hip-centred local pose (world-aligned axes) so that `anchor`
/// sits where the ray through `anchor_px` meets height `h0`. The local
/// pose is translated only; its heading becomes the pose yaw.
pub fn lift_pose_to_world(
    local_pose: &[Vec3; NUM_JOINTS],
    anchor: Joint,
    anchor_px: &Vec2,
    cam: &Camera,
    h0: f64,
    actions: ActionSet,
) -> Result<HumanPose> {
    let target = lift_anchor(anchor_px, cam, h0)?;
    let hip = local_pose[Joint::Hip.index()];
    let local: [Vec3; NUM_JOINTS] = local_pose.map(|p| p - hip);
    let yaw = facing_yaw(&local);
    let rel = local.map(|p| rotate_z(&p, -yaw));
    let center = target - local[anchor.index()];
    crate::scene::pose_from_params(center, 1.0, rel, yaw, actions)
}

fn reprojection_error(pose: &HumanPose, cam: &Camera, joints: &[Vec2; NUM_JOINTS], visible: &[bool; NUM_JOINTS]) -> f64 {
    let mut s = 0.0;
    for j in 0..NUM_JOINTS {
        if visible[j] {
            s += match project_point(cam, &pose.joints[j]) {
                Ok(p) => (p - joints[j]).norm(),
                Err(_) => 1e9,
            };
        }
    }
    s
}

fn heading(cam: &Camera) -> f64 {
    let f = cam.rotation.row(2);
    f[1].atan2(f[0])
}

/// Support target for score computation.
struct Candidate<'a> {
    supporter: Supporter,
    class: &'a str,
    top: f64,
    footprint: Option<Polygon2D>,
    order: u32,
}

/// Picks the supporter minimizing `E_o + E_height − λ·ln p`; ties go to
/// the lower top surface, then the lower node id (floor first).
pub fn choose_supporter(
    pg: &ParseGraph,
    class: &str,
    self_id: NodeId,
    bottom: f64,
    fp: &Polygon2D,
    table: &SupportPriorTable,
) -> Supporter {
    let floor_z = pg.floor_z();
    let mut cands = vec![
        Candidate { supporter: Supporter::Floor, class: "floor", top: floor_z, footprint: None, order: 0 },
        Candidate { supporter: Supporter::Wall, class: "wall", top: f64::INFINITY, footprint: None, order: 0 },
    ];
    for o in &pg.objects {
        if o.id != self_id {
            cands.push(Candidate {
                supporter: Supporter::Object(o.id),
                class: &o.cuboid.class_label,
                top: o.cuboid.top_z(),
                footprint: Some(footprint(&o.cuboid)),
                order: o.id.0,
            });
        }
    }
    let score = |c: &Candidate| -> f64 {
        let phys = match c.supporter {
            Supporter::Floor => (bottom - floor_z).abs(),
            Supporter::Wall => 1.0,
            Supporter::Object(_) => {
                1.0 - polygon_overlap_ratio(fp, c.footprint.as_ref().expect("object footprint")) + (bottom - c.top).abs()
            }
        };
        phys + table.penalty(class, c.class)
    };
    let mut best: Option<(f64, &Candidate)> = None;
    for c in &cands {
        let s = score(c);
        if !s.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((bs, b)) => s < bs || (s == bs && (c.top < b.top || (c.top == b.top && c.order < b.order))),
        };
        if better {
            best = Some((s, c));
        }
    }
    best.map(|(_, c)| c.supporter).unwrap_or(Supporter::Floor)
}

/// Support edge for object `i` by minimum support score.
pub fn support_for_object(pg: &ParseGraph, i: usize, table: &SupportPriorTable) -> SupportEdge {
    let o = &pg.objects[i];
    let s = choose_supporter(pg, &o.cuboid.class_label, o.id, o.cuboid.bottom_z(), &footprint(&o.cuboid), table);
    SupportEdge { supported: o.id, supporter: s }
}

pub fn support_for_human(pg: &ParseGraph, h: usize, table: &SupportPriorTable, hip_half_side: f64) -> SupportEdge {
    let p = &pg.humans[h].pose;
    let s = choose_supporter(pg, "human", pg.humans[h].id, p.feet_z(), &hip_footprint(p, hip_half_side), table);
    SupportEdge { supported: pg.humans[h].id, supporter: s }
}

/// Builds the initial parse graph from observations.
pub fn init_scene(obs: &Observations, cfg: &InitConfig) -> Result<ParseGraph> {
    let layout = obs
        .layout
        .clone()
        .or_else(|| cfg.layout.clone())
        .ok_or_else(|| Error::Initialization("no room layout in observations or config; floor height unknown".into()))?;
    if !(layout.size.x > 0.0 && layout.size.y > 0.0 && layout.size.z > 0.0) {
        return Err(Error::Initialization("room layout has a nonpositive extent".into()));
    }
    let cam = obs.camera.clone();
    let mut pg = ParseGraph::new(layout, cam.clone());
    let floor = pg.floor_z();
    let yaw = normalize_angle(heading(&cam));

    for (k, det) in obs.det_boxes.iter().enumerate() {
        let info = cfg.classes.get(&det.class_label);
        let px = det.bbox.center();
        let center = match lift_anchor(&px, &cam, floor + info.center_height) {
            Ok(c) => c,
            Err(_) => {
                let d = cam.pixel_ray(&px).unwrap_or_else(|| cam.rotation.row(2).transpose());
                cam.position + d * 3.0
            }
        };
        pg.objects.push(ObjectNode {
            id: NodeId(k as u32 + 1),
            cuboid: Cuboid::new(center, info.size, yaw, det.class_label.clone()).with_container(info.is_container),
            detection: Some(k),
            synthesized: false,
        });
    }

    let base = obs.det_boxes.len() as u32 + 1;
    for (k, det) in obs.det_poses.iter().enumerate() {
        if det.actions.is_empty() {
            return Err(Error::Initialization(format!("det_poses[{k}] carries no action label")));
        }
        let seated = det.actions.iter().any(|a| a.is_seated());
        let anchor = [Joint::Hip, Joint::Head]
            .into_iter()
            .find(|j| det.visible[j.index()])
            .ok_or_else(|| Error::UnliftablePose(format!("det_poses[{k}]: neither hip nor head is visible")))?;
        let h0 = cfg.heights.get(anchor, seated);
        let px = det.joints[anchor.index()];
        let pose = match &det.local_pose {
            Some(local) => lift_pose_to_world(local, anchor, &px, &cam, h0, det.actions)?,
            None => {
                // template heading by best reprojection over 24 headings
                let t = Template::for_actions(det.actions).joints();
                let mut best: Option<(f64, HumanPose)> = None;
                for s in 0..24 {
                    let yaw = -std::f64::consts::PI + s as f64 * std::f64::consts::PI / 12.0;
                    let local = t.map(|p| rotate_z(&p, yaw));
                    let p = lift_pose_to_world(&local, anchor, &px, &cam, h0, det.actions)?;
                    let e = reprojection_error(&p, &cam, &det.joints, &det.visible);
                    if best.as_ref().is_none_or(|(be, _)| e < *be) {
                        best = Some((e, p));
                    }
                }
                best.expect("24 headings tried").1
            }
        };
        pg.humans.push(HumanNode { id: NodeId(base + k as u32), pose, detection: Some(k) });
    }

    let mut edges = Vec::new();
    for i in 0..pg.objects.len() {
        edges.push(support_for_object(&pg, i, &cfg.support));
    }
    for h in 0..pg.humans.len() {
        edges.push(support_for_human(&pg, h, &cfg.support, 0.1));
    }
    pg.support_edges = edges;
    Ok(pg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Action, DetBox, Rect2D};
    use approx::assert_abs_diff_eq;

    fn level_cam() -> Camera {
        Camera::looking(Camera::intrinsics_from(600.0, 320.0, 240.0), Vec3::new(0.0, 0.0, 1.5), 0.0, 0.0)
    }

    #[test]
    fn lift_anchor_ray_plane() {
        let cam = level_cam();
        // ray (1, 0, -1/6) from height 1.5 reaches 0.9 after 3.6 m
        let v = lift_anchor(&Vec2::new(320.0, 340.0), &cam, 0.9).unwrap();
        assert_abs_diff_eq!(v, Vec3::new(3.6, 0.0, 0.9), epsilon = 1e-9);
        assert!(matches!(lift_anchor(&Vec2::new(320.0, 240.0), &cam, 1.5), Err(Error::UnliftablePose(_))));
        // plane above a downward ray
        assert!(lift_anchor(&Vec2::new(320.0, 340.0), &cam, 2.0).is_err());
    }

    #[test]
    fn lift_pose_translates_only() {
        let cam = level_cam();
        let local = Template::Stand.joints().map(|p| rotate_z(&p, 0.7));
        let p = lift_pose_to_world(&local, Joint::Hip, &Vec2::new(300.0, 300.0), &cam, 0.9, ActionSet::single(Action::Stand)).unwrap();
        assert_abs_diff_eq!(p.yaw, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(p.center.z, 0.9, epsilon = 1e-9);
        for (a, b) in p.joints.iter().zip(local.iter()) {
            assert_abs_diff_eq!(a - p.center, *b, epsilon = 1e-12);
        }
        assert!(p.param_residual() < 1e-12);
    }

    fn obs() -> Observations {
        let cam = Camera::looking(Camera::intrinsics_from(500.0, 320.0, 240.0), Vec3::new(-3.0, 0.0, 1.4), 0.0, 0.3);
        Observations {
            camera: cam,
            image_size: (640.0, 480.0),
            det_boxes: vec![],
            det_poses: vec![],
            layout: Some(Cuboid::new(Vec3::new(0.0, 0.0, 1.5), Vec3::new(8.0, 8.0, 3.0), 0.0, "layout")),
        }
    }

    #[test]
    fn init_empty_and_single_chair() {
        let mut o = obs();
        let pg = init_scene(&o, &InitConfig::default()).unwrap();
        assert!(pg.objects.is_empty() && pg.humans.is_empty() && pg.support_edges.is_empty());
        o.det_boxes.push(DetBox { class_label: "chair".into(), bbox: Rect2D::from_xyxy(280.0, 260.0, 360.0, 380.0), confidence: 0.9 });
        let pg = init_scene(&o, &InitConfig::default()).unwrap();
        assert_eq!(pg.objects.len(), 1);
        assert_eq!(pg.support_edges, vec![SupportEdge { supported: NodeId(1), supporter: Supporter::Floor }]);
        assert_abs_diff_eq!(pg.objects[0].cuboid.bottom_z(), 0.0, epsilon = 1e-9);
        o.layout = None;
        assert!(matches!(init_scene(&o, &InitConfig::default()), Err(Error::Initialization(_))));
    }

    #[test]
    fn laptop_prefers_table_over_shelf() {
        let o = obs();
        let mut pg = ParseGraph::new(o.layout.clone().unwrap(), o.camera.clone());
        let mk = |id, c: Vec3, s: Vec3, cl: &str| ObjectNode { id: NodeId(id), cuboid: Cuboid::new(c, s, 0.0, cl), detection: None, synthesized: false };
        pg.objects.push(mk(1, Vec3::new(0.0, 0.0, 0.375), Vec3::new(0.8, 1.2, 0.75), "table"));
        pg.objects.push(mk(2, Vec3::new(2.5, 2.5, 0.9), Vec3::new(0.35, 1.0, 1.8), "bookshelf"));
        pg.objects.push(mk(3, Vec3::new(0.1, 0.1, 0.9), Vec3::new(0.25, 0.35, 0.25), "laptop"));
        let t = SupportPriorTable::default();
        // brute-force scoring over the two object candidates
        let laptop = &pg.objects[2].cuboid;
        let score = |s: &Cuboid| 1.0 - polygon_overlap_ratio(&footprint(laptop), &footprint(s)) + (laptop.bottom_z() - s.top_z()).abs();
        let (on_table, on_shelf) = (score(&pg.objects[0].cuboid), score(&pg.objects[1].cuboid));
        assert!(on_table < on_shelf);
        assert!(on_table < laptop.bottom_z() - pg.floor_z());
        assert_eq!(support_for_object(&pg, 2, &t).supporter, Supporter::Object(NodeId(1)));
        assert_eq!(support_for_object(&pg, 0, &t).supporter, Supporter::Floor);
    }

    #[test]
    fn wall_needs_explicit_prior() {
        let t = SupportPriorTable::default();
        assert_eq!(t.prob("picture", "wall"), 0.0);
        assert_eq!(t.prob("picture", "floor"), 1.0);
        let mut listed = t.clone();
        listed.probs.insert(("picture".into(), "wall".into()), 1.0);
        let o = obs();
        let mut pg = ParseGraph::new(o.layout.clone().unwrap(), o.camera.clone());
        pg.objects.push(ObjectNode { id: NodeId(1), cuboid: Cuboid::new(Vec3::new(3.95, 0.0, 1.7), Vec3::new(0.05, 0.8, 0.6), 0.0, "picture"), detection: None, synthesized: false });
        assert_eq!(support_for_object(&pg, 0, &t).supporter, Supporter::Floor);
        assert_eq!(support_for_object(&pg, 0, &listed).supporter, Supporter::Wall);
    }
}
