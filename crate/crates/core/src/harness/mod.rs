//! Synthetic ground truth: rooms with objects on valid supporters, people
//! placed by minimizing physics plus interaction energy, rendered
//! observations, degraded initializations, and evaluation metrics.

mod metrics;

pub use metrics::{evaluate, match_objects, Metrics};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::classes::ClassTable;
use crate::energy::{collision_energy, support_energy, EnergyConfig, EnergyWeights, Scorer};
use crate::error::{Error, Result};
use crate::geometry::{human_hull_volume_proxy, intersection_volume, project_point, projected_bounding_rect, HUMAN_MARGIN};
use crate::hoi_prior::HoiPriorSet;
use crate::scene::{
    normalize_angle, pose_from_params, rotate_z, validate, Action, ActionSet, Camera, Cuboid, DetBox, DetPose,
    HoiEdge, HumanNode, HumanPose, Joint, NodeId, NodeRef, ObjectNode, Observations, ParseGraph, Rect2D, SupportEdge,
    Supporter, Vec2, Vec3, NUM_JOINTS,
};
use crate::templates::Template;

/// Classes that can hold other objects on their top face.
pub const SURFACE_CLASSES: [&str; 4] = ["table", "desk", "nightstand", "cabinet"];
/// Classes that rest on a surface rather than the floor.
pub const TABLETOP_CLASSES: [&str; 8] = ["laptop", "monitor", "bottle", "cup", "book", "notebook", "tablet", "phone"];

const GRID: f64 = 1.0 / 64.0;
const FLOOR_GAP: f64 = 0.05;
const MAX_ATTEMPTS: usize = 200;

fn quantize(x: f64) -> f64 {
    (x / GRID).round() * GRID
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraSpec {
    pub height: (f64, f64),
    /// Downward tilt, radians.
    pub pitch: (f64, f64),
    /// Heading spread around the room's long axis, radians.
    pub yaw: (f64, f64),
    pub focal: f64,
    pub image_size: (f64, f64),
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            height: (1.2, 1.6),
            pitch: (15f64.to_radians(), 25f64.to_radians()),
            yaw: (-10f64.to_radians(), 10f64.to_radians()),
            focal: 520.0,
            image_size: (640.0, 480.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseModel {
    /// Detection box corner jitter, pixels.
    pub box_sigma: f64,
    /// 2D joint jitter, pixels.
    pub joint_sigma: f64,
    /// Probability that an object produces no detection.
    pub miss_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// Side lengths of the floor rectangle, meters.
    pub room_side: (f64, f64),
    pub room_height: (f64, f64),
    /// Total object count, interaction objects included.
    pub n_objects: (usize, usize),
    /// Classes drawn uniformly for the non-interacting objects.
    pub inventory: Vec<String>,
    /// Relative uniform jitter on class-default sizes.
    pub size_jitter: f64,
    pub humans: usize,
    /// Each person performs one action drawn from this list.
    pub actions: Vec<Action>,
    pub camera: CameraSpec,
    pub noise: NoiseModel,
    pub classes: ClassTable,
    pub seed: u64,
    pub max_retries: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        let inventory = ["table", "desk", "cabinet", "nightstand", "bookshelf", "laptop", "monitor", "cup", "book"];
        Self {
            room_side: (4.0, 6.0),
            room_height: (2.6, 3.0),
            n_objects: (2, 5),
            inventory: inventory.iter().map(|s| s.to_string()).collect(),
            size_jitter: 0.1,
            humans: 1,
            actions: vec![Action::Sit, Action::SitAt],
            camera: CameraSpec::default(),
            noise: NoiseModel::default(),
            classes: ClassTable::default(),
            seed: 0,
            max_retries: 50,
        }
    }
}

impl SceneSpec {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi;
        if !range_ok(self.room_side) || !range_ok(self.room_height) {
            return bad("room ranges must be positive with lo <= hi");
        }
        if self.n_objects.0 > self.n_objects.1 {
            return bad("object count range is reversed");
        }
        if self.humans > 0 && self.actions.is_empty() {
            return bad("people requested but no actions listed");
        }
        if self.n_objects.0 < self.humans {
            return bad("each person needs an interaction object");
        }
        if !(0.0..1.0).contains(&self.size_jitter) {
            return bad("size jitter must lie in [0, 1)");
        }
        let n = &self.noise;
        if !(0.0..=1.0).contains(&n.miss_prob) || n.box_sigma < 0.0 || n.joint_sigma < 0.0 {
            return bad("noise levels must be nonnegative and the miss probability in [0, 1]");
        }
        let c = &self.camera;
        if !(c.focal > 0.0 && c.image_size.0 > 0.0 && c.image_size.1 > 0.0) || c.pitch.0 > c.pitch.1 {
            return bad("camera spec is invalid");
        }
        if self.inventory.is_empty() && self.n_objects.1 > self.humans {
            return bad("inventory is empty");
        }
        Ok(())
    }
}

/// A generated person: `skeleton = Rot(yaw)·(scale·template) + translation`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedHuman {
    pub action: Action,
    pub template: [Vec3; NUM_JOINTS],
    pub translation: Vec3,
    pub yaw: f64,
    pub scale: f64,
    pub skeleton: [Vec3; NUM_JOINTS],
}

impl AugmentedHuman {
    pub fn new(action: Action, template: [Vec3; NUM_JOINTS], translation: Vec3, yaw: f64, scale: f64) -> Self {
        let skeleton = template.map(|j| rotate_z(&(j * scale), yaw) + translation);
        Self { action, template, translation, yaw, scale, skeleton }
    }

    pub fn pose(&self) -> Result<HumanPose> {
        pose_from_params(self.translation, self.scale, self.template, self.yaw, ActionSet::single(self.action))
    }
}

struct Draft {
    cuboid: Cuboid,
    /// Index of the supporting draft, or floor.
    on: Option<usize>,
}

struct Room<'a> {
    spec: &'a SceneSpec,
    layout: Cuboid,
    camera: Camera,
    objects: Vec<Draft>,
    humans: Vec<(AugmentedHuman, usize)>,
}

impl Room<'_> {
    fn visible(&self, points: &[Vec3]) -> bool {
        let (w, h) = self.spec.camera.image_size;
        points.iter().all(|p| {
            self.camera.to_camera_frame(p).z > 0.1
                && project_point(&self.camera, p).is_ok_and(|px| px.x >= 0.0 && px.x <= w && px.y >= 0.0 && px.y <= h)
        })
    }

    fn inside(&self, c: &Cuboid, margin: f64) -> bool {
        let (hx, hy) = (0.5 * self.layout.size.x - margin, 0.5 * self.layout.size.y - margin);
        c.footprint_xy().iter().all(|p| p.x.abs() <= hx && p.y.abs() <= hy) && c.top_z() <= self.layout.top_z()
    }

    fn clear_of_people(&self, c: &Cuboid, except: Option<usize>) -> bool {
        self.humans.iter().all(|(h, obj)| {
            if Some(*obj) == except {
                return true;
            }
            let Ok(pose) = h.pose() else { return false };
            let mut proxy = human_hull_volume_proxy(&pose, HUMAN_MARGIN);
            proxy.size += Vec3::repeat(2.0 * FLOOR_GAP);
            intersection_volume(&proxy, c) == 0.0
        })
    }

    fn clear_of_floor_objects(&self, c: &Cuboid) -> bool {
        let r = c.footprint_radius();
        self.objects.iter().filter(|d| d.on.is_none()).all(|d| {
            let o = &d.cuboid;
            let dist = (o.center.xy() - c.center.xy()).norm();
            dist > r + o.footprint_radius() + FLOOR_GAP
        })
    }

    fn sized<R: Rng + ?Sized>(&self, class: &str, rng: &mut R) -> Vec3 {
        let base = self.spec.classes.get(class).size;
        let j = self.spec.size_jitter;
        base.map(|s| quantize(s * (1.0 + uniform(rng, (-j, j)))).max(GRID))
    }

    fn place_on_floor<R: Rng + ?Sized>(&mut self, class: &str, wall_margin: f64, rng: &mut R) -> Option<usize> {
        let size = self.sized(class, rng);
        let info = self.spec.classes.get(class);
        for _ in 0..MAX_ATTEMPTS {
            let (hx, hy) = (0.5 * self.layout.size.x - wall_margin, 0.5 * self.layout.size.y - wall_margin);
            if hx <= 0.0 || hy <= 0.0 {
                return None;
            }
            let center = Vec3::new(quantize(uniform(rng, (-hx, hx))), quantize(uniform(rng, (-hy, hy))), 0.5 * size.z);
            let yaw = quantize(uniform(rng, (-PI, PI)));
            let c = Cuboid::new(center, size, yaw, class).with_container(info.is_container);
            if self.inside(&c, FLOOR_GAP)
                && self.clear_of_floor_objects(&c)
                && self.clear_of_people(&c, None)
                && self.visible(&c.corners())
            {
                self.objects.push(Draft { cuboid: c, on: None });
                return Some(self.objects.len() - 1);
            }
        }
        None
    }

    fn place_on_surface<R: Rng + ?Sized>(&mut self, class: &str, rng: &mut R) -> Option<usize> {
        let surfaces: Vec<usize> = (0..self.objects.len())
            .filter(|&i| {
                let d = &self.objects[i];
                d.on.is_none() && SURFACE_CLASSES.contains(&d.cuboid.class_label.as_str())
            })
            .collect();
        if surfaces.is_empty() {
            return None;
        }
        let size = self.sized(class, rng);
        let info = self.spec.classes.get(class);
        for _ in 0..MAX_ATTEMPTS {
            let s = surfaces[rng.random_range(0..surfaces.len())];
            let sup = self.objects[s].cuboid.clone();
            let yaw = normalize_angle(sup.yaw + quantize(uniform(rng, (-PI, PI))));
            let r = 0.5 * size.x.hypot(size.y);
            let (hx, hy) = (0.5 * sup.size.x - r, 0.5 * sup.size.y - r);
            if hx < 0.0 || hy < 0.0 {
                continue;
            }
            let local = Vec3::new(uniform(rng, (-hx, hx)), uniform(rng, (-hy, hy)), 0.0);
            let xy = sup.center + rotate_z(&local, sup.yaw);
            let center = Vec3::new(quantize(xy.x), quantize(xy.y), sup.top_z() + 0.5 * size.z);
            let c = Cuboid::new(center, size, yaw, class).with_container(info.is_container);
            // quantizing may nudge the footprint past the edge
            let contained = crate::geometry::footprint_overlap(&c, &sup) >= 1.0 - 1e-12;
            let clear = self
                .objects
                .iter()
                .filter(|d| d.on == Some(s))
                .all(|d| intersection_volume(&d.cuboid, &c) == 0.0 && (d.cuboid.center - c.center).xy().norm() > r);
            if contained
                && clear
                && self.inside(&c, FLOOR_GAP)
                && self.clear_of_people(&c, None)
                && self.visible(&c.corners())
            {
                self.objects.push(Draft { cuboid: c, on: Some(s) });
                return Some(self.objects.len() - 1);
            }
        }
        None
    }

    /// Graph over the drafts so far, ids in draft order, people after.
    fn graph(&self, humans: &[(AugmentedHuman, usize)]) -> Result<ParseGraph> {
        let mut pg = ParseGraph::new(self.layout.clone(), self.camera.clone());
        for (i, d) in self.objects.iter().enumerate() {
            let id = NodeId(i as u32 + 1);
            pg.objects.push(ObjectNode { id, cuboid: d.cuboid.clone(), detection: None, synthesized: false });
            let supporter = match d.on {
                Some(s) => Supporter::Object(NodeId(s as u32 + 1)),
                None => Supporter::Floor,
            };
            pg.support_edges.push(SupportEdge { supported: id, supporter });
        }
        let base = self.objects.len() as u32 + 1;
        for (k, (h, obj)) in humans.iter().enumerate() {
            let id = NodeId(base + k as u32);
            pg.humans.push(HumanNode { id, pose: h.pose()?, detection: None });
            pg.support_edges.push(SupportEdge { supported: id, supporter: Supporter::Floor });
            pg.hoi_edges.push(HoiEdge { human: id, object: NodeId(*obj as u32 + 1), action: h.action });
        }
        Ok(pg)
    }
}

/// Person with feet exactly on the floor at `z = 0`.
fn grounded(action: Action, template: &[Vec3; NUM_JOINTS], x: f64, y: f64, yaw: f64, scale: f64) -> AugmentedHuman {
    let ankle = template[Joint::LeftAnkle.index()].z.min(template[Joint::RightAnkle.index()].z);
    AugmentedHuman::new(action, *template, Vec3::new(x, y, -(ankle * scale)), normalize_angle(yaw), scale)
}

/// Minimizes physics plus interaction energy of one person joining the
/// room, by grid search then coordinate descent over position, heading
/// and scale. The person is kept on the floor throughout.
pub fn place_human(
    pg_without: &ParseGraph,
    priors: &HoiPriorSet,
    action: Action,
    target: NodeId,
    window: f64,
) -> Result<AugmentedHuman> {
    let template = Template::for_actions(ActionSet::single(action)).joints();
    let obs = Observations {
        camera: pg_without.camera.clone(),
        image_size: (1.0, 1.0),
        det_boxes: Vec::new(),
        det_poses: Vec::new(),
        layout: None,
    };
    let weights = EnergyWeights { w_likelihood_obj: 0.0, w_likelihood_pose: 0.0, ..EnergyWeights::default() };
    let scorer = Scorer::new(&obs, priors, EnergyConfig { weights, ..EnergyConfig::default() });
    let target_c = pg_without
        .object(target)
        .ok_or_else(|| Error::Generation(format!("interaction target {target} missing")))?
        .cuboid
        .center;
    let hid = pg_without.next_id();
    let mut pg = pg_without.clone();
    pg.support_edges.push(SupportEdge { supported: hid, supporter: Supporter::Floor });
    pg.hoi_edges.push(HoiEdge { human: hid, object: target, action });
    pg.humans.push(HumanNode { id: hid, pose: grounded(action, &template, 0.0, 0.0, 0.0, 1.0).pose()?, detection: None });
    let h = pg.humans.len() - 1;
    let mut energy = |p: [f64; 4]| -> Result<f64> {
        pg.humans[h].pose = grounded(action, &template, p[0], p[1], p[2], p[3]).pose()?;
        Ok(scorer.local(&pg, NodeRef::Human(h))?.weighted(scorer.weights()))
    };

    let mut best = ([0.0; 4], f64::INFINITY);
    let n = (window / 0.1).round() as i32;
    for ix in -n..=n {
        for iy in -n..=n {
            for k in 0..24 {
                for s in [0.9, 1.0, 1.1] {
                    let p = [target_c.x + 0.1 * ix as f64, target_c.y + 0.1 * iy as f64, k as f64 * PI / 12.0, s];
                    let e = energy(p)?;
                    if e < best.1 {
                        best = (p, e);
                    }
                }
            }
        }
    }
    let mut steps = [0.05, 0.05, PI / 24.0, 0.05];
    let floor = [1e-4, 1e-4, 1e-4, 1e-4];
    while steps.iter().zip(&floor).any(|(s, f)| s > f) {
        let mut improved = false;
        for axis in 0..4 {
            for dir in [1.0, -1.0] {
                let mut p = best.0;
                p[axis] += dir * steps[axis];
                if axis == 3 && p[3] <= 0.5 {
                    continue;
                }
                let e = energy(p)?;
                if e < best.1 {
                    best = (p, e);
                    improved = true;
                }
            }
        }
        if !improved {
            for s in &mut steps {
                *s *= 0.5;
            }
        }
    }
    let p = best.0;
    Ok(grounded(action, &template, p[0], p[1], p[2], p[3]))
}

fn sample_room<R: Rng + ?Sized>(spec: &SceneSpec, rng: &mut R) -> (Cuboid, Camera) {
    let w = quantize(uniform(rng, spec.room_side));
    let d = quantize(uniform(rng, spec.room_side));
    let h = quantize(uniform(rng, spec.room_height));
    let layout = Cuboid::new(Vec3::new(0.0, 0.0, 0.5 * h), Vec3::new(w, d, h), 0.0, "room");
    let c = &spec.camera;
    let pos = Vec3::new(-0.5 * w + 0.25, uniform(rng, (-d / 6.0, d / 6.0)), uniform(rng, c.height));
    let k = Camera::intrinsics_from(c.focal, 0.5 * c.image_size.0, 0.5 * c.image_size.1);
    let camera = Camera::looking(k, pos, uniform(rng, c.yaw), uniform(rng, c.pitch));
    (layout, camera)
}

fn try_generate<R: Rng + ?Sized>(spec: &SceneSpec, priors: &HoiPriorSet, rng: &mut R) -> Result<Option<ParseGraph>> {
    let (layout, camera) = sample_room(spec, rng);
    let mut room = Room { spec, layout, camera, objects: Vec::new(), humans: Vec::new() };
    let n_obj = rng.random_range(spec.n_objects.0..=spec.n_objects.1);

    for _ in 0..spec.humans {
        let action = spec.actions[rng.random_range(0..spec.actions.len())];
        let class = priors.get(action)?.default_class().to_string();
        if TABLETOP_CLASSES.contains(&class.as_str()) {
            return Err(Error::Generation(format!(
                "{action}: interaction class {class} does not rest on the floor and cannot be generated"
            )));
        }
        let Some(obj) = room.place_on_floor(&class, 1.0, rng) else { return Ok(None) };
        let pg = room.graph(&room.humans)?;
        let person = place_human(&pg, priors, action, NodeId(obj as u32 + 1), 1.0)?;
        let Ok(pose) = person.pose() else { return Ok(None) };
        let proxy = human_hull_volume_proxy(&pose, HUMAN_MARGIN);
        if !room.visible(&pose.joints) || !room.inside(&proxy, 0.0) {
            return Ok(None);
        }
        room.humans.push((person, obj));
    }

    let mut failures = 0;
    while room.objects.len() < n_obj && failures < 20 {
        let class = spec.inventory[rng.random_range(0..spec.inventory.len())].clone();
        let placed = if TABLETOP_CLASSES.contains(&class.as_str()) {
            room.place_on_surface(&class, rng)
        } else {
            room.place_on_floor(&class, FLOOR_GAP, rng)
        };
        if placed.is_none() {
            failures += 1;
        }
    }
    if room.objects.len() < n_obj {
        return Ok(None);
    }

    let pg = room.graph(&room.humans)?;
    if support_energy(&pg)? != 0.0 || collision_energy(&pg) != 0.0 || !validate(&pg).is_empty() {
        return Ok(None);
    }
    Ok(Some(pg))
}

/// Renders observations for `pg` and records detection indices on it.
pub fn render_observations<R: Rng + ?Sized>(
    pg: &mut ParseGraph,
    image_size: (f64, f64),
    noise: &NoiseModel,
    rng: &mut R,
) -> Observations {
    let (w, h) = image_size;
    let mut det_boxes = Vec::new();
    for o in pg.objects.iter_mut() {
        o.detection = None;
        let missed = noise.miss_prob > 0.0 && rng.random::<f64>() < noise.miss_prob;
        let Some(mut r) = projected_bounding_rect(&pg.camera, &o.cuboid, w, h) else { continue };
        if missed {
            continue;
        }
        if noise.box_sigma > 0.0 {
            let mut c = [r.min.x, r.min.y, r.max.x, r.max.y].map(|v| v + noise.box_sigma * normal(rng));
            if c[0] > c[2] {
                c.swap(0, 2);
            }
            if c[1] > c[3] {
                c.swap(1, 3);
            }
            r = Rect2D::from_xyxy(c[0], c[1], c[2], c[3]);
        }
        o.detection = Some(det_boxes.len());
        det_boxes.push(DetBox { class_label: o.cuboid.class_label.clone(), bbox: r, confidence: 1.0 });
    }
    let mut det_poses = Vec::new();
    for hn in pg.humans.iter_mut() {
        let mut joints = [Vec2::zeros(); NUM_JOINTS];
        let mut visible = [false; NUM_JOINTS];
        for j in 0..NUM_JOINTS {
            if let Ok(px) = project_point(&pg.camera, &hn.pose.joints[j]) {
                joints[j] = px;
                visible[j] = true;
                if noise.joint_sigma > 0.0 {
                    joints[j] += Vec2::new(normal(rng), normal(rng)) * noise.joint_sigma;
                }
            }
        }
        let hip = hn.pose.joint(Joint::Hip);
        let local = hn.pose.joints.map(|j| j - hip);
        let action_confidence: BTreeMap<Action, f64> = hn.pose.actions.iter().map(|a| (a, 1.0)).collect();
        hn.detection = Some(det_poses.len());
        det_poses.push(DetPose { joints, visible, actions: hn.pose.actions, action_confidence, local_pose: Some(local) });
    }
    Observations { camera: pg.camera.clone(), image_size, det_boxes, det_poses, layout: Some(pg.layout.clone()) }
}

/// Ground-truth scene and its observations. Retries from scratch until a
/// placement with zero support and collision energy is found.
pub fn generate_scene<R: Rng + ?Sized>(
    spec: &SceneSpec,
    priors: &HoiPriorSet,
    rng: &mut R,
) -> Result<(ParseGraph, Observations)> {
    spec.check()?;
    let min_side = spec.room_side.1;
    for class in &spec.inventory {
        let s = spec.classes.get(class).size;
        if s.x.hypot(s.y) * (1.0 - spec.size_jitter) >= min_side || s.z >= spec.room_height.1 {
            return Err(Error::Generation(format!("{class} does not fit in the largest room")));
        }
    }
    for _ in 0..spec.max_retries.max(1) {
        if let Some(mut pg) = try_generate(spec, priors, rng)? {
            let obs = render_observations(&mut pg, spec.camera.image_size, &spec.noise, rng);
            return Ok((pg, obs));
        }
    }
    Err(Error::Generation(format!("no valid placement after {} attempts", spec.max_retries)))
}

/// Zero-mean noise levels for [`perturb`]. Angles in radians, `size` and
/// `human_scale` relative (log-normal).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerturbNoise {
    pub translation: f64,
    /// Extra noise along the camera ray through each object.
    pub depth: f64,
    pub yaw: f64,
    pub size: f64,
    pub human_translation: f64,
    pub human_yaw: f64,
    pub human_scale: f64,
    /// Per-wall and floor offsets of the layout; 0 keeps it fixed.
    pub layout: f64,
}

impl PerturbNoise {
    /// Same translation and heading noise for objects and people.
    pub fn uniform(translation: f64, yaw: f64) -> Self {
        Self { translation, yaw, human_translation: translation, human_yaw: yaw, ..Self::default() }
    }
}

fn gauss3<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> Vec3 {
    Vec3::new(normal(rng), normal(rng), normal(rng)) * sd
}

/// Degraded copy of `pg`; the camera is never touched.
pub fn perturb<R: Rng + ?Sized>(pg: &ParseGraph, noise: &PerturbNoise, rng: &mut R) -> ParseGraph {
    let mut out = pg.clone();
    for o in out.objects.iter_mut() {
        let c = &mut o.cuboid;
        let ray = (c.center - pg.camera.position).try_normalize(1e-12).unwrap_or_else(Vec3::zeros);
        c.center += gauss3(rng, noise.translation) + ray * (noise.depth * normal(rng));
        c.yaw = normalize_angle(c.yaw + noise.yaw * normal(rng));
        c.size = c.size.map(|s| s * (noise.size * normal(rng)).exp());
    }
    for h in out.humans.iter_mut() {
        let p = &mut h.pose;
        p.center += gauss3(rng, noise.human_translation);
        p.yaw = normalize_angle(p.yaw + noise.human_yaw * normal(rng));
        p.scale *= (noise.human_scale * normal(rng)).exp();
        p.rematerialize();
    }
    if noise.layout > 0.0 {
        let l = &mut out.layout;
        let d: [f64; 5] = std::array::from_fn(|_| noise.layout * normal(rng));
        let grow = Vec3::new(d[0] + d[1], d[2] + d[3], d[4]);
        let shift = rotate_z(&Vec3::new(0.5 * (d[0] - d[1]), 0.5 * (d[2] - d[3]), 0.0), l.yaw);
        l.size = (l.size + grow).map(|v| v.max(0.5));
        l.center += shift - Vec3::new(0.0, 0.0, 0.5 * d[4]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_chair_sit() -> SceneSpec {
        SceneSpec { n_objects: (1, 1), actions: vec![Action::Sit], ..SceneSpec::default() }
    }

    #[test]
    fn augmented_human_composition() {
        let t = Template::Reach.joints();
        let ah = AugmentedHuman::new(Action::Hold, t, Vec3::new(1.0, -2.0, 0.9), 0.7, 1.08);
        let pose = ah.pose().unwrap();
        for j in 0..NUM_JOINTS {
            assert!((pose.joints[j] - ah.skeleton[j]).amax() <= 1e-9);
        }
    }

    #[test]
    fn seated_person_lands_on_prior_mode() {
        let priors = HoiPriorSet::defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (pg, _) = generate_scene(&one_chair_sit(), &priors, &mut rng).unwrap();
        let chair = &pg.objects[0].cuboid;
        let p = &pg.humans[0].pose;
        let mean = priors.get(Action::Sit).unwrap().mean;
        let want = chair.center + rotate_z(&mean, p.yaw);
        assert!((p.joint(Joint::Hip) - want).norm() < 0.05, "{} vs {}", p.joint(Joint::Hip), want);
        assert_eq!(p.feet_z(), 0.0);
    }

    #[test]
    fn ground_truth_has_zero_physics_energy() {
        let priors = HoiPriorSet::defaults();
        for seed in 0..6 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (pg, obs) = generate_scene(&SceneSpec::default(), &priors, &mut rng).unwrap();
            assert_eq!(support_energy(&pg).unwrap(), 0.0);
            assert_eq!(collision_energy(&pg), 0.0);
            assert!(validate(&pg).is_empty());
            assert_eq!(obs.det_boxes.len(), pg.objects.len());
            assert!((2..=5).contains(&pg.objects.len()));
        }
    }

    #[test]
    fn noise_free_boxes_are_projected_rects() {
        let priors = HoiPriorSet::defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (pg, obs) = generate_scene(&SceneSpec::default(), &priors, &mut rng).unwrap();
        for o in &pg.objects {
            let r = projected_bounding_rect(&pg.camera, &o.cuboid, 640.0, 480.0).unwrap();
            assert_eq!(obs.det_boxes[o.detection.unwrap()].bbox, r);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let priors = HoiPriorSet::defaults();
        let a = generate_scene(&SceneSpec::default(), &priors, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = generate_scene(&SceneSpec::default(), &priors, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_room_fails() {
        let spec = SceneSpec { room_side: (1.0, 1.2), inventory: vec!["bed".into()], ..SceneSpec::default() };
        let err = generate_scene(&spec, &HoiPriorSet::defaults(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Generation(_)));
    }

    #[test]
    fn hand_held_actions_are_rejected() {
        let spec = SceneSpec { actions: vec![Action::Hold], ..SceneSpec::default() };
        let err = generate_scene(&spec, &HoiPriorSet::defaults(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Generation(_)));
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let priors = HoiPriorSet::defaults();
        let (pg, _) = generate_scene(&SceneSpec::default(), &priors, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let out = perturb(&pg, &PerturbNoise::default(), &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(out, pg);
    }

    #[test]
    fn translation_noise_matches_chi_mean() {
        let pg = {
            let mut pg = ParseGraph::new(
                Cuboid::new(Vec3::new(0.0, 0.0, 1.5), Vec3::new(5.0, 5.0, 3.0), 0.0, "room"),
                Camera::looking(Camera::intrinsics_from(500.0, 320.0, 240.0), Vec3::new(-2.0, 0.0, 1.5), 0.0, 0.3),
            );
            pg.objects.push(ObjectNode {
                id: NodeId(1),
                cuboid: Cuboid::new(Vec3::new(1.0, 0.0, 0.5), Vec3::repeat(1.0), 0.0, "box"),
                detection: None,
                synthesized: false,
            });
            pg
        };
        let noise = PerturbNoise { translation: 0.3, ..PerturbNoise::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 1000;
        let mean: f64 = (0..n)
            .map(|_| (perturb(&pg, &noise, &mut rng).objects[0].cuboid.center - pg.objects[0].cuboid.center).norm())
            .sum::<f64>()
            / n as f64;
        // mean of a 3D isotropic normal's norm
        let expect = 0.3 * (8.0 / PI).sqrt();
        assert!((mean - expect).abs() < 0.2 * expect, "{mean} vs {expect}");
    }
}
