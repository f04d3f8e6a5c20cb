//! Scene energy: support, collision, interaction prior, and the 2D
//! reprojection likelihood.
//!
//! Every term is a sum of factors, each touching one or two nodes. The
//! sampler only ever moves one node, so it asks for the factors touching
//! that node and differences them instead of re-scoring the whole scene.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{
    footprint, hip_footprint, human_hull_volume_proxy, intersection_volume, iou_2d, polygon_overlap_ratio,
    project_cuboid_hull, project_point, volume_outside, ProjectedBox, HUMAN_MARGIN,
};
use crate::hoi_prior::HoiPriorSet;
use crate::scene::{NodeId, NodeRef, Observations, ParseGraph, Supporter, LAYOUT_ID};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWeights {
    pub w_support: f64,
    pub w_collision: f64,
    pub w_hoi: f64,
    pub w_likelihood_obj: f64,
    pub w_likelihood_pose: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        Self { w_support: 1.0, w_collision: 1.0, w_hoi: 1.0, w_likelihood_obj: 1.0, w_likelihood_pose: 1.0 }
    }
}

impl EnergyWeights {
    pub fn check(&self) -> Result<()> {
        let all = [self.w_support, self.w_collision, self.w_hoi, self.w_likelihood_obj, self.w_likelihood_pose];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("energy weights must be finite and nonnegative: {self:?}")))
        }
    }
}

/// Weights plus the fixed constants the terms need.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyConfig {
    pub weights: EnergyWeights,
    /// Lateral inflation of the human collision cuboid.
    pub human_margin: f64,
    /// Half side of the square hip footprint used for human support overlap.
    pub hip_half_side: f64,
    /// Box likelihood when fewer than three corners are in front of the camera.
    pub culled_penalty: f64,
    /// Pose likelihood for a skeleton with no visible joints.
    pub unseen_pose_penalty: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            weights: EnergyWeights::default(),
            human_margin: HUMAN_MARGIN,
            hip_half_side: 0.1,
            culled_penalty: 1.0,
            unseen_pose_penalty: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub e_support: f64,
    pub e_collision: f64,
    pub e_hoi: f64,
    /// Unweighted box term Σ D_o.
    pub e_likelihood_obj: f64,
    /// Unweighted pose term Σ D_h.
    pub e_likelihood_pose: f64,
    /// Weighted likelihood `w_obj·Σ D_o + w_pose·Σ D_h`.
    pub e_likelihood: f64,
    pub total: f64,
    /// Weighted share of each node; two-node factors split evenly.
    pub per_node: BTreeMap<NodeId, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    Support,
    Collision,
    Hoi,
    LikelihoodObj,
    LikelihoodPose,
}

/// One additive piece of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Factor {
    /// Index into `support_edges`.
    Support(usize),
    /// Volume of an object or human outside the room.
    OutOfRoom(NodeRef),
    /// (human index, object index), pair not exempt.
    HumanObject(usize, usize),
    /// Object indices `i < j`, neither a container.
    ObjectObject(usize, usize),
    /// Index into `hoi_edges`.
    Hoi(usize),
    Box(usize),
    Pose(usize),
}

impl Factor {
    pub fn term(&self) -> Term {
        match self {
            Factor::Support(_) => Term::Support,
            Factor::OutOfRoom(_) | Factor::HumanObject(..) | Factor::ObjectObject(..) => Term::Collision,
            Factor::Hoi(_) => Term::Hoi,
            Factor::Box(_) => Term::LikelihoodObj,
            Factor::Pose(_) => Term::LikelihoodPose,
        }
    }
}

/// Unweighted term sums over a set of factors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TermSums {
    pub support: f64,
    pub collision: f64,
    pub hoi: f64,
    pub likelihood_obj: f64,
    pub likelihood_pose: f64,
}

impl TermSums {
    fn add(&mut self, t: Term, v: f64) {
        match t {
            Term::Support => self.support += v,
            Term::Collision => self.collision += v,
            Term::Hoi => self.hoi += v,
            Term::LikelihoodObj => self.likelihood_obj += v,
            Term::LikelihoodPose => self.likelihood_pose += v,
        }
    }

    pub fn sub(&self, o: &TermSums) -> TermSums {
        TermSums {
            support: self.support - o.support,
            collision: self.collision - o.collision,
            hoi: self.hoi - o.hoi,
            likelihood_obj: self.likelihood_obj - o.likelihood_obj,
            likelihood_pose: self.likelihood_pose - o.likelihood_pose,
        }
    }

    pub fn plus(&self, o: &TermSums) -> TermSums {
        TermSums {
            support: self.support + o.support,
            collision: self.collision + o.collision,
            hoi: self.hoi + o.hoi,
            likelihood_obj: self.likelihood_obj + o.likelihood_obj,
            likelihood_pose: self.likelihood_pose + o.likelihood_pose,
        }
    }

    pub fn weighted(&self, w: &EnergyWeights) -> f64 {
        w.w_support * self.support
            + w.w_collision * self.collision
            + w.w_hoi * self.hoi
            + w.w_likelihood_obj * self.likelihood_obj
            + w.w_likelihood_pose * self.likelihood_pose
    }
}

/// Evaluation context: observations, priors, constants, and extra
/// human–object pairs exempt from collision.
#[derive(Debug, Clone)]
pub struct Scorer<'a> {
    pub obs: &'a Observations,
    pub priors: &'a HoiPriorSet,
    pub config: EnergyConfig,
    /// Pairs `(human, object)` treated as interacting for the collision
    /// exemption in addition to `hoi_edges`.
    pub exempt: Vec<(NodeId, NodeId)>,
}

impl<'a> Scorer<'a> {
    pub fn new(obs: &'a Observations, priors: &'a HoiPriorSet, config: EnergyConfig) -> Self {
        Self { obs, priors, config, exempt: Vec::new() }
    }

    pub fn weights(&self) -> &EnergyWeights {
        &self.config.weights
    }

    fn is_exempt(&self, pg: &ParseGraph, human: NodeId, object: NodeId) -> bool {
        pg.has_hoi_pair(human, object) || self.exempt.iter().any(|&(h, o)| h == human && o == object)
    }

    fn object_pair_counts(pg: &ParseGraph, i: usize, j: usize) -> bool {
        !pg.objects[i].cuboid.is_container && !pg.objects[j].cuboid.is_container
    }

    /// Every factor, in the fixed order the totals are summed in.
    pub fn all_factors(&self, pg: &ParseGraph) -> Vec<Factor> {
        let mut f = Vec::new();
        f.extend((0..pg.support_edges.len()).map(Factor::Support));
        f.extend((0..pg.objects.len()).map(|i| Factor::OutOfRoom(NodeRef::Object(i))));
        f.extend((0..pg.humans.len()).map(|h| Factor::OutOfRoom(NodeRef::Human(h))));
        for h in 0..pg.humans.len() {
            for o in 0..pg.objects.len() {
                if !self.is_exempt(pg, pg.humans[h].id, pg.objects[o].id) {
                    f.push(Factor::HumanObject(h, o));
                }
            }
        }
        for i in 0..pg.objects.len() {
            for j in i + 1..pg.objects.len() {
                if Self::object_pair_counts(pg, i, j) {
                    f.push(Factor::ObjectObject(i, j));
                }
            }
        }
        f.extend((0..pg.hoi_edges.len()).map(Factor::Hoi));
        f.extend((0..pg.objects.len()).map(Factor::Box));
        f.extend((0..pg.humans.len()).map(Factor::Pose));
        f
    }

    /// Factors whose value depends on `node`.
    pub fn factors_of(&self, pg: &ParseGraph, node: NodeRef) -> Vec<Factor> {
        let mut f = Vec::new();
        match node {
            NodeRef::Layout => {
                for (k, e) in pg.support_edges.iter().enumerate() {
                    if matches!(e.supporter, Supporter::Floor | Supporter::Wall) {
                        f.push(Factor::Support(k));
                    }
                }
                f.extend((0..pg.objects.len()).map(|i| Factor::OutOfRoom(NodeRef::Object(i))));
                f.extend((0..pg.humans.len()).map(|h| Factor::OutOfRoom(NodeRef::Human(h))));
            }
            NodeRef::Object(i) => {
                let id = pg.objects[i].id;
                for (k, e) in pg.support_edges.iter().enumerate() {
                    if e.supported == id || e.supporter == Supporter::Object(id) {
                        f.push(Factor::Support(k));
                    }
                }
                f.push(Factor::OutOfRoom(node));
                for h in 0..pg.humans.len() {
                    if !self.is_exempt(pg, pg.humans[h].id, id) {
                        f.push(Factor::HumanObject(h, i));
                    }
                }
                for j in 0..pg.objects.len() {
                    if j != i && Self::object_pair_counts(pg, i, j) {
                        f.push(Factor::ObjectObject(i.min(j), i.max(j)));
                    }
                }
                for (k, e) in pg.hoi_edges.iter().enumerate() {
                    if e.object == id {
                        f.push(Factor::Hoi(k));
                    }
                }
                f.push(Factor::Box(i));
            }
            NodeRef::Human(h) => {
                let id = pg.humans[h].id;
                for (k, e) in pg.support_edges.iter().enumerate() {
                    if e.supported == id {
                        f.push(Factor::Support(k));
                    }
                }
                f.push(Factor::OutOfRoom(node));
                for o in 0..pg.objects.len() {
                    if !self.is_exempt(pg, id, pg.objects[o].id) {
                        f.push(Factor::HumanObject(h, o));
                    }
                }
                for (k, e) in pg.hoi_edges.iter().enumerate() {
                    if e.human == id {
                        f.push(Factor::Hoi(k));
                    }
                }
                f.push(Factor::Pose(h));
            }
        }
        f
    }

    /// Node ids a factor is attributed to.
    fn owners(pg: &ParseGraph, f: &Factor) -> (NodeId, Option<NodeId>) {
        match *f {
            Factor::Support(k) => {
                let e = &pg.support_edges[k];
                match e.supporter {
                    Supporter::Object(s) => (e.supported, Some(s)),
                    _ => (e.supported, Some(LAYOUT_ID)),
                }
            }
            Factor::OutOfRoom(r) => (pg.node_id(r), None),
            Factor::HumanObject(h, o) => (pg.humans[h].id, Some(pg.objects[o].id)),
            Factor::ObjectObject(i, j) => (pg.objects[i].id, Some(pg.objects[j].id)),
            Factor::Hoi(k) => (pg.hoi_edges[k].human, Some(pg.hoi_edges[k].object)),
            Factor::Box(i) => (pg.objects[i].id, None),
            Factor::Pose(h) => (pg.humans[h].id, None),
        }
    }

    /// Unweighted value of one factor.
    pub fn eval(&self, pg: &ParseGraph, f: &Factor) -> Result<f64> {
        match *f {
            Factor::Support(k) => self.support_edge_energy(pg, k),
            Factor::OutOfRoom(NodeRef::Object(i)) => Ok(volume_outside(&pg.objects[i].cuboid, &pg.layout)),
            Factor::OutOfRoom(NodeRef::Human(h)) => {
                let proxy = human_hull_volume_proxy(&pg.humans[h].pose, self.config.human_margin);
                Ok(volume_outside(&proxy, &pg.layout))
            }
            Factor::OutOfRoom(NodeRef::Layout) => Ok(0.0),
            Factor::HumanObject(h, o) => {
                let proxy = human_hull_volume_proxy(&pg.humans[h].pose, self.config.human_margin);
                Ok(intersection_volume(&proxy, &pg.objects[o].cuboid))
            }
            Factor::ObjectObject(i, j) => Ok(intersection_volume(&pg.objects[i].cuboid, &pg.objects[j].cuboid)),
            Factor::Hoi(k) => self.hoi_edge_energy(pg, k),
            Factor::Box(i) => Ok(self.box_energy(pg, i)),
            Factor::Pose(h) => Ok(self.pose_energy(pg, h)),
        }
    }

    fn support_edge_energy(&self, pg: &ParseGraph, k: usize) -> Result<f64> {
        let e = &pg.support_edges[k];
        let (bottom, fp) = match pg.resolve(e.supported) {
            Some(NodeRef::Object(i)) => {
                let c = &pg.objects[i].cuboid;
                (c.bottom_z(), footprint(c))
            }
            Some(NodeRef::Human(h)) => {
                let p = &pg.humans[h].pose;
                (p.feet_z(), hip_footprint(p, self.config.hip_half_side))
            }
            _ => {
                return Err(Error::InvalidInput(format!("support edge names missing node {}", e.supported)));
            }
        };
        match e.supporter {
            Supporter::Floor => Ok((bottom - pg.floor_z()).abs()),
            // a wall face has no xy footprint to overlap
            Supporter::Wall => Ok(1.0),
            Supporter::Object(s) => {
                let Some(sup) = pg.object(s) else {
                    return Err(Error::DanglingEdge { supported: e.supported, supporter: s });
                };
                let e_o = 1.0 - polygon_overlap_ratio(&fp, &footprint(&sup.cuboid));
                Ok(e_o + (bottom - sup.cuboid.top_z()).abs())
            }
        }
    }

    fn hoi_edge_energy(&self, pg: &ParseGraph, k: usize) -> Result<f64> {
        let e = &pg.hoi_edges[k];
        let prior = self.priors.get(e.action)?;
        let (Some(h), Some(o)) = (pg.human(e.human), pg.object(e.object)) else {
            return Err(Error::InvalidInput(format!("hoi edge {}→{} names a missing node", e.human, e.object)));
        };
        Ok(prior.energy(&h.pose, &o.cuboid.center))
    }

    /// `1 − IoU(hull, detection)`; 0 for objects without 2D evidence.
    pub fn box_energy(&self, pg: &ParseGraph, i: usize) -> f64 {
        let node = &pg.objects[i];
        if node.synthesized {
            return 0.0;
        }
        let Some(det) = node.detection.and_then(|d| self.obs.det_boxes.get(d)) else {
            return 0.0;
        };
        let (w, h) = self.obs.image_size;
        match project_cuboid_hull(&pg.camera, &node.cuboid, w, h) {
            ProjectedBox::Culled => self.config.culled_penalty,
            ProjectedBox::Hull(poly) => 1.0 - iou_2d(&poly, &det.bbox),
        }
    }

    /// Mean pixel distance over visible joints, divided by the image
    /// diagonal. A visible joint behind the camera counts one diagonal.
    pub fn pose_energy(&self, pg: &ParseGraph, h: usize) -> f64 {
        let node = &pg.humans[h];
        let Some(det) = node.detection.and_then(|d| self.obs.det_poses.get(d)) else {
            return 0.0;
        };
        let diag = self.obs.image_diagonal();
        let (mut sum, mut n) = (0.0, 0usize);
        for j in 0..det.joints.len() {
            if !det.visible[j] {
                continue;
            }
            n += 1;
            sum += match project_point(&pg.camera, &node.pose.joints[j]) {
                Ok(px) => (px - det.joints[j]).norm() / diag,
                Err(_) => 1.0,
            };
        }
        if n == 0 {
            self.config.unseen_pose_penalty
        } else {
            sum / n as f64
        }
    }

    pub fn sums(&self, pg: &ParseGraph, factors: &[Factor]) -> Result<TermSums> {
        let mut s = TermSums::default();
        for f in factors {
            s.add(f.term(), self.eval(pg, f)?);
        }
        Ok(s)
    }

    /// Unweighted sums over the factors touching `node`.
    pub fn local(&self, pg: &ParseGraph, node: NodeRef) -> Result<TermSums> {
        self.sums(pg, &self.factors_of(pg, node))
    }

    /// Change in term sums when `node` goes from its state in `current`
    /// to its state in `candidate`, all else equal.
    pub fn delta(&self, current: &ParseGraph, candidate: &ParseGraph, node: NodeRef) -> Result<TermSums> {
        Ok(self.local(candidate, node)?.sub(&self.local(current, node)?))
    }

    pub fn term_sums(&self, pg: &ParseGraph) -> Result<TermSums> {
        self.sums(pg, &self.all_factors(pg))
    }

    pub fn breakdown(&self, pg: &ParseGraph) -> Result<EnergyBreakdown> {
        let w = self.weights();
        let mut s = TermSums::default();
        let mut per_node: BTreeMap<NodeId, f64> = BTreeMap::new();
        for f in self.all_factors(pg) {
            let v = self.eval(pg, &f)?;
            let t = f.term();
            s.add(t, v);
            let wv = match t {
                Term::Support => w.w_support,
                Term::Collision => w.w_collision,
                Term::Hoi => w.w_hoi,
                Term::LikelihoodObj => w.w_likelihood_obj,
                Term::LikelihoodPose => w.w_likelihood_pose,
            } * v;
            match Self::owners(pg, &f) {
                (a, Some(b)) => {
                    *per_node.entry(a).or_default() += 0.5 * wv;
                    *per_node.entry(b).or_default() += 0.5 * wv;
                }
                (a, None) => *per_node.entry(a).or_default() += wv,
            }
        }
        Ok(breakdown_from(&s, w, per_node))
    }
}

fn breakdown_from(s: &TermSums, w: &EnergyWeights, per_node: BTreeMap<NodeId, f64>) -> EnergyBreakdown {
    let e_likelihood = w.w_likelihood_obj * s.likelihood_obj + w.w_likelihood_pose * s.likelihood_pose;
    EnergyBreakdown {
        e_support: s.support,
        e_collision: s.collision,
        e_hoi: s.hoi,
        e_likelihood_obj: s.likelihood_obj,
        e_likelihood_pose: s.likelihood_pose,
        e_likelihood,
        total: w.w_support * s.support + w.w_collision * s.collision + w.w_hoi * s.hoi + e_likelihood,
        per_node,
    }
}

impl EnergyBreakdown {
    /// Breakdown without per-node attribution, from raw term sums.
    pub fn from_sums(s: &TermSums, w: &EnergyWeights) -> Self {
        breakdown_from(s, w, BTreeMap::new())
    }
}

/// Σ over support edges of `E_o + E_height`.
pub fn support_energy(pg: &ParseGraph) -> Result<f64> {
    let scorer_obs = empty_obs(pg);
    let priors = HoiPriorSet::new([]).expect("empty prior set");
    let scorer = Scorer::new(&scorer_obs, &priors, EnergyConfig::default());
    let f: Vec<Factor> = (0..pg.support_edges.len()).map(Factor::Support).collect();
    Ok(scorer.sums(pg, &f)?.support)
}

/// Out-of-room volume plus non-exempt human–object and non-container
/// object–object intersection volumes.
pub fn collision_energy(pg: &ParseGraph) -> f64 {
    let scorer_obs = empty_obs(pg);
    let priors = HoiPriorSet::new([]).expect("empty prior set");
    let scorer = Scorer::new(&scorer_obs, &priors, EnergyConfig::default());
    let f: Vec<Factor> = scorer.all_factors(pg).into_iter().filter(|f| f.term() == Term::Collision).collect();
    scorer.sums(pg, &f).map(|s| s.collision).unwrap_or(0.0)
}

/// Σ over `hoi_edges` of the prior nll of each edge's offset.
pub fn hoi_energy(pg: &ParseGraph, priors: &HoiPriorSet) -> Result<f64> {
    let scorer_obs = empty_obs(pg);
    let scorer = Scorer::new(&scorer_obs, priors, EnergyConfig::default());
    let f: Vec<Factor> = (0..pg.hoi_edges.len()).map(Factor::Hoi).collect();
    Ok(scorer.sums(pg, &f)?.hoi)
}

/// Weighted `Σ D_o + Σ D_h` with default constants.
pub fn likelihood_energy(pg: &ParseGraph, obs: &Observations, weights: &EnergyWeights) -> f64 {
    let priors = HoiPriorSet::new([]).expect("empty prior set");
    let scorer = Scorer::new(obs, &priors, EnergyConfig::default());
    (0..pg.objects.len()).map(|i| weights.w_likelihood_obj * scorer.box_energy(pg, i)).sum::<f64>()
        + (0..pg.humans.len()).map(|h| weights.w_likelihood_pose * scorer.pose_energy(pg, h)).sum::<f64>()
}

pub fn total_energy(
    pg: &ParseGraph,
    obs: &Observations,
    priors: &HoiPriorSet,
    weights: &EnergyWeights,
) -> Result<EnergyBreakdown> {
    weights.check()?;
    let config = EnergyConfig { weights: *weights, ..EnergyConfig::default() };
    Scorer::new(obs, priors, config).breakdown(pg)
}

fn empty_obs(pg: &ParseGraph) -> Observations {
    Observations {
        camera: pg.camera.clone(),
        image_size: (1.0, 1.0),
        det_boxes: Vec::new(),
        det_poses: Vec::new(),
        layout: None,
    }
}
