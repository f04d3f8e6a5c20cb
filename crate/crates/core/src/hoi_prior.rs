//! Per-action Gaussian priors on where an object sits relative to a key
//! joint of the person using it.
//!
//! Offsets are measured as `Rot(-yaw)·(key_joint − object_center)`, i.e.
//! in the person's own frame, so a prior learned for one heading applies
//! to every heading.

use std::collections::BTreeMap;

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scene::{rotate_z, Action, HoiEdge, HumanPose, Joint, Mat3, Observations, ParseGraph, Vec3};

/// Ridge added to fitted covariances (m²).
pub const RIDGE: f64 = 1e-4;

/// Default action-confidence threshold for matching and top-down sampling.
pub const CONF_THRESHOLD: f64 = 0.5;

pub const PRIOR_SCHEMA: &str = "hoi-prior/v1";

/// Point on the skeleton an interaction is anchored to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyJoint {
    Joint(Joint),
    /// Midpoint of the two wrists.
    WristMidpoint,
}

impl KeyJoint {
    pub fn name(self) -> &'static str {
        match self {
            KeyJoint::Joint(j) => j.name(),
            KeyJoint::WristMidpoint => "wrist_midpoint",
        }
    }

    pub fn from_name(s: &str) -> Option<KeyJoint> {
        if s == "wrist_midpoint" {
            return Some(KeyJoint::WristMidpoint);
        }
        Joint::from_name(s).map(KeyJoint::Joint)
    }

    pub fn locate(self, pose: &HumanPose) -> Vec3 {
        match self {
            KeyJoint::Joint(j) => pose.joint(j),
            KeyJoint::WristMidpoint => 0.5 * (pose.joint(Joint::LeftWrist) + pose.joint(Joint::RightWrist)),
        }
    }

    /// Default anchor for each HOI action.
    pub fn for_action(a: Action) -> KeyJoint {
        match a {
            Action::Sit | Action::SitAt => KeyJoint::Joint(Joint::Hip),
            Action::UseLaptop => KeyJoint::WristMidpoint,
            _ => KeyJoint::Joint(Joint::RightWrist),
        }
    }
}

/// Admissible object classes per HOI action; the first entry is the class
/// top-down sampling creates.
pub fn default_classes(a: Action) -> &'static [&'static str] {
    match a {
        Action::Sit => &["chair", "sofa", "bed", "stool"],
        Action::SitAt => &["table", "desk"],
        Action::UseLaptop => &["laptop"],
        Action::Hold => &["bottle", "cup"],
        Action::Read => &["notebook", "book", "tablet", "phone"],
        Action::MakePhoneCall => &["phone"],
        _ => &[],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoiPrior {
    pub action: Action,
    pub object_classes: Vec<String>,
    pub key_joint: KeyJoint,
    pub mean: Vec3,
    pub covariance: Mat3,
    precision: Mat3,
    log_norm: f64,
}

impl HoiPrior {
    pub fn new(
        action: Action,
        object_classes: Vec<String>,
        key_joint: KeyJoint,
        mean: Vec3,
        covariance: Mat3,
    ) -> Result<Self> {
        if !action.is_hoi() {
            return Err(Error::InvalidParameter(format!("`{action}` is not an interaction action")));
        }
        if object_classes.is_empty() {
            return Err(Error::InvalidParameter(format!("prior for `{action}` lists no object classes")));
        }
        if !mean.iter().chain(covariance.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!("prior for `{action}` has non-finite entries")));
        }
        if (covariance - covariance.transpose()).amax() > 1e-9 {
            return Err(Error::InvalidParameter(format!("covariance for `{action}` is not symmetric")));
        }
        let sym = 0.5 * (covariance + covariance.transpose());
        let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
        if min_eig < RIDGE * (1.0 - 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "covariance for `{action}` has eigenvalue {min_eig:.3e} below the ridge {RIDGE:.0e}"
            )));
        }
        let precision = sym
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter(format!("covariance for `{action}` is singular")))?;
        let log_norm = 1.5 * (2.0 * std::f64::consts::PI).ln() + 0.5 * sym.determinant().ln();
        Ok(Self { action, object_classes, key_joint, mean, covariance: sym, precision, log_norm })
    }

    /// Negative log density of `offset` under N₃(mean, covariance).
    pub fn nll(&self, offset: &Vec3) -> f64 {
        let d = offset - self.mean;
        self.log_norm + 0.5 * d.dot(&(self.precision * d))
    }

    /// Key-joint offset from `object_center`, in the person's frame.
    pub fn offset(&self, pose: &HumanPose, object_center: &Vec3) -> Vec3 {
        rotate_z(&(self.key_joint.locate(pose) - object_center), -pose.yaw)
    }

    pub fn energy(&self, pose: &HumanPose, object_center: &Vec3) -> f64 {
        self.nll(&self.offset(pose, object_center))
    }

    pub fn admits(&self, class: &str) -> bool {
        self.object_classes.iter().any(|c| c == class)
    }

    pub fn default_class(&self) -> &str {
        &self.object_classes[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoiPriorSet {
    pub priors: BTreeMap<Action, HoiPrior>,
    pub version: String,
}

impl HoiPriorSet {
    pub fn new(priors: impl IntoIterator<Item = HoiPrior>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for p in priors {
            if map.insert(p.action, p.clone()).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate prior for `{}`", p.action)));
            }
        }
        Ok(Self { priors: map, version: PRIOR_SCHEMA.to_string() })
    }

    pub fn get(&self, a: Action) -> Result<&HoiPrior> {
        self.priors.get(&a).ok_or_else(|| Error::MissingPrior(a.name().to_string()))
    }

    /// Built-in priors, hand-set to match the bundled pose templates.
    pub fn defaults() -> Self {
        let spec: [(Action, Vec3, Vec3); 6] = [
            (Action::Sit, Vec3::new(0.05, 0.0, 0.0), Vec3::new(0.06, 0.06, 0.05)),
            (Action::SitAt, Vec3::new(-0.55, 0.0, 0.075), Vec3::new(0.12, 0.15, 0.05)),
            (Action::UseLaptop, Vec3::new(-0.10, 0.0, -0.10), Vec3::new(0.05, 0.05, 0.05)),
            (Action::Hold, Vec3::new(0.0, 0.0, 0.06), Vec3::new(0.03, 0.03, 0.04)),
            (Action::Read, Vec3::new(0.0, 0.0, 0.05), Vec3::new(0.05, 0.05, 0.05)),
            (Action::MakePhoneCall, Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.03, 0.03, 0.03)),
        ];
        let priors = spec.into_iter().map(|(a, mean, sd)| {
            let classes = default_classes(a).iter().map(|s| s.to_string()).collect();
            let cov = Mat3::from_diagonal(&sd.component_mul(&sd));
            HoiPrior::new(a, classes, KeyJoint::for_action(a), mean, cov).expect("default prior is valid")
        });
        Self::new(priors).expect("default actions are unique")
    }
}

/// Maximum-likelihood Gaussian fit with an `RIDGE·I` floor on the
/// covariance. Sums run over samples in sorted order so the result does
/// not depend on input order.
pub fn fit_prior(
    action: Action,
    object_classes: Vec<String>,
    key_joint: KeyJoint,
    samples: &[Vec3],
) -> Result<HoiPrior> {
    if samples.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "`{action}` has {} samples, need at least 4",
            samples.len()
        )));
    }
    if let Some(i) = samples.iter().position(|s| !s.iter().all(|v| v.is_finite())) {
        return Err(Error::InvalidInput(format!("`{action}` sample {i} is not finite")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| {
        a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
    });
    let n = sorted.len() as f64;
    let mean = sorted.iter().fold(Vec3::zeros(), |acc, s| acc + s) / n;
    let mut cov = Mat3::zeros();
    for s in &sorted {
        let d = s - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    cov += Mat3::identity() * RIDGE;
    HoiPrior::new(action, object_classes, key_joint, mean, cov)
}

/// Confidence of action `a` for human `h`: the detector score when the
/// human carries a detection, otherwise 1 for actions in its label.
pub fn action_confidence(pg: &ParseGraph, obs: &Observations, h: usize, a: Action) -> f64 {
    let node = &pg.humans[h];
    if !node.pose.actions.contains(a) {
        return 0.0;
    }
    match node.detection.and_then(|d| obs.det_poses.get(d)) {
        Some(det) => det.confidence(a),
        None => 1.0,
    }
}

/// HOI actions of human `h` at or above `threshold`, in vocabulary order.
pub fn confident_actions(pg: &ParseGraph, obs: &Observations, h: usize, threshold: f64) -> Vec<Action> {
    Action::HOI
        .iter()
        .copied()
        .filter(|a| action_confidence(pg, obs, h, *a) >= threshold)
        .collect()
}

/// For every confident HOI action, links the admissible object with the
/// lowest nll. Ties fall to geometry (center, then size), never to ids.
pub fn match_interactions(
    pg: &ParseGraph,
    obs: &Observations,
    priors: &HoiPriorSet,
    conf_threshold: f64,
) -> Result<Vec<HoiEdge>> {
    let mut edges = Vec::new();
    for (hi, human) in pg.humans.iter().enumerate() {
        for a in confident_actions(pg, obs, hi, conf_threshold) {
            let prior = priors.get(a)?;
            let best = pg
                .objects
                .iter()
                .filter(|o| prior.admits(&o.cuboid.class_label))
                .map(|o| (prior.energy(&human.pose, &o.cuboid.center), o))
                .min_by(|(ea, a), (eb, b)| {
                    ea.total_cmp(eb)
                        .then_with(|| lex(&a.cuboid.center, &b.cuboid.center))
                        .then_with(|| lex(&a.cuboid.size, &b.cuboid.size))
                });
            if let Some((_, o)) = best {
                edges.push(HoiEdge { human: human.id, object: o.id, action: a });
            }
        }
    }
    Ok(edges)
}

fn lex(a: &Vec3, b: &Vec3) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
}

/// Object center at the prior mode: `key_joint − Rot(yaw)·mean`. With
/// `jitter = Some(σ)` an isotropic N(0, σ²) perturbation is added.
pub fn sample_object_given_pose<R: Rng + ?Sized>(
    prior: &HoiPrior,
    pose: &HumanPose,
    jitter: Option<f64>,
    rng: &mut R,
) -> Vec3 {
    let mut c = prior.key_joint.locate(pose) - rotate_z(&prior.mean, pose.yaw);
    if let Some(sd) = jitter {
        let n = Vec3::from_fn(|_, _| StandardNormal.sample(rng));
        c += n * sd;
    }
    c
}
