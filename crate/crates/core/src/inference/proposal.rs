//! Markov chain dynamics and the Metropolis–Hastings test.

use std::fmt;

use rand::Rng;

use crate::energy::{Scorer, TermSums};
use crate::error::{Error, Result};
use crate::scene::{normalize_angle, rotate_z, NodeId, NodeRef, ParseGraph, Vec3};

/// Smallest extent a scaled cuboid or layout may shrink to.
pub const MIN_EXTENT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dynamic {
    /// Object translation along x, y, z or the camera ray.
    Q1o,
    /// Object yaw rotation.
    Q2o,
    /// Object scaling about its center.
    Q3o,
    /// Human translation along x, y, z or the camera ray.
    Q1h,
    /// Human yaw rotation about the hip.
    Q2h,
    /// Human scaling about the hip.
    Q3h,
    /// One wall moved toward or away from the room center.
    Q1l,
    /// Floor height.
    Q2l,
}

impl Dynamic {
    pub const OBJECT: [Dynamic; 3] = [Dynamic::Q1o, Dynamic::Q2o, Dynamic::Q3o];
    pub const HUMAN: [Dynamic; 3] = [Dynamic::Q1h, Dynamic::Q2h, Dynamic::Q3h];
    pub const LAYOUT: [Dynamic; 2] = [Dynamic::Q1l, Dynamic::Q2l];

    pub fn name(self) -> &'static str {
        match self {
            Dynamic::Q1o => "q1o",
            Dynamic::Q2o => "q2o",
            Dynamic::Q3o => "q3o",
            Dynamic::Q1h => "q1h",
            Dynamic::Q2h => "q2h",
            Dynamic::Q3h => "q3h",
            Dynamic::Q1l => "q1l",
            Dynamic::Q2l => "q2l",
        }
    }

    /// Number of axis choices: x, y, z, depth for translations, four
    /// walls for `q1l`.
    pub fn axes(self) -> u8 {
        match self {
            Dynamic::Q1o | Dynamic::Q1h | Dynamic::Q1l => 4,
            _ => 1,
        }
    }
}

impl fmt::Display for Dynamic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub target: NodeId,
    pub dynamic: Dynamic,
    pub axis: u8,
    /// +1 or −1.
    pub direction: i8,
    /// Meters, radians, or a scale factor > 1 depending on the dynamic.
    pub magnitude: f64,
}

impl Proposal {
    pub fn inverse(&self) -> Proposal {
        Proposal { direction: -self.direction, ..*self }
    }

    fn applicable(&self, node: NodeRef) -> bool {
        match node {
            NodeRef::Layout => Dynamic::LAYOUT.contains(&self.dynamic),
            NodeRef::Object(_) => Dynamic::OBJECT.contains(&self.dynamic),
            NodeRef::Human(_) => Dynamic::HUMAN.contains(&self.dynamic),
        }
    }
}

/// Applies a proposal to a copy of `pg`. `None` when the target is
/// missing, the dynamic does not fit the node kind, or the move would
/// collapse an extent.
pub fn apply(pg: &ParseGraph, p: &Proposal) -> Option<ParseGraph> {
    let node = pg.resolve(p.target)?;
    if !p.applicable(node) {
        return None;
    }
    let mut out = pg.clone();
    let d = p.direction as f64;
    let step = d * p.magnitude;
    match node {
        NodeRef::Object(i) => {
            let c = &mut out.objects[i].cuboid;
            match p.dynamic {
                Dynamic::Q1o => c.center += axis_vector(p.axis, &c.center, &pg.camera.position)? * step,
                Dynamic::Q2o => c.yaw = normalize_angle(c.yaw + step),
                Dynamic::Q3o => {
                    c.size *= p.magnitude.powf(d);
                    if c.size.min() < MIN_EXTENT {
                        return None;
                    }
                }
                _ => unreachable!(),
            }
        }
        NodeRef::Human(h) => {
            let pose = &mut out.humans[h].pose;
            match p.dynamic {
                Dynamic::Q1h => {
                    let t = axis_vector(p.axis, &pose.center, &pg.camera.position)? * step;
                    *pose = pose.translated(&t);
                }
                Dynamic::Q2h => {
                    pose.yaw = normalize_angle(pose.yaw + step);
                    pose.rematerialize();
                }
                Dynamic::Q3h => {
                    pose.scale *= p.magnitude.powf(d);
                    pose.rematerialize();
                }
                _ => unreachable!(),
            }
        }
        NodeRef::Layout => {
            let l = &mut out.layout;
            match p.dynamic {
                Dynamic::Q1l => {
                    // walls +x, −x, +y, −y in the layout's own frame
                    let (k, sign) = match p.axis {
                        0 => (0, 1.0),
                        1 => (0, -1.0),
                        2 => (1, 1.0),
                        _ => (1, -1.0),
                    };
                    l.size[k] += step;
                    let mut shift = Vec3::zeros();
                    shift[k] = 0.5 * sign * step;
                    l.center += rotate_z(&shift, l.yaw);
                }
                Dynamic::Q2l => {
                    // positive lowers the floor, top face fixed
                    l.size.z += step;
                    l.center.z -= 0.5 * step;
                }
                _ => unreachable!(),
            }
            if l.size.min() < MIN_EXTENT {
                return None;
            }
        }
    }
    Some(out)
}

fn axis_vector(axis: u8, center: &Vec3, camera: &Vec3) -> Option<Vec3> {
    Some(match axis {
        0 => Vec3::x(),
        1 => Vec3::y(),
        2 => Vec3::z(),
        _ => {
            let r = center - camera;
            let n = r.norm();
            if n < 1e-9 {
                return None;
            }
            r / n
        }
    })
}

/// `log q(pg′→pg) − log q(pg→pg′)` for a directional move.
pub fn log_q_ratio(descent: Option<bool>, p_desc: f64) -> f64 {
    if p_desc >= 1.0 {
        return 0.0;
    }
    match descent {
        Some(true) => ((1.0 - p_desc) / p_desc).ln(),
        Some(false) => (p_desc / (1.0 - p_desc)).ln(),
        None => 0.0,
    }
}

/// Accepts with probability `min(1, exp((e_old − e_new)/T + log_q))`.
pub fn mh_accept<R: Rng + ?Sized>(e_old: f64, e_new: f64, log_q: f64, t: f64, rng: &mut R) -> Result<bool> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidTemperature(t));
    }
    let a = (e_old - e_new) / t + log_q;
    if a >= 0.0 {
        return Ok(true);
    }
    Ok(rng.random::<f64>() < a.exp())
}

/// A proposal ready for the acceptance test.
#[derive(Debug, Clone)]
pub struct Move {
    pub proposal: Proposal,
    pub node: NodeRef,
    pub candidate: ParseGraph,
    pub delta: TermSums,
    pub log_q: f64,
    /// `Some(true)` when the chosen direction was the lower-energy one.
    pub descent: Option<bool>,
}

/// Step sizes per dynamic family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub translation: f64,
    pub rotation: f64,
    pub scale: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self { translation: 0.05, rotation: 0.1, scale: 1.05 }
    }
}

/// Number of finer resolutions below each base step.
pub const STEP_LEVELS: u32 = 5;

/// Base step refined by a factor `2^-k`, `k` uniform over the levels; the
/// reverse move shares the magnitude so the choice cancels in the ratio.
fn magnitude<R: Rng + ?Sized>(d: Dynamic, s: &StepSizes, rng: &mut R) -> f64 {
    let f = 0.5f64.powi(rng.random_range(0..STEP_LEVELS) as i32);
    match d {
        Dynamic::Q2o | Dynamic::Q2h => s.rotation * f,
        Dynamic::Q3o | Dynamic::Q3h => s.scale.powf(f),
        _ => s.translation * f,
    }
}

/// Draws a node kind, node, dynamic and axis uniformly, then picks the
/// lower-energy direction with probability `p_desc`. `None` if both
/// directions are invalid.
pub fn propose<R: Rng + ?Sized>(
    pg: &ParseGraph,
    scorer: &Scorer,
    steps: &StepSizes,
    p_desc: f64,
    movable_layout: bool,
    rng: &mut R,
) -> Result<Option<Move>> {
    let mut kinds: Vec<u8> = Vec::with_capacity(3);
    if movable_layout {
        kinds.push(0);
    }
    if !pg.objects.is_empty() {
        kinds.push(1);
    }
    if !pg.humans.is_empty() {
        kinds.push(2);
    }
    if kinds.is_empty() {
        return Ok(None);
    }
    let (node, dynamics): (NodeRef, &[Dynamic]) = match kinds[rng.random_range(0..kinds.len())] {
        0 => (NodeRef::Layout, &Dynamic::LAYOUT),
        1 => (NodeRef::Object(rng.random_range(0..pg.objects.len())), &Dynamic::OBJECT),
        _ => (NodeRef::Human(rng.random_range(0..pg.humans.len())), &Dynamic::HUMAN),
    };
    let dynamic = dynamics[rng.random_range(0..dynamics.len())];
    let axis = rng.random_range(0..dynamic.axes());
    let base = Proposal { target: pg.node_id(node), dynamic, axis, direction: 1, magnitude: magnitude(dynamic, steps, rng) };

    let current = scorer.local(pg, node)?;
    let w = scorer.weights();
    let mut sides = Vec::with_capacity(2);
    for dir in [1i8, -1] {
        let p = Proposal { direction: dir, ..base };
        match apply(pg, &p) {
            Some(c) => {
                let delta = scorer.local(&c, node)?.sub(&current);
                sides.push(Some((p, c, delta.weighted(w), delta)));
            }
            None => sides.push(None),
        }
    }
    let (plus, minus) = (sides.remove(0), sides.remove(0));
    let (chosen, descent) = match (plus, minus) {
        (None, None) => return Ok(None),
        (Some(a), None) | (None, Some(a)) => {
            // the only legal direction; its reverse is the only legal one back
            (a, None)
        }
        (Some(a), Some(b)) => {
            if a.2 == b.2 {
                if rng.random::<bool>() {
                    (a, None)
                } else {
                    (b, None)
                }
            } else {
                let (lo, hi) = if a.2 < b.2 { (a, b) } else { (b, a) };
                if rng.random::<f64>() < p_desc {
                    (lo, Some(true))
                } else {
                    (hi, Some(false))
                }
            }
        }
    };
    let (proposal, candidate, _, delta) = chosen;
    Ok(Some(Move { proposal, node, candidate, delta, log_q: log_q_ratio(descent, p_desc), descent }))
}
