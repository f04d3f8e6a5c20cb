use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geometry::{iou_2d, iou_3d, project_point, projected_bounding_rect};
use crate::scene::{NodeId, Observations, ParseGraph, Supporter};

/// Evaluation report. IoUs and rates are percentages; `None` marks a
/// quantity with nothing to average over.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Mean over ground-truth objects; unmatched ones count 0.
    pub iou_3d: f64,
    pub iou_2d: f64,
    /// Mean over matched pairs of the camera-distance error, meters.
    pub depth_error: Option<f64>,
    /// Mean per-joint distance, meters.
    pub pose_error_3d: Option<f64>,
    /// Mean per-joint distance of the projections, pixels.
    pub pose_error_2d: Option<f64>,
    /// Mean gap between each estimated object's bottom and its supporter's top.
    pub physical_violation: f64,
    /// Share of undetected interacting objects recovered by a synthesized one.
    pub recovery_rate: Option<f64>,
    /// Mean 3D IoU over ground-truth objects that take part in an interaction.
    pub interacting_iou_3d: Option<f64>,
    pub matched: usize,
    pub gt_objects: usize,
}

/// Greedy class-aware matching by 3D IoU. Returns `(est, gt)` index
/// pairs; among equal IoUs the lower ground-truth then estimate index wins.
pub fn match_objects(est: &ParseGraph, gt: &ParseGraph) -> Vec<(usize, usize)> {
    let mut cand = Vec::new();
    for (i, e) in est.objects.iter().enumerate() {
        for (j, g) in gt.objects.iter().enumerate() {
            if e.cuboid.class_label == g.cuboid.class_label {
                let v = iou_3d(&e.cuboid, &g.cuboid);
                if v > 0.0 {
                    cand.push((v, i, j));
                }
            }
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
    let (mut used_e, mut used_g) = (BTreeSet::new(), BTreeSet::new());
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if !used_e.contains(&i) && !used_g.contains(&j) {
            used_e.insert(i);
            used_g.insert(j);
            out.push((i, j));
        }
    }
    out
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Greedy one-to-one pairing of people by mean joint distance.
fn match_humans(est: &ParseGraph, gt: &ParseGraph) -> Vec<(usize, usize)> {
    let mut cand = Vec::new();
    for (i, e) in est.humans.iter().enumerate() {
        for (j, g) in gt.humans.iter().enumerate() {
            let d = e.pose.joints.iter().zip(&g.pose.joints).map(|(a, b)| (a - b).norm()).sum::<f64>();
            cand.push((d, i, j));
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
    let (mut used_e, mut used_g) = (BTreeSet::new(), BTreeSet::new());
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if !used_e.contains(&i) && !used_g.contains(&j) {
            used_e.insert(i);
            used_g.insert(j);
            out.push((i, j));
        }
    }
    out
}

/// Mean `|bottom − supporter top|` over `pg`'s objects supported by the
/// floor or another object.
pub fn physical_violation(pg: &ParseGraph) -> f64 {
    let mut gaps = Vec::new();
    for o in &pg.objects {
        let Some(e) = pg.support_of(o.id) else { continue };
        let top = match e.supporter {
            Supporter::Floor => pg.floor_z(),
            Supporter::Object(s) => match pg.object(s) {
                Some(sup) => sup.cuboid.top_z(),
                None => continue,
            },
            Supporter::Wall => continue,
        };
        gaps.push((o.cuboid.bottom_z() - top).abs());
    }
    mean(&gaps).unwrap_or(0.0)
}

/// Scores `est` against `gt`, projecting through the observation camera.
pub fn evaluate(est: &ParseGraph, gt: &ParseGraph, obs: &Observations) -> Result<Metrics> {
    if gt.objects.is_empty() {
        return Err(Error::UndefinedMetrics("ground truth has no objects".into()));
    }
    let (w, h) = obs.image_size;
    let cam = &obs.camera;
    let pairs = match_objects(est, gt);
    let n = gt.objects.len() as f64;

    let mut iou3 = vec![0.0; gt.objects.len()];
    let mut sum2 = 0.0;
    let mut depth = Vec::new();
    for &(i, j) in &pairs {
        let (e, g) = (&est.objects[i].cuboid, &gt.objects[j].cuboid);
        iou3[j] = iou_3d(e, g);
        if let (Some(re), Some(rg)) =
            (projected_bounding_rect(cam, e, w, h), projected_bounding_rect(cam, g, w, h))
        {
            sum2 += iou_2d(&re.clamped(w, h), &rg.clamped(w, h));
        }
        depth.push(((e.center - cam.position).norm() - (g.center - cam.position).norm()).abs());
    }

    let interacting: BTreeSet<NodeId> = gt.hoi_edges.iter().map(|e| e.object).collect();
    let inter_iou: Vec<f64> =
        gt.objects.iter().enumerate().filter(|(_, o)| interacting.contains(&o.id)).map(|(j, _)| iou3[j]).collect();

    let mut recovered = Vec::new();
    for (j, g) in gt.objects.iter().enumerate() {
        if !interacting.contains(&g.id) || g.detection.is_some() {
            continue;
        }
        let hit = pairs.iter().any(|&(i, jj)| jj == j && est.objects[i].synthesized && iou3[j] > 0.1);
        recovered.push(if hit { 1.0 } else { 0.0 });
    }

    let (mut p3, mut p2) = (Vec::new(), Vec::new());
    for (i, j) in match_humans(est, gt) {
        let (e, g) = (&est.humans[i].pose, &gt.humans[j].pose);
        let d3: Vec<f64> = e.joints.iter().zip(&g.joints).map(|(a, b)| (a - b).norm()).collect();
        p3.push(mean(&d3).unwrap_or(0.0));
        let d2: Vec<f64> = e
            .joints
            .iter()
            .zip(&g.joints)
            .filter_map(|(a, b)| Some((project_point(cam, a).ok()? - project_point(cam, b).ok()?).norm()))
            .collect();
        if let Some(m) = mean(&d2) {
            p2.push(m);
        }
    }

    Ok(Metrics {
        iou_3d: 100.0 * iou3.iter().sum::<f64>() / n,
        iou_2d: 100.0 * sum2 / n,
        depth_error: mean(&depth),
        pose_error_3d: mean(&p3),
        pose_error_2d: mean(&p2),
        physical_violation: physical_violation(est),
        recovery_rate: mean(&recovered).map(|r| 100.0 * r),
        interacting_iou_3d: mean(&inter_iou).map(|r| 100.0 * r),
        matched: pairs.len(),
        gt_objects: gt.objects.len(),
    })
}
