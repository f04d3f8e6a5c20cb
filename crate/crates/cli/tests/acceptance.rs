//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 1, 2, 7, 8 and 9 are exact or statistical properties and fail
//! the run when they miss. Criteria 3 to 6 are measured on the synthetic
//! suite and reported; set `SCENEMC_ACCEPTANCE_STRICT=1` to make those
//! fail the run too.

use std::f64::consts::PI;
use std::fs;
use std::process::{Command, ExitCode, Stdio};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use scenemc_core::geometry::{intersection_volume, polygon_intersection_area, Polygon2D};
use scenemc_core::harness::{evaluate, generate_scene, perturb, Metrics, PerturbNoise, SceneSpec};
use scenemc_core::hoi_prior::{fit_prior, HoiPriorSet, KeyJoint};
use scenemc_core::inference::{
    lift_pose_to_world, mh_accept, run_inference, support_for_object, RunConfigCore, Schedule, SupportPriorTable,
};
use scenemc_core::scene::{
    pose_from_params, Action, ActionSet, Camera, Cuboid, Joint, Mat3, Observations, ParseGraph, Supporter, Vec2, Vec3,
};
use scenemc_core::schema;
use scenemc_core::templates::Template;

// Pinned thresholds.
const VOXELS_PER_AXIS: usize = 100;
const CUBOID_PAIRS: usize = 200;
const POLYGON_PAIRS: usize = 1000;
const MC_SAMPLES: usize = 100_000;
const ORACLE_TOL: f64 = 1e-2;
const GEOMETRY_SECONDS: f64 = 60.0;
const MH_STEPS: usize = 1_000_000;
const MH_TV: f64 = 0.02;
const MH_SECONDS: f64 = 10.0;
const SUITE: u64 = 20;
const INIT_SIGMA_M: f64 = 0.3;
const INIT_SIGMA_YAW_DEG: f64 = 15.0;
const MIN_IOU: f64 = 50.0;
const MIN_IOU_GAIN: f64 = 15.0;
const MAX_POSE_ERR: f64 = 0.15;
const SCENE_SECONDS: f64 = 60.0;
const MIN_HOI_WINS: usize = 15;
const MIN_RECOVERY: f64 = 0.8;
const RECOVERY_RADIUS: f64 = 0.3;
const FIT_DRAWS: usize = 10_000;
const FIT_COV_REL: f64 = 0.1;
const LIFT_CASES: usize = 1000;
const LIFT_TOL: f64 = 1e-6;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

// ------------------------------------------------------------ criterion 1

fn in_cuboid(c: &Cuboid, p: &Vec3) -> bool {
    let d = p - c.center;
    let (s, co) = c.yaw.sin_cos();
    let (lx, ly) = (co * d.x + s * d.y, -s * d.x + co * d.y);
    lx.abs() <= 0.5 * c.size.x && ly.abs() <= 0.5 * c.size.y && d.z.abs() <= 0.5 * c.size.z
}

/// Midpoint count over a grid spanning both cuboids' bounding spheres' overlap box.
fn voxel_oracle(a: &Cuboid, b: &Cuboid) -> f64 {
    let reach = |c: &Cuboid| 0.5 * (c.size.x.powi(2) + c.size.y.powi(2)).sqrt();
    let lo = Vec3::new(
        (a.center.x - reach(a)).max(b.center.x - reach(b)),
        (a.center.y - reach(a)).max(b.center.y - reach(b)),
        (a.center.z - 0.5 * a.size.z).max(b.center.z - 0.5 * b.size.z),
    );
    let hi = Vec3::new(
        (a.center.x + reach(a)).min(b.center.x + reach(b)),
        (a.center.y + reach(a)).min(b.center.y + reach(b)),
        (a.center.z + 0.5 * a.size.z).min(b.center.z + 0.5 * b.size.z),
    );
    if (0..3).any(|k| hi[k] <= lo[k]) {
        return 0.0;
    }
    let n = VOXELS_PER_AXIS;
    let d = (hi - lo) / n as f64;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let p = lo + Vec3::new((i as f64 + 0.5) * d.x, (j as f64 + 0.5) * d.y, (k as f64 + 0.5) * d.z);
                if in_cuboid(a, &p) && in_cuboid(b, &p) {
                    count += 1;
                }
            }
        }
    }
    count as f64 * d.x * d.y * d.z
}

/// Convex polygon from sorted random angles on a jittered circle.
fn random_convex(rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let n = rng.random_range(3..9);
    let c = Vec2::new(rng.random_range(0.3..0.7), rng.random_range(0.3..0.7));
    let r = rng.random_range(0.1..0.3);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    angles.sort_by(f64::total_cmp);
    angles.iter().map(|t| c + Vec2::new(t.cos(), t.sin()) * r).collect()
}

fn in_convex(poly: &[Vec2], p: &Vec2) -> bool {
    (0..poly.len()).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0
    })
}

fn mc_oracle(a: &[Vec2], b: &[Vec2], rng: &mut ChaCha8Rng) -> f64 {
    let hits = (0..MC_SAMPLES)
        .filter(|_| {
            let p = Vec2::new(rng.random(), rng.random());
            in_convex(a, &p) && in_convex(b, &p)
        })
        .count();
    hits as f64 / MC_SAMPLES as f64
}

fn geometry_oracles() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<(Cuboid, Cuboid)> = (0..CUBOID_PAIRS)
        .map(|_| {
            let mut rc = || {
                Cuboid::new(
                    Vec3::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), rng.random_range(0.0..0.5)),
                    Vec3::new(rng.random_range(0.2..1.0), rng.random_range(0.2..1.0), rng.random_range(0.2..1.0)),
                    rng.random_range(-PI..PI),
                    "box",
                )
            };
            (rc(), rc())
        })
        .collect();
    let vol_err = pairs
        .par_iter()
        .map(|(a, b)| (intersection_volume(a, b) - voxel_oracle(a, b)).abs())
        .reduce(|| 0.0, f64::max);

    let polys: Vec<(Vec<Vec2>, Vec<Vec2>, u64)> =
        (0..POLYGON_PAIRS as u64).map(|i| (random_convex(&mut rng), random_convex(&mut rng), 1000 + i)).collect();
    let area_err = polys
        .par_iter()
        .map(|(a, b, seed)| {
            let exact = polygon_intersection_area(&Polygon2D::from_convex(a.clone()), &Polygon2D::from_convex(b.clone()));
            (exact - mc_oracle(a, b, &mut ChaCha8Rng::seed_from_u64(*seed))).abs()
        })
        .reduce(|| 0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    verdict(
        vol_err < ORACLE_TOL && area_err < ORACLE_TOL && secs < GEOMETRY_SECONDS,
        format!("max volume error {vol_err:.2e}, max area error {area_err:.2e}, {secs:.1} s"),
    )
}

// ------------------------------------------------------------ criterion 2

fn mh_stationary() -> Verdict {
    let t = Instant::now();
    let energy = [0.0, 1.0, 0.3, 2.0, 0.6];
    let z: f64 = energy.iter().map(|e: &f64| (-e).exp()).sum();
    let target: Vec<f64> = energy.iter().map(|e| (-e).exp() / z).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut counts = [0usize; 5];
    let mut x = 0usize;
    for _ in 0..MH_STEPS {
        // uniform over the other four states: symmetric
        let y = (x + rng.random_range(1..5)) % 5;
        if mh_accept(energy[x], energy[y], 0.0, 1.0, &mut rng).expect("valid temperature") {
            x = y;
        }
        counts[x] += 1;
    }
    let tv: f64 = 0.5 * counts.iter().zip(&target).map(|(&c, p)| (c as f64 / MH_STEPS as f64 - p).abs()).sum::<f64>();
    let secs = t.elapsed().as_secs_f64();
    verdict(tv < MH_TV && secs < MH_SECONDS, format!("TV {tv:.4}, {secs:.2} s"))
}

// ------------------------------------------------------- criteria 3 to 6

struct SceneRun {
    init: Metrics,
    full: Metrics,
    no_physics: Metrics,
    no_hoi: Metrics,
    recovered: Option<(bool, f64)>,
    full_seconds: f64,
}

fn calibrated() -> RunConfigCore {
    RunConfigCore { schedule: Schedule::calibrated(), ..RunConfigCore::default() }
}

/// Removes the first interacting object from both the observations and the start graph.
fn without_interacting_object(gt: &ParseGraph, init: &ParseGraph, obs: &Observations) -> Option<(ParseGraph, Observations)> {
    let target = gt.hoi_edges.first()?.object;
    let det = gt.objects[gt.object_index(target)?].detection?;
    let mut obs2 = obs.clone();
    obs2.det_boxes.remove(det);
    let mut g = init.clone();
    g.hoi_edges.clear();
    g.objects.retain(|o| o.id != target);
    for o in g.objects.iter_mut() {
        if let Some(d) = o.detection.filter(|&d| d > det) {
            o.detection = Some(d - 1);
        }
    }
    g.support_edges.retain(|e| e.supported != target);
    let table = SupportPriorTable::default();
    for i in 0..g.objects.len() {
        let id = g.objects[i].id;
        if let Some(k) = g.support_edges.iter().position(|e| e.supported == id) {
            if g.support_edges[k].supporter == Supporter::Object(target) {
                g.support_edges[k] = support_for_object(&g, i, &table);
            }
        }
    }
    Some((g, obs2))
}

fn run_scene(seed: u64) -> SceneRun {
    let priors = HoiPriorSet::defaults();
    let full_cfg = calibrated();
    let mut no_physics_cfg = calibrated();
    no_physics_cfg.energy.weights.w_collision = 0.0;
    no_physics_cfg.energy.weights.w_support = 0.0;
    let mut no_hoi_cfg = calibrated();
    no_hoi_cfg.energy.weights.w_hoi = 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (gt, obs) = generate_scene(&SceneSpec::default(), &priors, &mut rng).expect("suite scene generates");
    let mut init = perturb(&gt, &PerturbNoise::uniform(INIT_SIGMA_M, INIT_SIGMA_YAW_DEG.to_radians()), &mut rng);
    init.hoi_edges.clear();
    let score = |pg: &ParseGraph, o: &Observations| evaluate(pg, &gt, o).expect("metrics defined");
    let infer = |g: &ParseGraph, o: &Observations, cfg: &RunConfigCore| {
        run_inference(g, o, &priors, cfg, seed).expect("inference completes").graph
    };

    let t = Instant::now();
    let full = infer(&init, &obs, &full_cfg);
    let full_seconds = t.elapsed().as_secs_f64();
    let recovered = without_interacting_object(&gt, &init, &obs).map(|(g, o)| {
        let target = &gt.objects[gt.object_index(gt.hoi_edges[0].object).expect("edge target exists")].cuboid;
        let est = infer(&g, &o, &full_cfg);
        let best = est
            .objects
            .iter()
            .filter(|x| x.synthesized && x.cuboid.class_label == target.class_label)
            .map(|x| (x.cuboid.center - target.center).norm())
            .fold(f64::INFINITY, f64::min);
        (best <= RECOVERY_RADIUS, best)
    });
    SceneRun {
        init: score(&init, &obs),
        full: score(&full, &obs),
        no_physics: score(&infer(&init, &obs, &no_physics_cfg), &obs),
        no_hoi: score(&infer(&init, &obs, &no_hoi_cfg), &obs),
        recovered,
        full_seconds,
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn reconstruction(runs: &[SceneRun]) -> Verdict {
    let iou = mean(runs.iter().map(|r| r.full.iou_3d));
    let iou0 = mean(runs.iter().map(|r| r.init.iou_3d));
    let pose = mean(runs.iter().map(|r| r.full.pose_error_3d.unwrap_or(f64::INFINITY)));
    let slowest = runs.iter().map(|r| r.full_seconds).fold(0.0, f64::max);
    verdict(
        iou >= MIN_IOU && iou - iou0 >= MIN_IOU_GAIN && pose <= MAX_POSE_ERR && slowest < SCENE_SECONDS,
        format!("3D IoU {iou0:.1} -> {iou:.1}, pose error {pose:.3} m, slowest scene {slowest:.1} s"),
    )
}

fn physics_ablation(runs: &[SceneRun]) -> Verdict {
    let pv_full = mean(runs.iter().map(|r| r.full.physical_violation));
    let pv_off = mean(runs.iter().map(|r| r.no_physics.physical_violation));
    let iou_full = mean(runs.iter().map(|r| r.full.iou_3d));
    let iou_off = mean(runs.iter().map(|r| r.no_physics.iou_3d));
    verdict(
        pv_off > pv_full && iou_off < iou_full,
        format!("violation {pv_off:.3} m without physics vs {pv_full:.3} m, 3D IoU {iou_off:.1} vs {iou_full:.1}"),
    )
}

fn hoi_ablation(runs: &[SceneRun]) -> Verdict {
    let pose_ok =
        |r: &SceneRun| r.full.pose_error_3d.unwrap_or(f64::INFINITY) <= r.no_hoi.pose_error_3d.unwrap_or(f64::INFINITY);
    let inter_ok = |r: &SceneRun| r.full.interacting_iou_3d.unwrap_or(0.0) >= r.no_hoi.interacting_iou_3d.unwrap_or(0.0);
    let wins = runs.iter().filter(|r| pose_ok(r) && inter_ok(r)).count();
    let pose_wins = runs.iter().filter(|r| pose_ok(r)).count();
    let inter_wins = runs.iter().filter(|r| inter_ok(r)).count();
    let inter_full = mean(runs.iter().filter_map(|r| r.full.interacting_iou_3d));
    let inter_off = mean(runs.iter().filter_map(|r| r.no_hoi.interacting_iou_3d));
    let pose_full = mean(runs.iter().filter_map(|r| r.full.pose_error_3d));
    let pose_off = mean(runs.iter().filter_map(|r| r.no_hoi.pose_error_3d));
    verdict(
        wins >= MIN_HOI_WINS,
        format!(
            "full model no worse on both in {wins}/{n} scenes (pose {pose_wins}/{n}, interacting IoU {inter_wins}/{n}); \
             mean pose error {pose_full:.3} vs {pose_off:.3} m, interacting IoU {inter_full:.1} vs {inter_off:.1}",
            n = runs.len()
        ),
    )
}

fn topdown_recovery(runs: &[SceneRun]) -> Verdict {
    let hits: Vec<(bool, f64)> = runs.iter().filter_map(|r| r.recovered).collect();
    let ok = hits.iter().filter(|h| h.0).count();
    let rate = ok as f64 / runs.len() as f64;
    verdict(rate >= MIN_RECOVERY, format!("{ok}/{} recovered within {RECOVERY_RADIUS} m", runs.len()))
}

// ------------------------------------------------------------ criterion 7

fn prior_recovery() -> Verdict {
    let mu = Vec3::new(0.15, -0.4, 0.55);
    let l = Mat3::new(0.12, 0.0, 0.0, 0.03, 0.08, 0.0, -0.02, 0.01, 0.05);
    let sigma = l * l.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws: Vec<Vec3> = (0..FIT_DRAWS)
        .map(|_| mu + l * Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let p = fit_prior(Action::Sit, vec!["chair".into()], KeyJoint::for_action(Action::Sit), &draws).expect("enough draws");
    let n = FIT_DRAWS as f64;
    let mean_ok = (0..3).all(|k| (p.mean[k] - mu[k]).abs() <= 3.0 * sigma[(k, k)].sqrt() / n.sqrt());
    let rel = (p.covariance - sigma).norm() / sigma.norm();
    verdict(mean_ok && rel < FIT_COV_REL, format!("mean within 3 sigma/sqrt(N): {mean_ok}, covariance rel. error {rel:.4}"))
}

// ------------------------------------------------------------ criterion 8

fn lifting_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for case in 0..LIFT_CASES {
        let k = Camera::intrinsics_from(rng.random_range(400.0..800.0), 320.0, 240.0);
        let cam_yaw: f64 = rng.random_range(-PI..PI);
        let cam = Camera::looking(k, Vec3::new(0.0, 0.0, rng.random_range(2.2..3.2)), cam_yaw, rng.random_range(0.1..0.5));
        let template = Template::ALL[case % Template::ALL.len()];
        let dist = rng.random_range(2.0..6.0);
        let lateral = rng.random_range(-0.5..0.5);
        let (s, c) = cam_yaw.sin_cos();
        let center = Vec3::new(dist * c - lateral * s, dist * s + lateral * c, rng.random_range(0.4..1.0));
        let yaw = rng.random_range(-PI..PI);
        let truth = pose_from_params(center, 1.0, template.joints(), yaw, ActionSet::single(Action::Stand)).expect("valid pose");
        let local = truth.joints.map(|j| j - truth.center);
        for anchor in [Joint::Hip, Joint::Head] {
            let p3 = truth.joint(anchor);
            let lifted = scenemc_core::geometry::project_point(&cam, &p3)
                .map_err(|e| e.to_string())
                .and_then(|px| lift_pose_to_world(&local, anchor, &px, &cam, p3.z, truth.actions).map_err(|e| e.to_string()));
            match lifted {
                Ok(pose) => {
                    for (a, b) in pose.joints.iter().zip(&truth.joints) {
                        worst = worst.max((a - b).norm());
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    verdict(failures == 0 && worst < LIFT_TOL, format!("max joint error {worst:.2e} m, {failures} unliftable"))
}

// ------------------------------------------------------------ criterion 9

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("temp dir");
    let priors = HoiPriorSet::defaults();
    let (_, obs) = generate_scene(&SceneSpec::default(), &priors, &mut ChaCha8Rng::seed_from_u64(9)).expect("scene");
    let obs_path = dir.path().join("scene.obs.json");
    fs::write(&obs_path, schema::obs_text(&obs).expect("serializes")).expect("write");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_scenemc"))
            .args(["--seed", "99", "infer"])
            .arg(&obs_path)
            .arg("-o")
            .arg(&out)
            .env_remove("SCENEMC_CONFIG")
            .stdout(Stdio::null())
            .status()
            .expect("binary runs");
        let trace = dir.path().join(format!("{}.trace.jsonl", name.trim_end_matches(".json")));
        (status.success(), fs::read(&out).unwrap_or_default(), fs::read(trace).unwrap_or_default())
    };
    let (ok_a, scene_a, trace_a) = run("a.json");
    let (ok_b, scene_b, trace_b) = run("b.json");
    let same = scene_a == scene_b && trace_a == trace_b;
    verdict(ok_a && ok_b && same && !scene_a.is_empty(), format!("scene {} bytes, trace {} bytes, identical: {same}", scene_a.len(), trace_a.len()))
}

fn main() -> ExitCode {
    let strict = std::env::var("SCENEMC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let t = Instant::now();
    let runs: Vec<SceneRun> = (0..SUITE).into_par_iter().map(run_scene).collect();
    let suite_secs = t.elapsed().as_secs_f64();

    let results: [(u8, &str, bool, Verdict); 9] = [
        (1, "geometry oracle equivalence", true, geometry_oracles()),
        (2, "Metropolis-Hastings stationarity", true, mh_stationary()),
        (3, "round-trip reconstruction", false, reconstruction(&runs)),
        (4, "physics ablation direction", false, physics_ablation(&runs)),
        (5, "HOI ablation direction", false, hoi_ablation(&runs)),
        (6, "top-down recovery", false, topdown_recovery(&runs)),
        (7, "prior fitting recovery", true, prior_recovery()),
        (8, "pose lifting exactness", true, lifting_exactness()),
        (9, "determinism", true, determinism()),
    ];
    println!("suite: {SUITE} scenes, 4 inference runs each, {suite_secs:.1} s wall");
    let mut hard_failure = false;
    for (n, name, hard, v) in &results {
        println!("{} criterion {n} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass && (*hard || strict) {
            hard_failure = true;
        }
    }
    if hard_failure {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
