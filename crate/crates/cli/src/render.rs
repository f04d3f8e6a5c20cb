//! Static SVG overlay: detections, projected hulls, and both skeletons.

use std::fmt::Write as _;

use scenemc_core::geometry::{project_cuboid_hull, project_point, ProjectedBox};
use scenemc_core::scene::{Observations, ParseGraph, Vec2, BONES};

const STYLE: &str = "rect.det{fill:none;stroke:#1f77b4;stroke-width:2}\
polygon.hull{fill:#ff7f0e;fill-opacity:0.15;stroke:#ff7f0e;stroke-width:2}\
polygon.hull.synth{stroke-dasharray:6 4}\
line.bone-det{stroke:#2ca02c;stroke-width:2}\
circle.joint-det{fill:#2ca02c}\
line.bone-proj{stroke:#d62728;stroke-width:2}\
circle.joint-proj{fill:#d62728}";

fn pt(p: &Vec2) -> String {
    format!("{:.2},{:.2}", p.x, p.y)
}

/// Renders `pg` over `obs`. Output depends only on the inputs.
pub fn render_svg(pg: &ParseGraph, obs: &Observations) -> String {
    let (w, h) = obs.image_size;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.2}" height="{h:.2}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(s, "<style>{STYLE}</style>");
    let _ = writeln!(s, r##"<rect class="frame" x="0.00" y="0.00" width="{w:.2}" height="{h:.2}" fill="#ffffff"/>"##);

    for (k, b) in obs.det_boxes.iter().enumerate() {
        let r = &b.bbox;
        let _ = writeln!(
            s,
            r#"<rect class="det" data-index="{k}" data-class="{}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
            b.class_label,
            r.min.x,
            r.min.y,
            r.width(),
            r.height()
        );
    }

    for o in &pg.objects {
        if let ProjectedBox::Hull(poly) = project_cuboid_hull(&pg.camera, &o.cuboid, w, h) {
            if poly.vertices.len() < 3 {
                continue;
            }
            let points: Vec<String> = poly.vertices.iter().map(pt).collect();
            let class = if o.synthesized { "hull synth" } else { "hull" };
            let _ = writeln!(
                s,
                r#"<polygon class="{class}" data-id="{}" data-class="{}" points="{}"/>"#,
                o.id.0,
                o.cuboid.class_label,
                points.join(" ")
            );
        }
    }

    for d in &obs.det_poses {
        for (a, b) in BONES {
            let (i, j) = (a.index(), b.index());
            if d.visible[i] && d.visible[j] {
                let (p, q) = (d.joints[i], d.joints[j]);
                let _ = writeln!(
                    s,
                    r#"<line class="bone-det" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
                    p.x, p.y, q.x, q.y
                );
            }
        }
        for (p, _) in d.joints.iter().zip(d.visible).filter(|(_, v)| *v) {
            let _ = writeln!(s, r#"<circle class="joint-det" cx="{:.2}" cy="{:.2}" r="3.00"/>"#, p.x, p.y);
        }
    }

    for hn in &pg.humans {
        let proj: Vec<Option<Vec2>> = hn.pose.joints.iter().map(|j| project_point(&pg.camera, j).ok()).collect();
        for (a, b) in BONES {
            if let (Some(p), Some(q)) = (proj[a.index()], proj[b.index()]) {
                let _ = writeln!(
                    s,
                    r#"<line class="bone-proj" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
                    p.x, p.y, q.x, q.y
                );
            }
        }
        for p in proj.iter().flatten() {
            let _ = writeln!(s, r#"<circle class="joint-proj" data-id="{}" cx="{:.2}" cy="{:.2}" r="3.00"/>"#, hn.id.0, p.x, p.y);
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use scenemc_core::harness::{generate_scene, SceneSpec};
    use scenemc_core::hoi_prior::HoiPriorSet;

    fn scene() -> (ParseGraph, Observations) {
        let spec = SceneSpec { n_objects: (1, 1), ..SceneSpec::default() };
        generate_scene(&spec, &HoiPriorSet::defaults(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    }

    #[test]
    fn one_object_one_hull() {
        let (pg, obs) = scene();
        let svg = render_svg(&pg, &obs);
        assert_eq!(svg.matches(r#"<polygon class="hull""#).count(), 1);
        assert_eq!(svg.matches(r#"<rect class="det""#).count(), obs.det_boxes.len());
    }

    #[test]
    fn seventeen_projected_joints() {
        let (pg, obs) = scene();
        assert_eq!(pg.humans.len(), 1);
        assert_eq!(render_svg(&pg, &obs).matches(r#"class="joint-proj""#).count(), 17);
    }

    #[test]
    fn output_is_deterministic() {
        let (pg, obs) = scene();
        assert_eq!(render_svg(&pg, &obs), render_svg(&pg, &obs));
    }
}
