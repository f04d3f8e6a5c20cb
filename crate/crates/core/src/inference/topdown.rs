use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::init::{choose_supporter, InitConfig};
use crate::error::Result;
use crate::geometry::footprint;
use crate::hoi_prior::{confident_actions, sample_object_given_pose, HoiPriorSet};
use crate::scene::{Cuboid, HoiEdge, ObjectNode, Observations, ParseGraph, SupportEdge};

/// Adds an object at the prior mode for every confident interaction a
/// person has no edge for. New objects get the prior's default class and
/// that class's default size, facing the person.
pub fn topdown_sample(
    pg: &ParseGraph,
    obs: &Observations,
    priors: &HoiPriorSet,
    conf_threshold: f64,
    cfg: &InitConfig,
) -> Result<ParseGraph> {
    let mut out = pg.clone();
    // the mode is deterministic; the rng is never drawn from
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for h in 0..pg.humans.len() {
        let human = &pg.humans[h];
        for a in confident_actions(pg, obs, h, conf_threshold) {
            if out.hoi_edges.iter().any(|e| e.human == human.id && e.action == a) {
                continue;
            }
            let prior = priors.get(a)?;
            let class = prior.default_class().to_string();
            let info = cfg.classes.get(&class);
            let center = sample_object_given_pose(prior, &human.pose, None, &mut rng);
            let cuboid = Cuboid::new(center, info.size, human.pose.yaw, class.clone()).with_container(info.is_container);
            let id = out.next_id();
            let supporter = choose_supporter(&out, &class, id, cuboid.bottom_z(), &footprint(&cuboid), &cfg.support);
            out.objects.push(ObjectNode { id, cuboid, detection: None, synthesized: true });
            out.support_edges.push(SupportEdge { supported: id, supporter });
            out.hoi_edges.push(HoiEdge { human: human.id, object: id, action: a });
        }
    }
    Ok(out)
}
