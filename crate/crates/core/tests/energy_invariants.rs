use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scenemc_core::energy::{EnergyConfig, Scorer};
use scenemc_core::harness::{generate_scene, perturb, PerturbNoise, SceneSpec};
use scenemc_core::hoi_prior::HoiPriorSet;
use scenemc_core::inference::{propose, StepSizes};
use scenemc_core::scene::{Observations, ParseGraph, Vec3};

fn scene(seed: u64, noise: f64) -> (ParseGraph, Observations) {
    let priors = HoiPriorSet::defaults();
    let (gt, obs) = generate_scene(&SceneSpec::default(), &priors, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    (perturb(&gt, &PerturbNoise::uniform(noise, noise), &mut ChaCha8Rng::seed_from_u64(seed ^ 0xabc)), obs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn energy_is_translation_invariant(
        seed in 0u64..12,
        noise in 0.0..0.4f64,
        tx in -5.0..5.0f64, ty in -5.0..5.0f64, tz in -2.0..2.0f64,
    ) {
        let priors = HoiPriorSet::defaults();
        let (pg, obs) = scene(seed, noise);
        let t = Vec3::new(tx, ty, tz);
        let moved = pg.translated(&t);
        let mut obs_moved = obs.clone();
        obs_moved.camera.position += t;
        if let Some(l) = obs_moved.layout.as_mut() {
            l.center += t;
        }
        let a = Scorer::new(&obs, &priors, EnergyConfig::default()).breakdown(&pg).unwrap();
        let b = Scorer::new(&obs_moved, &priors, EnergyConfig::default()).breakdown(&moved).unwrap();
        prop_assert!((a.e_support - b.e_support).abs() < 1e-7);
        prop_assert!((a.e_collision - b.e_collision).abs() < 1e-7);
        prop_assert!((a.e_hoi - b.e_hoi).abs() < 1e-7);
        prop_assert!((a.e_likelihood - b.e_likelihood).abs() < 1e-7);
    }

    #[test]
    fn local_delta_matches_full_recompute(seed in 0u64..12, noise in 0.0..0.4f64, draw in 0u64..1000) {
        let priors = HoiPriorSet::defaults();
        let (pg, obs) = scene(seed, noise);
        let scorer = Scorer::new(&obs, &priors, EnergyConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let before = scorer.term_sums(&pg).unwrap();
        for _ in 0..10 {
            if let Some(m) = propose(&pg, &scorer, &StepSizes::default(), 0.95, true, &mut rng).unwrap() {
                let after = scorer.term_sums(&m.candidate).unwrap();
                let full = after.sub(&before);
                let w = scorer.weights();
                prop_assert!((full.weighted(w) - m.delta.weighted(w)).abs() < 1e-9,
                    "{:?}: full {:?} local {:?}", m.proposal.dynamic, full, m.delta);
            }
        }
    }
}
