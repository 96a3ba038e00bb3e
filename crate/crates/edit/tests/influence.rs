use glam::Vec3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splathead_core::scene::random_scene;
use splathead_core::{rasterize, record_contributions, Camera, GaussianPrimitive, GaussianSet, PixelMask};
use splathead_edit::{compute_influence_weights, select_edited_gaussians, Influence, SelectionStrategy};

fn camera(size: u32) -> Camera {
    Camera::new(Vec3::new(0.0, 0.0, 5.0), Vec3::ZERO, Vec3::Y, 0.8, (size, size), 0.1, 50.0).unwrap()
}

fn random_mask(seed: u64, w: usize, h: usize) -> PixelMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy, r) = (rng.random_range(0..w), rng.random_range(0..h), rng.random_range(4..w / 2));
    let density = rng.random_range(0.01..0.2);
    PixelMask::from_fn(w, h, |x, y| {
        let d2 = (x as i64 - cx as i64).pow(2) + (y as i64 - cy as i64).pow(2);
        d2 <= (r * r) as i64 || rng.random_bool(density)
    })
}

#[test]
fn empty_mask_gives_zero_weights() {
    let cam = camera(64);
    let set = random_scene(1, 300, &cam);
    let inf = compute_influence_weights(&set, &cam, &PixelMask::new(64, 64)).unwrap();
    assert_eq!(inf.weights.len(), set.len());
    assert!(inf.weights.iter().all(|w| *w == 0.0));
    assert!(select_edited_gaussians(&inf, &SelectionStrategy::default()).is_empty());
}

/// A huge splat far away covers the frame with kernel ≈ 1 (within 3e-4) and
/// T = 1.
#[test]
fn single_covering_gaussian_weighs_count_times_opacity() {
    let p = GaussianPrimitive::new(Vec3::ZERO, Vec3::splat(2000.0), [1.0, 0.0, 0.0, 0.0], 0.7, Vec3::ONE).unwrap();
    let set = GaussianSet::unbound(vec![p]);
    let cam = Camera::new(Vec3::new(0.0, 0.0, 200.0), Vec3::ZERO, Vec3::Y, 0.3, (24, 24), 0.1, 500.0).unwrap();
    let mask = PixelMask::from_fn(24, 24, |x, y| (x + 2 * y) % 5 == 0);
    let k = mask.count() as f64;
    let inf = compute_influence_weights(&set, &cam, &mask).unwrap();
    assert!((inf.weights[0] - k * 0.7).abs() <= 1e-3 * k, "{} vs {}", inf.weights[0], k * 0.7);
    assert_eq!(inf.front_transmittance[0], 1.0);
}

/// Independent replay: walk the contribution log and sum `α·T` per Gaussian.
fn replay(set: &GaussianSet, cam: &Camera, mask: &PixelMask) -> Vec<f64> {
    let mut w = vec![0.0; set.len()];
    for px in record_contributions(set, cam, mask).unwrap().pixels {
        let mut t = 1.0f64;
        for c in px.entries {
            assert!((c.transmittance as f64 - t).abs() <= 1e-6, "log transmittance is not the running product");
            w[c.gaussian as usize] += c.alpha as f64 * t;
            t *= 1.0 - c.alpha as f64;
        }
    }
    w
}

#[test]
fn weights_equal_log_replay_on_seeded_scenes() {
    for seed in 0..20u64 {
        let cam = camera(96);
        let set = random_scene(seed, 800, &cam);
        let mask = random_mask(seed + 1000, 96, 96);
        let inf = compute_influence_weights(&set, &cam, &mask).unwrap();
        let oracle = replay(&set, &cam, &mask);
        let worst = inf.weights.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-5, "seed {seed}: worst |Δw| = {worst:e}");
    }
}

#[test]
fn weights_never_exceed_composited_opacity() {
    for seed in 0..10u64 {
        let cam = camera(80);
        let set = random_scene(seed, 1500, &cam);
        let mask = random_mask(seed, 80, 80);
        let inf = compute_influence_weights(&set, &cam, &mask).unwrap();
        let frame = rasterize(&set, &cam);
        let opacity: f64 = mask.iter_set().map(|(x, y)| frame.alpha_at(x, y) as f64).sum();
        assert!(inf.total() <= opacity + 1e-4, "seed {seed}: {} > {opacity}", inf.total());
        assert!((inf.total() - inf.mask_opacity).abs() <= 1e-4);
    }
}

#[test]
fn occluded_gaussian_is_not_selected() {
    let splat = |z: f32, opacity: f32| {
        GaussianPrimitive::new(Vec3::new(0.0, 0.0, z), Vec3::splat(2000.0), [1.0, 0.0, 0.0, 0.0], opacity, Vec3::ONE).unwrap()
    };
    // Index 0 sits behind an almost opaque front layer (index 1).
    let set = GaussianSet::unbound(vec![splat(-5.0, 1.0), splat(5.0, 0.9999)]);
    let cam = Camera::new(Vec3::new(0.0, 0.0, 200.0), Vec3::ZERO, Vec3::Y, 0.3, (16, 16), 0.1, 500.0).unwrap();
    let mask = PixelMask::full(16, 16);
    let inf = compute_influence_weights(&set, &cam, &mask).unwrap();
    assert!(inf.front_transmittance[0] < 0.01);
    // With no relative threshold, only the transmittance test removes it.
    let lenient = SelectionStrategy { relative: 0.0, ..SelectionStrategy::default() };
    assert_eq!(select_edited_gaussians(&inf, &lenient), vec![1]);
    assert_eq!(select_edited_gaussians(&inf, &SelectionStrategy::default()), vec![1]);
}

#[test]
fn all_zero_weights_select_nothing() {
    let inf = Influence { weights: vec![0.0; 5], front_transmittance: vec![1.0; 5], mask_opacity: 0.0 };
    let lenient = SelectionStrategy { relative: 0.0, floor: 0.0, min_transmittance: 0.0 };
    assert!(select_edited_gaussians(&inf, &lenient).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_the_threshold_never_adds_indices(
        weights in prop::collection::vec(0.0f64..10.0, 1..200),
        t in prop::collection::vec(0.0f32..1.0, 200),
        lo in 0.0f64..1.0,
        step in 0.0f64..1.0,
    ) {
        let n = weights.len();
        let inf = Influence { weights, front_transmittance: t[..n].to_vec(), mask_opacity: 0.0 };
        let a = select_edited_gaussians(&inf, &SelectionStrategy { relative: lo, ..SelectionStrategy::default() });
        let b = select_edited_gaussians(&inf, &SelectionStrategy { relative: lo + step, ..SelectionStrategy::default() });
        prop_assert!(b.iter().all(|i| a.contains(i)));
        // Brute force over the definition.
        let max = inf.max_weight();
        let expected: Vec<usize> = (0..n)
            .filter(|&i| inf.weights[i] > 0.0 && inf.weights[i] >= (lo * max).max(1e-4) && inf.front_transmittance[i] > 0.01)
            .collect();
        prop_assert_eq!(a, expected);
    }
}
