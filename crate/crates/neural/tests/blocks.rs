//! Oracles and invariants of the individual network blocks.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splathead_core::UvFeatureMap;
use splathead_neural::blocks::{attend, AttentionWeights};
use splathead_neural::tensor::{conv2d, leaky_relu, softmax_rows};
use splathead_neural::{adain, cross_attention, modulated_synthesis_layer, ChannelStats, Model, Tensor};

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f32, hi: f32) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Mean and population deviation per channel, straight from the definition.
fn measured_stats(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let c = x.shape()[2];
    let n = x.len() / c;
    let mut mean = vec![0.0f64; c];
    for px in x.data().chunks_exact(c) {
        for k in 0..c {
            mean[k] += px[k] as f64 / n as f64;
        }
    }
    let mut var = vec![0.0f64; c];
    for px in x.data().chunks_exact(c) {
        for k in 0..c {
            var[k] += (px[k] as f64 - mean[k]).powi(2) / n as f64;
        }
    }
    (mean, var.into_iter().map(f64::sqrt).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adain_hits_target_statistics(seed in any::<u64>(), h in 2usize..12, c in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let content = random_tensor(&mut rng, vec![h, h, c], -3.0, 3.0);
        let style = ChannelStats {
            mean: (0..c).map(|_| rng.random_range(-2.0..2.0)).collect(),
            std: (0..c).map(|_| rng.random_range(0.1..3.0)).collect(),
        };
        let out = adain(&content, &style, None).unwrap();
        let (mean, std) = measured_stats(&out);
        for k in 0..c {
            prop_assert!((mean[k] - style.mean[k] as f64).abs() <= 1e-4, "mean {k}");
            prop_assert!((std[k] - style.std[k] as f64).abs() <= 1e-3, "std {k}");
        }
    }

    #[test]
    fn softmax_rows_are_distributions(seed in any::<u64>(), n in 1usize..8, m in 1usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = random_tensor(&mut rng, vec![n, m], -10.0, 10.0);
        softmax_rows(&mut t);
        for r in 0..n {
            prop_assert!((t.row(r).iter().sum::<f32>() - 1.0).abs() <= 1e-6);
            prop_assert!(t.row(r).iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn attention_probabilities_sum_to_one(seed in any::<u64>(), heads in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_tensor(&mut rng, vec![5, 4], -10.0, 10.0);
        let k = random_tensor(&mut rng, vec![7, 4], -10.0, 10.0);
        let v = random_tensor(&mut rng, vec![7, 4], -10.0, 10.0);
        let (out, probs) = attend(&q, &k, &v, heads).unwrap();
        prop_assert!(out.is_finite());
        for r in 0..probs.rows() {
            prop_assert!((probs.row(r).iter().sum::<f32>() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn blocks_stay_finite_on_wide_inputs(seed in any::<u64>()) {
        let model = Model::toy(1);
        let w = model.weights();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, vec![6, 16], -10.0, 10.0);
        let kv = random_tensor(&mut rng, vec![9, 16], -10.0, 10.0);
        let attn = AttentionWeights::from_store(w, "geometry.block0.attn", 1).unwrap();
        prop_assert!(cross_attention(&x, &kv, &attn).unwrap().is_finite());

        let content = random_tensor(&mut rng, vec![4, 4, 3], -10.0, 10.0);
        let flat = ChannelStats { mean: vec![0.0; 3], std: vec![1.0; 3] };
        prop_assert!(adain(&content, &flat, None).unwrap().is_finite());

        let features = random_tensor(&mut rng, vec![4, 4, 128], -10.0, 10.0);
        let latent: Vec<f32> = (0..64).map(|_| rng.random_range(-10.0..10.0)).collect();
        let out = modulated_synthesis_layer(&features, &latent, None, w, "synthesis.layer1", true).unwrap();
        prop_assert!(out.is_finite());
    }
}

#[test]
fn adain_with_own_statistics_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let content = random_tensor(&mut rng, vec![8, 8, 4], -2.0, 5.0);
    let own = ChannelStats::of(&content, None).unwrap();
    let out = adain(&content, &own, None).unwrap();
    for (a, b) in out.data().iter().zip(content.data()) {
        assert!((a - b).abs() <= 1e-5);
    }
}

#[test]
fn adain_rejects_channel_mismatch() {
    let content = Tensor::zeros(vec![2, 2, 3]);
    let stats = ChannelStats { mean: vec![0.0; 2], std: vec![1.0; 2] };
    assert!(adain(&content, &stats, None).is_err());
}

/// `softmax(Q Kᵀ / √D) V` by hand, in f64, for N=2, M=3, D=4.
#[test]
fn attention_matches_hand_rolled_softmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let q = random_tensor(&mut rng, vec![2, 4], -1.0, 1.0);
    let k = random_tensor(&mut rng, vec![3, 4], -1.0, 1.0);
    let v = random_tensor(&mut rng, vec![3, 4], -1.0, 1.0);
    let (out, _) = attend(&q, &k, &v, 1).unwrap();
    for i in 0..2 {
        let scores: Vec<f64> = (0..3)
            .map(|j| (0..4).map(|d| q.row(i)[d] as f64 * k.row(j)[d] as f64).sum::<f64>() / 2.0)
            .collect();
        let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
        let z: f64 = e.iter().sum();
        for d in 0..4 {
            let expected: f64 = (0..3).map(|j| e[j] / z * v.row(j)[d] as f64).sum();
            assert!((out.row(i)[d] as f64 - expected).abs() <= 1e-5);
        }
    }
}

#[test]
fn cross_attention_with_one_key_returns_projected_value() {
    let model = Model::toy(4);
    let attn = AttentionWeights::from_store(model.weights(), "geometry.block0.attn", 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q = random_tensor(&mut rng, vec![5, 16], -1.0, 1.0);
    let kv = random_tensor(&mut rng, vec![1, 16], -1.0, 1.0);
    let out = cross_attention(&q, &kv, &attn).unwrap();
    // Every query sees the single value row, so all outputs are equal to
    // (kv·Wv)·Wo.
    let v: Vec<f64> = (0..16).map(|c| (0..16).map(|r| kv.row(0)[r] as f64 * attn.wv.row(r)[c] as f64).sum()).collect();
    let expected: Vec<f64> = (0..16).map(|c| (0..16).map(|r| v[r] * attn.wo.row(r)[c] as f64).sum()).collect();
    for i in 0..5 {
        for (got, want) in out.row(i).iter().zip(&expected) {
            assert!((*got as f64 - want).abs() <= 1e-5);
        }
    }
    assert!(cross_attention(&q, &Tensor::zeros(vec![2, 8]), &attn).is_err());
}

/// Store with one synthesis layer rewired: identity 3×3 conv, zero latent
/// affine and unit style bias.
fn identity_layer_model(channels: usize) -> Model {
    let base = Model::toy(0);
    let mut w = base.weights().clone();
    let p = "synthesis.layer1";
    let cin = w.get(&format!("{p}.conv.weight")).unwrap().shape()[2];
    let cout = w.get(&format!("{p}.conv.weight")).unwrap().shape()[3];
    assert!(channels <= cin.min(cout));
    let mut conv = Tensor::zeros(vec![3, 3, cin, cout]);
    for c in 0..cin.min(cout) {
        // Center tap (1, 1) of the 3×3 kernel.
        conv.data_mut()[(4 * cin + c) * cout + c] = 1.0;
    }
    w.set(&format!("{p}.conv.weight"), conv).unwrap();
    w.set(&format!("{p}.affine.weight"), Tensor::zeros(w.get(&format!("{p}.affine.weight")).unwrap().shape().to_vec()))
        .unwrap();
    Model::new(base.arch().clone(), w).unwrap()
}

#[test]
fn disabled_modulation_reduces_to_the_nonlinearity() {
    let model = identity_layer_model(64);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let features = random_tensor(&mut rng, vec![8, 8, 128], -2.0, 2.0);
    let latent: Vec<f32> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let out = modulated_synthesis_layer(&features, &latent, None, model.weights(), "synthesis.layer1", false).unwrap();
    for (o, f) in out.data().chunks_exact(64).zip(features.data().chunks_exact(128)) {
        for c in 0..64 {
            assert!((o[c] - leaky_relu(f[c])).abs() <= 1e-6);
        }
    }
}

#[test]
fn style_dependence_is_functional() {
    let model = Model::toy(6);
    let w = model.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let features = random_tensor(&mut rng, vec![8, 8, 64], -1.0, 1.0);
    let latent: Vec<f32> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a = modulated_synthesis_layer(&features, &latent, None, w, "synthesis.layer2", true).unwrap();
    let b = modulated_synthesis_layer(&features, &latent.clone(), None, w, "synthesis.layer2", true).unwrap();
    assert_eq!(a, b);
    let mut other = latent.clone();
    other[7] += 0.5;
    let c = modulated_synthesis_layer(&features, &other, None, w, "synthesis.layer2", true).unwrap();
    assert_ne!(a, c);
}

/// The spatial term is added after the convolution, so a one-texel bump can
/// only reach that texel of this layer's output.
#[test]
fn spatial_bump_stays_in_its_receptive_field() {
    let model = Model::toy(2);
    let w = model.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let features = random_tensor(&mut rng, vec![8, 8, 64], -1.0, 1.0);
    let latent: Vec<f32> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let zeros = UvFeatureMap::zeros(16, 32);
    let mut bump = zeros.clone();
    bump.texel_mut(5, 11).fill(0.75);
    let a = modulated_synthesis_layer(&features, &latent, Some(&zeros), w, "synthesis.layer2", true).unwrap();
    let b = modulated_synthesis_layer(&features, &latent, Some(&bump), w, "synthesis.layer2", true).unwrap();
    for y in 0..16 {
        for x in 0..16 {
            let i = (y * 16 + x) * 32;
            let differs = a.data()[i..i + 32] != b.data()[i..i + 32];
            assert_eq!(differs, (x, y) == (5, 11), "texel ({x}, {y})");
        }
    }
}

/// Demodulated layer on white noise with unit style scales keeps the
/// per-channel variance within a factor of four of the input's.
#[test]
fn demodulation_keeps_variance_stable() {
    let base = Model::toy(12);
    let mut w = base.weights().clone();
    for k in 1..4 {
        let p = format!("synthesis.layer{k}.affine");
        let shape = w.get(&format!("{p}.weight")).unwrap().shape().to_vec();
        w.set(&format!("{p}.weight"), Tensor::zeros(shape)).unwrap();
    }
    let model = Model::new(base.arch().clone(), w).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let normal = rand_distr::Normal::new(0.0f32, 1.0).unwrap();
    for (k, cin) in [(1usize, 128usize), (2, 64), (3, 32)] {
        let data = (0..32 * 32 * cin).map(|_| rng.sample(normal)).collect();
        let x = Tensor::new(vec![32, 32, cin], data).unwrap();
        let latent = vec![0.0f32; 64];
        let out =
            modulated_synthesis_layer(&x, &latent, None, model.weights(), &format!("synthesis.layer{k}"), false).unwrap();
        let in_var = measured_stats(&x).1.iter().map(|s| s * s).sum::<f64>() / cin as f64;
        for s in measured_stats(&out).1 {
            let ratio = s * s / in_var;
            assert!((0.25..=4.0).contains(&ratio), "layer {k}: variance ratio {ratio}");
        }
    }
}

#[test]
fn convolution_is_a_pure_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = random_tensor(&mut rng, vec![9, 9, 3], -1.0, 1.0);
    let k = random_tensor(&mut rng, vec![3, 3, 3, 5], -1.0, 1.0);
    let a = conv2d(&x, &k, None, 1, 1).unwrap();
    let b = conv2d(&x, &k, None, 1, 1).unwrap();
    assert_eq!(a.data(), b.data());
}
