//! Structural invariants of the network: permutation invariance, proper
//! rotations, identity transformers at init, multi-scale pooling, batch
//! additivity of gradients and the output mapping contracts.

use pcpnet::network::{predict, ModelConfig, OutputGrad, OutputSpec, PatchInput, PcpModel, Real};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(output: OutputSpec, n_points: usize) -> ModelConfig {
    ModelConfig {
        output,
        scales: vec![0.05],
        n_points,
        point_functions: 48,
        feature_widths: vec![16, 16],
        point_function_hidden: vec![24],
        stn_encoder: vec![16, 32],
        stn_head: vec![16],
        regressor_hidden: vec![32, 16],
        use_point_stn: true,
        use_feature_stn: true,
    }
}

/// Overwrites every parameter, including the zero-initialized transformer
/// heads, with uniform values in `±scale / sqrt(fan_in)`.
fn randomize<T: Real>(model: &mut PcpModel<T>, rng: &mut ChaCha8Rng, scale: f64) {
    for (_, t) in model.params_mut() {
        let fan_in = if t.shape().len() == 2 { t.shape()[1] } else { 1 };
        let bound = scale / (fan_in as f64).sqrt();
        for v in t.data_mut() {
            *v = T::from_f64(rng.random_range(-bound..bound));
        }
    }
}

/// `valid` points in the unit ball followed by zero padding.
fn patch(rng: &mut ChaCha8Rng, n: usize, valid: usize) -> Vec<[f64; 3]> {
    let mut pts = vec![[0.0; 3]; n];
    for p in pts.iter_mut().take(valid) {
        *p = [rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)];
    }
    pts
}

fn max_rel(a: &[f32], b: &[f32]) -> f64 {
    let scale = a.iter().map(|v| v.abs() as f64).fold(1e-6, f64::max);
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn pooled_feature_lengths() {
    let ss = ModelConfig::single_scale(OutputSpec::UnorientedNormal);
    let ms = ModelConfig::multi_scale(OutputSpec::Joint);
    assert_eq!(ss.pooled_dim(), 1024);
    assert_eq!(ms.pooled_dim(), 9216);
    assert_eq!(ms.output.dim(), 5);
    let model = PcpModel::<f32>::build(ss, 0).unwrap();
    assert_eq!(model.regressor.in_dim(), 1024);
    assert_eq!(model.regressor.out_dim(), 3);
}

#[test]
fn permutation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut model = PcpModel::<f32>::build(small(OutputSpec::Joint, 128), 1).unwrap();
    randomize(&mut model, &mut rng, 1.0);
    for _ in 0..20 {
        let valid = rng.random_range(1..=128);
        let mut pts = patch(&mut rng, 128, valid);
        let base = model.forward_sample(&PatchInput::from_points(vec![pts.clone()])).unwrap().outputs().to_vec();
        for _ in 0..5 {
            pts.shuffle(&mut rng);
            let out = model.forward_sample(&PatchInput::from_points(vec![pts.clone()])).unwrap().outputs().to_vec();
            assert!(max_rel(&base, &out) < 1e-5);
        }
    }
}

#[test]
fn point_transformer_always_yields_proper_rotations() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut model = PcpModel::<f32>::build(small(OutputSpec::UnorientedNormal, 32), 2).unwrap();
    for i in 0..200 {
        if i % 20 == 0 {
            randomize(&mut model, &mut rng, 3.0);
        }
        let input = PatchInput::from_points(vec![patch(&mut rng, 32, 32)]);
        let r = *model.forward_sample(&input).unwrap().rotation();
        let r = nalgebra::Matrix3::from_fn(|a, b| r[a][b] as f64);
        let err = (r.transpose() * r - nalgebra::Matrix3::identity()).abs().max();
        assert!(err < 1e-5, "orthogonality error {err}");
        assert!(r.determinant() > 0.0);
    }
}

#[test]
fn fresh_transformers_are_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let model = PcpModel::<f64>::build(small(OutputSpec::Joint, 64), 3).unwrap();
    let mut bypass = model.clone();
    bypass.point_stn = None;
    bypass.feature_stn = None;
    bypass.config.use_point_stn = false;
    bypass.config.use_feature_stn = false;
    for _ in 0..10 {
        let input = PatchInput::from_points(vec![patch(&mut rng, 64, 40)]);
        let a = model.forward_sample(&input).unwrap();
        let b = bypass.forward_sample(&input).unwrap();
        for (x, y) in a.outputs().iter().zip(b.outputs()) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn multi_scale_pools_each_patch_separately() {
    // Three identical patches through shared point functions give the
    // single-scale pooled vector three times.
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let single_cfg = ModelConfig { point_functions: 48, ..small(OutputSpec::Joint, 50) };
    let mut single = PcpModel::<f64>::build(single_cfg.clone(), 4).unwrap();
    randomize(&mut single, &mut rng, 1.0);
    let fresh = PcpModel::<f64>::build(single_cfg.clone(), 4).unwrap();
    // Transformer heads at their identity initialization: the union of three
    // identical patches then transforms exactly like one patch.
    single.point_stn.as_mut().unwrap().head = fresh.point_stn.unwrap().head;
    single.feature_stn.as_mut().unwrap().head = fresh.feature_stn.unwrap().head;

    let ms_cfg = ModelConfig { scales: vec![0.01, 0.03, 0.07], ..single_cfg };
    let mut multi = PcpModel::<f64>::build(ms_cfg, 5).unwrap();
    multi.point_stn = single.point_stn.clone();
    multi.features = single.features.clone();
    multi.feature_stn = single.feature_stn.clone();
    multi.point_functions = single.point_functions.clone();

    let pts = patch(&mut rng, 50, 30);
    let a = single.forward_sample(&PatchInput::from_points(vec![pts.clone()])).unwrap();
    let b = multi.forward_sample(&PatchInput::from_points(vec![pts.clone(), pts.clone(), pts])).unwrap();
    let pa = a.pooled();
    let pb = b.pooled();
    assert_eq!(pb.len(), 3 * pa.len());
    for (i, v) in pb.iter().enumerate() {
        assert!((v - pa[i % pa.len()]).abs() <= 1e-9 * v.abs().max(1.0));
    }
}

#[test]
fn batch_gradient_is_sum_of_sample_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut model = PcpModel::<f64>::build(small(OutputSpec::Joint, 20), 6).unwrap();
    randomize(&mut model, &mut rng, 1.0);
    let inputs: Vec<PatchInput<f64>> = (0..4).map(|_| PatchInput::from_points(vec![patch(&mut rng, 20, 12)])).collect();
    let grads: Vec<OutputGrad<f64>> = (0..4)
        .map(|_| OutputGrad { raw: (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(), rotation: None })
        .collect();
    let (_, cache) = model.forward(&inputs).unwrap();
    let mut batch = model.zeros_like();
    model.backward(&cache, &grads, &mut batch).unwrap();
    let mut summed = model.zeros_like();
    for (input, g) in inputs.iter().zip(&grads) {
        let (_, c) = model.forward(std::slice::from_ref(input)).unwrap();
        let mut one = model.zeros_like();
        model.backward(&c, std::slice::from_ref(g), &mut one).unwrap();
        summed.accumulate(&one);
    }
    for ((name, a), (_, b)) in batch.params().into_iter().zip(summed.params()) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{name}");
        }
    }
}

#[test]
fn degenerate_and_repeated_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let model = PcpModel::<f32>::build(small(OutputSpec::UnorientedNormal, 30), 7).unwrap();
    let zeros = PatchInput::from_points(vec![vec![[0.0; 3]; 30]]);
    let a = model.forward_sample(&zeros).unwrap().outputs().to_vec();
    assert!(a.iter().all(|v| v.is_finite()));
    assert_eq!(a, model.forward_sample(&zeros).unwrap().outputs().to_vec());
    let input = PatchInput::from_points(vec![patch(&mut rng, 30, 30)]);
    let (out, _) = model.forward(&[input.clone(), input]).unwrap();
    assert_eq!(out[0], out[1]);
}

#[test]
fn predict_applies_inverse_rotation_and_scale() {
    let mut model = PcpModel::<f64>::build(small(OutputSpec::Joint, 10), 8).unwrap();
    // Point transformer fixed at the quaternion (0, 1, 0, 0): 180° about x.
    let head = &mut model.point_stn.as_mut().unwrap().head;
    let last = head.layers.last_mut().unwrap();
    last.weight.fill(0.0);
    last.bias.data_mut().copy_from_slice(&[0.0, 1.0, 0.0, 0.0]);
    // Regressor fixed to raw output (0, 0, 1, c1, c2).
    let last = model.regressor.layers.last_mut().unwrap();
    last.weight.fill(0.0);
    last.bias.data_mut().copy_from_slice(&[0.0, 0.0, 1.0, 0.3, -0.2]);
    let input = PatchInput::from_points(vec![vec![[0.1, 0.2, 0.3]; 10]]);
    let est = predict(&model, &[input.clone(), input], &[0.1, 0.2]).unwrap();
    let n = est[0].normal.unwrap();
    assert!((n - pcpnet::Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    let c = est[0].curvature.unwrap();
    assert!((c.k1 - 3.0).abs() < 1e-12 && (c.k2 + 2.0).abs() < 1e-12);
    let c2 = est[1].curvature.unwrap();
    assert!((c2.k1 - 0.5 * c.k1).abs() < 1e-12 && (c2.k2 - 0.5 * c.k2).abs() < 1e-12);
}

#[test]
fn forward_is_bitwise_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let a = PcpModel::<f32>::build(small(OutputSpec::Joint, 40), 9).unwrap();
    let b = PcpModel::<f32>::build(small(OutputSpec::Joint, 40), 9).unwrap();
    assert_eq!(a, b);
    let input = PatchInput::from_points(vec![patch(&mut rng, 40, 25)]);
    let x = a.forward_sample(&input).unwrap().outputs().to_vec();
    let y = b.forward_sample(&input).unwrap().outputs().to_vec();
    assert_eq!(x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}
