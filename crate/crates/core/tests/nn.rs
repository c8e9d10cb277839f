mod common;

use common::{gradient_check, random_spec, scalar_forward};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resalloc_core::nn::{
    adam_step, argmax, backward, forward, forward_one, noise_fn, AdamConfig, Checkpoint, Head, LayerKind, LayerParams,
    NetworkParams, NetworkSpec, NoiseSample,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The same weights with every noisy layer turned into a plain one.
fn strip_noise(spec: &NetworkSpec, params: &NetworkParams) -> (NetworkSpec, NetworkParams) {
    let mut plain = spec.clone();
    plain.trunk.iter_mut().for_each(|l| l.kind = LayerKind::Linear);
    plain.head_kind = LayerKind::Linear;
    let layers = params
        .layers
        .iter()
        .map(|l| LayerParams { weight: l.weight.clone(), bias: l.bias.clone(), sigma_weight: None, sigma_bias: None })
        .collect();
    (plain, NetworkParams::from_layers(layers))
}

#[test]
fn gradients_match_central_differences() {
    for seed in 0..100 {
        let err = gradient_check(seed, 1e-5);
        assert!(err < 1e-4, "configuration {seed}: relative error {err}");
    }
}

#[test]
fn zero_noise_equals_mean_network() {
    let mut r = rng(1);
    for _ in 0..50 {
        let spec = random_spec(&mut r);
        let params = NetworkParams::init(&spec, 0.5, &mut r);
        let (plain_spec, plain) = strip_noise(&spec, &params);
        let zeros = NoiseSample::zeros(&spec);
        let x = Array2::from_shape_fn((20, spec.input_dim), |_| r.random_range(-2.0..2.0));
        let noisy = forward(&params, &spec, x.view(), Some(&zeros)).unwrap();
        let mean = forward(&plain, &plain_spec, x.view(), None).unwrap();
        assert_eq!(noisy, mean);
        assert_eq!(forward(&params, &spec, x.view(), None).unwrap(), mean);
    }
}

#[test]
fn batched_forward_agrees_with_scalar_reference() {
    let mut r = rng(2);
    for _ in 0..50 {
        let spec = random_spec(&mut r);
        let params = NetworkParams::init(&spec, 0.5, &mut r);
        let dueling = matches!(spec.head, Head::Dueling { .. });
        let x: Vec<f64> = (0..spec.input_dim).map(|_| r.random_range(-2.0..2.0)).collect();
        let q = forward_one(&params, &spec, &x, None).unwrap();
        for (a, b) in q.iter().zip(scalar_forward(&params, dueling, &x)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn dueling_argmax_ignores_advantage_bias_shift() {
    let mut r = rng(3);
    let spec = NetworkSpec::mlp(23, &[64, 64], Head::Dueling { num_actions: 11 }, true);
    let params = NetworkParams::init(&spec, 0.5, &mut r);
    let adv = spec.advantage_layer().unwrap();
    let obs: Vec<Vec<f64>> = (0..1000).map(|_| (0..23).map(|_| r.random::<f64>()).collect()).collect();
    for c in [-10.0, 1.0, 1e3] {
        let mut shifted = params.clone_params();
        shifted.layers[adv].bias += c;
        for o in &obs {
            let a = argmax(forward_one(&params, &spec, o, None).unwrap().view());
            let b = argmax(forward_one(&shifted, &spec, o, None).unwrap().view());
            assert_eq!(a, b);
        }
    }
}

#[test]
fn noise_factors_have_expected_moments() {
    // E f(eps) = 0 and E f(eps)^2 = E|eps| = sqrt(2 / pi).
    let mut r = rng(4);
    let n = 200_000;
    let spec = NetworkSpec::mlp(1, &[], Head::Single { num_actions: 1 }, true);
    let (mut m1, mut m2) = (0.0, 0.0);
    for _ in 0..n / 2 {
        let s = NoiseSample::sample(&spec, &mut r);
        let f = s.layers[0].as_ref().unwrap();
        for e in [f.eps_in[0], f.eps_out[0]] {
            m1 += noise_fn(e);
            m2 += noise_fn(e).powi(2);
        }
    }
    let (m1, m2) = (m1 / n as f64, m2 / n as f64);
    let expected = (2.0 / std::f64::consts::PI).sqrt();
    // Standard errors are about 0.0018 for m1 and 0.0013 for m2.
    assert!(m1.abs() < 0.01, "mean {m1}");
    assert!((m2 - expected).abs() < 0.01, "second moment {m2}");
}

#[test]
fn noisy_linear_head_is_unbiased() {
    let mut r = rng(5);
    let spec = NetworkSpec::mlp(4, &[], Head::Single { num_actions: 3 }, true);
    let params = NetworkParams::init(&spec, 0.5, &mut r);
    let x = [0.3, -0.7, 1.1, 0.2];
    let mean_q = forward_one(&params, &spec, &x, None).unwrap();
    let n = 20_000;
    let mut acc = Array1::<f64>::zeros(3);
    for _ in 0..n {
        let noise = NoiseSample::sample(&spec, &mut r);
        acc += &forward_one(&params, &spec, &x, Some(&noise)).unwrap();
    }
    acc /= n as f64;
    for (a, b) in acc.iter().zip(mean_q.iter()) {
        assert!((a - b).abs() < 0.02, "{a} vs {b}");
    }
}

#[test]
fn noisy_forward_changes_with_noise() {
    let mut r = rng(6);
    let spec = NetworkSpec::mlp(5, &[8], Head::Dueling { num_actions: 4 }, true);
    let params = NetworkParams::init(&spec, 0.5, &mut r);
    let x = [0.1, 0.2, 0.3, 0.4, 0.5];
    let a = forward_one(&params, &spec, &x, Some(&NoiseSample::sample(&spec, &mut r))).unwrap();
    let b = forward_one(&params, &spec, &x, Some(&NoiseSample::sample(&spec, &mut r))).unwrap();
    assert_ne!(a, b);
}

#[test]
fn adam_descends_a_quadratic() {
    // Fit Q(x) = target for a single input; loss must fall steadily.
    let mut r = rng(7);
    let spec = NetworkSpec::mlp(3, &[6], Head::Single { num_actions: 2 }, false);
    let mut params = NetworkParams::init(&spec, 0.5, &mut r);
    let x = Array2::from_shape_vec((1, 3), vec![0.5, -0.2, 0.9]).unwrap();
    let target = Array2::from_shape_vec((1, 2), vec![1.5, -0.5]).unwrap();
    let loss = |p: &NetworkParams| (forward(p, &spec, x.view(), None).unwrap() - &target).mapv(|v| v * v).sum();
    let start = loss(&params);
    let cfg = AdamConfig { lr: 0.01, ..AdamConfig::default() };
    for _ in 0..500 {
        let q = forward(&params, &spec, x.view(), None).unwrap();
        let g = (q - &target) * 2.0;
        let grads = backward(&params, &spec, x.view(), None, g.view()).unwrap();
        adam_step(&mut params, &grads, &cfg).unwrap();
    }
    assert!(loss(&params) < start * 1e-3, "{start} -> {}", loss(&params));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let mut r = rng(8);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..20 {
        let spec = random_spec(&mut r);
        let params = NetworkParams::init(&spec, 0.5, &mut r);
        let path = dir.path().join(format!("net{i}.json"));
        Checkpoint::from_params(&params).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap().to_params(&spec).unwrap();
        assert!(back.weights_equal(&params));
    }
}
