use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resalloc_core::nn::{backward, forward, Head, NetworkParams, NetworkSpec, NoiseSample};
use resalloc_core::replay::PrioritizedMemory;
use resalloc_core::{make_agent, AgentOverrides, EnvConfig, ResourceEnv, Transition};

fn transition(rng: &mut ChaCha8Rng, dim: usize) -> Transition {
    Transition {
        state: (0..dim).map(|_| rng.random()).collect(),
        action: rng.random_range(0..11),
        reward: -(rng.random_range(0..5) as f64),
        next_state: (0..dim).map(|_| rng.random()).collect(),
        terminal: false,
    }
}

fn env_step(c: &mut Criterion) {
    let mut env = ResourceEnv::new(EnvConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("env_step", |b| {
        b.iter(|| {
            if env.is_done() {
                env.reset(rng.random());
            }
            black_box(env.step(rng.random_range(0..=10)).unwrap())
        })
    });
}

fn network(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = NetworkSpec::mlp(23, &[64, 64], Head::Dueling { num_actions: 11 }, true);
    let params = NetworkParams::init(&spec, 0.5, &mut rng);
    let x = Array2::from_shape_fn((32, 23), |_| rng.random::<f64>());
    let g = Array2::from_shape_fn((32, 11), |_| rng.random::<f64>());
    let noise = NoiseSample::sample(&spec, &mut rng);
    c.bench_function("forward_batch32_noisy_dueling", |b| {
        b.iter(|| black_box(forward(&params, &spec, x.view(), Some(&noise)).unwrap()))
    });
    c.bench_function("backward_batch32_noisy_dueling", |b| {
        b.iter(|| black_box(backward(&params, &spec, x.view(), Some(&noise), g.view()).unwrap()))
    });
}

fn prioritized_sampling(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mem = PrioritizedMemory::new(10_000, 0.6, 1e-6);
    for _ in 0..10_000 {
        let slot = mem.push(transition(&mut rng, 23));
        mem.update_priorities(&[slot], &[rng.random_range(0.0..5.0)]).unwrap();
    }
    c.bench_function("per_sample_batch32", |b| b.iter(|| black_box(mem.sample(32, 0.4, &mut rng).unwrap())));
    c.bench_function("per_update_batch32", |b| {
        let slots: Vec<usize> = (0..32).map(|_| rng.random_range(0..10_000)).collect();
        let td: Vec<f64> = (0..32).map(|_| rng.random_range(0.0..5.0)).collect();
        b.iter(|| mem.update_priorities(black_box(&slots), black_box(&td)).unwrap())
    });
}

fn learn_step(c: &mut Criterion) {
    let env = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for variant in [1u8, 8] {
        let mut agent = make_agent(variant, &env, &AgentOverrides::default()).unwrap();
        for _ in 0..1_000 {
            agent.observe(transition(&mut rng, env.observation_len()));
        }
        c.bench_function(&format!("learn_step_variant{variant}"), |b| {
            b.iter_batched_ref(|| agent.clone(), |a| black_box(a.learn_step().unwrap()), BatchSize::LargeInput)
        });
    }
}

criterion_group!(benches, env_step, network, prioritized_sampling, learn_step);
criterion_main!(benches);
