mod common;

use common::{chi_square_p, dummy_transition, prioritized_counts};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resalloc_core::replay::{BootstrapMemory, PrioritizedMemory, SumTree, UniformMemory};

#[derive(Debug, Clone)]
enum Op {
    Push,
    Update(usize, f64),
}

fn ops() -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![Just(Op::Push), (any::<usize>(), -50.0f64..50.0).prop_map(|(s, d)| Op::Update(s, d))],
        1..400,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn root_tracks_leaf_sum(capacity in 1usize..40, script in ops()) {
        let mut mem = PrioritizedMemory::new(capacity, 0.6, 1e-6);
        let mut shadow = vec![0.0f64; capacity];
        let mut max_p = 1.0f64;
        for op in script {
            match op {
                Op::Push => {
                    let slot = mem.push(dummy_transition(0));
                    shadow[slot] = max_p;
                }
                Op::Update(s, d) if !mem.is_empty() => {
                    let slot = s % mem.len();
                    mem.update_priorities(&[slot], &[d]).unwrap();
                    shadow[slot] = (d.abs() + 1e-6).powf(0.6);
                    max_p = max_p.max(shadow[slot]);
                }
                Op::Update(..) => {}
            }
            let sum: f64 = shadow.iter().sum();
            let root = mem.tree().total();
            prop_assert!((root - sum).abs() <= 1e-9 * sum.max(1e-300), "root {} vs {}", root, sum);
            prop_assert!((root - mem.tree().leaf_sum()).abs() <= 1e-9 * root.max(1e-300));
            prop_assert_eq!(mem.max_priority(), max_p);
        }
    }

    #[test]
    fn ring_keeps_newest_in_order(capacity in 1usize..30, pushes in 0usize..100) {
        let mut mem = UniformMemory::new(capacity);
        for i in 0..pushes {
            mem.push(dummy_transition(i));
        }
        prop_assert_eq!(mem.len(), pushes.min(capacity));
        let kept: Vec<usize> = mem.slots_in_order().map(|s| mem.get(s).action).collect();
        let expected: Vec<usize> = (pushes.saturating_sub(capacity)..pushes).collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn masks_are_immutable(heads in 1usize..64, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mem = BootstrapMemory::new(50, heads, p).unwrap();
        let mut first = Vec::new();
        for i in 0..30 {
            let slot = mem.push(dummy_transition(i), &mut rng);
            first.push(mem.mask(slot));
        }
        for _ in 0..5 {
            mem.sample_for_head(0, 1, &mut rng);
        }
        for (slot, &m) in first.iter().enumerate() {
            prop_assert_eq!(mem.mask(slot), m);
            prop_assert_eq!(m >> heads, 0);
        }
    }
}

#[test]
fn find_uses_cumulative_bounds() {
    let mut tree = SumTree::new(4);
    for (i, p) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
        tree.set(i, p);
    }
    assert_eq!(tree.total(), 10.0);
    assert_eq!(tree.find(4.5), 2);
    assert_eq!(tree.find(0.5), 0);
    assert_eq!(tree.find(1.0), 1);
    assert_eq!(tree.find(9.99), 3);
}

#[test]
fn sampling_is_proportional_to_priority() {
    let mut mem = PrioritizedMemory::new(3, 1.0, 0.0);
    for i in 0..3 {
        mem.push(dummy_transition(i));
    }
    mem.update_priorities(&[0, 1, 2], &[1.0, 1.0, 2.0]).unwrap();
    let counts = prioritized_counts(&mem, 100_000, 32, 1);
    let p = chi_square_p(&counts, &[1.0, 1.0, 2.0]);
    assert!(p > 0.01, "p = {p}, counts {counts:?}");
}

#[test]
fn sixteen_leaf_proportionality() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mem = PrioritizedMemory::new(16, 0.6, 1e-6);
    for i in 0..16 {
        mem.push(dummy_transition(i));
    }
    let td: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..5.0)).collect();
    mem.update_priorities(&(0..16).collect::<Vec<_>>(), &td).unwrap();
    let weights: Vec<f64> = (0..16).map(|s| mem.priority(s)).collect();
    let counts = prioritized_counts(&mem, 100_000, 32, 3);
    let p = chi_square_p(&counts, &weights);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn importance_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mem = PrioritizedMemory::new(8, 0.6, 1e-6);
    for i in 0..8 {
        mem.push(dummy_transition(i));
    }
    // Uniform priorities and beta = 1: every weight is exactly 1.
    assert!(mem.sample(16, 1.0, &mut rng).unwrap().iter().all(|s| s.weight == 1.0));

    // Single nonzero leaf: always drawn, normalized weight 1.
    let mut single = PrioritizedMemory::new(4, 1.0, 0.0);
    for i in 0..4 {
        single.push(dummy_transition(i));
    }
    single.update_priorities(&[0, 1, 2, 3], &[0.0, 0.0, 3.0, 0.0]).unwrap();
    for s in single.sample(10, 0.7, &mut rng).unwrap() {
        assert_eq!((s.slot, s.weight), (2, 1.0));
    }

    // Weights follow (N * P)^-beta over the batch maximum.
    mem.update_priorities(&[0, 1, 2, 3, 4, 5, 6, 7], &[0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let total = mem.tree().total();
    let beta = 0.5;
    let batch = mem.sample(32, beta, &mut rng).unwrap();
    let raw: Vec<f64> = batch.iter().map(|s| (8.0 * mem.priority(s.slot) / total).powf(-beta)).collect();
    let max = raw.iter().cloned().fold(0.0, f64::max);
    for (s, r) in batch.iter().zip(raw) {
        assert!((s.weight - r / max).abs() < 1e-12);
    }
}

#[test]
fn alpha_zero_makes_priorities_uniform() {
    let mut mem = PrioritizedMemory::new(4, 0.0, 1e-6);
    for i in 0..4 {
        mem.push(dummy_transition(i));
    }
    mem.update_priorities(&[0, 1, 2, 3], &[0.0, 1.0, 10.0, 100.0]).unwrap();
    assert!((0..4).all(|s| mem.priority(s) == 1.0));
    assert_eq!(PrioritizedMemory::new(1, 0.6, 1e-6).priority_for(0.0), 1e-6f64.powf(0.6));
}

#[test]
fn non_finite_td_error_is_numeric() {
    let mut mem = PrioritizedMemory::new(2, 0.6, 1e-6);
    mem.push(dummy_transition(0));
    let err = mem.update_priorities(&[0], &[f64::NAN]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn uniform_draws_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mem = UniformMemory::new(10);
    for i in 0..4 {
        mem.push(dummy_transition(i));
    }
    assert!(mem.sample_uniform(5, &mut rng).is_none());
    let mut counts = [0u64; 4];
    for _ in 0..25_000 {
        let batch = mem.sample_uniform(4, &mut rng).unwrap();
        assert_eq!(batch.len(), 4);
        batch.iter().for_each(|&s| counts[s] += 1);
    }
    for c in counts {
        assert!((c as f64 / 100_000.0 - 0.25).abs() < 0.01);
    }
}

#[test]
fn head_batches_respect_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mem = BootstrapMemory::new(100, 2, 0.5).unwrap();
    mem.push_with_mask(dummy_transition(0), 0b01);
    mem.push_with_mask(dummy_transition(1), 0b10);
    for _ in 0..1000 {
        assert_eq!(mem.sample_for_head(0, 1, &mut rng).unwrap(), vec![0]);
        assert_eq!(mem.sample_for_head(1, 1, &mut rng).unwrap(), vec![1]);
    }

    let mut mem = BootstrapMemory::new(100, 5, 0.5).unwrap();
    for i in 0..100 {
        mem.push(dummy_transition(i), &mut rng);
    }
    for head in 0..5 {
        for _ in 0..2000 {
            for slot in mem.sample_for_head(head, 5, &mut rng).unwrap() {
                assert_eq!(mem.mask(slot) >> head & 1, 1);
            }
        }
    }
}

#[test]
fn full_mask_probability_matches_uniform_eligibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mem = BootstrapMemory::new(20, 3, 1.0).unwrap();
    for i in 0..20 {
        let slot = mem.push(dummy_transition(i), &mut rng);
        assert_eq!(mem.mask(slot), 0b111);
    }
    assert!((0..3).all(|k| mem.eligible_count(k) == 20));
}
