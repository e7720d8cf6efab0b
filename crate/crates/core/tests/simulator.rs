use num_complex::Complex64;
use qbench_core::simulator::{apply_slice, Axis, NoiseModel, PairGate, StateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn norm_is_preserved_over_many_gates() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 6;
    let mut s = StateVector::new(n).unwrap();
    for _ in 0..1000 {
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        if rng.random_bool(0.5) {
            s.apply_xx(a, b, rng.random_range(-3.0..3.0)).unwrap();
        } else {
            let axis = if rng.random_bool(0.5) { Axis::X } else { Axis::Y };
            s.apply_rot(a, axis, rng.random_range(-3.0..3.0)).unwrap();
        }
        assert!((s.norm_sqr() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn disjoint_pair_gates_commute() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut start = StateVector::new(6).unwrap();
    for q in 0..6 {
        start.apply_rot(q, Axis::Y, rng.random_range(0.0..1.5)).unwrap();
    }
    let gates = vec![
        PairGate { a: 0, b: 3, theta: 0.2 },
        PairGate { a: 1, b: 5, theta: 0.5 },
        PairGate { a: 2, b: 4, theta: 0.7 },
    ];
    let mut reversed = gates.clone();
    reversed.reverse();
    let noise = NoiseModel::noiseless();
    let mut a = start.clone();
    let mut b = start;
    apply_slice(&mut a, &gates, &noise, &mut rng, None).unwrap();
    apply_slice(&mut b, &reversed, &noise, &mut rng, None).unwrap();
    for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
        assert!((x - y).norm() <= 1e-12);
    }
}

#[test]
fn pair_state_amplitudes() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let theta = rng.random_range(-3.2..3.2);
        let mut s = StateVector::new(2).unwrap();
        s.apply_xx(0, 1, theta).unwrap();
        let want = [
            Complex64::new(theta.cos(), 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, theta.sin()),
        ];
        for (x, y) in s.amplitudes().iter().zip(want) {
            assert!((x - y).norm() <= 1e-12);
        }
    }
}
