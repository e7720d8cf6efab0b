use std::f64::consts::FRAC_PI_4;

use qbench_core::backend::simulate;
use qbench_core::protocol::{
    build_inverse, next_entangling_slice, run_protocol, InverseOptions, ProtocolRunner, ProtocolSettings,
    Strategy, THETA_MAX, THETA_MIN,
};
use qbench_core::seed::{stream, RunSeeds};
use qbench_core::simulator::{NoiseModel, Shots};
use qbench_core::topology::catalog_device;

fn exact() -> ProtocolSettings {
    ProtocolSettings::default()
}

#[test]
fn slice_angles_are_uniform_in_range() {
    let g = catalog_device("line_2").unwrap();
    let mut rng = stream(1);
    let mut angles = Vec::new();
    for _ in 0..10_000 {
        let s = next_entangling_slice(&g, &mut rng);
        assert_eq!(s.matching.pairs(), &[(0, 1)]);
        angles.extend(s.angles);
    }
    let min = angles.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = angles.iter().cloned().fold(0.0, f64::max);
    assert!(min >= THETA_MIN && max <= THETA_MAX);
    let mean = angles.iter().sum::<f64>() / angles.len() as f64;
    let sigma = (THETA_MAX - THETA_MIN) / 12f64.sqrt() / (angles.len() as f64).sqrt();
    assert!((mean - (THETA_MIN + THETA_MAX) / 2.0).abs() <= 3.0 * sigma);
    assert!((mean - 0.432).abs() < 0.01);
}

#[test]
fn slices_are_reproducible() {
    let g = catalog_device("ibmqx5").unwrap();
    assert_eq!(
        next_entangling_slice(&g, &mut stream(5)),
        next_entangling_slice(&g, &mut stream(5))
    );
}

#[test]
fn true_pairs_recovers_round_one_angles() {
    let g = catalog_device("ladder_10").unwrap();
    let records = run_protocol(&g, 1, Strategy::TruePairs, exact(), NoiseModel::noiseless(), RunSeeds::from_master(3))
        .unwrap();
    let r = &records[0];
    let inv = r.inverse.as_ref().unwrap();
    assert_eq!(inv.assumed_matching, r.entangling.matching);
    for (got, want) in inv.assumed_angles.iter().zip(&r.entangling.angles) {
        assert!((got - want).abs() <= 1e-12);
    }
}

#[test]
fn random_pairs_ignores_data() {
    let g = catalog_device("complete_4").unwrap();
    let slice = next_entangling_slice(&g, &mut stream(0));
    let opts = InverseOptions::default();
    let a = build_inverse(&g, &slice, &[0.1, 0.2, 0.3, 0.4], Strategy::RandomPairs, None, opts, &mut stream(9))
        .unwrap();
    let b = build_inverse(&g, &slice, &[0.4, 0.3, 0.2, 0.1], Strategy::RandomPairs, None, opts, &mut stream(9))
        .unwrap();
    assert_eq!(a.assumed_matching, b.assumed_matching);
}

#[test]
fn perfect_inversion_returns_to_ground_state() {
    let g = catalog_device("ibmqx4").unwrap();
    let mut runner =
        ProtocolRunner::local(g, exact(), NoiseModel::noiseless(), RunSeeds::from_master(11)).unwrap();
    for _ in 0..8 {
        let rec = runner.begin_round().unwrap();
        assert!(rec.metrics.raw.fuzz <= 1e-9);
        assert!(rec.metrics.raw.diff <= 1e-9);
        assert_eq!(rec.metrics.raw.success, 1.0);
        runner.complete_round(Strategy::TruePairs, None).unwrap();
        let state = simulate(runner.circuit(), &NoiseModel::noiseless(), &mut stream(0)).unwrap();
        assert!((state.amplitudes()[0].norm_sqr() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn single_round_has_no_inverse_in_its_circuit() {
    let g = catalog_device("line_2").unwrap();
    let records = run_protocol(&g, 1, Strategy::MwpmPairs, exact(), NoiseModel::noiseless(), RunSeeds::from_master(2))
        .unwrap();
    assert_eq!(records.len(), 1);
    let theta = records[0].entangling.angles[0];
    for p in &records[0].p_tilde {
        assert!((p - theta.sin().powi(2)).abs() <= 1e-12);
    }
}

#[test]
fn unpaired_qubits_read_zero_in_round_one() {
    for name in ["line_5", "ibmqx4", "19Q-Acorn", "complete_5"] {
        let g = catalog_device(name).unwrap();
        let records =
            run_protocol(&g, 1, Strategy::TruePairs, exact(), NoiseModel::noiseless(), RunSeeds::from_master(4))
                .unwrap();
        let r = &records[0];
        for &q in r.entangling.matching.unpaired() {
            assert!(r.p_tilde[q].abs() <= 1e-15, "{name} qubit {q}");
        }
        for &(j, k) in r.entangling.matching.pairs() {
            assert!((r.p_tilde[j] - r.p_tilde[k]).abs() <= 1e-15);
        }
    }
}

#[test]
fn replay_is_deterministic() {
    let g = catalog_device("ladder_10").unwrap();
    let settings = ProtocolSettings {
        shots: Shots::Count(200),
        mitigation: true,
        ..exact()
    };
    let noise = NoiseModel::typical();
    let a = run_protocol(&g, 4, Strategy::MwpmPairs, settings, noise, RunSeeds::from_master(6)).unwrap();
    let b = run_protocol(&g, 4, Strategy::MwpmPairs, settings, noise, RunSeeds::from_master(6)).unwrap();
    assert_eq!(a, b);
    let c = run_protocol(&g, 4, Strategy::MwpmPairs, settings, noise, RunSeeds::from_master(7)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn strategies_share_the_circuit_stream() {
    let g = catalog_device("square_9").unwrap();
    let seeds = |s: Strategy| RunSeeds::for_sample(1, 0, s.id());
    let t = run_protocol(&g, 3, Strategy::TruePairs, exact(), NoiseModel::noiseless(), seeds(Strategy::TruePairs))
        .unwrap();
    let r = run_protocol(&g, 3, Strategy::RandomPairs, exact(), NoiseModel::noiseless(), seeds(Strategy::RandomPairs))
        .unwrap();
    for (a, b) in t.iter().zip(&r) {
        assert_eq!(a.entangling, b.entangling);
        assert_eq!(a.conjugation, b.conjugation);
    }
}

#[test]
fn maximal_angle_pair_reads_half() {
    let g = catalog_device("line_2").unwrap();
    let mut runner = ProtocolRunner::local(g, exact(), NoiseModel::noiseless(), RunSeeds::from_master(0)).unwrap();
    let rec = runner.begin_round().unwrap();
    assert!(rec.entangling.angles[0] <= FRAC_PI_4);
    assert!(rec.p_tilde[0] <= 0.5 + 1e-15);
}

#[test]
fn zero_rounds_and_player_strategy_rejected() {
    let g = catalog_device("line_2").unwrap();
    let seeds = RunSeeds::from_master(0);
    assert!(run_protocol(&g, 0, Strategy::TruePairs, exact(), NoiseModel::noiseless(), seeds).is_err());
    assert!(run_protocol(&g, 1, Strategy::PlayerPairs, exact(), NoiseModel::noiseless(), seeds).is_err());
}
