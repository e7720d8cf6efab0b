use proptest::prelude::*;
use qbench_core::analysis::{
    compute_fuzz, mitigate, mutual_information, pair_mutual_information, random_guess_baseline,
};
use qbench_core::protocol::{run_protocol, EntanglingSlice, ProtocolSettings, Strategy as Mode};
use qbench_core::seed::{stream, RunSeeds};
use qbench_core::simulator::{measure, NoiseModel, Shots, StateVector};
use qbench_core::topology::{catalog_device, Matching};

#[test]
fn product_states_have_no_mutual_information() {
    let mut s = StateVector::new(3).unwrap();
    s.apply_rot(0, qbench_core::simulator::Axis::X, 0.4).unwrap();
    s.apply_rot(2, qbench_core::simulator::Axis::Y, 1.1).unwrap();
    let m = measure(&s, Shots::Exact, &NoiseModel::noiseless(), &mut stream(0)).unwrap();
    let t = mutual_information(3, &m.pair_joints()).unwrap();
    for row in &t.mi {
        for &v in row {
            assert!(v.abs() <= 1e-9);
        }
    }
}

#[test]
fn sampled_product_states_have_small_mutual_information() {
    let mut s = StateVector::new(2).unwrap();
    s.apply_rot(0, qbench_core::simulator::Axis::X, 0.7).unwrap();
    s.apply_rot(1, qbench_core::simulator::Axis::X, 0.5).unwrap();
    let m = measure(&s, Shots::Count(20_000), &NoiseModel::noiseless(), &mut stream(3)).unwrap();
    assert!(pair_mutual_information(&m.pair_joints()[0]) < 1e-3);
}

#[test]
fn random_guess_on_complete_16() {
    let g = catalog_device("complete_16").unwrap();
    let b = random_guess_baseline(&g, 1500, &mut stream(5)).unwrap();
    // expected 1/15 by symmetry; 1500 trials of 8 pairs
    assert!((b - 1.0 / 15.0).abs() < 0.015, "{b}");
}

#[test]
fn mitigation_never_hurts_round_one_under_readout_noise() {
    let g = catalog_device("ibmqx5").unwrap();
    let settings = ProtocolSettings { shots: Shots::Count(2000), mitigation: true, ..Default::default() };
    let noise = NoiseModel::new(0.0, 0.0, 0.05).unwrap();
    let (mut raw, mut mitigated) = (0.0, 0.0);
    let samples = 20;
    for s in 0..samples {
        let r = run_protocol(&g, 1, Mode::TruePairs, settings, noise, RunSeeds::from_master(s)).unwrap();
        raw += r[0].metrics.raw.success;
        mitigated += r[0].metrics.mitigated.unwrap().success;
    }
    assert!(mitigated >= raw, "{mitigated} < {raw}");
    assert!(mitigated / samples as f64 >= 0.95);
}

fn slice_and_probs() -> impl Strategy<Value = (EntanglingSlice, Vec<f64>)> {
    (any::<u64>(), prop::collection::vec(0.0f64..=1.0, 16)).prop_map(|(seed, p)| {
        let g = catalog_device("ladder_16").unwrap();
        (qbench_core::protocol::next_entangling_slice(&g, &mut stream(seed)), p)
    })
}

proptest! {
    #[test]
    fn fuzz_is_nonnegative_and_zero_iff_balanced((slice, p) in slice_and_probs()) {
        let f = compute_fuzz(&slice, &p).unwrap();
        prop_assert!(f >= 0.0);
        let balanced = slice.matching.pairs().iter().all(|&(j, k)| p[j] == p[k]);
        prop_assert_eq!(f == 0.0, balanced);

        let mut q = p.clone();
        for &(j, k) in slice.matching.pairs() {
            q[j] = (p[j] + p[k]) / 2.0;
            q[k] = q[j];
        }
        prop_assert_eq!(compute_fuzz(&slice, &q).unwrap(), 0.0);
    }

    #[test]
    fn fuzz_ignores_order_within_pairs((slice, p) in slice_and_probs()) {
        let mut swapped = p.clone();
        for &(j, k) in slice.matching.pairs() {
            swapped.swap(j, k);
        }
        prop_assert_eq!(compute_fuzz(&slice, &p).unwrap(), compute_fuzz(&slice, &swapped).unwrap());
    }

    #[test]
    fn mutual_partners_get_equal_mitigated_values(
        joints in prop::collection::vec(prop::array::uniform4(0.01f64..1.0), 10),
        p in prop::collection::vec(0.0f64..=1.0, 5),
    ) {
        let joints: Vec<[f64; 4]> = joints
            .into_iter()
            .map(|j| {
                let t: f64 = j.iter().sum();
                j.map(|x| x / t)
            })
            .collect();
        let t = mutual_information(5, &joints).unwrap();
        for j in 0..5 {
            for k in 0..5 {
                prop_assert!(t.mi[j][k] >= 0.0);
                prop_assert!((t.mi[j][k] - t.mi[k][j]).abs() <= 1e-12);
            }
        }
        let pbar = mitigate(&p, &t).unwrap();
        for j in 0..5 {
            let c = t.partner[j];
            if t.partner[c] == j {
                prop_assert_eq!(pbar[j], pbar[c]);
            }
        }
    }
}

#[test]
fn empty_slice_has_no_fuzz() {
    let slice = EntanglingSlice { matching: Matching::empty(3), angles: vec![] };
    assert!(compute_fuzz(&slice, &[0.0; 3]).is_err());
}
