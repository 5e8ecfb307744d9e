use num_complex::Complex64;
use proptest::prelude::*;

use super::gate::{self, GateKind};
use super::*;

fn q(n: u64) -> QubitLabel {
    QubitLabel(n)
}

fn bell_phi_plus() -> StateVector {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    StateVector::from_amplitudes(vec![
        Complex64::new(r, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(r, 0.0),
    ])
    .unwrap()
}

fn plus_state() -> StateVector {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    StateVector::from_amplitudes(vec![Complex64::new(r, 0.0), Complex64::new(r, 0.0)]).unwrap()
}

fn bell_dm() -> DensityMatrix {
    let rho = DensityMatrix::new_register(2).unwrap();
    let rho = rho.apply_gate(&gate::h(q(0))).unwrap();
    rho.apply_gate(&gate::cnot(q(0), q(1))).unwrap()
}

#[test]
fn new_register_single_qubit() {
    let rho = DensityMatrix::new_register(1).unwrap();
    assert_eq!(rho.dim(), 2);
    assert!((rho.entry(0, 0).re - 1.0).abs() < 1e-15);
    assert!(rho.entry(1, 1).norm() < 1e-15);
}

#[test]
fn new_register_two_qubits() {
    let rho = DensityMatrix::new_register(2).unwrap();
    assert_eq!(rho.dim(), 4);
    for r in 0..4 {
        for c in 0..4 {
            let expect = if r == 0 && c == 0 { 1.0 } else { 0.0 };
            assert!((rho.entry(r, c).re - expect).abs() < 1e-15);
            assert!(rho.entry(r, c).im.abs() < 1e-15);
        }
    }
}

#[test]
fn new_register_cap_enforced() {
    let err = DensityMatrix::new_register(13).unwrap_err();
    assert!(matches!(
        err,
        EngineError::ResourceLimit {
            requested: 13,
            cap: 12
        }
    ));
}

#[test]
fn hadamard_gives_plus() {
    let rho = DensityMatrix::new_register(1).unwrap();
    let rho = rho.apply_gate(&gate::h(q(0))).unwrap();
    assert!((rho.fidelity(&plus_state()).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn bell_construction() {
    let rho = bell_dm();
    assert!((rho.fidelity(&bell_phi_plus()).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn x_is_involution() {
    let rho = bell_dm();
    let back = rho
        .apply_gate(&gate::x(q(1)))
        .unwrap()
        .apply_gate(&gate::x(q(1)))
        .unwrap();
    assert!(rho.max_abs_diff(&back).unwrap() < 1e-12);
}

#[test]
fn unknown_target_rejected() {
    let rho = DensityMatrix::new_register(1).unwrap();
    let err = rho.apply_gate(&gate::h(q(5))).unwrap_err();
    assert!(matches!(err, EngineError::Address(_)));
}

#[test]
fn depolarizing_full_strength() {
    // p=1 maps |0><0| to (X rho X + Y rho Y + Z rho Z)/3 = diag(1/3, 2/3):
    // X and Z each contribute one diagonal, Y contributes |1><1|.
    let rho = DensityMatrix::new_register(1).unwrap();
    let out = rho
        .apply_channel(NoiseChannel::Depolarizing { p: 1.0 }, &[q(0)])
        .unwrap();
    assert!((out.entry(0, 0).re - 1.0 / 3.0).abs() < 1e-12);
    assert!((out.entry(1, 1).re - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn depolarizing_zero_is_identity() {
    let rho = bell_dm();
    let out = rho
        .apply_channel(NoiseChannel::Depolarizing { p: 0.0 }, &[q(0)])
        .unwrap();
    assert!(rho.max_abs_diff(&out).unwrap() < 1e-15);
}

#[test]
fn depolarizing_three_quarters_reaches_fixed_point() {
    let rho = DensityMatrix::new_register(1).unwrap();
    let out = rho
        .apply_channel(NoiseChannel::Depolarizing { p: 0.75 }, &[q(0)])
        .unwrap();
    assert!((out.entry(0, 0).re - 0.5).abs() < 1e-12);
    assert!((out.entry(1, 1).re - 0.5).abs() < 1e-12);
    assert!(out.entry(0, 1).norm() < 1e-12);
}

#[test]
fn werner_source_resets_pair() {
    let rho = bell_dm();
    let out = rho
        .apply_channel(NoiseChannel::WernerSource { f_link: 0.9 }, &[q(0), q(1)])
        .unwrap();
    assert!((out.fidelity(&bell_phi_plus()).unwrap() - 0.9).abs() < 1e-12);
    assert_eq!(out.qubit_order(), rho.qubit_order());
}

#[test]
fn measure_plus_forced_zero() {
    let rho = DensityMatrix::new_register(1)
        .unwrap()
        .apply_gate(&gate::h(q(0)))
        .unwrap();
    let (outcome, prob, post) = rho.measure_z(q(0), OutcomeSelect::Forced(false)).unwrap();
    assert!(!outcome);
    assert!((prob - 0.5).abs() < 1e-12);
    assert!((post.entry(0, 0).re - 1.0).abs() < 1e-12);
}

#[test]
fn measure_zero_forced_one_impossible() {
    let rho = DensityMatrix::new_register(1).unwrap();
    let err = rho
        .measure_z(q(0), OutcomeSelect::Forced(true))
        .unwrap_err();
    assert!(matches!(err, EngineError::ImpossibleBranch(_)));
}

#[test]
fn measure_bell_collapses_both() {
    let rho = bell_dm();
    let (_, prob, post) = rho.measure_z(q(0), OutcomeSelect::Forced(false)).unwrap();
    assert!((prob - 0.5).abs() < 1e-12);
    assert!((post.entry(0, 0).re - 1.0).abs() < 1e-12);
    for i in 1..4 {
        assert!(post.entry(i, i).norm() < 1e-12);
    }
}

#[test]
fn forced_branch_probabilities_sum_to_one() {
    let rho = bell_dm()
        .apply_channel(NoiseChannel::Depolarizing { p: 0.3 }, &[q(1)])
        .unwrap();
    let (_, p0, _) = rho.measure_z(q(1), OutcomeSelect::Forced(false)).unwrap();
    let (_, p1, _) = rho.measure_z(q(1), OutcomeSelect::Forced(true)).unwrap();
    assert!((p0 + p1 - 1.0).abs() < 1e-12);
}

#[test]
fn partial_trace_of_bell_is_mixed() {
    let rho = bell_dm();
    let red = rho.partial_trace(&[q(0)]).unwrap();
    assert!((red.entry(0, 0).re - 0.5).abs() < 1e-12);
    assert!((red.entry(1, 1).re - 0.5).abs() < 1e-12);
    assert!(red.entry(0, 1).norm() < 1e-12);
}

#[test]
fn partial_trace_keep_all_is_identity() {
    let rho = bell_dm();
    let red = rho.partial_trace(&[q(0), q(1)]).unwrap();
    assert!(rho.max_abs_diff(&red).unwrap() < 1e-15);
}

#[test]
fn partial_trace_of_product_keeps_factor() {
    let zero = DensityMatrix::zero_state(&[q(0)]).unwrap();
    let plus = DensityMatrix::from_pure(&[q(1)], &plus_state()).unwrap();
    let joint = zero.tensor(&plus).unwrap();
    let red = joint.partial_trace(&[q(1)]).unwrap();
    assert!(red.max_abs_diff(&plus).unwrap() < 1e-12);
}

#[test]
fn fidelity_of_exact_target_is_one() {
    let rho = DensityMatrix::from_pure(&[q(0), q(1)], &bell_phi_plus()).unwrap();
    assert!((rho.fidelity(&bell_phi_plus()).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn fidelity_of_maximally_mixed_two_qubit() {
    let mut rho = DensityMatrix::new_register(2).unwrap();
    // I/4 via full depolarizing of both qubits
    rho = rho
        .apply_channel(NoiseChannel::Depolarizing { p: 0.75 }, &[q(0)])
        .unwrap()
        .apply_channel(NoiseChannel::Depolarizing { p: 0.75 }, &[q(1)])
        .unwrap();
    assert!((rho.fidelity(&bell_phi_plus()).unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn fidelity_of_werner_pair() {
    let rho = DensityMatrix::werner_pair([q(0), q(1)], 0.95).unwrap();
    assert!((rho.fidelity(&bell_phi_plus()).unwrap() - 0.95).abs() < 1e-12);
}

#[test]
fn werner_pair_matches_bell_basis_mixture() {
    // independent construction: F P(Phi+) + (1-F)/3 (P(Phi-) + P(Psi+) + P(Psi-))
    let f = 0.95;
    let w = (1.0 - f) / 3.0;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let basis = [
        (f, [r, 0.0, 0.0, r]),  // Phi+
        (w, [r, 0.0, 0.0, -r]), // Phi-
        (w, [0.0, r, r, 0.0]),  // Psi+
        (w, [0.0, r, -r, 0.0]), // Psi-
    ];
    let mut mix = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (weight, amps) in basis {
        for (row, mix_row) in mix.iter_mut().enumerate() {
            for (col, entry) in mix_row.iter_mut().enumerate() {
                *entry += weight * amps[row] * amps[col];
            }
        }
    }
    let rho = DensityMatrix::werner_pair([q(0), q(1)], f).unwrap();
    for (r_idx, mix_row) in mix.iter().enumerate() {
        for (c_idx, expected) in mix_row.iter().enumerate() {
            assert!(
                (rho.entry(r_idx, c_idx) - expected).norm() < 1e-15,
                "entry ({r_idx},{c_idx})"
            );
        }
    }
}

#[test]
fn phase_gate_squares() {
    // S^2 = Z and T^2 = S on density matrices (global phases cancel)
    let rho = DensityMatrix::new_register(1)
        .unwrap()
        .apply_gate(&gate::h(q(0)))
        .unwrap();
    let s = |r: &DensityMatrix| {
        r.apply_gate(&GateOp::new(GateKind::S, vec![q(0)]).unwrap())
            .unwrap()
    };
    let t = |r: &DensityMatrix| {
        r.apply_gate(&GateOp::new(GateKind::T, vec![q(0)]).unwrap())
            .unwrap()
    };
    let ss = s(&s(&rho));
    let z = rho.apply_gate(&gate::z(q(0))).unwrap();
    assert!(ss.max_abs_diff(&z).unwrap() < 1e-12);
    let tt = t(&t(&rho));
    assert!(tt.max_abs_diff(&s(&rho)).unwrap() < 1e-12);
}

#[test]
fn fidelity_dimension_mismatch() {
    let rho = DensityMatrix::new_register(1).unwrap();
    let err = rho.fidelity(&bell_phi_plus()).unwrap_err();
    assert!(matches!(err, EngineError::Shape(_)));
}

#[test]
fn entropy_of_pure_state_is_zero() {
    let rho = bell_dm();
    assert!(rho.entropy() < 1e-9);
}

#[test]
fn entropy_of_maximally_mixed_qubit() {
    let rho = DensityMatrix::new_register(1)
        .unwrap()
        .apply_channel(NoiseChannel::Depolarizing { p: 0.75 }, &[q(0)])
        .unwrap();
    assert!((rho.entropy() - 1.0).abs() < 1e-12);
}

#[test]
fn entropy_of_werner_matches_closed_form() {
    // Spectrum of Werner(F) is {F, (1-F)/3 x3}.
    let f: f64 = 0.95;
    let w = (1.0 - f) / 3.0;
    let expected = -f * f.log2() - 3.0 * w * w.log2();
    let rho = DensityMatrix::werner_pair([q(0), q(1)], f).unwrap();
    assert!((rho.entropy() - expected).abs() < 1e-9);
}

#[test]
fn tensor_of_zero_states() {
    let a = DensityMatrix::zero_state(&[q(0)]).unwrap();
    let b = DensityMatrix::zero_state(&[q(1)]).unwrap();
    let joint = a.tensor(&b).unwrap();
    assert_eq!(joint.dim(), 4);
    assert!((joint.entry(0, 0).re - 1.0).abs() < 1e-15);
}

#[test]
fn tensor_then_partial_trace_recovers_factors() {
    let a = DensityMatrix::werner_pair([q(0), q(1)], 0.8).unwrap();
    let b = DensityMatrix::from_pure(&[q(2)], &plus_state()).unwrap();
    let joint = a.tensor(&b).unwrap();
    let ra = joint.partial_trace(&[q(0), q(1)]).unwrap();
    let rb = joint.partial_trace(&[q(2)]).unwrap();
    assert!(ra.max_abs_diff(&a).unwrap() < 1e-12);
    assert!(rb.max_abs_diff(&b).unwrap() < 1e-12);
}

#[test]
fn tensor_of_werner_pairs_has_unit_trace() {
    let a = DensityMatrix::werner_pair([q(0), q(1)], 0.9).unwrap();
    let b = DensityMatrix::werner_pair([q(2), q(3)], 0.8).unwrap();
    let joint = a.tensor(&b).unwrap();
    assert_eq!(joint.dim(), 16);
    joint.validate().unwrap();
}

#[test]
fn tensor_rejects_duplicate_labels() {
    let a = DensityMatrix::zero_state(&[q(0)]).unwrap();
    let b = DensityMatrix::zero_state(&[q(0)]).unwrap();
    assert!(matches!(a.tensor(&b), Err(EngineError::Address(_))));
}

#[test]
fn discard_is_partial_trace_complement() {
    let rho = bell_dm();
    let d = rho.discard(q(1)).unwrap();
    let p = rho.partial_trace(&[q(0)]).unwrap();
    assert!(d.max_abs_diff(&p).unwrap() < 1e-15);
}

#[test]
fn permuted_swaps_factors() {
    let zero = DensityMatrix::zero_state(&[q(0)]).unwrap();
    let one = DensityMatrix::zero_state(&[q(1)])
        .unwrap()
        .apply_gate(&gate::x(q(1)))
        .unwrap();
    let joint = zero.tensor(&one).unwrap(); // |01>
    let swapped = joint.permuted(&[q(1), q(0)]).unwrap(); // |10>
    assert!((swapped.entry(2, 2).re - 1.0).abs() < 1e-12);
}

#[test]
fn gates_preserve_entropy() {
    let rho = DensityMatrix::werner_pair([q(0), q(1)], 0.7).unwrap();
    let s0 = rho.entropy();
    let rho = rho
        .apply_gate(&gate::h(q(0)))
        .unwrap()
        .apply_gate(&gate::cnot(q(0), q(1)))
        .unwrap()
        .apply_gate(&GateOp::new(GateKind::S, vec![q(1)]).unwrap())
        .unwrap();
    assert!((rho.entropy() - s0).abs() < 1e-9);
}

#[test]
fn scalar_state_is_valid() {
    let s = DensityMatrix::scalar();
    assert_eq!(s.n_qubits(), 0);
    s.validate().unwrap();
}

#[test]
fn validation_handles_large_degenerate_registers() {
    // rank-one 8-qubit projector built from a fanout pair and three perfect
    // Bell pairs; repeated zero eigenvalues must not break positivity checks
    let fan = StateVector::fanout(Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0), 2).unwrap();
    let mut reg = DensityMatrix::from_pure(&[q(0), q(1)], &fan).unwrap();
    for k in 0..3u64 {
        let pair = DensityMatrix::werner_pair([q(2 + 2 * k), q(3 + 2 * k)], 1.0).unwrap();
        reg = reg.tensor(&pair).unwrap();
    }
    let reg = reg.apply_gate(&gate::cnot(q(3), q(4))).unwrap();
    reg.validate().unwrap();
    assert!(reg.entropy() < 1e-9);
}

#[test]
fn trace_distance_of_identical_states_is_zero() {
    let a = bell_dm();
    assert!(trace_distance(&a, &a.clone()).unwrap() < 1e-15);
}

#[test]
fn trace_distance_of_orthogonal_pures_is_one() {
    let a = DensityMatrix::new_register(1).unwrap();
    let b = a.apply_gate(&gate::x(q(0))).unwrap();
    assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_circuits_keep_invariants(ops in prop::collection::vec((0u8..8, 0u64..3, 0u64..3), 1..20)) {
        let mut rho = DensityMatrix::new_register(3).unwrap();
        for (kind, a, b) in ops {
            let kind = [
                GateKind::H, GateKind::X, GateKind::Y, GateKind::Z,
                GateKind::S, GateKind::T, GateKind::Cnot, GateKind::Cz,
            ][kind as usize];
            let g = if kind.arity() == 1 {
                GateOp::new(kind, vec![q(a)]).unwrap()
            } else if a == b {
                continue;
            } else {
                GateOp::new(kind, vec![q(a), q(b)]).unwrap()
            };
            rho = rho.apply_gate(&g).unwrap();
        }
        rho.validate().unwrap();
        prop_assert!(rho.entropy() < 1e-9); // unitary on a pure state stays pure
    }

    #[test]
    fn channels_keep_invariants_and_bounds(p in 0.0f64..=1.0, f in 0.25f64..=1.0) {
        let rho = DensityMatrix::werner_pair([q(0), q(1)], f).unwrap();
        let rho = rho.apply_channel(NoiseChannel::Depolarizing { p }, &[q(0)]).unwrap();
        rho.validate().unwrap();
        let fid = rho.fidelity(&bell_phi_plus()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&fid));
        let s = rho.entropy();
        prop_assert!((0.0..=2.0 + 1e-9).contains(&s));
    }
}
