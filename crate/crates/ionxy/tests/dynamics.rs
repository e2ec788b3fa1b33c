//! Effective-Hamiltonian assembly, propagation, spectra, adiabatic ramps,
//! and symmetry diagnostics.

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use nalgebra::DVector;
use num_complex::Complex64;

use ionxy::couplings::CouplingSet;
use ionxy::dynamics::{
    adiabatic_prepare, build_effective, symmetry_diagnosis, RampProfile, RampShape, VTermMode,
};
use ionxy::ionchain::{transverse_modes, SiteShift};
use ionxy::presets::{alpha036_chain, default_chain, paper_2ion, paper_ramp};
use ionxy::protocol::{stream_rng, xy_hamiltonian};
use ionxy::quantum::{
    reference_state, subspace_projector, ReferenceState, SpinState,
};
use rand::RngExt;

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn two_ion_xy(j: f64) -> ionxy::dynamics::EffectiveHamiltonian {
    let coupling = CouplingSet::power_law_chain(2, j, 1.0);
    xy_hamiltonian(&coupling).unwrap()
}

fn random_state(n: usize, seed: u64) -> SpinState {
    let basis = ionxy::quantum::Basis::shared(n).unwrap();
    let mut rng = stream_rng(seed, 7, 7);
    let amps = DVector::from_iterator(
        basis.dim(),
        (0..basis.dim()).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)),
    );
    let mut st = SpinState::new(basis, amps).unwrap();
    st.normalize().unwrap();
    st
}

#[test]
fn xy_matrix_element_by_hand() {
    // ⟨00|H|+−⟩ = J/2 from the spin-1 ladder factors √2·√2 against J/4
    let j = 1000.0;
    let ham = two_ion_xy(j);
    let op = ham.operator();
    let basis = ham.basis();
    let row = basis.index_from_label("00").unwrap();
    let col = basis.index_from_label("+-").unwrap();
    assert_abs_diff_eq!(op.element(row, col).re, j / 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(op.element(row, col).im, 0.0, epsilon = 1e-15);
}

#[test]
fn two_spin_sector_spectrum() {
    let j = 1310.0;
    let ham = two_ion_xy(j);
    let evals = ham.spectrum(Some(0)).unwrap();
    assert_eq!(evals.len(), 3);
    assert_abs_diff_eq!(evals[0], -j / SQRT2, epsilon = 1e-9);
    assert_abs_diff_eq!(evals[1], 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(evals[2], j / SQRT2, epsilon = 1e-9);
    // the gap between the extremes is the flop frequency √2 J
    assert_abs_diff_eq!(evals[2] - evals[0], SQRT2 * j, epsilon = 1e-9);
}

#[test]
fn diagonal_hamiltonian_with_field_only() {
    let mut spec = default_chain(2);
    spec.d_field_hz = 5000.0;
    let coupling = CouplingSet::from_j_matrix(nalgebra::DMatrix::zeros(2, 2)).unwrap();
    let ham = build_effective(&coupling, &spec, VTermMode::Off).unwrap();
    let gs = ham.ground_state(None).unwrap();
    assert!(!gs.degenerate);
    assert_abs_diff_eq!(gs.energy, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(gs.state().population("00"), 1.0, epsilon = 1e-12);
    let evals = ham.spectrum(None).unwrap();
    assert_abs_diff_eq!(evals[1] - evals[0], 5000.0, epsilon = 1e-9);
}

#[test]
fn evolve_zero_duration_is_identity() {
    let ham = two_ion_xy(500.0);
    let psi = random_state(2, 3);
    let out = ham.evolve(&psi, 0.0).unwrap();
    assert!(psi.fidelity(&out) > 1.0 - 1e-12);
}

#[test]
fn two_spin_flop_against_two_level_oracle() {
    // the Σ S_z = 0 dynamics from |00⟩ reduce exactly to a two-level
    // system {|00⟩, (|+−⟩+|−+⟩)/√2} with Rabi frequency √2 J
    let (_, coupling) = paper_2ion();
    let j = coupling.j_matrix[(0, 1)];
    let ham = xy_hamiltonian(&coupling).unwrap();
    let psi0 = SpinState::all_zero(Arc::clone(ham.basis()));

    for k in 0..=40 {
        let t = k as f64 / 40.0 * 2.0 / (SQRT2 * j);
        let psi = ham.evolve(&psi0, t).unwrap();
        let expect = (std::f64::consts::PI * SQRT2 * j * t).cos().powi(2);
        assert_abs_diff_eq!(psi.population("00"), expect, epsilon = 1e-10);
    }

    // half flop: fully transferred to the symmetric entangled state
    let t_half = 0.5 / (SQRT2 * j);
    let psi = ham.evolve(&psi0, t_half).unwrap();
    assert!(psi.population("00") < 1e-12);
    let bell = SpinState::from_components(
        Arc::clone(ham.basis()),
        &[("+-", Complex64::new(1.0, 0.0)), ("-+", Complex64::new(1.0, 0.0))],
    )
    .unwrap();
    assert!(psi.fidelity(&bell) > 1.0 - 1e-10);

    // full flop: back to |00⟩ up to global phase
    let psi = ham.evolve(&psi0, 2.0 * t_half).unwrap();
    assert!(psi.fidelity(&psi0) > 1.0 - 1e-10);
}

#[test]
fn two_spin_ground_state_and_top_state() {
    let j = 1310.0;
    let ham = two_ion_xy(j);
    let gs = ham.ground_state(Some(0)).unwrap();
    assert!(!gs.degenerate);
    assert_abs_diff_eq!(gs.energy, -j / SQRT2, epsilon = 1e-9);
    let expect = reference_state(ReferenceState::TwoSpinGround).unwrap();
    assert!(gs.state().fidelity(&expect) > 1.0 - 1e-10);

    // the top of the sector flips the relative phase
    let evals = ham.spectrum(Some(0)).unwrap();
    let top_energy = evals[evals.len() - 1];
    assert_abs_diff_eq!(top_energy, j / SQRT2, epsilon = 1e-9);
}

#[test]
fn three_spin_ground_state_patterns() {
    let spec = alpha036_chain();
    let modes = transverse_modes(&spec).unwrap();
    let coupling = CouplingSet::from_chain(&modes, &spec).unwrap();
    let ham = build_effective(&coupling, &spec, VTermMode::Off).unwrap();
    let gs = ham.ground_state(Some(0)).unwrap();
    let st = gs.state();

    for label in ["0+-", "0-+", "+-0", "-+0"] {
        assert_abs_diff_eq!(st.population(label), 0.16, epsilon = 0.005);
    }
    for label in ["+0-", "-0+"] {
        assert_abs_diff_eq!(st.population(label), 0.18, epsilon = 0.005);
    }
    assert!(st.population("000") < 1e-18);

    let eq10 = reference_state(ReferenceState::Eq10Ground).unwrap();
    assert!(st.fidelity(&eq10) > 0.999);

    let aklt = reference_state(ReferenceState::Aklt3).unwrap();
    assert!(st.fidelity(&aklt) >= 0.998);
}

#[test]
fn site_shifts_enter_the_diagonal() {
    let mut spec = default_chain(2);
    spec.site_shifts = Some(vec![
        SiteShift { linear_hz: 0.0, quadratic_hz: 0.0 },
        SiteShift { linear_hz: 200.0, quadratic_hz: 150.0 },
    ]);
    let coupling = CouplingSet::from_j_matrix(nalgebra::DMatrix::zeros(2, 2)).unwrap();
    let ham = build_effective(&coupling, &spec, VTermMode::Off).unwrap();
    let op = ham.operator();
    let basis = ham.basis();
    let idx = |l: &str| basis.index_from_label(l).unwrap();
    // site 2 in |+⟩: +200 + 150; in |−⟩: −200 + 150; in |0⟩: 0
    assert_abs_diff_eq!(op.element(idx("0+"), idx("0+")).re, 350.0, epsilon = 1e-12);
    assert_abs_diff_eq!(op.element(idx("0-"), idx("0-")).re, -50.0, epsilon = 1e-12);
    assert_abs_diff_eq!(op.element(idx("00"), idx("00")).re, 0.0, epsilon = 1e-12);
}

#[test]
fn v_terms_shift_polarized_states() {
    let spec = alpha036_chain();
    let modes = transverse_modes(&spec).unwrap();
    let coupling = CouplingSet::from_chain(&modes, &spec).unwrap();
    let nbar = 0.05;
    let ham = build_effective(&coupling, &spec, VTermMode::On { nbar }).unwrap();
    let op = ham.operator();
    let basis = ham.basis();
    let idx = basis.index_from_label("+++").unwrap();
    let sums = coupling.v_row_sums();
    let expect: f64 = sums.iter().map(|sv| sv * ((2.0 * nbar + 1.0) - 1.0)).sum();
    assert_abs_diff_eq!(op.element(idx, idx).re, expect, epsilon = 1e-9);
}

#[test]
fn sz_projector_commutes_with_xy() {
    let spec = alpha036_chain();
    let modes = transverse_modes(&spec).unwrap();
    let coupling = CouplingSet::from_chain(&modes, &spec).unwrap();
    let ham = build_effective(&coupling, &spec, VTermMode::On { nbar: 0.05 }).unwrap();
    let proj = subspace_projector(ham.basis(), 0);
    let comm = ham.operator().commutator_max(&proj).unwrap();
    assert!(comm < 1e-12, "commutator {comm}");
}

#[test]
fn conservation_suite_static() {
    // norm, ⟨H⟩, and sector population under static evolution of random
    // states for chains up to five ions, durations up to 10/J
    for n in 2..=5usize {
        let coupling = CouplingSet::power_law_chain(n, 150.0, 0.7);
        let ham = xy_hamiltonian(&coupling).unwrap();
        let op = ham.operator();
        for seed in 0..3u64 {
            let psi0 = random_state(n, seed);
            let e0 = psi0.expectation(&op);
            let sector_pop0: f64 = (-(n as i32)..=(n as i32))
                .map(|s| {
                    let p = psi0.apply(&subspace_projector(ham.basis(), s)).unwrap();
                    (s, p.norm().powi(2))
                })
                .map(|(_, p)| p)
                .sum();
            assert_abs_diff_eq!(sector_pop0, 1.0, epsilon = 1e-12);

            let t = 10.0 / 150.0;
            let psi = ham.evolve(&psi0, t).unwrap();
            assert!((psi.norm() - 1.0).abs() < 1e-10, "norm drift {}", (psi.norm() - 1.0).abs());
            let e1 = psi.expectation(&op);
            assert!(
                (e1 - e0).abs() <= 1e-9 * e0.abs().max(1.0),
                "energy drift {} vs {}",
                e0,
                e1
            );
            // per-sector populations preserved
            for s in -(n as i32)..=(n as i32) {
                let proj = subspace_projector(ham.basis(), s);
                let p0 = psi0.apply(&proj).unwrap().norm().powi(2);
                let p1 = psi.apply(&proj).unwrap().norm().powi(2);
                assert!((p1 - p0).abs() < 1e-10, "sector {s}: {p0} -> {p1}");
            }
        }
    }
}

#[test]
fn ramp_profiles() {
    let ramp = paper_ramp();
    assert_abs_diff_eq!(ramp.d_at(0.0), 5000.0, epsilon = 1e-12);
    assert_abs_diff_eq!(ramp.d_at(0.167e-3), 5000.0 / std::f64::consts::E, epsilon = 1e-9);

    let lin = RampProfile { shape: RampShape::Linear, d0_hz: 100.0, tau_s: 0.0, duration_s: 1.0 };
    assert_abs_diff_eq!(lin.d_at(0.5), 50.0, epsilon = 1e-12);
    assert_abs_diff_eq!(lin.d_at(2.0), 0.0, epsilon = 1e-12);

    let table = RampProfile {
        shape: RampShape::Table(vec![(0.0, 10.0), (1.0, 0.0)]),
        d0_hz: 10.0,
        tau_s: 0.0,
        duration_s: 1.0,
    };
    assert_abs_diff_eq!(table.d_at(0.25), 7.5, epsilon = 1e-12);

    let bad = RampProfile { shape: RampShape::Exponential, d0_hz: 1.0, tau_s: 0.0, duration_s: 1.0 };
    assert!(bad.validate().is_err());
}

#[test]
fn adiabatic_two_spins_reaches_ground_pattern() {
    let (spec, coupling) = paper_2ion();
    let result = adiabatic_prepare(&coupling, &spec, &paper_ramp(), 50).unwrap();

    // starts in the dressed ground state of H(0), which is nearly |00⟩
    assert!(result.start_overlap_all_zero > 0.95);
    assert!(result.achieved_tol < 1e-8);

    let f = &result.final_state;
    assert_abs_diff_eq!(f.population("00"), 0.5, epsilon = 0.04);
    assert_abs_diff_eq!(f.population("+-"), 0.25, epsilon = 0.04);
    assert_abs_diff_eq!(f.population("-+"), 0.25, epsilon = 0.04);

    let ham = xy_hamiltonian(&coupling).unwrap();
    let gs = ham.ground_state(Some(0)).unwrap();
    let fid = f.fidelity(gs.state());
    assert!(fid > 0.99, "final ground fidelity {fid}");

    // norm along the whole trajectory
    for s in &result.samples {
        assert!((s.norm - 1.0).abs() < 1e-8);
    }
}

#[test]
fn adiabatic_slower_ramp_converges_to_ground() {
    let (spec, coupling) = paper_2ion();
    let mut ramp = paper_ramp();
    ramp.tau_s *= 10.0;
    ramp.duration_s *= 10.0;
    let result = adiabatic_prepare(&coupling, &spec, &ramp, 40).unwrap();
    let ham = xy_hamiltonian(&coupling).unwrap();
    let gs = ham.ground_state(Some(0)).unwrap();
    let fid = result.final_state.fidelity(gs.state());
    assert!(fid >= 0.99, "fidelity {fid}");
    // the trajectory tracks the instantaneous ground state throughout
    let min_track = result
        .samples
        .iter()
        .map(|s| s.ground_fidelity)
        .fold(f64::INFINITY, f64::min);
    assert!(min_track > 0.98, "min instantaneous fidelity {min_track}");
}

#[test]
fn adiabatic_three_spins_blocked_by_symmetry() {
    let spec = alpha036_chain();
    let modes = transverse_modes(&spec).unwrap();
    let coupling = CouplingSet::from_chain(&modes, &spec).unwrap();
    let result = adiabatic_prepare(&coupling, &spec, &paper_ramp(), 40).unwrap();

    // the antisymmetric true ground state stays unreachable
    let eq10 = reference_state(ReferenceState::Eq10Ground).unwrap();
    let overlap = result.final_state.fidelity(&eq10);
    assert!(overlap < 1e-6, "overlap with the antisymmetric ground state: {overlap}");

    // the true ground state is the antisymmetric one, yet the prepared
    // state stays in the symmetric sector
    let ham = build_effective(&coupling, &spec, VTermMode::Off).unwrap();
    let gs = ham.ground_state(Some(0)).unwrap();
    assert!(gs.state().fidelity(&eq10) > 0.999);
    let report = symmetry_diagnosis(&ham, &result.final_state, &[0.0]).unwrap();
    assert_eq!(report.sx_pi_sector, Some(1), "final state stays swap-symmetric");
}

#[test]
fn symmetry_diagnosis_reference_states() {
    let spec = alpha036_chain();
    let modes = transverse_modes(&spec).unwrap();
    let coupling = CouplingSet::from_chain(&modes, &spec).unwrap();
    let ham = build_effective(&coupling, &spec, VTermMode::Off).unwrap();

    let eq10 = reference_state(ReferenceState::Eq10Ground).unwrap();
    let report = symmetry_diagnosis(&ham, &eq10, &[0.0, 10.0]).unwrap();
    assert_eq!(report.inversion_sector, Some(-1));
    assert_eq!(report.sx_pi_sector, Some(-1));
    assert_abs_diff_eq!(report.inversion_expectation, -1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(report.sx_pi_expectation, -1.0, epsilon = 1e-10);
    assert!(report.mirror_symmetric);
    assert!(report.commutator_inversion_max < 1e-10);
    assert!(report.commutator_sx_pi_max < 1e-10);

    let zero = SpinState::all_zero(Arc::clone(ham.basis()));
    let report = symmetry_diagnosis(&ham, &zero, &[0.0]).unwrap();
    assert_eq!(report.inversion_sector, Some(1));
    assert_eq!(report.sx_pi_sector, Some(1));
}

#[test]
fn sector_sweep_finds_level_crossing() {
    let spec = alpha036_chain();
    let modes = transverse_modes(&spec).unwrap();
    let coupling = CouplingSet::from_chain(&modes, &spec).unwrap();
    let ham = build_effective(&coupling, &spec, VTermMode::Off).unwrap();
    let j12 = coupling.j_matrix[(0, 1)];

    let d_grid: Vec<f64> = (0..=30).map(|k| k as f64 * j12 / 20.0).collect();
    let zero = SpinState::all_zero(Arc::clone(ham.basis()));
    let report = symmetry_diagnosis(&ham, &zero, &d_grid).unwrap();

    // antisymmetric sector wins at D = 0, symmetric at large D
    let first = &report.sweep[0];
    assert!(first.e_antisymmetric_hz < first.e_symmetric_hz);
    let last = &report.sweep[report.sweep.len() - 1];
    assert!(last.e_symmetric_hz < last.e_antisymmetric_hz);

    let dstar = report.crossing_d_hz.expect("crossing bracketed");
    assert!(dstar > 0.0);
    // regression value for the frozen alpha036 couplings
    assert_abs_diff_eq!(dstar / j12, 0.0845, epsilon = 5e-4);

    // swap symmetry makes the inter-sector block vanish identically
    assert_eq!(report.intersector_coupling_max, 0.0);
}

#[test]
fn ramped_evolution_matches_static_when_flat() {
    // a constant table ramp must agree with the static propagator
    let (_, coupling) = paper_2ion();
    let spec = {
        let mut s = paper_2ion().0;
        s.d_field_hz = 700.0;
        s
    };
    let static_ham = build_effective(&coupling, &spec, VTermMode::Off).unwrap();
    let ramp = RampProfile {
        shape: RampShape::Table(vec![(0.0, 700.0), (1.0, 700.0)]),
        d0_hz: 700.0,
        tau_s: 0.0,
        duration_s: 1.0e-3,
    };
    let ramped = build_effective(&coupling, &spec, VTermMode::Off)
        .unwrap()
        .with_ramp(ramp)
        .unwrap();
    let psi0 = SpinState::all_zero(Arc::clone(static_ham.basis()));
    let t = 0.4e-3;
    let a = static_ham.evolve(&psi0, t).unwrap();
    let b = ramped.evolve(&psi0, t).unwrap();
    let fid = a.fidelity(&b);
    assert!(fid > 1.0 - 1e-10, "fidelity {fid}");
    assert!((b.norm() - 1.0).abs() < 1e-8);
}
