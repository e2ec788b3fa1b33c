//! Experiment implementations: each returns the artifact files to write,
//! as (name, bytes) pairs, plus log lines for stdout.

use std::sync::Arc;

use ionxy::couplings::fit_power_law;
use ionxy::dynamics::{
    adiabatic_prepare, build_effective, symmetry_diagnosis, VTermMode,
};
use ionxy::export::*;
use ionxy::ionchain::transverse_modes;
use ionxy::protocol::{
    self, entanglement_vs_time, ground_phase_sequence, parity_scan, witness_sequence,
    FitHarmonic, Mapping, MeasurementConfig, ShotMode,
};
use ionxy::quantum::{reference_state, ReferenceState, SpinState};
use ionxy::spinphonon::{compare_full_vs_effective, PhononInit};
use ionxy::{Error, Result};

use crate::config::ResolvedConfig;

pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub log: Vec<String>,
}

pub fn run_experiment(cfg: &ResolvedConfig) -> Result<Artifacts> {
    match cfg.experiment.as_str() {
        "modes" => modes(cfg),
        "couplings" => couplings(cfg),
        "dynamics" => dynamics(cfg),
        "parity_scan" => parity_scan_experiment(cfg),
        "witness_vs_time" => witness_vs_time(cfg),
        "adiabatic" => adiabatic(cfg),
        "ground_state_analysis" => ground_state_analysis(cfg),
        "symmetry_sweep" => symmetry_sweep(cfg),
        "full_vs_effective" => full_vs_effective(cfg),
        other => Err(Error::Invalid(format!("unknown experiment '{other}'"))),
    }
}

fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn modes(cfg: &ResolvedConfig) -> Result<Artifacts> {
    let modes = transverse_modes(&cfg.chain)?;
    let mut log = Vec::new();
    if modes.lamb_dicke_regime_violated() {
        log.push(format!(
            "warning: max |eta| = {:.3} exceeds the Lamb-Dicke bound 0.3",
            modes.max_lamb_dicke()
        ));
    }
    log.push(format!(
        "modes: {} transverse modes, COM {:.6} MHz",
        modes.n_ions(),
        modes.mode_freqs_hz[0] / 1e6
    ));
    Ok(Artifacts {
        files: vec![("modes.json".into(), json_bytes(&modes_to_json(&modes)))],
        log,
    })
}

fn couplings(cfg: &ResolvedConfig) -> Result<Artifacts> {
    let mut set = cfg.coupling_set()?;
    let mut log = Vec::new();
    if set.n_ions() >= 3 {
        match set.fit() {
            Ok(fit) => log.push(format!(
                "power law: alpha = {:.4} (all pairs), {:.4} (adjacent)",
                fit.alpha, fit.alpha_adjacent
            )),
            Err(e) => log.push(format!("power-law fit unavailable: {e}")),
        }
    }
    Ok(Artifacts {
        files: vec![
            ("couplings.json".into(), json_bytes(&coupling_to_json(&set))),
            ("couplings.csv".into(), coupling_to_csv(&set).into_bytes()),
        ],
        log,
    })
}

fn start_state(cfg: &ResolvedConfig, basis: &Arc<ionxy::quantum::Basis>) -> Result<SpinState> {
    match cfg.dynamics.start.as_str() {
        "all_zero" => Ok(SpinState::all_zero(Arc::clone(basis))),
        label => SpinState::basis_state(Arc::clone(basis), label),
    }
}

fn dynamics(cfg: &ResolvedConfig) -> Result<Artifacts> {
    let coupling = cfg.coupling_set()?;
    let v_mode = if cfg.dynamics.include_v_terms {
        VTermMode::On { nbar: cfg.dynamics.nbar }
    } else {
        VTermMode::Off
    };
    let ham = build_effective(&coupling, &cfg.chain, v_mode)?;
    let psi0 = start_state(cfg, ham.basis())?;
    let times: Vec<f64> = (1..=cfg.dynamics.n_samples)
        .map(|k| cfg.dynamics.duration_s * k as f64 / cfg.dynamics.n_samples as f64)
        .collect();
    let sampled = ham.evolve_sampled(&psi0, &times)?;
    let energies: Vec<f64> = times
        .iter()
        .zip(&sampled.states)
        .map(|(t, st)| ham.energy_expectation(st, *t))
        .collect();
    let fidelities: Vec<f64> = sampled.states.iter().map(|st| st.fidelity(&psi0)).collect();
    let csv = trajectory_csv(&times, &sampled.states, Some(&fidelities), Some(&energies));
    Ok(Artifacts {
        files: vec![("trajectory.csv".into(), csv.into_bytes())],
        log: vec![format!("dynamics: {} samples over {} s", times.len(), cfg.dynamics.duration_s)],
    })
}

fn scan_state(cfg: &ResolvedConfig) -> Result<SpinState> {
    match cfg.parity_scan.state.as_str() {
        "two_spin_ground" => reference_state(ReferenceState::TwoSpinGround),
        "two_spin_top" => reference_state(ReferenceState::TwoSpinTop),
        "bell" => {
            let basis = ionxy::quantum::Basis::shared(2)?;
            SpinState::from_components(
                basis,
                &[
                    ("+-", num_complex::Complex64::new(1.0, 0.0)),
                    ("-+", num_complex::Complex64::new(1.0, 0.0)),
                ],
            )
        }
        "evolved" => {
            let coupling = cfg.coupling_set()?;
            let ham = protocol::xy_hamiltonian(&coupling)?;
            let psi0 = SpinState::all_zero(Arc::clone(ham.basis()));
            ham.evolve(&psi0, cfg.parity_scan.evolve_time_s)
        }
        other => Err(Error::Invalid(format!(
            "parity_scan.state must be one of evolved, bell, two_spin_ground, two_spin_top; got '{other}'"
        ))),
    }
}

fn shot_mode(shots: u64) -> ShotMode {
    if shots == 0 {
        ShotMode::Exact
    } else {
        ShotMode::Sampled(shots)
    }
}

fn parity_scan_experiment(cfg: &ResolvedConfig) -> Result<Artifacts> {
    let state = scan_state(cfg)?;
    let sequence = match cfg.parity_scan.sequence.as_str() {
        "witness" => witness_sequence(),
        "ground_phase" => ground_phase_sequence(),
        other => {
            return Err(Error::Invalid(format!(
                "parity_scan.sequence must be 'witness' or 'ground_phase', got '{other}'"
            )))
        }
    };
    let harmonic = match cfg.parity_scan.harmonic.as_str() {
        "cos_phi" => FitHarmonic::CosPhi,
        "cos_2phi" => FitHarmonic::Cos2Phi,
        other => {
            return Err(Error::Invalid(format!(
                "parity_scan.harmonic must be 'cos_phi' or 'cos_2phi', got '{other}'"
            )))
        }
    };
    let phi: Vec<f64> = (0..cfg.parity_scan.n_phi)
        .map(|k| k as f64 * 2.0 * std::f64::consts::PI / cfg.parity_scan.n_phi as f64)
        .collect();
    let config = MeasurementConfig {
        mapping: Mapping::None,
        shots: shot_mode(cfg.parity_scan.shots),
        seed: cfg.seed,
        rabi_noise_rel: None,
    };
    let curve = parity_scan(&state, &sequence, &phi, &config, harmonic, 0)?;
    Ok(Artifacts {
        files: vec![
            ("parity.csv".into(), parity_csv(&curve).into_bytes()),
            ("parity_fit.json".into(), json_bytes(&parity_fit_json(&curve))),
        ],
        log: vec![format!(
            "parity fit: offset {:.6}, amplitude {:.6}, sign {:+}",
            curve.fit.offset, curve.fit.amplitude, curve.fit.sign
        )],
    })
}

fn witness_vs_time(cfg: &ResolvedConfig) -> Result<Artifacts> {
    let coupling = cfg.coupling_set()?;
    let phi: Vec<f64> = (0..cfg.witness_vs_time.n_phi)
        .map(|k| k as f64 * 2.0 * std::f64::consts::PI / cfg.witness_vs_time.n_phi as f64)
        .collect();
    let config = MeasurementConfig {
        mapping: Mapping::None,
        shots: shot_mode(cfg.witness_vs_time.shots),
        seed: cfg.seed,
        rabi_noise_rel: if cfg.witness_vs_time.rabi_noise_rel > 0.0 {
            Some(cfg.witness_vs_time.rabi_noise_rel)
        } else {
            None
        },
    };
    let points = entanglement_vs_time(&coupling, &cfg.witness_vs_time.times_s, &phi, &config)?;
    let violations = points.iter().filter(|p| p.report.violated).count();
    Ok(Artifacts {
        files: vec![("witness_vs_time.csv".into(), witness_series_csv(&points).into_bytes())],
        log: vec![format!("witness: {} of {} time points violate the bound", violations, points.len())],
    })
}

fn adiabatic(cfg: &ResolvedConfig) -> Result<Artifacts> {
    let coupling = cfg.coupling_set()?;
    let ramp = cfg.ramp()?;
    let result = adiabatic_prepare(&coupling, &cfg.chain, &ramp, cfg.adiabatic.n_samples)?;
    let final_json = serde_json::json!({
        "start_overlap_all_zero": result.start_overlap_all_zero,
        "achieved_tolerance": result.achieved_tol,
        "final_state": state_to_json(&result.final_state, 1e-12),
        "final_ground_fidelity": result.samples.last().map(|s| s.ground_fidelity),
    });
    Ok(Artifacts {
        files: vec![
            ("adiabatic.csv".into(), adiabatic_csv(&result).into_bytes()),
            ("adiabatic_final.json".into(), json_bytes(&final_json)),
        ],
        log: vec![format!(
            "adiabatic: final instantaneous-ground fidelity {:.4}",
            result.samples.last().map(|s| s.ground_fidelity).unwrap_or(f64::NAN)
        )],
    })
}

fn ground_state_analysis(cfg: &ResolvedConfig) -> Result<Artifacts> {
    let coupling = cfg.coupling_set()?;
    let ham = build_effective(&coupling, &cfg.chain, VTermMode::Off)?;
    let gs = ham.ground_state(cfg.ground_state.sector)?;
    let st = gs.state();

    let mut patterns: Vec<serde_json::Value> = Vec::new();
    let basis = st.basis();
    for (k, p) in st.populations().iter().enumerate() {
        if *p > 1e-9 {
            patterns.push(serde_json::json!({ "label": basis.label(k), "population": p }));
        }
    }

    let mut doc = serde_json::json!({
        "energy_hz": gs.energy,
        "degenerate": gs.degenerate,
        "sector": cfg.ground_state.sector,
        "patterns": patterns,
        "state": state_to_json(st, 1e-9),
    });
    let mut log = vec![format!("ground state: energy {:.4} Hz", gs.energy)];
    if cfg.chain.n_ions == 3 {
        let aklt = reference_state(ReferenceState::Aklt3)?;
        let overlap = st.fidelity(&aklt);
        doc["aklt3_overlap"] = serde_json::json!(overlap);
        let table: Vec<serde_json::Value> = ionxy::quantum::aklt3_boundary_overlaps()?
            .into_iter()
            .map(|(b, f)| serde_json::json!({ "boundary": b.name(), "overlap_with_eq10": f }))
            .collect();
        doc["aklt3_boundary_overlaps"] = serde_json::json!(table);
        log.push(format!("AKLT(trace) overlap: {overlap:.5}"));
    }
    if cfg.chain.n_ions >= 3 {
        if let Ok(fit) = fit_power_law(&coupling.j_matrix) {
            doc["power_law"] = serde_json::json!({
                "alpha": fit.alpha,
                "j0_hz": fit.j0_hz,
                "alpha_adjacent": fit.alpha_adjacent,
            });
        }
    }
    Ok(Artifacts { files: vec![("ground_state.json".into(), json_bytes(&doc))], log })
}

fn symmetry_sweep(cfg: &ResolvedConfig) -> Result<Artifacts> {
    let coupling = cfg.coupling_set()?;
    let ham = build_effective(&coupling, &cfg.chain, VTermMode::Off)?;
    let j_scale = coupling
        .j_matrix
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max);
    let d_max = if cfg.symmetry_sweep.d_max_hz > 0.0 {
        cfg.symmetry_sweep.d_max_hz
    } else {
        1.5 * j_scale
    };
    let n = cfg.symmetry_sweep.n_points.max(2);
    let d_grid: Vec<f64> = (0..n).map(|k| d_max * k as f64 / (n - 1) as f64).collect();
    let zero = SpinState::all_zero(Arc::clone(ham.basis()));
    let report = symmetry_diagnosis(&ham, &zero, &d_grid)?;

    let doc = serde_json::json!({
        "mirror_symmetric": report.mirror_symmetric,
        "commutator_inversion_max": report.commutator_inversion_max,
        "commutator_sx_pi_max": report.commutator_sx_pi_max,
        "crossing_d_hz": report.crossing_d_hz,
        "intersector_coupling_max": report.intersector_coupling_max,
    });
    let log = match report.crossing_d_hz {
        Some(d) => vec![format!("sector crossing at D* = {d:.4} Hz")],
        None => vec!["no sector crossing inside the sweep".into()],
    };
    Ok(Artifacts {
        files: vec![
            ("symmetry_sweep.csv".into(), sector_sweep_csv(&report.sweep).into_bytes()),
            ("symmetry_report.json".into(), json_bytes(&doc)),
        ],
        log,
    })
}

fn full_vs_effective(cfg: &ResolvedConfig) -> Result<Artifacts> {
    let init = if cfg.full_vs_effective.nbar > 0.0 {
        PhononInit::Thermal { nbar: cfg.full_vs_effective.nbar }
    } else {
        PhononInit::Ground
    };
    let mut rows = Vec::new();
    for &ratio in &cfg.full_vs_effective.ratios {
        rows.push(compare_full_vs_effective(
            &cfg.chain,
            cfg.full_vs_effective.n_max,
            init,
            ratio,
            cfg.full_vs_effective.n_times,
        )?);
    }
    let log = rows
        .iter()
        .map(|r| format!("ratio {:.0}: max discrepancy {:.5}", r.ratio, r.max_discrepancy))
        .collect();
    Ok(Artifacts {
        files: vec![("full_vs_effective.csv".into(), model_comparison_csv(&rows).into_bytes())],
        log,
    })
}
