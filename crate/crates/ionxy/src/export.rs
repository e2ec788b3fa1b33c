//! Plain-text artifact formats: CSV tables and JSON documents with a
//! fixed 12-significant-digit numeric encoding, so identical runs produce
//! byte-identical files.

use serde_json::{json, Value};

use crate::couplings::CouplingSet;
use crate::dynamics::{AdiabaticResult, SectorSweepPoint};
use crate::ionchain::NormalModes;
use crate::protocol::{ParityCurve, WitnessPoint, WitnessReport};
use crate::quantum::SpinState;
use crate::spinphonon::ModelComparison;

/// 12-significant-digit scientific rendering used in every artifact.
pub fn fmt_g12(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000000e0".into();
    }
    format!("{:.11e}", x)
}

fn num(x: f64) -> Value {
    // serde_json preserves the full f64; files render via to_string
    json!(x)
}

pub fn modes_to_json(modes: &NormalModes) -> Value {
    let n = modes.n_ions();
    json!({
        "n_ions": n,
        "mode_freqs_hz": modes.mode_freqs_hz,
        "mode_matrix_row_major": (0..n)
            .map(|i| (0..n).map(|m| modes.mode_matrix[(i, m)]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "lamb_dicke_row_major": (0..n)
            .map(|i| (0..n).map(|m| modes.lamb_dicke[(i, m)]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "equilibrium_positions": modes.equilibrium_positions,
        "max_lamb_dicke": num(modes.max_lamb_dicke()),
    })
}

pub fn coupling_to_json(set: &CouplingSet) -> Value {
    let n = set.n_ions();
    json!({
        "n_ions": n,
        "j_matrix_row_major": (0..n)
            .map(|i| (0..n).map(|k| set.j_matrix[(i, k)]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "v_matrix_row_major": (0..n)
            .map(|i| (0..n).map(|m| set.v_matrix[(i, m)]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "uniformity": num(set.uniformity),
        "power_law": set.power_law.map(|f| json!({
            "j0_hz": f.j0_hz,
            "alpha": f.alpha,
            "j0_adjacent_hz": f.j0_adjacent_hz,
            "alpha_adjacent": f.alpha_adjacent,
        })),
    })
}

/// Pair list `i, j, distance, j_ij_hz` (1-based sites, upper triangle).
pub fn coupling_to_csv(set: &CouplingSet) -> String {
    let mut out = String::from("i,j,distance,j_ij_hz\n");
    let n = set.n_ions();
    for i in 0..n {
        for j in (i + 1)..n {
            out.push_str(&format!("{},{},{},{}\n", i + 1, j + 1, j - i, fmt_g12(set.j_matrix[(i, j)])));
        }
    }
    out
}

/// State as (index, label, re, im) rows, amplitudes above `threshold`.
pub fn state_to_json(state: &SpinState, threshold: f64) -> Value {
    let basis = state.basis();
    let entries: Vec<Value> = state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > threshold)
        .map(|(k, a)| {
            json!({
                "index": k,
                "label": basis.label(k),
                "re": a.re,
                "im": a.im,
            })
        })
        .collect();
    json!({
        "n_sites": basis.n_sites(),
        "amplitude_threshold": threshold,
        "amplitudes": entries,
    })
}

/// Trajectory rows: time, per-pattern populations, fidelity columns,
/// norm, energy.
pub fn trajectory_csv(
    times: &[f64],
    states: &[SpinState],
    fidelity: Option<&[f64]>,
    energy: Option<&[f64]>,
) -> String {
    let basis = states[0].basis();
    let mut header = String::from("time_s");
    for k in 0..basis.dim() {
        header.push_str(&format!(",p_{}", basis.label(k)));
    }
    if fidelity.is_some() {
        header.push_str(",fidelity");
    }
    header.push_str(",norm");
    if energy.is_some() {
        header.push_str(",energy_hz");
    }
    header.push('\n');

    let mut out = header;
    for (i, (t, st)) in times.iter().zip(states.iter()).enumerate() {
        out.push_str(&fmt_g12(*t));
        for p in st.populations() {
            out.push(',');
            out.push_str(&fmt_g12(p));
        }
        if let Some(f) = fidelity {
            out.push(',');
            out.push_str(&fmt_g12(f[i]));
        }
        out.push(',');
        out.push_str(&fmt_g12(st.norm()));
        if let Some(e) = energy {
            out.push(',');
            out.push_str(&fmt_g12(e[i]));
        }
        out.push('\n');
    }
    out
}

pub fn adiabatic_csv(result: &AdiabaticResult) -> String {
    let basis = result.final_state.basis();
    let mut out = String::from("time_s,d_hz");
    for k in 0..basis.dim() {
        out.push_str(&format!(",p_{}", basis.label(k)));
    }
    out.push_str(",ground_fidelity,tracked_fidelity,norm,energy_hz\n");
    for s in &result.samples {
        out.push_str(&fmt_g12(s.time_s));
        out.push(',');
        out.push_str(&fmt_g12(s.d_hz));
        for p in s.state.populations() {
            out.push(',');
            out.push_str(&fmt_g12(p));
        }
        out.push_str(&format!(
            ",{},{},{},{}\n",
            fmt_g12(s.ground_fidelity),
            fmt_g12(s.tracked_fidelity),
            fmt_g12(s.norm),
            fmt_g12(s.energy_hz)
        ));
    }
    out
}

/// Parity curve rows: phi, parity, stderr (plot-ready).
pub fn parity_csv(curve: &ParityCurve) -> String {
    let mut out = String::from("phi_rad,parity,stderr\n");
    for i in 0..curve.phi.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_g12(curve.phi[i]),
            fmt_g12(curve.parity[i]),
            fmt_g12(curve.stderr[i])
        ));
    }
    out
}

pub fn parity_fit_json(curve: &ParityCurve) -> Value {
    json!({
        "harmonic": match curve.fit.harmonic {
            crate::protocol::FitHarmonic::CosPhi => "cos_phi",
            crate::protocol::FitHarmonic::Cos2Phi => "cos_2phi",
        },
        "offset": curve.fit.offset,
        "amplitude": curve.fit.amplitude,
        "sign": curve.fit.sign,
        "rms_residual": curve.fit.residual,
        "shots_per_point": curve.shots_per_point,
    })
}

pub fn witness_to_json(report: &WitnessReport) -> Value {
    json!({
        "amplitude": report.amplitude,
        "p00": report.p00,
        "rho_pm_00": report.rho_pm_00,
        "rho_mp_00": report.rho_mp_00,
        "rho_pm_mp": report.rho_pm_mp,
        "lhs": report.lhs,
        "violated": report.violated,
        "margin": report.margin,
    })
}

pub fn witness_series_csv(points: &[WitnessPoint]) -> String {
    let mut out = String::from("time_s,amplitude,lhs,margin,violated,fit_offset,fit_rms_residual\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_g12(p.time_s),
            fmt_g12(p.report.amplitude),
            fmt_g12(p.report.lhs),
            fmt_g12(p.report.margin),
            p.report.violated,
            fmt_g12(p.curve.fit.offset),
            fmt_g12(p.curve.fit.residual)
        ));
    }
    out
}

pub fn sector_sweep_csv(points: &[SectorSweepPoint]) -> String {
    let mut out = String::from("d_hz,e_symmetric_hz,e_antisymmetric_hz\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_g12(p.d_hz),
            fmt_g12(p.e_symmetric_hz),
            fmt_g12(p.e_antisymmetric_hz)
        ));
    }
    out
}

pub fn model_comparison_csv(rows: &[ModelComparison]) -> String {
    let mut out =
        String::from("detuning_ratio,mu_hz,j12_hz,flop_period_s,max_discrepancy,top_level_max,flagged\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_g12(r.ratio),
            fmt_g12(r.mu_hz),
            fmt_g12(r.j12_hz),
            fmt_g12(r.flop_period_s),
            fmt_g12(r.max_discrepancy),
            fmt_g12(r.top_level_max),
            r.flagged
        ));
    }
    out
}
