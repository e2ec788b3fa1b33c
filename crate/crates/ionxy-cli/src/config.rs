//! Experiment configuration: TOML document plus preset and flag overrides,
//! resolved into a fully-explicit configuration that is echoed verbatim
//! into the run manifest.

use serde::{Deserialize, Serialize};

use ionxy::couplings::CouplingSet;
use ionxy::dynamics::{RampProfile, RampShape};
use ionxy::ionchain::{ChainSpec, SiteShift};
use ionxy::presets;
use ionxy::{Error, Result};

/// Raw, partially-specified configuration as parsed from TOML.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub chain: RawChain,
    #[serde(default)]
    pub coupling: RawCoupling,
    #[serde(default)]
    pub dynamics: RawDynamics,
    #[serde(default)]
    pub parity_scan: RawParityScan,
    #[serde(default)]
    pub witness_vs_time: RawWitnessVsTime,
    #[serde(default)]
    pub adiabatic: RawAdiabatic,
    #[serde(default)]
    pub symmetry_sweep: RawSymmetrySweep,
    #[serde(default)]
    pub full_vs_effective: RawFullVsEffective,
    #[serde(default)]
    pub ground_state: RawGroundState,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawChain {
    pub n_ions: Option<usize>,
    pub axial_freq_hz: Option<f64>,
    pub transverse_com_freq_hz: Option<f64>,
    pub ion_mass_kg: Option<f64>,
    pub delta_k: Option<f64>,
    /// Uniform Rabi frequency shorthand.
    pub rabi_freq_hz: Option<f64>,
    pub rabi_freqs_hz: Option<Vec<f64>>,
    pub mu_hz: Option<f64>,
    /// When set, μ is found by the range-exponent search instead.
    pub target_alpha: Option<f64>,
    pub d_field_hz: Option<f64>,
    pub site_shifts: Option<Vec<RawSiteShift>>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawSiteShift {
    #[serde(default)]
    pub linear_hz: f64,
    #[serde(default)]
    pub quadratic_hz: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCoupling {
    /// Synthetic two-ion coupling, overriding the chain-derived matrix.
    pub j12_hz: Option<f64>,
    /// Synthetic power-law chain J_ij = j0/|i−j|^alpha.
    pub power_law_j0_hz: Option<f64>,
    pub power_law_alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDynamics {
    pub start: Option<String>,
    pub duration_s: Option<f64>,
    pub n_samples: Option<usize>,
    pub include_v_terms: Option<bool>,
    pub nbar: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParityScan {
    pub state: Option<String>,
    pub evolve_time_s: Option<f64>,
    pub sequence: Option<String>,
    pub harmonic: Option<String>,
    pub n_phi: Option<usize>,
    pub shots: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWitnessVsTime {
    pub times_s: Option<Vec<f64>>,
    pub n_times: Option<usize>,
    pub t_max_s: Option<f64>,
    pub n_phi: Option<usize>,
    pub shots: Option<u64>,
    pub rabi_noise_rel: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAdiabatic {
    pub shape: Option<String>,
    pub d0_hz: Option<f64>,
    pub tau_s: Option<f64>,
    pub duration_s: Option<f64>,
    pub n_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSymmetrySweep {
    pub d_max_hz: Option<f64>,
    pub n_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFullVsEffective {
    pub ratios: Option<Vec<f64>>,
    pub n_max: Option<usize>,
    pub n_times: Option<usize>,
    pub nbar: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGroundState {
    pub sector: Option<i32>,
}

/// Where the coupling matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum CouplingSource {
    Chain,
    TwoIon { j12_hz: f64 },
    PowerLaw { j0_hz: f64, alpha: f64 },
}

/// Fully-resolved configuration; serializes into the manifest and
/// re-parses identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub experiment: String,
    pub seed: u64,
    pub chain: ChainSpec,
    pub coupling: CouplingSource,
    pub dynamics: DynamicsParams,
    pub parity_scan: ParityScanParams,
    pub witness_vs_time: WitnessVsTimeParams,
    pub adiabatic: AdiabaticParams,
    pub symmetry_sweep: SymmetrySweepParams,
    pub full_vs_effective: FullVsEffectiveParams,
    pub ground_state: GroundStateParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    pub start: String,
    pub duration_s: f64,
    pub n_samples: usize,
    pub include_v_terms: bool,
    pub nbar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityScanParams {
    pub state: String,
    pub evolve_time_s: f64,
    pub sequence: String,
    pub harmonic: String,
    pub n_phi: usize,
    /// 0 means exact probabilities.
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessVsTimeParams {
    pub times_s: Vec<f64>,
    pub n_phi: usize,
    pub shots: u64,
    pub rabi_noise_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticParams {
    pub shape: String,
    pub d0_hz: f64,
    pub tau_s: f64,
    pub duration_s: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrySweepParams {
    pub d_max_hz: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullVsEffectiveParams {
    pub ratios: Vec<f64>,
    pub n_max: usize,
    pub n_times: usize,
    pub nbar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateParams {
    pub sector: Option<i32>,
}

/// Known preset names, applied below the config file.
pub const PRESET_NAMES: [&str; 4] = ["alpha036", "fig2_fit", "paper_2ion", "paper_ramp"];

struct PresetPieces {
    chain: Option<ChainSpec>,
    coupling: Option<CouplingSource>,
    ramp: Option<RampProfile>,
}

fn preset_pieces(name: &str) -> Result<PresetPieces> {
    match name {
        "alpha036" => Ok(PresetPieces {
            chain: Some(presets::alpha036_chain()),
            coupling: None,
            ramp: None,
        }),
        "fig2_fit" => Ok(PresetPieces {
            chain: Some(presets::fig2_fit_chain()),
            coupling: Some(CouplingSource::TwoIon { j12_hz: presets::PAPER_2ION_J_HZ }),
            ramp: None,
        }),
        "paper_2ion" => Ok(PresetPieces {
            chain: Some(presets::paper_2ion().0),
            coupling: Some(CouplingSource::TwoIon { j12_hz: presets::PAPER_2ION_J_HZ }),
            ramp: None,
        }),
        "paper_ramp" => Ok(PresetPieces { chain: None, coupling: None, ramp: Some(presets::paper_ramp()) }),
        other => Err(Error::Invalid(format!(
            "unknown preset '{other}'; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Resolve raw config + optional preset + flag overrides into an explicit
/// configuration. Precedence: defaults < preset < file < flags.
pub fn resolve(
    experiment: &str,
    raw: &RawConfig,
    preset: Option<&str>,
    seed_flag: Option<u64>,
) -> Result<ResolvedConfig> {
    let pieces = match preset {
        Some(p) => Some(preset_pieces(p)?),
        None => None,
    };
    let preset_chain = pieces.as_ref().and_then(|p| p.chain.clone());
    let preset_coupling = pieces.as_ref().and_then(|p| p.coupling.clone());
    let preset_ramp = pieces.as_ref().and_then(|p| p.ramp.clone());

    // chain: n_ions must come from somewhere
    let n_ions = raw
        .chain
        .n_ions
        .or(preset_chain.as_ref().map(|c| c.n_ions))
        .ok_or_else(|| Error::Invalid("chain.n_ions missing: set it in the config or pick a preset".into()))?;
    if n_ions == 0 {
        return Err(Error::Invalid("chain.n_ions must be at least 1".into()));
    }
    let base = preset_chain.unwrap_or_else(|| presets::default_chain(n_ions));

    let rabi_freqs_hz = match (&raw.chain.rabi_freqs_hz, raw.chain.rabi_freq_hz) {
        (Some(v), _) => v.clone(),
        (None, Some(u)) => vec![u; n_ions],
        (None, None) => {
            if base.rabi_freqs_hz.len() == n_ions {
                base.rabi_freqs_hz.clone()
            } else {
                vec![base.rabi_freqs_hz.first().copied().unwrap_or(50.0e3); n_ions]
            }
        }
    };
    if rabi_freqs_hz.len() != n_ions {
        return Err(Error::Invalid(format!(
            "chain.rabi_freqs_hz has {} entries, n_ions = {}",
            rabi_freqs_hz.len(),
            n_ions
        )));
    }

    let site_shifts = match &raw.chain.site_shifts {
        Some(v) => Some(
            v.iter()
                .map(|s| SiteShift { linear_hz: s.linear_hz, quadratic_hz: s.quadratic_hz })
                .collect::<Vec<_>>(),
        ),
        None => {
            if base.n_ions == n_ions {
                base.site_shifts.clone()
            } else {
                None
            }
        }
    };

    let mut chain = ChainSpec {
        n_ions,
        axial_freq_hz: raw.chain.axial_freq_hz.unwrap_or(base.axial_freq_hz),
        transverse_com_freq_hz: raw
            .chain
            .transverse_com_freq_hz
            .unwrap_or(base.transverse_com_freq_hz),
        ion_mass_kg: raw.chain.ion_mass_kg.unwrap_or(base.ion_mass_kg),
        delta_k: raw.chain.delta_k.unwrap_or(base.delta_k),
        rabi_freqs_hz,
        mu_hz: raw.chain.mu_hz.unwrap_or(base.mu_hz),
        d_field_hz: raw.chain.d_field_hz.unwrap_or(base.d_field_hz),
        site_shifts,
    };
    if let Some(target) = raw.chain.target_alpha {
        chain.mu_hz = ionxy::couplings::tune_alpha(&chain, target)?;
    }

    let coupling = if let Some(j12) = raw.coupling.j12_hz {
        if n_ions != 2 {
            return Err(Error::Invalid("coupling.j12_hz applies to two-ion chains".into()));
        }
        CouplingSource::TwoIon { j12_hz: j12 }
    } else if let (Some(j0), Some(alpha)) = (raw.coupling.power_law_j0_hz, raw.coupling.power_law_alpha) {
        CouplingSource::PowerLaw { j0_hz: j0, alpha }
    } else if raw.coupling.power_law_j0_hz.is_some() || raw.coupling.power_law_alpha.is_some() {
        return Err(Error::Invalid(
            "coupling.power_law_j0_hz and coupling.power_law_alpha must be set together".into(),
        ));
    } else {
        preset_coupling.unwrap_or(CouplingSource::Chain)
    };

    let ramp_default = preset_ramp.unwrap_or_else(presets::paper_ramp);
    let adiabatic = AdiabaticParams {
        shape: raw.adiabatic.shape.clone().unwrap_or_else(|| {
            match ramp_default.shape {
                RampShape::Exponential => "exponential",
                RampShape::Linear => "linear",
                RampShape::Table(_) => "exponential",
            }
            .to_string()
        }),
        d0_hz: raw.adiabatic.d0_hz.unwrap_or(ramp_default.d0_hz),
        tau_s: raw.adiabatic.tau_s.unwrap_or(ramp_default.tau_s),
        duration_s: raw.adiabatic.duration_s.unwrap_or(ramp_default.duration_s),
        n_samples: raw.adiabatic.n_samples.unwrap_or(100),
    };

    let witness_times = match (&raw.witness_vs_time.times_s, raw.witness_vs_time.n_times) {
        (Some(v), _) => v.clone(),
        (None, n) => {
            let n = n.unwrap_or(8);
            let t_max = raw.witness_vs_time.t_max_s.unwrap_or(2.0e-3);
            (1..=n).map(|k| t_max * k as f64 / n as f64).collect()
        }
    };

    Ok(ResolvedConfig {
        experiment: experiment.to_string(),
        seed: seed_flag.or(raw.seed).unwrap_or(1),
        chain,
        coupling,
        dynamics: DynamicsParams {
            start: raw.dynamics.start.clone().unwrap_or_else(|| "all_zero".into()),
            duration_s: raw.dynamics.duration_s.unwrap_or(2.0e-3),
            n_samples: raw.dynamics.n_samples.unwrap_or(200),
            include_v_terms: raw.dynamics.include_v_terms.unwrap_or(false),
            nbar: raw.dynamics.nbar.unwrap_or(ionxy::dynamics::DEFAULT_NBAR),
        },
        parity_scan: ParityScanParams {
            state: raw.parity_scan.state.clone().unwrap_or_else(|| "evolved".into()),
            evolve_time_s: raw.parity_scan.evolve_time_s.unwrap_or(0.27e-3),
            sequence: raw.parity_scan.sequence.clone().unwrap_or_else(|| "witness".into()),
            harmonic: raw.parity_scan.harmonic.clone().unwrap_or_else(|| "cos_2phi".into()),
            n_phi: raw.parity_scan.n_phi.unwrap_or(24),
            shots: raw.parity_scan.shots.unwrap_or(0),
        },
        witness_vs_time: WitnessVsTimeParams {
            times_s: witness_times,
            n_phi: raw.witness_vs_time.n_phi.unwrap_or(16),
            shots: raw.witness_vs_time.shots.unwrap_or(0),
            rabi_noise_rel: raw.witness_vs_time.rabi_noise_rel.unwrap_or(0.0),
        },
        adiabatic,
        symmetry_sweep: SymmetrySweepParams {
            d_max_hz: raw.symmetry_sweep.d_max_hz.unwrap_or(0.0),
            n_points: raw.symmetry_sweep.n_points.unwrap_or(40),
        },
        full_vs_effective: FullVsEffectiveParams {
            ratios: raw.full_vs_effective.ratios.clone().unwrap_or_else(|| vec![10.0, 20.0, 40.0]),
            n_max: raw.full_vs_effective.n_max.unwrap_or(3),
            n_times: raw.full_vs_effective.n_times.unwrap_or(60),
            nbar: raw.full_vs_effective.nbar.unwrap_or(0.0),
        },
        ground_state: GroundStateParams { sector: raw.ground_state.sector.or(Some(0)) },
    })
}

impl ResolvedConfig {
    /// Build the coupling set the experiments operate on.
    pub fn coupling_set(&self) -> Result<CouplingSet> {
        match &self.coupling {
            CouplingSource::Chain => {
                let modes = ionxy::ionchain::transverse_modes(&self.chain)?;
                CouplingSet::from_chain(&modes, &self.chain)
            }
            CouplingSource::TwoIon { j12_hz } => {
                let j = nalgebra_j2(*j12_hz);
                CouplingSet::from_j_matrix(j)
            }
            CouplingSource::PowerLaw { j0_hz, alpha } => {
                Ok(CouplingSet::power_law_chain(self.chain.n_ions, *j0_hz, *alpha))
            }
        }
    }

    pub fn ramp(&self) -> Result<RampProfile> {
        let shape = match self.adiabatic.shape.as_str() {
            "exponential" => RampShape::Exponential,
            "linear" => RampShape::Linear,
            other => {
                return Err(Error::Invalid(format!(
                    "adiabatic.shape must be 'exponential' or 'linear', got '{other}'"
                )))
            }
        };
        let ramp = RampProfile {
            shape,
            d0_hz: self.adiabatic.d0_hz,
            tau_s: self.adiabatic.tau_s,
            duration_s: self.adiabatic.duration_s,
        };
        ramp.validate()?;
        Ok(ramp)
    }
}

fn nalgebra_j2(j12: f64) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, j12, j12, 0.0])
}

pub fn parse_raw(text: &str) -> Result<RawConfig> {
    toml::from_str(text).map_err(|e| Error::Invalid(format!("config parse error: {e}")))
}
