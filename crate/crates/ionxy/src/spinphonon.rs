//! Full spin-phonon dynamics: the interaction-picture Hamiltonian with
//! explicit oscillating phases, exact propagation through the static
//! phonon-frame transformation, and the comparison against the effective
//! XY model that validates the virtual-phonon approximation.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::couplings::CouplingSet;
use crate::dynamics::{build_effective, integrate_pwc_adaptive, VTermMode, INTEGRATION_TOL};
use crate::error::{Error, Result};
use crate::ionchain::{ChainSpec, NormalModes};
use crate::quantum::{Basis, LinearOp, SpinState};

/// Cap on the joint spin ⊗ phonon dimension.
pub const FULL_DIM_CAP: usize = 4096;

/// Population allowed in the top Fock level before a run is flagged.
pub const TRUNCATION_FLAG_LEVEL: f64 = 1e-3;

/// Initial phonon configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhononInit {
    Ground,
    /// Thermal product state with mean occupation n̄ per mode.
    Thermal { nbar: f64 },
}

impl PhononInit {
    pub fn nbar(&self) -> f64 {
        match self {
            PhononInit::Ground => 0.0,
            PhononInit::Thermal { nbar } => *nbar,
        }
    }
}

/// Spin-phonon Hamiltonian
/// H(t) = Σ_{i,m} (iη_{i,m}Ω_i/2√2)(−S₊^i a_m e^{i2π(μ−ω_m)t} + h.c.)
/// over the spin chain tensored with truncated Fock spaces.
#[derive(Debug, Clone)]
pub struct FullHamiltonian {
    basis: Arc<Basis>,
    n_modes: usize,
    n_max: usize,
    /// μ − ω_m per mode (Hz).
    deltas: Vec<f64>,
    init: PhononInit,
    /// Triplets of B_{i,m} = −(iη_{i,m}Ω_i/2√2)·S₊^i a_m, grouped per (i,m).
    pieces: Vec<CouplingPiece>,
    /// Phonon number per (full index, mode).
    fock_of: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
struct CouplingPiece {
    mode: usize,
    triplets: Vec<(u32, u32, Complex64)>,
}

/// Assemble the full Hamiltonian; dimension 3^n·(n_max+1)^n_modes.
pub fn build_full(
    modes: &NormalModes,
    spec: &ChainSpec,
    n_max: usize,
    init: PhononInit,
) -> Result<FullHamiltonian> {
    let n = spec.n_ions;
    if modes.n_ions() != n {
        return Err(Error::Invalid(format!(
            "mode data for {} ions used with a {}-ion spec",
            modes.n_ions(),
            n
        )));
    }
    if n_max < 1 {
        return Err(Error::Invalid("n_max must be at least 1".into()));
    }
    let basis = Basis::shared(n)?;
    let n_modes = n;
    let f = n_max + 1;
    let fock_total = f.checked_pow(n_modes as u32).ok_or_else(|| {
        Error::TooLarge("phonon space overflows".into())
    })?;
    let dim = basis.dim() * fock_total;
    if dim > FULL_DIM_CAP {
        return Err(Error::TooLarge(format!(
            "spin ⊗ phonon dimension {dim} exceeds {FULL_DIM_CAP}; lower n_max"
        )));
    }

    let fock_stride = |m: usize| f.pow((n_modes - 1 - m) as u32);
    let fock_digit = |fk: usize, m: usize| (fk / fock_stride(m)) % f;

    let mut pieces = Vec::new();
    for i in 1..=n {
        let spin_stride = 3usize.pow((n - i) as u32);
        for m in 0..n_modes {
            let coeff = modes.lamb_dicke[(i - 1, m)] * spec.rabi_freqs_hz[i - 1] / 2.0;
            if coeff == 0.0 {
                continue;
            }
            let mut triplets = Vec::new();
            for sk in 0..basis.dim() {
                if basis.digit(sk, i) == 2 {
                    continue;
                }
                for fk in 0..fock_total {
                    let nm = fock_digit(fk, m);
                    if nm == 0 {
                        continue;
                    }
                    let row = (sk + spin_stride) * fock_total + (fk - fock_stride(m));
                    let col = sk * fock_total + fk;
                    // −(i η Ω / 2√2)·√2·√n_m = −i (ηΩ/2) √n_m
                    let val = Complex64::new(0.0, -coeff * (nm as f64).sqrt());
                    triplets.push((row as u32, col as u32, val));
                }
            }
            pieces.push(CouplingPiece { mode: m, triplets });
        }
    }

    let deltas: Vec<f64> = (0..n_modes).map(|m| spec.mu_hz - modes.mode_freqs_hz[m]).collect();
    let fock_of: Vec<Vec<usize>> = (0..dim)
        .map(|idx| {
            let fk = idx % fock_total;
            (0..n_modes).map(|m| fock_digit(fk, m)).collect()
        })
        .collect();

    Ok(FullHamiltonian { basis, n_modes, n_max, deltas, init, pieces, fock_of })
}

impl FullHamiltonian {
    pub fn dim(&self) -> usize {
        self.fock_of.len()
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn init(&self) -> PhononInit {
        self.init
    }

    fn fock_total(&self) -> usize {
        (self.n_max + 1).pow(self.n_modes as u32)
    }

    /// The interaction-picture operator at time t, oscillating phases
    /// written out.
    pub fn operator_at(&self, t: f64) -> LinearOp {
        let dim = self.dim();
        let mut triplets = Vec::new();
        for piece in &self.pieces {
            let phase = Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * self.deltas[piece.mode] * t,
            );
            for &(r, c, v) in &piece.triplets {
                let fv = v * phase;
                triplets.push((r, c, fv));
                triplets.push((c, r, fv.conj()));
            }
        }
        LinearOp::from_sparse(dim, vec![0.0; dim], triplets, true)
    }

    /// Static operator in the frame rotating with each mode's beatnote
    /// offset: the coupling terms lose their phases and the phonons gain
    /// −Σ_m (μ−ω_m) a_m†a_m. Exactly unitarily equivalent to the
    /// interaction-picture evolution, and spin populations agree in both
    /// frames.
    pub fn rotating_frame_op(&self) -> LinearOp {
        let dim = self.dim();
        let mut triplets = Vec::new();
        for piece in &self.pieces {
            for &(r, c, v) in &piece.triplets {
                triplets.push((r, c, v));
                triplets.push((c, r, v.conj()));
            }
        }
        let diag: Vec<f64> = (0..dim)
            .map(|idx| {
                -(0..self.n_modes)
                    .map(|m| self.deltas[m] * self.fock_of[idx][m] as f64)
                    .sum::<f64>()
            })
            .collect();
        LinearOp::from_sparse(dim, diag, triplets, true)
    }

    fn apply_at(&self, t: f64, v: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.dim());
        for piece in &self.pieces {
            let phase = Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * self.deltas[piece.mode] * t,
            );
            for &(r, c, val) in &piece.triplets {
                let fv = val * phase;
                out[r as usize] += fv * v[c as usize];
                out[c as usize] += fv.conj() * v[r as usize];
            }
        }
        out
    }

    /// Weighted list of initial Fock configurations for the configured
    /// phonon state (single vacuum entry for the ground state).
    fn initial_fock_configs(&self) -> Vec<(usize, f64)> {
        let nbar = self.init.nbar();
        let fock_total = self.fock_total();
        if nbar == 0.0 {
            return vec![(0, 1.0)];
        }
        let p_n = |n: usize| nbar.powi(n as i32) / (1.0 + nbar).powi(n as i32 + 1);
        let mut configs = Vec::new();
        for fk in 0..fock_total {
            let w: f64 = self.fock_of[fk].iter().map(|&n| p_n(n)).product();
            if w > 1e-9 {
                configs.push((fk, w));
            }
        }
        let total: f64 = configs.iter().map(|(_, w)| w).sum();
        for c in &mut configs {
            c.1 /= total;
        }
        configs
    }

    /// Evolve a spin state (phonons initialized per the descriptor) and
    /// record spin-pattern populations at the requested times. Exact, via
    /// the rotating-frame eigendecomposition.
    pub fn evolve_populations(&self, spin0: &SpinState, times: &[f64]) -> Result<FullEvolution> {
        if spin0.dim() != self.basis.dim() {
            return Err(Error::Invalid("spin state dimension does not match".into()));
        }
        let dim = self.dim();
        let fock_total = self.fock_total();
        let h = self.rotating_frame_op().to_dense();
        let eig = h.symmetric_eigen();

        let mut spin_pops = vec![vec![0.0; self.basis.dim()]; times.len()];
        let mut top_level_max = 0.0f64;

        for (fk0, weight) in self.initial_fock_configs() {
            let mut psi0 = DVector::<Complex64>::zeros(dim);
            for sk in 0..self.basis.dim() {
                psi0[sk * fock_total + fk0] = spin0.amplitudes()[sk];
            }
            let coeff = eig.eigenvectors.adjoint() * &psi0;
            for (ti, &t) in times.iter().enumerate() {
                let phased = DVector::from_iterator(
                    dim,
                    coeff.iter().enumerate().map(|(mm, &c)| {
                        c * Complex64::from_polar(
                            1.0,
                            -2.0 * std::f64::consts::PI * eig.eigenvalues[mm] * t,
                        )
                    }),
                );
                let psi = &eig.eigenvectors * phased;
                let mut top = 0.0;
                for idx in 0..dim {
                    let p = psi[idx].norm_sqr();
                    spin_pops[ti][idx / fock_total] += weight * p;
                    if self.fock_of[idx].contains(&self.n_max) {
                        top += p;
                    }
                }
                top_level_max = top_level_max.max(weight * top);
            }
        }

        let flagged = top_level_max > TRUNCATION_FLAG_LEVEL;
        Ok(FullEvolution { times: times.to_vec(), spin_pops, top_level_max, flagged })
    }

    /// Direct integration of the oscillating interaction-picture operator
    /// with piecewise-constant steps and Richardson halving; used to
    /// cross-validate the rotating-frame path over short windows.
    pub fn evolve_integrated(&self, spin0: &SpinState, duration: f64) -> Result<(Vec<f64>, f64)> {
        let fock_total = self.fock_total();
        let mut psi0 = DVector::<Complex64>::zeros(self.dim());
        for sk in 0..self.basis.dim() {
            psi0[sk * fock_total] = spin0.amplitudes()[sk];
        }
        let (vecs, achieved) = integrate_pwc_adaptive(
            |t, v| self.apply_at(t, v),
            psi0,
            &[duration],
            INTEGRATION_TOL,
        )?;
        let psi = &vecs[0];
        let mut pops = vec![0.0; self.basis.dim()];
        for idx in 0..self.dim() {
            pops[idx / fock_total] += psi[idx].norm_sqr();
        }
        Ok((pops, achieved))
    }
}

/// Spin-pattern populations along a full-model run.
#[derive(Debug, Clone)]
pub struct FullEvolution {
    pub times: Vec<f64>,
    /// Per time, the 3^n spin-pattern populations (phonons traced out).
    pub spin_pops: Vec<Vec<f64>>,
    /// Largest population found in the top Fock level of any mode.
    pub top_level_max: f64,
    /// True when the truncation monitor exceeded its threshold.
    pub flagged: bool,
}

/// Beatnote offset that places μ at `ratio` × (largest η_{i,COM} Ω_i) above
/// the COM mode.
pub fn detuning_for_ratio(modes: &NormalModes, spec: &ChainSpec, ratio: f64) -> f64 {
    let max_eo = (0..spec.n_ions)
        .map(|i| (modes.lamb_dicke[(i, 0)] * spec.rabi_freqs_hz[i]).abs())
        .fold(0.0, f64::max);
    modes.mode_freqs_hz[0] + ratio * max_eo
}

/// Outcome of one full-vs-effective comparison.
#[derive(Debug, Clone, Copy)]
pub struct ModelComparison {
    pub ratio: f64,
    pub mu_hz: f64,
    pub j12_hz: f64,
    pub flop_period_s: f64,
    /// max over sampled times and spin patterns of |P_full − P_eff|.
    pub max_discrepancy: f64,
    pub top_level_max: f64,
    pub flagged: bool,
}

/// Evolve |00⋯0⟩ under both the full spin-phonon model and the effective
/// XY model (V terms at the matching n̄) for one flop period of the
/// nearest-neighbor coupling, and report the worst population discrepancy.
pub fn compare_full_vs_effective(
    base: &ChainSpec,
    n_max: usize,
    init: PhononInit,
    ratio: f64,
    n_times: usize,
) -> Result<ModelComparison> {
    let modes = crate::ionchain::transverse_modes(base)?;
    let mut spec = base.clone();
    spec.mu_hz = detuning_for_ratio(&modes, base, ratio);
    let coupling = CouplingSet::from_chain(&modes, &spec)?;
    let j12 = coupling.j_matrix[(0, 1)];
    if j12 == 0.0 {
        return Err(Error::Invalid("nearest-neighbor coupling is zero".into()));
    }
    let flop = 1.0 / (std::f64::consts::SQRT_2 * j12.abs());
    let times: Vec<f64> = (1..=n_times).map(|k| flop * k as f64 / n_times as f64).collect();

    let eff = build_effective(&coupling, &spec, VTermMode::On { nbar: init.nbar() })?;
    let basis = Arc::clone(eff.basis());
    let psi0 = SpinState::all_zero(Arc::clone(&basis));
    let eff_states = eff.evolve_sampled(&psi0, &times)?;

    let full = build_full(&modes, &spec, n_max, init)?;
    let full_run = full.evolve_populations(&psi0, &times)?;

    let mut worst = 0.0f64;
    for (ti, eff_state) in eff_states.states.iter().enumerate() {
        let pe = eff_state.populations();
        for (k, &pf) in full_run.spin_pops[ti].iter().enumerate() {
            worst = worst.max((pf - pe[k]).abs());
        }
    }
    Ok(ModelComparison {
        ratio,
        mu_hz: spec.mu_hz,
        j12_hz: j12,
        flop_period_s: flop,
        max_discrepancy: worst,
        top_level_max: full_run.top_level_max,
        flagged: full_run.flagged,
    })
}
