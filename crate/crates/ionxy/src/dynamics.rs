//! Effective spin-1 XY dynamics: Hamiltonian assembly, exact propagation,
//! spectra, adiabatic ramps of the (S_z)² field, and symmetry-sector
//! analysis.
//!
//! Evolution convention: U(t) = exp(−i2πHt) with H in Hz and t in seconds.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::couplings::CouplingSet;
use crate::error::{Error, Result};
use crate::ionchain::ChainSpec;
use crate::quantum::{Basis, LinearOp, SpinState, DENSE_DIM_CAP};

/// L2 acceptance threshold for time-dependent integration refinements.
pub const INTEGRATION_TOL: f64 = 1e-8;

/// Relative gap below which eigenvalues count as one degenerate multiplet.
pub const DEGENERACY_REL_GAP: f64 = 1e-9;

/// Default thermal occupation entering the virtual-phonon factor (2n̄+1).
pub const DEFAULT_NBAR: f64 = 0.05;

/// Shape of the time-dependent (S_z)² field D(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RampShape {
    /// D(t) = D₀ e^{−t/τ}.
    Exponential,
    /// D(t) = D₀ (1 − t/T), clamped at 0.
    Linear,
    /// Piecewise-linear table of (time s, D Hz), sorted by time.
    Table(Vec<(f64, f64)>),
}

/// Time profile of the global (S_z)² field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampProfile {
    pub shape: RampShape,
    pub d0_hz: f64,
    /// Time constant of the exponential shape (s); ignored otherwise.
    pub tau_s: f64,
    pub duration_s: f64,
}

impl RampProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::Invalid(format!("ramp duration must be positive, got {}", self.duration_s)));
        }
        if let RampShape::Exponential = self.shape {
            if !(self.tau_s > 0.0) {
                return Err(Error::Invalid(format!("ramp time constant must be positive, got {}", self.tau_s)));
            }
        }
        if let RampShape::Table(pts) = &self.shape {
            if pts.is_empty() || pts.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::Invalid("ramp table must be nonempty with strictly increasing times".into()));
            }
        }
        Ok(())
    }

    pub fn d_at(&self, t: f64) -> f64 {
        match &self.shape {
            RampShape::Exponential => self.d0_hz * (-t / self.tau_s).exp(),
            RampShape::Linear => self.d0_hz * (1.0 - t / self.duration_s).max(0.0),
            RampShape::Table(pts) => {
                if t <= pts[0].0 {
                    return pts[0].1;
                }
                for w in pts.windows(2) {
                    if t <= w[1].0 {
                        let f = (t - w[0].0) / (w[1].0 - w[0].0);
                        return w[0].1 + f * (w[1].1 - w[0].1);
                    }
                }
                pts[pts.len() - 1].1
            }
        }
    }
}

/// Whether the virtual-phonon shift terms enter the effective Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VTermMode {
    Off,
    /// Adds Σ_{i,m} V_{i,m} [(2n̄+1) S_z^i − (S_z^i)²] with the phonon
    /// factor frozen at its initial-state expectation.
    On { nbar: f64 },
}

/// H(t) = Σ_{i<j} (J_ij/4)(S₊^i S₋^j + S₋^i S₊^j) + D(t) Σ_i (S_z^i)²
/// + per-site shifts (+ optional V-derived global terms).
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    basis: Arc<Basis>,
    j_matrix: DMatrix<f64>,
    /// Off-diagonal hop entries (row, col, value); value is J_ij/2.
    hops: Vec<(u32, u32, f64)>,
    /// Time-independent diagonal (site shifts, V terms), Hz.
    static_diag: Vec<f64>,
    /// Σ_i (S_z^i)² per basis index.
    sz2_diag: Vec<f64>,
    /// Static D when no ramp is attached, Hz.
    d_hz: f64,
    ramp: Option<RampProfile>,
}

/// Assemble the effective Hamiltonian from a coupling set and chain spec.
pub fn build_effective(
    coupling: &CouplingSet,
    spec: &ChainSpec,
    v_terms: VTermMode,
) -> Result<EffectiveHamiltonian> {
    let n = spec.n_ions;
    if coupling.n_ions() != n {
        return Err(Error::Invalid(format!(
            "coupling set for {} ions used with a {}-ion spec",
            coupling.n_ions(),
            n
        )));
    }
    if let Some(shifts) = &spec.site_shifts {
        if shifts.len() != n {
            return Err(Error::Invalid(format!(
                "site_shifts has length {}, expected {}",
                shifts.len(),
                n
            )));
        }
    }
    let basis = Basis::shared(n)?;
    let dim = basis.dim();

    let mut hops = Vec::new();
    for i in 1..=n {
        for j in (i + 1)..=n {
            let jij = coupling.j_matrix[(i - 1, j - 1)];
            if jij == 0.0 {
                continue;
            }
            // one shared float for both hop directions keeps the swap
            // symmetry exact entrywise
            let half_j = 0.5 * jij;
            let stride_i = 3usize.pow((n - i) as u32);
            let stride_j = 3usize.pow((n - j) as u32);
            for k in 0..dim {
                let di = basis.digit(k, i);
                let dj = basis.digit(k, j);
                // S₊^i S₋^j: raise i, lower j (ladder factors √2·√2 fold
                // into J/4 → J/2)
                if di < 2 && dj > 0 {
                    let kk = k + stride_i - stride_j;
                    hops.push((kk as u32, k as u32, half_j));
                }
                // S₋^i S₊^j
                if di > 0 && dj < 2 {
                    let kk = k - stride_i + stride_j;
                    hops.push((kk as u32, k as u32, half_j));
                }
            }
        }
    }

    let mut static_diag = vec![0.0; dim];
    if let Some(shifts) = &spec.site_shifts {
        for k in 0..dim {
            let mut e = 0.0;
            for (site, sh) in shifts.iter().enumerate() {
                let m = basis.digit(k, site + 1) as f64 - 1.0;
                e += sh.linear_hz * m + sh.quadratic_hz * m * m;
            }
            static_diag[k] += e;
        }
    }
    if let VTermMode::On { nbar } = v_terms {
        let phonon_factor = 2.0 * nbar + 1.0;
        let row_sums = coupling.v_row_sums();
        for k in 0..dim {
            let mut e = 0.0;
            for (i, &sv) in row_sums.iter().enumerate() {
                let m = basis.digit(k, i + 1) as f64 - 1.0;
                e += sv * (phonon_factor * m - m * m);
            }
            static_diag[k] += e;
        }
    }

    let sz2_diag: Vec<f64> = (0..dim)
        .map(|k| {
            (1..=n)
                .map(|s| {
                    let m = basis.digit(k, s) as f64 - 1.0;
                    m * m
                })
                .sum()
        })
        .collect();

    Ok(EffectiveHamiltonian {
        basis,
        j_matrix: coupling.j_matrix.clone(),
        hops,
        static_diag,
        sz2_diag,
        d_hz: spec.d_field_hz,
        ramp: None,
    })
}

impl EffectiveHamiltonian {
    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn j_matrix(&self) -> &DMatrix<f64> {
        &self.j_matrix
    }

    pub fn ramp(&self) -> Option<&RampProfile> {
        self.ramp.as_ref()
    }

    /// Attach a D(t) ramp; the static D field is ignored while attached.
    pub fn with_ramp(mut self, ramp: RampProfile) -> Result<EffectiveHamiltonian> {
        ramp.validate()?;
        self.ramp = Some(ramp);
        Ok(self)
    }

    pub fn is_static(&self) -> bool {
        self.ramp.is_none()
    }

    pub fn d_at(&self, t: f64) -> f64 {
        match &self.ramp {
            Some(r) => r.d_at(t),
            None => self.d_hz,
        }
    }

    fn diag_at_d(&self, d: f64) -> Vec<f64> {
        self.static_diag
            .iter()
            .zip(&self.sz2_diag)
            .map(|(&s, &z)| s + d * z)
            .collect()
    }

    /// Hop part only, as an operator (the first line of the Hamiltonian).
    pub fn xy_operator(&self) -> LinearOp {
        let triplets = self
            .hops
            .iter()
            .map(|&(r, c, v)| (r, c, Complex64::new(v, 0.0)))
            .collect();
        LinearOp::from_sparse(self.dim(), vec![0.0; self.dim()], triplets, true)
    }

    /// Diagonal field part at time t.
    pub fn field_operator_at(&self, t: f64) -> LinearOp {
        LinearOp::from_sparse(self.dim(), self.diag_at_d(self.d_at(t)), Vec::new(), true)
    }

    /// Full operator at time t (equals [`Self::operator`] when static).
    pub fn operator_at(&self, t: f64) -> LinearOp {
        let triplets = self
            .hops
            .iter()
            .map(|&(r, c, v)| (r, c, Complex64::new(v, 0.0)))
            .collect();
        LinearOp::from_sparse(self.dim(), self.diag_at_d(self.d_at(t)), triplets, true)
    }

    pub fn operator(&self) -> LinearOp {
        self.operator_at(0.0)
    }

    /// Dense real-symmetric matrix restricted to `indices` at field D = `d`.
    fn dense_real_in(&self, indices: &[usize], d: f64) -> DMatrix<f64> {
        let m = indices.len();
        let mut pos = vec![usize::MAX; self.dim()];
        for (a, &k) in indices.iter().enumerate() {
            pos[k] = a;
        }
        let mut h = DMatrix::zeros(m, m);
        for (a, &k) in indices.iter().enumerate() {
            h[(a, a)] = self.static_diag[k] + d * self.sz2_diag[k];
        }
        for &(r, c, v) in &self.hops {
            let (pr, pc) = (pos[r as usize], pos[c as usize]);
            if pr != usize::MAX && pc != usize::MAX {
                h[(pr, pc)] += v;
            }
        }
        h
    }

    fn apply_at(&self, t: f64, v: &DVector<Complex64>) -> DVector<Complex64> {
        let d = self.d_at(t);
        let mut out = DVector::from_iterator(
            self.dim(),
            self.static_diag
                .iter()
                .zip(&self.sz2_diag)
                .zip(v.iter())
                .map(|((&s, &z), &a)| a * (s + d * z)),
        );
        for &(r, c, val) in &self.hops {
            out[r as usize] += v[c as usize] * val;
        }
        out
    }

    /// Propagate `state` for `duration` seconds. Static Hamiltonians use
    /// the exact eigendecomposition propagator; ramped ones use
    /// piecewise-constant steps refined until successive halvings agree to
    /// [`INTEGRATION_TOL`] in L2.
    pub fn evolve(&self, state: &SpinState, duration: f64) -> Result<SpinState> {
        if self.is_static() {
            let prop = self.propagator()?;
            prop.advance(state, duration)
        } else {
            let samples = self.evolve_sampled(state, &[duration])?;
            Ok(samples.states.into_iter().next().unwrap())
        }
    }

    /// Propagate and record the state at each requested time (sorted,
    /// nonnegative). Works for static and ramped Hamiltonians.
    pub fn evolve_sampled(&self, state: &SpinState, times: &[f64]) -> Result<Sampled> {
        if times.is_empty() {
            return Err(Error::Invalid("no sample times given".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
            return Err(Error::Invalid("sample times must be nonnegative and increasing".into()));
        }
        if self.is_static() {
            let prop = self.propagator()?;
            let states = times
                .iter()
                .map(|&t| prop.advance(state, t))
                .collect::<Result<Vec<_>>>()?;
            return Ok(Sampled { states, achieved_tol: 0.0 });
        }
        let (vecs, achieved) = integrate_pwc_adaptive(
            |t, v| self.apply_at(t, v),
            state.amplitudes().clone(),
            times,
            INTEGRATION_TOL,
        )?;
        let states = vecs
            .into_iter()
            .map(|v| SpinState::new(Arc::clone(&self.basis), v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Sampled { states, achieved_tol: achieved })
    }

    /// Exact propagator for the static Hamiltonian.
    pub fn propagator(&self) -> Result<Propagator> {
        if !self.is_static() {
            return Err(Error::Invalid("propagator requires a static Hamiltonian".into()));
        }
        Propagator::new(self)
    }

    /// Lowest eigenpair, optionally restricted to a Σ S_z sector. Near-
    /// degenerate ground multiplets (relative gap < 1e-9) are returned in
    /// full and flagged.
    pub fn ground_state(&self, sector: Option<i32>) -> Result<GroundStateResult> {
        let d = self.d_at(0.0);
        let indices: Vec<usize> = match sector {
            Some(sz) => self.basis.sector_indices(sz),
            None => (0..self.dim()).collect(),
        };
        if indices.is_empty() {
            return Err(Error::Invalid(format!("sector {sector:?} is empty")));
        }
        if indices.len() > DENSE_DIM_CAP {
            return Err(Error::TooLarge(format!(
                "dense diagonalization capped at {DENSE_DIM_CAP}, sector has {}",
                indices.len()
            )));
        }
        let h = self.dense_real_in(&indices, d);
        let eig = h.symmetric_eigen();
        let m = indices.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let e0 = eig.eigenvalues[order[0]];
        let span = (eig.eigenvalues[order[m - 1]] - e0).max(e0.abs()).max(1e-300);

        let mut states = Vec::new();
        for &idx in &order {
            let e = eig.eigenvalues[idx];
            if (e - e0) > DEGENERACY_REL_GAP * span && !states.is_empty() {
                break;
            }
            let mut amps = DVector::zeros(self.dim());
            for (a, &k) in indices.iter().enumerate() {
                amps[k] = Complex64::new(eig.eigenvectors[(a, idx)], 0.0);
            }
            states.push(SpinState::new(Arc::clone(&self.basis), amps)?);
        }
        let degenerate = states.len() > 1;
        Ok(GroundStateResult { energy: e0, states, degenerate })
    }

    /// All eigenvalues within a sector, ascending.
    pub fn spectrum(&self, sector: Option<i32>) -> Result<Vec<f64>> {
        let d = self.d_at(0.0);
        let indices: Vec<usize> = match sector {
            Some(sz) => self.basis.sector_indices(sz),
            None => (0..self.dim()).collect(),
        };
        if indices.len() > DENSE_DIM_CAP {
            return Err(Error::TooLarge(format!(
                "dense diagonalization capped at {DENSE_DIM_CAP}, requested {}",
                indices.len()
            )));
        }
        let h = self.dense_real_in(&indices, d);
        let mut evals: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(evals)
    }

    /// ⟨ψ|H(t)|ψ⟩ in Hz.
    pub fn energy_expectation(&self, state: &SpinState, t: f64) -> f64 {
        let hv = self.apply_at(t, state.amplitudes());
        state.amplitudes().dotc(&hv).re
    }
}

/// States sampled along a propagation, with the achieved refinement gap.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub states: Vec<SpinState>,
    /// L2 distance between the last two refinements (0 for exact paths).
    pub achieved_tol: f64,
}

/// Lowest eigenpair; `states` holds the full multiplet when degenerate.
#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub energy: f64,
    pub states: Vec<SpinState>,
    pub degenerate: bool,
}

impl GroundStateResult {
    pub fn state(&self) -> &SpinState {
        &self.states[0]
    }
}

/// Cached eigendecomposition propagator for a static Hamiltonian.
pub struct Propagator {
    basis: Arc<Basis>,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
}

impl Propagator {
    fn new(h: &EffectiveHamiltonian) -> Result<Propagator> {
        if h.dim() > DENSE_DIM_CAP {
            return Err(Error::TooLarge(format!(
                "dense propagator capped at {DENSE_DIM_CAP} states, got {}",
                h.dim()
            )));
        }
        let indices: Vec<usize> = (0..h.dim()).collect();
        let dense = h.dense_real_in(&indices, h.d_at(0.0));
        let eig = dense.symmetric_eigen();
        Ok(Propagator {
            basis: Arc::clone(&h.basis),
            eigvecs: eig.eigenvectors,
            eigvals: eig.eigenvalues,
        })
    }

    /// |ψ(t)⟩ = V e^{−i2πEt} Vᵀ |ψ(0)⟩, exact up to the eigensolver.
    pub fn advance(&self, state: &SpinState, t: f64) -> Result<SpinState> {
        self.advance_scaled(state, t, 1.0)
    }

    /// Same, with every eigenvalue scaled by `energy_scale` (used for
    /// multiplicative coupling noise, which rescales the whole spectrum).
    pub fn advance_scaled(&self, state: &SpinState, t: f64, energy_scale: f64) -> Result<SpinState> {
        let dim = self.eigvals.len();
        if state.dim() != dim {
            return Err(Error::Invalid("state dimension does not match propagator".into()));
        }
        // coefficients in the eigenbasis (real V, complex ψ)
        let mut coeff = DVector::<Complex64>::zeros(dim);
        for m in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..dim {
                acc += Complex64::new(self.eigvecs[(k, m)], 0.0) * state.amplitudes()[k];
            }
            coeff[m] = acc;
        }
        for m in 0..dim {
            let phase = -2.0 * std::f64::consts::PI * self.eigvals[m] * energy_scale * t;
            coeff[m] *= Complex64::from_polar(1.0, phase);
        }
        let mut out = DVector::<Complex64>::zeros(dim);
        for k in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..dim {
                acc += Complex64::new(self.eigvecs[(k, m)], 0.0) * coeff[m];
            }
            out[k] = acc;
        }
        SpinState::new(Arc::clone(&self.basis), out)
    }
}

/// Propagate a state under an arbitrary static hermitian operator.
pub fn evolve_static(state: &SpinState, h: &LinearOp, duration: f64) -> Result<SpinState> {
    if h.dim() != state.dim() {
        return Err(Error::Invalid("operator and state dimensions differ".into()));
    }
    if h.dim() > DENSE_DIM_CAP {
        return Err(Error::TooLarge(format!(
            "dense propagation capped at {DENSE_DIM_CAP} states, got {}",
            h.dim()
        )));
    }
    let dense = h.to_dense();
    let eig = dense.symmetric_eigen();
    let coeff = eig.eigenvectors.adjoint() * state.amplitudes();
    let phased = DVector::from_iterator(
        h.dim(),
        coeff.iter().enumerate().map(|(m, &c)| {
            c * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * eig.eigenvalues[m] * duration)
        }),
    );
    let out = &eig.eigenvectors * phased;
    SpinState::new(Arc::clone(state.basis()), out)
}

/// Apply exp(−i2πH̄h) to v via a truncated Taylor series; H̄ is the
/// caller-evaluated midpoint operator. Splits the step on slow convergence.
pub(crate) fn expmv_step<F>(apply: &F, t_mid: f64, h: f64, v: &DVector<Complex64>) -> DVector<Complex64>
where
    F: Fn(f64, &DVector<Complex64>) -> DVector<Complex64>,
{
    let factor = Complex64::new(0.0, -2.0 * std::f64::consts::PI * h);
    let mut sum = v.clone();
    let mut term = v.clone();
    for k in 1..=48u32 {
        term = apply(t_mid, &term) * (factor / k as f64);
        sum += &term;
        if term.norm() <= 1e-17 * sum.norm() {
            return sum;
        }
    }
    // not converged: halve the step (same midpoint Hamiltonian)
    let half = expmv_step(apply, t_mid, h / 2.0, v);
    expmv_step(apply, t_mid, h / 2.0, &half)
}

fn integrate_pwc_pass<F>(
    apply: &F,
    psi0: &DVector<Complex64>,
    times: &[f64],
    steps_per_segment: usize,
) -> Vec<DVector<Complex64>>
where
    F: Fn(f64, &DVector<Complex64>) -> DVector<Complex64>,
{
    let mut psi = psi0.clone();
    let mut out = Vec::with_capacity(times.len());
    let mut t_prev = 0.0;
    for &t in times {
        let span = t - t_prev;
        if span > 0.0 {
            let h = span / steps_per_segment as f64;
            for s in 0..steps_per_segment {
                let mid = t_prev + (s as f64 + 0.5) * h;
                psi = expmv_step(apply, mid, h, &psi);
            }
        }
        t_prev = t;
        out.push(psi.clone());
    }
    out
}

/// Piecewise-constant (midpoint) propagation over the sample grid, with
/// Richardson-style step halving until two successive refinements agree to
/// `tol` in L2 at every sample time.
pub(crate) fn integrate_pwc_adaptive<F>(
    apply: F,
    psi0: DVector<Complex64>,
    times: &[f64],
    tol: f64,
) -> Result<(Vec<DVector<Complex64>>, f64)>
where
    F: Fn(f64, &DVector<Complex64>) -> DVector<Complex64>,
{
    const MAX_TOTAL_STEPS: usize = 1 << 22;
    let mut steps = 8usize;
    let mut prev = integrate_pwc_pass(&apply, &psi0, times, steps);
    let mut achieved = f64::INFINITY;
    while steps.saturating_mul(times.len()) <= MAX_TOTAL_STEPS {
        steps *= 2;
        let cur = integrate_pwc_pass(&apply, &psi0, times, steps);
        achieved = prev
            .iter()
            .zip(&cur)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        prev = cur;
        if achieved < tol {
            return Ok((prev, achieved));
        }
    }
    Err(Error::IntegrationFailure { requested: tol, achieved })
}

/// One sampled point of an adiabatic preparation run.
#[derive(Debug, Clone)]
pub struct AdiabaticSample {
    pub time_s: f64,
    pub d_hz: f64,
    pub state: SpinState,
    /// |⟨instantaneous ground|ψ⟩|² within the Σ S_z = 0 sector.
    pub ground_fidelity: f64,
    /// |⟨tracked eigenstate|ψ⟩|², following the eigenvector continuously
    /// from the initial ground state.
    pub tracked_fidelity: f64,
    pub energy_hz: f64,
    pub norm: f64,
}

#[derive(Debug, Clone)]
pub struct AdiabaticResult {
    pub samples: Vec<AdiabaticSample>,
    pub final_state: SpinState,
    /// Overlap of the prepared start state with |00⋯0⟩.
    pub start_overlap_all_zero: f64,
    pub achieved_tol: f64,
}

/// Ramp the (S_z)² field down along `ramp`, starting from the exact ground
/// state of H(0), and record the trajectory at `n_samples` points.
pub fn adiabatic_prepare(
    coupling: &CouplingSet,
    spec: &ChainSpec,
    ramp: &RampProfile,
    n_samples: usize,
) -> Result<AdiabaticResult> {
    ramp.validate()?;
    if n_samples < 2 {
        return Err(Error::Invalid("need at least 2 samples".into()));
    }
    let ham = build_effective(coupling, spec, VTermMode::Off)?.with_ramp(ramp.clone())?;

    // start in the exact ground state of H(0): |00⋯0⟩ dressed by the
    // couplings at large D
    let d0 = ramp.d_at(0.0);
    let start_ham = {
        let mut s = spec.clone();
        s.d_field_hz = d0;
        build_effective(coupling, &s, VTermMode::Off)?
    };
    let start = start_ham.ground_state(Some(0))?;
    let mut psi = start.state().clone();
    let all_zero = SpinState::all_zero(Arc::clone(ham.basis()));
    let start_overlap_all_zero = psi.fidelity(&all_zero);

    let times: Vec<f64> = (1..=n_samples)
        .map(|k| ramp.duration_s * k as f64 / n_samples as f64)
        .collect();
    let sampled = ham.evolve_sampled(&psi, &times)?;

    let sector = ham.basis().sector_indices(0);
    let mut tracked_prev: Option<DVector<f64>> = None;
    let mut samples = Vec::with_capacity(n_samples + 1);
    let mut record = |t: f64, state: &SpinState, tracked_prev: &mut Option<DVector<f64>>| {
        let d = ramp.d_at(t);
        let h_sec = ham.dense_real_in(&sector, d);
        let eig = h_sec.symmetric_eigen();
        let m = sector.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

        // project ψ into the sector
        let proj = DVector::from_iterator(m, sector.iter().map(|&k| state.amplitudes()[k]));
        let overlap_with = |col: usize| -> f64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..m {
                acc += Complex64::new(eig.eigenvectors[(a, col)], 0.0) * proj[a];
            }
            acc.norm_sqr()
        };
        let ground_fidelity = overlap_with(order[0]);

        // continue the tracked eigenvector by maximal overlap with the
        // previous one
        let tracked_col = match tracked_prev {
            None => order[0],
            Some(prev) => (0..m)
                .max_by(|&a, &b| {
                    let fa = eig.eigenvectors.column(a).dot(prev).abs();
                    let fb = eig.eigenvectors.column(b).dot(prev).abs();
                    fa.partial_cmp(&fb).unwrap()
                })
                .unwrap(),
        };
        let tracked_fidelity = overlap_with(tracked_col);
        *tracked_prev = Some(DVector::from_iterator(
            m,
            (0..m).map(|a| eig.eigenvectors[(a, tracked_col)]),
        ));

        samples.push(AdiabaticSample {
            time_s: t,
            d_hz: d,
            state: state.clone(),
            ground_fidelity,
            tracked_fidelity,
            energy_hz: ham.energy_expectation(state, t),
            norm: state.norm(),
        });
    };

    record(0.0, &psi, &mut tracked_prev);
    for (t, st) in times.iter().zip(&sampled.states) {
        record(*t, st, &mut tracked_prev);
    }
    psi = sampled.states.last().unwrap().clone();

    Ok(AdiabaticResult {
        samples,
        final_state: psi,
        start_overlap_all_zero,
        achieved_tol: sampled.achieved_tol,
    })
}

/// Lowest energies of the symmetric/antisymmetric sectors of the global
/// |+⟩↔|−⟩ swap, at one D value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SectorSweepPoint {
    pub d_hz: f64,
    pub e_symmetric_hz: f64,
    pub e_antisymmetric_hz: f64,
}

/// Symmetry analysis of a state and Hamiltonian.
#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub inversion_expectation: f64,
    pub sx_pi_expectation: f64,
    /// ±1 when the state is an eigenstate (residual < 1e-9), else None.
    pub inversion_sector: Option<i8>,
    pub sx_pi_sector: Option<i8>,
    pub commutator_inversion_max: f64,
    pub commutator_sx_pi_max: f64,
    /// Whether the stored J matrix is mirror symmetric to 1e-12 (relative).
    pub mirror_symmetric: bool,
    pub sweep: Vec<SectorSweepPoint>,
    /// D at which the sector ground energies cross, if the sweep brackets one.
    pub crossing_d_hz: Option<f64>,
    /// max |⟨sym|H|anti⟩| over the swept D values (exactly 0 for a
    /// swap-symmetric Hamiltonian).
    pub intersector_coupling_max: f64,
}

/// Swap-adapted partition of a sector: fixed kets and (k, swap(k)) pairs.
struct SwapBlocks {
    indices: Vec<usize>,
    sym_dim: usize,
    anti_dim: usize,
    /// rows: (kind, a, b) with kind 0 = fixed ket a; 1 = pair (a, b)
    sym_rows: Vec<(u8, usize, usize)>,
    anti_rows: Vec<(usize, usize)>,
}

fn swap_blocks(basis: &Basis, sector: &[usize]) -> SwapBlocks {
    let n = basis.n_sites();
    let mut pos = std::collections::HashMap::new();
    for (a, &k) in sector.iter().enumerate() {
        pos.insert(k, a);
    }
    let swap_of = |k: usize| -> usize {
        let digits: Vec<usize> = (1..=n).map(|s| 2 - basis.digit(k, s)).collect();
        basis.index_from_digits(&digits)
    };
    let mut sym_rows = Vec::new();
    let mut anti_rows = Vec::new();
    for (a, &k) in sector.iter().enumerate() {
        let p = pos[&swap_of(k)];
        if p == a {
            sym_rows.push((0u8, a, a));
        } else if a < p {
            sym_rows.push((1u8, a, p));
            anti_rows.push((a, p));
        }
    }
    SwapBlocks {
        indices: sector.to_vec(),
        sym_dim: sym_rows.len(),
        anti_dim: anti_rows.len(),
        sym_rows,
        anti_rows,
    }
}

impl SwapBlocks {
    /// Project the dense sector matrix onto the symmetric/antisymmetric
    /// blocks and measure the inter-sector coupling. Element combinations
    /// are ordered so that swap-conjugate entries cancel exactly.
    fn project(&self, h: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, f64) {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let ns = self.sym_dim;
        let na = self.anti_dim;
        let mut hs = DMatrix::zeros(ns, ns);
        let mut ha = DMatrix::zeros(na, na);
        let mut cross_max = 0.0f64;

        for (i, &(kind_i, a, b)) in self.sym_rows.iter().enumerate() {
            for (j, &(kind_j, c, d)) in self.sym_rows.iter().enumerate() {
                hs[(i, j)] = match (kind_i, kind_j) {
                    (0, 0) => h[(a, c)],
                    (0, 1) => r * (h[(a, c)] + h[(a, d)]),
                    (1, 0) => r * (h[(a, c)] + h[(b, c)]),
                    _ => 0.5 * ((h[(a, c)] + h[(a, d)]) + (h[(b, c)] + h[(b, d)])),
                };
            }
            // cross block: the paired differences cancel exactly when the
            // matrix entries are swap-conjugate floats
            for &(c, d) in &self.anti_rows {
                let cross = match kind_i {
                    0 => r * (h[(a, c)] - h[(a, d)]),
                    _ => 0.5 * ((h[(a, c)] - h[(a, d)]) + (h[(b, c)] - h[(b, d)])),
                };
                cross_max = cross_max.max(cross.abs());
            }
        }
        for (i, &(a, b)) in self.anti_rows.iter().enumerate() {
            for (j, &(c, d)) in self.anti_rows.iter().enumerate() {
                ha[(i, j)] = 0.5 * ((h[(a, c)] - h[(a, d)]) - (h[(b, c)] - h[(b, d)]));
            }
        }
        (hs, ha, cross_max)
    }
}

/// Diagnose inversion and |+⟩↔|−⟩ swap symmetry for a state and
/// Hamiltonian, and sweep the (S_z)² field to expose the sector-energy
/// crossing.
pub fn symmetry_diagnosis(
    ham: &EffectiveHamiltonian,
    state: &SpinState,
    d_sweep: &[f64],
) -> Result<SymmetryReport> {
    let basis = ham.basis();
    let inv = crate::quantum::inversion_op(basis);
    let swap = crate::quantum::rotation_pi_sx_op(basis);
    let h_op = ham.operator();

    let inv_state = state.apply(&inv)?;
    let swap_state = state.apply(&swap)?;
    let sector_of = |mapped: &SpinState| -> Option<i8> {
        for sign in [1.0f64, -1.0] {
            let mut residual = 0.0f64;
            for (a, b) in mapped.amplitudes().iter().zip(state.amplitudes().iter()) {
                residual += (a - b * sign).norm_sqr();
            }
            if residual.sqrt() < 1e-9 {
                return Some(sign as i8);
            }
        }
        None
    };

    let commutator_inversion_max = h_op.commutator_max(&inv)?;
    let commutator_sx_pi_max = h_op.commutator_max(&swap)?;

    let n = basis.n_sites();
    let jm = ham.j_matrix();
    let jscale = jm.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    let mirror_symmetric = (0..n).all(|i| {
        (0..n).all(|k| (jm[(i, k)] - jm[(n - 1 - i, n - 1 - k)]).abs() / jscale < 1e-12)
    });

    let sector = basis.sector_indices(0);
    let blocks = swap_blocks(basis, &sector);
    let mut sweep = Vec::with_capacity(d_sweep.len());
    let mut cross_max = 0.0f64;
    let energies_at = |d: f64, cross_acc: &mut f64| -> (f64, f64) {
        let h = ham.dense_real_in(&blocks.indices, d);
        let (hs, ha, cross) = blocks.project(&h);
        *cross_acc = cross_acc.max(cross);
        let es = hs.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let ea = ha.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        (es, ea)
    };
    for &d in d_sweep {
        let (es, ea) = energies_at(d, &mut cross_max);
        sweep.push(SectorSweepPoint { d_hz: d, e_symmetric_hz: es, e_antisymmetric_hz: ea });
    }

    // bisect the first sign change of E_sym − E_anti
    let mut crossing = None;
    for w in sweep.windows(2) {
        let f0 = w[0].e_symmetric_hz - w[0].e_antisymmetric_hz;
        let f1 = w[1].e_symmetric_hz - w[1].e_antisymmetric_hz;
        if f0 == 0.0 {
            crossing = Some(w[0].d_hz);
            break;
        }
        if f0 * f1 < 0.0 {
            let mut ignore = 0.0;
            let (mut lo, mut hi) = (w[0].d_hz, w[1].d_hz);
            let mut flo = f0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let (es, ea) = energies_at(mid, &mut ignore);
                let fm = es - ea;
                if fm == 0.0 || (hi - lo) < 1e-12 * hi.abs().max(1.0) {
                    break;
                }
                if flo * fm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            crossing = Some(0.5 * (lo + hi));
            break;
        }
    }

    Ok(SymmetryReport {
        inversion_expectation: state.overlap(&inv_state).re,
        sx_pi_expectation: state.overlap(&swap_state).re,
        inversion_sector: sector_of(&inv_state),
        sx_pi_sector: sector_of(&swap_state),
        commutator_inversion_max,
        commutator_sx_pi_max,
        mirror_symmetric,
        sweep,
        crossing_d_hz: crossing,
        intersector_coupling_max: cross_max,
    })
}
