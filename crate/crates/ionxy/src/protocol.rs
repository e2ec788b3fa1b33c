//! Measurement layer: global rotations on the |0⟩↔|±⟩ transitions, binary
//! bright/dark detection with optional mapping π pulses, shot sampling,
//! parity curves, and the two-qutrit entanglement witness.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::couplings::CouplingSet;
use crate::dynamics::{build_effective, EffectiveHamiltonian, VTermMode};
use crate::error::{Error, Result};
use crate::ionchain::ChainSpec;
use crate::quantum::SpinState;

/// Which |0⟩↔|±⟩ transition a pulse drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    ZeroPlus,
    ZeroMinus,
}

/// Global rotation R_{0±}(θ, φ) acting on every site simultaneously:
/// exp((iθ/2) Σ_k [e^{±iφ}(|±⟩⟨0|)_k + e^{∓iφ}(|0⟩⟨±|)_k]).
#[derive(Debug, Clone, Copy)]
pub struct RotationPulse {
    pub transition: Transition,
    pub theta: f64,
    pub phi: f64,
}

impl RotationPulse {
    pub fn zero_plus(theta: f64, phi: f64) -> RotationPulse {
        RotationPulse { transition: Transition::ZeroPlus, theta, phi }
    }

    pub fn zero_minus(theta: f64, phi: f64) -> RotationPulse {
        RotationPulse { transition: Transition::ZeroMinus, theta, phi }
    }

    /// Single-site 3×3 matrix of the pulse, basis ordered (−, 0, +). The
    /// generator squares to the identity on its 2×2 block, so the
    /// exponential is cos(θ/2)·1 + i sin(θ/2)·g exactly.
    pub fn site_matrix(&self) -> DMatrix<Complex64> {
        let c = Complex64::new((self.theta / 2.0).cos(), 0.0);
        let s = (self.theta / 2.0).sin();
        let mut u = DMatrix::identity(3, 3);
        match self.transition {
            Transition::ZeroPlus => {
                // block (|0⟩, |+⟩) = indices (1, 2)
                u[(1, 1)] = c;
                u[(2, 2)] = c;
                u[(2, 1)] = Complex64::i() * s * Complex64::from_polar(1.0, self.phi);
                u[(1, 2)] = Complex64::i() * s * Complex64::from_polar(1.0, -self.phi);
            }
            Transition::ZeroMinus => {
                // block (|−⟩, |0⟩) = indices (0, 1)
                u[(0, 0)] = c;
                u[(1, 1)] = c;
                u[(0, 1)] = Complex64::i() * s * Complex64::from_polar(1.0, -self.phi);
                u[(1, 0)] = Complex64::i() * s * Complex64::from_polar(1.0, self.phi);
            }
        }
        u
    }
}

/// Apply a global pulse to every site. The per-site generators commute
/// across sites, so the global unitary is the tensor power of the
/// single-site matrix.
pub fn apply_rotation(state: &SpinState, pulse: &RotationPulse) -> SpinState {
    let basis = Arc::clone(state.basis());
    let n = basis.n_sites();
    let u = pulse.site_matrix();
    let mut amps = state.amplitudes().clone();
    for site in 1..=n {
        let stride = 3usize.pow((n - site) as u32);
        let mut out = DVector::<Complex64>::zeros(amps.len());
        for k in 0..amps.len() {
            let d = (k / stride) % 3;
            let base = k - d * stride;
            let mut acc = Complex64::new(0.0, 0.0);
            for d2 in 0..3 {
                acc += u[(d, d2)] * amps[base + d2 * stride];
            }
            out[k] = acc;
        }
        amps = out;
    }
    SpinState::new(basis, amps).expect("dimensions preserved")
}

/// Apply a pulse sequence in application order (first element first).
pub fn apply_sequence(state: &SpinState, pulses: &[RotationPulse]) -> SpinState {
    let mut st = state.clone();
    for p in pulses {
        st = apply_rotation(&st, p);
    }
    st
}

/// Optional mapping π pulse before fluorescence detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mapping {
    /// Dark ⇔ the ion was in |0⟩.
    None,
    /// π pulse on |0⟩↔|+⟩: dark ⇔ the ion was in |+⟩.
    PiPlus,
    /// π pulse on |0⟩↔|−⟩: dark ⇔ the ion was in |−⟩.
    PiMinus,
}

/// Exact probabilities or seeded multinomial sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotMode {
    Exact,
    Sampled(u64),
}

#[derive(Debug, Clone, Copy)]
pub struct MeasurementConfig {
    pub mapping: Mapping,
    pub shots: ShotMode,
    pub seed: u64,
    /// Per-shot multiplicative Gaussian σ applied to all Rabi frequencies
    /// (couplings rescale by the square); only used by sampled scans that
    /// re-prepare the state per shot.
    pub rabi_noise_rel: Option<f64>,
}

impl MeasurementConfig {
    pub fn exact() -> MeasurementConfig {
        MeasurementConfig { mapping: Mapping::None, shots: ShotMode::Exact, seed: 0, rabi_noise_rel: None }
    }

    pub fn sampled(shots: u64, seed: u64) -> MeasurementConfig {
        MeasurementConfig { mapping: Mapping::None, shots: ShotMode::Sampled(shots), seed, rabi_noise_rel: None }
    }

    pub fn with_mapping(mut self, mapping: Mapping) -> MeasurementConfig {
        self.mapping = mapping;
        self
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Counter-based stream: one independent generator per (seed, run, point),
/// so parallel or re-ordered sampling stays reproducible.
pub fn stream_rng(seed: u64, run_id: u64, point: u64) -> ChaCha8Rng {
    let mut s = seed ^ 0x6a09e667f3bcc908;
    let mut key = [0u8; 32];
    let _ = splitmix64(&mut s);
    s ^= run_id.wrapping_mul(0x9e3779b97f4a7c15);
    let a = splitmix64(&mut s);
    s ^= point.wrapping_mul(0xc2b2ae3d27d4eb4f);
    let b = splitmix64(&mut s);
    let c = splitmix64(&mut s);
    let d = splitmix64(&mut s);
    key[0..8].copy_from_slice(&a.to_le_bytes());
    key[8..16].copy_from_slice(&b.to_le_bytes());
    key[16..24].copy_from_slice(&c.to_le_bytes());
    key[24..32].copy_from_slice(&d.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Joint bright/dark outcome data. Patterns are indexed by bits with
/// site 1 as the most significant bit and bit value 1 meaning dark.
#[derive(Debug, Clone)]
pub struct Detection {
    pub pattern_probs: Vec<f64>,
    /// P_j, the probability of exactly j dark ions, j = 0..=n.
    pub dark_count_probs: Vec<f64>,
    pub counts: Option<Vec<u64>>,
}

fn mapping_pulse(mapping: Mapping) -> Option<RotationPulse> {
    match mapping {
        Mapping::None => None,
        Mapping::PiPlus => Some(RotationPulse::zero_plus(std::f64::consts::PI, 0.0)),
        Mapping::PiMinus => Some(RotationPulse::zero_minus(std::f64::consts::PI, 0.0)),
    }
}

/// Exact joint bright/dark distribution of a state (after the optional
/// mapping pulse); dark means the ion sits in |0⟩ at detection time.
pub fn detection_distribution(state: &SpinState, mapping: Mapping) -> Vec<f64> {
    let mapped = match mapping_pulse(mapping) {
        Some(p) => apply_rotation(state, &p),
        None => state.clone(),
    };
    let basis = mapped.basis();
    let n = basis.n_sites();
    let mut probs = vec![0.0; 1 << n];
    for (k, a) in mapped.amplitudes().iter().enumerate() {
        let mut pattern = 0usize;
        for site in 1..=n {
            pattern <<= 1;
            if basis.digit(k, site) == 1 {
                pattern |= 1;
            }
        }
        probs[pattern] += a.norm_sqr();
    }
    probs
}

fn dark_count_marginals(pattern_probs: &[f64], n: usize) -> Vec<f64> {
    let mut pj = vec![0.0; n + 1];
    for (pattern, &p) in pattern_probs.iter().enumerate() {
        pj[pattern.count_ones() as usize] += p;
    }
    pj
}

/// Sample one pattern index from a cumulative walk.
fn sample_pattern(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Measure a state: optional mapping pulse, then the joint bright/dark
/// distribution, exactly or as seeded multinomial counts. `run_id` and
/// `point` key the random stream. Sampling mode requires shots ≥ 1.
pub fn detect(state: &SpinState, config: &MeasurementConfig, run_id: u64, point: u64) -> Detection {
    let n = state.basis().n_sites();
    let exact = detection_distribution(state, config.mapping);
    match config.shots {
        ShotMode::Exact => Detection {
            dark_count_probs: dark_count_marginals(&exact, n),
            pattern_probs: exact,
            counts: None,
        },
        ShotMode::Sampled(shots) => {
            assert!(shots >= 1, "sampling mode requires at least one shot");
            let mut rng = stream_rng(config.seed, run_id, point);
            let mut counts = vec![0u64; exact.len()];
            for _ in 0..shots {
                counts[sample_pattern(&exact, &mut rng)] += 1;
            }
            let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / shots as f64).collect();
            Detection {
                dark_count_probs: dark_count_marginals(&probs, n),
                pattern_probs: probs,
                counts: Some(counts),
            }
        }
    }
}

/// Π = Σ_j (−1)^j P_j over the dark-count marginals.
pub fn parity(dark_count_probs: &[f64]) -> Result<f64> {
    let total: f64 = dark_count_probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "dark-count marginals sum to {total}, expected 1 within 1e-9"
        )));
    }
    Ok(dark_count_probs
        .iter()
        .enumerate()
        .map(|(j, &p)| if j % 2 == 0 { p } else { -p })
        .sum())
}

/// Kolmogorov-Smirnov distance between two distributions over the same
/// ordered outcome set.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut ca = 0.0;
    let mut cb = 0.0;
    let mut worst = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        ca += x;
        cb += y;
        worst = worst.max((ca - cb).abs());
    }
    worst
}

/// Which harmonic the parity fit uses; never auto-detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitHarmonic {
    CosPhi,
    Cos2Phi,
}

impl FitHarmonic {
    fn multiplier(&self) -> f64 {
        match self {
            FitHarmonic::CosPhi => 1.0,
            FitHarmonic::Cos2Phi => 2.0,
        }
    }
}

/// Least-squares fit Π(φ) ≈ offset + sign·amplitude·cos(hφ) with
/// amplitude ≥ 0.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicFit {
    pub harmonic: FitHarmonic,
    pub offset: f64,
    pub amplitude: f64,
    /// +1.0 or −1.0; the sign of the cos coefficient.
    pub sign: f64,
    /// RMS residual of the fit.
    pub residual: f64,
}

pub fn fit_harmonic(phi: &[f64], parity: &[f64], harmonic: FitHarmonic) -> Result<HarmonicFit> {
    if phi.len() != parity.len() || phi.len() < 2 {
        return Err(Error::FitFailure("need at least two (phi, parity) points".into()));
    }
    let h = harmonic.multiplier();
    let n = phi.len() as f64;
    let (mut sc, mut scc, mut sy, mut syc) = (0.0, 0.0, 0.0, 0.0);
    for (&p, &y) in phi.iter().zip(parity.iter()) {
        let c = (h * p).cos();
        sc += c;
        scc += c * c;
        sy += y;
        syc += y * c;
    }
    let det = n * scc - sc * sc;
    if det.abs() < 1e-12 * n * n {
        return Err(Error::FitFailure("singular design: cos(h phi) is constant on the grid".into()));
    }
    let b = (n * syc - sc * sy) / det;
    let offset = (sy - b * sc) / n;
    let mut rss = 0.0;
    for (&p, &y) in phi.iter().zip(parity.iter()) {
        let r = y - offset - b * (h * p).cos();
        rss += r * r;
    }
    Ok(HarmonicFit {
        harmonic,
        offset,
        amplitude: b.abs(),
        sign: if b < 0.0 { -1.0 } else { 1.0 },
        residual: (rss / n).sqrt(),
    })
}

/// One pulse of a scan template; `phi` is either fixed or the scanned
/// variable.
#[derive(Debug, Clone, Copy)]
pub struct PulseTemplate {
    pub transition: Transition,
    pub theta: f64,
    pub phi: PhiSpec,
}

#[derive(Debug, Clone, Copy)]
pub enum PhiSpec {
    Fixed(f64),
    Scan,
}

impl PulseTemplate {
    fn resolve(&self, phi: f64) -> RotationPulse {
        RotationPulse {
            transition: self.transition,
            theta: self.theta,
            phi: match self.phi {
                PhiSpec::Fixed(v) => v,
                PhiSpec::Scan => phi,
            },
        }
    }
}

/// Entanglement-analysis sequence R_{0+}(π/2,φ) R_{0+}(π/2,0) R_{0−}(π,0),
/// listed in application order (rightmost operator first).
pub fn witness_sequence() -> Vec<PulseTemplate> {
    use std::f64::consts::PI;
    vec![
        PulseTemplate { transition: Transition::ZeroMinus, theta: PI, phi: PhiSpec::Fixed(0.0) },
        PulseTemplate { transition: Transition::ZeroPlus, theta: PI / 2.0, phi: PhiSpec::Fixed(0.0) },
        PulseTemplate { transition: Transition::ZeroPlus, theta: PI / 2.0, phi: PhiSpec::Scan },
    ]
}

/// Ground-vs-excited phase discrimination sequence
/// R_{0−}(π/2,φ) R_{0+}(π/2,0), in application order.
pub fn ground_phase_sequence() -> Vec<PulseTemplate> {
    use std::f64::consts::PI;
    vec![
        PulseTemplate { transition: Transition::ZeroPlus, theta: PI / 2.0, phi: PhiSpec::Fixed(0.0) },
        PulseTemplate { transition: Transition::ZeroMinus, theta: PI / 2.0, phi: PhiSpec::Scan },
    ]
}

/// Sampled parity curve with its harmonic fit.
#[derive(Debug, Clone)]
pub struct ParityCurve {
    pub phi: Vec<f64>,
    pub parity: Vec<f64>,
    pub stderr: Vec<f64>,
    pub shots_per_point: Option<u64>,
    pub fit: HarmonicFit,
}

/// Scan the analysis phase: apply the sequence at each φ, detect, compute
/// the parity, and fit the selected harmonic.
pub fn parity_scan(
    state: &SpinState,
    sequence: &[PulseTemplate],
    phi_grid: &[f64],
    config: &MeasurementConfig,
    harmonic: FitHarmonic,
    run_id: u64,
) -> Result<ParityCurve> {
    let mut parities = Vec::with_capacity(phi_grid.len());
    let mut stderr = Vec::with_capacity(phi_grid.len());
    for (pi, &phi) in phi_grid.iter().enumerate() {
        let pulses: Vec<RotationPulse> = sequence.iter().map(|t| t.resolve(phi)).collect();
        let rotated = apply_sequence(state, &pulses);
        let det = detect(&rotated, config, run_id, pi as u64);
        let p = parity(&det.dark_count_probs)?;
        parities.push(p);
        stderr.push(match config.shots {
            ShotMode::Exact => 0.0,
            ShotMode::Sampled(s) => ((1.0 - p * p).max(0.0) / s as f64).sqrt(),
        });
    }
    let fit = fit_harmonic(phi_grid, &parities, harmonic)?;
    Ok(ParityCurve {
        phi: phi_grid.to_vec(),
        parity: parities,
        stderr,
        shots_per_point: match config.shots {
            ShotMode::Exact => None,
            ShotMode::Sampled(s) => Some(s),
        },
        fit,
    })
}

/// Evaluation of the separability bound
/// 2A + P₀₀ + 2|ρ_{+−,00}| + 2|ρ_{−+,00}| ≤ 1.
#[derive(Debug, Clone, Copy)]
pub struct WitnessReport {
    pub amplitude: f64,
    pub p00: f64,
    pub rho_pm_00: f64,
    pub rho_mp_00: f64,
    pub rho_pm_mp: f64,
    pub lhs: f64,
    pub violated: bool,
    pub margin: f64,
}

fn witness_from_parts(amplitude: f64, p00: f64, rho_pm_00: f64, rho_mp_00: f64, rho_pm_mp: f64) -> WitnessReport {
    let lhs = 2.0 * amplitude + p00 + 2.0 * rho_pm_00 + 2.0 * rho_mp_00;
    WitnessReport {
        amplitude,
        p00,
        rho_pm_00,
        rho_mp_00,
        rho_pm_mp,
        lhs,
        violated: lhs > 1.0,
        margin: lhs - 1.0,
    }
}

/// Witness from a measured amplitude alone; the remaining terms are
/// bounded below by zero, which is the conservative direction for a
/// violation claim. A > 1/2 is already sufficient.
pub fn witness_from_amplitude(amplitude: f64) -> WitnessReport {
    witness_from_parts(amplitude, 0.0, 0.0, 0.0, 0.0)
}

/// Witness from a fitted parity curve (conservative ρ terms).
pub fn witness_from_curve(curve: &ParityCurve) -> WitnessReport {
    witness_from_amplitude(curve.fit.amplitude)
}

/// Exact witness evaluation of a pure two-qutrit state: the oscillation
/// amplitude A = (P_{+−} + P_{−+} + 2|ρ_{+−,−+}|)/2 plus the exact
/// density-matrix terms.
pub fn witness_from_state(state: &SpinState) -> Result<WitnessReport> {
    if state.basis().n_sites() != 2 {
        return Err(Error::Invalid("the witness is defined for two qutrits".into()));
    }
    let a_pm = state.amplitude("+-");
    let a_mp = state.amplitude("-+");
    let a_00 = state.amplitude("00");
    let rho_pm_mp = (a_pm * a_mp.conj()).norm();
    let amplitude = 0.5 * (a_pm.norm_sqr() + a_mp.norm_sqr() + 2.0 * rho_pm_mp);
    Ok(witness_from_parts(
        amplitude,
        a_00.norm_sqr(),
        (a_pm * a_00.conj()).norm(),
        (a_mp * a_00.conj()).norm(),
        rho_pm_mp,
    ))
}

/// Exact witness evaluation of a two-qutrit density matrix in the product
/// basis (site 1 most significant digit).
pub fn witness_from_density(rho: &DMatrix<Complex64>) -> Result<WitnessReport> {
    if rho.nrows() != 9 || rho.ncols() != 9 {
        return Err(Error::Invalid("density matrix must be 9×9".into()));
    }
    // digit encoding: "+-" = 6, "-+" = 2, "00" = 4
    let p_pm = rho[(6, 6)].re;
    let p_mp = rho[(2, 2)].re;
    let rho_pm_mp = rho[(6, 2)].norm();
    let amplitude = 0.5 * (p_pm + p_mp + 2.0 * rho_pm_mp);
    Ok(witness_from_parts(
        amplitude,
        rho[(4, 4)].re,
        rho[(6, 4)].norm(),
        rho[(2, 4)].norm(),
        rho_pm_mp,
    ))
}

/// Haar-random single-site pure state (3 complex Gaussian amplitudes,
/// normalized).
pub fn random_site_state(rng: &mut ChaCha8Rng) -> [Complex64; 3] {
    let normal = Normal::new(0.0f64, 1.0).expect("valid");
    let mut v = [Complex64::new(0.0, 0.0); 3];
    let mut norm2 = 0.0;
    for a in &mut v {
        *a = Complex64::new(normal.sample(rng), normal.sample(rng));
        norm2 += a.norm_sqr();
    }
    let inv = 1.0 / norm2.sqrt();
    for a in &mut v {
        *a *= inv;
    }
    v
}

/// Random separable two-qutrit density matrix: a convex mixture of up to
/// `max_components` products of Haar-random single-site pure states.
pub fn random_separable_density(rng: &mut ChaCha8Rng, max_components: usize) -> DMatrix<Complex64> {
    let n_comp = 1 + (rng.random::<u64>() as usize) % max_components;
    let mut weights: Vec<f64> = (0..n_comp).map(|_| -(rng.random::<f64>().max(1e-12)).ln()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut rho = DMatrix::<Complex64>::zeros(9, 9);
    for &w in &weights {
        let a = random_site_state(rng);
        let b = random_site_state(rng);
        let mut psi = [Complex64::new(0.0, 0.0); 9];
        for i in 0..3 {
            for j in 0..3 {
                psi[i * 3 + j] = a[i] * b[j];
            }
        }
        for r in 0..9 {
            for c in 0..9 {
                rho[(r, c)] += Complex64::new(w, 0.0) * psi[r] * psi[c].conj();
            }
        }
    }
    rho
}

/// XY Hamiltonian with no field terms, built from a coupling set alone.
pub fn xy_hamiltonian(coupling: &CouplingSet) -> Result<EffectiveHamiltonian> {
    let n = coupling.n_ions();
    let spec = ChainSpec {
        n_ions: n,
        axial_freq_hz: 1.0,
        transverse_com_freq_hz: 10.0,
        ion_mass_kg: 1.0,
        delta_k: 0.0,
        rabi_freqs_hz: vec![0.0; n],
        mu_hz: 0.0,
        d_field_hz: 0.0,
        site_shifts: None,
    };
    build_effective(coupling, &spec, VTermMode::Off)
}

/// One time point of an entanglement-vs-time run.
#[derive(Debug, Clone)]
pub struct WitnessPoint {
    pub time_s: f64,
    pub curve: ParityCurve,
    pub report: WitnessReport,
}

/// Evolve |00⟩ under the two-ion XY coupling for each duration, run the
/// parity analysis, and evaluate the witness. With `rabi_noise_rel` set
/// and sampling enabled, every shot draws a multiplicative coupling factor
/// (couplings scale by the square), which dephases the averaged curve at
/// late times.
pub fn entanglement_vs_time(
    coupling: &CouplingSet,
    times: &[f64],
    phi_grid: &[f64],
    config: &MeasurementConfig,
) -> Result<Vec<WitnessPoint>> {
    if coupling.n_ions() != 2 {
        return Err(Error::Invalid("entanglement_vs_time runs on two ions".into()));
    }
    let ham = xy_hamiltonian(coupling)?;
    let prop = ham.propagator()?;
    let psi0 = SpinState::all_zero(Arc::clone(ham.basis()));
    let sequence = witness_sequence();

    let mut out = Vec::with_capacity(times.len());
    for (ti, &t) in times.iter().enumerate() {
        let run_id = ti as u64;
        match (config.rabi_noise_rel, config.shots) {
            (Some(sigma), ShotMode::Sampled(shots)) if sigma > 0.0 => {
                // per-shot coupling noise: re-prepare the state each shot
                let normal = Normal::new(1.0f64, sigma).expect("valid sigma");
                let mut parities = Vec::with_capacity(phi_grid.len());
                let mut stderr = Vec::with_capacity(phi_grid.len());
                for (pi, &phi) in phi_grid.iter().enumerate() {
                    let pulses: Vec<RotationPulse> =
                        sequence.iter().map(|tp| tp.resolve(phi)).collect();
                    let mut rng = stream_rng(config.seed, run_id, pi as u64);
                    let mut counts = [0u64; 4];
                    for _ in 0..shots {
                        let g: f64 = normal.sample(&mut rng);
                        let psi_t = prop.advance_scaled(&psi0, t, g * g)?;
                        let rotated = apply_sequence(&psi_t, &pulses);
                        let probs = detection_distribution(&rotated, config.mapping);
                        counts[sample_pattern(&probs, &mut rng)] += 1;
                    }
                    let probs: Vec<f64> =
                        counts.iter().map(|&c| c as f64 / shots as f64).collect();
                    let pj = dark_count_marginals(&probs, 2);
                    let p = parity(&pj)?;
                    stderr.push(((1.0 - p * p).max(0.0) / shots as f64).sqrt());
                    parities.push(p);
                }
                let fit = fit_harmonic(phi_grid, &parities, FitHarmonic::Cos2Phi)?;
                let curve = ParityCurve {
                    phi: phi_grid.to_vec(),
                    parity: parities,
                    stderr,
                    shots_per_point: Some(shots),
                    fit,
                };
                let report = witness_from_curve(&curve);
                out.push(WitnessPoint { time_s: t, curve, report });
            }
            _ => {
                let psi_t = prop.advance(&psi0, t)?;
                let curve =
                    parity_scan(&psi_t, &sequence, phi_grid, config, FitHarmonic::Cos2Phi, run_id)?;
                let report = match config.shots {
                    // exact mode: fit amplitude plus exact state terms
                    ShotMode::Exact => {
                        let exact = witness_from_state(&psi_t)?;
                        witness_from_parts(
                            curve.fit.amplitude,
                            exact.p00,
                            exact.rho_pm_00,
                            exact.rho_mp_00,
                            exact.rho_pm_mp,
                        )
                    }
                    ShotMode::Sampled(_) => witness_from_curve(&curve),
                };
                out.push(WitnessPoint { time_s: t, curve, report });
            }
        }
    }
    Ok(out)
}
