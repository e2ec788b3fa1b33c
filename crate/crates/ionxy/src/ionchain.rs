//! Linear ion-crystal mechanics: equilibrium positions, transverse normal
//! modes, and Lamb-Dicke factors.
//!
//! Positions are kept dimensionless (lengths in units of
//! ℓ = (e²/(4πε₀ M ω_z²))^{1/3} with ω_z the angular axial frequency);
//! frequencies are ordinary frequencies in Hz throughout.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054571817e-34;
/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.8541878128e-12;
/// Mass of ¹⁷¹Yb⁺ (kg).
pub const YB171_MASS: f64 = 2.8384644058191703e-25;

/// |η| above which the Lamb-Dicke expansion is considered unreliable.
pub const LAMB_DICKE_WARN: f64 = 0.3;

/// Per-site static energy shifts, linear and quadratic in S_z (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteShift {
    pub linear_hz: f64,
    pub quadratic_hz: f64,
}

/// Physical configuration of the chain and its drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_ions: usize,
    /// Axial confinement frequency (Hz).
    pub axial_freq_hz: f64,
    /// Transverse center-of-mass mode frequency (Hz).
    pub transverse_com_freq_hz: f64,
    /// Single-ion mass (kg).
    pub ion_mass_kg: f64,
    /// Magnitude of the Raman wavevector difference (1/m).
    pub delta_k: f64,
    /// Per-ion carrier Rabi frequency Ω_i (Hz).
    pub rabi_freqs_hz: Vec<f64>,
    /// Beatnote offset μ (Hz), compared directly against the transverse
    /// mode frequencies in the rotating frame.
    pub mu_hz: f64,
    /// Global (S_z)² field coefficient D (Hz).
    pub d_field_hz: f64,
    /// Optional per-site S_z / (S_z)² shifts (Hz).
    pub site_shifts: Option<Vec<SiteShift>>,
}

impl ChainSpec {
    /// Validate static invariants; the linear-chain stability condition is
    /// checked by [`transverse_modes`], which this calls.
    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(Error::Invalid("n_ions must be at least 1".into()));
        }
        for (name, v) in [
            ("axial_freq_hz", self.axial_freq_hz),
            ("transverse_com_freq_hz", self.transverse_com_freq_hz),
            ("ion_mass_kg", self.ion_mass_kg),
        ] {
            if !(v > 0.0) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.delta_k < 0.0 || !self.delta_k.is_finite() {
            return Err(Error::Invalid(format!("delta_k must be finite and >= 0, got {}", self.delta_k)));
        }
        if self.rabi_freqs_hz.len() != self.n_ions {
            return Err(Error::Invalid(format!(
                "rabi_freqs_hz has length {}, expected n_ions = {}",
                self.rabi_freqs_hz.len(),
                self.n_ions
            )));
        }
        if self.rabi_freqs_hz.iter().any(|&o| o < 0.0 || !o.is_finite()) {
            return Err(Error::Invalid("rabi frequencies must be finite and >= 0".into()));
        }
        if let Some(shifts) = &self.site_shifts {
            if shifts.len() != self.n_ions {
                return Err(Error::Invalid(format!(
                    "site_shifts has length {}, expected n_ions = {}",
                    shifts.len(),
                    self.n_ions
                )));
            }
        }
        transverse_modes(self).map(|_| ())
    }

    /// Internal length scale ℓ (m) of the dimensionless positions.
    pub fn length_scale_m(&self) -> f64 {
        let wz = 2.0 * std::f64::consts::PI * self.axial_freq_hz;
        let coulomb = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE
            / (4.0 * std::f64::consts::PI * EPSILON_0 * self.ion_mass_kg * wz * wz);
        coulomb.cbrt()
    }
}

/// Transverse mode structure of the chain.
#[derive(Debug, Clone)]
pub struct NormalModes {
    /// Mode frequencies ω_m (Hz), sorted descending (COM first).
    pub mode_freqs_hz: Vec<f64>,
    /// Orthogonal mode matrix; column m is mode m, entry (i, m) = b_{i,m}.
    pub mode_matrix: DMatrix<f64>,
    /// Lamb-Dicke factors η_{i,m}.
    pub lamb_dicke: DMatrix<f64>,
    /// Dimensionless equilibrium positions, strictly increasing.
    pub equilibrium_positions: Vec<f64>,
}

impl NormalModes {
    pub fn n_ions(&self) -> usize {
        self.mode_freqs_hz.len()
    }

    /// Largest |η|; values above [`LAMB_DICKE_WARN`] leave the regime in
    /// which the couplings formulas hold.
    pub fn max_lamb_dicke(&self) -> f64 {
        self.lamb_dicke.iter().map(|e| e.abs()).fold(0.0, f64::max)
    }

    pub fn lamb_dicke_regime_violated(&self) -> bool {
        self.max_lamb_dicke() > LAMB_DICKE_WARN
    }
}

/// Gradient of the dimensionless potential Σ u_i²/2 + Σ_{i<j} 1/|u_i−u_j|.
pub fn potential_gradient(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut g = u.to_vec();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = u[i] - u[j];
                g[i] -= d.signum() / (d * d);
            }
        }
    }
    g
}

fn potential_hessian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = 1.0;
        for j in 0..n {
            if i != j {
                let w = 2.0 / (u[i] - u[j]).abs().powi(3);
                h[(i, i)] += w;
                h[(i, j)] = -w;
            }
        }
    }
    h
}

const EQUILIBRIUM_MAX_ITER: usize = 200;
const EQUILIBRIUM_TOL: f64 = 1e-13;

/// Equilibrium positions of `n_ions` in a harmonic axial well, sorted
/// ascending, dimensionless. Damped Newton iteration from a uniformly
/// spaced guess; converged when the gradient max-norm drops below 1e-13.
pub fn equilibrium_positions(n_ions: usize) -> Result<Vec<f64>> {
    if n_ions == 0 {
        return Err(Error::Invalid("n_ions must be at least 1".into()));
    }
    if n_ions == 1 {
        return Ok(vec![0.0]);
    }
    let n = n_ions;
    let spacing = 2.0 / (n as f64).powf(0.56);
    let mut u: Vec<f64> = (0..n).map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * spacing).collect();

    let grad_max = |g: &[f64]| g.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut g = potential_gradient(&u);
    for _ in 0..EQUILIBRIUM_MAX_ITER {
        if grad_max(&g) < EQUILIBRIUM_TOL {
            return Ok(u);
        }
        let h = potential_hessian(&u);
        let rhs = nalgebra::DVector::from_iterator(n, g.iter().map(|x| -x));
        let step = h
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SolverDidNotConverge { iterations: 0, gradient: grad_max(&g) })?;
        // backtracking: keep the ordering and require gradient decrease
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(&x, &s)| x + lambda * s).collect();
            let ordered = trial.windows(2).all(|w| w[0] < w[1]);
            if ordered {
                let gt = potential_gradient(&trial);
                if grad_max(&gt) < grad_max(&g) {
                    u = trial;
                    g = gt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if grad_max(&g) < EQUILIBRIUM_TOL {
        Ok(u)
    } else {
        Err(Error::SolverDidNotConverge { iterations: EQUILIBRIUM_MAX_ITER, gradient: grad_max(&g) })
    }
}

/// Transverse normal modes of the chain: diagonalizes the transverse
/// Hessian, rejects zigzag-unstable configurations, and fills in the
/// Lamb-Dicke factors.
pub fn transverse_modes(spec: &ChainSpec) -> Result<NormalModes> {
    let n = spec.n_ions;
    if n == 0 {
        return Err(Error::Invalid("n_ions must be at least 1".into()));
    }
    let u = equilibrium_positions(n)?;
    let anisotropy = spec.transverse_com_freq_hz / spec.axial_freq_hz;

    // Hessian in units of M ω_z²: α² on the diagonal minus Coulomb weights.
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = anisotropy * anisotropy;
        for j in 0..n {
            if i != j {
                let w = 1.0 / (u[i] - u[j]).abs().powi(3);
                k[(i, i)] -= w;
                k[(i, j)] = w;
            }
        }
    }

    let eig = k.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let lowest = eig.eigenvalues[order[n - 1]];
    if lowest <= 0.0 {
        return Err(Error::ChainUnstable { lowest_sq: lowest, anisotropy });
    }

    let mut b = DMatrix::zeros(n, n);
    let mut freqs = Vec::with_capacity(n);
    for (m, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        // sign convention: largest-magnitude entry positive
        let mut imax = 0;
        for i in 1..n {
            if col[i].abs() > col[imax].abs() {
                imax = i;
            }
        }
        let sign = if col[imax] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            b[(i, m)] = sign * col[i];
        }
        freqs.push(spec.axial_freq_hz * eig.eigenvalues[src].sqrt());
    }

    let eta = lamb_dicke_factors(&freqs, &b, spec);
    Ok(NormalModes {
        mode_freqs_hz: freqs,
        mode_matrix: b,
        lamb_dicke: eta,
        equilibrium_positions: u,
    })
}

/// η_{i,m} = b_{i,m} · Δk · √(ħ / (2 M · 2π ω_m)) with ω_m in Hz.
pub fn lamb_dicke_factors(mode_freqs_hz: &[f64], mode_matrix: &DMatrix<f64>, spec: &ChainSpec) -> DMatrix<f64> {
    let n = mode_matrix.nrows();
    let mut eta = DMatrix::zeros(n, n);
    for m in 0..n {
        let x0 = (HBAR / (2.0 * spec.ion_mass_kg * 2.0 * std::f64::consts::PI * mode_freqs_hz[m])).sqrt();
        for i in 0..n {
            eta[(i, m)] = mode_matrix[(i, m)] * spec.delta_k * x0;
        }
    }
    eta
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::presets::default_chain;

    /// Plain Jacobi eigenvalue iteration, independent of nalgebra.
    fn jacobi_eigen(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let n = a.nrows();
        let mut v = DMatrix::<f64>::identity(n, n);
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off < 1e-28 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-18 {
                        continue;
                    }
                    let theta = 0.5 * (a[(q, q)] - a[(p, p)]) / a[(p, q)];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        ((0..n).map(|i| a[(i, i)]).collect(), v)
    }

    #[test]
    fn single_ion_at_origin() {
        assert_eq!(equilibrium_positions(1).unwrap(), vec![0.0]);
    }

    #[test]
    fn two_ion_positions_analytic() {
        let u = equilibrium_positions(2).unwrap();
        let a = 0.25f64.cbrt();
        assert_abs_diff_eq!(u[0], -a, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], a, epsilon = 1e-12);
    }

    #[test]
    fn three_ion_positions() {
        let u = equilibrium_positions(3).unwrap();
        // oracle value from direct minimization of the dimensionless potential
        assert_abs_diff_eq!(u[0], -1.0772, epsilon = 2e-4);
        assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[2], 1.0772, epsilon = 2e-4);
    }

    #[test]
    fn gradient_norm_up_to_twenty_ions() {
        for n in 1..=20 {
            let u = equilibrium_positions(n).unwrap();
            let g = potential_gradient(&u);
            let gmax = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
            assert!(gmax < 1e-12, "n={n}: gradient max-norm {gmax}");
            assert!(u.windows(2).all(|w| w[0] < w[1]), "n={n}: not strictly increasing");
        }
    }

    #[test]
    fn positions_antisymmetric() {
        for n in 2..=12 {
            let u = equilibrium_positions(n).unwrap();
            for i in 0..n {
                assert_abs_diff_eq!(u[i], -u[n - 1 - i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn single_ion_modes() {
        let spec = default_chain(1);
        let modes = transverse_modes(&spec).unwrap();
        assert_eq!(modes.mode_freqs_hz.len(), 1);
        assert_abs_diff_eq!(modes.mode_freqs_hz[0], spec.transverse_com_freq_hz, epsilon = 1e-6);
        assert_abs_diff_eq!(modes.mode_matrix[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_ion_mode_vectors() {
        let spec = default_chain(2);
        let modes = transverse_modes(&spec).unwrap();
        let r = 1.0 / 2.0f64.sqrt();
        // COM column
        assert_abs_diff_eq!(modes.mode_matrix[(0, 0)], r, epsilon = 1e-10);
        assert_abs_diff_eq!(modes.mode_matrix[(1, 0)], r, epsilon = 1e-10);
        // rocking column, up to overall sign fixed by the convention
        assert_abs_diff_eq!(modes.mode_matrix[(0, 1)].abs(), r, epsilon = 1e-10);
        assert_abs_diff_eq!(
            modes.mode_matrix[(0, 1)] * modes.mode_matrix[(1, 1)],
            -0.5,
            epsilon = 1e-10
        );
    }

    #[test]
    fn four_ion_modes_against_jacobi_oracle() {
        let spec = default_chain(4);
        let modes = transverse_modes(&spec).unwrap();
        let n = 4;

        // rebuild the Hessian independently and diagonalize with Jacobi
        let u = equilibrium_positions(n).unwrap();
        let alpha = spec.transverse_com_freq_hz / spec.axial_freq_hz;
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = alpha * alpha;
            for j in 0..n {
                if i != j {
                    let w = 1.0 / (u[i] - u[j]).abs().powi(3);
                    k[(i, i)] -= w;
                    k[(i, j)] = w;
                }
            }
        }
        let (mut evals, _) = jacobi_eigen(k.clone());
        evals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for m in 0..n {
            let f_oracle = spec.axial_freq_hz * evals[m].sqrt();
            assert_abs_diff_eq!(modes.mode_freqs_hz[m], f_oracle, epsilon = 1e-5);
        }

        // descending order
        assert!(modes.mode_freqs_hz.windows(2).all(|w| w[0] > w[1]));
        // orthogonality
        let bt_b = modes.mode_matrix.transpose() * &modes.mode_matrix;
        let defect = (&bt_b - DMatrix::identity(n, n)).iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(defect < 1e-10, "orthogonality defect {defect}");
        // Hessian reconstruction b diag(λ) bᵀ
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            modes.mode_freqs_hz.iter().map(|f| (f / spec.axial_freq_hz).powi(2)),
        ));
        let recon = &modes.mode_matrix * lam * modes.mode_matrix.transpose();
        let scale = k.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let rdefect = (&recon - &k).iter().map(|x| x.abs()).fold(0.0, f64::max) / scale;
        assert!(rdefect < 1e-9, "reconstruction defect {rdefect}");
    }

    #[test]
    fn com_mode_is_uniform_and_exact() {
        for n in [2, 3, 5, 7] {
            let spec = default_chain(n);
            let modes = transverse_modes(&spec).unwrap();
            let r = 1.0 / (n as f64).sqrt();
            for i in 0..n {
                assert_abs_diff_eq!(modes.mode_matrix[(i, 0)], r, epsilon = 1e-10);
            }
            let rel = (modes.mode_freqs_hz[0] - spec.transverse_com_freq_hz).abs()
                / spec.transverse_com_freq_hz;
            assert!(rel < 1e-9, "n={n}: COM frequency off by {rel}");
        }
    }

    #[test]
    fn mode_columns_mirror_symmetric() {
        let spec = default_chain(5);
        let modes = transverse_modes(&spec).unwrap();
        let n = 5;
        for m in 0..n {
            let mut sym = 0.0f64;
            let mut anti = 0.0f64;
            for i in 0..n {
                sym = sym.max((modes.mode_matrix[(i, m)] - modes.mode_matrix[(n - 1 - i, m)]).abs());
                anti = anti.max((modes.mode_matrix[(i, m)] + modes.mode_matrix[(n - 1 - i, m)]).abs());
            }
            assert!(sym < 1e-9 || anti < 1e-9, "mode {m}: sym defect {sym}, anti defect {anti}");
        }
    }

    #[test]
    fn zigzag_instability_rejected() {
        let mut spec = default_chain(5);
        // drive the anisotropy below the critical value for five ions
        spec.transverse_com_freq_hz = 1.5e6;
        match transverse_modes(&spec) {
            Err(Error::ChainUnstable { lowest_sq, anisotropy }) => {
                assert!(lowest_sq <= 0.0);
                assert_abs_diff_eq!(anisotropy, 1.5, epsilon = 1e-12);
            }
            other => panic!("expected ChainUnstable, got {other:?}"),
        }
    }

    #[test]
    fn lamb_dicke_mass_and_dk_scaling() {
        let spec = default_chain(3);
        let modes = transverse_modes(&spec).unwrap();

        let mut heavy = spec.clone();
        heavy.ion_mass_kg *= 2.0;
        let modes_heavy = transverse_modes(&heavy).unwrap();
        for i in 0..3 {
            for m in 0..3 {
                assert_abs_diff_eq!(
                    modes_heavy.lamb_dicke[(i, m)] * 2.0f64.sqrt(),
                    modes.lamb_dicke[(i, m)],
                    epsilon = 1e-15
                );
            }
        }

        let mut nokick = spec.clone();
        nokick.delta_k = 0.0;
        let modes_nokick = transverse_modes(&nokick).unwrap();
        assert_eq!(modes_nokick.max_lamb_dicke(), 0.0);
    }

    #[test]
    fn lamb_dicke_regression_value() {
        // counter-propagating 355 nm beams on ¹⁷¹Yb⁺ at a 4.8 MHz mode:
        // frozen from an independent high-precision evaluation of the
        // closed-form expression.
        let spec = ChainSpec {
            n_ions: 1,
            axial_freq_hz: 1.0e6,
            transverse_com_freq_hz: 4.8e6,
            ion_mass_kg: YB171_MASS,
            delta_k: 2.0 * 2.0 * std::f64::consts::PI / 355e-9,
            rabi_freqs_hz: vec![0.0],
            mu_hz: 5.0e6,
            d_field_hz: 0.0,
            site_shifts: None,
        };
        let modes = transverse_modes(&spec).unwrap();
        assert_abs_diff_eq!(modes.lamb_dicke[(0, 0)], 0.0878521338102142, epsilon = 1e-12);
        assert!(!modes.lamb_dicke_regime_violated());
    }

    #[test]
    fn validate_catches_bad_specs() {
        let mut spec = default_chain(3);
        assert!(spec.validate().is_ok());
        spec.rabi_freqs_hz.pop();
        assert!(spec.validate().is_err());

        let mut spec = default_chain(2);
        spec.axial_freq_hz = -1.0;
        assert!(spec.validate().is_err());
    }
}
