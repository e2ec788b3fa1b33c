//! Laser-mediated spin-spin couplings: the long-range XY matrix J_ij, the
//! spin-phonon coefficients V_{i,m}, power-law characterization of the
//! coupling range, and detuning search for a target range exponent.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ionchain::{ChainSpec, NormalModes};

/// Multiplier in the resonance guard |μ − ω_m| > 10 · max_i(η_{i,m} Ω_i).
pub const RESONANCE_GUARD_FACTOR: f64 = 10.0;

/// Detuning bracket for [`tune_alpha`], relative to the guard threshold at
/// the COM mode (lower edge) and to the COM frequency (upper edge). The
/// upper edge stays below the crossover where distant couplings change
/// sign and the power-law fit degenerates.
pub const TUNE_BRACKET_LOW_MARGIN: f64 = 1.05;
pub const TUNE_BRACKET_HIGH_FRACTION: f64 = 0.35;
const TUNE_SCAN_POINTS: usize = 48;

/// Log-log fits of |J_ij| against |i−j|: over all pairs, and over the
/// shortest two distance classes only (the two variants coincide for
/// three ions).
#[derive(Debug, Clone, Copy)]
pub struct PowerLawFit {
    pub j0_hz: f64,
    pub alpha: f64,
    pub j0_adjacent_hz: f64,
    pub alpha_adjacent: f64,
}

/// Coupling matrices derived from one chain configuration.
#[derive(Debug, Clone)]
pub struct CouplingSet {
    /// Symmetric J_ij (Hz), zero diagonal.
    pub j_matrix: DMatrix<f64>,
    /// V_{i,m} (Hz); rows are ions, columns are modes.
    pub v_matrix: DMatrix<f64>,
    /// All-pairs fit, when requested and defined.
    pub power_law: Option<PowerLawFit>,
    /// Largest relative deviation of Σ_m V_{i,m} from its site mean.
    pub uniformity: f64,
}

impl CouplingSet {
    /// Full coupling data for a chain: J, V, and the V uniformity.
    pub fn from_chain(modes: &NormalModes, spec: &ChainSpec) -> Result<CouplingSet> {
        let j_matrix = coupling_matrix(modes, spec)?;
        let v_matrix = spin_phonon_shifts(modes, spec)?;
        let uniformity = v_uniformity(&v_matrix);
        Ok(CouplingSet { j_matrix, v_matrix, power_law: None, uniformity })
    }

    /// Synthetic coupling set from an explicit J matrix (no phonon data).
    pub fn from_j_matrix(j: DMatrix<f64>) -> Result<CouplingSet> {
        let n = j.nrows();
        if j.ncols() != n {
            return Err(Error::Invalid("J matrix must be square".into()));
        }
        let mut sym = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in (i + 1)..n {
                if (j[(i, k)] - j[(k, i)]).abs() > 1e-9 * j[(i, k)].abs().max(1.0) {
                    return Err(Error::Invalid(format!("J matrix not symmetric at ({i},{k})")));
                }
                sym[(i, k)] = j[(i, k)];
                sym[(k, i)] = j[(i, k)];
            }
        }
        Ok(CouplingSet { j_matrix: sym, v_matrix: DMatrix::zeros(n, n), power_law: None, uniformity: 0.0 })
    }

    /// Uniform nearest-plus-distant synthetic chain with J_ij = j0/|i−j|^alpha.
    pub fn power_law_chain(n: usize, j0_hz: f64, alpha: f64) -> CouplingSet {
        let mut j = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in (i + 1)..n {
                let v = j0_hz / ((k - i) as f64).powf(alpha);
                j[(i, k)] = v;
                j[(k, i)] = v;
            }
        }
        CouplingSet { j_matrix: j, v_matrix: DMatrix::zeros(n, n), power_law: None, uniformity: 0.0 }
    }

    pub fn n_ions(&self) -> usize {
        self.j_matrix.nrows()
    }

    /// Fit and cache the power law; see [`fit_power_law`].
    pub fn fit(&mut self) -> Result<PowerLawFit> {
        let fit = fit_power_law(&self.j_matrix)?;
        self.power_law = Some(fit);
        Ok(fit)
    }

    /// Σ_m V_{i,m} per ion (Hz).
    pub fn v_row_sums(&self) -> Vec<f64> {
        (0..self.n_ions()).map(|i| self.v_matrix.row(i).sum()).collect()
    }
}

fn check_resonance_guard(modes: &NormalModes, spec: &ChainSpec) -> Result<()> {
    for m in 0..modes.n_ions() {
        let max_eta_omega = (0..modes.n_ions())
            .map(|i| (modes.lamb_dicke[(i, m)] * spec.rabi_freqs_hz[i]).abs())
            .fold(0.0, f64::max);
        let required = RESONANCE_GUARD_FACTOR * max_eta_omega;
        let gap = (spec.mu_hz - modes.mode_freqs_hz[m]).abs();
        if gap <= required {
            return Err(Error::DetuningTooClose { mode: m, gap, required });
        }
    }
    Ok(())
}

/// J_ij = Ω_i Ω_j Σ_m η_{i,m} η_{j,m} / (2(μ − ω_m)), in Hz.
pub fn coupling_matrix(modes: &NormalModes, spec: &ChainSpec) -> Result<DMatrix<f64>> {
    if modes.n_ions() != spec.n_ions {
        return Err(Error::Invalid(format!(
            "mode data for {} ions used with a {}-ion spec",
            modes.n_ions(),
            spec.n_ions
        )));
    }
    check_resonance_guard(modes, spec)?;
    let n = spec.n_ions;
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in (i + 1)..n {
            let mut sum = 0.0;
            for m in 0..n {
                sum += modes.lamb_dicke[(i, m)] * modes.lamb_dicke[(k, m)]
                    / (2.0 * (spec.mu_hz - modes.mode_freqs_hz[m]));
            }
            let v = spec.rabi_freqs_hz[i] * spec.rabi_freqs_hz[k] * sum;
            j[(i, k)] = v;
            j[(k, i)] = v;
        }
    }
    Ok(j)
}

/// V_{i,m} = (η_{i,m} Ω_i)² / (8(μ − ω_m)), in Hz.
pub fn spin_phonon_shifts(modes: &NormalModes, spec: &ChainSpec) -> Result<DMatrix<f64>> {
    if modes.n_ions() != spec.n_ions {
        return Err(Error::Invalid(format!(
            "mode data for {} ions used with a {}-ion spec",
            modes.n_ions(),
            spec.n_ions
        )));
    }
    check_resonance_guard(modes, spec)?;
    let n = spec.n_ions;
    let mut v = DMatrix::zeros(n, n);
    for i in 0..n {
        for m in 0..n {
            let eo = modes.lamb_dicke[(i, m)] * spec.rabi_freqs_hz[i];
            v[(i, m)] = eo * eo / (8.0 * (spec.mu_hz - modes.mode_freqs_hz[m]));
        }
    }
    Ok(v)
}

/// Largest relative deviation of the per-ion sums Σ_m V_{i,m} from their
/// mean; small values justify treating the V terms as a global field.
pub fn v_uniformity(v: &DMatrix<f64>) -> f64 {
    let n = v.nrows();
    if n == 0 {
        return 0.0;
    }
    let sums: Vec<f64> = (0..n).map(|i| v.row(i).sum()).collect();
    let mean = sums.iter().sum::<f64>() / n as f64;
    if mean == 0.0 {
        return 0.0;
    }
    sums.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max) / mean.abs()
}

/// Least-squares fit of log|J_ij| against log|i−j|, all pairs and
/// adjacent-only. Requires n ≥ 3 and a common sign across all couplings.
pub fn fit_power_law(j: &DMatrix<f64>) -> Result<PowerLawFit> {
    let n = j.nrows();
    if n < 3 {
        return Err(Error::Invalid(format!("power-law fit needs n >= 3 ions, got {n}")));
    }
    let mut sign = 0.0f64;
    for i in 0..n {
        for k in (i + 1)..n {
            let v = j[(i, k)];
            if v == 0.0 || (sign != 0.0 && v.signum() != sign) {
                let pattern: String = (0..n)
                    .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
                    .map(|(a, b)| {
                        if j[(a, b)] > 0.0 {
                            '+'
                        } else if j[(a, b)] < 0.0 {
                            '-'
                        } else {
                            '0'
                        }
                    })
                    .collect();
                return Err(Error::MixedSignCouplings { pattern });
            }
            sign = v.signum();
        }
    }

    let fit_over = |max_distance: usize| -> (f64, f64) {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        let mut count = 0.0;
        for i in 0..n {
            for k in (i + 1)..n {
                if k - i > max_distance {
                    continue;
                }
                let x = ((k - i) as f64).ln();
                let y = j[(i, k)].abs().ln();
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                count += 1.0;
            }
        }
        let slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
        let intercept = (sy - slope * sx) / count;
        (intercept.exp(), -slope)
    };

    let (j0, alpha) = fit_over(n - 1);
    let (j0_adj, alpha_adj) = fit_over(2);
    Ok(PowerLawFit { j0_hz: j0, alpha, j0_adjacent_hz: j0_adj, alpha_adjacent: alpha_adj })
}

/// Fitted α over the scanned detuning bracket, with the μ grid.
#[derive(Debug, Clone)]
pub struct AlphaScan {
    pub mu_hz: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Scan μ above the transverse COM frequency across the tuning bracket and
/// record the fitted α at each point.
pub fn scan_alpha(spec: &ChainSpec, points: usize) -> Result<AlphaScan> {
    let modes = crate::ionchain::transverse_modes(spec)?;
    let f_com = modes.mode_freqs_hz[0];
    let guard_com = RESONANCE_GUARD_FACTOR
        * (0..spec.n_ions)
            .map(|i| (modes.lamb_dicke[(i, 0)] * spec.rabi_freqs_hz[i]).abs())
            .fold(0.0, f64::max);
    if guard_com == 0.0 {
        return Err(Error::Invalid("alpha scan needs nonzero Rabi frequencies".into()));
    }
    let d_lo = TUNE_BRACKET_LOW_MARGIN * guard_com;
    let d_hi = TUNE_BRACKET_HIGH_FRACTION * f_com;
    if d_lo >= d_hi {
        return Err(Error::Invalid(format!(
            "resonance guard ({guard_com:.3e} Hz) leaves no tuning bracket below {d_hi:.3e} Hz; \
             lower the Rabi frequencies"
        )));
    }
    let ratio = (d_hi / d_lo).powf(1.0 / (points as f64 - 1.0));
    let mut mu_hz = Vec::with_capacity(points);
    let mut alpha = Vec::with_capacity(points);
    let mut trial = spec.clone();
    let mut d = d_lo;
    for _ in 0..points {
        trial.mu_hz = f_com + d;
        let j = coupling_matrix(&modes, &trial)?;
        alpha.push(fit_power_law(&j)?.alpha);
        mu_hz.push(trial.mu_hz);
        d *= ratio;
    }
    Ok(AlphaScan { mu_hz, alpha })
}

/// Find μ above the COM frequency whose fitted α hits `target_alpha`, by
/// bisection on the empirically monotone α(μ) curve.
pub fn tune_alpha(spec: &ChainSpec, target_alpha: f64) -> Result<f64> {
    let scan = scan_alpha(spec, TUNE_SCAN_POINTS)?;
    let (a_min, a_max) = (scan.alpha[0], scan.alpha[scan.alpha.len() - 1]);
    if !(0.05..=3.0).contains(&target_alpha)
        || target_alpha < a_min
        || target_alpha > a_max
    {
        return Err(Error::AlphaOutOfRange { target: target_alpha, min: a_min, max: a_max });
    }
    for w in scan.alpha.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::FitFailure(format!(
                "alpha(mu) not monotone over the scanned bracket ({} -> {})",
                w[0], w[1]
            )));
        }
    }

    let modes = crate::ionchain::transverse_modes(spec)?;
    let alpha_at = |mu: f64| -> Result<f64> {
        let mut trial = spec.clone();
        trial.mu_hz = mu;
        Ok(fit_power_law(&coupling_matrix(&modes, &trial)?)?.alpha)
    };
    let mut lo = scan.mu_hz[0];
    let mut hi = scan.mu_hz[scan.mu_hz.len() - 1];
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let a = alpha_at(mid)?;
        if (a - target_alpha).abs() < 1e-6 {
            return Ok(mid);
        }
        if a < target_alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let final_alpha = alpha_at(mid)?;
    if (final_alpha - target_alpha).abs() <= 0.01 {
        Ok(mid)
    } else {
        Err(Error::FitFailure(format!(
            "bisection stalled at alpha = {final_alpha}, target {target_alpha}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ionchain::transverse_modes;
    use crate::presets::{alpha036_chain, default_chain};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn single_ion_empty_coupling() {
        let mut spec = default_chain(1);
        // a single ion carries the full COM Lamb-Dicke factor, so give the
        // guard more room than the three-ion default detuning
        spec.mu_hz = 4.9e6;
        let modes = transverse_modes(&spec).unwrap();
        let j = coupling_matrix(&modes, &spec).unwrap();
        assert_eq!(j.nrows(), 1);
        assert_eq!(j[(0, 0)], 0.0);
    }

    #[test]
    fn two_ion_single_mode_formula() {
        // zero out all but the COM mode by hand and compare against the
        // one-term expression
        let spec = default_chain(2);
        let mut modes = transverse_modes(&spec).unwrap();
        for i in 0..2 {
            modes.lamb_dicke[(i, 1)] = 0.0;
        }
        let j = coupling_matrix(&modes, &spec).unwrap();
        let expect = spec.rabi_freqs_hz[0]
            * spec.rabi_freqs_hz[1]
            * modes.lamb_dicke[(0, 0)]
            * modes.lamb_dicke[(1, 0)]
            / (2.0 * (spec.mu_hz - modes.mode_freqs_hz[0]));
        assert_abs_diff_eq!(j[(0, 1)], expect, epsilon = 1e-12 * expect.abs());
    }

    #[test]
    fn brute_force_summation_oracle() {
        // direct reimplementation of the mode sum, term by term in order
        let spec = alpha036_chain();
        let modes = transverse_modes(&spec).unwrap();
        let j = coupling_matrix(&modes, &spec).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                let expect = if i == k {
                    0.0
                } else {
                    let mut s = 0.0;
                    for m in 0..3 {
                        s += spec.rabi_freqs_hz[i]
                            * spec.rabi_freqs_hz[k]
                            * modes.lamb_dicke[(i, m)]
                            * modes.lamb_dicke[(k, m)]
                            / (2.0 * (spec.mu_hz - modes.mode_freqs_hz[m]));
                    }
                    s
                };
                assert_abs_diff_eq!(j[(i, k)], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn v_matrix_properties() {
        let spec = alpha036_chain();
        let modes = transverse_modes(&spec).unwrap();
        let set = CouplingSet::from_chain(&modes, &spec).unwrap();

        // mirror symmetry of the chain
        for m in 0..3 {
            assert_abs_diff_eq!(set.v_matrix[(0, m)], set.v_matrix[(2, m)], epsilon = 1e-12);
        }
        // oracle recomputation
        for i in 0..3 {
            for m in 0..3 {
                let eo = modes.lamb_dicke[(i, m)] * spec.rabi_freqs_hz[i];
                let expect = eo * eo / (8.0 * (spec.mu_hz - modes.mode_freqs_hz[m]));
                assert_abs_diff_eq!(set.v_matrix[(i, m)], expect, epsilon = 1e-15);
            }
        }
        // long-range regime: V sums near-uniform across the chain
        assert!(set.uniformity < 0.1, "uniformity = {}", set.uniformity);
    }

    #[test]
    fn zero_rabi_zeroes_row() {
        let mut spec = default_chain(3);
        spec.rabi_freqs_hz[1] = 0.0;
        let modes = transverse_modes(&spec).unwrap();
        let v = spin_phonon_shifts(&modes, &spec).unwrap();
        for m in 0..3 {
            assert_eq!(v[(1, m)], 0.0);
        }
        let j = coupling_matrix(&modes, &spec).unwrap();
        assert_eq!(j[(0, 1)], 0.0);
        assert_eq!(j[(1, 2)], 0.0);
        assert!(j[(0, 2)] != 0.0);
    }

    #[test]
    fn resonance_guard_triggers() {
        let mut spec = default_chain(2);
        let modes = transverse_modes(&spec).unwrap();
        spec.mu_hz = modes.mode_freqs_hz[0] + 1.0; // 1 Hz from the COM mode
        match coupling_matrix(&modes, &spec) {
            Err(Error::DetuningTooClose { mode, .. }) => assert_eq!(mode, 0),
            other => panic!("expected DetuningTooClose, got {other:?}"),
        }
    }

    #[test]
    fn exact_power_law_fits() {
        let set = CouplingSet::power_law_chain(5, 1000.0, 1.0);
        let fit = fit_power_law(&set.j_matrix).unwrap();
        assert_abs_diff_eq!(fit.alpha, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.j0_hz, 1000.0, epsilon = 1e-6);
        // an exact power law fits identically over the short distances
        assert_abs_diff_eq!(fit.alpha_adjacent, 1.0, epsilon = 1e-9);

        let set = CouplingSet::power_law_chain(5, 500.0, 3.0);
        let fit = fit_power_law(&set.j_matrix).unwrap();
        assert_abs_diff_eq!(fit.alpha, 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.j0_hz, 500.0, epsilon = 1e-6);
    }

    #[test]
    fn mixed_sign_rejected_with_pattern() {
        let mut j = CouplingSet::power_law_chain(3, 100.0, 1.0).j_matrix;
        j[(0, 2)] = -j[(0, 2)];
        j[(2, 0)] = j[(0, 2)];
        match fit_power_law(&j) {
            Err(Error::MixedSignCouplings { pattern }) => assert_eq!(pattern, "+-+"),
            other => panic!("expected MixedSignCouplings, got {other:?}"),
        }
    }

    #[test]
    fn tuned_alpha_matches_paper_range() {
        let spec = alpha036_chain();
        let modes = transverse_modes(&spec).unwrap();
        let mut set = CouplingSet::from_chain(&modes, &spec).unwrap();
        let fit = set.fit().unwrap();
        assert!((fit.alpha - 0.36).abs() < 0.01, "alpha = {}", fit.alpha);
        // both fit variants are reported
        assert!(fit.alpha_adjacent.is_finite());
    }

    #[test]
    fn tune_alpha_regression_default() {
        // the frozen mu in the alpha036 preset must be reproduced by the
        // search itself
        let spec = default_chain(3);
        let mu = tune_alpha(&spec, 0.36).unwrap();
        assert_abs_diff_eq!(mu, alpha036_chain().mu_hz, epsilon = 20.0);
    }

    #[test]
    fn alpha_scan_monotone_and_positive() {
        let spec = default_chain(5);
        let scan = scan_alpha(&spec, 40).unwrap();
        assert!(scan.alpha.windows(2).all(|w| w[1] > w[0]), "not monotone: {:?}", scan.alpha);

        // all couplings share one sign across the scanned bracket
        let modes = transverse_modes(&spec).unwrap();
        let mut trial = spec.clone();
        for &mu in &scan.mu_hz {
            trial.mu_hz = mu;
            let j = coupling_matrix(&modes, &trial).unwrap();
            for i in 0..5 {
                for k in (i + 1)..5 {
                    assert!(j[(i, k)] > 0.0, "J[{i}{k}] <= 0 at mu = {mu}");
                }
            }
        }
    }

    #[test]
    fn tune_alpha_out_of_range() {
        let spec = default_chain(3);
        match tune_alpha(&spec, 10.0) {
            Err(Error::AlphaOutOfRange { min, max, .. }) => {
                assert!(min > 0.0 && max < 3.5);
            }
            other => panic!("expected AlphaOutOfRange, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn rabi_rescaling_scales_j_and_v_quadratically(scale_pow in -2i32..3) {
            // powers of two make the c² scaling exact in floating point;
            // a far detuning keeps the resonance guard satisfied at the
            // largest scale
            let c = 2.0f64.powi(scale_pow);
            let mut spec = alpha036_chain();
            spec.mu_hz = 5.0e6;
            let modes = transverse_modes(&spec).unwrap();
            let base = CouplingSet::from_chain(&modes, &spec).unwrap();
            let mut scaled_spec = spec.clone();
            for o in &mut scaled_spec.rabi_freqs_hz {
                *o *= c;
            }
            let scaled = CouplingSet::from_chain(&modes, &scaled_spec).unwrap();
            for i in 0..3 {
                for k in 0..3 {
                    prop_assert_eq!(scaled.j_matrix[(i, k)], base.j_matrix[(i, k)] * c * c);
                    prop_assert_eq!(scaled.v_matrix[(i, k)], base.v_matrix[(i, k)] * c * c);
                }
            }
        }

        #[test]
        fn mirror_symmetry_of_j(n in 2usize..6) {
            let spec = default_chain(n);
            let modes = transverse_modes(&spec).unwrap();
            let j = coupling_matrix(&modes, &spec).unwrap();
            let scale = j.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
            for i in 0..n {
                for k in 0..n {
                    let d = (j[(i, k)] - j[(n - 1 - i, n - 1 - k)]).abs();
                    prop_assert!(d / scale < 1e-12, "mirror defect {} at ({},{})", d / scale, i, k);
                }
            }
        }
    }
}
