//! Multisine signal algebra.
//!
//! The transmitted waveform is a sum of `N` cosines on the comb
//! `f_n = f0 + (n - 1) * delta_f`. With the transmit phases set to cancel the
//! channel phases, the received tones add coherently and the second and fourth
//! moments of the received signal have the closed forms used by the harvester
//! objective.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Samples used by [`numeric_moments`] when the caller has no preference.
pub const DEFAULT_MOMENT_SAMPLES: usize = 4096;

/// Frequency comb of the power signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneGrid {
    f0: f64,
    delta_f: f64,
    n_tones: usize,
}

impl ToneGrid {
    pub fn new(f0: f64, delta_f: f64, n_tones: usize) -> Result<Self> {
        if !(f0 > 0.0 && f0.is_finite()) {
            return Err(Error::InvalidArgument(format!("f0 must be positive, got {f0}")));
        }
        if !(delta_f > 0.0 && delta_f.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "delta_f must be positive, got {delta_f}"
            )));
        }
        if n_tones == 0 {
            return Err(Error::InvalidArgument("n_tones must be at least 1".into()));
        }
        Ok(Self { f0, delta_f, n_tones })
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn n_tones(&self) -> usize {
        self.n_tones
    }

    /// Frequency of tone `n` (zero based).
    pub fn frequency(&self, n: usize) -> f64 {
        self.f0 + n as f64 * self.delta_f
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_tones).map(|n| self.frequency(n)).collect()
    }

    /// Harmonic index of each tone relative to the fundamental `delta_f`, or
    /// `None` when `f0` is not an integer multiple of `delta_f`.
    pub fn harmonic_indices(&self) -> Option<Vec<u64>> {
        let ratio = self.f0 / self.delta_f;
        let k0 = ratio.round();
        if (ratio - k0).abs() > 1e-9 * ratio.max(1.0) {
            return None;
        }
        let k0 = k0 as u64;
        Some((0..self.n_tones as u64).map(|n| k0 + n).collect())
    }
}

/// Per-tone transmit amplitudes; `0.5 * |s|^2` is the transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneAmplitudes(pub Vec<f64>);

impl ToneAmplitudes {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if let Some(bad) = s.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "amplitudes must be finite and non-negative, got {bad}"
            )));
        }
        Ok(Self(s))
    }

    pub fn from_powers(x: &[f64]) -> Self {
        Self(x.iter().map(|v| v.max(0.0).sqrt()).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn transmit_power(&self) -> f64 {
        0.5 * self.0.iter().map(|v| v * v).sum::<f64>()
    }

    /// Per-tone powers `x_n = s_n^2`.
    pub fn powers(&self) -> Vec<f64> {
        self.0.iter().map(|v| v * v).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(pub Vec<f64>);

impl PhaseVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Transmit phases that cancel the channel phases so every tone arrives at zero phase.
pub fn optimal_phases(channel_phases: &[f64]) -> PhaseVector {
    PhaseVector(channel_phases.iter().map(|p| -p).collect())
}

/// Matched beamformer `w = s * conj(h) / |h|` for one tone.
pub fn matched_beamformer_weights(h_row: &[Complex64], amplitude: f64) -> Result<Vec<Complex64>> {
    if amplitude < 0.0 || !amplitude.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "amplitude must be non-negative, got {amplitude}"
        )));
    }
    let norm = h_row.iter().map(|h| h.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::DegenerateChannel);
    }
    Ok(h_row.iter().map(|h| h.conj() * (amplitude / norm)).collect())
}

/// Row norms of the `N x M` channel matrix: the scalar gain each tone sees
/// after matched beamforming.
pub fn effective_channels(h: &DMatrix<Complex64>) -> Vec<f64> {
    h.row_iter()
        .map(|row| row.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

/// Second and fourth moments of the phase-aligned received signal:
///
/// ```text
/// m2 = 1/2 sum_i a_i^2
/// m4 = 3/8 sum_i a_i^4 + 3/4 sum_{i != j} a_i^2 a_j^2
/// ```
///
/// with `a_i = s_i h_i`.
pub fn analytic_moments(s: &[f64], h_eff: &[f64]) -> Result<(f64, f64)> {
    check_len(s.len(), h_eff.len(), "amplitudes vs gains")?;
    let mut sum2 = 0.0;
    let mut sum4 = 0.0;
    for (si, hi) in s.iter().zip(h_eff) {
        let p = (si * hi).powi(2);
        sum2 += p;
        sum4 += p * p;
    }
    let m2 = 0.5 * sum2;
    // sum over ordered pairs i != j of p_i p_j
    let cross = sum2 * sum2 - sum4;
    let m4 = 0.375 * sum4 + 0.75 * cross;
    Ok((m2, m4))
}

/// Time averages of `y^2` and `y^4` for
/// `y(t) = sum_i s_i h_i cos(2 pi f_i t + phi_i)` over one fundamental period
/// `1 / delta_f`, by uniform sampling.
///
/// Uniform sampling integrates a trigonometric polynomial of degree `D`
/// exactly when `n_samples > D`; `y^4` has degree `4 * k_max` where `k_max` is
/// the highest harmonic index of the comb.
pub fn numeric_moments(
    s: &[f64],
    h_eff: &[f64],
    phases: &[f64],
    grid: &ToneGrid,
    n_samples: usize,
) -> Result<(f64, f64)> {
    check_len(s.len(), h_eff.len(), "amplitudes vs gains")?;
    check_len(s.len(), phases.len(), "amplitudes vs phases")?;
    check_len(s.len(), grid.n_tones(), "amplitudes vs tone grid")?;
    let harmonics = grid.harmonic_indices().ok_or_else(|| {
        Error::InvalidArgument("f0 is not an integer multiple of delta_f (off-comb)".into())
    })?;
    let k_max = *harmonics.last().expect("grid has at least one tone") as usize;
    let needed = 4 * k_max + 1;
    if n_samples < needed {
        return Err(Error::Undersampled { needed, given: n_samples });
    }

    let amps: Vec<f64> = s.iter().zip(h_eff).map(|(a, b)| a * b).collect();
    let mut acc2 = 0.0;
    let mut acc4 = 0.0;
    let inv_n = 1.0 / n_samples as f64;
    for t in 0..n_samples {
        let mut y = 0.0;
        for ((a, &k), phi) in amps.iter().zip(&harmonics).zip(phases) {
            // reduce k * t mod n exactly before scaling, keeps the argument small
            let turns = ((k as u128 * t as u128) % n_samples as u128) as f64 * inv_n;
            y += a * (2.0 * PI * turns + phi).cos();
        }
        let y2 = y * y;
        acc2 += y2;
        acc4 += y2 * y2;
    }
    Ok((acc2 * inv_n, acc4 * inv_n))
}

/// Average power `1/2 sum s_n^2 g_n^2` reaching the information receiver.
pub fn received_power_at_ir(s: &[f64], g_eff: &[f64]) -> Result<f64> {
    check_len(s.len(), g_eff.len(), "amplitudes vs gains")?;
    Ok(0.5 * s.iter().zip(g_eff).map(|(a, g)| (a * g).powi(2)).sum::<f64>())
}

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("{what}: {a} != {b}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_grid(n: usize) -> ToneGrid {
        ToneGrid::new(16.0, 1.0, n).unwrap()
    }

    #[test]
    fn grid_frequencies() {
        let g = ToneGrid::new(2.4e9, 1.25e6, 8).unwrap();
        assert_eq!(g.frequency(0), 2.4e9);
        assert_eq!(g.frequency(7), 2.4e9 + 7.0 * 1.25e6);
        assert_eq!(g.harmonic_indices().unwrap()[0], 1920);
        assert!(ToneGrid::new(0.0, 1.0, 1).is_err());
        assert!(ToneGrid::new(1.0, 1.0, 0).is_err());
        assert!(ToneGrid::new(1.5, 1.0, 2).unwrap().harmonic_indices().is_none());
    }

    #[test]
    fn phases_negate() {
        assert_eq!(optimal_phases(&[0.0, 0.0]).0, vec![0.0, 0.0]);
        assert_eq!(optimal_phases(&[PI / 3.0]).0, vec![-PI / 3.0]);
    }

    #[test]
    fn beamformer_examples() {
        let w = matched_beamformer_weights(&[Complex64::new(1.0, 0.0)], 2.0).unwrap();
        assert_eq!(w, vec![Complex64::new(2.0, 0.0)]);

        let h = [Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)];
        let w = matched_beamformer_weights(&h, 1.0).unwrap();
        assert_relative_eq!(w[0].re, 0.6, epsilon = 1e-15);
        assert_relative_eq!(w[1].im, -0.8, epsilon = 1e-15);
        let hw: Complex64 = h.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert_relative_eq!(hw.re, 5.0, epsilon = 1e-14);
        assert!(hw.im.abs() < 1e-14);

        let zero = [Complex64::new(0.0, 0.0); 3];
        assert!(matches!(
            matched_beamformer_weights(&zero, 1.0),
            Err(Error::DegenerateChannel)
        ));
    }

    #[test]
    fn beamformer_beats_random_unit_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let h: Vec<Complex64> = (0..4)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let w = matched_beamformer_weights(&h, 1.0).unwrap();
        let best = h.iter().zip(&w).map(|(a, b)| a * b).sum::<Complex64>().norm();
        let wnorm: f64 = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert_relative_eq!(wnorm, 1.0, epsilon = 1e-14);
        for _ in 0..1000 {
            let v: Vec<Complex64> = (0..4)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let gain = h.iter().zip(&v).map(|(a, b)| a * b / n).sum::<Complex64>().norm();
            assert!(gain <= best + 1e-12);
        }
    }

    #[test]
    fn effective_channel_norms() {
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(3.0, 0.0),
                Complex64::new(4.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 2.0),
            ],
        );
        assert_eq!(effective_channels(&h), vec![5.0, 2.0]);
        let single = DMatrix::from_element(1, 1, Complex64::from_polar(0.7, 1.1));
        assert_relative_eq!(effective_channels(&single)[0], 0.7, epsilon = 1e-15);
    }

    #[test]
    fn analytic_moment_examples() {
        let (m2, m4) = analytic_moments(&[2f64.sqrt()], &[1.0]).unwrap();
        assert_relative_eq!(m2, 1.0, epsilon = 1e-15);
        assert_relative_eq!(m4, 1.5, epsilon = 1e-15);
        let (m2, m4) = analytic_moments(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(m2, 1.0);
        assert_relative_eq!(m4, 2.25);
        assert!(analytic_moments(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn numeric_single_cosine() {
        let (m2, m4) =
            numeric_moments(&[2f64.sqrt()], &[1.0], &[0.0], &small_grid(1), 4096).unwrap();
        assert_relative_eq!(m2, 1.0, epsilon = 1e-9);
        assert_relative_eq!(m4, 1.5, epsilon = 1e-9);
    }

    #[test]
    fn numeric_rejects_undersampling() {
        let grid = ToneGrid::new(2.4e9, 1.25e6, 8).unwrap();
        let s = [1.0; 8];
        let err = numeric_moments(&s, &s, &[0.0; 8], &grid, DEFAULT_MOMENT_SAMPLES).unwrap_err();
        assert!(matches!(err, Error::Undersampled { needed: 7709, .. }));
        assert!(numeric_moments(&s, &s, &[0.0; 8], &grid, 7709).is_ok());
    }

    #[test]
    fn numeric_matches_analytic_for_two_tones() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let s: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 2.0).collect();
            let h: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
            let (a2, a4) = analytic_moments(&s, &h).unwrap();
            let (n2, n4) = numeric_moments(&s, &h, &[0.0; 2], &small_grid(2), 4096).unwrap();
            assert_relative_eq!(a2, n2, max_relative = 1e-9);
            assert_relative_eq!(a4, n4, max_relative = 1e-9);
        }
    }

    #[test]
    fn comb_intermodulation_exceeds_closed_form_fourth_moment() {
        // three equal tones on a uniform comb: f1 + f3 = 2 f2 adds 3/2 to E{y^4}
        let s = [1.0; 3];
        let (a2, a4) = analytic_moments(&s, &s).unwrap();
        let (n2, n4) = numeric_moments(&s, &s, &[0.0; 3], &small_grid(3), 4096).unwrap();
        assert_relative_eq!(a2, n2, max_relative = 1e-12);
        assert_relative_eq!(a4, 5.625, max_relative = 1e-15);
        assert_relative_eq!(n4, 7.125, max_relative = 1e-12);
    }

    #[test]
    fn phase_alignment_dominates() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let grid = small_grid(4);
        let s: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let h: Vec<f64> = (0..4).map(|_| 0.5 + rng.random::<f64>()).collect();
        let psi: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        // received phase is phi + psi; the optimal transmit phases cancel psi
        let opt = optimal_phases(&psi);
        let received: Vec<f64> = opt.0.iter().zip(&psi).map(|(a, b)| a + b).collect();
        let (m2_opt, m4_opt) = numeric_moments(&s, &h, &received, &grid, 4096).unwrap();
        for _ in 0..100 {
            let phi: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
            let rx: Vec<f64> = phi.iter().zip(&psi).map(|(a, b)| a + b).collect();
            let (m2, m4) = numeric_moments(&s, &h, &rx, &grid, 4096).unwrap();
            assert!((m2 - m2_opt).abs() <= 1e-9);
            assert!(m4 <= m4_opt + 1e-9);
        }
    }

    #[test]
    fn moments_scale_with_amplitude() {
        let s = [0.3, 1.2, 0.7];
        let h = [1.0, 0.4, 0.9];
        let (m2, m4) = analytic_moments(&s, &h).unwrap();
        let alpha = 1.7;
        let scaled: Vec<f64> = s.iter().map(|v| v * alpha).collect();
        let (n2, n4) = analytic_moments(&scaled, &h).unwrap();
        assert_relative_eq!(n2, alpha.powi(2) * m2, max_relative = 1e-14);
        assert_relative_eq!(n4, alpha.powi(4) * m4, max_relative = 1e-14);
    }

    #[test]
    fn ir_power() {
        assert_relative_eq!(received_power_at_ir(&[2f64.sqrt()], &[1.0]).unwrap(), 1.0);
        assert_eq!(received_power_at_ir(&[1.0, 1.0], &[0.0, 1.0]).unwrap(), 0.5);
        let s = [0.4, 0.9, 1.3];
        let h = [0.2, 0.8, 0.5];
        let (m2, _) = analytic_moments(&s, &h).unwrap();
        assert_relative_eq!(received_power_at_ir(&s, &h).unwrap(), m2, max_relative = 1e-15);
    }
}
