use num_complex::Complex64;

use crate::numerics::{CMatrix, ComplexBlockVector};
use crate::txchain::{despread, WalshMatrix};

/// Floor on the residual interference-plus-noise variance.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Despread symbols of an equivalent model `r = g·s + ν`, `E|ν|² = θ²`.
///
/// All vectors are antenna-major, index `t·T_s + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DespreadOutput {
    pub symbols: Vec<Complex64>,
    pub gain: Vec<f64>,
    pub variance: Vec<f64>,
    pub tx_antennas: usize,
}

impl DespreadOutput {
    pub fn per_antenna(&self) -> usize {
        self.symbols.len() / self.tx_antennas
    }
}

/// Residual variance of antenna `t` after soft MMSE with gain matrix `Υ`.
///
/// The error `ẑ - diag(Υ)x` has covariance
/// `Υ - ΥΞ̃Δ - ΔΞ̃Υᴴ + ΔΞ̃Δ`, whose diagonal is `g_t - ξ_t g_t²`.
pub fn residual_variance(gain: &CMatrix, avg_variance: &[f64], t: usize) -> f64 {
    let g = gain[(t, t)].re;
    (g - avg_variance[t] * g * g).max(RESIDUAL_FLOOR)
}

/// Correlates the equalized chips with every code and attaches `g_t = Re Υ_{tt}`
/// and the residual variance of each antenna.
pub fn despread_and_stat(
    equalized: &ComplexBlockVector,
    gain: &CMatrix,
    avg_variance: &[f64],
    walsh: &WalshMatrix,
) -> DespreadOutput {
    let (chips, tx) = (equalized.blocks(), equalized.width());
    let mut symbols = Vec::new();
    let mut gains = Vec::new();
    let mut variance = Vec::new();
    let mut row = vec![Complex64::new(0.0, 0.0); chips];
    for t in 0..tx {
        for (i, slot) in row.iter_mut().enumerate() {
            *slot = equalized.get(i, t);
        }
        let r = despread(&row, walsh);
        let g = gain[(t, t)].re;
        let theta2 = residual_variance(gain, avg_variance, t);
        gains.extend(std::iter::repeat_n(g, r.len()));
        variance.extend(std::iter::repeat_n(theta2, r.len()));
        symbols.extend(r);
    }
    DespreadOutput {
        symbols,
        gain: gains,
        variance,
        tx_antennas: tx,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use crate::config::SystemConfig;
    use crate::txchain::Transmitter;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_equalization_returns_symbols() {
        let cfg = SystemConfig::baseline(2, 8);
        let tx = Transmitter::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let info: Vec<u8> = (0..cfg.info_bits()).map(|_| rng.random_range(0..2)).collect();
        let frame = tx.build(&info).unwrap();
        let z = ComplexBlockVector::new(frame.chips.time_major(), cfg.chips(), 2).unwrap();
        let d = despread_and_stat(&z, &CMatrix::identity(2), &[1.0, 1.0], tx.walsh());
        for (a, b) in d.symbols.iter().zip(&frame.symbols.symbols) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(d.gain.iter().all(|&g| g == 1.0));
        assert!(d.variance.iter().all(|&v| v == RESIDUAL_FLOOR));
    }

    #[test]
    fn half_gain_residual() {
        let gain = CMatrix::from_diag(&[0.5]);
        assert!((residual_variance(&gain, &[1.0], 0) - 0.25).abs() < 1e-15);
        // informative priors: g - ξ g²
        assert!((residual_variance(&gain, &[0.2], 0) - (0.5 - 0.2 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn single_code_despreading_averages_white_noise() {
        // the despreader output noise variance equals the chip noise variance,
        // so the symbol SNR is N times the per-chip SNR of a unit-energy chip stream
        let n = 16;
        let w = WalshMatrix::new(n, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let periods = 20_000;
        let noise_var = 0.5;
        let noise: Vec<Complex64> = (0..periods * n).map(|_| complex_gaussian(&mut rng, noise_var)).collect();
        let z = ComplexBlockVector::new(noise, periods * n, 1).unwrap();
        let d = despread_and_stat(&z, &CMatrix::identity(1), &[1.0], &w);
        let var = d.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / d.symbols.len() as f64;
        // chip SNR = (1/N)/noise_var for E_s = 1 spread over N chips; symbol SNR = 1/var
        let gain = (1.0 / var) / ((1.0 / n as f64) / noise_var);
        assert!((gain / n as f64 - 1.0).abs() < 0.10, "{gain}");
    }
}
