//! Conversion of a-priori bit LLRs into soft chip statistics.

use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::numerics::ComplexBlockVector;
use crate::siso_decoder::LlrFrame;
use crate::txchain::{spread_antenna, WalshMatrix};

/// Floor applied to chip variances and residual variances.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Conditional-mean chips `x̃` and their variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipPriors {
    /// `(T_c, N_T)` time-major conditional means.
    pub mean: ComplexBlockVector,
    /// `σ²_{t,i}`, time-major like `mean`.
    pub variance: Vec<f64>,
    /// Diagonal of `Ξ̃`, the time average of `Ξ_i`.
    pub avg_variance: Vec<f64>,
}

impl ChipPriors {
    /// Uninformative priors: `x̃ = 0`, `Ξ̃ = I`.
    pub fn uninformative(chips: usize, tx: usize) -> Self {
        Self {
            mean: ComplexBlockVector::zeros(chips, tx),
            variance: vec![1.0; chips * tx],
            avg_variance: vec![1.0; tx],
        }
    }
}

/// `E[s]` and `E|s|² - |E[s]|²` for one Gray QPSK symbol, given bit LLRs.
#[inline]
pub fn soft_symbol(l1: f64, l2: f64, es: f64) -> (Complex64, f64) {
    let a = (es / 2.0).sqrt();
    let mean = Complex64::new(a * (0.5 * l1).tanh(), a * (0.5 * l2).tanh());
    (mean, (es - mean.norm_sqr()).max(0.0))
}

pub fn chip_priors_from_llrs(
    apriori: &LlrFrame,
    cfg: &SystemConfig,
    walsh: &WalshMatrix,
) -> ChipPriors {
    let (tx, ts, bits) = (cfg.tx_antennas, cfg.symbols_per_antenna, cfg.bits_per_symbol);
    let chips = cfg.chips();
    let (n_len, codes) = (walsh.length(), walsh.codes());
    let es = cfg.symbol_energy();
    if apriori.values.iter().all(|&l| l == 0.0) {
        return ChipPriors::uninformative(chips, tx);
    }

    let mut mean = vec![Complex64::new(0.0, 0.0); chips * tx];
    let mut variance = vec![0.0; chips * tx];
    let mut avg_variance = vec![0.0; tx];
    let mut soft = Vec::with_capacity(ts);
    let mut row = Vec::with_capacity(chips);
    for t in 0..tx {
        soft.clear();
        let mut period_var = Vec::with_capacity(ts / codes);
        let mut acc = 0.0;
        for j in 0..ts {
            let l1 = apriori.get(t, j, 0, ts, bits);
            let l2 = apriori.get(t, j, 1, ts, bits);
            let (m, v) = soft_symbol(l1, l2, es);
            soft.push(m);
            acc += v;
            if (j + 1) % codes == 0 {
                period_var.push((acc / n_len as f64).clamp(VARIANCE_FLOOR, 1.0));
                acc = 0.0;
            }
        }
        row.clear();
        spread_antenna(&soft, walsh, &mut row);
        let mut sum = 0.0;
        for (i, &x) in row.iter().enumerate() {
            let v = period_var[i / n_len];
            mean[i * tx + t] = x;
            variance[i * tx + t] = v;
            sum += v;
        }
        avg_variance[t] = sum / chips as f64;
    }
    ChipPriors {
        mean: ComplexBlockVector::new(mean, chips, tx).expect("prior shape"),
        variance,
        avg_variance,
    }
}
