//! Soft demapping of despread symbols into extrinsic bit LLRs.
//!
//! The per-point metric is the Gaussian log-likelihood
//! `ξ(s) = -|r - g·s|² / θ²`. With LLRs defined as `ln P(0)/P(1)`, the prior
//! weight of label bit `b` is `(1 - 2b)·φ/2`.

use crate::siso_decoder::{cap_llr, LlrFrame, LlrKind};
use crate::txchain::constellation;

use super::despread::DespreadOutput;

/// How the demapper combines the exponentials of one bit hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DemapMode {
    #[default]
    Exact,
    MaxLog,
}

#[inline]
fn combine(a: f64, b: f64, mode: DemapMode) -> f64 {
    let hi = a.max(b);
    match mode {
        DemapMode::MaxLog => hi,
        DemapMode::Exact => {
            if hi == f64::NEG_INFINITY {
                hi
            } else {
                hi + (-(a - b).abs()).exp().ln_1p()
            }
        }
    }
}

/// `ξ(s)` for the four Gray QPSK labels.
#[inline]
pub fn symbol_metrics(r: num_complex::Complex64, g: f64, theta2: f64, es: f64) -> [f64; 4] {
    let points = constellation(es);
    points.map(|s| -(r - s * g).norm_sqr() / theta2)
}

/// Extrinsic LLRs of both label bits from accumulated point metrics.
#[inline]
pub fn extrinsic_from_metrics(metrics: &[f64; 4], apriori: [f64; 2], mode: DemapMode) -> [f64; 2] {
    // labels: 0 = (0,0), 1 = (0,1), 2 = (1,0), 3 = (1,1)
    let p2 = [0.5 * apriori[1], -0.5 * apriori[1]];
    let p1 = [0.5 * apriori[0], -0.5 * apriori[0]];
    let e1 = combine(metrics[0] + p2[0], metrics[1] + p2[1], mode)
        - combine(metrics[2] + p2[0], metrics[3] + p2[1], mode);
    let e2 = combine(metrics[0] + p1[0], metrics[2] + p1[1], mode)
        - combine(metrics[1] + p1[0], metrics[3] + p1[1], mode);
    [cap_llr(e1), cap_llr(e2)]
}

/// Per-round metrics of every symbol, `[t·T_s + j][label]`.
pub fn round_metrics(d: &DespreadOutput, es: f64) -> Vec<[f64; 4]> {
    d.symbols
        .iter()
        .zip(d.gain.iter().zip(&d.variance))
        .map(|(&r, (&g, &v))| symbol_metrics(r, g, v, es))
        .collect()
}

/// Extrinsic frame from one metric per symbol.
pub fn demap_metrics(metrics: &[[f64; 4]], apriori: &LlrFrame, mode: DemapMode) -> LlrFrame {
    let mut values = Vec::with_capacity(metrics.len() * 2);
    for (k, m) in metrics.iter().enumerate() {
        let la = [apriori.values[2 * k], apriori.values[2 * k + 1]];
        values.extend(extrinsic_from_metrics(m, la, mode));
    }
    LlrFrame {
        values,
        kind: LlrKind::Extrinsic,
    }
}

/// Single-observation demapper used by the chip-level receiver.
pub fn demap_chip_level(d: &DespreadOutput, apriori: &LlrFrame, es: f64, mode: DemapMode) -> LlrFrame {
    demap_metrics(&round_metrics(d, es), apriori, mode)
}
