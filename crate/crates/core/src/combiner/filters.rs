//! Forward/backward soft-MMSE filters and the frequency-domain estimate.
//!
//! Per bin `i`, with `C_i = σ² Ξ̃⁻¹ + D_i`:
//!
//! ```text
//! Γ_i = (1/σ²)(I - D_i C_i⁻¹) = Ξ̃⁻¹ C_i⁻¹
//! Υ   = (1/T_c) Σ_i Γ_i D_i
//! Ω_i = Γ_i D_i - Δ,   Δ = diag(Υ)
//! z_i = Γ_i ỹ_i - Ω_i x̃_{f,i}
//! ```
//!
//! The right-hand form of `Γ_i` is used for evaluation; it avoids the
//! cancellation in `I - D_i C_i⁻¹` at high SNR.
//!
//! Only the diagonal of `Υ` is kept in `Ω_i`: the chip of antenna `t` then
//! appears as `Υ_tt x_t` free of its own prior, while the same-chip terms of
//! the other antennas are cancelled with their priors like the rest of the
//! interference.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{block_idft, hermitian_inverse, CMatrix, ComplexBlockVector, SmallHermitianMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerFilters {
    pub forward: Vec<CMatrix>,
    pub backward: Vec<CMatrix>,
    /// `Υ`, the time-domain gain matrix of the equalized chips.
    pub gain: CMatrix,
}

pub fn compute_filters(gram: &[CMatrix], avg_variance: &[f64], sigma2: f64) -> Result<EqualizerFilters> {
    if !(sigma2 > 0.0) {
        return Err(Error::config("noise_variance", "MMSE filtering needs σ² > 0"));
    }
    let tx = avg_variance.len();
    let inv_var: Vec<f64> = avg_variance.iter().map(|v| 1.0 / v).collect();
    let mut forward = Vec::with_capacity(gram.len());
    let mut products = Vec::with_capacity(gram.len());
    let mut gain = CMatrix::zeros(tx, tx);
    for d in gram {
        let mut c = d.clone();
        for t in 0..tx {
            c[(t, t)] += sigma2 * inv_var[t];
        }
        let c_inv = hermitian_inverse(&SmallHermitianMatrix::new_unchecked(c))?;
        let mut g = c_inv;
        for r in 0..tx {
            for col in 0..tx {
                g[(r, col)] *= inv_var[r];
            }
        }
        let gd = g.matmul(d);
        gain.add_assign(&gd);
        forward.push(g);
        products.push(gd);
    }
    let gain = gain.scale(1.0 / gram.len() as f64);
    let own: Vec<f64> = (0..tx).map(|t| gain[(t, t)].re).collect();
    let sub = CMatrix::from_diag(&own);
    let backward = products.iter().map(|gd| gd.sub(&sub)).collect();
    Ok(EqualizerFilters {
        forward,
        backward,
        gain,
    })
}

/// `z_f = Γ ỹ_f - Ω x̃_f`, both inputs in `(T_c, N_T)` layout.
pub fn mmse_estimate(
    filters: &EqualizerFilters,
    matched: &ComplexBlockVector,
    prior_mean_f: &ComplexBlockVector,
) -> ComplexBlockVector {
    let (bins, tx) = (matched.blocks(), matched.width());
    let mut out = Vec::with_capacity(bins * tx);
    let mut tmp = vec![Complex64::new(0.0, 0.0); tx];
    for i in 0..bins {
        let y = matched.block(i);
        let x = prior_mean_f.block(i);
        let (g, o) = (&filters.forward[i], &filters.backward[i]);
        for (r, slot) in tmp.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..tx {
                acc += g[(r, c)] * y[c] - o[(r, c)] * x[c];
            }
            *slot = acc;
        }
        out.extend_from_slice(&tmp);
    }
    ComplexBlockVector::new(out, bins, tx).expect("estimate shape")
}

/// Time-domain equalized chips `ẑ = IDFT(z_f)`.
pub fn equalized_chips(
    filters: &EqualizerFilters,
    matched: &ComplexBlockVector,
    prior_mean_f: &ComplexBlockVector,
) -> ComplexBlockVector {
    block_idft(&mmse_estimate(filters, matched, prior_mean_f))
}
