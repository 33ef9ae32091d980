//! Chip-level combining state: accumulated matched-filter output and Gram matrices.

use crate::channel::ChannelFrequencyResponse;
use crate::error::{Error, Result};
use crate::numerics::{CMatrix, ComplexBlockVector};

use super::ComplexityMeter;

/// `ỹ_f^(k) = Σ_κ Λ^(κ)ᴴ y_f^(κ)` and `D_i^(k) = Σ_κ Λ_i^(κ)ᴴ Λ_i^(κ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipCombinerState {
    matched: ComplexBlockVector,
    gram: Vec<CMatrix>,
    round: usize,
}

impl ChipCombinerState {
    pub fn new(chips: usize, tx: usize) -> Self {
        Self {
            matched: ComplexBlockVector::zeros(chips, tx),
            gram: vec![CMatrix::zeros(tx, tx); chips],
            round: 0,
        }
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn matched(&self) -> &ComplexBlockVector {
        &self.matched
    }

    pub fn gram(&self) -> &[CMatrix] {
        &self.gram
    }

    /// Real values held across rounds: `2·T_c·N_T·(N_T + 1)`.
    pub fn memory_reals(&self) -> usize {
        2 * self.matched.as_slice().len() + 2 * self.gram.iter().map(|d| d.as_slice().len()).sum::<usize>()
    }
}

/// Single-round matched-filter output `Λᴴ y_f` and Gram matrices `Λ_iᴴ Λ_i`.
pub fn single_round_statistics(
    y_f: &ComplexBlockVector,
    cfr: &ChannelFrequencyResponse,
) -> Result<(ComplexBlockVector, Vec<CMatrix>)> {
    if y_f.blocks() != cfr.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} received bins but {} CFR bins",
            y_f.blocks(),
            cfr.len()
        )));
    }
    let tx = cfr.bin(0).cols();
    let mut matched = Vec::with_capacity(cfr.len() * tx);
    let mut gram = Vec::with_capacity(cfr.len());
    for (i, lam) in cfr.bins.iter().enumerate() {
        matched.extend(lam.adjoint_matvec(y_f.block(i)));
        gram.push(lam.gram());
    }
    Ok((ComplexBlockVector::new(matched, cfr.len(), tx)?, gram))
}

/// Applies both recursions for round `round` (which must be `state.round() + 1`).
///
/// Round 1 overwrites the zero initialization; every later round costs
/// `2·T_c·N_T·(N_T + 1)` real additions on the meter.
pub fn chip_update(
    state: &mut ChipCombinerState,
    round: usize,
    y_f: &ComplexBlockVector,
    cfr: &ChannelFrequencyResponse,
    meter: &mut ComplexityMeter,
) -> Result<()> {
    if round != state.round + 1 {
        return Err(Error::RoundOrderViolation {
            state: state.round,
            update: round,
        });
    }
    let (matched, gram) = single_round_statistics(y_f, cfr)?;
    if matched.width() != state.matched.width() || matched.blocks() != state.matched.blocks() {
        return Err(Error::ShapeMismatch("round statistics do not match state shape".into()));
    }
    if state.round == 0 {
        state.matched = matched;
        state.gram = gram;
    } else {
        for (acc, v) in state.matched.as_mut_slice().iter_mut().zip(matched.as_slice()) {
            *acc += v;
        }
        for (acc, d) in state.gram.iter_mut().zip(&gram) {
            acc.add_assign(d);
        }
        let values = state.memory_reals() as u64;
        meter.additions += values;
    }
    state.round = round;
    Ok(())
}
