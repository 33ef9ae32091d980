//! Symbol-level combining: demapper metrics accumulated over ARQ rounds.

use crate::error::{Error, Result};
use crate::siso_decoder::LlrFrame;

use super::demap::{demap_metrics, round_metrics, DemapMode};
use super::despread::DespreadOutput;
use super::ComplexityMeter;

/// `ξ̄_{t,j}(s)` summed over all completed rounds.
///
/// Turbo iterations inside round `k` each recompute that round's term; the
/// latest one is kept in `current` and folded into the accumulator by
/// [`SymbolCombinerState::finish_round`], so round `k` is counted once.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolCombinerState {
    accumulated: Vec<[f64; 4]>,
    current: Option<Vec<[f64; 4]>>,
    completed: usize,
}

impl SymbolCombinerState {
    pub fn new(symbols_per_antenna: usize, tx: usize) -> Self {
        Self {
            accumulated: vec![[0.0; 4]; symbols_per_antenna * tx],
            current: None,
            completed: 0,
        }
    }

    /// Number of rounds folded into the accumulator.
    pub fn completed_rounds(&self) -> usize {
        self.completed
    }

    pub fn accumulated(&self) -> &[[f64; 4]] {
        &self.accumulated
    }

    /// Real values held across rounds: `T_s·N_T·2^M`.
    pub fn memory_reals(&self) -> usize {
        self.accumulated.len() * 4
    }

    /// Folds the latest term of the current round into the accumulator.
    pub fn finish_round(&mut self) {
        if let Some(term) = self.current.take() {
            for (acc, t) in self.accumulated.iter_mut().zip(&term) {
                for s in 0..4 {
                    acc[s] += t[s];
                }
            }
            self.completed += 1;
        }
    }
}

/// One turbo iteration of round `round`: fresh metric term plus the
/// accumulated prior-round metrics, then extrinsic demapping.
///
/// Rounds after the first cost `T_s·N_T·2^M` additions per call.
pub fn symbol_update_and_demap(
    state: &mut SymbolCombinerState,
    round: usize,
    d: &DespreadOutput,
    apriori: &LlrFrame,
    es: f64,
    mode: DemapMode,
    meter: &mut ComplexityMeter,
) -> Result<LlrFrame> {
    if round != state.completed + 1 {
        return Err(Error::RoundOrderViolation {
            state: state.completed,
            update: round,
        });
    }
    let term = round_metrics(d, es);
    if term.len() != state.accumulated.len() {
        return Err(Error::BadLength {
            what: "despread symbols",
            expected: state.accumulated.len(),
            got: term.len(),
        });
    }
    let ext = if state.completed == 0 {
        demap_metrics(&term, apriori, mode)
    } else {
        let total: Vec<[f64; 4]> = state
            .accumulated
            .iter()
            .zip(&term)
            .map(|(a, t)| [a[0] + t[0], a[1] + t[1], a[2] + t[2], a[3] + t[3]])
            .collect();
        meter.additions += (total.len() * 4) as u64;
        demap_metrics(&total, apriori, mode)
    };
    state.current = Some(term);
    Ok(ext)
}
