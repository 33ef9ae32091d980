//! Turbo receivers: MMSE FDE with soft cancellation, SISO decoding and
//! either chip-level or symbol-level combining over ARQ rounds.

use crate::channel::ChannelFrequencyResponse;
use crate::config::{ReceiverKind, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{block_dft, ComplexBlockVector};
use crate::siso_decoder::{maxlog_decode, DecoderOutput, LlrFrame, LlrKind, Trellis};
use crate::txchain::{Interleaver, WalshMatrix};

use super::chip::{chip_update, single_round_statistics, ChipCombinerState};
use super::demap::{demap_chip_level, DemapMode};
use super::despread::{despread_and_stat, DespreadOutput};
use super::filters::{compute_filters, equalized_chips};
use super::priors::chip_priors_from_llrs;
use super::symbol::{symbol_update_and_demap, SymbolCombinerState};
use super::ComplexityMeter;

#[derive(Debug, Clone)]
enum Combiner {
    Chip(ChipCombinerState),
    Symbol(SymbolCombinerState),
}

/// Output of one ARQ round.
#[derive(Debug, Clone)]
pub struct RoundResult {
    /// Decoder output of the last turbo iteration.
    pub decoded: DecoderOutput,
    /// Demapper extrinsic LLRs of every iteration, interleaved order.
    pub demapper: Vec<LlrFrame>,
}

/// Receiver state for one packet across its ARQ rounds.
#[derive(Debug, Clone)]
pub struct CombiningReceiver {
    cfg: SystemConfig,
    walsh: WalshMatrix,
    trellis: Trellis,
    interleaver: Interleaver,
    sigma2: f64,
    mode: DemapMode,
    combiner: Combiner,
    meter: ComplexityMeter,
    round: usize,
}

impl CombiningReceiver {
    pub fn new(cfg: &SystemConfig, kind: ReceiverKind, sigma2: f64) -> Result<Self> {
        cfg.validate()?;
        if !(sigma2 > 0.0) {
            return Err(Error::config("noise_variance", "MMSE filtering needs σ² > 0"));
        }
        let combiner = match kind {
            ReceiverKind::Chip => Combiner::Chip(ChipCombinerState::new(cfg.chips(), cfg.tx_antennas)),
            ReceiverKind::Symbol => {
                Combiner::Symbol(SymbolCombinerState::new(cfg.symbols_per_antenna, cfg.tx_antennas))
            }
            ReceiverKind::Mfb => {
                return Err(Error::config("receiver", "the MFB is not a combining receiver"));
            }
        };
        Ok(Self {
            cfg: cfg.clone(),
            walsh: WalshMatrix::new(cfg.spreading_factor, cfg.codes)?,
            trellis: Trellis::from_config(cfg),
            interleaver: Interleaver::new(cfg.coded_bits(), cfg.interleaver_seed),
            sigma2,
            mode: DemapMode::Exact,
            combiner,
            meter: ComplexityMeter::default(),
            round: 0,
        })
    }

    pub fn with_demap_mode(mut self, mode: DemapMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn kind(&self) -> ReceiverKind {
        match self.combiner {
            Combiner::Chip(_) => ReceiverKind::Chip,
            Combiner::Symbol(_) => ReceiverKind::Symbol,
        }
    }

    pub fn rounds(&self) -> usize {
        self.round
    }

    pub fn meter(&self) -> ComplexityMeter {
        self.meter
    }

    /// Real values kept between rounds by the combiner.
    pub fn memory_reals(&self) -> usize {
        match &self.combiner {
            Combiner::Chip(s) => s.memory_reals(),
            Combiner::Symbol(s) => s.memory_reals(),
        }
    }

    /// Runs the turbo iterations of the next round on `y_f = DFT(y^(k))`
    /// with round-`k` frequency response `cfr`.
    pub fn process_round(&mut self, y_f: &ComplexBlockVector, cfr: &ChannelFrequencyResponse) -> Result<RoundResult> {
        let round = self.round + 1;
        // single-round statistics for the symbol-level receiver
        let mut own = None;
        match &mut self.combiner {
            Combiner::Chip(state) => chip_update(state, round, y_f, cfr, &mut self.meter)?,
            Combiner::Symbol(_) => own = Some(single_round_statistics(y_f, cfr)?),
        }

        let coded = self.cfg.coded_bits();
        let es = self.cfg.symbol_energy();
        let mut apriori = LlrFrame::zeros(coded, LlrKind::APriori);
        let mut demapper = Vec::with_capacity(self.cfg.turbo_iterations);
        let mut decoded = None;
        for _ in 0..self.cfg.turbo_iterations.max(1) {
            let priors = chip_priors_from_llrs(&apriori, &self.cfg, &self.walsh);
            let (matched, gram) = match (&self.combiner, &own) {
                (Combiner::Chip(s), _) => (s.matched(), s.gram()),
                (Combiner::Symbol(_), Some((m, g))) => (m, g.as_slice()),
                (Combiner::Symbol(_), None) => unreachable!("symbol statistics computed above"),
            };
            let filters = compute_filters(gram, &priors.avg_variance, self.sigma2)?;
            let prior_f = block_dft(&priors.mean);
            let z = equalized_chips(&filters, matched, &prior_f);
            let d: DespreadOutput = despread_and_stat(&z, &filters.gain, &priors.avg_variance, &self.walsh);
            let ext = match &mut self.combiner {
                Combiner::Chip(_) => demap_chip_level(&d, &apriori, es, self.mode),
                Combiner::Symbol(state) => {
                    symbol_update_and_demap(state, round, &d, &apriori, es, self.mode, &mut self.meter)?
                }
            };
            let out = maxlog_decode(&self.trellis, &self.interleaver.deinterleave(&ext.values))?;
            apriori = LlrFrame::from_values(self.interleaver.interleave(&out.extrinsic), LlrKind::APriori);
            demapper.push(ext);
            decoded = Some(out);
        }
        if let Combiner::Symbol(state) = &mut self.combiner {
            state.finish_round();
        }
        self.round = round;
        Ok(RoundResult {
            decoded: decoded.expect("at least one iteration"),
            demapper,
        })
    }
}
