//! Soft-cancellation MMSE equalization with chip-level or symbol-level
//! packet combining.

pub mod chip;
pub mod demap;
pub mod despread;
pub mod filters;
pub mod priors;
pub mod receiver;
pub mod symbol;

pub use chip::{chip_update, single_round_statistics, ChipCombinerState};
pub use demap::{demap_chip_level, DemapMode};
pub use despread::{despread_and_stat, residual_variance, DespreadOutput};
pub use filters::{compute_filters, equalized_chips, mmse_estimate, EqualizerFilters};
pub use priors::{chip_priors_from_llrs, ChipPriors, VARIANCE_FLOOR};
pub use receiver::{CombiningReceiver, RoundResult};
pub use symbol::{symbol_update_and_demap, SymbolCombinerState};

/// Real additions spent on combining across rounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ComplexityMeter {
    pub additions: u64,
}
