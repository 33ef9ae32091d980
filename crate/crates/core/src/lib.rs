//! Link-level simulator for MIMO CP-CDMA with Chase-combining ARQ and turbo
//! MMSE equalization.

pub mod arq_sim;
pub mod channel;
pub mod cli;
pub mod combiner;
pub mod config;
pub mod error;
pub mod numerics;
pub mod siso_decoder;
pub mod txchain;

pub use config::{ChannelDynamic, ReceiverKind, SystemConfig};
pub use error::{Error, Result};
