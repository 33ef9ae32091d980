//! Link parameters shared by every stage of the simulator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the channel evolves between ARQ rounds of one packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelDynamic {
    /// Independent realization every round.
    #[default]
    ShortTerm,
    /// One realization for all rounds of a packet.
    LongTerm,
}

/// Which receiver processes the ARQ rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverKind {
    /// Joint MMSE-FDE over all rounds via accumulated `ỹ_f` and `D_i`.
    Chip,
    /// Per-round MMSE-FDE, rounds fused in the demapper metric.
    Symbol,
    /// Interference-free genie reference (matched filter bound).
    Mfb,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 3] = [ReceiverKind::Chip, ReceiverKind::Symbol, ReceiverKind::Mfb];

    pub fn as_str(self) -> &'static str {
        match self {
            ReceiverKind::Chip => "chip",
            ReceiverKind::Symbol => "symbol",
            ReceiverKind::Mfb => "mfb",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chip" => Ok(ReceiverKind::Chip),
            "symbol" => Ok(ReceiverKind::Symbol),
            "mfb" => Ok(ReceiverKind::Mfb),
            other => Err(Error::config(
                "receiver",
                format!("unknown receiver `{other}` (expected chip, symbol or mfb)"),
            )),
        }
    }
}

/// Every scalar parameter of the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub spreading_factor: usize,
    pub codes: usize,
    pub bits_per_symbol: usize,
    pub max_rounds: usize,
    pub taps: usize,
    pub cp_len: usize,
    pub symbols_per_antenna: usize,
    /// Rate-1/2 feedforward generators written in octal digits, e.g. `[35, 23]`.
    pub generators: [u32; 2],
    pub interleaver_seed: u64,
    pub turbo_iterations: usize,
    #[serde(default)]
    pub channel_dynamic: ChannelDynamic,
}

impl SystemConfig {
    /// Two transmit antennas, N = 16, QPSK, K = 3, L = 10 equal-power taps,
    /// T_CP = 10, 1024 coded bits per frame, (35, 23)₈, three turbo iterations.
    pub fn baseline(rx_antennas: usize, codes: usize) -> Self {
        Self {
            tx_antennas: 2,
            rx_antennas,
            spreading_factor: 16,
            codes,
            bits_per_symbol: 2,
            max_rounds: 3,
            taps: 10,
            cp_len: 10,
            symbols_per_antenna: 256,
            generators: [35, 23],
            interleaver_seed: 0x1e5e_ed00,
            turbo_iterations: 3,
            channel_dynamic: ChannelDynamic::ShortTerm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tx_antennas", self.tx_antennas),
            ("rx_antennas", self.rx_antennas),
            ("spreading_factor", self.spreading_factor),
            ("codes", self.codes),
            ("max_rounds", self.max_rounds),
            ("taps", self.taps),
            ("symbols_per_antenna", self.symbols_per_antenna),
            ("turbo_iterations", self.turbo_iterations),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if !self.spreading_factor.is_power_of_two() {
            return Err(Error::config(
                "spreading_factor",
                format!("{} is not a power of two", self.spreading_factor),
            ));
        }
        if self.codes > self.spreading_factor {
            return Err(Error::config(
                "codes",
                format!(
                    "C <= N violated: C = {} > N = {}",
                    self.codes, self.spreading_factor
                ),
            ));
        }
        if self.bits_per_symbol != 2 {
            return Err(Error::config(
                "bits_per_symbol",
                format!("only QPSK (M = 2) is supported, got M = {}", self.bits_per_symbol),
            ));
        }
        if self.symbols_per_antenna % self.codes != 0 {
            return Err(Error::config(
                "symbols_per_antenna",
                format!(
                    "T_s = {} is not divisible by C = {}",
                    self.symbols_per_antenna, self.codes
                ),
            ));
        }
        if self.cp_len + 1 < self.taps {
            return Err(Error::config(
                "cp_len",
                format!(
                    "CP shorter than channel: T_CP = {} < L - 1 = {}",
                    self.cp_len,
                    self.taps - 1
                ),
            ));
        }
        if self.chips() < self.taps {
            return Err(Error::config(
                "taps",
                format!("channel has {} taps but the frame only {} chips", self.taps, self.chips()),
            ));
        }
        for (idx, g) in self.generators.iter().enumerate() {
            if g.to_string().chars().any(|ch| ch > '7') {
                return Err(Error::config(
                    format!("generators[{idx}]"),
                    format!("{g} is not an octal number"),
                ));
            }
        }
        let memory = self.encoder_memory();
        if memory == 0 {
            return Err(Error::config("generators", "encoder needs memory >= 1"));
        }
        if self.coded_bits() % 2 != 0 || self.coded_bits() / 2 <= memory {
            return Err(Error::config(
                "symbols_per_antenna",
                format!("{} coded bits cannot hold a terminated rate-1/2 codeword", self.coded_bits()),
            ));
        }
        Ok(())
    }

    /// Generator polynomials as binary taps, most significant bit acting on the newest input.
    pub fn generator_taps(&self) -> [u32; 2] {
        self.generators
            .map(|g| u32::from_str_radix(&g.to_string(), 8).expect("validated octal generator"))
    }

    /// Constraint length minus one.
    pub fn encoder_memory(&self) -> usize {
        let [a, b] = self.generator_taps();
        let bits = 32 - (a | b).leading_zeros() as usize;
        bits.saturating_sub(1)
    }

    /// `T_c = T_s · N / C`.
    pub fn chips(&self) -> usize {
        self.symbols_per_antenna * self.spreading_factor / self.codes
    }

    /// Number of spreading periods, `T_s / C`.
    pub fn periods(&self) -> usize {
        self.symbols_per_antenna / self.codes
    }

    /// `N_T · M · T_s`.
    pub fn coded_bits(&self) -> usize {
        self.tx_antennas * self.bits_per_symbol * self.symbols_per_antenna
    }

    /// Information bits per frame after reserving the zero tail.
    pub fn info_bits(&self) -> usize {
        self.coded_bits() / 2 - self.encoder_memory()
    }

    /// Symbol energy `E_s = N / C`, which gives unit chip energy.
    pub fn symbol_energy(&self) -> f64 {
        self.spreading_factor as f64 / self.codes as f64
    }

    /// Nominal rate `R = ρ M N_T C` with ρ = 1/2.
    pub fn rate(&self) -> f64 {
        0.5 * (self.bits_per_symbol * self.tx_antennas * self.codes) as f64
    }

    pub fn constellation_size(&self) -> usize {
        1 << self.bits_per_symbol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_configs_are_valid_and_rates_match() {
        for (codes, rate) in [(4, 8.0), (8, 16.0), (16, 32.0)] {
            let cfg = SystemConfig::baseline(2, codes);
            cfg.validate().unwrap();
            assert_eq!(cfg.rate(), rate);
            assert_eq!(cfg.coded_bits(), 1024);
            assert_eq!(cfg.info_bits(), 508);
        }
        assert_eq!(SystemConfig::baseline(2, 16).chips(), 256);
        assert_eq!(SystemConfig::baseline(2, 4).chips(), 1024);
    }

    #[test]
    fn generators_decode_as_octal() {
        let cfg = SystemConfig::baseline(2, 16);
        assert_eq!(cfg.generator_taps(), [0b11101, 0b10011]);
        assert_eq!(cfg.encoder_memory(), 4);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = SystemConfig::baseline(2, 16);
        cfg.codes = 17;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("C <= N violated"), "{err}");

        let mut cfg = SystemConfig::baseline(2, 16);
        cfg.cp_len = 5;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("CP shorter than channel"), "{err}");

        let mut cfg = SystemConfig::baseline(2, 16);
        cfg.spreading_factor = 12;
        cfg.codes = 12;
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::baseline(2, 16);
        cfg.bits_per_symbol = 4;
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::baseline(2, 16);
        cfg.generators = [38, 23];
        assert!(cfg.validate().is_err());
    }
}
