//! Transmit chain: convolutional encoding, interleaving, Gray QPSK mapping,
//! Walsh multi-code spreading and cyclic prefix insertion.
//!
//! Symbol `j` of antenna `t` rides code `n = j mod C` during spreading period
//! `q = ⌊j / C⌋`, i.e. chips `q·N .. q·N + N`. The interleaved coded frame is
//! split into `N_T` contiguous sub-streams of `M·T_s` bits.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// First `C` columns of the Sylvester-Hadamard matrix of order `N`, scaled by `1/√N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalshMatrix {
    length: usize,
    codes: usize,
    /// Row-major `N × C`: entry `(p, n)` is chip `p` of code `n`.
    entries: Vec<f64>,
}

impl WalshMatrix {
    pub fn new(length: usize, codes: usize) -> Result<Self> {
        if length == 0 || !length.is_power_of_two() {
            return Err(Error::BadSpreadingFactor(length));
        }
        if codes == 0 || codes > length {
            return Err(Error::ShapeMismatch(format!(
                "need 1 <= C <= N, got C = {codes}, N = {length}"
            )));
        }
        let scale = 1.0 / (length as f64).sqrt();
        let mut entries = Vec::with_capacity(length * codes);
        for p in 0..length {
            for n in 0..codes {
                let sign = if (p & n).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                entries.push(sign * scale);
            }
        }
        Ok(Self {
            length,
            codes,
            entries,
        })
    }

    /// Spreading factor `N`.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn codes(&self) -> usize {
        self.codes
    }

    #[inline]
    pub fn get(&self, chip: usize, code: usize) -> f64 {
        self.entries[chip * self.codes + code]
    }

    /// Column `code` as a length-`N` vector.
    pub fn code(&self, code: usize) -> Vec<f64> {
        (0..self.length).map(|p| self.get(p, code)).collect()
    }

    /// Sign pattern (`±1`) of entry `(p, n)`.
    #[inline]
    pub fn sign(&self, chip: usize, code: usize) -> i32 {
        if self.get(chip, code) > 0.0 {
            1
        } else {
            -1
        }
    }
}

/// `walsh_matrix(N, C)`.
pub fn walsh_matrix(length: usize, codes: usize) -> Result<WalshMatrix> {
    WalshMatrix::new(length, codes)
}

/// Rate-1/2 feedforward convolutional encoder, zero-terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvEncoder {
    taps: [u32; 2],
    memory: usize,
}

impl ConvEncoder {
    pub fn new(taps: [u32; 2], memory: usize) -> Self {
        Self { taps, memory }
    }

    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self::new(cfg.generator_taps(), cfg.encoder_memory())
    }

    pub fn taps(&self) -> [u32; 2] {
        self.taps
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn states(&self) -> usize {
        1 << self.memory
    }

    /// Output pair and next state for input `bit` leaving `state`.
    ///
    /// The register is `bit << memory | state`, with the newest stored input
    /// at bit `memory - 1`; generator MSBs multiply the current input.
    #[inline]
    pub fn step(&self, state: usize, bit: u8) -> ([u8; 2], usize) {
        let reg = ((bit as u32) << self.memory) | state as u32;
        let out = [
            ((reg & self.taps[0]).count_ones() & 1) as u8,
            ((reg & self.taps[1]).count_ones() & 1) as u8,
        ];
        (out, (reg >> 1) as usize)
    }

    /// Encodes `info` followed by `memory` zero tail bits.
    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        let mut state = 0;
        let mut out = Vec::with_capacity(2 * (info.len() + self.memory));
        for &b in info.iter().chain(std::iter::repeat_n(&0u8, self.memory)) {
            let (pair, next) = self.step(state, b);
            out.extend_from_slice(&pair);
            state = next;
        }
        debug_assert_eq!(state, 0);
        out
    }
}

/// Seeded Fisher-Yates permutation: interleaved position `i` carries coded bit `perm[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        perm.shuffle(&mut rng);
        Self { perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn interleave<T: Copy>(&self, input: &[T]) -> Vec<T> {
        assert_eq!(input.len(), self.perm.len(), "interleaver length mismatch");
        self.perm.iter().map(|&p| input[p]).collect()
    }

    pub fn deinterleave<T: Copy + Default>(&self, input: &[T]) -> Vec<T> {
        assert_eq!(input.len(), self.perm.len(), "interleaver length mismatch");
        let mut out = vec![T::default(); input.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = input[i];
        }
        out
    }
}

/// The coded and interleaved frame `b`, `N_T` contiguous sub-streams of `M·T_s` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedFrame {
    pub bits: Vec<u8>,
    pub interleaver: Interleaver,
    pub tx_antennas: usize,
}

impl CodedFrame {
    pub fn substream(&self, t: usize) -> &[u8] {
        let len = self.bits.len() / self.tx_antennas;
        &self.bits[t * len..(t + 1) * len]
    }

    /// Coded bits in encoder order.
    pub fn deinterleaved(&self) -> Vec<u8> {
        self.interleaver.deinterleave(&self.bits)
    }
}

pub fn encode_and_interleave(info: &[u8], cfg: &SystemConfig) -> Result<CodedFrame> {
    let interleaver = Interleaver::new(cfg.coded_bits(), cfg.interleaver_seed);
    encode_with(info, cfg, &ConvEncoder::from_config(cfg), interleaver)
}

fn encode_with(
    info: &[u8],
    cfg: &SystemConfig,
    encoder: &ConvEncoder,
    interleaver: Interleaver,
) -> Result<CodedFrame> {
    if info.len() != cfg.info_bits() {
        return Err(Error::BadLength {
            what: "information block",
            expected: cfg.info_bits(),
            got: info.len(),
        });
    }
    let coded = encoder.encode(info);
    if coded.len() != interleaver.len() {
        return Err(Error::BadLength {
            what: "coded frame",
            expected: interleaver.len(),
            got: coded.len(),
        });
    }
    Ok(CodedFrame {
        bits: interleaver.interleave(&coded),
        interleaver,
        tx_antennas: cfg.tx_antennas,
    })
}

/// Gray QPSK point for label bits `(b₁, b₂)` at symbol energy `es`.
#[inline]
pub fn qpsk_point(b1: u8, b2: u8, es: f64) -> Complex64 {
    let a = (es / 2.0).sqrt();
    Complex64::new(a * (1.0 - 2.0 * b1 as f64), a * (1.0 - 2.0 * b2 as f64))
}

/// `λ_m{s}` for the constellation point with label `label` (bit 1 is the MSB).
#[inline]
pub fn label_bit(label: usize, m: usize, bits_per_symbol: usize) -> u8 {
    ((label >> (bits_per_symbol - 1 - m)) & 1) as u8
}

/// All `2^M` points, indexed by label.
pub fn constellation(es: f64) -> [Complex64; 4] {
    [
        qpsk_point(0, 0, es),
        qpsk_point(0, 1, es),
        qpsk_point(1, 0, es),
        qpsk_point(1, 1, es),
    ]
}

/// Per-antenna symbol streams `s_{t,j}`, antenna-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    pub symbols: Vec<Complex64>,
    pub tx_antennas: usize,
    pub energy: f64,
}

impl SymbolBlock {
    pub fn per_antenna(&self) -> usize {
        self.symbols.len() / self.tx_antennas
    }

    pub fn antenna(&self, t: usize) -> &[Complex64] {
        let n = self.per_antenna();
        &self.symbols[t * n..(t + 1) * n]
    }
}

pub fn map_symbols(coded: &CodedFrame, cfg: &SystemConfig) -> Result<SymbolBlock> {
    if cfg.bits_per_symbol != 2 {
        return Err(Error::UnsupportedModulation(cfg.bits_per_symbol));
    }
    if coded.bits.len() != cfg.coded_bits() {
        return Err(Error::BadLength {
            what: "coded frame",
            expected: cfg.coded_bits(),
            got: coded.bits.len(),
        });
    }
    let es = cfg.symbol_energy();
    let symbols = coded
        .bits
        .chunks_exact(2)
        .map(|pair| qpsk_point(pair[0], pair[1], es))
        .collect();
    Ok(SymbolBlock {
        symbols,
        tx_antennas: cfg.tx_antennas,
        energy: es,
    })
}

/// Chip matrix `X` (`N_T × T_c`, antenna-major) plus the CP length for `X′`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipFrame {
    chips: Vec<Complex64>,
    tx_antennas: usize,
    cp_len: usize,
}

impl ChipFrame {
    pub fn new(chips: Vec<Complex64>, tx_antennas: usize, cp_len: usize) -> Result<Self> {
        if tx_antennas == 0 || chips.len() % tx_antennas != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} chips cannot be split over {tx_antennas} antennas",
                chips.len()
            )));
        }
        Ok(Self {
            chips,
            tx_antennas,
            cp_len,
        })
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx_antennas
    }

    /// `T_c`.
    pub fn len(&self) -> usize {
        self.chips.len() / self.tx_antennas
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    /// Row `t` of `X`.
    pub fn antenna(&self, t: usize) -> &[Complex64] {
        let n = self.len();
        &self.chips[t * n..(t + 1) * n]
    }

    /// Row `t` of `X′`: the last `T_CP` chips followed by all of row `t` of `X`.
    pub fn antenna_with_cp(&self, t: usize) -> Vec<Complex64> {
        let row = self.antenna(t);
        let n = row.len();
        let mut out = Vec::with_capacity(n + self.cp_len);
        // cp_len may exceed T_c in toy configs; wrap cyclically
        for k in 0..self.cp_len {
            let idx = (n * self.cp_len + k - self.cp_len) % n;
            out.push(row[idx]);
        }
        out.extend_from_slice(row);
        out
    }

    /// `X` in time-major block layout (`data[i·N_T + t]`) for the block DFT.
    pub fn time_major(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.chips.len()];
        for t in 0..self.tx_antennas {
            for (i, &x) in self.antenna(t).iter().enumerate() {
                out[i * self.tx_antennas + t] = x;
            }
        }
        out
    }

    /// Mean of `|x_{t,i}|²` over the frame.
    pub fn mean_chip_energy(&self) -> f64 {
        self.chips.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.chips.len() as f64
    }

    /// Writes `X′` as CSV rows `t,i,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,i,re,im")?;
        for t in 0..self.tx_antennas {
            for (i, z) in self.antenna_with_cp(t).iter().enumerate() {
                writeln!(w, "{t},{i},{:e},{:e}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// `x_{t,i} = Σ_n s_{t,n,i} w_{p,n}`, `p = i mod N`.
pub fn spread_and_sum(
    symbols: &SymbolBlock,
    walsh: &WalshMatrix,
    cfg: &SystemConfig,
) -> Result<ChipFrame> {
    let (n_len, codes) = (walsh.length(), walsh.codes());
    if n_len != cfg.spreading_factor || codes != cfg.codes {
        return Err(Error::ShapeMismatch(format!(
            "Walsh matrix is {n_len}x{codes}, config needs {}x{}",
            cfg.spreading_factor, cfg.codes
        )));
    }
    let per_antenna = symbols.per_antenna();
    if symbols.tx_antennas != cfg.tx_antennas || per_antenna % codes != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} symbols on {} antennas do not fill whole spreading periods of {codes} codes",
            symbols.symbols.len(),
            symbols.tx_antennas
        )));
    }
    let mut chips = Vec::with_capacity(cfg.tx_antennas * per_antenna / codes * n_len);
    for t in 0..cfg.tx_antennas {
        spread_antenna(symbols.antenna(t), walsh, &mut chips);
    }
    ChipFrame::new(chips, cfg.tx_antennas, cfg.cp_len)
}

/// Spreads one antenna's symbols (a whole number of periods) and appends the chips to `out`.
pub fn spread_antenna(symbols: &[Complex64], walsh: &WalshMatrix, out: &mut Vec<Complex64>) {
    let (n_len, codes) = (walsh.length(), walsh.codes());
    debug_assert_eq!(symbols.len() % codes, 0);
    for group in symbols.chunks_exact(codes) {
        for p in 0..n_len {
            out.push(
                group
                    .iter()
                    .enumerate()
                    .map(|(n, &s)| s * walsh.get(p, n))
                    .sum(),
            );
        }
    }
}

/// Correlates one antenna's chip row with every code: `r_{j} = Σ_p x_{qN+p} w_{p,n}`.
pub fn despread(chips: &[Complex64], walsh: &WalshMatrix) -> Vec<Complex64> {
    let (n_len, codes) = (walsh.length(), walsh.codes());
    let periods = chips.len() / n_len;
    let mut out = Vec::with_capacity(periods * codes);
    for q in 0..periods {
        let block = &chips[q * n_len..(q + 1) * n_len];
        for n in 0..codes {
            out.push(
                block
                    .iter()
                    .enumerate()
                    .map(|(p, &z)| z * walsh.get(p, n))
                    .sum(),
            );
        }
    }
    out
}

/// Everything the transmitter produced for one packet.
#[derive(Debug, Clone)]
pub struct TxFrame {
    pub info: Vec<u8>,
    pub coded: CodedFrame,
    pub symbols: SymbolBlock,
    pub chips: ChipFrame,
}

/// Transmit chain bound to one configuration.
#[derive(Debug, Clone)]
pub struct Transmitter {
    cfg: SystemConfig,
    encoder: ConvEncoder,
    interleaver: Interleaver,
    walsh: WalshMatrix,
}

impl Transmitter {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            encoder: ConvEncoder::from_config(cfg),
            interleaver: Interleaver::new(cfg.coded_bits(), cfg.interleaver_seed),
            walsh: WalshMatrix::new(cfg.spreading_factor, cfg.codes)?,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn encoder(&self) -> &ConvEncoder {
        &self.encoder
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    pub fn walsh(&self) -> &WalshMatrix {
        &self.walsh
    }

    pub fn build(&self, info: &[u8]) -> Result<TxFrame> {
        let coded = encode_with(info, &self.cfg, &self.encoder, self.interleaver.clone())?;
        let symbols = map_symbols(&coded, &self.cfg)?;
        let chips = spread_and_sum(&symbols, &self.walsh, &self.cfg)?;
        Ok(TxFrame {
            info: info.to_vec(),
            coded,
            symbols,
            chips,
        })
    }
}
