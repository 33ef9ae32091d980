//! Chase-ARQ loop, throughput statistics and the Monte-Carlo driver.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{cfr, complex_gaussian, draw_channel, propagate, sigma_from_ecn0, ChannelRealization, NoiseModel};
use crate::combiner::demap::{demap_metrics, symbol_metrics, DemapMode};
use crate::combiner::{CombiningReceiver, ComplexityMeter};
use crate::config::{ChannelDynamic, ReceiverKind, SystemConfig};
use crate::error::Result;
use crate::siso_decoder::{maxlog_decode, LlrFrame, LlrKind, Trellis};
use crate::txchain::{Transmitter, TxFrame, WalshMatrix};

/// Independent random streams of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Info = 0,
    Channel = 1,
    Noise = 2,
    GenieNoise = 3,
}

/// Seed of frame `frame` under master seed `master`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameSeed {
    pub master: u64,
    pub frame: u64,
}

impl FrameSeed {
    pub fn new(master: u64, frame: u64) -> Self {
        Self { master, frame }
    }

    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.frame.wrapping_mul(4).wrapping_add(stream as u64));
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArqOutcome {
    pub rounds_used: usize,
    pub success: bool,
    pub delivered: f64,
}

/// Random information bits of a frame.
pub fn frame_info(cfg: &SystemConfig, seed: FrameSeed) -> Vec<u8> {
    let mut rng = seed.rng(Stream::Info);
    (0..cfg.info_bits()).map(|_| rng.random_range(0..2u8)).collect()
}

/// The `K` channel realizations of a frame (one per round, or a single
/// repeated draw for a long-term static channel).
pub fn frame_channels(cfg: &SystemConfig, seed: FrameSeed) -> Vec<ChannelRealization> {
    let mut rng = seed.rng(Stream::Channel);
    match cfg.channel_dynamic {
        ChannelDynamic::ShortTerm => (1..=cfg.max_rounds).map(|k| draw_channel(cfg, &mut rng, k)).collect(),
        ChannelDynamic::LongTerm => {
            let h = draw_channel(cfg, &mut rng, 1);
            (1..=cfg.max_rounds)
                .map(|k| ChannelRealization { taps: h.taps.clone(), round: k })
                .collect()
        }
    }
}

/// One packet on the channels drawn from its seed.
pub fn run_frame(cfg: &SystemConfig, kind: ReceiverKind, ecn0_db: f64, seed: FrameSeed) -> Result<ArqOutcome> {
    run_frame_on(cfg, kind, ecn0_db, seed, &frame_channels(cfg, seed))
}

/// One packet on the given per-round channels; `channels.len()` must be at least `K`.
pub fn run_frame_on(
    cfg: &SystemConfig,
    kind: ReceiverKind,
    ecn0_db: f64,
    seed: FrameSeed,
    channels: &[ChannelRealization],
) -> Result<ArqOutcome> {
    let tx = Transmitter::new(cfg)?;
    let frame = tx.build(&frame_info(cfg, seed))?;
    let sigma2 = sigma_from_ecn0(ecn0_db, cfg);
    match kind {
        ReceiverKind::Mfb => run_mfb(cfg, &tx, &frame, sigma2, seed, channels),
        _ => run_combining(cfg, kind, &frame, sigma2, seed, channels),
    }
}

fn outcome(cfg: &SystemConfig, rounds_used: usize, success: bool) -> ArqOutcome {
    ArqOutcome {
        rounds_used,
        success,
        delivered: if success { cfg.rate() } else { 0.0 },
    }
}

fn run_combining(
    cfg: &SystemConfig,
    kind: ReceiverKind,
    frame: &TxFrame,
    sigma2: f64,
    seed: FrameSeed,
    channels: &[ChannelRealization],
) -> Result<ArqOutcome> {
    let mut rx = CombiningReceiver::new(cfg, kind, sigma2)?;
    let noise = NoiseModel::new(sigma2)?;
    let mut rng = seed.rng(Stream::Noise);
    for (k, h) in channels.iter().take(cfg.max_rounds).enumerate() {
        let y = propagate(&frame.chips, h, noise, &mut rng)?;
        let res = rx.process_round(&y.to_frequency_domain(), &cfr(h, cfg.chips()))?;
        if res.decoded.info == frame.info {
            return Ok(outcome(cfg, k + 1, true));
        }
    }
    Ok(outcome(cfg, cfg.max_rounds, false))
}

/// `‖h_{r,t} ∗ w_n‖²` summed over receive antennas, for every `(t, n)`.
pub fn isolated_energy(h: &ChannelRealization, walsh: &WalshMatrix) -> Vec<f64> {
    let (rx, tx) = (h.rx_antennas(), h.tx_antennas());
    let (n_len, codes) = (walsh.length(), walsh.codes());
    let mut out = vec![0.0; tx * codes];
    let mut conv = vec![Complex64::new(0.0, 0.0); n_len + h.len() - 1];
    for t in 0..tx {
        for n in 0..codes {
            let w = walsh.code(n);
            let mut e = 0.0;
            for r in 0..rx {
                conv.fill(Complex64::new(0.0, 0.0));
                for (l, tap) in h.taps.iter().enumerate() {
                    let g = tap[(r, t)];
                    for (o, &c) in conv[l..].iter_mut().zip(&w) {
                        *o += g * c;
                    }
                }
                e += conv.iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
            out[t * codes + n] = e;
        }
    }
    out
}

/// Matched-filter bound: every symbol seen through its own spread waveform
/// with no interference, maximal-ratio combined over taps, antennas and rounds.
fn run_mfb(
    cfg: &SystemConfig,
    tx: &Transmitter,
    frame: &TxFrame,
    sigma2: f64,
    seed: FrameSeed,
    channels: &[ChannelRealization],
) -> Result<ArqOutcome> {
    let trellis = Trellis::from_config(cfg);
    let (ts, codes) = (cfg.symbols_per_antenna, cfg.codes);
    let es = cfg.symbol_energy();
    let mut rng = seed.rng(Stream::GenieNoise);
    let n_sym = frame.symbols.symbols.len();
    let mut u = vec![Complex64::new(0.0, 0.0); n_sym];
    let mut energy = vec![0.0; n_sym];
    let apriori = LlrFrame::zeros(cfg.coded_bits(), LlrKind::APriori);
    for (k, h) in channels.iter().take(cfg.max_rounds).enumerate() {
        let e = isolated_energy(h, tx.walsh());
        for (idx, &s) in frame.symbols.symbols.iter().enumerate() {
            let (t, j) = (idx / ts, idx % ts);
            let ek = e[t * codes + j % codes];
            u[idx] += s * ek + complex_gaussian(&mut rng, sigma2 * ek);
            energy[idx] += ek;
        }
        let metrics: Vec<[f64; 4]> = u
            .iter()
            .zip(&energy)
            .map(|(&r, &g)| symbol_metrics(r, g, (sigma2 * g).max(f64::MIN_POSITIVE), es))
            .collect();
        let ext = demap_metrics(&metrics, &apriori, DemapMode::Exact);
        let out = maxlog_decode(&trellis, &tx.interleaver().deinterleave(&ext.values))?;
        if out.info == frame.info {
            return Ok(outcome(cfg, k + 1, true));
        }
    }
    Ok(outcome(cfg, cfg.max_rounds, false))
}

/// Per-SNR accumulators of the renewal-reward throughput estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputStats {
    pub ecn0_db: f64,
    pub rate: f64,
    pub frames: u64,
    pub successes: u64,
    pub sum_rounds: u64,
    pub sum_rounds_sq: u64,
    pub sum_success_rounds: u64,
}

impl ThroughputStats {
    pub fn new(ecn0_db: f64, rate: f64) -> Self {
        Self {
            ecn0_db,
            rate,
            frames: 0,
            successes: 0,
            sum_rounds: 0,
            sum_rounds_sq: 0,
            sum_success_rounds: 0,
        }
    }

    pub fn push(&mut self, o: &ArqOutcome) {
        let k = o.rounds_used as u64;
        self.frames += 1;
        self.sum_rounds += k;
        self.sum_rounds_sq += k * k;
        if o.success {
            self.successes += 1;
            self.sum_success_rounds += k;
        }
    }

    pub fn sum_delivered(&self) -> f64 {
        self.rate * self.successes as f64
    }

    /// `η = Σ𝓡 / Σ𝓚`.
    pub fn eta(&self) -> f64 {
        if self.sum_rounds == 0 {
            return 0.0;
        }
        self.sum_delivered() / self.sum_rounds as f64
    }

    pub fn mean_rounds(&self) -> f64 {
        if self.frames == 0 {
            return 0.0;
        }
        self.sum_rounds as f64 / self.frames as f64
    }

    pub fn frame_error_rate(&self) -> f64 {
        1.0 - self.successes as f64 / self.frames.max(1) as f64
    }

    /// 95% normal-approximation half-width of `η` (delta method on the ratio).
    pub fn ci_halfwidth(&self) -> f64 {
        let n = self.frames as f64;
        if self.frames < 2 {
            return f64::INFINITY;
        }
        let eta = self.eta();
        let mean_k = self.sum_rounds as f64 / n;
        let r = self.rate;
        let mean_r = r * self.successes as f64 / n;
        let var_r = r * r * self.successes as f64 / n - mean_r * mean_r;
        let var_k = self.sum_rounds_sq as f64 / n - mean_k * mean_k;
        let cov = r * self.sum_success_rounds as f64 / n - mean_r * mean_k;
        let var = (var_r - 2.0 * eta * cov + eta * eta * var_k).max(0.0) * n / (n - 1.0);
        1.96 * (var / n).sqrt() / mean_k
    }
}

/// `frames` frames at one SNR; frame `f` uses `FrameSeed::new(master, f)` at
/// every SNR point and for every receiver.
pub fn run_point(
    cfg: &SystemConfig,
    kind: ReceiverKind,
    ecn0_db: f64,
    frames: u64,
    master: u64,
) -> Result<ThroughputStats> {
    cfg.validate()?;
    let outcomes = (0..frames)
        .into_par_iter()
        .map(|f| run_frame(cfg, kind, ecn0_db, FrameSeed::new(master, f)))
        .collect::<Result<Vec<_>>>()?;
    let mut stats = ThroughputStats::new(ecn0_db, cfg.rate());
    for o in &outcomes {
        stats.push(o);
    }
    Ok(stats)
}

pub fn run_sweep(
    cfg: &SystemConfig,
    kind: ReceiverKind,
    grid: &[f64],
    frames: u64,
    master: u64,
) -> Result<Vec<ThroughputStats>> {
    grid.iter().map(|&snr| run_point(cfg, kind, snr, frames, master)).collect()
}

pub fn mfb_reference(cfg: &SystemConfig, grid: &[f64], frames: u64, master: u64) -> Result<Vec<ThroughputStats>> {
    run_sweep(cfg, ReceiverKind::Mfb, grid, frames, master)
}

/// Combining cost and state size of one packet that uses all `K` rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityReport {
    pub additions: u64,
    pub state_reals: usize,
}

/// Runs a receiver through `K` rounds on a blocked link and reads its meters.
pub fn measure_complexity(cfg: &SystemConfig, kind: ReceiverKind) -> Result<ComplexityReport> {
    if kind == ReceiverKind::Mfb {
        // MRC accumulators: one complex sample and one energy per symbol
        let symbols = (cfg.symbols_per_antenna * cfg.tx_antennas) as u64;
        return Ok(ComplexityReport {
            additions: 3 * symbols * (cfg.max_rounds as u64 - 1),
            state_reals: 3 * symbols as usize,
        });
    }
    let mut rx = CombiningReceiver::new(cfg, kind, 1.0)?;
    let h = ChannelRealization::zero(cfg.rx_antennas, cfg.tx_antennas, cfg.taps, 1);
    let lam = cfr(&h, cfg.chips());
    let y = crate::numerics::ComplexBlockVector::zeros(cfg.chips(), cfg.rx_antennas);
    for _ in 0..cfg.max_rounds {
        rx.process_round(&y, &lam)?;
    }
    let ComplexityMeter { additions } = rx.meter();
    Ok(ComplexityReport {
        additions,
        state_reals: rx.memory_reals(),
    })
}
