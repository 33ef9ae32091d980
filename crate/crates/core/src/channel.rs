//! Quasi-static L-tap Rayleigh MIMO channel, CP-aided propagation and the
//! per-bin channel frequency response.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::numerics::{block_dft, CMatrix, ComplexBlockVector};
use crate::txchain::ChipFrame;

/// Circularly symmetric complex Gaussian sample with `E|z|² = variance`.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Time-domain taps `H_l^(k)`, each `N_R × N_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<CMatrix>,
    pub round: usize,
}

impl ChannelRealization {
    pub fn new(taps: Vec<CMatrix>, round: usize) -> Result<Self> {
        let Some(first) = taps.first() else {
            return Err(Error::ShapeMismatch("channel needs at least one tap".into()));
        };
        let shape = (first.rows(), first.cols());
        if taps.iter().any(|h| (h.rows(), h.cols()) != shape) {
            return Err(Error::ShapeMismatch("channel taps differ in shape".into()));
        }
        Ok(Self { taps, round })
    }

    /// All-zero channel, used to model a blocked link.
    pub fn zero(rx: usize, tx: usize, taps: usize, round: usize) -> Self {
        Self {
            taps: vec![CMatrix::zeros(rx, tx); taps],
            round,
        }
    }

    pub fn rx_antennas(&self) -> usize {
        self.taps[0].rows()
    }

    pub fn tx_antennas(&self) -> usize {
        self.taps[0].cols()
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Tap `l` of the `(r, t)` link.
    pub fn tap(&self, l: usize, r: usize, t: usize) -> Complex64 {
        self.taps[l][(r, t)]
    }

    /// Writes rows `k,l,r,t,re,im`; the header is emitted when `header` is set.
    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> io::Result<()> {
        if header {
            writeln!(w, "k,l,r,t,re,im")?;
        }
        for (l, h) in self.taps.iter().enumerate() {
            for r in 0..h.rows() {
                for t in 0..h.cols() {
                    let z = h[(r, t)];
                    writeln!(w, "{},{l},{r},{t},{:e},{:e}", self.round, z.re, z.im)?;
                }
            }
        }
        Ok(())
    }
}

/// Draws round `round`: i.i.d. `CN(0, 1/L)` entries, so each receive antenna
/// collects `N_T` units of average channel energy.
pub fn draw_channel<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    rng: &mut R,
    round: usize,
) -> ChannelRealization {
    let variance = 1.0 / cfg.taps as f64;
    let taps = (0..cfg.taps)
        .map(|_| {
            let mut h = CMatrix::zeros(cfg.rx_antennas, cfg.tx_antennas);
            for z in h.as_mut_slice() {
                *z = complex_gaussian(rng, variance);
            }
            h
        })
        .collect();
    ChannelRealization { taps, round }
}

/// `Λ_i = Σ_l H_l e^{-j2π i l / T_c}` for every bin `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFrequencyResponse {
    pub bins: Vec<CMatrix>,
}

impl ChannelFrequencyResponse {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bin(&self, i: usize) -> &CMatrix {
        &self.bins[i]
    }

    /// `Λ x_f` for a `(T_c, N_T)` block vector, giving a `(T_c, N_R)` one.
    pub fn apply(&self, x_f: &ComplexBlockVector) -> ComplexBlockVector {
        let rx = self.bins[0].rows();
        let mut out = Vec::with_capacity(self.bins.len() * rx);
        for (i, lam) in self.bins.iter().enumerate() {
            out.extend(lam.matvec(x_f.block(i)));
        }
        ComplexBlockVector::new(out, self.bins.len(), rx).expect("consistent CFR shape")
    }
}

pub fn cfr(h: &ChannelRealization, chips: usize) -> ChannelFrequencyResponse {
    let (rx, tx) = (h.rx_antennas(), h.tx_antennas());
    let bins = (0..chips)
        .map(|i| {
            let mut lam = CMatrix::zeros(rx, tx);
            for (l, tap) in h.taps.iter().enumerate() {
                let k = (i * l) % chips;
                let w = Complex64::from_polar(1.0, -2.0 * PI * k as f64 / chips as f64);
                for (a, b) in lam.as_mut_slice().iter_mut().zip(tap.as_slice()) {
                    *a += b * w;
                }
            }
            lam
        })
        .collect();
    ChannelFrequencyResponse { bins }
}

/// Complex AWGN with variance `σ²` per complex sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    variance: f64,
}

impl NoiseModel {
    /// `variance = 0` is accepted and means a noiseless link.
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(Error::config(
                "noise_variance",
                format!("must be finite and >= 0, got {variance}"),
            ));
        }
        Ok(Self { variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// `σ² = N_T · 10^(-Ec/N0 / 10)`: unit chip energy per transmit antenna and
/// the tap normalization put `N_T` units of signal energy on each receive
/// antenna per chip.
pub fn sigma_from_ecn0(ecn0_db: f64, cfg: &SystemConfig) -> f64 {
    cfg.tx_antennas as f64 * 10f64.powf(-ecn0_db / 10.0)
}

/// Received time-domain samples, `N_R × (T_c + T_CP)`, antenna-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    pub samples: Vec<Complex64>,
    pub rx_antennas: usize,
    pub cp_len: usize,
}

impl ReceivedBlock {
    pub fn len(&self) -> usize {
        self.samples.len() / self.rx_antennas
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn antenna(&self, r: usize) -> &[Complex64] {
        let n = self.len();
        &self.samples[r * n..(r + 1) * n]
    }

    /// Drops the CP and applies the block DFT: `(T_c, N_R)` layout.
    pub fn to_frequency_domain(&self) -> ComplexBlockVector {
        let n = self.len();
        let chips = n - self.cp_len;
        let mut data = vec![Complex64::new(0.0, 0.0); chips * self.rx_antennas];
        for r in 0..self.rx_antennas {
            for (i, &z) in self.antenna(r)[self.cp_len..].iter().enumerate() {
                data[i * self.rx_antennas + r] = z;
            }
        }
        block_dft(&ComplexBlockVector::new(data, chips, self.rx_antennas).expect("non-empty frame"))
    }
}

/// Linear convolution of `X′` with the taps plus AWGN.
pub fn propagate<R: Rng + ?Sized>(
    frame: &ChipFrame,
    h: &ChannelRealization,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<ReceivedBlock> {
    if frame.cp_len() + 1 < h.len() {
        return Err(Error::CpTooShort {
            cp: frame.cp_len(),
            memory: h.len() - 1,
        });
    }
    if h.tx_antennas() != frame.tx_antennas() {
        return Err(Error::ShapeMismatch(format!(
            "channel has {} transmit antennas, frame has {}",
            h.tx_antennas(),
            frame.tx_antennas()
        )));
    }
    let rx = h.rx_antennas();
    let xprime: Vec<Vec<Complex64>> = (0..frame.tx_antennas())
        .map(|t| frame.antenna_with_cp(t))
        .collect();
    let len = xprime[0].len();
    let mut samples = vec![Complex64::new(0.0, 0.0); rx * len];
    for r in 0..rx {
        let out = &mut samples[r * len..(r + 1) * len];
        for (t, row) in xprime.iter().enumerate() {
            for (l, tap) in h.taps.iter().enumerate() {
                let g = tap[(r, t)];
                for (o, x) in out[l..].iter_mut().zip(row) {
                    *o += g * x;
                }
            }
        }
        if noise.variance > 0.0 {
            for o in out.iter_mut() {
                *o += complex_gaussian(rng, noise.variance);
            }
        }
    }
    Ok(ReceivedBlock {
        samples,
        rx_antennas: rx,
        cp_len: frame.cp_len(),
    })
}
