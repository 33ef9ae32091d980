//! Max-Log-MAP soft-input soft-output decoding of the terminated rate-1/2
//! convolutional code.
//!
//! All LLRs in this crate use `ln P(b = 0) / P(b = 1)`: positive favours 0.

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::txchain::ConvEncoder;

/// Magnitude every LLR is clipped to before it crosses a module boundary.
pub const LLR_CAP: f64 = 50.0;

#[inline]
pub fn cap_llr(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-LLR_CAP, LLR_CAP)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlrKind {
    APriori,
    Extrinsic,
    APosteriori,
}

/// LLRs of the coded, interleaved bits `b_{t,j,m}`, flat index `t·M·T_s + j·M + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrFrame {
    pub values: Vec<f64>,
    pub kind: LlrKind,
}

impl LlrFrame {
    pub fn zeros(len: usize, kind: LlrKind) -> Self {
        Self {
            values: vec![0.0; len],
            kind,
        }
    }

    pub fn from_values(values: Vec<f64>, kind: LlrKind) -> Self {
        Self {
            values: values.into_iter().map(cap_llr).collect(),
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// LLR of bit `m` of symbol `j` on antenna `t`.
    #[inline]
    pub fn get(&self, t: usize, j: usize, m: usize, symbols: usize, bits: usize) -> f64 {
        self.values[(t * symbols + j) * bits + m]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub input: u8,
    pub output: [u8; 2],
}

/// State transition tables of a feedforward rate-1/2 encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trellis {
    memory: usize,
    /// Two edges per state, indexed `state * 2 + input`.
    edges: Vec<Edge>,
}

impl Trellis {
    pub fn new(encoder: &ConvEncoder) -> Self {
        let states = encoder.states();
        let mut edges = Vec::with_capacity(2 * states);
        for from in 0..states {
            for input in 0..2u8 {
                let (output, to) = encoder.step(from, input);
                edges.push(Edge {
                    from,
                    to,
                    input,
                    output,
                });
            }
        }
        Self {
            memory: encoder.memory(),
            edges,
        }
    }

    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self::new(&ConvEncoder::from_config(cfg))
    }

    pub fn states(&self) -> usize {
        1 << self.memory
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn incoming(&self, state: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.to == state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderOutput {
    /// Extrinsic LLRs on coded bits, encoder order.
    pub extrinsic: Vec<f64>,
    /// Hard decisions on the information bits, tail removed.
    pub info: Vec<u8>,
    /// A-posteriori LLRs on the information bits, tail removed.
    pub info_llr: Vec<f64>,
}

#[inline]
fn branch_metric(out: [u8; 2], l0: f64, l1: f64) -> f64 {
    let s0 = if out[0] == 0 { l0 } else { -l0 };
    let s1 = if out[1] == 0 { l1 } else { -l1 };
    0.5 * (s0 + s1)
}

/// Forward/backward max-log recursion over the zero-terminated trellis.
pub fn maxlog_decode(trellis: &Trellis, coded_llrs: &[f64]) -> Result<DecoderOutput> {
    let memory = trellis.memory();
    if coded_llrs.len() % 2 != 0 || coded_llrs.len() / 2 <= memory {
        return Err(Error::BadLength {
            what: "coded LLR block",
            expected: 2 * (memory + 1),
            got: coded_llrs.len(),
        });
    }
    let steps = coded_llrs.len() / 2;
    let states = trellis.states();
    let ninf = f64::NEG_INFINITY;

    let mut alpha = vec![ninf; (steps + 1) * states];
    alpha[0] = 0.0;
    for k in 0..steps {
        let (l0, l1) = (coded_llrs[2 * k], coded_llrs[2 * k + 1]);
        let (cur, next) = alpha.split_at_mut((k + 1) * states);
        let cur = &cur[k * states..];
        let next = &mut next[..states];
        for e in trellis.edges() {
            let a = cur[e.from];
            if a == ninf {
                continue;
            }
            let m = a + branch_metric(e.output, l0, l1);
            if m > next[e.to] {
                next[e.to] = m;
            }
        }
        let top = next.iter().cloned().fold(ninf, f64::max);
        for v in next.iter_mut() {
            *v -= top;
        }
    }

    let mut beta = vec![ninf; states];
    beta[0] = 0.0;
    let mut prev_beta = vec![ninf; states];
    let mut extrinsic = vec![0.0; coded_llrs.len()];
    let info_len = steps - memory;
    let mut info = vec![0u8; info_len];
    let mut info_llr = vec![0.0; info_len];
    for k in (0..steps).rev() {
        let (l0, l1) = (coded_llrs[2 * k], coded_llrs[2 * k + 1]);
        let a = &alpha[k * states..(k + 1) * states];
        // [bit][value] maxima, bit 2 is the information bit
        let mut best = [[ninf; 2]; 3];
        prev_beta.fill(ninf);
        for e in trellis.edges() {
            let g = branch_metric(e.output, l0, l1);
            let b = beta[e.to];
            if b == ninf {
                continue;
            }
            let bm = g + b;
            if bm > prev_beta[e.from] {
                prev_beta[e.from] = bm;
            }
            if a[e.from] == ninf {
                continue;
            }
            let total = a[e.from] + bm;
            for (bit, &v) in e.output.iter().enumerate() {
                let slot = &mut best[bit][v as usize];
                if total > *slot {
                    *slot = total;
                }
            }
            let slot = &mut best[2][e.input as usize];
            if total > *slot {
                *slot = total;
            }
        }
        let app0 = best[0][0] - best[0][1];
        let app1 = best[1][0] - best[1][1];
        extrinsic[2 * k] = cap_llr(app0 - l0);
        extrinsic[2 * k + 1] = cap_llr(app1 - l1);
        if k < info_len {
            let l = best[2][0] - best[2][1];
            info_llr[k] = l;
            info[k] = u8::from(l < 0.0);
        }
        let top = prev_beta.iter().cloned().fold(ninf, f64::max);
        for v in prev_beta.iter_mut() {
            *v -= top;
        }
        std::mem::swap(&mut beta, &mut prev_beta);
    }
    Ok(DecoderOutput {
        extrinsic,
        info,
        info_llr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trellis() -> (ConvEncoder, Trellis) {
        let enc = ConvEncoder::new([0b11101, 0b10011], 4);
        (enc, Trellis::new(&enc))
    }

    #[test]
    fn trellis_shape() {
        let (_, t) = trellis();
        assert_eq!(t.states(), 16);
        for s in 0..16 {
            assert_eq!(t.edges().iter().filter(|e| e.from == s).count(), 2);
            assert_eq!(t.incoming(s).count(), 2);
        }
        // zero state is reachable from everywhere in `memory` zero inputs
        for s in 0..16 {
            let mut st = s;
            for _ in 0..4 {
                st = t.edges()[st * 2].to;
            }
            assert_eq!(st, 0);
        }
    }

    #[test]
    fn clean_codeword_is_recovered() {
        let (enc, t) = trellis();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let info: Vec<u8> = (0..100).map(|_| rng.random_range(0..2)).collect();
        let code = enc.encode(&info);
        let llrs: Vec<f64> = code.iter().map(|&b| if b == 0 { 20.0 } else { -20.0 }).collect();
        let out = maxlog_decode(&t, &llrs).unwrap();
        assert_eq!(out.info, info);
        for (e, &b) in out.extrinsic.iter().zip(&code) {
            assert_eq!(*e > 0.0, b == 0, "extrinsic sign disagrees with codeword");
        }
    }

    #[test]
    fn zero_input_gives_zero_extrinsic() {
        let (_, t) = trellis();
        let out = maxlog_decode(&t, &vec![0.0; 200]).unwrap();
        assert!(out.extrinsic.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn bad_length_is_rejected() {
        let (_, t) = trellis();
        assert!(matches!(maxlog_decode(&t, &[0.0; 7]), Err(Error::BadLength { .. })));
        assert!(matches!(maxlog_decode(&t, &[0.0; 8]), Err(Error::BadLength { .. })));
    }

    #[test]
    fn decoding_beats_raw_hard_decisions() {
        let (enc, t) = trellis();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Eb/N0 = 4 dB at rate 1/2: Es/N0 = 1 dB
        let es_n0 = 10f64.powf(0.1);
        let sigma2 = 1.0 / (2.0 * es_n0);
        let (mut raw, mut dec, mut n_raw, mut n_dec) = (0usize, 0usize, 0usize, 0usize);
        for _ in 0..100 {
            let info: Vec<u8> = (0..508).map(|_| rng.random_range(0..2)).collect();
            let code = enc.encode(&info);
            let llrs: Vec<f64> = code
                .iter()
                .map(|&b| {
                    let x = 1.0 - 2.0 * b as f64;
                    let n: f64 = rng.sample(rand_distr::StandardNormal);
                    2.0 * (x + n * sigma2.sqrt()) / sigma2
                })
                .collect();
            raw += llrs.iter().zip(&code).filter(|(l, &b)| (**l < 0.0) != (b == 1)).count();
            n_raw += code.len();
            let out = maxlog_decode(&t, &llrs).unwrap();
            dec += out.info.iter().zip(&info).filter(|(a, b)| a != b).count();
            n_dec += info.len();
        }
        let (ber_raw, ber_dec) = (raw as f64 / n_raw as f64, dec as f64 / n_dec as f64);
        assert!(ber_dec <= ber_raw, "decoded {ber_dec} vs raw {ber_raw}");
    }

    #[test]
    fn caps_are_applied() {
        let f = LlrFrame::from_values(vec![1e9, -1e9, f64::NAN, 3.0], LlrKind::Extrinsic);
        assert_eq!(f.values, vec![LLR_CAP, -LLR_CAP, 0.0, 3.0]);
    }
}
