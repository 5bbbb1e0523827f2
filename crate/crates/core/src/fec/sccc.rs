//! Rate-1/2 serially concatenated code: memory-1 outer code, bit
//! interleaver, doped accumulator.

use crate::error::{Error, Result};
use crate::fec::interleaver::Interleaver;
use crate::fec::trellis::{bcjr, doped_accumulator, feedforward_memory1, hard_decision, Trellis};

/// Immutable codec description shared by every encoder and decoder call.
#[derive(Clone, Debug)]
pub struct CodecConfig {
    info_bits: usize,
    generators: [u32; 2],
    doping_rate: usize,
    n_iterations: usize,
    interleaver: Interleaver,
    outer: Trellis,
    inner: Trellis,
}

impl CodecConfig {
    pub const DEFAULT_GENERATORS: [u32; 2] = [0o3, 0o2];
    pub const DEFAULT_DOPING_RATE: usize = 2;
    pub const DEFAULT_ITERATIONS: usize = 8;

    pub fn new(
        info_bits: usize,
        generators: [u32; 2],
        doping_rate: usize,
        n_iterations: usize,
        interleaver: Interleaver,
    ) -> Result<Self> {
        if info_bits == 0 {
            return Err(Error::InvalidParameter("info_bits must be positive".into()));
        }
        if doping_rate == 0 {
            return Err(Error::InvalidParameter("doping_rate must be at least 1".into()));
        }
        if generators.iter().any(|&g| g > 3) {
            return Err(Error::InvalidParameter(
                "outer generators must describe a memory-1 code".into(),
            ));
        }
        if interleaver.len() != 2 * info_bits {
            return Err(Error::LengthMismatch {
                expected: 2 * info_bits,
                actual: interleaver.len(),
            });
        }
        Ok(CodecConfig {
            info_bits,
            generators,
            doping_rate,
            n_iterations,
            interleaver,
            outer: feedforward_memory1(generators),
            inner: doped_accumulator(doping_rate),
        })
    }

    /// Default code with a pseudo-random interleaver drawn from `seed`.
    pub fn with_seed(info_bits: usize, seed: u64) -> Result<Self> {
        Self::new(
            info_bits,
            Self::DEFAULT_GENERATORS,
            Self::DEFAULT_DOPING_RATE,
            Self::DEFAULT_ITERATIONS,
            Interleaver::random(2 * info_bits, seed),
        )
    }

    pub fn info_bits(&self) -> usize {
        self.info_bits
    }

    pub fn coded_bits(&self) -> usize {
        2 * self.info_bits
    }

    pub fn generators(&self) -> [u32; 2] {
        self.generators
    }

    pub fn doping_rate(&self) -> usize {
        self.doping_rate
    }

    pub fn n_iterations(&self) -> usize {
        self.n_iterations
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    pub fn outer_trellis(&self) -> &Trellis {
        &self.outer
    }

    pub fn inner_trellis(&self) -> &Trellis {
        &self.inner
    }
}

pub(crate) fn check_bits(bits: &[u8], expected: usize) -> Result<()> {
    if bits.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: bits.len(),
        });
    }
    if let Some((position, &value)) = bits.iter().enumerate().find(|(_, &b)| b > 1) {
        return Err(Error::NonBinary { position, value });
    }
    Ok(())
}

pub fn sccc_encode(info: &[u8], cfg: &CodecConfig) -> Result<Vec<u8>> {
    check_bits(info, cfg.info_bits)?;
    let outer = cfg.outer.encode(info);
    let mixed = cfg.interleaver.interleave(&outer);
    Ok(cfg.inner.encode(&mixed))
}

/// Iterative decoding. Returns hard information decisions and the final
/// a-posteriori LLRs of the transmitted code bits.
pub fn sccc_decode(chan_llr: &[f64], cfg: &CodecConfig) -> Result<(Vec<u8>, Vec<f64>)> {
    let n = cfg.coded_bits();
    if chan_llr.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: chan_llr.len(),
        });
    }
    let zeros_info = vec![0.0; cfg.info_bits];
    let mut outer_feedback = vec![0.0; n];
    let mut info_post = zeros_info.clone();
    let mut coded_post = vec![0.0; n];
    for _ in 0..cfg.n_iterations.max(1) {
        let inner = bcjr(&cfg.inner, &cfg.interleaver.interleave(&outer_feedback), chan_llr);
        coded_post = inner.output_posterior;
        let outer_prior = cfg.interleaver.deinterleave(&inner.input_extrinsic);
        let outer = bcjr(&cfg.outer, &zeros_info, &outer_prior);
        info_post = outer.input_posterior;
        outer_feedback = outer.output_extrinsic;
    }
    Ok((info_post.iter().map(|&l| hard_decision(l)).collect(), coded_post))
}
