//! Full-duplex relay: decode, rebuild the transmitted symbols, MMSE-detect,
//! and forward only the symbols whose square deviation stays within the
//! selection threshold.

use crate::channel::{effective_noise_variance, NoiseModel};
use crate::error::{Error, Result};
use crate::fec::{sccc_decode, sccc_encode, CodecConfig};
use crate::modem::{modulate, soft_demodulate, ConstellationSpec};
use crate::signalcore::{complex_to_real_matrix, complex_to_real_pair, ComplexSample, RealMatrix2, RealPair};

/// Linear MMSE detection matrix for `y = sqrt(P_S) h_SR x + interference + n`
/// in real-equivalent form. Pass `sigma_rr_sq = 0` for symbols without
/// self-interference.
pub fn mmse_matrix(
    h_sr: ComplexSample,
    p_s: f64,
    p_r: f64,
    sigma_rr_sq: f64,
    sigma0_sq: f64,
    sigma_x_sq: f64,
) -> RealMatrix2 {
    let h = complex_to_real_matrix(h_sr, p_s.sqrt());
    let ht = h.transpose();
    let half_x = sigma_x_sq / 2.0;
    let load = RealMatrix2::scaled_identity(p_r * sigma_x_sq * sigma_rr_sq / 2.0 + sigma0_sq / 2.0);
    let cov = (h * ht).scale(half_x) + load;
    let inv = cov.inverse().expect("covariance is positive definite for sigma0^2 > 0");
    ht.scale(half_x) * inv
}

/// `||W y - x_hat||^2`.
pub fn square_deviation(w: &RealMatrix2, y: RealPair, x_hat: RealPair) -> f64 {
    (w.apply(y) - x_hat).norm_sq()
}

/// Selection rule; the boundary is inclusive.
pub fn select_symbol(delta: f64, epsilon: f64) -> bool {
    delta <= epsilon
}

/// Everything the relay knows about the links and the transmission format.
#[derive(Clone, Debug)]
pub struct RelayConfig {
    pub codec: CodecConfig,
    pub constellation: ConstellationSpec,
    pub noise: NoiseModel,
    pub p_s: f64,
    pub p_r: f64,
    pub epsilon: f64,
    pub sigma_x_sq: f64,
}

impl RelayConfig {
    pub fn symbols_per_frame(&self) -> usize {
        self.codec.coded_bits() / self.constellation.bits_per_symbol()
    }
}

/// What the relay transmitted in the previous slot.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaySlotState {
    pub prev_frame: Vec<ComplexSample>,
    pub prev_mask: Vec<bool>,
}

impl RelaySlotState {
    /// State before the first slot: the relay has been silent.
    pub fn silent(symbols: usize) -> Self {
        RelaySlotState {
            prev_frame: vec![ComplexSample::new(0.0, 0.0); symbols],
            prev_mask: vec![false; symbols],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelaySlotOutput {
    pub x_next: Vec<ComplexSample>,
    pub mask: Vec<bool>,
    pub info_hat: Vec<u8>,
    pub x_hat: Vec<ComplexSample>,
    pub deltas: Vec<f64>,
}

impl RelaySlotOutput {
    /// State for the following slot.
    pub fn next_state(&self) -> RelaySlotState {
        RelaySlotState {
            prev_frame: self.x_next.clone(),
            prev_mask: self.mask.clone(),
        }
    }
}

/// Square deviation of every symbol, with the self-interference term active
/// where `si_active` is set.
pub fn frame_deviations(
    y: &[ComplexSample],
    h_sr: ComplexSample,
    x_hat: &[ComplexSample],
    si_active: &[bool],
    cfg: &RelayConfig,
) -> Vec<f64> {
    let w_on = mmse_matrix(h_sr, cfg.p_s, cfg.p_r, cfg.noise.sigma_rr_sq, cfg.noise.sigma0_sq, cfg.sigma_x_sq);
    let w_off = mmse_matrix(h_sr, cfg.p_s, cfg.p_r, 0.0, cfg.noise.sigma0_sq, cfg.sigma_x_sq);
    y.iter()
        .zip(x_hat)
        .zip(si_active)
        .map(|((&y, &x), &si)| {
            let w = if si { &w_on } else { &w_off };
            square_deviation(w, complex_to_real_pair(y), complex_to_real_pair(x))
        })
        .collect()
}

/// Demaps with the per-symbol interference level implied by `si_active`,
/// decodes, and rebuilds the transmitted symbols from the decision.
pub fn decode_frame(
    y: &[ComplexSample],
    h_sr: ComplexSample,
    si_active: &[bool],
    cfg: &RelayConfig,
) -> Result<(Vec<u8>, Vec<ComplexSample>)> {
    let gain = cfg.p_s.sqrt();
    let llr: Vec<f64> = y
        .iter()
        .zip(si_active)
        .flat_map(|(&ym, &si)| {
            let var = effective_noise_variance(&cfg.noise, cfg.p_r, si, cfg.sigma_x_sq);
            soft_demodulate(ym, h_sr, gain, var, &cfg.constellation)
        })
        .collect();
    let (info_hat, _) = sccc_decode(&llr, &cfg.codec)?;
    let x_hat = modulate(&sccc_encode(&info_hat, &cfg.codec)?, &cfg.constellation)?;
    Ok((info_hat, x_hat))
}

/// One reception slot at the relay.
pub fn relay_slot(
    y: &[ComplexSample],
    h_sr: ComplexSample,
    state: &RelaySlotState,
    cfg: &RelayConfig,
) -> Result<RelaySlotOutput> {
    let m = cfg.symbols_per_frame();
    if y.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            actual: y.len(),
        });
    }
    if state.prev_mask.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            actual: state.prev_mask.len(),
        });
    }
    let (info_hat, x_hat) = decode_frame(y, h_sr, &state.prev_mask, cfg)?;
    let deltas = frame_deviations(y, h_sr, &x_hat, &state.prev_mask, cfg);
    let mask: Vec<bool> = deltas.iter().map(|&d| select_symbol(d, cfg.epsilon)).collect();
    let x_next = x_hat
        .iter()
        .zip(&mask)
        .map(|(&x, &keep)| if keep { x } else { ComplexSample::new(0.0, 0.0) })
        .collect();
    Ok(RelaySlotOutput {
        x_next,
        mask,
        info_hat,
        x_hat,
        deltas,
    })
}
