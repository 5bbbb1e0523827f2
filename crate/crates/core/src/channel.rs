//! Block-fading channel model: path-loss variances, per-slot Rayleigh gains
//! and the residual self-interference at the full-duplex relay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signalcore::{ComplexSample, RandomStream};

/// Links whose variance follows the path-loss model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    SourceRelay,
    SourceDestination,
    RelayDestination,
}

impl Link {
    pub fn name(self) -> &'static str {
        match self {
            Link::SourceRelay => "S-R",
            Link::SourceDestination => "S-D",
            Link::RelayDestination => "R-D",
        }
    }
}

/// Node distances (normalized units) and path-loss exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub d_sd: f64,
    pub d_sr: f64,
    pub d_rd: f64,
    pub path_loss_exp: f64,
}

impl LinkGeometry {
    pub fn new(d_sd: f64, d_sr: f64, d_rd: f64, path_loss_exp: f64) -> Result<Self> {
        for (name, d) in [("d_sd", d_sd), ("d_sr", d_sr), ("d_rd", d_rd)] {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::InvalidGeometry(format!("{name} = {d}")));
            }
        }
        if !(path_loss_exp.is_finite() && path_loss_exp >= 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "path-loss exponent {path_loss_exp}"
            )));
        }
        Ok(LinkGeometry {
            d_sd,
            d_sr,
            d_rd,
            path_loss_exp,
        })
    }

    /// Relay on the straight line between source and destination.
    pub fn collinear(d_sd: f64, d_sr: f64, path_loss_exp: f64) -> Result<Self> {
        if d_sr > d_sd {
            return Err(Error::InvalidGeometry(format!(
                "relay distance {d_sr} beyond destination distance {d_sd}"
            )));
        }
        LinkGeometry::new(d_sd, d_sr, d_sd - d_sr, path_loss_exp)
    }

    pub fn distance(&self, link: Link) -> f64 {
        match link {
            Link::SourceRelay => self.d_sr,
            Link::SourceDestination => self.d_sd,
            Link::RelayDestination => self.d_rd,
        }
    }

    /// `d^{-v}` for the named link.
    pub fn link_variance(&self, link: Link) -> Result<f64> {
        let d = self.distance(link);
        if d == 0.0 {
            return Err(Error::SingularPathLoss(link.name()));
        }
        Ok(d.powf(-self.path_loss_exp))
    }

    /// Average SNR of `link` relative to the S-D link, in dB.
    pub fn snr_offset_db(&self, link: Link) -> Result<f64> {
        let ratio = self.link_variance(link)? / self.link_variance(Link::SourceDestination)?;
        Ok(10.0 * ratio.log10())
    }
}

/// Transmit powers, with an optional joint cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p_s: f64,
    pub p_r: f64,
    pub p_tot: Option<f64>,
}

impl PowerAllocation {
    pub fn new(p_s: f64, p_r: f64, p_tot: Option<f64>) -> Result<Self> {
        if !(p_s >= 0.0 && p_r >= 0.0 && p_s.is_finite() && p_r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "negative or non-finite power P_S={p_s}, P_R={p_r}"
            )));
        }
        if let Some(cap) = p_tot {
            if p_s + p_r > cap * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "P_S + P_R = {} exceeds P_tot = {cap}",
                    p_s + p_r
                )));
            }
        }
        Ok(PowerAllocation { p_s, p_r, p_tot })
    }

    /// Split `p_tot` with fraction `source_share` going to the source.
    pub fn split(p_tot: f64, source_share: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&source_share) {
            return Err(Error::InvalidParameter(format!(
                "source power share {source_share} outside [0, 1]"
            )));
        }
        PowerAllocation::new(p_tot * source_share, p_tot * (1.0 - source_share), Some(p_tot))
    }
}

/// AWGN power per complex sample and residual self-interference variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma0_sq: f64,
    pub sigma_rr_sq: f64,
}

impl NoiseModel {
    pub fn new(sigma0_sq: f64, sigma_rr_sq: f64) -> Result<Self> {
        if !(sigma0_sq > 0.0 && sigma0_sq.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma0^2 = {sigma0_sq}")));
        }
        if !(sigma_rr_sq >= 0.0 && sigma_rr_sq.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_RR^2 = {sigma_rr_sq}"
            )));
        }
        Ok(NoiseModel {
            sigma0_sq,
            sigma_rr_sq,
        })
    }
}

/// Gains of all four links in one time slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotGains {
    pub h_sr: ComplexSample,
    pub h_sd: ComplexSample,
    pub h_rd: ComplexSample,
    pub h_rr: ComplexSample,
}

/// Channel gains for slots `1..=L+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    slots: Vec<SlotGains>,
}

impl ChannelRealization {
    pub fn from_slots(slots: Vec<SlotGains>) -> Self {
        ChannelRealization { slots }
    }

    /// Number of slots (L + 1).
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Gains of slot `l` (1-based, as in the transmission timeline).
    pub fn slot(&self, l: usize) -> &SlotGains {
        &self.slots[l - 1]
    }

    pub fn slots(&self) -> &[SlotGains] {
        &self.slots
    }
}

/// Draw independent block-fading gains for `frames + 1` slots.
///
/// The self-interference gain is redrawn every slot, like the other links.
pub fn draw_channel(
    geom: &LinkGeometry,
    noise: &NoiseModel,
    frames: usize,
    rng: &mut RandomStream,
) -> Result<ChannelRealization> {
    if frames == 0 {
        return Err(Error::InvalidParameter("slot count must be >= 1".into()));
    }
    let var_sr = geom.link_variance(Link::SourceRelay)?;
    let var_sd = geom.link_variance(Link::SourceDestination)?;
    let var_rd = geom.link_variance(Link::RelayDestination)?;
    let slots = (0..=frames)
        .map(|_| SlotGains {
            h_sr: rng.complex_gaussian(var_sr),
            h_sd: rng.complex_gaussian(var_sd),
            h_rd: rng.complex_gaussian(var_rd),
            h_rr: rng.complex_gaussian(noise.sigma_rr_sq),
        })
        .collect();
    Ok(ChannelRealization { slots })
}

/// Interference-plus-noise variance at the relay for one symbol.
pub fn effective_noise_variance(
    noise: &NoiseModel,
    p_r: f64,
    si_active: bool,
    sigma_x_sq: f64,
) -> f64 {
    if si_active {
        p_r * sigma_x_sq * noise.sigma_rr_sq + noise.sigma0_sq
    } else {
        noise.sigma0_sq
    }
}
