//! Simulation configuration, loaded from JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{GainMode, Protocol};
use crate::channel::LinkGeometry;
use crate::error::{Error, Result};
use crate::modem::ConstellationSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryPreset {
    /// Relay at 0.4 of the source-destination distance.
    L1,
    /// Relay at 0.8 of the source-destination distance.
    L2,
}

impl GeometryPreset {
    pub fn relay_fraction(self) -> f64 {
        match self {
            GeometryPreset::L1 => 0.4,
            GeometryPreset::L2 => 0.8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Analytic,
    Mc,
    Both,
}

impl RunMode {
    pub fn analytic(self) -> bool {
        matches!(self, RunMode::Analytic | RunMode::Both)
    }

    pub fn monte_carlo(self) -> bool {
        matches!(self, RunMode::Mc | RunMode::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Frames per transmission (`L`).
    pub frames: usize,
    /// Information bits per frame (`M`).
    pub info_bits: usize,
    /// Constellation order (`Q`).
    pub modulation: usize,
    /// Selection threshold; defaults to the constellation's own.
    pub epsilon: Option<f64>,
    pub geometry: GeometryPreset,
    pub d_sd: f64,
    pub path_loss_exp: f64,
    pub sigma_rr_sq: f64,
    pub sigma0_sq: f64,
    /// Target rate in nats per channel use.
    pub rate: f64,
    /// SINR threshold of the threshold-based baseline (linear).
    pub gamma_t: f64,
    pub protocols: Vec<Protocol>,
    /// Total average SNR points in dB.
    pub snr_db: Vec<f64>,
    pub n_trials: usize,
    pub seed: u64,
    pub gain_mode: GainMode,
    /// Draws for the per-realization gain mode.
    pub realizations: usize,
    pub iterations: usize,
    pub doping_rate: usize,
    /// Fixed total average SNR of the self-interference sweep.
    pub si_snr_db: f64,
    pub si_max: f64,
    pub si_points: usize,
    /// Constellations of the selection-accuracy sweep over `Q`.
    pub accuracy_orders: Vec<usize>,
    /// S-R SNR (dB, QPSK-equivalent) at which the `Q` sweep runs.
    pub accuracy_snr_db: f64,
    /// Fail when Monte Carlo and closed form disagree beyond three sigma.
    pub self_check: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            frames: 20,
            info_bits: 512,
            modulation: 4,
            epsilon: None,
            geometry: GeometryPreset::L1,
            d_sd: 1.0,
            path_loss_exp: 2.0,
            sigma_rr_sq: 1.0,
            sigma0_sq: 1.0,
            rate: 1.0,
            gamma_t: 3.0,
            protocols: Protocol::ALL.to_vec(),
            snr_db: (0..=15).map(|i| 2.0 * i as f64).collect(),
            n_trials: 10_000,
            seed: 1,
            gain_mode: GainMode::Expected,
            realizations: 1000,
            iterations: 8,
            doping_rate: 2,
            si_snr_db: 3.0,
            si_max: 5.0,
            si_points: 21,
            accuracy_orders: vec![2, 4, 16],
            accuracy_snr_db: 10.0,
            self_check: false,
        }
    }
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: SimConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.frames == 0 || !self.frames.is_multiple_of(2) {
            return bad(format!("frames must be positive and even, got {}", self.frames));
        }
        if self.info_bits == 0 || self.n_trials == 0 || self.iterations == 0 || self.doping_rate == 0 {
            return bad("info_bits, n_trials, iterations and doping_rate must be positive".into());
        }
        if !(self.sigma0_sq > 0.0) || self.sigma_rr_sq < 0.0 || !(self.rate > 0.0) {
            return bad("sigma0_sq and rate must be positive, sigma_rr_sq nonnegative".into());
        }
        if !(self.gamma_t > 0.0) {
            return bad("gamma_t must be positive".into());
        }
        if matches!(self.epsilon, Some(e) if e < 0.0) {
            return bad("epsilon must be nonnegative".into());
        }
        if self.si_points < 2 || self.si_max < 0.0 {
            return bad("si_points must be >= 2 and si_max nonnegative".into());
        }
        if self.protocols.is_empty() {
            return bad("at least one protocol is required".into());
        }
        let z = ConstellationSpec::new(self.modulation)?.bits_per_symbol();
        if !(2 * self.info_bits).is_multiple_of(z) {
            return bad("coded frame length is not a whole number of symbols".into());
        }
        for &q in &self.accuracy_orders {
            ConstellationSpec::new(q)?;
        }
        self.geometry_model()?;
        Ok(())
    }

    pub fn geometry_model(&self) -> Result<LinkGeometry> {
        LinkGeometry::collinear(self.d_sd, self.geometry.relay_fraction() * self.d_sd, self.path_loss_exp)
    }

    /// Per-node transmit power for equal power at total average SNR
    /// `snr_db`, i.e. `(P_S + P_R) / (2 sigma0^2)` in linear units.
    pub fn equal_power(&self, snr_db: f64) -> f64 {
        10f64.powf(snr_db / 10.0) * self.sigma0_sq
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_unknown_and_odd_frames() {
        assert!(serde_json::from_str::<SimConfig>(r#"{"frames": 20, "nope": true}"#).is_err());
        let c: SimConfig = serde_json::from_str(r#"{"frames": 3}"#).unwrap();
        assert!(c.validate().is_err());
        let c: SimConfig = serde_json::from_str(r#"{"geometry": "l2", "protocols": ["crc_sdf"]}"#).unwrap();
        assert_eq!(c.geometry, GeometryPreset::L2);
        assert_eq!(c.protocols, vec![Protocol::CrcSdf]);
    }

    #[test]
    fn load_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, "{\"seed\": 9}").unwrap();
        assert_eq!(SimConfig::load(&p).unwrap().seed, 9);
        std::fs::write(&p, "{\"seed\": \"x\"}").unwrap();
        assert!(SimConfig::load(&p).unwrap_err().to_string().contains("c.json"));
    }
}
