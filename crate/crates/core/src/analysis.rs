//! Closed-form selection probabilities, the forwarding Markov chain, and
//! full-duplex / half-duplex outage including the frame-level baselines.
//!
//! Rates are in nats: the outage thresholds are `e^R - 1` (full duplex) and
//! `e^{2R} - 1` (half duplex).

use serde::{Deserialize, Serialize};

use crate::channel::{Link, LinkGeometry, NoiseModel};
use crate::error::{Error, Result};
use crate::signalcore::RandomStream;

/// Per-dimension variance of the MMSE estimation error at the relay.
pub fn sigma_ce_sq(
    p_s: f64,
    gain_sr_sq: f64,
    p_r: f64,
    sigma_rr_sq: f64,
    sigma0_sq: f64,
    sigma_x_sq: f64,
    si_active: bool,
) -> f64 {
    let si = if si_active { 2.0 * p_r * sigma_x_sq * sigma_rr_sq } else { 0.0 };
    let n = si + 2.0 * sigma0_sq;
    if p_s == 0.0 || gain_sr_sq == 0.0 || sigma_x_sq == 0.0 {
        return sigma_x_sq / 2.0;
    }
    let signal = 2.0 * p_s * sigma_x_sq * gain_sr_sq;
    if signal == 0.0 {
        return sigma_x_sq / 2.0;
    }
    if signal.is_infinite() {
        return 0.0;
    }
    // equals sigma_x^2/2 - P_S sigma_x^4 g / (signal + n) without cancellation
    sigma_x_sq / 2.0 * n / (signal + n)
}

/// Probability that the square deviation stays within `epsilon`.
pub fn p_select(epsilon: f64, sigma_ce_sq: f64) -> f64 {
    if epsilon <= 0.0 {
        return 0.0;
    }
    if sigma_ce_sq <= 0.0 {
        return 1.0;
    }
    -(-epsilon / (2.0 * sigma_ce_sq)).exp_m1()
}

/// Two-parameter selection process: `p1` after a forwarded symbol
/// (self-interference present), `p0` after a discarded one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkovSelectModel {
    pub p1: f64,
    pub p0: f64,
    pub frames: usize,
}

impl MarkovSelectModel {
    pub fn new(p1: f64, p0: f64, frames: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p0) {
            return Err(Error::InvalidParameter(format!("probabilities ({p1}, {p0}) outside [0, 1]")));
        }
        if frames == 0 {
            return Err(Error::InvalidParameter("frame count must be >= 1".into()));
        }
        Ok(MarkovSelectModel { p1, p0, frames })
    }
}

pub type Matrix4 = [[f64; 4]; 4];

/// States: A (selected, SI present), B (selected, no SI),
/// C (discarded, SI present), D (discarded, no SI).
pub fn transition_matrix(m: &MarkovSelectModel) -> Matrix4 {
    let (p1, p0) = (m.p1, m.p0);
    [
        [p1, 0.0, 1.0 - p1, 0.0],
        [p1, 0.0, 1.0 - p1, 0.0],
        [0.0, p0, 0.0, 1.0 - p0],
        [0.0, p0, 0.0, 1.0 - p0],
    ]
}

/// Average forwarding probability over the `frames` relay slots.
pub fn p_forward_avg(m: &MarkovSelectModel) -> f64 {
    let t = transition_matrix(m);
    let mut u = [0.0, m.p0, 0.0, 1.0 - m.p0];
    let mut acc = 0.0;
    for _ in 0..m.frames {
        acc += u[0] + u[1];
        let mut next = [0.0; 4];
        for (i, ui) in u.iter().enumerate() {
            for (j, n) in next.iter_mut().enumerate() {
                *n += ui * t[i][j];
            }
        }
        u = next;
    }
    acc / m.frames as f64
}

/// Mean-SNR parameters of the outage expressions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutageParams {
    pub x: f64,
    pub y: f64,
    pub rate: f64,
    pub p_c: f64,
}

const BRANCH_TOL: f64 = 1e-9;

/// `Pr[X g1 + Y g2 < t]` for independent unit-mean exponentials.
pub fn sum_exp_cdf(t: f64, x: f64, y: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if x <= 0.0 && y <= 0.0 {
        return 1.0;
    }
    if y.is_infinite() || x.is_infinite() {
        return 0.0;
    }
    if x <= 0.0 {
        return -(-t / y).exp_m1();
    }
    if y <= 0.0 {
        return -(-t / x).exp_m1();
    }
    let p = if (x - y).abs() < BRANCH_TOL * x.max(y) {
        1.0 - (t + x) / x * (-t / x).exp()
    } else {
        1.0 - (y * (-t / y).exp() - x * (-t / x).exp()) / (y - x)
    };
    p.clamp(0.0, 1.0)
}

/// Density of `X g1 + Y g2` at `z`.
pub fn sum_exp_pdf(z: f64, x: f64, y: f64) -> f64 {
    if z < 0.0 {
        return 0.0;
    }
    if (x - y).abs() < BRANCH_TOL * x.max(y) {
        z / (x * x) * (-z / x).exp()
    } else {
        ((-z / y).exp() - (-z / x).exp()) / (y - x)
    }
}

fn outage_with_threshold(p: &OutageParams, t: f64) -> f64 {
    if p.x <= 0.0 {
        return 1.0;
    }
    let direct = -(-t / p.x).exp_m1();
    let forwarded = sum_exp_cdf(t, p.x, p.y);
    (p.p_c * forwarded + (1.0 - p.p_c) * direct).clamp(0.0, 1.0)
}

/// Full-duplex outage probability.
pub fn outage_fd(p: &OutageParams) -> f64 {
    outage_with_threshold(p, p.rate.exp_m1())
}

/// Half-duplex outage probability; `p.p_c` should carry the no-interference
/// selection probability.
pub fn outage_hd(p: &OutageParams) -> f64 {
    outage_with_threshold(p, (2.0 * p.rate).exp_m1())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Proposed,
    CrcSdf,
    ThresholdSdf,
    PerfectRelay,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::Proposed,
        Protocol::CrcSdf,
        Protocol::ThresholdSdf,
        Protocol::PerfectRelay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Proposed => "proposed",
            Protocol::CrcSdf => "crc_sdf",
            Protocol::ThresholdSdf => "threshold_sdf",
            Protocol::PerfectRelay => "perfect_relay",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineConfig {
    pub protocol: Protocol,
    pub gamma_t: f64,
}

/// Frame forwarding probability of the frame-level baselines: the
/// probability that the instantaneous S-R SINR clears the threshold
/// (`e^R - 1` for CRC, `Gamma_T` for the SINR rule).
pub fn p_select_baseline(
    cfg: &BaselineConfig,
    p_s: f64,
    sigma_sr_sq: f64,
    p_r: f64,
    sigma_rr_sq: f64,
    rate: f64,
) -> f64 {
    let thr = match cfg.protocol {
        Protocol::PerfectRelay => return 1.0,
        Protocol::Proposed => {
            panic!("the proposed protocol selects per symbol; use p_select")
        }
        Protocol::CrcSdf => rate.exp_m1(),
        Protocol::ThresholdSdf => cfg.gamma_t,
    };
    let mean = p_s * sigma_sr_sq;
    if mean <= 0.0 {
        return if thr <= 0.0 { 1.0 } else { 0.0 };
    }
    let ratio = thr / mean;
    (-ratio).exp() / (1.0 + p_r * sigma_rr_sq * ratio)
}

/// How the S-R gain enters the selection probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    /// Instantaneous gain replaced by its mean.
    #[default]
    Expected,
    /// Forwarding probability averaged over drawn gains.
    PerRealization,
}

/// Everything the closed-form curves depend on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemModel {
    pub geometry: LinkGeometry,
    pub p_s: f64,
    pub p_r: f64,
    pub noise: NoiseModel,
    pub sigma_x_sq: f64,
    pub epsilon: f64,
    pub rate: f64,
    pub frames: usize,
    pub gamma_t: f64,
}

/// Analytic outcome at one operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutageReport {
    pub p1: f64,
    pub p0: f64,
    pub p_c: f64,
    pub outage: f64,
}

impl SystemModel {
    fn snr_scale(&self) -> f64 {
        self.sigma_x_sq / self.noise.sigma0_sq
    }

    pub fn x(&self) -> Result<f64> {
        Ok(self.p_s * self.snr_scale() * self.geometry.link_variance(Link::SourceDestination)?)
    }

    pub fn y(&self) -> Result<f64> {
        if self.p_r == 0.0 {
            return Ok(0.0);
        }
        if self.geometry.d_rd == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(self.p_r * self.snr_scale() * self.geometry.link_variance(Link::RelayDestination)?)
    }

    fn sr_variance(&self) -> Result<f64> {
        if self.geometry.d_sr == 0.0 {
            return Ok(f64::INFINITY);
        }
        self.geometry.link_variance(Link::SourceRelay)
    }

    /// `(P_1, P_0)` for the protocol at S-R gain `g`.
    pub fn selection_pair(&self, protocol: Protocol, g: f64) -> (f64, f64) {
        let n = &self.noise;
        match protocol {
            Protocol::Proposed => {
                let p1 = p_select(
                    self.epsilon,
                    sigma_ce_sq(self.p_s, g, self.p_r, n.sigma_rr_sq, n.sigma0_sq, self.sigma_x_sq, true),
                );
                let p0 = p_select(
                    self.epsilon,
                    sigma_ce_sq(self.p_s, g, self.p_r, n.sigma_rr_sq, n.sigma0_sq, self.sigma_x_sq, false),
                );
                (p1, p0)
            }
            _ => {
                let cfg = BaselineConfig { protocol, gamma_t: self.gamma_t };
                let scale = self.snr_scale();
                let p1 = p_select_baseline(&cfg, self.p_s * scale, g, self.p_r * scale, n.sigma_rr_sq, self.rate);
                let p0 = p_select_baseline(&cfg, self.p_s * scale, g, self.p_r * scale, 0.0, self.rate);
                (p1, p0)
            }
        }
    }

    pub fn selection_model(&self, protocol: Protocol) -> Result<MarkovSelectModel> {
        let (p1, p0) = self.selection_pair(protocol, self.sr_variance()?);
        MarkovSelectModel::new(p1, p0, self.frames)
    }

    /// Forwarding probability averaged over `draws` exponential S-R gains.
    pub fn p_forward_per_realization(&self, protocol: Protocol, draws: usize, rng: &mut RandomStream) -> Result<f64> {
        let mean = self.sr_variance()?;
        let mut acc = 0.0;
        for _ in 0..draws {
            let g = if mean.is_infinite() { mean } else { rng.exponential(mean) };
            let (p1, p0) = self.selection_pair(protocol, g);
            acc += p_forward_avg(&MarkovSelectModel::new(p1, p0, self.frames)?);
        }
        Ok(acc / draws as f64)
    }

    pub fn outage_fd(&self, protocol: Protocol) -> Result<OutageReport> {
        let m = self.selection_model(protocol)?;
        let p_c = p_forward_avg(&m);
        let outage = outage_fd(&OutageParams { x: self.x()?, y: self.y()?, rate: self.rate, p_c });
        Ok(OutageReport { p1: m.p1, p0: m.p0, p_c, outage })
    }

    /// Half-duplex counterpart: no self-interference, so every symbol is
    /// forwarded with probability `P_0`.
    pub fn outage_hd(&self, protocol: Protocol) -> Result<OutageReport> {
        let m = self.selection_model(protocol)?;
        let outage = outage_hd(&OutageParams { x: self.x()?, y: self.y()?, rate: self.rate, p_c: m.p0 });
        Ok(OutageReport { p1: m.p0, p0: m.p0, p_c: m.p0, outage })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigma_ce_examples() {
        assert_eq!(sigma_ce_sq(1.0, 0.0, 1.0, 1.0, 0.1, 1.0, true), 0.5);
        assert!(sigma_ce_sq(1.0, 1.0, 1.0, 1.0, 1e-15, 1.0, false) < 1e-14);
        let s = sigma_ce_sq(1.0, 1.0, 0.0, 0.0, 0.1, 1.0, false);
        assert!((s - (0.5 - 1.0 / 2.2)).abs() < 1e-15);
        assert!((s - 0.045454545).abs() < 1e-8);
    }

    #[test]
    fn sigma_ce_matches_deviation_covariance() {
        // per-dimension error variance of the scalar MMSE estimate, by Monte Carlo
        let mut rs = RandomStream::new(4, 0);
        let (a, noise) = (1.0f64, 0.1f64);
        let w = a * 0.5 / (a * a * 0.5 + noise / 2.0);
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let x = rs.normal() * 0.5f64.sqrt();
            let y = a * x + rs.normal() * (noise / 2.0).sqrt();
            acc += (w * y - x).powi(2);
        }
        let s = sigma_ce_sq(1.0, 1.0, 0.0, 0.0, noise, 1.0, false);
        assert!((acc / n as f64 - s).abs() < 0.01 * s);
    }

    #[test]
    fn p_select_examples() {
        assert!((p_select(1e300, 0.3) - 1.0).abs() < 1e-15);
        assert!((p_select(0.5, 0.5 / (2.0 * 2f64.ln())) - 0.5).abs() < 1e-15);
        assert!((p_select(0.5, 0.04545) - 0.99591).abs() < 1e-5);
        assert_eq!(p_select(0.0, 0.1), 0.0);
        assert_eq!(p_select(0.1, 0.0), 1.0);
    }

    #[test]
    fn transition_matrix_rows() {
        let m = MarkovSelectModel::new(0.9, 0.95, 20).unwrap();
        let t = transition_matrix(&m);
        assert_eq!(t[0], [0.9, 0.0, 1.0 - 0.9, 0.0]);
        assert_eq!(t[2], [0.0, 0.95, 0.0, 1.0 - 0.95]);
        for row in t {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert!(MarkovSelectModel::new(1.1, 0.5, 3).is_err());
        assert!(MarkovSelectModel::new(0.1, 0.5, 0).is_err());
    }

    #[test]
    fn forward_avg_cases() {
        assert_eq!(p_forward_avg(&MarkovSelectModel::new(0.2, 0.7, 1).unwrap()), 0.7);
        for l in [1, 2, 7, 20] {
            let p = p_forward_avg(&MarkovSelectModel::new(0.37, 0.37, l).unwrap());
            assert!((p - 0.37).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_avg_matches_chain_simulation() {
        let m = MarkovSelectModel::new(0.8, 0.95, 20).unwrap();
        let mut rs = RandomStream::new(5, 0);
        let runs = 1_000_000 / 20;
        let mut hits = 0u64;
        for _ in 0..runs {
            let mut selected = false;
            for _ in 0..20 {
                let p = if selected { m.p1 } else { m.p0 };
                selected = rs.uniform() < p;
                hits += u64::from(selected);
            }
        }
        let est = hits as f64 / (runs * 20) as f64;
        let p = p_forward_avg(&m);
        // slots are positively correlated; a generous 5 sigma
        let se = (p * (1.0 - p) / (runs * 20) as f64).sqrt() * 3.0;
        assert!((est - p).abs() < 5.0 * se, "{est} vs {p}");
    }

    #[test]
    fn outage_examples() {
        let p = OutageParams { x: 2.0, y: 1.0, rate: 1.0, p_c: 1.0 };
        assert!((outage_fd(&p) - 0.3324).abs() < 1e-4);
        let p0 = OutageParams { p_c: 0.0, ..p };
        assert!((outage_fd(&p0) - (1.0 - (-(1f64.exp() - 1.0) / 2.0).exp())).abs() < 1e-15);
        let tiny = OutageParams { rate: 1e-12, ..p };
        assert!(outage_fd(&tiny) < 1e-11);
        assert!(outage_hd(&tiny) < 1e-11);
        let hd = OutageParams { x: 5.0, y: 5.0, rate: 1.0, p_c: 0.99 };
        let fd2 = OutageParams { rate: 2.0, ..hd };
        assert_eq!(outage_hd(&hd), outage_fd(&fd2));
        assert_eq!(outage_fd(&OutageParams { x: 0.0, ..p }), 1.0);
        let silent = OutageParams { y: 0.0, ..p };
        assert!((outage_fd(&silent) - outage_fd(&p0)).abs() < 1e-15);
    }

    #[test]
    fn outage_matches_quadrature_of_density() {
        for (x, y) in [(2.0, 1.0), (3.0, 3.0), (0.5, 7.0)] {
            let t = 1f64.exp() - 1.0;
            let n = 20_000;
            let h = t / n as f64;
            // composite Simpson
            let mut s = sum_exp_pdf(0.0, x, y) + sum_exp_pdf(t, x, y);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * sum_exp_pdf(i as f64 * h, x, y);
            }
            let integral = s * h / 3.0;
            assert!((integral - sum_exp_cdf(t, x, y)).abs() < 1e-10);
        }
    }

    #[test]
    fn density_normalizes_and_branches_agree() {
        for (x, y) in [(1.0, 1.0), (2.0, 0.5)] {
            let upper = 60.0 * f64::max(x, y);
            let n = 200_000;
            let h = upper / n as f64;
            let mut s = sum_exp_pdf(0.0, x, y) + sum_exp_pdf(upper, x, y);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * sum_exp_pdf(i as f64 * h, x, y);
            }
            assert!((s * h / 3.0 - 1.0).abs() < 1e-8);
        }
        let x: f64 = 1.7;
        for z in [0.1f64, 1.0, 3.0, 10.0] {
            let near = ((-z / (x + 1e-8 * x)).exp() - (-z / x).exp()) / (1e-8 * x);
            assert!((near - sum_exp_pdf(z, x, x)).abs() < 1e-6);
        }
    }

    #[test]
    fn outage_continuous_across_branch() {
        let x = 3.0;
        let base = outage_fd(&OutageParams { x, y: x, rate: 1.0, p_c: 0.7 });
        for k in -14..=-7 {
            for sign in [-1.0, 1.0] {
                let y = x * (1.0 + sign * 10f64.powi(k));
                let v = outage_fd(&OutageParams { x, y, rate: 1.0, p_c: 0.7 });
                assert!((v - base).abs() < 1e-6, "k={k}");
            }
        }
        for f in [0.9e-9, 1.1e-9] {
            let a = outage_fd(&OutageParams { x, y: x * (1.0 + f), rate: 1.0, p_c: 0.7 });
            assert!((a - base).abs() < 1e-6);
        }
    }

    #[test]
    fn baseline_examples() {
        let crc = BaselineConfig { protocol: Protocol::CrcSdf, gamma_t: 3.0 };
        assert!((p_select_baseline(&crc, 5.0, 1.0, 5.0, 0.0, 1e-12) - 1.0).abs() < 1e-10);
        let thr = BaselineConfig { protocol: Protocol::ThresholdSdf, gamma_t: 1e-12 };
        assert!((p_select_baseline(&thr, 5.0, 1.0, 5.0, 0.0, 2.0) - 1.0).abs() < 1e-10);
        let genie = BaselineConfig { protocol: Protocol::PerfectRelay, gamma_t: 3.0 };
        assert_eq!(p_select_baseline(&genie, 0.0, 1.0, 5.0, 1.0, 2.0), 1.0);
    }

    #[test]
    fn baseline_matches_sinr_simulation() {
        let crc = BaselineConfig { protocol: Protocol::CrcSdf, gamma_t: 3.0 };
        let (p_s, p_r, var_sr, var_rr, rate) = (5.0, 5.0, 6.25, 1.0, 2.0);
        let p = p_select_baseline(&crc, p_s, var_sr, p_r, var_rr, rate);
        let mut rs = RandomStream::new(6, 0);
        let n = 1_000_000;
        let mut hits = 0;
        for _ in 0..n {
            let sinr = p_s * rs.exponential(var_sr) / (p_r * rs.exponential(var_rr) + 1.0);
            hits += usize::from(sinr.ln_1p() >= rate);
        }
        assert!((hits as f64 / n as f64 - p).abs() < 0.01 * p);
    }

    #[test]
    fn equal_probabilities_when_no_interference() {
        let model = SystemModel {
            geometry: LinkGeometry::collinear(1.0, 0.4, 2.0).unwrap(),
            p_s: 10.0,
            p_r: 10.0,
            noise: NoiseModel::new(1.0, 0.0).unwrap(),
            sigma_x_sq: 1.0,
            epsilon: 0.5,
            rate: 1.0,
            frames: 20,
            gamma_t: 3.0,
        };
        let m = model.selection_model(Protocol::Proposed).unwrap();
        assert_eq!(m.p1, m.p0);
        let mut rs = RandomStream::new(1, 0);
        let pr = model.p_forward_per_realization(Protocol::Proposed, 2000, &mut rs).unwrap();
        assert!(pr > 0.0 && pr <= 1.0);
    }

    proptest! {
        #[test]
        fn probabilities_in_unit_interval(x in 1e-3f64..1e3, y in 0.0f64..1e3, r in 1e-3f64..4.0, pc in 0.0f64..1.0) {
            let p = OutageParams { x, y, rate: r, p_c: pc };
            let fd = outage_fd(&p);
            let hd = outage_hd(&p);
            prop_assert!((0.0..=1.0).contains(&fd));
            prop_assert!((0.0..=1.0).contains(&hd));
        }

        #[test]
        fn select_in_unit_interval(eps in 0.0f64..10.0, s in 1e-9f64..10.0) {
            let p = p_select(eps, s);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn forward_avg_between_p0_and_stationary(p1 in 0.0f64..1.0, p0 in 0.0f64..1.0, l in 1usize..40) {
            let p = p_forward_avg(&MarkovSelectModel::new(p1, p0, l).unwrap());
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
            let lo = p1.min(p0) - 1e-12;
            let hi = p1.max(p0) + 1e-12;
            prop_assert!(p >= lo.min(p0) && p <= hi.max(p0));
        }
    }

    #[test]
    fn outage_monotone_on_grid() {
        let grid: Vec<f64> = (0..50).map(|i| 10f64.powf(-1.0 + 4.0 * i as f64 / 49.0)).collect();
        for &pc in &[0.3, 0.9] {
            for (i, &x) in grid.iter().enumerate() {
                for (j, &y) in grid.iter().enumerate() {
                    let v = outage_fd(&OutageParams { x, y, rate: 1.0, p_c: pc });
                    if i + 1 < grid.len() {
                        let vx = outage_fd(&OutageParams { x: grid[i + 1], y, rate: 1.0, p_c: pc });
                        assert!(vx <= v + 1e-12);
                    }
                    if j + 1 < grid.len() {
                        let vy = outage_fd(&OutageParams { x, y: grid[j + 1], rate: 1.0, p_c: pc });
                        assert!(vy <= v + 1e-12);
                    }
                }
            }
        }
    }
}
