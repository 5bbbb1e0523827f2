//! Experiment drivers: closed-form and Monte Carlo outage sweeps, the
//! link-level BER chain, and selection-accuracy measurements.

use rayon::prelude::*;

use crate::analysis::{p_forward_avg, GainMode, Protocol, SystemModel};
use crate::channel::{draw_channel, ChannelRealization, LinkGeometry, NoiseModel};
use crate::destination::{combine_and_decode, count_bit_errors, detect_slot, DestinationLink, SlotKind};
use crate::error::{Error, Result};
use crate::fec::{crc_attach, crc_check, sccc_encode, CodecConfig, Interleaver, CRC_BITS};
use crate::harness::config::{RunMode, SimConfig};
use crate::harness::output::ResultRow;
use crate::modem::{modulate, selection_threshold, ConstellationSpec};
use crate::relay::{decode_frame, relay_slot, RelayConfig, RelaySlotState};
use crate::signalcore::{ComplexSample, RandomStream};

const ZERO: ComplexSample = ComplexSample::new(0.0, 0.0);

/// Stream ids reserved per trial; independent noise sources get their own.
const STREAMS_PER_TRIAL: u64 = 8;

fn trial_stream(seed: u64, trial: usize, k: u64) -> RandomStream {
    RandomStream::new(seed, trial as u64 * STREAMS_PER_TRIAL + k)
}

fn epsilon_for(cfg: &SimConfig, spec: &ConstellationSpec) -> f64 {
    cfg.epsilon.unwrap_or_else(|| selection_threshold(spec))
}

/// Closed-form model at total average SNR `snr_db` with equal powers.
pub fn system_model(cfg: &SimConfig, snr_db: f64, sigma_rr_sq: f64) -> Result<SystemModel> {
    let p = cfg.equal_power(snr_db);
    let spec = ConstellationSpec::new(cfg.modulation)?;
    Ok(SystemModel {
        geometry: cfg.geometry_model()?,
        p_s: p,
        p_r: p,
        noise: NoiseModel::new(cfg.sigma0_sq, sigma_rr_sq)?,
        sigma_x_sq: 1.0,
        epsilon: epsilon_for(cfg, &spec),
        rate: cfg.rate,
        frames: cfg.frames,
        gamma_t: cfg.gamma_t,
    })
}

/// Throughput in nats per channel use; the half-duplex outage already
/// accounts for its doubled rate over half the channel uses.
pub fn throughput(rate: f64, outage: f64) -> f64 {
    rate * (1.0 - outage)
}

fn forwarding_probability(cfg: &SimConfig, model: &SystemModel, protocol: Protocol, stream: u64) -> Result<f64> {
    match cfg.gain_mode {
        GainMode::Expected => Ok(p_forward_avg(&model.selection_model(protocol)?)),
        GainMode::PerRealization => {
            let mut rs = RandomStream::new(cfg.seed, u64::MAX - stream);
            model.p_forward_per_realization(protocol, cfg.realizations, &mut rs)
        }
    }
}

/// Closed-form FD/HD outage with the forwarding probability from the
/// configured gain mode.
pub fn analytic_outage(cfg: &SimConfig, model: &SystemModel, protocol: Protocol) -> Result<(f64, f64, f64)> {
    use crate::analysis::{outage_fd, outage_hd, OutageParams};
    let p_c = forwarding_probability(cfg, model, protocol, 0)?;
    let m = model.selection_model(protocol)?;
    let p0 = match cfg.gain_mode {
        GainMode::Expected => m.p0,
        GainMode::PerRealization => {
            let hd_model = SystemModel { noise: NoiseModel::new(model.noise.sigma0_sq, 0.0)?, ..*model };
            forwarding_probability(cfg, &hd_model, protocol, 1)?
        }
    };
    let (x, y) = (model.x()?, model.y()?);
    let fd = outage_fd(&OutageParams { x, y, rate: model.rate, p_c });
    let hd = outage_hd(&OutageParams { x, y, rate: model.rate, p_c: p0 });
    Ok((p_c, fd, hd))
}

/// One Monte Carlo outage trial: a random slot of a random transmission,
/// the selection chain up to that slot, and exponential link gains.
fn outage_trial(cfg: &SimConfig, model: &SystemModel, trial: usize) -> Result<(bool, bool)> {
    let mut rs = trial_stream(cfg.seed, trial, 0);
    let (p1, p0) = match cfg.gain_mode {
        GainMode::Expected => {
            let m = model.selection_model(Protocol::Proposed)?;
            (m.p1, m.p0)
        }
        GainMode::PerRealization => {
            let mean = model.geometry.link_variance(crate::channel::Link::SourceRelay)?;
            model.selection_pair(Protocol::Proposed, rs.exponential(mean))
        }
    };
    let slot = rs.index(cfg.frames);
    let mut selected = false;
    let mut forwarded = false;
    for l in 0..cfg.frames {
        let u = rs.uniform();
        let p = if selected { p1 } else { p0 };
        selected = u < p;
        if l == slot {
            forwarded = selected;
        }
    }
    let hd_forwarded = rs.uniform() < p0;
    let (g1, g2) = (rs.exponential(1.0), rs.exponential(1.0));
    let (x, y) = (model.x()?, model.y()?);
    let direct = x * g1;
    let both = x * g1 + y * g2;
    let fd = if forwarded { both } else { direct }.ln_1p() < model.rate;
    let hd = 0.5 * if hd_forwarded { both } else { direct }.ln_1p() < model.rate;
    Ok((fd, hd))
}

fn mc_outage(cfg: &SimConfig, model: &SystemModel) -> Result<(u64, u64)> {
    let results: Vec<(bool, bool)> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| outage_trial(cfg, model, t))
        .collect::<Result<_>>()?;
    Ok(results.iter().fold((0, 0), |(a, b), &(f, h)| (a + u64::from(f), b + u64::from(h))))
}

fn self_check(label: &str, sweep: f64, analytic: f64, hits: u64, n: u64) -> Result<()> {
    let p = hits as f64 / n as f64;
    let sigma = (analytic * (1.0 - analytic) / n as f64).sqrt().max(1.0 / n as f64);
    if (p - analytic).abs() > 3.0 * sigma {
        return Err(Error::SelfCheck(format!(
            "{label} at {sweep}: Monte Carlo {p} vs closed form {analytic} (3 sigma = {})",
            3.0 * sigma
        )));
    }
    Ok(())
}

fn outage_rows(cfg: &SimConfig, mode: RunMode, sweep: f64, model: &SystemModel) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let (p_c, fd, hd) = analytic_outage(cfg, model, Protocol::Proposed)?;
    if mode.analytic() {
        rows.push(ResultRow::exact(sweep, "p_c", p_c));
        rows.push(ResultRow::exact(sweep, "outage_fd", fd));
        rows.push(ResultRow::exact(sweep, "outage_hd", hd));
        rows.push(ResultRow::exact(sweep, "throughput_fd", throughput(cfg.rate, fd)));
        rows.push(ResultRow::exact(sweep, "throughput_hd", throughput(cfg.rate, hd)));
        for &p in cfg.protocols.iter().filter(|&&p| p != Protocol::Proposed) {
            let (_, o, _) = analytic_outage(cfg, model, p)?;
            rows.push(ResultRow::exact(sweep, format!("outage_fd_{}", p.name()), o));
        }
    }
    if mode.monte_carlo() {
        let n = cfg.n_trials as u64;
        let (f, h) = mc_outage(cfg, model)?;
        if cfg.self_check {
            self_check("outage_fd", sweep, fd, f, n)?;
            self_check("outage_hd", sweep, hd, h, n)?;
        }
        rows.push(ResultRow::proportion(sweep, "outage_fd_mc", f, n));
        rows.push(ResultRow::proportion(sweep, "outage_hd_mc", h, n));
    }
    Ok(rows)
}

/// Outage, forwarding probability and throughput versus total average SNR.
pub fn run_outage_experiment(cfg: &SimConfig, mode: RunMode) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &snr in &cfg.snr_db {
        let model = system_model(cfg, snr, cfg.sigma_rr_sq)?;
        rows.extend(outage_rows(cfg, mode, snr, &model)?);
    }
    Ok(rows)
}

/// Outage versus residual self-interference variance normalized by
/// `si_max`, at fixed total average SNR.
pub fn run_si_sweep(cfg: &SimConfig, mode: RunMode) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for k in 0..cfg.si_points {
        let frac = k as f64 / (cfg.si_points - 1) as f64;
        let model = system_model(cfg, cfg.si_snr_db, frac * cfg.si_max)?;
        rows.extend(outage_rows(cfg, mode, frac, &model)?);
    }
    Ok(rows)
}

/// Fixed pieces of the link-level chain.
#[derive(Clone, Debug)]
pub struct LinkSetup {
    pub codec: CodecConfig,
    pub constellation: ConstellationSpec,
    pub geometry: LinkGeometry,
    pub noise: NoiseModel,
    pub p_s: f64,
    pub p_r: f64,
    pub epsilon: f64,
    pub gamma_t: f64,
    pub frames: usize,
}

impl LinkSetup {
    pub fn from_config(cfg: &SimConfig, snr_db: f64) -> Result<Self> {
        let constellation = ConstellationSpec::new(cfg.modulation)?;
        let codec = CodecConfig::new(
            cfg.info_bits,
            CodecConfig::DEFAULT_GENERATORS,
            cfg.doping_rate,
            cfg.iterations,
            Interleaver::random(2 * cfg.info_bits, cfg.seed),
        )?;
        let p = cfg.equal_power(snr_db);
        Ok(LinkSetup {
            epsilon: epsilon_for(cfg, &constellation),
            codec,
            constellation,
            geometry: cfg.geometry_model()?,
            noise: NoiseModel::new(cfg.sigma0_sq, cfg.sigma_rr_sq)?,
            p_s: p,
            p_r: p,
            gamma_t: cfg.gamma_t,
            frames: cfg.frames,
        })
    }

    fn relay_config(&self) -> RelayConfig {
        RelayConfig {
            codec: self.codec.clone(),
            constellation: self.constellation.clone(),
            noise: self.noise,
            p_s: self.p_s,
            p_r: self.p_r,
            epsilon: self.epsilon,
            sigma_x_sq: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransmissionStats {
    pub bit_errors: u64,
    pub bits: u64,
    pub forwarded_symbols: u64,
    pub relay_symbols: u64,
}

impl std::ops::Add for TransmissionStats {
    type Output = TransmissionStats;
    fn add(self, o: TransmissionStats) -> TransmissionStats {
        TransmissionStats {
            bit_errors: self.bit_errors + o.bit_errors,
            bits: self.bits + o.bits,
            forwarded_symbols: self.forwarded_symbols + o.forwarded_symbols,
            relay_symbols: self.relay_symbols + o.relay_symbols,
        }
    }
}

fn random_frame(rs: &mut RandomStream, m: usize, protocol: Protocol) -> Vec<u8> {
    let bits: Vec<u8> = (0..m).map(|_| rs.bit()).collect();
    if protocol == Protocol::CrcSdf && m > CRC_BITS {
        crc_attach(&bits[..m - CRC_BITS])
    } else {
        bits
    }
}

/// One transmission of `frames` frames through the whole chain. Every
/// random quantity comes from streams tied to `trial`, so protocols and SNR
/// points see the same bits, fading and noise.
pub fn simulate_transmission(setup: &LinkSetup, protocol: Protocol, seed: u64, trial: usize) -> Result<TransmissionStats> {
    let mut bits_rs = trial_stream(seed, trial, 0);
    let mut chan_rs = trial_stream(seed, trial, 1);
    let mut relay_rs = trial_stream(seed, trial, 2);
    let mut dest_rs = trial_stream(seed, trial, 3);
    let frames = setup.frames;
    let m = setup.codec.info_bits();
    let n_sym = setup.codec.coded_bits() / setup.constellation.bits_per_symbol();
    let s0 = setup.noise.sigma0_sq;
    let (gs, gr) = (setup.p_s.sqrt(), setup.p_r.sqrt());

    let info: Vec<Vec<u8>> = (0..frames).map(|_| random_frame(&mut bits_rs, m, protocol)).collect();
    let source: Vec<Vec<ComplexSample>> = info
        .iter()
        .map(|b| modulate(&sccc_encode(b, &setup.codec)?, &setup.constellation))
        .collect::<Result<_>>()?;
    let channel: ChannelRealization = draw_channel(&setup.geometry, &setup.noise, frames, &mut chan_rs)?;
    let relay_cfg = setup.relay_config();

    // relay_tx[l - 1] is what the relay sends in slot l
    let mut relay_tx: Vec<Vec<ComplexSample>> = vec![vec![ZERO; n_sym]];
    let mut mask: Vec<bool> = vec![false; n_sym];
    let mut stats = TransmissionStats::default();
    for l in 1..=frames {
        let g = channel.slot(l);
        let tx = &relay_tx[l - 1];
        let y: Vec<ComplexSample> = source[l - 1]
            .iter()
            .zip(tx)
            .map(|(&xs, &xr)| g.h_sr * xs * gs + g.h_rr * xr * gr + relay_rs.complex_gaussian(s0))
            .collect();
        let (next, next_mask) = match protocol {
            Protocol::Proposed => {
                let state = RelaySlotState { prev_frame: tx.clone(), prev_mask: mask.clone() };
                let out = relay_slot(&y, g.h_sr, &state, &relay_cfg)?;
                (out.x_next, out.mask)
            }
            Protocol::CrcSdf => {
                let (info_hat, x_hat) = decode_frame(&y, g.h_sr, &mask, &relay_cfg)?;
                if crc_check(&info_hat) {
                    (x_hat, vec![true; n_sym])
                } else {
                    (vec![ZERO; n_sym], vec![false; n_sym])
                }
            }
            Protocol::ThresholdSdf => {
                let si = if mask.iter().any(|&b| b) { setup.p_r * g.h_rr.norm_sqr() } else { 0.0 };
                let sinr = setup.p_s * g.h_sr.norm_sqr() / (si + s0);
                if sinr > setup.gamma_t {
                    let (_, x_hat) = decode_frame(&y, g.h_sr, &mask, &relay_cfg)?;
                    (x_hat, vec![true; n_sym])
                } else {
                    (vec![ZERO; n_sym], vec![false; n_sym])
                }
            }
            Protocol::PerfectRelay => (source[l - 1].clone(), vec![true; n_sym]),
        };
        stats.forwarded_symbols += next_mask.iter().filter(|&&b| b).count() as u64;
        stats.relay_symbols += n_sym as u64;
        relay_tx.push(next);
        mask = next_mask;
    }

    let link = DestinationLink { p_s: setup.p_s, p_r: setup.p_r, sigma0_sq: s0 };
    let silent = vec![ZERO; n_sym];
    let mut slots = Vec::with_capacity(frames + 1);
    for l in 1..=frames + 1 {
        let g = channel.slot(l);
        let xs = if l <= frames { &source[l - 1] } else { &silent };
        let xr = &relay_tx[l - 1];
        let y: Vec<ComplexSample> = xs
            .iter()
            .zip(xr)
            .map(|(&a, &b)| g.h_sd * a * gs + g.h_rd * b * gr + dest_rs.complex_gaussian(s0))
            .collect();
        let kind = SlotKind::of(l, frames)?;
        slots.push(detect_slot(&y, g, &link, l, frames, kind, &setup.constellation)?);
    }
    let decoded = combine_and_decode(&slots, &setup.codec)?;
    for (d, i) in decoded.iter().zip(&info) {
        stats.bit_errors += count_bit_errors(d, i) as u64;
        stats.bits += m as u64;
    }
    Ok(stats)
}

fn run_transmissions(setup: &LinkSetup, protocol: Protocol, seed: u64, trials: usize) -> Result<TransmissionStats> {
    let per_trial: Vec<TransmissionStats> = (0..trials)
        .into_par_iter()
        .map(|t| simulate_transmission(setup, protocol, seed, t))
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().fold(TransmissionStats::default(), |a, b| a + b))
}

/// Bit error rate of every configured protocol versus total average SNR.
/// `n_trials` counts transmissions of `frames` frames each.
pub fn run_ber_experiment(cfg: &SimConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &snr in &cfg.snr_db {
        let setup = LinkSetup::from_config(cfg, snr)?;
        for &p in &cfg.protocols {
            let s = run_transmissions(&setup, p, cfg.seed, cfg.n_trials)?;
            let mut row = ResultRow::proportion(snr, format!("ber_{}", p.name()), s.bit_errors, s.bits);
            row.n_trials = (cfg.n_trials * cfg.frames) as u64;
            rows.push(row);
            let mut fwd = ResultRow::proportion(snr, format!("forward_rate_{}", p.name()), s.forwarded_symbols, s.relay_symbols);
            fwd.n_trials = (cfg.n_trials * cfg.frames) as u64;
            rows.push(fwd);
        }
    }
    Ok(rows)
}

/// Per-symbol outcome counts of the relay's selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SelectionCounts {
    pub selected_wrong: u64,
    pub selected_correct: u64,
    pub symbols: u64,
}

/// Selection outcomes of one relay reception over a Rayleigh S-R link
/// without self-interference.
pub fn selection_trial(cfg: &RelayConfig, mean_sr_gain: f64, seed: u64, trial: usize) -> Result<SelectionCounts> {
    let mut rs = trial_stream(seed, trial, 4);
    let m = cfg.codec.info_bits();
    let info: Vec<u8> = (0..m).map(|_| rs.bit()).collect();
    let x = modulate(&sccc_encode(&info, &cfg.codec)?, &cfg.constellation)?;
    let h = rs.complex_gaussian(mean_sr_gain);
    let y: Vec<ComplexSample> = x
        .iter()
        .map(|&s| h * s * cfg.p_s.sqrt() + rs.complex_gaussian(cfg.noise.sigma0_sq))
        .collect();
    let out = relay_slot(&y, h, &RelaySlotState::silent(x.len()), cfg)?;
    let mut c = SelectionCounts { symbols: x.len() as u64, ..Default::default() };
    for ((sel, xh), xt) in out.mask.iter().zip(&out.x_hat).zip(&x) {
        if *sel {
            if xh == xt {
                c.selected_correct += 1;
            } else {
                c.selected_wrong += 1;
            }
        }
    }
    Ok(c)
}

pub fn measure_selection(cfg: &RelayConfig, mean_sr_gain: f64, seed: u64, trials: usize) -> Result<SelectionCounts> {
    let per: Vec<SelectionCounts> = (0..trials)
        .into_par_iter()
        .map(|t| selection_trial(cfg, mean_sr_gain, seed, t))
        .collect::<Result<_>>()?;
    Ok(per.into_iter().fold(SelectionCounts::default(), |a, b| SelectionCounts {
        selected_wrong: a.selected_wrong + b.selected_wrong,
        selected_correct: a.selected_correct + b.selected_correct,
        symbols: a.symbols + b.symbols,
    }))
}

fn accuracy_relay_config(cfg: &SimConfig, q: usize, p_s: f64) -> Result<RelayConfig> {
    let constellation = ConstellationSpec::new(q)?;
    Ok(RelayConfig {
        codec: CodecConfig::new(
            cfg.info_bits,
            CodecConfig::DEFAULT_GENERATORS,
            cfg.doping_rate,
            cfg.iterations,
            Interleaver::random(2 * cfg.info_bits, cfg.seed),
        )?,
        epsilon: epsilon_for(cfg, &constellation),
        constellation,
        noise: NoiseModel::new(cfg.sigma0_sq, cfg.sigma_rr_sq)?,
        p_s,
        p_r: p_s,
        sigma_x_sq: 1.0,
    })
}

fn selection_rows(rows: &mut Vec<ResultRow>, sweep: f64, suffix: &str, c: &SelectionCounts, transmissions: usize) {
    let mut push = |name: &str, hits: u64| {
        let mut r = ResultRow::proportion(sweep, format!("{name}{suffix}"), hits, c.symbols);
        r.n_trials = transmissions as u64;
        rows.push(r);
    };
    push("selected_wrong", c.selected_wrong);
    push("selected_correct", c.selected_correct);
    push("selection_rate", c.selected_wrong + c.selected_correct);
}

/// Joint probabilities of (selected, wrong) and (selected, correct) per
/// symbol versus mean S-R SNR (`snr_db` axis), then versus constellation
/// order at `accuracy_snr_db` with the power scaled to keep the minimum
/// distance of the received constellation fixed.
pub fn run_selection_accuracy(cfg: &SimConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &snr in &cfg.snr_db {
        let rc = accuracy_relay_config(cfg, cfg.modulation, cfg.equal_power(snr))?;
        let c = measure_selection(&rc, 1.0, cfg.seed, cfg.n_trials)?;
        selection_rows(&mut rows, snr, "", &c, cfg.n_trials);
    }
    let reference = ConstellationSpec::qpsk().min_distance();
    for &q in &cfg.accuracy_orders {
        let spec = ConstellationSpec::new(q)?;
        let scale = (reference / spec.min_distance()).powi(2);
        let rc = accuracy_relay_config(cfg, q, cfg.equal_power(cfg.accuracy_snr_db) * scale)?;
        let c = measure_selection(&rc, 1.0, cfg.seed, cfg.n_trials)?;
        selection_rows(&mut rows, q as f64, "_by_q", &c, cfg.n_trials);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            frames: 4,
            info_bits: 64,
            n_trials: 4,
            snr_db: vec![5.0, 25.0],
            ..SimConfig::default()
        }
    }

    #[test]
    fn outage_rows_present_and_bounded() {
        let rows = run_outage_experiment(&small(), RunMode::Both).unwrap();
        assert!(rows.iter().any(|r| r.metric == "outage_fd_mc"));
        assert!(rows.iter().filter(|r| r.metric.starts_with("outage")).all(|r| (0.0..=1.0).contains(&r.value)));
    }

    #[test]
    fn si_sweep_zero_matches_outage_point() {
        let mut c = small();
        c.snr_db = vec![c.si_snr_db];
        c.sigma_rr_sq = 0.0;
        let o = run_outage_experiment(&c, RunMode::Analytic).unwrap();
        let s = run_si_sweep(&c, RunMode::Analytic).unwrap();
        let pick = |rows: &[ResultRow], sweep: f64| rows.iter().find(|r| r.metric == "outage_fd" && r.sweep == sweep).unwrap().value;
        assert_eq!(pick(&o, c.si_snr_db), pick(&s, 0.0));
    }

    #[test]
    fn genie_relay_lower_bounds_at_one_point() {
        let c = SimConfig { snr_db: vec![10.0], sigma_rr_sq: 0.01, ..small() };
        let rows = run_ber_experiment(&c).unwrap();
        let ber = |p: &str| rows.iter().find(|r| r.metric == format!("ber_{p}")).unwrap().value;
        for p in ["proposed", "crc_sdf", "threshold_sdf"] {
            assert!(ber("perfect_relay") <= ber(p) + 1e-12);
        }
        let fwd = rows.iter().find(|r| r.metric == "forward_rate_perfect_relay").unwrap().value;
        assert_eq!(fwd, 1.0);
    }

    #[test]
    fn zero_threshold_selects_nothing() {
        let c = SimConfig { epsilon: Some(0.0), snr_db: vec![10.0], accuracy_orders: vec![4], ..small() };
        let rows = run_selection_accuracy(&c).unwrap();
        assert!(rows.iter().all(|r| r.value == 0.0));
    }

    #[test]
    fn self_check_flags_disagreement() {
        assert!(self_check("x", 0.0, 0.5, 10, 1000).is_err());
        assert!(self_check("x", 0.0, 0.5, 500, 1000).is_ok());
    }
}
