//! Destination: joint MAP detection of the superposed source and relay
//! symbols, with an explicit "relay discarded" hypothesis, followed by
//! cross-slot LLR combining and decoding.
//!
//! Detector inputs are noise-normalized so that the complex noise has unit
//! variance and the likelihood of a hypothesis is `exp(-||y - H x||^2)`.

use crate::channel::SlotGains;
use crate::error::{Error, Result};
use crate::fec::trellis::{clamp_llr, log_sum_exp};
use crate::fec::{sccc_decode, CodecConfig};
use crate::modem::{soft_demodulate, ConstellationSpec};
use crate::signalcore::{
    complex_to_real_matrix, complex_to_real_pair, ComplexSample, RealMatrix2, RealPair,
};

/// Real-equivalent observation and channel matrices after normalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizedObservation {
    pub y: RealPair,
    pub h_s: RealMatrix2,
    pub h_r: RealMatrix2,
}

/// Scales the received sample and both effective channels by `1/sigma0`.
pub fn normalize(
    y: ComplexSample,
    h_sd: ComplexSample,
    h_rd: ComplexSample,
    p_s: f64,
    p_r: f64,
    sigma0_sq: f64,
) -> NormalizedObservation {
    let k = sigma0_sq.sqrt().recip();
    NormalizedObservation {
        y: complex_to_real_pair(y * k),
        h_s: complex_to_real_matrix(h_sd, p_s.sqrt() * k),
        h_r: complex_to_real_matrix(h_rd, p_r.sqrt() * k),
    }
}

/// Relay-symbol hypothesis: a constellation label or the discard entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelayHypothesis {
    Symbol(usize),
    Discarded,
}

/// Log-likelihood of every (source label, relay hypothesis) pair; the
/// discard entry comes last when included.
pub fn hypothesis_log_weights(
    obs: &NormalizedObservation,
    spec: &ConstellationSpec,
    include_discard: bool,
) -> Vec<(usize, RelayHypothesis, f64)> {
    let relay_terms: Vec<(RelayHypothesis, RealPair)> = spec
        .points()
        .iter()
        .enumerate()
        .map(|(j, &p)| (RelayHypothesis::Symbol(j), obs.h_r.apply(complex_to_real_pair(p))))
        .chain(include_discard.then_some((RelayHypothesis::Discarded, RealPair::ZERO)))
        .collect();
    let mut out = Vec::with_capacity(spec.order() * relay_terms.len());
    for (i, &s) in spec.points().iter().enumerate() {
        let residual = obs.y - obs.h_s.apply(complex_to_real_pair(s));
        for &(hyp, r) in &relay_terms {
            out.push((i, hyp, -(residual - r).norm_sq()));
        }
    }
    out
}

/// Normalized posterior of every hypothesis under uniform priors.
pub fn hypothesis_posteriors(
    obs: &NormalizedObservation,
    spec: &ConstellationSpec,
    include_discard: bool,
) -> Vec<(usize, RelayHypothesis, f64)> {
    let w = hypothesis_log_weights(obs, spec, include_discard);
    let z = log_sum_exp(w.iter().map(|t| t.2));
    w.into_iter().map(|(i, h, l)| (i, h, (l - z).exp())).collect()
}

fn bit_llrs<F>(w: &[(usize, RelayHypothesis, f64)], spec: &ConstellationSpec, label_of: F) -> Vec<f64>
where
    F: Fn(&(usize, RelayHypothesis, f64)) -> Option<usize>,
{
    (0..spec.bits_per_symbol())
        .map(|k| {
            let mut zero = f64::NEG_INFINITY;
            let mut one = f64::NEG_INFINITY;
            for t in w {
                if let Some(l) = label_of(t) {
                    if spec.label_bit(l, k) == 0 {
                        zero = crate::fec::trellis::log_add(zero, t.2);
                    } else {
                        one = crate::fec::trellis::log_add(one, t.2);
                    }
                }
            }
            clamp_llr(zero - one)
        })
        .collect()
}

/// Source bit LLRs, marginalizing over every relay hypothesis.
pub fn llr_source_bits_with(
    obs: &NormalizedObservation,
    spec: &ConstellationSpec,
    include_discard: bool,
) -> Vec<f64> {
    let w = hypothesis_log_weights(obs, spec, include_discard);
    bit_llrs(&w, spec, |t| Some(t.0))
}

pub fn llr_source_bits(obs: &NormalizedObservation, spec: &ConstellationSpec) -> Vec<f64> {
    llr_source_bits_with(obs, spec, true)
}

/// Relay bit LLRs. When every bit-conditional posterior mass falls strictly
/// below the discard mass the symbol is declared discarded and all LLRs
/// are zero; otherwise the LLRs ignore the discard entry.
pub fn llr_relay_bits(obs: &NormalizedObservation, spec: &ConstellationSpec) -> Vec<f64> {
    let w = hypothesis_log_weights(obs, spec, true);
    let discard = log_sum_exp(
        w.iter()
            .filter(|t| t.1 == RelayHypothesis::Discarded)
            .map(|t| t.2),
    );
    let mut best = f64::NEG_INFINITY;
    for k in 0..spec.bits_per_symbol() {
        for b in 0..2u8 {
            let mass = log_sum_exp(w.iter().filter_map(|t| match t.1 {
                RelayHypothesis::Symbol(j) if spec.label_bit(j, k) == b => Some(t.2),
                _ => None,
            }));
            best = best.max(mass);
        }
    }
    if best < discard {
        return vec![0.0; spec.bits_per_symbol()];
    }
    bit_llrs(&w, spec, |t| match t.1 {
        RelayHypothesis::Symbol(j) => Some(j),
        RelayHypothesis::Discarded => None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    /// Only the source transmits.
    First,
    Middle,
    /// Only the relay transmits.
    Last,
}

impl SlotKind {
    /// Kind of slot `l` (1-based) in a transmission of `frames` frames.
    pub fn of(slot: usize, frames: usize) -> Result<SlotKind> {
        match slot {
            1 => Ok(SlotKind::First),
            l if l == frames + 1 => Ok(SlotKind::Last),
            l if l > 1 && l <= frames => Ok(SlotKind::Middle),
            _ => Err(Error::InvalidParameter(format!(
                "slot {slot} outside 1..={} for {frames} frames",
                frames + 1
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            SlotKind::First => "first",
            SlotKind::Middle => "middle",
            SlotKind::Last => "last",
        }
    }
}

/// Detector output for one slot: LLRs of source frame `l` (direct path) and
/// of relay frame `l - 1` (relayed path).
#[derive(Clone, Debug, PartialEq)]
pub struct SlotLlrs {
    pub source: Option<Vec<f64>>,
    pub relay: Option<Vec<f64>>,
}

/// Powers and noise level the destination uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DestinationLink {
    pub p_s: f64,
    pub p_r: f64,
    pub sigma0_sq: f64,
}

pub fn detect_slot(
    y: &[ComplexSample],
    gains: &SlotGains,
    link: &DestinationLink,
    slot: usize,
    frames: usize,
    kind: SlotKind,
    spec: &ConstellationSpec,
) -> Result<SlotLlrs> {
    if SlotKind::of(slot, frames)? != kind {
        return Err(Error::InconsistentSlot {
            slot,
            frames,
            expected: kind.name(),
        });
    }
    let zero = ComplexSample::new(0.0, 0.0);
    match kind {
        SlotKind::First => Ok(SlotLlrs {
            source: Some(
                y.iter()
                    .flat_map(|&ym| soft_demodulate(ym, gains.h_sd, link.p_s.sqrt(), link.sigma0_sq, spec))
                    .collect(),
            ),
            relay: None,
        }),
        SlotKind::Last => Ok(SlotLlrs {
            source: None,
            relay: Some(
                y.iter()
                    .flat_map(|&ym| {
                        let obs = normalize(ym, zero, gains.h_rd, 0.0, link.p_r, link.sigma0_sq);
                        llr_relay_bits(&obs, spec)
                    })
                    .collect(),
            ),
        }),
        SlotKind::Middle => {
            let z = spec.bits_per_symbol();
            let mut source = Vec::with_capacity(y.len() * z);
            let mut relay = Vec::with_capacity(y.len() * z);
            for &ym in y {
                let obs = normalize(ym, gains.h_sd, gains.h_rd, link.p_s, link.p_r, link.sigma0_sq);
                source.extend(llr_source_bits(&obs, spec));
                relay.extend(llr_relay_bits(&obs, spec));
            }
            Ok(SlotLlrs {
                source: Some(source),
                relay: Some(relay),
            })
        }
    }
}

/// Combined coded-bit LLRs of every frame: direct path of slot `l` plus
/// relayed path of slot `l + 1`.
pub fn combine(slots: &[SlotLlrs]) -> Result<Vec<Vec<f64>>> {
    if slots.len() < 2 {
        return Err(Error::MissingSlot(slots.len() + 1));
    }
    let frames = slots.len() - 1;
    (0..frames)
        .map(|l| {
            let direct = slots[l].source.as_ref().ok_or(Error::MissingSlot(l + 1))?;
            let relayed = slots[l + 1].relay.as_ref().ok_or(Error::MissingSlot(l + 2))?;
            if direct.len() != relayed.len() {
                return Err(Error::LengthMismatch {
                    expected: direct.len(),
                    actual: relayed.len(),
                });
            }
            Ok(direct.iter().zip(relayed).map(|(a, b)| clamp_llr(a + b)).collect())
        })
        .collect()
}

/// Combines and decodes all frames once every slot has been detected.
pub fn combine_and_decode(slots: &[SlotLlrs], codec: &CodecConfig) -> Result<Vec<Vec<u8>>> {
    combine(slots)?
        .iter()
        .map(|llr| sccc_decode(llr, codec).map(|(bits, _)| bits))
        .collect()
}

pub fn count_bit_errors(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalcore::RandomStream;
    use proptest::prelude::*;

    fn gains(h_sd: ComplexSample, h_rd: ComplexSample) -> SlotGains {
        let z = ComplexSample::new(0.0, 0.0);
        SlotGains { h_sr: z, h_sd, h_rd, h_rr: z }
    }

    /// Straightforward complex-domain enumeration of all Q(Q+1) pairs.
    fn enumerate(y: ComplexSample, a: ComplexSample, b: ComplexSample, spec: &ConstellationSpec) -> (Vec<f64>, Vec<f64>) {
        let q = spec.order();
        let z = spec.bits_per_symbol();
        let mut relay_points: Vec<Option<usize>> = (0..q).map(Some).collect();
        relay_points.push(None);
        let mut src = vec![[0.0f64; 2]; z];
        let mut rel = vec![[0.0f64; 2]; z];
        let mut rel_discard = 0.0;
        for i in 0..q {
            for r in &relay_points {
                let xr = r.map_or(ComplexSample::new(0.0, 0.0), |j| spec.points()[j]);
                let p = (-(y - a * spec.points()[i] - b * xr).norm_sqr()).exp();
                for k in 0..z {
                    src[k][spec.label_bit(i, k) as usize] += p;
                    match r {
                        Some(j) => rel[k][spec.label_bit(*j, k) as usize] += p,
                        None => {
                            if k == 0 {
                                rel_discard += p
                            }
                        }
                    }
                }
            }
        }
        let s = src.iter().map(|m| (m[0] / m[1]).ln()).collect();
        let best = rel.iter().flat_map(|m| [m[0], m[1]]).fold(0.0, f64::max);
        let r = if best < rel_discard {
            vec![0.0; z]
        } else {
            rel.iter().map(|m| (m[0] / m[1]).ln()).collect()
        };
        (s, r)
    }

    #[test]
    fn matches_enumeration() {
        let spec = ConstellationSpec::qpsk();
        let mut rs = RandomStream::new(10, 0);
        for _ in 0..2000 {
            let a = rs.complex_gaussian(1.0);
            let b = rs.complex_gaussian(1.0);
            let y = a * spec.points()[rs.index(4)] + b * spec.points()[rs.index(4)] * f64::from(rs.bit()) + rs.complex_gaussian(1.0);
            let obs = normalize(y, a, b, 1.0, 1.0, 1.0);
            let (s, r) = enumerate(y, a, b, &spec);
            for (x, e) in llr_source_bits(&obs, &spec).iter().zip(&s) {
                assert!((x - e).abs() < 1e-9);
            }
            for (x, e) in llr_relay_bits(&obs, &spec).iter().zip(&r) {
                assert!((x - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn hypothesis_set_sizes_and_normalization() {
        let spec = ConstellationSpec::qpsk();
        let obs = normalize(ComplexSample::new(0.3, -0.2), ComplexSample::new(1.0, 0.5), ComplexSample::new(-0.4, 0.9), 2.0, 3.0, 0.5);
        let with = hypothesis_posteriors(&obs, &spec, true);
        let without = hypothesis_posteriors(&obs, &spec, false);
        assert_eq!(with.len(), 20);
        assert_eq!(without.len(), 16);
        assert!((with.iter().map(|t| t.2).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((without.iter().map(|t| t.2).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn silent_relay_reduces_to_single_link() {
        let spec = ConstellationSpec::qpsk();
        let mut rs = RandomStream::new(11, 0);
        for _ in 0..200 {
            let h = rs.complex_gaussian(1.0);
            let y = rs.complex_gaussian(3.0);
            let s0 = 0.4;
            let obs = normalize(y, h, ComplexSample::new(0.0, 0.0), 2.0, 1.0, s0);
            let joint = llr_source_bits(&obs, &spec);
            let single = soft_demodulate(y, h, 2f64.sqrt(), s0, &spec);
            for (a, b) in joint.iter().zip(&single) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_observation_zero_llrs() {
        let spec = ConstellationSpec::qpsk();
        let obs = normalize(ComplexSample::new(0.0, 0.0), ComplexSample::new(0.7, 0.1), ComplexSample::new(0.2, 0.6), 1.0, 1.0, 1.0);
        assert!(llr_source_bits(&obs, &spec).iter().all(|l| l.abs() < 1e-12));
        assert!(llr_relay_bits(&obs, &spec).iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn relay_alone_recovers_relay_bits() {
        let spec = ConstellationSpec::qpsk();
        let h = ComplexSample::new(0.8, -0.6);
        for l in 0..4 {
            let obs = normalize(h * spec.points()[l], ComplexSample::new(0.0, 0.0), h, 1.0, 1.0, 0.01);
            let llr = llr_relay_bits(&obs, &spec);
            for (k, v) in llr.iter().enumerate() {
                assert_eq!(crate::fec::hard_decision(*v), spec.label_bit(l, k));
                assert!(v.abs() > 1.0);
            }
        }
    }

    #[test]
    fn discard_fires_when_relay_silent() {
        let spec = ConstellationSpec::qpsk();
        let mut rs = RandomStream::new(12, 0);
        let s0 = 0.01;
        let n = 10_000;
        let mut fired = 0;
        for _ in 0..n {
            let a = ComplexSample::from_polar(1.0, rs.uniform() * std::f64::consts::TAU);
            let b = ComplexSample::from_polar(1.0, rs.uniform() * std::f64::consts::TAU);
            let y = a * spec.points()[rs.index(4)] + rs.complex_gaussian(s0);
            let obs = normalize(y, a, b, 1.0, 1.0, s0);
            fired += usize::from(llr_relay_bits(&obs, &spec).iter().all(|&l| l == 0.0));
        }
        assert!(fired as f64 / n as f64 > 0.99, "{fired}");
    }

    #[test]
    fn slot_kinds() {
        assert_eq!(SlotKind::of(1, 4).unwrap(), SlotKind::First);
        assert_eq!(SlotKind::of(3, 4).unwrap(), SlotKind::Middle);
        assert_eq!(SlotKind::of(5, 4).unwrap(), SlotKind::Last);
        assert!(SlotKind::of(0, 4).is_err());
        assert!(SlotKind::of(6, 4).is_err());
        let spec = ConstellationSpec::qpsk();
        let link = DestinationLink { p_s: 1.0, p_r: 1.0, sigma0_sq: 1.0 };
        let g = gains(ComplexSample::new(1.0, 0.0), ComplexSample::new(1.0, 0.0));
        let y = [ComplexSample::new(0.5, 0.5); 3];
        assert!(matches!(
            detect_slot(&y, &g, &link, 2, 4, SlotKind::First, &spec),
            Err(Error::InconsistentSlot { .. })
        ));
        let first = detect_slot(&y, &g, &link, 1, 4, SlotKind::First, &spec).unwrap();
        assert!(first.relay.is_none() && first.source.as_ref().unwrap().len() == 6);
        let last = detect_slot(&y, &g, &link, 5, 4, SlotKind::Last, &spec).unwrap();
        assert!(last.source.is_none() && last.relay.as_ref().unwrap().len() == 6);
        let mid = detect_slot(&y, &g, &link, 2, 4, SlotKind::Middle, &spec).unwrap();
        let obs = normalize(y[0], g.h_sd, g.h_rd, 1.0, 1.0, 1.0);
        assert_eq!(&mid.source.as_ref().unwrap()[..2], llr_source_bits(&obs, &spec).as_slice());
        assert_eq!(&mid.relay.as_ref().unwrap()[..2], llr_relay_bits(&obs, &spec).as_slice());
    }

    #[test]
    fn combining() {
        let a = vec![3.0, -2.0, 0.5];
        let slots = vec![
            SlotLlrs { source: Some(a.clone()), relay: None },
            SlotLlrs { source: None, relay: Some(vec![0.0; 3]) },
        ];
        assert_eq!(combine(&slots).unwrap(), vec![a.clone()]);
        let doubled = vec![
            SlotLlrs { source: Some(a.clone()), relay: None },
            SlotLlrs { source: None, relay: Some(a.clone()) },
        ];
        assert_eq!(combine(&doubled).unwrap(), vec![vec![6.0, -4.0, 1.0]]);
        let missing = vec![
            SlotLlrs { source: Some(a.clone()), relay: None },
            SlotLlrs { source: None, relay: None },
        ];
        assert!(matches!(combine(&missing), Err(Error::MissingSlot(2))));
    }

    proptest! {
        #[test]
        fn without_discard_equals_two_stream_map(yr in -3.0f64..3.0, yi in -3.0f64..3.0, ar in -1.5f64..1.5, ai in -1.5f64..1.5, br in -1.5f64..1.5, bi in -1.5f64..1.5) {
            let spec = ConstellationSpec::qpsk();
            let (y, a, b) = (ComplexSample::new(yr, yi), ComplexSample::new(ar, ai), ComplexSample::new(br, bi));
            let obs = normalize(y, a, b, 1.0, 1.0, 1.0);
            let got = llr_source_bits_with(&obs, &spec, false);
            for k in 0..2 {
                let mut m = [0.0f64; 2];
                for i in 0..4 {
                    for j in 0..4 {
                        m[spec.label_bit(i, k) as usize] += (-(y - a * spec.points()[i] - b * spec.points()[j]).norm_sqr()).exp();
                    }
                }
                prop_assert!((got[k] - (m[0] / m[1]).ln().clamp(-50.0, 50.0)).abs() < 1e-9);
            }
        }
    }
}
