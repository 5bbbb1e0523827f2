//! Gray-labelled BPSK and square QAM mapping, exact soft demapping and the
//! constellation-dependent selection threshold.

use crate::error::{Error, Result};
use crate::fec::trellis::{clamp_llr, log_sum_exp};
use crate::signalcore::ComplexSample;

/// A unit-average-energy constellation. `points[l]` carries label `l`, whose
/// bits are read MSB first (the first bit of a symbol is the MSB).
#[derive(Clone, Debug, PartialEq)]
pub struct ConstellationSpec {
    order: usize,
    bits_per_symbol: usize,
    points: Vec<ComplexSample>,
}

fn gray_to_index(mut g: usize) -> usize {
    let mut i = 0;
    while g != 0 {
        i ^= g;
        g >>= 1;
    }
    i
}

/// Gray PAM amplitude for `label` over `levels` levels; label 0 maps to the
/// largest positive amplitude.
fn pam_level(label: usize, levels: usize) -> f64 {
    (levels as f64 - 1.0) - 2.0 * gray_to_index(label) as f64
}

impl ConstellationSpec {
    /// BPSK (`Q = 2`) or square QAM (`Q = 4^k`).
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::UnsupportedConstellation(order));
        }
        let z = order.trailing_zeros() as usize;
        let raw: Vec<ComplexSample> = if order == 2 {
            vec![ComplexSample::new(1.0, 0.0), ComplexSample::new(-1.0, 0.0)]
        } else if z.is_multiple_of(2) {
            let half = z / 2;
            let levels = 1usize << half;
            (0..order)
                .map(|l| {
                    let re = pam_level(l >> half, levels);
                    let im = pam_level(l & (levels - 1), levels);
                    ComplexSample::new(re, im)
                })
                .collect()
        } else {
            return Err(Error::UnsupportedConstellation(order));
        };
        let energy = raw.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
        let k = energy.sqrt().recip();
        Ok(ConstellationSpec {
            order,
            bits_per_symbol: z,
            points: raw.into_iter().map(|p| p * k).collect(),
        })
    }

    pub fn qpsk() -> Self {
        Self::new(4).expect("QPSK is supported")
    }

    pub fn bpsk() -> Self {
        Self::new(2).expect("BPSK is supported")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[ComplexSample] {
        &self.points
    }

    /// Bit `j` (0 = first) of the label of point `l`.
    pub fn label_bit(&self, l: usize, j: usize) -> u8 {
        ((l >> (self.bits_per_symbol - 1 - j)) & 1) as u8
    }

    pub fn point_for_bits(&self, bits: &[u8]) -> ComplexSample {
        let l = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        self.points[l]
    }

    /// Nearest point under the given channel, as label bits.
    pub fn hard_bits(&self, y: ComplexSample, h: ComplexSample) -> Vec<u8> {
        let best = (0..self.order)
            .min_by(|&a, &b| {
                let da = (y - h * self.points[a]).norm_sqr();
                let db = (y - h * self.points[b]).norm_sqr();
                da.total_cmp(&db)
            })
            .unwrap();
        (0..self.bits_per_symbol).map(|j| self.label_bit(best, j)).collect()
    }

    pub fn min_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.min((a - b).norm());
            }
        }
        d
    }
}

pub fn modulate(coded: &[u8], spec: &ConstellationSpec) -> Result<Vec<ComplexSample>> {
    let z = spec.bits_per_symbol;
    if !coded.len().is_multiple_of(z) {
        return Err(Error::LengthMismatch {
            expected: coded.len().div_ceil(z) * z,
            actual: coded.len(),
        });
    }
    if let Some((position, &value)) = coded.iter().enumerate().find(|(_, &b)| b > 1) {
        return Err(Error::NonBinary { position, value });
    }
    Ok(coded.chunks(z).map(|c| spec.point_for_bits(c)).collect())
}

/// Exact bit LLRs of `y = gain h x + n` with total noise-plus-interference
/// variance `var_total`.
pub fn soft_demodulate(
    y: ComplexSample,
    h: ComplexSample,
    gain: f64,
    var_total: f64,
    spec: &ConstellationSpec,
) -> Vec<f64> {
    assert!(var_total > 0.0, "var_total must be positive");
    let metrics: Vec<f64> = spec
        .points
        .iter()
        .map(|&x| -(y - h * x * gain).norm_sqr() / var_total)
        .collect();
    (0..spec.bits_per_symbol)
        .map(|j| {
            let zero = log_sum_exp((0..spec.order).filter(|&l| spec.label_bit(l, j) == 0).map(|l| metrics[l]));
            let one = log_sum_exp((0..spec.order).filter(|&l| spec.label_bit(l, j) == 1).map(|l| metrics[l]));
            clamp_llr(zero - one)
        })
        .collect()
}

/// Squared half minimum distance of the constellation.
pub fn selection_threshold(spec: &ConstellationSpec) -> f64 {
    let h = spec.min_distance() / 2.0;
    h * h
}
