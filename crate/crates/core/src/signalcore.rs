//! Real-valued equivalents of complex baseband quantities and the seeded
//! random streams shared by every simulation component.
//!
//! The ordering convention is fixed everywhere as (real part, imaginary
//! part). A complex gain `h` acts on a [`RealPair`] through the
//! rotation-scaling matrix `[[Re h, -Im h], [Im h, Re h]]`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A complex baseband sample.
pub type ComplexSample = Complex64;

/// Real-valued equivalent `[Re x, Im x]` of a complex sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RealPair(pub [f64; 2]);

impl RealPair {
    pub const ZERO: RealPair = RealPair([0.0, 0.0]);

    pub fn new(re: f64, im: f64) -> Self {
        RealPair([re, im])
    }

    pub fn norm_sq(&self) -> f64 {
        self.0[0] * self.0[0] + self.0[1] * self.0[1]
    }

    pub fn scale(&self, k: f64) -> RealPair {
        RealPair([self.0[0] * k, self.0[1] * k])
    }
}

impl Add for RealPair {
    type Output = RealPair;
    fn add(self, rhs: RealPair) -> RealPair {
        RealPair([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1]])
    }
}

impl Sub for RealPair {
    type Output = RealPair;
    fn sub(self, rhs: RealPair) -> RealPair {
        RealPair([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1]])
    }
}

/// A 2x2 real matrix, row-major.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RealMatrix2(pub [[f64; 2]; 2]);

impl RealMatrix2 {
    pub const ZERO: RealMatrix2 = RealMatrix2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: RealMatrix2 = RealMatrix2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn scaled_identity(k: f64) -> Self {
        RealMatrix2([[k, 0.0], [0.0, k]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        RealMatrix2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Inverse, or `None` when the matrix is singular.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let m = &self.0;
        Some(RealMatrix2([
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ]))
    }

    pub fn scale(&self, k: f64) -> Self {
        let m = &self.0;
        RealMatrix2([[m[0][0] * k, m[0][1] * k], [m[1][0] * k, m[1][1] * k]])
    }

    pub fn apply(&self, v: RealPair) -> RealPair {
        let m = &self.0;
        RealPair([
            m[0][0] * v.0[0] + m[0][1] * v.0[1],
            m[1][0] * v.0[0] + m[1][1] * v.0[1],
        ])
    }

    pub fn max_abs_diff(&self, other: &RealMatrix2) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        d
    }
}

impl Add for RealMatrix2 {
    type Output = RealMatrix2;
    fn add(self, rhs: RealMatrix2) -> RealMatrix2 {
        let (a, b) = (&self.0, &rhs.0);
        RealMatrix2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Mul for RealMatrix2 {
    type Output = RealMatrix2;
    fn mul(self, rhs: RealMatrix2) -> RealMatrix2 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        RealMatrix2(out)
    }
}

pub fn complex_to_real_pair(x: ComplexSample) -> RealPair {
    RealPair([x.re, x.im])
}

pub fn real_pair_to_complex(p: RealPair) -> ComplexSample {
    ComplexSample::new(p.0[0], p.0[1])
}

/// Real matrix equivalent of multiplication by `scale * h`.
pub fn complex_to_real_matrix(h: ComplexSample, scale: f64) -> RealMatrix2 {
    RealMatrix2([
        [scale * h.re, -scale * h.im],
        [scale * h.im, scale * h.re],
    ])
}

/// Reproducible random stream identified by `(seed, stream_id)`.
///
/// Distinct stream ids under the same seed give independent sequences, so
/// each Monte Carlo trial (and each noise source inside a trial) can own its
/// stream regardless of scheduling order.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RandomStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bit(&mut self) -> u8 {
        (self.rng.next_u64() >> 63) as u8
    }

    /// Circularly symmetric complex Gaussian with total variance `variance`
    /// (`variance / 2` per dimension).
    pub fn complex_gaussian(&mut self, variance: f64) -> ComplexSample {
        let s = (variance / 2.0).sqrt();
        ComplexSample::new(s * self.normal(), s * self.normal())
    }

    /// Exponential draw with the given mean.
    pub fn exponential(&mut self, mean: f64) -> f64 {
        -mean * (1.0 - self.uniform()).ln()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest, Strategy};

    #[test]
    fn real_pair_conversions() {
        assert_eq!(
            complex_to_real_pair(ComplexSample::new(0.0, 0.0)).0,
            [0.0, 0.0]
        );
        assert_eq!(
            complex_to_real_pair(ComplexSample::new(1.0, 0.0)).0,
            [1.0, 0.0]
        );
        assert_eq!(
            complex_to_real_pair(ComplexSample::new(0.3, -0.7)).0,
            [0.3, -0.7]
        );
        assert_eq!(
            real_pair_to_complex(RealPair([0.0, 0.0])),
            ComplexSample::new(0.0, 0.0)
        );
        assert_eq!(
            real_pair_to_complex(RealPair([1.0, -1.0])),
            ComplexSample::new(1.0, -1.0)
        );
    }

    #[test]
    fn real_matrix_of_unit_and_rotation() {
        let id = complex_to_real_matrix(ComplexSample::new(1.0, 0.0), 1.0);
        assert_eq!(id, RealMatrix2::IDENTITY);
        let rot = complex_to_real_matrix(ComplexSample::new(0.0, 1.0), 1.0);
        assert_eq!(rot, RealMatrix2([[0.0, -1.0], [1.0, 0.0]]));
    }

    #[test]
    fn roundtrip_random_samples_bit_exact() {
        let mut rs = RandomStream::new(7, 0);
        for _ in 0..10_000 {
            let x = ComplexSample::new(rs.normal() * 1e3, rs.normal() * 1e-3);
            let back = real_pair_to_complex(complex_to_real_pair(x));
            assert_eq!(back.re.to_bits(), x.re.to_bits());
            assert_eq!(back.im.to_bits(), x.im.to_bits());
        }
    }

    #[test]
    fn inverse_and_singular() {
        let m = RealMatrix2([[2.0, 1.0], [1.0, 3.0]]);
        let p = m * m.inverse().unwrap();
        assert!(p.max_abs_diff(&RealMatrix2::IDENTITY) < 1e-15);
        assert!(RealMatrix2::ZERO.inverse().is_none());
    }

    #[test]
    fn streams_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut s = RandomStream::new(42, 3);
            (0..16).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = RandomStream::new(42, 3);
            (0..16).map(|_| s.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut s = RandomStream::new(42, 4);
            (0..16).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn arb_complex() -> impl Strategy<Value = ComplexSample> {
        (-1e3f64..1e3, -1e3f64..1e3).prop_map(|(r, i)| ComplexSample::new(r, i))
    }

    proptest! {
        #[test]
        fn matrix_homomorphism(h1 in arb_complex(), h2 in arb_complex()) {
            let direct = complex_to_real_matrix(h1 * h2, 1.0);
            let product = complex_to_real_matrix(h1, 1.0) * complex_to_real_matrix(h2, 1.0);
            let scale = 1.0 + (h1 * h2).norm();
            prop_assert!(direct.max_abs_diff(&product) <= 1e-12 * scale);
        }

        #[test]
        fn norm_preserved(x in arb_complex()) {
            let p = complex_to_real_pair(x);
            prop_assert!((p.norm_sq() - x.norm_sqr()).abs() <= 1e-12 * (1.0 + x.norm_sqr()));
        }

        #[test]
        fn matrix_action_matches_complex_product(h in arb_complex(), x in arb_complex(), s in 0.0f64..10.0) {
            let via_matrix = complex_to_real_matrix(h, s).apply(complex_to_real_pair(x));
            let direct = complex_to_real_pair(h * x * s);
            let scale = 1.0 + direct.norm_sq().sqrt();
            prop_assert!((via_matrix - direct).norm_sq().sqrt() <= 1e-9 * scale);
        }
    }
}
