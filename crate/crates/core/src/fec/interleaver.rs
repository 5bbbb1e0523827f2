//! Bit interleavers.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::signalcore::RandomStream;

/// A permutation `pi` of `0..n`; interleaving maps `out[k] = in[pi[k]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl Interleaver {
    /// Builds an interleaver, rejecting anything that is not a bijection.
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut inverse = vec![usize::MAX; n];
        for (k, &p) in perm.iter().enumerate() {
            if p >= n || inverse[p] != usize::MAX {
                return Err(Error::NotAPermutation(n));
            }
            inverse[p] = k;
        }
        Ok(Interleaver { perm, inverse })
    }

    pub fn identity(n: usize) -> Self {
        Interleaver {
            perm: (0..n).collect(),
            inverse: (0..n).collect(),
        }
    }

    /// Pseudo-random permutation drawn from `seed`.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rs = RandomStream::new(seed, 0x1e4e_1ea7);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rs);
        Interleaver::new(perm).expect("shuffle yields a permutation")
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn interleave<T: Copy>(&self, input: &[T]) -> Vec<T> {
        assert_eq!(input.len(), self.perm.len());
        self.perm.iter().map(|&p| input[p]).collect()
    }

    pub fn deinterleave<T: Copy>(&self, input: &[T]) -> Vec<T> {
        assert_eq!(input.len(), self.perm.len());
        self.inverse.iter().map(|&k| input[k]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_permutations() {
        assert!(Interleaver::new(vec![0, 0, 1]).is_err());
        assert!(Interleaver::new(vec![0, 3, 1]).is_err());
        assert!(Interleaver::new(vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn roundtrip() {
        let il = Interleaver::random(100, 9);
        let data: Vec<usize> = (0..100).collect();
        let mixed = il.interleave(&data);
        assert_ne!(mixed, data);
        assert_eq!(il.deinterleave(&mixed), data);
        assert_eq!(Interleaver::random(100, 9), il);
    }
}
