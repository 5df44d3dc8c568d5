//! The Bernoulli random subset of the positive integers.
//!
//! Membership of `n` is a pure function of `(p, seed, n)`: the limbs of `n`
//! (base 2^64, least significant first) are folded into a splitmix64 chain
//! started at `seed`, and one final splitmix64 step yields a 64-bit uniform
//! `u`. The integer `n` is a member iff `u / 2^64 < p`. Because `u` does not
//! depend on `p`, models sharing a seed are monotonically coupled in `p`.

use num_bigint::{BigInt, BigUint, Sign};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed used whenever none is given.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Standard splitmix64 finalizer.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds one base-2^64 limb into the hash state.
#[inline]
pub fn fold_limb(state: u64, limb: u64) -> u64 {
    splitmix64(state ^ limb.wrapping_mul(GOLDEN_GAMMA))
}

/// Raw 64-bit uniform for an integer given by its limbs (least significant first).
#[inline]
pub fn uniform_bits_limbs(seed: u64, limbs: &[u64]) -> u64 {
    splitmix64(limbs.iter().fold(seed, |s, &l| fold_limb(s, l)))
}

/// Raw 64-bit uniform for a single-limb integer.
#[inline]
pub fn uniform_bits_u64(seed: u64, n: u64) -> u64 {
    splitmix64(fold_limb(seed, n))
}

pub fn uniform_bits(seed: u64, n: &BigUint) -> u64 {
    uniform_bits_limbs(seed, &n.to_u64_digits())
}

/// The uniform `u(seed, n)` in `[0, 1)`.
pub fn uniform(seed: u64, n: &BigUint) -> f64 {
    uniform_bits(seed, n) as f64 / 18_446_744_073_709_551_616.0
}

/// A seeded Bernoulli-`p` random subset of the positive integers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetModel {
    p: f64,
    seed: u64,
    #[serde(skip)]
    threshold: u128,
}

impl SubsetModel {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("inclusion probability must lie in (0,1), got {p}")));
        }
        // p * 2^64 is exact in binary floating point; u < p  <=>  bits < ceil(p * 2^64).
        let threshold = (p * 18_446_744_073_709_551_616.0).ceil() as u128;
        Ok(SubsetModel { p, seed, threshold })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same seed, different probability: the monotone coupling partner.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        SubsetModel::new(p, self.seed)
    }

    #[inline]
    pub fn accepts(&self, bits: u64) -> bool {
        (bits as u128) < self.threshold
    }

    /// Membership of a positive integer.
    pub fn contains(&self, n: &BigUint) -> Result<bool> {
        if n.bits() == 0 {
            return Err(Error::domain("membership is defined for n >= 1, got 0"));
        }
        Ok(self.accepts(uniform_bits(self.seed, n)))
    }

    /// Membership of a signed integer; zero and negatives are domain errors.
    pub fn contains_int(&self, n: &BigInt) -> Result<bool> {
        match n.sign() {
            Sign::Plus => self.contains(n.magnitude()),
            _ => Err(Error::domain(format!("membership is defined for n >= 1, got {n}"))),
        }
    }

    pub fn contains_u64(&self, n: u64) -> Result<bool> {
        if n == 0 {
            return Err(Error::domain("membership is defined for n >= 1, got 0"));
        }
        Ok(self.member(n))
    }

    /// Unchecked single-limb membership; `n` must be positive.
    #[inline]
    pub fn member(&self, n: u64) -> bool {
        debug_assert!(n >= 1);
        self.accepts(uniform_bits_u64(self.seed, n))
    }

    /// Membership from raw limbs (least significant first, no high zero limbs).
    #[inline]
    pub fn member_limbs(&self, limbs: &[u64]) -> bool {
        self.accepts(uniform_bits_limbs(self.seed, limbs))
    }

    pub fn materialize(&self, bound: u64, budget: MemoryBudget) -> Result<DenseSample> {
        DenseSample::materialize(self, bound, budget)
    }
}

/// Upper bound on the bytes a single dense materialization may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryBudget {
    pub bytes: u64,
}

impl MemoryBudget {
    pub const DEFAULT_BYTES: u64 = 1 << 30;

    pub fn new(bytes: u64) -> Self {
        MemoryBudget { bytes }
    }

    pub fn check_bits(&self, bits: u64, what: &str) -> Result<()> {
        let needed = bits.div_ceil(64) * 8;
        if needed > self.bytes {
            return Err(Error::Resource {
                what: what.to_string(),
                needed,
                limit_name: "memory budget (bytes)",
                limit: self.bytes,
            });
        }
        Ok(())
    }
}

impl Default for MemoryBudget {
    fn default() -> Self {
        MemoryBudget::new(Self::DEFAULT_BYTES)
    }
}

/// A finite window `[1..bound]` of a subset, stored one bit per integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseSample {
    bound: u64,
    words: Vec<u64>,
}

impl DenseSample {
    pub fn materialize(model: &SubsetModel, bound: u64, budget: MemoryBudget) -> Result<Self> {
        if bound == 0 {
            return Err(Error::domain("sample bound must be >= 1"));
        }
        budget.check_bits(bound, &format!("dense sample over [1..{bound}]"))?;
        let nwords = bound.div_ceil(64) as usize;
        let mut words = vec![0u64; nwords];
        let fill = |(w, word): (usize, &mut u64)| {
            let base = w as u64 * 64;
            let top = (bound - base).min(64);
            let mut acc = 0u64;
            for b in 0..top {
                if model.member(base + b + 1) {
                    acc |= 1 << b;
                }
            }
            *word = acc;
        };
        if nwords >= 1024 {
            words.par_iter_mut().enumerate().with_min_len(256).for_each(fill);
        } else {
            words.iter_mut().enumerate().for_each(fill);
        }
        Ok(DenseSample { bound, words })
    }

    pub fn empty(bound: u64) -> Self {
        assert!(bound >= 1, "sample bound must be >= 1");
        DenseSample { bound, words: vec![0; bound.div_ceil(64) as usize] }
    }

    pub fn full(bound: u64) -> Self {
        let mut s = Self::empty(bound);
        for i in 1..=bound {
            s.insert(i);
        }
        s
    }

    /// Bit `i - 1` of `mask` is the membership of `i`; `bound <= 64`.
    pub fn from_mask(bound: u64, mask: u64) -> Self {
        assert!((1..=64).contains(&bound));
        let keep = if bound == 64 { u64::MAX } else { (1u64 << bound) - 1 };
        DenseSample { bound, words: vec![mask & keep] }
    }

    pub fn from_members(bound: u64, members: impl IntoIterator<Item = u64>) -> Self {
        let mut s = Self::empty(bound);
        for m in members {
            s.insert(m);
        }
        s
    }

    fn insert(&mut self, i: u64) {
        assert!(i >= 1 && i <= self.bound, "{i} outside [1..{}]", self.bound);
        let k = i - 1;
        self.words[(k / 64) as usize] |= 1 << (k % 64);
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    /// O(1) membership for `i` in `[1..bound]`; false outside that window.
    #[inline]
    pub fn contains(&self, i: u64) -> bool {
        if i == 0 || i > self.bound {
            return false;
        }
        let k = i - 1;
        self.words[(k / 64) as usize] >> (k % 64) & 1 == 1
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Smallest member `>= from`, if any.
    pub fn next_member(&self, from: u64) -> Option<u64> {
        let from = from.max(1);
        if from > self.bound {
            return None;
        }
        let k = from - 1;
        let mut w = (k / 64) as usize;
        let mut word = self.words[w] & (u64::MAX << (k % 64));
        loop {
            if word != 0 {
                let i = w as u64 * 64 + word.trailing_zeros() as u64 + 1;
                return (i <= self.bound).then_some(i);
            }
            w += 1;
            if w == self.words.len() {
                return None;
            }
            word = self.words[w];
        }
    }

    pub fn members(&self) -> impl Iterator<Item = u64> + '_ {
        std::iter::successors(self.next_member(1), move |&m| self.next_member(m + 1))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}
