//! Finite sumsets and product sets, and the explicit probe constructions
//! whose full inclusion in a random subset is the event being tested.
//!
//! * additive probe `(L, j)`: generators `(R+1)^j * {1, 2, ..., 2^(L-1)}` with
//!   `R = 2^L - 1`; its sumset is the dilated block `(R+1)^j * {1..R}`.
//! * multiplicative probe `(L, j)`: generators `q_j^(2^(i-1))` for the `j`-th
//!   prime `q_j`; its product set is `{q_j^1, ..., q_j^m}` with `m = 2^L - 1`.
//! * exponential quadruple `j`: `{u_j, v_j, u_j v_j, u_j^v_j}` where `u_j` and
//!   `v_j` alternate through the odd primes.
//! * Hindman quadruple `(x, y)`: `{x, y, x+y, xy}` with coincident values merged.

use std::sync::{Mutex, OnceLock};

use num_bigint::BigUint;
use num_traits::{CheckedAdd, CheckedMul, One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primes::PrimeTable;

/// Longest generator list `fs`/`fp` will enumerate (2^20 - 1 subsets).
pub const MAX_GENERATORS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PatternKind {
    FsProbe,
    FpProbe,
    Quadruple,
    ExpQuadruple,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternInstance {
    pub kind: PatternKind,
    #[serde(serialize_with = "crate::serde_util::biguints")]
    pub generators: Vec<BigUint>,
    /// Sorted ascending, no duplicates.
    #[serde(serialize_with = "crate::serde_util::biguints")]
    pub elements: Vec<BigUint>,
}

impl PatternInstance {
    pub fn min_element(&self) -> &BigUint {
        &self.elements[0]
    }

    pub fn max_element(&self) -> &BigUint {
        self.elements.last().expect("pattern instances are nonempty")
    }

    pub fn is_disjoint_from(&self, other: &PatternInstance) -> bool {
        let (mut a, mut b) = (self.elements.iter().peekable(), other.elements.iter().peekable());
        while let (Some(x), Some(y)) = (a.peek(), b.peek()) {
            match x.cmp(y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }
}

/// Caps on probe construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeLimits {
    pub max_fs_len: u32,
    pub max_fp_len: u32,
    /// Bit-length cap on additive and multiplicative probe elements.
    pub max_bits: u64,
    /// Bit-length cap on `u^v` in exponential quadruples.
    pub exp_max_bits: u64,
}

impl Default for ProbeLimits {
    fn default() -> Self {
        ProbeLimits { max_fs_len: 20, max_fp_len: 12, max_bits: 1 << 22, exp_max_bits: 16_384 }
    }
}

fn validate_generators<T: Ord + Zero + Clone>(xs: &[T]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::domain("generator list is empty"));
    }
    if xs.len() > MAX_GENERATORS {
        return Err(Error::Size {
            what: "generator count",
            got: xs.len() as u64,
            limit: MAX_GENERATORS as u64,
        });
    }
    if xs.iter().any(Zero::is_zero) {
        return Err(Error::domain("generators must be positive"));
    }
    let mut sorted = xs.to_vec();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::domain("generators must be distinct"));
    }
    Ok(())
}

/// Combines every nonempty subset with `op`, sharing work along the subset lattice.
fn subset_closure<T, F>(xs: &[T], unit: T, op: F) -> Result<Vec<T>>
where
    T: Ord + Zero + Clone,
    F: Fn(&T, &T) -> Option<T>,
{
    validate_generators(xs)?;
    let n = xs.len();
    let mut table = Vec::with_capacity(1 << n);
    table.push(unit);
    for mask in 1usize..(1 << n) {
        let low = mask.trailing_zeros() as usize;
        let v = op(&table[mask & (mask - 1)], &xs[low])
            .ok_or_else(|| Error::domain("subset combination overflows the value type"))?;
        table.push(v);
    }
    table.swap_remove(0);
    table.sort_unstable();
    table.dedup();
    Ok(table)
}

/// All nonempty subset sums of `xs`, sorted and deduplicated.
pub fn fs<T>(xs: &[T]) -> Result<Vec<T>>
where
    T: Ord + Zero + Clone + CheckedAdd,
{
    subset_closure(xs, T::zero(), |a, b| a.checked_add(b))
}

/// All nonempty subset products of `xs`, sorted and deduplicated.
pub fn fp<T>(xs: &[T]) -> Result<Vec<T>>
where
    T: Ord + Zero + One + Clone + CheckedMul,
{
    subset_closure(xs, T::one(), |a, b| a.checked_mul(b))
}

fn check_len(len: u32, max: u32, what: &'static str) -> Result<()> {
    if len == 0 || len > max {
        return Err(Error::Size { what, got: len as u64, limit: max as u64 });
    }
    Ok(())
}

fn check_bits(bits: u64, limit: u64, what: String) -> Result<()> {
    if bits > limit {
        return Err(Error::Resource { what, needed: bits, limit_name: "big-integer bits", limit });
    }
    Ok(())
}

/// Additive probe `(len, j)`: `|elements| = 2^len - 1`.
pub fn fs_probe(len: u32, j: u64, limits: &ProbeLimits) -> Result<PatternInstance> {
    check_len(len, limits.max_fs_len, "additive probe length")?;
    let shift = (len as u64).checked_mul(j).ok_or_else(|| Error::domain("probe index overflows"))?;
    check_bits(shift + len as u64, limits.max_bits, format!("additive probe L={len} j={j}"))?;
    let r = (1u64 << len) - 1;
    let generators = (0..len).map(|i| BigUint::from(1u64 << i) << shift).collect();
    let elements = (1..=r).map(|s| BigUint::from(s) << shift).collect();
    Ok(PatternInstance { kind: PatternKind::FsProbe, generators, elements })
}

fn prime_table() -> &'static Mutex<PrimeTable> {
    static TABLE: OnceLock<Mutex<PrimeTable>> = OnceLock::new();
    TABLE.get_or_init(|| Mutex::new(PrimeTable::new()))
}

/// The `j`-th prime, 1-based, from a shared growing sieve.
pub fn nth_prime(j: u64) -> Result<u64> {
    prime_table().lock().expect("prime table poisoned").nth(j)
}

/// Number of primes `<= m`.
pub fn prime_count(m: u64) -> Result<u64> {
    prime_table().lock().expect("prime table poisoned").count_le(m)
}

/// Multiplicative probe `(len, j)` built on the `j`-th prime.
pub fn fp_probe(len: u32, j: u64, limits: &ProbeLimits) -> Result<PatternInstance> {
    check_len(len, limits.max_fp_len, "multiplicative probe length")?;
    if j == 0 {
        return Err(Error::domain("multiplicative probe index is 1-based"));
    }
    let q = nth_prime(j)?;
    let m = (1u64 << len) - 1;
    let qbits = 64 - q.leading_zeros() as u64;
    check_bits(m * qbits, limits.max_bits, format!("multiplicative probe L={len} j={j}"))?;
    let q = BigUint::from(q);
    let mut elements = Vec::with_capacity(m as usize);
    let mut power = q.clone();
    for _ in 0..m {
        let next = &power * &q;
        elements.push(std::mem::replace(&mut power, next));
    }
    let generators = (0..len).map(|i| elements[(1usize << i) - 1].clone()).collect();
    Ok(PatternInstance { kind: PatternKind::FpProbe, generators, elements })
}

/// The pair `(u_j, v_j)`: odd primes split alternately, `u` taking 3, 7, 13, ...
pub fn exp_bases(j: u64) -> Result<(u64, u64)> {
    if j == 0 {
        return Err(Error::domain("exponential probe index is 1-based"));
    }
    let mut t = prime_table().lock().expect("prime table poisoned");
    Ok((t.nth_odd(2 * j - 1)?, t.nth_odd(2 * j)?))
}

/// Exponential quadruple `{u, v, u*v, u^v}` for the `j`-th base pair.
pub fn exp_probe(j: u64, limits: &ProbeLimits) -> Result<PatternInstance> {
    let (u, v) = exp_bases(j)?;
    let ubits = 64 - u.leading_zeros() as u64;
    check_bits(v * ubits, limits.exp_max_bits, format!("exponential probe j={j}"))?;
    let (bu, bv) = (BigUint::from(u), BigUint::from(v));
    let mut elements = vec![bu.clone(), bv.clone(), &bu * &bv, bu.pow(v as u32)];
    elements.sort();
    elements.dedup();
    Ok(PatternInstance { kind: PatternKind::ExpQuadruple, generators: vec![bu, bv], elements })
}

/// Distinct values of `{x, y, x+y, xy}`, sorted, with their count in `2..=4`.
#[inline]
pub fn quadruple_values(x: u64, y: u64) -> ([u64; 4], usize) {
    let mut v = [x, y, x + y, x * y];
    v.sort_unstable();
    let mut d = 1;
    for i in 1..4 {
        if v[i] != v[d - 1] {
            v[d] = v[i];
            d += 1;
        }
    }
    (v, d)
}

/// Hindman quadruple for the ordered pair `(x, y)`.
pub fn quadruple(x: u64, y: u64) -> Result<PatternInstance> {
    if x == 0 || y == 0 {
        return Err(Error::domain("quadruple generators must be positive"));
    }
    let (bx, by) = (BigUint::from(x), BigUint::from(y));
    let mut elements = vec![bx.clone(), by.clone(), &bx + &by, &bx * &by];
    elements.sort();
    elements.dedup();
    Ok(PatternInstance { kind: PatternKind::Quadruple, generators: vec![bx, by], elements })
}

/// A probe family of fixed length, indexed by `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProbeFamily {
    Fs { len: u32 },
    Fp { len: u32 },
}

impl ProbeFamily {
    pub fn len(&self) -> u32 {
        match *self {
            ProbeFamily::Fs { len } | ProbeFamily::Fp { len } => len,
        }
    }

    /// Elements per probe, `2^len - 1`.
    pub fn size(&self) -> u64 {
        (1u64 << self.len()) - 1
    }

    pub fn first_index(&self) -> u64 {
        match self {
            ProbeFamily::Fs { .. } => 0,
            ProbeFamily::Fp { .. } => 1,
        }
    }

    pub fn validate(&self, limits: &ProbeLimits) -> Result<()> {
        match *self {
            ProbeFamily::Fs { len } => check_len(len, limits.max_fs_len, "additive probe length"),
            ProbeFamily::Fp { len } => check_len(len, limits.max_fp_len, "multiplicative probe length"),
        }
    }

    pub fn probe(&self, j: u64, limits: &ProbeLimits) -> Result<PatternInstance> {
        match *self {
            ProbeFamily::Fs { len } => fs_probe(len, j, limits),
            ProbeFamily::Fp { len } => fp_probe(len, j, limits),
        }
    }

    /// Smallest index whose probe has every element `> m`.
    pub fn first_index_above(&self, m: &BigUint) -> Result<u64> {
        match *self {
            // min element is 2^(len*j); it exceeds m iff len*j >= bits(m)
            ProbeFamily::Fs { len } => Ok(m.bits().div_ceil(len as u64)),
            ProbeFamily::Fp { .. } => {
                let m = u64::try_from(m).map_err(|_| {
                    Error::domain("multiplicative probe threshold must fit in 64 bits")
                })?;
                Ok(prime_count(m)? + 1)
            }
        }
    }
}

impl std::fmt::Display for ProbeFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProbeFamily::Fs { len } => write!(f, "fs(L={len})"),
            ProbeFamily::Fp { len } => write!(f, "fp(L={len})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    #[test]
    fn fs_small_examples() {
        assert_eq!(fs(&[1u64, 3]).unwrap(), vec![1, 3, 4]);
        assert_eq!(fs(&[17u64]).unwrap(), vec![17]);
        assert_eq!(fs(&[1u64, 2, 4]).unwrap(), (1..=7).collect::<Vec<u64>>());
        assert_eq!(fs(&big(&[1, 3])).unwrap(), big(&[1, 3, 4]));
    }

    #[test]
    fn fp_small_examples() {
        assert_eq!(fp(&[2u64, 5]).unwrap(), vec![2, 5, 10]);
        assert_eq!(fp(&[9u64]).unwrap(), vec![9]);
        let want: Vec<u64> = (1..=7).map(|e| 3u64.pow(e)).collect();
        assert_eq!(fp(&[3u64, 9, 81]).unwrap(), want);
    }

    #[test]
    fn fs_fp_errors() {
        assert!(matches!(fs::<u64>(&[]), Err(Error::Domain(_))));
        let many: Vec<u64> = (1..=21).collect();
        assert!(matches!(fs(&many), Err(Error::Size { .. })));
        assert!(matches!(fp(&many), Err(Error::Size { .. })));
        assert!(fs(&[0u64, 1]).is_err());
        assert!(fs(&[2u64, 2]).is_err());
        assert!(fp(&[u64::MAX, 2]).is_err());
        // twenty generators enumerate fine
        let twenty: Vec<u64> = (0..20).map(|i| 1 << i).collect();
        assert_eq!(fs(&twenty).unwrap().len(), (1 << 20) - 1);
    }

    #[test]
    fn fs_probe_examples() {
        let lim = ProbeLimits::default();
        let p = fs_probe(2, 0, &lim).unwrap();
        assert_eq!(p.generators, big(&[1, 2]));
        assert_eq!(p.elements, big(&[1, 2, 3]));
        let p = fs_probe(1, 5, &lim).unwrap();
        assert_eq!(p.elements, big(&[32]));
        let p = fs_probe(2, 1, &lim).unwrap();
        assert_eq!(p.elements, big(&[4, 8, 12]));
        assert_eq!(fs(&p.generators).unwrap(), p.elements);
        assert!(fs_probe(0, 1, &lim).is_err());
        assert!(fs_probe(21, 1, &lim).is_err());
        let tight = ProbeLimits { max_bits: 100, ..lim };
        assert!(fs_probe(2, 60, &tight).unwrap_err().is_resource());
    }

    #[test]
    fn fs_probe_structure() {
        let lim = ProbeLimits::default();
        for len in 1..=8u32 {
            let r = (1u64 << len) - 1;
            for j in 0..12u64 {
                let p = fs_probe(len, j, &lim).unwrap();
                assert_eq!(p.elements.len() as u64, r);
                assert_eq!(fs(&p.generators).unwrap(), p.elements);
                let base = BigUint::from(r + 1).pow(j as u32);
                assert_eq!(p.min_element(), &base);
                assert_eq!(p.max_element(), &(&base * r));
                // next block starts strictly above this one
                let next = BigUint::from(r + 1).pow(j as u32 + 1);
                assert!(next > *p.max_element());
            }
        }
    }

    #[test]
    fn fp_probe_examples() {
        let lim = ProbeLimits::default();
        let p = fp_probe(2, 1, &lim).unwrap();
        assert_eq!(p.generators, big(&[2, 4]));
        assert_eq!(p.elements, big(&[2, 4, 8]));
        assert_eq!(fp(&p.generators).unwrap(), p.elements);
        assert_eq!(fp_probe(1, 3, &lim).unwrap().elements, big(&[5]));
        assert!(fp_probe(13, 1, &lim).is_err());
        assert!(fp_probe(2, 0, &lim).is_err());
    }

    #[test]
    fn fp_probe_is_prime_power_block() {
        let lim = ProbeLimits::default();
        for len in 1..=5u32 {
            for j in 1..=6u64 {
                let p = fp_probe(len, j, &lim).unwrap();
                let q = BigUint::from(nth_prime(j).unwrap());
                let m = (1usize << len) - 1;
                assert_eq!(p.elements.len(), m);
                assert_eq!(fp(&p.generators).unwrap(), p.elements);
                // exponent isomorphism: fp of q^(2^i) is q^(fs of 2^i)
                let exps: Vec<u64> = (0..len).map(|i| 1 << i).collect();
                let via_fs: Vec<BigUint> =
                    fs(&exps).unwrap().into_iter().map(|e| q.pow(e as u32)).collect();
                assert_eq!(p.elements, via_fs);
            }
        }
    }

    #[test]
    fn fp_probes_with_distinct_primes_are_disjoint() {
        let lim = ProbeLimits::default();
        let probes: Vec<_> = (1..=8).map(|j| fp_probe(3, j, &lim).unwrap()).collect();
        for a in 0..probes.len() {
            for b in a + 1..probes.len() {
                assert!(probes[a].is_disjoint_from(&probes[b]));
            }
        }
    }

    #[test]
    fn exp_probe_examples() {
        let lim = ProbeLimits::default();
        let p = exp_probe(1, &lim).unwrap();
        assert_eq!(p.generators, big(&[3, 5]));
        assert_eq!(p.elements, big(&[3, 5, 15, 243]));
        let probes: Vec<_> = (1..=40).map(|j| exp_probe(j, &lim).unwrap()).collect();
        for (i, a) in probes.iter().enumerate() {
            assert_eq!(a.elements.len(), 4);
            for b in &probes[i + 1..] {
                assert!(a.is_disjoint_from(b));
            }
        }
        let tight = ProbeLimits { exp_max_bits: 64, ..lim };
        assert!(exp_probe(3, &tight).unwrap_err().is_resource());
        assert!(exp_probe(0, &lim).is_err());
    }

    #[test]
    fn exp_bases_alternate() {
        assert_eq!(exp_bases(1).unwrap(), (3, 5));
        assert_eq!(exp_bases(2).unwrap(), (7, 11));
        assert_eq!(exp_bases(3).unwrap(), (13, 17));
    }

    #[test]
    fn quadruple_examples() {
        assert_eq!(quadruple(2, 2).unwrap().elements, big(&[2, 4]));
        assert_eq!(quadruple(1, 5).unwrap().elements, big(&[1, 5, 6]));
        let q = quadruple(3, 4).unwrap();
        assert_eq!(q.elements, big(&[3, 4, 7, 12]));
        assert_eq!(quadruple(4, 3).unwrap().generators, big(&[4, 3]));
        assert!(quadruple(0, 3).is_err());
    }

    #[test]
    fn quadruple_values_counts() {
        assert_eq!(quadruple_values(1, 1).1, 2);
        assert_eq!(&quadruple_values(1, 1).0[..2], &[1, 2]);
        assert_eq!(quadruple_values(2, 2).1, 2);
        assert_eq!(quadruple_values(1, 5).1, 3);
        assert_eq!(quadruple_values(3, 3).1, 3);
        assert_eq!(quadruple_values(3, 4), ([3, 4, 7, 12], 4));
    }

    #[test]
    fn first_index_above_threshold() {
        let fam = ProbeFamily::Fs { len: 2 };
        for m in 1u64..300 {
            let j = fam.first_index_above(&BigUint::from(m)).unwrap();
            let lim = ProbeLimits::default();
            assert!(*fam.probe(j, &lim).unwrap().min_element() > BigUint::from(m));
            if j > 0 {
                assert!(*fam.probe(j - 1, &lim).unwrap().min_element() <= BigUint::from(m));
            }
        }
        let fam = ProbeFamily::Fp { len: 2 };
        assert_eq!(fam.first_index_above(&BigUint::from(10u8)).unwrap(), 5); // q_5 = 11
        assert_eq!(fam.first_index_above(&BigUint::from(11u8)).unwrap(), 6);
        assert_eq!(fam.first_index_above(&BigUint::from(1u8)).unwrap(), 1);
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::collection::btree_set;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn fs_size_bound(xs in btree_set(1u64..1000, 1..10)) {
            let xs: Vec<u64> = xs.into_iter().collect();
            let s = fs(&xs).unwrap();
            prop_assert!(s.len() < 1 << xs.len());
            for x in &xs {
                prop_assert!(s.binary_search(x).is_ok());
            }
        }

        #[test]
        fn fs_dilation_equivariance(xs in btree_set(1u64..1000, 1..9), c in 1u64..500) {
            let xs: Vec<u64> = xs.into_iter().collect();
            let scaled: Vec<u64> = xs.iter().map(|x| x * c).collect();
            let lhs = fs(&scaled).unwrap();
            let rhs: Vec<u64> = fs(&xs).unwrap().into_iter().map(|s| s * c).collect();
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn binary_generators_reach_the_bound() {
        for len in 1..=12usize {
            let xs: Vec<u64> = (0..len).map(|i| 1 << i).collect();
            assert_eq!(fs(&xs).unwrap().len(), (1 << len) - 1);
        }
    }
}
