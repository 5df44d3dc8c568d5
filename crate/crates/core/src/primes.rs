//! Incremental sieve of Eratosthenes backing the prime-power probes.

use crate::error::{Error, Result};

/// Largest sieve limit the table will grow to.
pub const MAX_SIEVE_LIMIT: u64 = 1 << 32;

#[derive(Debug, Clone)]
pub struct PrimeTable {
    primes: Vec<u64>,
    limit: u64,
}

impl Default for PrimeTable {
    fn default() -> Self {
        Self::new()
    }
}

impl PrimeTable {
    pub fn new() -> Self {
        let mut t = PrimeTable { primes: Vec::new(), limit: 1 };
        t.grow_to(1 << 12);
        t
    }

    /// All primes up to and including `limit` are present afterwards.
    fn grow_to(&mut self, limit: u64) {
        if limit <= self.limit {
            return;
        }
        let n = limit as usize;
        let mut composite = vec![false; n + 1];
        composite[0] = true;
        composite[1] = true;
        let mut i = 2usize;
        while i * i <= n {
            if !composite[i] {
                let mut k = i * i;
                while k <= n {
                    composite[k] = true;
                    k += i;
                }
            }
            i += 1;
        }
        let from = self.limit as usize + 1;
        self.primes
            .extend((from..=n).filter(|&k| !composite[k]).map(|k| k as u64));
        self.limit = limit;
    }

    /// The `j`-th prime, 1-based (`nth(1) == 2`).
    pub fn nth(&mut self, j: u64) -> Result<u64> {
        if j == 0 {
            return Err(Error::domain("prime index is 1-based"));
        }
        while (self.primes.len() as u64) < j {
            let next = self.limit.saturating_mul(2);
            if next > MAX_SIEVE_LIMIT {
                return Err(Error::Size { what: "sieve limit", got: next, limit: MAX_SIEVE_LIMIT });
            }
            self.grow_to(next);
        }
        Ok(self.primes[j as usize - 1])
    }

    /// Number of primes `<= m`.
    pub fn count_le(&mut self, m: u64) -> Result<u64> {
        if m > MAX_SIEVE_LIMIT {
            return Err(Error::Size { what: "sieve limit", got: m, limit: MAX_SIEVE_LIMIT });
        }
        self.grow_to(m);
        Ok(self.primes.partition_point(|&q| q <= m) as u64)
    }

    /// The `j`-th odd prime, 1-based (`nth_odd(1) == 3`).
    pub fn nth_odd(&mut self, j: u64) -> Result<u64> {
        self.nth(j + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_prime(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn first_primes() {
        let mut t = PrimeTable::new();
        let got: Vec<u64> = (1..=10).map(|j| t.nth(j).unwrap()).collect();
        assert_eq!(got, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(t.nth_odd(1).unwrap(), 3);
        assert!(t.nth(0).is_err());
    }

    #[test]
    fn growth_matches_trial_division() {
        let mut t = PrimeTable::new();
        // beyond the initial window
        let p = t.nth(5000).unwrap();
        assert_eq!(p, 48611);
        let count = (1..=p).filter(|&n| is_prime(n)).count() as u64;
        assert_eq!(count, 5000);
        assert_eq!(t.count_le(100).unwrap(), 25);
        assert_eq!(t.count_le(48611).unwrap(), 5000);
    }
}
