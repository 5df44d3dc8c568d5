//! Pattern detection in samples of a random subset.
//!
//! Probe scans test full inclusion of explicit probes through the lazy
//! membership oracle, so probe elements never need to be materialized as
//! dense ranges. Witness searches and quadruple counts run against a
//! [`DenseSample`] with O(1) bit lookups.

use std::ops::Range;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fold_limb, splitmix64, DenseSample, SubsetModel};
use crate::patterns::{self, PatternInstance, ProbeFamily, ProbeLimits};

/// Longest tuple the exhaustive sumset search accepts.
pub const MAX_SEARCH_LEN: u32 = 6;

const SCAN_CHUNK: u64 = 2048;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeHitReport {
    pub family: ProbeFamily,
    pub j_start: u64,
    pub j_end: u64,
    /// Elements per probe.
    pub probe_size: u64,
    /// Indices `j` whose probe lies fully inside the subset, ascending.
    pub hits: Vec<u64>,
    /// First index not scanned because its probe exceeded the bit budget.
    pub truncated_at: Option<u64>,
}

impl ProbeHitReport {
    /// Number of indices actually examined.
    pub fn scanned(&self) -> u64 {
        self.truncated_at.unwrap_or(self.j_end).max(self.j_start) - self.j_start
    }

    pub fn hit_rate(&self) -> f64 {
        self.hits.len() as f64 / self.scanned().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrupleCount {
    pub n: u64,
    /// Ordered pairs `(x, y)` in `[1..n]^2` whose quadruple lies in the sample.
    pub count: u64,
    /// The first witnesses in lexicographic order, up to the requested cap.
    pub witnesses: Vec<(u64, u64)>,
}

/// Outcome of scanning upward for a probe above a threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MinElementSearch {
    pub start_j: u64,
    pub attempts: u64,
    pub hit_j: Option<u64>,
    pub probe: Option<PatternInstance>,
}

/// Incremental membership test for additive probes.
///
/// The elements of probe `(L, j)` are `s << (L*j)` for `s < 2^L`, whose limbs
/// are `L*j / 64` zero limbs followed by at most two nonzero ones. Folding a
/// zero limb is a plain splitmix64 step, so the chain state after `k` zero
/// limbs is cached and advanced as `j` grows.
struct AdditiveScanner<'m> {
    model: &'m SubsetModel,
    len: u32,
    zero_limbs: u64,
    state: u64,
}

impl<'m> AdditiveScanner<'m> {
    fn new(model: &'m SubsetModel, len: u32) -> Self {
        AdditiveScanner { model, len, zero_limbs: 0, state: model.seed() }
    }

    /// `j` must not decrease between calls.
    fn hit(&mut self, j: u64) -> bool {
        let shift = self.len as u64 * j;
        let (k, r) = (shift / 64, (shift % 64) as u32);
        debug_assert!(k >= self.zero_limbs);
        while self.zero_limbs < k {
            self.state = splitmix64(self.state);
            self.zero_limbs += 1;
        }
        let r_max = (1u64 << self.len) - 1;
        (1..=r_max).all(|s| {
            let lo = s << r;
            let hi = if r == 0 { 0 } else { s >> (64 - r) };
            let mut st = fold_limb(self.state, lo);
            if hi != 0 {
                st = fold_limb(st, hi);
            }
            self.model.accepts(splitmix64(st))
        })
    }
}

fn multiplicative_hit(model: &SubsetModel, q: u64, size: u64) -> bool {
    let q = BigUint::from(q);
    let mut power = q.clone();
    for _ in 0..size {
        if !model.member_limbs(&power.to_u64_digits()) {
            return false;
        }
        power *= &q;
    }
    true
}

/// First index whose probe would exceed the bit budget.
fn budget_end(family: &ProbeFamily, range: &Range<u64>, limits: &ProbeLimits) -> Result<u64> {
    match *family {
        ProbeFamily::Fs { len } => {
            let len = len as u64;
            Ok(limits.max_bits.checked_sub(len).map_or(0, |room| room / len + 1))
        }
        ProbeFamily::Fp { len } => {
            // bits(q_j^m) <= m * bits(q_j) is monotone in j; binary search the range
            let m = (1u64 << len) - 1;
            let fits = |j: u64| -> Result<bool> {
                let q = patterns::nth_prime(j)?;
                Ok(m * (64 - q.leading_zeros() as u64) <= limits.max_bits)
            };
            let (mut lo, mut hi) = (range.start.max(1), range.end.max(1));
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if fits(mid)? {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            Ok(lo)
        }
    }
}

fn scan_chunk(model: &SubsetModel, family: &ProbeFamily, js: Range<u64>) -> Result<Vec<u64>> {
    match *family {
        ProbeFamily::Fs { len } => {
            let mut scanner = AdditiveScanner::new(model, len);
            Ok(js.filter(|&j| scanner.hit(j)).collect())
        }
        ProbeFamily::Fp { len } => {
            let size = (1u64 << len) - 1;
            let mut hits = Vec::new();
            for j in js {
                if multiplicative_hit(model, patterns::nth_prime(j)?, size) {
                    hits.push(j);
                }
            }
            Ok(hits)
        }
    }
}

/// Indices `j` in `range` whose probe is fully contained in the model's subset.
pub fn probe_hits(
    model: &SubsetModel,
    family: ProbeFamily,
    range: Range<u64>,
    limits: &ProbeLimits,
) -> Result<ProbeHitReport> {
    family.validate(limits)?;
    let first = family.first_index();
    if range.start < first {
        return Err(Error::domain(format!("{family} probes start at j = {first}")));
    }
    let stop = budget_end(&family, &range, limits)?;
    let end = range.end.min(stop).max(range.start);
    let truncated_at = (end < range.end).then_some(end);
    if matches!(family, ProbeFamily::Fp { .. }) && end > range.start {
        // warm the shared sieve once before workers contend for it
        patterns::nth_prime(end - 1)?;
    }
    let starts: Vec<u64> = (range.start..end).step_by(SCAN_CHUNK as usize).collect();
    let chunks: Vec<Vec<u64>> = starts
        .into_par_iter()
        .map(|a| scan_chunk(model, &family, a..(a + SCAN_CHUNK).min(end)))
        .collect::<Result<_>>()?;
    Ok(ProbeHitReport {
        family,
        j_start: range.start,
        j_end: range.end,
        probe_size: family.size(),
        hits: chunks.concat(),
        truncated_at,
    })
}

/// Whether probe `j` is fully contained in the model's subset.
pub fn probe_hit(model: &SubsetModel, family: ProbeFamily, j: u64, limits: &ProbeLimits) -> Result<bool> {
    let report = probe_hits(model, family, j..j + 1, limits)?;
    if report.truncated_at.is_some() {
        return Err(Error::Resource {
            what: format!("{family} probe j={j}"),
            needed: j,
            limit_name: "big-integer bits",
            limit: limits.max_bits,
        });
    }
    Ok(!report.hits.is_empty())
}

/// Number of pairwise-disjoint probe copies found in `range`.
pub fn disjoint_probe_count(
    model: &SubsetModel,
    family: ProbeFamily,
    range: Range<u64>,
    limits: &ProbeLimits,
) -> Result<u64> {
    Ok(probe_hits(model, family, range, limits)?.hits.len() as u64)
}

/// True iff the listed probes have pairwise-disjoint element sets.
pub fn audit_disjoint(family: ProbeFamily, js: &[u64], limits: &ProbeLimits) -> Result<bool> {
    let mut all = Vec::new();
    for &j in js {
        all.extend(family.probe(j, limits)?.elements);
    }
    all.sort_unstable();
    Ok(all.windows(2).all(|w| w[0] != w[1]))
}

/// Re-checks every element of every reported hit with the generic oracle.
pub fn verify_hits(model: &SubsetModel, report: &ProbeHitReport, limits: &ProbeLimits) -> Result<bool> {
    for &j in &report.hits {
        for e in report.family.probe(j, limits)?.elements {
            if !model.contains(&e)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Default attempt cap for [`min_element_probe`]: `ceil(50 / p^R)`.
pub fn default_attempt_cap(p: f64, probe_size: u64) -> u64 {
    let cap = (50.0 / p.powf(probe_size as f64)).ceil();
    if cap.is_finite() && cap < 1e18 {
        cap as u64
    } else {
        1_000_000_000_000_000_000
    }
}

/// Scans `j` upward from the first probe lying entirely above `m` until a hit
/// or until `max_attempts` probes were tried.
pub fn min_element_probe(
    model: &SubsetModel,
    family: ProbeFamily,
    m: &BigUint,
    max_attempts: Option<u64>,
    limits: &ProbeLimits,
) -> Result<MinElementSearch> {
    if m.bits() == 0 {
        return Err(Error::domain("threshold M must be >= 1"));
    }
    family.validate(limits)?;
    let start_j = family.first_index_above(m)?.max(family.first_index());
    let cap = max_attempts.unwrap_or_else(|| default_attempt_cap(model.p(), family.size()));
    let mut attempts = 0;
    let mut scanner = AdditiveScanner::new(model, family.len());
    let mut j = start_j;
    while attempts < cap {
        attempts += 1;
        let hit = match family {
            ProbeFamily::Fs { len } => {
                if (len as u64) * j + len as u64 > limits.max_bits {
                    break;
                }
                scanner.hit(j)
            }
            ProbeFamily::Fp { .. } => probe_hit(model, family, j, limits)?,
        };
        if hit {
            return Ok(MinElementSearch {
                start_j,
                attempts,
                hit_j: Some(j),
                probe: Some(family.probe(j, limits)?),
            });
        }
        j += 1;
    }
    Ok(MinElementSearch { start_j, attempts, hit_j: None, probe: None })
}

/// A set of positive integers that a sumset search can query.
pub trait Membership {
    fn is_member(&self, n: u64) -> bool;

    /// Smallest member in `[from..=bound]`.
    fn next_member(&self, from: u64, bound: u64) -> Option<u64> {
        (from.max(1)..=bound).find(|&n| self.is_member(n))
    }
}

impl Membership for DenseSample {
    fn is_member(&self, n: u64) -> bool {
        self.contains(n)
    }

    fn next_member(&self, from: u64, bound: u64) -> Option<u64> {
        DenseSample::next_member(self, from).filter(|&x| x <= bound)
    }
}

/// Depth-first extension of `prefix` to a `len`-tuple whose nonempty subset
/// sums all lie in `set` and in `[1..bound]`. `sums` holds the subset sums of
/// `prefix` (with multiplicity). Candidates are tried in increasing order, so
/// the first success is the lexicographically least extension.
pub fn extend_fs_witness<M: Membership + ?Sized>(
    set: &M,
    bound: u64,
    len: usize,
    prefix: &mut Vec<u64>,
    sums: &mut Vec<u64>,
) -> bool {
    let depth = prefix.len();
    if depth == len {
        return true;
    }
    let total: u64 = prefix.iter().sum();
    // every later element exceeds x, so the final total is at least
    // total + (rest + 1) x + rest (rest + 1) / 2
    let rest = (len - depth - 1) as u64;
    let mut from = prefix.last().map_or(1, |&v| v + 1);
    while let Some(x) = set.next_member(from, bound) {
        let floor = (rest + 1)
            .checked_mul(x)
            .and_then(|v| v.checked_add(total + rest * (rest + 1) / 2));
        if floor.is_none_or(|f| f > bound) {
            break;
        }
        let old = sums.len();
        let ok = sums[..old].iter().all(|&s| set.is_member(s + x));
        if ok {
            sums.push(x);
            for i in 0..old {
                let v = sums[i] + x;
                sums.push(v);
            }
            prefix.push(x);
            if extend_fs_witness(set, bound, len, prefix, sums) {
                return true;
            }
            prefix.pop();
            sums.truncate(old);
        }
        from = x + 1;
    }
    false
}

/// Lexicographically least `x_1 < ... < x_len <= search_bound` with
/// `FS(x_1..x_len)` inside the sample.
pub fn find_fs(sample: &DenseSample, len: u32, search_bound: u64) -> Result<Option<Vec<u64>>> {
    if len == 0 || len > MAX_SEARCH_LEN {
        return Err(Error::Size { what: "sumset search length", got: len as u64, limit: MAX_SEARCH_LEN as u64 });
    }
    if search_bound > sample.bound() {
        return Err(Error::domain(format!(
            "search bound {search_bound} exceeds sample bound {}",
            sample.bound()
        )));
    }
    let mut prefix = Vec::with_capacity(len as usize);
    let mut sums = Vec::with_capacity((1 << len) - 1);
    Ok(extend_fs_witness(sample, search_bound, len as usize, &mut prefix, &mut sums).then_some(prefix))
}

/// Sample bound needed to count quadruples over `[1..n]^2`.
pub fn quadruple_universe(n: u64) -> u64 {
    (2 * n).max(n * n)
}

fn check_quadruple_bound(sample: &DenseSample, n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("quadruple range N must be >= 1"));
    }
    let need = quadruple_universe(n);
    if sample.bound() < need {
        return Err(Error::domain(format!(
            "sample bound {} too small: counting quadruples up to N={n} needs max(2N, N^2) = {need}",
            sample.bound()
        )));
    }
    Ok(())
}

#[inline]
fn quadruple_in(sample: &DenseSample, x: u64, y: u64) -> bool {
    sample.contains(x) && sample.contains(y) && sample.contains(x + y) && sample.contains(x * y)
}

fn quadruple_row(sample: &DenseSample, x: u64, n: u64, cap: usize) -> (u64, Vec<(u64, u64)>) {
    let mut count = 0;
    let mut witnesses = Vec::new();
    let mut y = 1;
    while let Some(m) = Membership::next_member(sample, y, n) {
        if sample.contains(x + m) && sample.contains(x * m) {
            count += 1;
            if witnesses.len() < cap {
                witnesses.push((x, m));
            }
        }
        y = m + 1;
    }
    (count, witnesses)
}

/// `X_N`: the number of ordered pairs `(x, y)` in `[1..n]^2` whose distinct
/// quadruple elements all lie in the sample.
pub fn count_quadruples(sample: &DenseSample, n: u64, witness_cap: usize) -> Result<QuadrupleCount> {
    check_quadruple_bound(sample, n)?;
    let xs: Vec<u64> = sample.members().take_while(|&x| x <= n).collect();
    let row = |&x: &u64| quadruple_row(sample, x, n, witness_cap);
    let rows: Vec<(u64, Vec<(u64, u64)>)> = if xs.len() < 64 {
        xs.iter().map(row).collect()
    } else {
        xs.par_iter().map(row).collect()
    };
    let mut count = 0;
    let mut witnesses = Vec::new();
    for (c, w) in rows {
        count += c;
        let room = witness_cap - witnesses.len();
        witnesses.extend(w.into_iter().take(room));
    }
    Ok(QuadrupleCount { n, count, witnesses })
}

/// Whether `X_N > 0`, stopping at the first witness.
pub fn has_quadruple(sample: &DenseSample, n: u64) -> Result<bool> {
    check_quadruple_bound(sample, n)?;
    let xs: Vec<u64> = sample.members().take_while(|&x| x <= n).collect();
    Ok(xs.iter().any(|&x| xs.iter().any(|&y| quadruple_in(sample, x, y))))
}
