//! Monte Carlo estimators, exact small-universe oracles and second-moment
//! diagnostics.
//!
//! Every Monte Carlo trial `t` draws its subset from the model with seed
//! `seed_base + t` (wrapping), so experiments are reproducible and trials can
//! be split across workers and merged by adding counts.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::detect::{self, quadruple_universe};
use crate::error::{Error, Result};
use crate::model::{MemoryBudget, SubsetModel};
use crate::patterns::{quadruple_values, PatternInstance, ProbeFamily, ProbeLimits};

/// Normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.96;

/// Probe index tested by [`estimate_event_prob`].
pub const EVENT_PROBE_INDEX: u64 = 1;

/// Largest universe `[1..U]` enumerated exactly (2^24 subsets).
pub const MAX_EXACT_UNIVERSE: u64 = 24;

/// A binomial proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub trials: u64,
    pub successes: u64,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    pub fn from_counts(successes: u64, trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::domain("an estimate needs at least one trial"));
        }
        if successes > trials {
            return Err(Error::domain(format!("{successes} successes out of {trials} trials")));
        }
        let n = trials as f64;
        let point = successes as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (point + z2 / (2.0 * n)) / denom;
        let half = Z95 / denom * (point * (1.0 - point) / n + z2 / (4.0 * n * n)).sqrt();
        let lo = (center - half).clamp(0.0, 1.0).min(point);
        let hi = (center + half).clamp(0.0, 1.0).max(point);
        Ok(Estimate { trials, successes, point, lo, hi })
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    /// Pools two independent batches of trials.
    pub fn merge(&self, other: &Estimate) -> Estimate {
        Estimate::from_counts(self.successes + other.successes, self.trials + other.trials)
            .expect("merged counts stay consistent")
    }
}

/// Counts trials `t in 0..trials` for which `trial(t)` succeeds.
fn count_successes<F>(trials: u64, trial: F) -> Result<u64>
where
    F: Fn(u64) -> Result<bool> + Sync + Send,
{
    (0..trials)
        .into_par_iter()
        .map(|t| trial(t).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

fn trial_model(p: f64, seed_base: u64, t: u64) -> Result<SubsetModel> {
    SubsetModel::new(p, seed_base.wrapping_add(t))
}

/// Estimates `P(E_j) = p^R` with one independent model per trial, each
/// testing probe `j = EVENT_PROBE_INDEX`.
pub fn estimate_event_prob(
    family: ProbeFamily,
    p: f64,
    trials: u64,
    seed_base: u64,
    limits: &ProbeLimits,
) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::domain("trial count must be >= 1"));
    }
    family.validate(limits)?;
    SubsetModel::new(p, seed_base)?;
    let successes = count_successes(trials, |t| {
        detect::probe_hit(&trial_model(p, seed_base, t)?, family, EVENT_PROBE_INDEX, limits)
    })?;
    Estimate::from_counts(successes, trials)
}

/// Estimates the probability that every element of `instance` lies in the
/// subset, one independent model per trial.
pub fn estimate_instance_prob(instance: &PatternInstance, p: f64, trials: u64, seed_base: u64) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::domain("trial count must be >= 1"));
    }
    SubsetModel::new(p, seed_base)?;
    let successes = count_successes(trials, |t| {
        let model = trial_model(p, seed_base, t)?;
        for e in &instance.elements {
            if !model.contains(e)? {
                return Ok(false);
            }
        }
        Ok(true)
    })?;
    Estimate::from_counts(successes, trials)
}

/// Converts a binary floating-point probability to the exact rational it denotes.
pub fn rational_from_f64(p: f64) -> Result<BigRational> {
    BigRational::from_float(p).ok_or_else(|| Error::domain(format!("{p} is not a finite number")))
}

/// Parses a decimal such as `0.3` or `1/3` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let bad = || Error::domain(format!("cannot parse {text:?} as a rational number"));
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    if (int.is_empty() && frac.is_empty()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let n: BigInt = digits.parse().map_err(|_| bad())?;
    Ok(BigRational::new(n, BigInt::from(10u8).pow(frac.len() as u32)))
}

fn check_unit_interval(p: &BigRational) -> Result<()> {
    if p.is_negative() || *p > BigRational::one() {
        return Err(Error::domain(format!("probability {p} outside [0,1]")));
    }
    Ok(())
}

fn rpow(base: &BigRational, exp: u64) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact `E[X_N]` against the idealized `p^4 N^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadrupleExpectation {
    pub n: u64,
    #[serde(serialize_with = "crate::serde_util::ratio")]
    pub p: BigRational,
    /// Ordered pairs whose quadruple has 2, 3 and 4 distinct values.
    pub pairs_by_distinct: [u64; 3],
    #[serde(serialize_with = "crate::serde_util::ratio")]
    pub exact: BigRational,
    #[serde(serialize_with = "crate::serde_util::ratio")]
    pub formula: BigRational,
    /// `exact - formula`, carried entirely by pairs with `x = y`, `x = 1` or `y = 1`.
    #[serde(serialize_with = "crate::serde_util::ratio")]
    pub correction: BigRational,
}

/// `E[X_N] = sum over (x, y) in [1..N]^2 of p^d(x, y)` with `d` the number of
/// distinct values in `{x, y, x+y, xy}`.
pub fn expected_quadruples_exact(n: u64, p: &BigRational) -> Result<QuadrupleExpectation> {
    if n == 0 {
        return Err(Error::domain("N must be >= 1"));
    }
    check_unit_interval(p)?;
    // Values coincide only when x = y, x = 1 or y = 1; every other pair has d = 4.
    let mut by = [0u64; 3];
    let mut special = 0u64;
    let mut tally = |x: u64, y: u64| {
        by[quadruple_values(x, y).1 - 2] += 1;
        special += 1;
    };
    for k in 1..=n {
        tally(1, k);
    }
    for k in 2..=n {
        tally(k, 1);
        tally(k, k);
    }
    by[2] += n * n - special;
    let exact = rpow(p, 2) * BigInt::from(by[0])
        + rpow(p, 3) * BigInt::from(by[1])
        + rpow(p, 4) * BigInt::from(by[2]);
    let formula = rpow(p, 4) * BigInt::from(n) * BigInt::from(n);
    let correction = &exact - &formula;
    Ok(QuadrupleExpectation { n, p: p.clone(), pairs_by_distinct: by, exact, formula, correction })
}

/// Moments of `X_N` computed by enumerating every subset of `[1..U]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactMoments {
    pub n: u64,
    pub universe: u64,
    #[serde(serialize_with = "crate::serde_util::ratio")]
    pub p: BigRational,
    #[serde(serialize_with = "crate::serde_util::ratio")]
    pub ex: BigRational,
    #[serde(serialize_with = "crate::serde_util::ratio")]
    pub ex2: BigRational,
    #[serde(serialize_with = "crate::serde_util::ratio")]
    pub px_pos: BigRational,
    /// `(E X)^2 / E X^2`, zero when `E X^2 = 0`.
    #[serde(serialize_with = "crate::serde_util::ratio")]
    pub pz_ratio: BigRational,
    /// `E X^2 - (E X)^2`.
    #[serde(serialize_with = "crate::serde_util::ratio")]
    pub variance: BigRational,
    pub pz_holds: bool,
}

/// Exact `E[X_N]`, `E[X_N^2]` and `P(X_N > 0)` over the universe
/// `[1..max(2N, N^2)]`, which must have at most 24 elements.
pub fn exact_small_universe(n: u64, p: &BigRational) -> Result<ExactMoments> {
    if n == 0 {
        return Err(Error::domain("N must be >= 1"));
    }
    check_unit_interval(p)?;
    let universe = quadruple_universe(n);
    if universe > MAX_EXACT_UNIVERSE {
        return Err(Error::domain(format!(
            "universe [1..{universe}] exceeds the exact enumeration cap of {MAX_EXACT_UNIVERSE}; \
             use the Monte Carlo estimator instead"
        )));
    }
    let pair_masks: Vec<u32> = (1..=n)
        .flat_map(|x| (1..=n).map(move |y| (x, y)))
        .map(|(x, y)| {
            let (v, d) = quadruple_values(x, y);
            v[..d].iter().fold(0u32, |m, &e| m | 1 << (e - 1))
        })
        .collect();
    let max_x = pair_masks.len();
    let u = universe as usize;
    // table[k][x]: subsets of size k with X = x
    let table = (0u32..1 << u)
        .into_par_iter()
        .with_min_len(1 << 12)
        .fold(
            || vec![vec![0u64; max_x + 1]; u + 1],
            |mut acc, mask| {
                let x = pair_masks.iter().filter(|&&pm| pm & !mask == 0).count();
                acc[mask.count_ones() as usize][x] += 1;
                acc
            },
        )
        .reduce(
            || vec![vec![0u64; max_x + 1]; u + 1],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(b) {
                    for (ca, cb) in ra.iter_mut().zip(rb) {
                        *ca += cb;
                    }
                }
                a
            },
        );
    let q = BigRational::one() - p;
    let (mut ex, mut ex2, mut px_pos) = (BigRational::zero(), BigRational::zero(), BigRational::zero());
    for (k, row) in table.iter().enumerate() {
        let w = rpow(p, k as u64) * rpow(&q, (u - k) as u64);
        let (mut s1, mut s2, mut s0) = (0u64, 0u64, 0u64);
        for (x, &c) in row.iter().enumerate() {
            let x = x as u64;
            s1 += c * x;
            s2 += c * x * x;
            if x > 0 {
                s0 += c;
            }
        }
        ex += &w * BigInt::from(s1);
        ex2 += &w * BigInt::from(s2);
        px_pos += &w * BigInt::from(s0);
    }
    let pz_ratio = if ex2.is_zero() { BigRational::zero() } else { &ex * &ex / &ex2 };
    let variance = &ex2 - &ex * &ex;
    let pz_holds = pz_ratio <= px_pos;
    Ok(ExactMoments { n, universe, p: p.clone(), ex, ex2, px_pos, pz_ratio, variance, pz_holds })
}

/// Sample moments of `X_N` over independent materialized subsets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloMoments {
    pub n: u64,
    pub p: f64,
    pub trials: u64,
    pub mean: f64,
    pub mean_sq: f64,
    /// Standard error of `mean`.
    pub std_err: f64,
    pub px_pos: Estimate,
    /// Plug-in Paley-Zygmund bound `mean^2 / mean_sq`.
    pub pz_lower_bound: f64,
}

pub fn quadruple_moments_mc(
    n: u64,
    p: f64,
    trials: u64,
    seed_base: u64,
    budget: MemoryBudget,
) -> Result<MonteCarloMoments> {
    if trials == 0 {
        return Err(Error::domain("trial count must be >= 1"));
    }
    let universe = quadruple_universe(n.max(1));
    budget.check_bits(universe, &format!("dense sample over [1..{universe}]"))?;
    SubsetModel::new(p, seed_base)?;
    let (s0, s1, s2) = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(u64, u128, u128)> {
            let sample = trial_model(p, seed_base, t)?.materialize(universe, budget)?;
            let x = detect::count_quadruples(&sample, n, 0)?.count as u128;
            Ok(((x > 0) as u64, x, x * x))
        })
        .try_reduce(|| (0, 0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2)))?;
    let m = trials as f64;
    let mean = s1 as f64 / m;
    let mean_sq = s2 as f64 / m;
    let var = if trials > 1 { (mean_sq - mean * mean).max(0.0) * m / (m - 1.0) } else { 0.0 };
    Ok(MonteCarloMoments {
        n,
        p,
        trials,
        mean,
        mean_sq,
        std_err: (var / m).sqrt(),
        px_pos: Estimate::from_counts(s0, trials)?,
        pz_lower_bound: if mean_sq > 0.0 { mean * mean / mean_sq } else { 0.0 },
    })
}

/// Fraction of independent samples with `X_N > 0`.
pub fn estimate_px_pos(n: u64, p: f64, trials: u64, seed_base: u64, budget: MemoryBudget) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::domain("trial count must be >= 1"));
    }
    if n == 0 {
        return Err(Error::domain("N must be >= 1"));
    }
    let universe = quadruple_universe(n);
    budget.check_bits(universe, &format!("dense sample over [1..{universe}]"))?;
    SubsetModel::new(p, seed_base)?;
    let successes = count_successes(trials, |t| {
        let sample = trial_model(p, seed_base, t)?.materialize(universe, budget)?;
        detect::has_quadruple(&sample, n)
    })?;
    Estimate::from_counts(successes, trials)
}

/// Second-moment summary: the exact formula always, the enumeration oracle
/// when the universe is small enough and requested, Monte Carlo otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondMomentReport {
    pub n: u64,
    pub p: f64,
    pub expectation: QuadrupleExpectation,
    pub exact: Option<ExactMoments>,
    pub monte_carlo: Option<MonteCarloMoments>,
    /// Exact Paley-Zygmund ratio when enumerated, the plug-in bound otherwise.
    pub pz_lower_bound: f64,
}

pub fn second_moment_report(
    n: u64,
    p: &BigRational,
    exact: bool,
    trials: u64,
    seed_base: u64,
    budget: MemoryBudget,
) -> Result<SecondMomentReport> {
    let pf = ratio_to_f64(p);
    let expectation = expected_quadruples_exact(n, p)?;
    let exact = if exact { Some(exact_small_universe(n, p)?) } else { None };
    let monte_carlo = if trials > 0 {
        Some(quadruple_moments_mc(n, pf, trials, seed_base, budget)?)
    } else {
        None
    };
    let pz_lower_bound = match (&exact, &monte_carlo) {
        (Some(e), _) => ratio_to_f64(&e.pz_ratio),
        (None, Some(m)) => m.pz_lower_bound,
        (None, None) => return Err(Error::domain("request the exact oracle or at least one trial")),
    };
    Ok(SecondMomentReport { n, p: pf, expectation, exact, monte_carlo, pz_lower_bound })
}

/// Bisection settings for [`threshold_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub target: f64,
    pub tolerance: f64,
    pub initial: (f64, f64),
    /// Fallback bracket is `(epsilon, 1 - epsilon)`.
    pub epsilon: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { target: 0.5, tolerance: 0.01, initial: (0.01, 0.99), epsilon: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub len: u32,
    pub n: u64,
    pub trials: u64,
    pub config: SweepConfig,
    pub lo: f64,
    pub hi: f64,
    pub est_lo: Estimate,
    pub est_hi: Estimate,
    pub bracketed: bool,
    pub widened: bool,
    pub evaluations: u32,
}

impl ThresholdReport {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Whether the subset drawn with `(p, seed)` contains an FS-set of length
/// `len` inside `[1..n]`.
pub fn fs_success(len: u32, n: u64, p: f64, seed: u64, budget: MemoryBudget) -> Result<bool> {
    let sample = SubsetModel::new(p, seed)?.materialize(n, budget)?;
    Ok(detect::find_fs(&sample, len, n)?.is_some())
}

/// Largest sumset length [`threshold_sweep`] accepts.
pub const MAX_SWEEP_LEN: u32 = 4;

/// Bisection for the `p` at which an FS-set of length `len` appears in
/// `[1..n]` with probability `target`. Trial `t` uses seed `seed_base + t` at
/// every `p`, so each trial's success indicator is monotone in `p`.
pub fn threshold_sweep(
    len: u32,
    n: u64,
    trials: u64,
    seed_base: u64,
    config: SweepConfig,
    budget: MemoryBudget,
) -> Result<ThresholdReport> {
    if len == 0 || len > MAX_SWEEP_LEN {
        return Err(Error::Size { what: "sweep sumset length", got: len as u64, limit: MAX_SWEEP_LEN as u64 });
    }
    if n == 0 || trials == 0 {
        return Err(Error::domain("N and trial count must be >= 1"));
    }
    if !(config.target > 0.0 && config.target < 1.0) || config.tolerance.is_nan() || config.tolerance <= 0.0 {
        return Err(Error::domain("target must lie in (0,1) and tolerance must be positive"));
    }
    if !(config.epsilon > 0.0 && config.epsilon < 0.5) {
        return Err(Error::domain("epsilon must lie in (0, 0.5)"));
    }
    budget.check_bits(n, &format!("dense sample over [1..{n}]"))?;
    let mut evaluations = 0u32;
    let mut rate = |p: f64| -> Result<Estimate> {
        evaluations += 1;
        let s = count_successes(trials, |t| fs_success(len, n, p, seed_base.wrapping_add(t), budget))?;
        Estimate::from_counts(s, trials)
    };
    let (mut lo, mut hi) = config.initial;
    let valid = 0.0 < lo && lo < hi && hi < 1.0;
    let (mut est_lo, mut est_hi);
    let mut widened = false;
    if valid {
        est_lo = rate(lo)?;
        est_hi = rate(hi)?;
    } else {
        est_lo = Estimate::from_counts(0, 1)?;
        est_hi = est_lo;
    }
    if !valid || !(est_lo.point < config.target && est_hi.point >= config.target) {
        widened = true;
        lo = config.epsilon;
        hi = 1.0 - config.epsilon;
        est_lo = rate(lo)?;
        est_hi = rate(hi)?;
    }
    let bracketed = est_lo.point < config.target && est_hi.point >= config.target;
    if bracketed {
        while hi - lo >= config.tolerance {
            let mid = 0.5 * (lo + hi);
            let est = rate(mid)?;
            if est.point >= config.target {
                hi = mid;
                est_hi = est;
            } else {
                lo = mid;
                est_lo = est;
            }
        }
    }
    Ok(ThresholdReport { len, n, trials, config, lo, hi, est_lo, est_hi, bracketed, widened, evaluations })
}

/// One CSV row for an estimated proportion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub experiment: String,
    pub parameters: String,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub successes: u64,
    pub trials: u64,
    /// Left empty unless timing is requested, so repeated runs stay byte-identical.
    pub wall_time_s: Option<f64>,
}

impl EstimateRow {
    pub fn new(experiment: &str, parameters: String, est: &Estimate) -> Self {
        EstimateRow {
            experiment: experiment.to_string(),
            parameters,
            point: est.point,
            lo: est.lo,
            hi: est.hi,
            successes: est.successes,
            trials: est.trials,
            wall_time_s: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DenseSample;

    fn rat(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    /// Brute force over every subset of `[1..U]` with exact weights,
    /// counting quadruples by the plain double loop.
    fn brute_moments(n: u64, p: &BigRational) -> (BigRational, BigRational, BigRational) {
        let u = quadruple_universe(n);
        let q = BigRational::one() - p;
        let (mut e1, mut e2, mut e0) = (BigRational::zero(), BigRational::zero(), BigRational::zero());
        for mask in 0u64..1 << u {
            let s = DenseSample::from_mask(u, mask);
            let mut x = 0u64;
            for a in 1..=n {
                for b in 1..=n {
                    if [a, b, a + b, a * b].iter().all(|&e| s.contains(e)) {
                        x += 1;
                    }
                }
            }
            let k = mask.count_ones() as u64;
            let w = rpow(p, k) * rpow(&q, u - k);
            e1 += &w * BigInt::from(x);
            e2 += &w * BigInt::from(x * x);
            if x > 0 {
                e0 += w;
            }
        }
        (e1, e2, e0)
    }

    #[test]
    fn wilson_interval_properties() {
        let e = Estimate::from_counts(0, 10).unwrap();
        assert_eq!(e.lo, 0.0);
        assert!(e.hi > 0.2 && e.hi < 0.35);
        let e = Estimate::from_counts(10, 10).unwrap();
        assert_eq!(e.hi, 1.0);
        let e = Estimate::from_counts(5, 10).unwrap();
        assert!((e.lo - 0.2366).abs() < 1e-4 && (e.hi - 0.7634).abs() < 1e-4);
        let narrow = Estimate::from_counts(500, 1000).unwrap();
        assert!(narrow.hi - narrow.lo < e.hi - e.lo);
        assert!(Estimate::from_counts(0, 0).is_err());
        assert!(Estimate::from_counts(3, 2).is_err());
        let m = Estimate::from_counts(3, 10).unwrap().merge(&Estimate::from_counts(4, 10).unwrap());
        assert_eq!((m.successes, m.trials), (7, 20));
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(rat("0.3"), BigRational::new(3.into(), 10.into()));
        assert_eq!(rat("1/3"), BigRational::new(1.into(), 3.into()));
        assert_eq!(rat(".5"), BigRational::new(1.into(), 2.into()));
        assert_eq!(rat("1"), BigRational::one());
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("0.-1").is_err());
    }

    #[test]
    fn expectation_single_pair() {
        let e = expected_quadruples_exact(1, &rat("0.5")).unwrap();
        assert_eq!(e.exact, rat("0.25"));
        assert_eq!(e.formula, rat("0.0625"));
        assert_eq!(e.pairs_by_distinct, [1, 0, 0]);
    }

    #[test]
    fn expectation_at_probability_one_is_n_squared() {
        for n in [1u64, 5, 40] {
            let e = expected_quadruples_exact(n, &BigRational::one()).unwrap();
            assert_eq!(e.exact, BigRational::from_integer(BigInt::from(n * n)));
            assert_eq!(e.exact, e.formula);
        }
    }

    #[test]
    fn distinct_counts_match_direct_classification() {
        for n in 1..=60u64 {
            let mut by = [0u64; 3];
            for x in 1..=n {
                for y in 1..=n {
                    by[quadruple_values(x, y).1 - 2] += 1;
                }
            }
            assert_eq!(expected_quadruples_exact(n, &rat("0.5")).unwrap().pairs_by_distinct, by, "N={n}");
        }
    }

    #[test]
    fn correction_is_linear_in_n() {
        // only the 3N - 2 special pairs deviate, each by less than 1
        let p = rat("0.3");
        for n in [10u64, 100, 1000] {
            let e = expected_quadruples_exact(n, &p).unwrap();
            assert!(e.correction.abs() <= BigRational::from_integer(BigInt::from(3 * n - 2)));
        }
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for n in 1..=3u64 {
            for p in ["0.3", "0.5", "0.7"] {
                let p = rat(p);
                let m = exact_small_universe(n, &p).unwrap();
                let (e1, e2, e0) = brute_moments(n, &p);
                assert_eq!(m.ex, e1);
                assert_eq!(m.ex2, e2);
                assert_eq!(m.px_pos, e0);
                assert_eq!(m.ex, expected_quadruples_exact(n, &p).unwrap().exact);
            }
        }
    }

    #[test]
    fn enumeration_n1_is_p_squared() {
        let p = rat("0.37");
        let m = exact_small_universe(1, &p).unwrap();
        assert_eq!(m.px_pos, &p * &p);
        assert_eq!(m.universe, 2);
    }

    #[test]
    fn paley_zygmund_exact_at_n4() {
        for p in ["0.3", "0.5", "0.7"] {
            let m = exact_small_universe(4, &rat(p)).unwrap();
            assert!(m.pz_holds);
            assert!(m.pz_ratio <= m.px_pos);
            assert_eq!(m.ex, expected_quadruples_exact(4, &rat(p)).unwrap().exact);
        }
    }

    #[test]
    fn enumeration_rejects_large_universe() {
        assert!(matches!(exact_small_universe(5, &rat("0.5")), Err(Error::Domain(_))));
        assert!(exact_small_universe(0, &rat("0.5")).is_err());
        assert!(exact_small_universe(2, &rat("1.5")).is_err());
    }

    #[test]
    fn event_probability_near_one() {
        let e = estimate_event_prob(ProbeFamily::Fs { len: 3 }, 1.0 - f64::EPSILON / 2.0, 2000, 1, &ProbeLimits::default())
            .unwrap();
        assert_eq!(e.point, 1.0);
    }

    #[test]
    fn px_pos_near_one_and_monotone_in_n() {
        let b = MemoryBudget::default();
        let e = estimate_px_pos(3, 1.0 - f64::EPSILON / 2.0, 500, 3, b).unwrap();
        assert_eq!(e.point, 1.0);
        let pts: Vec<u64> = [10u64, 20, 40]
            .iter()
            .map(|&n| estimate_px_pos(n, 0.3, 400, 77, b).unwrap().successes)
            .collect();
        assert!(pts.windows(2).all(|w| w[0] <= w[1]), "{pts:?}");
        // trial by trial as well
        for t in 0..200u64 {
            let m = SubsetModel::new(0.05, 900 + t).unwrap();
            let s = m.materialize(1600, b).unwrap();
            let a = detect::has_quadruple(&s, 10).unwrap();
            let c = detect::has_quadruple(&s, 40).unwrap();
            assert!(!a || c);
        }
    }

    #[test]
    fn monte_carlo_moments_agree_with_exact_at_small_n() {
        let b = MemoryBudget::default();
        let mc = quadruple_moments_mc(3, 0.5, 20_000, 11, b).unwrap();
        let ex = exact_small_universe(3, &rat("0.5")).unwrap();
        assert!((mc.mean - ratio_to_f64(&ex.ex)).abs() <= 4.0 * mc.std_err);
        let px = ratio_to_f64(&ex.px_pos);
        assert!((mc.px_pos.point - px).abs() <= 4.0 * (px * (1.0 - px) / 20_000.0).sqrt());
    }

    #[test]
    fn threshold_single_element_closed_form() {
        let n = 100u64;
        let trials = 4000;
        let cfg = SweepConfig { tolerance: 1e-4, initial: (0.001, 0.05), ..SweepConfig::default() };
        let r = threshold_sweep(1, n, trials, 5, cfg, MemoryBudget::default()).unwrap();
        assert!(r.bracketed && !r.widened);
        let exact = 1.0 - 2f64.powf(-1.0 / n as f64);
        assert!((exact - 0.00691).abs() < 1e-5);
        // success probability has slope about N/2 at the threshold
        let slack = 4.0 * (0.25 / trials as f64).sqrt() / (n as f64 * 0.5);
        assert!((r.midpoint() - exact).abs() <= cfg.tolerance + slack, "mid {} vs {exact}", r.midpoint());
        assert!(r.est_lo.point < 0.5 && r.est_hi.point >= 0.5);
    }

    #[test]
    fn instance_probability_matches_power() {
        let inst = crate::patterns::exp_probe(1, &ProbeLimits::default()).unwrap();
        assert_eq!(inst.elements.len(), 4);
        let e = estimate_instance_prob(&inst, 0.6, 50_000, 8).unwrap();
        let target = 0.6f64.powi(4);
        assert!((e.point - target).abs() < 4.0 * (target * (1.0 - target) / 5e4).sqrt());
        // agrees with the probe scanner on additive probes
        let limits = ProbeLimits::default();
        let fam = ProbeFamily::Fs { len: 2 };
        let a = estimate_instance_prob(&fam.probe(EVENT_PROBE_INDEX, &limits).unwrap(), 0.5, 3000, 4).unwrap();
        let b = estimate_event_prob(fam, 0.5, 3000, 4, &limits).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn px_pos_matches_exact_at_n4() {
        let e = estimate_px_pos(4, 0.5, 100_000, crate::model::DEFAULT_SEED, MemoryBudget::default()).unwrap();
        let exact = ratio_to_f64(&exact_small_universe(4, &rat("0.5")).unwrap().px_pos);
        assert!(e.contains(exact), "{e:?} vs {exact}");
    }

    #[test]
    fn threshold_pairs_at_n1000_reaches_width() {
        let r = threshold_sweep(2, 1000, 200, 3, SweepConfig::default(), MemoryBudget::default()).unwrap();
        assert!(r.bracketed && r.hi - r.lo < 0.01);
    }

    #[test]
    fn threshold_widens_a_bad_bracket() {
        let cfg = SweepConfig { initial: (0.5, 0.9), ..SweepConfig::default() };
        let r = threshold_sweep(2, 200, 100, 1, cfg, MemoryBudget::default()).unwrap();
        assert!(r.widened && r.bracketed);
        assert!(r.hi - r.lo < 0.01);
        assert!(threshold_sweep(5, 200, 10, 1, SweepConfig::default(), MemoryBudget::default()).is_err());
    }

    #[test]
    fn sweep_successes_are_monotone_per_trial() {
        let b = MemoryBudget::default();
        let ps = [0.005, 0.01, 0.02, 0.04, 0.08, 0.16];
        for t in 0..60u64 {
            let flags: Vec<bool> = ps.iter().map(|&p| fs_success(2, 300, p, 40 + t, b).unwrap()).collect();
            assert!(flags.windows(2).all(|w| !w[0] || w[1]), "trial {t}: {flags:?}");
        }
    }
}
