//! Acceptance criteria. Each test prints one PASS/FAIL line to stderr
//! (uncaptured) and then asserts the verdict.

use std::io::Write;
use std::time::{Duration, Instant};

use hindlab_core::clt::{self, CltConfig, YFamily};
use hindlab_core::detect::{self, quadruple_universe};
use hindlab_core::model::{splitmix64, DenseSample, MemoryBudget, SubsetModel, DEFAULT_SEED};
use hindlab_core::patterns::{self, ProbeFamily, ProbeLimits};
use hindlab_core::stats::{self, parse_rational};
use num_rational::BigRational;

fn report(id: u32, title: &str, limit: Option<Duration>, body: impl FnOnce() -> (bool, String)) {
    let start = Instant::now();
    let (ok, detail) = body();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = ok && in_time;
    let budget = limit.map_or(String::new(), |l| format!(" / {:.0}s", l.as_secs_f64()));
    let line = format!(
        "criterion {id:>2} [{}] {title}: {detail} ({:.2}s{budget})\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
    );
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(ok, "criterion {id} failed: {detail}");
    assert!(in_time, "criterion {id} exceeded its runtime limit: {elapsed:?}");
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn rat(s: &str) -> BigRational {
    parse_rational(s).unwrap()
}

#[test]
fn criterion_01_probe_event_probability() {
    let limits = ProbeLimits::default();
    for (len, p, target) in [(2u32, 0.5f64, 0.125f64), (3, 0.7, 0.7f64.powi(7))] {
        report(1, &format!("P(E_j) = p^R for L={len}, p={p}"), secs(10), || {
            let e = stats::estimate_event_prob(ProbeFamily::Fs { len }, p, 100_000, DEFAULT_SEED, &limits).unwrap();
            (e.contains(target), format!("target {target:.5}, estimate {:.5} in [{:.5}, {:.5}]", e.point, e.lo, e.hi))
        });
    }
}

#[test]
fn criterion_02_probe_hits_and_disjointness() {
    report(2, "hits over j in [0, 2000) and disjointness audit", secs(5), || {
        let limits = ProbeLimits::default();
        let family = ProbeFamily::Fs { len: 2 };
        let model = SubsetModel::new(0.5, DEFAULT_SEED).unwrap();
        let r = detect::probe_hits(&model, family, 0..2000, &limits).unwrap();
        let hits = r.hits.len() as i64;
        let disjoint = detect::audit_disjoint(family, &r.hits, &limits).unwrap();
        let verified = detect::verify_hits(&model, &r, &limits).unwrap();
        (
            (hits - 250).abs() <= 45 && disjoint && verified && r.truncated_at.is_none(),
            format!("{hits} hits (250 +- 45), disjoint {disjoint}, re-verified {verified}"),
        )
    });
}

#[test]
fn criterion_03_quadruple_expectation() {
    report(3, "E[X_4] exact vs formula vs Monte Carlo, O(N) correction", secs(60), || {
        let p = rat("0.5");
        let exact = stats::exact_small_universe(4, &p).unwrap();
        let formula = stats::expected_quadruples_exact(4, &p).unwrap();
        let mc = stats::quadruple_moments_mc(4, 0.5, 100_000, DEFAULT_SEED, MemoryBudget::default()).unwrap();
        let ex = stats::ratio_to_f64(&exact.ex);
        let within = (mc.mean - ex).abs() <= 3.0 * mc.std_err;
        // |correction| <= 3N - 2 for every N
        let linear = [4u64, 16, 64, 256, 1024].iter().all(|&n| {
            let e = stats::expected_quadruples_exact(n, &p).unwrap();
            let c = e.correction.clone();
            let bound = BigRational::from_integer((3 * n - 2).into());
            c <= bound && -c <= bound
        });
        (
            exact.ex == formula.exact && within && linear,
            format!(
                "exact {} = formula {}, MC {:.5} +- {:.5}, correction {} vs p^4 N^2 = {}",
                exact.ex, formula.exact, mc.mean, 3.0 * mc.std_err, formula.correction, formula.formula
            ),
        )
    });
}

#[test]
fn criterion_04_paley_zygmund_exact() {
    report(4, "(E X)^2 / E X^2 <= P(X > 0), exact rationals", None, || {
        let mut worst = String::new();
        let mut ok = true;
        for n in 1..=4u64 {
            for p in ["0.3", "0.5", "0.7"] {
                let m = stats::exact_small_universe(n, &rat(p)).unwrap();
                ok &= m.pz_ratio <= m.px_pos && m.pz_holds;
                if n == 4 && p == "0.5" {
                    worst = format!(
                        "N=4 p=0.5: ratio {:.6} <= P(X>0) {:.6}",
                        stats::ratio_to_f64(&m.pz_ratio),
                        stats::ratio_to_f64(&m.px_pos)
                    );
                }
            }
        }
        (ok, format!("12 cases hold; {worst}"))
    });
}

fn clt_cfg(ys: YFamily, k: usize) -> CltConfig {
    CltConfig { ys, subsequence: None, p: 0.5, k, replications: 20_000, seed: DEFAULT_SEED }
}

#[test]
fn criterion_05_trimmed_gaussian_regime() {
    report(5, "linear ys: KS to N(0,1) and Lindeberg ratio decay", secs(20), || {
        let full = clt::simulate_full(&clt_cfg(YFamily::Linear, 200)).unwrap();
        let ks = clt::ks_to_normal(&full);
        let ratios: Vec<f64> = [50, 100, 200, 400]
            .iter()
            .map(|&k| clt::diagnostics(&clt_cfg(YFamily::Linear, k)).unwrap().ratio_maxres)
            .collect();
        let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
        (ks <= 0.05 && decreasing, format!("KS {ks:.4} <= 0.05, max ratio {ratios:.5?}"))
    });
}

#[test]
fn criterion_06_dominated_regime() {
    report(6, "doubly-exponential ys: two-point law", secs(5), || {
        let cfg = clt_cfg(YFamily::DoublyExponential, 9);
        let d = clt::diagnostics(&cfg).unwrap();
        let full = clt::simulate_full(&cfg).unwrap();
        let fit = clt::two_point_fit(&full, 0.5, 0.05).unwrap();
        let ok = fit.escaped <= 0.01
            && (fit.mass_upper - 0.5).abs() <= 0.02
            && (fit.mass_lower - 0.5).abs() <= 0.02
            && d.ratio_dom > 0.99;
        (
            ok,
            format!(
                "escaped {:.4}, masses ({:.4}, {:.4}), ratio_dom {}",
                fit.escaped, fit.mass_upper, fit.mass_lower, d.ratio_dom
            ),
        )
    });
}

#[test]
fn criterion_07_reinsertion() {
    report(7, "reinsertion of the largest term", secs(20), || {
        let lin = clt::reinsertion_check(&clt_cfg(YFamily::Linear, 200)).unwrap();
        let dexp = clt::reinsertion_check(&clt_cfg(YFamily::DoublyExponential, 9)).unwrap();
        (
            lin.ks_distance <= 0.03 && dexp.ks_distance > 0.2,
            format!("linear KS {:.4} <= 0.03, doubly-exponential KS {:.4} > 0.2", lin.ks_distance, dexp.ks_distance),
        )
    });
}

#[test]
fn criterion_08_atoms_in_fs() {
    report(8, "every realized sum lies in FS(x)", secs(5), || {
        let mut checked = 0u64;
        let mut violations = 0usize;
        for t in 0..20u64 {
            let mut parent: Vec<u64> = Vec::new();
            let mut s = splitmix64(0xa70 + t);
            while parent.len() < 8 {
                s = splitmix64(s);
                let v = 1 + s % 10_000;
                if !parent.contains(&v) {
                    parent.push(v);
                }
            }
            for mask in 1u32..1 << 8 {
                let indices: Vec<usize> = (0..8).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
                let r = clt::atoms_in_fs_check(&parent, &indices).unwrap();
                checked += r.patterns_checked;
                violations += r.violations.len();
            }
        }
        (violations == 0, format!("{checked} sums over 20 parents and all 255 subsequences, {violations} violations"))
    });
}

fn naive_fs(sample: &DenseSample, len: usize, bound: u64) -> Option<Vec<u64>> {
    fn rec(s: &DenseSample, len: usize, bound: u64, cur: &mut Vec<u64>) -> bool {
        if cur.len() == len {
            return patterns::fs(cur).unwrap().iter().all(|&v| v <= bound && s.contains(v));
        }
        let from = cur.last().map_or(1, |&v| v + 1);
        for x in from..=bound {
            cur.push(x);
            if rec(s, len, bound, cur) {
                return true;
            }
            cur.pop();
        }
        false
    }
    let mut cur = Vec::new();
    rec(sample, len, bound, &mut cur).then_some(cur)
}

#[test]
fn criterion_09_detector_oracles() {
    report(9, "find_fs and count_quadruples against naive oracles", secs(60), || {
        let mut mismatches = 0;
        for mask in 0u64..1 << 12 {
            let s = DenseSample::from_mask(12, mask);
            for len in [2u32, 3] {
                if detect::find_fs(&s, len, 12).unwrap() != naive_fs(&s, len as usize, 12) {
                    mismatches += 1;
                }
            }
        }
        let n = 100u64;
        let mut q_mismatch = 0;
        for seed in 0..100u64 {
            let p = [0.3, 0.5, 0.7][seed as usize % 3];
            let s = SubsetModel::new(p, seed).unwrap().materialize(quadruple_universe(n), MemoryBudget::default()).unwrap();
            let mut naive = 0u64;
            for x in 1..=n {
                for y in 1..=n {
                    if s.contains(x) && s.contains(y) && s.contains(x + y) && s.contains(x * y) {
                        naive += 1;
                    }
                }
            }
            if detect::count_quadruples(&s, n, 0).unwrap().count != naive {
                q_mismatch += 1;
            }
        }
        (
            mismatches == 0 && q_mismatch == 0,
            format!("{mismatches} sumset mismatches over 8192 searches, {q_mismatch} quadruple mismatches over 100 samples"),
        )
    });
}

fn determinism_payload() -> String {
    let limits = ProbeLimits::default();
    let budget = MemoryBudget::default();
    let model = SubsetModel::new(0.5, 42).unwrap();
    let hits = detect::probe_hits(&model, ProbeFamily::Fs { len: 2 }, 0..5000, &limits).unwrap();
    let fp = detect::probe_hits(&model, ProbeFamily::Fp { len: 2 }, 1..3000, &limits).unwrap();
    let ev = stats::estimate_event_prob(ProbeFamily::Fs { len: 3 }, 0.6, 20_000, 3, &limits).unwrap();
    let mc = stats::quadruple_moments_mc(12, 0.4, 2000, 5, budget).unwrap();
    let sample = model.materialize(40_000, budget).unwrap();
    let q = detect::count_quadruples(&sample, 200, 25).unwrap();
    let law = clt::run(&CltConfig { replications: 5000, ..clt_cfg(YFamily::Linear, 100) }).unwrap();
    let sweep = stats::threshold_sweep(2, 300, 200, 9, stats::SweepConfig::default(), budget).unwrap();
    serde_json::to_string(&(hits, fp, ev, mc, q, law, sweep)).unwrap()
}

#[test]
fn criterion_10_determinism_and_coupling() {
    report(10, "identical output across 1 and 4 workers; monotone coupling", None, || {
        let run = |threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(determinism_payload);
        let one = run(1);
        let four = run(4);
        let identical = one == four;
        let mut violations = 0u64;
        let mut s = 0x5eed_u64;
        for _ in 0..1_000_000 {
            s = splitmix64(s);
            let seed = s;
            s = splitmix64(s);
            let n = 1 + (s >> 20);
            s = splitmix64(s);
            let a = (s >> 11) as f64 / (1u64 << 53) as f64;
            s = splitmix64(s);
            let b = (s >> 11) as f64 / (1u64 << 53) as f64;
            let (p1, p2) = (a.min(b), a.max(b));
            if !(p1 > 0.0 && p1 < p2 && p2 < 1.0) {
                continue;
            }
            let lo = SubsetModel::new(p1, seed).unwrap().member(n);
            let hi = SubsetModel::new(p2, seed).unwrap().member(n);
            if lo && !hi {
                violations += 1;
            }
        }
        (
            identical && violations == 0,
            format!("{} output bytes identical: {identical}, coupling violations {violations} / 10^6", one.len()),
        )
    });
}
