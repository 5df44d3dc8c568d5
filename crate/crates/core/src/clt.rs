//! Normalized Bernoulli-weighted sums `S_k = sum eps_{n_j} y_j`, their regime
//! diagnostics, and distances to the Gaussian and two-point limit laws.
//!
//! Sums are formed after dividing every `y_j` by the largest one, so huge
//! families such as `y_j = 2^(2^j)` never overflow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{splitmix64, SubsetModel};
use crate::patterns;

/// Derivation tag for per-replication seeds.
const REPLICATION_TAG: u64 = 0x636c_745f_7265_706c;

/// Default atom-capture tolerance.
pub const DEFAULT_ATOM_TOLERANCE: f64 = 0.05;

/// Convenience labels, not definitions: dominated when `ratio_dom` exceeds
/// this, trimmed-Gaussian when `ratio_maxres` is below [`TRIMMED_LABEL`].
pub const DOMINATED_LABEL: f64 = 0.95;
pub const TRIMMED_LABEL: f64 = 0.05;

pub const MAX_ATOM_PARENT: usize = 20;
pub const MAX_ATOM_STAGE: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum YFamily {
    Explicit { values: Vec<f64> },
    /// `x_j = j`
    Linear,
    /// `x_j = 2^(2^j)`
    DoublyExponential,
}

impl YFamily {
    /// `(x_j, log2 x_j)` for 1-based `j`; `x_j` may be infinite for huge families.
    fn term(&self, j: u64) -> Result<(f64, f64)> {
        match self {
            YFamily::Explicit { values } => {
                let v = *values
                    .get(j as usize - 1)
                    .ok_or_else(|| Error::domain(format!("index {j} beyond the {} explicit values", values.len())))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::domain(format!("y values must be positive and finite, got {v}")));
                }
                Ok((v, v.log2()))
            }
            YFamily::Linear => Ok((j as f64, (j as f64).log2())),
            YFamily::DoublyExponential => {
                if j > 1023 {
                    return Err(Error::Size { what: "doubly-exponential index", got: j, limit: 1023 });
                }
                let l = (j as f64).exp2();
                Ok((l.exp2(), l))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltConfig {
    pub ys: YFamily,
    /// 1-based strictly increasing indices `n_1 < n_2 < ...` into the parent
    /// sequence; identity when absent.
    #[serde(default)]
    pub subsequence: Option<Vec<u64>>,
    pub p: f64,
    pub k: usize,
    pub replications: usize,
    pub seed: u64,
}

/// The first `k` terms `y_j = x_{n_j}` divided by `y_{j_k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledYs {
    /// Parent indices `n_j`.
    pub indices: Vec<u64>,
    pub scaled: Vec<f64>,
    pub log2: Vec<f64>,
    /// 0-based position of the largest term, smallest index on ties.
    pub argmax: usize,
    pub log2_scale: f64,
}

impl CltConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::domain(format!("p must lie strictly between 0 and 1, got {}", self.p)));
        }
        if self.k == 0 {
            return Err(Error::domain("stage k must be >= 1"));
        }
        if self.replications == 0 {
            return Err(Error::domain("replication count must be >= 1"));
        }
        self.scaled_ys().map(|_| ())
    }

    pub fn scaled_ys(&self) -> Result<ScaledYs> {
        let indices: Vec<u64> = match &self.subsequence {
            None => (1..=self.k as u64).collect(),
            Some(ix) => {
                if ix.len() < self.k {
                    return Err(Error::domain(format!("stage k = {} exceeds the {} subsequence indices", self.k, ix.len())));
                }
                let ix = ix[..self.k].to_vec();
                if ix[0] == 0 || ix.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::domain("subsequence indices must be 1-based and strictly increasing"));
                }
                ix
            }
        };
        let terms = indices.iter().map(|&n| self.ys.term(n)).collect::<Result<Vec<_>>>()?;
        scale_terms(indices, &terms)
    }
}

fn scale_terms(indices: Vec<u64>, terms: &[(f64, f64)]) -> Result<ScaledYs> {
    if terms.is_empty() {
        return Err(Error::domain("empty sequence"));
    }
    let mut argmax = 0;
    for (i, t) in terms.iter().enumerate() {
        if t.1 > terms[argmax].1 || (t.1 == terms[argmax].1 && t.0 > terms[argmax].0) {
            argmax = i;
        }
    }
    let (top, log2_scale) = terms[argmax];
    let finite = terms.iter().all(|t| t.0.is_finite());
    let scaled = terms
        .iter()
        .map(|&(v, l)| if finite { v / top } else { (l - log2_scale).exp2() })
        .collect();
    let log2 = terms.iter().map(|t| t.1).collect();
    Ok(ScaledYs { indices, scaled, log2, argmax, log2_scale })
}

/// Variance ratios of the first `k` terms, in units of `y_{j_k}^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeDiagnostics {
    pub k: usize,
    pub p: f64,
    /// 1-based position of the largest term.
    pub j_k: usize,
    pub log2_scale: f64,
    /// `R_k / y_{j_k}^2`
    pub residual: f64,
    /// `sigma_k^2 / y_{j_k}^2 = p(1-p)(1 + residual)`
    pub sigma2: f64,
    pub ratio_dom: f64,
    pub ratio_maxres: f64,
    pub ratio_reinsert: f64,
    /// `log2(y_{j_k}^2 / R_k)`, finite even when `residual` underflows.
    pub log2_ratio_reinsert: f64,
    pub dominated: bool,
    pub trimmed_gaussian: bool,
}

pub fn diagnostics(config: &CltConfig) -> Result<RegimeDiagnostics> {
    if config.k < 2 {
        return Err(Error::domain("diagnostics need k >= 2"));
    }
    config.validate()?;
    let ys = config.scaled_ys()?;
    Ok(diagnostics_of(&ys, config.p))
}

fn diagnostics_of(ys: &ScaledYs, p: f64) -> RegimeDiagnostics {
    let rest = || (0..ys.scaled.len()).filter(|&i| i != ys.argmax);
    let residual: f64 = rest().map(|i| ys.scaled[i].powi(2)).sum();
    // relative to the largest residual term, immune to underflow
    let (ratio_maxres, log2_ratio_reinsert) = match rest().map(|i| ys.log2[i]).reduce(f64::max) {
        Some(top) => {
            let rel: f64 = rest().map(|i| (2.0 * (ys.log2[i] - top)).exp2()).sum();
            (1.0 / rel, 2.0 * (ys.log2_scale - top) - rel.log2())
        }
        None => (1.0, f64::INFINITY),
    };
    let k = ys.scaled.len();
    RegimeDiagnostics {
        k,
        p,
        j_k: ys.argmax + 1,
        log2_scale: ys.log2_scale,
        residual,
        sigma2: p * (1.0 - p) * (1.0 + residual),
        ratio_dom: 1.0 / (1.0 + residual),
        ratio_maxres,
        ratio_reinsert: 1.0 / residual,
        log2_ratio_reinsert,
        dominated: 1.0 / (1.0 + residual) > DOMINATED_LABEL,
        trimmed_gaussian: ratio_maxres < TRIMMED_LABEL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Normalization {
    /// `(S_k - mu_k) / sigma_k`
    Full,
    /// `(S_k^trim - E S_k^trim) / sigma_k^trim`
    Trimmed,
    /// `(S_k - mu_k) / sigma_k^trim`
    FullByTrim,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalLaw {
    pub normalization: Normalization,
    /// Sorted ascending.
    pub values: Vec<f64>,
}

impl EmpiricalLaw {
    pub fn new(normalization: Normalization, mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        EmpiricalLaw { normalization, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.values.len() as f64
    }
}

/// Bernoulli indicators `eps_{n_j}` of replication `r`: membership of the
/// parent indices in a subset drawn with a per-replication seed.
fn replication_model(config: &CltConfig, r: usize) -> SubsetModel {
    let seed = splitmix64(config.seed ^ REPLICATION_TAG).wrapping_add(r as u64);
    SubsetModel::new(config.p, seed).expect("p validated")
}

/// Per replication: centered full sum and centered trimmed sum, in scaled units.
fn centered_sums(config: &CltConfig, ys: &ScaledYs) -> Vec<(f64, f64)> {
    let p = config.p;
    (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let model = replication_model(config, r);
            let mut trim = 0.0;
            let mut top = 0.0;
            for (i, (&n, &y)) in ys.indices.iter().zip(&ys.scaled).enumerate() {
                let z = (model.member(n) as u8 as f64 - p) * y;
                if i == ys.argmax {
                    top = z;
                } else {
                    trim += z;
                }
            }
            (top + trim, trim)
        })
        .collect()
}

fn sigmas(ys: &ScaledYs, p: f64) -> (f64, f64) {
    let d = diagnostics_of(ys, p);
    (d.sigma2.sqrt(), (p * (1.0 - p) * d.residual).sqrt())
}

/// FULL normalized law; `k = 1` is allowed.
pub fn simulate_full(config: &CltConfig) -> Result<EmpiricalLaw> {
    config.validate()?;
    let ys = config.scaled_ys()?;
    let (sigma, _) = sigmas(&ys, config.p);
    let vals = centered_sums(config, &ys).into_iter().map(|(s, _)| s / sigma).collect();
    Ok(EmpiricalLaw::new(Normalization::Full, vals))
}

/// FULL and TRIMMED normalized laws from common draws.
pub fn simulate(config: &CltConfig) -> Result<(EmpiricalLaw, EmpiricalLaw)> {
    if config.k < 2 {
        return Err(Error::domain("trimming needs k >= 2; the trimmed sum would be empty"));
    }
    config.validate()?;
    let ys = config.scaled_ys()?;
    let (sigma, sigma_trim) = sigmas(&ys, config.p);
    if sigma_trim == 0.0 {
        return Err(Error::domain("trimmed variance underflows in scaled units"));
    }
    let sums = centered_sums(config, &ys);
    let full = sums.iter().map(|(s, _)| s / sigma).collect();
    let trim = sums.iter().map(|(_, t)| t / sigma_trim).collect();
    Ok((EmpiricalLaw::new(Normalization::Full, full), EmpiricalLaw::new(Normalization::Trimmed, trim)))
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Kolmogorov-Smirnov distance between the empirical law and `N(0,1)`.
pub fn ks_to_normal(law: &EmpiricalLaw) -> f64 {
    let n = std_normal();
    let m = law.values.len() as f64;
    law.values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let phi = n.cdf(x);
            ((i + 1) as f64 / m - phi).max(phi - i as f64 / m)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance between sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPointFit {
    pub upper_atom: f64,
    pub lower_atom: f64,
    pub mass_upper: f64,
    pub mass_lower: f64,
    pub escaped: f64,
}

/// Fraction of the law within `tolerance` of each atom
/// `(1-p)/sqrt(p(1-p))` and `-p/sqrt(p(1-p))`.
pub fn two_point_fit(law: &EmpiricalLaw, p: f64, tolerance: f64) -> Result<TwoPointFit> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::domain("atom tolerance must be positive"));
    }
    if law.is_empty() {
        return Err(Error::domain("empty law"));
    }
    let s = (p * (1.0 - p)).sqrt();
    let (upper_atom, lower_atom) = ((1.0 - p) / s, -p / s);
    let (mut up, mut lo) = (0usize, 0usize);
    for &v in &law.values {
        if (v - upper_atom).abs() <= tolerance {
            up += 1;
        } else if (v - lower_atom).abs() <= tolerance {
            lo += 1;
        }
    }
    let m = law.len() as f64;
    Ok(TwoPointFit {
        upper_atom,
        lower_atom,
        mass_upper: up as f64 / m,
        mass_lower: lo as f64 / m,
        escaped: (law.len() - up - lo) as f64 / m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReinsertionReport {
    pub ks_distance: f64,
    pub ratio_reinsert: f64,
    pub log2_ratio_reinsert: f64,
}

/// KS distance between `(S_k - mu_k)/sigma_k^trim` and the TRIMMED law, with
/// both built from the same draws.
pub fn reinsertion_check(config: &CltConfig) -> Result<ReinsertionReport> {
    let (_, trimmed) = simulate(config)?;
    let ys = config.scaled_ys()?;
    let (_, sigma_trim) = sigmas(&ys, config.p);
    let reinserted = EmpiricalLaw::new(
        Normalization::FullByTrim,
        centered_sums(config, &ys).into_iter().map(|(s, _)| s / sigma_trim).collect(),
    );
    let d = diagnostics_of(&ys, config.p);
    Ok(ReinsertionReport {
        ks_distance: ks_two_sample(&reinserted.values, &trimmed.values),
        ratio_reinsert: d.ratio_reinsert,
        log2_ratio_reinsert: d.log2_ratio_reinsert,
    })
}

/// Exact Lindeberg sum of the trimmed array at level `delta`:
/// `sum_{j != j_k} E[Z_j^2; |Z_j| > delta sigma^trim] / (sigma^trim)^2`
/// with `Z_j = (eps_j - p) y_j`.
pub fn lindeberg_ratio(config: &CltConfig, delta: f64) -> Result<f64> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::domain("delta must be positive"));
    }
    if config.k < 2 {
        return Err(Error::domain("the trimmed array needs k >= 2"));
    }
    config.validate()?;
    let ys = config.scaled_ys()?;
    let p = config.p;
    let (_, sigma_trim) = sigmas(&ys, p);
    let cut = delta * sigma_trim;
    let mut acc = 0.0;
    for (i, &y) in ys.scaled.iter().enumerate() {
        if i == ys.argmax {
            continue;
        }
        let (hi, lo) = ((1.0 - p) * y, p * y);
        if hi > cut {
            acc += p * hi * hi;
        }
        if lo > cut {
            acc += (1.0 - p) * lo * lo;
        }
    }
    Ok(acc / (sigma_trim * sigma_trim))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AtomsReport {
    pub parent: Vec<u64>,
    pub indices: Vec<usize>,
    pub patterns_checked: u64,
    pub violations: Vec<u64>,
}

impl AtomsReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Enumerates every nonempty `eps` pattern over the subsequence
/// `y_j = x_{indices_j}` (1-based) and checks each realized sum lies in `FS(x)`.
pub fn atoms_in_fs_check(parent: &[u64], indices: &[usize]) -> Result<AtomsReport> {
    if parent.len() > MAX_ATOM_PARENT {
        return Err(Error::Size { what: "parent sequence length", got: parent.len() as u64, limit: MAX_ATOM_PARENT as u64 });
    }
    if indices.is_empty() || indices.len() > MAX_ATOM_STAGE {
        return Err(Error::Size { what: "atom stage k", got: indices.len() as u64, limit: MAX_ATOM_STAGE as u64 });
    }
    if indices[0] == 0 || indices.windows(2).any(|w| w[0] >= w[1]) || indices[indices.len() - 1] > parent.len() {
        return Err(Error::domain("indices must form a subsequence of the parent"));
    }
    let fs = patterns::fs(parent)?;
    let ys: Vec<u64> = indices.iter().map(|&i| parent[i - 1]).collect();
    let mut violations = Vec::new();
    for mask in 1u32..(1 << ys.len()) {
        let sum: u64 = (0..ys.len()).filter(|b| mask >> b & 1 == 1).map(|b| ys[b]).sum();
        if fs.binary_search(&sum).is_err() {
            violations.push(sum);
        }
    }
    Ok(AtomsReport {
        parent: parent.to_vec(),
        indices: indices.to_vec(),
        patterns_checked: (1u64 << ys.len()) - 1,
        violations,
    })
}

/// Configuration, diagnostics and laws of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltRun {
    pub config: CltConfig,
    pub diagnostics: Option<RegimeDiagnostics>,
    pub full: EmpiricalLaw,
    pub trimmed: Option<EmpiricalLaw>,
}

pub fn run(config: &CltConfig) -> Result<CltRun> {
    if config.k < 2 {
        return Ok(CltRun { config: config.clone(), diagnostics: None, full: simulate_full(config)?, trimmed: None });
    }
    let (full, trimmed) = simulate(config)?;
    Ok(CltRun { config: config.clone(), diagnostics: Some(diagnostics(config)?), full, trimmed: Some(trimmed) })
}
