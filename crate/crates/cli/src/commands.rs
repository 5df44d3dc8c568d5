use std::time::Instant;

use hindlab_core::clt::{self, CltConfig, YFamily};
use hindlab_core::color::{self, Coloring};
use hindlab_core::detect;
use hindlab_core::model::{MemoryBudget, SubsetModel};
use hindlab_core::patterns::{self, ProbeFamily, ProbeLimits};
use hindlab_core::stats::{self, Estimate, EstimateRow, SweepConfig};
use num_bigint::BigUint;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::output::{Report, Table};
use crate::CliError;

pub struct Context {
    pub seed: u64,
    pub budget: MemoryBudget,
    pub timing: bool,
    pub start: Instant,
}

impl Context {
    fn wall_time(&self) -> Option<f64> {
        self.timing.then(|| self.start.elapsed().as_secs_f64())
    }

    fn estimate_row(&self, experiment: &str, parameters: String, est: &Estimate) -> EstimateRow {
        EstimateRow { wall_time_s: self.wall_time(), ..EstimateRow::new(experiment, parameters, est) }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Invalid(e.to_string()))
}

fn check_p(p: f64) -> Result<(), CliError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("-p must lie strictly between 0 and 1, got {p}")))
    }
}

fn estimate_table(rows: &[EstimateRow]) -> Table {
    let mut t = Table::new(vec!["experiment", "parameters", "point", "lo", "hi", "successes", "trials", "wall_time_s"]);
    for r in rows {
        t.push(vec![
            r.experiment.clone(),
            r.parameters.clone(),
            r.point.to_string(),
            r.lo.to_string(),
            r.hi.to_string(),
            r.successes.to_string(),
            r.trials.to_string(),
            r.wall_time_s.map_or(String::new(), |w| format!("{w:.3}")),
        ]);
    }
    t
}

pub fn sample(a: &SampleArgs, ctx: &Context) -> Result<Report, CliError> {
    check_p(a.p)?;
    let s = SubsetModel::new(a.p, ctx.seed)?.materialize(a.n, ctx.budget)?;
    let members: Vec<u64> = s.members().collect();
    let mut t = Table::new(vec!["n"]);
    for m in &members {
        t.push(vec![m.to_string()]);
    }
    let summary = format!("sample: {} of {} integers included (p = {})", members.len(), a.n, a.p);
    let meta = json!({ "bound": a.n, "count": members.len() });
    Ok(Report::table(summary, json!({ "bound": a.n, "count": members.len(), "members": members }), meta, t))
}

fn family(kind: ProbeKind, len: u32) -> Result<ProbeFamily, CliError> {
    match kind {
        ProbeKind::Fs => Ok(ProbeFamily::Fs { len }),
        ProbeKind::Fp => Ok(ProbeFamily::Fp { len }),
        ProbeKind::Exp => Err(CliError::Invalid("this mode supports --kind fs or fp only".into())),
    }
}

pub fn probes(a: &ProbesArgs, ctx: &Context) -> Result<Report, CliError> {
    check_p(a.p)?;
    let limits = ProbeLimits::default();
    match a.mode {
        ProbeMode::Event => {
            let (est, size, name) = if a.kind == ProbeKind::Exp {
                let inst = patterns::exp_probe(stats::EVENT_PROBE_INDEX, &limits)?;
                let size = inst.elements.len() as u64;
                (stats::estimate_instance_prob(&inst, a.p, a.j_count, ctx.seed)?, size, "exp".to_string())
            } else {
                let fam = family(a.kind, a.len)?;
                (stats::estimate_event_prob(fam, a.p, a.j_count, ctx.seed, &limits)?, fam.size(), fam.to_string())
            };
            let target = a.p.powi(size as i32);
            let row = ctx.estimate_row("probe_event", format!("family={name};R={size};p={};j={}", a.p, stats::EVENT_PROBE_INDEX), &est);
            let summary = format!(
                "probes: {name} event rate {:.5} [{:.5}, {:.5}] over {} trials, p^R = {target:.5}",
                est.point, est.lo, est.hi, est.trials
            );
            let meta = json!({ "probe_size": size, "p_pow_r": target });
            let result = json!({ "estimate": to_json(&row)?, "probe_size": size, "p_pow_r": target });
            Ok(Report::table(summary, result, meta, estimate_table(&[row])))
        }
        ProbeMode::Scan => {
            let fam = family(a.kind, a.len)?;
            let start = a.j_start.unwrap_or(fam.first_index());
            let end = start
                .checked_add(a.j_count)
                .ok_or_else(|| CliError::Invalid("j range overflows".into()))?;
            let model = SubsetModel::new(a.p, ctx.seed)?;
            let r = detect::probe_hits(&model, fam, start..end, &limits)?;
            let disjoint = detect::audit_disjoint(fam, &r.hits, &limits)?;
            let mut t = Table::new(vec!["j", "min_element", "max_element"]);
            for &j in &r.hits {
                let inst = fam.probe(j, &limits)?;
                t.push(vec![j.to_string(), inst.min_element().to_string(), inst.max_element().to_string()]);
            }
            let expected = a.p.powi(fam.size() as i32) * r.scanned() as f64;
            let summary = format!(
                "probes: {} of {} {fam} probes hit (expected {expected:.1}), disjoint {disjoint}{}",
                r.hits.len(),
                r.scanned(),
                r.truncated_at.map_or(String::new(), |j| format!(", truncated at j = {j}"))
            );
            let meta = json!({
                "hits": r.hits.len(), "scanned": r.scanned(), "truncated_at": r.truncated_at,
                "expected_hits": expected, "disjoint": disjoint,
            });
            let mut result = to_json(&r)?;
            result["disjoint"] = json!(disjoint);
            result["expected_hits"] = json!(expected);
            Ok(Report::table(summary, result, meta, t))
        }
        ProbeMode::MinElement => {
            let fam = family(a.kind, a.len)?;
            let m: BigUint = a
                .above
                .as_deref()
                .ok_or_else(|| CliError::Invalid("min-element mode needs --above M".into()))?
                .parse()
                .map_err(|_| CliError::Invalid("--above must be a nonnegative decimal integer".into()))?;
            let model = SubsetModel::new(a.p, ctx.seed)?;
            let r = detect::min_element_probe(&model, fam, &m, a.max_attempts, &limits)?;
            let summary = match r.hit_j {
                Some(j) => format!("probes: {fam} probe j = {j} lies above {m} after {} attempts", r.attempts),
                None => format!("probes: no {fam} probe above {m} within {} attempts", r.attempts),
            };
            Ok(Report::json(summary, to_json(&r)?))
        }
    }
}

pub fn quadruples(a: &QuadruplesArgs, ctx: &Context) -> Result<Report, CliError> {
    check_p(a.p)?;
    if a.n == 0 {
        return Err(CliError::Invalid("-N must be >= 1".into()));
    }
    if let Some(trials) = a.trials {
        let est = stats::estimate_px_pos(a.n, a.p, trials, ctx.seed, ctx.budget)?;
        let row = ctx.estimate_row("px_pos", format!("N={};p={}", a.n, a.p), &est);
        let summary = format!("quadruples: P(X_{} > 0) ~ {:.4} [{:.4}, {:.4}] over {trials} trials", a.n, est.point, est.lo, est.hi);
        let result = json!({ "estimate": to_json(&row)? });
        return Ok(Report::table(summary, result, Value::Null, estimate_table(&[row])));
    }
    let universe = detect::quadruple_universe(a.n);
    let s = SubsetModel::new(a.p, ctx.seed)?.materialize(universe, ctx.budget)?;
    let q = detect::count_quadruples(&s, a.n, a.witnesses)?;
    let mut t = Table::new(vec!["x", "y"]);
    for (x, y) in &q.witnesses {
        t.push(vec![x.to_string(), y.to_string()]);
    }
    let formula = a.p.powi(4) * (a.n as f64).powi(2);
    let summary = format!("quadruples: X_{} = {} (p^4 N^2 = {formula:.3})", a.n, q.count);
    let meta = json!({ "count": q.count, "universe": universe, "p4n2": formula });
    let mut result = to_json(&q)?;
    result["universe"] = json!(universe);
    result["p4n2"] = json!(formula);
    Ok(Report::table(summary, result, meta, t))
}

pub fn second_moment(a: &SecondMomentArgs, ctx: &Context) -> Result<Report, CliError> {
    let p = stats::parse_rational(&a.p)?;
    let pf = stats::ratio_to_f64(&p);
    let trials = a.trials.unwrap_or(if a.exact { 0 } else { 10_000 });
    if trials > 0 {
        check_p(pf)?;
    }
    let r = stats::second_moment_report(a.n, &p, a.exact, trials, ctx.seed, ctx.budget)?;
    let mut summary = format!(
        "second-moment: N = {}, exact E[X] = {} ({:.5}) vs p^4 N^2 = {:.5}",
        a.n,
        r.expectation.exact,
        stats::ratio_to_f64(&r.expectation.exact),
        stats::ratio_to_f64(&r.expectation.formula)
    );
    if let Some(e) = &r.exact {
        summary += &format!(
            ", PZ ratio {:.5} <= P(X>0) {:.5}: {}",
            stats::ratio_to_f64(&e.pz_ratio),
            stats::ratio_to_f64(&e.px_pos),
            e.pz_holds
        );
    }
    if let Some(m) = &r.monte_carlo {
        summary += &format!(", MC P(X>0) {:.4}", m.px_pos.point);
    }
    Ok(Report::json(summary, to_json(&r)?))
}

pub fn clt_cmd(a: &CltArgs, ctx: &Context) -> Result<Report, CliError> {
    let mut atoms = None;
    let ys = match a.family {
        FamilyArg::Linear => YFamily::Linear,
        FamilyArg::DoublyExponential => YFamily::DoublyExponential,
        FamilyArg::Explicit => YFamily::Explicit {
            values: a.ys.clone().ok_or_else(|| CliError::Invalid("--family explicit needs --ys".into()))?,
        },
        FamilyArg::Hindman => {
            let coloring = color::random_coloring(a.color_n, a.colors, ctx.seed)?;
            let h = color::hindman_sequence(&coloring, a.hindman_len)?;
            if h.is_empty() {
                return Err(CliError::Invalid(format!(
                    "no monochromatic FS-set of length {} in the random coloring of [1..{}]",
                    a.hindman_len, a.color_n
                )));
            }
            if a.k <= h.terms.len() {
                let indices: Vec<usize> = match &a.subsequence {
                    Some(ix) => ix.iter().take(a.k).map(|&i| i as usize).collect(),
                    None => (1..=a.k).collect(),
                };
                atoms = Some(clt::atoms_in_fs_check(&h.terms, &indices)?);
            }
            YFamily::Explicit { values: h.as_f64() }
        }
    };
    let cfg = CltConfig { ys, subsequence: a.subsequence.clone(), p: a.p, k: a.k, replications: a.replications, seed: ctx.seed };
    let run = clt::run(&cfg)?;
    let ks = clt::ks_to_normal(&run.full);
    let fit = clt::two_point_fit(&run.full, a.p, a.tolerance)?;
    let (reinsertion, ks_trimmed) = match &run.trimmed {
        Some(t) => (Some(clt::reinsertion_check(&cfg)?), Some(clt::ks_to_normal(t))),
        None => (None, None),
    };
    let mut t = Table::new(vec!["rank", "full", "trimmed"]);
    for (i, v) in run.full.values.iter().enumerate() {
        let tr = run.trimmed.as_ref().map_or(String::new(), |l| l.values[i].to_string());
        t.push(vec![(i + 1).to_string(), v.to_string(), tr]);
    }
    let meta = json!({
        "diagnostics": to_json(&run.diagnostics)?,
        "ks_full_to_normal": ks,
        "ks_trimmed_to_normal": ks_trimmed,
        "two_point": to_json(&fit)?,
        "reinsertion": to_json(&reinsertion)?,
        "atoms_in_fs": to_json(&atoms)?,
        "full_mean": run.full.mean(),
        "full_variance": run.full.variance(),
    });
    let mut summary = format!(
        "clt: k = {}, M = {}, KS(full, N(0,1)) = {ks:.4}, escaped two-point mass = {:.4}",
        a.k, a.replications, fit.escaped
    );
    if let Some(d) = &run.diagnostics {
        summary += &format!(", ratio_dom = {:.4}, ratio_maxres = {:.4}", d.ratio_dom, d.ratio_maxres);
    }
    let mut result = meta.clone();
    result["full"] = to_json(&run.full.values)?;
    result["trimmed"] = to_json(&run.trimmed.as_ref().map(|l| &l.values))?;
    Ok(Report::table(summary, result, meta, t))
}

fn coloring_for(a: &ColorArgs, seed: u64) -> Result<Coloring, CliError> {
    match &a.coloring {
        Some(d) => Ok(Coloring::from_digits(d, a.c)?),
        None => Ok(color::random_coloring(a.n, a.c, seed)?),
    }
}

pub fn color_cmd(a: &ColorArgs, ctx: &Context) -> Result<Report, CliError> {
    match a.action {
        ColorAction::Random => {
            let c = coloring_for(a, ctx.seed)?;
            let mut t = Table::new(vec!["n", "color"]);
            for (i, v) in c.colors().iter().enumerate() {
                t.push(vec![(i + 1).to_string(), v.to_string()]);
            }
            let summary = format!("color: {}-coloring of [1..{}]", c.c(), c.n());
            let result = json!({ "n": c.n(), "c": c.c(), "coloring": c.to_digits() });
            Ok(Report { default_format: crate::args::Format::Json, ..Report::table(summary, result.clone(), result, t) })
        }
        ColorAction::MonoFs | ColorAction::Hindman => {
            let c = coloring_for(a, ctx.seed)?;
            let h = color::hindman_sequence(&c, a.len)?;
            let summary = match h.color {
                Some(col) => format!("color: monochromatic FS witness {:?} in color {col}", h.terms),
                None => format!("color: no monochromatic FS-set of length {} in [1..{}]", a.len, c.n()),
            };
            let mut result = to_json(&h)?;
            result["found"] = json!(!h.is_empty());
            if a.action == ColorAction::MonoFs && !h.is_empty() {
                result["fs"] = to_json(&patterns::fs(&h.terms)?)?;
            }
            Ok(Report::json(summary, result))
        }
        ColorAction::Quadruple => {
            let c = coloring_for(a, ctx.seed)?;
            let q = color::find_mono_quadruple(&c, a.strict);
            let summary = match q {
                Some(q) => format!("color: monochromatic quadruple at (x, y) = ({}, {}) in color {}", q.x, q.y, q.color),
                None => format!("color: no monochromatic quadruple in [1..{}]", c.n()),
            };
            Ok(Report::json(summary, json!({ "strict": a.strict, "witness": to_json(&q)? })))
        }
        ColorAction::Scan => {
            let out = color::exhaustive_2coloring_scan(a.n, a.strict)?;
            let summary = match out.avoiding() {
                Some(c) => format!("color: N = {}: avoiding coloring {} ({} nodes)", a.n, c.to_digits(), out.nodes),
                None => format!("color: N = {}: every 2-coloring contains the pattern ({} nodes)", a.n, out.nodes),
            };
            Ok(Report::json(summary, to_json(&out)?))
        }
    }
}

pub fn threshold(a: &ThresholdArgs, ctx: &Context) -> Result<Report, CliError> {
    let cfg = SweepConfig { target: a.target, tolerance: a.tol, initial: (a.lo, a.hi), epsilon: a.epsilon };
    let r = stats::threshold_sweep(a.len, a.n, a.trials, ctx.seed, cfg, ctx.budget)?;
    let params = |p: f64| format!("L={};N={};p={p}", a.len, a.n);
    let rows = [
        ctx.estimate_row("threshold_lo", params(r.lo), &r.est_lo),
        ctx.estimate_row("threshold_hi", params(r.hi), &r.est_hi),
    ];
    let summary = if r.bracketed {
        format!("threshold: p* in [{:.5}, {:.5}] for L = {}, N = {} ({} evaluations)", r.lo, r.hi, a.len, a.n, r.evaluations)
    } else {
        format!("threshold: target {} not bracketed in ({}, {})", a.target, r.lo, r.hi)
    };
    let meta = json!({
        "lo": r.lo, "hi": r.hi, "bracketed": r.bracketed, "widened": r.widened, "evaluations": r.evaluations,
    });
    let mut result = to_json(&r)?;
    if ctx.timing {
        result["wall_time_s"] = json!(ctx.wall_time());
    }
    Ok(Report::table(summary, result, meta, estimate_table(&rows)))
}
