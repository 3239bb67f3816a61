use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::Serialize;

use super::stats::{self, chi_square_gof, chi_square_two_sample, ls_slope, tv_distance};
use super::{
    merge_counts, run_chunks, ChiSquareRow, ExperimentReport, HarnessError, Parameters, ProbabilityRow, RatioRow,
    RunConfig,
};
use crate::laws::{self, MarkFunction, OffspringLaw, SeriesDist, WalkDpOptions};
use crate::oracle::{self, GateReport};
use crate::samplers::{
    sample_gw, sample_hat_tau, sample_kesten, sample_marked_gw_bounded, sample_walk, Conditioned, DegreeSampler,
    GwDraw, HatTauSampler, KestenSampler, MarkConditioner, ProtectedConditioner, SampleError, WalkSampler,
};
use crate::scalar::Scalar;
use crate::transforms::marked_phi;
use crate::tree::{BallEvent, ProtectedCounter, Restriction, Tree};

/// Output trees up to this size get their own χ² cell in the φ check.
pub const PHI_MAX_SIZE: usize = 6;
/// Grafted trees up to this size get their own χ² cell in the τ̂ check.
pub const HAT_MAX_SIZE: usize = 7;
/// Largest count with its own cell in the protected-count comparison.
pub const COUNT_CELLS: usize = 30;
/// Restriction height for the local-limit TV report.
pub const TV_HEIGHT: u32 = 2;

const GATE_ORDER: usize = 64;

fn run_gate<S: Scalar>(
    law: &OffspringLaw<S>,
    q: &MarkFunction<S>,
    order: usize,
    name: &str,
    report: &mut ExperimentReport,
) -> Result<GateReport, HarnessError> {
    let gate = oracle::validate_series(law, q, order)?;
    let detail = if gate.passed() {
        format!("series agree with enumeration on trees with at most {} vertices", gate.max_size)
    } else {
        gate.mismatches.join("; ")
    };
    report.check(name, gate.passed(), detail);
    if !gate.passed() {
        return Err(HarnessError::GateFailed(gate.mismatches));
    }
    Ok(gate)
}

fn overflow_check(report: &mut ExperimentReport, overflows: u64, draws: u64) {
    let frac = overflows as f64 / draws.max(1) as f64;
    let bound = report.thresholds.max_overflow_fraction;
    report.check(
        "overflow",
        frac <= bound,
        format!("{overflows} of {draws} draws hit the node budget (fraction {frac:.3e}, bound {bound:.0e})"),
    );
}

fn chi_check(report: &mut ExperimentReport, table: &str, chi: stats::ChiSquare, tv: Option<f64>) {
    let alpha = report.thresholds.chi2_alpha;
    report.check(
        format!("chi2 {table}"),
        chi.p_value > alpha,
        format!("χ² = {:.3} on {} dof, p = {:.4} (alpha {alpha:.0e})", chi.statistic, chi.dof, chi.p_value),
    );
    report.chi_square.push(ChiSquareRow { table: table.into(), chi, tv });
}

/// χ² and rows for tree counts against oracle probabilities; trees not in
/// `oracle` and the remaining mass form one extra cell.
fn tree_law_table(
    report: &mut ExperimentReport,
    table: &str,
    counts: &BTreeMap<Tree, u64>,
    other: u64,
    oracle: &[(Tree, f64)],
) -> Result<(), HarnessError> {
    let total: u64 = counts.values().sum::<u64>() + other;
    let level = report.thresholds.ci_level;
    let known: BTreeSet<&Tree> = oracle.iter().map(|(t, _)| t).collect();
    let mut observed = Vec::new();
    let mut probs = Vec::new();
    let mut empirical = BTreeMap::new();
    let mut expected = BTreeMap::new();
    for (tree, p) in oracle {
        let c = counts.get(tree).copied().unwrap_or(0);
        observed.push(c);
        probs.push(*p);
        report
            .probabilities
            .push(ProbabilityRow::new(table, tree.to_string(), Some(tree.card()), c, total, *p, level));
        empirical.insert(tree.to_string(), c as f64 / total as f64);
        expected.insert(tree.to_string(), *p);
    }
    let unexpected: u64 = counts.iter().filter(|(t, _)| !known.contains(t)).map(|(_, c)| c).sum();
    let rest = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    observed.push(other + unexpected);
    probs.push(rest);
    empirical.insert("other".into(), (other + unexpected) as f64 / total as f64);
    expected.insert("other".into(), rest);
    report.count(&format!("{table} other"), other + unexpected);
    let chi = chi_square_gof(&observed, &probs)?;
    let tv = tv_distance(&empirical, &expected);
    chi_check(report, table, chi, Some(tv));
    Ok(())
}

/// Law of `φ(τ⁰, ℳ(τ⁰))` against `GW(Y)` on small trees, plus the exact
/// comparison of `Card` of that tree with `M(τ) | M(τ) ≥ 1`.
pub fn run_phi_law_check<S: Scalar>(
    law: &OffspringLaw<S>,
    q: &MarkFunction<S>,
    cfg: &RunConfig,
) -> Result<ExperimentReport, HarnessError> {
    let start = Instant::now();
    let mut report = ExperimentReport::new("phi-law", Parameters::new(law, Some(q), cfg), cfg.thresholds);
    report.gate = Some(run_gate(law, q, GATE_ORDER, "oracle_gate", &mut report)?);
    let y = laws::y_law(law, q, WalkDpOptions::default())?;
    let y_law = y.as_offspring_law()?;
    report.parameters.extra.insert("y_law".into(), format!("{y_law:?}"));

    let oracle_cells: Vec<(Tree, f64)> = oracle::enumerate_trees(&y_law, PHI_MAX_SIZE)?
        .entries
        .into_iter()
        .map(|(t, p)| (t, p.as_f64()))
        .collect();

    #[derive(Default)]
    struct Part {
        counts: BTreeMap<Tree, u64>,
        other: u64,
        unmarked: u64,
        overflows: u64,
    }
    let sampler = DegreeSampler::with_marks(law, q);
    let parts = run_chunks(cfg.samples, cfg.chunk, cfg.seed, 0, |count, rng| {
        let mut part = Part::default();
        let mut accepted = 0;
        while accepted < count {
            match sample_marked_gw_bounded(&sampler, cfg.node_cap, PHI_MAX_SIZE, rng) {
                None => {
                    part.other += 1;
                    accepted += 1;
                }
                Some(GwDraw::Overflow { .. }) => part.overflows += 1,
                Some(GwDraw::Tree(mt)) if mt.mark_count() == 0 => part.unmarked += 1,
                Some(GwDraw::Tree(mt)) => {
                    let out = marked_phi(&mt).expect("marks are nonempty");
                    *part.counts.entry(out).or_insert(0) += 1;
                    accepted += 1;
                }
            }
        }
        part
    });
    let mut counts = BTreeMap::new();
    let (mut other, mut unmarked, mut overflows) = (0, 0, 0);
    for part in parts {
        counts = merge_counts([counts, part.counts]);
        other += part.other;
        unmarked += part.unmarked;
        overflows += part.overflows;
    }
    report.count("rejected without marks", unmarked);
    report.count("overflows", overflows);
    tree_law_table(&mut report, "phi_output", &counts, other, &oracle_cells)?;
    overflow_check(&mut report, overflows, cfg.samples + unmarked + overflows);

    // Card(φ) = M, so Card of GW(Y) must be M conditioned on M ≥ 1
    let card_y = oracle::card_series(&y_law, GATE_ORDER)?;
    let m = oracle::m_series(law, q, GATE_ORDER)?;
    let gamma = S::one() - m.prob(0);
    let tv: S = (1..GATE_ORDER)
        .map(|n| (card_y.prob(n) - m.prob(n) / gamma.clone()).abs())
        .sum::<S>()
        / S::from_ratio(2, 1);
    let tv = tv.as_f64();
    let bound = cfg.thresholds.series_tolerance + y.tail_bound();
    report.value("series_tv card(GW(Y)) vs M|M≥1", tv, Some(0.0), Some(bound));
    report.check(
        "series cross-check",
        tv <= bound,
        format!("TV {tv:.3e} over sizes < {GATE_ORDER} (bound {bound:.1e})"),
    );
    report.finish(start.elapsed());
    Ok(report)
}

/// Law of the tree grafted on a reduced tree against `P(τ = t | k_∅ > 0)`,
/// with the per-draw identity between protected vertices and marks.
pub fn run_hat_tau_check<S: Scalar>(law: &OffspringLaw<S>, cfg: &RunConfig) -> Result<ExperimentReport, HarnessError> {
    let start = Instant::now();
    let mut report = ExperimentReport::new("hat-tau", Parameters::new(law, None, cfg), cfg.thresholds);
    law.require_critical()?;
    let sampler = HatTauSampler::new(law, cfg.node_cap)?;
    let nonleaf = S::one() - law.p0();
    let oracle_cells: Vec<(Tree, f64)> = oracle::enumerate_trees(law, HAT_MAX_SIZE)?
        .entries
        .into_iter()
        .filter(|(t, _)| t.card() > 1)
        .map(|(t, p)| (t, (p / nonleaf.clone()).as_f64()))
        .collect();

    #[derive(Default)]
    struct Part {
        counts: BTreeMap<Tree, u64>,
        other: u64,
        overflows: u64,
        violations: u64,
    }
    let parts = run_chunks(cfg.samples, cfg.chunk, cfg.seed, 0, |count, rng| {
        let mut part = Part::default();
        let mut done = 0;
        while done < count {
            match sample_hat_tau(&sampler, rng) {
                GwDraw::Overflow { .. } => {
                    // far larger than any χ² cell, but the identity is unchecked
                    part.overflows += 1;
                    part.other += 1;
                }
                GwDraw::Tree(hat) => {
                    done += 1;
                    if !hat.identity_holds() {
                        part.violations += 1;
                    }
                    if hat.grafted.card() <= HAT_MAX_SIZE {
                        *part.counts.entry(hat.grafted).or_insert(0) += 1;
                    } else {
                        part.other += 1;
                    }
                }
            }
        }
        part
    });
    let mut counts = BTreeMap::new();
    let (mut other, mut overflows, mut violations) = (0, 0, 0);
    for part in parts {
        counts = merge_counts([counts, part.counts]);
        other += part.other;
        overflows += part.overflows;
        violations += part.violations;
    }
    let checked = cfg.samples;
    report.count("identity checked", checked);
    report.count("identity violations", violations);
    report.count("overflows", overflows);
    if violations > 0 {
        return Err(HarnessError::IdentityViolation { violations, draws: checked });
    }
    report.check("identity", true, format!("A(grafted) = M(marks) on all {checked} completed draws"));
    tree_law_table(&mut report, "grafted", &counts, other, &oracle_cells)?;
    let frac = overflows as f64 / (cfg.samples + overflows) as f64;
    report.value("overflow fraction", frac, None, None);
    report.finish(start.elapsed());
    Ok(report)
}

/// Which count a series or a conditioning refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeriesKind {
    /// Marks `M(τ)`.
    M,
    /// Protected vertices `A(τ)`.
    A,
    /// Size `Card(τ)`.
    Card,
}

/// `P(A = n)` against `(1 − p(0)) P(M(τ_ℕ*) = n)` (and the leaf term at
/// `n = 0`); returns the largest absolute difference as `f64`.
pub fn protected_identity_gap<S: Scalar>(
    law: &OffspringLaw<S>,
    a: &SeriesDist<S>,
) -> Result<f64, HarnessError> {
    let reduced = laws::reduced_law(law)?;
    let qp = laws::protected_mark_function(law)?;
    let m = oracle::m_series(&reduced, &qp, a.len())?;
    let nonleaf = S::one() - law.p0();
    let gap = (0..a.len())
        .map(|n| {
            let mut rhs = nonleaf.clone() * m.prob(n);
            if n == 0 {
                rhs = rhs + law.p0();
            }
            (a.prob(n) - rhs).abs().as_f64()
        })
        .fold(0.0, f64::max);
    Ok(gap)
}

/// Window ratios `r(n)` of the law of `M`, `A` or `Card`, and their drift
/// to 1.
pub fn run_ratio_check<S: Scalar>(
    law: &OffspringLaw<S>,
    q: &MarkFunction<S>,
    kind: SeriesKind,
    n_max: usize,
    trend_from: usize,
    cfg: &RunConfig,
) -> Result<ExperimentReport, HarnessError> {
    let start = Instant::now();
    let mut params = Parameters::new(law, (kind == SeriesKind::M).then_some(q), cfg);
    params.n_values = vec![trend_from, n_max];
    params.extra.insert("series".into(), format!("{kind:?}"));
    let mut report = ExperimentReport::new("ratio", params, cfg.thresholds);
    let gate_q = if kind == SeriesKind::M { q.clone() } else { MarkFunction::all() };
    report.gate = Some(run_gate(law, &gate_q, GATE_ORDER, "oracle_gate", &mut report)?);

    let order = n_max + GATE_ORDER;
    let series = match kind {
        SeriesKind::M => oracle::m_series(law, q, order)?,
        SeriesKind::Card => oracle::card_series(law, order)?,
        SeriesKind::A => {
            law.require_critical()?;
            oracle::a_series(law, order)?
        }
    };
    let d = series
        .span_shifted(1)
        .map_err(|_| HarnessError::SparseSupport(format!("no support point above 1 below {order}")))?
        as usize;
    report.parameters.extra.insert("span".into(), d.to_string());
    let table = oracle::ratio_table(&series, d, n_max)?;
    let name = format!("{kind:?}");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for entry in &table {
        let ratio = entry.ratio.as_ref().map(Scalar::as_f64);
        let deviation = ratio.map(|r| (r - 1.0).abs());
        if let Some(dev) = deviation {
            if entry.n >= trend_from {
                xs.push(entry.n as f64);
                ys.push(dev);
            }
        }
        report.ratios.push(RatioRow {
            series: name.clone(),
            n: entry.n,
            ratio,
            deviation,
            error_bound: entry.error_bound,
        });
    }
    let last = report.ratios.last().and_then(|r| r.deviation);
    let bound = cfg.thresholds.ratio_bound;
    report.check(
        "final ratio",
        last.is_some_and(|dev| dev <= bound),
        format!("|r({n_max}) − 1| = {last:?} (bound {bound})"),
    );
    if xs.len() < 2 {
        return Err(HarnessError::SparseSupport(format!(
            "fewer than two finite ratios on [{trend_from}, {n_max}]"
        )));
    }
    if kind != SeriesKind::Card {
        let strict = ys.windows(2).all(|w| w[1] < w[0]);
        report.check(
            "strictly decreasing",
            strict,
            format!("|r(n) − 1| strictly decreasing on [{trend_from}, {n_max}]: {strict}"),
        );
    }
    let slope = ls_slope(&xs, &ys);
    report.value("trend slope of |r(n) − 1|", slope, None, Some(0.0));
    report.check(
        "trend",
        slope < 0.0,
        format!("least-squares slope {slope:.3e} on [{trend_from}, {n_max}]"),
    );
    if kind == SeriesKind::A {
        let positive = series.probs[..=n_max].iter().all(Scalar::is_positive_mass);
        report.check("A support", positive, format!("P(A = n) > 0 for all n ≤ {n_max}"));
        let gap = protected_identity_gap(law, &series)?;
        let tol = if S::EXACT { 0.0 } else { cfg.thresholds.series_tolerance };
        report.value("max |P(A=n) − (1−p0) P(M(reduced)=n)|", gap, Some(0.0), Some(tol));
        report.check("reduction identity", gap <= tol, format!("largest difference {gap:.3e}"));
    }
    report.finish(start.elapsed());
    Ok(report)
}

/// Rejection sampler for either conditioning.
#[derive(Debug, Clone)]
pub enum Conditioner {
    Marks(MarkConditioner),
    Protected(ProtectedConditioner),
}

impl Conditioner {
    pub fn new<S: Scalar>(
        law: &OffspringLaw<S>,
        q: &MarkFunction<S>,
        kind: SeriesKind,
        n: usize,
        budget: crate::samplers::Budget,
    ) -> Result<Self, SampleError> {
        match kind {
            SeriesKind::A => Ok(Conditioner::Protected(ProtectedConditioner::new(law, n, budget)?)),
            SeriesKind::M => Ok(Conditioner::Marks(MarkConditioner::new(law, q, n, budget)?)),
            SeriesKind::Card => Ok(Conditioner::Marks(MarkConditioner::new(law, &MarkFunction::all(), n, budget)?)),
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<Conditioned, SampleError> {
        match self {
            Conditioner::Marks(c) => c.sample(rng),
            Conditioner::Protected(c) => c.sample(rng),
        }
    }

    pub fn target_probability(&self) -> f64 {
        match self {
            Conditioner::Marks(c) => c.target_probability,
            Conditioner::Protected(c) => c.target_probability,
        }
    }
}

/// Ball-event frequencies of `τ_n` (conditioned on `M = n` or `A = n`)
/// against Kesten's tree.
pub fn run_local_limit_check<S: Scalar>(
    law: &OffspringLaw<S>,
    q: &MarkFunction<S>,
    kind: SeriesKind,
    n_list: &[usize],
    events: &[BallEvent],
    cfg: &RunConfig,
) -> Result<ExperimentReport, HarnessError> {
    let start = Instant::now();
    let mut params = Parameters::new(law, (kind != SeriesKind::A).then_some(q), cfg);
    params.n_values = n_list.to_vec();
    params.extra.insert("conditioning".into(), format!("{kind:?}"));
    params
        .extra
        .insert("events".into(), events.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "));
    let mut report = ExperimentReport::new("local-limit", params, cfg.thresholds);
    law.require_critical()?;
    let max_n = n_list.iter().copied().max().unwrap_or(0);
    let gate_q = if kind == SeriesKind::M { q.clone() } else { MarkFunction::all() };
    report.gate = Some(run_gate(law, &gate_q, GATE_ORDER.max(max_n + 2), "oracle_gate", &mut report)?);
    let level = cfg.thresholds.ci_level;

    let targets: Vec<f64> = events.iter().map(|e| oracle::kesten_ball_prob(law, e).as_f64()).collect();
    let bases: Vec<Tree> = events
        .iter()
        .map(|e| e.base().clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let exact_series = match kind {
        SeriesKind::A => None,
        _ => Some(oracle::m_series(law, &gate_q, max_n + 2)?),
    };

    // Kesten's tree cut at the TV height
    let kesten = KestenSampler::new(law)?;
    let kesten_law = merge_counts(run_chunks(cfg.samples, cfg.chunk, cfg.seed, u32::MAX as u64, |count, rng| {
        let mut counts: BTreeMap<Restriction, u64> = BTreeMap::new();
        for _ in 0..count {
            *counts.entry(sample_kesten(&kesten, TV_HEIGHT, rng).restriction).or_insert(0) += 1;
        }
        counts
    }));
    let kesten_law = stats::normalize(&kesten_law);

    #[derive(Default)]
    struct Part {
        hits: Vec<u64>,
        equal: Vec<u64>,
        restrictions: BTreeMap<Restriction, u64>,
        accepted: u64,
        attempts: u64,
        overflows: u64,
        exhausted: bool,
    }
    for (i, &n) in n_list.iter().enumerate() {
        let cond = Conditioner::new(law, q, kind, n, cfg.budget)?;
        let parts = run_chunks(cfg.samples, cfg.chunk, cfg.seed, (i as u64 + 1) << 32, |count, rng| {
            let mut part = Part {
                hits: vec![0; events.len()],
                equal: vec![0; bases.len()],
                ..Part::default()
            };
            for _ in 0..count {
                match cond.sample(rng) {
                    Ok(c) => {
                        part.accepted += 1;
                        part.attempts += c.attempts;
                        part.overflows += c.overflows;
                        for (j, e) in events.iter().enumerate() {
                            part.hits[j] += c.tree.ball_member(e) as u64;
                        }
                        for (j, b) in bases.iter().enumerate() {
                            part.equal[j] += (c.tree == *b) as u64;
                        }
                        *part.restrictions.entry(c.tree.restrict(TV_HEIGHT)).or_insert(0) += 1;
                    }
                    Err(_) => {
                        part.exhausted = true;
                        break;
                    }
                }
            }
            part
        });
        let mut total = Part {
            hits: vec![0; events.len()],
            equal: vec![0; bases.len()],
            ..Part::default()
        };
        for part in parts {
            for (a, b) in total.hits.iter_mut().zip(&part.hits) {
                *a += b;
            }
            for (a, b) in total.equal.iter_mut().zip(&part.equal) {
                *a += b;
            }
            total.restrictions = merge_counts([std::mem::take(&mut total.restrictions), part.restrictions]);
            total.accepted += part.accepted;
            total.attempts += part.attempts;
            total.overflows += part.overflows;
            total.exhausted |= part.exhausted;
        }
        if total.exhausted {
            report.partial = true;
            report.check(format!("budget n={n}"), false, format!("rejection budget exhausted at n = {n}"));
        }
        report.count(&format!("accepted n={n}"), total.accepted);
        report.count(&format!("attempts n={n}"), total.attempts);
        report.count(&format!("overflows n={n}"), total.overflows);

        let target = cond.target_probability();
        let rate = total.accepted as f64 / total.attempts.max(1) as f64;
        let sd = (target * (1.0 - target) / total.attempts.max(1) as f64).sqrt();
        report.value(format!("acceptance n={n}"), rate, Some(target), Some(cfg.thresholds.sigmas * sd));
        report.check(
            format!("acceptance n={n}"),
            (rate - target).abs() <= cfg.thresholds.sigmas * sd,
            format!("rate {rate:.6e} vs oracle P = {target:.6e} ({:.1}σ)", (rate - target).abs() / sd),
        );

        for (j, e) in events.iter().enumerate() {
            let mut row = ProbabilityRow::new("ball", e.to_string(), Some(n), total.hits[j], total.accepted, targets[j], level);
            if let Some(series) = &exact_series {
                let exact = oracle::conditioned_ball_prob(law, &gate_q, series, e, n, 1)?;
                row.exact = Some(exact.conditional.as_f64());
            }
            report.probabilities.push(row);
        }
        for (j, b) in bases.iter().enumerate() {
            report.probabilities.push(ProbabilityRow::new(
                "point",
                b.to_string(),
                Some(n),
                total.equal[j],
                total.accepted,
                0.0,
                level,
            ));
        }
        let tv = tv_distance(&stats::normalize(&total.restrictions), &kesten_law);
        report.value(format!("tv restrict(·,{TV_HEIGHT}) n={n}"), tv, Some(0.0), None);
    }

    let tol = cfg.thresholds.gap_tolerance;
    for e in events {
        let key = e.to_string();
        let rows: Vec<ProbabilityRow> = report.probability_rows("ball").filter(|r| r.key == key).cloned().collect();
        let decreasing = rows
            .windows(2)
            .all(|w| w[1].gap <= w[0].gap + w[0].half_width() + w[1].half_width());
        let gaps: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.gap)).collect();
        if rows.len() >= 2 {
            let xs: Vec<f64> = rows.iter().map(|r| r.n.unwrap_or(0) as f64).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.gap).collect();
            report.value(format!("gap slope {e}"), ls_slope(&xs, &ys), None, Some(0.0));
        }
        let name = format!("decreasing gap {e}");
        report.check(name, decreasing, format!("gaps {}", gaps.join(", ")));
        if let Some(last) = rows.last() {
            let ok = last.gap <= last.half_width() + tol;
            let detail = format!("gap {:.4} vs CI half-width {:.4} + {tol}", last.gap, last.half_width());
            report.check(format!("final gap {e}"), ok, detail);
        }
    }
    for b in &bases {
        if let Some(last) = report.probability_rows("point").filter(|r| r.key == b.to_string()).last() {
            let (ok, detail) = (last.count == 0, format!("{} hits at n = {max_n}", last.count));
            report.check(format!("P(τ_n = {b}) = 0"), ok, detail);
        }
    }
    report.finish(start.elapsed());
    Ok(report)
}

/// Smallest `count` ball events over the support of `law`, ordered by
/// base size, base degree sequence and leaf.
pub fn default_panel<S: Scalar>(law: &OffspringLaw<S>, count: usize) -> Result<Vec<BallEvent>, HarnessError> {
    let mut n_max = 1;
    loop {
        let table = oracle::enumerate_trees(law, n_max)?;
        let mut events = Vec::new();
        for (tree, _) in &table.entries {
            for leaf in tree.leaves() {
                events.push(BallEvent::new(tree.clone(), leaf)?);
            }
        }
        if events.len() >= count || n_max > 16 {
            events.truncate(count);
            return Ok(events);
        }
        n_max += 1;
    }
}

/// Three support points of the conditioned count: small, medium and the
/// largest one at most `n_cap` whose probability is at least `min_prob`.
pub fn default_n_list<S: Scalar>(
    law: &OffspringLaw<S>,
    q: &MarkFunction<S>,
    kind: SeriesKind,
    min_prob: f64,
    n_cap: usize,
) -> Result<Vec<usize>, HarnessError> {
    let law = law.to_f64();
    let series = match kind {
        SeriesKind::A => oracle::a_series(&law, n_cap + 1)?,
        SeriesKind::M => oracle::m_series(&law, &q.to_f64(), n_cap + 1)?,
        SeriesKind::Card => oracle::card_series(&law, n_cap + 1)?,
    };
    let support: Vec<usize> = (2..=n_cap).filter(|&n| series.prob(n) >= min_prob).collect();
    let (Some(&small), Some(&large)) = (support.first(), support.last()) else {
        return Err(HarnessError::SparseSupport(format!("no n in [2, {n_cap}] with P ≥ {min_prob}")));
    };
    let mid_target = ((small * large) as f64).sqrt();
    let medium = *support
        .iter()
        .min_by(|a, b| ((**a as f64) - mid_target).abs().total_cmp(&((**b as f64) - mid_target).abs()))
        .unwrap();
    let mut out = vec![small, medium, large];
    out.dedup();
    Ok(out)
}

/// Ball-event frequencies of Kesten's tree against `P(τ = t)/(μ^|x| p(0))`.
pub fn run_kesten_check<S: Scalar>(
    law: &OffspringLaw<S>,
    events: &[BallEvent],
    cfg: &RunConfig,
) -> Result<ExperimentReport, HarnessError> {
    let start = Instant::now();
    let mut report = ExperimentReport::new("kesten", Parameters::new(law, None, cfg), cfg.thresholds);
    let sampler = KestenSampler::new(law)?;
    let h = events
        .iter()
        .map(|e| (e.fixed_depth() + 1).max(e.leaf().generation() as u32))
        .max()
        .unwrap_or(1);
    report.parameters.extra.insert("height".into(), h.to_string());
    let parts = run_chunks(cfg.samples, cfg.chunk, cfg.seed, 0, |count, rng| {
        let mut hits = vec![0u64; events.len()];
        for _ in 0..count {
            let slice = sample_kesten(&sampler, h, rng);
            for (j, e) in events.iter().enumerate() {
                hits[j] += slice.restriction.ball_member(e).expect("height covers the event") as u64;
            }
        }
        hits
    });
    let level = cfg.thresholds.ci_level;
    for (j, e) in events.iter().enumerate() {
        let hits: u64 = parts.iter().map(|p| p[j]).sum();
        let target = oracle::kesten_ball_prob(law, e).as_f64();
        let row = ProbabilityRow::new("kesten", e.to_string(), None, hits, cfg.samples, target, level);
        let detail = format!("{:.6} in [{:.6}, {:.6}] vs {target:.6}", row.empirical, row.ci_low, row.ci_high);
        report.check(format!("ci {e}"), row.oracle_in_ci(), detail);
        report.probabilities.push(row);
    }
    report.finish(start.elapsed());
    Ok(report)
}

/// Offspring law of the tree built on the marks: exact criticality from the
/// walk dynamic program and a Monte Carlo mean over the walk sampler.
pub fn run_walk_check<S: Scalar>(
    law: &OffspringLaw<S>,
    q: &MarkFunction<S>,
    horizon: u64,
    cfg: &RunConfig,
) -> Result<ExperimentReport, HarnessError> {
    let start = Instant::now();
    let mut report = ExperimentReport::new("walk", Parameters::new(law, Some(q), cfg), cfg.thresholds);
    let y = laws::y_law(law, q, WalkDpOptions::default())?;
    let mean = y.mean().as_f64();
    let tail = y.tail_bound();
    let slack = if S::EXACT { 0.0 } else { 1e-12 };
    report.value("E[Y] (walk DP)", mean, Some(1.0), Some(tail));
    report.value("tail bound", tail, None, Some(1e-6));
    report.check("criticality of Y", (mean - 1.0).abs() <= tail + slack, format!("|E[Y] − 1| = {:.3e}", (mean - 1.0).abs()));
    report.check("tail bound", tail <= 1e-6, format!("{tail:.3e}"));

    let mut walk = WalkSampler::new(law, q, horizon)?;
    walk.resolve_g = false;
    let gamma = walk.gamma();
    #[derive(Default)]
    struct Part {
        walks: u64,
        accepted: u64,
        censored: u64,
        sum: f64,
        sum_sq: f64,
    }
    let parts = run_chunks(cfg.samples, cfg.chunk, cfg.seed, 0, |count, rng| {
        let mut part = Part::default();
        while part.accepted < count {
            let rec = sample_walk(&walk, rng);
            part.walks += 1;
            match rec.accepted {
                None => part.censored += 1,
                Some(false) => {}
                Some(true) => {
                    let y = rec.y.unwrap() as f64;
                    part.accepted += 1;
                    part.sum += y;
                    part.sum_sq += y * y;
                }
            }
        }
        part
    });
    let mut total = Part::default();
    for p in parts {
        total.walks += p.walks;
        total.accepted += p.accepted;
        total.censored += p.censored;
        total.sum += p.sum;
        total.sum_sq += p.sum_sq;
    }
    report.count("walks", total.walks);
    report.count("accepted", total.accepted);
    report.count("censored", total.censored);
    let sigmas = cfg.thresholds.sigmas;
    let (mc_mean, se) = stats::mean_and_se(total.sum, total.sum_sq, total.accepted);
    report.value("E[Y] (Monte Carlo)", mc_mean, Some(1.0), Some(sigmas * se));
    report.check(
        "Monte Carlo mean",
        (mc_mean - 1.0).abs() <= sigmas * se + slack,
        format!("{mc_mean:.5} ± {se:.5}"),
    );
    let freq = total.accepted as f64 / total.walks as f64;
    let sd = (gamma * (1.0 - gamma) / total.walks as f64).sqrt();
    let censored_frac = total.censored as f64 / total.walks as f64;
    report.value("P(N ≤ G)", freq, Some(gamma), Some(sigmas * sd + censored_frac));
    report.check(
        "acceptance vs gamma",
        (freq - gamma).abs() <= sigmas * sd + censored_frac + slack,
        format!("{freq:.6} vs γ = {gamma:.6}"),
    );
    report.finish(start.elapsed());
    Ok(report)
}

/// Reduced-law checks, equality in law of `A(τ⁰)` and `M(τ⁰_ℕ*)`, and the
/// ball-event panel under conditioning on `A`.
pub fn run_protected_pipeline_check<S: Scalar>(
    law: &OffspringLaw<S>,
    n_list: &[usize],
    events: &[BallEvent],
    cfg: &RunConfig,
    panel_cfg: &RunConfig,
) -> Result<ExperimentReport, HarnessError> {
    let start = Instant::now();
    let stage = |stage: &'static str| move |e: HarnessError| HarnessError::Stage { stage, source: Box::new(e) };
    let mut params = Parameters::new(law, None, cfg);
    params.n_values = n_list.to_vec();
    let mut report = ExperimentReport::new("protected", params, cfg.thresholds);

    // reduced law
    let reduced = laws::reduced_law(law).map_err(|e| stage("reduced_law")(e.into()))?;
    let critical = reduced.require_critical().is_ok();
    report.check("reduced_law critical", critical, format!("{reduced:?}, mean {}", reduced.mean()));
    let qp = laws::protected_mark_function(law).map_err(|e| stage("reduced_law")(e.into()))?;
    report.check("reduced_law q range", true, format!("{qp:?}"));
    report.parameters.extra.insert("reduced_law".into(), format!("{reduced:?}"));
    report.parameters.extra.insert("protected_marks".into(), format!("{qp:?}"));
    for k in 0..=reduced.max_degree() {
        report.value(format!("reduced p({k})"), reduced.p(k).as_f64(), None, None);
    }

    // equality in law
    report.gate = Some(run_gate(law, &MarkFunction::all(), GATE_ORDER, "oracle_gate", &mut report).map_err(stage("distribution"))?);
    run_gate(&reduced, &qp, GATE_ORDER, "oracle_gate reduced", &mut report).map_err(stage("distribution"))?;
    let a = oracle::a_series(law, GATE_ORDER).map_err(|e| stage("distribution")(e.into()))?;
    let gap = protected_identity_gap(law, &a).map_err(stage("distribution"))?;
    let tol = if S::EXACT { 0.0 } else { cfg.thresholds.series_tolerance };
    report.value("max |P(A=n) − (1−p0) P(M(reduced)=n)|", gap, Some(0.0), Some(tol));
    report.check("series identity", gap <= tol, format!("largest difference {gap:.3e}"));

    let nonleaf = (S::one() - law.p0()).as_f64();
    let mut oracle_cells: Vec<f64> = (0..=COUNT_CELLS)
        .map(|n| {
            let p = a.prob(n).as_f64() - if n == 0 { law.p0().as_f64() } else { 0.0 };
            p / nonleaf
        })
        .collect();
    oracle_cells.push((1.0 - oracle_cells.iter().sum::<f64>()).max(0.0));

    let plain = DegreeSampler::new(law);
    let marked = DegreeSampler::with_marks(&reduced, &qp);
    let cap = cfg.node_cap;
    // A(τ⁰) per draw, with τ⁰ = τ given a nonleaf root
    let a_parts = run_chunks(cfg.samples, cfg.chunk, cfg.seed, 0, |count, rng| {
        let mut cells = vec![0u64; COUNT_CELLS + 2];
        let mut overflows = 0u64;
        let mut done = 0;
        'draw: while done < count {
            let mut counter = ProtectedCounter::new();
            let mut open: i64 = 1;
            let mut nodes = 0;
            while open > 0 {
                if nodes >= cap {
                    overflows += 1;
                    continue 'draw;
                }
                let k = plain.degree(rng);
                if nodes == 0 && k == 0 {
                    continue 'draw;
                }
                nodes += 1;
                counter.push(k);
                if counter.count() > COUNT_CELLS {
                    break;
                }
                open += k as i64 - 1;
            }
            cells[counter.count().min(COUNT_CELLS + 1)] += 1;
            done += 1;
        }
        (cells, overflows)
    });
    let m_parts = run_chunks(cfg.samples, cfg.chunk, cfg.seed, 1 << 32, |count, rng| {
        let mut cells = vec![0u64; COUNT_CELLS + 2];
        let mut overflows = 0u64;
        let mut done = 0;
        while done < count {
            match sample_marked_gw_bounded(&marked, cap, COUNT_CELLS, rng) {
                None => cells[COUNT_CELLS + 1] += 1,
                Some(GwDraw::Overflow { .. }) => {
                    overflows += 1;
                    continue;
                }
                Some(GwDraw::Tree(mt)) => cells[mt.mark_count()] += 1,
            }
            done += 1;
        }
        (cells, overflows)
    });
    let sum_cells = |parts: Vec<(Vec<u64>, u64)>| {
        parts.into_iter().fold((vec![0u64; COUNT_CELLS + 2], 0u64), |(mut acc, o), (c, oo)| {
            for (a, b) in acc.iter_mut().zip(c) {
                *a += b;
            }
            (acc, o + oo)
        })
    };
    let (a_cells, a_over) = sum_cells(a_parts);
    let (m_cells, m_over) = sum_cells(m_parts);
    report.count("overflows A", a_over);
    report.count("overflows M", m_over);
    overflow_check(&mut report, a_over + m_over, 2 * cfg.samples + a_over + m_over);
    let level = cfg.thresholds.ci_level;
    for n in 0..=COUNT_CELLS.min(10) {
        let p = oracle_cells[n];
        report.probabilities.push(ProbabilityRow::new("A(τ⁰)", n.to_string(), Some(n), a_cells[n], cfg.samples, p, level));
        report.probabilities.push(ProbabilityRow::new("M(reduced)", n.to_string(), Some(n), m_cells[n], cfg.samples, p, level));
    }
    let chi = chi_square_two_sample(&a_cells, &m_cells).map_err(stage("distribution"))?;
    chi_check(&mut report, "A(τ⁰) vs M(reduced)", chi, None);
    let chi = chi_square_gof(&a_cells, &oracle_cells).map_err(stage("distribution"))?;
    chi_check(&mut report, "A(τ⁰) vs series", chi, None);
    let chi = chi_square_gof(&m_cells, &oracle_cells).map_err(stage("distribution"))?;
    chi_check(&mut report, "M(reduced) vs series", chi, None);

    // local limit under A-conditioning
    let panel = run_local_limit_check(law, &MarkFunction::all(), SeriesKind::A, n_list, events, panel_cfg)
        .map_err(stage("local_limit"))?;
    report.stages.push(panel);
    report.finish(start.elapsed());
    Ok(report)
}

/// `cfg.samples` complete GW trees checked against the structural identity;
/// returns `(trees checked, violations, overflows)`. Draws that hit the node
/// budget are redrawn.
pub fn lukasiewicz_survey<S: Scalar>(law: &OffspringLaw<S>, cfg: &RunConfig) -> (u64, u64, u64) {
    let sampler = DegreeSampler::new(law);
    run_chunks(cfg.samples, cfg.chunk, cfg.seed, 0, |count, rng| {
        let (mut ok, mut bad, mut over) = (0, 0, 0);
        while ok + bad < count {
            match sample_gw(&sampler, cfg.node_cap, rng) {
                GwDraw::Tree(t) if t.lukasiewicz_sum() == -1 => ok += 1,
                GwDraw::Tree(_) => bad += 1,
                GwDraw::Overflow { .. } => over += 1,
            }
        }
        (ok, bad, over)
    })
    .into_iter()
    .fold((0, 0, 0), |a, b| (a.0 + b.0 + b.1, a.1 + b.1, a.2 + b.2))
}
