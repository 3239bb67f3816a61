//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Criteria 3, 7 and 9 only run after the oracle
//! gate (criterion 10) has passed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gwmark::harness::*;
use gwmark::laws::{self, MarkFunction, OffspringLaw};
use gwmark::oracle;
use gwmark::scalar::{Rational, Scalar};
use gwmark::transforms::{rizzolo_phi, SubsetSelection};

type Outcome = Result<String, String>;
type Criterion<'a> = (u32, &'a str, Box<dyn Fn() -> Outcome + 'a>);

fn r(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn binary() -> OffspringLaw<Rational> {
    OffspringLaw::binary_critical()
}

/// Support {0, 1, 2}, covering every tree with out-degrees at most 2.
fn unary_binary() -> OffspringLaw<Rational> {
    OffspringLaw::new(vec![r(1, 4), r(1, 2), r(1, 4)]).unwrap()
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn report_outcome(report: &ExperimentReport) -> Outcome {
    let failed: Vec<String> = report
        .checks
        .iter()
        .chain(report.stages.iter().flat_map(|s| s.checks.iter()))
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    if report.passed() {
        Ok(format!("{} checks passed", report.checks.len()))
    } else {
        Err(failed.join(" | "))
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took <= limit, format!("took {took:.1?}, limit {limit:?}"))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let table = oracle::enumerate_trees(&unary_binary(), 9).map_err(|e| e.to_string())?;
    let bad = table.entries.iter().filter(|(t, _)| t.lukasiewicz_sum() != -1).count();
    ensure(bad == 0, format!("{bad} enumerated trees violate the identity"))?;
    let cfg = RunConfig { samples: 1_000_000, seed: 1, ..RunConfig::default() };
    let (checked, violations, overflows) = lukasiewicz_survey(&binary(), &cfg);
    ensure(violations == 0, format!("{violations} sampled trees violate the identity"))?;
    within(Duration::from_secs(60), start)?;
    Ok(format!("{} enumerated and {checked} sampled trees, zero violations ({overflows} draws over the node budget redrawn)", table.entries.len()))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let table = oracle::enumerate_trees(&unary_binary(), 8).map_err(|e| e.to_string())?;
    let mut subsets = 0u64;
    for (tree, _) in &table.entries {
        let n = tree.card();
        for mask in 1u32..(1 << n) {
            let flags: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let sel = SubsetSelection::from_flags(tree.clone(), flags).map_err(|e| e.to_string())?;
            let out = rizzolo_phi(&sel);
            ensure(
                out.card() == mask.count_ones() as usize,
                format!("Card(φ) = {} for {tree} with {} marks", out.card(), mask.count_ones()),
            )?;
            if mask == (1 << n) - 1 {
                ensure(out == *tree, format!("φ(t, t) ≠ t for {tree}"))?;
            }
            subsets += 1;
        }
    }
    within(Duration::from_secs(300), start)?;
    Ok(format!("{} trees, {subsets} subsets, zero violations", table.entries.len()))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig { samples: 1_000_000, seed: 3, ..RunConfig::default() };
    let report = run_phi_law_check(&binary(), &MarkFunction::internal(), &cfg).map_err(|e| e.to_string())?;
    report_outcome(&report)?;
    let chi = &report.chi_square[0];
    let tv = report.values.iter().find(|v| v.name.starts_with("series_tv")).unwrap().value;
    ensure(tv < 1e-9, format!("series TV {tv:e}"))?;
    within(Duration::from_secs(600), start)?;
    Ok(format!("χ² p = {:.4} on {} dof, series TV = {tv:e}", chi.chi.p_value, chi.chi.dof))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    for (name, q) in [("q ≡ 1", MarkFunction::all()), ("q = 1{k ≥ 1}", MarkFunction::internal())] {
        let cfg = RunConfig { samples: 1_000_000, seed: 4, ..RunConfig::default() };
        let report = run_walk_check(&binary(), &q, 1 << 20, &cfg).map_err(|e| e.to_string())?;
        report_outcome(&report).map_err(|e| format!("{name}: {e}"))?;
        let mc = report.values.iter().find(|v| v.name.contains("Monte Carlo")).unwrap();
        lines.push(format!("{name}: E[Y] MC {:.4} ± {:.4}", mc.value, mc.bound.unwrap() / 3.0));
    }
    within(Duration::from_secs(300), start)?;
    Ok(lines.join(", "))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig { samples: 1_000_000, seed: 5, ..RunConfig::default() };
    let report = run_hat_tau_check(&binary(), &cfg).map_err(|e| e.to_string())?;
    report_outcome(&report)?;
    within(Duration::from_secs(600), start)?;
    Ok(format!(
        "{} draws checked, 0 violations, χ² p = {:.4}",
        report.counters["identity checked"], report.chi_square[0].chi.p_value
    ))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let law = binary();
    let reduced = laws::reduced_law(&law).map_err(|e| e.to_string())?;
    ensure(reduced.weights() == [r(1, 4), r(1, 2), r(1, 4)], format!("{reduced:?}"))?;
    ensure(reduced.mean() == r(1, 1), "mean is not 1")?;
    let q = laws::protected_mark_function(&law).map_err(|e| e.to_string())?;
    ensure(q.q(2) == r(1, 1) && q.q(1) == r(0, 1), format!("{q:?}"))?;
    within(Duration::from_secs(1), start)?;
    Ok("reduced law (1/4, 1/2, 1/4), mean 1, q(1) = 0, q(2) = 1".into())
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let law = binary();
    let card = run_ratio_check(&law, &MarkFunction::all(), SeriesKind::Card, 200, 50, &cfg).map_err(|e| e.to_string())?;
    report_outcome(&card).map_err(|e| format!("Card: {e}"))?;
    let dev = card.ratios.last().unwrap().deviation.unwrap();
    ensure(dev <= 0.008, format!("|r(200) − 1| = {dev}"))?;

    // adjacent-support ratio against the Catalan closed form
    let series = oracle::card_series(&law, 210).map_err(|e| e.to_string())?;
    let m = 100;
    let ratio = (series.prob(2 * m + 3) / series.prob(2 * m + 1)).as_f64();
    let closed = (2 * m + 1) as f64 / (2 * m + 4) as f64;
    ensure((ratio - closed).abs() <= 1e-9, format!("series {ratio} vs closed form {closed}"))?;

    let a = run_ratio_check(&law, &MarkFunction::all(), SeriesKind::A, 200, 50, &cfg).map_err(|e| e.to_string())?;
    report_outcome(&a).map_err(|e| format!("A: {e}"))?;
    let geo = OffspringLaw::<f64>::geometric(0.5, 64).map_err(|e| e.to_string())?;
    let half = MarkFunction::constant(0.5).map_err(|e| e.to_string())?;
    let m_report = run_ratio_check(&geo, &half, SeriesKind::M, 200, 50, &cfg).map_err(|e| e.to_string())?;
    report_outcome(&m_report).map_err(|e| format!("M: {e}"))?;
    within(Duration::from_secs(120), start)?;
    Ok(format!(
        "Card |r(200) − 1| = {dev}, P(201+2)/P(201) = {ratio:.9} = 201/204; A |r(200) − 1| = {:.5}, M |r(200) − 1| = {:.5}",
        a.ratios.last().unwrap().deviation.unwrap(),
        m_report.ratios.last().unwrap().deviation.unwrap()
    ))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let law = binary();
    let panel = default_panel(&law, 5).map_err(|e| e.to_string())?;
    let targets: Vec<Rational> = panel.iter().map(|e| oracle::kesten_ball_prob(&law, e)).collect();
    for t in [r(1, 1), r(1, 4), r(1, 16)] {
        ensure(targets.contains(&t), format!("panel lacks target {t}"))?;
    }
    let cfg = RunConfig { samples: 1_000_000, seed: 8, ..RunConfig::default() };
    let report = run_kesten_check(&law, &panel, &cfg).map_err(|e| e.to_string())?;
    report_outcome(&report)?;
    within(Duration::from_secs(300), start)?;
    let rows: Vec<String> = report
        .probabilities
        .iter()
        .map(|p| format!("{} {:.4}/{:.4}", p.key, p.empirical, p.oracle))
        .collect();
    Ok(rows.join("; "))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let law = binary();
    let panel = default_panel(&law, 5).map_err(|e| e.to_string())?;
    let cfg = RunConfig { samples: 100_000, seed: 9, ..RunConfig::default() };
    let marks = run_local_limit_check(&law, &MarkFunction::all(), SeriesKind::M, &[5, 21, 51], &panel, &cfg)
        .map_err(|e| e.to_string())?;
    report_outcome(&marks).map_err(|e| format!("M-conditioning: {e}"))?;
    let pairs = RunConfig { samples: 1_000_000, ..cfg.clone() };
    let protected = run_protected_pipeline_check(&law, &[2, 5, 10], &panel, &pairs, &cfg).map_err(|e| e.to_string())?;
    report_outcome(&protected).map_err(|e| format!("A-conditioning: {e}"))?;
    within(Duration::from_secs(1800), start)?;
    let cherry = panel[1].to_string();
    let gaps = |report: &ExperimentReport| {
        report
            .probability_rows("ball")
            .filter(|p| p.key == cherry)
            .map(|p| format!("{:.4}", p.gap))
            .collect::<Vec<_>>()
            .join(", ")
    };
    Ok(format!("{cherry} gaps, M-conditioning: {}; A-conditioning: {}", gaps(&marks), gaps(&protected.stages[0])))
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let geo = OffspringLaw::geometric(r(1, 2), 12).map_err(|e| e.to_string())?;
    let cases: Vec<(&str, OffspringLaw<Rational>, MarkFunction<Rational>)> = vec![
        ("binary, q ≡ 1", binary(), MarkFunction::all()),
        ("binary, q = 1{k ≥ 1}", binary(), MarkFunction::internal()),
        ("binary, q = 1/2", binary(), MarkFunction::constant(r(1, 2)).unwrap()),
        ("unary-binary, leaves", unary_binary(), MarkFunction::leaves()),
        ("geometric, q = 1/2", geo, MarkFunction::constant(r(1, 2)).unwrap()),
    ];
    for (name, law, q) in &cases {
        let gate = oracle::validate_series(law, q, 64).map_err(|e| format!("{name}: {e}"))?;
        ensure(gate.passed(), format!("{name}: {}", gate.mismatches.join("; ")))?;
    }
    Ok(format!("{} law/mark pairs agree exactly on trees ≤ {} vertices ({:.1?})", cases.len(), oracle::GATE_MAX_SIZE, start.elapsed()))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut line = |id: u32, name: &str, outcome: &Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} [{tag}] {name}: {detail}");
    };
    let gate = criterion_10();
    line(10, "oracle validation gate", &gate);
    let gated = |f: fn() -> Outcome| if gate.is_ok() { f() } else { Err("skipped: oracle gate failed".into()) };
    let criteria: [Criterion; 9] = [
        (1, "tree identity", Box::new(criterion_1)),
        (2, "φ cardinality", Box::new(criterion_2)),
        (3, "φ output law", Box::new(move || gated(criterion_3))),
        (4, "criticality of Y", Box::new(criterion_4)),
        (5, "grafting identity", Box::new(criterion_5)),
        (6, "reduced law", Box::new(criterion_6)),
        (7, "ratio limits", Box::new(move || gated(criterion_7))),
        (8, "Kesten ball formula", Box::new(criterion_8)),
        (9, "local limits", Box::new(move || gated(criterion_9))),
    ];
    for (id, name, f) in criteria.iter() {
        let start = Instant::now();
        let outcome = f();
        line(*id, name, &outcome);
        eprintln!("  ({:.1?})", start.elapsed());
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
