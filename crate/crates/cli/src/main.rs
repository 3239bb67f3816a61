//! `gwmark`: samplers, exact series and verification runs for marked
//! Galton-Watson trees.
//!
//! Exit status: 0 when every verdict passes, 1 on a statistical or
//! verification failure, 2 on usage and configuration errors.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gwmark::harness::{self, config, ExperimentReport, HarnessError, RunConfig, SeriesKind};
use gwmark::oracle;
use gwmark::samplers::{self, Budget, GwDraw, RngHandle};
use gwmark::transforms::{rizzolo_phi, SubsetSelection};
use gwmark::{Address, BallEvent, MarkFunction, OffspringLaw, Rational, Scalar, Tree};

#[derive(Parser)]
#[command(name = "gwmark", version, about = "Marked Galton-Watson trees: samplers, exact oracles and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an offspring law and report its mean and reduced law.
    ValidateLaw {
        #[command(flatten)]
        law: LawArgs,
    },
    /// Draw trees, one serialized tree per line.
    Sample {
        #[arg(value_enum)]
        kind: SampleKind,
        #[command(flatten)]
        law: LawArgs,
        /// Conditioning value for `conditioned`.
        #[arg(long)]
        n: Option<usize>,
        /// Count to condition on.
        #[arg(long, value_enum, default_value_t = By::Marks)]
        by: By,
        /// Restriction height for `kesten`.
        #[arg(long, default_value_t = 3)]
        height: u32,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Apply Rizzolo's map to a tree and a nonempty set of vertices.
    Phi {
        /// Preorder out-degrees, e.g. "2 0 0".
        #[arg(long)]
        tree: String,
        /// Marked vertices, e.g. "root,1.2"; every vertex when omitted.
        #[arg(long, value_delimiter = ',')]
        marks: Vec<String>,
    },
    /// Exact or float law of M, A or Card as CSV.
    Series {
        #[arg(value_enum)]
        kind: SeriesArg,
        #[command(flatten)]
        law: LawArgs,
        /// Number of coefficients.
        #[arg(long, default_value_t = 64)]
        order: usize,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification experiment and write its JSON report.
    Check {
        #[arg(value_enum)]
        kind: CheckKind,
        #[command(flatten)]
        law: LawArgs,
        #[command(flatten)]
        check: CheckArgs,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct LawArgs {
    /// Offspring law: JSON file or inline JSON such as '{"p": {"0": "1/2", "2": "1/2"}}'.
    #[arg(long)]
    law: String,
    /// Mark function: JSON file or inline JSON; marks every vertex when omitted.
    #[arg(long)]
    q: Option<String>,
    #[arg(long, value_enum, default_value_t = ArithArg::Exact)]
    arith: ArithArg,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 10)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Node budget per draw.
    #[arg(long, default_value_t = 1_000_000)]
    cap: usize,
    /// Rejection attempts per conditioned draw.
    #[arg(long, default_value_t = 100_000_000)]
    max_attempts: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Conditioning values, comma separated; chosen from the series when omitted.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Series for `ratio`.
    #[arg(long, value_enum, default_value_t = SeriesArg::Card)]
    series: SeriesArg,
    #[arg(long, default_value_t = 200)]
    n_max: usize,
    #[arg(long, default_value_t = 50)]
    trend_from: usize,
    /// Count to condition on for `local-limit`.
    #[arg(long, value_enum, default_value_t = By::Marks)]
    by: By,
    /// Ball events as TREE@LEAF, e.g. "2 0 0@1"; the smallest ones when omitted.
    #[arg(long)]
    event: Vec<String>,
    /// Size of the default event panel.
    #[arg(long, default_value_t = 5)]
    events: usize,
    /// Significance level of the χ² tests.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArithArg {
    Exact,
    Float,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleKind {
    Gw,
    Kesten,
    Conditioned,
    Hat,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum By {
    Marks,
    Protected,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeriesArg {
    M,
    A,
    Card,
}

impl From<SeriesArg> for SeriesKind {
    fn from(s: SeriesArg) -> Self {
        match s {
            SeriesArg::M => SeriesKind::M,
            SeriesArg::A => SeriesKind::A,
            SeriesArg::Card => SeriesKind::Card,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    PhiLaw,
    HatTau,
    Ratio,
    LocalLimit,
    Protected,
    Kesten,
    Walk,
}

/// A run that completed but whose verdict failed.
#[derive(Debug)]
struct Failed;

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("verdict: fail")
    }
}

impl std::error::Error for Failed {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_statistical(&e) => {
            eprintln!("gwmark: {e:#}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("gwmark: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn is_statistical(e: &anyhow::Error) -> bool {
    if e.downcast_ref::<Failed>().is_some() {
        return true;
    }
    let mut harness_err = e.downcast_ref::<HarnessError>();
    while let Some(HarnessError::Stage { source, .. }) = harness_err {
        harness_err = Some(source);
    }
    matches!(harness_err, Some(HarnessError::GateFailed(_) | HarnessError::IdentityViolation { .. }))
}

fn run(command: Command) -> Result<()> {
    let arith = match &command {
        Command::ValidateLaw { law } | Command::Sample { law, .. } | Command::Series { law, .. } => law.arith,
        Command::Check { law, .. } => law.arith,
        Command::Phi { .. } => return phi(command),
    };
    match arith {
        ArithArg::Exact => dispatch::<Rational>(command),
        ArithArg::Float => dispatch::<f64>(command),
    }
}

fn dispatch<S: Scalar>(command: Command) -> Result<()> {
    match command {
        Command::ValidateLaw { law } => validate_law::<S>(&law),
        Command::Sample { kind, law, n, by, height, run } => sample::<S>(kind, &law, n, by, height, &run),
        Command::Series { kind, law, order, out } => series::<S>(kind, &law, order, out),
        Command::Check { kind, law, check, run } => run_check::<S>(kind, &law, &check, &run),
        Command::Phi { .. } => unreachable!(),
    }
}

/// Inline JSON or a path to a JSON file.
fn read_json(arg: &str) -> Result<String> {
    if arg.trim_start().starts_with('{') {
        return Ok(arg.to_string());
    }
    fs::read_to_string(arg).with_context(|| format!("reading {arg}"))
}

fn load<S: Scalar>(args: &LawArgs) -> Result<(OffspringLaw<S>, MarkFunction<S>)> {
    let law = config::parse_law(&read_json(&args.law)?).context("offspring law")?;
    let q = match &args.q {
        Some(q) => config::parse_marks(&read_json(q)?).context("mark function")?,
        None => MarkFunction::all(),
    };
    Ok((law, q))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing to stdout"),
    }
}

fn validate_law<S: Scalar>(args: &LawArgs) -> Result<()> {
    let (law, q) = load::<S>(args)?;
    gwmark::laws::check_pair(&law, &q)?;
    let mut text = String::new();
    writeln!(text, "law: {law:?}")?;
    writeln!(text, "support: {:?}", law.support())?;
    writeln!(text, "mean: {} ({:?})", law.mean(), law.criticality())?;
    if law.require_critical().is_ok() {
        let reduced = gwmark::laws::reduced_law(&law)?;
        writeln!(text, "reduced law: {reduced:?}")?;
        writeln!(text, "protected marks: {:?}", gwmark::laws::protected_mark_function(&law)?)?;
        match gwmark::laws::gamma(&law, &q) {
            Ok(g) => writeln!(text, "gamma: {g}")?,
            Err(e) => writeln!(text, "gamma: unavailable ({e})")?,
        }
    }
    emit(&None, &text)
}

fn sample<S: Scalar>(kind: SampleKind, args: &LawArgs, n: Option<usize>, by: By, height: u32, run: &RunArgs) -> Result<()> {
    let (law, q) = load::<S>(args)?;
    let mut rng = RngHandle::new(run.seed, 0);
    let mut text = String::new();
    match kind {
        SampleKind::Gw => {
            let sampler = samplers::DegreeSampler::with_marks(&law, &q);
            for _ in 0..run.samples {
                match samplers::sample_marked_gw(&sampler, run.cap, &mut rng) {
                    GwDraw::Tree(mt) => {
                        let marks: Vec<String> = mt.marks().iter().map(|a| a.to_string()).collect();
                        writeln!(text, "{}\t{}", mt.tree, marks.join(","))?;
                    }
                    GwDraw::Overflow { nodes } => writeln!(text, "overflow\t{nodes}")?,
                }
            }
        }
        SampleKind::Kesten => {
            let sampler = samplers::KestenSampler::new(&law)?;
            for _ in 0..run.samples {
                let slice = samplers::sample_kesten(&sampler, height, &mut rng);
                let spine: Vec<String> = slice.spine.iter().map(|a| a.to_string()).collect();
                writeln!(text, "{}\t{}", slice.restriction, spine.join(","))?;
            }
        }
        SampleKind::Conditioned => {
            let n = n.ok_or_else(|| anyhow!("`sample conditioned` needs --n"))?;
            let budget = Budget { max_nodes: run.cap, max_attempts: run.max_attempts };
            let kind = if by == By::Protected { SeriesKind::A } else { SeriesKind::M };
            let cond = harness::Conditioner::new(&law, &q, kind, n, budget)?;
            for _ in 0..run.samples {
                let c = cond.sample(&mut rng)?;
                writeln!(text, "{}\t{}", c.tree, c.attempts)?;
            }
        }
        SampleKind::Hat => {
            let sampler = samplers::HatTauSampler::new(&law, run.cap)?;
            for _ in 0..run.samples {
                match samplers::sample_hat_tau(&sampler, &mut rng) {
                    GwDraw::Tree(hat) => {
                        let marks: Vec<String> = hat.marks().iter().map(|a| a.to_string()).collect();
                        writeln!(text, "{}\t{}\t{}", hat.reduced, hat.grafted, marks.join(","))?;
                    }
                    GwDraw::Overflow { nodes } => writeln!(text, "overflow\t{nodes}")?,
                }
            }
        }
    }
    emit(&run.out, &text)
}

fn phi(command: Command) -> Result<()> {
    let Command::Phi { tree, marks } = command else { unreachable!() };
    let tree: Tree = tree.parse()?;
    let subset: BTreeSet<Address> = if marks.is_empty() {
        tree.addresses().into_iter().collect()
    } else {
        marks.iter().map(|m| m.parse()).collect::<Result<_, _>>()?
    };
    let sel = SubsetSelection::new(tree, &subset)?;
    println!("{}", rizzolo_phi(&sel));
    Ok(())
}

fn series<S: Scalar>(kind: SeriesArg, args: &LawArgs, order: usize, out: Option<PathBuf>) -> Result<()> {
    let (law, q) = load::<S>(args)?;
    let dist = match kind {
        SeriesArg::M => oracle::m_series(&law, &q, order)?,
        SeriesArg::A => oracle::a_series(&law, order)?,
        SeriesArg::Card => oracle::card_series(&law, order)?,
    };
    let mut text = String::from("n,probability,rational,tail_bound\n");
    let tail = dist.tail.as_f64();
    for (n, p) in dist.probs.iter().enumerate() {
        let rational = p.rational_string().unwrap_or_default();
        writeln!(text, "{n},{:e},{rational},{tail:e}", p.as_f64())?;
    }
    emit(&out, &text)
}

fn parse_event(text: &str) -> Result<BallEvent> {
    let (tree, leaf) = text
        .rsplit_once('@')
        .ok_or_else(|| anyhow!("event {text:?} is not TREE@LEAF"))?;
    Ok(BallEvent::new(tree.parse()?, leaf.parse()?)?)
}

fn run_check<S: Scalar>(kind: CheckKind, args: &LawArgs, check: &CheckArgs, run: &RunArgs) -> Result<()> {
    let (law, q) = load::<S>(args)?;
    let mut cfg = RunConfig {
        samples: run.samples,
        seed: run.seed,
        node_cap: run.cap,
        budget: Budget { max_nodes: run.cap, max_attempts: run.max_attempts },
        ..RunConfig::default()
    };
    if let Some(alpha) = check.alpha {
        cfg.thresholds.chi2_alpha = alpha;
    }
    let events = || -> Result<Vec<BallEvent>> {
        if check.event.is_empty() {
            Ok(harness::default_panel(&law, check.events)?)
        } else {
            check.event.iter().map(|e| parse_event(e)).collect()
        }
    };
    let n_list = |kind: SeriesKind| -> Result<Vec<usize>> {
        if check.n.is_empty() {
            Ok(harness::default_n_list(&law, &q, kind, 1e-6, 100)?)
        } else {
            Ok(check.n.clone())
        }
    };
    let report: ExperimentReport = match kind {
        CheckKind::PhiLaw => harness::run_phi_law_check(&law, &q, &cfg)?,
        CheckKind::HatTau => harness::run_hat_tau_check(&law, &cfg)?,
        CheckKind::Ratio => {
            harness::run_ratio_check(&law, &q, check.series.into(), check.n_max, check.trend_from, &cfg)?
        }
        CheckKind::LocalLimit => {
            let kind = if check.by == By::Protected { SeriesKind::A } else { SeriesKind::M };
            harness::run_local_limit_check(&law, &q, kind, &n_list(kind)?, &events()?, &cfg)?
        }
        CheckKind::Protected => {
            harness::run_protected_pipeline_check(&law, &n_list(SeriesKind::A)?, &events()?, &cfg, &cfg)?
        }
        CheckKind::Kesten => harness::run_kesten_check(&law, &events()?, &cfg)?,
        CheckKind::Walk => harness::run_walk_check(&law, &q, 1 << 20, &cfg)?,
    };
    emit(&run.out, &(report.to_json() + "\n"))?;
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("failed: {}: {}", c.name, c.detail);
    }
    eprintln!(
        "{}: {} ({:.1?})",
        report.name,
        if report.passed() { "pass" } else { "fail" },
        report.runtime
    );
    if !report.passed() {
        return Err(Failed.into());
    }
    Ok(())
}
