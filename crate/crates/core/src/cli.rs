//! Command-line front end. Every command writes a single JSON document (or
//! a CSV table for `cloud`) to standard output.
//!
//! Exit statuses: 0 success, 1 input error, 2 budget refusal or solver
//! failure, 3 probe failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num::BigRational;
use serde_json::{json, Value};

use crate::action::FiniteAction;
use crate::error::{Error, Result};
use crate::group_window::{build_window, GroupWindow, Word};
use crate::irs::{type_of, DEFAULT_CANON_BUDGET};
use crate::moment::{
    cloud_set, containment_defect, moment_cloud, series_distance, truncation_bound, CloudOptions, DistanceMode,
    Partition, Strategy, DEFAULT_PARTITION_BUDGET,
};
use crate::probe::{
    axiom_suite, contraction_check, distance_convexity_check, mixture_hull_check, self_combination_defect,
    ProbeOptions, ProbeRecord, ProbeReport, DEFAULT_GRID_DENOMINATOR,
};
use crate::random_partition::claim1_experiment;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_PROBE: i32 = 3;

const STABLE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "wequiv", version, about = "Partition statistics and weak equivalence of finite group actions")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for every randomized step; recorded in the output.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: one per core).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// Maximum number of labelings examined per cloud.
    #[arg(long, global = true, env = "WEQUIV_BUDGET_PARTITIONS", default_value_t = DEFAULT_PARTITION_BUDGET,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub budget_partitions: u64,
    /// Largest orbit canonicalized by brute force.
    #[arg(long, global = true, env = "WEQUIV_BUDGET_CANON", default_value_t = DEFAULT_CANON_BUDGET as u64,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub budget_canon: u64,
    #[arg(long, global = true, value_enum, default_value_t = StrategyName::Exhaustive)]
    pub strategy: StrategyName,
    /// Sample count for the random strategy.
    #[arg(long, global = true, default_value_t = 1000)]
    pub samples: u64,
    /// Start count for the local search strategy.
    #[arg(long, global = true, default_value_t = 8)]
    pub starts: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyName {
    Exhaustive,
    Random,
    LocalSearch,
    OrbitSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeName {
    Points,
    Hulls,
}

impl From<ModeName> for DistanceMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Points => DistanceMode::Points,
            ModeName::Hulls => DistanceMode::Hulls,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Axioms,
    SelfCombination,
    Contraction,
    Convexity,
    Mixture,
}

#[derive(Debug, Args)]
pub struct Pair {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub cut: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Truncated partition metric between two actions.
    Distance(Pair),
    /// Truncated stable metric (convex hulls of clouds).
    Sdistance(Pair),
    /// Type distribution over canonical Schreier forms.
    Type {
        #[arg(long)]
        a: PathBuf,
    },
    /// One-sided containment defect of `a` in `b`.
    Contain {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, value_enum, default_value_t = ModeName::Points)]
        mode: ModeName,
    },
    /// Moment cloud as CSV.
    Cloud {
        #[arg(long)]
        a: PathBuf,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// Random two-coloring experiment.
    Claim1 {
        #[arg(long)]
        a: PathBuf,
        /// Window words, comma separated (default: the ball of radius 1).
        #[arg(long, value_delimiter = ',')]
        words: Option<Vec<String>>,
        /// Base partition labels, comma separated (default: one class).
        #[arg(long, value_delimiter = ',')]
        base: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        /// Also write per-trial deviations as CSV to this path.
        #[arg(long)]
        deviations_csv: Option<PathBuf>,
    },
    /// Run one property suite.
    Probe {
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        probe: ProbeArgs,
    },
    /// Weak convex space axioms on the given actions.
    Axioms {
        #[command(flatten)]
        probe: ProbeArgs,
    },
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub a: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<PathBuf>,
    #[arg(long)]
    pub c: Option<PathBuf>,
    /// Coefficients, comma separated rationals.
    #[arg(long, value_delimiter = ',', default_value = "1/2")]
    pub t: Vec<String>,
    #[arg(long, default_value_t = 4)]
    pub cut: usize,
    /// Representatives of the convex set (convexity suite).
    #[arg(long = "rep")]
    pub reps: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_GRID_DENOMINATOR)]
    pub grid_den: usize,
    #[arg(long, value_enum, default_value_t = ModeName::Points)]
    pub mode: ModeName,
    /// Mixture weights for the given actions (mixture suite).
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<String>>,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) => EXIT_INPUT,
        Error::Budget { .. } | Error::Solver(_) => EXIT_BUDGET,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                Outcome {
                    code: EXIT_INPUT,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code: EXIT_OK,
                    stdout: text,
                    stderr: String::new(),
                }
            }
        }
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let result = match cli.global.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n as usize).build() {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => Err(Error::input(format!("cannot start {n} worker threads: {e}"))),
        },
        None => dispatch(cli),
    };
    match result {
        Ok((doc, pass)) => Outcome {
            code: if pass { EXIT_OK } else { EXIT_PROBE },
            stdout: doc,
            stderr: if pass { String::new() } else { "probe failed\n".into() },
        },
        Err(e) => Outcome {
            code: exit_code(&e),
            stdout: String::new(),
            stderr: format!("{e}\n"),
        },
    }
}

fn load(path: &Path) -> Result<FiniteAction> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    let action: FiniteAction = text
        .parse()
        .map_err(|e: Error| Error::input(format!("{}: {e}", path.display())))?;
    if action.label().is_empty() {
        let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        Ok(action.with_label(stem))
    } else {
        Ok(action)
    }
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Error::input(format!("--{flag} is required for this suite")))
}

fn rational(s: &str) -> Result<BigRational> {
    s.trim()
        .parse()
        .map_err(|_| Error::input(format!("{s:?} is not a rational p/q")))
}

fn strategy(g: &Global) -> Strategy {
    match g.strategy {
        StrategyName::Exhaustive => Strategy::Exhaustive,
        StrategyName::Random => Strategy::Random {
            samples: g.samples,
            seed: g.seed,
        },
        StrategyName::LocalSearch => Strategy::LocalSearch {
            starts: g.starts,
            seed: g.seed,
        },
        StrategyName::OrbitSum => Strategy::OrbitSum,
    }
}

fn cloud_options(g: &Global) -> CloudOptions {
    CloudOptions {
        strategy: strategy(g),
        budget: g.budget_partitions,
    }
}

fn probe_options(g: &Global) -> ProbeOptions {
    ProbeOptions {
        cloud: cloud_options(g),
        canon_budget: g.budget_canon as usize,
    }
}

fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn window_for(a: &FiniteAction, n: usize) -> Result<GroupWindow> {
    GroupWindow::covering(a.generator_count().max(1), n)
}

fn dispatch(cli: &Cli) -> Result<(String, bool)> {
    let g = &cli.global;
    let opts = cloud_options(g);
    let strategy_name = opts.strategy.to_string();
    match &cli.command {
        Command::Distance(p) | Command::Sdistance(p) => {
            let mode = if matches!(cli.command, Command::Distance(_)) {
                DistanceMode::Points
            } else {
                DistanceMode::Hulls
            };
            let (a, b) = (load(&p.a)?, load(&p.b)?);
            let sa = cloud_set(&a, p.cut, &opts)?;
            let sb = cloud_set(&b, p.cut, &opts)?;
            let value = series_distance(&sa, &sb, mode)?;
            let doc = json!({
                "command": if mode == DistanceMode::Points { "distance" } else { "sdistance" },
                "a": a.label(),
                "b": b.label(),
                "mode": mode.name(),
                "value": value,
                "truncation_bound": truncation_bound(p.cut),
                "cut": p.cut,
                "n_max": p.cut - 1,
                "k_max": p.cut - 1,
                "strategy": strategy_name,
                "seed": g.seed,
            });
            Ok((to_json(&doc), true))
        }
        Command::Type { a } => {
            let a = load(a)?;
            let t = type_of(&a, g.budget_canon as usize)?;
            let doc = json!({
                "command": "type",
                "a": a.label(),
                "type": t.to_record(),
                "seed": g.seed,
            });
            Ok((to_json(&doc), true))
        }
        Command::Contain { a, b, n, k, mode } => {
            let (a, b) = (load(a)?, load(b)?);
            let window = window_for(&a, *n)?;
            let c = containment_defect(&a, &b, &window, *n, *k, (*mode).into(), &opts)?;
            let doc = json!({
                "command": "contain",
                "a": a.label(),
                "b": b.label(),
                "n": n,
                "k": k,
                "mode": DistanceMode::from(*mode).name(),
                "defect": c.defect,
                "witness": c.witness.labels(),
                "strategy": strategy_name,
                "seed": g.seed,
            });
            Ok((to_json(&doc), true))
        }
        Command::Cloud { a, n, k } => {
            let a = load(a)?;
            let window = window_for(&a, *n)?;
            let cloud = moment_cloud(&a, &window, *n, *k, &opts)?;
            Ok((cloud_csv(&cloud, &window.words()[..*n], g.seed), true))
        }
        Command::Claim1 {
            a,
            words,
            base,
            delta,
            trials,
            deviations_csv,
        } => {
            let a = load(a)?;
            let words: Vec<Word> = match words {
                Some(ws) => ws.iter().map(|w| w.parse()).collect::<Result<_>>()?,
                None => build_window(a.generator_count().max(1), 1)?.words().to_vec(),
            };
            let base = match base {
                Some(labels) => {
                    let classes = labels.iter().max().map_or(1, |m| m + 1);
                    Partition::new(labels.clone(), classes)?
                }
                None => Partition::new(vec![0; a.atom_count()], 1)?,
            };
            let stats = claim1_experiment(&a, &words, &base, *delta, *trials, g.seed)?;
            if let Some(path) = deviations_csv {
                let mut csv = String::from("trial,max_deviation\n");
                for (t, d) in stats.max_deviation_per_trial.iter().enumerate() {
                    writeln!(csv, "{t},{d}").expect("writing to a String");
                }
                std::fs::write(path, csv).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
            }
            let mut doc = json!({
                "command": "claim1",
                "a": a.label(),
                "words": words.iter().map(ToString::to_string).collect::<Vec<_>>(),
            });
            merge(&mut doc, serde_json::to_value(&stats).expect("stats serialize"));
            Ok((to_json(&doc), true))
        }
        Command::Probe { suite, probe } => run_probe(*suite, probe, g),
        Command::Axioms { probe } => run_probe(Suite::Axioms, probe, g),
    }
}

fn merge(doc: &mut Value, extra: Value) {
    if let (Value::Object(d), Value::Object(e)) = (doc, extra) {
        d.extend(e);
    }
}

fn run_probe(suite: Suite, p: &ProbeArgs, g: &Global) -> Result<(String, bool)> {
    let popts = probe_options(g);
    let opts = &popts.cloud;
    let ts = p.t.iter().map(|s| rational(s)).collect::<Result<Vec<_>>>()?;
    let first_t = ts.first().cloned().ok_or_else(|| Error::input("--t needs at least one value"))?;
    let given: Vec<FiniteAction> = [&p.a, &p.b, &p.c]
        .into_iter()
        .flatten()
        .map(|path| load(path))
        .collect::<Result<_>>()?;
    let mut extra = Value::Null;
    let report = match suite {
        Suite::Axioms => {
            if given.is_empty() {
                return Err(Error::input("the axiom suite needs at least --a"));
            }
            axiom_suite(&given, &ts, p.cut, &popts)?
        }
        Suite::SelfCombination => {
            let a = load(require(&p.a, "a")?)?;
            let s = self_combination_defect(&a, &first_t, p.cut, opts)?;
            extra = json!({ "atomic_defect": s.atomic_defect, "stable_defect": s.stable_defect });
            ProbeReport::new(
                "self_combination",
                STABLE_TOLERANCE,
                vec![ProbeRecord {
                    instance: format!("stable defect of {} against cc_{first_t}", a.label()),
                    lhs: s.stable_defect,
                    rhs: 0.0,
                    violation: s.stable_defect,
                    isomorphic: None,
                }],
            )
        }
        Suite::Contraction => {
            let a = load(require(&p.a, "a")?)?;
            let b = load(require(&p.b, "b")?)?;
            let c = load(require(&p.c, "c")?)?;
            let reports = ts
                .iter()
                .map(|t| contraction_check(&a, &b, &c, t, p.cut, opts))
                .collect::<Result<Vec<_>>>()?;
            ProbeReport::merge("contraction", reports)
        }
        Suite::Convexity => {
            let x = load(require(&p.a, "a")?)?;
            let y = load(require(&p.b, "b")?)?;
            let reps = p.reps.iter().map(|r| load(r)).collect::<Result<Vec<_>>>()?;
            let reports = ts
                .iter()
                .map(|t| distance_convexity_check(&x, &y, &reps, t, p.cut, p.grid_den, p.mode.into(), opts))
                .collect::<Result<Vec<_>>>()?;
            ProbeReport::merge("distance_convexity", reports)
        }
        Suite::Mixture => {
            if given.is_empty() {
                return Err(Error::input("the mixture suite needs at least --a"));
            }
            let weights: Vec<BigRational> = match &p.weights {
                Some(ws) => ws.iter().map(|s| rational(s)).collect::<Result<_>>()?,
                None => {
                    let each = BigRational::new(1.into(), (given.len() as i64).into());
                    vec![each; given.len()]
                }
            };
            if weights.len() != given.len() {
                return Err(Error::input(format!(
                    "{} weights for {} actions",
                    weights.len(),
                    given.len()
                )));
            }
            let terms: Vec<_> = weights.into_iter().zip(given.iter().cloned()).collect();
            let window = window_for(&given[0], p.n)?;
            mixture_hull_check(&terms, &window, p.n, p.k, opts)?
        }
    };
    let pass = report.pass;
    let mut doc = json!({
        "command": "probe",
        "suite": suite.to_possible_value().map(|v| v.get_name().to_string()),
        "cut": p.cut,
        "strategy": opts.strategy.to_string(),
        "seed": g.seed,
    });
    merge(&mut doc, extra);
    merge(&mut doc, json!({ "report": report }));
    Ok((to_json(&doc), pass))
}

/// One row per point; columns are the entries in `p`-`q`-`r` order followed
/// by the least labeling producing the point.
pub fn cloud_csv(cloud: &crate::moment::MomentCloud, words: &[Word], seed: u64) -> String {
    let (n, k) = (cloud.n(), cloud.k());
    let mut out = String::new();
    let w = |out: &mut String, s: String| out.push_str(&s);
    w(&mut out, format!("# moment cloud of {}\n", cloud.action_label()));
    w(
        &mut out,
        format!(
            "# n={n} k={k} points={} exhaustive={} strategy={} seed={seed}\n",
            cloud.len(),
            cloud.exhaustive(),
            cloud.strategy_note()
        ),
    );
    let names: Vec<String> = words.iter().map(ToString::to_string).collect();
    w(&mut out, format!("# words g_0..g_{}: {}\n", n - 1, names.join(" ")));
    w(
        &mut out,
        "# column m_p_q_r = mu(g_p A_q ∩ A_r), p slowest, r fastest; witness = least labeling\n".into(),
    );
    let mut header: Vec<String> = Vec::with_capacity(n * k * k + 1);
    for p in 0..n {
        for q in 0..k {
            for r in 0..k {
                header.push(format!("m_{p}_{q}_{r}"));
            }
        }
    }
    header.push("witness".into());
    w(&mut out, header.join(",") + "\n");
    for (pt, wit) in cloud.points().iter().zip(cloud.witnesses()) {
        let mut row: Vec<String> = pt.to_f64().iter().map(|x| x.to_string()).collect();
        row.push(wit.labels().iter().map(ToString::to_string).collect::<Vec<_>>().join(" "));
        w(&mut out, row.join(",") + "\n");
    }
    out
}
