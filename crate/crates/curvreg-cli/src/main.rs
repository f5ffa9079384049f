use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use curvreg::bench::{digit_bench, leave_one_out_bench, load_labeled_dir, Preprocess};
use curvreg::classify::{classify_generic, PartitionReport};
use curvreg::config::{RhoMode, RunConfig, ENGINE_VERSION};
use curvreg::corpus::{load_shape, Manifest};
use curvreg::register::{match_pair, MatchReport};
use curvreg::similarity::{score, SimilarityScore};
use curvreg::store::{run_batch, FailedPair, Store};
use curvreg::synth::{generate, SynthOptions};

#[derive(Parser)]
#[command(name = "curvreg", version, about = "Curve registration, similarity and writer grouping")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Points per contour after resampling.
    #[arg(long, global = true)]
    resample: Option<usize>,
    #[arg(long = "alpha-base", global = true)]
    alpha_base: Option<f64>,
    /// `auto` or a positive number.
    #[arg(long, global = true)]
    rho: Option<String>,
    /// Exit with status 3 when a registration did not converge.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Register contour B onto contour A and print the report.
    Match {
        a: PathBuf,
        b: PathBuf,
        /// Overlay of reference, initial and fitted curves.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Compare all documents of a manifest and group them into hands.
    Classify {
        manifest: PathBuf,
        /// Store directory for pairwise results.
        #[arg(long, env = "CURVE_STORE")]
        store: Option<PathBuf>,
        /// Drop symbols whose intra-document scores fail the KS normality check.
        #[arg(long)]
        gate: bool,
        /// Write the partition JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic multi-hand corpus with ground truth.
    Synth {
        #[arg(long, default_value_t = 3)]
        hands: usize,
        #[arg(long = "docs-per-hand", default_value_t = 4)]
        docs_per_hand: usize,
        #[arg(long, default_value_t = 5)]
        symbols: usize,
        #[arg(long, default_value_t = 8)]
        instances: usize,
        #[arg(long, default_value_t = SynthOptions::default().noise)]
        noise: f64,
        /// No random scale, rotation or translation per instance.
        #[arg(long)]
        identity: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classification benches on image datasets.
    Bench {
        #[command(subcommand)]
        dataset: Dataset,
    },
}

#[derive(Subcommand)]
enum Dataset {
    /// `<dir>/{train,test}/<class>/<image>`; least mean error over random training groups.
    Mnist {
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 20])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
    /// `<dir>/<class>/<image>`; leave-one-out nearest mean error.
    Mpeg7 {
        dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long = "per-class", default_value_t = 20)]
        per_class: usize,
    },
}

enum Failure {
    Input(anyhow::Error),
    NotConverged(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn run_config(g: &GlobalArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(j) = g.jobs {
        cfg.parallelism = j.max(1);
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(n) = g.resample {
        anyhow::ensure!(n >= 16, "--resample must be at least 16");
        cfg.resample_n = n;
    }
    if let Some(a) = g.alpha_base {
        anyhow::ensure!(a >= 0.0, "--alpha-base must be non-negative");
        cfg.alpha_base = a;
    }
    if let Some(r) = &g.rho {
        cfg.rho = if r == "auto" {
            RhoMode::Auto
        } else {
            let v: f64 = r.parse().with_context(|| format!("--rho {r}"))?;
            anyhow::ensure!(v > 0.0, "--rho must be positive");
            RhoMode::Fixed(v)
        };
    }
    Ok(cfg)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct MatchOutput {
    #[serde(flatten)]
    report: MatchReport,
    score: SimilarityScore,
    engine_version: &'static str,
    seed: u64,
    config: RunConfig,
}

/// ρ for a single pair when none is given; one pair cannot be calibrated.
const SINGLE_PAIR_RHO: f64 = 1.0;

fn cmd_match(cfg: &RunConfig, a: &Path, b: &Path, svg: Option<&Path>, strict: bool) -> Outcome {
    let c1 = load_shape(a, cfg.resample_n).with_context(|| format!("loading {}", a.display()))?;
    let c2 = load_shape(b, cfg.resample_n).with_context(|| format!("loading {}", b.display()))?;
    let m = match_pair(&c1, &c2, &cfg.register).context("registration failed")?;
    let rho = match cfg.rho {
        RhoMode::Fixed(r) => r,
        RhoMode::Auto => SINGLE_PAIR_RHO,
    };
    let pair_id = format!("{}|{}", c1.id(), c2.id());
    let out = MatchOutput { report: m.report(pair_id), score: score(&m, rho)?, engine_version: ENGINE_VERSION, seed: cfg.seed, config: cfg.clone() };
    emit(&out, None)?;
    if let Some(p) = svg {
        std::fs::write(p, curvreg::svg::overlay(&c1, &m.initial, &m.fitted)).with_context(|| format!("writing {}", p.display()))?;
    }
    if strict && !m.converged {
        return Err(Failure::NotConverged("registration did not converge".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct ClassifyOutput {
    #[serde(flatten)]
    partition: PartitionReport,
    rho: f64,
    failed: Vec<FailedPair>,
    engine_version: &'static str,
    seed: u64,
    config: RunConfig,
}

fn cmd_classify(cfg: &RunConfig, manifest: &Path, store: Option<&Path>, gate: bool, out: Option<&Path>, strict: bool) -> Outcome {
    let m = Manifest::load(manifest)?;
    let docs = m.batch_documents(cfg.resample_n);
    let mut store = match store {
        Some(p) => Store::open(p).with_context(|| format!("opening store {}", p.display()))?,
        None => Store::in_memory(),
    };
    let batch = run_batch(&docs, cfg, &mut store, cfg.parallelism)?;
    log::info!("{} pairs computed, {} reused, {} failed", batch.computed, batch.reused, batch.failed.len());
    for f in &batch.failed {
        eprintln!("failed pair {}/{}#{} - {}#{}: {}", f.key.sym, f.key.doc_a, f.key.idx_a, f.key.doc_b, f.key.idx_b, f.error);
    }
    let partition = classify_generic(&batch.table, cfg.alpha_base, gate || cfg.ks_gate)?;
    let output = ClassifyOutput {
        partition: partition.report(),
        rho: batch.rho,
        failed: batch.failed,
        engine_version: ENGINE_VERSION,
        seed: cfg.seed,
        config: cfg.clone(),
    };
    emit(&output, out)?;
    eprint!("{}", partition.table());
    if strict && store.records().any(|r| !r.converged) {
        return Err(Failure::NotConverged("some registrations did not converge".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    let cfg = run_config(&cli.global)?;
    let strict = cli.global.strict;
    match cli.command {
        Command::Match { a, b, svg } => cmd_match(&cfg, &a, &b, svg.as_deref(), strict),
        Command::Classify { manifest, store, gate, out } => cmd_classify(&cfg, &manifest, store.as_deref(), gate, out.as_deref(), strict),
        Command::Synth { hands, docs_per_hand, symbols, instances, noise, identity, out } => {
            if hands == 0 || docs_per_hand == 0 || symbols == 0 || instances == 0 {
                return Err(Failure::Input(anyhow::anyhow!("all counts must be at least 1")));
            }
            let opts = SynthOptions { hands, docs_per_hand, symbols, instances, noise, transforms: !identity, seed: cfg.seed, ..Default::default() };
            std::fs::create_dir_all(&out)?;
            generate(&opts)?.write(&out)?;
            println!("{}", out.join("manifest.json").display());
            Ok(())
        }
        Command::Bench { dataset } => match dataset {
            Dataset::Mnist { dir, sizes, repeats } => {
                let train = load_labeled_dir(&dir.join("train"), cfg.resample_n, Preprocess::DIGITS, 0, 0)?;
                let test = load_labeled_dir(&dir.join("test"), cfg.resample_n, Preprocess::DIGITS, 0, 0)?;
                emit(&digit_bench(&train, &test, &sizes, repeats, &cfg, cfg.parallelism)?, None)?;
                Ok(())
            }
            Dataset::Mpeg7 { dir, classes, per_class } => {
                let shapes = load_labeled_dir(&dir, cfg.resample_n, Preprocess::SHAPES, classes, per_class)?;
                emit(&leave_one_out_bench(&shapes, &cfg, cfg.parallelism)?, None)?;
                Ok(())
            }
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
