//! `fairkg` command line.
//!
//! Settings resolve as defaults < `--config FILE` < flags. Failures print one JSON
//! object `{"error": {"kind": ..., "message": ...}}` on stderr and exit with status 1;
//! outputs of the failing command are never left behind.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{FairkgError, Result};
use crate::pipeline::{self, Inputs};

#[derive(Debug, Parser)]
#[command(
    name = "fairkg",
    version,
    about = "Fairness-aware re-ranking of knowledge-graph explainable recommendations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic imbalanced marketplace (triples.tsv, test.tsv, stats.json).
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Train translational embeddings (embeddings.tsv).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        triples: Option<PathBuf>,
        #[arg(long)]
        dim: Option<String>,
        #[arg(long)]
        epochs: Option<String>,
    },
    /// Build top-N candidates with explanation paths (candidates.jsonl).
    Paths {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        triples: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        top_n: Option<String>,
        /// Highest-scoring paths kept per candidate.
        #[arg(long)]
        max_paths: Option<String>,
    },
    /// Fairness-constrained selection and ranking (rerank.json, trace.csv, explanations.txt).
    Rerank {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fairness: FairnessArgs,
        #[arg(long)]
        triples: Option<PathBuf>,
        #[arg(long)]
        candidates: Option<PathBuf>,
    },
    /// Score baseline and fair lists against held-out purchases (report.json, report.csv).
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        triples: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        rerank: Option<PathBuf>,
    },
    /// Reports over lists of α and β (sweep.json, sweep.csv).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fairness: FairnessArgs,
        #[arg(long)]
        triples: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        candidates: Option<PathBuf>,
    },
    /// Human-readable table and plot-ready CSVs (table.txt, sid_distribution.csv, gini_curve.csv).
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key=value` settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub workers: Option<String>,
    /// Output directory, also the default location of every input.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub users: Option<String>,
    #[arg(long)]
    pub items: Option<String>,
    #[arg(long)]
    pub skew: Option<String>,
    #[arg(long)]
    pub max_purchases: Option<String>,
}

#[derive(Debug, Args)]
pub struct FairnessArgs {
    /// Single value; a comma-separated list for `sweep`.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Single value; a comma-separated list for `sweep`.
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub group_ratio: Option<String>,
    /// `group` or `individual`.
    #[arg(long)]
    pub constraint_mode: Option<String>,
    /// `baseline`, `inf`, a value, or `quality,diversity`.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// `auto` or a positive value.
    #[arg(long)]
    pub lambda: Option<String>,
    /// `auto` or a positive value.
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub max_iterations: Option<String>,
    #[arg(long)]
    pub max_kicks: Option<String>,
}

type Setting<'a> = (&'static str, &'a Option<String>);

impl Common {
    fn settings(&self) -> [Setting<'_>; 3] {
        [
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("out", &self.out),
        ]
    }
}

impl SynthArgs {
    fn settings(&self) -> [Setting<'_>; 4] {
        [
            ("users", &self.users),
            ("items", &self.items),
            ("skew", &self.skew),
            ("max-purchases", &self.max_purchases),
        ]
    }
}

impl FairnessArgs {
    fn settings(&self, sweep: bool) -> [Setting<'_>; 10] {
        let (a, b) = if sweep {
            ("sweep-alpha", "sweep-beta")
        } else {
            ("alpha", "beta")
        };
        [
            (a, &self.alpha),
            (b, &self.beta),
            ("k", &self.k),
            ("group-ratio", &self.group_ratio),
            ("constraint-mode", &self.constraint_mode),
            ("epsilon", &self.epsilon),
            ("lambda", &self.lambda),
            ("gamma", &self.gamma),
            ("max-iterations", &self.max_iterations),
            ("max-kicks", &self.max_kicks),
        ]
    }
}

fn resolve<'a>(
    common: &'a Common,
    flags: impl IntoIterator<Item = Setting<'a>>,
) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    for (key, value) in common.settings().into_iter().chain(flags) {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Resolves the configuration and runs one subcommand; returns the files written.
pub fn execute(command: &Command) -> Result<Vec<PathBuf>> {
    match command {
        Command::Generate { common, synth } => {
            let cfg = resolve(common, synth.settings())?;
            pipeline::generate(&cfg)
        }
        Command::Train {
            common,
            triples,
            dim,
            epochs,
        } => {
            let cfg = resolve(common, [("dim", dim), ("epochs", epochs)])?;
            let inputs = Inputs {
                triples: triples.clone(),
                ..Inputs::default()
            };
            pipeline::train(&cfg, &inputs)
        }
        Command::Paths {
            common,
            triples,
            embeddings,
            top_n,
            max_paths,
        } => {
            let cfg = resolve(common, [("top-n", top_n), ("max-paths", max_paths)])?;
            let inputs = Inputs {
                triples: triples.clone(),
                embeddings: embeddings.clone(),
                ..Inputs::default()
            };
            pipeline::paths(&cfg, &inputs)
        }
        Command::Rerank {
            common,
            fairness,
            triples,
            candidates,
        } => {
            let cfg = resolve(common, fairness.settings(false))?;
            let inputs = Inputs {
                triples: triples.clone(),
                candidates: candidates.clone(),
                ..Inputs::default()
            };
            pipeline::rerank(&cfg, &inputs)
        }
        Command::Evaluate {
            common,
            triples,
            test,
            rerank,
        } => {
            let cfg = resolve(common, [])?;
            let inputs = Inputs {
                triples: triples.clone(),
                test: test.clone(),
                rerank: rerank.clone(),
                ..Inputs::default()
            };
            pipeline::evaluate(&cfg, &inputs)
        }
        Command::Sweep {
            common,
            fairness,
            triples,
            test,
            candidates,
        } => {
            let cfg = resolve(common, fairness.settings(true))?;
            let inputs = Inputs {
                triples: triples.clone(),
                test: test.clone(),
                candidates: candidates.clone(),
                ..Inputs::default()
            };
            pipeline::sweep(&cfg, &inputs)
        }
        Command::Report { common, report } => {
            let cfg = resolve(common, [])?;
            let inputs = Inputs {
                report: report.clone(),
                ..Inputs::default()
            };
            pipeline::report(&cfg, &inputs)
        }
    }
}

/// One-line JSON error record.
pub fn error_json(e: &FairkgError) -> String {
    serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string()
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
