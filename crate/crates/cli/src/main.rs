//! `riskcb`: runs, sweeps, reports and property checks for risk-averse
//! contextual bandits.
//!
//! Exit status: 0 on success, 1 on a runtime failure, 2 on a usage or
//! configuration error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riskcb::environments::EnvKind;

#[derive(Parser)]
#[command(
    name = "riskcb",
    version,
    about = "Risk-averse contextual bandits via online expectile regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration; omitted means an empty base table.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Dotted `key=value` override, applied in order (repeatable).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct OutputArgs {
    /// Output root; runs land in `<out>/runs/<run-id>/`.
    #[arg(short, long, env = "RISKCB_OUTPUT_ROOT", default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write its rounds, report and manifest.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, required_unless_present = "from_manifest")]
        seed: Option<u64>,
        /// Directory name under `runs/`; defaults to a prefix of the config hash.
        #[arg(long)]
        run_id: Option<String>,
        /// Regenerate a previous run from its directory's manifest.
        #[arg(long, value_name = "RUN_DIR", conflicts_with_all = ["config", "overrides", "seed"])]
        from_manifest: Option<PathBuf>,
    },
    /// Random search over the config's `[sweep]` ranges; keeps the best trial.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long)]
        seed: u64,
        /// Concurrent trials.
        #[arg(short, long)]
        jobs: Option<usize>,
    },
    /// Recompute reports from run logs and write curve, metric and Pareto CSVs.
    Report {
        /// Run directories, or directories containing run directories.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Comma-separated evaluation levels; defaults to each run's config.
        #[arg(long, value_delimiter = ',')]
        q_eval: Option<Vec<f64>>,
        /// Destination for the CSV files; defaults to `<output root>/reports`.
        #[arg(long)]
        dest: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Load the configured environment and summarize it.
    IngestCheck {
        #[command(flatten)]
        config: ConfigArgs,
        /// Shorthand for `--set env.path=...`.
        #[arg(long)]
        path: Option<PathBuf>,
        /// Shorthand for `--set env.kind=...`.
        #[arg(long)]
        kind: Option<EnvKind>,
        /// Shorthand for `--set env.schema=...`.
        #[arg(long)]
        schema: Option<String>,
        /// Shorthand for `--set env.target=...`.
        #[arg(long)]
        target: Option<String>,
    },
    /// Run property suites: indifference, oracle-delta, expectile, gradients or all.
    Verify {
        #[arg(required = true)]
        suites: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Meta-test mode: deliberately break the checked quantity.
        #[arg(long)]
        corrupt: bool,
    },
    /// Write a seeded synthetic dataset in an ingestible format.
    Synth {
        #[arg(long)]
        kind: EnvKind,
        #[arg(long, default_value_t = 20_000)]
        rows: usize,
        #[arg(long)]
        seed: u64,
        /// Target file; defaults to `<output root>/data/<kind>-<seed>.{csv,jsonl}`.
        #[arg(long)]
        file: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            output,
            seed,
            run_id,
            from_manifest,
        } => match (from_manifest, seed) {
            (Some(dir), _) => commands::rerun(&dir, &output.out, run_id.as_deref()),
            (None, Some(seed)) => {
                commands::run(&config.config, &config.overrides, &output.out, seed, run_id.as_deref())
            }
            (None, None) => unreachable!("clap requires --seed without --from-manifest"),
        },
        Command::Sweep {
            config,
            output,
            seed,
            jobs,
        } => commands::sweep(&config.config, &config.overrides, &output.out, seed, jobs),
        Command::Report {
            dirs,
            q_eval,
            dest,
            output,
        } => commands::report(
            &dirs,
            q_eval.as_deref(),
            &dest.unwrap_or_else(|| output.out.join("reports")),
        ),
        Command::IngestCheck {
            config,
            path,
            kind,
            schema,
            target,
        } => {
            let mut overrides = Vec::new();
            if let Some(k) = kind {
                overrides.push(format!("env.kind=\"{k}\""));
            }
            if let Some(p) = path {
                overrides.push(format!("env.path={}", toml_string(&p.display().to_string())));
            }
            if let Some(s) = schema {
                overrides.push(format!("env.schema={}", toml_string(&s)));
            }
            if let Some(t) = target {
                overrides.push(format!("env.target={}", toml_string(&t)));
            }
            overrides.extend(config.overrides);
            commands::ingest_check(&config.config, &overrides)
        }
        Command::Verify { suites, seed, corrupt } => commands::verify(&suites, seed, corrupt),
        Command::Synth {
            kind,
            rows,
            seed,
            file,
            output,
        } => commands::synth(kind, rows, seed, file, &output.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn toml_string(s: &str) -> String {
    serde_json::Value::String(s.to_string()).to_string()
}
