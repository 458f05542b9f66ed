use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use riskcb::environments::{synthetic_surrogate, write_dataset, EnvError, EnvKind, Outcome};
use riskcb::harness::{
    self, curve_csv, load_environment, metrics_csv, pareto_csv, read_manifest, read_records, write_run, ConfigError,
    ExperimentReport, HarnessError, Manifest, ParetoPoint, RunConfig, MANIFEST_FILE,
};
use riskcb::verify::Suite;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Invalid(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn load_config(path: &Option<PathBuf>, overrides: &[String]) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p, overrides)?,
        None => RunConfig::from_toml_str("", overrides)?,
    })
}

fn with_seed(overrides: &[String], seed: u64) -> Vec<String> {
    let mut all = overrides.to_vec();
    all.push(format!("seed={seed}"));
    all
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn print_metrics(r: &ExperimentReport) {
    for (name, e) in &r.metrics {
        println!("  {name:<18} {:>10.5}  [{:.5}, {:.5}]", e.point, e.lo, e.hi);
    }
}

fn run_report(cfg: &RunConfig, out: &harness::RunOutput) -> Result<ExperimentReport> {
    let r = &cfg.report;
    Ok(harness::report(
        out.kind,
        &out.records,
        &r.q_eval,
        r.coverage,
        r.resamples,
        cfg.seed,
    )?)
}

pub fn run(config: &Option<PathBuf>, overrides: &[String], root: &Path, seed: u64, run_id: Option<&str>) -> Result<()> {
    let cfg = load_config(config, &with_seed(overrides, seed))?;
    execute_and_write(&cfg, root, run_id, None)
}

pub fn rerun(dir: &Path, root: &Path, run_id: Option<&str>) -> Result<()> {
    let old = read_manifest(dir)?;
    old.config.validate()?;
    execute_and_write(
        &old.config,
        root,
        Some(run_id.unwrap_or(&old.run_id)),
        Some(&old.dataset_hash),
    )
}

fn execute_and_write(cfg: &RunConfig, root: &Path, run_id: Option<&str>, expect_hash: Option<&str>) -> Result<()> {
    let out = harness::execute(cfg)?;
    if let Some(h) = expect_hash.filter(|h| *h != out.dataset_hash) {
        return Err(CliError::Runtime(format!(
            "dataset hash {} differs from the manifest's {h}",
            out.dataset_hash
        )));
    }
    let cfg = cfg.clone();
    let rep = run_report(&cfg, &out)?;
    let manifest = Manifest::new(&cfg, &out.dataset_hash, run_id);
    let dir = write_run(&root.join("runs").join(&manifest.run_id), &manifest, &out.records, &rep)?;
    println!(
        "run {} ({} on {}, {} rounds) -> {}",
        manifest.run_id,
        out.kind,
        out.env_name,
        out.records.len(),
        dir.display()
    );
    print_metrics(&rep);
    Ok(())
}

pub fn sweep(
    config: &Option<PathBuf>,
    overrides: &[String],
    root: &Path,
    seed: u64,
    jobs: Option<usize>,
) -> Result<()> {
    let mut overrides = with_seed(overrides, seed);
    if let Some(j) = jobs {
        overrides.push(format!("sweep.jobs={j}"));
    }
    let cfg = load_config(config, &overrides)?;
    let outcome = harness::sweep(&cfg)?;
    let manifest = Manifest::new(&outcome.best_config, &outcome.best.dataset_hash, None);
    let dir = write_run(
        &root.join("runs").join(&manifest.run_id),
        &manifest,
        &outcome.best.records,
        &outcome.report,
    )?;
    let board = serde_json::json!({
        "best_trial": outcome.best_trial,
        "trials": outcome.leaderboard,
    });
    write_file(&dir.join("sweep.json"), &format!("{board:#}\n"))?;
    let failed = outcome.leaderboard.iter().filter(|t| t.error.is_some()).count();
    println!(
        "sweep: {} trials ({failed} failed), best trial {} -> {}",
        outcome.leaderboard.len(),
        outcome.best_trial,
        dir.display()
    );
    for (k, v) in &outcome.leaderboard[outcome.best_trial].params {
        println!("  {k} = {v}");
    }
    print_metrics(&outcome.report);
    Ok(())
}

/// Run directories under `dir`: itself if it holds a manifest, otherwise
/// its immediate children that do.
fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join(MANIFEST_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = fs::read_dir(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    found.sort();
    Ok(found)
}

pub fn report(dirs: &[PathBuf], q_eval: Option<&[f64]>, dest: &Path) -> Result<()> {
    if let Some(bad) = q_eval.and_then(|g| g.iter().find(|q| !(**q > 0.0 && **q < 1.0))) {
        return Err(CliError::Usage(format!("q-eval levels must lie in (0,1), got {bad}")));
    }
    let mut runs: Vec<(String, ExperimentReport)> = Vec::new();
    for d in dirs {
        let found = run_dirs(d)?;
        if found.is_empty() {
            return Err(CliError::Runtime(format!("{}: no run logs found", d.display())));
        }
        for run in found {
            let manifest = read_manifest(&run)?;
            let records = read_records(&run)?;
            let spec = &manifest.config.report;
            let grid = q_eval.unwrap_or(&spec.q_eval);
            let kind = manifest.config.env.kind;
            let mut rep = harness::report(kind, &records, grid, spec.coverage, spec.resamples, manifest.seed)?;
            rep.manifest = Some(manifest.clone());
            runs.push((manifest.run_id, rep));
        }
    }
    let points: Vec<ParetoPoint> = runs
        .iter()
        .filter_map(|(l, r)| ParetoPoint::from_report(l, r))
        .collect();
    write_file(&dest.join("curve.csv"), &curve_csv(&runs))?;
    write_file(&dest.join("metrics.csv"), &metrics_csv(&runs))?;
    if !points.is_empty() {
        write_file(&dest.join("pareto.csv"), &pareto_csv(&points))?;
    }
    for (label, r) in &runs {
        println!(
            "{label} (q = {}, {} rounds)",
            r.q().map(|q| q.to_string()).unwrap_or("?".into()),
            r.rounds
        );
        print_metrics(r);
    }
    println!("wrote {} run(s) to {}", runs.len(), dest.display());
    Ok(())
}

pub fn ingest_check(config: &Option<PathBuf>, overrides: &[String]) -> Result<()> {
    // `q` is irrelevant for ingestion; supply one when the config omits it
    let mut cfg_overrides = overrides.to_vec();
    let cfg = match load_config(config, &cfg_overrides) {
        Err(CliError::Usage(m)) if m.contains("missing field `q`") => {
            cfg_overrides.insert(0, "q=0.5".into());
            load_config(config, &cfg_overrides)?
        }
        other => other?,
    };
    let env = load_environment(&cfg)?;
    println!("kind          {}", env.kind);
    println!("name          {}", env.name);
    println!("rows          {}", env.len());
    println!("context dim   {}", env.context_dim());
    println!(
        "max actions   {}",
        if env.kind.is_finite() {
            env.max_actions().to_string()
        } else {
            "interval".into()
        }
    );
    println!("dataset hash  {}", env.dataset_hash);
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for row in env.rows() {
        let v = match &row.outcome {
            Outcome::Label(l) => *l as f64,
            Outcome::Level(v) => *v,
            Outcome::Rewards(r) => r.iter().sum::<f64>() / r.len() as f64,
        };
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    println!(
        "outcome       min {lo:.4}  mean {:.4}  max {hi:.4}",
        sum / env.len() as f64
    );
    Ok(())
}

pub fn verify(names: &[String], seed: u64, corrupt: bool) -> Result<()> {
    let mut suites = Vec::new();
    for n in names {
        if n == "all" {
            suites.extend(Suite::ALL);
        } else {
            suites.push(n.parse::<Suite>().map_err(CliError::Usage)?);
        }
    }
    let mut failed = Vec::new();
    for s in suites {
        let rep = s.run(seed, corrupt);
        println!("{rep}");
        if !rep.passed() {
            failed.push(s.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("failed: {}", failed.join(", "))))
    }
}

pub fn synth(kind: EnvKind, rows: usize, seed: u64, file: Option<PathBuf>, root: &Path) -> Result<()> {
    if rows == 0 {
        return Err(CliError::Usage("--rows must be positive".into()));
    }
    let ext = if kind == EnvKind::QueryOpt { "jsonl" } else { "csv" };
    let path = file.unwrap_or_else(|| root.join("data").join(format!("{kind}-{seed}.{ext}")));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    let env = synthetic_surrogate(kind, rows, seed);
    write_dataset(&env, &path)?;
    println!("{} rows of {kind} -> {}", env.len(), path.display());
    if kind != EnvKind::QueryOpt {
        println!(
            "read back with env.path = {:?} and env.target = \"y\"",
            path.display().to_string()
        );
    }
    Ok(())
}
