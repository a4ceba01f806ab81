mod checks;
mod config;

use anyhow::{bail, Context, Result};
use checks::{Ctx, Outcome, Status, CATALOG};
use clap::{Parser, Subcommand};
use config::{Params, ScenarioConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "ainf-check", version, about = "Runs instance-level verification checks from a JSON scenario")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check listed in the config.
    Run {
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Cap overrides, `dim_limit=4096,max_samples=10`.
        #[arg(long)]
        caps: Option<String>,
        /// Writes the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 picks the number of cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Print the catalog of checks.
    ListChecks,
    /// Describe one check.
    Explain { check: String },
}

#[derive(Serialize)]
struct Entry {
    name: String,
    anchor: &'static str,
    status: Status,
    details: Value,
    failures: Vec<String>,
    wall_time_ms: u64,
}

#[derive(Serialize, Default)]
struct Summary {
    total: usize,
    pass: usize,
    fail: usize,
    uncertified: usize,
    error: usize,
}

#[derive(Serialize)]
struct Report {
    tool: &'static str,
    version: &'static str,
    qualifier: &'static str,
    seed: u64,
    config: ScenarioConfig,
    checks: Vec<Entry>,
    summary: Summary,
}

/// Per-check seed; independent of scheduling.
fn check_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn run_one(index: usize, name: &str, params: &Params, cfg: &ScenarioConfig) -> Entry {
    let check = checks::find(name).expect("validated");
    let ctx = Ctx { params, seed: check_seed(cfg.seed, index), caps: &cfg.caps };
    let start = Instant::now();
    let res = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| (check.run)(&ctx)));
    let outcome = match res {
        Ok(Ok(o)) => o,
        Ok(Err(e)) => Outcome { status: Status::Error, details: Value::Null, failures: vec![format!("{e:#}")] },
        Err(_) => Outcome { status: Status::Error, details: Value::Null, failures: vec!["check panicked".into()] },
    };
    Entry {
        name: name.to_string(),
        anchor: check.anchor,
        status: outcome.status,
        details: outcome.details,
        failures: outcome.failures,
        wall_time_ms: start.elapsed().as_millis() as u64,
    }
}

fn load(path: &PathBuf, seed: Option<u64>, caps: Option<&str>) -> Result<(ScenarioConfig, Vec<(String, Params)>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg: ScenarioConfig = serde_json::from_str(&text).context("config does not match the schema")?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(c) = caps {
        cfg.caps.apply_overrides(c)?;
    }
    let mut list = Vec::new();
    for (i, m) in cfg.checks.iter().enumerate() {
        let name = m
            .get("check")
            .and_then(Value::as_str)
            .with_context(|| format!("check {i} has no \"check\" name"))?;
        if checks::find(name).is_none() {
            bail!("check {i}: unknown check {name:?}");
        }
        let params = Params::resolve(m, &cfg.rings).with_context(|| format!("check {i} ({name})"))?;
        if let Some(r) = &params.ring {
            r.presentation().with_context(|| format!("check {i} ({name}): ring"))?;
        }
        list.push((name.to_string(), params));
    }
    Ok((cfg, list))
}

fn run(config: PathBuf, seed: Option<u64>, caps: Option<String>, out: Option<PathBuf>, jobs: usize) -> Result<ExitCode> {
    let (cfg, list) = match load(&config, seed, caps.as_deref()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return Ok(ExitCode::from(2));
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let entries: Vec<Entry> =
        pool.install(|| list.par_iter().enumerate().map(|(i, (name, p))| run_one(i, name, p, &cfg)).collect());
    let mut summary = Summary { total: entries.len(), ..Default::default() };
    for e in &entries {
        match e.status {
            Status::Pass => summary.pass += 1,
            Status::Fail => summary.fail += 1,
            Status::Uncertified => summary.uncertified += 1,
            Status::Error => summary.error += 1,
        }
        if matches!(e.status, Status::Fail | Status::Error) {
            eprintln!("{}: {:?}", e.name, e.status);
            for f in &e.failures {
                eprintln!("  {f}");
            }
        }
    }
    let ok = summary.fail == 0 && summary.error == 0;
    let report = Report {
        tool: "ainf-check",
        version: env!("CARGO_PKG_VERSION"),
        qualifier: "instance-level, at the recorded caps",
        seed: cfg.seed,
        config: cfg.clone(),
        checks: entries,
        summary,
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::from(if ok { 0 } else { 1 }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { config, seed, caps, out, jobs } => run(config, seed, caps, out, jobs),
        Command::ListChecks => {
            for c in CATALOG {
                println!("{}\t{}\t[{}]", c.name, c.anchor, c.params);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Explain { check } => match checks::find(&check) {
            Some(c) => {
                println!("{}\nanchor: {}\nparams: {}\n{}", c.name, c.anchor, c.params, c.summary);
                Ok(ExitCode::SUCCESS)
            }
            None => {
                eprintln!("unknown check {check:?}; see list-checks");
                Ok(ExitCode::from(2))
            }
        },
    };
    res.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
