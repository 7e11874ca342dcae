use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use da_forge::{run, OutputFormat, RunConfig, Scenario};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Construct, certify and simulate DA diffeomorphisms of the 3-torus.
#[derive(Debug, Parser)]
#[command(name = "da-forge", version)]
struct Cli {
    scenario: Scenario,
    /// TOML run configuration; unset fields take the pinned defaults.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
}

fn configure(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(&cli.config)?;
    cfg.scenario = cli.scenario;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cfg: &RunConfig) -> anyhow::Result<u8> {
    let out = run(cfg)?;
    let report = &out.report;
    for c in &report.checks {
        let margin = c.margin.map(|m| format!(" margin {m:e}")).unwrap_or_default();
        println!("{} {}{margin}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for e in &report.errors {
        println!("ERROR {} ({:?}): {}", e.stage, e.kind, e.message);
    }
    let dir = PathBuf::from(&cfg.output.dir);
    let written = report
        .emit(&dir, cfg.output.format, Some(&out.timings))
        .with_context(|| format!("cannot write reports under {}", dir.display()))?;
    if let Some(text) = report.results.get("search").and_then(|s| s.get("pinned_toml")).and_then(|v| v.as_str()) {
        let path = dir.join("pinned.toml");
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    eprintln!(
        "{} {}: {} checks, {} files under {}, {:.1} s",
        cfg.scenario,
        if report.passed { "PASS" } else { "FAIL" },
        report.checks.len(),
        written.len(),
        dir.display(),
        out.timings.total_seconds
    );
    Ok(if report.has_numerical_error() {
        EXIT_NUMERICAL
    } else if report.passed {
        0
    } else {
        EXIT_CHECK_FAILED
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match execute(&cfg) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
