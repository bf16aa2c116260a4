use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use geoflow_cli::config::{Kind, Scenario};
use geoflow_cli::report::{emit_report, Report};
use geoflow_cli::scenarios::{run, run_all};
use geoflow_cli::CliError;

#[derive(Parser)]
#[command(name = "geoflow", version, about = "Conformal, quasiconformal and Ricci flow experiments on S^4")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Paneitz inversion, Q transformation law and Moebius factors.
    Paneitz(Common),
    /// Green kernel log split and truncation stability.
    Green(Common),
    /// Quasiconformal flow sweep over alpha.
    Qcflow(Common),
    /// Normalized Ricci flow sweep over beta.
    Ricciflow(Common),
    /// Bilipschitz constants of the two stages combined.
    Compose(Common),
    /// Every scenario into OUT/<kind>/ with an aggregate summary.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Quadrature nodes, a power of two in [64, 1024].
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Print one line per check.
    #[arg(long)]
    check: bool,
}

fn scenario(c: &Common, kind: Kind) -> Result<Scenario, CliError> {
    let mut s = match &c.config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::new(kind),
    };
    s.kind = kind;
    if let Some(seed) = c.seed {
        s.seed = seed;
    }
    if let Some(r) = c.resolution {
        s.resolution = r;
    }
    s.validate()?;
    Ok(s)
}

fn print_checks(label: &str, r: &Report) {
    let mut out = std::io::stdout().lock();
    for c in &r.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{label} {tag} {}: {:.3e} (threshold {:.3e}) {}", c.name, c.value, c.threshold, c.detail);
    }
}

#[derive(Serialize)]
struct Aggregate<'a> {
    kinds: Vec<&'a str>,
    failed: Vec<String>,
    all_pass: bool,
}

fn write_aggregate(out: &Path, reports: &[(Kind, Report)]) -> Result<(), CliError> {
    let failed: Vec<String> = reports
        .iter()
        .flat_map(|(k, r)| r.checks.iter().filter(|c| !c.pass).map(move |c| format!("{}/{}", k.name(), c.name)))
        .collect();
    let agg = Aggregate {
        kinds: reports.iter().map(|(k, _)| k.name()).collect(),
        all_pass: failed.is_empty(),
        failed,
    };
    let mut json = serde_json::to_string_pretty(&agg).map_err(|e| CliError::Config(e.to_string()))?;
    json.push('\n');
    let path = out.join("summary.json");
    std::fs::write(&path, json).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let (common, kind) = match &cli.command {
        Command::Paneitz(c) => (c, Some(Kind::Paneitz)),
        Command::Green(c) => (c, Some(Kind::Green)),
        Command::Qcflow(c) => (c, Some(Kind::Qcflow)),
        Command::Ricciflow(c) => (c, Some(Kind::Ricciflow)),
        Command::Compose(c) => (c, Some(Kind::Compose)),
        Command::Report(c) => (c, None),
    };
    match kind {
        Some(kind) => {
            let s = scenario(common, kind)?;
            let r = run(&s)?;
            emit_report(&r, &common.out)?;
            if common.check {
                print_checks(kind.name(), &r);
            }
            Ok(r.all_pass())
        }
        None => {
            let base = scenario(common, Kind::Paneitz)?;
            let reports = run_all(&base)?;
            for (k, r) in &reports {
                emit_report(r, &common.out.join(k.name()))?;
                if common.check {
                    print_checks(k.name(), r);
                }
            }
            write_aggregate(&common.out, &reports)?;
            Ok(reports.iter().all(|(_, r)| r.all_pass()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("GEOFLOW_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: GEOFLOW_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(2);
            }
        }
    }
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
