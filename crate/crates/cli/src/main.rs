//! Command-line front end: build, simulate, attack, report.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use starcloak::algorithm::Algorithm;
use starcloak::attack::{evaluate_regions, AttackKnowledge, AttackRow, ReplayContext};
use starcloak::config::{RunConfig, Sweep};
use starcloak::cost::StarCostTable;
use starcloak::engine::CloakedRegion;
use starcloak::report::{attack_table, metric_tables, read_csv, write_csv, write_tables};
use starcloak::sim::{run_point, MetricsRecord, TimingRecord};
use starcloak::{bundle, Error};

#[derive(Debug, Parser)]
#[command(name = "starcloak", version, about = "Star-based location cloaking experiments")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Algorithms to run, repeatable or comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    algorithm: Vec<Algorithm>,
    /// Sweep axis as `PARAM=v1,v2,...`.
    #[arg(long, global = true)]
    sweep: Option<String>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Builds the network index and writes it as a binary bundle.
    Build,
    /// Runs every sweep point for every algorithm.
    Simulate,
    /// Runs the inference attack over served regions of a simulate output.
    Attack {
        /// Directory written by `simulate`; defaults to `--out`.
        #[arg(long)]
        runs: Option<PathBuf>,
    },
    /// Builds comparison tables from simulate output.
    Report {
        /// Directory written by `simulate`; defaults to `--out`.
        #[arg(long)]
        runs: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    seed: u64,
    code_version: &'a str,
    config: String,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    point: String,
    algorithm: Algorithm,
    injections: usize,
    regions: usize,
    mean_normalized_entropy: Option<f64>,
}

/// Identifies the run a directory of simulate output belongs to.
#[derive(Debug, Serialize, Deserialize)]
struct RunInfo {
    algorithm: Algorithm,
    sweep_param: String,
    sweep_value: Option<f64>,
    seed: u64,
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("cannot read {}: {source}", path.display())),
            e => e,
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if !cli.algorithm.is_empty() {
        cfg.algorithms = cli.algorithm.clone();
    }
    if let Some(s) = &cli.sweep {
        cfg.sweep = Some(Sweep::parse(s)?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_manifest(out: &Path, command: &str, cfg: &RunConfig) -> anyhow::Result<()> {
    let m = Manifest {
        command,
        config_hash: cfg.hash()?,
        seed: cfg.seed,
        code_version: env!("CARGO_PKG_VERSION"),
        config: cfg.to_toml()?,
    };
    let path = out.join(format!("manifest-{command}.json"));
    fs::write(&path, serde_json::to_string_pretty(&m)?).with_context(|| path.display().to_string())?;
    Ok(())
}

fn point_dir(param: &str, value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{param}={v}"),
        None => "default".into(),
    }
}

fn build(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let map = cfg.network.load_map()?;
    let path = out.join("index.bundle");
    bundle::save(&map, &path)?;
    println!(
        "{} nodes, {} segments, {} stars -> {}",
        map.network.node_count(),
        map.segments.len(),
        map.stars.len(),
        path.display()
    );
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let map = Arc::new(cfg.network.load_map()?);
    let pois = cfg.pois.load_store(&map, cfg.seed)?;
    let param = cfg.sweep.as_ref().map(|s| s.param.clone()).unwrap_or_default();
    let mut metrics = Vec::new();
    let mut timing = Vec::new();
    for (value, point) in cfg.points()? {
        for &alg in &cfg.algorithms {
            let run = run_point(&map, &pois, &point, alg, &param, value)?;
            let dir = out.join(point_dir(&param, value)).join(alg.name());
            fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
            run.outcome.log.write(dir.join("events.csv"))?;
            let mut jsonl = fs::File::create(dir.join("regions.jsonl"))?;
            for r in &run.outcome.regions {
                serde_json::to_writer(&mut jsonl, r)?;
                jsonl.write_all(b"\n")?;
            }
            write_csv(std::slice::from_ref(&run.metrics), dir.join("metrics.csv"))?;
            write_csv(std::slice::from_ref(&run.timing), dir.join("timing.csv"))?;
            let info = RunInfo {
                algorithm: alg,
                sweep_param: param.clone(),
                sweep_value: value,
                seed: point.seed,
            };
            fs::write(dir.join("run.json"), serde_json::to_string_pretty(&info)?)?;
            println!(
                "{} {}: issued {} served {} success {:.3}",
                point_dir(&param, value),
                alg,
                run.metrics.issued,
                run.metrics.served,
                run.metrics.success_rate
            );
            metrics.push(run.metrics);
            timing.push(run.timing);
        }
    }
    write_csv(&metrics, out.join("metrics.csv"))?;
    write_csv(&timing, out.join("timing.csv"))?;
    Ok(())
}

/// Run directories under `root`, each holding a `run.json`.
fn run_dirs(root: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for point in fs::read_dir(root).with_context(|| root.display().to_string())? {
        let point = point?.path();
        if !point.is_dir() {
            continue;
        }
        for alg in fs::read_dir(&point)? {
            let alg = alg?.path();
            if alg.join("run.json").is_file() {
                dirs.push(alg);
            }
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Report(format!("no simulate output under {}", root.display())).into());
    }
    Ok(dirs)
}

fn read_regions(path: &Path) -> anyhow::Result<Vec<CloakedRegion>> {
    let file = fs::File::open(path).with_context(|| path.display().to_string())?;
    let mut regions = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => regions.push(r),
            Err(e) => log::warn!("{}:{}: unreadable region skipped: {e}", path.display(), i + 1),
        }
    }
    Ok(regions)
}

fn attack(cfg: &RunConfig, runs: &Path, out: &Path) -> anyhow::Result<()> {
    let map = cfg.network.load_map()?;
    let costs = StarCostTable::new(&map);
    let ctx = ReplayContext {
        map: &map,
        costs: &costs,
        params: cfg.cost,
        reach: cfg.engine.reach,
    };
    let base = AttackKnowledge {
        replays: cfg.attack.replays,
        budget: cfg.attack.budget,
        cohort: cfg.attack.cohort,
        seed: cfg.seed,
        ..AttackKnowledge::default()
    };
    let mut rows: Vec<AttackRow> = Vec::new();
    let mut summary = Vec::new();
    for dir in run_dirs(runs)? {
        let info: RunInfo = serde_json::from_str(&fs::read_to_string(dir.join("run.json"))?)?;
        let mut regions = read_regions(&dir.join("regions.jsonl"))?;
        if let Some(n) = cfg.attack.max_regions {
            regions.truncate(n);
        }
        let got = evaluate_regions(&ctx, info.algorithm, &regions, &base, &cfg.attack.injections);
        let point = point_dir(&info.sweep_param, info.sweep_value);
        for &j in &cfg.attack.injections {
            let ents: Vec<f64> = got
                .iter()
                .filter(|r| r.injections == j.min(r.k - 1))
                .map(|r| r.normalized_entropy)
                .collect();
            summary.push(SummaryRow {
                point: point.clone(),
                algorithm: info.algorithm,
                injections: j,
                regions: ents.len(),
                mean_normalized_entropy: if ents.is_empty() {
                    None
                } else {
                    Some(ents.iter().sum::<f64>() / ents.len() as f64)
                },
            });
        }
        println!("{point} {}: {} regions evaluated", info.algorithm, regions.len());
        rows.extend(got);
    }
    write_csv(&rows, out.join("attack.csv"))?;
    write_csv(&summary, out.join("attack_summary.csv"))?;
    write_tables(&[attack_table(&rows)], out)?;
    Ok(())
}

fn report(runs: &Path, out: &Path) -> anyhow::Result<()> {
    let metrics_path = runs.join("metrics.csv");
    if !metrics_path.is_file() {
        return Err(Error::Report(format!("{} not found", metrics_path.display())).into());
    }
    let metrics: Vec<MetricsRecord> = read_csv(&metrics_path)?;
    let timing_path = runs.join("timing.csv");
    let timing: Vec<TimingRecord> = if timing_path.is_file() {
        read_csv(&timing_path)?
    } else {
        Vec::new()
    };
    for path in write_tables(&metric_tables(&metrics, &timing)?, out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let out = &cli.out;
    fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    let name = match &cli.command {
        Command::Build => {
            build(&cfg, out)?;
            "build"
        }
        Command::Simulate => {
            simulate(&cfg, out)?;
            "simulate"
        }
        Command::Attack { runs } => {
            attack(&cfg, runs.as_deref().unwrap_or(out), out)?;
            "attack"
        }
        Command::Report { runs } => {
            report(runs.as_deref().unwrap_or(out), out)?;
            "report"
        }
    };
    write_manifest(out, name, &cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_config() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
