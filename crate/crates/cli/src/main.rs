//! Command-line driver: generates and calibrates populations, runs
//! scenarios and receptiveness sweeps, and compares result files.
//!
//! Every command that writes results also writes a manifest (command,
//! version, seed, config hash, output names) so a rerun can be checked
//! against what produced the files. Nothing here contains simulation logic;
//! the engine lives in the core crate.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use modeshift_core as core;
use modeshift_core::{
    calibrate_profiles, compare_runs, default_profile_set, generate_population,
    initial_profile_set, load_profile_set, load_scenario_config, mean_records, prepare, read_csv,
    run_replicate, save_population, save_profile_set, share_records, sweep_rows, write_csv,
    CalibrationBudget, InfluenceTables, MeanShareRecord, MuSetting, PopulationSource, Prepared,
    ScenarioConfig, ScenarioKind, ScenarioRun, SweepRecord,
};

/// Mode the sweep and compare commands track by default.
const EV_LABEL: &str = "EV";

#[derive(Parser)]
#[command(name = "modeshift", version, about = "Transport mode preference simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a population file from a profile set.
    Generate(GenerateArgs),
    /// Tune generation profiles toward their target modal splits.
    Calibrate(CalibrateArgs),
    /// Run a scenario and write share trajectories.
    Run(RunArgs),
    /// Rerun a scenario across receptiveness settings.
    Sweep(SweepArgs),
    /// Per-step EV share gaps of averaged results against a baseline file.
    Compare(CompareArgs),
    /// Print the persuasion tables in effect and check them.
    ValidateTables(ValidateTablesArgs),
}

#[derive(Args)]
struct OutArg {
    /// Output directory. Falls back to $MODESHIFT_OUT, then "out".
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutArg {
    fn resolve(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os("MODESHIFT_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Profile set JSON; the built-in calibrated set when absent.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Number of agents.
    #[arg(long, default_value_t = core::population::DEFAULT_POPULATION_SIZE)]
    size: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Starting profile set JSON; the built-in uncalibrated set when absent.
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML; a default reference scenario when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Replaces the scenario's population with this population file.
    #[arg(long)]
    population: Option<PathBuf>,
    /// Replaces the scenario's generation profiles.
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u32>,
    #[arg(long)]
    replicates: Option<u32>,
    /// Run replicates on this many threads. Results are identical either way.
    #[arg(long)]
    parallel_replicates: Option<usize>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated receptiveness settings: numbers in [0, 1] or
    /// "empirical" for the generated per-agent draws.
    #[arg(long, value_delimiter = ',', default_value = "empirical")]
    mu: Vec<String>,
}

#[derive(Args)]
struct CompareArgs {
    /// Averaged share CSVs; the first is the baseline.
    #[arg(required = true, num_args = 2..)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct ValidateTablesArgs {
    /// Scenario TOML whose table overrides should be checked.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    version: String,
    seed: u64,
    config_hash: String,
    outputs: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

/// Hash of the canonical JSON form of whatever fully determines a command's
/// results.
fn config_hash<T: Serialize>(effective: &T) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(effective)?.as_bytes()))
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn load_scenario(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &args.scenario {
        Some(path) => load_scenario_config(path)
            .with_context(|| format!("scenario {}", path.display()))?,
        None => ScenarioConfig::new(ScenarioKind::Reference),
    };
    if let Some(path) = &args.population {
        cfg.population = PopulationSource::File { path: path.clone() };
    }
    if let Some(path) = &args.profiles {
        cfg.profiles = Some(path.clone());
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(steps) = args.steps {
        cfg.steps = steps;
    }
    if let Some(replicates) = args.replicates {
        cfg.replicates = replicates;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Replicates in parallel when asked; the merge is ordered by replicate, so
/// thread count never shows in the output.
fn execute_scenario(
    cfg: &ScenarioConfig,
    prepared: &Prepared,
    threads: Option<usize>,
) -> Result<ScenarioRun> {
    let series = match threads {
        Some(t) if t > 1 => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build()?;
            let mut series = pool.install(|| {
                (0..cfg.replicates)
                    .into_par_iter()
                    .map(|r| run_replicate(cfg, prepared, r))
                    .collect::<core::Result<Vec<_>>>()
            })?;
            series.sort_by_key(|s| s.replicate);
            series
        }
        _ => {
            let mut series = Vec::with_capacity(cfg.replicates as usize);
            for r in 0..cfg.replicates {
                series.push(run_replicate(cfg, prepared, r)?);
            }
            series
        }
    };
    Ok(ScenarioRun {
        kind: cfg.kind,
        action_labels: prepared.action_labels.clone(),
        series,
    })
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let set = match &args.profiles {
        Some(path) => {
            load_profile_set(path).with_context(|| format!("profiles {}", path.display()))?
        }
        None => default_profile_set(),
    };
    let pop = generate_population(&set, args.size, args.seed)?;
    let dir = args.out.resolve();
    ensure_dir(&dir)?;
    save_population(&pop, dir.join("population.json"))?;

    #[derive(Serialize)]
    struct Effective<'a> {
        profiles: &'a core::ProfileSet,
        size: usize,
        seed: u64,
    }
    write_manifest(
        &dir,
        &Manifest {
            command: "generate".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: args.seed,
            config_hash: config_hash(&Effective {
                profiles: &set,
                size: args.size,
                seed: args.seed,
            })?,
            outputs: vec!["population.json".into()],
        },
    )?;
    println!(
        "generated {} agents across {} types -> {}",
        pop.len(),
        set.profiles.len(),
        dir.join("population.json").display()
    );
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let start = match &args.profiles {
        Some(path) => {
            load_profile_set(path).with_context(|| format!("profiles {}", path.display()))?
        }
        None => initial_profile_set(),
    };
    let targets: Vec<Vec<f64>> = start.profiles.iter().map(|p| p.target_shares.clone()).collect();
    let budget = CalibrationBudget::default();
    let outcome = calibrate_profiles(&start, &targets, args.seed, &budget)?;

    let dir = args.out.resolve();
    ensure_dir(&dir)?;
    save_profile_set(&outcome.set, dir.join("profiles.json"))?;
    std::fs::write(
        dir.join("calibration_report.json"),
        serde_json::to_string_pretty(&outcome.reports)? + "\n",
    )?;

    #[derive(Serialize)]
    struct Effective<'a> {
        start: &'a core::ProfileSet,
        seed: u64,
        iterations: u32,
        sample: usize,
        tolerance: f64,
        step: f64,
    }
    write_manifest(
        &dir,
        &Manifest {
            command: "calibrate".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: args.seed,
            config_hash: config_hash(&Effective {
                start: &start,
                seed: args.seed,
                iterations: budget.iterations,
                sample: budget.sample,
                tolerance: budget.tolerance,
                step: budget.step,
            })?,
            outputs: vec!["profiles.json".into(), "calibration_report.json".into()],
        },
    )?;
    for r in &outcome.reports {
        println!(
            "type {}: worst share error {:.4} after {} iterations ({})",
            r.type_id,
            r.max_abs_error,
            r.iterations_used,
            if r.converged { "converged" } else { "budget exhausted" }
        );
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = load_scenario(args)?;
    let prepared = prepare(&cfg)?;
    let run = execute_scenario(&cfg, &prepared, args.parallel_replicates)?;

    let dir = args.out.resolve();
    ensure_dir(&dir)?;
    write_csv(dir.join("results.csv"), &share_records(&run))?;
    write_csv(dir.join("averaged.csv"), &mean_records(&run))?;
    write_manifest(
        &dir,
        &Manifest {
            command: "run".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.seed,
            config_hash: config_hash(&cfg)?,
            outputs: vec!["results.csv".into(), "averaged.csv".into()],
        },
    )?;
    println!(
        "{}: {} replicates x {} steps -> {}",
        cfg.kind.label(),
        cfg.replicates,
        cfg.steps,
        dir.display()
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = load_scenario(&args.run)?;
    let settings = args
        .mu
        .iter()
        .map(|s| MuSetting::parse(s))
        .collect::<core::Result<Vec<_>>>()?;
    if settings.is_empty() {
        bail!("sweep needs at least one receptiveness setting");
    }

    let mut rows: Vec<SweepRecord> = Vec::new();
    for setting in &settings {
        let point = setting.apply(&cfg);
        let prepared = prepare(&point)?;
        let run = execute_scenario(&point, &prepared, args.run.parallel_replicates)?;
        rows.extend(sweep_rows(&setting.label(), &run, EV_LABEL)?);
    }

    let dir = args.run.out.resolve();
    ensure_dir(&dir)?;
    write_csv(dir.join("sweep.csv"), &rows)?;

    #[derive(Serialize)]
    struct Effective<'a> {
        scenario: &'a ScenarioConfig,
        mu: Vec<String>,
    }
    write_manifest(
        &dir,
        &Manifest {
            command: "sweep".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.seed,
            config_hash: config_hash(&Effective {
                scenario: &cfg,
                mu: settings.iter().map(|s| s.label()).collect(),
            })?,
            outputs: vec!["sweep.csv".into()],
        },
    )?;
    println!(
        "swept {} settings x {} replicates -> {}",
        settings.len(),
        cfg.replicates,
        dir.join("sweep.csv").display()
    );
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let mut runs: Vec<(String, Vec<MeanShareRecord>)> = Vec::new();
    let mut input_hash = Sha256::new();
    for path in &args.inputs {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_owned)
            .unwrap_or_else(|| path.display().to_string());
        let bytes =
            std::fs::read(path).with_context(|| format!("results {}", path.display()))?;
        input_hash.update(&bytes);
        let records: Vec<MeanShareRecord> =
            read_csv(path).with_context(|| format!("results {}", path.display()))?;
        runs.push((name, records));
    }
    let table = compare_runs(&runs, EV_LABEL)?;

    let dir = args.out.resolve();
    ensure_dir(&dir)?;
    write_csv(dir.join("compare.csv"), &table)?;
    write_manifest(
        &dir,
        &Manifest {
            command: "compare".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: 0,
            config_hash: format!("{:x}", input_hash.finalize()),
            outputs: vec!["compare.csv".into()],
        },
    )?;
    println!(
        "compared {} result sets against {} -> {}",
        args.inputs.len() - 1,
        runs[0].0,
        dir.join("compare.csv").display()
    );
    Ok(())
}

fn print_table(name: &str, rows: &[[f64; 5]; 2]) {
    println!("{name} (percent effects; receiver bands strong-for .. strong-against):");
    println!("  sender for    : {:?}", rows[0]);
    println!("  sender against: {:?}", rows[1]);
}

fn cmd_validate_tables(args: &ValidateTablesArgs) -> Result<()> {
    let builtin = InfluenceTables::default();
    builtin.validate()?;
    print_table("fact table", &builtin.fact_effect);
    print_table("emotion table", &builtin.emotion_effect);
    println!(
        "sender thresholds: facts |w| > {}, emotions |v| > {}",
        builtin.fact_threshold, builtin.emotion_threshold
    );

    if let Some(path) = &args.scenario {
        let cfg = load_scenario_config(path)
            .with_context(|| format!("scenario {}", path.display()))?;
        match &cfg.tables {
            None => println!("scenario overrides: none (built-ins in effect)"),
            Some(t) => {
                t.validate()?;
                println!("scenario overrides:");
                print_table("fact table", &t.fact_effect);
                print_table("emotion table", &t.emotion_effect);
                let mut diffs = 0;
                for (row, (ours, theirs)) in
                    builtin.fact_effect.iter().zip(&t.fact_effect).enumerate()
                {
                    for (col, (a, b)) in ours.iter().zip(theirs).enumerate() {
                        if a != b {
                            println!("  fact[{row}][{col}]: {a} -> {b}");
                            diffs += 1;
                        }
                    }
                }
                for (row, (ours, theirs)) in
                    builtin.emotion_effect.iter().zip(&t.emotion_effect).enumerate()
                {
                    for (col, (a, b)) in ours.iter().zip(theirs).enumerate() {
                        if a != b {
                            println!("  emotion[{row}][{col}]: {a} -> {b}");
                            diffs += 1;
                        }
                    }
                }
                println!("{diffs} cells differ from the built-ins");
            }
        }
    }
    println!("tables ok");
    Ok(())
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Compare(args) => cmd_compare(args),
        Command::ValidateTables(args) => cmd_validate_tables(args),
    };
    if let Err(e) = result {
        // One line, chain joined, machine-parsable.
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
