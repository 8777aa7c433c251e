use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use d2dsim_core::harness::artifact::OutputFormat;
use d2dsim_core::harness::run::{prepare_point, CacheLayout};
use d2dsim_core::harness::validate::{validate, ValidateOptions};
use d2dsim_core::harness::{analyze, run, ExperimentConfig, RunOptions};
use d2dsim_core::schemes::FrequencyPlan;

#[derive(Parser)]
#[command(name = "d2dsim", version, about = "Cache-aided D2D network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the base point of a configuration (any sweep section is ignored).
    Simulate(SimulateArgs),
    /// Run every sweep point and fit throughput against the driving ratio.
    Sweep(CommonArgs),
    /// Evaluate closed forms only; no Monte Carlo.
    Analyze(CommonArgs),
    /// Run the invariant suites at pinned seeds.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `experiment.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the cache policy as `f,pc` CSV.
    #[arg(long)]
    dump_policy: bool,
    /// Also write the first realization as a text dump.
    #[arg(long)]
    dump_realization: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for the machine-readable report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Realizations for the network-level suites.
    #[arg(long, default_value_t = 10)]
    realizations: usize,
    /// Frequency plan under test (`universal` is a deliberate mutation).
    #[arg(long, value_enum, default_value_t = Plan::Reuse)]
    frequency_plan: Plan,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Both => OutputFormat::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Plan {
    Reuse,
    Universal,
}

fn load(args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.experiment.base_seed = seed;
    }
    Ok(cfg)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned())
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = load(&args.common)?;
    if cfg.sweep.take().is_some() {
        log::warn!("simulate ignores the sweep section; use `sweep` for multi-point runs");
    }
    let name = stem(&args.common.config);
    if args.dump_policy || args.dump_realization {
        std::fs::create_dir_all(&args.common.out)?;
        let prep = prepare_point(&cfg, 0)?;
        if args.dump_policy {
            let policies = match &prep.layout {
                CacheLayout::Single { policy, .. } => vec![("", policy)],
                CacheLayout::Split { policy, .. } => {
                    vec![("_slot1", &policy.policy_slot1), ("_slot2", &policy.policy_slot2)]
                }
            };
            for (suffix, p) in policies {
                let path = args.common.out.join(format!("{name}_policy{suffix}.csv"));
                p.write_csv(std::fs::File::create(&path)?)?;
                println!("wrote {}", path.display());
            }
        }
        if args.dump_realization {
            let path = args.common.out.join(format!("{name}_realization.txt"));
            let real = prep.realization(cfg.experiment.base_seed)?;
            real.write_dump(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            println!("wrote {}", path.display());
        }
    }
    let artifact = run(&cfg, RunOptions { threads: args.common.threads })?;
    let p = artifact.points.first().context("the point failed; see log")?;
    println!(
        "T_min_avg = {:e} (se {:e}), T_mean = {:e} (se {:e}), p_o = {} (se {:e})",
        p.estimate.t_min_avg,
        p.estimate.t_stderr,
        p.estimate.t_mean,
        p.estimate.t_mean_stderr,
        p.estimate.p_o_hat,
        p.estimate.p_o_stderr
    );
    report_written(&artifact.write_outputs(&args.common.out, &name, args.common.format.into())?);
    Ok(())
}

fn sweep(args: CommonArgs) -> Result<()> {
    let cfg = load(&args)?;
    if cfg.sweep.is_none() {
        bail!("{} has no [sweep] section", args.config.display());
    }
    let artifact = run(&cfg, RunOptions { threads: args.threads })?;
    if let Some(fit) = &artifact.fit {
        println!(
            "slope of T_mean vs {} = {:.4} (stderr {}), predicted {}",
            artifact.driving_ratio,
            fit.slope,
            fit.slope_stderr.map_or("n/a".into(), |s| format!("{s:.4}")),
            artifact.predicted_exponent.map_or("n/a".into(), |p| format!("{p:.4}"))
        );
    }
    for f in &artifact.failures {
        eprintln!("point {} failed: {}", f.index, f.message);
    }
    report_written(&artifact.write_outputs(&args.out, &stem(&args.config), args.format.into())?);
    Ok(())
}

fn analyze_cmd(args: CommonArgs) -> Result<()> {
    let cfg = load(&args)?;
    let report = analyze(&cfg)?;
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if !matches!(args.format, Format::Csv) {
        std::fs::create_dir_all(&args.out)?;
        let path = args.out.join(format!("{}_analysis.json", stem(&args.config)));
        std::fs::write(&path, json + "\n")?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn validate_cmd(args: ValidateArgs) -> Result<bool> {
    let mut opts = ValidateOptions {
        realizations: args.realizations,
        frequency_plan: match args.frequency_plan {
            Plan::Reuse => FrequencyPlan::Reuse,
            Plan::Universal => FrequencyPlan::Universal,
        },
        ..ValidateOptions::default()
    };
    if let Some(s) = args.seed {
        opts.seed = s;
    }
    // The suites are sequential; `--threads` is accepted for a uniform CLI.
    let _ = args.threads;
    let report = validate(&opts)?;
    print!("{}", report.to_text());
    if let Some(dir) = args.out {
        std::fs::create_dir_all(&dir)?;
        let path = dir.join("validation.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
        println!("wrote {}", path.display());
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Analyze(a) => analyze_cmd(a).map(|_| true),
        Command::Validate(a) => validate_cmd(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
