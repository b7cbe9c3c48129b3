use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use omnisurf::experiment::{
    format_checks, heatmap, run_single, sweep_bits, sweep_epsilon, sweep_size, sweep_user_split, verify,
    write_heatmap_csv, ExperimentConfig, SweepOptions, SweepResult, Variant,
};

/// Monte Carlo experiments for a reflective-refractive metasurface downlink.
#[derive(Debug, Parser)]
#[command(name = "omnisurf", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, overriding the configuration.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo trials, overriding the configuration.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Variants to run (repeatable); all of them when omitted.
    #[arg(long, global = true, value_parser = parse_variant)]
    variant: Vec<Variant>,
    /// Per-trial log used to resume an interrupted sweep.
    #[arg(long, global = true)]
    records: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One optimized instance with a per-user report.
    Run,
    /// Sum rate against the surface side length.
    SweepSize {
        /// Side lengths, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
    },
    /// Sum rate against phase-control bits.
    SweepBits {
        #[arg(long, value_delimiter = ',')]
        values: Vec<u32>,
    },
    /// Sum rate against the reflect/refract power ratio.
    SweepEpsilon {
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// User disk radius in meters.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Sum rate against the fraction of users on the refractive side.
    SweepSplit {
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Best single-user rate over a grid of positions.
    Heatmap {
        /// Reflect/refract power ratio.
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
    },
    /// Analytical and physical checks; fails when any check fails.
    Verify,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: omnisurf::Error| e.to_string())
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.run.trials = trials;
    }
    if let Some(out) = &common.out {
        cfg.run.output = out.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn or_config<T: Clone>(given: Vec<T>, configured: &[T]) -> Vec<T> {
    if given.is_empty() {
        configured.to_vec()
    } else {
        given
    }
}

fn print_sweep(result: &SweepResult) {
    println!("{:<8} {:>10} {:<5} {:>12} {:>10} {:>7}", "axis", "value", "var", "mean", "stderr", "trials");
    for r in &result.rows {
        println!(
            "{:<8} {:>10.4} {:<5} {:>12.4} {:>10.4} {:>7}",
            r.axis, r.value, r.variant, r.mean_sum_rate, r.std_error, r.trials
        );
    }
}

fn finish_sweep(result: SweepResult, out: &Path) -> Result<()> {
    result.write_csv(out)?;
    print_sweep(&result);
    log::info!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.common)?;
    let out = PathBuf::from(&cfg.run.output);
    let opts = SweepOptions {
        variants: if cli.common.variant.is_empty() {
            Variant::ALL.to_vec()
        } else {
            cli.common.variant.clone()
        },
        records: cli.common.records.clone(),
    };
    match cli.command {
        Command::Run => {
            let [variant] = opts.variants.as_slice() else {
                bail!("`run` takes exactly one --variant");
            };
            let report = run_single(&cfg, *variant)?;
            let text = report.to_toml();
            std::fs::write(&out, &text).with_context(|| format!("writing {}", out.display()))?;
            print!("{text}");
        }
        Command::SweepSize { values } => {
            finish_sweep(sweep_size(&cfg, &or_config(values, &cfg.sweep.sizes), &opts)?, &out)?;
        }
        Command::SweepBits { values } => {
            finish_sweep(sweep_bits(&cfg, &or_config(values, &cfg.sweep.bits), &opts)?, &out)?;
        }
        Command::SweepEpsilon { values, radius } => {
            let radius = radius.unwrap_or(cfg.scenario.mu_radius);
            let values = or_config(values, &cfg.sweep.epsilons);
            finish_sweep(sweep_epsilon(&cfg, &values, radius, &opts)?, &out)?;
        }
        Command::SweepSplit { values } => {
            let values = or_config(values, &cfg.sweep.split_fractions);
            finish_sweep(sweep_user_split(&cfg, &values, &opts)?, &out)?;
        }
        Command::Heatmap { epsilon } => {
            let cells = heatmap(&cfg, epsilon)?;
            write_heatmap_csv(&out, &cells)?;
            println!("{} cells written to {}", cells.len(), out.display());
        }
        Command::Verify => {
            let checks = verify(&cfg);
            print!("{}", format_checks(&checks));
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    // `run` defaults to the full surface when no variant is given
    let cli = match (&cli.command, cli.common.variant.is_empty()) {
        (Command::Run, true) => Cli {
            common: Common {
                variant: vec![Variant::Ios],
                ..cli.common
            },
            ..cli
        },
        _ => cli,
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
