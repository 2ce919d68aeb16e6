use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod fail;
mod output;

use commands::{Ctx, DemoKind, Model};
use config::RunConfig;
use fail::Failure;
use output::{Manifest, Outputs};

/// Factorial audit-study simulation and estimation.
#[derive(Debug, Parser)]
#[command(name = "pitchaudit", version)]
struct Cli {
    /// Seed for every random draw; required by stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// TOML run configuration; built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate rating profiles and the email campaign schedule.
    Design {
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Profiles per evaluator session.
        #[arg(long)]
        n_profiles: Option<u32>,
        #[arg(long)]
        min_gap_days: Option<u32>,
    },
    /// Simulate ratings, opens and the tracking log for a design.
    Simulate {
        /// Directory holding design artifacts (default: --out).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Build analysis panels from simulated or collected data.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Fit one estimator.
    Fit {
        #[arg(value_enum)]
        model: Model,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Monte Carlo demonstrations of the naive estimators' bias.
    Demo {
        #[arg(value_enum)]
        which: DemoKind,
        /// Override the number of replications.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Collect fit outputs into a text report.
    Report {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// design, simulate, ingest, every fit and report in one directory.
    Run {
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Check the manifest checksums in --out.
    Verify,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config_flag("--threads", "must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::runtime(e.to_string()))?;
    }
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Design { catalog, n_profiles, min_gap_days } => {
            if let Some(p) = catalog {
                cfg.catalog = commands::load_catalog(p)?;
            }
            if let Some(n) = n_profiles {
                cfg.design.profiles_per_session = *n;
            }
            if let Some(g) = min_gap_days {
                cfg.design.min_gap_days = *g;
            }
        }
        Command::Run { catalog: Some(p) } => cfg.catalog = commands::load_catalog(p)?,
        _ => {}
    }
    cfg.validate()?;
    let hash = cfg.hash();

    if let Command::Verify = cli.command {
        let m = Manifest::read(&cli.out)?
            .ok_or_else(|| Failure::config_flag("--out", format!("no manifest in {}", cli.out.display())))?;
        let bad = m.mismatches(&cli.out);
        return if bad.is_empty() {
            Ok(())
        } else {
            Err(Failure::runtime(format!("checksum mismatch: {}", bad.join(", "))))
        };
    }

    let input = match &cli.command {
        Command::Simulate { input }
        | Command::Ingest { input }
        | Command::Fit { input, .. }
        | Command::Report { input } => input.clone().unwrap_or_else(|| cli.out.clone()),
        _ => cli.out.clone(),
    };
    let ctx = Ctx { cfg: &cfg, seed: cli.seed, input };
    // Seed problems are reported before anything is written.
    match &cli.command {
        Command::Design { .. } => drop(ctx.seed("design")?),
        Command::Simulate { .. } => drop(ctx.seed("simulate")?),
        Command::Fit { model: Model::Loo, .. } => drop(ctx.seed("fit loo")?),
        Command::Demo { .. } => drop(ctx.seed("demo")?),
        Command::Run { .. } => drop(ctx.seed("run")?),
        _ => {}
    }

    let mut out = Outputs::new(&cli.out)?;
    let result = (|| -> Result<(), Failure> {
        match &cli.command {
            Command::Design { .. } => {
                commands::design(&ctx, &mut out)?;
                out.stage("design", cli.seed, &hash);
            }
            Command::Simulate { .. } => {
                commands::simulate(&ctx, &mut out)?;
                out.stage("simulate", cli.seed, &hash);
            }
            Command::Ingest { .. } => {
                commands::ingest(&ctx, &mut out)?;
                out.stage("ingest", None, &hash);
            }
            Command::Fit { model, .. } => {
                commands::fit(&ctx, *model, &mut out)?;
                let seed = if *model == Model::Loo { cli.seed } else { None };
                out.stage(&format!("fit-{}", model.name()), seed, &hash);
            }
            Command::Demo { which, reps } => {
                commands::demo(&ctx, *which, *reps, &mut out)?;
                out.stage("demo", cli.seed, &hash);
            }
            Command::Report { .. } => {
                commands::report(&ctx, &mut out)?;
                out.stage("report", None, &hash);
            }
            Command::Run { .. } => {
                commands::design(&ctx, &mut out)?;
                out.stage("design", cli.seed, &hash);
                commands::simulate(&ctx, &mut out)?;
                out.stage("simulate", cli.seed, &hash);
                commands::ingest(&ctx, &mut out)?;
                out.stage("ingest", None, &hash);
                for m in Model::ALL {
                    commands::fit(&ctx, m, &mut out)?;
                    out.stage(&format!("fit-{}", m.name()), if m == Model::Loo { cli.seed } else { None }, &hash);
                }
                commands::report(&ctx, &mut out)?;
                out.stage("report", None, &hash);
            }
            Command::Verify => unreachable!("handled above"),
        }
        Ok(())
    })();
    match result {
        Ok(()) => out.finish(),
        Err(e) => {
            out.abort();
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", Failure::config(first).to_json_line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json_line());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
