use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hrcsafe::config::TpModeConfig;
use hrcsafe::{cmd_heatmap, cmd_oracle, cmd_report, cmd_safety, cmd_simulate, Overrides, Run};

#[derive(Parser)]
#[command(version, about = "Perception-to-safety reports for human-robot collaboration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, default_value = "hrcsafe.toml")]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte-Carlo integration with this many samples.
    #[arg(long, global = true, conflicts_with = "grid")]
    mc_samples: Option<usize>,
    /// Grid integration with this many nodes per axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true, value_enum)]
    tp_mode: Option<TpArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TpArg {
    Total,
    Inference,
}

#[derive(Subcommand)]
enum Command {
    /// CCP and ACP per profile, decreases and margins calibration.
    Safety,
    /// Collision probability grids and their decrease percentage.
    Heatmap,
    /// Baseline vs attentive pipeline over synthetic scenarios.
    Simulate,
    /// Simulation, derived safety metrics, heatmaps and a manifest.
    Report,
    /// Brute-force validators.
    Oracle,
}

fn run(cli: Cli) -> Result<bool, hrcsafe::Error> {
    let overrides = Overrides {
        seed: cli.seed,
        out_dir: cli.out,
        mc_samples: cli.mc_samples,
        grid: cli.grid,
        tp_mode: cli.tp_mode.map(|m| match m {
            TpArg::Total => TpModeConfig::Total,
            TpArg::Inference => TpModeConfig::Inference,
        }),
    };
    let run = Run::load(&cli.config, &overrides)?;
    let out = run.config.out_dir.display().to_string();
    match cli.command {
        Command::Safety => {
            let s = cmd_safety(&run)?;
            for p in &s.profiles {
                println!("{:<20} CCP {:.4e}  ACP {:.4e}", p.name, p.report.ccp.value, p.report.acp.value);
            }
            if let Some(c) = &s.calibration {
                println!("calibrated margins sum {:.4} m, residual {:.4e}", c.margins_sum, c.residual);
            }
        }
        Command::Heatmap => {
            cmd_heatmap(&run)?;
        }
        Command::Simulate => {
            let s = cmd_simulate(&run)?;
            println!(
                "inference {:.3} -> {:.3} ms, AR {:.3} -> {:.3}",
                s.baseline.inference_ms, s.attentive.inference_ms, s.baseline.ar, s.attentive.ar
            );
        }
        Command::Report => {
            let r = cmd_report(&run)?;
            println!("{} files", r.files.len() + 1);
        }
        Command::Oracle => {
            let checks = cmd_oracle(&run)?;
            for c in &checks {
                println!("{}", c.line());
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    println!("wrote {out}");
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
