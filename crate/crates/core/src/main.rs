use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sqg_core::config::{load_config, Overrides};
use sqg_core::experiment::{exit_code, run_experiment, Command};

#[derive(Parser)]
#[command(name = "sqg", version, about = "Dissipative SQG simulator and regularity diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the equation and write the energy ledger and fields
    Run(Common),
    /// Evaluate a regularity criterion over a lattice of centers
    Screen(Common),
    /// Extend the initial datum to the half-space
    Extend(Common),
    /// Excess reports at the configured centers and radii
    Excess(Common),
    /// Closed-form dimension exponents
    Dims(Common),
    /// Quick internal consistency checks
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    /// grid points per side
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long = "eps-visc")]
    eps_visc: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Cmd::Run(c) => (Command::Run, c),
        Cmd::Screen(c) => (Command::Screen, c),
        Cmd::Extend(c) => (Command::Extend, c),
        Cmd::Excess(c) => (Command::Excess, c),
        Cmd::Dims(c) => (Command::Dims, c),
        Cmd::Selftest(c) => (Command::Selftest, c),
    };
    let ov = Overrides {
        alpha: c.alpha,
        n: c.grid,
        dt: c.dt,
        t_end: c.t_end,
        eps_visc: c.eps_visc,
        seed: c.seed,
        out: c.out,
    };
    let cfg = match load_config(&c.config, &ov) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    log::info!("config hash {}", cfg.hash());
    let report = run_experiment(&cfg, command);
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    if report.code != 0 {
        eprintln!("error: {}", report.message);
    }
    ExitCode::from(report.code as u8)
}
