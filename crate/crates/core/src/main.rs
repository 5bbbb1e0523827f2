use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fdrelay::harness::output::{render_contour_csv, render_csv, write_text, ResultRow};
use fdrelay::harness::{self, RunMode, SimConfig};
use fdrelay::optimize::{contour_grid, optimize, OptimizeConfig};
use fdrelay::{Error, Result};

/// Full-duplex selective decode-and-forward relaying simulator.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Outage and throughput versus total average SNR.
    Outage(Common),
    /// Outage versus normalized self-interference variance.
    SiSweep(Common),
    /// Link-level bit error rate of each protocol.
    Ber(Common),
    /// Symbol selection accuracy at the relay.
    Accuracy(Common),
    /// Power allocation / relay placement optimization.
    Optimize(Common),
    /// Outage over normalized power split and relay distance.
    Contour {
        #[command(flatten)]
        common: Common,
        /// Grid points per axis.
        #[arg(long, default_value_t = 101)]
        resolution: usize,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum, default_value = "analytic")]
    mode: ModeArg,
    /// Fail if Monte Carlo and closed form disagree beyond three sigma.
    #[arg(long)]
    self_check: bool,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Analytic,
    Mc,
    Both,
}

impl From<ModeArg> for RunMode {
    fn from(m: ModeArg) -> RunMode {
        match m {
            ModeArg::Analytic => RunMode::Analytic,
            ModeArg::Mc => RunMode::Mc,
            ModeArg::Both => RunMode::Both,
        }
    }
}

fn sim_config(c: &Common) -> Result<SimConfig> {
    let mut cfg = match &c.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.trials {
        cfg.n_trials = t;
    }
    cfg.self_check |= c.self_check;
    cfg.validate()?;
    Ok(cfg)
}

fn optimize_config(c: &Common) -> Result<OptimizeConfig> {
    let cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io { path: p.clone(), source })?;
            serde_json::from_str(&text).map_err(|source| Error::Json { path: p.clone(), source })?
        }
        None => OptimizeConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Outage(c) => emit(&render_csv(&harness::run_outage_experiment(&sim_config(&c)?, c.mode.into())?), &c.out),
        Command::SiSweep(c) => emit(&render_csv(&harness::run_si_sweep(&sim_config(&c)?, c.mode.into())?), &c.out),
        Command::Ber(c) => emit(&render_csv(&harness::run_ber_experiment(&sim_config(&c)?)?), &c.out),
        Command::Accuracy(c) => emit(&render_csv(&harness::run_selection_accuracy(&sim_config(&c)?)?), &c.out),
        Command::Optimize(c) => {
            let cfg = optimize_config(&c)?;
            let r = optimize(&cfg)?;
            eprintln!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            let rows = vec![
                ResultRow::exact(0.0, "p_s", r.p_s),
                ResultRow::exact(0.0, "p_r", r.p_r),
                ResultRow::exact(0.0, "d_sr", r.d_sr),
                ResultRow::exact(0.0, "d_rd", r.d_rd),
                ResultRow::exact(0.0, "outage", r.outage),
                ResultRow::exact(0.0, "reference_outage", cfg.reference_outage()?),
                ResultRow::exact(0.0, "iterations", r.iterations as f64),
            ];
            emit(&render_csv(&rows), &c.out)
        }
        Command::Contour { common, resolution } => {
            let cfg = optimize_config(&common)?;
            emit(&render_contour_csv(&contour_grid(&cfg, resolution)?), &common.out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
