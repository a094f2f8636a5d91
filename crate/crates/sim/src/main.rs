use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lsfd_core::power::Tolerance;
use lsfd_core::receivers::ReceiverKind;
use lsfd_core::NetworkConfig;
use lsfd_sim::config_file::load_config;
use lsfd_sim::output::emit_results;
use lsfd_sim::scenario::{LsfdMode, PowerMode, Scenario, EMPIRICAL_SINR_BLOCKS};
use lsfd_sim::stats::from_db;
use lsfd_sim::sweep::{parse_range, sweep, sweep_csv};
use lsfd_sim::validation::{validate_analytic_vs_monte_carlo, ValidationSetup};
use lsfd_sim::run_scenario;

/// println! that ignores a closed stdout (e.g. when piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "lsfd", version, about = "Uplink massive-MIMO simulator with large scale fading decoding")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run drops of one scheme and write rates.csv, diagnostics.csv and summary.json.
    Simulate(SimulateArgs),
    /// Compare closed-form SINR terms with Monte Carlo on a small random network.
    Validate(ValidateArgs),
    /// Served fraction against target SINR, with and without power control.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Decoder {
    Mf,
    Zf,
}

impl From<Decoder> for ReceiverKind {
    fn from(d: Decoder) -> Self {
        match d {
            Decoder::Mf => ReceiverKind::MatchedFilter,
            Decoder::Zf => ReceiverKind::ZeroForcing,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[allow(clippy::enum_variant_names)]
enum Lsfd {
    None,
    ZfLsfd,
    Optimal,
    DecOpt,
    DecMmse,
}

impl From<Lsfd> for LsfdMode {
    fn from(m: Lsfd) -> Self {
        match m {
            Lsfd::None => LsfdMode::None,
            Lsfd::ZfLsfd => LsfdMode::ZfLsfd,
            Lsfd::Optimal => LsfdMode::Optimal,
            Lsfd::DecOpt => LsfdMode::DecentralizedOptimal,
            Lsfd::DecMmse => LsfdMode::DecentralizedMmse,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Power {
    Fixed,
    Bisection,
    Distributed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SinrMode {
    Analytic,
    Empirical,
}

#[derive(Args)]
struct Common {
    /// TOML file with NetworkConfig fields; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mf")]
    decoder: Decoder,
    #[arg(long, value_enum, default_value = "optimal")]
    lsfd: Lsfd,
    #[arg(long, default_value_t = 1000)]
    drops: u64,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// How distributed power control measures SINRs.
    #[arg(long, value_enum, default_value = "analytic")]
    sinr_mode: SinrMode,
    #[arg(long, default_value_t = 1000)]
    max_rounds: usize,
}

impl Common {
    fn config(&self) -> Result<NetworkConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => NetworkConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn scenario(&self, power: PowerMode) -> Result<Scenario> {
        let mut s = Scenario::new(self.config()?, self.decoder.into(), self.lsfd.into(), power);
        s.control.max_rounds = self.max_rounds;
        if self.sinr_mode == SinrMode::Empirical {
            s.control.empirical_blocks = Some(EMPIRICAL_SINR_BLOCKS);
        }
        Ok(s)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "fixed")]
    power: Power,
    /// Target SINR for distributed power control, dB.
    #[arg(long, allow_hyphen_values = true)]
    gamma_db: Option<f64>,
    /// Absolute bisection tolerance on the SINR target (default: 1e-3 relative).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    cells: usize,
    #[arg(long, default_value_t = 2)]
    users: usize,
    #[arg(long, default_value_t = 30)]
    antennas: usize,
    /// Largest acceptable relative error of any term.
    #[arg(long, default_value_t = 0.02)]
    tolerance: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Targets in dB as start:end:step.
    #[arg(long, allow_hyphen_values = true)]
    gamma_db_range: String,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let power = match (args.power, args.gamma_db) {
        (Power::Fixed, _) => PowerMode::Fixed,
        (Power::Bisection, _) => PowerMode::Bisection,
        (Power::Distributed, Some(db)) => PowerMode::Distributed { gamma: from_db(db) },
        (Power::Distributed, None) => bail!("--power distributed needs --gamma-db"),
    };
    let mut scenario = args.common.scenario(power)?;
    if let Some(e) = args.epsilon {
        scenario.bisection.tolerance = Tolerance::Absolute(e);
    }
    let report = run_scenario(&scenario, args.common.drops)?;
    let paths = emit_results(&report, &args.out_dir)?;
    let s = report.summary;
    say!(
        "{} drops, {} / {} / {}: min {:.4}, 5% outage {:.4}, median {:.4}, mean {:.4} bit/s/Hz",
        report.drops.len(),
        scenario.decoder,
        scenario.lsfd,
        scenario.power,
        s.min_rate,
        s.outage_05,
        s.median_rate,
        s.mean_rate
    );
    say!("wrote {}, {}, {}", paths.rates.display(), paths.diagnostics.display(), paths.summary.display());
    Ok(())
}

fn validate(args: &ValidateArgs) -> Result<bool> {
    let setup = ValidationSetup {
        cells: args.cells,
        users: args.users,
        antennas: args.antennas,
        samples: args.samples,
        seed: args.seed,
        ..Default::default()
    };
    let report = validate_analytic_vs_monte_carlo(&setup)?;
    say!("decoder combiner    user   term    analytic        monte-carlo     error");
    for c in &report.checks {
        say!(
            "{:<7} {:<11} ({},{})  {:<7} {:<15.6e} {:<15.6e} {:.2e}{}",
            c.decoder.to_string(),
            c.family.name(),
            c.user.0,
            c.user.1,
            c.term,
            c.analytic,
            c.empirical,
            c.error,
            if c.cancelled { " (cancelled, relative to useful)" } else { "" }
        );
    }
    let worst = report.max_relative_error();
    say!("max relative error {worst:.3e}, max cancelled residual {:.3e}, max term correlation z {:.2}", report.max_cancelled_residual(), report.max_correlation_z);
    Ok(worst <= args.tolerance)
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let targets = parse_range(&args.gamma_db_range)?;
    let scenario = args.common.scenario(PowerMode::Fixed)?;
    let rows = sweep(&scenario, args.common.drops, &targets)?;
    let csv = sweep_csv(&rows);
    match &args.out {
        Some(p) => std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let _ = std::io::stdout().lock().write_all(csv.as_bytes());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Validate(a) => validate(a),
        Command::Sweep(a) => run_sweep(a).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed: a term exceeds the tolerance");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
