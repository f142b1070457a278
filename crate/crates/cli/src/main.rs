use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pilotlen::experiments::{
    run_single, run_vary_probability, run_vary_ratio, write_rows, Scenario, SweepKind, SweepOutput,
};
use pilotlen::{ChannelSpec, Error, PilotPolicy, RcspConfig, SimConfig, Threshold};

const DEFAULT_RATIO_GRID: [f64; 10] = [1.25, 1.5, 2.0, 3.0, 4.0, 5.0, 7.5, 10.0, 15.0, 20.0];
const DEFAULT_PROBABILITY_GRID: [f64; 11] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99];
const DEFAULT_CHANNEL: (f64, f64, f64) = (0.5, 1.5, 0.5);

#[derive(Parser)]
#[command(name = "pilotlen", version, about = "Optimal pilot length and go/no-go threshold on two-state block fading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a single scenario and print the report.
    Optimize(SingleArgs),
    /// Sweep the SNR ratio x_G²/x_B² at p_G = 0.5 and unit average SNR.
    SweepRatio(SweepArgs),
    /// Sweep p_G at x_G² = 1.5, x_B² = 0.5.
    SweepProb(SweepArgs),
    /// Optimize, then Monte Carlo the chosen (or overridden) policy.
    Simulate(SimArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML, format = "pilotlen-scenario/1").
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Write CSV rows here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Information bits per packet [default: 128, or the scenario's value].
    #[arg(long)]
    k: Option<u32>,
    /// Truncation tolerance of the data-length series [default: 1e-2].
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct PolicyOverride {
    /// Evaluate this pilot length instead of the optimum.
    #[arg(long)]
    n: Option<u64>,
    /// Threshold for the overridden policy [default: -inf, always transmit].
    #[arg(long, allow_hyphen_values = true, requires = "n")]
    t: Option<String>,
}

#[derive(Args)]
struct SingleArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    policy: PolicyOverride,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated grid, e.g. `1.5,2,3`.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    policy: PolicyOverride,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> ExitCode {
    if e.is_numerical() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn run(cli: Cli) -> pilotlen::Result<ExitCode> {
    match cli.command {
        Command::Optimize(args) => {
            let scenario = load_scenario(&args.common)?;
            let policy = policy_override(&args.policy)?;
            let report = run_single(&scenario, policy, None)?;
            print!("{report}");
            if let Some(path) = &args.common.out {
                write_csv(Some(path), &[report.row(0.0)])?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate(args) => {
            let scenario = load_scenario(&args.common)?;
            let policy = policy_override(&args.policy)?;
            let cfg = SimConfig::new(args.trials, args.seed)?;
            let report = run_single(&scenario, policy, Some(&cfg))?;
            print!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Command::SweepRatio(args) => sweep(&args, SweepKind::SnrRatio),
        Command::SweepProb(args) => sweep(&args, SweepKind::Probability),
    }
}

fn rcsp_config(common: &Common, base: RcspConfig) -> pilotlen::Result<RcspConfig> {
    RcspConfig::new(common.k.unwrap_or(base.k()), common.epsilon.unwrap_or(base.epsilon()))
        .map_err(|e| Error::Config(e.to_string()))
}

fn load_scenario(common: &Common) -> pilotlen::Result<Scenario> {
    let base = match &common.scenario {
        Some(path) => Scenario::from_file(path)?,
        None => {
            let (p, g, b) = DEFAULT_CHANNEL;
            Scenario::new(ChannelSpec::from_snr(p, g, b)?, RcspConfig::default())
        }
    };
    let rcsp = rcsp_config(common, base.rcsp)?;
    Ok(Scenario { rcsp, ..base })
}

fn policy_override(o: &PolicyOverride) -> pilotlen::Result<Option<PilotPolicy>> {
    let Some(n) = o.n else { return Ok(None) };
    let threshold = match o.t.as_deref() {
        None | Some("-inf") => Threshold::NegInfinity,
        Some(text) => {
            let t: f64 = text.parse().map_err(|_| Error::Config(format!("--t: cannot parse \"{text}\"")))?;
            Threshold::from_f64(t).map_err(|e| Error::Config(format!("--t: {e}")))?
        }
    };
    let threshold = if o.t.is_none() && n == 0 { Threshold::Finite(0.0) } else { threshold };
    PilotPolicy::new(n as f64, threshold).map(Some)
}

fn sweep(args: &SweepArgs, kind: SweepKind) -> pilotlen::Result<ExitCode> {
    let (rcsp, grid) = match &args.common.scenario {
        Some(path) => {
            let s = Scenario::from_file(path)?;
            if s.sweep != SweepKind::None && s.sweep != kind {
                return Err(Error::Config(format!(
                    "{}: scenario declares sweep \"{}\" but \"{kind}\" was requested",
                    path.display(),
                    s.sweep
                )));
            }
            (s.rcsp, args.grid.clone().unwrap_or(s.grid))
        }
        None => (RcspConfig::default(), args.grid.clone().unwrap_or_default()),
    };
    let rcsp = rcsp_config(&args.common, rcsp)?;
    let grid = if grid.is_empty() {
        match kind {
            SweepKind::SnrRatio => DEFAULT_RATIO_GRID.to_vec(),
            _ => DEFAULT_PROBABILITY_GRID.to_vec(),
        }
    } else {
        grid
    };
    // Same validation as a scenario file carrying this grid.
    let (p, g, b) = DEFAULT_CHANNEL;
    Scenario::new(ChannelSpec::from_snr(p, g, b)?, rcsp).with_sweep(kind, grid.clone())?;

    let out: SweepOutput = match kind {
        SweepKind::SnrRatio => run_vary_ratio(&grid, &rcsp),
        _ => run_vary_probability(&grid, &rcsp),
    };
    for r in &out.rejected {
        eprintln!("rejected {}: {}", r.sweep_value, r.reason);
    }
    write_csv(args.common.out.as_deref(), &out.rows)?;
    Ok(match out.numerical_failure() {
        Some(_) => ExitCode::from(3),
        None => ExitCode::SUCCESS,
    })
}

fn write_csv(path: Option<&Path>, rows: &[pilotlen::experiments::SweepRow]) -> pilotlen::Result<()> {
    match path {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_rows(&mut w, rows)?;
            w.flush()?;
        }
        None => write_rows(io::stdout().lock(), rows)?,
    }
    Ok(())
}
