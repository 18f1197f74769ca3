use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qtraj::layouts::{EnvMethod, Gate, LayoutConfig, LayoutKind};
use qtraj_cli::histogram::{DEFAULT_SAMPLES, FINE_BINS, FINE_RANGE};
use qtraj_cli::output::{write_histogram, write_mcfid, write_sweep, write_tomo};
use qtraj_cli::{
    run_histogram, run_mcfid, run_sweep, run_tomo_demo, tomo, CliError, CliResult, Family, Format,
    HistogramSpec, McfidSpec, Pairing, SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "qtraj",
    version,
    about = "Coherent-information plot data for superpositions of trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed; every task derives its own stream from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Output file (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl Common {
    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    fn sink(&self) -> CliResult<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Coherent information of each layout over a grid of noise strengths.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Family::Xy)]
        family: Family,
        /// Comma-separated layouts (parallel, series, switch, single, classical).
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "parallel,series,switch,single,classical"
        )]
        layouts: Vec<LayoutKind>,
        #[arg(long, default_value_t = 0.0)]
        p_start: f64,
        #[arg(long, default_value_t = 1.0)]
        p_end: f64,
        #[arg(long, default_value_t = 21)]
        p_steps: usize,
        /// Controlled unitaries of the series layout; the family picks defaults.
        #[arg(long)]
        u1: Option<Gate>,
        #[arg(long)]
        u2: Option<Gate>,
        #[arg(long)]
        u3: Option<Gate>,
        /// Environment states of the parallel layout: uniform, haar or kraus-weighted.
        #[arg(long, default_value = "kraus-weighted")]
        env: EnvMethod,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        vacuum_phase: f64,
        /// Probability of the first channel in the classical layout.
        #[arg(long, default_value_t = 0.5)]
        q: f64,
    },
    /// Coherent-information histograms of random channels.
    Histogram {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: u64,
        #[arg(long, value_enum, default_value_t = Pairing::Same)]
        pairing: Pairing,
        #[arg(long)]
        bins: Option<usize>,
        /// Bin range as `lo,hi`.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        range: Option<(f64, f64)>,
        /// 100000 bins over [0, 0.001] unless overridden.
        #[arg(long)]
        fine: bool,
    },
    /// Monte Carlo process infidelity of sampled Pauli unitaries.
    Mcfid {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "bb84")]
        channel: String,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        /// Comma-separated sequence lengths.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 1000)]
        probe_states: usize,
    },
    /// Simulated process tomography of one layout.
    Tomo {
        #[command(flatten)]
        common: Common,
        /// Layout config as a JSON file path or inline JSON; defaults to the switch on xy(0.5).
        #[arg(long)]
        config: Option<String>,
        /// Shots per measurement setting; exact probabilities when omitted.
        #[arg(long)]
        shots: Option<u64>,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(lo)?, parse(hi)?))
}

fn load_config(arg: &str) -> CliResult<LayoutConfig> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg)?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid layout config: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sweep {
            common,
            family,
            layouts,
            p_start,
            p_end,
            p_steps,
            u1,
            u2,
            u3,
            env,
            vacuum_phase,
            q,
        } => {
            let defaults = family.default_gates();
            let gates = (u1.is_some() || u2.is_some() || u3.is_some()).then(|| {
                [
                    u1.unwrap_or(defaults[0]),
                    u2.unwrap_or(defaults[1]),
                    u3.unwrap_or(defaults[2]),
                ]
            });
            let spec = SweepSpec {
                family,
                layouts,
                p_start,
                p_end,
                p_steps,
                gates,
                env,
                vacuum_phase,
                q,
                seed: common.seed,
                workers: common.workers(),
            };
            let report = run_sweep(&spec)?;
            write_sweep(&report, common.format, common.sink()?)
        }
        Command::Histogram {
            common,
            samples,
            pairing,
            bins,
            range,
            fine,
        } => {
            let mut spec = HistogramSpec::new(samples, pairing, common.seed);
            if fine {
                spec.bins = FINE_BINS;
                spec.range = FINE_RANGE;
            }
            spec.bins = bins.unwrap_or(spec.bins);
            spec.range = range.unwrap_or(spec.range);
            spec.workers = common.workers();
            let report = run_histogram(&spec)?;
            write_histogram(&report, common.format, common.sink()?)
        }
        Command::Mcfid {
            common,
            channel,
            p,
            n_list,
            trials,
            probe_states,
        } => {
            let mut spec = McfidSpec::new(&channel, p);
            if let Some(list) = n_list {
                spec.n_list = list;
            }
            spec.trials = trials;
            spec.probe_states = probe_states;
            spec.seed = common.seed;
            spec.workers = common.workers();
            let rows = run_mcfid(&spec)?;
            write_mcfid(&rows, common.format, common.sink()?)
        }
        Command::Tomo {
            common,
            config,
            shots,
        } => {
            let cfg = match config {
                Some(arg) => load_config(&arg)?,
                None => tomo::demo_config(),
            };
            let report = run_tomo_demo(&cfg, shots, common.seed, common.workers())?;
            write_tomo(&report, common.format, common.sink()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qtraj: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
