//! Plot-data generators behind the `qtraj` command: coherent-information
//! sweeps, random-channel histograms, Monte Carlo fidelity convergence and a
//! tomography report. Every generator is deterministic in its seed and
//! independent of the worker count.

pub mod histogram;
pub mod mcfid;
pub mod output;
pub mod sweep;
pub mod tomo;

use qtraj::exec::{check_workers, Exec};

pub use histogram::{run_histogram, Histogram, HistogramReport, HistogramSpec, Pairing};
pub use mcfid::{run_mcfid, McfidRow, McfidSpec};
pub use output::Format;
pub use sweep::{run_sweep, Family, SweepReport, SweepRow, SweepSpec};
pub use tomo::{run_tomo_demo, TomoReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] qtraj::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input, 3 for numeric-consistency faults, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numeric_fault() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn exec_for(workers: usize) -> CliResult<Exec> {
    Ok(check_workers(workers)?)
}
