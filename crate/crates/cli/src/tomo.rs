use qtraj::infometrics::{coherent_information, layout_lower_bound};
use qtraj::layouts::{LayoutConfig, LayoutKind};
use qtraj::qmat::PureState;
use qtraj::tomography::{
    conditional_process_pair, min_action_fidelity, process_coherent_information, simulate_dataset,
    ReconstructOptions, Reconstructor, TomographySchedule,
};
use serde::Serialize;

use crate::{exec_for, CliError, CliResult};

#[derive(Clone, Debug, Serialize)]
pub struct BranchReport {
    pub probability: f64,
    pub coherent_information: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TomoReport {
    pub layout: LayoutKind,
    /// `None` for exact (infinite-shot) data.
    pub shots: Option<u64>,
    pub seed: u64,
    pub cptp_projection: bool,
    pub analytic_coherent_information: f64,
    pub analytic_lower_bound: f64,
    pub coherent_information: f64,
    pub lower_bound: f64,
    pub plus: Option<BranchReport>,
    pub minus: Option<BranchReport>,
    /// Worst state fidelity between reconstructed and analytic outputs over the inputs.
    pub min_action_fidelity: f64,
    pub tp_residual: f64,
}

/// The switch on two copies of `xy(0.5)`.
pub fn demo_config() -> LayoutConfig {
    LayoutConfig::new(LayoutKind::Switch, "xy", None, 0.5)
}

/// Simulate two-qubit tomography of the layout on `T (x) I`, reconstruct it and
/// report its coherent information, the post-selected lower bound and the
/// agreement with the analytic process. Finite-shot runs clip the fit to a
/// positive process.
pub fn run_tomo_demo(
    config: &LayoutConfig,
    shots: Option<u64>,
    seed: u64,
    workers: usize,
) -> CliResult<TomoReport> {
    if shots == Some(0) {
        return Err(CliError::Usage("--shots must be at least 1".into()));
    }
    let exec = exec_for(workers)?;
    let options = ReconstructOptions {
        project_cptp: shots.is_some(),
    };
    let bell_out = config.bell_output()?;
    let analytic_coherent_information = coherent_information(&bell_out)?.value;
    let analytic_lower_bound = layout_lower_bound(&bell_out)?.value;

    let schedule = TomographySchedule::two_qubit();
    let data = simulate_dataset(config, &schedule, shots, seed, exec)?;
    let chi = Reconstructor::new(&schedule)?.reconstruct(&data, options)?;
    let trajectory = config.layout.native_trajectory();
    let reconstructed = process_coherent_information(&chi, &trajectory)?;
    let process = config.process(&PureState::bell_phi_plus().density())?;
    let fidelity = min_action_fidelity(&chi, |r| process.apply(r), &schedule)?;

    // an independent seed branch for the conditional runs
    let pair =
        conditional_process_pair(config, shots, seed ^ 0x9e37_79b9_7f4a_7c15, exec, options)?;
    let branch = |b: &Option<qtraj::tomography::ConditionalBranch>| {
        b.as_ref().map(|b| BranchReport {
            probability: b.probability,
            coherent_information: b.coherent_information,
        })
    };
    Ok(TomoReport {
        layout: config.layout,
        shots,
        seed,
        cptp_projection: options.project_cptp,
        analytic_coherent_information,
        analytic_lower_bound,
        coherent_information: reconstructed,
        lower_bound: pair.lower_bound()?,
        plus: branch(&pair.plus),
        minus: branch(&pair.minus),
        min_action_fidelity: fidelity,
        tp_residual: chi.tp_residual(),
    })
}
