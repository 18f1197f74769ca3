use qtraj::channels::{self, PauliMixture};
use qtraj::infometrics::average_process_fidelity;
use qtraj::rng;
use serde::Serialize;

use crate::{exec_for, CliError, CliResult};

pub const DEFAULT_N_LIST: [usize; 12] = [1, 2, 5, 10, 25, 50, 100, 250, 500, 1000, 2500, 10_000];

#[derive(Clone, Debug)]
pub struct McfidSpec {
    /// Pauli family: `xy`, `bf`, `pf` or `bb84`.
    pub channel: String,
    pub p: f64,
    pub n_list: Vec<usize>,
    pub trials: u64,
    pub probe_states: usize,
    pub seed: u64,
    pub workers: usize,
}

impl McfidSpec {
    pub fn new(channel: &str, p: f64) -> Self {
        Self {
            channel: channel.into(),
            p,
            n_list: DEFAULT_N_LIST.to_vec(),
            trials: 100,
            probe_states: 1000,
            seed: 0,
            workers: 1,
        }
    }

    pub fn mixture(&self) -> CliResult<PauliMixture> {
        Ok(match self.channel.as_str() {
            "xy" => PauliMixture::xy(self.p)?,
            "bf" | "bit-flip" | "bit_flip" => PauliMixture::bit_flip(self.p)?,
            "pf" | "phase-flip" | "phase_flip" => PauliMixture::phase_flip(self.p)?,
            "bb84" => PauliMixture::bb84(self.p)?,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown Pauli channel `{other}` (expected xy, bf, pf or bb84)"
                )))
            }
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(CliError::Usage("--n-list must hold positive counts".into()));
        }
        if self.trials == 0 || self.probe_states == 0 {
            return Err(CliError::Usage(
                "--trials and --probe-states must be at least 1".into(),
            ));
        }
        self.mixture().map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McfidRow {
    pub n: usize,
    pub mean_infidelity: f64,
    /// Standard error of the mean over trials.
    pub stderr: f64,
}

/// For each `N`, the mean over trials of `1 - F_av` between the Pauli channel
/// and the average of `N` sampled Pauli unitaries. Trial `t` of entry `i`
/// is task `k = i * trials + t`; its unitaries come from stream `2k` and its
/// probe states from stream `2k + 1`.
pub fn run_mcfid(spec: &McfidSpec) -> CliResult<Vec<McfidRow>> {
    spec.validate()?;
    let exec = exec_for(spec.workers)?;
    let mix = spec.mixture()?;
    let ideal = channels::pauli_mixture_channel(&mix);
    let trials = spec.trials;
    let infidelities = exec.try_map(spec.n_list.len() as u64 * trials, |k| {
        let n = spec.n_list[(k / trials) as usize];
        let seq = mix.sample_unitaries(n, &mut rng::stream(spec.seed, 2 * k));
        let f = average_process_fidelity(
            &ideal,
            &seq,
            spec.probe_states,
            &mut rng::stream(spec.seed, 2 * k + 1),
        )?;
        Ok(1.0 - f)
    })?;
    Ok(spec
        .n_list
        .iter()
        .zip(infidelities.chunks(trials as usize))
        .map(|(&n, xs)| {
            let m = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / m;
            let stderr = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
            } else {
                0.0
            };
            McfidRow {
                n,
                mean_infidelity: mean,
                stderr,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_worker_independent() {
        let mut spec = McfidSpec::new("bb84", 0.5);
        spec.n_list = vec![1, 25];
        spec.trials = 8;
        spec.probe_states = 50;
        let a = run_mcfid(&spec).unwrap();
        spec.workers = 3;
        assert_eq!(a, run_mcfid(&spec).unwrap());
        assert!(a[1].mean_infidelity < a[0].mean_infidelity);
    }

    #[test]
    fn single_unitary_against_depolarising() {
        let mut spec = McfidSpec::new("bb84", 0.5);
        spec.n_list = vec![1];
        spec.trials = 3;
        spec.probe_states = 20;
        let row = &run_mcfid(&spec).unwrap()[0];
        assert!((row.mean_infidelity - 0.5).abs() < 1e-12);
        assert!(row.stderr < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let mut spec = McfidSpec::new("amplitude", 0.5);
        assert!(matches!(run_mcfid(&spec), Err(CliError::Usage(_))));
        spec.channel = "xy".into();
        spec.n_list.clear();
        assert!(matches!(run_mcfid(&spec), Err(CliError::Usage(_))));
    }
}
