use std::str::FromStr;

use qtraj::channels::{self, KrausChannel};
use qtraj::infometrics::{coherent_information, crossover_points, Crossovers};
use qtraj::layouts::{self, ControlledOps, EnvMethod, EnvironmentSpec, Gate, LayoutKind};
use qtraj::qmat::PureState;
use serde::Serialize;

use crate::{exec_for, CliError, CliResult};

/// Channel family and pairing: `xy` and `bb84` use two copies of one channel,
/// `bfpf` puts a bit flip first and a phase flip second.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Xy,
    Bfpf,
    Bb84,
}

impl Family {
    pub fn channels(self, p: f64) -> qtraj::Result<(KrausChannel, KrausChannel)> {
        Ok(match self {
            Family::Xy => (channels::xy_channel(p)?, channels::xy_channel(p)?),
            Family::Bfpf => (channels::bit_flip(p)?, channels::phase_flip(p)?),
            Family::Bb84 => (channels::bb84(p)?, channels::bb84(p)?),
        })
    }

    /// `(Y, H, H)` for the bit/phase-flip pair, `(Y, I, I)` otherwise.
    pub fn default_gates(self) -> [Gate; 3] {
        match self {
            Family::Bfpf => [Gate::Y, Gate::H, Gate::H],
            _ => [Gate::Y, Gate::I, Gate::I],
        }
    }
}

impl FromStr for Family {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "xy" => Ok(Family::Xy),
            "bfpf" => Ok(Family::Bfpf),
            "bb84" => Ok(Family::Bb84),
            other => Err(CliError::Usage(format!(
                "unknown family `{other}` (expected xy, bfpf or bb84)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub family: Family,
    pub layouts: Vec<LayoutKind>,
    pub p_start: f64,
    pub p_end: f64,
    pub p_steps: usize,
    pub gates: Option<[Gate; 3]>,
    pub env: EnvMethod,
    pub vacuum_phase: f64,
    /// Probability of the first channel in the classical layout.
    pub q: f64,
    pub seed: u64,
    pub workers: usize,
}

impl SweepSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            layouts: LayoutKind::ALL.to_vec(),
            p_start: 0.0,
            p_end: 1.0,
            p_steps: 21,
            gates: None,
            env: EnvMethod::KrausWeighted,
            vacuum_phase: 0.0,
            q: 0.5,
            seed: 0,
            workers: 1,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.p_steps < 2 {
            return Err(CliError::Usage("--p-steps must be at least 2".into()));
        }
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.p_start) || !in_unit(self.p_end) || self.p_start > self.p_end {
            return Err(CliError::Usage(format!(
                "p range [{}, {}] must lie in [0, 1] and be increasing",
                self.p_start, self.p_end
            )));
        }
        if self.layouts.is_empty() {
            return Err(CliError::Usage("no layouts selected".into()));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(CliError::Usage(format!("--q {} outside [0, 1]", self.q)));
        }
        self.environment()?;
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let span = self.p_end - self.p_start;
        (0..self.p_steps)
            .map(|k| {
                if k + 1 == self.p_steps {
                    self.p_end
                } else {
                    self.p_start + span * k as f64 / (self.p_steps - 1) as f64
                }
            })
            .collect()
    }

    pub fn ops(&self) -> ControlledOps {
        let [u1, u2, u3] = self.gates.unwrap_or_else(|| self.family.default_gates());
        ControlledOps::from_gates(u1, u2, u3)
    }

    fn environment(&self) -> CliResult<EnvironmentSpec> {
        let seed = (self.env == EnvMethod::HaarRandom).then_some(self.seed);
        Ok(EnvironmentSpec::new(self.env, self.vacuum_phase, seed)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub layout: LayoutKind,
    pub ci: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub family: Family,
    pub rows: Vec<SweepRow>,
    /// Present when series, switch and parallel were all swept.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossovers: Option<Crossovers>,
}

/// Coherent information of each requested layout on each grid point.
pub fn run_sweep(spec: &SweepSpec) -> CliResult<SweepReport> {
    spec.validate()?;
    let exec = exec_for(spec.workers)?;
    let grid = spec.grid();
    let ops = spec.ops();
    let env = spec.environment()?;
    let bell = PureState::bell_phi_plus().density();
    let per_point = exec.try_map(grid.len() as u64, |k| {
        let p = grid[k as usize];
        let (a, b) = spec.family.channels(p)?;
        spec.layouts
            .iter()
            .map(|&layout| {
                let out = match layout {
                    LayoutKind::Parallel => layouts::parallel_controlled(&a, &b, &env, &bell)?,
                    LayoutKind::Series => layouts::series_controlled(&a, &b, &ops, &bell)?,
                    LayoutKind::Switch => layouts::switch(&a, &b, &bell)?,
                    LayoutKind::Single => layouts::single_use(&a, &bell)?,
                    LayoutKind::Classical => layouts::classical(spec.q, &a, &b, &bell)?,
                };
                Ok(SweepRow {
                    p,
                    layout,
                    ci: coherent_information(&out)?.value,
                })
            })
            .collect::<qtraj::Result<Vec<_>>>()
    })?;
    let rows: Vec<SweepRow> = per_point.into_iter().flatten().collect();
    let crossovers = sweep_crossovers(&grid, &rows)?;
    Ok(SweepReport {
        family: spec.family,
        rows,
        crossovers,
    })
}

fn curve(rows: &[SweepRow], layout: LayoutKind) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.layout == layout)
        .map(|r| r.ci)
        .collect()
}

fn sweep_crossovers(grid: &[f64], rows: &[SweepRow]) -> CliResult<Option<Crossovers>> {
    let series = curve(rows, LayoutKind::Series);
    let switch = curve(rows, LayoutKind::Switch);
    let parallel = curve(rows, LayoutKind::Parallel);
    if [&series, &switch, &parallel]
        .iter()
        .any(|c| c.len() != grid.len())
    {
        return Ok(None);
    }
    Ok(Some(crossover_points(grid, &series, &switch, &parallel)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use qtraj::infometrics::binary_entropy;

    #[test]
    fn xy_sweep_activation() {
        let report = run_sweep(&SweepSpec::new(Family::Xy)).unwrap();
        assert_eq!(report.rows.len(), 21 * 5);
        for row in &report.rows {
            match row.layout {
                LayoutKind::Series | LayoutKind::Switch => assert!((row.ci - 1.0).abs() < 1e-9),
                LayoutKind::Single => {
                    assert!((row.ci - (1.0 - binary_entropy(row.p).unwrap())).abs() < 1e-9)
                }
                _ => {}
            }
        }
    }

    #[test]
    fn bfpf_default_series_is_perfect() {
        let mut spec = SweepSpec::new(Family::Bfpf);
        spec.layouts = vec![LayoutKind::Series];
        let report = run_sweep(&spec).unwrap();
        assert!(report.rows.iter().all(|r| (r.ci - 1.0).abs() < 1e-9));
        assert!(report.crossovers.is_none());
    }

    #[test]
    fn bfpf_suboptimal_crossovers() {
        let mut spec = SweepSpec::new(Family::Bfpf);
        spec.gates = Some([Gate::Y, Gate::I, Gate::I]);
        spec.p_steps = 201;
        spec.layouts = vec![LayoutKind::Series, LayoutKind::Switch, LayoutKind::Parallel];
        let x = run_sweep(&spec).unwrap().crossovers.unwrap();
        assert!((x.series_switch.last().unwrap() - 0.67).abs() <= 0.01);
        assert!((x.series_parallel.last().unwrap() - 0.84).abs() <= 0.01);
    }

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec::new(Family::Xy);
        spec.p_steps = 1;
        assert!(matches!(run_sweep(&spec), Err(CliError::Usage(_))));
        let mut spec = SweepSpec::new(Family::Xy);
        spec.p_end = 1.5;
        assert!(matches!(run_sweep(&spec), Err(CliError::Usage(_))));
        assert!("zz".parse::<Family>().is_err());
    }

    #[test]
    fn grid_endpoints_exact() {
        let spec = SweepSpec::new(Family::Xy);
        let g = spec.grid();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[20], 1.0);
        assert!((g[5] - 0.25).abs() < 1e-15);
    }
}
