use qtraj::channels;
use qtraj::infometrics::coherent_information;
use qtraj::layouts::{self, ControlledOps, EnvironmentSpec, Gate};
use qtraj::qmat::PureState;
use qtraj::rng;
use serde::Serialize;

use crate::{exec_for, CliError, CliResult};

/// Values below this count as zero coherent information.
pub const ZERO_CI_TOL: f64 = 1e-8;
pub const DEFAULT_BINS: usize = 1_000;
pub const DEFAULT_RANGE: (f64, f64) = (0.0, 0.85);
pub const FINE_BINS: usize = 100_000;
pub const FINE_RANGE: (f64, f64) = (0.0, 0.001);
pub const DEFAULT_SAMPLES: u64 = 10_000;

/// Uniform bins over `[lo, hi)`; out-of-range values land in the edge bins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> CliResult<Self> {
        if bins == 0 {
            return Err(CliError::Usage("histogram needs at least one bin".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CliError::Usage(format!(
                "histogram range [{lo}, {hi}] must satisfy lo < hi"
            )));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; bins],
        })
    }

    pub fn from_values(
        lo: f64,
        hi: f64,
        bins: usize,
        values: impl IntoIterator<Item = f64>,
    ) -> CliResult<Self> {
        let mut h = Self::new(lo, hi, bins)?;
        values.into_iter().for_each(|v| h.add(v));
        Ok(h)
    }

    pub fn bin_of(&self, value: f64) -> usize {
        let bins = self.counts.len();
        let x = (value - self.lo) / (self.hi - self.lo) * bins as f64;
        if x.is_nan() || x < 0.0 {
            0
        } else {
            (x as usize).min(bins - 1)
        }
    }

    pub fn add(&mut self, value: f64) {
        let k = self.bin_of(value);
        self.counts[k] += 1;
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn edges(&self, k: usize) -> (f64, f64) {
        let n = self.counts.len() as f64;
        let at = |j: usize| self.lo + (self.hi - self.lo) * j as f64 / n;
        (at(k), at(k + 1))
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// Both trajectories carry copies of one random channel.
    Same,
    /// Each trajectory carries its own random channel.
    Different,
}

#[derive(Clone, Debug)]
pub struct HistogramSpec {
    pub samples: u64,
    pub pairing: Pairing,
    pub bins: usize,
    pub range: (f64, f64),
    pub seed: u64,
    pub workers: usize,
}

impl HistogramSpec {
    pub fn new(samples: u64, pairing: Pairing, seed: u64) -> Self {
        Self {
            samples,
            pairing,
            bins: DEFAULT_BINS,
            range: DEFAULT_RANGE,
            seed,
            workers: 1,
        }
    }

    pub fn fine(mut self) -> Self {
        self.bins = FINE_BINS;
        self.range = FINE_RANGE;
        self
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.samples == 0 {
            return Err(CliError::Usage("--samples must be at least 1".into()));
        }
        Histogram::new(self.range.0, self.range.1, self.bins).map(|_| ())
    }
}

/// Coherent information of the three superposition layouts on one channel draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub series: f64,
    pub parallel: f64,
    pub switch: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LayoutHistogram {
    pub name: String,
    /// Fraction of samples with coherent information below `ZERO_CI_TOL`,
    /// taken from the raw values rather than the bins.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_mass: Option<f64>,
    pub histogram: Histogram,
}

#[derive(Clone, Debug, Serialize)]
pub struct HistogramReport {
    pub samples: u64,
    pub pairing: Pairing,
    pub seed: u64,
    /// series, parallel, switch, then the series-parallel and series-switch differences.
    pub histograms: Vec<LayoutHistogram>,
    pub raw: Vec<Sample>,
}

impl HistogramReport {
    pub fn get(&self, name: &str) -> Option<&LayoutHistogram> {
        self.histograms.iter().find(|h| h.name == name)
    }

    pub fn zero_mass(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(|h| h.zero_mass)
    }
}

/// Draw `spec.samples` random channels (or channel pairs) and bin the
/// coherent information of series `(Y, I, I)`, parallel (Kraus-weighted
/// environment) and switch layouts. Sample `k` draws from its own stream.
pub fn run_histogram(spec: &HistogramSpec) -> CliResult<HistogramReport> {
    spec.validate()?;
    let exec = exec_for(spec.workers)?;
    let bell = PureState::bell_phi_plus().density();
    let ops = ControlledOps::from_gates(Gate::Y, Gate::I, Gate::I);
    let env = EnvironmentSpec::kraus_weighted();
    let raw = exec.try_map(spec.samples, |k| {
        let mut stream = rng::stream(spec.seed, k);
        let a = channels::random_channel(&mut stream);
        let b = match spec.pairing {
            Pairing::Same => a.clone(),
            Pairing::Different => channels::random_channel(&mut stream),
        };
        let ci = |out: qtraj::layouts::LayoutOutput| coherent_information(&out).map(|r| r.value);
        Ok(Sample {
            series: ci(layouts::series_controlled(&a, &b, &ops, &bell)?)?,
            parallel: ci(layouts::parallel_controlled(&a, &b, &env, &bell)?)?,
            switch: ci(layouts::switch(&a, &b, &bell)?)?,
        })
    })?;

    let (lo, hi) = spec.range;
    let n = raw.len() as f64;
    let layout = |name: &str, f: fn(&Sample) -> f64| -> CliResult<LayoutHistogram> {
        let zero = raw.iter().filter(|s| f(s) < ZERO_CI_TOL).count() as f64 / n;
        Ok(LayoutHistogram {
            name: name.into(),
            zero_mass: Some(zero),
            histogram: Histogram::from_values(lo, hi, spec.bins, raw.iter().map(f))?,
        })
    };
    let difference = |name: &str, f: fn(&Sample) -> f64| -> CliResult<LayoutHistogram> {
        Ok(LayoutHistogram {
            name: name.into(),
            zero_mass: None,
            histogram: Histogram::from_values(-hi, hi, spec.bins, raw.iter().map(f))?,
        })
    };
    let histograms = vec![
        layout("series", |s| s.series)?,
        layout("parallel", |s| s.parallel)?,
        layout("switch", |s| s.switch)?,
        difference("series-parallel", |s| s.series - s.parallel)?,
        difference("series-switch", |s| s.series - s.switch)?,
    ];
    Ok(HistogramReport {
        samples: spec.samples,
        pairing: spec.pairing,
        seed: spec.seed,
        histograms,
        raw,
    })
}
