//! Simulated process tomography of layout maps.
//!
//! A process on `n` qubits is written as `E(rho) = sum_mn chi_mn P_m rho P_n^dagger`
//! with `P_m` the unnormalised `n`-qubit Pauli products (`I, X, Y, Z` per qubit,
//! first qubit most significant). Probabilities are linear in `chi`, so the fit
//! is an ordinary complex least-squares problem solved once per schedule by a
//! pseudo-inverse.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::infometrics::{coherent_information_of_state, ic_lower_bound};
use crate::layouts::{project_out, LayoutConfig};
use crate::qmat::{
    self, cr, gates, tensor, tensor_all, ComplexMatrix, ComplexVector, DensityMatrix, PureState,
};
use crate::{rng, Error, Result};

/// Singular values below this fraction of the largest make the design rank deficient.
pub const RANK_TOL: f64 = 1e-10;
/// Conditional branches less likely than this are reported absent.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preparation {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "+")]
    Plus,
    R,
    L,
}

impl Preparation {
    pub const ALL: [Preparation; 4] = [
        Preparation::Zero,
        Preparation::Plus,
        Preparation::R,
        Preparation::L,
    ];

    pub fn state(self) -> PureState {
        match self {
            Preparation::Zero => PureState::zero(),
            Preparation::Plus => PureState::plus(),
            Preparation::R => PureState::right(),
            Preparation::L => PureState::left(),
        }
    }
}

/// Single-qubit measurement basis, named by its first outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "0")]
    Z,
    #[serde(rename = "+")]
    X,
    #[serde(rename = "R")]
    Y,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Z, Axis::X, Axis::Y];

    pub fn eigenstates(self) -> [PureState; 2] {
        match self {
            Axis::Z => [PureState::zero(), PureState::one()],
            Axis::X => [PureState::plus(), PureState::minus()],
            Axis::Y => [PureState::right(), PureState::left()],
        }
    }
}

/// Product input states and product measurement settings. Outcome `o` of a
/// setting has bit `n-1-q` selecting the eigenstate of qubit `q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TomographySchedule {
    n_qubits: usize,
    inputs: Vec<Vec<Preparation>>,
    settings: Vec<Vec<Axis>>,
}

fn product<T: Copy>(choices: &[T], n: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |&c| {
                    let mut next = prefix.clone();
                    next.push(c);
                    next
                })
            })
            .collect();
    }
    out
}

impl TomographySchedule {
    pub fn new(
        n_qubits: usize,
        inputs: Vec<Vec<Preparation>>,
        settings: Vec<Vec<Axis>>,
    ) -> Result<Self> {
        let schedule = Self {
            n_qubits,
            inputs,
            settings,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// All `{0,+,R,L}^n` inputs against all `{0,+,R}^n` settings.
    pub fn standard(n_qubits: usize) -> Result<Self> {
        Self::new(
            n_qubits,
            product(&Preparation::ALL, n_qubits),
            product(&Axis::ALL, n_qubits),
        )
    }

    /// 16 inputs, 9 settings, 4 outcomes each.
    pub fn two_qubit() -> Self {
        Self::standard(2).expect("standard schedule is valid")
    }

    pub fn single_qubit() -> Self {
        Self::standard(1).expect("standard schedule is valid")
    }

    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n_qubits) {
            return Err(Error::InvalidArgument(format!(
                "schedule on {} qubits",
                self.n_qubits
            )));
        }
        if self.inputs.is_empty() || self.settings.is_empty() {
            return Err(Error::InvalidArgument(
                "schedule needs inputs and settings".into(),
            ));
        }
        if self.inputs.iter().any(|s| s.len() != self.n_qubits)
            || self.settings.iter().any(|s| s.len() != self.n_qubits)
        {
            return Err(Error::Dimension(format!(
                "schedule entries must name {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn inputs(&self) -> &[Vec<Preparation>] {
        &self.inputs
    }

    pub fn settings(&self) -> &[Vec<Axis>] {
        &self.settings
    }

    pub fn outcomes_per_setting(&self) -> usize {
        self.dim()
    }

    pub fn n_entries(&self) -> usize {
        self.inputs.len() * self.settings.len() * self.outcomes_per_setting()
    }

    pub fn index(&self, input: usize, setting: usize, outcome: usize) -> usize {
        (input * self.settings.len() + setting) * self.outcomes_per_setting() + outcome
    }

    pub fn input_state(&self, input: usize) -> PureState {
        let mut states = self.inputs[input].iter().map(|p| p.state());
        let first = states.next().expect("validated non-empty");
        states.fold(first, |acc, s| acc.tensor(&s))
    }

    pub fn outcome_state(&self, setting: usize, outcome: usize) -> PureState {
        let n = self.n_qubits;
        let mut states = self.settings[setting]
            .iter()
            .enumerate()
            .map(|(q, axis)| axis.eigenstates()[(outcome >> (n - 1 - q)) & 1].clone());
        let first = states.next().expect("validated non-empty");
        states.fold(first, |acc, s| acc.tensor(&s))
    }

    /// Born probabilities of every outcome of `setting` on `rho`.
    pub fn probabilities(&self, setting: usize, rho: &ComplexMatrix) -> Vec<f64> {
        (0..self.outcomes_per_setting())
            .map(|o| {
                let v = self.outcome_state(setting, o);
                (v.amplitudes().adjoint() * rho * v.amplitudes())[(0, 0)]
                    .re
                    .max(0.0)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataMode {
    Exact,
    Counts,
}

/// One value per `(input, setting, outcome)`: a probability in exact mode or
/// a count in finite-shot mode.
#[derive(Clone, Debug, PartialEq)]
pub struct CountDataset {
    schedule: TomographySchedule,
    mode: DataMode,
    shots_per_setting: Option<u64>,
    seed: Option<u64>,
    values: Vec<f64>,
}

impl CountDataset {
    pub fn exact(schedule: TomographySchedule, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() != schedule.n_entries() {
            return Err(Error::Dimension(format!(
                "dataset has {} entries, schedule needs {}",
                probabilities.len(),
                schedule.n_entries()
            )));
        }
        if let Some(p) = probabilities
            .iter()
            .find(|p| !(0.0..=1.0 + 1e-9).contains(*p))
        {
            return Err(Error::Probability(*p));
        }
        Ok(Self {
            schedule,
            mode: DataMode::Exact,
            shots_per_setting: None,
            seed: None,
            values: probabilities,
        })
    }

    pub fn counts(
        schedule: TomographySchedule,
        counts: Vec<u64>,
        shots_per_setting: u64,
        seed: Option<u64>,
    ) -> Result<Self> {
        if counts.len() != schedule.n_entries() {
            return Err(Error::Dimension(format!(
                "dataset has {} entries, schedule needs {}",
                counts.len(),
                schedule.n_entries()
            )));
        }
        if shots_per_setting == 0 {
            return Err(Error::InvalidArgument(
                "shots per setting must be positive".into(),
            ));
        }
        let per = schedule.outcomes_per_setting();
        if let Some(bad) = counts
            .chunks(per)
            .position(|block| block.iter().sum::<u64>() != shots_per_setting)
        {
            return Err(Error::InvalidArgument(format!(
                "counts of block {bad} do not sum to {shots_per_setting} shots"
            )));
        }
        Ok(Self {
            schedule,
            mode: DataMode::Counts,
            shots_per_setting: Some(shots_per_setting),
            seed,
            values: counts.into_iter().map(|c| c as f64).collect(),
        })
    }

    pub fn schedule(&self) -> &TomographySchedule {
        &self.schedule
    }

    pub fn mode(&self) -> DataMode {
        self.mode
    }

    pub fn shots_per_setting(&self) -> Option<u64> {
        self.shots_per_setting
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn value(&self, input: usize, setting: usize, outcome: usize) -> f64 {
        self.values[self.schedule.index(input, setting, outcome)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Observed relative frequencies (the probabilities themselves in exact mode).
    pub fn frequencies(&self) -> Vec<f64> {
        match self.shots_per_setting {
            Some(n) => self.values.iter().map(|c| c / n as f64).collect(),
            None => self.values.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DatasetJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        CountDataset::try_from(serde_json::from_str::<DatasetJson>(text)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub input: usize,
    pub setting: usize,
    pub outcome: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetJson {
    pub schedule: TomographySchedule,
    pub mode: DataMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots_per_setting: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub entries: Vec<DatasetEntry>,
}

impl From<&CountDataset> for DatasetJson {
    fn from(d: &CountDataset) -> Self {
        let s = &d.schedule;
        let mut entries = Vec::with_capacity(s.n_entries());
        for input in 0..s.inputs.len() {
            for setting in 0..s.settings.len() {
                for outcome in 0..s.outcomes_per_setting() {
                    entries.push(DatasetEntry {
                        input,
                        setting,
                        outcome,
                        value: d.value(input, setting, outcome),
                    });
                }
            }
        }
        Self {
            schedule: s.clone(),
            mode: d.mode,
            shots_per_setting: d.shots_per_setting,
            seed: d.seed,
            entries,
        }
    }
}

impl TryFrom<DatasetJson> for CountDataset {
    type Error = Error;

    fn try_from(json: DatasetJson) -> Result<Self> {
        let schedule = json.schedule;
        schedule.validate()?;
        let mut values = vec![f64::NAN; schedule.n_entries()];
        let mut seen = BTreeSet::new();
        for e in &json.entries {
            if e.input >= schedule.inputs.len()
                || e.setting >= schedule.settings.len()
                || e.outcome >= schedule.outcomes_per_setting()
            {
                return Err(Error::InvalidArgument(format!(
                    "entry ({}, {}, {}) outside the schedule",
                    e.input, e.setting, e.outcome
                )));
            }
            if !seen.insert((e.input, e.setting, e.outcome)) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate entry ({}, {}, {})",
                    e.input, e.setting, e.outcome
                )));
            }
            values[schedule.index(e.input, e.setting, e.outcome)] = e.value;
        }
        if seen.len() != schedule.n_entries() {
            return Err(Error::InvalidArgument(format!(
                "dataset has {} of {} entries",
                seen.len(),
                schedule.n_entries()
            )));
        }
        match json.mode {
            DataMode::Exact => CountDataset::exact(schedule, values),
            DataMode::Counts => {
                let shots = json.shots_per_setting.ok_or_else(|| {
                    Error::InvalidArgument("counts dataset without shots_per_setting".into())
                })?;
                let counts = values
                    .iter()
                    .map(|&v| {
                        if v >= 0.0 && v.fract() == 0.0 {
                            Ok(v as u64)
                        } else {
                            Err(Error::InvalidArgument(format!(
                                "count {v} is not a non-negative integer"
                            )))
                        }
                    })
                    .collect::<Result<Vec<u64>>>()?;
                CountDataset::counts(schedule, counts, shots, json.seed)
            }
        }
    }
}

/// Multinomial draw of `n` shots by sequential binomials.
pub fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut counts = Vec::with_capacity(probs.len());
    let mut remaining = n;
    let mut mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (k, &p) in probs.iter().enumerate() {
        let p = p.max(0.0);
        if k + 1 == probs.len() {
            counts.push(remaining);
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = Binomial::new(remaining, q)
            .map(|b| b.sample(rng))
            .unwrap_or(0);
        counts.push(draw);
        remaining -= draw;
        mass -= p;
    }
    counts
}

/// Tabulate `map` over a schedule. With `shots`, block `(input, setting)` is
/// sampled from stream `input * n_settings + setting` of `seed`.
pub fn simulate_map<F>(
    map: F,
    schedule: &TomographySchedule,
    shots: Option<u64>,
    seed: u64,
    exec: Exec,
) -> Result<CountDataset>
where
    F: Fn(&ComplexMatrix) -> Result<ComplexMatrix> + Sync + Send,
{
    let n_inputs = schedule.inputs.len();
    let n_settings = schedule.settings.len();
    let outputs = exec.try_map(n_inputs as u64, |i| {
        let out = map(&schedule.input_state(i as usize).projector_matrix())?;
        if out.shape() != (schedule.dim(), schedule.dim()) {
            return Err(Error::Dimension(format!(
                "process output of shape {:?}",
                out.shape()
            )));
        }
        Ok(out)
    })?;
    let blocks = exec.map((n_inputs * n_settings) as u64, |k| {
        let (i, s) = (k as usize / n_settings, k as usize % n_settings);
        let probs = schedule.probabilities(s, &outputs[i]);
        match shots {
            Some(n) => multinomial(n, &probs, &mut rng::stream(seed, k))
                .into_iter()
                .map(|c| c as f64)
                .collect(),
            None => probs,
        }
    });
    let values: Vec<f64> = blocks.into_iter().flatten().collect();
    match shots {
        Some(n) => CountDataset::counts(
            schedule.clone(),
            values.into_iter().map(|v| v as u64).collect(),
            n,
            Some(seed),
        ),
        None => CountDataset::exact(schedule.clone(), values),
    }
}

/// Dataset for the `T (x) I` map of a layout, environments evaluated at the Bell probe.
pub fn simulate_dataset(
    config: &LayoutConfig,
    schedule: &TomographySchedule,
    shots: Option<u64>,
    seed: u64,
    exec: Exec,
) -> Result<CountDataset> {
    if schedule.n_qubits() != 2 {
        return Err(Error::Dimension(
            "layout tomography needs a two-qubit schedule".into(),
        ));
    }
    let process = config.process(&PureState::bell_phi_plus().density())?;
    simulate_map(|rho| process.apply(rho), schedule, shots, seed, exec)
}

/// Unnormalised `n`-qubit Pauli products in index order.
pub fn pauli_basis(n_qubits: usize) -> Vec<ComplexMatrix> {
    let singles = gates::paulis();
    product(&[0usize, 1, 2, 3], n_qubits)
        .into_iter()
        .map(|idx| {
            let factors: Vec<&ComplexMatrix> = idx.iter().map(|&k| &singles[k]).collect();
            tensor_all(&factors)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    n_qubits: usize,
    matrix: ComplexMatrix,
}

impl ProcessMatrix {
    pub fn new(n_qubits: usize, matrix: ComplexMatrix) -> Result<Self> {
        let d2 = 1usize << (2 * n_qubits);
        if matrix.shape() != (d2, d2) {
            return Err(Error::Dimension(format!(
                "process matrix on {n_qubits} qubits must be {d2}x{d2}, got {:?}",
                matrix.shape()
            )));
        }
        Ok(Self { n_qubits, matrix })
    }

    pub fn from_kraus(n_qubits: usize, kraus: &[ComplexMatrix]) -> Result<Self> {
        let basis = pauli_basis(n_qubits);
        let d = (1usize << n_qubits) as f64;
        let mut chi = ComplexMatrix::zeros(basis.len(), basis.len());
        for k in kraus {
            if k.shape() != basis[0].shape() {
                return Err(Error::Dimension(format!(
                    "Kraus operator of shape {:?}",
                    k.shape()
                )));
            }
            let coeffs = ComplexVector::from_iterator(
                basis.len(),
                basis.iter().map(|p| (p.adjoint() * k).trace() / d),
            );
            chi += &coeffs * coeffs.adjoint();
        }
        Self::new(n_qubits, chi)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Side of the matrix, `4^n`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn scaled(&self, factor: f64) -> ProcessMatrix {
        Self {
            n_qubits: self.n_qubits,
            matrix: &self.matrix * cr(factor),
        }
    }

    pub fn hermitian_deviation(&self) -> f64 {
        qmat::hermitian_deviation(&self.matrix)
    }

    /// Apply to a state on the process qubits followed by untouched spectators.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = 1usize << self.n_qubits;
        if !rho.is_square() || !rho.nrows().is_multiple_of(d) {
            return Err(Error::Dimension(format!(
                "state of shape {:?} has no {d}-dim factor",
                rho.shape()
            )));
        }
        let spectator = ComplexMatrix::identity(rho.nrows() / d, rho.nrows() / d);
        let lifted: Vec<ComplexMatrix> = pauli_basis(self.n_qubits)
            .iter()
            .map(|p| tensor(p, &spectator))
            .collect();
        let left: Vec<ComplexMatrix> = lifted.iter().map(|p| p * rho).collect();
        let mut out = ComplexMatrix::zeros(rho.nrows(), rho.ncols());
        for (n, pn) in lifted.iter().enumerate() {
            let mut acc = ComplexMatrix::zeros(rho.nrows(), rho.ncols());
            for (m, x) in left.iter().enumerate() {
                let w = self.matrix[(m, n)];
                if w != cr(0.0) {
                    acc += x * w;
                }
            }
            out += acc * pn.adjoint();
        }
        Ok(out)
    }

    /// `max |sum_mn chi_mn P_n^dagger P_m - I|`.
    pub fn tp_residual(&self) -> f64 {
        let basis = pauli_basis(self.n_qubits);
        let d = basis[0].nrows();
        let mut sum = ComplexMatrix::zeros(d, d);
        for (m, pm) in basis.iter().enumerate() {
            for (n, pn) in basis.iter().enumerate() {
                sum += pn.adjoint() * pm * self.matrix[(m, n)];
            }
        }
        qmat::max_abs_diff(&sum, &ComplexMatrix::identity(d, d))
    }

    /// Clip negative eigenvalues and rescale to `target_trace`.
    pub fn project_positive(&self, target_trace: f64) -> ProcessMatrix {
        let (values, vectors) = qmat::eigh(&self.matrix);
        let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let scale = if total > 0.0 {
            target_trace / total
        } else {
            0.0
        };
        let diag = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
            clipped.len(),
            clipped.iter().map(|v| cr(v * scale)),
        ));
        let matrix = &vectors * diag * vectors.adjoint();
        Self {
            n_qubits: self.n_qubits,
            matrix: (&matrix + matrix.adjoint()) * cr(0.5),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReconstructOptions {
    /// Clip negative eigenvalues of `chi` after the fit.
    pub project_cptp: bool,
}

/// Least-squares inverse of a schedule's design matrix, reusable across datasets.
#[derive(Clone, Debug)]
pub struct Reconstructor {
    schedule: TomographySchedule,
    pinv: ComplexMatrix,
}

impl Reconstructor {
    pub fn new(schedule: &TomographySchedule) -> Result<Self> {
        schedule.validate()?;
        let basis = pauli_basis(schedule.n_qubits());
        let unknowns = basis.len() * basis.len();
        let mut design = ComplexMatrix::zeros(schedule.n_entries(), unknowns);
        for i in 0..schedule.inputs.len() {
            let phi = schedule.input_state(i);
            let images: Vec<ComplexVector> = basis.iter().map(|p| p * phi.amplitudes()).collect();
            for s in 0..schedule.settings.len() {
                for o in 0..schedule.outcomes_per_setting() {
                    let v = schedule.outcome_state(s, o);
                    let a: Vec<_> = images.iter().map(|img| v.amplitudes().dotc(img)).collect();
                    let row = schedule.index(i, s, o);
                    for (m, am) in a.iter().enumerate() {
                        for (n, an) in a.iter().enumerate() {
                            design[(row, m * basis.len() + n)] = am * an.conj();
                        }
                    }
                }
            }
        }
        if design.nrows() < unknowns {
            return Err(Error::RankDeficient(format!(
                "{} equations for {unknowns} unknowns",
                design.nrows()
            )));
        }
        let svd = design.svd(true, true);
        let sigma = &svd.singular_values;
        let largest = sigma.max();
        let rank = sigma.iter().filter(|&&s| s > RANK_TOL * largest).count();
        if rank < unknowns {
            return Err(Error::RankDeficient(format!(
                "design matrix has rank {rank} of {unknowns}; smallest singular value {:.3e} against largest {largest:.3e}",
                sigma.min()
            )));
        }
        let u = svd.u.expect("requested");
        let v_t = svd.v_t.expect("requested");
        let inv_sigma = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
            sigma.len(),
            sigma.iter().map(|s| cr(1.0 / s)),
        ));
        let pinv = v_t.adjoint() * inv_sigma * u.adjoint();
        Ok(Self {
            schedule: schedule.clone(),
            pinv,
        })
    }

    pub fn schedule(&self) -> &TomographySchedule {
        &self.schedule
    }

    /// Fit `chi` to frequencies laid out in schedule order, then symmetrise.
    pub fn fit(&self, frequencies: &[f64]) -> Result<ProcessMatrix> {
        if frequencies.len() != self.schedule.n_entries() {
            return Err(Error::Dimension(format!(
                "{} frequencies for a schedule of {} entries",
                frequencies.len(),
                self.schedule.n_entries()
            )));
        }
        let f = ComplexVector::from_iterator(frequencies.len(), frequencies.iter().map(|&x| cr(x)));
        let x = &self.pinv * f;
        let side = 1usize << (2 * self.schedule.n_qubits());
        let chi = ComplexMatrix::from_fn(side, side, |m, n| x[m * side + n]);
        ProcessMatrix::new(self.schedule.n_qubits(), (&chi + chi.adjoint()) * cr(0.5))
    }

    pub fn reconstruct(
        &self,
        data: &CountDataset,
        options: ReconstructOptions,
    ) -> Result<ProcessMatrix> {
        if data.schedule() != &self.schedule {
            return Err(Error::InvalidArgument(
                "dataset was taken with a different schedule".into(),
            ));
        }
        let chi = self.fit(&data.frequencies())?;
        Ok(if options.project_cptp {
            chi.project_positive(1.0)
        } else {
            chi
        })
    }
}

pub fn reconstruct_process(
    data: &CountDataset,
    options: ReconstructOptions,
) -> Result<ProcessMatrix> {
    Reconstructor::new(data.schedule())?.reconstruct(data, options)
}

/// Coherent information of a reconstructed `T (x) I` process driven with
/// trajectory `trajectory` and the Bell probe on `(I, H)`.
pub fn process_coherent_information(chi: &ProcessMatrix, trajectory: &PureState) -> Result<f64> {
    if chi.n_qubits() != 2 || trajectory.dim() != 2 {
        return Err(Error::Dimension(
            "expected a two-qubit process and a qubit trajectory".into(),
        ));
    }
    let input = tensor(
        &trajectory.projector_matrix(),
        &PureState::bell_phi_plus().projector_matrix(),
    );
    let out = DensityMatrix::normalize(chi.apply(&input)?)?;
    coherent_information_of_state(&out, &[2, 2, 2], 2)
}

/// Smallest state fidelity between `chi` and `map` over the schedule inputs,
/// with the fitted outputs renormalised.
pub fn min_action_fidelity<F>(
    chi: &ProcessMatrix,
    map: F,
    schedule: &TomographySchedule,
) -> Result<f64>
where
    F: Fn(&ComplexMatrix) -> Result<ComplexMatrix>,
{
    let mut worst: f64 = 1.0;
    for i in 0..schedule.inputs.len() {
        let rho = schedule.input_state(i).projector_matrix();
        let out = chi.apply(&rho)?;
        let trace = out.trace();
        let fitted = DensityMatrix::with_positivity_tol(
            (&out + out.adjoint()) / (trace + trace.conj()),
            1e-6,
        )?;
        let truth = DensityMatrix::with_positivity_tol(map(&rho)?, 1e-8)?;
        worst = worst.min(qmat::state_fidelity(&fitted, &truth)?);
    }
    Ok(worst)
}

/// Conditional process on `I` for one trajectory outcome.
#[derive(Clone, Debug)]
pub struct ConditionalBranch {
    /// Post-selection probability, `Tr E(I/2) = Tr chi`.
    pub probability: f64,
    /// Trace-decreasing process `E(rho) = <d|_T L(|t><t| (x) rho) |d>_T`.
    pub chi: ProcessMatrix,
    /// Coherent information of `E / probability` against the Bell probe.
    pub coherent_information: f64,
}

impl ConditionalBranch {
    pub fn normalized_chi(&self) -> ProcessMatrix {
        self.chi.scaled(1.0 / self.probability)
    }
}

#[derive(Clone, Debug)]
pub struct ConditionalPair {
    pub plus: Option<ConditionalBranch>,
    pub minus: Option<ConditionalBranch>,
}

impl ConditionalPair {
    pub fn lower_bound(&self) -> Result<f64> {
        let parts = |b: &Option<ConditionalBranch>| {
            b.as_ref()
                .map_or((0.0, 0.0), |b| (b.probability, b.coherent_information))
        };
        let (pp, ip) = parts(&self.plus);
        let (pm, im) = parts(&self.minus);
        ic_lower_bound(pp, ip, pm, im)
    }
}

/// Single-qubit tomography of the information qubit conditioned on measuring
/// the trajectory in the `+/-` basis, with the layout's native trajectory input.
///
/// Each `(input, setting)` block records the four joint outcomes `(T, I)`, so a
/// finite-shot run splits one multinomial draw between the two branches.
pub fn conditional_process_pair(
    config: &LayoutConfig,
    shots: Option<u64>,
    seed: u64,
    exec: Exec,
    options: ReconstructOptions,
) -> Result<ConditionalPair> {
    let process = config.process(&PureState::bell_phi_plus().density())?;
    let trajectory = config.layout.native_trajectory();
    let schedule = TomographySchedule::single_qubit();
    let n_inputs = schedule.inputs.len();
    let n_settings = schedule.settings.len();
    let outputs = exec.try_map(n_inputs as u64, |i| {
        let rho = schedule.input_state(i as usize).projector_matrix();
        process.apply(&tensor(&trajectory.projector_matrix(), &rho))
    })?;
    let directions = [PureState::plus(), PureState::minus()];
    // joint[d][entry]
    let blocks = exec.try_map((n_inputs * n_settings) as u64, |k| {
        let (i, s) = (k as usize / n_settings, k as usize % n_settings);
        let mut probs = Vec::with_capacity(4);
        for d in &directions {
            let (_, conditional) = project_out(&outputs[i], &[2, 2], 0, d)?;
            probs.extend(schedule.probabilities(s, &conditional));
        }
        Ok(match shots {
            Some(n) => multinomial(n, &probs, &mut rng::stream(seed, k))
                .into_iter()
                .map(|c| c as f64 / n as f64)
                .collect(),
            None => probs,
        })
    })?;
    let recon = Reconstructor::new(&schedule)?;
    let bell = PureState::bell_phi_plus().projector_matrix();
    let branch = |d: usize| -> Result<Option<ConditionalBranch>> {
        let freqs: Vec<f64> = blocks
            .iter()
            .flat_map(|b| b[2 * d..2 * d + 2].iter().copied())
            .collect();
        let mut chi = recon.fit(&freqs)?;
        let probability = chi.trace();
        if probability < MIN_BRANCH_PROBABILITY {
            return Ok(None);
        }
        if options.project_cptp {
            chi = chi.project_positive(probability);
        }
        let state = DensityMatrix::normalize(chi.apply(&bell)?)?;
        let coherent_information = coherent_information_of_state(&state, &[2, 2], 1)?;
        Ok(Some(ConditionalBranch {
            probability,
            chi,
            coherent_information,
        }))
    };
    Ok(ConditionalPair {
        plus: branch(0)?,
        minus: branch(1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels;
    use crate::layouts::LayoutKind;
    use approx::assert_abs_diff_eq;

    #[test]
    fn schedule_shape() {
        let s = TomographySchedule::two_qubit();
        assert_eq!(s.inputs().len(), 16);
        assert_eq!(s.settings().len(), 9);
        assert_eq!(s.n_entries(), 576);
        let rho = s.input_state(5).projector_matrix();
        for k in 0..9 {
            assert_abs_diff_eq!(
                s.probabilities(k, &rho).iter().sum::<f64>(),
                1.0,
                epsilon = 1e-12
            );
        }
        assert!(TomographySchedule::new(
            2,
            vec![vec![Preparation::Zero]],
            vec![vec![Axis::Z, Axis::Z]]
        )
        .is_err());
    }

    #[test]
    fn identity_dataset_matches_overlaps() {
        let s = TomographySchedule::two_qubit();
        let d = simulate_map(|r| Ok(r.clone()), &s, None, 0, Exec::Sequential).unwrap();
        for i in 0..16 {
            let psi = s.input_state(i);
            for k in 0..9 {
                for o in 0..4 {
                    let overlap = s.outcome_state(k, o).overlap(&psi).norm_sqr();
                    assert_abs_diff_eq!(d.value(i, k, o), overlap, epsilon = 1e-12);
                }
            }
        }
        let chi = reconstruct_process(&d, ReconstructOptions::default()).unwrap();
        assert!(
            qmat::max_abs_diff(
                chi.matrix(),
                ProcessMatrix::from_kraus(2, &[ComplexMatrix::identity(4, 4)])
                    .unwrap()
                    .matrix()
            ) < 1e-9
        );
        for p in pauli_basis(2) {
            let probe = (ComplexMatrix::identity(4, 4) + &p * cr(0.5)) * cr(0.25);
            assert!(qmat::max_abs_diff(&chi.apply(&probe).unwrap(), &probe) < 1e-6);
        }
        assert!(chi.tp_residual() < 1e-9);
    }

    #[test]
    fn from_kraus_apply_matches_kraus() {
        let ch = channels::bb84(0.3).unwrap();
        let chi = ProcessMatrix::from_kraus(1, ch.kraus()).unwrap();
        let rho = PureState::right().projector_matrix();
        assert!(qmat::max_abs_diff(&chi.apply(&rho).unwrap(), &ch.apply_matrix(&rho)) < 1e-14);
        assert_abs_diff_eq!(chi.trace(), 1.0, epsilon = 1e-14);
        assert!(chi.tp_residual() < 1e-14);
    }

    #[test]
    fn rank_deficient_schedule_rejected() {
        let inputs = vec![vec![Preparation::Zero], vec![Preparation::Plus]];
        let s =
            TomographySchedule::new(1, inputs, vec![vec![Axis::Z], vec![Axis::X], vec![Axis::Y]])
                .unwrap();
        assert!(matches!(
            Reconstructor::new(&s),
            Err(Error::RankDeficient(_))
        ));
        let s = TomographySchedule::new(
            1,
            vec![
                vec![Preparation::Zero],
                vec![Preparation::Plus],
                vec![Preparation::R],
                vec![Preparation::L],
            ],
            vec![vec![Axis::Z]],
        )
        .unwrap();
        assert!(matches!(
            Reconstructor::new(&s),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn seeded_counts_reproducible_and_json_roundtrip() {
        let cfg = LayoutConfig::new(LayoutKind::Switch, "bb84", None, 0.3);
        let s = TomographySchedule::two_qubit();
        let a = simulate_dataset(&cfg, &s, Some(1000), 9, Exec::Sequential).unwrap();
        let b = simulate_dataset(&cfg, &s, Some(1000), 9, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        for block in a.values().chunks(4) {
            assert_eq!(block.iter().sum::<f64>(), 1000.0);
        }
        let back = CountDataset::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, back);
        let exact = simulate_dataset(&cfg, &s, None, 0, Exec::Sequential).unwrap();
        assert_eq!(
            CountDataset::from_json(&exact.to_json().unwrap()).unwrap(),
            exact
        );
        let mut json: DatasetJson = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        json.entries.pop();
        assert!(CountDataset::try_from(json).is_err());
    }

    #[test]
    fn switch_xy_reconstruction_keeps_full_activation() {
        let cfg = LayoutConfig::new(LayoutKind::Switch, "xy", None, 0.5);
        let s = TomographySchedule::two_qubit();
        let d = simulate_dataset(&cfg, &s, None, 0, Exec::Sequential).unwrap();
        let chi = reconstruct_process(&d, ReconstructOptions::default()).unwrap();
        assert!(chi.hermitian_deviation() < 1e-8);
        assert!(chi.tp_residual() < 1e-6);
        let ci = process_coherent_information(&chi, &PureState::plus()).unwrap();
        assert_abs_diff_eq!(ci, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn conditional_pair_switch_eb() {
        let cfg = LayoutConfig::new(LayoutKind::Switch, "eb", None, 0.0);
        let pair = conditional_process_pair(
            &cfg,
            None,
            0,
            Exec::Sequential,
            ReconstructOptions::default(),
        )
        .unwrap();
        let plus = pair.plus.as_ref().unwrap();
        let minus = pair.minus.as_ref().unwrap();
        assert_abs_diff_eq!(plus.probability, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(minus.probability, 0.5, epsilon = 1e-9);
        let id = ProcessMatrix::from_kraus(1, &[gates::identity()]).unwrap();
        let z = ProcessMatrix::from_kraus(1, &[gates::pauli_z()]).unwrap();
        assert!(qmat::max_abs_diff(plus.normalized_chi().matrix(), id.matrix()) < 1e-9);
        assert!(qmat::max_abs_diff(minus.normalized_chi().matrix(), z.matrix()) < 1e-9);
        assert_abs_diff_eq!(pair.lower_bound().unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn conditional_pair_single_use() {
        let cfg = LayoutConfig::new(LayoutKind::Single, "bb84", None, 0.2);
        let pair = conditional_process_pair(
            &cfg,
            None,
            0,
            Exec::Sequential,
            ReconstructOptions::default(),
        )
        .unwrap();
        let target = ProcessMatrix::from_kraus(1, channels::bb84(0.2).unwrap().kraus()).unwrap();
        for b in [pair.plus.unwrap(), pair.minus.unwrap()] {
            assert_abs_diff_eq!(b.probability, 0.5, epsilon = 1e-9);
            assert!(qmat::max_abs_diff(b.normalized_chi().matrix(), target.matrix()) < 1e-9);
        }
    }

    #[test]
    fn conditional_pair_parallel_eb_minus_branch_unitary() {
        let cfg = LayoutConfig::new(LayoutKind::Parallel, "eb", None, 0.0);
        let pair = conditional_process_pair(
            &cfg,
            None,
            0,
            Exec::Sequential,
            ReconstructOptions::default(),
        )
        .unwrap();
        let minus = pair.minus.unwrap();
        assert_abs_diff_eq!(minus.probability, 0.25, epsilon = 1e-9);
        // a unitary process has a rank-one chi
        let eig = qmat::eigvalsh(minus.normalized_chi().matrix());
        assert_abs_diff_eq!(eig[3], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(minus.coherent_information, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn identity_switch_has_no_minus_branch() {
        let cfg = LayoutConfig::new(LayoutKind::Switch, "identity", None, 0.0);
        let pair = conditional_process_pair(
            &cfg,
            None,
            0,
            Exec::Sequential,
            ReconstructOptions::default(),
        )
        .unwrap();
        assert!(pair.minus.is_none());
        let plus = pair.plus.as_ref().unwrap();
        assert_abs_diff_eq!(plus.probability, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(pair.lower_bound().unwrap(), 1.0, epsilon = 1e-9);
    }
}
