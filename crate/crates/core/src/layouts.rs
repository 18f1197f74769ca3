//! Joint `T (x) I (x) H` output states of the trajectory-superposition layouts.
//!
//! Every layout is first built as a [`TrajectoryProcess`], a linear map on the
//! trajectory and information qubits, and then applied to a trajectory input
//! tensored with a two-qubit probe on `(I, H)`. The same process is reused by
//! the tomography module with other trajectory preparations.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::{self, ChannelJson, KrausChannel};
use crate::qmat::{self, cr, gates, tensor, tensor_all, ComplexMatrix, DensityMatrix, PureState};
use crate::{rng, Error, Result};

/// Positivity slack for layout outputs before reporting a consistency fault.
pub const OUTPUT_POSITIVITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvMethod {
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "haar", alias = "haar_random", alias = "haar-random")]
    HaarRandom,
    #[serde(rename = "kraus-weighted", alias = "kraus_weighted")]
    KrausWeighted,
}

impl FromStr for EnvMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(EnvMethod::Uniform),
            "haar" | "haar_random" | "haar-random" => Ok(EnvMethod::HaarRandom),
            "kraus-weighted" | "kraus_weighted" => Ok(EnvMethod::KrausWeighted),
            other => Err(Error::Environment(format!(
                "unknown environment method `{other}`"
            ))),
        }
    }
}

/// Initial environment state of each channel's purification, plus the
/// vacuum-extension phase. Only the parallel layout depends on it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvironmentSpec {
    method: EnvMethod,
    vacuum_phase: f64,
    rng_seed: Option<u64>,
}

impl EnvironmentSpec {
    pub fn new(method: EnvMethod, vacuum_phase: f64, rng_seed: Option<u64>) -> Result<Self> {
        if !(0.0..TAU).contains(&vacuum_phase) {
            return Err(Error::Environment(format!(
                "vacuum phase {vacuum_phase} outside [0, 2pi)"
            )));
        }
        if method == EnvMethod::HaarRandom && rng_seed.is_none() {
            return Err(Error::Environment("haar environment needs a seed".into()));
        }
        Ok(Self {
            method,
            vacuum_phase,
            rng_seed,
        })
    }

    pub fn uniform() -> Self {
        Self {
            method: EnvMethod::Uniform,
            vacuum_phase: 0.0,
            rng_seed: None,
        }
    }

    pub fn haar(seed: u64) -> Self {
        Self {
            method: EnvMethod::HaarRandom,
            vacuum_phase: 0.0,
            rng_seed: Some(seed),
        }
    }

    pub fn kraus_weighted() -> Self {
        Self {
            method: EnvMethod::KrausWeighted,
            vacuum_phase: 0.0,
            rng_seed: None,
        }
    }

    pub fn method(&self) -> EnvMethod {
        self.method
    }

    pub fn vacuum_phase(&self) -> f64 {
        self.vacuum_phase
    }

    pub fn rng_seed(&self) -> Option<u64> {
        self.rng_seed
    }
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self::kraus_weighted()
    }
}

fn check_probe(probe: &DensityMatrix) -> Result<()> {
    if probe.dim() != 4 {
        return Err(Error::Dimension(format!(
            "probe on (I, H) must be 4-dim, got {}",
            probe.dim()
        )));
    }
    Ok(())
}

/// Coefficients `<E|i>` of the environment state against the Kraus index basis.
///
/// `branch` selects an independent Haar draw for each channel of a pair.
pub fn environment_overlaps(
    ch: &KrausChannel,
    env: &EnvironmentSpec,
    probe: &DensityMatrix,
    branch: u64,
) -> Result<Vec<Complex64>> {
    check_probe(probe)?;
    let n = ch.len();
    if n > 4 {
        return Err(Error::Environment(format!(
            "environment models at most 4 Kraus operators, channel has {n}"
        )));
    }
    let overlaps = match env.method {
        EnvMethod::Uniform => vec![cr(0.5); n],
        EnvMethod::HaarRandom => {
            let seed = env
                .rng_seed
                .ok_or_else(|| Error::Environment("haar environment needs a seed".into()))?;
            let state = PureState::haar_random(4, &mut rng::stream(seed, branch));
            state
                .amplitudes()
                .iter()
                .take(n)
                .map(|a| a.conj())
                .collect()
        }
        EnvMethod::KrausWeighted => ch
            .kraus()
            .iter()
            .map(|k| {
                let kk = tensor(k, &gates::identity());
                let w = (&kk * probe.matrix() * kk.adjoint()).trace().re;
                cr(w.max(0.0).sqrt())
            })
            .collect(),
    };
    Ok(overlaps)
}

/// `Gamma = e^{i phi} sum_i <E|i> K_i`.
pub fn transformation_matrix(
    ch: &KrausChannel,
    env: &EnvironmentSpec,
    probe: &DensityMatrix,
) -> Result<ComplexMatrix> {
    transformation_matrix_for_branch(ch, env, probe, 0)
}

pub fn transformation_matrix_for_branch(
    ch: &KrausChannel,
    env: &EnvironmentSpec,
    probe: &DensityMatrix,
    branch: u64,
) -> Result<ComplexMatrix> {
    let overlaps = environment_overlaps(ch, env, probe, branch)?;
    let mut gamma = ComplexMatrix::zeros(2, 2);
    for (k, a) in ch.kraus().iter().zip(overlaps) {
        gamma += k * a;
    }
    Ok(gamma * Complex64::from_polar(1.0, env.vacuum_phase))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    I,
    X,
    Y,
    Z,
    H,
}

impl Gate {
    pub fn matrix(self) -> ComplexMatrix {
        match self {
            Gate::I => gates::identity(),
            Gate::X => gates::pauli_x(),
            Gate::Y => gates::pauli_y(),
            Gate::Z => gates::pauli_z(),
            Gate::H => gates::hadamard(),
        }
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "i" | "id" => Ok(Gate::I),
            "X" | "x" => Ok(Gate::X),
            "Y" | "y" => Ok(Gate::Y),
            "Z" | "z" => Ok(Gate::Z),
            "H" | "h" => Ok(Gate::H),
            other => Err(Error::UnknownGate(other.to_string())),
        }
    }
}

/// `U1` on branch 1 before the first channel; `U2` (branch 0) and `U3`
/// (branch 1) between the channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlledOps {
    u1: ComplexMatrix,
    u2: ComplexMatrix,
    u3: ComplexMatrix,
}

impl ControlledOps {
    pub fn new(u1: ComplexMatrix, u2: ComplexMatrix, u3: ComplexMatrix) -> Result<Self> {
        for u in [&u1, &u2, &u3] {
            if u.shape() != (2, 2) {
                return Err(Error::Dimension(format!(
                    "controlled op of shape {:?}",
                    u.shape()
                )));
            }
            let deviation = qmat::unitary_deviation(u);
            if deviation > 1e-12 {
                return Err(Error::NotUnitary { deviation });
            }
        }
        Ok(Self { u1, u2, u3 })
    }

    pub fn from_gates(u1: Gate, u2: Gate, u3: Gate) -> Self {
        Self {
            u1: u1.matrix(),
            u2: u2.matrix(),
            u3: u3.matrix(),
        }
    }

    pub fn identity() -> Self {
        Self::from_gates(Gate::I, Gate::I, Gate::I)
    }

    pub fn u1(&self) -> &ComplexMatrix {
        &self.u1
    }

    pub fn u2(&self) -> &ComplexMatrix {
        &self.u2
    }

    pub fn u3(&self) -> &ComplexMatrix {
        &self.u3
    }
}

impl Default for ControlledOps {
    /// `(Y, I, I)`.
    fn default() -> Self {
        Self::from_gates(Gate::Y, Gate::I, Gate::I)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutKind {
    Parallel,
    Series,
    Switch,
    Single,
    Classical,
}

impl LayoutKind {
    pub const ALL: [LayoutKind; 5] = [
        LayoutKind::Parallel,
        LayoutKind::Series,
        LayoutKind::Switch,
        LayoutKind::Single,
        LayoutKind::Classical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LayoutKind::Parallel => "parallel",
            LayoutKind::Series => "series",
            LayoutKind::Switch => "switch",
            LayoutKind::Single => "single",
            LayoutKind::Classical => "classical",
        }
    }

    /// Trajectory state the layout is normally operated with.
    pub fn native_trajectory(self) -> PureState {
        match self {
            LayoutKind::Single | LayoutKind::Classical => PureState::zero(),
            _ => PureState::plus(),
        }
    }
}

impl fmt::Display for LayoutKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayoutKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LayoutKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown layout `{s}`")))
    }
}

/// Linear map on `T (x) I`, extended by identity on any trailing spectators.
#[derive(Clone, Debug)]
pub enum TrajectoryProcess {
    /// Kraus operators on `T (x) I`.
    Kraus(Vec<ComplexMatrix>),
    /// One channel per path, coherence carried by the transformation matrices.
    Parallel {
        a: Vec<ComplexMatrix>,
        b: Vec<ComplexMatrix>,
        gamma_a: ComplexMatrix,
        gamma_b: ComplexMatrix,
    },
}

impl TrajectoryProcess {
    /// Apply to a state on `T (x) I (x) R`, `R` untouched.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if !rho.is_square() || !rho.nrows().is_multiple_of(4) {
            return Err(Error::Dimension(format!(
                "state of shape {:?} has no T (x) I factor",
                rho.shape()
            )));
        }
        let spectator = ComplexMatrix::identity(rho.nrows() / 4, rho.nrows() / 4);
        let lift = |op: &ComplexMatrix| tensor(op, &spectator);
        match self {
            TrajectoryProcess::Kraus(ops) => {
                let lifted: Vec<ComplexMatrix> = ops.iter().map(lift).collect();
                Ok(qmat::conjugate_sum(&lifted, rho))
            }
            TrajectoryProcess::Parallel {
                a,
                b,
                gamma_a,
                gamma_b,
            } => {
                let p0 = gates::ket_bra(0, 0);
                let p1 = gates::ket_bra(1, 1);
                let mut ops: Vec<ComplexMatrix> = a.iter().map(|k| lift(&tensor(&p0, k))).collect();
                ops.extend(b.iter().map(|k| lift(&tensor(&p1, k))));
                let mut out = qmat::conjugate_sum(&ops, rho);
                let ga = lift(&tensor(&p0, gamma_a));
                let gb = lift(&tensor(&p1, gamma_b));
                out += &ga * rho * gb.adjoint();
                out += &gb * rho * ga.adjoint();
                Ok(out)
            }
        }
    }
}

pub fn parallel_process(
    a: &KrausChannel,
    b: &KrausChannel,
    env: &EnvironmentSpec,
    probe: &DensityMatrix,
) -> Result<TrajectoryProcess> {
    Ok(TrajectoryProcess::Parallel {
        a: a.kraus().to_vec(),
        b: b.kraus().to_vec(),
        gamma_a: transformation_matrix_for_branch(a, env, probe, 0)?,
        gamma_b: transformation_matrix_for_branch(b, env, probe, 1)?,
    })
}

/// `M_ij = |0><0| (x) B_j U2 A_i + |1><1| (x) B_j U3 A_i U1`.
pub fn series_process(
    a: &KrausChannel,
    b: &KrausChannel,
    ops: &ControlledOps,
) -> TrajectoryProcess {
    let p0 = gates::ket_bra(0, 0);
    let p1 = gates::ket_bra(1, 1);
    let mut kraus = Vec::with_capacity(a.len() * b.len());
    for ai in a.kraus() {
        for bj in b.kraus() {
            let branch0 = bj * &ops.u2 * ai;
            let branch1 = bj * &ops.u3 * ai * &ops.u1;
            kraus.push(tensor(&p0, &branch0) + tensor(&p1, &branch1));
        }
    }
    TrajectoryProcess::Kraus(kraus)
}

/// `W_ij = |0><0| (x) B_j A_i + |1><1| (x) A_i B_j`.
pub fn switch_process(a: &KrausChannel, b: &KrausChannel) -> TrajectoryProcess {
    let p0 = gates::ket_bra(0, 0);
    let p1 = gates::ket_bra(1, 1);
    let mut kraus = Vec::with_capacity(a.len() * b.len());
    for ai in a.kraus() {
        for bj in b.kraus() {
            kraus.push(tensor(&p0, &(bj * ai)) + tensor(&p1, &(ai * bj)));
        }
    }
    TrajectoryProcess::Kraus(kraus)
}

/// Trajectory passes untouched; the channel acts on `I`.
pub fn single_process(ch: &KrausChannel) -> TrajectoryProcess {
    TrajectoryProcess::Kraus(
        ch.kraus()
            .iter()
            .map(|k| tensor(&gates::identity(), k))
            .collect(),
    )
}

#[derive(Clone, Debug)]
pub struct LayoutParams {
    pub channel_a: String,
    pub channel_b: Option<String>,
    pub ops: Option<ControlledOps>,
    pub env: Option<EnvironmentSpec>,
    pub q: Option<f64>,
    pub probe: DensityMatrix,
}

impl LayoutParams {
    fn new(channel_a: &KrausChannel, probe: &DensityMatrix) -> Self {
        Self {
            channel_a: channel_a.label().to_string(),
            channel_b: None,
            ops: None,
            env: None,
            q: None,
            probe: probe.clone(),
        }
    }
}

/// Joint state over `T (x) I (x) H`.
#[derive(Clone, Debug)]
pub struct LayoutOutput {
    state: DensityMatrix,
    layout: LayoutKind,
    params: LayoutParams,
}

impl LayoutOutput {
    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn layout(&self) -> LayoutKind {
        self.layout
    }

    pub fn params(&self) -> &LayoutParams {
        &self.params
    }

    pub fn probe(&self) -> &DensityMatrix {
        &self.params.probe
    }
}

/// Run `process` on `|t><t| (x) probe` and check the result is a state.
pub fn evolve(
    process: &TrajectoryProcess,
    trajectory: &PureState,
    probe: &DensityMatrix,
) -> Result<DensityMatrix> {
    check_probe(probe)?;
    if trajectory.dim() != 2 {
        return Err(Error::Dimension("trajectory state must be a qubit".into()));
    }
    let input = tensor(&trajectory.projector_matrix(), probe.matrix());
    let out = process.apply(&input)?;
    DensityMatrix::with_positivity_tol(out, OUTPUT_POSITIVITY_TOL)
        .map_err(|e| Error::Consistency(format!("layout output is not a state: {e}")))
}

pub fn parallel_controlled(
    a: &KrausChannel,
    b: &KrausChannel,
    env: &EnvironmentSpec,
    probe: &DensityMatrix,
) -> Result<LayoutOutput> {
    let process = parallel_process(a, b, env, probe)?;
    let state = evolve(&process, &PureState::plus(), probe)?;
    let mut params = LayoutParams::new(a, probe);
    params.channel_b = Some(b.label().to_string());
    params.env = Some(*env);
    Ok(LayoutOutput {
        state,
        layout: LayoutKind::Parallel,
        params,
    })
}

pub fn series_controlled(
    a: &KrausChannel,
    b: &KrausChannel,
    ops: &ControlledOps,
    probe: &DensityMatrix,
) -> Result<LayoutOutput> {
    let process = series_process(a, b, ops);
    let state = evolve(&process, &PureState::plus(), probe)?;
    let mut params = LayoutParams::new(a, probe);
    params.channel_b = Some(b.label().to_string());
    params.ops = Some(ops.clone());
    Ok(LayoutOutput {
        state,
        layout: LayoutKind::Series,
        params,
    })
}

pub fn switch(a: &KrausChannel, b: &KrausChannel, probe: &DensityMatrix) -> Result<LayoutOutput> {
    let state = evolve(&switch_process(a, b), &PureState::plus(), probe)?;
    let mut params = LayoutParams::new(a, probe);
    params.channel_b = Some(b.label().to_string());
    Ok(LayoutOutput {
        state,
        layout: LayoutKind::Switch,
        params,
    })
}

/// Switch output assembled from anticommutators on the `|+>_T` sector and
/// commutators on the `|->_T` sector.
///
/// This drops the `|+><-|_T` coherences, so it equals the `W_ij` construction
/// whenever `sum_ij {A_i, B_j} rho [A_i, B_j]^dagger` vanishes (two copies of
/// one channel, or Pauli channels). In general it equals the `W_ij` output
/// dephased in the `+/-` trajectory basis.
pub fn switch_commutator_form(
    a: &KrausChannel,
    b: &KrausChannel,
    probe: &DensityMatrix,
) -> Result<DensityMatrix> {
    check_probe(probe)?;
    let plus = tensor(&PureState::plus().projector_matrix(), probe.matrix());
    let minus = tensor(&PureState::minus().projector_matrix(), probe.matrix());
    let id_h = gates::identity();
    let mut out = ComplexMatrix::zeros(8, 8);
    for ai in a.kraus() {
        for bj in b.kraus() {
            let anti = tensor_all(&[
                &gates::identity(),
                &(qmat::anticommutator(ai, bj) * cr(0.5)),
                &id_h,
            ]);
            let comm = tensor_all(&[
                &gates::identity(),
                &(qmat::commutator(ai, bj) * cr(0.5)),
                &id_h,
            ]);
            out += &anti * &plus * anti.adjoint();
            out += &comm * &minus * comm.adjoint();
        }
    }
    DensityMatrix::with_positivity_tol(out, OUTPUT_POSITIVITY_TOL)
        .map_err(|e| Error::Consistency(format!("switch output is not a state: {e}")))
}

pub fn single_use(ch: &KrausChannel, probe: &DensityMatrix) -> Result<LayoutOutput> {
    let state = evolve(&single_process(ch), &PureState::zero(), probe)?;
    Ok(LayoutOutput {
        state,
        layout: LayoutKind::Single,
        params: LayoutParams::new(ch, probe),
    })
}

/// Classical trajectory choosing `a` with probability `q`, else `b`.
pub fn classical(
    q: f64,
    a: &KrausChannel,
    b: &KrausChannel,
    probe: &DensityMatrix,
) -> Result<LayoutOutput> {
    let mixed = channels::classical_mixture(q, a, b)?;
    let state = evolve(&single_process(&mixed), &PureState::zero(), probe)?;
    let mut params = LayoutParams::new(a, probe);
    params.channel_b = Some(b.label().to_string());
    params.q = Some(q);
    Ok(LayoutOutput {
        state,
        layout: LayoutKind::Classical,
        params,
    })
}

#[derive(Clone, Debug)]
pub struct PostSelection {
    pub probability: f64,
    /// Normalised state of the remaining subsystems, original order kept.
    pub state: DensityMatrix,
}

/// Probability threshold below which a post-selected state is undefined.
pub const MIN_POSTSELECTION_PROBABILITY: f64 = 1e-12;

/// Project subsystem `target` of `rho` onto `v` and drop it.
pub fn project_out(
    rho: &ComplexMatrix,
    dims: &[usize],
    target: usize,
    v: &PureState,
) -> Result<(f64, ComplexMatrix)> {
    if target >= dims.len() || dims[target] != v.dim() {
        return Err(Error::Dimension(format!(
            "cannot project subsystem {target} of {dims:?} onto a {}-dim state",
            v.dim()
        )));
    }
    let total: usize = dims.iter().product();
    if rho.nrows() != total {
        return Err(Error::Dimension(
            "state does not match subsystem dims".into(),
        ));
    }
    let before: usize = dims[..target].iter().product();
    let after: usize = dims[target + 1..].iter().product();
    let bra = ComplexMatrix::from_row_slice(1, v.dim(), v.amplitudes().adjoint().as_slice());
    let m = tensor_all(&[
        &ComplexMatrix::identity(before, before),
        &bra,
        &ComplexMatrix::identity(after, after),
    ]);
    let conditional = &m * rho * m.adjoint();
    Ok((conditional.trace().re, conditional))
}

fn postselect(out: &LayoutOutput, target: usize, v: &PureState) -> Result<PostSelection> {
    if v.dim() != 2 {
        return Err(Error::Dimension(
            "post-selection direction must be a qubit state".into(),
        ));
    }
    let (probability, unnormalized) = project_out(out.state.matrix(), &[2, 2, 2], target, v)?;
    let probability = probability.clamp(0.0, 1.0);
    if probability < MIN_POSTSELECTION_PROBABILITY {
        return Err(Error::ZeroProbability(probability));
    }
    let state = DensityMatrix::normalize(unnormalized)
        .map_err(|e| Error::Consistency(format!("post-selected state invalid: {e}")))?;
    Ok(PostSelection { probability, state })
}

/// Measure `T` along `direction`; conditional state on `I (x) H`.
pub fn postselect_trajectory(out: &LayoutOutput, direction: &PureState) -> Result<PostSelection> {
    postselect(out, 0, direction)
}

/// Measure `I` along `basis_state`; conditional state on `T (x) H`.
pub fn postselect_information(
    out: &LayoutOutput,
    basis_state: &PureState,
) -> Result<PostSelection> {
    postselect(out, 1, basis_state)
}

/// A channel given by family name (parametrised by `p`) or explicit Kraus operators.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Named(String),
    Explicit(ChannelJson),
}

impl ChannelSpec {
    pub fn build(&self, p: f64) -> Result<KrausChannel> {
        match self {
            ChannelSpec::Named(name) => named_channel(name, p),
            ChannelSpec::Explicit(json) => KrausChannel::try_from(json.clone()),
        }
    }
}

/// `xy`, `bf`, `pf`, `bb84` take `p`; `eb` and `identity` ignore it.
pub fn named_channel(name: &str, p: f64) -> Result<KrausChannel> {
    match name {
        "xy" => channels::xy_channel(p),
        "bf" | "bit-flip" | "bit_flip" => channels::bit_flip(p),
        "pf" | "phase-flip" | "phase_flip" => channels::phase_flip(p),
        "bb84" => channels::bb84(p),
        "eb" => Ok(channels::entanglement_breaking()),
        "identity" | "id" => Ok(KrausChannel::identity()),
        other => Err(Error::Channel(format!("unknown channel `{other}`"))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UnitarySpec {
    Gate(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

impl UnitarySpec {
    pub fn build(&self) -> Result<ComplexMatrix> {
        match self {
            UnitarySpec::Gate(name) => Ok(name.parse::<Gate>()?.matrix()),
            UnitarySpec::Matrix(rows) => channels::matrix_from_rows(rows),
        }
    }
}

fn default_u1() -> UnitarySpec {
    UnitarySpec::Gate("Y".into())
}

fn default_identity_gate() -> UnitarySpec {
    UnitarySpec::Gate("I".into())
}

fn default_env() -> EnvMethod {
    EnvMethod::KrausWeighted
}

fn default_q() -> f64 {
    0.5
}

/// Serialisable layout description.
///
/// `channel_b` defaults to `channel_a`; the controlled unitaries default to
/// `(Y, I, I)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub layout: LayoutKind,
    pub channel_a: ChannelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_b: Option<ChannelSpec>,
    #[serde(default)]
    pub p: f64,
    #[serde(default = "default_u1")]
    pub u1: UnitarySpec,
    #[serde(default = "default_identity_gate")]
    pub u2: UnitarySpec,
    #[serde(default = "default_identity_gate")]
    pub u3: UnitarySpec,
    #[serde(default = "default_env")]
    pub env_method: EnvMethod,
    #[serde(default)]
    pub vacuum_phase: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_seed: Option<u64>,
}

impl LayoutConfig {
    pub fn new(layout: LayoutKind, channel_a: &str, channel_b: Option<&str>, p: f64) -> Self {
        Self {
            layout,
            channel_a: ChannelSpec::Named(channel_a.into()),
            channel_b: channel_b.map(|s| ChannelSpec::Named(s.into())),
            p,
            u1: default_u1(),
            u2: default_identity_gate(),
            u3: default_identity_gate(),
            env_method: default_env(),
            vacuum_phase: 0.0,
            q: default_q(),
            env_seed: None,
        }
    }

    pub fn with_explicit_channels(layout: LayoutKind, a: &KrausChannel, b: &KrausChannel) -> Self {
        let mut cfg = Self::new(layout, "identity", None, 0.0);
        cfg.channel_a = ChannelSpec::Explicit(ChannelJson::from(a));
        cfg.channel_b = Some(ChannelSpec::Explicit(ChannelJson::from(b)));
        cfg
    }

    pub fn with_gates(mut self, u1: Gate, u2: Gate, u3: Gate) -> Self {
        let name = |g: Gate| UnitarySpec::Gate(format!("{g:?}"));
        self.u1 = name(u1);
        self.u2 = name(u2);
        self.u3 = name(u3);
        self
    }

    pub fn channels(&self) -> Result<(KrausChannel, KrausChannel)> {
        let a = self.channel_a.build(self.p)?;
        let b = match &self.channel_b {
            Some(spec) => spec.build(self.p)?,
            None => a.clone(),
        };
        Ok((a, b))
    }

    pub fn ops(&self) -> Result<ControlledOps> {
        ControlledOps::new(self.u1.build()?, self.u2.build()?, self.u3.build()?)
    }

    pub fn environment(&self) -> Result<EnvironmentSpec> {
        EnvironmentSpec::new(self.env_method, self.vacuum_phase, self.env_seed)
    }

    /// The layout as a map on `T (x) I`. `probe` only matters for the
    /// Kraus-weighted environment of the parallel layout.
    pub fn process(&self, probe: &DensityMatrix) -> Result<TrajectoryProcess> {
        let (a, b) = self.channels()?;
        Ok(match self.layout {
            LayoutKind::Parallel => parallel_process(&a, &b, &self.environment()?, probe)?,
            LayoutKind::Series => series_process(&a, &b, &self.ops()?),
            LayoutKind::Switch => switch_process(&a, &b),
            LayoutKind::Single => single_process(&a),
            LayoutKind::Classical => single_process(&channels::classical_mixture(self.q, &a, &b)?),
        })
    }

    pub fn output(&self, probe: &DensityMatrix) -> Result<LayoutOutput> {
        let (a, b) = self.channels()?;
        match self.layout {
            LayoutKind::Parallel => parallel_controlled(&a, &b, &self.environment()?, probe),
            LayoutKind::Series => series_controlled(&a, &b, &self.ops()?, probe),
            LayoutKind::Switch => switch(&a, &b, probe),
            LayoutKind::Single => single_use(&a, probe),
            LayoutKind::Classical => classical(self.q, &a, &b, probe),
        }
    }

    pub fn bell_output(&self) -> Result<LayoutOutput> {
        self.output(&PureState::bell_phi_plus().density())
    }
}
