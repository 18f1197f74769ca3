//! Single-qubit CPTP channels in Kraus form.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::qmat::{self, c, conjugate_sum, cr, embed, gates, ComplexMatrix, DensityMatrix};
use crate::{rng, Error, Result};

/// Completeness tolerance for named channels.
pub const CPTP_TOL: f64 = 1e-10;
/// Completeness tolerance for QR-sampled random channels.
pub const RANDOM_CPTP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliMixture {
    weights: [f64; 4],
}

impl PauliMixture {
    /// Weights ordered `(I, X, Y, Z)`.
    pub fn new(weights: [f64; 4]) -> Result<Self> {
        let in_range = weights.iter().all(|w| (0.0..=1.0).contains(w));
        let sum: f64 = weights.iter().sum();
        if !in_range || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::PauliWeights(weights));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> [f64; 4] {
        self.weights
    }

    pub fn xy(p: f64) -> Result<Self> {
        check_probability(p)?;
        Self::new([0.0, 1.0 - p, p, 0.0])
    }

    pub fn bit_flip(p: f64) -> Result<Self> {
        check_probability(p)?;
        Self::new([1.0 - p, p, 0.0, 0.0])
    }

    pub fn phase_flip(p: f64) -> Result<Self> {
        check_probability(p)?;
        Self::new([1.0 - p, 0.0, 0.0, p])
    }

    pub fn bb84(p: f64) -> Result<Self> {
        check_probability(p)?;
        let q = 1.0 - p;
        Self::new([q * q, q * p, p * p, q * p])
    }

    /// Draw `n` Pauli unitaries i.i.d. from the mixture.
    pub fn sample_unitaries<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<ComplexMatrix> {
        let paulis = gates::paulis();
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = 3;
                for (k, w) in self.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                // guard against rounding pushing us onto a zero-weight tail
                while self.weights[pick] == 0.0 && pick > 0 {
                    pick -= 1;
                }
                paulis[pick].clone()
            })
            .collect()
    }
}

pub fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Probability(p))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    label: String,
    kraus: Vec<ComplexMatrix>,
}

impl KrausChannel {
    /// Validates shapes and completeness at [`RANDOM_CPTP_TOL`].
    pub fn new(label: impl Into<String>, kraus: Vec<ComplexMatrix>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::Channel("no Kraus operators".into()));
        }
        if let Some(k) = kraus.iter().find(|k| k.shape() != (2, 2)) {
            return Err(Error::Channel(format!(
                "Kraus operator of shape {:?}",
                k.shape()
            )));
        }
        let ch = Self {
            label: label.into(),
            kraus,
        };
        let residual = ch.completeness_residual();
        if residual > RANDOM_CPTP_TOL {
            return Err(Error::Channel(format!(
                "not trace preserving (residual {residual:e})"
            )));
        }
        Ok(ch)
    }

    pub fn unitary(label: impl Into<String>, u: ComplexMatrix) -> Result<Self> {
        let deviation = qmat::unitary_deviation(&u);
        if deviation > 1e-12 {
            return Err(Error::NotUnitary { deviation });
        }
        Self::new(label, vec![u])
    }

    pub fn identity() -> Self {
        Self {
            label: "identity".into(),
            kraus: vec![gates::identity()],
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn len(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kraus.is_empty()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `max |sum K^dagger K - I|`.
    pub fn completeness_residual(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(2, 2);
        for k in &self.kraus {
            sum += k.adjoint() * k;
        }
        qmat::max_abs_diff(&sum, &ComplexMatrix::identity(2, 2))
    }

    /// Action on a bare single-qubit matrix.
    pub fn apply_matrix(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        conjugate_sum(&self.kraus, rho)
    }

    /// Normalised Choi matrix `(id (x) C)(|Phi+><Phi+|)`, first factor the reference.
    pub fn choi(&self) -> ComplexMatrix {
        let bell = qmat::PureState::bell_phi_plus().projector_matrix();
        let ops: Vec<ComplexMatrix> = self
            .kraus
            .iter()
            .map(|k| qmat::tensor(&gates::identity(), k))
            .collect();
        conjugate_sum(&ops, &bell)
    }

    /// Minimal (at most four operator) Kraus form from the Choi spectrum.
    pub fn canonical(&self) -> KrausChannel {
        let (values, vectors) = qmat::eigh(&self.choi());
        let mut kraus = Vec::new();
        for (k, &lambda) in values.iter().enumerate().rev() {
            if lambda <= 1e-14 {
                continue;
            }
            // Choi = sum_k |v_k><v_k|, v_k = vec(K_k)/sqrt(2) with the reference index major
            let scale = cr((2.0 * lambda).sqrt());
            let mut op = ComplexMatrix::zeros(2, 2);
            for r in 0..2 {
                for col in 0..2 {
                    op[(r, col)] = vectors[(col * 2 + r, k)] * scale;
                }
            }
            kraus.push(op);
        }
        KrausChannel {
            label: self.label.clone(),
            kraus,
        }
    }
}

pub fn pauli_mixture_channel(mix: &PauliMixture) -> KrausChannel {
    let paulis = gates::paulis();
    let kraus = mix
        .weights
        .iter()
        .zip(paulis)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, p)| p * cr(w.sqrt()))
        .collect();
    let [wi, wx, wy, wz] = mix.weights;
    KrausChannel {
        label: format!("pauli({wi},{wx},{wy},{wz})"),
        kraus,
    }
}

pub fn xy_channel(p: f64) -> Result<KrausChannel> {
    Ok(pauli_mixture_channel(&PauliMixture::xy(p)?).with_label(format!("xy({p})")))
}

pub fn bit_flip(p: f64) -> Result<KrausChannel> {
    Ok(pauli_mixture_channel(&PauliMixture::bit_flip(p)?).with_label(format!("bf({p})")))
}

pub fn phase_flip(p: f64) -> Result<KrausChannel> {
    Ok(pauli_mixture_channel(&PauliMixture::phase_flip(p)?).with_label(format!("pf({p})")))
}

pub fn bb84(p: f64) -> Result<KrausChannel> {
    Ok(pauli_mixture_channel(&PauliMixture::bb84(p)?).with_label(format!("bb84({p})")))
}

/// Equal X/Y mixture, entanglement breaking.
pub fn entanglement_breaking() -> KrausChannel {
    pauli_mixture_channel(&PauliMixture {
        weights: [0.0, 0.5, 0.5, 0.0],
    })
    .with_label("eb")
}

/// Apply `ch` to subsystem `target` of a multi-qubit state.
pub fn apply(
    ch: &KrausChannel,
    rho: &DensityMatrix,
    target: usize,
    dims: &[usize],
) -> Result<DensityMatrix> {
    let total: usize = dims.iter().product();
    if total != rho.dim() {
        return Err(Error::Dimension(format!(
            "state of dim {} does not match subsystem dims {dims:?}",
            rho.dim()
        )));
    }
    let ops = ch
        .kraus
        .iter()
        .map(|k| embed(k, target, dims))
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityMatrix::from_trusted(conjugate_sum(
        &ops,
        rho.matrix(),
    )))
}

/// `first` then `second`: Kraus set `{B_j A_i}`, with `i` the outer index.
pub fn compose_series(first: &KrausChannel, second: &KrausChannel) -> KrausChannel {
    let mut kraus = Vec::with_capacity(first.len() * second.len());
    for a in &first.kraus {
        for b in &second.kraus {
            kraus.push(b * a);
        }
    }
    KrausChannel {
        label: format!("{} ; {}", first.label, second.label),
        kraus,
    }
}

/// Classical mixture, `q` on `a` and `1 - q` on `b`.
pub fn classical_mixture(q: f64, a: &KrausChannel, b: &KrausChannel) -> Result<KrausChannel> {
    check_probability(q)?;
    let mut kraus = Vec::with_capacity(a.len() + b.len());
    if q > 0.0 {
        kraus.extend(a.kraus.iter().map(|k| k * cr(q.sqrt())));
    }
    if q < 1.0 {
        kraus.extend(b.kraus.iter().map(|k| k * cr((1.0 - q).sqrt())));
    }
    Ok(KrausChannel {
        label: format!("mix({q}; {}, {})", a.label, b.label),
        kraus,
    })
}

/// Random qubit channel with four Kraus operators.
///
/// An `8 x 2` complex Ginibre matrix `(A + iB)/sqrt(2)` is QR-decomposed
/// (economy size), the phases of `diag(R)` are folded back into `Q` to give a
/// Haar-distributed isometry `V: C^2 -> C^8`, and the Kraus operators are the
/// consecutive `2 x 2` row blocks `K_e[r, c] = V[2e + r, c]`.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R) -> KrausChannel {
    let g = DMatrix::<Complex64>::from_fn(8, 2, |_, _| rng::complex_normal(rng));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut v = q.clone();
    for col in 0..2 {
        let d = r[(col, col)];
        let phase = if d.norm() > 0.0 {
            d / cr(d.norm())
        } else {
            cr(1.0)
        };
        for row in 0..8 {
            v[(row, col)] = q[(row, col)] * phase;
        }
    }
    let kraus = (0..4)
        .map(|e| ComplexMatrix::from_fn(2, 2, |r, c| v[(2 * e + r, c)]))
        .collect();
    KrausChannel {
        label: "random".into(),
        kraus,
    }
}

pub fn is_cptp(ch: &KrausChannel, tol: f64) -> bool {
    ch.completeness_residual() <= tol
}

/// JSON form: `{"label": .., "kraus": [ [[ [re, im], [re, im] ], [ .. ]], .. ]}`,
/// each Kraus operator as a list of rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelJson {
    pub label: String,
    pub kraus: Vec<Vec<Vec<[f64; 2]>>>,
}

impl From<&KrausChannel> for ChannelJson {
    fn from(ch: &KrausChannel) -> Self {
        ChannelJson {
            label: ch.label.clone(),
            kraus: ch.kraus.iter().map(matrix_to_rows).collect(),
        }
    }
}

impl TryFrom<ChannelJson> for KrausChannel {
    type Error = Error;

    fn try_from(json: ChannelJson) -> Result<Self> {
        let kraus = json
            .kraus
            .iter()
            .map(|m| matrix_from_rows(m))
            .collect::<Result<Vec<_>>>()?;
        KrausChannel::new(json.label, kraus)
    }
}

impl Serialize for KrausChannel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for KrausChannel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = ChannelJson::deserialize(d)?;
        KrausChannel::try_from(json).map_err(serde::de::Error::custom)
    }
}

pub fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|col| [m[(r, col)].re, m[(r, col)].im])
                .collect()
        })
        .collect()
}

pub fn matrix_from_rows(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged or empty matrix".into()));
    }
    Ok(ComplexMatrix::from_fn(nrows, ncols, |r, col| {
        let [re, im] = rows[r][col];
        c(re, im)
    }))
}
