//! Dense complex linear algebra for 1-4 qubit systems.
//!
//! Matrices are nalgebra `DMatrix<Complex64>`. Tensor products put the left
//! operand on the more significant subsystem, so `tensor(a, b)[(i, j)]` uses
//! `i = i_a * dim_b + i_b`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::{rng, Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-12;

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub mod gates {
    use super::{c, cr, ComplexMatrix};
    use std::f64::consts::FRAC_1_SQRT_2;

    pub fn identity() -> ComplexMatrix {
        ComplexMatrix::identity(2, 2)
    }

    pub fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
    }

    pub fn pauli_y() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)])
    }

    pub fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
    }

    pub fn hadamard() -> ComplexMatrix {
        let h = FRAC_1_SQRT_2;
        ComplexMatrix::from_row_slice(2, 2, &[cr(h), cr(h), cr(h), cr(-h)])
    }

    /// `I, X, Y, Z` in that order.
    pub fn paulis() -> [ComplexMatrix; 4] {
        [identity(), pauli_x(), pauli_y(), pauli_z()]
    }

    /// `|i><j|` on a single qubit.
    pub fn ket_bra(i: usize, j: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(i, j)] = cr(1.0);
        m
    }
}

pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn tensor_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    factors
        .iter()
        .fold(ComplexMatrix::identity(1, 1), |acc, f| acc.kronecker(*f))
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b + b * a
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff on mismatched shapes");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

pub fn unitary_deviation(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    max_abs_diff(
        &(u.adjoint() * u),
        &ComplexMatrix::identity(u.nrows(), u.ncols()),
    )
}

/// `sum_k A_k rho A_k^dagger`.
pub fn conjugate_sum(ops: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(rho.nrows(), rho.ncols());
    for k in ops {
        out += k * rho * k.adjoint();
    }
    out
}

/// Embed a single-subsystem operator at `target`, identity elsewhere.
pub fn embed(op: &ComplexMatrix, target: usize, dims: &[usize]) -> Result<ComplexMatrix> {
    if target >= dims.len() {
        return Err(Error::Dimension(format!(
            "target subsystem {target} out of range for {} subsystems",
            dims.len()
        )));
    }
    if op.nrows() != dims[target] || op.ncols() != dims[target] {
        return Err(Error::Dimension(format!(
            "operator of shape {:?} does not act on subsystem of dim {}",
            op.shape(),
            dims[target]
        )));
    }
    let before: usize = dims[..target].iter().product();
    let after: usize = dims[target + 1..].iter().product();
    Ok(tensor_all(&[
        &ComplexMatrix::identity(before, before),
        op,
        &ComplexMatrix::identity(after, after),
    ]))
}

/// Hermitian eigendecomposition. Eigenvalues ascending, eigenvectors as columns.
pub fn eigh(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigvalsh(m: &ComplexMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Square root of a positive semidefinite Hermitian matrix.
pub fn sqrt_psd(m: &ComplexMatrix) -> ComplexMatrix {
    let (values, vectors) = eigh(m);
    let diag = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
        values.len(),
        values.iter().map(|&v| cr(v.max(0.0).sqrt())),
    ));
    &vectors * diag * vectors.adjoint()
}

/// Partial trace of an arbitrary square matrix over the subsystems not in `keep`.
pub fn partial_trace_matrix(
    m: &ComplexMatrix,
    keep: &[usize],
    dims: &[usize],
) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.nrows() != total {
        return Err(Error::Dimension(format!(
            "matrix of shape {:?} does not match subsystem dims {dims:?}",
            m.shape()
        )));
    }
    if keep.is_empty() {
        return Err(Error::Dimension("keep set is empty".into()));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() || *keep_sorted.last().unwrap() >= dims.len() {
        return Err(Error::Dimension(format!(
            "invalid keep set {keep:?} for dims {dims:?}"
        )));
    }

    let n = dims.len();
    let kept_dims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
    let traced: Vec<usize> = (0..n).filter(|k| !keep_sorted.contains(k)).collect();
    let kept_total: usize = kept_dims.iter().product();

    // split a full index into (kept index, traced index)
    let split = |mut idx: usize| -> (usize, usize) {
        let mut digits = vec![0usize; n];
        for k in (0..n).rev() {
            digits[k] = idx % dims[k];
            idx /= dims[k];
        }
        let kept = keep_sorted
            .iter()
            .fold(0, |acc, &k| acc * dims[k] + digits[k]);
        let tr = traced.iter().fold(0, |acc, &k| acc * dims[k] + digits[k]);
        (kept, tr)
    };
    let parts: Vec<(usize, usize)> = (0..total).map(split).collect();

    let mut out = ComplexMatrix::zeros(kept_total, kept_total);
    for i in 0..total {
        let (ki, ti) = parts[i];
        for j in 0..total {
            let (kj, tj) = parts[j];
            if ti == tj {
                out[(ki, kj)] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: ComplexVector,
}

impl PureState {
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amplitudes })
    }

    pub fn from_slice(amplitudes: &[Complex64]) -> Result<Self> {
        Self::new(ComplexVector::from_column_slice(amplitudes))
    }

    /// Rescale to unit norm.
    pub fn normalized(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < 1e-300 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            amplitudes: amplitudes / cr(norm),
        })
    }

    /// `alpha |0> + beta |1>`.
    pub fn qubit(alpha: Complex64, beta: Complex64) -> Result<Self> {
        Self::from_slice(&[alpha, beta])
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = ComplexVector::zeros(dim);
        v[k] = cr(1.0);
        Self { amplitudes: v }
    }

    pub fn zero() -> Self {
        Self::basis(2, 0)
    }

    pub fn one() -> Self {
        Self::basis(2, 1)
    }

    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: ComplexVector::from_column_slice(&[cr(h), cr(h)]),
        }
    }

    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: ComplexVector::from_column_slice(&[cr(h), cr(-h)]),
        }
    }

    /// `|R> = (|0> - i|1>) / sqrt(2)`.
    pub fn right() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: ComplexVector::from_column_slice(&[cr(h), c(0.0, -h)]),
        }
    }

    /// `|L> = (|0> + i|1>) / sqrt(2)`.
    pub fn left() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: ComplexVector::from_column_slice(&[cr(h), c(0.0, h)]),
        }
    }

    /// `|Phi+> = (|00> + |11>) / sqrt(2)`.
    pub fn bell_phi_plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: ComplexVector::from_column_slice(&[cr(h), cr(0.0), cr(0.0), cr(h)]),
        }
    }

    /// Haar-random pure state from normalised complex Gaussians.
    pub fn haar_random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            let v = ComplexVector::from_iterator(dim, (0..dim).map(|_| rng::complex_normal(rng)));
            if let Ok(s) = Self::normalized(v) {
                return s;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        PureState {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }

    pub fn overlap(&self, other: &PureState) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn apply(&self, op: &ComplexMatrix) -> Result<PureState> {
        if op.ncols() != self.dim() {
            return Err(Error::Dimension("operator does not match state".into()));
        }
        PureState::normalized(op * &self.amplitudes)
    }

    /// `|psi><psi|` as a bare matrix.
    pub fn projector_matrix(&self) -> ComplexMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: self.projector_matrix(),
        }
    }
}

/// Positive, unit-trace Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_positivity_tol(matrix, POSITIVITY_TOL)
    }

    /// Validate with a custom positivity tolerance; Hermiticity and trace use the defaults.
    pub fn with_positivity_tol(matrix: ComplexMatrix, positivity_tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "density matrix of shape {:?}",
                matrix.shape()
            )));
        }
        let deviation = hermitian_deviation(&matrix);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::Trace { trace });
        }
        let min = eigvalsh(&matrix).first().copied().unwrap_or(0.0);
        if min < -positivity_tol {
            return Err(Error::NotPositive { eigenvalue: min });
        }
        Ok(Self { matrix })
    }

    /// Symmetrise `(m + m^dagger)/2`, divide by the trace, then validate.
    pub fn normalize(matrix: ComplexMatrix) -> Result<Self> {
        let herm = (&matrix + matrix.adjoint()) * cr(0.5);
        let trace = herm.trace().re;
        if trace.abs() < 1e-300 {
            return Err(Error::Trace { trace });
        }
        Self::new(herm / cr(trace))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim, dim) / cr(dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            matrix: tensor(&self.matrix, &other.matrix),
        }
    }

    /// `U rho U^dagger` for a unitary `U`.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Result<DensityMatrix> {
        let deviation = unitary_deviation(u);
        if deviation > 1e-10 {
            return Err(Error::NotUnitary { deviation });
        }
        if u.nrows() != self.dim() {
            return Err(Error::Dimension("unitary does not match state".into()));
        }
        Ok(DensityMatrix {
            matrix: u * &self.matrix * u.adjoint(),
        })
    }

    /// Trusted constructor for maps already known to preserve the invariants.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize], dims: &[usize]) -> Result<DensityMatrix> {
    partial_trace_matrix(rho.matrix(), keep, dims).map(DensityMatrix::from_trusted)
}

/// Entropy in bits of the eigenvalue spectrum of a Hermitian matrix.
///
/// Eigenvalues in `(-1e-10, 1e-10]` count as zero; anything more negative is
/// rejected.
pub fn entropy_of_matrix(m: &ComplexMatrix) -> Result<f64> {
    let deviation = hermitian_deviation(m);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let mut s = 0.0;
    for lambda in eigvalsh(m) {
        if lambda <= -POSITIVITY_TOL {
            return Err(Error::NotPositive { eigenvalue: lambda });
        }
        if lambda > POSITIVITY_TOL {
            s -= lambda * lambda.log2();
        }
    }
    Ok(s.max(0.0))
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_of_matrix(rho.matrix())
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension(format!(
            "fidelity between dims {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    if rho.dim() == 2 {
        // closed form for qubits; determinants within a few ulps of zero are
        // rank-deficient states and must not leak sqrt(eps) into the result
        let det = |m: &ComplexMatrix| {
            let d = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
            if d < 4.0 * f64::EPSILON {
                0.0
            } else {
                d
            }
        };
        let overlap = (rho.matrix() * sigma.matrix()).trace().re;
        return Ok(
            (overlap + 2.0 * (det(rho.matrix()) * det(sigma.matrix())).sqrt()).clamp(0.0, 1.0),
        );
    }
    // a pure argument reduces the fidelity to an expectation value, avoiding
    // the square root of a rank-one matrix
    for (a, b) in [(rho, sigma), (sigma, rho)] {
        if a.purity() > 1.0 - 1e-12 {
            let (_, vectors) = eigh(a.matrix());
            let psi = vectors.column(a.dim() - 1);
            let value = (psi.adjoint() * b.matrix() * psi)[(0, 0)].re;
            return Ok(value.clamp(0.0, 1.0));
        }
    }
    let root = sqrt_psd(rho.matrix());
    let inner = &root * sigma.matrix() * &root;
    let inner = (&inner + inner.adjoint()) * cr(0.5);
    let tr: f64 = eigvalsh(&inner).iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}
