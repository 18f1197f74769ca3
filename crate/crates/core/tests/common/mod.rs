#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qtraj::qmat::{ComplexMatrix, DensityMatrix, PureState};
use qtraj::rng::{self, Stream};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn seeded(seed: u64) -> Stream {
    rng::stream(seed, 0)
}

pub fn bell() -> DensityMatrix {
    PureState::bell_phi_plus().density()
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(normal(rng), normal(rng)) / 2f64.sqrt()
    })
}

/// Classical Gram-Schmidt on the columns; equals QR with a positive real
/// diagonal of `R`.
pub fn gram_schmidt(m: &ComplexMatrix) -> ComplexMatrix {
    let mut q = m.clone();
    for j in 0..m.ncols() {
        let mut v = m.column(j).into_owned();
        for k in 0..j {
            let e = q.column(k).into_owned();
            let proj = e.dotc(&v);
            v -= e * proj;
        }
        let norm = v.norm();
        q.set_column(j, &(v / Complex64::new(norm, 0.0)));
    }
    q
}

pub fn random_unitary(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
    gram_schmidt(&ginibre(rng, dim, dim))
}

pub fn random_pure(rng: &mut impl Rng, dim: usize) -> PureState {
    PureState::normalized(ginibre(rng, dim, 1).column(0).into_owned()).unwrap()
}

pub fn random_density(rng: &mut impl Rng, dim: usize) -> DensityMatrix {
    let g = ginibre(rng, dim, dim);
    DensityMatrix::normalize(&g * g.adjoint()).unwrap()
}

/// Second implementation of the random-channel routine: Gram-Schmidt on an
/// `8 x 2` Ginibre matrix, cut into `2 x 2` row blocks.
pub fn oracle_random_kraus(rng: &mut impl Rng) -> Vec<ComplexMatrix> {
    let v = gram_schmidt(&ginibre(rng, 8, 2));
    (0..4).map(|e| v.rows(2 * e, 2).into_owned()).collect()
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    qtraj::qmat::eigvalsh(m)[0]
}

pub fn random_probability(rng: &mut impl Rng) -> f64 {
    rng.random::<f64>()
}
