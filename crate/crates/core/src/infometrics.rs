//! Binary entropy, coherent information, its post-selected lower bound and
//! Monte Carlo average process fidelity.

use rand::Rng;
use serde::Serialize;

use crate::channels::{check_probability, KrausChannel};
use crate::layouts::{
    postselect_trajectory, LayoutKind, LayoutOutput, MIN_POSTSELECTION_PROBABILITY,
};
use crate::qmat::{self, ComplexMatrix, DensityMatrix, PureState};
use crate::{Error, Result};

/// Label recorded for the only probe coherent information is defined against.
pub const BELL_PROBE: &str = "bell_phi_plus";

/// Curve differences below this are treated as ties by [`crossings`].
pub const CROSSOVER_TIE_TOL: f64 = 1e-9;

/// Shannon entropy of a bit, base 2.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_probability(p)?;
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoherentInfoResult {
    pub value: f64,
    pub probe: String,
    pub layout: LayoutKind,
}

/// `S(Tr_retained rho) - S(rho)` for a state on `dims`, tracing out subsystem
/// `retained` to get the receiver's marginal.
pub fn coherent_information_of_state(
    rho: &DensityMatrix,
    dims: &[usize],
    retained: usize,
) -> Result<f64> {
    if retained >= dims.len() {
        return Err(Error::Dimension(format!(
            "no subsystem {retained} in {dims:?}"
        )));
    }
    let keep: Vec<usize> = (0..dims.len()).filter(|&k| k != retained).collect();
    let receiver = qmat::partial_trace(rho, &keep, dims)?;
    Ok(qmat::von_neumann_entropy(&receiver)? - qmat::von_neumann_entropy(rho)?)
}

fn is_bell_probe(probe: &DensityMatrix) -> bool {
    probe.dim() == 4
        && qmat::max_abs_diff(
            probe.matrix(),
            &PureState::bell_phi_plus().projector_matrix(),
        ) < qmat::HERMITIAN_TOL
}

/// Coherent information of a layout, `(T, I)` as receiver and `H` retained.
pub fn coherent_information(out: &LayoutOutput) -> Result<CoherentInfoResult> {
    if !is_bell_probe(out.probe()) {
        return Err(Error::NonBellProbe);
    }
    let value = coherent_information_of_state(out.state(), &[2, 2, 2], 2)?;
    Ok(CoherentInfoResult {
        value,
        probe: BELL_PROBE.to_string(),
        layout: out.layout(),
    })
}

/// Coherent information of a qubit channel against the Bell probe.
pub fn channel_coherent_information(ch: &KrausChannel) -> Result<f64> {
    let bell = PureState::bell_phi_plus().density();
    let out = crate::channels::apply(ch, &bell, 0, &[2, 2])?;
    coherent_information_of_state(&out, &[2, 2], 1)
}

/// `p_+ I_c^+ + p_- I_c^-`.
pub fn ic_lower_bound(plus_prob: f64, ic_plus: f64, minus_prob: f64, ic_minus: f64) -> Result<f64> {
    if !(plus_prob >= 0.0 && minus_prob >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "post-selection probabilities must be non-negative, got {plus_prob} and {minus_prob}"
        )));
    }
    if plus_prob + minus_prob > 1.0 + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "post-selection probabilities sum to {}",
            plus_prob + minus_prob
        )));
    }
    Ok(plus_prob * ic_plus + minus_prob * ic_minus)
}

/// Lower bound together with its ingredients. A branch whose probability is
/// below the post-selection threshold contributes zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBound {
    pub plus_prob: f64,
    pub ic_plus: f64,
    pub minus_prob: f64,
    pub ic_minus: f64,
    pub value: f64,
}

/// Measure `T` in the `+/-` basis of a layout output and combine the
/// conditional coherent informations on `(I, H)`.
pub fn layout_lower_bound(out: &LayoutOutput) -> Result<LowerBound> {
    if !is_bell_probe(out.probe()) {
        return Err(Error::NonBellProbe);
    }
    let branch = |direction: PureState| -> Result<(f64, f64)> {
        match postselect_trajectory(out, &direction) {
            Ok(ps) => Ok((
                ps.probability,
                coherent_information_of_state(&ps.state, &[2, 2], 1)?,
            )),
            Err(Error::ZeroProbability(p)) if p < MIN_POSTSELECTION_PROBABILITY => Ok((0.0, 0.0)),
            Err(e) => Err(e),
        }
    };
    let (plus_prob, ic_plus) = branch(PureState::plus())?;
    let (minus_prob, ic_minus) = branch(PureState::minus())?;
    let value = ic_lower_bound(plus_prob, ic_plus, minus_prob, ic_minus)?;
    Ok(LowerBound {
        plus_prob,
        ic_plus,
        minus_prob,
        ic_minus,
        value,
    })
}

/// Mean Uhlmann fidelity between `ideal(rho)` and `(1/N) sum_k U_k rho U_k^dagger`
/// over `n_probe_states` Haar-random pure qubit inputs.
pub fn average_process_fidelity<R: Rng + ?Sized>(
    ideal: &KrausChannel,
    realized: &[ComplexMatrix],
    n_probe_states: usize,
    rng: &mut R,
) -> Result<f64> {
    if realized.is_empty() {
        return Err(Error::InvalidArgument(
            "realized unitary sequence is empty".into(),
        ));
    }
    if n_probe_states == 0 {
        return Err(Error::InvalidArgument(
            "need at least one probe state".into(),
        ));
    }
    for u in realized {
        if u.shape() != (2, 2) {
            return Err(Error::Dimension(format!(
                "realized operator of shape {:?}",
                u.shape()
            )));
        }
    }
    // the empirical channel is linear, so tabulate its images of |i><j| once
    let weight = qmat::cr(1.0 / realized.len() as f64);
    let images: Vec<ComplexMatrix> = (0..4)
        .map(|k| qmat::conjugate_sum(realized, &qmat::gates::ket_bra(k / 2, k % 2)) * weight)
        .collect();
    let mut total = 0.0;
    for _ in 0..n_probe_states {
        let rho = PureState::haar_random(2, rng).projector_matrix();
        let target = DensityMatrix::normalize(ideal.apply_matrix(&rho))?;
        let mut empirical = ComplexMatrix::zeros(2, 2);
        for (k, image) in images.iter().enumerate() {
            empirical += image * rho[(k / 2, k % 2)];
        }
        total += qmat::state_fidelity(&target, &DensityMatrix::normalize(empirical)?)?;
    }
    Ok(total / n_probe_states as f64)
}

/// Grid points at which `b - a` changes sign, linearly interpolated.
///
/// Differences within [`CROSSOVER_TIE_TOL`] count as ties and are skipped, so
/// touching curves do not register and a crossing through a tie is placed
/// between the neighbouring non-tied points.
pub fn crossings(p: &[f64], a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if p.len() < 2 {
        return Err(Error::InvalidArgument(
            "crossover search needs at least 2 grid points".into(),
        ));
    }
    if a.len() != p.len() || b.len() != p.len() {
        return Err(Error::Dimension("curves do not share the p grid".into()));
    }
    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for (k, &x) in p.iter().enumerate() {
        let d = a[k] - b[k];
        if d.abs() < CROSSOVER_TIE_TOL {
            continue;
        }
        if let Some((x0, d0)) = last {
            if d0.signum() != d.signum() {
                out.push(x0 + (x - x0) * d0 / (d0 - d));
            }
        }
        last = Some((x, d));
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Crossovers {
    pub series_switch: Vec<f64>,
    pub series_parallel: Vec<f64>,
    pub switch_parallel: Vec<f64>,
}

pub fn crossover_points(
    p: &[f64],
    series: &[f64],
    switch: &[f64],
    parallel: &[f64],
) -> Result<Crossovers> {
    Ok(Crossovers {
        series_switch: crossings(p, series, switch)?,
        series_parallel: crossings(p, series, parallel)?,
        switch_parallel: crossings(p, switch, parallel)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{self, xy_channel};
    use crate::layouts::{self, EnvironmentSpec};
    use crate::rng;
    use approx::assert_abs_diff_eq;

    fn bell() -> DensityMatrix {
        PureState::bell_phi_plus().density()
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        let p: f64 = 0.11;
        let oracle = -(p.ln() * p + (1.0 - p).ln() * (1.0 - p)) / 2f64.ln();
        assert_abs_diff_eq!(binary_entropy(p).unwrap(), oracle, epsilon = 1e-15);
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn identity_single_use_is_one() {
        let out = layouts::single_use(&KrausChannel::identity(), &bell()).unwrap();
        let ci = coherent_information(&out).unwrap();
        assert_abs_diff_eq!(ci.value, 1.0, epsilon = 1e-12);
        assert_eq!(ci.probe, BELL_PROBE);
        assert_eq!(ci.layout, LayoutKind::Single);
    }

    #[test]
    fn non_bell_probe_rejected() {
        let probe = PureState::zero().tensor(&PureState::zero()).density();
        let out = layouts::single_use(&KrausChannel::identity(), &probe).unwrap();
        assert!(matches!(
            coherent_information(&out),
            Err(Error::NonBellProbe)
        ));
    }

    #[test]
    fn switch_xy_full_activation() {
        for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let ch = xy_channel(p).unwrap();
            let out = layouts::switch(&ch, &ch, &bell()).unwrap();
            assert_abs_diff_eq!(
                coherent_information(&out).unwrap().value,
                1.0,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn parallel_xy_half_value() {
        let ch = xy_channel(0.5).unwrap();
        let out =
            layouts::parallel_controlled(&ch, &ch, &EnvironmentSpec::default(), &bell()).unwrap();
        let ci = coherent_information(&out).unwrap().value;
        assert!(ci > 0.0 && ci < 1.0);
        // 8x8 brute-force value
        assert_abs_diff_eq!(ci, 0.3112781244591327, epsilon = 1e-9);
    }

    #[test]
    fn lower_bound_cases() {
        assert_eq!(ic_lower_bound(1.0, 1.0, 0.0, 0.0).unwrap(), 1.0);
        assert!(ic_lower_bound(-0.1, 1.0, 0.5, 0.0).is_err());
        assert!(ic_lower_bound(0.7, 1.0, 0.7, 0.0).is_err());

        let eb = channels::entanglement_breaking();
        let out = layouts::switch(&eb, &eb, &bell()).unwrap();
        let lb = layout_lower_bound(&out).unwrap();
        assert_abs_diff_eq!(lb.plus_prob, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(lb.minus_prob, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(lb.value, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            coherent_information(&out).unwrap().value,
            1.0,
            epsilon = 1e-9
        );

        let id = KrausChannel::identity();
        let lb = layout_lower_bound(&layouts::switch(&id, &id, &bell()).unwrap()).unwrap();
        assert_eq!(lb.minus_prob, 0.0);
        assert_abs_diff_eq!(lb.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn fidelity_of_exact_mixture() {
        let ideal = channels::bb84(0.5).unwrap();
        let mix = channels::PauliMixture::bb84(0.5).unwrap();
        // stratified: each Pauli in proportion to its weight
        let mut realized = Vec::new();
        for (w, sigma) in mix.weights().iter().zip(qmat::gates::paulis()) {
            for _ in 0..(w * 16.0).round() as usize {
                realized.push(sigma.clone());
            }
        }
        let f = average_process_fidelity(&ideal, &realized, 50, &mut rng::stream(1, 0)).unwrap();
        assert!(f >= 0.9999);
        assert!(average_process_fidelity(&ideal, &[], 10, &mut rng::stream(1, 0)).is_err());
    }

    #[test]
    fn fidelity_single_unitary_vs_depolarizing() {
        let ideal = channels::bb84(0.5).unwrap();
        let f = average_process_fidelity(
            &ideal,
            &[qmat::gates::pauli_x()],
            200,
            &mut rng::stream(2, 0),
        )
        .unwrap();
        // pure state against the maximally mixed state: F = 1/2
        assert_abs_diff_eq!(f, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn crossing_search() {
        let p = [0.0, 0.1, 0.2, 0.3];
        let a = [0.0, 0.2, 0.4, 0.6];
        assert!(crossings(&p, &a, &a).unwrap().is_empty());
        let b = [0.3, 0.3, 0.3, 0.3];
        let x = crossings(&p, &a, &b).unwrap();
        assert_eq!(x.len(), 1);
        assert_abs_diff_eq!(x[0], 0.15, epsilon = 1e-12);
        assert!(crossings(&[0.0], &[0.0], &[0.0]).is_err());
        let touching = [0.0, 0.1, 0.4, 0.6];
        let c = [0.1, 0.1, 0.3, 0.3];
        let x = crossings(&p, &touching, &c).unwrap();
        assert_eq!(x.len(), 1);
        assert_abs_diff_eq!(x[0], 0.1, epsilon = 1e-12);
        assert!(x[0] > 0.0 && x[0] < 0.2);
    }
}
