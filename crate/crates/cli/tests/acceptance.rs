//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use qtraj::channels::{self, is_cptp, KrausChannel, PauliMixture, CPTP_TOL, RANDOM_CPTP_TOL};
use qtraj::infometrics::{binary_entropy, coherent_information, layout_lower_bound};
use qtraj::layouts::{self, EnvironmentSpec, Gate, LayoutKind};
use qtraj::qmat::{self, gates, partial_trace, tensor, DensityMatrix, PureState};
use qtraj::rng;
use qtraj_cli::{
    run_histogram, run_mcfid, run_sweep, run_tomo_demo, tomo, Family, HistogramSpec, McfidSpec,
    Pairing, SweepSpec,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn grid_21() -> Vec<f64> {
    (0..=20).map(|k| k as f64 * 0.05).collect()
}

fn bell() -> DensityMatrix {
    PureState::bell_phi_plus().density()
}

/// Random mixed state on two qubits: a Haar pure state on four qubits with
/// the last two traced out.
fn random_two_qubit_state(seed: u64, k: u64) -> DensityMatrix {
    let psi = PureState::haar_random(16, &mut rng::stream(seed, k));
    partial_trace(&psi.density(), &[0, 1], &[2, 2, 2, 2]).unwrap()
}

fn criterion_1() -> Check {
    let mut spec = SweepSpec::new(Family::Xy);
    spec.layouts = vec![LayoutKind::Series, LayoutKind::Switch, LayoutKind::Single];
    spec.gates = Some([Gate::Y, Gate::I, Gate::I]);
    let report = run_sweep(&spec).map_err(err)?;
    let mut worst: f64 = 0.0;
    for row in &report.rows {
        let target = match row.layout {
            LayoutKind::Single => 1.0 - binary_entropy(row.p).map_err(err)?,
            _ => 1.0,
        };
        worst = worst.max((row.ci - target).abs());
    }
    ensure(report.rows.len() == 63, "missing rows")?;
    ensure(worst < 1e-9, format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e} over 21 points"))
}

fn criterion_2() -> Check {
    let mut spec = SweepSpec::new(Family::Bfpf);
    spec.layouts = vec![LayoutKind::Series];
    spec.gates = Some([Gate::Y, Gate::H, Gate::H]);
    let report = run_sweep(&spec).map_err(err)?;
    let worst = report
        .rows
        .iter()
        .map(|r| (r.ci - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(worst < 1e-9, format!("max deviation {worst:e}"))?;
    Ok(format!("series coherent information 1 within {worst:.1e}"))
}

fn criterion_3() -> Check {
    let mut worst: f64 = 0.0;
    for p in grid_21() {
        let out = layouts::single_use(&channels::bb84(p).map_err(err)?, &bell()).map_err(err)?;
        let ci = coherent_information(&out).map_err(err)?.value;
        worst = worst.max((ci - (1.0 - 2.0 * binary_entropy(p).map_err(err)?)).abs());
    }
    ensure(worst < 1e-9, format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn criterion_4() -> Check {
    let (alpha, beta) = (
        Complex64::from(0.7f64.sqrt()),
        Complex64::from(0.3f64.sqrt()),
    );
    let probe = PureState::qubit(alpha, beta)
        .map_err(err)?
        .tensor(&PureState::zero())
        .density();
    let eb = channels::entanglement_breaking();
    let out =
        layouts::parallel_controlled(&eb, &eb, &EnvironmentSpec::default(), &probe).map_err(err)?;
    let info = |s: &DensityMatrix| partial_trace(s, &[0], &[2, 2]).unwrap();

    let minus = layouts::postselect_trajectory(&out, &PureState::minus()).map_err(err)?;
    let purity = info(&minus.state).purity();
    ensure(
        (minus.probability - 0.25).abs() < 1e-9,
        format!("minus probability {}", minus.probability),
    )?;
    ensure(
        (purity - 1.0).abs() < 1e-9,
        format!("minus purity {purity}"),
    )?;

    let plus = layouts::postselect_trajectory(&out, &PureState::plus()).map_err(err)?;
    let off = info(&plus.state).matrix()[(0, 1)].norm();
    let target = (alpha.conj() * beta).norm() / 3.0;
    ensure(
        (plus.probability - 0.75).abs() < 1e-9,
        format!("plus probability {}", plus.probability),
    )?;
    ensure(
        (off - target).abs() < 1e-9,
        format!("plus coherence {off} vs {target}"),
    )?;
    Ok(format!(
        "p- = {:.12}, purity {:.12}, p+ = {:.12}, |rho01| = {off:.12}",
        minus.probability, purity, plus.probability
    ))
}

fn criterion_5() -> Check {
    let eb = channels::entanglement_breaking();
    let plus = PureState::plus().projector_matrix();
    let minus = PureState::minus().projector_matrix();
    let z = tensor(&gates::pauli_z(), &gates::identity());
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let probe = random_two_qubit_state(55, k);
        let out = layouts::switch(&eb, &eb, &probe).map_err(err)?;
        let rho = probe.matrix();
        let expected =
            (tensor(&plus, rho) + tensor(&minus, &(&z * rho * &z))) * Complex64::from(0.5);
        worst = worst.max(qmat::max_abs_diff(out.state().matrix(), &expected));
    }
    ensure(worst < 1e-10, format!("max entry deviation {worst:e}"))?;
    Ok(format!("20 random probes, max entry deviation {worst:.1e}"))
}

fn criterion_6() -> Check {
    let mut spec = SweepSpec::new(Family::Bfpf);
    spec.layouts = vec![LayoutKind::Series, LayoutKind::Switch, LayoutKind::Parallel];
    spec.gates = Some([Gate::Y, Gate::I, Gate::I]);
    spec.p_steps = 201;
    let report = run_sweep(&spec).map_err(err)?;
    let x = report.crossovers.ok_or("no crossovers computed")?;
    let s = *x.series_switch.last().ok_or("no series/switch crossing")?;
    let p = *x
        .series_parallel
        .last()
        .ok_or("no series/parallel crossing")?;
    ensure(
        (s - 0.67).abs() <= 0.01,
        format!("series/switch crossing {s}"),
    )?;
    ensure(
        (p - 0.84).abs() <= 0.01,
        format!("series/parallel crossing {p}"),
    )?;
    Ok(format!("series/switch {s:.4}, series/parallel {p:.4}"))
}

fn criterion_7() -> Check {
    let mut spec = McfidSpec::new("bb84", 0.5);
    spec.n_list = vec![25];
    spec.trials = 100;
    spec.probe_states = 1000;
    spec.seed = 9;
    spec.workers = workers();
    let row = run_mcfid(&spec).map_err(err)?.remove(0);
    let fidelity = 1.0 - row.mean_infidelity;
    ensure(fidelity > 0.99, format!("mean fidelity {fidelity}"))?;
    Ok(format!(
        "mean fidelity {fidelity:.5} (stderr {:.1e})",
        row.stderr
    ))
}

fn criterion_8() -> Check {
    let start = Instant::now();
    let mut spec = HistogramSpec::new(10_000, Pairing::Same, 2024);
    spec.workers = workers();
    let report = run_histogram(&spec).map_err(err)?;
    let zero = |name| report.zero_mass(name).ok_or(format!("no {name} histogram"));
    let (series, parallel, switch) = (zero("series")?, zero("parallel")?, zero("switch")?);
    ensure(series < 0.01, format!("series zero mass {series}"))?;
    ensure(parallel > 0.05, format!("parallel zero mass {parallel}"))?;
    ensure(switch > 0.05, format!("switch zero mass {switch}"))?;
    for h in &report.histograms {
        ensure(
            h.histogram.total() == 10_000,
            format!("{} total {}", h.name, h.histogram.total()),
        )?;
        let sum: f64 = h.histogram.frequencies().iter().sum();
        ensure(
            (sum - 1.0).abs() < 1e-9,
            format!("{} frequencies sum {sum}", h.name),
        )?;
    }
    let negative = report
        .raw
        .iter()
        .filter(|s| s.series < s.parallel || s.series < s.switch)
        .count();
    ensure(negative > 0, "difference histograms have no negative mass")?;
    Ok(format!(
        "zero mass series {series:.4}, parallel {parallel:.4}, switch {switch:.4}; {negative} negative differences; {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_9() -> Check {
    let report = run_tomo_demo(&tomo::demo_config(), None, 0, workers()).map_err(err)?;
    let ci = report.coherent_information;
    let lb = report.lower_bound;
    ensure(
        (ci - 1.0).abs() < 1e-4,
        format!("reconstructed coherent information {ci}"),
    )?;
    ensure((lb - ci).abs() < 1e-4, format!("lower bound {lb} vs {ci}"))?;
    Ok(format!("I_c = {ci:.8}, I_c^LB = {lb:.8}"))
}

fn constructed_channels() -> Result<Vec<(KrausChannel, f64)>, String> {
    let mut out = Vec::new();
    for p in grid_21() {
        for name in ["xy", "bf", "pf", "bb84", "eb", "identity"] {
            out.push((layouts::named_channel(name, p).map_err(err)?, CPTP_TOL));
        }
        let (bf, pf) = (
            channels::bit_flip(p).map_err(err)?,
            channels::phase_flip(p).map_err(err)?,
        );
        out.push((channels::compose_series(&bf, &pf), CPTP_TOL));
        out.push((
            channels::classical_mixture(p, &bf, &pf).map_err(err)?,
            CPTP_TOL,
        ));
        let mix = PauliMixture::new([0.1, 0.2 * p, 0.3, 0.6 - 0.2 * p]).map_err(err)?;
        out.push((channels::pauli_mixture_channel(&mix), CPTP_TOL));
    }
    for k in 0..1000 {
        out.push((
            channels::random_channel(&mut rng::stream(31, k)),
            RANDOM_CPTP_TOL,
        ));
    }
    Ok(out)
}

fn check_state(rho: &DensityMatrix) -> Result<(), String> {
    let m = rho.matrix();
    let herm = qmat::hermitian_deviation(m);
    let trace = m.trace();
    let min = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
    ensure(herm < 1e-10, format!("hermitian deviation {herm:e}"))?;
    ensure(
        (trace - Complex64::from(1.0)).norm() < 1e-10,
        format!("trace {trace}"),
    )?;
    ensure(min > -1e-9, format!("eigenvalue {min:e}"))
}

fn cli_outputs_match(bin: &Path, dir: &Path, name: &str, args: &[&str]) -> Result<(), String> {
    let mut reference: Option<Vec<u8>> = None;
    for w in ["1", "4", "8"] {
        let path = dir.join(format!("{name}-{w}.out"));
        let status = Command::new(bin)
            .args(args)
            .args(["--workers", w, "--seed", "17", "--out"])
            .arg(&path)
            .status()
            .map_err(err)?;
        ensure(status.success(), format!("{name} exited with {status}"))?;
        let bytes = std::fs::read(&path).map_err(err)?;
        match &reference {
            None => reference = Some(bytes),
            Some(r) => ensure(r == &bytes, format!("{name} differs at workers={w}"))?,
        }
    }
    Ok(())
}

fn criterion_10() -> Check {
    let channels = constructed_channels()?;
    for (ch, tol) in &channels {
        ensure(
            is_cptp(ch, *tol),
            format!("{} not CPTP ({:e})", ch.label(), ch.completeness_residual()),
        )?;
    }

    let yii = qtraj::layouts::ControlledOps::from_gates(Gate::Y, Gate::I, Gate::I);
    for k in 0..1000u64 {
        let mut stream = rng::stream(41, k);
        let a = channels::random_channel(&mut stream);
        let b = channels::random_channel(&mut stream);
        let probe = random_two_qubit_state(43, k);
        let out = match k % 5 {
            0 => layouts::parallel_controlled(&a, &b, &EnvironmentSpec::haar(k), &probe),
            1 => layouts::series_controlled(&a, &b, &yii, &probe),
            2 => layouts::switch(&a, &b, &probe),
            3 => layouts::single_use(&a, &probe),
            _ => layouts::classical(0.3, &a, &b, &probe),
        }
        .map_err(err)?;
        check_state(out.state()).map_err(|e| format!("layout output {k}: {e}"))?;
    }

    let mut worst = f64::NEG_INFINITY;
    for k in 0..1000u64 {
        let mut stream = rng::stream(47, k);
        let a = channels::random_channel(&mut stream);
        let b = channels::random_channel(&mut stream);
        let out = layouts::switch(&a, &b, &bell()).map_err(err)?;
        let gap = layout_lower_bound(&out).map_err(err)?.value
            - coherent_information(&out).map_err(err)?.value;
        worst = worst.max(gap);
    }
    ensure(
        worst <= 1e-9,
        format!("lower bound exceeds coherent information by {worst:e}"),
    )?;

    let bin = Path::new(env!("CARGO_BIN_EXE_qtraj"));
    let dir = tempfile::tempdir().map_err(err)?;
    cli_outputs_match(
        bin,
        dir.path(),
        "sweep",
        &[
            "sweep",
            "--family",
            "bfpf",
            "--env",
            "haar",
            "--p-steps",
            "11",
        ],
    )?;
    cli_outputs_match(
        bin,
        dir.path(),
        "histogram",
        &["histogram", "--samples", "300", "--pairing", "different"],
    )?;
    cli_outputs_match(
        bin,
        dir.path(),
        "histogram-json",
        &["histogram", "--samples", "100", "--format", "json"],
    )?;
    cli_outputs_match(
        bin,
        dir.path(),
        "mcfid",
        &[
            "mcfid",
            "--n-list",
            "1,10,100",
            "--trials",
            "12",
            "--probe-states",
            "50",
        ],
    )?;
    cli_outputs_match(
        bin,
        dir.path(),
        "tomo",
        &["tomo", "--shots", "20000", "--format", "json"],
    )?;
    Ok(format!(
        "{} channels CPTP, 1000 layout outputs valid, max LB - I_c {worst:.1e}, CLI outputs identical for workers 1/4/8",
        channels.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("xy activation", criterion_1),
        ("bit/phase-flip series transmission", criterion_2),
        ("bb84 single use", criterion_3),
        ("parallel eb post-selection", criterion_4),
        ("switch output structure", criterion_5),
        ("bit/phase-flip crossovers", criterion_6),
        ("monte carlo fidelity", criterion_7),
        ("random-channel histograms", criterion_8),
        ("tomography round trip", criterion_9),
        ("property suites", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
