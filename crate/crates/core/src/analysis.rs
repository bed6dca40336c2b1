//! Post-processing: error norms against exact profiles, RK4 stability-region
//! checks of the linearized semi-discrete operator, and eventual-periodicity
//! detection on probe histories.

use crate::error::{Error, Result};
use crate::integrate::SimulationRecord;
use crate::models::{Family, Rhs};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Dense eigendecomposition is only attempted up to this many nodes.
pub const JACOBIAN_LIMIT: usize = 1024;

/// Eigenvalues may sit this far beyond |R| = 1 and still count as stable;
/// absorbs rounding on boundary-adjacent modes.
pub const STABILITY_SLACK: f64 = 1e-9;

pub fn linf_error(exact: &[f64], approx: &[f64]) -> Result<f64> {
    if exact.len() != approx.len() {
        return Err(Error::LengthMismatch { expected: exact.len(), got: approx.len() });
    }
    Ok(exact
        .iter()
        .zip(approx)
        .fold(0.0f64, |m, (&e, &a)| m.max((e - a).abs())))
}

pub fn l2_error(exact: &[f64], approx: &[f64], h: f64) -> Result<f64> {
    if exact.len() != approx.len() {
        return Err(Error::LengthMismatch { expected: exact.len(), got: approx.len() });
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!("grid spacing h = {h} must be positive")));
    }
    let sum: f64 = exact.iter().zip(approx).map(|(&e, &a)| (e - a) * (e - a)).sum();
    Ok((h * sum).sqrt())
}

/// |R(z)| for the classical RK4 stability function
/// R(z) = 1 + z + z²/2 + z³/6 + z⁴/24, evaluated by Horner so that the
/// landmark value R(−1) = 0.375 comes out bit-exact.
pub fn rk4_stability_modulus(z: Complex64) -> f64 {
    let one = Complex64::new(1.0, 0.0);
    let r = one + z * (one + z / 2.0 * (one + z / 3.0 * (one + z / 4.0)));
    r.norm()
}

/// Analytic Jacobian of the semi-discrete right-hand side at `state`, with
/// the constrained boundary rows zeroed exactly as the evaluator does.
/// Nonlinear transport contributes −β(diag(D₁u) + diag(u)·D₁); BBM-type
/// families are wrapped in the factored mass-matrix solve.
pub fn dense_jacobian(rhs: &Rhs, state: &[f64]) -> Result<DMatrix<f64>> {
    let n = rhs.n_nodes();
    if state.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: state.len() });
    }
    if n > JACOBIAN_LIMIT {
        return Err(Error::DenseLimit { what: "dense Jacobian", limit: JACOBIAN_LIMIT, n });
    }
    let m = rhs.model();
    let d1 = rhs.d1().to_dense();
    let du = rhs.d1().apply(state);

    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let scale = -m.alpha - m.beta * state[i];
        for k in 0..n {
            j[(i, k)] = scale * d1[(i, k)];
        }
        j[(i, i)] -= m.beta * du[i];
    }
    match m.family {
        Family::KdvClassic => {
            j -= rhs.d3().unwrap().to_dense() * m.mu;
        }
        Family::Kdv | Family::KdvBurgers | Family::KdvDamped => {
            j += rhs.d3().unwrap().to_dense() * m.mu;
            if m.family == Family::KdvBurgers {
                j += rhs.d2().unwrap().to_dense() * m.delta;
            }
            if m.family == Family::KdvDamped {
                for i in 0..n {
                    j[(i, i)] -= m.gamma_damp;
                }
            }
        }
        Family::Bbm | Family::BbmBurgers => {
            if m.family == Family::BbmBurgers {
                j += rhs.d2().unwrap().to_dense() * m.delta;
            }
            for &r in rhs.zero_rows() {
                j.row_mut(r).fill(0.0);
            }
            j = rhs.mass().unwrap().solve_matrix(&j)?;
        }
    }
    for &r in rhs.zero_rows() {
        j.row_mut(r).fill(0.0);
    }
    Ok(j)
}

/// Scaled spectrum δt·λ of the linearized operator plus the RK4 region verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub scaled_eigenvalues: Vec<Complex64>,
    pub max_stability_modulus: f64,
    pub all_stable: bool,
}

pub fn spectrum_from_jacobian(jacobian: &DMatrix<f64>, dt: f64) -> Result<SpectrumReport> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::BadTimeStep(dt));
    }
    if jacobian.nrows() != jacobian.ncols() {
        return Err(Error::LengthMismatch {
            expected: jacobian.nrows(),
            got: jacobian.ncols(),
        });
    }
    if jacobian.nrows() > JACOBIAN_LIMIT {
        return Err(Error::DenseLimit {
            what: "dense Jacobian",
            limit: JACOBIAN_LIMIT,
            n: jacobian.nrows(),
        });
    }
    let eig = jacobian.complex_eigenvalues();
    let mut scaled: Vec<Complex64> = eig.iter().map(|l| l * dt).collect();
    scaled.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    let max_stability_modulus = scaled
        .iter()
        .map(|&z| rk4_stability_modulus(z))
        .fold(0.0f64, f64::max);
    Ok(SpectrumReport {
        scaled_eigenvalues: scaled,
        all_stable: max_stability_modulus <= 1.0 + STABILITY_SLACK,
        max_stability_modulus,
    })
}

/// Linearize the right-hand side at `state` and test the scaled spectrum
/// against the RK4 stability region.
pub fn spectrum_check(rhs: &Rhs, state: &[f64], dt: f64) -> Result<SpectrumReport> {
    let j = dense_jacobian(rhs, state)?;
    spectrum_from_jacobian(&j, dt)
}

/// CSV rows `re,im,modulus` for plotting the scaled spectrum over the
/// stability region.
pub fn write_spectrum_csv<W: Write>(report: &SpectrumReport, mut w: W) -> Result<()> {
    writeln!(w, "re,im,modulus")?;
    for z in &report.scaled_eigenvalues {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", z.re, z.im, rk4_stability_modulus(*z))?;
    }
    Ok(())
}

/// Per-probe eventual-periodicity metric E_p(t) = |u(x_p, t+T) − u(x_p, t)|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePeriodicity {
    pub requested_x: f64,
    pub node_index: usize,
    pub node_x: f64,
    /// (t, E_p(t)) for every recorded t ∈ [0, t_max − T].
    pub metric_series: Vec<(f64, f64)>,
    /// Earliest t* with E_p(t) ≤ tol for all recorded t ≥ t*; None when the
    /// metric still exceeds the tolerance at the end of the run.
    pub onset_time: Option<f64>,
    /// max |u(x_p, t)| over the whole record, for amplitude-relative checks.
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityReport {
    pub period_t: f64,
    pub tolerance: f64,
    pub probes: Vec<ProbePeriodicity>,
}

/// Compare each probe history against itself shifted by one forcing period.
/// The shift is done by index (shift = round(T/dt)), so an exactly T-periodic
/// series yields a metric that is identically zero.
pub fn periodicity_report(
    record: &SimulationRecord,
    period: f64,
    tol: f64,
) -> Result<PeriodicityReport> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::BadPeriod(period));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Config(format!(
            "periodicity tolerance {tol} must be positive"
        )));
    }
    let shift_f = (period / record.dt).round();
    if (shift_f * record.dt - period).abs() > 1e-9 || shift_f < 1.0 {
        return Err(Error::BadPeriod(period));
    }
    let shift = shift_f as usize;
    let len = record.times.len();
    if len <= shift {
        return Err(Error::RecordTooShort { period });
    }
    let n_cmp = len - shift;

    let mut probes = Vec::with_capacity(record.probes.len());
    for p in &record.probes {
        if p.values.len() != len {
            return Err(Error::LengthMismatch { expected: len, got: p.values.len() });
        }
        let metric_series: Vec<(f64, f64)> = (0..n_cmp)
            .map(|k| (record.times[k], (p.values[k + shift] - p.values[k]).abs()))
            .collect();
        let mut start = n_cmp;
        while start > 0 && metric_series[start - 1].1 <= tol {
            start -= 1;
        }
        let onset_time = if start == n_cmp { None } else { Some(metric_series[start].0) };
        let max_abs = p.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        probes.push(ProbePeriodicity {
            requested_x: p.requested_x,
            node_index: p.node_index,
            node_x: p.node_x,
            metric_series,
            onset_time,
            max_abs,
        });
    }
    Ok(PeriodicityReport { period_t: period, tolerance: tol, probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::ProbeSeries;
    use crate::kernels::KernelConfig;
    use crate::models::{build_rhs, BoundaryPolicy, ForcingSpec, ModelSpec, OperatorSet};
    use crate::nodes::{build_nodes, build_stencils, Layout};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // ---- norms --------------------------------------------------------------

    #[test]
    fn linf_examples() {
        assert_eq!(linf_error(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(linf_error(&[0.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(linf_error(&[1.0, -2.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert!(linf_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn l2_examples() {
        assert_eq!(l2_error(&[4.0, -1.0], &[4.0, -1.0], 0.3).unwrap(), 0.0);
        assert!((l2_error(&[3.0, 4.0], &[0.0, 0.0], 1.0).unwrap() - 5.0).abs() < 1e-15);
        assert!((l2_error(&[1.0; 4], &[0.0; 4], 0.25).unwrap() - 1.0).abs() < 1e-15);
        let d = [3e-5, -4e-5, 0.0];
        let got = l2_error(&d, &[0.0; 3], 0.5).unwrap();
        assert!((got - 5e-5 * 0.5f64.sqrt()).abs() < 1e-18);
        assert!(l2_error(&[1.0], &[1.0], 0.0).is_err());
        assert!(l2_error(&[1.0], &[1.0, 2.0], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn l2_bounded_by_scaled_linf(
            v in proptest::collection::vec(-50.0f64..50.0, 1..40),
            h in 0.01f64..3.0,
        ) {
            let zeros = vec![0.0; v.len()];
            let l2 = l2_error(&v, &zeros, h).unwrap();
            let linf = linf_error(&v, &zeros).unwrap();
            prop_assert!(l2 <= (h * v.len() as f64).sqrt() * linf * (1.0 + 1e-12));
        }
    }

    // ---- stability function ---------------------------------------------------

    #[test]
    fn stability_function_landmarks() {
        assert_eq!(rk4_stability_modulus(Complex64::new(0.0, 0.0)), 1.0);
        assert_eq!(rk4_stability_modulus(Complex64::new(-1.0, 0.0)), 0.375);
        // real-axis boundary of the RK4 region
        let b = rk4_stability_modulus(Complex64::new(-2.785293563405282, 0.0));
        assert!((b - 1.0).abs() < 1e-12, "{b}");
        assert!((rk4_stability_modulus(Complex64::new(-2.785, 0.0)) - 1.0).abs() < 1e-2);
        assert!(rk4_stability_modulus(Complex64::new(-2.8, 0.0)) > 1.0);
    }

    #[test]
    fn imaginary_axis_segment_is_stable() {
        // |R(iy)| ≤ 1 up to the imaginary-axis limit 2√2 ≈ 2.828
        for k in 0..=280 {
            let y = k as f64 / 100.0;
            let m = rk4_stability_modulus(Complex64::new(0.0, y));
            assert!(m <= 1.0 + 1e-12, "|R({y}i)| = {m}");
        }
        assert!(rk4_stability_modulus(Complex64::new(0.0, 2.9)) > 1.0);
    }

    // ---- Jacobian ---------------------------------------------------------------

    fn rhs_for(model: ModelSpec, n: usize, c: f64) -> (Rhs, Vec<f64>) {
        let ns = build_nodes(-1.0, 1.0, n, Layout::Uniform).unwrap();
        let sm = build_stencils(&ns, 8).unwrap();
        let kc = KernelConfig::new(c).unwrap();
        let ops = OperatorSet::for_model(&ns, &sm, &model, &kc).unwrap();
        let bp = BoundaryPolicy::forced(
            ForcingSpec::SinTanh,
            &ns,
            ops.d1(),
            model.family.default_neumann_right(),
        )
        .unwrap();
        let rhs = build_rhs(&model, &ops, &bp).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let state: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        (rhs, state)
    }

    fn fd_jacobian(rhs: &Rhs, state: &[f64], eps: f64) -> DMatrix<f64> {
        let n = state.len();
        let mut j = DMatrix::zeros(n, n);
        let mut up = state.to_vec();
        let mut um = state.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for k in 0..n {
            up[k] += eps;
            um[k] -= eps;
            rhs.eval(&up, 0.0, &mut fp).unwrap();
            rhs.eval(&um, 0.0, &mut fm).unwrap();
            for i in 0..n {
                j[(i, k)] = (fp[i] - fm[i]) / (2.0 * eps);
            }
            up[k] = state[k];
            um[k] = state[k];
        }
        j
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences_for_every_family() {
        let models = [
            ModelSpec::kdv_classic(0.8, 2e-4).unwrap(),
            ModelSpec::kdv(1.0, 0.4, 1e-4).unwrap(),
            ModelSpec::kdv_burgers(1.0, 0.4, 1e-4, 5e-4).unwrap(),
            ModelSpec::kdv_damped(1.0, 0.4, 1e-4, 0.7).unwrap(),
            ModelSpec::bbm(1.0, 0.4, 1e-3).unwrap(),
            ModelSpec::bbm_burgers(1.0, 0.4, 1e-3, 5e-4).unwrap(),
        ];
        for model in models {
            let (rhs, state) = rhs_for(model, 24, 0.05);
            let analytic = dense_jacobian(&rhs, &state).unwrap();
            let fd = fd_jacobian(&rhs, &state, 1e-6);
            let diff = (&analytic - &fd).norm();
            let scale = analytic.norm().max(1.0);
            assert!(
                diff <= 1e-5 * scale,
                "{}: |J_an - J_fd| = {diff:.3e}, scale {scale:.3e}",
                model.family.name()
            );
        }
    }

    #[test]
    fn jacobian_rows_are_zero_at_constrained_nodes() {
        let (rhs, state) = rhs_for(ModelSpec::kdv(1.0, 0.4, 1e-4).unwrap(), 20, 0.05);
        let j = dense_jacobian(&rhs, &state).unwrap();
        for &r in rhs.zero_rows() {
            assert!(j.row(r).iter().all(|&v| v == 0.0));
        }
    }

    // ---- spectrum ---------------------------------------------------------------

    #[test]
    fn pure_decay_spectrum_sits_at_minus_one() {
        let j = -DMatrix::<f64>::identity(6, 6);
        let rep = spectrum_from_jacobian(&j, 1.0).unwrap();
        assert!(rep.all_stable);
        assert_eq!(rep.scaled_eigenvalues.len(), 6);
        for z in &rep.scaled_eigenvalues {
            assert!((z.re + 1.0).abs() < 1e-12 && z.im.abs() < 1e-12);
        }
        assert!((rep.max_stability_modulus - 0.375).abs() < 1e-12);
    }

    #[test]
    fn larger_steps_push_decay_out_of_the_region() {
        let j = -DMatrix::<f64>::identity(4, 4);
        let small = spectrum_from_jacobian(&j, 1.0).unwrap();
        let large = spectrum_from_jacobian(&j, 3.0).unwrap();
        assert!(small.all_stable);
        assert!(!large.all_stable);
        assert!(large.max_stability_modulus > small.max_stability_modulus);
        assert!((large.max_stability_modulus - 1.375).abs() < 1e-12);
    }

    #[test]
    fn verdict_is_invariant_under_node_reordering() {
        let (rhs, state) = rhs_for(ModelSpec::kdv(1.0, 0.4, 1e-4).unwrap(), 18, 0.05);
        let j = dense_jacobian(&rhs, &state).unwrap();
        let n = j.nrows();
        // cyclic permutation-similarity: same spectrum in a different basis
        let mut p = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            p[(i, (i + 5) % n)] = 1.0;
        }
        let permuted = &p * &j * p.transpose();
        let a = spectrum_from_jacobian(&j, 0.01).unwrap();
        let b = spectrum_from_jacobian(&permuted, 0.01).unwrap();
        assert_eq!(a.all_stable, b.all_stable);
        let scale = a.max_stability_modulus.max(1e-30);
        assert!((a.max_stability_modulus - b.max_stability_modulus).abs() / scale < 1e-8);
    }

    #[test]
    fn spectrum_csv_has_one_row_per_eigenvalue() {
        let j = -DMatrix::<f64>::identity(3, 3);
        let rep = spectrum_from_jacobian(&j, 1.0).unwrap();
        let mut buf = Vec::new();
        write_spectrum_csv(&rep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "re,im,modulus");
        assert_eq!(lines.len(), 4);
        for row in &lines[1..] {
            assert_eq!(row.split(',').count(), 3);
        }
    }

    #[test]
    fn oversized_jacobian_is_refused() {
        let (rhs, _) = rhs_for(ModelSpec::kdv(1.0, 0.0, 1e-4).unwrap(), 20, 0.05);
        let state = vec![0.0; 19];
        assert!(matches!(
            dense_jacobian(&rhs, &state),
            Err(Error::LengthMismatch { .. })
        ));
        let big = DMatrix::<f64>::zeros(2, 3);
        assert!(spectrum_from_jacobian(&big, 0.1).is_err());
    }

    // ---- periodicity ------------------------------------------------------------

    fn record_from_series(dt: f64, values: Vec<f64>) -> SimulationRecord {
        let times: Vec<f64> = (0..values.len()).map(|k| k as f64 * dt).collect();
        SimulationRecord {
            dt,
            times,
            probes: vec![ProbeSeries {
                requested_x: 0.0,
                node_index: 0,
                node_x: 0.0,
                values,
            }],
            snapshots: vec![],
            final_state: vec![],
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn exactly_periodic_series_has_zero_metric_and_zero_onset() {
        // build by literal repetition so the index shift is bit-exact
        let one_period: Vec<f64> =
            (0..100).map(|k| (20.0 * std::f64::consts::PI * k as f64 * 0.001).sin()).collect();
        let values: Vec<f64> = (0..2001).map(|k| one_period[k % 100]).collect();
        let rec = record_from_series(0.001, values);
        let rep = periodicity_report(&rec, 0.1, 1e-3).unwrap();
        let p = &rep.probes[0];
        assert!(p.metric_series.iter().all(|&(_, e)| e == 0.0));
        assert_eq!(p.onset_time, Some(0.0));
        assert_eq!(p.metric_series.len(), 2001 - 100);
    }

    #[test]
    fn constant_series_is_trivially_periodic() {
        let rec = record_from_series(0.01, vec![2.5; 300]);
        let rep = periodicity_report(&rec, 0.1, 1e-12).unwrap();
        assert!(rep.probes[0].metric_series.iter().all(|&(_, e)| e == 0.0));
        assert_eq!(rep.probes[0].onset_time, Some(0.0));
    }

    #[test]
    fn forcing_series_becomes_periodic_before_t_point_seven() {
        let g = |t: f64| (20.0 * std::f64::consts::PI * t).sin() * (5.0 * t).tanh();
        let values: Vec<f64> = (0..=2000).map(|k| g(k as f64 * 0.001)).collect();
        let rec = record_from_series(0.001, values);
        let rep = periodicity_report(&rec, 0.1, 1e-3).unwrap();
        let onset = rep.probes[0].onset_time.expect("onset attained");
        assert!(onset <= 0.7, "onset = {onset}");
        assert!(onset >= 0.5, "onset = {onset} suspiciously early");
        assert!(rep.probes[0].max_abs > 0.9);
    }

    #[test]
    fn growing_series_never_attains_periodicity() {
        let values: Vec<f64> = (0..500).map(|k| k as f64).collect();
        let rec = record_from_series(0.01, values);
        let rep = periodicity_report(&rec, 0.1, 1e-3).unwrap();
        assert_eq!(rep.probes[0].onset_time, None);
        assert!(rep.probes[0].metric_series.iter().all(|&(_, e)| (e - 10.0).abs() < 1e-12));
    }

    #[test]
    fn period_must_align_with_the_step() {
        let rec = record_from_series(0.003, vec![0.0; 400]);
        assert!(matches!(
            periodicity_report(&rec, 0.05, 1e-3),
            Err(Error::BadPeriod(_))
        ));
        assert!(matches!(
            periodicity_report(&rec, -0.1, 1e-3),
            Err(Error::BadPeriod(_))
        ));
    }

    #[test]
    fn record_shorter_than_one_period_is_rejected() {
        let rec = record_from_series(0.001, vec![0.0; 50]);
        assert!(matches!(
            periodicity_report(&rec, 0.1, 1e-3),
            Err(Error::RecordTooShort { .. })
        ));
    }
}
