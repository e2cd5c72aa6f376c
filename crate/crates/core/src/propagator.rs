//! Exponential-midpoint integration of `i psi' = (diag(lambda) + omega(t) C) psi`.

use std::io::Write;
use std::path::Path;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::Control;
use crate::error::{Error, Result};
use crate::linalg::{c, cis, expm_hermitian, hermiticity_defect, CMatrix, CVector, RMatrix};
use crate::model::SampledSystem;

/// Norm drift above which a trajectory is flagged degraded.
pub const NORM_DRIFT_LIMIT: f64 = 1e-9;
/// Norm drift above which a warning is logged in addition to the flag.
pub const NORM_DRIFT_WARN: f64 = 1e-6;
const HERMITIAN_TOL: f64 = 1e-12;

/// Unit-norm state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(CVector);

impl StateVector {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_DRIFT_LIMIT {
            return Err(Error::argument(format!("state norm {norm} is not 1")));
        }
        Ok(Self(amplitudes))
    }

    /// Basis vector `e_j` (0-based).
    pub fn basis(n: usize, j: usize) -> Result<Self> {
        if j >= n {
            return Err(Error::argument(format!("level {} outside 1..={n}", j + 1)));
        }
        let mut v = CVector::zeros(n);
        v[j] = c(1.0);
        Ok(Self(v))
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn into_inner(self) -> CVector {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn population(&self, j: usize) -> f64 {
        self.0[j].norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

/// Sampled solution on a uniform slow-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub slow_times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub max_norm_drift: f64,
    pub degraded: bool,
    /// Fast-time step used.
    pub dt: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory has at least two samples")
    }

    /// Trajectory as CSV: `s`, real and imaginary part of each amplitude, norm.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let n = self.states.first().map_or(0, StateVector::n);
        let mut header = vec!["s".to_string()];
        for j in 1..=n {
            header.push(format!("re_{j}"));
            header.push(format!("im_{j}"));
        }
        header.push("norm".into());
        wr.write_record(&header)?;
        for (s, psi) in self.slow_times.iter().zip(&self.states) {
            let mut row = vec![s.to_string()];
            for z in psi.amplitudes().iter() {
                row.push(z.re.to_string());
                row.push(z.im.to_string());
            }
            row.push(psi.norm().to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Discretization controls for [`propagate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepConfig {
    pub steps_per_period: usize,
    pub n_samples: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self { steps_per_period: 50, n_samples: 2000 }
    }
}

/// `exp(-i dt H) psi`; `H` must be Hermitian to within `1e-12`.
pub fn step_unitary(h: &CMatrix, dt: f64, psi: &StateVector) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::argument(format!("time step must be positive (got {dt})")));
    }
    let defect = hermiticity_defect(h);
    if defect > HERMITIAN_TOL {
        return Err(Error::numeric(format!("Hamiltonian is not Hermitian (defect {defect:e})")));
    }
    Ok(StateVector(expm_hermitian(h, dt) * &psi.0))
}

/// Conservative bound on the fastest frequency in the dynamics.
pub fn frequency_bound(sys: &SampledSystem, ctrl: &dyn Control) -> f64 {
    let lam = sys.lambda();
    let drift = lam[0].abs().max(lam[lam.len() - 1].abs()).max(ctrl.max_frequency());
    drift + 2.0 * ctrl.amplitude_bound() * sys.max_abs_coupling()
}

/// Apply `exp(-i dt H)` for real symmetric `H` in place.
#[inline]
fn apply_real_symmetric(h: RMatrix, dt: f64, psi: &mut CVector, work: &mut CVector) {
    let eig = SymmetricEigen::new(h);
    let v = &eig.eigenvectors;
    let n = psi.len();
    for k in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            acc += psi[j] * v[(j, k)];
        }
        work[k] = acc * cis(-dt * eig.eigenvalues[k]);
    }
    for j in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            acc += work[k] * v[(j, k)];
        }
        psi[j] = acc;
    }
}

/// Number of steps for a target step size, rounded up to a multiple of the
/// number of sampling intervals so that every sample lands on a step.
fn step_count(horizon: f64, dt_target: f64, intervals: usize) -> usize {
    let per = (horizon / dt_target / intervals as f64).ceil().max(1.0) as usize;
    per * intervals
}

fn midpoint_run(
    sys: &SampledSystem,
    ctrl: &dyn Control,
    psi0: &CVector,
    steps: usize,
    intervals: usize,
    mut on_sample: impl FnMut(usize, &CVector),
) -> Result<f64> {
    let horizon = ctrl.horizon();
    let dt = horizon / steps as f64;
    let per = steps / intervals;
    let mut psi = psi0.clone();
    let mut work = CVector::zeros(psi.len());
    let mut drift = 0.0f64;
    on_sample(0, &psi);
    for k in 0..steps {
        let t_mid = ((k as f64 + 0.5) * dt).min(horizon);
        let omega = ctrl.omega(t_mid)?;
        apply_real_symmetric(sys.real_hamiltonian_at(omega), dt, &mut psi, &mut work);
        drift = drift.max((psi.norm() - 1.0).abs());
        if (k + 1) % per == 0 {
            on_sample((k + 1) / per, &psi);
        }
    }
    Ok(drift)
}

/// Integrate from `psi0` over the full horizon of `ctrl`.
pub fn propagate(sys: &SampledSystem, ctrl: &dyn Control, psi0: &StateVector, cfg: StepConfig) -> Result<Trajectory> {
    if cfg.steps_per_period == 0 {
        return Err(Error::argument("steps_per_period must be positive"));
    }
    if cfg.n_samples < 2 {
        return Err(Error::argument("need at least two samples (start and end)"));
    }
    if psi0.n() != sys.n() {
        return Err(Error::argument(format!("state has {} levels, system has {}", psi0.n(), sys.n())));
    }
    let horizon = ctrl.horizon();
    let dt_target = 2.0 * std::f64::consts::PI / (frequency_bound(sys, ctrl) * cfg.steps_per_period as f64);
    if dt_target > horizon {
        return Err(Error::argument(format!("time step {dt_target} exceeds horizon {horizon}")));
    }
    let intervals = cfg.n_samples - 1;
    let steps = step_count(horizon, dt_target, intervals);
    let rate = ctrl.rate();
    let mut states = Vec::with_capacity(cfg.n_samples);
    let max_norm_drift =
        midpoint_run(sys, ctrl, psi0.amplitudes(), steps, intervals, |_, psi| states.push(StateVector(psi.clone())))?;
    let slow_times = (0..cfg.n_samples).map(|i| rate * horizon * i as f64 / intervals as f64).collect();
    let degraded = max_norm_drift > NORM_DRIFT_LIMIT;
    if max_norm_drift > NORM_DRIFT_WARN {
        log::warn!("norm drift {max_norm_drift:e} exceeds {NORM_DRIFT_WARN:e}; trajectory degraded");
    }
    Ok(Trajectory { slow_times, states, max_norm_drift, degraded, dt: horizon / steps as f64, steps })
}

/// Final state of the midpoint rule with exactly `steps` uniform steps.
pub fn propagate_steps(
    sys: &SampledSystem,
    ctrl: &dyn Control,
    psi0: &StateVector,
    steps: usize,
) -> Result<StateVector> {
    if steps == 0 {
        return Err(Error::argument("need at least one step"));
    }
    let mut last = psi0.amplitudes().clone();
    midpoint_run(sys, ctrl, psi0.amplitudes(), steps, 1, |i, psi| {
        if i == 1 {
            last = psi.clone();
        }
    })?;
    Ok(StateVector(last))
}

/// Midpoint integration of an arbitrary Hermitian `H(t)` on `[t0, t1]`.
pub fn integrate<F>(h: F, t0: f64, t1: f64, steps: usize, psi0: &CVector) -> CVector
where
    F: Fn(f64) -> CMatrix,
{
    let dt = (t1 - t0) / steps as f64;
    let mut psi = psi0.clone();
    for k in 0..steps {
        let t = t0 + (k as f64 + 0.5) * dt;
        psi = expm_hermitian(&h(t), dt) * psi;
    }
    psi
}

/// `|<psi(s), e_q>|^2` at every stored sample.
pub fn fidelity(traj: &Trajectory, q: usize) -> Vec<f64> {
    traj.states.iter().map(|psi| psi.population(q)).collect()
}

/// `min_theta || psi - e^{i theta} e_q || = sqrt(2 - 2 |psi_q|)`.
pub fn distance_to_target(psi: &StateVector, q: usize) -> f64 {
    (2.0 - 2.0 * psi.amplitudes()[q].norm()).max(0.0).sqrt()
}

/// Step-doubling Romberg extrapolation of the midpoint rule, whose global
/// error expands in even powers of the step.
///
/// Stops once two successive diagonal entries of the tableau agree to `tol`.
pub fn reference_propagate(
    sys: &SampledSystem,
    ctrl: &dyn Control,
    psi0: &StateVector,
    tol: f64,
) -> Result<StateVector> {
    const MAX_LEVELS: usize = 14;
    const MAX_STEPS: usize = 1 << 26;
    let horizon = ctrl.horizon();
    let nu = frequency_bound(sys, ctrl);
    let mut steps = ((horizon * nu / (2.0 * std::f64::consts::PI)) * 8.0).ceil().max(16.0) as usize;
    let mut rows: Vec<Vec<CVector>> = Vec::new();
    for level in 0..MAX_LEVELS {
        if steps > MAX_STEPS {
            break;
        }
        let base = propagate_steps(sys, ctrl, psi0, steps)?.into_inner();
        let mut row = vec![base];
        for j in 1..=level {
            let factor = 4f64.powi(j as i32) - 1.0;
            let prev = &rows[level - 1][j - 1];
            let cur = &row[j - 1];
            let next = cur + (cur - prev) / c(factor);
            row.push(next);
        }
        if level > 0 {
            let diff = (&row[level] - &rows[level - 1][level - 1]).norm();
            if diff <= tol {
                let best = row.pop().unwrap();
                let norm = best.norm();
                return Ok(StateVector(best / c(norm)));
            }
        }
        rows.push(row);
        steps *= 2;
    }
    Err(Error::numeric(format!("reference integration did not reach tolerance {tol:e} within the step budget")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ChirpedPulse;
    use crate::linalg::{zeros, I};
    use proptest::prelude::*;

    /// Control with a frozen constant value, for exact comparisons.
    struct Constant {
        value: f64,
        horizon: f64,
    }

    impl Control for Constant {
        fn horizon(&self) -> f64 {
            self.horizon
        }
        fn omega(&self, _t: f64) -> Result<f64> {
            Ok(self.value)
        }
        fn max_frequency(&self) -> f64 {
            1.0
        }
        fn amplitude_bound(&self) -> f64 {
            self.value.abs() / 2.0
        }
        fn rate(&self) -> f64 {
            1.0 / self.horizon
        }
        fn breakpoints(&self) -> Vec<f64> {
            vec![0.0, self.horizon]
        }
    }

    fn two_level() -> SampledSystem {
        SampledSystem::new(vec![-1.0, 1.0], RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap()
    }

    #[test]
    fn step_unitary_examples() {
        let psi = StateVector::basis(2, 0).unwrap();
        assert_eq!(step_unitary(&zeros(2), 0.3, &psi).unwrap(), psi);

        let sx = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]).map(c);
        let out = step_unitary(&sx, std::f64::consts::FRAC_PI_2, &psi).unwrap();
        assert!(out.amplitudes()[0].norm() < 1e-15);
        assert!((out.amplitudes()[1] - (-I)).norm() < 1e-15);

        let mut d = zeros(3);
        for j in 0..3 {
            d[(j, j)] = c(j as f64 * 1.7);
        }
        let v = CVector::from_vec(vec![c(0.6), Complex64::new(0.0, 0.48), c(0.64)]);
        let psi3 = StateVector::new(v).unwrap();
        let out = step_unitary(&d, 2.3, &psi3).unwrap();
        for j in 0..3 {
            assert!((out.population(j) - psi3.population(j)).abs() < 1e-15);
        }

        let mut bad = sx.clone();
        bad[(0, 1)] = c(1.0 + 1e-9);
        assert!(matches!(step_unitary(&bad, 0.1, &psi), Err(Error::Numeric(_))));
        assert!(step_unitary(&sx, 0.0, &psi).is_err());
    }

    #[test]
    fn zero_coupling_conserves_populations() {
        let sys = SampledSystem::new(vec![0.0, 0.9, 2.8, 7.0], RMatrix::zeros(4, 4)).unwrap();
        let pulse = ChirpedPulse::standard(3.0, 5.0, 0.1, 0.1).unwrap();
        let v = CVector::from_vec(vec![c(0.5), Complex64::new(0.5, 0.0), c(0.5), Complex64::new(0.0, 0.5)]);
        let psi0 = StateVector::new(v).unwrap();
        let traj = propagate(&sys, &pulse, &psi0, StepConfig { steps_per_period: 20, n_samples: 11 }).unwrap();
        assert_eq!(traj.states.len(), 11);
        assert!((traj.slow_times[10] - 1.0).abs() < 1e-12);
        for psi in &traj.states {
            for j in 0..4 {
                assert!((psi.population(j) - 0.25).abs() < 1e-12);
            }
        }
        assert!(!traj.degraded);
    }

    #[test]
    fn constant_hamiltonian_matches_exact_exponential() {
        let sys = two_level();
        let ctrl = Constant { value: 0.7, horizon: 13.0 };
        let psi0 = StateVector::basis(2, 0).unwrap();
        let traj = propagate(&sys, &ctrl, &psi0, StepConfig { steps_per_period: 10, n_samples: 3 }).unwrap();
        let exact = expm_hermitian(&sys.hamiltonian_at(0.7), 13.0) * psi0.amplitudes();
        assert!((traj.final_state().amplitudes() - &exact).norm() < 1e-10);
        let r = reference_propagate(&sys, &ctrl, &psi0, 1e-12).unwrap();
        assert!((r.amplitudes() - &exact).norm() < 1e-10);
    }

    #[test]
    fn reference_matches_resonant_rabi_solution() {
        // Constant detuned drive: exact two-level Rabi formula.
        let g = 0.3;
        let sys = SampledSystem::new(vec![-0.5, 0.5], RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let ctrl = Constant { value: g, horizon: 20.0 };
        let psi0 = StateVector::basis(2, 0).unwrap();
        // Exact Rabi formula for H = [[-1/2, g], [g, 1/2]].
        let w = (0.25 + g * g).sqrt();
        let t = 20.0;
        let p_exc = (g / w).powi(2) * (w * t).sin().powi(2);
        let r = reference_propagate(&sys, &ctrl, &psi0, 1e-12).unwrap();
        assert!((r.population(1) - p_exc).abs() < 1e-10);
    }

    #[test]
    fn distance_examples() {
        let e = StateVector::basis(3, 2).unwrap();
        assert_eq!(distance_to_target(&e, 2), 0.0);
        assert!((distance_to_target(&e, 0) - 2f64.sqrt()).abs() < 1e-15);
        let v = CVector::from_vec(vec![c(0.6), Complex64::new(0.0, 0.8)]);
        let psi = StateVector::new(v).unwrap();
        let d = distance_to_target(&psi, 1);
        assert!((d - 0.4f64.sqrt()).abs() < 1e-12);
        // Brute-force minimization over 10^4 phases.
        let brute = (0..10_000)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 10_000.0;
                let mut target = CVector::zeros(2);
                target[1] = cis(th);
                (psi.amplitudes() - target).norm()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((brute - d).abs() < 1e-6);
    }

    #[test]
    fn fidelity_examples() {
        let traj = Trajectory {
            slow_times: vec![0.0, 1.0],
            states: vec![StateVector::basis(2, 1).unwrap(), StateVector::basis(2, 0).unwrap()],
            max_norm_drift: 0.0,
            degraded: false,
            dt: 1.0,
            steps: 1,
        };
        assert_eq!(fidelity(&traj, 1), vec![1.0, 0.0]);
        let psi = StateVector::new(CVector::from_vec(vec![c(0.6), c(0.8)])).unwrap();
        assert!((psi.population(1) - 0.64).abs() < 1e-15);
    }

    #[test]
    fn second_order_convergence_on_short_horizon() {
        let sys = SampledSystem::new(
            vec![0.0, 1.3, 3.1],
            RMatrix::from_row_slice(3, 3, &[0.2, 1.0, 0.5, 1.0, -0.3, 1.5, 0.5, 1.5, 0.1]),
        )
        .unwrap();
        let pulse = ChirpedPulse::standard(1.0, 1.6, 0.3, 0.3).unwrap();
        let psi0 = StateVector::basis(3, 0).unwrap();
        let reference = reference_propagate(&sys, &pulse, &psi0, 1e-12).unwrap();
        let e1 = propagate_steps(&sys, &pulse, &psi0, 400).unwrap().distance(&reference);
        let e2 = propagate_steps(&sys, &pulse, &psi0, 800).unwrap().distance(&reference);
        let ratio = e1 / e2;
        assert!(ratio > 4.0 / 3.0 && ratio < 12.0, "ratio {ratio}");
    }

    #[test]
    fn csv_has_expected_columns() {
        let sys = two_level();
        let ctrl = Constant { value: 0.1, horizon: 1.0 };
        let traj = propagate(
            &sys,
            &ctrl,
            &StateVector::basis(2, 0).unwrap(),
            StepConfig { steps_per_period: 10, n_samples: 5 },
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "s,re_1,im_1,re_2,im_2,norm");
        assert_eq!(lines.count(), 5);
    }

    #[test]
    fn rejects_degenerate_arguments() {
        let sys = two_level();
        let ctrl = Constant { value: 0.1, horizon: 1e-3 };
        let psi = StateVector::basis(2, 0).unwrap();
        assert!(propagate(&sys, &ctrl, &psi, StepConfig { steps_per_period: 1, n_samples: 2 }).is_err());
        assert!(propagate(&sys, &ctrl, &psi, StepConfig { steps_per_period: 50, n_samples: 1 }).is_err());
        assert!(StateVector::new(CVector::from_vec(vec![c(1.0), c(1.0)])).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn norm_is_preserved(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=5);
            let mut lam: Vec<f64> = (0..n).map(|j| j as f64 * 1.1 + rng.gen_range(0.0..1.0)).collect();
            lam.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut cpl = RMatrix::zeros(n, n);
            for j in 0..n {
                for k in j..n {
                    let x = rng.gen_range(-1.0..1.0);
                    cpl[(j, k)] = x;
                    cpl[(k, j)] = x;
                }
            }
            let sys = SampledSystem::new(lam, cpl).unwrap();
            let pulse = ChirpedPulse::standard(0.5, 2.0, 0.2, 0.2).unwrap();
            let traj = propagate(&sys, &pulse, &StateVector::basis(n, 0).unwrap(), StepConfig { steps_per_period: 20, n_samples: 5 }).unwrap();
            prop_assert!(traj.max_norm_drift <= NORM_DRIFT_LIMIT);
        }

        #[test]
        fn distance_closed_form_matches_phase_search(a in 0.0..1.0f64, phase in 0.0..std::f64::consts::TAU) {
            let b = (1.0 - a * a).sqrt();
            let psi = StateVector::new(CVector::from_vec(vec![c(b), cis(phase) * a])).unwrap();
            let d = distance_to_target(&psi, 1);
            let f = |th: f64| {
                let mut t = CVector::zeros(2);
                t[1] = cis(th);
                (psi.amplitudes() - t).norm()
            };
            let brute = (0..4000).map(|k| f(2.0 * std::f64::consts::PI * k as f64 / 4000.0)).fold(f64::INFINITY, f64::min);
            let refined = f(phase);
            prop_assert!((refined - d).abs() < 1e-8);
            prop_assert!(brute >= d - 1e-12);
        }
    }
}
