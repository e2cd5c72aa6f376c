//! The chain of frame changes that reduces the driven n-level system to a
//! decoupled two-level sweep, and numerical checks of the bounds it relies on.
//!
//! Every operator here is built for one sampled system, one pulse and one
//! target pair `(p, q)`; levels are 0-based. The system is recentred so that
//! `lambda_p = -Delta/2` and `lambda_q = Delta/2`.

mod adiabatic;
mod basis;
mod cascade;
mod lemmas;
mod residuals;

pub use adiabatic::{
    decoupled_transfer, frame_unitaries, lambda_theta, rwa_hamiltonians, MixingAngle, RwaHamiltonians,
};
pub use basis::{basis_ab, IndexSet, PhaseFamily, Triple};
pub use cascade::{
    bch_transform, coefficient_matrices, h_coefficients, interaction_hamiltonian, x1_operator, x2_operator,
    BchExpansion, Coefficients, HCoefficients, SecondOrder,
};
pub use lemmas::{verify_lemmas, LemmaOptions, LemmaRow, LemmaTable};
pub use residuals::{
    integrate_residuals, residuals, x5_operator, QuadRule, ResidualIntegrals, ResidualKind, ResidualOptions, Residuals,
};

use crate::conditions::crossing_time;
use crate::control::ChirpedPulse;
use crate::error::{Error, Result};
use crate::model::SampledSystem;
use crate::quad::adaptive_simpson;

/// Cells of the cached primitive of `lambda_eps`.
const TILDE_CELLS: usize = 1024;
const HORIZON_SLACK: f64 = 1e-12;

/// Recentred system, pulse and target pair, with the cached primitive of the
/// dressed half-gap.
#[derive(Debug, Clone)]
pub struct FrameContext {
    sys: SampledSystem,
    family: PhaseFamily,
    p: usize,
    q: usize,
    delta: f64,
    delta_pq: f64,
    s_bar: f64,
    /// `int_0^{s_k} lambda_eps` at uniform slow-time knots.
    tilde_knots: Vec<f64>,
}

impl FrameContext {
    /// Fails unless the point system satisfies the hypotheses the eliminations
    /// need: a nonzero target coupling, the target gap inside `(v0, v1)` and
    /// no other divisor of the first two eliminations vanishing.
    pub fn new(sys: &SampledSystem, pulse: &ChirpedPulse, p: usize, q: usize) -> Result<Self> {
        let sys = sys.recenter(p, q)?;
        let delta = sys.gap(p, q);
        let delta_pq = sys.coupling()[(p, q)];
        if delta_pq == 0.0 {
            return Err(Error::Model { pair: (p, q), reason: "target coupling vanishes".into() });
        }
        if !(delta > pulse.v0() && delta < pulse.v1()) {
            return Err(Error::Hypothesis {
                j: p,
                k: q,
                sigma: 1,
                reason: format!("target gap {delta} is not inside ({}, {})", pulse.v0(), pulse.v1()),
            });
        }
        let family = PhaseFamily::new(sys.lambda().to_vec(), pulse.clone(), p, q)?;
        family.check_nonvanishing(IndexSet::IPrime)?;
        family.check_nonvanishing(IndexSet::JPrime)?;
        let s_bar = crossing_time(pulse, delta)?;
        let mut ctx = Self { sys, family, p, q, delta, delta_pq, s_bar, tilde_knots: Vec::new() };
        ctx.tilde_knots = ctx.build_tilde_knots();
        Ok(ctx)
    }

    /// Same system and pulse shape with different time scales.
    pub fn with_scales(&self, eps1: f64, eps2: f64) -> Result<Self> {
        let pulse = self.pulse().with_scales(eps1, eps2)?;
        Self::new(&self.sys, &pulse, self.p, self.q)
    }

    pub fn sys(&self) -> &SampledSystem {
        &self.sys
    }

    pub fn pulse(&self) -> &ChirpedPulse {
        self.family.pulse()
    }

    pub fn family(&self) -> &PhaseFamily {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// `Delta = lambda_q - lambda_p`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Coupling `delta_pq` of the target pair.
    pub fn coupling_pq(&self) -> f64 {
        self.delta_pq
    }

    /// Slow time at which `f` crosses `Delta`.
    pub fn crossing(&self) -> f64 {
        self.s_bar
    }

    pub fn horizon(&self) -> f64 {
        self.pulse().horizon()
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        let h = self.horizon();
        if !(t >= 0.0 && t <= h * (1.0 + HORIZON_SLACK)) {
            return Err(Error::domain(format!("t = {t} outside [0, {h}]")));
        }
        Ok(())
    }

    pub(crate) fn slow(&self, t: f64) -> f64 {
        (self.pulse().rate() * t).min(self.pulse().t_slow())
    }

    /// `lambda_eps(s) = sqrt((Delta - f)^2 / 4 + eps1^2 delta_pq^2 u^2)`.
    pub fn dressed_half_gap(&self, s: f64) -> f64 {
        let pulse = self.pulse();
        let d = self.delta - pulse.f(s);
        let w = pulse.eps1() * self.delta_pq * pulse.u(s);
        (0.25 * d * d + w * w).sqrt()
    }

    fn build_tilde_knots(&self) -> Vec<f64> {
        let t_slow = self.pulse().t_slow();
        let h = t_slow / TILDE_CELLS as f64;
        let lam = |s: f64| self.dressed_half_gap(s);
        let mut acc = 0.0;
        let mut knots = Vec::with_capacity(TILDE_CELLS + 1);
        knots.push(0.0);
        for k in 0..TILDE_CELLS {
            let a = k as f64 * h;
            acc += adaptive_simpson(&lam, a, a + h, 1e-14 * h);
            knots.push(acc);
        }
        knots
    }

    /// `tilde phi(t) = int_0^t lambda_eps(eps1 eps2 tau) dtau`.
    pub fn tilde_phase(&self, t: f64) -> f64 {
        let r = self.pulse().rate();
        let t_slow = self.pulse().t_slow();
        let s = (r * t).clamp(0.0, t_slow);
        let h = t_slow / TILDE_CELLS as f64;
        let k = ((s / h).floor() as usize).min(TILDE_CELLS - 1);
        let a = k as f64 * h;
        let partial = adaptive_simpson(&|x| self.dressed_half_gap(x), a, s, 1e-14 * h);
        (self.tilde_knots[k] + partial) / r
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::linalg::RMatrix;
    use crate::model::{four_level_coupling, sample_system, DeltaChoice, EnsembleSystem, Interval};

    /// The four-level benchmark at `alpha`, target pair (3, 4).
    pub fn four_level(alpha: f64, eps1: f64, eps2: f64) -> FrameContext {
        let ens = EnsembleSystem::four_level_benchmark(Interval::point(alpha)).unwrap();
        let sys = sample_system(&ens, &[alpha], &DeltaChoice::uniform(4, 0.0).unwrap()).unwrap();
        let pulse = ChirpedPulse::standard(3.0, 5.0, eps1, eps2).unwrap();
        assert_eq!(sys.coupling(), &four_level_coupling());
        FrameContext::new(&sys, &pulse, 2, 3).unwrap()
    }

    /// Three levels with every coupling nonzero, including the diagonal.
    pub fn dense_three(eps1: f64, eps2: f64) -> FrameContext {
        let coupling = RMatrix::from_row_slice(3, 3, &[0.7, 1.0, 0.4, 1.0, -0.5, 0.8, 0.4, 0.8, 0.3]);
        let sys = SampledSystem::new(vec![0.0, 4.0, 20.0], coupling).unwrap();
        let pulse = ChirpedPulse::standard(3.0, 5.0, eps1, eps2).unwrap();
        FrameContext::new(&sys, &pulse, 0, 1).unwrap()
    }

    /// Five levels placed so that every residual family has a stationary
    /// phase inside the sweep.
    pub fn stationary_five(eps1: f64, eps2: f64) -> FrameContext {
        let coupling = RMatrix::from_row_slice(
            5,
            5,
            &[
                0.5, 1.0, 0.8, 0.6, 0.4, //
                1.0, 0.3, 1.0, 0.7, 0.5, //
                0.8, 1.0, -0.4, 1.0, 0.6, //
                0.6, 0.7, 1.0, 0.2, 1.0, //
                0.4, 0.5, 0.6, 1.0, 0.3,
            ],
        );
        let sys = SampledSystem::new(vec![-4.0, -1.0, 1.0, 4.0, 7.0], coupling).unwrap();
        let pulse = ChirpedPulse::standard(0.5, 2.5, eps1, eps2).unwrap();
        FrameContext::new(&sys, &pulse, 1, 2).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::linalg::RMatrix;

    #[test]
    fn context_recentres_the_target_pair() {
        let ctx = four_level(-0.1, 0.1, 0.1);
        let lam = ctx.sys().lambda();
        assert!((lam[2] + 2.1).abs() < 1e-12 && (lam[3] - 2.1).abs() < 1e-12);
        assert!((ctx.delta() - 4.2).abs() < 1e-12);
        assert_eq!(ctx.coupling_pq(), 3.0);
        assert!((ctx.crossing() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn context_rejects_violating_points() {
        let ens_alpha = |a: f64| {
            let ens = crate::model::EnsembleSystem::four_level_benchmark(crate::model::Interval::point(a)).unwrap();
            crate::model::sample_system(&ens, &[a], &crate::model::DeltaChoice::uniform(4, 0.0).unwrap()).unwrap()
        };
        let pulse = ChirpedPulse::standard(3.0, 5.0, 0.1, 0.1).unwrap();
        // Target gap 5.2 outside (3, 5).
        assert!(matches!(FrameContext::new(&ens_alpha(-0.6), &pulse, 2, 3), Err(Error::Hypothesis { j: 2, k: 3, .. })));
        // gap(1,3) = 3.2 inside the window.
        assert!(matches!(
            FrameContext::new(&ens_alpha(0.1), &pulse, 2, 3),
            Err(Error::Hypothesis { j: 0, k: 2, sigma: 1, .. })
        ));
        let zero = SampledSystem::new(vec![0.0, 4.0], RMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(FrameContext::new(&zero, &pulse, 0, 1), Err(Error::Model { .. })));
    }

    #[test]
    fn tilde_phase_matches_direct_quadrature() {
        for eps in [1e-1, 1e-2, 1e-3] {
            let ctx = four_level(-0.1, eps, eps);
            let r = ctx.pulse().rate();
            for frac in [0.0, 0.13, 0.5999, 0.6, 0.61, 1.0] {
                let t = frac * ctx.horizon();
                let direct = adaptive_simpson(&|s| ctx.dressed_half_gap(s), 0.0, frac, 1e-15) / r;
                let got = ctx.tilde_phase(t);
                assert!((got - direct).abs() < 1e-6, "eps {eps} frac {frac}: {got} vs {direct}");
            }
        }
    }

    #[test]
    fn stationary_fixture_satisfies_the_hypotheses() {
        let ctx = stationary_five(0.1, 0.1);
        assert!((ctx.delta() - 2.0).abs() < 1e-12);
        assert_eq!(ctx.family().triples(IndexSet::K).len(), 3);
    }
}
