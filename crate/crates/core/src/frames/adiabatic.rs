//! Mixing angle of the resonant pair, the two frame rotations that follow the
//! eliminations, and the truncated Hamiltonians.

use std::cell::RefCell;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, cis, identity, zeros, CMatrix, CVector};
use crate::propagator::integrate;

use super::basis::{add_a, add_b, Triple};
use super::cascade::h_coefficients;
use super::FrameContext;

/// `lambda_eps`, `theta_eps` and their slow-time derivatives at one `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingAngle {
    pub lambda: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub lambda_dot: f64,
}

/// `theta = sgn(delta_pq) arccos((Delta - f) / (2 lambda))` with
/// `theta' = delta_pq eps1 ((Delta - f) u' + f' u) / (2 lambda^2)`.
pub fn lambda_theta(ctx: &FrameContext, s: f64) -> Result<MixingAngle> {
    let pulse = ctx.pulse();
    if !(0.0..=pulse.t_slow()).contains(&s) {
        return Err(Error::domain(format!("s = {s} outside [0, {}]", pulse.t_slow())));
    }
    let lambda = ctx.dressed_half_gap(s);
    if lambda == 0.0 {
        return Err(Error::Singularity(format!("dressed gap vanishes at s = {s}")));
    }
    let d = ctx.delta() - pulse.f(s);
    let (u, du, df) = (pulse.u(s), pulse.u_dot(s), pulse.f_dot(s));
    let (e1, dpq) = (pulse.eps1(), ctx.coupling_pq());
    let theta = dpq.signum() * (d / (2.0 * lambda)).clamp(-1.0, 1.0).acos();
    let theta_dot = dpq * e1 * (d * du + df * u) / (2.0 * lambda * lambda);
    let lambda_dot = (-0.5 * d * df + 2.0 * e1 * e1 * dpq * dpq * u * du) / (2.0 * lambda);
    Ok(MixingAngle { lambda, theta, theta_dot, lambda_dot })
}

/// `cos(theta/2)`, `sin(theta/2)` and `tilde phi` at fast time `t`.
pub(crate) fn rotation_at(ctx: &FrameContext, t: f64) -> Result<(f64, f64, f64)> {
    let m = lambda_theta(ctx, ctx.slow(t))?;
    let (s, c) = (0.5 * m.theta).sin_cos();
    Ok((c, s, ctx.tilde_phase(t)))
}

/// `U3(t)` and `U4(t)`.
///
/// `U3 = diag(.., e^{i chi/2}, .., e^{-i chi/2}, ..)` on `(p, q)` with
/// `chi = Delta t - phi(t)`; `U4` rotates the pair by `theta/2` and dresses it
/// with `e^{-+i tilde phi}`. Both are the identity elsewhere.
pub fn frame_unitaries(ctx: &FrameContext, t: f64) -> Result<(CMatrix, CMatrix)> {
    ctx.check_time(t)?;
    let (p, q) = (ctx.p(), ctx.q());
    let chi = ctx.delta() * t - ctx.pulse().phase_unchecked(t);
    let mut u3 = identity(ctx.n());
    u3[(p, p)] = cis(0.5 * chi);
    u3[(q, q)] = cis(-0.5 * chi);
    let (cs, sn, tilde) = rotation_at(ctx, t)?;
    let mut u4 = identity(ctx.n());
    u4[(p, p)] = cis(-tilde) * cs;
    u4[(p, q)] = cis(-tilde) * (-sn);
    u4[(q, p)] = cis(tilde) * sn;
    u4[(q, q)] = cis(tilde) * cs;
    Ok((u3, u4))
}

/// The truncated Hamiltonian in the adiabatic frame, the same truncation
/// pulled back to the interaction frame, and its `(p, q)` block.
#[derive(Debug, Clone)]
pub struct RwaHamiltonians {
    /// `-(eps1 eps2 / 2) theta' B_pq(-2 tilde phi) + eps1^2 U4 diag(h0) U4^dag`.
    pub truncated: CMatrix,
    /// 2x2 block of [`back`](Self::back) on `span(e_p, e_q)`.
    pub decoupled: CMatrix,
    /// `eps1 delta_pq u A_pq(phi^1_pq) + eps1^2 diag(h0)`.
    pub back: CMatrix,
}

pub fn rwa_hamiltonians(ctx: &FrameContext, t: f64) -> Result<RwaHamiltonians> {
    ctx.check_time(t)?;
    let pulse = ctx.pulse();
    let (p, q) = (ctx.p(), ctx.q());
    let (e1, e2) = (pulse.eps1(), pulse.eps2());
    let s = ctx.slow(t);
    let h0 = h_coefficients(ctx, s).zero;
    let n = ctx.n();

    let mut back = zeros(n);
    let resonant = ctx.family().phase(Triple::new(p, q, 1), t);
    add_a(&mut back, p, q, resonant, e1 * ctx.coupling_pq() * pulse.u(s));
    for j in 0..n {
        back[(j, j)] += c(e1 * e1 * h0[(j, j)]);
    }
    let decoupled = CMatrix::from_fn(2, 2, |a, b| back[([p, q][a], [p, q][b])]);

    let m = lambda_theta(ctx, s)?;
    let (_, u4) = frame_unitaries(ctx, t)?;
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(n, (0..n).map(|j| c(e1 * e1 * h0[(j, j)]))));
    let mut truncated = &u4 * diag * u4.adjoint();
    add_b(&mut truncated, p, q, -2.0 * ctx.tilde_phase(t), -0.5 * e1 * e2 * m.theta_dot);
    Ok(RwaHamiltonians { truncated, decoupled, back })
}

/// Phase-invariant distance to `e_q` reached by the decoupled block started
/// from `e_p`, integrated with the exponential midpoint rule.
pub fn decoupled_transfer(ctx: &FrameContext, steps_per_period: usize) -> Result<f64> {
    if steps_per_period == 0 {
        return Err(Error::argument("steps_per_period must be positive"));
    }
    let pulse = ctx.pulse();
    let detune = (pulse.v0() - ctx.delta()).abs().max((pulse.v1() - ctx.delta()).abs());
    let nu = detune + pulse.eps1() * ctx.coupling_pq().abs() * pulse.max_envelope() + pulse.eps1().powi(2);
    let horizon = ctx.horizon();
    let steps = (horizon * nu * steps_per_period as f64 / (2.0 * std::f64::consts::PI)).ceil() as usize;
    let mut psi0 = CVector::zeros(2);
    psi0[0] = c(1.0);
    let failure = RefCell::new(None);
    let psi = integrate(
        |t| match rwa_hamiltonians(ctx, t.min(horizon)) {
            Ok(h) => h.decoupled,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                zeros(2)
            }
        },
        0.0,
        horizon,
        steps.max(1),
        &psi0,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok((2.0 - 2.0 * psi[1].norm()).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::linalg::{hermiticity_defect, max_abs_diff, op_norm, unitarity_defect, I};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn mixing_angle_endpoints_and_crossing() {
        let ctx = four_level(-0.1, 0.01, 0.01);
        let start = lambda_theta(&ctx, 0.0).unwrap();
        assert!(start.theta.abs() < 1e-15);
        let end = lambda_theta(&ctx, 1.0).unwrap();
        assert!((end.theta - PI).abs() < 1e-15);
        let mid = lambda_theta(&ctx, ctx.crossing()).unwrap();
        let u = ctx.pulse().u(ctx.crossing());
        assert!((mid.lambda - 0.01 * 3.0 * u).abs() < 1e-15);
        assert!((mid.theta - PI / 2.0).abs() < 1e-12);
        assert!(lambda_theta(&ctx, 1.5).is_err());
    }

    #[test]
    fn mixing_angle_follows_the_coupling_sign() {
        let coupling = crate::linalg::RMatrix::from_row_slice(2, 2, &[0.0, -2.0, -2.0, 0.0]);
        let sys = crate::model::SampledSystem::new(vec![0.0, 4.0], coupling).unwrap();
        let pulse = crate::control::ChirpedPulse::standard(3.0, 5.0, 0.05, 0.05).unwrap();
        let ctx = FrameContext::new(&sys, &pulse, 0, 1).unwrap();
        assert!((lambda_theta(&ctx, 1.0).unwrap().theta + PI).abs() < 1e-15);
        assert!(lambda_theta(&ctx, 0.5).unwrap().theta_dot < 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let ctx = four_level(-0.1, 0.05, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for _ in 0..50 {
            let s = rng.gen_range(0.01..0.99);
            let m = lambda_theta(&ctx, s).unwrap();
            let p = lambda_theta(&ctx, s + h).unwrap();
            let n = lambda_theta(&ctx, s - h).unwrap();
            let dth = (p.theta - n.theta) / (2.0 * h);
            let dl = (p.lambda - n.lambda) / (2.0 * h);
            assert!((dth - m.theta_dot).abs() <= 1e-6 * m.theta_dot.abs().max(1e-3));
            assert!((dl - m.lambda_dot).abs() <= 1e-6 * m.lambda_dot.abs().max(1e-3));
            assert!(m.lambda >= 0.05 * 3.0 * ctx.pulse().u(s) - 1e-15);
        }
    }

    #[test]
    fn frame_unitaries_start_at_identity() {
        let ctx = four_level(-0.1, 0.1, 0.1);
        let (u3, u4) = frame_unitaries(&ctx, 0.0).unwrap();
        assert!(max_abs_diff(&u3, &identity(4)) < 1e-15);
        assert!(max_abs_diff(&u4, &identity(4)) < 1e-15);
    }

    /// `U (H) U^dag + i U' U^dag` with a central difference for `U'`.
    fn gauge(u: impl Fn(f64) -> CMatrix, h: &CMatrix, t: f64) -> CMatrix {
        let step = 1e-4;
        let du = (u(t + step) - u(t - step)) / c(2.0 * step);
        let ut = u(t);
        &ut * h * ut.adjoint() + du * ut.adjoint() * I
    }

    #[test]
    fn rotations_carry_the_pulled_back_truncation_to_the_adiabatic_frame() {
        let ctx = dense_three(0.1, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let t = rng.gen_range(1.0..ctx.horizon() - 1.0);
            let back = rwa_hamiltonians(&ctx, t).unwrap().back;
            let h3 = gauge(|t| frame_unitaries(&ctx, t).unwrap().0, &back, t);
            let h4 = gauge(|t| frame_unitaries(&ctx, t).unwrap().1, &h3, t);
            let want = rwa_hamiltonians(&ctx, t).unwrap().truncated;
            assert!(max_abs_diff(&h4, &want) < 1e-6, "{}", max_abs_diff(&h4, &want));
        }
    }

    #[test]
    fn truncation_at_start_is_the_angle_term_only() {
        let ctx = four_level(-0.1, 0.1, 0.1);
        let r = rwa_hamiltonians(&ctx, 0.0).unwrap();
        let m = lambda_theta(&ctx, 0.0).unwrap();
        let mut want = zeros(4);
        add_b(&mut want, 2, 3, 0.0, -0.5 * 0.01 * m.theta_dot);
        assert!(max_abs_diff(&r.truncated, &want) < 1e-15);
    }

    #[test]
    fn pulled_back_truncation_only_couples_the_target_pair() {
        let ctx = dense_three(0.1, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let t = rng.gen_range(0.0..ctx.horizon());
            let back = rwa_hamiltonians(&ctx, t).unwrap().back;
            for j in 0..3 {
                for k in 0..3 {
                    if j != k && !matches!((j, k), (0, 1) | (1, 0)) {
                        assert_eq!(back[(j, k)].norm(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn decoupled_block_reproduces_the_full_truncation() {
        let ctx = dense_three(0.2, 0.2);
        let horizon = ctx.horizon();
        let steps = 4000;
        let mut e_p = CVector::zeros(3);
        e_p[0] = c(1.0);
        let full = integrate(|t| rwa_hamiltonians(&ctx, t).unwrap().back, 0.0, horizon, steps, &e_p);
        let mut e2 = CVector::zeros(2);
        e2[0] = c(1.0);
        let block = integrate(|t| rwa_hamiltonians(&ctx, t).unwrap().decoupled, 0.0, horizon, steps, &e2);
        assert!((full[0] - block[0]).norm() < 1e-10);
        assert!((full[1] - block[1]).norm() < 1e-10);
        assert!(full[2].norm() < 1e-12);
    }

    #[test]
    fn decoupled_sweep_inverts_the_pair() {
        let ctx = four_level(-0.1, 0.05, 0.005);
        assert!(decoupled_transfer(&ctx, 20).unwrap() < 0.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn frame_operators_are_unitary_and_hermitian(frac in 0.0f64..1.0) {
            let ctx = dense_three(0.1, 0.1);
            let t = frac * ctx.horizon();
            let (u3, u4) = frame_unitaries(&ctx, t).unwrap();
            prop_assert!(unitarity_defect(&u3) < 1e-12);
            prop_assert!(unitarity_defect(&u4) < 1e-12);
            let det = u4[(0, 0)] * u4[(1, 1)] - u4[(0, 1)] * u4[(1, 0)];
            prop_assert!((det - c(1.0)).norm() < 1e-12);
            let r = rwa_hamiltonians(&ctx, t).unwrap();
            prop_assert!(hermiticity_defect(&r.truncated) < 1e-12);
            prop_assert!(hermiticity_defect(&r.back) < 1e-12);
            prop_assert!(op_norm(&r.decoupled) <= op_norm(&r.back) + 1e-12);
        }
    }
}
