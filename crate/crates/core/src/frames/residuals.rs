//! Second-order couplings left over after the frame rotations, and their
//! running time integrals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_norm, zeros, CMatrix, RMatrix};

use super::adiabatic::{lambda_theta, MixingAngle};
use super::basis::{add_a, IndexSet};
use super::cascade::h_plus2;
use super::FrameContext;

/// The four residual families at one time.
#[derive(Debug, Clone)]
pub struct Residuals {
    /// Pairs away from the target.
    pub r: CMatrix,
    /// The target pair itself.
    pub r_pq: CMatrix,
    /// Couplings into level `p`.
    pub r_p: CMatrix,
    /// Couplings into level `q`.
    pub r_q: CMatrix,
}

impl Residuals {
    pub fn sum(&self) -> CMatrix {
        &self.r + &self.r_pq + &self.r_p + &self.r_q
    }

    fn from_array([r, r_pq, r_p, r_q]: [CMatrix; 4]) -> Self {
        Self { r, r_pq, r_p, r_q }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ResidualKind {
    R,
    Pq,
    P,
    Q,
}

impl ResidualKind {
    pub const ALL: [Self; 4] = [Self::R, Self::Pq, Self::P, Self::Q];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::R => "r",
            Self::Pq => "r_pq",
            Self::P => "r_p",
            Self::Q => "r_q",
        }
    }
}

/// Everything the assembly needs at one time.
struct Sample {
    t: f64,
    phi: f64,
    tilde: f64,
    h2: RMatrix,
    /// `cos(theta/2)`, `sin(theta/2)`.
    half: (f64, f64),
    lambda: f64,
    lambda_dot: f64,
}

fn sample(ctx: &FrameContext, t: f64, tilde: f64, m: MixingAngle) -> Sample {
    let s = ctx.slow(t);
    let (sn, cs) = (0.5 * m.theta).sin_cos();
    Sample {
        t,
        phi: ctx.pulse().phase_unchecked(t),
        tilde,
        h2: h_plus2(ctx, s),
        half: (cs, sn),
        lambda: m.lambda,
        lambda_dot: m.lambda_dot,
    }
}

/// `out[kind] += w * residual_kind(t)`.
fn accumulate(ctx: &FrameContext, away: &[(usize, usize)], x: &Sample, w: f64, out: &mut [CMatrix; 4]) {
    let lam = ctx.sys().lambda();
    let (p, q) = (ctx.p(), ctx.q());
    let (t, phi, tl) = (x.t, x.phi, x.tilde);
    let h = &x.h2;
    let (cs, sn) = x.half;
    let [r, rpq, rp, rq] = out;

    for &(j, k) in away {
        add_a(r, j, k, (lam[j] - lam[k]) * t + 2.0 * phi, w * h[(j, k)]);
    }

    let hpq = w * h[(p, q)];
    let sin_theta = 2.0 * sn * cs;
    add_a(rpq, p, p, phi, -sin_theta * hpq);
    add_a(rpq, q, q, phi, sin_theta * hpq);
    add_a(rpq, p, q, -2.0 * tl + phi, cs * cs * hpq);
    add_a(rpq, p, q, -2.0 * tl - phi, -sn * sn * hpq);

    for j in (0..ctx.n()).filter(|&j| j != p && j != q) {
        let lt = lam[j] * t;
        if j < p {
            add_a(rp, j, p, lt + tl + 2.5 * phi, w * cs * h[(j, p)]);
            add_a(rp, j, p, lt + tl + 1.5 * phi, -w * sn * h[(j, q)]);
            add_a(rq, j, q, lt - tl + 2.5 * phi, w * sn * h[(j, p)]);
            add_a(rq, j, q, lt - tl + 1.5 * phi, w * cs * h[(j, q)]);
        } else if j < q {
            add_a(rp, p, j, -tl - lt + 1.5 * phi, w * cs * h[(p, j)]);
            add_a(rp, p, j, -tl - lt - 1.5 * phi, -w * sn * h[(j, q)]);
            add_a(rq, j, q, lt - tl - 1.5 * phi, w * sn * h[(p, j)]);
            add_a(rq, j, q, lt - tl + 1.5 * phi, w * cs * h[(j, q)]);
        } else {
            add_a(rp, p, j, -tl - lt + 1.5 * phi, w * cs * h[(p, j)]);
            add_a(rp, p, j, -tl - lt + 2.5 * phi, -w * sn * h[(q, j)]);
            add_a(rq, q, j, tl - lt + 1.5 * phi, w * sn * h[(p, j)]);
            add_a(rq, q, j, tl - lt + 2.5 * phi, w * cs * h[(q, j)]);
        }
    }
}

fn away_pairs(ctx: &FrameContext) -> Vec<(usize, usize)> {
    ctx.family().triples(IndexSet::K).into_iter().map(|tr| (tr.j, tr.k)).collect()
}

fn zero_set(n: usize) -> [CMatrix; 4] {
    std::array::from_fn(|_| zeros(n))
}

/// `R`, `R~_pq`, `R~_p` and `R~_q` at fast time `t`.
pub fn residuals(ctx: &FrameContext, t: f64) -> Result<Residuals> {
    ctx.check_time(t)?;
    let x = sample(ctx, t, ctx.tilde_phase(t), lambda_theta(ctx, ctx.slow(t))?);
    let mut out = zero_set(ctx.n());
    accumulate(ctx, &away_pairs(ctx), &x, 1.0, &mut out);
    Ok(Residuals::from_array(out))
}

/// Composite rule for the running integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuadRule {
    Simpson,
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualOptions {
    /// Grid points per period of the fastest residual phase.
    pub steps_per_period: usize,
    pub rule: QuadRule,
    /// Approximate number of times at which norms are recorded.
    pub checkpoints: usize,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self { steps_per_period: 32, rule: QuadRule::Simpson, checkpoints: 1000 }
    }
}

/// Running integrals `int_0^t residual` on a uniform grid.
#[derive(Debug, Clone)]
pub struct ResidualIntegrals {
    /// Checkpoint times, starting at 0 and ending at the requested time.
    pub times: Vec<f64>,
    /// Spectral norm of each integral at each checkpoint, by [`ResidualKind::index`].
    pub norms: [Vec<f64>; 4],
    /// Spectral norm of `X5` at each checkpoint.
    pub x5_norms: Vec<f64>,
    /// The four integrals at the final time.
    pub integrals: [CMatrix; 4],
    /// `tilde phi` accumulated along the grid.
    pub tilde_end: f64,
    pub steps: usize,
    pub dt: f64,
}

impl ResidualIntegrals {
    pub fn sup(&self, kind: ResidualKind) -> f64 {
        self.norms[kind.index()].iter().copied().fold(0.0, f64::max)
    }

    pub fn x5_sup(&self) -> f64 {
        self.x5_norms.iter().copied().fold(0.0, f64::max)
    }

    /// `X5` at the final time.
    pub fn x5(&self) -> CMatrix {
        -self.integrals.iter().fold(zeros(self.integrals[0].nrows()), |a, m| a + m)
    }
}

/// Bound on the fastest phase velocity among the residual terms.
fn residual_frequency(ctx: &FrameContext) -> f64 {
    let lam = ctx.sys().lambda();
    let spread = lam.iter().copied().fold(f64::MIN, f64::max) - lam.iter().copied().fold(f64::MAX, f64::min);
    let pulse = ctx.pulse();
    let vmax = pulse.v0().abs().max(pulse.v1().abs());
    let detune = (ctx.delta() - pulse.v0()).abs().max((ctx.delta() - pulse.v1()).abs());
    let lam_max = 0.5 * detune + pulse.eps1() * ctx.coupling_pq().abs() * pulse.max_envelope();
    spread + 2.5 * vmax + 2.0 * lam_max
}

/// Integrates the residuals from 0 to `until`, recording spectral norms of the
/// running integrals at evenly spaced checkpoints.
///
/// `tilde phi` is carried along the grid with the end-corrected trapezoid rule.
pub fn integrate_residuals(ctx: &FrameContext, until: f64, opts: ResidualOptions) -> Result<ResidualIntegrals> {
    ctx.check_time(until)?;
    if opts.steps_per_period == 0 || opts.checkpoints == 0 {
        return Err(Error::argument("steps_per_period and checkpoints must be positive"));
    }
    let until = until.min(ctx.horizon());
    let n = ctx.n();
    let simpson = opts.rule == QuadRule::Simpson;
    let nu = residual_frequency(ctx);
    let raw = (until * nu * opts.steps_per_period as f64 / (2.0 * std::f64::consts::PI)).ceil() as usize;
    let steps = if simpson { raw.max(2).div_ceil(2) * 2 } else { raw.max(1) };
    let dt = until / steps as f64;
    let mut stride = (steps / opts.checkpoints).max(1);
    if simpson && stride % 2 == 1 {
        stride += 1;
    }
    let scale = if simpson { dt / 3.0 } else { dt / 2.0 };
    let rate = ctx.pulse().rate();
    let away = away_pairs(ctx);

    let mut acc = zero_set(n);
    let mut point = zero_set(n);
    let mut out = ResidualIntegrals {
        times: Vec::new(),
        norms: Default::default(),
        x5_norms: Vec::new(),
        integrals: zero_set(n),
        tilde_end: 0.0,
        steps,
        dt,
    };
    let mut prev: Option<Sample> = None;
    for k in 0..=steps {
        let t = if k == steps { until } else { k as f64 * dt };
        let m = lambda_theta(ctx, ctx.slow(t))?;
        let tilde = prev.as_ref().map_or(0.0, |a| {
            a.tilde + 0.5 * dt * (a.lambda + m.lambda) + dt * dt / 12.0 * rate * (a.lambda_dot - m.lambda_dot)
        });
        let x = sample(ctx, t, tilde, m);
        let checkpoint = k % stride == 0 || k == steps;
        if checkpoint {
            point.iter_mut().for_each(|m| m.fill(c(0.0)));
            accumulate(ctx, &away, &x, 1.0, &mut point);
            let mut total = zeros(n);
            for (kind, (a, pt)) in acc.iter().zip(&point).enumerate() {
                let integral = if k == 0 { zeros(n) } else { (a + pt) * c(scale) };
                out.norms[kind].push(hermitian_norm(&integral));
                total += &integral;
                if k == steps {
                    out.integrals[kind] = integral;
                }
            }
            out.times.push(t);
            out.x5_norms.push(hermitian_norm(&total));
            let w = if k == 0 { 1.0 } else { 2.0 };
            for (a, pt) in acc.iter_mut().zip(&point) {
                *a += pt * c(w);
            }
        } else {
            let w = if simpson && k % 2 == 1 { 4.0 } else { 2.0 };
            accumulate(ctx, &away, &x, w, &mut acc);
        }
        prev = Some(x);
    }
    out.tilde_end = prev.map_or(0.0, |x| x.tilde);
    Ok(out)
}

/// `X5(t) = -int_0^t (R + R~_pq + R~_p + R~_q)` with the default options.
pub fn x5_operator(ctx: &FrameContext, t: f64) -> Result<CMatrix> {
    ctx.check_time(t)?;
    if t == 0.0 {
        return Ok(zeros(ctx.n()));
    }
    Ok(integrate_residuals(ctx, t, ResidualOptions::default())?.x5())
}

#[cfg(test)]
mod tests {
    use super::super::adiabatic::frame_unitaries;
    use super::super::basis::Triple;
    use super::super::fixtures::*;
    use super::*;
    use crate::linalg::{hermiticity_defect, max_abs_diff, op_norm};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn residuals_vanish_at_start() {
        let ctx = stationary_five(0.1, 0.1);
        let r = residuals(&ctx, 0.0).unwrap();
        assert!(op_norm(&r.sum()) < 1e-15);
        assert!(op_norm(&x5_operator(&ctx, 0.0).unwrap()) == 0.0);
    }

    #[test]
    fn two_levels_leave_only_the_target_pair_residual() {
        let coupling = RMatrix::from_row_slice(2, 2, &[0.4, 1.5, 1.5, -0.3]);
        let sys = crate::model::SampledSystem::new(vec![0.0, 4.0], coupling).unwrap();
        let pulse = crate::control::ChirpedPulse::standard(3.0, 5.0, 0.1, 0.1).unwrap();
        let ctx = FrameContext::new(&sys, &pulse, 0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let r = residuals(&ctx, rng.gen_range(0.0..ctx.horizon())).unwrap();
            assert_eq!(op_norm(&r.r), 0.0);
            assert_eq!(op_norm(&r.r_p), 0.0);
            assert_eq!(op_norm(&r.r_q), 0.0);
        }
    }

    /// The residual tables are the second-order `sigma = 2` couplings pushed
    /// through `U4 U3`.
    #[test]
    fn residual_tables_match_frame_conjugation() {
        for ctx in [stationary_five(0.1, 0.1), four_level(-0.1, 0.1, 0.1), dense_three(0.1, 0.1)] {
            let n = ctx.n();
            let (p, q) = (ctx.p(), ctx.q());
            let fam = ctx.family();
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            for _ in 0..10 {
                let t = rng.gen_range(0.0..ctx.horizon());
                let h = h_plus2(&ctx, ctx.slow(t));
                let (mut target, mut one_side, mut away) = (zeros(n), zeros(n), zeros(n));
                for j in 0..n {
                    for k in j + 1..n {
                        let dest = match ([p, q].contains(&j), [p, q].contains(&k)) {
                            (true, true) => &mut target,
                            (false, false) => &mut away,
                            _ => &mut one_side,
                        };
                        add_a(dest, j, k, fam.phase(Triple::new(j, k, 2), t), h[(j, k)]);
                    }
                }
                let (u3, u4) = frame_unitaries(&ctx, t).unwrap();
                let u = u4 * u3;
                let conj = |m: &CMatrix| &u * m * u.adjoint();
                let r = residuals(&ctx, t).unwrap();
                assert!(max_abs_diff(&conj(&target), &r.r_pq) < 1e-12);
                assert!(max_abs_diff(&conj(&one_side), &(&r.r_p + &r.r_q)) < 1e-12);
                assert!(max_abs_diff(&conj(&away), &r.r) < 1e-12);
                // R~_p only touches row/column p, R~_q only q.
                for j in 0..n {
                    for k in 0..n {
                        if j != p && k != p {
                            assert_eq!(r.r_p[(j, k)].norm(), 0.0);
                        }
                        if j != q && k != q {
                            assert_eq!(r.r_q[(j, k)].norm(), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn carried_tilde_phase_matches_the_cache() {
        let ctx = stationary_five(0.1, 0.1);
        let out = integrate_residuals(&ctx, ctx.horizon(), ResidualOptions::default()).unwrap();
        assert!((out.tilde_end - ctx.tilde_phase(ctx.horizon())).abs() < 1e-8);
        assert_eq!(out.times.len(), out.x5_norms.len());
        assert_eq!(*out.times.last().unwrap(), ctx.horizon());
    }

    #[test]
    fn simpson_agrees_with_trapezoid_on_the_half_grid() {
        let ctx = stationary_five(0.1, 0.1);
        let horizon = ctx.horizon();
        let simpson =
            integrate_residuals(&ctx, horizon, ResidualOptions { steps_per_period: 16, ..Default::default() }).unwrap();
        let trap = integrate_residuals(
            &ctx,
            horizon,
            ResidualOptions { steps_per_period: 32, rule: QuadRule::Trapezoid, ..Default::default() },
        )
        .unwrap();
        let diff = max_abs_diff(&simpson.x5(), &trap.x5());
        assert!(diff <= 1e-6 * horizon, "{diff}");
        assert!(hermiticity_defect(&simpson.x5()) < 1e-12);
    }

    #[test]
    fn x5_grows_like_inverse_root_of_the_scales() {
        let ratio = |eps: f64| {
            let ctx = stationary_five(eps, eps);
            let out = integrate_residuals(
                &ctx,
                ctx.horizon(),
                ResidualOptions { steps_per_period: 16, ..Default::default() },
            )
            .unwrap();
            out.x5_sup() * eps
        };
        let (a, b) = (ratio(1e-1), ratio(1e-2));
        assert!(a / b < 3.0 && b / a < 3.0, "{a} {b}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn residuals_are_hermitian(frac in 0.0f64..1.0) {
            let ctx = stationary_five(0.1, 0.1);
            let r = residuals(&ctx, frac * ctx.horizon()).unwrap();
            for m in [&r.r, &r.r_pq, &r.r_p, &r.r_q] {
                prop_assert!(hermiticity_defect(m) < 1e-12);
            }
        }
    }
}
