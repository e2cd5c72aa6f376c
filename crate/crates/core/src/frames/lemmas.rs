//! Numerical checks of the estimates the averaging argument rests on, as
//! normalized ratios that should stay bounded as the scales shrink.

use std::cell::RefCell;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, cis, expi, zeros, CMatrix, CVector};
use crate::propagator::{integrate, propagate, StateVector, StepConfig};
use crate::quad::adaptive_simpson;

use super::adiabatic::{frame_unitaries, lambda_theta, rwa_hamiltonians};
use super::cascade::{x1_operator, x2_operator, SecondOrder};
use super::residuals::{integrate_residuals, ResidualIntegrals, ResidualKind, ResidualOptions};
use super::FrameContext;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaOptions {
    /// Points of the uniform slow-time grid for the pointwise checks.
    pub grid: usize,
    pub include_residuals: bool,
    pub residual: ResidualOptions,
    /// The full and truncated dynamics are compared only up to this horizon.
    pub rwa_horizon_limit: f64,
    pub steps_per_period: usize,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        Self {
            grid: 10_000,
            include_residuals: true,
            residual: ResidualOptions { steps_per_period: 16, ..Default::default() },
            rwa_horizon_limit: 1e4,
            steps_per_period: 50,
        }
    }
}

/// One line of the diagnostic table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaRow {
    pub eps1: f64,
    pub eps2: f64,
    /// `eps1 sup |theta'|`.
    pub theta_rate: f64,
    /// `int_0^1 |theta'|`.
    pub theta_variation: f64,
    /// `min (f'/2 - 2 lambda')` before the crossing.
    pub gap_margin_before: f64,
    /// `min (f - 2 lambda - Delta/2)` after the crossing.
    pub gap_margin_after: f64,
    /// `min (|f'| - |lambda'|)`.
    pub slope_margin: f64,
    /// `sqrt(eps1 eps2) sup_t || int_0^t R ||` and likewise below.
    pub r_ratio: Option<f64>,
    pub r_pq_ratio: Option<f64>,
    pub r_p_ratio: Option<f64>,
    pub r_q_ratio: Option<f64>,
    /// Final distance between the truncated and the transformed exact state.
    pub rwa_distance: Option<f64>,
    /// `eps1^{3/2} eps2^{-1/2} + eps1 + eps1^{5/2} eps2^{-3/2}`.
    pub rwa_bound: f64,
    /// `|| composed frame change at t = 0 - I ||`.
    pub initial_defect: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LemmaTable {
    pub rows: Vec<LemmaRow>,
}

impl LemmaTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Largest ratio between consecutive rows of `column`, rescaled to one
    /// decade of `eps1`. `None` when any entry is missing or not positive.
    pub fn decade_spread(&self, column: impl Fn(&LemmaRow) -> Option<f64>) -> Option<f64> {
        let mut worst: f64 = 1.0;
        for pair in self.rows.windows(2) {
            let (a, b) = (column(&pair[0])?, column(&pair[1])?);
            if !(a > 0.0 && b > 0.0) {
                return None;
            }
            let decades = (pair[0].eps1 / pair[1].eps1).log10().abs().max(1e-12);
            worst = worst.max((a / b).max(b / a).powf(1.0 / decades.max(1.0)));
        }
        Some(worst)
    }
}

/// `e^{-i eps1^2 X5} U4 U3 e^{-i eps1^2 X2} e^{-i eps1 X1}` at `t`.
pub(crate) fn frame_change(ctx: &FrameContext, t: f64, x5: &CMatrix) -> Result<CMatrix> {
    let e1 = ctx.pulse().eps1();
    let x1 = x1_operator(ctx, t)? * c(-e1);
    let x2 = x2_operator(ctx, t, SecondOrder::Partial)? * c(-e1 * e1);
    let (u3, u4) = frame_unitaries(ctx, t)?;
    Ok(expi(&(x5 * c(-e1 * e1))) * u4 * u3 * expi(&x2) * expi(&x1))
}

fn theta_checks(ctx: &FrameContext, grid: usize) -> Result<(f64, f64, f64, f64, f64)> {
    let pulse = ctx.pulse();
    let t_slow = pulse.t_slow();
    let s_bar = ctx.crossing();
    let mut sup: f64 = lambda_theta(ctx, s_bar)?.theta_dot.abs();
    let (mut before, mut after, mut slope) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let points = (0..grid).map(|i| t_slow * i as f64 / (grid - 1) as f64).chain([s_bar]);
    for s in points {
        let m = lambda_theta(ctx, s)?;
        let df = pulse.f_dot(s);
        sup = sup.max(m.theta_dot.abs());
        if s <= s_bar {
            before = before.min(0.5 * df - 2.0 * m.lambda_dot);
        }
        if s >= s_bar {
            after = after.min(pulse.f(s) - 2.0 * m.lambda - 0.5 * ctx.delta());
        }
        slope = slope.min(df.abs() - m.lambda_dot.abs());
    }
    let abs_rate = |s: f64| lambda_theta(ctx, s).map_or(f64::NAN, |m| m.theta_dot.abs());
    let variation = adaptive_simpson(&abs_rate, 0.0, s_bar, 1e-12) + adaptive_simpson(&abs_rate, s_bar, t_slow, 1e-12);
    if !variation.is_finite() {
        return Err(Error::numeric("total variation of the mixing angle is not finite"));
    }
    Ok((pulse.eps1() * sup, variation, before, after, slope))
}

/// Final distance between the truncated dynamics and the exact dynamics
/// carried through every frame change.
fn rwa_distance(ctx: &FrameContext, residual: &ResidualIntegrals, steps_per_period: usize) -> Result<f64> {
    let (n, p) = (ctx.n(), ctx.p());
    let horizon = ctx.horizon();
    let start = StateVector::basis(n, p)?;
    let cfg = StepConfig { steps_per_period, n_samples: 2 };
    let exact = propagate(ctx.sys(), ctx.pulse(), &start, cfg)?;
    let lam = ctx.sys().lambda();
    let psi_i =
        CVector::from_iterator(n, exact.final_state().amplitudes().iter().zip(lam).map(|(a, l)| a * cis(l * horizon)));
    let psi5 = frame_change(ctx, horizon, &residual.x5())? * psi_i;

    let pulse = ctx.pulse();
    let detune = (pulse.v0() - ctx.delta()).abs().max((pulse.v1() - ctx.delta()).abs());
    let nu = detune + 2.0 * pulse.eps1() * ctx.coupling_pq().abs() * pulse.max_envelope() + 1.0;
    let steps = (horizon * nu * steps_per_period as f64 / (2.0 * std::f64::consts::PI)).ceil() as usize;
    let failure = RefCell::new(None);
    let truncated = integrate(
        |t| match rwa_hamiltonians(ctx, t.min(horizon)) {
            Ok(h) => h.truncated,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                zeros(n)
            }
        },
        0.0,
        horizon,
        steps.max(1),
        start.amplitudes(),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let d = (truncated - psi5).norm();
    if !d.is_finite() {
        return Err(Error::numeric("truncated dynamics produced non-finite amplitudes"));
    }
    Ok(d)
}

/// One row per `(eps1, eps2)` for the system, pulse shape and pair of `ctx`.
pub fn verify_lemmas(ctx: &FrameContext, eps_list: &[(f64, f64)], opts: LemmaOptions) -> Result<LemmaTable> {
    if opts.grid < 2 {
        return Err(Error::argument("lemma grid needs at least two points"));
    }
    let mut table = LemmaTable::default();
    for &(eps1, eps2) in eps_list {
        if !(eps1 > 0.0 && eps1 < 1.0 && eps2 > 0.0 && eps2 < 1.0) {
            return Err(Error::argument(format!("scales ({eps1}, {eps2}) must lie in (0, 1)")));
        }
        let scaled = ctx.with_scales(eps1, eps2)?;
        let (theta_rate, theta_variation, before, after, slope) = theta_checks(&scaled, opts.grid)?;
        let residual = if opts.include_residuals {
            Some(integrate_residuals(&scaled, scaled.horizon(), opts.residual)?)
        } else {
            None
        };
        let ratio = |kind: ResidualKind| residual.as_ref().map(|r| (eps1 * eps2).sqrt() * r.sup(kind));
        let rwa = match &residual {
            Some(r) if scaled.horizon() <= opts.rwa_horizon_limit => {
                Some(rwa_distance(&scaled, r, opts.steps_per_period)?)
            }
            _ => None,
        };
        let zero = crate::linalg::zeros(scaled.n());
        let initial = frame_change(&scaled, 0.0, &zero)? - crate::linalg::identity(scaled.n());
        table.rows.push(LemmaRow {
            eps1,
            eps2,
            theta_rate,
            theta_variation,
            gap_margin_before: before,
            gap_margin_after: after,
            slope_margin: slope,
            r_ratio: ratio(ResidualKind::R),
            r_pq_ratio: ratio(ResidualKind::Pq),
            r_p_ratio: ratio(ResidualKind::P),
            r_q_ratio: ratio(ResidualKind::Q),
            rwa_distance: rwa,
            rwa_bound: eps1.powf(1.5) / eps2.sqrt() + eps1 + eps1.powf(2.5) / eps2.powf(1.5),
            initial_defect: crate::linalg::op_norm(&initial),
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use std::f64::consts::PI;

    fn quick() -> LemmaOptions {
        LemmaOptions { grid: 2000, include_residuals: false, ..Default::default() }
    }

    #[test]
    fn mixing_angle_variation_is_just_above_pi() {
        let ctx = four_level(-0.1, 0.1, 0.1);
        let table = verify_lemmas(&ctx, &[(1e-1, 1e-1), (1e-2, 1e-2), (1e-3, 1e-3)], quick()).unwrap();
        for row in &table.rows {
            assert!(row.theta_variation >= PI - 1e-6 && row.theta_variation <= PI + 1.0, "{row:?}");
            assert!(row.initial_defect < 1e-14);
        }
        assert!(table.decade_spread(|r| Some(r.theta_rate)).unwrap() < 2.0);
    }

    #[test]
    fn gap_margins_are_positive_for_small_scales() {
        let ctx = four_level(-0.1, 0.1, 0.1);
        let table = verify_lemmas(&ctx, &[(1e-2, 1e-2), (1e-3, 1e-3)], quick()).unwrap();
        for row in &table.rows {
            assert!(row.gap_margin_before > 0.0 && row.gap_margin_after > 0.0 && row.slope_margin > 0.0, "{row:?}");
        }
    }

    #[test]
    fn truncated_dynamics_track_the_transformed_state() {
        let ctx = dense_three(0.1, 0.1);
        let opts = LemmaOptions { grid: 200, ..Default::default() };
        let table = verify_lemmas(&ctx, &[(0.1, 0.1)], opts).unwrap();
        let row = table.rows[0];
        let d = row.rwa_distance.unwrap();
        assert!(d < 5.0 * row.rwa_bound, "{d} vs {}", row.rwa_bound);
        assert!(row.r_pq_ratio.unwrap() > 0.0);
    }

    #[test]
    fn rejects_inadmissible_scales() {
        let ctx = four_level(-0.1, 0.1, 0.1);
        assert!(matches!(verify_lemmas(&ctx, &[(1.5, 0.1)], quick()), Err(Error::Argument(_))));
        assert!(matches!(verify_lemmas(&ctx, &[(0.1, 0.0)], quick()), Err(Error::Argument(_))));
    }

    #[test]
    fn table_serializes() {
        let ctx = four_level(-0.1, 0.1, 0.1);
        let table = verify_lemmas(&ctx, &[(1e-1, 1e-1)], quick()).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("eps1,eps2,theta_rate"));
        assert!(table.to_json().unwrap().contains("\"rows\""));
    }
}
