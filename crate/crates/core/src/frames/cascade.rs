//! Interaction frame, the adjoint series of a time-dependent change of
//! variables, and the first two averaging eliminations.

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_norm, zeros, CMatrix, RMatrix, I};

use super::basis::{add_a, add_b, IndexSet, Triple};
use super::FrameContext;

/// `H_I(t) = sum_{j <= k, sigma = +-1} eps1 delta_jk u A_jk(phi^sigma_jk(t))`,
/// the coupling seen in the frame rotating with the drift.
pub fn interaction_hamiltonian(ctx: &FrameContext, t: f64) -> Result<CMatrix> {
    ctx.check_time(t)?;
    let pulse = ctx.pulse();
    let fam = ctx.family();
    let amp = pulse.eps1() * pulse.u(ctx.slow(t));
    let phi = pulse.phase_unchecked(t);
    let coupling = ctx.sys().coupling();
    let mut h = zeros(ctx.n());
    for tr in fam.triples(IndexSet::I) {
        let d = coupling[(tr.j, tr.k)];
        if d != 0.0 {
            add_a(&mut h, tr.j, tr.k, fam.phase_with(tr, t, phi), amp * d);
        }
    }
    Ok(h)
}

/// Truncated adjoint series together with the size of its last retained term.
#[derive(Debug, Clone)]
pub struct BchExpansion {
    pub hamiltonian: CMatrix,
    /// Spectral norm of the order-`K` term, a proxy for the truncation error.
    pub remainder: f64,
}

/// Hamiltonian after `psi = exp(i X(t)) psi_hat`:
/// `sum_{k=0}^{K} (-1)^k / k! ad^k_{iX} (H + X'/(k+1))`.
pub fn bch_transform<H, X, D>(h: H, x: X, dx: D, t: f64, order: usize) -> Result<BchExpansion>
where
    H: Fn(f64) -> CMatrix,
    X: Fn(f64) -> CMatrix,
    D: Fn(f64) -> CMatrix,
{
    if order == 0 {
        return Err(Error::argument("series order must be at least 1"));
    }
    let ix = x(t) * I;
    let ad = |y: &CMatrix| &ix * y - y * &ix;
    let mut ah = h(t);
    let mut ad_dx = dx(t);
    let mut sum = &ah + &ad_dx;
    let mut fact = 1.0;
    let mut last = 0.0;
    for k in 1..=order {
        ah = ad(&ah);
        ad_dx = ad(&ad_dx);
        fact *= k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let term = (&ah + &ad_dx / c((k + 1) as f64)) * c(sign / fact);
        sum += &term;
        if k == order {
            last = hermitian_norm(&term);
        }
    }
    Ok(BchExpansion { hamiltonian: sum, remainder: last })
}

/// Coefficients of `-i X1 = sum c^sigma_jk e^{i phi^sigma_jk} e_jk` and of
/// `H_I + eps1 X1'/2 = eps1 sum l^sigma_jk e^{i phi^sigma_jk} e_jk` over all
/// `j, k` and `sigma = +-1`, dropping slow derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    /// `c^{-1}` and `c^{+1}`.
    pub c: [RMatrix; 2],
    /// `l^{-1}` and `l^{+1}`.
    pub l: [RMatrix; 2],
}

fn slot(sigma: i32) -> usize {
    usize::from(sigma > 0)
}

/// `c` and `l` at slow time `s`.
///
/// For `j < k`: `c = delta u / f`, except the resonant `c^1_pq = 0`, and
/// `l = delta u / 2`, except `l^1_pq = delta u`. Below the diagonal
/// `c^sigma_kj = -c^{-sigma}_jk` and `l^sigma_kj = l^{-sigma}_jk`. On it
/// `c^{+-1}_jj = +-delta_jj u / f` and `l^{+-1}_jj = delta_jj u / 2`.
pub fn coefficient_matrices(ctx: &FrameContext, s: f64) -> Coefficients {
    let n = ctx.n();
    let pulse = ctx.pulse();
    let fam = ctx.family();
    let u = pulse.u(s);
    let f = pulse.f(s);
    let delta = ctx.sys().coupling();
    let mut cm = [RMatrix::zeros(n, n), RMatrix::zeros(n, n)];
    let mut lm = [RMatrix::zeros(n, n), RMatrix::zeros(n, n)];
    for j in 0..n {
        let du = delta[(j, j)] * u;
        for sigma in [-1, 1] {
            cm[slot(sigma)][(j, j)] = du / (sigma as f64 * f);
            lm[slot(sigma)][(j, j)] = 0.5 * du;
        }
        for k in j + 1..n {
            let du = delta[(j, k)] * u;
            for sigma in [-1, 1] {
                let resonant = (j, k, sigma) == (ctx.p(), ctx.q(), 1);
                let cv = if resonant { 0.0 } else { du / fam.divisor(Triple::new(j, k, sigma), s) };
                let lv = if resonant { du } else { 0.5 * du };
                cm[slot(sigma)][(j, k)] = cv;
                lm[slot(sigma)][(j, k)] = lv;
                cm[slot(-sigma)][(k, j)] = -cv;
                lm[slot(-sigma)][(k, j)] = lv;
            }
        }
    }
    Coefficients { c: cm, l: lm }
}

/// Second-order coefficients `h^sigma_jk(s)` for `sigma in {-2, 0, 2}` over all
/// `j, k`, from `-i [X1, H_I + eps1 X1'/2] = eps1 sum h^sigma_jk e^{i phi^sigma_jk} e_jk`.
#[derive(Debug, Clone, PartialEq)]
pub struct HCoefficients {
    pub minus2: RMatrix,
    pub zero: RMatrix,
    pub plus2: RMatrix,
}

impl HCoefficients {
    pub fn get(&self, j: usize, k: usize, sigma: i32) -> f64 {
        match sigma {
            -2 => self.minus2[(j, k)],
            0 => self.zero[(j, k)],
            2 => self.plus2[(j, k)],
            _ => 0.0,
        }
    }
}

pub fn h_coefficients(ctx: &FrameContext, s: f64) -> HCoefficients {
    let Coefficients { c: [cm, cp], l: [lm, lp] } = coefficient_matrices(ctx, s);
    let br = |a: &RMatrix, b: &RMatrix| a * b - b * a;
    HCoefficients { minus2: br(&cm, &lm), zero: br(&cm, &lp) + br(&cp, &lm), plus2: br(&cp, &lp) }
}

/// Only the `sigma = 2` block, which is all the residual terms need.
pub(crate) fn h_plus2(ctx: &FrameContext, s: f64) -> RMatrix {
    let Coefficients { c: [_, cp], l: [_, lp] } = coefficient_matrices(ctx, s);
    &cp * &lp - &lp * &cp
}

/// `X1(t) = sum_{I'} delta_jk u / f^sigma_jk B_jk(phi^sigma_jk)`.
pub fn x1_operator(ctx: &FrameContext, t: f64) -> Result<CMatrix> {
    ctx.check_time(t)?;
    let s = ctx.slow(t);
    let pulse = ctx.pulse();
    let fam = ctx.family();
    let u = pulse.u(s);
    let phi = pulse.phase_unchecked(t);
    let delta = ctx.sys().coupling();
    let mut x = zeros(ctx.n());
    for tr in fam.triples(IndexSet::IPrime) {
        let d = delta[(tr.j, tr.k)];
        if d != 0.0 {
            add_b(&mut x, tr.j, tr.k, fam.phase_with(tr, t, phi), d * u / fam.divisor(tr, s));
        }
    }
    Ok(x)
}

/// Which second elimination to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondOrder {
    /// Keep the `sigma = 2` couplings and the diagonal shifts.
    Partial,
    /// Keep only the diagonal shifts; needs every gap outside `[2 v0, 2 v1]`.
    Full,
}

/// `X2(t) = sum h^sigma_jk / f^sigma_jk B_jk(phi^sigma_jk)` over `J'`
/// ([`SecondOrder::Partial`]) or `J''` ([`SecondOrder::Full`]).
pub fn x2_operator(ctx: &FrameContext, t: f64, which: SecondOrder) -> Result<CMatrix> {
    ctx.check_time(t)?;
    let set = match which {
        SecondOrder::Partial => IndexSet::JPrime,
        SecondOrder::Full => IndexSet::JDoublePrime,
    };
    let fam = ctx.family();
    fam.check_nonvanishing(set)?;
    let s = ctx.slow(t);
    let h = h_coefficients(ctx, s);
    let phi = ctx.pulse().phase_unchecked(t);
    let mut x = zeros(ctx.n());
    for tr in fam.triples(set) {
        let w = h.get(tr.j, tr.k, tr.sigma);
        if w != 0.0 {
            add_b(&mut x, tr.j, tr.k, fam.phase_with(tr, t, phi), w / fam.divisor(tr, s));
        }
    }
    Ok(x)
}
