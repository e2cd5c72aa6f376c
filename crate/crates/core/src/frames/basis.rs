//! The `A`/`B` matrix basis and the frequency/phase families it is indexed by.

use serde::Serialize;

use crate::control::ChirpedPulse;
use crate::error::{Error, Result};
use crate::linalg::{cis, zeros, CMatrix, I};

/// Index triple `(j, k, sigma)`, 0-based levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Triple {
    pub j: usize,
    pub k: usize,
    pub sigma: i32,
}

impl Triple {
    pub const fn new(j: usize, k: usize, sigma: i32) -> Self {
        Self { j, k, sigma }
    }
}

/// The index sets the eliminations sum over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexSet {
    /// `j <= k`, `sigma = +-1`.
    I,
    /// `I` without the resonant `(p, q, 1)`.
    IPrime,
    /// `j <= k`, `sigma in {-2, 0, 2}`.
    J,
    /// Terms removed by the second elimination of the main construction.
    JPrime,
    /// Terms removed by the second elimination under the stronger gap condition.
    JDoublePrime,
    /// Pairs away from the target, carried with `sigma = 2`.
    K,
}

/// `A_jk(E)` and `B_jk(E)` for `j <= k`.
///
/// Off the diagonal `A = e^{iE} e_jk + e^{-iE} e_kj` and
/// `B = i e^{iE} e_jk - i e^{-iE} e_kj`; on it `A = cos E e_jj`,
/// `B = -sin E e_jj`. Both are Hermitian and `dB/dE = -A`.
pub fn basis_ab(n: usize, j: usize, k: usize, e: f64) -> Result<(CMatrix, CMatrix)> {
    if j > k || k >= n {
        return Err(Error::argument(format!("basis index ({}, {}) needs j <= k <= {n}", j + 1, k + 1)));
    }
    let mut a = zeros(n);
    let mut b = zeros(n);
    add_a(&mut a, j, k, e, 1.0);
    add_b(&mut b, j, k, e, 1.0);
    Ok((a, b))
}

/// `m += w A_jk(e)` without bounds or ordering checks.
#[inline]
pub(crate) fn add_a(m: &mut CMatrix, j: usize, k: usize, e: f64, w: f64) {
    if j == k {
        m[(j, j)] += w * e.cos();
    } else {
        let z = cis(e) * w;
        m[(j, k)] += z;
        m[(k, j)] += z.conj();
    }
}

/// `m += w B_jk(e)`.
#[inline]
pub(crate) fn add_b(m: &mut CMatrix, j: usize, k: usize, e: f64, w: f64) {
    if j == k {
        m[(j, j)] -= w * e.sin();
    } else {
        let z = I * cis(e) * w;
        m[(j, k)] += z;
        m[(k, j)] += z.conj();
    }
}

/// `f^sigma_jk(s) = lambda_j - lambda_k + sigma f(s)` and
/// `phi^sigma_jk(t) = (lambda_j - lambda_k) t + sigma phi(t)` for one system
/// and pulse.
#[derive(Debug, Clone)]
pub struct PhaseFamily {
    lambda: Vec<f64>,
    pulse: ChirpedPulse,
    p: usize,
    q: usize,
}

impl PhaseFamily {
    pub fn new(lambda: Vec<f64>, pulse: ChirpedPulse, p: usize, q: usize) -> Result<Self> {
        if !(p < q && q < lambda.len()) {
            return Err(Error::argument(format!("target pair ({}, {}) needs p < q <= {}", p + 1, q + 1, lambda.len())));
        }
        Ok(Self { lambda, pulse, p, q })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn pulse(&self) -> &ChirpedPulse {
        &self.pulse
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn divisor(&self, tr: Triple, s: f64) -> f64 {
        self.lambda[tr.j] - self.lambda[tr.k] + tr.sigma as f64 * self.pulse.f(s)
    }

    pub fn phase(&self, tr: Triple, t: f64) -> f64 {
        self.phase_with(tr, t, self.pulse.phase_unchecked(t))
    }

    /// Same as [`phase`](Self::phase) with `phi(t)` supplied.
    #[inline]
    pub fn phase_with(&self, tr: Triple, t: f64, phi: f64) -> f64 {
        (self.lambda[tr.j] - self.lambda[tr.k]) * t + tr.sigma as f64 * phi
    }

    pub fn triples(&self, set: IndexSet) -> Vec<Triple> {
        let n = self.n();
        let (p, q) = (self.p, self.q);
        let upper = || (0..n).flat_map(move |j| (j..n).map(move |k| (j, k)));
        match set {
            IndexSet::I => upper().flat_map(|(j, k)| [-1, 1].map(|s| Triple::new(j, k, s))).collect(),
            IndexSet::IPrime => self.triples(IndexSet::I).into_iter().filter(|t| *t != Triple::new(p, q, 1)).collect(),
            IndexSet::J => upper().flat_map(|(j, k)| [-2, 0, 2].map(|s| Triple::new(j, k, s))).collect(),
            IndexSet::JPrime => upper()
                .flat_map(|(j, k)| {
                    if j < k {
                        vec![Triple::new(j, k, -2), Triple::new(j, k, 0)]
                    } else {
                        vec![Triple::new(j, j, -2), Triple::new(j, j, 2)]
                    }
                })
                .collect(),
            IndexSet::JDoublePrime => {
                self.triples(IndexSet::J).into_iter().filter(|t| !(t.j == t.k && t.sigma == 0)).collect()
            }
            IndexSet::K => upper()
                .filter(|&(j, k)| j < k && ![p, q].contains(&j) && ![p, q].contains(&k))
                .map(|(j, k)| Triple::new(j, k, 2))
                .collect(),
        }
    }

    /// Fails with the first triple of `set` whose divisor vanishes somewhere
    /// on the slow horizon. `f` is monotone, so the divisor's range is spanned
    /// by its values at the two ends.
    pub fn check_nonvanishing(&self, set: IndexSet) -> Result<()> {
        let t_slow = self.pulse.t_slow();
        for tr in self.triples(set) {
            let d0 = self.divisor(tr, 0.0);
            let d1 = self.divisor(tr, t_slow);
            if d0 * d1 <= 0.0 {
                return Err(Error::Hypothesis {
                    j: tr.j,
                    k: tr.k,
                    sigma: tr.sigma,
                    reason: format!("divisor runs from {d0} to {d1} and so vanishes"),
                });
            }
        }
        Ok(())
    }
}
