//! Dispersed ensembles of n-level Hamiltonians and concrete draws from them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, RMatrix};

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::argument(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Affine selection: 0 maps to `lo`, 1 to `hi`.
    pub fn lerp(&self, t: f64) -> f64 {
        self.lo + t * (self.hi - self.lo)
    }

    /// True when the interval is sign-definite.
    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// Axis-aligned box of admissible parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Interval>", into = "Vec<Interval>")]
pub struct ParamBox {
    intervals: Vec<Interval>,
}

impl TryFrom<Vec<Interval>> for ParamBox {
    type Error = Error;
    fn try_from(v: Vec<Interval>) -> Result<Self> {
        ParamBox::new(v)
    }
}

impl From<ParamBox> for Vec<Interval> {
    fn from(b: ParamBox) -> Self {
        b.intervals
    }
}

impl ParamBox {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::argument("parameter box needs at least one axis"));
        }
        Ok(Self { intervals })
    }

    /// Degenerate box containing a single point.
    pub fn point(alpha: &[f64]) -> Result<Self> {
        Self::new(alpha.iter().map(|&a| Interval::point(a)).collect())
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn contains(&self, alpha: &[f64]) -> bool {
        alpha.len() == self.dim() && self.intervals.iter().zip(alpha).all(|(i, &a)| i.contains(a))
    }

    /// All `2^m` corners. Degenerate axes still contribute two (equal) entries
    /// so the enumeration order is independent of widths.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        (0..1usize << m)
            .map(|mask| {
                self.intervals
                    .iter()
                    .enumerate()
                    .map(|(i, iv)| if mask >> i & 1 == 0 { iv.lo } else { iv.hi })
                    .collect()
            })
            .collect()
    }

    /// Tensor grid with `per_axis` points along every axis (endpoints included).
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(2);
        let axes: Vec<Vec<f64>> = self
            .intervals
            .iter()
            .map(|iv| (0..per_axis).map(|k| iv.lerp(k as f64 / (per_axis - 1) as f64)).collect())
            .collect();
        let mut out = vec![Vec::with_capacity(self.dim())];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&x| {
                        let mut p = prefix.clone();
                        p.push(x);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

/// Eigenvalue of one level as a function of the parameter vector.
///
/// `Affine` is the supported form for exact box certification. `Polynomial`
/// adds per-axis powers and can only be checked on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    Affine {
        offset: f64,
        slope: Vec<f64>,
    },
    /// `offset + sum_i sum_d coeffs[i][d] * alpha_i^(d+1)`.
    Polynomial {
        offset: f64,
        coeffs: Vec<Vec<f64>>,
    },
}

impl Drift {
    pub fn affine(offset: f64, slope: Vec<f64>) -> Self {
        Drift::Affine { offset, slope }
    }

    pub fn is_affine(&self) -> bool {
        match self {
            Drift::Affine { .. } => true,
            Drift::Polynomial { coeffs, .. } => coeffs.iter().all(|c| c.iter().skip(1).all(|&x| x == 0.0)),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Drift::Affine { slope, .. } => slope.len(),
            Drift::Polynomial { coeffs, .. } => coeffs.len(),
        }
    }

    pub fn eval(&self, alpha: &[f64]) -> f64 {
        match self {
            Drift::Affine { offset, slope } => offset + slope.iter().zip(alpha).map(|(b, a)| b * a).sum::<f64>(),
            Drift::Polynomial { offset, coeffs } => {
                offset
                    + coeffs
                        .iter()
                        .zip(alpha)
                        .map(|(cs, &a)| cs.iter().enumerate().map(|(d, &c)| c * a.powi(d as i32 + 1)).sum::<f64>())
                        .sum::<f64>()
            }
        }
    }
}

/// Dispersed family `H(alpha) + omega * H_c(delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSystem {
    drift: Vec<Drift>,
    coupling: Vec<Vec<Interval>>,
    domain: ParamBox,
}

/// Grid resolution used to certify gap positivity for non-affine drifts.
const NONAFFINE_GRID: usize = 101;

impl EnsembleSystem {
    pub fn new(drift: Vec<Drift>, coupling: Vec<Vec<Interval>>, domain: ParamBox) -> Result<Self> {
        let n = drift.len();
        if n < 2 {
            return Err(Error::argument("an ensemble needs at least two levels"));
        }
        if coupling.len() != n || coupling.iter().any(|row| row.len() != n) {
            return Err(Error::argument(format!("coupling intervals must be {n}x{n}")));
        }
        for (j, d) in drift.iter().enumerate() {
            if d.dim() != domain.dim() {
                return Err(Error::argument(format!(
                    "drift of level {} has {} coefficients, parameter box has {} axes",
                    j + 1,
                    d.dim(),
                    domain.dim()
                )));
            }
        }
        for j in 0..n {
            for k in j + 1..n {
                if coupling[j][k] != coupling[k][j] {
                    return Err(Error::Model { pair: (j, k), reason: "coupling intervals are not symmetric".into() });
                }
            }
        }
        let sys = Self { drift, coupling, domain };
        let points = if sys.is_affine() { sys.domain.vertices() } else { sys.domain.grid(NONAFFINE_GRID) };
        for alpha in &points {
            let lam = sys.eigenvalues(alpha);
            for j in 0..n {
                for k in j + 1..n {
                    if lam[k] - lam[j] <= 0.0 {
                        return Err(Error::Model {
                            pair: (j, k),
                            reason: format!("gap {} is not positive at alpha = {alpha:?}", lam[k] - lam[j]),
                        });
                    }
                }
            }
        }
        Ok(sys)
    }

    /// Ensemble with exactly known couplings.
    pub fn with_point_coupling(drift: Vec<Drift>, coupling: &RMatrix, domain: ParamBox) -> Result<Self> {
        let n = coupling.nrows();
        let rows = (0..n).map(|j| (0..n).map(|k| Interval::point(coupling[(j, k)])).collect()).collect();
        Self::new(drift, rows, domain)
    }

    /// The four-level benchmark: `lambda = (0, 1 + a, 3 + 2a, 7)` with a fixed
    /// integer coupling matrix whose (1,4) entry vanishes.
    pub fn four_level_benchmark(domain: Interval) -> Result<Self> {
        let drift = vec![
            Drift::affine(0.0, vec![0.0]),
            Drift::affine(1.0, vec![1.0]),
            Drift::affine(3.0, vec![2.0]),
            Drift::affine(7.0, vec![0.0]),
        ];
        Self::with_point_coupling(drift, &four_level_coupling(), ParamBox::new(vec![domain])?)
    }

    pub fn n(&self) -> usize {
        self.drift.len()
    }

    pub fn drift(&self) -> &[Drift] {
        &self.drift
    }

    pub fn coupling_interval(&self, j: usize, k: usize) -> Interval {
        self.coupling[j][k]
    }

    pub fn coupling_intervals(&self) -> &[Vec<Interval>] {
        &self.coupling
    }

    pub fn domain(&self) -> &ParamBox {
        &self.domain
    }

    pub fn is_affine(&self) -> bool {
        self.drift.iter().all(Drift::is_affine)
    }

    /// Same system over a different parameter box.
    pub fn with_domain(&self, domain: ParamBox) -> Result<Self> {
        Self::new(self.drift.clone(), self.coupling.clone(), domain)
    }

    pub fn eigenvalues(&self, alpha: &[f64]) -> Vec<f64> {
        self.drift.iter().map(|d| d.eval(alpha)).collect()
    }

    pub fn gap(&self, j: usize, k: usize, alpha: &[f64]) -> f64 {
        self.drift[k].eval(alpha) - self.drift[j].eval(alpha)
    }
}

/// Integer coupling matrix of the four-level benchmark.
pub fn four_level_coupling() -> RMatrix {
    RMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 1.0, 1.0, 0.0, //
            1.0, 1.0, 2.0, 0.0, //
            1.0, 2.0, 1.0, 3.0, //
            0.0, 0.0, 3.0, 1.0,
        ],
    )
}

/// Per-entry position inside each coupling interval, in `[0, 1]`.
/// Only the upper triangle (diagonal included) is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaChoice(Vec<Vec<f64>>);

impl DeltaChoice {
    pub fn uniform(n: usize, t: f64) -> Result<Self> {
        Self::new(vec![vec![t; n]; n])
    }

    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::argument("delta choice must be square"));
        }
        if rows.iter().flatten().any(|&t| !(0.0..=1.0).contains(&t)) {
            return Err(Error::argument("delta choice entries must lie in [0, 1]"));
        }
        Ok(Self(rows))
    }

    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        Self((0..n).map(|_| (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect()).collect())
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        let (a, b) = if j <= k { (j, k) } else { (k, j) };
        self.0[a][b]
    }
}

/// One realization: strictly increasing eigenvalues and a symmetric coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSystem {
    lambda: Vec<f64>,
    coupling: RMatrix,
}

impl SampledSystem {
    pub fn new(lambda: Vec<f64>, coupling: RMatrix) -> Result<Self> {
        let n = lambda.len();
        if n < 2 || coupling.nrows() != n || coupling.ncols() != n {
            return Err(Error::argument(format!(
                "need n >= 2 eigenvalues and an n x n coupling (got {n} and {}x{})",
                coupling.nrows(),
                coupling.ncols()
            )));
        }
        for j in 0..n {
            for k in j + 1..n {
                if coupling[(j, k)] != coupling[(k, j)] {
                    return Err(Error::Model { pair: (j, k), reason: "coupling matrix is not symmetric".into() });
                }
            }
        }
        for j in 0..n - 1 {
            if !(lambda[j + 1] > lambda[j]) {
                return Err(Error::Model {
                    pair: (j, j + 1),
                    reason: format!("eigenvalues not strictly increasing ({} then {})", lambda[j], lambda[j + 1]),
                });
            }
        }
        Ok(Self { lambda, coupling })
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn coupling(&self) -> &RMatrix {
        &self.coupling
    }

    pub fn gap(&self, j: usize, k: usize) -> f64 {
        self.lambda[k] - self.lambda[j]
    }

    pub fn max_abs_coupling(&self) -> f64 {
        self.coupling.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Shift all eigenvalues so that `lambda_p = -lambda_q`. Indices are 0-based.
    pub fn recenter(&self, p: usize, q: usize) -> Result<Self> {
        if p >= q || q >= self.n() {
            return Err(Error::argument(format!(
                "recentering needs p < q <= n (got p = {}, q = {}, n = {})",
                p + 1,
                q + 1,
                self.n()
            )));
        }
        let mid = 0.5 * (self.lambda[p] + self.lambda[q]);
        Ok(Self { lambda: self.lambda.iter().map(|l| l - mid).collect(), coupling: self.coupling.clone() })
    }

    /// `diag(lambda) + omega * coupling` as a complex Hermitian matrix.
    pub fn hamiltonian_at(&self, omega: f64) -> CMatrix {
        let mut h = self.real_hamiltonian_at(omega).map(c);
        for j in 0..self.n() {
            h[(j, j)].im = 0.0;
        }
        h
    }

    /// Real symmetric form of [`hamiltonian_at`](Self::hamiltonian_at).
    pub fn real_hamiltonian_at(&self, omega: f64) -> RMatrix {
        let mut h = self.coupling.scale(omega);
        for (j, l) in self.lambda.iter().enumerate() {
            h[(j, j)] += l;
        }
        h
    }
}

/// Draw the concrete system at `alpha` with couplings selected by `choice`.
pub fn sample_system(ens: &EnsembleSystem, alpha: &[f64], choice: &DeltaChoice) -> Result<SampledSystem> {
    if !ens.domain().contains(alpha) {
        return Err(Error::domain(format!("alpha = {alpha:?} lies outside the parameter box")));
    }
    let n = ens.n();
    if choice.n() != n {
        return Err(Error::argument(format!("delta choice is {}x{}, system has {n} levels", choice.n(), choice.n())));
    }
    let lambda = ens.eigenvalues(alpha);
    for j in 0..n {
        for k in j + 1..n {
            if lambda[k] - lambda[j] <= 0.0 {
                return Err(Error::Model {
                    pair: (j, k),
                    reason: format!("gap {} is not positive", lambda[k] - lambda[j]),
                });
            }
        }
    }
    let coupling = RMatrix::from_fn(n, n, |j, k| {
        let (a, b) = if j <= k { (j, k) } else { (k, j) };
        ens.coupling_interval(a, b).lerp(choice.get(a, b))
    });
    SampledSystem::new(lambda, coupling)
}
