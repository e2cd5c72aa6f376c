//! The scalar chirped control `omega(t) = 2 eps1 u(eps1 eps2 t) cos(phi(t))`
//! and concatenations of such pulses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use crate::spline::CubicSpline;

/// Relative slack on horizon checks, to absorb rounding in `k * dt`.
const HORIZON_SLACK: f64 = 1e-12;
/// Samples per unit slow time used to validate tabulated profiles.
const VALIDATION_SAMPLES: usize = 4000;

/// Slow-time envelope `u(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// `sin(pi s / T)`.
    Sine,
    Tabulated {
        spline: CubicSpline,
    },
}

/// Slow-time chirp `f(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Chirp {
    /// `v0 + s (v1 - v0) / T`.
    Linear,
    Tabulated {
        spline: CubicSpline,
        /// `int_0^{s_k} f` at each knot.
        #[serde(skip)]
        knot_integrals: Vec<f64>,
    },
}

impl Chirp {
    pub fn tabulated(spline: CubicSpline) -> Self {
        let h = spline.knot_spacing();
        let mut acc = 0.0;
        let mut knot_integrals = Vec::with_capacity(spline.values().len());
        knot_integrals.push(0.0);
        for k in 0..spline.values().len() - 1 {
            let a = k as f64 * h;
            acc += adaptive_simpson(&|s| spline.value(s), a, a + h, 1e-14 * h);
            knot_integrals.push(acc);
        }
        Chirp::Tabulated { spline, knot_integrals }
    }
}

/// One chirped pulse on the fast-time horizon `[0, T / (eps1 eps2)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PulseRepr", into = "PulseRepr")]
pub struct ChirpedPulse {
    eps1: f64,
    eps2: f64,
    v0: f64,
    v1: f64,
    t_slow: f64,
    envelope: Envelope,
    chirp: Chirp,
    max_u: f64,
}

#[derive(Serialize, Deserialize)]
struct PulseRepr {
    eps1: f64,
    eps2: f64,
    v0: f64,
    v1: f64,
    t_slow: f64,
    envelope: Envelope,
    chirp: Chirp,
}

impl TryFrom<PulseRepr> for ChirpedPulse {
    type Error = Error;
    fn try_from(r: PulseRepr) -> Result<Self> {
        let chirp = match r.chirp {
            Chirp::Tabulated { spline, .. } => Chirp::tabulated(spline),
            other => other,
        };
        ChirpedPulse::new(r.v0, r.v1, r.eps1, r.eps2, r.t_slow, r.envelope, chirp)
    }
}

impl From<ChirpedPulse> for PulseRepr {
    fn from(p: ChirpedPulse) -> Self {
        PulseRepr {
            eps1: p.eps1,
            eps2: p.eps2,
            v0: p.v0,
            v1: p.v1,
            t_slow: p.t_slow,
            envelope: p.envelope,
            chirp: p.chirp,
        }
    }
}

impl ChirpedPulse {
    pub fn new(v0: f64, v1: f64, eps1: f64, eps2: f64, t_slow: f64, envelope: Envelope, chirp: Chirp) -> Result<Self> {
        if !(v0 > 0.0 && v1 > v0 && v1.is_finite()) {
            return Err(Error::argument(format!("need 0 < v0 < v1 (got v0 = {v0}, v1 = {v1})")));
        }
        if !(eps1 > 0.0 && eps2 > 0.0 && eps1.is_finite() && eps2.is_finite()) {
            return Err(Error::argument(format!("eps1 and eps2 must be positive (got {eps1}, {eps2})")));
        }
        if !(t_slow > 0.0 && t_slow.is_finite()) {
            return Err(Error::argument("slow horizon must be positive"));
        }
        for (what, spline) in [
            (
                "envelope",
                match &envelope {
                    Envelope::Tabulated { spline } => Some(spline),
                    Envelope::Sine => None,
                },
            ),
            (
                "chirp",
                match &chirp {
                    Chirp::Tabulated { spline, .. } => Some(spline),
                    Chirp::Linear => None,
                },
            ),
        ] {
            if let Some(s) = spline {
                if (s.span() - t_slow).abs() > 1e-12 * t_slow {
                    return Err(Error::argument(format!("tabulated {what} spans {} but T = {t_slow}", s.span())));
                }
            }
        }
        let mut pulse = Self { eps1, eps2, v0, v1, t_slow, envelope, chirp, max_u: 1.0 };
        pulse.validate_profiles()?;
        Ok(pulse)
    }

    /// Sine envelope, linear chirp, `T = 1`.
    pub fn standard(v0: f64, v1: f64, eps1: f64, eps2: f64) -> Result<Self> {
        Self::new(v0, v1, eps1, eps2, 1.0, Envelope::Sine, Chirp::Linear)
    }

    fn validate_profiles(&mut self) -> Result<()> {
        let n = (VALIDATION_SAMPLES as f64 * self.t_slow).ceil().max(100.0) as usize;
        let grid: Vec<f64> = (0..=n).map(|k| self.t_slow * k as f64 / n as f64).collect();
        if let Envelope::Tabulated { .. } = self.envelope {
            let scale = grid.iter().map(|&s| self.u(s).abs()).fold(0.0, f64::max);
            if scale == 0.0 {
                return Err(Error::argument("envelope vanishes identically"));
            }
            if self.u(0.0).abs() > 1e-12 * scale || self.u(self.t_slow).abs() > 1e-12 * scale {
                return Err(Error::argument("envelope must vanish at both ends"));
            }
            if let Some(s) = grid[1..n].iter().find(|&&s| self.u(s) <= 0.0) {
                return Err(Error::argument(format!("envelope is not positive at s = {s}")));
            }
            self.max_u = scale;
        }
        if let Chirp::Tabulated { .. } = self.chirp {
            let tol = 1e-9 * self.v1;
            if (self.f(0.0) - self.v0).abs() > tol || (self.f(self.t_slow) - self.v1).abs() > tol {
                return Err(Error::argument("chirp must run from v0 to v1"));
            }
            if let Some(w) = grid.windows(2).find(|w| self.f(w[1]) <= self.f(w[0])) {
                return Err(Error::argument(format!("chirp is not strictly increasing near s = {}", w[0])));
            }
        }
        Ok(())
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn v1(&self) -> f64 {
        self.v1
    }

    pub fn t_slow(&self) -> f64 {
        self.t_slow
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn chirp(&self) -> &Chirp {
        &self.chirp
    }

    /// `eps1 * eps2`, the ratio of slow to fast time.
    pub fn rate(&self) -> f64 {
        self.eps1 * self.eps2
    }

    /// Fast-time length `T / (eps1 eps2)`.
    pub fn horizon(&self) -> f64 {
        self.t_slow / self.rate()
    }

    pub fn max_envelope(&self) -> f64 {
        self.max_u
    }

    pub fn is_standard(&self) -> bool {
        matches!((&self.envelope, &self.chirp), (Envelope::Sine, Chirp::Linear))
    }

    /// Same pulse shape with different time scales.
    pub fn with_scales(&self, eps1: f64, eps2: f64) -> Result<Self> {
        Self::new(self.v0, self.v1, eps1, eps2, self.t_slow, self.envelope.clone(), self.chirp.clone())
    }

    pub fn u(&self, s: f64) -> f64 {
        match &self.envelope {
            Envelope::Sine => (std::f64::consts::PI * s / self.t_slow).sin(),
            Envelope::Tabulated { spline } => spline.value(s),
        }
    }

    pub fn u_dot(&self, s: f64) -> f64 {
        match &self.envelope {
            Envelope::Sine => {
                let w = std::f64::consts::PI / self.t_slow;
                w * (w * s).cos()
            }
            Envelope::Tabulated { spline } => spline.derivative(s),
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        match &self.chirp {
            Chirp::Linear => self.v0 + s * (self.v1 - self.v0) / self.t_slow,
            Chirp::Tabulated { spline, .. } => spline.value(s),
        }
    }

    pub fn f_dot(&self, s: f64) -> f64 {
        match &self.chirp {
            Chirp::Linear => (self.v1 - self.v0) / self.t_slow,
            Chirp::Tabulated { spline, .. } => spline.derivative(s),
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let h = self.horizon();
        if !(t >= 0.0 && t <= h * (1.0 + HORIZON_SLACK)) {
            return Err(Error::domain(format!("t = {t} outside [0, {h}]")));
        }
        Ok(())
    }

    /// `phi(t) = int_0^t f(eps1 eps2 tau) dtau`.
    pub fn phase(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.phase_unchecked(t))
    }

    pub(crate) fn phase_unchecked(&self, t: f64) -> f64 {
        let r = self.rate();
        match &self.chirp {
            Chirp::Linear => self.v0 * t + 0.5 * r * (self.v1 - self.v0) * t * t / self.t_slow,
            Chirp::Tabulated { spline, knot_integrals } => {
                let s = (r * t).clamp(0.0, self.t_slow);
                let h = spline.knot_spacing();
                let k = ((s / h).floor() as usize).min(knot_integrals.len() - 2);
                let a = k as f64 * h;
                let partial = adaptive_simpson(&|x| spline.value(x), a, s, 1e-14 * h);
                (knot_integrals[k] + partial) / r
            }
        }
    }

    /// Control amplitude at fast time `t`.
    pub fn omega(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.omega_unchecked(t))
    }

    pub(crate) fn omega_unchecked(&self, t: f64) -> f64 {
        let s = (self.rate() * t).min(self.t_slow);
        2.0 * self.eps1 * self.u(s) * self.phase_unchecked(t).cos()
    }
}

/// Anything that yields a scalar control on a finite fast-time horizon.
pub trait Control: Send + Sync {
    fn horizon(&self) -> f64;
    fn omega(&self, t: f64) -> Result<f64>;
    /// Largest carrier frequency reached.
    fn max_frequency(&self) -> f64;
    /// Bound on `|omega| / 2`.
    fn amplitude_bound(&self) -> f64;
    /// The shared `eps1 * eps2` rate.
    fn rate(&self) -> f64;
    /// Segment boundaries in fast time, including 0 and the horizon.
    fn breakpoints(&self) -> Vec<f64>;
}

impl Control for ChirpedPulse {
    fn horizon(&self) -> f64 {
        ChirpedPulse::horizon(self)
    }

    fn omega(&self, t: f64) -> Result<f64> {
        ChirpedPulse::omega(self, t)
    }

    fn max_frequency(&self) -> f64 {
        self.v1
    }

    fn amplitude_bound(&self) -> f64 {
        self.eps1 * self.max_u
    }

    fn rate(&self) -> f64 {
        ChirpedPulse::rate(self)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, self.horizon()]
    }
}

/// Pulses played back to back; each segment restarts its own phase at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseControl {
    segments: Vec<ChirpedPulse>,
    /// Fast-time end of each segment.
    ends: Vec<f64>,
}

impl PiecewiseControl {
    pub fn new(segments: Vec<ChirpedPulse>) -> Result<Self> {
        let first = segments.first().ok_or_else(|| Error::argument("concatenation needs at least one pulse"))?;
        let (e1, e2) = (first.eps1, first.eps2);
        if segments.iter().any(|p| p.eps1 != e1 || p.eps2 != e2) {
            return Err(Error::argument("all concatenated pulses must share eps1 and eps2"));
        }
        let ends = segments
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p.horizon();
                Some(*acc)
            })
            .collect();
        Ok(Self { segments, ends })
    }

    pub fn segments(&self) -> &[ChirpedPulse] {
        &self.segments
    }

    /// Segment index and local time for global fast time `t`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let total = *self.ends.last().unwrap();
        if !(t >= 0.0 && t <= total * (1.0 + HORIZON_SLACK)) {
            return Err(Error::domain(format!("t = {t} outside [0, {total}]")));
        }
        let k = self.ends.partition_point(|&e| e <= t).min(self.segments.len() - 1);
        let start = if k == 0 { 0.0 } else { self.ends[k - 1] };
        let local = (t - start).clamp(0.0, self.segments[k].horizon());
        Ok((k, local))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (k, local) = self.locate(t)?;
        Ok(self.segments[k].omega_unchecked(local))
    }
}

impl Control for PiecewiseControl {
    fn horizon(&self) -> f64 {
        *self.ends.last().unwrap()
    }

    fn omega(&self, t: f64) -> Result<f64> {
        self.eval(t)
    }

    fn max_frequency(&self) -> f64 {
        self.segments.iter().map(|p| p.v1).fold(0.0, f64::max)
    }

    fn amplitude_bound(&self) -> f64 {
        self.segments.iter().map(|p| p.amplitude_bound()).fold(0.0, f64::max)
    }

    fn rate(&self) -> f64 {
        self.segments[0].rate()
    }

    fn breakpoints(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.ends.iter().copied()).collect()
    }
}

/// Convenience alias for the sine/linear construction.
pub fn synthesize_standard(v0: f64, v1: f64, eps1: f64, eps2: f64) -> Result<ChirpedPulse> {
    ChirpedPulse::standard(v0, v1, eps1, eps2)
}

pub fn concat(pulses: Vec<ChirpedPulse>) -> Result<PiecewiseControl> {
    PiecewiseControl::new(pulses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linear_table(v0: f64, v1: f64, n: usize) -> CubicSpline {
        CubicSpline::new(1.0, (0..n).map(|k| v0 + (v1 - v0) * k as f64 / (n - 1) as f64).collect()).unwrap()
    }

    #[test]
    fn omega_worked_value() {
        let p = ChirpedPulse::standard(3.0, 5.0, 0.1, 0.1).unwrap();
        assert!((p.phase(50.0).unwrap() - 175.0).abs() < 1e-12);
        let expect = 0.2 * (0.5 * std::f64::consts::PI).sin() * 175.0f64.cos();
        assert!((p.omega(50.0).unwrap() - expect).abs() < 1e-14);
        // Independent route: quadrature of f(eps1 eps2 tau).
        let q = adaptive_simpson(&|tau| p.f(0.01 * tau), 0.0, 50.0, 1e-12);
        assert!((q - 175.0).abs() < 1e-9);
    }

    #[test]
    fn omega_vanishes_at_both_ends_and_errors_outside() {
        let p = ChirpedPulse::standard(3.0, 5.0, 0.1, 0.1).unwrap();
        assert_eq!(p.omega(0.0).unwrap(), 0.0);
        assert!(p.omega(p.horizon()).unwrap().abs() < 1e-15);
        assert!(matches!(p.omega(-1.0), Err(Error::Domain(_))));
        assert!(matches!(p.omega(101.0), Err(Error::Domain(_))));
    }

    #[test]
    fn end_phase_is_mean_frequency_times_horizon() {
        let p = ChirpedPulse::standard(3.0, 5.0, 0.02, 0.05).unwrap();
        let expect = (3.0 + 5.0) / (2.0 * 0.02 * 0.05);
        assert!((p.phase(p.horizon()).unwrap() - expect).abs() < 1e-9 * expect);
        assert_eq!(p.phase(0.0).unwrap(), 0.0);
    }

    #[test]
    fn standard_pulse_examples() {
        let e1 = 10f64.powf(-5.0 / 3.0);
        let e2 = 10f64.powf(-7.0 / 3.0);
        let p = synthesize_standard(3.0, 5.0, e1, e2).unwrap();
        assert!((p.horizon() - 1e4).abs() < 1e-8);
        assert!(p.is_standard());
        assert!(synthesize_standard(0.5, 1.5, e1, e2).is_ok());
        assert!(synthesize_standard(5.0, 3.0, e1, e2).is_err());
        assert!(synthesize_standard(0.0, 3.0, e1, e2).is_err());
    }

    #[test]
    fn tabulated_linear_chirp_matches_closed_form() {
        use rand::{Rng, SeedableRng};
        let (v0, v1, e1, e2) = (3.0, 5.0, 0.05, 0.02);
        let closed = ChirpedPulse::standard(v0, v1, e1, e2).unwrap();
        let tab =
            ChirpedPulse::new(v0, v1, e1, e2, 1.0, Envelope::Sine, Chirp::tabulated(linear_table(v0, v1, 33))).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let t = rng.gen_range(0.0..closed.horizon());
            let a = closed.phase(t).unwrap();
            let b = tab.phase(t).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "t = {t}: {a} vs {b}");
        }
    }

    #[test]
    fn tabulated_profiles_are_validated() {
        let bad_u = CubicSpline::new(1.0, vec![0.0, 1.0, 0.5, 0.2]).unwrap();
        let r = ChirpedPulse::new(3.0, 5.0, 0.1, 0.1, 1.0, Envelope::Tabulated { spline: bad_u }, Chirp::Linear);
        assert!(r.is_err());
        let bad_f = CubicSpline::new(1.0, vec![3.0, 4.5, 4.0, 5.0]).unwrap();
        let r = ChirpedPulse::new(3.0, 5.0, 0.1, 0.1, 1.0, Envelope::Sine, Chirp::tabulated(bad_f));
        assert!(r.is_err());
        let n = 101;
        let good_u = CubicSpline::new(
            1.0,
            (0..n).map(|k| (std::f64::consts::PI * k as f64 / (n - 1) as f64).sin().max(0.0)).collect(),
        )
        .unwrap();
        let p = ChirpedPulse::new(3.0, 5.0, 0.1, 0.1, 1.0, Envelope::Tabulated { spline: good_u }, Chirp::Linear);
        assert!(p.is_ok());
    }

    #[test]
    fn concatenation_examples() {
        let (e1, e2) = (0.1, 0.1);
        let segs: Vec<_> = [(0.5, 1.5), (1.5, 2.5), (3.0, 5.0)]
            .iter()
            .map(|&(a, b)| ChirpedPulse::standard(a, b, e1, e2).unwrap())
            .collect();
        let pc = concat(segs.clone()).unwrap();
        assert!((pc.horizon() - 3.0 / (e1 * e2)).abs() < 1e-9);
        for &b in &pc.breakpoints()[1..3] {
            assert!(pc.eval(b).unwrap().abs() < 1e-14);
            assert!(pc.eval(b - 1e-9).unwrap().abs() < 1e-9);
        }
        let (k, local) = pc.locate(150.0).unwrap();
        assert_eq!(k, 1);
        assert!((local - 50.0).abs() < 1e-12);
        assert!((pc.eval(150.0).unwrap() - segs[1].omega(50.0).unwrap()).abs() < 1e-12);

        let single = concat(vec![segs[2].clone()]).unwrap();
        for t in [0.0, 12.5, 33.3, 99.0, 100.0] {
            assert!((single.eval(t).unwrap() - segs[2].omega(t).unwrap()).abs() < 1e-15);
        }
        let mixed = vec![segs[0].clone(), ChirpedPulse::standard(3.0, 5.0, 0.1, 0.2).unwrap()];
        assert!(concat(mixed).is_err());
        assert!(concat(vec![]).is_err());
        assert!(matches!(pc.eval(301.0), Err(Error::Domain(_))));
    }

    #[test]
    fn serde_round_trip_rebuilds_caches() {
        let p = ChirpedPulse::new(3.0, 5.0, 0.1, 0.1, 1.0, Envelope::Sine, Chirp::tabulated(linear_table(3.0, 5.0, 9)))
            .unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: ChirpedPulse = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        #[test]
        fn amplitude_bound_and_phase_derivative(
            v0 in 0.1..5.0f64, dv in 0.1..5.0f64,
            e1 in 0.01..0.3f64, e2 in 0.01..0.3f64, frac in 0.01..0.99f64,
        ) {
            let p = ChirpedPulse::standard(v0, v0 + dv, e1, e2).unwrap();
            let t = frac * p.horizon();
            prop_assert!(p.omega(t).unwrap().abs() <= 2.0 * e1 + 1e-15);
            let h = 1e-3;
            let d = (p.phase(t + h).unwrap() - p.phase(t - h).unwrap()) / (2.0 * h);
            prop_assert!((d - p.f(e1 * e2 * t)).abs() <= 1e-6 * p.f(e1 * e2 * t).max(1.0));
        }
    }
}
