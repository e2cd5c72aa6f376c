//! TOML run configuration. Levels are 1-based here and 0-based everywhere in
//! the library.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{concat, Chirp, ChirpedPulse, Envelope, PiecewiseControl};
use crate::error::{Error, Result};
use crate::model::{four_level_coupling, DeltaChoice, Drift, EnsembleSystem, Interval, ParamBox};
use crate::propagator::StepConfig;

/// Output format of tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Built-in systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `lambda = (0, 1 + a, 3 + 2a, 7)` with the fixed integer coupling.
    FourLevel,
}

/// Where each coupling is picked inside its interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DeltaSpec {
    /// The same relative position `t` in every interval.
    Uniform { t: f64 },
    /// `count` seeded draws per parameter point.
    Random { count: usize },
}

impl Default for DeltaSpec {
    fn default() -> Self {
        DeltaSpec::Uniform { t: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drift: Vec<Drift>,
    /// Exactly known couplings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Vec<Vec<f64>>>,
    /// Coupling uncertainty as `[lo, hi]` per entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_intervals: Option<Vec<Vec<[f64; 2]>>>,
    /// Parameter box, one `[lo, hi]` per axis. Defaults to the hull of `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
    /// Parameter points to simulate.
    pub alpha: Vec<Vec<f64>>,
    #[serde(default)]
    pub delta: DeltaSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub v0: f64,
    pub v1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub v0: f64,
    pub v1: f64,
    #[serde(default = "default_t_slow")]
    pub t_slow: f64,
    #[serde(default = "default_envelope")]
    pub envelope: Envelope,
    #[serde(default = "default_chirp")]
    pub chirp: Chirp,
    /// Successive sweep windows for concatenated pulses.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<Window>,
}

fn default_t_slow() -> f64 {
    1.0
}

fn default_envelope() -> Envelope {
    Envelope::Sine
}

fn default_chirp() -> Chirp {
    Chirp::Linear
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
    /// `eps2 = eps1^kappa`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps1_list: Vec<f64>,
    #[serde(default = "default_spp")]
    pub steps_per_period: usize,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    pub p: usize,
    pub q: usize,
    /// Initial level; defaults to `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_spp() -> usize {
    StepConfig::default().steps_per_period
}

fn default_samples() -> usize {
    StepConfig::default().n_samples
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    #[serde(default)]
    pub margin: f64,
    /// Also require every gap outside the doubled window.
    #[serde(default)]
    pub prop2: bool,
    /// Evaluate on a grid with this many points per axis instead of vertices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self { margin: 0.0, prop2: false, grid: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    1
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_dir(), format: Format::Csv, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub pulse: PulseSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub check: CheckSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn bad(field: &str, reason: impl Into<String>) -> Error {
    Error::config(field, reason)
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Parse { path: origin.to_path_buf(), reason: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| bad("config", e.to_string()))
    }

    /// Structural checks that do not need the ensemble to be built.
    pub fn validate(&self) -> Result<()> {
        let n = self.levels()?;
        let run = &self.run;
        for (name, v) in [("run.p", run.p), ("run.q", run.q), ("run.initial", run.initial.unwrap_or(run.p))] {
            if v == 0 || v > n {
                return Err(bad(name, format!("level {v} is not in 1..={n}")));
            }
        }
        if run.p >= run.q {
            return Err(bad("run.q", "need p < q"));
        }
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(bad(name, format!("{x} is not positive"))),
            _ => Ok(()),
        };
        positive("run.eps1", run.eps1)?;
        positive("run.eps2", run.eps2)?;
        for &e in &run.eps1_list {
            positive("run.eps1_list", Some(e))?;
        }
        if let Some(k) = run.kappa {
            if !(k > 1.0) {
                return Err(bad("run.kappa", format!("coupling exponent {k} must exceed 1")));
            }
            if run.eps2.is_some() {
                return Err(bad("run.eps2", "give either eps2 or kappa, not both"));
            }
        }
        if run.steps_per_period == 0 {
            return Err(bad("run.steps_per_period", "must be positive"));
        }
        if run.n_samples < 2 {
            return Err(bad("run.n_samples", "need at least 2"));
        }
        if self.system.alpha.is_empty() {
            return Err(bad("system.alpha", "need at least one parameter point"));
        }
        if let DeltaSpec::Random { count: 0 } = self.system.delta {
            return Err(bad("system.delta.count", "need at least one draw"));
        }
        if self.output.workers == 0 {
            return Err(bad("output.workers", "need at least one worker"));
        }
        Ok(())
    }

    /// Number of levels implied by the `[system]` table.
    pub fn levels(&self) -> Result<usize> {
        let s = &self.system;
        match (s.preset, s.drift.len()) {
            (Some(Preset::FourLevel), 0) => Ok(4),
            (Some(_), _) => Err(bad("system.drift", "a preset fixes the drift")),
            (None, 0) => Err(bad("system.drift", "missing drift (or preset)")),
            (None, n) => Ok(n),
        }
    }

    pub fn target(&self) -> (usize, usize) {
        (self.run.p - 1, self.run.q - 1)
    }

    pub fn initial(&self) -> usize {
        self.run.initial.unwrap_or(self.run.p) - 1
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig { steps_per_period: self.run.steps_per_period, n_samples: self.run.n_samples }
    }

    fn domain(&self) -> Result<ParamBox> {
        if let Some(d) = &self.system.domain {
            let axes = d.iter().map(|&[lo, hi]| Interval::new(lo, hi)).collect::<Result<Vec<_>>>()?;
            return ParamBox::new(axes);
        }
        let dim = self.system.alpha[0].len();
        if self.system.alpha.iter().any(|a| a.len() != dim) {
            return Err(bad("system.alpha", "parameter points have different dimensions"));
        }
        let axes = (0..dim)
            .map(|i| {
                let vals = self.system.alpha.iter().map(|a| a[i]);
                let lo = vals.clone().fold(f64::INFINITY, f64::min);
                let hi = vals.fold(f64::NEG_INFINITY, f64::max);
                Interval::new(lo, hi)
            })
            .collect::<Result<Vec<_>>>()?;
        ParamBox::new(axes)
    }

    pub fn ensemble(&self) -> Result<EnsembleSystem> {
        let n = self.levels()?;
        let domain = self.domain()?;
        let s = &self.system;
        if let Some(Preset::FourLevel) = s.preset {
            if domain.dim() != 1 {
                return Err(bad("system.domain", "the four-level preset has one parameter"));
            }
            if s.coupling.is_some() || s.coupling_intervals.is_some() {
                return Err(bad("system.coupling", "a preset fixes the coupling"));
            }
            return EnsembleSystem::four_level_benchmark(domain.intervals()[0]);
        }
        let intervals: Vec<Vec<Interval>> = match (&s.coupling, &s.coupling_intervals) {
            (Some(m), None) => m.iter().map(|row| row.iter().map(|&x| Interval::point(x)).collect()).collect(),
            (None, Some(m)) => m
                .iter()
                .map(|row| row.iter().map(|&[lo, hi]| Interval::new(lo, hi)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?,
            _ => return Err(bad("system.coupling", "give exactly one of coupling or coupling_intervals")),
        };
        if intervals.len() != n {
            return Err(bad("system.coupling", format!("expected {n} rows")));
        }
        EnsembleSystem::new(s.drift.clone(), intervals, domain)
    }

    /// Delta choices for one parameter point, labelled.
    pub fn delta_choices(&self, n: usize, point: usize) -> Result<Vec<(String, DeltaChoice)>> {
        use rand::SeedableRng;
        match self.system.delta {
            DeltaSpec::Uniform { t } => Ok(vec![(format!("uniform:{t}"), DeltaChoice::uniform(n, t)?)]),
            DeltaSpec::Random { count } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.run.seed);
                rng.set_stream(point as u64);
                Ok((0..count)
                    .map(|k| (format!("random:{}:{k}", self.run.seed), DeltaChoice::random(n, &mut rng)))
                    .collect())
            }
        }
    }

    pub fn pulse_with(&self, v0: f64, v1: f64, eps1: f64, eps2: f64) -> Result<ChirpedPulse> {
        let p = &self.pulse;
        let chirp = match &p.chirp {
            Chirp::Tabulated { spline, .. } => Chirp::tabulated(spline.clone()),
            other => other.clone(),
        };
        ChirpedPulse::new(v0, v1, eps1, eps2, p.t_slow, p.envelope.clone(), chirp)
    }

    pub fn pulse(&self, eps1: f64, eps2: f64) -> Result<ChirpedPulse> {
        self.pulse_with(self.pulse.v0, self.pulse.v1, eps1, eps2)
    }

    pub fn concatenated(&self, eps1: f64, eps2: f64) -> Result<PiecewiseControl> {
        if self.pulse.segments.is_empty() {
            return Err(bad("pulse.segments", "no segments to concatenate"));
        }
        let pulses = self
            .pulse
            .segments
            .iter()
            .map(|w| ChirpedPulse::new(w.v0, w.v1, eps1, eps2, self.pulse.t_slow, Envelope::Sine, Chirp::Linear))
            .collect::<Result<Vec<_>>>()?;
        concat(pulses)
    }

    fn eps2_for(&self, eps1: f64) -> f64 {
        match (self.run.kappa, self.run.eps2) {
            (Some(k), _) => eps1.powf(k),
            (None, Some(e2)) => e2,
            (None, None) => eps1,
        }
    }

    /// `(eps1, eps2)` for a single run.
    pub fn scales(&self) -> Result<(f64, f64)> {
        let e1 = self.run.eps1.ok_or_else(|| bad("run.eps1", "missing"))?;
        if self.run.kappa.is_none() && self.run.eps2.is_none() {
            return Err(bad("run.eps2", "missing (give eps2 or kappa)"));
        }
        Ok((e1, self.eps2_for(e1)))
    }

    /// `(eps1, eps2)` along `eps1_list`: `eps2` follows `kappa` if given, is
    /// held at `eps2` if given, and equals `eps1` otherwise.
    pub fn scale_list(&self) -> Result<Vec<(f64, f64)>> {
        if self.run.eps1_list.is_empty() {
            return Err(bad("run.eps1_list", "missing"));
        }
        Ok(self.run.eps1_list.iter().map(|&e| (e, self.eps2_for(e))).collect())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Parse { path: path.to_path_buf(), reason: e.to_string() })?;
    RunConfig::from_toml_str(&text, path)
}

pub fn save_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    std::fs::write(path, cfg.to_toml_string()?)?;
    Ok(())
}

/// The four-level benchmark at five parameter values straddling the
/// transferable range.
pub fn four_level_example() -> RunConfig {
    RunConfig {
        system: SystemSpec {
            preset: Some(Preset::FourLevel),
            drift: vec![],
            coupling: None,
            coupling_intervals: None,
            domain: None,
            alpha: [-0.6, -0.3, -0.1, 0.1, 0.3].iter().map(|&a| vec![a]).collect(),
            delta: DeltaSpec::Uniform { t: 0.0 },
        },
        pulse: PulseSpec {
            v0: 3.0,
            v1: 5.0,
            t_slow: 1.0,
            envelope: Envelope::Sine,
            chirp: Chirp::Linear,
            segments: vec![],
        },
        run: RunSpec {
            eps1: Some(10f64.powf(-5.0 / 3.0)),
            eps2: Some(10f64.powf(-7.0 / 3.0)),
            kappa: None,
            eps1_list: vec![],
            steps_per_period: default_spp(),
            n_samples: default_samples(),
            p: 3,
            q: 4,
            initial: None,
            seed: 0,
        },
        check: CheckSpec::default(),
        output: OutputSpec::default(),
    }
}

/// Explicit drift and coupling equal to the preset, for configs that need to
/// edit them.
pub fn four_level_explicit() -> SystemSpec {
    let c = four_level_coupling();
    SystemSpec {
        preset: None,
        drift: vec![
            Drift::affine(0.0, vec![0.0]),
            Drift::affine(1.0, vec![1.0]),
            Drift::affine(3.0, vec![2.0]),
            Drift::affine(7.0, vec![0.0]),
        ],
        coupling: Some((0..4).map(|j| (0..4).map(|k| c[(j, k)]).collect()).collect()),
        coupling_intervals: None,
        domain: None,
        alpha: vec![vec![-0.1]],
        delta: DeltaSpec::Uniform { t: 0.0 },
    }
}
