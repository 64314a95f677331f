//! Experiment configuration, read from JSON. Exact quantities (frequency
//! coefficients, flux coefficients, breakpoints, intervals) are rational
//! strings such as `"3/4"`.

use std::path::Path;
use std::sync::Arc;

use apcl_core::{
    combine, group_basis, parse_rational, Frequency, FrequencyBasis, PiecewiseFlux, SolverConfig,
    SpectrumGroupBasis, TrigPoly, DEFAULT_CFL,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    CheckFlux,
    Decay,
    Contraction,
    Counterexample,
    Convergence,
    Spectrum,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::CheckFlux => "check-flux",
            Kind::Decay => "decay",
            Kind::Contraction => "contraction",
            Kind::Counterexample => "counterexample",
            Kind::Convergence => "convergence",
            Kind::Spectrum => "spectrum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

/// A frequency in ℝⁿ: one coefficient vector over the basis per component.
pub type FrequencyConfig = Vec<Vec<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum TermConfig {
    Constant {
        value: f64,
    },
    Sine {
        freq: FrequencyConfig,
        amplitude: f64,
    },
    Cosine {
        freq: FrequencyConfig,
        amplitude: f64,
    },
    /// `re + i·im` times `e^{2πiλ·x}`; the conjugate partner is implied.
    Exp {
        freq: FrequencyConfig,
        re: f64,
        im: f64,
    },
}

/// Random real data: `terms` exponentials whose frequencies are integer
/// combinations, with entries in `[-kmax, kmax]`, of the unit frequencies
/// `e_j ⊗ b_i` (component `j`, basis element `b_i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomData {
    pub seed: u64,
    pub terms: usize,
    pub kmax: i64,
    pub amplitude: f64,
    #[serde(default)]
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataConfig {
    Terms { terms: Vec<TermConfig> },
    Random { random: RandomData },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxConfig {
    pub breakpoints: Vec<String>,
    /// `[piece][component][degree]`, each coefficient a rational vector over the basis.
    pub pieces: Vec<Vec<Vec<Vec<String>>>>,
    pub range: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_end: f64,
    #[serde(default)]
    pub record_times: Vec<f64>,
    /// Adds this many equally spaced record times in `(0, t_end]`.
    #[serde(default)]
    pub record_count: usize,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeConfig {
    pub radii: Vec<f64>,
    pub samples_per_unit: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TravelingWaveConfig {
    pub a: String,
    pub b: String,
    pub k: Vec<i64>,
}

/// Optional pass/fail thresholds; a violated threshold yields exit code 4.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_final_l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_outside: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect_degenerate: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisConfig>,
    pub n: usize,
    pub flux: FluxConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub data: Vec<DataConfig>,
    /// Spectrum generating the group for check-flux and the traveling wave;
    /// defaults to the standard lattice ℤⁿ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<FrequencyConfig>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grids: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cube: Option<CubeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave: Option<TravelingWaveConfig>,
    /// Extra rows appended to `Λ` for the spectrum probe.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub enlarge: Vec<FrequencyConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<Vec<i64>>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn config_err(path: &str, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks the kind-specific required fields and evaluates every exact
    /// quantity once, so that nothing fails to parse mid-experiment.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let basis = self.frequency_basis()?;
        self.parsed_flux(&basis)?;
        for (i, d) in self.data.iter().enumerate() {
            self.parse_data(&basis, d)
                .map_err(|e| prefix(&format!("data[{i}]"), e))?;
        }
        let need = |ok: bool, field: &str, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(config_err(
                    field,
                    format!("required for {}: {what}", self.kind.name()),
                ))
            }
        };
        let grid_ok =
            !self.grid.is_empty() && self.grid.len() <= 3 && self.grid.iter().all(|&n| n >= 2);
        match self.kind {
            Kind::CheckFlux => {}
            Kind::Decay => {
                need(self.data.len() == 1, "data", "exactly one data set")?;
                need(!self.grid.is_empty(), "grid", "cells per axis")?;
                need(self.solver.is_some(), "solver", "end time")?;
            }
            Kind::Contraction => {
                need(self.data.len() == 2, "data", "exactly two data sets")?;
                need(grid_ok, "grid", "cells per axis")?;
                need(self.steps.is_some(), "steps", "number of joint steps")?;
            }
            Kind::Counterexample => {
                need(
                    self.wave.is_some(),
                    "wave",
                    "interval [a, b] and direction k",
                )?;
                need(grid_ok, "grid", "cells per axis")?;
                need(self.solver.is_some(), "solver", "end time")?;
            }
            Kind::Convergence => {
                need(
                    self.wave.is_some(),
                    "wave",
                    "interval [a, b] and direction k",
                )?;
                need(self.grids.len() >= 2, "grids", "at least two resolutions")?;
                need(self.solver.is_some(), "solver", "end time")?;
            }
            Kind::Spectrum => {
                need(self.data.len() == 1, "data", "exactly one data set")?;
                need(!self.grid.is_empty(), "grid", "cells per axis")?;
                need(self.solver.is_some(), "solver", "end time")?;
                need(
                    !self.probes.is_empty(),
                    "probes",
                    "torus frequencies to probe",
                )?;
            }
        }
        if let Some(s) = &self.solver {
            self.solver_config(s)
                .validate()
                .map_err(|e| config_err("solver", e))?;
        }
        if let Some(c) = &self.cube {
            if c.radii.is_empty() || c.radii[0] <= 0.0 || c.radii.windows(2).any(|w| w[1] <= w[0]) {
                return Err(config_err(
                    "cube.radii",
                    "must be positive and strictly increasing",
                ));
            }
            if c.samples_per_unit == 0 {
                return Err(config_err("cube.samples_per_unit", "must be positive"));
            }
        }
        if let Some(w) = &self.wave {
            parse_rational(&w.a).map_err(|e| config_err("wave.a", e))?;
            parse_rational(&w.b).map_err(|e| config_err("wave.b", e))?;
        }
        if let Some(spec) = &self.spectrum {
            for (i, f) in spec.iter().enumerate() {
                parse_frequency(&basis, self.n, f)
                    .map_err(|e| prefix(&format!("spectrum[{i}]"), e))?;
            }
        }
        for (i, f) in self.enlarge.iter().enumerate() {
            parse_frequency(&basis, self.n, f).map_err(|e| prefix(&format!("enlarge[{i}]"), e))?;
        }
        Ok(())
    }

    pub fn frequency_basis(&self) -> Result<Arc<FrequencyBasis>, HarnessError> {
        match &self.basis {
            None => Ok(FrequencyBasis::rational()),
            Some(b) => FrequencyBasis::new(b.labels.clone(), b.values.clone())
                .map_err(|e| config_err("basis", e)),
        }
    }

    pub fn parsed_flux(&self, basis: &Arc<FrequencyBasis>) -> Result<PiecewiseFlux, HarnessError> {
        let f = &self.flux;
        let flux =
            PiecewiseFlux::parse(basis, &f.breakpoints, &f.pieces, (&f.range[0], &f.range[1]))
                .map_err(|e| config_err("flux", e))?;
        if flux.n() != self.n {
            return Err(config_err(
                "flux.pieces",
                format!("{} components, expected n = {}", flux.n(), self.n),
            ));
        }
        Ok(flux)
    }

    pub fn parse_data(
        &self,
        basis: &Arc<FrequencyBasis>,
        d: &DataConfig,
    ) -> Result<TrigPoly, HarnessError> {
        match d {
            DataConfig::Terms { terms } => {
                let mut u = TrigPoly::zero(basis, self.n);
                for (i, t) in terms.iter().enumerate() {
                    let path = format!("terms[{i}]");
                    let term = match t {
                        TermConfig::Constant { value } => TrigPoly::constant(basis, self.n, *value),
                        TermConfig::Sine { freq, amplitude } => TrigPoly::sine(
                            &parse_frequency(basis, self.n, freq).map_err(|e| prefix(&path, e))?,
                            *amplitude,
                        ),
                        TermConfig::Cosine { freq, amplitude } => TrigPoly::cosine(
                            &parse_frequency(basis, self.n, freq).map_err(|e| prefix(&path, e))?,
                            *amplitude,
                        ),
                        TermConfig::Exp { freq, re, im } => {
                            let f = parse_frequency(basis, self.n, freq)
                                .map_err(|e| prefix(&path, e))?;
                            TrigPoly::from_terms(basis, self.n, [(f, Complex64::new(*re, *im))])
                                .map_err(|e| config_err(&path, e))?
                        }
                    };
                    u = combine(1.0, &u, 1.0, &term).map_err(|e| config_err(&path, e))?;
                }
                Ok(u)
            }
            DataConfig::Random { random } => random_data(basis, self.n, random),
        }
    }

    pub fn parsed_data(&self, basis: &Arc<FrequencyBasis>) -> Result<Vec<TrigPoly>, HarnessError> {
        self.data
            .iter()
            .map(|d| self.parse_data(basis, d))
            .collect()
    }

    pub fn group(&self, basis: &Arc<FrequencyBasis>) -> Result<SpectrumGroupBasis, HarnessError> {
        match &self.spectrum {
            None => {
                SpectrumGroupBasis::standard(basis, self.n).map_err(|e| config_err("spectrum", e))
            }
            Some(spec) => {
                let freqs = spec
                    .iter()
                    .map(|f| parse_frequency(basis, self.n, f))
                    .collect::<Result<Vec<_>, _>>()?;
                group_basis(basis, self.n, &freqs).map_err(|e| config_err("spectrum", e))
            }
        }
    }

    pub fn enlarge_rows(
        &self,
        basis: &Arc<FrequencyBasis>,
    ) -> Result<Vec<Frequency>, HarnessError> {
        self.enlarge
            .iter()
            .map(|f| parse_frequency(basis, self.n, f))
            .collect()
    }

    pub fn solver_config(&self, s: &SolverSection) -> SolverConfig {
        let mut cfg = SolverConfig::new(s.t_end);
        cfg.cfl = s.cfl;
        cfg.record_times = s.record_times.clone();
        cfg.record_times
            .extend((1..=s.record_count).map(|i| s.t_end * i as f64 / s.record_count as f64));
        cfg
    }
}

fn prefix(path: &str, e: HarnessError) -> HarnessError {
    match e {
        HarnessError::Config(m) => HarnessError::Config(format!("{path}.{m}")),
        other => other,
    }
}

pub fn parse_frequency(
    basis: &Arc<FrequencyBasis>,
    n: usize,
    f: &FrequencyConfig,
) -> Result<Frequency, HarnessError> {
    if f.len() != n {
        return Err(config_err(
            "freq",
            format!("{} components, expected n = {n}", f.len()),
        ));
    }
    Frequency::parse(basis, f).map_err(|e| config_err("freq", e))
}

fn random_data(
    basis: &Arc<FrequencyBasis>,
    n: usize,
    r: &RandomData,
) -> Result<TrigPoly, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let q = basis.dim();
    let mut u = TrigPoly::constant(basis, n, r.mean);
    for _ in 0..r.terms {
        let comps: Vec<Vec<String>> = (0..n)
            .map(|_| {
                (0..q)
                    .map(|_| rng.gen_range(-r.kmax..=r.kmax).to_string())
                    .collect()
            })
            .collect();
        let f = Frequency::parse(basis, &comps).map_err(|e| config_err("random", e))?;
        let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * r.amplitude;
        if f.is_zero() {
            continue;
        }
        let term = TrigPoly::from_terms(basis, n, [(f, a)]).map_err(|e| config_err("random", e))?;
        u = combine(1.0, &u, 1.0, &term).map_err(|e| config_err("random", e))?;
    }
    Ok(u)
}
