//! TOML scenario files.
//!
//! ```toml
//! name = "example"
//! seed = 0                      # optional, pole-placement randomization
//!
//! [plant]
//! a = [[-1.0, 0.0], [0.0, -2.0]]
//! b = [[1.0], [1.0]]
//! c = [[1.0, 0.0]]
//! e = [[1.0], [0.0]]
//! x0 = [1.0, 0.0]
//!
//! [[channels]]                  # one per disturbance input
//! bias = 0.0
//! harmonics = [{ amplitude = 1.0, frequency = 2.0, phase = 0.0 }]
//!
//! [[filters]]                   # one per disturbance input, order = generator order
//! g = [[0.0, 1.0], [-2.0, -3.0]]
//! l = [0.0, 1.0]
//!
//! [observer]                    # exactly one of k1 / poles
//! poles = [-2.0, [-3.0, 1.0], [-3.0, -1.0]]
//!
//! [run]                         # every key optional
//! algorithm = "mre"             # gradient | mre | ideal | openloop
//! gain = 25.0
//! tau = 1.0
//! step = 0.001
//! duration = 100.0
//! stride = 10
//! settle_eps = 0.05
//! dobs_input = "estimate"       # estimate | true_state
//! max_harmonics = 4
//! ```

use std::path::Path;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DisturbanceChannel, FilterPair, HarmonicComponent, LtiPlant};
use crate::numerics::{from_rows, to_rows, Matrix, Spectrum, Vector};
use crate::sim::{Algorithm, DobsInput, ScenarioConfig, DEFAULT_SETTLE_EPS, DEFAULT_STEP};
use crate::uio::ObserverGain;

/// Bundled scenarios addressable by name instead of path.
const BUNDLED: &[(&str, &str)] = &[
    ("worked_example", include_str!("../scenarios/worked_example.toml")),
    ("paper_example", include_str!("../scenarios/worked_example.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub plant: PlantSection,
    pub channels: Vec<ChannelSection>,
    pub filters: Vec<FilterSection>,
    pub observer: ObserverSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default)]
    pub bias: f64,
    #[serde(default)]
    pub harmonics: Vec<HarmonicSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicSection {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub g: Vec<Vec<f64>>,
    pub l: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poles: Option<Vec<Pole>>,
}

/// A real pole `-2.0` or a complex one `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pole {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub algorithm: Algorithm,
    pub gain: f64,
    pub tau: f64,
    pub step: f64,
    pub duration: f64,
    pub stride: usize,
    pub settle_eps: f64,
    pub dobs_input: DobsInput,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_harmonics: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            algorithm: Algorithm::Mre,
            gain: 25.0,
            tau: 1.0,
            step: DEFAULT_STEP,
            duration: 100.0,
            stride: 10,
            settle_eps: DEFAULT_SETTLE_EPS,
            dobs_input: DobsInput::Estimate,
            max_harmonics: None,
        }
    }
}

fn matrix(rows: &[Vec<f64>], path: &str) -> Result<Matrix> {
    from_rows(rows).map_err(|e| e.at(path))
}

impl ScenarioFile {
    pub fn into_config(self) -> Result<ScenarioConfig> {
        let p = &self.plant;
        let plant = LtiPlant::new(
            matrix(&p.a, "plant.a")?,
            matrix(&p.b, "plant.b")?,
            matrix(&p.c, "plant.c")?,
            matrix(&p.e, "plant.e")?,
            Vector::from_vec(p.x0.clone()),
        )
        .map_err(|e| e.at("plant"))?;

        let channels = self
            .channels
            .iter()
            .enumerate()
            .map(|(i, ch)| {
                let comps = ch
                    .harmonics
                    .iter()
                    .map(|h| HarmonicComponent { amplitude: h.amplitude, frequency: h.frequency, phase: h.phase })
                    .collect();
                DisturbanceChannel::new(comps, ch.bias).map_err(|e| e.at(format!("channels[{i}]")))
            })
            .collect::<Result<Vec<_>>>()?;

        let filters = self
            .filters
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let path = format!("filters[{i}]");
                FilterPair::new(matrix(&f.g, &format!("{path}.g"))?, Vector::from_vec(f.l.clone())).map_err(|e| e.at(path))
            })
            .collect::<Result<Vec<_>>>()?;
        if filters.len() != channels.len() {
            return Err(Error::Config(format!("{} filters for {} channels", filters.len(), channels.len())).at("filters"));
        }

        let observer = match (&self.observer.k1, &self.observer.poles) {
            (Some(k1), None) => ObserverGain::Explicit(matrix(k1, "observer.k1")?),
            (None, Some(poles)) => ObserverGain::Poles(Spectrum(
                poles
                    .iter()
                    .map(|p| match *p {
                        Pole::Real(re) => Complex::new(re, 0.0),
                        Pole::Complex([re, im]) => Complex::new(re, im),
                    })
                    .collect(),
            )),
            _ => return Err(Error::Config("exactly one of `k1` or `poles` is required".into()).at("observer")),
        };

        let r = self.run;
        let cfg = ScenarioConfig {
            name: self.name,
            plant,
            channels,
            filters,
            observer,
            algorithm: r.algorithm,
            adapt_gain: r.gain,
            tau: r.tau,
            step: r.step,
            duration: r.duration,
            stride: r.stride,
            dobs_input: r.dobs_input,
            seed: self.seed,
            settle_eps: r.settle_eps,
            max_harmonics: r.max_harmonics,
        };
        cfg.validate().map_err(|e| e.at("run"))?;
        Ok(cfg)
    }

    pub fn from_config(cfg: &ScenarioConfig) -> ScenarioFile {
        let p = &cfg.plant;
        let observer = match &cfg.observer {
            ObserverGain::Explicit(k1) => ObserverSection { k1: Some(to_rows(k1)), poles: None },
            ObserverGain::Poles(s) => ObserverSection {
                k1: None,
                poles: Some(
                    s.iter()
                        .map(|z| if z.im == 0.0 { Pole::Real(z.re) } else { Pole::Complex([z.re, z.im]) })
                        .collect(),
                ),
            },
        };
        ScenarioFile {
            name: cfg.name.clone(),
            seed: cfg.seed,
            plant: PlantSection {
                a: to_rows(p.a()),
                b: to_rows(p.b()),
                c: to_rows(p.c()),
                e: to_rows(p.e()),
                x0: p.x0().iter().copied().collect(),
            },
            channels: cfg
                .channels
                .iter()
                .map(|ch| ChannelSection {
                    bias: ch.bias(),
                    harmonics: ch
                        .components()
                        .iter()
                        .map(|h| HarmonicSection { amplitude: h.amplitude, frequency: h.frequency, phase: h.phase })
                        .collect(),
                })
                .collect(),
            filters: cfg
                .filters
                .iter()
                .map(|f| FilterSection { g: to_rows(f.g()), l: f.l().iter().copied().collect() })
                .collect(),
            observer,
            run: RunSection {
                algorithm: cfg.algorithm,
                gain: cfg.adapt_gain,
                tau: cfg.tau,
                step: cfg.step,
                duration: cfg.duration,
                stride: cfg.stride,
                settle_eps: cfg.settle_eps,
                dobs_input: cfg.dobs_input,
                max_harmonics: cfg.max_harmonics,
            },
        }
    }
}

pub fn parse_scenario_str(text: &str) -> Result<ScenarioConfig> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_config()
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_scenario_str(&text)
}

pub fn serialize_scenario(cfg: &ScenarioConfig) -> Result<String> {
    toml::to_string(&ScenarioFile::from_config(cfg)).map_err(|e| Error::Parse(e.to_string()))
}

pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Loads a scenario from a file path, falling back to a bundled name.
pub fn load_scenario(spec: &str) -> Result<ScenarioConfig> {
    let path = Path::new(spec);
    if path.exists() {
        return parse_scenario(path);
    }
    match bundled_scenario(spec) {
        Some(text) => parse_scenario_str(text),
        None => Err(Error::Parse(format!("{spec}: no such file or bundled scenario"))),
    }
}
