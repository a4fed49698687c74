//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use lrkit_core::algebra::{pauli, Observable};
use lrkit_core::bounds::DEFAULT_A_INTERVAL;
use lrkit_core::dynamics::{time_grid, DEFAULT_TIME_POINTS};
use lrkit_core::geometry::{DecayFunction, GraphSpec, MetricGraph, Site};
use lrkit_core::model::{MatrixSpec, Model, ModelSpec};
use lrkit_core::{CMatrix, SITE_CAP};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GraphSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub decay: DecaySpec,
    pub dynamics: DynamicsSpec,
    #[serde(default)]
    pub lightcone: LightConeSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub test_hooks: TestHooks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_a")]
    pub a: f64,
    /// Bracket for the velocity optimization.
    #[serde(default)]
    pub a_interval: Option<(f64, f64)>,
}

fn default_epsilon() -> f64 {
    1.0
}

fn default_a() -> f64 {
    1.0
}

impl Default for DecaySpec {
    fn default() -> Self {
        Self { epsilon: default_epsilon(), a: default_a(), a_interval: None }
    }
}

/// A single-site operator: a Pauli index (0 is the identity) or an explicit matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    #[serde(default)]
    pub pauli: Option<usize>,
    #[serde(default)]
    pub matrix: Option<MatrixSpec>,
}

impl OperatorSpec {
    pub fn matrix(&self) -> Result<CMatrix, CliError> {
        let m = match (&self.pauli, &self.matrix) {
            (Some(k), None) => pauli(*k)?,
            (None, Some(m)) => m.to_matrix()?,
            _ => return Err(CliError::Config("an operator needs exactly one of `pauli` or `matrix`".into())),
        };
        if m.nrows() != 2 {
            return Err(CliError::Config("operators must act on a single spin-1/2 site".into()));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacedOperator {
    pub site: Vec<i64>,
    #[serde(default)]
    pub pauli: Option<usize>,
    #[serde(default)]
    pub matrix: Option<MatrixSpec>,
}

impl PlacedOperator {
    pub fn operator(&self) -> OperatorSpec {
        OperatorSpec { pauli: self.pauli, matrix: self.matrix.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub observable: PlacedOperator,
    pub probe: OperatorSpec,
    /// Defaults to every site other than the observable's.
    #[serde(default)]
    pub probe_sites: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightConeSpec {
    /// Absolute threshold; defaults to a tenth of `2‖A‖‖B‖`.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Defaults to every distance reachable inside the volume.
    #[serde(default)]
    pub distances: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: None, formats: default_formats() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestHooks {
    /// Multiplies `g_a` in every bound. Values below one corrupt the bound.
    #[serde(default = "one")]
    pub g_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for TestHooks {
    fn default() -> Self {
        Self { g_scale: 1.0 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// Rejects volumes above the site cap unless `allow_large` is set.
    pub fn check_cap(&self, allow_large: bool) -> Result<(), CliError> {
        let n = self.geometry.site_count();
        if n > SITE_CAP && !allow_large {
            return Err(CliError::ResourceCap(n));
        }
        Ok(())
    }

    /// Builds every runtime object the commands share.
    pub fn resolve(&self) -> Result<Experiment, CliError> {
        let graph = self.geometry.build()?;
        let model = self.model.build(&graph)?;
        let d = &self.decay;
        if !(d.a >= 0.0 && d.a.is_finite()) {
            return Err(CliError::Config(format!("decay weight a = {} must be a finite non-negative number", d.a)));
        }
        let decay = DecayFunction::new(graph.dimension(), d.epsilon, d.a)?;
        let a_interval = d.a_interval.unwrap_or(DEFAULT_A_INTERVAL);

        let lookup = |coords: &Vec<i64>| {
            graph
                .index_of(&Site(coords.clone()))
                .ok_or_else(|| CliError::Config(format!("site {coords:?} is outside the geometry")))
        };
        let spec = &self.dynamics;
        let origin = lookup(&spec.observable.site)?;
        let observable = Observable::new(spec.observable.operator().matrix()?, vec![origin])?;
        let probe = spec.probe.matrix()?;
        let probe_sites = match &spec.probe_sites {
            Some(list) => list.iter().map(lookup).collect::<Result<Vec<_>, _>>()?,
            None => (0..graph.len()).filter(|&s| s != origin).collect(),
        };
        if probe_sites.is_empty() {
            return Err(CliError::Config("no probe sites".into()));
        }
        let times = match (&spec.times, spec.t_max) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either `times` or `t_max`, not both".into())),
            (Some(ts), None) => ts.clone(),
            (None, Some(t_max)) => time_grid(t_max, spec.points.unwrap_or(DEFAULT_TIME_POINTS))?,
            (None, None) => return Err(CliError::Config("the time grid needs `times` or `t_max`".into())),
        };
        if times.is_empty() || times.iter().any(|t| !t.is_finite()) {
            return Err(CliError::Config("the time grid must be a non-empty list of finite numbers".into()));
        }
        if !(self.test_hooks.g_scale >= 0.0) {
            return Err(CliError::Config("test_hooks.g_scale must be non-negative".into()));
        }
        Ok(Experiment { graph, model, decay, a_interval, observable, probe, probe_sites, times })
    }
}

/// A resolved configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub graph: MetricGraph,
    pub model: Model,
    pub decay: DecayFunction,
    pub a_interval: (f64, f64),
    pub observable: Observable,
    pub probe: CMatrix,
    pub probe_sites: Vec<usize>,
    pub times: Vec<f64>,
}

impl Experiment {
    pub fn origin(&self) -> usize {
        self.observable.support()[0]
    }

    pub fn probe_at(&self, site: usize) -> Observable {
        Observable::new(self.probe.clone(), vec![site]).expect("2x2 probe on one site")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "geometry": {"length": 2},
        "model": {"model": "heisenberg", "J": 1.0},
        "dynamics": {"observable": {"site": [0], "pauli": 3}, "probe": {"pauli": 3}, "times": [0.5]}
    }"#;

    #[test]
    fn minimal_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.decay, DecaySpec::default());
        assert_eq!(cfg.seed, 0);
        let exp = cfg.resolve().unwrap();
        assert_eq!(exp.probe_sites, vec![1]);
        assert_eq!(exp.times, vec![0.5]);
        assert_eq!(exp.a_interval, DEFAULT_A_INTERVAL);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(ExperimentConfig::parse(""), Err(CliError::Config(_))));
        assert!(matches!(ExperimentConfig::parse("{}"), Err(CliError::Config(_))));
        let unknown = MINIMAL.replace("\"seed\"", "x").replace("\"J\": 1.0", "\"J\": 1.0, \"K\": 2");
        assert!(ExperimentConfig::parse(&unknown).is_err());
        let outside = MINIMAL.replace("\"site\": [0]", "\"site\": [5]");
        assert!(ExperimentConfig::parse(&outside).unwrap().resolve().is_err());
        let both = MINIMAL.replace("\"pauli\": 3}, \"probe\"", "\"pauli\": 3, \"matrix\": [[1,0],[0,0],[0,0],[1,0]]}, \"probe\"");
        assert!(ExperimentConfig::parse(&both).unwrap().resolve().is_err());
        let negative_a = MINIMAL.replace("\"model\": {", "\"decay\": {\"a\": -1.0}, \"model\": {");
        assert!(ExperimentConfig::parse(&negative_a).unwrap().resolve().is_err());
    }

    #[test]
    fn cap() {
        let big = MINIMAL.replace("\"length\": 2", "\"nu\": 1, \"box_radius\": 6");
        let cfg = ExperimentConfig::parse(&big).unwrap();
        assert!(matches!(cfg.check_cap(false), Err(CliError::ResourceCap(13))));
        assert!(cfg.check_cap(true).is_ok());
    }

    #[test]
    fn linspace_grid() {
        let cfg = MINIMAL.replace("\"times\": [0.5]", "\"t_max\": 2.0, \"points\": 5");
        let exp = ExperimentConfig::parse(&cfg).unwrap().resolve().unwrap();
        assert_eq!(exp.times, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }
}
