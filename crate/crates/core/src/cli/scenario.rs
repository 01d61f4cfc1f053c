//! Scenario files: a versioned TOML description of one simulation.

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{twisted_configuration, AnalysisError, ClassifyOptions, TwistedSpec};
use crate::dynamics::{Algorithm, Configuration, Drift, DynamicsError, VectorFieldKind};
use crate::geometry::sampling::near_consensus;
use crate::geometry::{GeometryError, Point, Surface};
use crate::graph::{Graph, GraphError};
use crate::integrator::{IntegratorError, IntegratorSettings};

pub const SCHEMA_VERSION: u32 = 1;
/// Largest `|c|` accepted for explicitly listed initial points.
pub const EXPLICIT_POINT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}' (not a built-in name or a readable file)")]
    UnknownScenario(String),
    #[error("cannot read scenario file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported scenario schema {found} (expected {SCHEMA_VERSION})")]
    Schema { found: u32 },
    #[error("surface: {0}")]
    Geometry(#[from] GeometryError),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("dynamics: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("initial condition: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("integrator: {0}")]
    Integrator(#[from] IntegratorError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub surface: SurfaceSpec,
    pub graph: GraphSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub dynamics: DynamicsSpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub classify: ClassifySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Sphere {
        dim: usize,
    },
    /// Rows of the positive definite matrix `A`.
    Ellipsoid {
        matrix: Vec<Vec<f64>>,
    },
    Pseudosphere,
    Cylinder {
        #[serde(default = "one")]
        radius: f64,
    },
    Telescope {
        #[serde(default = "default_bands")]
        bands: u32,
        #[serde(default = "default_glue")]
        glue: f64,
    },
    /// `field` is a height-field registry key such as `"paraboloid:1,1"`.
    DoubleGraph {
        field: String,
    },
    /// `profile` is a profile registry key such as `"catenoid"`.
    Revolution {
        profile: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    Cycle {
        agents: usize,
    },
    Complete {
        agents: usize,
        #[serde(default = "one")]
        weight: f64,
    },
    Pair {
        #[serde(default = "one")]
        weight: f64,
    },
    /// `[i, j, weight]` triples with 1-based agent indices.
    Edges {
        agents: usize,
        edges: Vec<(usize, usize, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// One ambient coordinate vector per agent, in agent order.
    Explicit { points: Vec<Vec<f64>> },
    /// Agent `i` at azimuth `theta + 2π q i / N` on the parallel with meridian parameter `u`.
    Twisted {
        q: i64,
        #[serde(default)]
        theta: f64,
        #[serde(default)]
        u: f64,
    },
    RandomNearConsensus { radius: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    /// One flat row-major skew-symmetric matrix per agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<Vec<f64>>>,
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        Self {
            algorithm: default_algorithm(),
            drift: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub step: f64,
    pub horizon: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_max_norm")]
    pub max_norm: f64,
    #[serde(default = "default_drift_tolerance")]
    pub drift_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySpec {
    #[serde(default = "default_eps_consensus")]
    pub eps_consensus: f64,
    #[serde(default = "default_eps_residual")]
    pub eps_residual: f64,
}

impl Default for ClassifySpec {
    fn default() -> Self {
        Self {
            eps_consensus: default_eps_consensus(),
            eps_residual: default_eps_residual(),
        }
    }
}

/// Extra comparison run alongside the simulation and reported in the summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckSpec {
    /// Recovered ring parameter `u(t)` against the closed forms.
    PseudosphereU,
    /// Zhu flow on an ellipsoid against the sphere flow of the mapped initial data.
    SphereConjugacy,
    /// Circle simulation against direct integration of the phase equations.
    KuramotoPolar,
    /// Mirrored pair on a double graph against the reduced planar field.
    MexicanHatReduced,
    /// Residuals of both algorithms at the initial configuration.
    EquilibriumResiduals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_format")]
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            format: default_format(),
            dir: None,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_bands() -> u32 {
    crate::geometry::DEFAULT_BANDS
}
fn default_glue() -> f64 {
    crate::geometry::DEFAULT_GLUE_WIDTH
}
fn default_algorithm() -> Algorithm {
    Algorithm::GradientFlow
}
fn default_record_every() -> usize {
    1
}
fn default_max_norm() -> f64 {
    crate::integrator::DEFAULT_MAX_NORM
}
fn default_drift_tolerance() -> f64 {
    crate::integrator::DEFAULT_DRIFT_TOLERANCE
}
fn default_eps_consensus() -> f64 {
    crate::analysis::DEFAULT_EPS_CONSENSUS
}
fn default_eps_residual() -> f64 {
    crate::analysis::DEFAULT_EPS_RESIDUAL
}
fn default_format() -> OutputFormat {
    OutputFormat::Both
}

/// A validated scenario, ready to integrate.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub name: String,
    pub surface: Surface,
    pub graph: Graph,
    pub kind: VectorFieldKind,
    pub x0: Configuration,
    pub settings: IntegratorSettings,
    pub classify: ClassifyOptions,
    pub check: Option<CheckSpec>,
    /// Seed actually used for random initialization, if any.
    pub seed: Option<u64>,
    pub twisted: Option<TwistedSpec>,
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Self = toml::from_str(text)?;
        if scenario.schema != SCHEMA_VERSION {
            return Err(ScenarioError::Schema {
                found: scenario.schema,
            });
        }
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios always serialize")
    }

    pub fn prepare(&self) -> Result<Prepared, ScenarioError> {
        self.prepare_with(&Overrides::default())
    }

    pub fn prepare_with(&self, overrides: &Overrides) -> Result<Prepared, ScenarioError> {
        let surface = self.surface.build()?;
        let graph = self.graph.build()?;
        let n = graph.n_agents();
        let dim = surface.ambient_dim();

        let mut kind = VectorFieldKind::from(self.dynamics.algorithm);
        if let Some(rows) = &self.dynamics.drift {
            if rows.len() != n {
                return Err(ScenarioError::Invalid(format!(
                    "drift lists {} matrices for {n} agents",
                    rows.len()
                )));
            }
            kind = kind.with_drift(Drift::from_row_major(dim, rows)?);
        }

        let mut seed = None;
        let mut twisted = None;
        let x0 = match &self.initial {
            InitialSpec::Explicit { points } => {
                if points.len() != n {
                    return Err(ScenarioError::Invalid(format!(
                        "{} initial points for {n} agents",
                        points.len()
                    )));
                }
                let agents = points.iter().map(|p| Point::from_vec(p.clone())).collect();
                Configuration::on_surface(&surface, agents, EXPLICIT_POINT_TOLERANCE)?
            }
            &InitialSpec::Twisted { q, theta, u } => {
                let spec = TwistedSpec {
                    q,
                    theta,
                    u,
                    n_agents: n,
                };
                twisted = Some(spec);
                twisted_configuration(&surface, &spec)?
            }
            &InitialSpec::RandomNearConsensus { radius, seed: s } => {
                if !(radius >= 0.0 && radius.is_finite()) {
                    return Err(ScenarioError::Invalid(format!(
                        "perturbation radius must be non-negative, got {radius}"
                    )));
                }
                let s = overrides.seed.unwrap_or(s);
                seed = Some(s);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                Configuration::new(near_consensus(&surface, n, radius, &mut rng)?)?
            }
        };
        if seed.is_none() {
            seed = overrides.seed;
        }

        let spec = &self.integrator;
        let mut settings = IntegratorSettings::new(
            overrides.step.unwrap_or(spec.step),
            overrides.horizon.unwrap_or(spec.horizon),
        )
        .record_every(spec.record_every)
        .max_norm(spec.max_norm);
        settings.drift_tolerance = spec.drift_tolerance;
        settings.validate()?;

        let classify = ClassifyOptions {
            eps_consensus: self.classify.eps_consensus,
            eps_residual: self.classify.eps_residual,
        };
        if !(classify.eps_consensus > 0.0 && classify.eps_residual > 0.0) {
            return Err(ScenarioError::Invalid("classification tolerances must be positive".into()));
        }

        if let Some(check) = self.check {
            check_applies(check, &surface, &graph, &kind, twisted.as_ref())?;
        }

        Ok(Prepared {
            name: self.name.clone(),
            surface,
            graph,
            kind,
            x0,
            settings,
            classify,
            check: self.check,
            seed,
            twisted,
        })
    }
}

fn check_applies(
    check: CheckSpec,
    surface: &Surface,
    graph: &Graph,
    kind: &VectorFieldKind,
    twisted: Option<&TwistedSpec>,
) -> Result<(), ScenarioError> {
    let reject = |why: &str| Err(ScenarioError::Invalid(format!("check {check:?}: {why}")));
    match check {
        CheckSpec::PseudosphereU => {
            if *surface != Surface::Pseudosphere || twisted.map(|t| t.q) != Some(1) {
                return reject("needs a 1-twisted start on the pseudosphere");
            }
            if kind.algorithm != Algorithm::GradientFlow || kind.drift.is_some() {
                return reject("needs the gradient flow without drift");
            }
        }
        CheckSpec::SphereConjugacy => {
            if !matches!(surface, Surface::Ellipsoid(_)) {
                return reject("needs an ellipsoid surface");
            }
            if kind.algorithm != Algorithm::Zhu || kind.drift.is_some() {
                return reject("needs the Zhu algorithm without drift");
            }
        }
        CheckSpec::KuramotoPolar => {
            if *surface != (Surface::Sphere { dim: 1 }) {
                return reject("needs the circle S^1");
            }
            if kind.algorithm != Algorithm::GradientFlow {
                return reject("needs the gradient flow");
            }
        }
        CheckSpec::MexicanHatReduced => {
            if !matches!(surface, Surface::DoubleGraph(_)) || graph.n_agents() != 2 {
                return reject("needs two agents on a double graph");
            }
            if kind.algorithm != Algorithm::GradientFlow || kind.drift.is_some() {
                return reject("needs the gradient flow without drift");
            }
        }
        CheckSpec::EquilibriumResiduals => {}
    }
    Ok(())
}

impl SurfaceSpec {
    pub fn build(&self) -> Result<Surface, GeometryError> {
        match self {
            Self::Sphere { dim } => Surface::sphere(*dim),
            Self::Ellipsoid { matrix } => {
                let n = matrix.len();
                if let Some(row) = matrix.iter().find(|r| r.len() != n) {
                    return Err(GeometryError::DimensionMismatch {
                        expected: n,
                        found: row.len(),
                    });
                }
                let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
                Surface::ellipsoid(DMatrix::from_row_slice(n, n, &flat))
            }
            Self::Pseudosphere => Ok(Surface::Pseudosphere),
            Self::Cylinder { radius } => Surface::cylinder(*radius),
            Self::Telescope { bands, glue } => Surface::telescope(*bands, *glue),
            Self::DoubleGraph { field } => Ok(Surface::DoubleGraph(field.parse()?)),
            Self::Revolution { profile } => Ok(Surface::Revolution(profile.parse()?)),
        }
    }
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph, GraphError> {
        match self {
            Self::Cycle { agents } => Graph::cycle(*agents),
            Self::Complete { agents, weight } => Graph::complete(*agents, *weight),
            Self::Pair { weight } => Graph::pair(*weight),
            Self::Edges { agents, edges } => {
                let n = *agents;
                let zero_based = edges
                    .iter()
                    .map(|&(i, j, w)| {
                        let shift = |k: usize| {
                            k.checked_sub(1)
                                .ok_or(GraphError::IndexOutOfRange { index: k, n_agents: n })
                        };
                        Ok((shift(i)?, shift(j)?, w))
                    })
                    .collect::<Result<Vec<_>, GraphError>>()?;
                Graph::from_edges(n, zero_based)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema = 1
name = "tiny"

[surface]
kind = "sphere"
dim = 2

[graph]
kind = "cycle"
agents = 4

[initial]
kind = "random-near-consensus"
radius = 0.1
seed = 5

[integrator]
step = 0.01
horizon = 1.0
"#;

    #[test]
    fn minimal_file_uses_defaults() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.dynamics.algorithm, Algorithm::GradientFlow);
        assert_eq!(s.integrator.record_every, 1);
        assert_eq!(s.output.format, OutputFormat::Both);
        let p = s.prepare().unwrap();
        assert_eq!(p.x0.len(), 4);
        assert_eq!(p.seed, Some(5));
        assert_eq!(p.settings.n_steps(), 100);
    }

    #[test]
    fn toml_round_trip() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn overrides_replace_seed_and_timing() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        let o = Overrides {
            seed: Some(9),
            step: Some(0.1),
            horizon: Some(2.0),
        };
        let p = s.prepare_with(&o).unwrap();
        assert_eq!(p.seed, Some(9));
        assert_eq!(p.settings.n_steps(), 20);
        assert_ne!(p.x0, s.prepare().unwrap().x0);
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let text = MINIMAL.replace("schema = 1", "schema = 2");
        assert!(matches!(Scenario::from_toml(&text), Err(ScenarioError::Schema { found: 2 })));
    }

    #[test]
    fn unknown_registry_key_is_named() {
        let text = MINIMAL
            .replace("kind = \"sphere\"\ndim = 2", "kind = \"double-graph\"\nfield = \"saddle:1\"");
        let err = Scenario::from_toml(&text).unwrap().prepare().unwrap_err();
        assert!(err.to_string().contains("saddle"), "{err}");
        let text = MINIMAL.replace("kind = \"sphere\"", "kind = \"torus\"");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("torus"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("horizon = 1.0", "horizon = 1.0\nstpe = 3");
        assert!(Scenario::from_toml(&text).is_err());
    }

    #[test]
    fn edge_lists_are_one_based() {
        let spec = GraphSpec::Edges {
            agents: 3,
            edges: vec![(1, 2, 1.0), (2, 3, 0.5)],
        };
        let g = spec.build().unwrap();
        assert_eq!(g.edges()[0].i, 0);
        assert_eq!(g.edges()[1].j, 2);
        let bad = GraphSpec::Edges {
            agents: 3,
            edges: vec![(0, 2, 1.0)],
        };
        assert!(bad.build().is_err());
        let text = r#"kind = "edges"
agents = 3
edges = [[1, 2, 1], [2, 3, 2.5]]"#;
        let parsed: GraphSpec = toml::from_str(text).unwrap();
        assert_eq!(parsed.build().unwrap().edges()[1].weight, 2.5);
    }

    #[test]
    fn explicit_points_must_lie_on_the_surface() {
        let text = MINIMAL.replace(
            "kind = \"random-near-consensus\"\nradius = 0.1\nseed = 5",
            "kind = \"explicit\"\npoints = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 1.1]]",
        );
        assert!(matches!(
            Scenario::from_toml(&text).unwrap().prepare(),
            Err(ScenarioError::Dynamics(_))
        ));
        let ok = text.replace("1.1]", "1]");
        assert!(Scenario::from_toml(&ok).unwrap().prepare().is_ok());
    }

    #[test]
    fn drift_must_be_skew_and_sized() {
        let mut s = Scenario::from_toml(MINIMAL).unwrap();
        let skew = vec![0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        s.dynamics.drift = Some(vec![skew.clone(); 4]);
        assert!(s.prepare().unwrap().kind.drift.is_some());
        s.dynamics.drift = Some(vec![skew.clone(); 3]);
        assert!(s.prepare().is_err());
        let mut bent = skew;
        bent[1] = -2.0;
        s.dynamics.drift = Some(vec![bent; 4]);
        assert!(matches!(s.prepare(), Err(ScenarioError::Dynamics(DynamicsError::NonSkewDrift { agent: 0 }))));
    }

    #[test]
    fn checks_must_match_the_setup() {
        let mut s = Scenario::from_toml(MINIMAL).unwrap();
        for check in [CheckSpec::PseudosphereU, CheckSpec::SphereConjugacy, CheckSpec::KuramotoPolar, CheckSpec::MexicanHatReduced] {
            s.check = Some(check);
            assert!(matches!(s.prepare(), Err(ScenarioError::Invalid(_))), "{check:?}");
        }
        s.check = Some(CheckSpec::EquilibriumResiduals);
        assert!(s.prepare().is_ok());
    }
}
