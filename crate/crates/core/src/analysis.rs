//! Disagreement measures, twisted configurations, closed-form reductions and outcome
//! classification.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{equilibrium_residual, Configuration, VectorFieldKind};
use crate::geometry::{azimuth, invert_tractrix_height, GeometryError, HeightField, Point, Surface};
use crate::graph::Graph;
use crate::integrator::Trajectory;

pub const DEFAULT_EPS_CONSENSUS: f64 = 1e-6;
pub const DEFAULT_EPS_RESIDUAL: f64 = 1e-8;
/// Tolerance on neighbor angular gaps when recognizing twisted states.
pub const TWIST_GAP_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    Geometry(#[from] GeometryError),
    #[error("{surface} does not support twisted configurations")]
    UnsupportedSurface { surface: String },
    #[error("invalid twisted configuration: {0}")]
    InvalidSpec(String),
    #[error("outside domain: {0}")]
    Domain(String),
}

/// `V(x) = ½ Σ_{i,j ∈ E} a_ij ‖x_j − x_i‖²`, each undirected edge counted once.
pub fn disagreement(g: &Graph, x: &[Point]) -> f64 {
    0.5 * g
        .edges()
        .iter()
        .map(|e| e.weight * (&x[e.j] - &x[e.i]).norm_squared())
        .sum::<f64>()
}

/// Largest pairwise agent distance; zero exactly at coincidence.
pub fn consensus_diameter(x: &[Point]) -> f64 {
    let mut diameter: f64 = 0.0;
    for (i, a) in x.iter().enumerate() {
        for b in &x[i + 1..] {
            diameter = diameter.max((a - b).norm());
        }
    }
    diameter
}

/// Parameters of a q-twisted configuration: agent `i` (1-based) sits at azimuth
/// `theta + 2π q i / N` on the parallel with meridian parameter `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistedSpec {
    pub q: i64,
    pub theta: f64,
    pub u: f64,
    pub n_agents: usize,
}

/// Places agents on a parallel of a surface of revolution with winding number `q`.
///
/// On `S¹` the meridian parameter is ignored; on `S²` it is the polar angle.
pub fn twisted_configuration(surface: &Surface, spec: &TwistedSpec) -> Result<Configuration, AnalysisError> {
    if spec.n_agents < 3 {
        return Err(AnalysisError::InvalidSpec(format!(
            "twisted configurations need at least 3 agents, got {}",
            spec.n_agents
        )));
    }
    if !surface.is_revolution() {
        return Err(AnalysisError::UnsupportedSurface {
            surface: surface.name(),
        });
    }
    let n = spec.n_agents as f64;
    let agents = (1..=spec.n_agents)
        .map(|i| {
            let angle = spec.theta + TAU * spec.q as f64 * i as f64 / n;
            match surface {
                Surface::Sphere { dim: 1 } => Ok(Point::from_vec(vec![angle.cos(), angle.sin()])),
                _ => surface.revolution_point(spec.u, angle),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Configuration::new(agents).expect("agents share the ambient dimension"))
}

fn twist_factor(n_agents: usize) -> f64 {
    8.0 * (1.0 - (TAU / n_agents as f64).cos())
}

/// Closed form for the meridian parameter of an equidistant ring on the pseudosphere,
/// `u(t) = cosh⁻¹(8(1 − cos 2π/N) t + cosh u₀)`.
///
/// This expression does not satisfy `u̇ = f(u)` with [`pseudosphere_f`]; see
/// [`pseudosphere_u_exact`] for the solution of that ODE.
pub fn pseudosphere_u_oracle(t: f64, n_agents: usize, u0: f64) -> f64 {
    (twist_factor(n_agents) * t + u0.cosh()).acosh()
}

/// Solution of `u̇ = 4(1 − cos 2π/N) / sinh 2u`:
/// `cosh 2u(t) = 8(1 − cos 2π/N) t + cosh 2u₀`.
pub fn pseudosphere_u_exact(t: f64, n_agents: usize, u0: f64) -> f64 {
    0.5 * (twist_factor(n_agents) * t + (2.0 * u0).cosh()).acosh()
}

/// Reduced drift of the ring's meridian parameter, `f(u) = 4(1 − cos 2π/N) / sinh 2u`.
pub fn pseudosphere_f(u: f64, n_agents: usize) -> Result<f64, AnalysisError> {
    if !(u > 0.0) {
        return Err(AnalysisError::Domain(format!(
            "pseudosphere reduction needs u > 0, got {u}"
        )));
    }
    Ok(0.5 * twist_factor(n_agents) / (2.0 * u).sinh())
}

/// Recovers `u > 0` from a pseudosphere height `z = u − tanh u`.
pub fn pseudosphere_u_from_height(z: f64) -> Result<f64, AnalysisError> {
    Ok(invert_tractrix_height(z)?)
}

/// Kuramoto phase velocities `θ̇_i = ω_i + Σ_j k_ij sin(θ_j − θ_i)`.
pub fn kuramoto_reduced_field(thetas: &[f64], omegas: &[f64], k: &DMatrix<f64>) -> Vec<f64> {
    thetas
        .iter()
        .enumerate()
        .map(|(i, &ti)| {
            omegas[i]
                + thetas
                    .iter()
                    .enumerate()
                    .map(|(j, &tj)| k[(i, j)] * (tj - ti).sin())
                    .sum::<f64>()
        })
        .collect()
}

/// Planar velocity of the upper agent of a mirrored pair on the sheets `z = ±f(x, y)`:
/// `−2f / (1 + |∇f|²) · ∇f`.
pub fn mexican_hat_reduced_field(f: &HeightField, x: f64, y: f64) -> Result<(f64, f64), AnalysisError> {
    let height = f.value(x, y);
    if !(height > 0.0) {
        return Err(AnalysisError::Domain(format!(
            "height field {f} is not positive at ({x}, {y})"
        )));
    }
    let (fx, fy) = f.gradient(x, y);
    let scale = -2.0 * height / (1.0 + fx * fx + fy * fy);
    Ok((scale * fx, scale * fy))
}

/// Terminal behavior of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Consensus,
    Twisted(u32),
    Diverged,
    Other,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Consensus => "Consensus",
            Self::Twisted(_) => "Twisted",
            Self::Diverged => "Diverged",
            Self::Other => "Other",
        }
    }

    pub fn twist(&self) -> Option<u32> {
        match self {
            Self::Twisted(q) => Some(*q),
            _ => None,
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Twisted(q) => write!(f, "Twisted({q})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub eps_consensus: f64,
    pub eps_residual: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            eps_consensus: DEFAULT_EPS_CONSENSUS,
            eps_residual: DEFAULT_EPS_RESIDUAL,
        }
    }
}

/// Outcome plus the terminal measurements it was decided from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub outcome: Outcome,
    pub terminal_disagreement: f64,
    pub terminal_diameter: f64,
    /// `None` when the field cannot be evaluated at the terminal state.
    pub terminal_residual: Option<f64>,
    pub terminal_max_norm: f64,
}

/// Winding number of a configuration whose cyclic neighbors are separated by equal
/// azimuthal gaps `2πq/N` (within [`TWIST_GAP_TOLERANCE`]), for `q` in `1..N`.
pub fn detect_twist(surface: &Surface, x: &[Point]) -> Option<u32> {
    let n = x.len();
    if !surface.is_revolution() || n < 3 || x.iter().any(|p| p[0].hypot(p[1]) < 1e-12) {
        return None;
    }
    let angles: Vec<f64> = x.iter().map(azimuth).collect();
    let gap = |i: usize| (angles[(i + 1) % n] - angles[i]).rem_euclid(TAU);
    let q = (gap(0) * n as f64 / TAU).round() as usize % n;
    if q == 0 {
        return None;
    }
    let target = TAU * q as f64 / n as f64;
    let consistent = (0..n).all(|i| {
        let d = (gap(i) - target).rem_euclid(TAU);
        d.min(TAU - d) <= TWIST_GAP_TOLERANCE
    });
    consistent.then_some(q as u32)
}

/// Classifies a trajectory by its terminal state: `Diverged` if the divergence guard
/// fired, `Consensus` if both `V` and the diameter are below `eps_consensus`,
/// `Twisted(q)` at an equilibrium with equal angular gaps on a surface of revolution,
/// otherwise `Other`.
pub fn classify(
    traj: &Trajectory,
    kind: &VectorFieldKind,
    surface: &Surface,
    g: &Graph,
    opts: &ClassifyOptions,
) -> Classification {
    let x = traj.last_state();
    let terminal_disagreement = disagreement(g, x);
    let terminal_diameter = consensus_diameter(x);
    let terminal_residual = equilibrium_residual(kind, surface, g, x).ok();
    let outcome = if traj.diverged() {
        Outcome::Diverged
    } else if terminal_disagreement < opts.eps_consensus && terminal_diameter < opts.eps_consensus {
        Outcome::Consensus
    } else {
        match (terminal_residual, detect_twist(surface, x)) {
            (Some(r), Some(q)) if r < opts.eps_residual => Outcome::Twisted(q),
            _ => Outcome::Other,
        }
    };
    Classification {
        outcome,
        terminal_disagreement,
        terminal_diameter,
        terminal_residual,
        terminal_max_norm: x.max_norm(),
    }
}

/// Chord-length value of `V` for a 1-twisted ring of radius `r` on `C_N`: `2 N r² sin²(π/N)`.
pub fn twisted_ring_disagreement(radius: f64, n_agents: usize) -> f64 {
    let s = (PI / n_agents as f64).sin();
    2.0 * n_agents as f64 * radius * radius * s * s
}
