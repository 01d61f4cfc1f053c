//! Fixed-step RK4 integration with a per-step Newton retraction back onto the surface.

use serde::Serialize;
use thiserror::Error;

use crate::analysis::disagreement;
use crate::dynamics::{evaluate, Configuration, DynamicsError, VectorFieldKind};
use crate::geometry::{GeometryError, Point, Retraction, Surface};
use crate::graph::Graph;

pub const DEFAULT_DRIFT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_NORM: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("field evaluation failed at RK stage {stage}: {source}")]
    Field {
        stage: usize,
        #[source]
        source: DynamicsError,
    },
    #[error("retraction of agent {agent} failed: {source}")]
    Retraction {
        agent: usize,
        #[source]
        source: GeometryError,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegratorError {
    #[error("invalid integrator settings: {0}")]
    InvalidSettings(String),
    #[error("initial configuration rejected: {0}")]
    InitialState(#[from] DynamicsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorSettings {
    pub step: f64,
    pub horizon: f64,
    pub retract_each_step: bool,
    pub drift_tolerance: f64,
    pub record_every: usize,
    /// Divergence guard `R_max` on agent norms.
    pub max_norm: f64,
    pub retraction: Retraction,
}

impl IntegratorSettings {
    pub fn new(step: f64, horizon: f64) -> Self {
        Self {
            step,
            horizon,
            retract_each_step: true,
            drift_tolerance: DEFAULT_DRIFT_TOLERANCE,
            record_every: 1,
            max_norm: DEFAULT_MAX_NORM,
            retraction: Retraction::default(),
        }
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn max_norm(mut self, max_norm: f64) -> Self {
        self.max_norm = max_norm;
        self
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let bad = |msg: String| Err(IntegratorError::InvalidSettings(msg));
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if !(self.horizon >= self.step && self.horizon.is_finite()) {
            return bad(format!(
                "horizon {} must be finite and at least the step {}",
                self.horizon, self.step
            ));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.drift_tolerance > 0.0) {
            return bad(format!("drift tolerance must be positive, got {}", self.drift_tolerance));
        }
        if !(self.max_norm > 0.0) {
            return bad(format!("max norm must be positive, got {}", self.max_norm));
        }
        Ok(())
    }

    /// `⌈T/h⌉`, ignoring rounding noise in the quotient.
    pub fn n_steps(&self) -> usize {
        let ratio = self.horizon / self.step;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

/// Per-record diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Disagreement `V`.
    pub disagreement: f64,
    /// Largest `|c(x_i)|`.
    pub max_drift: f64,
    /// Largest `‖x_i‖`.
    pub max_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    /// The divergence guard fired.
    Diverged { time: f64, max_norm: f64 },
    /// A step left the surface by more than the drift tolerance; the offending state is not recorded.
    DriftExceeded { time: f64, drift: f64 },
    /// The step starting at `time` failed.
    StepFailed { time: f64, error: StepError },
}

impl Termination {
    pub fn is_aborted(&self) -> bool {
        matches!(self, Self::DriftExceeded { .. } | Self::StepFailed { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Configuration>,
    pub diagnostics: Vec<Diagnostics>,
    /// Accepted integration steps.
    pub steps: usize,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last_state(&self) -> &Configuration {
        self.states.last().expect("trajectory always records the initial state")
    }

    pub fn last_diagnostics(&self) -> &Diagnostics {
        self.diagnostics.last().expect("trajectory always records the initial state")
    }

    pub fn diverged(&self) -> bool {
        matches!(self.termination, Termination::Diverged { .. })
    }
}

fn combine(x: &[Point], k: &[Point], scale: f64) -> Vec<Point> {
    x.iter().zip(k).map(|(xi, ki)| xi + ki * scale).collect()
}

/// One classical RK4 step of size `h`, followed by a retraction of every agent when
/// `retraction` is given.
pub fn rk4_step(
    kind: &VectorFieldKind,
    surface: &Surface,
    g: &Graph,
    x: &[Point],
    h: f64,
    retraction: Option<&Retraction>,
) -> Result<Vec<Point>, StepError> {
    let field = |stage: usize, y: &[Point]| {
        evaluate(kind, surface, g, y).map_err(|source| StepError::Field { stage, source })
    };
    let k1 = field(1, x)?;
    let k2 = field(2, &combine(x, &k1, 0.5 * h))?;
    let k3 = field(3, &combine(x, &k2, 0.5 * h))?;
    let k4 = field(4, &combine(x, &k3, h))?;
    let sixth = h / 6.0;
    let next = x.iter().enumerate().map(|(i, xi)| {
        let incr = &k1[i] + (&k2[i] + &k3[i]) * 2.0 + &k4[i];
        xi + incr * sixth
    });
    match retraction {
        None => Ok(next.collect()),
        Some(opts) => next
            .enumerate()
            .map(|(agent, y)| {
                surface
                    .retract_with(&y, opts)
                    .map_err(|source| StepError::Retraction { agent, source })
            })
            .collect(),
    }
}

fn diagnostics(surface: &Surface, g: &Graph, x: &Configuration) -> Result<Diagnostics, GeometryError> {
    Ok(Diagnostics {
        disagreement: disagreement(g, x),
        max_drift: x.max_drift(surface)?,
        max_norm: x.max_norm(),
    })
}

/// Integrates from `x0` over `⌈T/h⌉` steps, recording every `record_every` steps and
/// the final state. Runs stop early on divergence, excessive drift or a failed step;
/// the partial trajectory is returned with the matching [`Termination`].
pub fn simulate(
    kind: &VectorFieldKind,
    surface: &Surface,
    g: &Graph,
    x0: &Configuration,
    settings: &IntegratorSettings,
) -> Result<Trajectory, IntegratorError> {
    settings.validate()?;
    if x0.len() != g.n_agents() {
        return Err(DynamicsError::AgentCount {
            expected: g.n_agents(),
            found: x0.len(),
        }
        .into());
    }
    let x0 = Configuration::on_surface(surface, x0.agents().to_vec(), settings.drift_tolerance)?;
    let first = diagnostics(surface, g, &x0)
        .map_err(|source| IntegratorError::InitialState(DynamicsError::Geometry { agent: 0, source }))?;

    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.clone()],
        diagnostics: vec![first],
        steps: 0,
        termination: Termination::Completed,
    };
    let retraction = settings.retract_each_step.then_some(&settings.retraction);
    let n_steps = settings.n_steps();
    let mut x = x0;

    for k in 1..=n_steps {
        let t_start = (k - 1) as f64 * settings.step;
        let t = k as f64 * settings.step;
        let next = match rk4_step(kind, surface, g, &x, settings.step, retraction) {
            Ok(next) => Configuration::new(next).expect("agent count is preserved"),
            Err(error) => {
                traj.termination = Termination::StepFailed { time: t_start, error };
                return Ok(traj);
            }
        };
        let diag = match diagnostics(surface, g, &next) {
            Ok(d) => d,
            Err(source) => {
                traj.termination = Termination::StepFailed {
                    time: t_start,
                    error: StepError::Retraction { agent: 0, source },
                };
                return Ok(traj);
            }
        };
        if !(diag.max_drift <= settings.drift_tolerance) {
            traj.termination = Termination::DriftExceeded {
                time: t,
                drift: diag.max_drift,
            };
            return Ok(traj);
        }
        traj.steps = k;
        let diverged = !(diag.max_norm <= settings.max_norm);
        if diverged || k % settings.record_every == 0 || k == n_steps {
            traj.times.push(t);
            traj.states.push(next.clone());
            traj.diagnostics.push(diag);
        }
        if diverged {
            traj.termination = Termination::Diverged {
                time: t,
                max_norm: diag.max_norm,
            };
            return Ok(traj);
        }
        x = next;
    }
    Ok(traj)
}

/// Classical RK4 on a flat state vector; returns the `steps + 1` states including `y0`.
///
/// Used for reduced (polar, planar, scalar) forms of the flows.
pub fn rk4_flat<F>(y0: &[f64], h: f64, steps: usize, mut f: F) -> Vec<Vec<f64>>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let axpy = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    let mut path = Vec::with_capacity(steps + 1);
    let mut y = y0.to_vec();
    path.push(y.clone());
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, 0.5 * h));
        let k3 = f(&axpy(&y, &k2, 0.5 * h));
        let k4 = f(&axpy(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        path.push(y.clone());
    }
    path
}
