//! Right-hand sides of the consensus flows on a hypersurface.
//!
//! * gradient flow: `ẋ_i = (I − n_i n_iᵀ) Σ_j a_ij (x_j − x_i)`
//! * oblique (Zhu) flow: `ẋ_i = (I − x_i n_iᵀ / ⟨x_i, n_i⟩) Σ_j a_ij x_j`
//!
//! optionally with a drift `Ω_i x_i`, `Ω_i` skew-symmetric.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Point, Surface};
use crate::graph::Graph;

/// Threshold on `|⟨x_i, n_i⟩|` below which the oblique projector is rejected.
pub const ZHU_DEGENERACY_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("agent {agent}: {source}")]
    Geometry {
        agent: usize,
        #[source]
        source: GeometryError,
    },
    #[error("agent {agent}: oblique projector is degenerate (⟨x, n⟩ = {inner:e})")]
    DegenerateProjector { agent: usize, inner: f64 },
    #[error("drift matrix for agent {agent} is not skew-symmetric")]
    NonSkewDrift { agent: usize },
    #[error("drift matrix for agent {agent} is {rows}x{cols}, expected {dim}x{dim}")]
    DriftShape {
        agent: usize,
        rows: usize,
        cols: usize,
        dim: usize,
    },
    #[error("expected {expected} agents, got {found}")]
    AgentCount { expected: usize, found: usize },
}

/// Ordered agent states `(x_1, …, x_N)`, all in the same ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    agents: Vec<Point>,
}

impl Configuration {
    pub fn new(agents: Vec<Point>) -> Result<Self, DynamicsError> {
        if agents.is_empty() {
            return Err(DynamicsError::AgentCount {
                expected: 1,
                found: 0,
            });
        }
        let dim = agents[0].len();
        if let Some(agent) = agents.iter().position(|a| a.len() != dim) {
            return Err(DynamicsError::Geometry {
                agent,
                source: GeometryError::DimensionMismatch {
                    expected: dim,
                    found: agents[agent].len(),
                },
            });
        }
        Ok(Self { agents })
    }

    /// Like [`Configuration::new`], additionally requiring `|c(x_i)| ≤ tol` for every agent.
    pub fn on_surface(surface: &Surface, agents: Vec<Point>, tol: f64) -> Result<Self, DynamicsError> {
        let config = Self::new(agents)?;
        for (agent, x) in config.agents.iter().enumerate() {
            let residual = surface
                .constraint_value(x)
                .map_err(|source| DynamicsError::Geometry { agent, source })?;
            if !(residual.abs() <= tol) {
                return Err(DynamicsError::Geometry {
                    agent,
                    source: GeometryError::OffSurface {
                        residual: residual.abs(),
                    },
                });
            }
        }
        Ok(config)
    }

    pub fn agents(&self) -> &[Point] {
        &self.agents
    }

    pub fn into_agents(self) -> Vec<Point> {
        self.agents
    }

    pub fn ambient_dim(&self) -> usize {
        self.agents[0].len()
    }

    /// Largest `|c(x_i)|` over the agents.
    pub fn max_drift(&self, surface: &Surface) -> Result<f64, GeometryError> {
        self.agents
            .iter()
            .map(|x| surface.constraint_value(x).map(f64::abs))
            .try_fold(0.0_f64, |acc, c| c.map(|c| acc.max(c)))
    }

    pub fn max_norm(&self) -> f64 {
        self.agents.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Deref for Configuration {
    type Target = [Point];

    fn deref(&self) -> &[Point] {
        &self.agents
    }
}

/// Which consensus algorithm drives the agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Gradient descent flow of the disagreement function.
    GradientFlow,
    /// Oblique-projector flow; requires `⟨x_i, n_i⟩ ≠ 0`.
    Zhu,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::GradientFlow => "gradient-flow",
            Self::Zhu => "zhu",
        })
    }
}

/// Per-agent skew-symmetric drift generators `Ω_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    omegas: Vec<DMatrix<f64>>,
}

impl Drift {
    /// Each `Ω_i` must satisfy `Ω_i + Ω_iᵀ = 0` exactly.
    pub fn new(omegas: Vec<DMatrix<f64>>) -> Result<Self, DynamicsError> {
        for (agent, omega) in omegas.iter().enumerate() {
            if !omega.is_square() {
                return Err(DynamicsError::DriftShape {
                    agent,
                    rows: omega.nrows(),
                    cols: omega.ncols(),
                    dim: omega.nrows(),
                });
            }
            if (omega + omega.transpose()).iter().any(|&v| v != 0.0) {
                return Err(DynamicsError::NonSkewDrift { agent });
            }
        }
        Ok(Self { omegas })
    }

    /// Builds square matrices of size `dim` from flat row-major arrays.
    pub fn from_row_major(dim: usize, rows: &[Vec<f64>]) -> Result<Self, DynamicsError> {
        let omegas = rows
            .iter()
            .enumerate()
            .map(|(agent, flat)| {
                if flat.len() != dim * dim {
                    return Err(DynamicsError::DriftShape {
                        agent,
                        rows: flat.len(),
                        cols: 1,
                        dim,
                    });
                }
                Ok(DMatrix::from_row_slice(dim, dim, flat))
            })
            .collect::<Result<_, _>>()?;
        Self::new(omegas)
    }

    /// Planar rotations `[[0, −ω_i], [ω_i, 0]]`, i.e. angular velocities `ω_i` on the circle.
    pub fn planar(frequencies: &[f64]) -> Self {
        let omegas = frequencies
            .iter()
            .map(|&w| DMatrix::from_row_slice(2, 2, &[0.0, -w, w, 0.0]))
            .collect();
        Self { omegas }
    }

    pub fn omegas(&self) -> &[DMatrix<f64>] {
        &self.omegas
    }
}

/// An algorithm plus an optional drift term.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldKind {
    pub algorithm: Algorithm,
    pub drift: Option<Drift>,
}

impl VectorFieldKind {
    pub fn gradient_flow() -> Self {
        Self {
            algorithm: Algorithm::GradientFlow,
            drift: None,
        }
    }

    pub fn zhu() -> Self {
        Self {
            algorithm: Algorithm::Zhu,
            drift: None,
        }
    }

    pub fn with_drift(mut self, drift: Drift) -> Self {
        self.drift = Some(drift);
        self
    }
}

impl From<Algorithm> for VectorFieldKind {
    fn from(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            drift: None,
        }
    }
}

fn check_agents(g: &Graph, x: &[Point]) -> Result<(), DynamicsError> {
    if x.len() == g.n_agents() {
        Ok(())
    } else {
        Err(DynamicsError::AgentCount {
            expected: g.n_agents(),
            found: x.len(),
        })
    }
}

fn at_agent(agent: usize) -> impl Fn(GeometryError) -> DynamicsError {
    move |source| DynamicsError::Geometry { agent, source }
}

/// Velocities of the gradient descent flow of the disagreement function.
pub fn gradient_flow_field(
    surface: &Surface,
    g: &Graph,
    x: &[Point],
) -> Result<Vec<Point>, DynamicsError> {
    check_agents(g, x)?;
    x.iter()
        .enumerate()
        .map(|(i, xi)| {
            surface.check_dim(xi).map_err(at_agent(i))?;
            let mut pull = Point::zeros(xi.len());
            for &(j, a) in g.neighbors(i).expect("index checked") {
                pull += (&x[j] - xi) * a;
            }
            let n = surface.unit_normal(xi).map_err(at_agent(i))?;
            let normal_part = n.dot(&pull);
            Ok(pull - n * normal_part)
        })
        .collect()
}

/// Velocities of the oblique-projector flow.
pub fn zhu_field(surface: &Surface, g: &Graph, x: &[Point]) -> Result<Vec<Point>, DynamicsError> {
    check_agents(g, x)?;
    x.iter()
        .enumerate()
        .map(|(i, xi)| {
            surface.check_dim(xi).map_err(at_agent(i))?;
            let mut pull = Point::zeros(xi.len());
            for &(j, a) in g.neighbors(i).expect("index checked") {
                pull += &x[j] * a;
            }
            let n = surface.unit_normal(xi).map_err(at_agent(i))?;
            let inner = xi.dot(&n);
            if !(inner.abs() > ZHU_DEGENERACY_THRESHOLD) {
                return Err(DynamicsError::DegenerateProjector { agent: i, inner });
            }
            let coeff = n.dot(&pull) / inner;
            Ok(pull - xi * coeff)
        })
        .collect()
}

/// Adds `Ω_i x_i` to each velocity.
pub fn apply_drift(
    mut field: Vec<Point>,
    drift: &Drift,
    x: &[Point],
) -> Result<Vec<Point>, DynamicsError> {
    if drift.omegas.len() != x.len() || field.len() != x.len() {
        return Err(DynamicsError::AgentCount {
            expected: x.len(),
            found: drift.omegas.len().min(field.len()),
        });
    }
    for (agent, ((v, omega), xi)) in field.iter_mut().zip(&drift.omegas).zip(x).enumerate() {
        if omega.nrows() != xi.len() || omega.ncols() != xi.len() {
            return Err(DynamicsError::DriftShape {
                agent,
                rows: omega.nrows(),
                cols: omega.ncols(),
                dim: xi.len(),
            });
        }
        v.gemv(1.0, omega, xi, 1.0);
    }
    Ok(field)
}

/// Full right-hand side for `kind`.
pub fn evaluate(
    kind: &VectorFieldKind,
    surface: &Surface,
    g: &Graph,
    x: &[Point],
) -> Result<Vec<Point>, DynamicsError> {
    let field = match kind.algorithm {
        Algorithm::GradientFlow => gradient_flow_field(surface, g, x)?,
        Algorithm::Zhu => zhu_field(surface, g, x)?,
    };
    match &kind.drift {
        Some(drift) => apply_drift(field, drift, x),
        None => Ok(field),
    }
}

/// Largest agent speed; zero exactly at equilibria of `kind`.
pub fn equilibrium_residual(
    kind: &VectorFieldKind,
    surface: &Surface,
    g: &Graph,
    x: &[Point],
) -> Result<f64, DynamicsError> {
    Ok(evaluate(kind, surface, g, x)?
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sampling::{random_configuration, random_rotation, random_spd};
    use crate::geometry::{HeightField, Profile, Telescope};
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn diag41() -> Surface {
        Surface::ellipsoid(DMatrix::from_diagonal(&dvector![4.0, 1.0])).unwrap()
    }

    #[test]
    fn gradient_flow_examples() {
        let s1 = Surface::sphere(1).unwrap();
        let pair = Graph::pair(1.0).unwrap();
        let v = gradient_flow_field(&s1, &pair, &[dvector![1.0, 0.0], dvector![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(v[0], dvector![0.0, 1.0], epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], dvector![1.0, 0.0], epsilon = 1e-15);

        let x = dvector![0.6, 0.8];
        let v = gradient_flow_field(&s1, &pair, &[x.clone(), -x.clone()]).unwrap();
        assert!(v.iter().all(|vi| vi.norm() < 1e-15));

        let cyl = Surface::cylinder(1.0).unwrap();
        let p = dvector![0.0, 1.0, 0.3];
        let v = gradient_flow_field(&cyl, &Graph::cycle(3).unwrap(), &[p.clone(), p.clone(), p]).unwrap();
        assert!(v.iter().all(|vi| vi.norm() == 0.0));
    }

    #[test]
    fn singular_agent_is_identified() {
        let s2 = Surface::sphere(2).unwrap();
        let g = Graph::cycle(3).unwrap();
        let x = vec![dvector![1.0, 0.0, 0.0], dvector![0.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0]];
        match gradient_flow_field(&s2, &g, &x) {
            Err(DynamicsError::Geometry { agent, .. }) => assert_eq!(agent, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            gradient_flow_field(&s2, &g, &x[..2]),
            Err(DynamicsError::AgentCount { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn zhu_examples() {
        let e = diag41();
        let pair = Graph::pair(1.0).unwrap();
        let t: f64 = 0.7;
        let x1 = dvector![0.5 * t.cos(), t.sin()];
        let v = zhu_field(&e, &pair, &[x1.clone(), -x1.clone()]).unwrap();
        assert!(v.iter().all(|vi| vi.norm() < 1e-15));

        let v = zhu_field(&e, &pair, &[x1.clone(), x1.clone()]).unwrap();
        assert!(v.iter().all(|vi| vi.norm() < 1e-15));
    }

    #[test]
    fn zhu_rejects_degenerate_projector() {
        // upper sheet of z = 1 + ρ²: n ∝ (−2x, −2y, 1), so ⟨x, n⟩ ∝ 1 − ρ² vanishes on ρ = 1
        let f = HeightField::paraboloid(1.0, 1.0).unwrap();
        let dg = Surface::DoubleGraph(f);
        let p = dvector![1.0, 0.0, 2.0];
        let q = dvector![0.0, 0.5, 1.25];
        let g = Graph::pair(1.0).unwrap();
        match zhu_field(&dg, &g, &[p, q]) {
            Err(DynamicsError::DegenerateProjector { agent, .. }) => assert_eq!(agent, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn drift_examples() {
        let s1 = Surface::sphere(1).unwrap();
        let omega = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let drift = Drift::new(vec![omega]).unwrap();
        let out = apply_drift(vec![dvector![0.0, 0.0]], &drift, &[dvector![1.0, 0.0]]).unwrap();
        assert_eq!(out[0], dvector![0.0, 1.0]);

        let zero = Drift::new(vec![DMatrix::zeros(2, 2)]).unwrap();
        let field = vec![dvector![0.3, -0.1]];
        assert_eq!(apply_drift(field.clone(), &zero, &[dvector![1.0, 0.0]]).unwrap(), field);

        assert_eq!(
            Drift::new(vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])]),
            Err(DynamicsError::NonSkewDrift { agent: 0 })
        );
        assert_eq!(Drift::planar(&[1.0]), drift);
        assert!(Drift::from_row_major(2, &[vec![0.0, -2.0, 2.0, 0.0]]).is_ok());
        assert!(Drift::from_row_major(2, &[vec![0.0, -2.0, 2.0]]).is_err());
        let _ = s1;
    }

    #[test]
    fn skew_drift_is_tangent_to_spheres() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let m = DMatrix::<f64>::from_fn(4, 4, |_, _| rng.sample(StandardNormal));
            let omega = &m - m.transpose();
            let x = Point::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
            assert!(x.dot(&(&omega * &x)).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_separates_zhu_from_gradient_flow() {
        let e = diag41();
        let pair = Graph::pair(1.0).unwrap();
        let t = std::f64::consts::FRAC_PI_4;
        let x1 = dvector![0.5 * t.cos(), t.sin()];
        let x = [x1.clone(), -x1];
        let zhu = equilibrium_residual(&VectorFieldKind::zhu(), &e, &pair, &x).unwrap();
        let grad = equilibrium_residual(&VectorFieldKind::gradient_flow(), &e, &pair, &x).unwrap();
        assert!(zhu < 1e-15);
        assert!(grad > 0.1, "{grad}");
    }

    #[test]
    fn twisted_great_circle_is_a_gradient_equilibrium() {
        let s1 = Surface::sphere(1).unwrap();
        for n in 3..12 {
            let g = Graph::cycle(n).unwrap();
            let x: Vec<Point> = (1..=n)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    dvector![a.cos(), a.sin()]
                })
                .collect();
            let r = equilibrium_residual(&VectorFieldKind::gradient_flow(), &s1, &g, &x).unwrap();
            assert!(r <= 1e-12, "n={n} r={r}");
        }
    }

    fn surfaces(rng: &mut ChaCha8Rng) -> Vec<Surface> {
        vec![
            Surface::sphere(2).unwrap(),
            Surface::sphere(3).unwrap(),
            Surface::ellipsoid(random_spd(3, 20.0, rng)).unwrap(),
            Surface::Pseudosphere,
            Surface::cylinder(1.3).unwrap(),
            Surface::Telescope(Telescope::new(6, 0.3).unwrap()),
            Surface::DoubleGraph(HeightField::hat(1.0, 0.5, 1.0).unwrap()),
            Surface::Revolution(Profile::Catenoid),
        ]
    }

    /// Disagreement evaluated directly for finite differencing.
    fn v_oracle(g: &Graph, x: &[Point]) -> f64 {
        g.edges()
            .iter()
            .map(|e| 0.5 * e.weight * (&x[e.j] - &x[e.i]).norm_squared())
            .sum()
    }

    #[test]
    fn gradient_field_is_projected_negative_gradient_of_disagreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = 1e-5;
        for s in surfaces(&mut rng) {
            for _ in 0..50 {
                let g = Graph::cycle(5).unwrap();
                let x = random_configuration(&s, 5, &mut rng).unwrap();
                let field = gradient_flow_field(&s, &g, &x).unwrap();
                for i in 0..5 {
                    let mut grad = Point::zeros(x[i].len());
                    for k in 0..x[i].len() {
                        let (mut plus, mut minus) = (x.clone(), x.clone());
                        plus[i][k] += h;
                        minus[i][k] -= h;
                        grad[k] = (v_oracle(&g, &plus) - v_oracle(&g, &minus)) / (2.0 * h);
                    }
                    let expected = -s.project(&x[i], &grad).unwrap();
                    let err = (&field[i] - &expected).norm();
                    assert!(
                        err <= 1e-6 * expected.norm().max(1e-3),
                        "{}: err={err} |v|={}",
                        s.name(),
                        expected.norm()
                    );
                }
            }
        }
    }

    #[test]
    fn both_fields_are_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for s in surfaces(&mut rng) {
            let g = Graph::complete(4, 0.7).unwrap();
            for _ in 0..30 {
                let x = random_configuration(&s, 4, &mut rng).unwrap();
                for field in [gradient_flow_field(&s, &g, &x), zhu_field(&s, &g, &x)] {
                    let Ok(field) = field else { continue };
                    for (xi, vi) in x.iter().zip(&field) {
                        let n = s.unit_normal(xi).unwrap();
                        assert!(n.dot(vi).abs() <= 1e-10 * vi.norm().max(1.0), "{}", s.name());
                    }
                }
            }
        }
    }

    #[test]
    fn fields_coincide_on_spheres() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for dim in 1..4 {
            let s = Surface::sphere(dim).unwrap();
            for _ in 0..100 {
                let n = rng.random_range(2..8);
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random_bool(0.6) {
                            edges.push((i, j, rng.random_range(0.0..2.0)));
                        }
                    }
                }
                let g = Graph::from_edges(n, edges).unwrap();
                let x = random_configuration(&s, n, &mut rng).unwrap();
                let a = gradient_flow_field(&s, &g, &x).unwrap();
                let b = zhu_field(&s, &g, &x).unwrap();
                for (va, vb) in a.iter().zip(&b) {
                    assert!((va - vb).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradient_field_is_rotation_equivariant_on_spheres() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let s = Surface::sphere(2).unwrap();
        let g = Graph::cycle(6).unwrap();
        for _ in 0..50 {
            let q = random_rotation(3, &mut rng);
            let x = random_configuration(&s, 6, &mut rng).unwrap();
            let qx: Vec<Point> = x.iter().map(|xi| &q * xi).collect();
            let lhs = gradient_flow_field(&s, &g, &qx).unwrap();
            let rhs = gradient_flow_field(&s, &g, &x).unwrap();
            for (l, r) in lhs.iter().zip(&rhs) {
                assert!((l - &q * r).norm() <= 1e-10);
            }
        }
    }
}
